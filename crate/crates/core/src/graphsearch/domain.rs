use crate::imageops;
use crate::raster::Raster;
use crate::segmenter::RoughSegmentation;

use super::GraphSearchError;

/// Nearest-component partition of the image. Cell borders are the medial
/// axis between components.
#[derive(Debug, Clone, PartialEq)]
pub struct DomainCells {
    owner: Raster<u32>,
}

impl DomainCells {
    #[inline]
    pub fn owner(&self, col: usize, row: usize) -> u32 {
        *self.owner.get(col, row)
    }

    /// Owner of the pixel containing a continuous point, `None` outside the image.
    pub fn owner_at(&self, x: f64, y: f64) -> Option<u32> {
        if !(x >= 0.0 && y >= 0.0) {
            return None;
        }
        self.owner.get_checked(x.floor() as i64, y.floor() as i64).copied()
    }

    pub fn owners(&self) -> &Raster<u32> {
        &self.owner
    }

    pub fn cell_mask(&self, id: u32) -> crate::raster::Mask {
        self.owner.map(|&o| o == id)
    }
}

/// Assigns every pixel to the component with the nearest pixel (Euclidean
/// distance between pixel centers); ties go to the smaller id.
pub fn compute_domain_cells(seg: &RoughSegmentation) -> Result<DomainCells, GraphSearchError> {
    if seg.components.is_empty() {
        return Err(GraphSearchError::NoComponents);
    }
    let (w, h) = seg.dims();
    let mut best = Raster::filled(w, h, f64::INFINITY);
    let mut owner = Raster::filled(w, h, 0u32);
    let mut comps: Vec<_> = seg.components.iter().collect();
    comps.sort_by_key(|c| c.id);
    for comp in comps {
        let d2 = imageops::squared_distance_to(&comp.mask);
        for ((b, o), &d) in best
            .as_mut_slice()
            .iter_mut()
            .zip(owner.as_mut_slice().iter_mut())
            .zip(d2.as_slice())
        {
            if d < *b {
                *b = d;
                *o = comp.id;
            }
        }
    }
    Ok(DomainCells { owner })
}
