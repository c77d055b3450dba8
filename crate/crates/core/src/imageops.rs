//! Thin adapters between [`Raster`] and `imageproc`.

use image::{ImageBuffer, Luma};
use imageproc::distance_transform::Norm;
use imageproc::region_labelling::{connected_components, Connectivity};

use crate::raster::{GrayImage, Mask, Raster};

pub(crate) fn mask_to_luma(mask: &Mask) -> image::GrayImage {
    ImageBuffer::from_fn(mask.width() as u32, mask.height() as u32, |x, y| {
        Luma([if *mask.get(x as usize, y as usize) { 255u8 } else { 0 }])
    })
}

pub(crate) fn luma_to_mask(img: &image::GrayImage) -> Mask {
    Mask::from_fn(img.width() as usize, img.height() as usize, |c, r| {
        img.get_pixel(c as u32, r as u32)[0] != 0
    })
}

/// Dilation by a Euclidean disk of integer radius.
pub fn dilate_disk(mask: &Mask, radius: u8) -> Mask {
    if radius == 0 {
        return mask.clone();
    }
    luma_to_mask(&imageproc::morphology::dilate(&mask_to_luma(mask), Norm::L2, radius))
}

/// Erosion by a Euclidean disk of integer radius.
pub fn erode_disk(mask: &Mask, radius: u8) -> Mask {
    if radius == 0 {
        return mask.clone();
    }
    luma_to_mask(&imageproc::morphology::erode(&mask_to_luma(mask), Norm::L2, radius))
}

pub fn open_disk(mask: &Mask, radius: u8) -> Mask {
    if radius == 0 {
        return mask.clone();
    }
    luma_to_mask(&imageproc::morphology::open(&mask_to_luma(mask), Norm::L2, radius))
}

/// 8-connected labels, 0 for background, ids assigned in raster-scan order.
pub fn label_components(mask: &Mask) -> Raster<u32> {
    // imageproc overruns its union-find on a single foreground pixel
    if mask.width() * mask.height() == 1 {
        return Raster::from_vec(1, 1, vec![*mask.get(0, 0) as u32]);
    }
    let labels = connected_components(&mask_to_luma(mask), Connectivity::Eight, Luma([0u8]));
    Raster::from_vec(mask.width(), mask.height(), labels.into_raw())
}

/// Exact squared Euclidean distance (in pixel units) to the nearest foreground pixel.
pub fn squared_distance_to(mask: &Mask) -> Raster<f64> {
    let edt = imageproc::distance_transform::euclidean_squared_distance_transform(&mask_to_luma(mask));
    Raster::from_vec(mask.width(), mask.height(), edt.into_raw())
}

pub fn gaussian_blur(image: &GrayImage, sigma: f64) -> GrayImage {
    if sigma <= 0.0 {
        return image.clone();
    }
    let buf: ImageBuffer<Luma<f32>, Vec<f32>> = ImageBuffer::from_fn(
        image.width() as u32,
        image.height() as u32,
        |x, y| Luma([*image.get(x as usize, y as usize) as f32]),
    );
    let blurred = imageproc::filter::gaussian_blur_f32(&buf, sigma as f32);
    GrayImage::from_vec(
        image.width(),
        image.height(),
        blurred.into_raw().into_iter().map(f64::from).collect(),
    )
}

/// Otsu threshold on intensities in `[0, 1]`, returned in the same scale.
pub fn otsu_threshold(image: &GrayImage) -> f64 {
    let buf: image::GrayImage = ImageBuffer::from_fn(image.width() as u32, image.height() as u32, |x, y| {
        Luma([to_u8(*image.get(x as usize, y as usize))])
    });
    let level = imageproc::contrast::otsu_level(&buf);
    // pixels strictly above the level are foreground
    (level as f64 + 0.5) / 255.0
}

#[inline]
pub(crate) fn to_u8(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}
