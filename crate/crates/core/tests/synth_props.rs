mod common;

use common::*;
use tiltseg_core::geometry::box_from_clicks;
use tiltseg_core::raster::pixel_center;
use tiltseg_core::synth::{generate, write_dataset, SynthConfig, SynthImage};

fn twenty() -> Vec<SynthImage> {
    let base = SynthConfig::default();
    (0..20).map(|i| generate(&base.for_image(i), &format!("s{i}")).unwrap()).collect()
}

#[test]
fn annotations_satisfy_geometry_invariants() {
    for s in twenty() {
        let boxes = s.annotation.boxes().unwrap();
        assert_eq!(boxes.len(), s.gt_masks.len());
        for ((_, bx), (obj, mask)) in boxes.iter().zip(s.annotation.objects.iter().zip(&s.gt_masks)) {
            assert_eq!(box_from_clicks(&obj.clicks()).unwrap(), *bx);
            assert!(bx.extreme_points_on_boundary(1e-9));
            for p in mask.pixel_centers() {
                assert!(inside_rect(bx.center, bx.angle, bx.half_u, bx.half_v, p, 1e-9));
            }
            // extreme clicks are foreground pixels with a background 4-neighbour
            let (w, h) = mask.dims();
            for e in bx.extreme_points.as_array() {
                let (c, r) = (e.x.floor() as i64, e.y.floor() as i64);
                assert!(*mask.get(c as usize, r as usize));
                let edge = [(1, 0), (-1, 0), (0, 1), (0, -1)].iter().any(|(dc, dr)| {
                    let (nc, nr) = (c + dc, r + dr);
                    nc < 0 || nr < 0 || nc >= w as i64 || nr >= h as i64 || !*mask.get(nc as usize, nr as usize)
                });
                assert!(edge, "extreme point {e:?} is interior");
            }
        }
    }
}

#[test]
fn masks_are_star_shaped_and_disjoint() {
    for s in twenty() {
        for (shape, mask) in s.shapes.iter().zip(&s.gt_masks) {
            // every foreground pixel center sees the shape center along a
            // ray that stays inside the continuous shape
            for p in mask.pixel_centers() {
                for k in 1..20 {
                    let t = k as f64 / 20.0;
                    let q = pt(shape.center.x + t * (p.x - shape.center.x), shape.center.y + t * (p.y - shape.center.y));
                    assert!(shape.contains(q), "ray from {:?} to {p:?} leaves the shape", shape.center);
                }
            }
            assert!(shape.harmonics.iter().map(|h| h.0).sum::<f64>() < 1.0);
        }
        for i in 0..s.gt_masks.len() {
            for j in i + 1..s.gt_masks.len() {
                assert!(!s.gt_masks[i].intersects(&s.gt_masks[j]));
            }
        }
    }
}

#[test]
fn plain_disk_gives_square_box() {
    let cfg = SynthConfig {
        n_objects: 1,
        harmonic_amplitude: 0.0,
        radius_range: (15.0, 15.0),
        image_size: 64,
        ..Default::default()
    };
    let s = generate(&cfg, "disk").unwrap();
    let (_, bx) = s.annotation.boxes().unwrap()[0];
    assert!((bx.half_u - bx.half_v).abs() <= 1.0);
    assert!((bx.half_u - 15.0).abs() <= 1.0, "{}", bx.half_u);
    for (c, r) in s.gt_masks[0].pixels() {
        assert!(pixel_center(c, r).dist(s.shapes[0].center) <= 15.0 + 1e-9);
    }
}

#[test]
fn fixed_seed_is_reproducible() {
    let cfg = SynthConfig { seed: 9, ..Default::default() };
    let (a, b) = (generate(&cfg, "x").unwrap(), generate(&cfg, "x").unwrap());
    assert_eq!(a.image, b.image);
    assert_eq!(a.gt_masks, b.gt_masks);
    assert_eq!(a.annotation, b.annotation);

    let (da, db) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    write_dataset(da.path(), &cfg, 3).unwrap();
    write_dataset(db.path(), &cfg, 3).unwrap();
    for sub in ["images", "gt", "annotations"] {
        let names: Vec<_> = std::fs::read_dir(da.path().join(sub)).unwrap().map(|e| e.unwrap().file_name()).collect();
        assert_eq!(names.len(), 3);
        for n in names {
            assert_eq!(std::fs::read(da.path().join(sub).join(&n)).unwrap(), std::fs::read(db.path().join(sub).join(&n)).unwrap());
        }
    }
    assert_eq!(std::fs::read(da.path().join("manifest.json")).unwrap(), std::fs::read(db.path().join("manifest.json")).unwrap());
}

#[test]
fn jittered_clicks_still_derive_boxes() {
    let cfg = SynthConfig { click_jitter: 2.0, seed: 3, ..Default::default() };
    let s = generate(&cfg, "j").unwrap();
    assert_eq!(s.annotation.boxes().unwrap().len(), cfg.n_objects);
}
