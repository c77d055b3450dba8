//! Tilted-box weak supervision for instance segmentation.
//!
//! Six clicks per object give a tilted bounding box; boxes become a coarse
//! label map, a rough segmentation is matched to the boxes, and matched
//! components are refined with a column graph search into a fine label map.

pub mod annotation;
pub mod api;
pub mod boxgt;
pub mod eval;
pub mod geometry;
pub mod graphsearch;
pub mod imageops;
pub mod io;
pub mod pipeline;
pub mod raster;
pub mod report;
pub mod segmenter;
pub mod synth;

pub use geometry::{box_from_clicks, ClickSequence, ExtremePoints, Point2, TiltedBox};
pub use raster::{GrayImage, Mask, Raster};
