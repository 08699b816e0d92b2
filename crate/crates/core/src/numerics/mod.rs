//! Dense-array math shared by every other module.

mod convolve;
pub mod fft;
mod grid;
mod procrustes;
mod sample;

pub use convolve::{fft_convolve_2d, fft_convolve_2d_full, naive_convolve_2d, naive_convolve_2d_full, Padding};
pub use grid::{Grid, MultiChannelImage};
pub use procrustes::{alignment_residual, procrustes_align, procrustes_align_with, AlignMode, SimilarityTransform};
pub use sample::{bilinear_at, bilinear_sample};

use nalgebra::{Vector2, Vector3};

/// 2D points in pixel or normalized image coordinates.
pub type Point2 = Vector2<f64>;
/// 3D points in millimeters.
pub type Point3 = Vector3<f64>;
