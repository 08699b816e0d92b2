//! Numerical toolkit for human pose and shape estimation from lensless
//! camera measurements.
//!
//! * [`numerics`]: rasters, convolution, bilinear sampling, Procrustes.
//! * [`imaging`]: lensless forward model, preprocessing, Wiener deconvolution.
//! * [`bodymodel`]: SMPL-style parametric body and weak-perspective projection.
//! * [`features`]: feature pyramid contract and mesh-aligned iterative regression.
//! * [`supervision`]: training losses with analytic gradients and target generation.
//! * [`evaluation`]: MPJPE, PA-MPJPE and PVE.
//! * [`io`]: the `LHPS` tensor container and codecs.

pub mod bodymodel;
pub mod digest;
pub mod error;
pub mod evaluation;
pub mod features;
pub mod imaging;
pub mod io;
pub mod numerics;
pub mod supervision;

pub use error::{Error, Result};
