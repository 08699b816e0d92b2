//! Lensless camera forward model, measurement preprocessing and the Wiener
//! deconvolution baseline.
//!
//! The sensor image is the scene convolved with the system PSF, channel by
//! channel. Every scene point contributes a shifted copy of the PSF and the
//! copies add in intensity.

mod png;
mod preprocess;
mod psf;
mod simulate;
mod wiener;

pub use png::{read_png_scene, write_png};
pub use preprocess::{preprocess_measurement, CropWindow, NETWORK_INPUT_SIZE};
pub use psf::{normalize_psf, Psf, PSF_SUM_TOLERANCE};
pub use simulate::{forward_model, simulate_measurement, Measurement, NoiseSpec, Provenance};
pub use wiener::{psnr, wiener_reconstruct};
