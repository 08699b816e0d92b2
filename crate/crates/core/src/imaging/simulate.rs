use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::preprocess::CropWindow;
use super::psf::Psf;
use crate::error::{Error, Result};
use crate::numerics::{fft_convolve_2d, MultiChannelImage, Padding};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Provenance {
    Captured,
    Simulated,
}

impl Provenance {
    pub fn code(self) -> i64 {
        match self {
            Provenance::Captured => 0,
            Provenance::Simulated => 1,
        }
    }

    pub fn from_code(code: i64) -> Result<Self> {
        match code {
            0 => Ok(Provenance::Captured),
            1 => Ok(Provenance::Simulated),
            other => Err(Error::Format(format!("unknown provenance code {other}"))),
        }
    }
}

/// Three-channel sensor image with its acquisition metadata.
#[derive(Clone, Debug, PartialEq)]
pub struct Measurement {
    pub image: MultiChannelImage,
    pub provenance: Provenance,
    pub noise_sigma: f64,
    /// Largest intensity after clipping. Simulated measurements are not
    /// rescaled to a sensor range, so this is kept alongside them.
    pub peak_intensity: f64,
    /// Set once the measurement has been cropped by preprocessing.
    pub crop: Option<CropWindow>,
}

impl Measurement {
    pub fn new(image: MultiChannelImage, provenance: Provenance, noise_sigma: f64) -> Result<Self> {
        if image.channel_count() != 3 {
            return Err(Error::shape(format!(
                "measurement needs 3 channels, got {}",
                image.channel_count()
            )));
        }
        if image.channels().iter().any(|g| g.values().iter().any(|&v| v < 0.0)) {
            return Err(Error::Range("measurement intensities must be >= 0".into()));
        }
        if !(noise_sigma >= 0.0 && noise_sigma.is_finite()) {
            return Err(Error::Range(format!("noise sigma {noise_sigma}")));
        }
        let peak_intensity = image.max_value();
        Ok(Self {
            image,
            provenance,
            noise_sigma,
            peak_intensity,
            crop: None,
        })
    }

    pub fn dims(&self) -> (usize, usize) {
        self.image.dims()
    }
}

/// Additive Gaussian read noise.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NoiseSpec {
    pub gaussian_sigma: f64,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn none() -> Self {
        Self {
            gaussian_sigma: 0.0,
            seed: 0,
        }
    }
}

/// Noiseless, unclipped `psf * scene` for every channel.
pub fn forward_model(scene: &MultiChannelImage, psf: &Psf, padding: Padding) -> Result<MultiChannelImage> {
    scene.map_channels(|channel| fft_convolve_2d(channel, psf.grid(), padding))
}

/// Simulates a lensless capture of `scene`: convolution with the PSF, seeded
/// Gaussian noise, then clipping at zero.
pub fn simulate_measurement(
    scene: &MultiChannelImage,
    psf: &Psf,
    noise: &NoiseSpec,
    padding: Padding,
) -> Result<Measurement> {
    psf.require_normalized()?;
    if scene.channel_count() != 3 {
        return Err(Error::shape(format!(
            "scene needs 3 channels, got {}",
            scene.channel_count()
        )));
    }
    if scene
        .channels()
        .iter()
        .any(|g| g.values().iter().any(|v| !(0.0..=1.0).contains(v)))
    {
        return Err(Error::Range("scene intensities must lie in [0, 1]".into()));
    }
    if !(noise.gaussian_sigma >= 0.0 && noise.gaussian_sigma.is_finite()) {
        return Err(Error::Range(format!("noise sigma {}", noise.gaussian_sigma)));
    }

    let blurred = forward_model(scene, psf, padding)?;
    let mut chw = blurred.to_chw();
    if noise.gaussian_sigma > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(noise.seed);
        let normal = Normal::new(0.0, noise.gaussian_sigma).expect("sigma validated above");
        chw.iter_mut().for_each(|v| *v += normal.sample(&mut rng));
    }
    chw.iter_mut().for_each(|v| *v = v.max(0.0));

    let (h, w) = scene.dims();
    let image = MultiChannelImage::from_chw(3, h, w, chw)?;
    Measurement::new(image, Provenance::Simulated, noise.gaussian_sigma)
}
