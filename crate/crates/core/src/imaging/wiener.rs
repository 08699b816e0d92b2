use rustfft::num_complex::Complex64;
use rustfft::FftDirection;

use super::psf::Psf;
use super::simulate::Measurement;
use crate::error::{Error, Result};
use crate::numerics::fft::{embed_centered_wrapped, embed_top_left, fft2_in_place};
use crate::numerics::{Grid, MultiChannelImage};

/// Frequency-domain Wiener deconvolution, channel by channel:
/// `Î = B·conj(P) / (|P|² + 1/snr)`, clipped to `[0, 1]`.
///
/// The PSF is centered and wrapped onto the measurement grid, which makes
/// this the exact inverse of circular simulation as `snr → ∞`.
pub fn wiener_reconstruct(m: &Measurement, psf: &Psf, snr: f64) -> Result<MultiChannelImage> {
    if !(snr > 0.0 && snr.is_finite()) {
        return Err(Error::Range(format!("snr parameter must be positive, got {snr}")));
    }
    if psf.grid().values().iter().all(|&v| v == 0.0) {
        return Err(Error::DegeneratePsf);
    }
    psf.require_normalized()?;
    let (h, w) = m.dims();
    if psf.dims().0 > h || psf.dims().1 > w {
        return Err(Error::shape(format!(
            "psf {:?} larger than measurement {h}x{w}",
            psf.dims()
        )));
    }

    let mut transfer = embed_centered_wrapped(psf.grid(), h, w);
    fft2_in_place(&mut transfer, h, w, FftDirection::Forward);
    let inv_snr = 1.0 / snr;
    let filter: Vec<Complex64> = transfer.iter().map(|p| p.conj() / (p.norm_sqr() + inv_snr)).collect();

    m.image.map_channels(|channel| {
        let mut spectrum = embed_top_left(channel, h, w);
        fft2_in_place(&mut spectrum, h, w, FftDirection::Forward);
        spectrum.iter_mut().zip(&filter).for_each(|(b, f)| *b *= f);
        fft2_in_place(&mut spectrum, h, w, FftDirection::Inverse);
        Grid::new(h, w, spectrum.iter().map(|z| z.re.clamp(0.0, 1.0)).collect())
    })
}

/// Peak signal-to-noise ratio in dB for signals with peak value 1.
pub fn psnr(reference: &MultiChannelImage, estimate: &MultiChannelImage) -> f64 {
    let a = reference.to_chw();
    let b = estimate.to_chw();
    assert_eq!(a.len(), b.len());
    let mse = a.iter().zip(&b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / a.len() as f64;
    if mse == 0.0 {
        f64::INFINITY
    } else {
        -10.0 * mse.log10()
    }
}
