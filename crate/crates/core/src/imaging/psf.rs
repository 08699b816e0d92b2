use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::numerics::Grid;

/// Tolerance on `Σ psf = 1` for a PSF to count as normalized.
pub const PSF_SUM_TOLERANCE: f64 = 1e-9;

/// Non-negative point-spread function of the lensless system.
#[derive(Clone, Debug, PartialEq)]
pub struct Psf {
    grid: Grid,
}

impl Psf {
    /// Wraps a non-negative raster as-is, without rescaling.
    pub fn new(grid: Grid) -> Result<Self> {
        if grid.values().iter().any(|&v| v < 0.0) {
            return Err(Error::Range("psf has negative intensities".into()));
        }
        Ok(Self { grid })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn dims(&self) -> (usize, usize) {
        self.grid.dims()
    }

    pub fn is_normalized(&self) -> bool {
        (self.grid.sum() - 1.0).abs() <= PSF_SUM_TOLERANCE
    }

    pub(crate) fn require_normalized(&self) -> Result<()> {
        if self.is_normalized() {
            Ok(())
        } else {
            Err(Error::PsfNotNormalized(self.grid.sum()))
        }
    }

    /// Unit impulse at the kernel center `(h / 2, w / 2)`.
    pub fn delta(height: usize, width: usize) -> Self {
        let mut grid = Grid::zeros(height, width);
        grid.set(height / 2, width / 2, 1.0);
        Self { grid }
    }

    /// Diffuser-like caustic pattern: `spots` randomly placed point sources of
    /// random brightness, each spread by a small Gaussian, then normalized.
    pub fn synthetic_caustic(height: usize, width: usize, spots: usize, seed: u64) -> Result<Self> {
        const SPOT_SIGMA: f64 = 0.6;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut grid = Grid::zeros(height, width);
        for _ in 0..spots.max(1) {
            let cy = rng.random_range(0.0..height as f64);
            let cx = rng.random_range(0.0..width as f64);
            let amp = rng.random_range(0.2..1.0);
            for dy in -2i64..=2 {
                for dx in -2i64..=2 {
                    let r = (cy.floor() as i64 + dy).rem_euclid(height as i64) as usize;
                    let c = (cx.floor() as i64 + dx).rem_euclid(width as i64) as usize;
                    let ddy = cy.floor() + dy as f64 - cy;
                    let ddx = cx.floor() + dx as f64 - cx;
                    let w = amp * (-(ddx * ddx + ddy * ddy) / (2.0 * SPOT_SIGMA * SPOT_SIGMA)).exp();
                    grid.set(r, c, grid.get(r, c) + w);
                }
            }
        }
        normalize_psf(&grid)
    }
}

/// Clips negatives to zero, then scales to unit sum.
pub fn normalize_psf(raw: &Grid) -> Result<Psf> {
    let clipped = raw.map(|v| v.max(0.0));
    let mass = clipped.sum();
    if mass <= 0.0 {
        return Err(Error::EmptyPsf);
    }
    Ok(Psf {
        grid: clipped.map(|v| v / mass),
    })
}
