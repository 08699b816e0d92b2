use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};

/// `x -> W x + b`.
#[derive(Clone, Debug, PartialEq)]
pub struct Affine {
    pub weight: DMatrix<f64>,
    pub bias: DVector<f64>,
}

impl Affine {
    pub fn new(weight: DMatrix<f64>, bias: DVector<f64>) -> Result<Self> {
        if weight.nrows() != bias.len() {
            return Err(Error::shape(format!(
                "affine weight has {} rows but bias has {}",
                weight.nrows(),
                bias.len()
            )));
        }
        if weight.iter().chain(bias.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("affine parameters".into()));
        }
        Ok(Self { weight, bias })
    }

    pub fn identity(width: usize) -> Self {
        Self {
            weight: DMatrix::identity(width, width),
            bias: DVector::zeros(width),
        }
    }

    /// Gaussian weights with variance `1 / in_dim`; zero bias unless `with_bias`.
    pub fn seeded(out_dim: usize, in_dim: usize, with_bias: bool, rng: &mut ChaCha8Rng) -> Self {
        let normal = Normal::new(0.0, 1.0 / (in_dim.max(1) as f64).sqrt()).expect("finite sigma");
        let weight = DMatrix::from_fn(out_dim, in_dim, |_, _| normal.sample(rng));
        let bias = if with_bias {
            DVector::from_fn(out_dim, |_, _| 0.1 * normal.sample(rng))
        } else {
            DVector::zeros(out_dim)
        };
        Self { weight, bias }
    }

    pub fn in_dim(&self) -> usize {
        self.weight.ncols()
    }

    pub fn out_dim(&self) -> usize {
        self.weight.nrows()
    }

    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.in_dim() {
            return Err(Error::shape(format!(
                "affine expects {} inputs, got {}",
                self.in_dim(),
                x.len()
            )));
        }
        let y = &self.weight * DVector::from_column_slice(x) + &self.bias;
        Ok(y.as_slice().to_vec())
    }
}

/// Per-level point-feature reducers for pyramid levels 1, 2 and 3, all
/// producing vectors of the same width.
#[derive(Clone, Debug, PartialEq)]
pub struct ReducerMlp {
    maps: Vec<Affine>,
}

pub const DEFAULT_REDUCED_WIDTH: usize = 5;

impl ReducerMlp {
    pub fn new(maps: Vec<Affine>) -> Result<Self> {
        if maps.len() != 3 {
            return Err(Error::shape(format!("reducer needs 3 level maps, got {}", maps.len())));
        }
        if maps.iter().any(|m| m.out_dim() != maps[0].out_dim()) {
            return Err(Error::shape("reducer output width differs across levels"));
        }
        Ok(Self { maps })
    }

    /// `channels[t]` is the channel count of pyramid level `t`.
    pub fn seeded(channels: [usize; 4], width: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let maps = (1..4)
            .map(|t| Affine::seeded(width, channels[t], true, &mut rng))
            .collect();
        Self { maps }
    }

    pub fn width(&self) -> usize {
        self.maps[0].out_dim()
    }

    pub fn maps(&self) -> &[Affine] {
        &self.maps
    }

    /// Level 0 only seeds the initial estimate and has no reducer.
    pub fn for_level(&self, level: usize) -> Result<&Affine> {
        match level {
            1..=3 => Ok(&self.maps[level - 1]),
            _ => Err(Error::shape(format!(
                "point features come from levels 1..=3, not {level}"
            ))),
        }
    }
}
