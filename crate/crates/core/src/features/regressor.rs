use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::reducer::Affine;
use crate::bodymodel::BodyParams;
use crate::digest::Digester;
use crate::error::{Error, Result};

/// One refinement step: `(Θ_t, features) → ΔΘ`, with ΔΘ laid out like
/// [`BodyParams::to_vector`].
pub trait Regressor: Send + Sync {
    fn residual(&self, theta: &BodyParams, features: &[f64]) -> Result<Vec<f64>>;

    fn digest(&self) -> String;
}

/// Always returns a zero residual.
#[derive(Clone, Copy, Debug, Default)]
pub struct ZeroRegressor;

impl Regressor for ZeroRegressor {
    fn residual(&self, theta: &BodyParams, _features: &[f64]) -> Result<Vec<f64>> {
        Ok(vec![0.0; BodyParams::vector_len(theta.pose.len())])
    }

    fn digest(&self) -> String {
        let mut d = Digester::new();
        d.str("zero-regressor");
        d.finish()
    }
}

/// Returns the same residual for every input.
#[derive(Clone, Debug, PartialEq)]
pub struct ConstantRegressor(pub Vec<f64>);

impl Regressor for ConstantRegressor {
    fn residual(&self, _theta: &BodyParams, _features: &[f64]) -> Result<Vec<f64>> {
        Ok(self.0.clone())
    }

    fn digest(&self) -> String {
        let mut d = Digester::new();
        d.str("constant-regressor").f64s(&self.0);
        d.finish()
    }
}

/// Two-layer tanh network over `[Θ, features]` whose output is scaled by
/// `gain`, so every residual component is bounded by `gain`.
#[derive(Clone, Debug, PartialEq)]
pub struct ToyRegressor {
    pub hidden: Affine,
    pub output: Affine,
    pub gain: f64,
}

impl ToyRegressor {
    pub fn seeded(param_len: usize, feature_len: usize, hidden: usize, gain: f64, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self {
            hidden: Affine::seeded(hidden, param_len + feature_len, true, &mut rng),
            output: Affine::seeded(param_len, hidden, true, &mut rng),
            gain,
        }
    }

    pub fn new(hidden: Affine, output: Affine, gain: f64) -> Result<Self> {
        if hidden.out_dim() != output.in_dim() {
            return Err(Error::shape("toy regressor layers do not chain"));
        }
        if !gain.is_finite() {
            return Err(Error::NonFinite("regressor gain".into()));
        }
        Ok(Self { hidden, output, gain })
    }

    pub fn feature_len(&self) -> usize {
        self.hidden.in_dim() - self.output.out_dim()
    }
}

impl Regressor for ToyRegressor {
    fn residual(&self, theta: &BodyParams, features: &[f64]) -> Result<Vec<f64>> {
        let mut input = theta.to_vector();
        if input.len() != self.output.out_dim() {
            return Err(Error::shape(format!(
                "regressor built for {} parameters, got {}",
                self.output.out_dim(),
                input.len()
            )));
        }
        input.extend_from_slice(features);
        let h = DVector::from_vec(self.hidden.apply(&input)?).map(f64::tanh);
        let out: DVector<f64> = (&self.output.weight * h + &self.output.bias).map(|v| self.gain * v.tanh());
        Ok(out.as_slice().to_vec())
    }

    fn digest(&self) -> String {
        let mut d = Digester::new();
        d.str("toy-regressor")
            .f64s(self.hidden.weight.iter())
            .f64s(self.hidden.bias.iter())
            .f64s(self.output.weight.iter())
            .f64s(self.output.bias.iter())
            .f64s([self.gain].iter());
        d.finish()
    }
}
