//! Training losses with analytic gradients, plus the target generators they
//! consume.
//!
//! Every loss is mean-reduced and returns its gradient with respect to the
//! prediction alongside the value.

mod gradcheck;
mod iuv;
mod regression;
mod simcc;

pub use gradcheck::{check_gradient, run_gradcheck, GradcheckConfig, GradcheckOutcome, GradcheckReport, LossFamily};
pub use iuv::{loss_iuv, rasterize_iuv, smooth_l1, smooth_l1_grad, IuvGrad, IuvMap, IuvPrediction, DEFAULT_PART_COUNT};
pub use regression::{loss_regressor, RegressorGrad, RegressorPrediction, RegressorTarget};
pub use simcc::{
    loss_simcc, simcc_decode, simcc_encode, SimccLogits, SimccTarget, DEFAULT_SIMCC_SIGMA, DEFAULT_SPLIT_FACTOR,
};

use crate::error::{Error, Result};

/// Value and gradient of one loss.
#[derive(Clone, Debug, PartialEq)]
pub struct Loss<G> {
    pub value: f64,
    pub grad: G,
    /// Set when a term had nothing to average over (no visible keypoints,
    /// no foreground pixels, no ground truth). Such terms contribute 0.
    pub vacuous: bool,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossWeights {
    pub lambda_2d: f64,
    pub lambda_3d: f64,
    pub lambda_para: f64,
    pub lambda_xy: f64,
    pub lambda_pi: f64,
    pub lambda_uv: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self::uniform(1.0)
    }
}

const WEIGHT_KEYS: [&str; 6] = [
    "lambda_2d",
    "lambda_3d",
    "lambda_para",
    "lambda_xy",
    "lambda_pi",
    "lambda_uv",
];

impl LossWeights {
    pub fn uniform(value: f64) -> Self {
        Self {
            lambda_2d: value,
            lambda_3d: value,
            lambda_para: value,
            lambda_xy: value,
            lambda_pi: value,
            lambda_uv: value,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (key, v) in WEIGHT_KEYS.iter().zip(self.as_array()) {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Range(format!("{key} must be finite and >= 0, got {v}")));
            }
        }
        Ok(())
    }

    pub fn scaled(&self, c: f64) -> Self {
        let a = self.as_array().map(|v| v * c);
        Self::from_array(a)
    }

    fn as_array(&self) -> [f64; 6] {
        [
            self.lambda_2d,
            self.lambda_3d,
            self.lambda_para,
            self.lambda_xy,
            self.lambda_pi,
            self.lambda_uv,
        ]
    }

    fn from_array(a: [f64; 6]) -> Self {
        Self {
            lambda_2d: a[0],
            lambda_3d: a[1],
            lambda_para: a[2],
            lambda_xy: a[3],
            lambda_pi: a[4],
            lambda_uv: a[5],
        }
    }

    /// Sets the weight named `key` (one of `lambda_2d`, `lambda_3d`,
    /// `lambda_para`, `lambda_xy`, `lambda_pi`, `lambda_uv`). Returns `false`
    /// for unknown keys.
    pub fn set(&mut self, key: &str, value: f64) -> Result<bool> {
        let Some(i) = WEIGHT_KEYS.iter().position(|k| *k == key) else {
            return Ok(false);
        };
        let mut a = self.as_array();
        a[i] = value;
        let next = Self::from_array(a);
        next.validate()?;
        *self = next;
        Ok(true)
    }

    /// Parses `key = value` lines; `#` starts a comment. Missing keys keep
    /// their default of 1.
    pub fn parse(text: &str) -> Result<Self> {
        let mut w = Self::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", lineno + 1)))?;
            let value: f64 = value
                .trim()
                .parse()
                .map_err(|_| Error::Config(format!("line {}: bad number {:?}", lineno + 1, value.trim())))?;
            if !w.set(key.trim(), value)? {
                return Err(Error::Config(format!(
                    "line {}: unknown key {:?}",
                    lineno + 1,
                    key.trim()
                )));
            }
        }
        Ok(w)
    }

    pub fn to_kv(&self) -> String {
        WEIGHT_KEYS
            .iter()
            .zip(self.as_array())
            .map(|(k, v)| format!("{k} = {v}\n"))
            .collect()
    }
}

/// Regressor, SimCC and dense-correspondence loss values.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LossParts {
    pub regressor: f64,
    pub simcc: f64,
    pub iuv: f64,
}

pub fn loss_total(parts: &LossParts) -> f64 {
    parts.regressor + parts.simcc + parts.iuv
}

pub(crate) fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// `log softmax(logits)[i]` for every `i`.
pub(crate) fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|&z| (z - max).exp()).sum::<f64>().ln();
    logits.iter().map(|&z| z - lse).collect()
}
