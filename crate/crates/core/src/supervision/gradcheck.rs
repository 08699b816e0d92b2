//! Central finite-difference verification of the analytic loss gradients.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{
    loss_iuv, loss_regressor, loss_simcc, simcc_encode, IuvMap, IuvPrediction, LossWeights, RegressorPrediction,
    RegressorTarget, SimccLogits,
};
use crate::error::{Error, Result};
use crate::numerics::Point2;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GradcheckConfig {
    pub step: f64,
    pub tolerance: f64,
    /// Lower bound on the relative-error denominator, so components that are
    /// zero up to rounding are compared absolutely.
    pub floor: f64,
    pub trials: usize,
    pub seed: u64,
    /// Negative control: perturbs the analytic gradient before comparison.
    pub corrupt_gradient: bool,
}

impl Default for GradcheckConfig {
    fn default() -> Self {
        Self {
            step: 1e-5,
            tolerance: 1e-4,
            floor: 1e-5,
            trials: 50,
            seed: 0,
            corrupt_gradient: false,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GradcheckOutcome {
    pub max_rel_error: f64,
    pub worst_index: usize,
    pub checked: usize,
}

/// Compares `analytic` against central differences of `f` at `x`, one
/// coordinate at a time.
pub fn check_gradient(
    f: impl Fn(&[f64]) -> Result<f64>,
    x: &[f64],
    analytic: &[f64],
    step: f64,
    floor: f64,
) -> Result<GradcheckOutcome> {
    if x.len() != analytic.len() {
        return Err(Error::shape(format!(
            "{} inputs but {} gradient entries",
            x.len(),
            analytic.len()
        )));
    }
    let mut probe = x.to_vec();
    let mut out = GradcheckOutcome {
        max_rel_error: 0.0,
        worst_index: 0,
        checked: x.len(),
    };
    for i in 0..x.len() {
        probe[i] = x[i] + step;
        let up = f(&probe)?;
        probe[i] = x[i] - step;
        let down = f(&probe)?;
        probe[i] = x[i];
        let numeric = (up - down) / (2.0 * step);
        let a = analytic[i];
        let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(floor);
        if !(rel <= out.max_rel_error) {
            out.max_rel_error = rel;
            out.worst_index = i;
        }
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LossFamily {
    Regressor,
    Simcc,
    Iuv,
}

impl LossFamily {
    pub const ALL: [LossFamily; 3] = [LossFamily::Regressor, LossFamily::Simcc, LossFamily::Iuv];

    pub fn name(self) -> &'static str {
        match self {
            LossFamily::Regressor => "regressor",
            LossFamily::Simcc => "simcc",
            LossFamily::Iuv => "iuv",
        }
    }
}

impl fmt::Display for LossFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GradcheckReport {
    pub family: LossFamily,
    pub trials: usize,
    pub max_rel_error: f64,
    pub passed: bool,
    /// No trials ran, so the pass is vacuous.
    pub vacuous: bool,
}

/// A point to check and the loss evaluated around it.
struct Instance {
    x: Vec<f64>,
    analytic: Vec<f64>,
    eval: Box<dyn Fn(&[f64]) -> Result<f64> + Send + Sync>,
}

fn random_weights(rng: &mut ChaCha8Rng) -> LossWeights {
    let mut w = LossWeights::default();
    for lambda in [
        &mut w.lambda_2d,
        &mut w.lambda_3d,
        &mut w.lambda_para,
        &mut w.lambda_xy,
        &mut w.lambda_pi,
        &mut w.lambda_uv,
    ] {
        *lambda = rng.random_range(0.1..3.0);
    }
    w
}

fn uniform_vec(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(lo..hi)).collect()
}

fn regressor_instance(rng: &mut ChaCha8Rng) -> Result<Instance> {
    let pred = RegressorPrediction {
        theta: uniform_vec(rng, 85, -2.0, 2.0),
        k2d: uniform_vec(rng, 28, -1.0, 1.0),
        j3d: uniform_vec(rng, 42, -1.0, 1.0),
    };
    let maybe = |n: usize, rng: &mut ChaCha8Rng| rng.random_bool(0.8).then(|| uniform_vec(rng, n, -2.0, 2.0));
    let gt = RegressorTarget {
        theta: maybe(85, rng),
        k2d: maybe(28, rng),
        j3d: maybe(42, rng),
    };
    let w = random_weights(rng);
    let analytic = loss_regressor(&pred, &gt, &w)?.grad.to_flat();
    let x = pred.to_flat();
    Ok(Instance {
        x,
        analytic,
        eval: Box::new(move |flat| Ok(loss_regressor(&pred.with_flat(flat), &gt, &w)?.value)),
    })
}

fn simcc_instance(rng: &mut ChaCha8Rng) -> Result<Instance> {
    let (width, height) = (rng.random_range(16..=64), rng.random_range(16..=64));
    let k = rng.random_range(1..=3);
    let sigma = if rng.random_bool(0.1) {
        0.0
    } else {
        rng.random_range(0.5..6.0)
    };
    let keypoints: Vec<Point2> = (0..5)
        .map(|_| {
            Point2::new(
                rng.random_range(-2.0..width as f64 + 1.0),
                rng.random_range(-2.0..height as f64 + 1.0),
            )
        })
        .collect();
    let target = simcc_encode(&keypoints, width, height, k, sigma)?;
    let zeros = SimccLogits::zeros_like(&target);
    let x = uniform_vec(rng, zeros.to_flat().len(), -3.0, 3.0);
    let pred = zeros.with_flat(&x);
    let w = random_weights(rng);
    let analytic = loss_simcc(&pred, &target, &w)?.grad.to_flat();
    Ok(Instance {
        x,
        analytic,
        eval: Box::new(move |flat| Ok(loss_simcc(&zeros.with_flat(flat), &target, &w)?.value)),
    })
}

fn iuv_instance(rng: &mut ChaCha8Rng) -> Result<Instance> {
    let (parts, side) = (3, 16);
    let n = side * side;
    let gt = IuvMap {
        height: side,
        width: side,
        part_index: (0..n).map(|_| rng.random_range(0..=parts as u32)).collect(),
        u: uniform_vec(rng, n, 0.0, 1.0),
        v: uniform_vec(rng, n, 0.0, 1.0),
    };
    let shape = IuvPrediction::zeros(parts, side, side);
    let mut x = uniform_vec(rng, (parts + 1) * n, -3.0, 3.0);
    // Spread u, v so both smooth-L1 branches are exercised.
    x.extend(uniform_vec(rng, 2 * n, -1.0, 2.0));
    let pred = shape.with_flat(&x);
    let w = random_weights(rng);
    let analytic = loss_iuv(&pred, &gt, &w)?.grad.to_flat();
    Ok(Instance {
        x,
        analytic,
        eval: Box::new(move |flat| Ok(loss_iuv(&shape.with_flat(flat), &gt, &w)?.value)),
    })
}

fn corrupt(grad: &mut [f64]) {
    if let Some(i) = (0..grad.len()).max_by(|&a, &b| grad[a].abs().total_cmp(&grad[b].abs())) {
        grad[i] += 1e-3 * (1.0 + grad[i].abs());
    }
}

pub fn run_family(family: LossFamily, cfg: &GradcheckConfig) -> Result<GradcheckReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_mul(3).wrapping_add(family as u64));
    // Instances are drawn in order so the run stays deterministic; only the
    // checks run in parallel.
    let mut instances = Vec::with_capacity(cfg.trials);
    for _ in 0..cfg.trials {
        let mut inst = match family {
            LossFamily::Regressor => regressor_instance(&mut rng)?,
            LossFamily::Simcc => simcc_instance(&mut rng)?,
            LossFamily::Iuv => iuv_instance(&mut rng)?,
        };
        if cfg.corrupt_gradient {
            corrupt(&mut inst.analytic);
        }
        instances.push(inst);
    }
    let max_rel_error = instances
        .par_iter()
        .map(|inst| Ok(check_gradient(&inst.eval, &inst.x, &inst.analytic, cfg.step, cfg.floor)?.max_rel_error))
        .collect::<Result<Vec<f64>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    Ok(GradcheckReport {
        family,
        trials: cfg.trials,
        max_rel_error,
        passed: max_rel_error < cfg.tolerance,
        vacuous: cfg.trials == 0,
    })
}

/// Checks every loss family over `cfg.trials` random instances each.
pub fn run_gradcheck(cfg: &GradcheckConfig) -> Result<Vec<GradcheckReport>> {
    LossFamily::ALL.iter().map(|&f| run_family(f, cfg)).collect()
}
