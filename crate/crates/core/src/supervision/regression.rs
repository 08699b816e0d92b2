use super::{Loss, LossWeights};
use crate::error::{Error, Result};

/// Flattened regressor outputs: parameters, 2D keypoints and 3D joints.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RegressorPrediction {
    pub theta: Vec<f64>,
    pub k2d: Vec<f64>,
    pub j3d: Vec<f64>,
}

impl RegressorPrediction {
    pub fn to_flat(&self) -> Vec<f64> {
        self.theta.iter().chain(&self.k2d).chain(&self.j3d).copied().collect()
    }

    pub fn with_flat(&self, flat: &[f64]) -> Self {
        let (t, rest) = flat.split_at(self.theta.len());
        let (k, j) = rest.split_at(self.k2d.len());
        Self {
            theta: t.to_vec(),
            k2d: k.to_vec(),
            j3d: j.to_vec(),
        }
    }
}

/// Ground truth; a missing component drops its term.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RegressorTarget {
    pub theta: Option<Vec<f64>>,
    pub k2d: Option<Vec<f64>>,
    pub j3d: Option<Vec<f64>>,
}

pub type RegressorGrad = RegressorPrediction;

/// `lambda * mean((x - x_hat)^2)` and its gradient.
fn squared_term(name: &str, pred: &[f64], gt: Option<&Vec<f64>>, lambda: f64) -> Result<(f64, Vec<f64>, bool)> {
    let Some(gt) = gt else {
        return Ok((0.0, vec![0.0; pred.len()], false));
    };
    if gt.len() != pred.len() {
        return Err(Error::shape(format!(
            "{name}: prediction has {} values, target {}",
            pred.len(),
            gt.len()
        )));
    }
    if pred.is_empty() {
        return Ok((0.0, Vec::new(), false));
    }
    let n = pred.len() as f64;
    let value = lambda * pred.iter().zip(gt).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / n;
    let grad = pred.iter().zip(gt).map(|(x, y)| 2.0 * lambda * (x - y) / n).collect();
    Ok((value, grad, true))
}

/// `lambda_2d * |K - K^|^2 + lambda_3d * |J - J^|^2 + lambda_para * |T - T^|^2`,
/// each squared norm averaged over its elements.
pub fn loss_regressor(
    pred: &RegressorPrediction,
    gt: &RegressorTarget,
    w: &LossWeights,
) -> Result<Loss<RegressorGrad>> {
    if pred.to_flat().iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("regressor prediction".into()));
    }
    let (lk, gk, uk) = squared_term("k2d", &pred.k2d, gt.k2d.as_ref(), w.lambda_2d)?;
    let (lj, gj, uj) = squared_term("j3d", &pred.j3d, gt.j3d.as_ref(), w.lambda_3d)?;
    let (lt, gt_, ut) = squared_term("theta", &pred.theta, gt.theta.as_ref(), w.lambda_para)?;
    Ok(Loss {
        value: lk + lj + lt,
        grad: RegressorPrediction {
            theta: gt_,
            k2d: gk,
            j3d: gj,
        },
        vacuous: !(uk || uj || ut),
    })
}
