use super::{log_softmax, softmax, Loss, LossWeights};
use crate::error::{Error, Result};
use crate::numerics::Point2;

pub const DEFAULT_SPLIT_FACTOR: usize = 2;
/// Label-smoothing width, in bins.
pub const DEFAULT_SIMCC_SIGMA: f64 = 6.0;

/// Per-keypoint horizontal and vertical bin distributions.
///
/// Bin `b` of the x vector covers the scaled coordinate `k * x = b`.
#[derive(Clone, Debug, PartialEq)]
pub struct SimccTarget {
    pub k: usize,
    pub sigma: f64,
    pub x: Vec<Vec<f64>>,
    pub y: Vec<Vec<f64>>,
    /// Keypoints outside the image are stored as uniform distributions and
    /// excluded from the loss.
    pub visible: Vec<bool>,
}

/// Unnormalized per-axis scores, shaped like [`SimccTarget`].
#[derive(Clone, Debug, PartialEq)]
pub struct SimccLogits {
    pub x: Vec<Vec<f64>>,
    pub y: Vec<Vec<f64>>,
}

impl SimccLogits {
    pub fn zeros_like(target: &SimccTarget) -> Self {
        Self {
            x: target.x.iter().map(|v| vec![0.0; v.len()]).collect(),
            y: target.y.iter().map(|v| vec![0.0; v.len()]).collect(),
        }
    }

    /// All x vectors, then all y vectors.
    pub fn to_flat(&self) -> Vec<f64> {
        self.x.iter().chain(&self.y).flatten().copied().collect()
    }

    /// Inverse of [`to_flat`](Self::to_flat), shaped like `self`.
    pub fn with_flat(&self, flat: &[f64]) -> Self {
        let mut it = flat.iter().copied();
        let mut refill = |rows: &Vec<Vec<f64>>| -> Vec<Vec<f64>> {
            rows.iter()
                .map(|r| (0..r.len()).map(|_| it.next().expect("flat length")).collect())
                .collect()
        };
        let x = refill(&self.x);
        let y = refill(&self.y);
        Self { x, y }
    }
}

fn axis_distribution(coord: f64, size: usize, k: usize, sigma: f64) -> Vec<f64> {
    let bins = k * size;
    let center = k as f64 * coord;
    if sigma > 0.0 {
        let weights: Vec<f64> = (0..bins)
            .map(|b| {
                let d = b as f64 - center;
                (-d * d / (2.0 * sigma * sigma)).exp()
            })
            .collect();
        let sum: f64 = weights.iter().sum();
        if sum > 0.0 && sum.is_finite() {
            return weights.into_iter().map(|w| w / sum).collect();
        }
    }
    // Nearest bin, ties to the lower one.
    let b = ((center - 0.5).ceil().max(0.0) as usize).min(bins - 1);
    let mut one_hot = vec![0.0; bins];
    one_hot[b] = 1.0;
    one_hot
}

/// Encodes pixel keypoints as discretized Gaussians over `k * width` and
/// `k * height` bins. `sigma = 0` gives one-hot targets.
pub fn simcc_encode(keypoints: &[Point2], width: usize, height: usize, k: usize, sigma: f64) -> Result<SimccTarget> {
    if width == 0 || height == 0 {
        return Err(Error::shape(format!(
            "image dims must be positive, got {width}x{height}"
        )));
    }
    if k == 0 {
        return Err(Error::shape("split factor k must be >= 1"));
    }
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::Range(format!("sigma must be finite and >= 0, got {sigma}")));
    }
    let (bx, by) = (k * width, k * height);
    let mut target = SimccTarget {
        k,
        sigma,
        x: Vec::with_capacity(keypoints.len()),
        y: Vec::with_capacity(keypoints.len()),
        visible: Vec::with_capacity(keypoints.len()),
    };
    for p in keypoints {
        let inside = p.x.is_finite()
            && p.y.is_finite()
            && (0.0..=(width - 1) as f64).contains(&p.x)
            && (0.0..=(height - 1) as f64).contains(&p.y);
        if inside {
            target.x.push(axis_distribution(p.x, width, k, sigma));
            target.y.push(axis_distribution(p.y, height, k, sigma));
        } else {
            target.x.push(vec![1.0 / bx as f64; bx]);
            target.y.push(vec![1.0 / by as f64; by]);
        }
        target.visible.push(inside);
    }
    Ok(target)
}

fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// Argmax bin divided by `k`, per axis. Ties go to the lowest bin.
pub fn simcc_decode(x: &[Vec<f64>], y: &[Vec<f64>], k: usize) -> Result<Vec<Point2>> {
    if k == 0 {
        return Err(Error::shape("split factor k must be >= 1"));
    }
    if x.len() != y.len() {
        return Err(Error::shape(format!("{} x vectors but {} y vectors", x.len(), y.len())));
    }
    x.iter()
        .zip(y)
        .map(|(vx, vy)| {
            if vx.is_empty() || vy.is_empty() {
                return Err(Error::shape("empty SimCC vector"));
            }
            Ok(Point2::new(argmax(vx) as f64 / k as f64, argmax(vy) as f64 / k as f64))
        })
        .collect()
}

/// `KL(t || softmax(z))` and its gradient `softmax(z) - t`.
fn kl_term(logits: &[f64], target: &[f64]) -> (f64, Vec<f64>) {
    let logq = log_softmax(logits);
    let kl = target
        .iter()
        .zip(&logq)
        .filter(|(&t, _)| t > 0.0)
        .map(|(&t, &lq)| t * (t.ln() - lq))
        .sum();
    let grad = softmax(logits).iter().zip(target).map(|(q, t)| q - t).collect();
    (kl, grad)
}

/// `lambda_xy * mean over visible keypoints of KL(t_x || q_x) + KL(t_y || q_y)`.
pub fn loss_simcc(pred: &SimccLogits, target: &SimccTarget, w: &LossWeights) -> Result<Loss<SimccLogits>> {
    let n = target.visible.len();
    let shapes_match = pred.x.len() == n
        && pred.y.len() == n
        && pred.x.iter().zip(&target.x).all(|(a, b)| a.len() == b.len())
        && pred.y.iter().zip(&target.y).all(|(a, b)| a.len() == b.len());
    if !shapes_match {
        return Err(Error::shape("SimCC prediction does not match target layout"));
    }
    if pred.to_flat().iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("SimCC logits".into()));
    }
    let mut grad = SimccLogits::zeros_like(target);
    let visible = target.visible.iter().filter(|&&v| v).count();
    if visible == 0 {
        return Ok(Loss {
            value: 0.0,
            grad,
            vacuous: true,
        });
    }
    let scale = w.lambda_xy / visible as f64;
    let mut value = 0.0;
    for j in (0..n).filter(|&j| target.visible[j]) {
        let (kx, gx) = kl_term(&pred.x[j], &target.x[j]);
        let (ky, gy) = kl_term(&pred.y[j], &target.y[j]);
        value += kx + ky;
        grad.x[j] = gx.into_iter().map(|g| scale * g).collect();
        grad.y[j] = gy.into_iter().map(|g| scale * g).collect();
    }
    Ok(Loss {
        value: scale * value,
        grad,
        vacuous: false,
    })
}
