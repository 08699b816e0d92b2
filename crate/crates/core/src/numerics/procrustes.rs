//! Closed-form Procrustes alignment of 3D point sets.

use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};

/// `x -> scale * rotation * x + translation`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SimilarityTransform {
    pub scale: f64,
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
}

impl SimilarityTransform {
    pub fn identity() -> Self {
        Self {
            scale: 1.0,
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }

    pub fn apply(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.scale * (self.rotation * p) + self.translation
    }

    pub fn apply_all(&self, points: &[Vector3<f64>]) -> Vec<Vector3<f64>> {
        points.iter().map(|p| self.apply(p)).collect()
    }

    /// `self ∘ other`.
    pub fn compose(&self, other: &SimilarityTransform) -> Self {
        Self {
            scale: self.scale * other.scale,
            rotation: self.rotation * other.rotation,
            translation: self.scale * (self.rotation * other.translation) + self.translation,
        }
    }
}

/// Whether the alignment may rescale the source.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum AlignMode {
    #[default]
    Similarity,
    Rigid,
}

/// Similarity transform minimizing `Σ ‖s·R·xᵢ + t − yᵢ‖²`.
pub fn procrustes_align(source: &[Vector3<f64>], target: &[Vector3<f64>]) -> Result<SimilarityTransform> {
    procrustes_align_with(source, target, AlignMode::Similarity)
}

/// Umeyama's solution: SVD of the cross-covariance with a sign flip on the
/// weakest singular direction whenever the optimal orthogonal map would be
/// a reflection.
pub fn procrustes_align_with(
    source: &[Vector3<f64>],
    target: &[Vector3<f64>],
    mode: AlignMode,
) -> Result<SimilarityTransform> {
    if source.len() != target.len() {
        return Err(Error::shape(format!(
            "procrustes: {} source vs {} target points",
            source.len(),
            target.len()
        )));
    }
    if source.len() < 3 {
        return Err(Error::shape("procrustes needs at least 3 points"));
    }
    if source.iter().chain(target).any(|p| !p.iter().all(|v| v.is_finite())) {
        return Err(Error::NonFinite("procrustes input".into()));
    }

    let n = source.len() as f64;
    let mu_x = source.iter().sum::<Vector3<f64>>() / n;
    let mu_y = target.iter().sum::<Vector3<f64>>() / n;

    let mut cov = Matrix3::zeros();
    let mut var_x = 0.0;
    for (x, y) in source.iter().zip(target) {
        let (xc, yc) = (x - mu_x, y - mu_y);
        cov += yc * xc.transpose();
        var_x += xc.norm_squared();
    }
    cov /= n;
    var_x /= n;

    let svd = cov.svd(true, true);
    let (u, v_t) = (svd.u.unwrap(), svd.v_t.unwrap());
    let sv = svd.singular_values;

    let largest = sv.max();
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| sv[b].total_cmp(&sv[a]));
    if var_x <= f64::EPSILON * mu_x.norm_squared().max(1.0) || largest <= 0.0 || sv[order[1]] <= 1e-12 * largest {
        return Err(Error::Degenerate("cross-covariance has rank < 2".into()));
    }

    let reflect = (u.determinant() * v_t.determinant()).signum();
    let mut signs = Vector3::from_element(1.0);
    signs[order[2]] = if reflect < 0.0 { -1.0 } else { 1.0 };
    let rotation = u * Matrix3::from_diagonal(&signs) * v_t;

    let scale = match mode {
        AlignMode::Similarity => sv.component_mul(&signs).sum() / var_x,
        AlignMode::Rigid => 1.0,
    };
    let translation = mu_y - scale * (rotation * mu_x);
    Ok(SimilarityTransform {
        scale,
        rotation,
        translation,
    })
}

/// `Σ ‖T(xᵢ) − yᵢ‖²`.
pub fn alignment_residual(transform: &SimilarityTransform, source: &[Vector3<f64>], target: &[Vector3<f64>]) -> f64 {
    source
        .iter()
        .zip(target)
        .map(|(x, y)| (transform.apply(x) - y).norm_squared())
        .sum()
}
