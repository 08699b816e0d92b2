use super::{log_softmax, softmax, Loss, LossWeights};
use crate::bodymodel::{normalized_to_pixels, project_weak_perspective, Mesh, UvEntry, WeakPerspective};
use crate::error::{Error, Result};

/// Part count of the DensePose labeling, excluding background.
pub const DEFAULT_PART_COUNT: usize = 24;

/// Dense-correspondence ground truth. All rasters are row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct IuvMap {
    pub height: usize,
    pub width: usize,
    /// `0` is background, `1..=P` are body parts.
    pub part_index: Vec<u32>,
    /// Ignored where `part_index` is 0.
    pub u: Vec<f64>,
    pub v: Vec<f64>,
}

impl IuvMap {
    pub fn background(height: usize, width: usize) -> Self {
        let n = height * width;
        Self {
            height,
            width,
            part_index: vec![0; n],
            u: vec![0.0; n],
            v: vec![0.0; n],
        }
    }

    pub fn foreground_count(&self) -> usize {
        self.part_index.iter().filter(|&&p| p != 0).count()
    }
}

/// Per-pixel part scores over `parts + 1` classes (background first) and
/// predicted surface coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct IuvPrediction {
    pub parts: usize,
    pub height: usize,
    pub width: usize,
    /// Class-major: `logits[(c * height + row) * width + col]`.
    pub logits: Vec<f64>,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
}

/// Gradients share the prediction layout.
pub type IuvGrad = IuvPrediction;

impl IuvPrediction {
    pub fn zeros(parts: usize, height: usize, width: usize) -> Self {
        let n = height * width;
        Self {
            parts,
            height,
            width,
            logits: vec![0.0; (parts + 1) * n],
            u: vec![0.0; n],
            v: vec![0.0; n],
        }
    }

    /// Logits, then u, then v.
    pub fn to_flat(&self) -> Vec<f64> {
        self.logits.iter().chain(&self.u).chain(&self.v).copied().collect()
    }

    pub fn with_flat(&self, flat: &[f64]) -> Self {
        let (l, rest) = flat.split_at(self.logits.len());
        let (u, v) = rest.split_at(self.u.len());
        Self {
            logits: l.to_vec(),
            u: u.to_vec(),
            v: v.to_vec(),
            ..*self
        }
    }

    fn is_consistent(&self) -> bool {
        let n = self.height * self.width;
        self.logits.len() == (self.parts + 1) * n && self.u.len() == n && self.v.len() == n
    }
}

fn edge(a: (f64, f64), b: (f64, f64), p: (f64, f64)) -> f64 {
    (b.0 - a.0) * (p.1 - a.1) - (b.1 - a.1) * (p.0 - a.0)
}

const INSIDE_TOLERANCE: f64 = 1e-12;

/// Z-buffered rasterization of `mesh` under `camera` onto a `height x width`
/// grid. Smaller z is nearer. Pixel centers sit on integer coordinates.
///
/// `u` and `v` are interpolated barycentrically; the part label comes from
/// the vertex with the largest barycentric weight. Zero-area faces are
/// skipped.
pub fn rasterize_iuv(
    mesh: &Mesh,
    camera: &WeakPerspective,
    uv_table: &[UvEntry],
    height: usize,
    width: usize,
) -> Result<IuvMap> {
    if mesh.faces.is_empty() {
        return Err(Error::shape("mesh has no faces to rasterize"));
    }
    if uv_table.len() != mesh.vertices.len() {
        return Err(Error::shape(format!(
            "uv table has {} entries for {} vertices",
            uv_table.len(),
            mesh.vertices.len()
        )));
    }
    if height == 0 || width == 0 {
        return Err(Error::shape("raster dims must be positive"));
    }
    let screen: Vec<(f64, f64)> = project_weak_perspective(&mesh.vertices, camera)?
        .iter()
        .map(|p| {
            let q = normalized_to_pixels(p, width, height);
            (q.x, q.y)
        })
        .collect();
    let mut out = IuvMap::background(height, width);
    let mut depth = vec![f64::INFINITY; height * width];

    for face in &mesh.faces {
        let [a, b, c] = face.map(|i| screen[i]);
        let area = edge(a, b, c);
        if area.abs() < 1e-12 {
            continue;
        }
        let lo_x = a.0.min(b.0).min(c.0).ceil().max(0.0);
        let hi_x = a.0.max(b.0).max(c.0).floor().min((width - 1) as f64);
        let lo_y = a.1.min(b.1).min(c.1).ceil().max(0.0);
        let hi_y = a.1.max(b.1).max(c.1).floor().min((height - 1) as f64);
        if lo_x > hi_x || lo_y > hi_y {
            continue;
        }
        let z = face.map(|i| mesh.vertices[i].z);
        let uv = face.map(|i| uv_table[i]);
        for row in lo_y as usize..=hi_y as usize {
            for col in lo_x as usize..=hi_x as usize {
                let p = (col as f64, row as f64);
                let w = [edge(b, c, p) / area, edge(c, a, p) / area, edge(a, b, p) / area];
                if w.iter().any(|&x| x < -INSIDE_TOLERANCE) {
                    continue;
                }
                let idx = row * width + col;
                let zi = w[0] * z[0] + w[1] * z[1] + w[2] * z[2];
                if zi >= depth[idx] {
                    continue;
                }
                depth[idx] = zi;
                let nearest = (0..3).fold(0, |best, k| if w[k] > w[best] { k } else { best });
                out.part_index[idx] = uv[nearest].part;
                out.u[idx] = (w[0] * uv[0].u + w[1] * uv[1].u + w[2] * uv[2].u).clamp(0.0, 1.0);
                out.v[idx] = (w[0] * uv[0].v + w[1] * uv[1].v + w[2] * uv[2].v).clamp(0.0, 1.0);
            }
        }
    }
    Ok(out)
}

pub fn smooth_l1(d: f64) -> f64 {
    if d.abs() < 1.0 {
        0.5 * d * d
    } else {
        d.abs() - 0.5
    }
}

pub fn smooth_l1_grad(d: f64) -> f64 {
    if d.abs() < 1.0 {
        d
    } else {
        d.signum()
    }
}

/// `lambda_pi * mean CE(parts)` over all pixels plus
/// `lambda_uv * (mean smooth-L1(u) + mean smooth-L1(v))` over foreground
/// pixels.
pub fn loss_iuv(pred: &IuvPrediction, gt: &IuvMap, w: &LossWeights) -> Result<Loss<IuvGrad>> {
    let n = gt.height * gt.width;
    if !pred.is_consistent() || (pred.height, pred.width) != (gt.height, gt.width) {
        return Err(Error::shape("IUV prediction does not match ground-truth dims"));
    }
    if gt.part_index.len() != n || gt.u.len() != n || gt.v.len() != n {
        return Err(Error::shape("IUV ground truth arrays do not match its dims"));
    }
    if n == 0 {
        return Err(Error::shape("empty IUV map"));
    }
    if let Some(&p) = gt.part_index.iter().find(|&&p| p as usize > pred.parts) {
        return Err(Error::Range(format!("part index {p} exceeds {} parts", pred.parts)));
    }
    if pred.to_flat().iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("IUV prediction".into()));
    }
    let classes = pred.parts + 1;
    let mut grad = IuvPrediction::zeros(pred.parts, pred.height, pred.width);

    let ce_scale = w.lambda_pi / n as f64;
    let mut ce = 0.0;
    let mut logits = vec![0.0; classes];
    for i in 0..n {
        for (c, z) in logits.iter_mut().enumerate() {
            *z = pred.logits[c * n + i];
        }
        let label = gt.part_index[i] as usize;
        ce -= log_softmax(&logits)[label];
        for (c, p) in softmax(&logits).into_iter().enumerate() {
            let y = if c == label { 1.0 } else { 0.0 };
            grad.logits[c * n + i] = ce_scale * (p - y);
        }
    }

    let fg = gt.foreground_count();
    let mut uv = 0.0;
    if fg > 0 {
        let uv_scale = w.lambda_uv / fg as f64;
        for i in (0..n).filter(|&i| gt.part_index[i] != 0) {
            let (du, dv) = (pred.u[i] - gt.u[i], pred.v[i] - gt.v[i]);
            uv += smooth_l1(du) + smooth_l1(dv);
            grad.u[i] = uv_scale * smooth_l1_grad(du);
            grad.v[i] = uv_scale * smooth_l1_grad(dv);
        }
        uv *= uv_scale;
    }
    Ok(Loss {
        value: ce_scale * ce + uv,
        grad,
        vacuous: fg == 0,
    })
}
