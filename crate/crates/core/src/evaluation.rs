//! MPJPE, PA-MPJPE and PVE, in millimeters.

use std::fmt::Write as _;

use rayon::prelude::*;

use crate::bodymodel::Mesh;
use crate::error::{Error, Result};
use crate::numerics::{procrustes_align_with, AlignMode, Point3};

/// Which point is moved to the origin before MPJPE.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PelvisAnchor {
    Joint(usize),
    /// Midpoint of two joints, for keypoint sets without a pelvis (the
    /// 14-point LSP layout uses its two hips).
    Midpoint(usize, usize),
}

/// Right and left hip of the LSP-14 layout.
pub const LSP_PELVIS: PelvisAnchor = PelvisAnchor::Midpoint(2, 3);

impl Default for PelvisAnchor {
    fn default() -> Self {
        LSP_PELVIS
    }
}

impl PelvisAnchor {
    pub fn locate(&self, points: &[Point3]) -> Result<Point3> {
        let get = |i: usize| {
            points
                .get(i)
                .copied()
                .ok_or_else(|| Error::Range(format!("pelvis index {i} out of range for {} joints", points.len())))
        };
        match *self {
            PelvisAnchor::Joint(i) => get(i),
            PelvisAnchor::Midpoint(i, j) => Ok((get(i)? + get(j)?) / 2.0),
        }
    }
}

fn check_pair(pred: &[Point3], gt: &[Point3]) -> Result<()> {
    if pred.len() != gt.len() {
        return Err(Error::shape(format!(
            "{} predicted vs {} ground-truth points",
            pred.len(),
            gt.len()
        )));
    }
    if pred.is_empty() {
        return Err(Error::Empty("no points to compare".into()));
    }
    Ok(())
}

fn mean_distance(a: impl Iterator<Item = Point3>, b: &[Point3]) -> f64 {
    a.zip(b).map(|(x, y)| (x - y).norm()).sum::<f64>() / b.len() as f64
}

/// Mean joint distance after moving each set's pelvis to the origin.
pub fn mpjpe(pred: &[Point3], gt: &[Point3], pelvis: PelvisAnchor) -> Result<f64> {
    check_pair(pred, gt)?;
    let (pp, pg) = (pelvis.locate(pred)?, pelvis.locate(gt)?);
    let centered_gt: Vec<Point3> = gt.iter().map(|g| g - pg).collect();
    Ok(mean_distance(pred.iter().map(|p| p - pp), &centered_gt))
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct PaOptions {
    pub mode: AlignMode,
    /// Pelvis-center both sets before alignment.
    pub center_first: Option<PelvisAnchor>,
}

/// Mean joint distance after aligning `pred` onto `gt` with a similarity
/// transform.
pub fn pa_mpjpe(pred: &[Point3], gt: &[Point3]) -> Result<f64> {
    pa_mpjpe_with(pred, gt, PaOptions::default())
}

pub fn pa_mpjpe_with(pred: &[Point3], gt: &[Point3], opts: PaOptions) -> Result<f64> {
    check_pair(pred, gt)?;
    let (pred, gt): (Vec<Point3>, Vec<Point3>) = match opts.center_first {
        Some(anchor) => {
            let (pp, pg) = (anchor.locate(pred)?, anchor.locate(gt)?);
            (
                pred.iter().map(|p| p - pp).collect(),
                gt.iter().map(|g| g - pg).collect(),
            )
        }
        None => (pred.to_vec(), gt.to_vec()),
    };
    let t = procrustes_align_with(&pred, &gt, opts.mode)?;
    Ok(mean_distance(pred.iter().map(|p| t.apply(p)), &gt))
}

/// Mean per-vertex distance, no alignment.
pub fn pve(pred: &Mesh, gt: &Mesh) -> Result<f64> {
    pve_points(&pred.vertices, &gt.vertices)
}

pub fn pve_points(pred: &[Point3], gt: &[Point3]) -> Result<f64> {
    check_pair(pred, gt)?;
    Ok(mean_distance(pred.iter().copied(), gt))
}

/// Joints and mesh vertices of one prediction or ground truth.
#[derive(Clone, Debug, PartialEq)]
pub struct PoseSample {
    pub joints: Vec<Point3>,
    pub vertices: Vec<Point3>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SampleMetrics {
    pub name: String,
    pub mpjpe_mm: f64,
    pub pa_mpjpe_mm: f64,
    /// PA-MPJPE with pelvis centering before alignment.
    pub pa_mpjpe_centered_mm: f64,
    pub pve_mm: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct EvalOptions {
    pub pelvis: PelvisAnchor,
    pub align: AlignMode,
}

pub fn evaluate_sample(name: &str, pred: &PoseSample, gt: &PoseSample, opts: EvalOptions) -> Result<SampleMetrics> {
    Ok(SampleMetrics {
        name: name.to_string(),
        mpjpe_mm: mpjpe(&pred.joints, &gt.joints, opts.pelvis)?,
        pa_mpjpe_mm: pa_mpjpe_with(
            &pred.joints,
            &gt.joints,
            PaOptions {
                mode: opts.align,
                center_first: None,
            },
        )?,
        pa_mpjpe_centered_mm: pa_mpjpe_with(
            &pred.joints,
            &gt.joints,
            PaOptions {
                mode: opts.align,
                center_first: Some(opts.pelvis),
            },
        )?,
        pve_mm: pve_points(&pred.vertices, &gt.vertices)?,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct MetricReport {
    pub label: String,
    pub mpjpe_mm: f64,
    pub pa_mpjpe_mm: f64,
    pub pa_mpjpe_centered_mm: f64,
    pub pve_mm: f64,
    pub samples: Vec<SampleMetrics>,
    pub align: AlignMode,
}

impl MetricReport {
    /// Per-sample metrics in parallel, aggregated by the mean.
    pub fn evaluate(label: &str, pairs: &[(String, PoseSample, PoseSample)], opts: EvalOptions) -> Result<Self> {
        let samples = pairs
            .par_iter()
            .map(|(name, pred, gt)| evaluate_sample(name, pred, gt, opts))
            .collect::<Result<Vec<_>>>()?;
        Self::from_samples(label, samples, opts.align)
    }

    pub fn from_samples(label: &str, samples: Vec<SampleMetrics>, align: AlignMode) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::Empty("no samples to evaluate".into()));
        }
        let n = samples.len() as f64;
        let mean = |f: fn(&SampleMetrics) -> f64| samples.iter().map(f).sum::<f64>() / n;
        Ok(Self {
            label: label.to_string(),
            mpjpe_mm: mean(|s| s.mpjpe_mm),
            pa_mpjpe_mm: mean(|s| s.pa_mpjpe_mm),
            pa_mpjpe_centered_mm: mean(|s| s.pa_mpjpe_centered_mm),
            pve_mm: mean(|s| s.pve_mm),
            samples,
            align,
        })
    }

    pub fn count(&self) -> usize {
        self.samples.len()
    }

    /// Aligned table: MPJPE, PA-MPJPE, PVE in millimeters, two decimals.
    pub fn table(&self) -> String {
        format_table(&self.label, self.mpjpe_mm, self.pa_mpjpe_mm, self.pve_mm)
    }

    pub fn key_values(&self) -> String {
        let mut out = String::new();
        let align = match self.align {
            AlignMode::Similarity => "similarity",
            AlignMode::Rigid => "rigid",
        };
        let _ = writeln!(out, "samples={}", self.count());
        let _ = writeln!(out, "mpjpe_mm={:.2}", self.mpjpe_mm);
        let _ = writeln!(out, "pa_mpjpe_mm={:.2}", self.pa_mpjpe_mm);
        let _ = writeln!(out, "pve_mm={:.2}", self.pve_mm);
        let _ = writeln!(out, "pa_mpjpe_centered_mm={:.2}", self.pa_mpjpe_centered_mm);
        let _ = writeln!(out, "pa_alignment={align}");
        let _ = writeln!(out, "pa_primary=uncentered");
        out
    }
}

pub fn format_table(label: &str, mpjpe_mm: f64, pa_mpjpe_mm: f64, pve_mm: f64) -> String {
    let width = label.len().max(6);
    format!(
        "{:<width$}  {:>8}  {:>8}  {:>8}\n{:<width$}  {:>8.2}  {:>8.2}  {:>8.2}\n",
        "Method", "MPJPE", "PA-MPJPE", "PVE", label, mpjpe_mm, pa_mpjpe_mm, pve_mm
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{Rotation3, Vector3};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_set(rng: &mut ChaCha8Rng, n: usize) -> Vec<Point3> {
        (0..n)
            .map(|_| Vector3::from_fn(|_, _| rng.random_range(-500.0..500.0)))
            .collect()
    }

    #[test]
    fn thirty_sixty_ninety() {
        // Pelvis (joint 0) agrees; the other three joints are 30, 60 and
        // 90 mm off, so their mean is 60 and the pelvis adds a zero.
        let gt = vec![
            Vector3::zeros(),
            Vector3::new(1.0, 0.0, 0.0),
            Vector3::new(2.0, 0.0, 0.0),
            Vector3::new(3.0, 0.0, 0.0),
        ];
        let offsets = [
            Vector3::zeros(),
            Vector3::new(0.0, 30.0, 0.0),
            Vector3::new(0.0, 0.0, 60.0),
            Vector3::new(0.0, -90.0, 0.0),
        ];
        let pred: Vec<_> = gt
            .iter()
            .zip(&offsets)
            .map(|(g, o)| g + o + Vector3::new(5.0, 5.0, 5.0))
            .collect();
        let full = mpjpe(&pred, &gt, PelvisAnchor::Joint(0)).unwrap();
        assert!((full * 4.0 / 3.0 - 60.0).abs() < 1e-9);
    }

    #[test]
    fn translation_is_removed() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let gt = random_set(&mut rng, 14);
        let pred: Vec<_> = gt.iter().map(|g| g + Vector3::new(10.0, 0.0, 0.0)).collect();
        assert!(mpjpe(&pred, &gt, LSP_PELVIS).unwrap() < 1e-12);
        assert_eq!(mpjpe(&gt, &gt, LSP_PELVIS).unwrap(), 0.0);
    }

    #[test]
    fn pa_removes_similarity() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..20 {
            let gt = random_set(&mut rng, 14);
            let r = Rotation3::new(Vector3::from_fn(|_, _| rng.random_range(-3.0..3.0)));
            let s = rng.random_range(0.2..5.0);
            let t = Vector3::from_fn(|_, _| rng.random_range(-1000.0..1000.0));
            let pred: Vec<_> = gt.iter().map(|g| s * (r * g) + t).collect();
            assert!(pa_mpjpe(&pred, &gt).unwrap() < 1e-6);
        }
    }

    #[test]
    fn rigid_mode_keeps_scale_error() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let gt = random_set(&mut rng, 14);
        let pred: Vec<_> = gt.iter().map(|g| 2.0 * g).collect();
        let rigid = PaOptions {
            mode: AlignMode::Rigid,
            center_first: None,
        };
        assert!(pa_mpjpe(&pred, &gt).unwrap() < 1e-6);
        assert!(pa_mpjpe_with(&pred, &gt, rigid).unwrap() > 1.0);
    }

    #[test]
    fn centering_first_does_not_change_pa() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (a, b) = (random_set(&mut rng, 14), random_set(&mut rng, 14));
        let plain = pa_mpjpe(&a, &b).unwrap();
        let centered = pa_mpjpe_with(
            &a,
            &b,
            PaOptions {
                center_first: Some(LSP_PELVIS),
                ..Default::default()
            },
        )
        .unwrap();
        assert!((plain - centered).abs() < 1e-9);
    }

    #[test]
    fn pve_matches_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let (a, b) = (random_set(&mut rng, 300), random_set(&mut rng, 300));
        let mut total = 0.0;
        for i in 0..a.len() {
            let d = a[i] - b[i];
            total += (d.x * d.x + d.y * d.y + d.z * d.z).sqrt();
        }
        assert!((pve_points(&a, &b).unwrap() - total / 300.0).abs() < 1e-12);
        let shifted: Vec<_> = a.iter().map(|p| p + Vector3::new(3.0, 4.0, 0.0)).collect();
        assert!((pve_points(&shifted, &a).unwrap() - 5.0).abs() < 1e-12);
    }

    #[test]
    fn errors() {
        let p = vec![Vector3::zeros(); 3];
        assert_eq!(mpjpe(&p, &p[..2], LSP_PELVIS).unwrap_err().kind(), "shape");
        assert_eq!(mpjpe(&p, &p, PelvisAnchor::Joint(7)).unwrap_err().kind(), "range");
        assert_eq!(pa_mpjpe(&p, &p).unwrap_err().kind(), "degenerate");
        assert_eq!(pve_points(&p, &p[..1]).unwrap_err().kind(), "shape");
    }

    #[test]
    fn report_layout() {
        let table = format_table("LPSNet", 119.20, 81.52, 134.74);
        let lines: Vec<&str> = table.lines().collect();
        let header: Vec<&str> = lines[0].split_whitespace().collect();
        assert_eq!(header, ["Method", "MPJPE", "PA-MPJPE", "PVE"]);
        let row: Vec<&str> = lines[1].split_whitespace().collect();
        assert_eq!(row, ["LPSNet", "119.20", "81.52", "134.74"]);
        assert_eq!(lines[0].find("PVE").unwrap() + 3, lines[1].find("134.74").unwrap() + 6);
    }

    #[test]
    fn aggregate_is_mean_of_samples() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let pairs: Vec<_> = (0..12)
            .map(|i| {
                let gt = PoseSample {
                    joints: random_set(&mut rng, 14),
                    vertices: random_set(&mut rng, 40),
                };
                let pred = PoseSample {
                    joints: gt
                        .joints
                        .iter()
                        .map(|p| p + Vector3::from_fn(|_, _| rng.random_range(-50.0..50.0)))
                        .collect(),
                    vertices: gt
                        .vertices
                        .iter()
                        .map(|p| p + Vector3::new(0.0, 0.0, i as f64))
                        .collect(),
                };
                (format!("s{i}"), pred, gt)
            })
            .collect();
        let report = MetricReport::evaluate("toy", &pairs, EvalOptions::default()).unwrap();
        assert_eq!(report.count(), 12);
        let mean = report.samples.iter().map(|s| s.mpjpe_mm).sum::<f64>() / 12.0;
        assert!((report.mpjpe_mm - mean).abs() < 1e-9);
        assert!((report.pve_mm - 5.5).abs() < 1e-9);
        assert!(report.key_values().contains("pve_mm=5.50\n"));
        assert!(report.samples.iter().all(|s| s.pa_mpjpe_mm <= s.mpjpe_mm + 1e-9));
    }
}
