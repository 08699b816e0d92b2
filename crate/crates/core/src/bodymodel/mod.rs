//! SMPL-style parametric body.
//!
//! `shape_blend` adds linear shape blendshapes to the template,
//! `pose_mesh` runs forward kinematics over the joint tree and linear blend
//! skinning, and `body_forward` chains both and regresses sparse keypoints.
//! Pose-dependent correctives are not modeled.

mod rotation;
mod toy;

use std::collections::VecDeque;

use nalgebra::{DMatrix, Matrix3, Vector3};

use crate::error::{Error, Result};
use crate::numerics::{Point2, Point3};

pub use rotation::{canonical_axis_angle, rodrigues, skew, SMALL_ANGLE};
pub use toy::{toy_model, ToyModelSpec, LSP_KEYPOINT_JOINTS, TOY_JOINT_COUNT};

/// Number of shape coefficients.
pub const NUM_BETAS: usize = 10;
/// Soft bound on |βᵢ|; larger values log a warning.
pub const BETA_SOFT_LIMIT: f64 = 5.0;
/// Millimeters per weak-perspective camera unit. Projection works in meters.
pub const PROJECTION_UNIT_MM: f64 = 1000.0;
/// Camera scale of the neutral mean parameters.
pub const NEUTRAL_CAMERA_SCALE: f64 = 0.9;

/// Per-vertex dense-correspondence label.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UvEntry {
    /// Body part, `1..=P`; `0` is reserved for background.
    pub part: u32,
    pub u: f64,
    pub v: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Mesh {
    pub vertices: Vec<Point3>,
    pub faces: Vec<[usize; 3]>,
}

impl Mesh {
    pub fn new(vertices: Vec<Point3>, faces: Vec<[usize; 3]>) -> Result<Self> {
        if vertices.iter().any(|v| !v.iter().all(|x| x.is_finite())) {
            return Err(Error::NonFinite("mesh vertices".into()));
        }
        if faces.iter().flatten().any(|&i| i >= vertices.len()) {
            return Err(Error::shape("face index out of range"));
        }
        Ok(Self { vertices, faces })
    }

    pub fn translated(&self, offset: &Vector3<f64>) -> Mesh {
        Mesh {
            vertices: self.vertices.iter().map(|v| v + offset).collect(),
            faces: self.faces.clone(),
        }
    }
}

/// Weak-perspective pseudo-camera: `k = s·(x, y) + (tx, ty)` with `(x, y)`
/// in meters and `k` in normalized image coordinates.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WeakPerspective {
    pub scale: f64,
    pub tx: f64,
    pub ty: f64,
}

impl WeakPerspective {
    pub fn neutral() -> Self {
        Self {
            scale: NEUTRAL_CAMERA_SCALE,
            tx: 0.0,
            ty: 0.0,
        }
    }
}

/// Regression target `{θ, β, π̃}`.
#[derive(Clone, Debug, PartialEq)]
pub struct BodyParams {
    /// Per-joint axis-angle, radians.
    pub pose: Vec<Vector3<f64>>,
    pub shape: [f64; NUM_BETAS],
    pub camera: WeakPerspective,
}

impl BodyParams {
    /// Zero pose, zero shape, neutral camera.
    pub fn neutral(joints: usize) -> Self {
        Self {
            pose: vec![Vector3::zeros(); joints],
            shape: [0.0; NUM_BETAS],
            camera: WeakPerspective::neutral(),
        }
    }

    pub fn vector_len(joints: usize) -> usize {
        3 * joints + NUM_BETAS + 3
    }

    /// Flattened as `[θ (3J), β (10), s, tx, ty]`.
    pub fn to_vector(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(Self::vector_len(self.pose.len()));
        out.extend(self.pose.iter().flat_map(|w| w.iter().copied()));
        out.extend_from_slice(&self.shape);
        out.extend([self.camera.scale, self.camera.tx, self.camera.ty]);
        out
    }

    pub fn from_vector(values: &[f64], joints: usize) -> Result<Self> {
        if values.len() != Self::vector_len(joints) {
            return Err(Error::shape(format!(
                "parameter vector for {joints} joints needs {} values, got {}",
                Self::vector_len(joints),
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("body parameters".into()));
        }
        let pose = values[..3 * joints]
            .chunks_exact(3)
            .map(|c| Vector3::new(c[0], c[1], c[2]))
            .collect();
        let mut shape = [0.0; NUM_BETAS];
        shape.copy_from_slice(&values[3 * joints..3 * joints + NUM_BETAS]);
        let cam = &values[3 * joints + NUM_BETAS..];
        Ok(Self {
            pose,
            shape,
            camera: WeakPerspective {
                scale: cam[0],
                tx: cam[1],
                ty: cam[2],
            },
        })
    }

    /// Folds every joint rotation to an angle in `[0, π]`.
    pub fn canonicalized(&self) -> Self {
        Self {
            pose: self.pose.iter().map(canonical_axis_angle).collect(),
            ..self.clone()
        }
    }
}

/// Arrays making up a body model, before validation.
#[derive(Clone, Debug)]
pub struct BodyModelData {
    pub template: Vec<Point3>,
    /// Per vertex, one displacement per shape coefficient.
    pub blendshapes: Vec<[Vector3<f64>; NUM_BETAS]>,
    /// `N x J`.
    pub weights: DMatrix<f64>,
    pub parents: Vec<Option<usize>>,
    /// `J x N`, rest-pose joint locations.
    pub joint_regressor: DMatrix<f64>,
    /// `N_j x N`, evaluation keypoints.
    pub keypoint_regressor: DMatrix<f64>,
    /// `M x N`, sampling points for mesh-aligned features.
    pub downsample: DMatrix<f64>,
    pub faces: Vec<[usize; 3]>,
    pub uv_table: Vec<UvEntry>,
}

/// Validated, immutable body model.
#[derive(Clone, Debug)]
pub struct BodyModel {
    data: BodyModelData,
    /// Joints ordered so every parent precedes its children.
    order: Vec<usize>,
}

const ROW_SUM_TOLERANCE: f64 = 1e-6;

fn check_row_sums(name: &str, m: &DMatrix<f64>) -> Result<()> {
    for (i, row) in m.row_iter().enumerate() {
        let s: f64 = row.iter().sum();
        if (s - 1.0).abs() > ROW_SUM_TOLERANCE {
            return Err(Error::Format(format!("{name} row {i} sums to {s}")));
        }
    }
    Ok(())
}

impl BodyModel {
    pub fn new(data: BodyModelData) -> Result<Self> {
        let n = data.template.len();
        let j = data.parents.len();
        if n == 0 || j == 0 {
            return Err(Error::Empty("body model needs vertices and joints".into()));
        }
        if data.template.iter().any(|v| !v.iter().all(|x| x.is_finite())) {
            return Err(Error::NonFinite("template".into()));
        }
        let expect = |name: &str, m: &DMatrix<f64>, rows: Option<usize>, cols: usize| -> Result<()> {
            if rows.is_some_and(|r| r != m.nrows()) || m.ncols() != cols || m.nrows() == 0 {
                return Err(Error::shape(format!(
                    "{name} is {}x{}, expected {}x{cols}",
                    m.nrows(),
                    m.ncols(),
                    rows.map_or("?".to_string(), |r| r.to_string())
                )));
            }
            Ok(())
        };
        if data.blendshapes.len() != n {
            return Err(Error::shape("blendshapes must have one entry per vertex"));
        }
        expect("weights", &data.weights, Some(n), j)?;
        expect("joint regressor", &data.joint_regressor, Some(j), n)?;
        expect("keypoint regressor", &data.keypoint_regressor, None, n)?;
        expect("downsample", &data.downsample, None, n)?;
        if data.weights.iter().any(|&w| w < 0.0) {
            return Err(Error::Format("negative skinning weight".into()));
        }
        check_row_sums("skinning weights", &data.weights)?;
        check_row_sums("joint regressor", &data.joint_regressor)?;
        check_row_sums("keypoint regressor", &data.keypoint_regressor)?;
        check_row_sums("downsample", &data.downsample)?;
        if data.faces.iter().flatten().any(|&i| i >= n) {
            return Err(Error::shape("face index out of range"));
        }
        if data.uv_table.len() != n {
            return Err(Error::shape("uv table must cover every vertex"));
        }
        if data
            .uv_table
            .iter()
            .any(|e| !(0.0..=1.0).contains(&e.u) || !(0.0..=1.0).contains(&e.v))
        {
            return Err(Error::Range("uv coordinates must lie in [0, 1]".into()));
        }
        let order = topological_order(&data.parents)?;
        Ok(Self { data, order })
    }

    pub fn data(&self) -> &BodyModelData {
        &self.data
    }

    pub fn vertex_count(&self) -> usize {
        self.data.template.len()
    }

    pub fn joint_count(&self) -> usize {
        self.data.parents.len()
    }

    pub fn keypoint_count(&self) -> usize {
        self.data.keypoint_regressor.nrows()
    }

    pub fn sample_count(&self) -> usize {
        self.data.downsample.nrows()
    }

    pub fn parents(&self) -> &[Option<usize>] {
        &self.data.parents
    }

    pub fn faces(&self) -> &[[usize; 3]] {
        &self.data.faces
    }

    pub fn uv_table(&self) -> &[UvEntry] {
        &self.data.uv_table
    }

    pub fn template_mesh(&self) -> Mesh {
        Mesh {
            vertices: self.data.template.clone(),
            faces: self.data.faces.clone(),
        }
    }

    /// `keypoint_regressor · vertices`.
    pub fn regress_keypoints(&self, mesh: &Mesh) -> Result<Vec<Point3>> {
        apply_regressor(&self.data.keypoint_regressor, &mesh.vertices)
    }

    pub fn regress_rest_joints(&self, mesh: &Mesh) -> Result<Vec<Point3>> {
        apply_regressor(&self.data.joint_regressor, &mesh.vertices)
    }
}

fn topological_order(parents: &[Option<usize>]) -> Result<Vec<usize>> {
    let j = parents.len();
    let mut children = vec![Vec::new(); j];
    let mut roots = Vec::new();
    for (i, p) in parents.iter().enumerate() {
        match *p {
            None => roots.push(i),
            Some(p) if p < j && p != i => children[p].push(i),
            Some(p) => return Err(Error::Format(format!("joint {i} has invalid parent {p}"))),
        }
    }
    if roots.len() != 1 {
        return Err(Error::Format(format!(
            "joint tree needs one root, found {}",
            roots.len()
        )));
    }
    let mut order = Vec::with_capacity(j);
    let mut queue = VecDeque::from(roots);
    while let Some(i) = queue.pop_front() {
        order.push(i);
        queue.extend(children[i].iter().copied());
    }
    if order.len() != j {
        return Err(Error::Format("joint tree contains a cycle".into()));
    }
    Ok(order)
}

/// Row-wise weighted sums of points.
pub fn apply_regressor(matrix: &DMatrix<f64>, points: &[Point3]) -> Result<Vec<Point3>> {
    if matrix.ncols() != points.len() {
        return Err(Error::shape(format!(
            "regressor expects {} points, got {}",
            matrix.ncols(),
            points.len()
        )));
    }
    Ok(matrix
        .row_iter()
        .map(|row| {
            row.iter()
                .zip(points)
                .filter(|(w, _)| **w != 0.0)
                .fold(Vector3::zeros(), |acc, (w, p)| acc + *w * p)
        })
        .collect())
}

/// Template plus linear shape blendshapes.
pub fn shape_blend(model: &BodyModel, beta: &[f64]) -> Result<Mesh> {
    if beta.len() != NUM_BETAS {
        return Err(Error::shape(format!(
            "expected {NUM_BETAS} shape coefficients, got {}",
            beta.len()
        )));
    }
    if beta.iter().any(|b| !b.is_finite()) {
        return Err(Error::NonFinite("shape coefficients".into()));
    }
    if beta.iter().any(|b| b.abs() > BETA_SOFT_LIMIT) {
        log::warn!("shape coefficients outside ±{BETA_SOFT_LIMIT}: {beta:?}");
    }
    let vertices = model
        .data
        .template
        .iter()
        .zip(&model.data.blendshapes)
        .map(|(t, dirs)| dirs.iter().zip(beta).fold(*t, |acc, (d, b)| acc + *b * d))
        .collect();
    Ok(Mesh {
        vertices,
        faces: model.data.faces.clone(),
    })
}

/// Posed mesh and posed joint locations.
pub fn pose_mesh(model: &BodyModel, shaped: &Mesh, theta: &[Vector3<f64>]) -> Result<(Mesh, Vec<Point3>)> {
    let j = model.joint_count();
    if theta.len() != j {
        return Err(Error::shape(format!(
            "pose needs {j} joint rotations, got {}",
            theta.len()
        )));
    }
    if shaped.vertices.len() != model.vertex_count() {
        return Err(Error::shape("shaped mesh does not match the model"));
    }
    if theta.iter().any(|w| !w.iter().all(|x| x.is_finite())) {
        return Err(Error::NonFinite("pose".into()));
    }
    let rest = model.regress_rest_joints(shaped)?;

    let mut world_rot = vec![Matrix3::identity(); j];
    let mut world_pos = vec![Vector3::zeros(); j];
    for &i in &model.order {
        let local = rodrigues(&theta[i]);
        match model.data.parents[i] {
            None => {
                world_rot[i] = local;
                world_pos[i] = rest[i];
            }
            Some(p) => {
                world_rot[i] = world_rot[p] * local;
                world_pos[i] = world_rot[p] * (rest[i] - rest[p]) + world_pos[p];
            }
        }
    }
    // skinning transform of joint i: x -> R_i x + (p_i - R_i rest_i)
    let offsets: Vec<Vector3<f64>> = (0..j).map(|i| world_pos[i] - world_rot[i] * rest[i]).collect();

    let weights = &model.data.weights;
    let vertices = shaped
        .vertices
        .iter()
        .enumerate()
        .map(|(v, x)| {
            let mut rot = Matrix3::zeros();
            let mut off = Vector3::zeros();
            for i in 0..j {
                let w = weights[(v, i)];
                if w != 0.0 {
                    rot += w * world_rot[i];
                    off += w * offsets[i];
                }
            }
            rot * x + off
        })
        .collect();
    Ok((
        Mesh {
            vertices,
            faces: shaped.faces.clone(),
        },
        world_pos,
    ))
}

/// Output of a full forward pass.
#[derive(Clone, Debug)]
pub struct BodyOutput {
    pub mesh: Mesh,
    pub joints: Vec<Point3>,
    pub keypoints: Vec<Point3>,
}

pub fn body_forward(model: &BodyModel, params: &BodyParams) -> Result<BodyOutput> {
    let shaped = shape_blend(model, &params.shape)?;
    let (mesh, joints) = pose_mesh(model, &shaped, &params.pose)?;
    let keypoints = model.regress_keypoints(&mesh)?;
    Ok(BodyOutput {
        mesh,
        joints,
        keypoints,
    })
}

/// `downsample_matrix · vertices`.
pub fn downsample_vertices(mesh: &Mesh, model: &BodyModel) -> Result<Vec<Point3>> {
    apply_regressor(&model.data.downsample, &mesh.vertices)
}

/// Weak-perspective projection into normalized image coordinates.
pub fn project_weak_perspective(points: &[Point3], camera: &WeakPerspective) -> Result<Vec<Point2>> {
    if !(camera.scale > 0.0 && camera.scale.is_finite()) {
        return Err(Error::Camera(format!("scale must be positive, got {}", camera.scale)));
    }
    let s = camera.scale / PROJECTION_UNIT_MM;
    Ok(points
        .iter()
        .map(|p| Point2::new(s * p.x + camera.tx, s * p.y + camera.ty))
        .collect())
}

/// Maps normalized `[-1, 1]` coordinates onto a `width x height` pixel grid
/// whose pixel centers sit on integers (the image edges land on `-0.5` and
/// `size - 0.5`).
pub fn normalized_to_pixels(p: &Point2, width: usize, height: usize) -> Point2 {
    Point2::new(
        (p.x + 1.0) * 0.5 * width as f64 - 0.5,
        (p.y + 1.0) * 0.5 * height as f64 - 0.5,
    )
}

pub fn pixels_to_normalized(p: &Point2, width: usize, height: usize) -> Point2 {
    Point2::new(
        (p.x + 0.5) / width as f64 * 2.0 - 1.0,
        (p.y + 0.5) / height as f64 * 2.0 - 1.0,
    )
}
