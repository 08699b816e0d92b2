//! Conversions between domain types and [`TensorContainer`]s.

use nalgebra::{DMatrix, DVector, Vector3};

use super::container::TensorContainer;
use crate::bodymodel::{BodyModel, BodyModelData, BodyParams, Mesh, UvEntry, NUM_BETAS};
use crate::error::{Error, Result};
use crate::features::{
    Affine, ConstantRegressor, FeaturePyramid, ReducerMlp, Regressor, ToyDecoder, ToyDecoderConfig, ToyRegressor,
    ZeroRegressor, REGRESSOR_COUNT,
};
use crate::imaging::{CropWindow, Measurement, Provenance, Psf};
use crate::numerics::{Grid, MultiChannelImage, Point2, Point3};

fn to_i64(v: usize) -> i64 {
    v as i64
}

fn to_index(v: i64, what: &str) -> Result<usize> {
    usize::try_from(v).map_err(|_| Error::Format(format!("{what}: negative index {v}")))
}

fn matrix_row_major(m: &DMatrix<f64>) -> Vec<f64> {
    m.transpose().as_slice().to_vec()
}

fn put_matrix(c: &mut TensorContainer, name: &str, m: &DMatrix<f64>) -> Result<()> {
    c.insert_f64(name, vec![m.nrows(), m.ncols()], matrix_row_major(m))
}

fn get_matrix(c: &TensorContainer, name: &str) -> Result<DMatrix<f64>> {
    let (dims, v) = c.f64(name)?;
    match *dims {
        [r, k] => Ok(DMatrix::from_row_slice(r, k, v)),
        _ => Err(Error::shape(format!(
            "entry {name:?} must be a matrix, got dims {dims:?}"
        ))),
    }
}

fn get_vector(c: &TensorContainer, name: &str) -> Result<DVector<f64>> {
    let (dims, v) = c.f64(name)?;
    if dims.len() != 1 {
        return Err(Error::shape(format!(
            "entry {name:?} must be a vector, got dims {dims:?}"
        )));
    }
    Ok(DVector::from_column_slice(v))
}

fn put_affine(c: &mut TensorContainer, prefix: &str, a: &Affine) -> Result<()> {
    put_matrix(c, &format!("{prefix}_w"), &a.weight)?;
    c.insert_f64(format!("{prefix}_b"), vec![a.bias.len()], a.bias.as_slice().to_vec())
}

fn get_affine(c: &TensorContainer, prefix: &str) -> Result<Affine> {
    Affine::new(
        get_matrix(c, &format!("{prefix}_w"))?,
        get_vector(c, &format!("{prefix}_b"))?,
    )
}

fn put_points3(c: &mut TensorContainer, name: &str, pts: &[Point3]) -> Result<()> {
    c.insert_f64(
        name,
        vec![pts.len(), 3],
        pts.iter().flat_map(|p| p.iter().copied()).collect(),
    )
}

pub fn get_points3(c: &TensorContainer, name: &str) -> Result<Vec<Point3>> {
    let (dims, v) = c.f64(name)?;
    if dims.len() != 2 || dims[1] != 3 {
        return Err(Error::shape(format!("entry {name:?} must be N x 3, got {dims:?}")));
    }
    Ok(v.chunks_exact(3).map(|p| Vector3::new(p[0], p[1], p[2])).collect())
}

fn put_faces(c: &mut TensorContainer, name: &str, faces: &[[usize; 3]]) -> Result<()> {
    c.insert_i64(
        name,
        vec![faces.len(), 3],
        faces.iter().flatten().map(|&i| to_i64(i)).collect(),
    )
}

fn get_faces(c: &TensorContainer, name: &str) -> Result<Vec<[usize; 3]>> {
    let (dims, v) = c.i64(name)?;
    if dims.len() != 2 || dims[1] != 3 {
        return Err(Error::shape(format!("entry {name:?} must be F x 3, got {dims:?}")));
    }
    v.chunks_exact(3)
        .map(|f| Ok([to_index(f[0], name)?, to_index(f[1], name)?, to_index(f[2], name)?]))
        .collect()
}

fn put_image(c: &mut TensorContainer, name: &str, img: &MultiChannelImage) -> Result<()> {
    c.insert_f64(name, vec![img.channel_count(), img.height(), img.width()], img.to_chw())
}

fn get_image(c: &TensorContainer, name: &str) -> Result<MultiChannelImage> {
    let (dims, v) = c.f64(name)?;
    match *dims {
        [ch, h, w] => MultiChannelImage::from_chw(ch, h, w, v.to_vec()),
        _ => Err(Error::shape(format!("entry {name:?} must be C x H x W, got {dims:?}"))),
    }
}

/// A bare three-channel image, such as a scene or a reconstruction.
pub fn image_to_container(img: &MultiChannelImage) -> Result<TensorContainer> {
    let mut c = TensorContainer::new();
    put_image(&mut c, "image", img)?;
    Ok(c)
}

pub fn image_from_container(c: &TensorContainer) -> Result<MultiChannelImage> {
    get_image(c, "image")
}

pub fn measurement_to_container(m: &Measurement) -> Result<TensorContainer> {
    let mut c = TensorContainer::new();
    put_image(&mut c, "image", &m.image)?;
    c.insert_i64("provenance", vec![1], vec![m.provenance.code()])?;
    c.insert_f64("noise_sigma", vec![1], vec![m.noise_sigma])?;
    c.insert_f64("peak_intensity", vec![1], vec![m.peak_intensity])?;
    if let Some(w) = m.crop {
        c.insert_i64("crop", vec![4], [w.row, w.col, w.height, w.width].map(to_i64).to_vec())?;
    }
    Ok(c)
}

pub fn measurement_from_container(c: &TensorContainer) -> Result<Measurement> {
    let image = get_image(c, "image")?;
    let provenance = Provenance::from_code(c.scalar_i64("provenance")?)?;
    let mut m = Measurement::new(image, provenance, c.scalar_f64("noise_sigma")?)?;
    if c.contains("crop") {
        let w = c.i64_shaped("crop", &[4])?;
        m.crop = Some(CropWindow {
            row: to_index(w[0], "crop")?,
            col: to_index(w[1], "crop")?,
            height: to_index(w[2], "crop")?,
            width: to_index(w[3], "crop")?,
        });
    }
    Ok(m)
}

pub fn psf_to_container(psf: &Psf) -> Result<TensorContainer> {
    let mut c = TensorContainer::new();
    let g = psf.grid();
    c.insert_f64("psf", vec![g.height(), g.width()], g.values().to_vec())?;
    Ok(c)
}

pub fn psf_from_container(c: &TensorContainer) -> Result<Psf> {
    let (dims, v) = c.f64("psf")?;
    match *dims {
        [h, w] => Psf::new(Grid::new(h, w, v.to_vec())?),
        _ => Err(Error::shape(format!("psf must be H x W, got {dims:?}"))),
    }
}

pub fn body_model_to_container(model: &BodyModel) -> Result<TensorContainer> {
    let d = model.data();
    let n = d.template.len();
    let mut c = TensorContainer::new();
    put_points3(&mut c, "template", &d.template)?;
    let blend: Vec<f64> = d
        .blendshapes
        .iter()
        .flat_map(|dirs| (0..3).flat_map(move |axis| dirs.iter().map(move |v| v[axis])))
        .collect();
    c.insert_f64("blendshapes", vec![n, 3, NUM_BETAS], blend)?;
    put_matrix(&mut c, "weights", &d.weights)?;
    c.insert_i64(
        "parents",
        vec![d.parents.len()],
        d.parents.iter().map(|p| p.map_or(-1, to_i64)).collect(),
    )?;
    put_matrix(&mut c, "Jreg_rest", &d.joint_regressor)?;
    put_matrix(&mut c, "Jreg_kp", &d.keypoint_regressor)?;
    put_matrix(&mut c, "downsample", &d.downsample)?;
    put_faces(&mut c, "faces", &d.faces)?;
    c.insert_f64(
        "uv_table",
        vec![n, 3],
        d.uv_table.iter().flat_map(|e| [e.part as f64, e.u, e.v]).collect(),
    )?;
    Ok(c)
}

pub fn body_model_from_container(c: &TensorContainer) -> Result<BodyModel> {
    let template = get_points3(c, "template")?;
    let n = template.len();
    let blend = c.f64_shaped("blendshapes", &[n, 3, NUM_BETAS])?;
    let blendshapes = blend
        .chunks_exact(3 * NUM_BETAS)
        .map(|v| std::array::from_fn(|b| Vector3::new(v[b], v[NUM_BETAS + b], v[2 * NUM_BETAS + b])))
        .collect();
    let (_, parents) = c.i64("parents")?;
    let parents = parents
        .iter()
        .map(|&p| {
            if p < 0 {
                Ok(None)
            } else {
                to_index(p, "parents").map(Some)
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let uv = c.f64_shaped("uv_table", &[n, 3])?;
    let uv_table = uv
        .chunks_exact(3)
        .map(|e| {
            if e[0] < 0.0 || e[0].fract() != 0.0 || e[0] > u32::MAX as f64 {
                return Err(Error::Format(format!("uv_table part {} is not a part index", e[0])));
            }
            Ok(UvEntry {
                part: e[0] as u32,
                u: e[1],
                v: e[2],
            })
        })
        .collect::<Result<Vec<_>>>()?;
    BodyModel::new(BodyModelData {
        template,
        blendshapes,
        weights: get_matrix(c, "weights")?,
        parents,
        joint_regressor: get_matrix(c, "Jreg_rest")?,
        keypoint_regressor: get_matrix(c, "Jreg_kp")?,
        downsample: get_matrix(c, "downsample")?,
        faces: get_faces(c, "faces")?,
        uv_table,
    })
}

pub fn params_to_container(p: &BodyParams) -> Result<TensorContainer> {
    let mut c = TensorContainer::new();
    put_points3(&mut c, "pose", &p.pose)?;
    c.insert_f64("shape", vec![NUM_BETAS], p.shape.to_vec())?;
    c.insert_f64("camera", vec![3], vec![p.camera.scale, p.camera.tx, p.camera.ty])?;
    Ok(c)
}

pub fn params_from_container(c: &TensorContainer) -> Result<BodyParams> {
    let pose = get_points3(c, "pose")?;
    let mut v: Vec<f64> = pose.iter().flat_map(|w| w.iter().copied()).collect();
    v.extend_from_slice(c.f64_shaped("shape", &[NUM_BETAS])?);
    v.extend_from_slice(c.f64_shaped("camera", &[3])?);
    BodyParams::from_vector(&v, pose.len())
}

/// Θ trace as a `T x L` matrix named `thetas`.
pub fn trace_to_container(thetas: &[BodyParams]) -> Result<TensorContainer> {
    let mut c = TensorContainer::new();
    let len = thetas.first().map_or(0, |t| t.to_vector().len());
    let flat: Vec<f64> = thetas.iter().flat_map(|t| t.to_vector()).collect();
    c.insert_f64("thetas", vec![thetas.len(), len], flat)?;
    if let Some(t) = thetas.first() {
        c.insert_i64("joints", vec![1], vec![to_i64(t.pose.len())])?;
    }
    Ok(c)
}

pub fn trace_from_container(c: &TensorContainer) -> Result<Vec<BodyParams>> {
    let (dims, v) = c.f64("thetas")?;
    let [t, len] = *dims else {
        return Err(Error::shape("thetas must be T x L"));
    };
    if t == 0 {
        return Ok(Vec::new());
    }
    let joints = to_index(c.scalar_i64("joints")?, "joints")?;
    (0..t)
        .map(|i| BodyParams::from_vector(&v[i * len..(i + 1) * len], joints))
        .collect()
}

pub fn mesh_to_container(mesh: &Mesh) -> Result<TensorContainer> {
    let mut c = TensorContainer::new();
    put_points3(&mut c, "vertices", &mesh.vertices)?;
    put_faces(&mut c, "faces", &mesh.faces)?;
    Ok(c)
}

pub fn mesh_from_container(c: &TensorContainer) -> Result<Mesh> {
    Mesh::new(get_points3(c, "vertices")?, get_faces(c, "faces")?)
}

pub fn keypoints_to_container(k2d: &[Point2], k3d: &[Point3]) -> Result<TensorContainer> {
    let mut c = TensorContainer::new();
    c.insert_f64(
        "keypoints2d",
        vec![k2d.len(), 2],
        k2d.iter().flat_map(|p| [p.x, p.y]).collect(),
    )?;
    put_points3(&mut c, "keypoints3d", k3d)?;
    Ok(c)
}

pub fn keypoints2d_from_container(c: &TensorContainer) -> Result<Vec<Point2>> {
    let (dims, v) = c.f64("keypoints2d")?;
    if dims.len() != 2 || dims[1] != 2 {
        return Err(Error::shape(format!("keypoints2d must be N x 2, got {dims:?}")));
    }
    Ok(v.chunks_exact(2).map(|p| Point2::new(p[0], p[1])).collect())
}

pub fn keypoints3d_from_container(c: &TensorContainer) -> Result<Vec<Point3>> {
    get_points3(c, "keypoints3d")
}

/// Toy decoder weights and the point-feature reducer.
pub fn decoder_to_container(decoder: &ToyDecoder, reducer: &ReducerMlp) -> Result<TensorContainer> {
    let mut c = TensorContainer::new();
    let cfg = &decoder.config;
    c.insert_i64("decoder/channels", vec![4], cfg.channels.map(to_i64).to_vec())?;
    c.insert_i64("decoder/seed", vec![1], vec![cfg.seed as i64])?;
    c.insert_i64("decoder/bias", vec![1], vec![cfg.bias as i64])?;
    put_affine(&mut c, "decoder/stem", &decoder.stem)?;
    for (i, a) in decoder.down.iter().enumerate() {
        put_affine(&mut c, &format!("decoder/down{i}"), a)?;
    }
    put_matrix(&mut c, "decoder/global", &decoder.global)?;
    for (i, m) in decoder.lateral.iter().enumerate() {
        put_matrix(&mut c, &format!("decoder/lateral{i}"), m)?;
    }
    for (i, a) in reducer.maps().iter().enumerate() {
        put_affine(&mut c, &format!("reducer/level{}", i + 1), a)?;
    }
    Ok(c)
}

pub fn decoder_from_container(c: &TensorContainer) -> Result<(ToyDecoder, ReducerMlp)> {
    let ch = c.i64_shaped("decoder/channels", &[4])?;
    let mut channels = [0usize; 4];
    for (dst, &src) in channels.iter_mut().zip(ch) {
        *dst = to_index(src, "decoder/channels")?;
    }
    let config = ToyDecoderConfig {
        channels,
        seed: c.scalar_i64("decoder/seed")? as u64,
        bias: c.scalar_i64("decoder/bias")? != 0,
    };
    let down = [0, 1, 2].map(|i| get_affine(c, &format!("decoder/down{i}")));
    let lateral = [0, 1, 2].map(|i| get_matrix(c, &format!("decoder/lateral{i}")));
    let [d0, d1, d2] = down;
    let [l0, l1, l2] = lateral;
    let decoder = ToyDecoder::from_parts(
        config,
        get_affine(c, "decoder/stem")?,
        [d0?, d1?, d2?],
        get_matrix(c, "decoder/global")?,
        [l0?, l1?, l2?],
    )?;
    let maps = (1..=3)
        .map(|t| get_affine(c, &format!("reducer/level{t}")))
        .collect::<Result<Vec<_>>>()?;
    let reducer = ReducerMlp::new(maps)?;
    for t in 1..=3 {
        if reducer.for_level(t)?.in_dim() != channels[t] {
            return Err(Error::shape(format!(
                "reducer level {t} does not match decoder channels"
            )));
        }
    }
    Ok((decoder, reducer))
}

/// A stored regressor of any bundled kind.
#[derive(Clone, Debug, PartialEq)]
pub enum StoredRegressor {
    Zero,
    Constant(ConstantRegressor),
    Toy(ToyRegressor),
}

impl StoredRegressor {
    pub fn as_regressor(&self) -> &dyn Regressor {
        match self {
            StoredRegressor::Zero => &ZeroRegressor,
            StoredRegressor::Constant(c) => c,
            StoredRegressor::Toy(t) => t,
        }
    }
}

pub fn regressors_to_container(regs: &[StoredRegressor]) -> Result<TensorContainer> {
    let mut c = TensorContainer::new();
    c.insert_i64("count", vec![1], vec![to_i64(regs.len())])?;
    for (t, r) in regs.iter().enumerate() {
        let p = format!("regressor{t}");
        match r {
            StoredRegressor::Zero => c.insert_i64(format!("{p}/kind"), vec![1], vec![0])?,
            StoredRegressor::Constant(ConstantRegressor(v)) => {
                c.insert_i64(format!("{p}/kind"), vec![1], vec![1])?;
                c.insert_f64(format!("{p}/residual"), vec![v.len()], v.clone())?;
            }
            StoredRegressor::Toy(toy) => {
                c.insert_i64(format!("{p}/kind"), vec![1], vec![2])?;
                put_affine(&mut c, &format!("{p}/hidden"), &toy.hidden)?;
                put_affine(&mut c, &format!("{p}/output"), &toy.output)?;
                c.insert_f64(format!("{p}/gain"), vec![1], vec![toy.gain])?;
            }
        }
    }
    Ok(c)
}

pub fn regressors_from_container(c: &TensorContainer) -> Result<Vec<StoredRegressor>> {
    let count = to_index(c.scalar_i64("count")?, "count")?;
    if count != REGRESSOR_COUNT {
        return Err(Error::shape(format!(
            "expected {REGRESSOR_COUNT} regressors, file has {count}"
        )));
    }
    (0..count)
        .map(|t| {
            let p = format!("regressor{t}");
            match c.scalar_i64(&format!("{p}/kind"))? {
                0 => Ok(StoredRegressor::Zero),
                1 => Ok(StoredRegressor::Constant(ConstantRegressor(
                    c.f64(&format!("{p}/residual"))?.1.to_vec(),
                ))),
                2 => Ok(StoredRegressor::Toy(ToyRegressor::new(
                    get_affine(c, &format!("{p}/hidden"))?,
                    get_affine(c, &format!("{p}/output"))?,
                    c.scalar_f64(&format!("{p}/gain"))?,
                )?)),
                k => Err(Error::Format(format!("{p}: unknown regressor kind {k}"))),
            }
        })
        .collect()
}

/// One container per pyramid level, each holding `features` as C x H x W.
pub fn pyramid_to_containers(p: &FeaturePyramid) -> Result<Vec<TensorContainer>> {
    p.levels()
        .iter()
        .map(|level| {
            let mut c = TensorContainer::new();
            put_image(&mut c, "features", level)?;
            Ok(c)
        })
        .collect()
}

pub fn pyramid_level_from_container(c: &TensorContainer) -> Result<MultiChannelImage> {
    get_image(c, "features")
}
