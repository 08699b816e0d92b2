//! Feature pyramids, mesh-aligned point features and the iterative
//! parameter regression loop.

mod decoder;
mod reducer;
mod regressor;

pub use decoder::{FeatureDecoder, ToyDecoder, ToyDecoderConfig, DEFAULT_LEVEL_CHANNELS};
pub use reducer::{Affine, ReducerMlp, DEFAULT_REDUCED_WIDTH};
pub use regressor::{ConstantRegressor, Regressor, ToyRegressor, ZeroRegressor};

use crate::bodymodel::{
    body_forward, downsample_vertices, normalized_to_pixels, project_weak_perspective, BodyModel, BodyParams, Mesh,
    WeakPerspective,
};
use crate::error::{Error, Result};
use crate::imaging::{Measurement, NETWORK_INPUT_SIZE};
use crate::numerics::{bilinear_sample, MultiChannelImage, Point3};

/// Side lengths of pyramid levels 0..=3 for a 224×224 input.
pub const PYRAMID_SIZES: [usize; 4] = [7, 14, 28, 56];

/// Smallest camera scale kept after a regression update.
pub const MIN_CAMERA_SCALE: f64 = 1e-3;

/// Number of regressors the loop consumes: one for initialization and three
/// for refinement.
pub const REGRESSOR_COUNT: usize = 4;

#[derive(Clone, Debug, PartialEq)]
pub struct FeaturePyramid {
    levels: Vec<MultiChannelImage>,
}

impl FeaturePyramid {
    pub fn new(levels: Vec<MultiChannelImage>) -> Result<Self> {
        if levels.len() != PYRAMID_SIZES.len() {
            return Err(Error::shape(format!("pyramid needs 4 levels, got {}", levels.len())));
        }
        for (t, (level, &size)) in levels.iter().zip(&PYRAMID_SIZES).enumerate() {
            if level.dims() != (size, size) {
                return Err(Error::shape(format!(
                    "pyramid level {t} must be {size}x{size}, got {}x{}",
                    level.height(),
                    level.width()
                )));
            }
        }
        Ok(Self { levels })
    }

    pub fn level(&self, t: usize) -> &MultiChannelImage {
        &self.levels[t]
    }

    pub fn levels(&self) -> &[MultiChannelImage] {
        &self.levels
    }

    pub fn channel_counts(&self) -> [usize; 4] {
        std::array::from_fn(|t| self.levels[t].channel_count())
    }
}

pub fn decode_features(m: &Measurement, decoder: &dyn FeatureDecoder) -> Result<FeaturePyramid> {
    if m.dims() != (NETWORK_INPUT_SIZE, NETWORK_INPUT_SIZE) {
        let (h, w) = m.dims();
        return Err(Error::shape(format!(
            "decoder input must be {0}x{0}, got {h}x{w}",
            NETWORK_INPUT_SIZE
        )));
    }
    let pyramid = decoder.decode(&m.image)?;
    // Re-validate: third-party decoders may build the struct by other means.
    FeaturePyramid::new(pyramid.levels)
}

/// Projects `points` into `level`, samples each channel bilinearly, reduces
/// every per-point channel vector and concatenates the results in point order.
pub fn extract_pointwise(
    level: &MultiChannelImage,
    points: &[Point3],
    camera: &WeakPerspective,
    reducer: &Affine,
) -> Result<Vec<f64>> {
    if points.is_empty() {
        return Err(Error::NoPoints);
    }
    if reducer.in_dim() != level.channel_count() {
        return Err(Error::shape(format!(
            "reducer expects {} channels, level has {}",
            reducer.in_dim(),
            level.channel_count()
        )));
    }
    let (h, w) = level.dims();
    let pixels: Vec<_> = project_weak_perspective(points, camera)?
        .iter()
        .map(|p| normalized_to_pixels(p, w, h))
        .collect();
    let sampled = bilinear_sample(level, &pixels);
    let mut out = Vec::with_capacity(points.len() * reducer.out_dim());
    for channel_vec in &sampled {
        out.extend(reducer.apply(channel_vec)?);
    }
    Ok(out)
}

/// `Θ + R(Θ, features)`, with the camera scale kept at or above
/// [`MIN_CAMERA_SCALE`].
pub fn regress_iteration(theta: &BodyParams, features: &[f64], reg: &dyn Regressor) -> Result<BodyParams> {
    if features.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("regressor features".into()));
    }
    let current = theta.to_vector();
    if current.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("body parameters".into()));
    }
    let residual = reg.residual(theta, features)?;
    if residual.len() != current.len() {
        return Err(Error::shape(format!(
            "residual has {} entries, parameters have {}",
            residual.len(),
            current.len()
        )));
    }
    if residual.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("regressor residual".into()));
    }
    let next: Vec<f64> = current.iter().zip(&residual).map(|(a, b)| a + b).collect();
    let mut out = BodyParams::from_vector(&next, theta.pose.len())?;
    out.camera.scale = out.camera.scale.max(MIN_CAMERA_SCALE);
    Ok(out)
}

#[derive(Clone, Debug)]
pub struct RegressionTrace {
    /// Θ₀..Θ₃.
    pub thetas: Vec<BodyParams>,
    /// Meshes of Θ₀..Θ₂, whose downsampled vertices were the sample points
    /// for refinement steps 1..3.
    pub meshes: Vec<Mesh>,
}

impl RegressionTrace {
    pub fn final_theta(&self) -> &BodyParams {
        self.thetas.last().expect("trace always holds four entries")
    }
}

pub fn global_average_pool(level: &MultiChannelImage) -> Vec<f64> {
    let n = (level.height() * level.width()) as f64;
    level.channels().iter().map(|g| g.sum() / n).collect()
}

pub fn run_regression_loop(
    m: &Measurement,
    model: &BodyModel,
    decoder: &dyn FeatureDecoder,
    regressors: &[&dyn Regressor],
    reducer: &ReducerMlp,
) -> Result<RegressionTrace> {
    let pyramid = decode_features(m, decoder)?;
    run_regression_loop_on_pyramid(&pyramid, model, regressors, reducer)
}

pub fn run_regression_loop_on_pyramid(
    pyramid: &FeaturePyramid,
    model: &BodyModel,
    regressors: &[&dyn Regressor],
    reducer: &ReducerMlp,
) -> Result<RegressionTrace> {
    if regressors.len() != REGRESSOR_COUNT {
        return Err(Error::shape(format!(
            "regression loop needs {REGRESSOR_COUNT} regressors, got {}",
            regressors.len()
        )));
    }
    let neutral = BodyParams::neutral(model.joint_count());
    let theta0 = regress_iteration(&neutral, &global_average_pool(pyramid.level(0)), regressors[0])?;
    let mut thetas = vec![theta0];
    let mut meshes = Vec::with_capacity(3);
    for t in 1..REGRESSOR_COUNT {
        let prev = &thetas[t - 1];
        let mesh = body_forward(model, prev)?.mesh;
        let samples = downsample_vertices(&mesh, model)?;
        let feats = extract_pointwise(pyramid.level(t), &samples, &prev.camera, reducer.for_level(t)?)?;
        let next = regress_iteration(prev, &feats, regressors[t])?;
        meshes.push(mesh);
        thetas.push(next);
    }
    Ok(RegressionTrace { thetas, meshes })
}

pub const TOY_HIDDEN_UNITS: usize = 64;
pub const TOY_REGRESSOR_GAIN: f64 = 0.02;

/// Seeded decoder, reducer and regressors for end-to-end runs without
/// trained weights.
#[derive(Clone, Debug, PartialEq)]
pub struct ToyPipeline {
    pub decoder: ToyDecoder,
    pub reducer: ReducerMlp,
    pub regressors: Vec<ToyRegressor>,
}

impl ToyPipeline {
    pub fn new(model: &BodyModel, seed: u64) -> Self {
        let decoder = ToyDecoder::new(ToyDecoderConfig {
            seed,
            ..Default::default()
        });
        let channels = decoder.config.channels;
        let reducer = ReducerMlp::seeded(channels, DEFAULT_REDUCED_WIDTH, seed.wrapping_add(1));
        let params = BodyParams::vector_len(model.joint_count());
        let regressors = (0..REGRESSOR_COUNT)
            .map(|t| {
                let features = if t == 0 {
                    channels[0]
                } else {
                    model.sample_count() * reducer.width()
                };
                ToyRegressor::seeded(
                    params,
                    features,
                    TOY_HIDDEN_UNITS,
                    TOY_REGRESSOR_GAIN,
                    seed.wrapping_add(2 + t as u64),
                )
            })
            .collect();
        Self {
            decoder,
            reducer,
            regressors,
        }
    }

    pub fn regressor_refs(&self) -> Vec<&dyn Regressor> {
        self.regressors.iter().map(|r| r as &dyn Regressor).collect()
    }

    pub fn run(&self, m: &Measurement, model: &BodyModel) -> Result<RegressionTrace> {
        run_regression_loop(m, model, &self.decoder, &self.regressor_refs(), &self.reducer)
    }
}
