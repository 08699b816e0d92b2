use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::reducer::Affine;
use super::FeaturePyramid;
use crate::digest::Digester;
use crate::error::{Error, Result};
use crate::imaging::NETWORK_INPUT_SIZE;
use crate::numerics::{Grid, MultiChannelImage};

/// Maps a preprocessed `224 x 224 x 3` measurement to a four-level pyramid.
///
/// Implementations must be deterministic: equal inputs give bit-identical
/// pyramids.
pub trait FeatureDecoder: Send + Sync {
    fn name(&self) -> &str;

    /// Stable digest of the decoder's parameters.
    fn digest(&self) -> String;

    fn decode(&self, input: &MultiChannelImage) -> Result<FeaturePyramid>;
}

pub const DEFAULT_LEVEL_CHANNELS: [usize; 4] = [32, 32, 16, 8];

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ToyDecoderConfig {
    /// Channels of levels 0..=3 (7², 14², 28², 56²).
    pub channels: [usize; 4],
    pub seed: u64,
    pub bias: bool,
}

impl Default for ToyDecoderConfig {
    fn default() -> Self {
        Self {
            channels: DEFAULT_LEVEL_CHANNELS,
            seed: 0,
            bias: false,
        }
    }
}

/// Fixed-seed linear stand-in for a trained decoder.
///
/// A strided patch-embedding stack builds 56², 28², 14² and 7² maps. The
/// coarsest map is fused with a projection of its global channel mean, then
/// each finer level adds a nearest-neighbor upsampled projection of the level
/// above. Every output pixel therefore depends on the whole input.
#[derive(Clone, Debug, PartialEq)]
pub struct ToyDecoder {
    pub config: ToyDecoderConfig,
    /// 4×4 stride-4 embedding, 3 → channels[3].
    pub stem: Affine,
    /// 2×2 stride-2 embeddings: channels[3] → [2], [2] → [1], [1] → [0].
    pub down: [Affine; 3],
    /// channels[0] → channels[0], applied to the global mean.
    pub global: DMatrix<f64>,
    /// 1×1 projections: [0] → [1], [1] → [2], [2] → [3].
    pub lateral: [DMatrix<f64>; 3],
}

impl ToyDecoder {
    pub fn new(config: ToyDecoderConfig) -> Self {
        let c = config.channels;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let stem = Affine::seeded(c[3], 3 * 16, config.bias, &mut rng);
        let down = [
            Affine::seeded(c[2], c[3] * 4, config.bias, &mut rng),
            Affine::seeded(c[1], c[2] * 4, config.bias, &mut rng),
            Affine::seeded(c[0], c[1] * 4, config.bias, &mut rng),
        ];
        let global = Affine::seeded(c[0], c[0], false, &mut rng).weight;
        let lateral = [
            Affine::seeded(c[1], c[0], false, &mut rng).weight,
            Affine::seeded(c[2], c[1], false, &mut rng).weight,
            Affine::seeded(c[3], c[2], false, &mut rng).weight,
        ];
        Self {
            config,
            stem,
            down,
            global,
            lateral,
        }
    }

    pub fn from_parts(
        config: ToyDecoderConfig,
        stem: Affine,
        down: [Affine; 3],
        global: DMatrix<f64>,
        lateral: [DMatrix<f64>; 3],
    ) -> Result<Self> {
        let c = config.channels;
        let ok = stem.weight.shape() == (c[3], 48)
            && down[0].weight.shape() == (c[2], 4 * c[3])
            && down[1].weight.shape() == (c[1], 4 * c[2])
            && down[2].weight.shape() == (c[0], 4 * c[1])
            && global.shape() == (c[0], c[0])
            && lateral[0].shape() == (c[1], c[0])
            && lateral[1].shape() == (c[2], c[1])
            && lateral[2].shape() == (c[3], c[2]);
        if !ok {
            return Err(Error::shape("toy decoder weights do not match the channel config"));
        }
        Ok(Self {
            config,
            stem,
            down,
            global,
            lateral,
        })
    }
}

impl FeatureDecoder for ToyDecoder {
    fn name(&self) -> &str {
        "toy-decoder"
    }

    fn digest(&self) -> String {
        let mut d = Digester::new();
        d.str(self.name()).u64(self.config.seed).u64(self.config.bias as u64);
        for c in self.config.channels {
            d.u64(c as u64);
        }
        for a in std::iter::once(&self.stem).chain(&self.down) {
            d.f64s(a.weight.iter()).f64s(a.bias.iter());
        }
        d.f64s(self.global.iter());
        for m in &self.lateral {
            d.f64s(m.iter());
        }
        d.finish()
    }

    fn decode(&self, input: &MultiChannelImage) -> Result<FeaturePyramid> {
        if input.channel_count() != 3 || input.dims() != (NETWORK_INPUT_SIZE, NETWORK_INPUT_SIZE) {
            return Err(Error::shape(format!(
                "decoder input must be 3x{0}x{0}, got {1}x{2}x{3}",
                NETWORK_INPUT_SIZE,
                input.channel_count(),
                input.height(),
                input.width()
            )));
        }
        let a56 = patch_embed(input, 4, &self.stem)?;
        let a28 = patch_embed(&a56, 2, &self.down[0])?;
        let a14 = patch_embed(&a28, 2, &self.down[1])?;
        let a7 = patch_embed(&a14, 2, &self.down[2])?;

        let mean: Vec<f64> = a7
            .channels()
            .iter()
            .map(|g| g.sum() / (g.height() * g.width()) as f64)
            .collect();
        let global = &self.global * nalgebra::DVector::from_vec(mean);
        let f7 = MultiChannelImage::new(
            a7.channels()
                .iter()
                .enumerate()
                .map(|(c, g)| g.map(|v| v + global[c]))
                .collect(),
        )?;
        let f14 = add(&a14, &upsample2(&project(&f7, &self.lateral[0])?)?)?;
        let f28 = add(&a28, &upsample2(&project(&f14, &self.lateral[1])?)?)?;
        let f56 = add(&a56, &upsample2(&project(&f28, &self.lateral[2])?)?)?;
        FeaturePyramid::new(vec![f7, f14, f28, f56])
    }
}

/// Non-overlapping `patch x patch` strided linear embedding.
fn patch_embed(input: &MultiChannelImage, patch: usize, map: &Affine) -> Result<MultiChannelImage> {
    let (h, w) = (input.height() / patch, input.width() / patch);
    let cin = input.channel_count();
    if map.in_dim() != cin * patch * patch {
        return Err(Error::shape("patch embedding width mismatch"));
    }
    let cout = map.out_dim();
    let mut out = vec![0.0; cout * h * w];
    let mut patch_buf = vec![0.0; cin * patch * patch];
    for r in 0..h {
        for c in 0..w {
            for ci in 0..cin {
                let g = input.channel(ci);
                for dr in 0..patch {
                    for dc in 0..patch {
                        patch_buf[(ci * patch + dr) * patch + dc] = g.get(r * patch + dr, c * patch + dc);
                    }
                }
            }
            for o in 0..cout {
                let row = map.weight.row(o);
                let v: f64 = row.iter().zip(&patch_buf).map(|(a, b)| a * b).sum();
                out[(o * h + r) * w + c] = v + map.bias[o];
            }
        }
    }
    MultiChannelImage::from_chw(cout, h, w, out)
}

/// 1×1 channel mixing.
fn project(input: &MultiChannelImage, m: &DMatrix<f64>) -> Result<MultiChannelImage> {
    let (h, w) = input.dims();
    let channels = (0..m.nrows())
        .map(|o| {
            Grid::from_fn(h, w, |r, c| {
                (0..m.ncols()).map(|i| m[(o, i)] * input.channel(i).get(r, c)).sum()
            })
        })
        .collect::<Result<Vec<_>>>()?;
    MultiChannelImage::new(channels)
}

fn upsample2(input: &MultiChannelImage) -> Result<MultiChannelImage> {
    let (h, w) = input.dims();
    input.map_channels(|g| Grid::from_fn(2 * h, 2 * w, |r, c| g.get(r / 2, c / 2)))
}

fn add(a: &MultiChannelImage, b: &MultiChannelImage) -> Result<MultiChannelImage> {
    if a.channel_count() != b.channel_count() {
        return Err(Error::shape("fusion channel mismatch"));
    }
    MultiChannelImage::new(
        a.channels()
            .iter()
            .zip(b.channels())
            .map(|(x, y)| x.linear_combination(1.0, y, 1.0))
            .collect::<Result<Vec<_>>>()?,
    )
}
