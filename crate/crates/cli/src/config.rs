//! `key = value` pipeline configuration.

use std::fs;
use std::path::{Path, PathBuf};

use lenspose_core::numerics::Padding;
use lenspose_core::supervision::{LossWeights, DEFAULT_SIMCC_SIGMA, DEFAULT_SPLIT_FACTOR};
use lenspose_core::{Error, Result};

const PATH_KEYS: [&str; 4] = ["psf", "body_model", "decoder", "regressors"];

#[derive(Clone, Debug, PartialEq)]
pub struct PipelineConfig {
    pub psf: Option<PathBuf>,
    pub body_model: Option<PathBuf>,
    pub decoder: Option<PathBuf>,
    pub regressors: Option<PathBuf>,
    pub weights: LossWeights,
    pub simcc_k: usize,
    pub simcc_sigma: f64,
    pub padding: Padding,
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            psf: None,
            body_model: None,
            decoder: None,
            regressors: None,
            weights: LossWeights::default(),
            simcc_k: DEFAULT_SPLIT_FACTOR,
            simcc_sigma: DEFAULT_SIMCC_SIGMA,
            padding: Padding::default(),
            seed: 0,
        }
    }
}

fn bad(lineno: usize, msg: impl std::fmt::Display) -> Error {
    Error::Config(format!("line {lineno}: {msg}"))
}

impl PipelineConfig {
    /// Parses config text. Relative paths are resolved against `base`.
    /// Paths are not checked here; see [`PipelineConfig::load`].
    pub fn parse(text: &str, base: &Path) -> Result<Self> {
        let mut cfg = Self::default();
        let mut seen: Vec<String> = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let lineno = i + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| bad(lineno, "expected key = value"))?;
            let (key, value) = (key.trim(), value.trim());
            if seen.iter().any(|k| k == key) {
                return Err(bad(lineno, format!("duplicate key {key:?}")));
            }
            seen.push(key.to_string());
            if PATH_KEYS.contains(&key) {
                if value.is_empty() {
                    return Err(bad(lineno, format!("{key} needs a path")));
                }
                let path = base.join(value);
                match key {
                    "psf" => cfg.psf = Some(path),
                    "body_model" => cfg.body_model = Some(path),
                    "decoder" => cfg.decoder = Some(path),
                    _ => cfg.regressors = Some(path),
                }
                continue;
            }
            match key {
                "simcc_k" => {
                    cfg.simcc_k = value
                        .parse()
                        .map_err(|_| bad(lineno, format!("bad integer {value:?}")))?;
                    if cfg.simcc_k == 0 {
                        return Err(Error::Range("simcc_k must be at least 1".into()));
                    }
                }
                "simcc_sigma" => {
                    cfg.simcc_sigma = value
                        .parse()
                        .map_err(|_| bad(lineno, format!("bad number {value:?}")))?;
                    if !(cfg.simcc_sigma >= 0.0 && cfg.simcc_sigma.is_finite()) {
                        return Err(Error::Range(format!("simcc_sigma {value}")));
                    }
                }
                "padding" => {
                    cfg.padding = value
                        .parse()
                        .map_err(|_| bad(lineno, format!("bad padding {value:?}")))?
                }
                "seed" => cfg.seed = value.parse().map_err(|_| bad(lineno, format!("bad seed {value:?}")))?,
                _ => {
                    let v: f64 = value.parse().map_err(|_| bad(lineno, format!("unknown key {key:?}")))?;
                    if !cfg.weights.set(key, v)? {
                        return Err(bad(lineno, format!("unknown key {key:?}")));
                    }
                }
            }
        }
        Ok(cfg)
    }

    /// Reads and parses `path`, then checks that every referenced file exists.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        let base = path.parent().unwrap_or(Path::new("."));
        let cfg = Self::parse(&text, base)?;
        for (key, p) in cfg.paths() {
            if !p.is_file() {
                return Err(Error::Config(format!("{key} file {} does not exist", p.display())));
            }
        }
        Ok(cfg)
    }

    pub fn paths(&self) -> Vec<(&'static str, &Path)> {
        [
            ("psf", &self.psf),
            ("body_model", &self.body_model),
            ("decoder", &self.decoder),
            ("regressors", &self.regressors),
        ]
        .into_iter()
        .filter_map(|(k, p)| p.as_deref().map(|p| (k, p)))
        .collect()
    }

    pub fn require(&self, key: &str) -> Result<&Path> {
        self.paths()
            .into_iter()
            .find(|(k, _)| *k == key)
            .map(|(_, p)| p)
            .ok_or_else(|| Error::Config(format!("config does not set {key}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_all_keys() {
        let text = "\
# toy
psf = psf.lhps
body_model = model.lhps
decoder = dec.lhps
regressors = /abs/reg.lhps
lambda_2d = 2.5
lambda_uv = 0
simcc_k = 3
simcc_sigma = 2.0
padding = circular
seed = 42
";
        let cfg = PipelineConfig::parse(text, Path::new("/base")).unwrap();
        assert_eq!(cfg.psf.as_deref(), Some(Path::new("/base/psf.lhps")));
        assert_eq!(cfg.regressors.as_deref(), Some(Path::new("/abs/reg.lhps")));
        assert_eq!(cfg.weights.lambda_2d, 2.5);
        assert_eq!(cfg.weights.lambda_uv, 0.0);
        assert_eq!(cfg.weights.lambda_3d, 1.0);
        assert_eq!((cfg.simcc_k, cfg.simcc_sigma), (3, 2.0));
        assert_eq!(cfg.padding, Padding::Circular);
        assert_eq!(cfg.seed, 42);
    }

    #[test]
    fn rejects_unknown_and_duplicate_keys() {
        for text in [
            "colour = red",
            "lambda_9d = 1",
            "seed = 1\nseed = 2",
            "padding = reflect",
            "nokey",
        ] {
            let err = PipelineConfig::parse(text, Path::new(".")).unwrap_err();
            assert_eq!(err.kind(), "config", "{text}");
        }
        assert_eq!(
            PipelineConfig::parse("lambda_pi = -1", Path::new("."))
                .unwrap_err()
                .kind(),
            "range"
        );
        assert_eq!(
            PipelineConfig::parse("simcc_k = 0", Path::new(".")).unwrap_err().kind(),
            "range"
        );
    }

    #[test]
    fn load_requires_existing_files() {
        let dir = tempfile::tempdir().unwrap();
        let cfg_path = dir.path().join("p.cfg");
        fs::write(&cfg_path, "psf = missing.lhps\n").unwrap();
        assert_eq!(PipelineConfig::load(&cfg_path).unwrap_err().kind(), "config");
        fs::write(dir.path().join("missing.lhps"), b"x").unwrap();
        let cfg = PipelineConfig::load(&cfg_path).unwrap();
        assert_eq!(cfg.require("psf").unwrap(), dir.path().join("missing.lhps"));
        assert!(cfg.require("decoder").is_err());
    }
}
