use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use rayon::prelude::*;

use lenspose_core::bodymodel::{
    body_forward, normalized_to_pixels, project_weak_perspective, toy_model, BodyModel, ToyModelSpec,
};
use lenspose_core::digest::{sha256_hex, Digester};
use lenspose_core::evaluation::{EvalOptions, MetricReport, PoseSample};
use lenspose_core::features::{
    decode_features, run_regression_loop_on_pyramid, FeatureDecoder, Regressor, ToyPipeline, REGRESSOR_COUNT,
};
use lenspose_core::imaging::{
    preprocess_measurement, read_png_scene, simulate_measurement, wiener_reconstruct, write_png, NoiseSpec, Psf,
    NETWORK_INPUT_SIZE,
};
use lenspose_core::io::*;
use lenspose_core::numerics::{AlignMode, MultiChannelImage, Padding};
use lenspose_core::supervision::{run_gradcheck, GradcheckConfig};

use crate::config::PipelineConfig;
use crate::UsageError;

/// Settings shared by every subcommand after merging flags over the config.
#[derive(Clone, Debug)]
pub struct RunContext {
    pub config: Option<PipelineConfig>,
    pub config_path: Option<PathBuf>,
    pub seed: u64,
    pub padding: Padding,
}

impl RunContext {
    pub fn new(config_path: Option<PathBuf>, seed: Option<u64>, padding: Option<Padding>) -> anyhow::Result<Self> {
        let config = match &config_path {
            Some(p) => Some(PipelineConfig::load(p).with_context(|| format!("loading config {}", p.display()))?),
            None => None,
        };
        let seed = seed.or(config.as_ref().map(|c| c.seed)).unwrap_or(0);
        let padding = padding.or(config.as_ref().map(|c| c.padding)).unwrap_or_default();
        Ok(Self {
            config,
            config_path,
            seed,
            padding,
        })
    }

    fn config(&self) -> anyhow::Result<&PipelineConfig> {
        self.config
            .as_ref()
            .ok_or_else(|| UsageError("this command needs --config".into()).into())
    }

    /// A path from an explicit flag, falling back to the config key.
    fn path_or_config(&self, flag: Option<&Path>, key: &str) -> anyhow::Result<PathBuf> {
        if let Some(p) = flag {
            return Ok(p.to_path_buf());
        }
        match &self.config {
            Some(cfg) => Ok(cfg.require(key)?.to_path_buf()),
            None => Err(UsageError(format!("pass --{} or set {key} in --config", key.replace('_', "-"))).into()),
        }
    }
}

/// Seed for one input file, derived from the run seed and the file name.
pub fn file_seed(seed: u64, name: &str) -> u64 {
    let mut d = Digester::new();
    d.str("file-seed").u64(seed).str(name);
    u64::from_str_radix(&d.finish()[..16], 16).expect("hex digest")
}

fn write_container(c: &TensorContainer, path: &Path) -> anyhow::Result<String> {
    let bytes = c.to_bytes();
    fs::write(path, &bytes).with_context(|| format!("writing {}", path.display()))?;
    Ok(sha256_hex(&bytes))
}

fn file_digest(path: &Path) -> anyhow::Result<String> {
    Ok(sha256_hex(
        &fs::read(path).with_context(|| format!("reading {}", path.display()))?,
    ))
}

fn read_container(path: &Path) -> anyhow::Result<TensorContainer> {
    TensorContainer::read(path).with_context(|| format!("reading {}", path.display()))
}

fn file_name(path: &Path) -> String {
    path.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default()
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default()
}

/// Files in `dir` with one of `extensions`, sorted by name.
fn list_files(dir: &Path, extensions: &[&str]) -> anyhow::Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for entry in fs::read_dir(dir).with_context(|| format!("listing {}", dir.display()))? {
        let path = entry?.path();
        let ext = path
            .extension()
            .and_then(|e| e.to_str())
            .unwrap_or("")
            .to_ascii_lowercase();
        if path.is_file() && extensions.contains(&ext.as_str()) {
            files.push(path);
        }
    }
    files.sort();
    Ok(files)
}

fn read_scene(path: &Path) -> anyhow::Result<MultiChannelImage> {
    let is_png = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("png"));
    if is_png {
        Ok(read_png_scene(path)?)
    } else {
        Ok(image_from_container(&read_container(path)?)?)
    }
}

fn load_psf(path: &Path) -> anyhow::Result<Psf> {
    psf_from_container(&read_container(path)?).with_context(|| format!("decoding psf {}", path.display()))
}

fn load_body_model(path: &Path) -> anyhow::Result<BodyModel> {
    body_model_from_container(&read_container(path)?).with_context(|| format!("decoding body model {}", path.display()))
}

pub struct SimulateArgs<'a> {
    pub scenes: &'a Path,
    pub psf: Option<&'a Path>,
    pub out: &'a Path,
    pub noise: f64,
}

struct SimulatedScene {
    name: String,
    seed: u64,
    input_digest: String,
    output: String,
    output_digest: String,
}

/// Simulates one measurement per scene and writes a manifest.
pub fn simulate(ctx: &RunContext, args: &SimulateArgs) -> anyhow::Result<String> {
    let psf_path = ctx.path_or_config(args.psf, "psf")?;
    let psf = load_psf(&psf_path)?;
    let scenes = list_files(args.scenes, &["png", "lhps"])?;
    if scenes.is_empty() {
        bail!("no .png or .lhps scenes in {}", args.scenes.display());
    }
    let mut stems: Vec<String> = scenes.iter().map(|p| stem(p)).collect();
    stems.sort();
    if let Some(w) = stems.windows(2).find(|w| w[0] == w[1]) {
        bail!("two scenes share the stem {:?}", w[0]);
    }
    fs::create_dir_all(args.out)?;

    let results: Vec<(String, anyhow::Result<SimulatedScene>)> = scenes
        .par_iter()
        .map(|path| {
            let name = file_name(path);
            let run = || -> anyhow::Result<SimulatedScene> {
                let seed = file_seed(ctx.seed, &name);
                let scene = read_scene(path)?;
                let noise = NoiseSpec {
                    gaussian_sigma: args.noise,
                    seed,
                };
                let m = simulate_measurement(&scene, &psf, &noise, ctx.padding)?;
                let output = format!("{}.lhps", stem(path));
                let output_digest = write_container(&measurement_to_container(&m)?, &args.out.join(&output))?;
                log::info!("simulated {name} -> {output}");
                Ok(SimulatedScene {
                    name: name.clone(),
                    seed,
                    input_digest: file_digest(path)?,
                    output,
                    output_digest,
                })
            };
            (name.clone(), run())
        })
        .collect();

    let mut manifest = String::new();
    writeln!(manifest, "command=simulate")?;
    writeln!(manifest, "psf_sha256={}", file_digest(&psf_path)?)?;
    writeln!(manifest, "padding={}", ctx.padding)?;
    writeln!(manifest, "seed={}", ctx.seed)?;
    writeln!(manifest, "noise_sigma={}", args.noise)?;
    writeln!(manifest, "scenes={}", results.len())?;
    let mut failures = Vec::new();
    for (name, r) in &results {
        match r {
            Ok(s) => writeln!(
                manifest,
                "scene={} seed={} input_sha256={} output={} output_sha256={}",
                s.name, s.seed, s.input_digest, s.output, s.output_digest
            )?,
            Err(e) => {
                writeln!(manifest, "failed={name}")?;
                failures.push(format!("{name}: {e:#}"));
            }
        }
    }
    fs::write(args.out.join("manifest.txt"), &manifest)?;
    if !failures.is_empty() {
        bail!(
            "{} of {} scenes failed:\n  {}",
            failures.len(),
            results.len(),
            failures.join("\n  ")
        );
    }
    Ok(format!(
        "simulated {} scenes into {}\n",
        results.len(),
        args.out.display()
    ))
}

pub struct ReconstructArgs<'a> {
    pub input: &'a Path,
    pub psf: Option<&'a Path>,
    pub out: &'a Path,
    pub snr: f64,
    pub png: bool,
}

/// Wiener reconstruction of one measurement file, or of every `.lhps` in a
/// directory.
pub fn reconstruct(ctx: &RunContext, args: &ReconstructArgs) -> anyhow::Result<String> {
    let psf = load_psf(&ctx.path_or_config(args.psf, "psf")?)?;
    let jobs: Vec<(PathBuf, PathBuf)> = if args.input.is_dir() {
        fs::create_dir_all(args.out)?;
        list_files(args.input, &["lhps"])?
            .into_iter()
            .map(|p| {
                let out = args.out.join(file_name(&p));
                (p, out)
            })
            .collect()
    } else {
        vec![(args.input.to_path_buf(), args.out.to_path_buf())]
    };
    if jobs.is_empty() {
        bail!("no measurements in {}", args.input.display());
    }
    let results: Vec<anyhow::Result<()>> = jobs
        .par_iter()
        .map(|(input, out)| {
            let m = measurement_from_container(&read_container(input)?)?;
            let img = wiener_reconstruct(&m, &psf, args.snr)
                .with_context(|| format!("reconstructing {}", input.display()))?;
            write_container(&image_to_container(&img)?, out)?;
            if args.png {
                write_png(&img, out.with_extension("png"))?;
            }
            Ok(())
        })
        .collect();
    let failures: Vec<String> = results
        .iter()
        .filter_map(|r| r.as_ref().err())
        .map(|e| format!("{e:#}"))
        .collect();
    if !failures.is_empty() {
        bail!(
            "{} of {} reconstructions failed:\n  {}",
            failures.len(),
            jobs.len(),
            failures.join("\n  ")
        );
    }
    Ok(format!("reconstructed {} measurements\n", jobs.len()))
}

fn stage<T>(name: &str, r: lenspose_core::Result<T>) -> anyhow::Result<T> {
    r.with_context(|| format!("stage {name} failed"))
}

/// Runs the full pipeline on one measurement and writes every intermediate.
pub fn infer(ctx: &RunContext, measurement: &Path, out: &Path) -> anyhow::Result<String> {
    let cfg = ctx.config()?;
    let model = load_body_model(cfg.require("body_model")?)?;
    let decoder_path = cfg.require("decoder")?;
    let (decoder, reducer) = decoder_from_container(&read_container(decoder_path)?)
        .with_context(|| format!("decoding {}", decoder_path.display()))?;
    let regressor_path = cfg.require("regressors")?;
    let stored = regressors_from_container(&read_container(regressor_path)?)
        .with_context(|| format!("decoding {}", regressor_path.display()))?;
    let regressors: Vec<&dyn Regressor> = stored.iter().map(StoredRegressor::as_regressor).collect();
    let raw = stage("load", measurement_from_container(&read_container(measurement)?))?;

    let m = stage("preprocess", preprocess_measurement(&raw))?;
    log::info!("preprocessed to {:?}", m.dims());
    let pyramid = stage("decode_features", decode_features(&m, &decoder))?;
    let trace = stage(
        "regression_loop",
        run_regression_loop_on_pyramid(&pyramid, &model, &regressors, &reducer),
    )?;
    let theta = trace.final_theta();
    let body = stage("body_forward", body_forward(&model, theta))?;
    let k2d = stage("projection", project_weak_perspective(&body.keypoints, &theta.camera))?;
    let k2d_px: Vec<f64> = k2d
        .iter()
        .flat_map(|p| {
            let q = normalized_to_pixels(p, NETWORK_INPUT_SIZE, NETWORK_INPUT_SIZE);
            [q.x, q.y]
        })
        .collect();

    fs::create_dir_all(out)?;
    let mut outputs: BTreeMap<String, TensorContainer> = BTreeMap::new();
    outputs.insert("input.lhps".into(), measurement_to_container(&m)?);
    outputs.insert("trace.lhps".into(), trace_to_container(&trace.thetas)?);
    outputs.insert("params.lhps".into(), params_to_container(theta)?);
    outputs.insert("mesh.lhps".into(), mesh_to_container(&body.mesh)?);
    let mut kp = keypoints_to_container(&k2d, &body.keypoints)?;
    kp.insert_f64("keypoints2d_px", vec![k2d.len(), 2], k2d_px)?;
    outputs.insert("keypoints.lhps".into(), kp);
    let mut pred = mesh_to_container(&body.mesh)?;
    pred.insert_f64(
        "keypoints3d",
        vec![body.keypoints.len(), 3],
        body.keypoints.iter().flat_map(|p| [p.x, p.y, p.z]).collect(),
    )?;
    outputs.insert("prediction.lhps".into(), pred);
    for (t, mesh) in trace.meshes.iter().enumerate() {
        outputs.insert(format!("sampling_mesh{}.lhps", t + 1), mesh_to_container(mesh)?);
    }
    for (t, c) in pyramid_to_containers(&pyramid)?.into_iter().enumerate() {
        outputs.insert(format!("features_level{t}.lhps"), c);
    }

    let mut manifest = String::new();
    writeln!(manifest, "command=infer")?;
    writeln!(manifest, "measurement_sha256={}", file_digest(measurement)?)?;
    if let Some(p) = &ctx.config_path {
        writeln!(manifest, "config_sha256={}", file_digest(p)?)?;
    }
    for (key, p) in cfg.paths() {
        writeln!(manifest, "{key}_sha256={}", file_digest(p)?)?;
    }
    writeln!(manifest, "decoder={}", decoder.digest())?;
    for (t, r) in regressors.iter().enumerate() {
        writeln!(manifest, "regressor{t}={}", r.digest())?;
    }
    writeln!(manifest, "seed={}", ctx.seed)?;
    writeln!(manifest, "padding={}", ctx.padding)?;
    for line in cfg.weights.to_kv().lines() {
        writeln!(manifest, "{}", line.replace(" = ", "="))?;
    }
    writeln!(manifest, "simcc_k={}", cfg.simcc_k)?;
    writeln!(manifest, "simcc_sigma={}", cfg.simcc_sigma)?;
    writeln!(manifest, "thetas={}", trace.thetas.len())?;
    for (name, c) in &outputs {
        writeln!(
            manifest,
            "output={name} sha256={}",
            write_container(c, &out.join(name))?
        )?;
    }
    fs::write(out.join("manifest.txt"), &manifest)?;
    Ok(format!(
        "inferred {} regression steps; outputs in {}\n",
        trace.thetas.len(),
        out.display()
    ))
}

fn load_sample(path: &Path) -> anyhow::Result<PoseSample> {
    let c = read_container(path)?;
    Ok(PoseSample {
        joints: keypoints3d_from_container(&c).with_context(|| format!("{}: keypoints3d", path.display()))?,
        vertices: get_points3(&c, "vertices").with_context(|| format!("{}: vertices", path.display()))?,
    })
}

pub struct EvaluateArgs<'a> {
    pub pred: &'a Path,
    pub gt: &'a Path,
    pub label: &'a str,
    pub align: AlignMode,
}

/// Pairs prediction and ground-truth files by name and reports the means.
pub fn evaluate(args: &EvaluateArgs) -> anyhow::Result<String> {
    let names = |dir: &Path| -> anyhow::Result<Vec<String>> {
        Ok(list_files(dir, &["lhps"])?.iter().map(|p| file_name(p)).collect())
    };
    let pred_names = names(args.pred)?;
    let gt_names = names(args.gt)?;
    let mut unmatched: Vec<String> = pred_names
        .iter()
        .filter(|n| !gt_names.contains(n))
        .map(|n| format!("prediction without ground truth: {n}"))
        .collect();
    unmatched.extend(
        gt_names
            .iter()
            .filter(|n| !pred_names.contains(n))
            .map(|n| format!("ground truth without prediction: {n}")),
    );
    if !unmatched.is_empty() {
        bail!("unmatched files:\n  {}", unmatched.join("\n  "));
    }
    let pairs = pred_names
        .par_iter()
        .map(|n| {
            Ok((
                n.clone(),
                load_sample(&args.pred.join(n))?,
                load_sample(&args.gt.join(n))?,
            ))
        })
        .collect::<anyhow::Result<Vec<_>>>()?;
    let opts = EvalOptions {
        align: args.align,
        ..Default::default()
    };
    let report = MetricReport::evaluate(args.label, &pairs, opts)?;
    Ok(format!("{}\n{}", report.table(), report.key_values()))
}

/// Finite-difference table over every loss family. Fails unless all pass.
pub fn gradcheck(ctx: &RunContext, trials: usize, corrupt_gradient: bool) -> anyhow::Result<String> {
    let cfg = GradcheckConfig {
        trials,
        seed: ctx.seed,
        corrupt_gradient,
        ..Default::default()
    };
    let reports = run_gradcheck(&cfg)?;
    let mut out = format!(
        "{:<10}  {:>6}  {:>13}  {}\n",
        "loss", "trials", "max_rel_error", "status"
    );
    for r in &reports {
        let status = match (r.passed, r.vacuous) {
            (true, true) => "pass (vacuous: no trials)",
            (true, false) => "pass",
            (false, _) => "FAIL",
        };
        writeln!(
            out,
            "{:<10}  {:>6}  {:>13.3e}  {status}",
            r.family.name(),
            r.trials,
            r.max_rel_error
        )?;
    }
    writeln!(out, "tolerance={:e}", cfg.tolerance)?;
    if reports.iter().any(|r| !r.passed) {
        print!("{out}");
        bail!("gradient check failed");
    }
    Ok(out)
}

pub struct GenToyArgs<'a> {
    pub out: &'a Path,
    pub pipeline_out: Option<&'a Path>,
    pub zero_regressors: bool,
    pub psf_size: usize,
}

/// Writes the synthetic body model and, optionally, a complete toy pipeline.
pub fn gen_toy_model(ctx: &RunContext, args: &GenToyArgs) -> anyhow::Result<String> {
    let model = toy_model(ToyModelSpec {
        seed: ctx.seed,
        ..Default::default()
    })?;
    if let Some(parent) = args.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    let digest = write_container(&body_model_to_container(&model)?, args.out)?;
    let mut report = format!("body_model={}\nbody_model_sha256={digest}\n", args.out.display());
    let Some(dir) = args.pipeline_out else {
        return Ok(report);
    };

    fs::create_dir_all(dir)?;
    let pipe = ToyPipeline::new(&model, ctx.seed);
    let stored: Vec<StoredRegressor> = if args.zero_regressors {
        vec![StoredRegressor::Zero; REGRESSOR_COUNT]
    } else {
        pipe.regressors.iter().cloned().map(StoredRegressor::Toy).collect()
    };
    let psf = Psf::synthetic_caustic(args.psf_size, args.psf_size, 12, ctx.seed)?;
    let files = [
        ("decoder.lhps", decoder_to_container(&pipe.decoder, &pipe.reducer)?),
        ("regressors.lhps", regressors_to_container(&stored)?),
        ("psf.lhps", psf_to_container(&psf)?),
    ];
    for (name, c) in &files {
        let d = write_container(c, &dir.join(name))?;
        writeln!(report, "{}_sha256={d}", name.trim_end_matches(".lhps"))?;
    }
    let model_ref = fs::canonicalize(args.out)?;
    let dir_abs = fs::canonicalize(dir)?;
    let model_ref = match model_ref.strip_prefix(&dir_abs) {
        Ok(rel) => rel.to_path_buf(),
        Err(_) => model_ref,
    };
    let config = format!(
        "# toy pipeline, seed {seed}\n\
         psf = psf.lhps\n\
         body_model = {}\n\
         decoder = decoder.lhps\n\
         regressors = regressors.lhps\n\
         padding = {}\n\
         seed = {seed}\n",
        model_ref.display(),
        ctx.padding,
        seed = ctx.seed,
    );
    let config_path = dir.join("pipeline.cfg");
    fs::write(&config_path, config)?;
    writeln!(report, "config={}", config_path.display())?;
    Ok(report)
}
