//! Subcommands of the `langtrack` binary. Each command takes a resolved
//! [`RunConfig`] and writes it, with its digest, next to its outputs.
//!
//! Data directories produced by `gen` hold one subdirectory per sequence
//! (`train-00`, `in-00`, `cross-00`, ...) with `det.txt`, `gt.txt` and
//! `annotations.toml`.

use std::fmt;
use std::path::{Path, PathBuf};

use langtrack::config::RunConfig;
use langtrack::experiment::{run_experiment, source_domain, target_domain, ExperimentOutcome};
use langtrack::inference::{track_video, ModelScorer};
use langtrack::io::{
    read_annotations, read_detections, read_embedding_fixture, read_mot, write_annotations,
    write_detections, write_embedding_fixture, write_gt, write_result, AnnotationSet, MotMode,
    MotRecord,
};
use langtrack::metrics::{evaluate, MetricReport, TrackBox, DEFAULT_IOU_THRESHOLD};
use langtrack::model::ModelParams;
use langtrack::numeric::Checkpoint;
use langtrack::synth::{
    annotation_descriptions, apply_domain_shift, build_store, gen_sequence,
    vocabulary_descriptions, SynthConfig,
};
use langtrack::trainer::{prepare_clip, train, TrainingClip};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug)]
pub enum CliError {
    /// Wrong invocation; exit code 2.
    Usage(String),
    /// Failure inside the pipeline; exit code 1.
    Run(langtrack::Error),
}

impl CliError {
    pub fn category(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Run(e) => e.category(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Run(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "{m}"),
            CliError::Run(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<langtrack::Error> for CliError {
    fn from(e: langtrack::Error) -> Self {
        CliError::Run(e)
    }
}

impl From<langtrack::numeric::NumericError> for CliError {
    fn from(e: langtrack::numeric::NumericError) -> Self {
        CliError::Run(e.into())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Run(e.into())
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

/// Loads `path` (or the defaults) and applies `KEY=VALUE` overrides. Keys
/// may be dotted (`synth.seed=3`); values are TOML scalars, bare words are
/// taken as strings.
pub fn resolve_config(path: Option<&Path>, overrides: &[String]) -> Result<RunConfig> {
    let text = match path {
        Some(p) => std::fs::read_to_string(p).map_err(|e| {
            CliError::Run(std::io::Error::new(e.kind(), format!("{}: {e}", p.display())).into())
        })?,
        None => String::new(),
    };
    let mut table: toml::Table = toml::from_str(&text)
        .map_err(|e| CliError::Run(langtrack::Error::Config(e.to_string())))?;
    for item in overrides {
        let (key, raw) = item
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("override {item:?} is not KEY=VALUE")))?;
        let value = parse_scalar(raw.trim());
        if value.is_table() || value.is_array() {
            return Err(CliError::Usage(format!("override {key} must be a scalar")));
        }
        let mut parts: Vec<&str> = key.trim().split('.').collect();
        let last = parts
            .pop()
            .filter(|s| !s.is_empty())
            .ok_or_else(|| CliError::Usage(format!("empty key in {item:?}")))?;
        let mut node = &mut table;
        for p in parts {
            node = node
                .entry(p.to_string())
                .or_insert_with(|| toml::Value::Table(toml::Table::new()))
                .as_table_mut()
                .ok_or_else(|| CliError::Usage(format!("{p} in {key} is not a section")))?;
        }
        node.insert(last.to_string(), value);
    }
    let rendered = toml::to_string(&table).expect("table serialises");
    Ok(RunConfig::parse(&rendered)?)
}

fn parse_scalar(raw: &str) -> toml::Value {
    let doc = format!("v = {raw}");
    match toml::from_str::<toml::Table>(&doc) {
        Ok(mut t) => t.remove("v").expect("key present"),
        Err(_) => toml::Value::String(raw.to_string()),
    }
}

/// Writes the resolved configuration and its digest into `dir`.
pub fn write_provenance(dir: &Path, cfg: &RunConfig) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("config.toml"), cfg.to_toml())?;
    std::fs::write(dir.join("digest.txt"), format!("config={}\n", cfg.digest()))?;
    log::info!("config digest {}", cfg.digest());
    Ok(())
}

/// Generates the experiment's training and evaluation sequences, exactly as
/// the experiment driver does. Returns the sequence names.
pub fn cmd_gen(cfg: &RunConfig, out: &Path) -> Result<Vec<String>> {
    write_provenance(out, cfg)?;
    let e = &cfg.experiment;
    let a = source_domain(cfg.synth.appearance_dim);
    let b = target_domain(cfg);
    let mut jobs = Vec::new();
    for i in 0..e.train_sequences {
        jobs.push((format!("train-{i:02}"), e.data_seed + i as u64, false));
    }
    for i in 0..e.eval_sequences {
        jobs.push((format!("in-{i:02}"), e.data_seed + 10_000 + i as u64, false));
        jobs.push((
            format!("cross-{i:02}"),
            e.data_seed + 20_000 + i as u64,
            true,
        ));
    }
    for (name, seed, shifted) in &jobs {
        let s = gen_sequence(
            &SynthConfig {
                seed: *seed,
                ..cfg.synth.clone()
            },
            &a,
        )?;
        let dir = out.join(name);
        std::fs::create_dir_all(&dir)?;
        if *shifted {
            write_detections(
                dir.join("det.txt"),
                &apply_domain_shift(&s.detections, &a, &b)?,
            )?;
            let annotations = AnnotationSet {
                scene: b.scene.clone(),
                ..s.annotations
            };
            write_annotations(dir.join("annotations.toml"), &annotations)?;
        } else {
            write_detections(dir.join("det.txt"), &s.detections)?;
            write_annotations(dir.join("annotations.toml"), &s.annotations)?;
        }
        write_gt(dir.join("gt.txt"), &s.gt)?;
    }
    Ok(jobs.into_iter().map(|j| j.0).collect())
}

pub enum EmbedSource<'a> {
    /// Every description of the generator's vocabulary.
    Vocabulary,
    Annotations(&'a [PathBuf]),
    /// Check an existing fixture instead of building one.
    Validate(&'a Path),
}

/// Builds a pseudo-encoder fixture at `out`, or validates a given fixture
/// (then `out` is unused). Returns the number of descriptions.
pub fn cmd_embed(source: EmbedSource<'_>, dim: usize, seed: u64, out: &Path) -> Result<usize> {
    let descriptions = match source {
        EmbedSource::Validate(path) => {
            let store = read_embedding_fixture(path)?;
            if store.dim() != dim {
                return Err(langtrack::Error::Validation(format!(
                    "{}: dimension {} where {dim} was expected",
                    path.display(),
                    store.dim()
                ))
                .into());
            }
            return Ok(store.len());
        }
        EmbedSource::Vocabulary => vocabulary_descriptions(),
        EmbedSource::Annotations(paths) => {
            let sets = paths
                .iter()
                .map(read_annotations)
                .collect::<langtrack::Result<Vec<_>>>()?;
            annotation_descriptions(&sets.iter().collect::<Vec<_>>())?
        }
    };
    let store = build_store(&descriptions, dim, seed)?;
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)?;
    }
    write_embedding_fixture(out, &store)?;
    Ok(store.len())
}

fn training_clips(data: &Path) -> Result<Vec<TrainingClip>> {
    let mut dirs: Vec<PathBuf> = std::fs::read_dir(data)
        .map_err(|e| std::io::Error::new(e.kind(), format!("{}: {e}", data.display())))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.is_dir()
                && p.file_name()
                    .and_then(|n| n.to_str())
                    .is_some_and(|n| n.starts_with("train-"))
        })
        .collect();
    dirs.sort();
    if dirs.is_empty() {
        return Err(CliError::Usage(format!(
            "{} holds no train-* sequences",
            data.display()
        )));
    }
    dirs.iter()
        .map(|d| {
            Ok(TrainingClip {
                name: d.file_name().expect("named").to_string_lossy().into_owned(),
                detections: read_detections(d.join("det.txt"))?,
                annotations: read_annotations(d.join("annotations.toml"))?,
            })
        })
        .collect()
}

/// Trains on the `train-*` sequences of `data` and writes `checkpoint.txt`
/// and `losses.csv` into `out`.
pub fn cmd_train(cfg: &RunConfig, data: &Path, fixture: &Path, out: &Path) -> Result<PathBuf> {
    write_provenance(out, cfg)?;
    let clips = training_clips(data)?;
    let store = read_embedding_fixture(fixture)?;
    let train_cfg = cfg.train_config();
    let prepared = clips
        .iter()
        .map(|c| prepare_clip(c, Some(&store), &train_cfg))
        .collect::<langtrack::Result<Vec<_>>>()?;
    let appearance_dim = clips[0].detections[0].appearance.len();
    let mut params = ModelParams::init(
        cfg.model_config(appearance_dim),
        &mut ChaCha8Rng::seed_from_u64(cfg.seed),
    )?;
    let report = train(&mut params, &prepared, &train_cfg)?;
    let mut csv = String::from("epoch,total,lc,isg,spg\n");
    for (i, l) in report.epoch_losses.iter().enumerate() {
        csv.push_str(&format!("{i},{},{},{},{}\n", l.total, l.lc, l.isg, l.spg));
    }
    std::fs::write(out.join("losses.csv"), csv)?;
    let path = out.join("checkpoint.txt");
    params.to_checkpoint().save(&path)?;
    Ok(path)
}

/// Tracks one detection file with a trained model and writes `result.txt`
/// into `out`. No language data is read.
pub fn cmd_track(
    cfg: &RunConfig,
    checkpoint: &Path,
    detections: &Path,
    out: &Path,
) -> Result<PathBuf> {
    write_provenance(out, cfg)?;
    let params = ModelParams::from_checkpoint(&Checkpoint::load(checkpoint)?)?;
    let dets = read_detections(detections)?;
    let result = track_video(&dets, &ModelScorer(&params), &cfg.track_config())?;
    let path = out.join("result.txt");
    write_result(&path, &result)?;
    Ok(path)
}

fn track_boxes(records: &[MotRecord], path: &Path) -> Result<Vec<TrackBox>> {
    records
        .iter()
        .map(|r| {
            r.track_box().ok_or_else(|| {
                langtrack::Error::Validation(format!(
                    "{}: frame {} has negative id {}",
                    path.display(),
                    r.frame,
                    r.id
                ))
                .into()
            })
        })
        .collect()
}

/// Scores a result file against ground truth and writes `metrics.report`.
pub fn cmd_eval(cfg: &RunConfig, gt: &Path, result: &Path, out: &Path) -> Result<MetricReport> {
    write_provenance(out, cfg)?;
    let gt_boxes = track_boxes(&read_mot(gt, MotMode::Gt)?, gt)?;
    let pred = track_boxes(&read_mot(result, MotMode::Any)?, result)?;
    let report = evaluate(&gt_boxes, &pred, DEFAULT_IOU_THRESHOLD)?;
    std::fs::write(out.join("metrics.report"), report.to_key_value())?;
    Ok(report)
}

/// Baseline and guided arms over every configured seed, evaluated in and
/// across domains.
pub fn cmd_experiment(cfg: &RunConfig, out: &Path) -> Result<ExperimentOutcome> {
    Ok(run_experiment(cfg, Some(out))?)
}
