//! Baseline versus guided comparison on synthetic data, evaluated in the
//! training domain and in a shifted domain.
//!
//! All data derive from `experiment.data_seed`; training seeds only change
//! initialisation and batch order. Both arms share every setting except
//! `alpha` and `beta`.

use std::fmt::Write as _;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::graph::Detection;
use crate::guidance::LanguageEmbeddingStore;
use crate::inference::{track_video, EdgeScorer, ModelScorer, TrackConfig};
use crate::io::{result_boxes, write_text, SceneAttributes};
use crate::metrics::{evaluate, MetricReport, TrackBox, DEFAULT_IOU_THRESHOLD};
use crate::model::ModelParams;
use crate::synth::{
    apply_domain_shift, build_store, gen_sequence, vocabulary_descriptions, DomainProfile,
    SynthConfig,
};
use crate::trainer::{prepare_clip, train, PreparedClip, TrainReport, TrainingClip};

#[derive(Clone, Debug)]
pub struct EvalSequence {
    pub name: String,
    pub detections: Vec<Detection>,
    pub gt: Vec<TrackBox>,
}

#[derive(Clone, Debug)]
pub struct ExperimentData {
    pub train: Vec<TrainingClip>,
    pub in_domain: Vec<EvalSequence>,
    pub cross_domain: Vec<EvalSequence>,
    pub store: LanguageEmbeddingStore,
    pub source_domain: DomainProfile,
    pub target_domain: DomainProfile,
}

pub fn source_domain(dim: usize) -> DomainProfile {
    let scene = SceneAttributes {
        camera: "static".into(),
        viewpoint: "medium".into(),
        condition: "on a sunny day".into(),
    };
    DomainProfile::identity("outdoor-A", scene, dim)
}

pub fn target_domain(cfg: &RunConfig) -> DomainProfile {
    let scene = SceneAttributes {
        camera: "moving".into(),
        viewpoint: "high".into(),
        condition: "indoors".into(),
    };
    DomainProfile::style_shift(
        "indoor-B",
        scene,
        cfg.synth.appearance_dim,
        cfg.experiment.cross_rotation_deg,
        cfg.experiment.cross_offset,
        cfg.experiment.data_seed ^ 0xb,
    )
}

fn synth_for(cfg: &RunConfig, seed: u64) -> SynthConfig {
    SynthConfig {
        seed,
        ..cfg.synth.clone()
    }
}

/// Generates training clips, both evaluation sets and the text store.
pub fn build_experiment_data(cfg: &RunConfig) -> Result<ExperimentData> {
    let e = &cfg.experiment;
    let dim = cfg.synth.appearance_dim;
    let a = source_domain(dim);
    let b = target_domain(cfg);
    let mut train = Vec::with_capacity(e.train_sequences);
    for i in 0..e.train_sequences {
        let s = gen_sequence(&synth_for(cfg, e.data_seed + i as u64), &a)?;
        train.push(TrainingClip {
            name: format!("train-{i:02}"),
            detections: s.detections,
            annotations: s.annotations,
        });
    }
    let mut in_domain = Vec::with_capacity(e.eval_sequences);
    let mut cross_domain = Vec::with_capacity(e.eval_sequences);
    for i in 0..e.eval_sequences {
        let s = gen_sequence(&synth_for(cfg, e.data_seed + 10_000 + i as u64), &a)?;
        in_domain.push(EvalSequence {
            name: format!("in-{i:02}"),
            gt: s.gt_boxes(),
            detections: s.detections,
        });
        let s = gen_sequence(&synth_for(cfg, e.data_seed + 20_000 + i as u64), &a)?;
        let shifted = apply_domain_shift(&s.detections, &a, &b)?;
        cross_domain.push(EvalSequence {
            name: format!("cross-{i:02}"),
            gt: s.gt_boxes(),
            detections: shifted,
        });
    }
    let store = build_store(&vocabulary_descriptions(), cfg.text_dim, e.embedding_seed)?;
    Ok(ExperimentData {
        train,
        in_domain,
        cross_domain,
        store,
        source_domain: a,
        target_domain: b,
    })
}

/// Tracks every sequence and returns per-sequence reports plus the pooled
/// report.
pub fn evaluate_sequences(
    scorer: &dyn EdgeScorer,
    sequences: &[EvalSequence],
    track: &TrackConfig,
) -> Result<(MetricReport, Vec<(String, MetricReport)>)> {
    let mut per = Vec::with_capacity(sequences.len());
    for s in sequences {
        let result = track_video(&s.detections, scorer, track)?;
        let pred: Vec<TrackBox> = result_boxes(&result).into_iter().map(|(b, _)| b).collect();
        per.push((
            s.name.clone(),
            evaluate(&s.gt, &pred, DEFAULT_IOU_THRESHOLD)?,
        ));
    }
    let reports: Vec<MetricReport> = per.iter().map(|(_, r)| r.clone()).collect();
    Ok((MetricReport::combine(&reports), per))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Arm {
    Baseline,
    Guided,
}

impl Arm {
    pub fn name(self) -> &'static str {
        match self {
            Arm::Baseline => "baseline",
            Arm::Guided => "guided",
        }
    }

    /// The run configuration of this arm.
    pub fn config(self, cfg: &RunConfig) -> RunConfig {
        match self {
            Arm::Baseline => RunConfig {
                alpha: 0.0,
                beta: 0.0,
                ..cfg.clone()
            },
            Arm::Guided => cfg.clone(),
        }
    }
}

/// Digest of a configuration with `alpha` and `beta` cleared; equal for both
/// arms of one experiment.
pub fn comparison_digest(cfg: &RunConfig) -> String {
    RunConfig {
        alpha: 0.0,
        beta: 0.0,
        ..cfg.clone()
    }
    .digest()
}

#[derive(Clone, Debug)]
pub struct ArmResult {
    pub arm: Arm,
    pub seed: u64,
    pub digest: String,
    pub train: TrainReport,
    pub params: ModelParams,
    pub in_domain: MetricReport,
    pub cross_domain: MetricReport,
    pub in_domain_sequences: Vec<(String, MetricReport)>,
    pub cross_domain_sequences: Vec<(String, MetricReport)>,
}

#[derive(Clone, Debug)]
pub struct ExperimentOutcome {
    pub results: Vec<ArmResult>,
}

impl ExperimentOutcome {
    pub fn get(&self, arm: Arm, seed: u64) -> Option<&ArmResult> {
        self.results.iter().find(|r| r.arm == arm && r.seed == seed)
    }

    fn mean(&self, arm: Arm, f: impl Fn(&ArmResult) -> f64) -> f64 {
        let v: Vec<f64> = self
            .results
            .iter()
            .filter(|r| r.arm == arm)
            .map(f)
            .collect();
        v.iter().sum::<f64>() / v.len() as f64
    }

    pub fn mean_cross_idf1(&self, arm: Arm) -> f64 {
        self.mean(arm, |r| r.cross_domain.idf1)
    }

    pub fn mean_in_idf1(&self, arm: Arm) -> f64 {
        self.mean(arm, |r| r.in_domain.idf1)
    }

    /// Seeds where the guided arm's cross-domain IDF1 beats the baseline's.
    pub fn cross_wins(&self) -> (usize, usize) {
        let mut wins = 0;
        let mut total = 0;
        for g in self.results.iter().filter(|r| r.arm == Arm::Guided) {
            if let Some(b) = self.get(Arm::Baseline, g.seed) {
                total += 1;
                if g.cross_domain.idf1 > b.cross_domain.idf1 {
                    wins += 1;
                }
            }
        }
        (wins, total)
    }

    /// One row per arm and seed, then per-arm means; scores in percent.
    pub fn comparison_table(&self) -> String {
        let mut out = format!(
            "{:<9} {:>5} {:>9} {:>9} {:>9} {:>9} {:>9} {:>9}\n",
            "arm", "seed", "in.IDF1", "in.HOTA", "in.MOTA", "x.IDF1", "x.HOTA", "x.MOTA"
        );
        for r in &self.results {
            let _ = writeln!(
                out,
                "{:<9} {:>5} {:>9.2} {:>9.2} {:>9.2} {:>9.2} {:>9.2} {:>9.2}",
                r.arm.name(),
                r.seed,
                100.0 * r.in_domain.idf1,
                100.0 * r.in_domain.hota,
                100.0 * r.in_domain.mota,
                100.0 * r.cross_domain.idf1,
                100.0 * r.cross_domain.hota,
                100.0 * r.cross_domain.mota
            );
        }
        for arm in [Arm::Baseline, Arm::Guided] {
            if self.results.iter().any(|r| r.arm == arm) {
                let _ = writeln!(
                    out,
                    "{:<9} {:>5} {:>9.2} {:>9.2} {:>9.2} {:>9.2} {:>9.2} {:>9.2}",
                    arm.name(),
                    "mean",
                    100.0 * self.mean_in_idf1(arm),
                    100.0 * self.mean(arm, |r| r.in_domain.hota),
                    100.0 * self.mean(arm, |r| r.in_domain.mota),
                    100.0 * self.mean_cross_idf1(arm),
                    100.0 * self.mean(arm, |r| r.cross_domain.hota),
                    100.0 * self.mean(arm, |r| r.cross_domain.mota)
                );
            }
        }
        out
    }

    pub fn comparison_csv(&self) -> String {
        let mut out = String::from("arm,seed,domain,idf1,hota,mota,deta,assa,idsw\n");
        for r in &self.results {
            for (domain, m) in [("in", &r.in_domain), ("cross", &r.cross_domain)] {
                let _ = writeln!(
                    out,
                    "{},{},{domain},{},{},{},{},{},{}",
                    r.arm.name(),
                    r.seed,
                    m.idf1,
                    m.hota,
                    m.mota,
                    m.deta,
                    m.assa,
                    m.idsw
                );
            }
        }
        out
    }
}

/// Trains one arm for one seed and evaluates it on both domains.
pub fn run_arm(
    cfg: &RunConfig,
    data: &ExperimentData,
    prepared: &[PreparedClip],
    arm: Arm,
    seed: u64,
) -> Result<ArmResult> {
    let arm_cfg = RunConfig {
        seed,
        ..arm.config(cfg)
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut params = ModelParams::init(arm_cfg.model_config(cfg.synth.appearance_dim), &mut rng)?;
    let train_report = train(&mut params, prepared, &arm_cfg.train_config())?;
    let scorer = ModelScorer(&params);
    let track = arm_cfg.track_config();
    let (in_domain, in_seq) = evaluate_sequences(&scorer, &data.in_domain, &track)?;
    let (cross_domain, cross_seq) = evaluate_sequences(&scorer, &data.cross_domain, &track)?;
    Ok(ArmResult {
        arm,
        seed,
        digest: arm_cfg.digest(),
        train: train_report,
        params,
        in_domain,
        cross_domain,
        in_domain_sequences: in_seq,
        cross_domain_sequences: cross_seq,
    })
}

/// Runs every requested arm for every seed. With `out` set, writes the
/// resolved configuration and digests, per-run checkpoints and metric
/// reports, and the comparison table as text and CSV.
pub fn run_experiment(cfg: &RunConfig, out: Option<&Path>) -> Result<ExperimentOutcome> {
    cfg.validate()?;
    if cfg.experiment.seeds.is_empty() {
        return Err(Error::Config("experiment.seeds is empty".into()));
    }
    let data = build_experiment_data(cfg)?;
    let train_cfg = cfg.train_config();
    let prepared = data
        .train
        .iter()
        .map(|c| prepare_clip(c, Some(&data.store), &train_cfg))
        .collect::<Result<Vec<_>>>()?;
    let mut arms = Vec::new();
    if cfg.experiment.baseline_arm {
        arms.push(Arm::Baseline);
    }
    arms.push(Arm::Guided);

    if let Some(dir) = out {
        std::fs::create_dir_all(dir)?;
        write_text(&dir.join("config.toml"), &cfg.to_toml())?;
        let mut digests = format!(
            "config={}\ncomparison={}\n",
            cfg.digest(),
            comparison_digest(cfg)
        );
        for &arm in &arms {
            let _ = writeln!(digests, "{}={}", arm.name(), arm.config(cfg).digest());
        }
        write_text(&dir.join("digest.txt"), &digests)?;
    }

    let mut results = Vec::new();
    for &seed in &cfg.experiment.seeds {
        for &arm in &arms {
            let started = std::time::Instant::now();
            let r = run_arm(cfg, &data, &prepared, arm, seed)?;
            log::info!(
                "{} seed {seed}: in IDF1 {:.4}, cross IDF1 {:.4} ({:.1}s)",
                arm.name(),
                r.in_domain.idf1,
                r.cross_domain.idf1,
                started.elapsed().as_secs_f64()
            );
            if let Some(dir) = out {
                let run_dir = dir.join(arm.name()).join(format!("seed-{seed}"));
                std::fs::create_dir_all(&run_dir)?;
                r.params
                    .to_checkpoint()
                    .save(run_dir.join("checkpoint.txt"))?;
                write_text(
                    &run_dir.join("in_domain.report"),
                    &r.in_domain.to_key_value(),
                )?;
                write_text(
                    &run_dir.join("cross_domain.report"),
                    &r.cross_domain.to_key_value(),
                )?;
                let mut rows = r.in_domain_sequences.clone();
                rows.extend(r.cross_domain_sequences.iter().cloned());
                write_text(&run_dir.join("sequences.txt"), &MetricReport::table(&rows))?;
            }
            results.push(r);
        }
    }
    let outcome = ExperimentOutcome { results };
    if let Some(dir) = out {
        write_text(&dir.join("comparison.txt"), &outcome.comparison_table())?;
        write_text(&dir.join("comparison.csv"), &outcome.comparison_csv())?;
    }
    Ok(outcome)
}
