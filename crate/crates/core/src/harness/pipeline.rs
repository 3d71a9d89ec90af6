//! End-to-end runs: task construction, VAE, graph smoothing, surrogate, MBO,
//! and evaluation against the exact oracle.

use std::collections::HashSet;
use std::path::PathBuf;
use std::time::Instant;

use rand::seq::index;
use serde::{Deserialize, Serialize};

use super::metrics::{evaluate_designs, evaluate_designs_reference, MetricsReport};
use super::oracle::{nk_dataset, sample_space, ExactOracle, NkLandscape};
use crate::data::{
    normalize_fitness, parse_labeled_csv, subsample, Alphabet, FitnessRange, LabeledDataset, Sequence, SplitOptions,
    SubsampleMode,
};
use crate::error::{Error, Result, StageExt};
use crate::graph::{create_graph_threaded, SmoothingParams};
use crate::mbo::{propose_designs, train_surrogate, DesignSet, MboConfig, SurrogateConfig, SurrogateModel};
use crate::nn::OptimizerConfig;
use crate::random;
use crate::smoothing::smooth;
use crate::vae::{reconstruction_accuracy, train_vae, VaeModel, VaeTrainConfig};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum OracleSpec {
    Nk {
        length: usize,
        alphabet: Alphabet,
        k: usize,
        landscape_seed: u64,
    },
    /// CSV enumerating the whole space.
    Table { path: PathBuf, alphabet: Alphabet },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TaskConfig {
    pub oracle: OracleSpec,
    pub percentile: f64,
    pub gap: usize,
    pub top_percentile: f64,
    /// Random subsample of the difficulty split used for training; 0 keeps all.
    pub train_size: usize,
    /// Held-out labeled sequences from outside the split.
    pub holdout: usize,
}

impl Default for TaskConfig {
    fn default() -> Self {
        Self {
            oracle: OracleSpec::Nk {
                length: 8,
                alphabet: Alphabet::dna(),
                k: 2,
                landscape_seed: 0,
            },
            percentile: 30.0,
            gap: 3,
            top_percentile: 99.0,
            train_size: 400,
            holdout: 2000,
        }
    }
}

/// Sequences the VAE is fitted on. Either way no labels are used.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum VaeCorpus {
    #[default]
    Train,
    /// A seeded sample of the unlabeled sequence space.
    Space { size: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VaeStageConfig {
    pub corpus: VaeCorpus,
    pub train: VaeTrainConfig,
}

impl Default for VaeStageConfig {
    fn default() -> Self {
        Self {
            corpus: VaeCorpus::default(),
            train: VaeTrainConfig {
                epochs: 200,
                optimizer: OptimizerConfig::adaptive(1e-2),
                ..VaeTrainConfig::default()
            },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub seed: u64,
    pub task: TaskConfig,
    pub vae: VaeStageConfig,
    pub smoothing: SmoothingParams,
    pub surrogate: SurrogateConfig,
    pub mbo: MboConfig,
    /// Also run the unsmoothed variant: surrogate on the training nodes only,
    /// raw labels, same MBO.
    pub ablation: bool,
    /// Wall-clock per stage; off by default so reports stay reproducible.
    pub record_timings: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        let mut cfg = Self {
            seed: 0,
            task: TaskConfig::default(),
            vae: VaeStageConfig::default(),
            smoothing: SmoothingParams::default(),
            surrogate: SurrogateConfig::default(),
            mbo: MboConfig::default(),
            ablation: true,
            record_timings: false,
        };
        cfg.reseed(0);
        cfg
    }
}

impl RunConfig {
    /// Sets the run seed and derives every stage seed from it.
    pub fn reseed(&mut self, seed: u64) {
        self.seed = seed;
        self.vae.train.seed = random::derive_seed(seed, 11);
        self.smoothing.seed = random::derive_seed(seed, 12);
        self.surrogate.seed = random::derive_seed(seed, 13);
    }
}

/// The benchmark: oracle, full labeled space, difficulty split, training set
/// and holdout.
#[derive(Clone, Debug)]
pub struct Task {
    oracle: ExactOracle,
    pub range: FitnessRange,
    pub split: LabeledDataset,
    pub train: LabeledDataset,
    pub holdout: LabeledDataset,
}

impl Task {
    pub fn build(cfg: &TaskConfig, seed: u64) -> Result<Self> {
        let (oracle, full) = match &cfg.oracle {
            OracleSpec::Nk {
                length,
                alphabet,
                k,
                landscape_seed,
            } => {
                let nk = NkLandscape::new(*length, alphabet.len(), *k, *landscape_seed)?;
                let full = nk_dataset(&nk, alphabet)?;
                (ExactOracle::Nk(nk), full)
            }
            OracleSpec::Table { path, alphabet } => {
                let full = parse_labeled_csv(path, alphabet)?;
                (ExactOracle::table(&full)?, full)
            }
        };
        let range = full.fitness_range()?;
        let opts = SplitOptions {
            percentile: cfg.percentile,
            gap: cfg.gap,
            top_percentile: cfg.top_percentile,
        };
        let picked = opts.select(&full)?;
        let split = full.select(format!("{}-p{}-g{}", full.name, cfg.percentile, cfg.gap), &picked)?;
        let train = if cfg.train_size == 0 || cfg.train_size >= split.len() {
            split.clone()
        } else {
            let mut rng = random::seeded(random::derive_seed(seed, 1));
            let mut idx = index::sample(&mut rng, split.len(), cfg.train_size).into_vec();
            idx.sort_unstable();
            split.select(format!("{}-n{}", split.name, cfg.train_size), &idx)?
        };
        let in_split: HashSet<usize> = picked.into_iter().collect();
        let rest: Vec<usize> = (0..full.len()).filter(|i| !in_split.contains(i)).collect();
        if rest.is_empty() {
            return Err(Error::param("difficulty split leaves nothing to hold out"));
        }
        let take = cfg.holdout.clamp(1, rest.len());
        let mut rng = random::seeded(random::derive_seed(seed, 2));
        let mut idx: Vec<usize> = index::sample(&mut rng, rest.len(), take).into_iter().map(|i| rest[i]).collect();
        idx.sort_unstable();
        let holdout = full.select(format!("{}-holdout", full.name), &idx)?;
        Ok(Self {
            oracle,
            range,
            split,
            train,
            holdout,
        })
    }

    pub fn with_train(&self, train: LabeledDataset) -> Self {
        Self { train, ..self.clone() }
    }

    pub fn alphabet(&self) -> &Alphabet {
        &self.train.alphabet
    }

    pub fn best_train_fitness(&self) -> f64 {
        normalize_fitness(self.train.best_label(), self.range)
    }

    /// Oracle metrics for a design set, cross-checked against the reference
    /// implementation.
    pub fn evaluate(&self, designs: &DesignSet<f64>) -> Result<(MetricsReport, bool)> {
        self.evaluate_sequences(&designs.sequences())
    }

    pub fn evaluate_sequences(&self, seqs: &[Sequence]) -> Result<(MetricsReport, bool)> {
        let m = evaluate_designs(seqs, &self.oracle, &self.train.sequences, self.range)?;
        let r = evaluate_designs_reference(seqs, &self.oracle, &self.train.sequences, self.range)?;
        Ok((m, m == r))
    }

    fn oracle_score(&self, s: &Sequence) -> Result<f64> {
        self.oracle.fitness(s)
    }
}

pub fn vae_corpus(cfg: &VaeStageConfig, task: &Task, seed: u64) -> Result<Vec<Sequence>> {
    match cfg.corpus {
        VaeCorpus::Train => Ok(task.train.sequences.clone()),
        VaeCorpus::Space { size } => Ok(sample_space(
            task.alphabet().len(),
            task.train.seq_len(),
            size,
            random::derive_seed(seed, 3),
        )),
    }
}

pub fn fit_vae(cfg: &RunConfig, task: &Task) -> Result<VaeModel<f64>> {
    let corpus = vae_corpus(&cfg.vae, task, cfg.seed)?;
    Ok(train_vae::<f64>(&corpus, task.alphabet(), &cfg.vae.train)?.model)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DesignRecord {
    pub sequence: String,
    pub predicted: f64,
    pub oracle: f64,
    pub normalized: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArmReport {
    pub metrics: MetricsReport,
    /// Harness metrics equal the independent recomputation.
    pub metrics_verified: bool,
    pub holdout_mae: f64,
    pub surrogate_initial_mse: f64,
    pub surrogate_final_mse: f64,
    pub nodes: usize,
    pub edges: usize,
    pub designs: Vec<DesignRecord>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageTiming {
    pub stage: String,
    pub seconds: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub config: RunConfig,
    pub split_size: usize,
    pub train_size: usize,
    pub holdout_size: usize,
    pub fitness_range: FitnessRange,
    pub best_train_fitness: f64,
    pub vae_reconstruction: f64,
    pub smoothed: ArmReport,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub unsmoothed: Option<ArmReport>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub timings: Option<Vec<StageTiming>>,
}

struct Clock {
    on: bool,
    marks: Vec<StageTiming>,
    last: Instant,
}

impl Clock {
    fn new(on: bool) -> Self {
        Self { on, marks: Vec::new(), last: Instant::now() }
    }

    fn lap(&mut self, stage: &str) {
        let now = Instant::now();
        if self.on {
            self.marks.push(StageTiming {
                stage: stage.to_string(),
                seconds: (now - self.last).as_secs_f64(),
            });
        }
        self.last = now;
    }

    fn finish(self) -> Option<Vec<StageTiming>> {
        self.on.then_some(self.marks)
    }
}

/// Surrogate, MBO and evaluation for one arm. `smoothing = None` is the
/// unsmoothed ablation.
pub fn run_arm(
    task: &Task,
    vae: &VaeModel<f64>,
    embeddings: &[Vec<f64>],
    smoothing: Option<&SmoothingParams>,
    surrogate: &SurrogateConfig,
    mbo: &MboConfig,
    threads: usize,
) -> Result<(ArmReport, SurrogateModel<f64>)> {
    let (nodes, labels, edges) = match smoothing {
        Some(p) => {
            let graph = create_graph_threaded(embeddings, &task.train.labels, p, threads).stage("create_graph")?;
            let yhat = smooth(&graph, p).stage("smooth")?;
            (graph.coords(), yhat.values, graph.edges.len())
        }
        None => (embeddings.to_vec(), task.train.labels.clone(), 0),
    };
    let fit = train_surrogate(&nodes, &labels, surrogate).stage("train_surrogate")?;
    let designs = propose_designs(&fit.model, &nodes, vae, mbo).stage("propose_designs")?;
    let (metrics, verified) = task.evaluate(&designs).stage("evaluate_designs")?;
    let holdout_mae = holdout_mae(task, vae, &fit.model).stage("holdout")?;
    let records = designs
        .designs
        .iter()
        .map(|d| {
            let y = task.oracle_score(&d.sequence)?;
            Ok(DesignRecord {
                sequence: task.alphabet().decode(&d.sequence),
                predicted: d.score,
                oracle: y,
                normalized: normalize_fitness(y, task.range),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((
        ArmReport {
            metrics,
            metrics_verified: verified,
            holdout_mae,
            surrogate_initial_mse: fit.initial_mse,
            surrogate_final_mse: fit.final_mse,
            nodes: nodes.len(),
            edges,
            designs: records,
        },
        fit.model,
    ))
}

/// Mean absolute error of the surrogate on the holdout's oracle labels.
pub fn holdout_mae(task: &Task, vae: &VaeModel<f64>, model: &SurrogateModel<f64>) -> Result<f64> {
    let z = vae.encode_batch(&task.holdout.sequences)?;
    let pred = model.predict_batch(&z)?;
    Ok(pred
        .iter()
        .zip(&task.holdout.labels)
        .map(|(p, y)| (p - y).abs())
        .sum::<f64>()
        / pred.len() as f64)
}

pub fn run_pipeline(cfg: &RunConfig) -> Result<RunReport> {
    run_pipeline_with(cfg, None, 1)
}

/// Full run. A pretrained `vae` skips VAE training; `threads` only affects
/// graph construction and never the result.
pub fn run_pipeline_with(cfg: &RunConfig, vae: Option<VaeModel<f64>>, threads: usize) -> Result<RunReport> {
    let mut clock = Clock::new(cfg.record_timings);
    let task = Task::build(&cfg.task, cfg.seed).stage("task")?;
    clock.lap("task");
    let vae = match vae {
        Some(v) => {
            if v.alphabet != *task.alphabet() || v.length != task.train.seq_len() {
                return Err(Error::shape("VAE alphabet or length differs from the task")).stage("vae");
            }
            v
        }
        None => fit_vae(cfg, &task).stage("vae")?,
    };
    clock.lap("vae");
    let embeddings = vae.encode_batch(&task.train.sequences).stage("encode")?;
    let vae_reconstruction = reconstruction_accuracy(&vae, &task.train.sequences).stage("encode")?;
    clock.lap("encode");
    let (smoothed, _) = run_arm(&task, &vae, &embeddings, Some(&cfg.smoothing), &cfg.surrogate, &cfg.mbo, threads)?;
    clock.lap("smoothed");
    let unsmoothed = if cfg.ablation {
        let (arm, _) = run_arm(&task, &vae, &embeddings, None, &cfg.surrogate, &cfg.mbo, threads)?;
        clock.lap("unsmoothed");
        Some(arm)
    } else {
        None
    };
    Ok(RunReport {
        config: cfg.clone(),
        split_size: task.split.len(),
        train_size: task.train.len(),
        holdout_size: task.holdout.len(),
        fitness_range: task.range,
        best_train_fitness: task.best_train_fitness(),
        vae_reconstruction,
        smoothed,
        unsmoothed,
        timings: clock.finish(),
    })
}

/// Smoothing hyperparameter lists; an empty list keeps the base value.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SweepGrid {
    pub alpha: Vec<f64>,
    pub nodes: Vec<usize>,
    pub layers: Vec<usize>,
    pub k: Vec<usize>,
    pub beta: Vec<f64>,
}

impl SweepGrid {
    pub fn cells(&self, base: &SmoothingParams) -> Vec<SmoothingParams> {
        fn or<T: Clone>(v: &[T], d: T) -> Vec<T> {
            if v.is_empty() {
                vec![d]
            } else {
                v.to_vec()
            }
        }
        let mut out = Vec::new();
        for &nodes in &or(&self.nodes, base.nodes) {
            for &alpha in &or(&self.alpha, base.alpha) {
                for &layers in &or(&self.layers, base.layers) {
                    for &k in &or(&self.k, base.k) {
                        for &beta in &or(&self.beta, base.beta) {
                            out.push(SmoothingParams {
                                nodes,
                                alpha,
                                layers,
                                k,
                                beta,
                                ..base.clone()
                            });
                        }
                    }
                }
            }
        }
        out
    }

    /// The hyperparameter ranges searched over in the original tuning.
    pub fn reference() -> Self {
        Self {
            alpha: (0..17).map(|i| 0.1 + 0.05 * i as f64).map(|a| (a * 100.0).round() / 100.0).collect(),
            nodes: (4..=20).step_by(4).map(|n| n * 1000).collect(),
            layers: vec![1, 2, 3, 4],
            k: (2..=8).collect(),
            beta: Vec::new(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SweepConfig {
    pub base: RunConfig,
    pub grid: SweepGrid,
    /// Maximum number of grid cells evaluated.
    pub budget: usize,
    pub seed: u64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            base: RunConfig { ablation: false, ..RunConfig::default() },
            grid: SweepGrid::default(),
            budget: 64,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub index: usize,
    pub alpha: f64,
    pub nodes: usize,
    pub layers: usize,
    pub k: usize,
    pub beta: f64,
    pub metrics: MetricsReport,
    pub holdout_mae: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub grid_size: usize,
    pub evaluated: usize,
    pub best_train_fitness: f64,
    /// Sorted by fitness, best first; ties keep grid order.
    pub cells: Vec<SweepCell>,
}

/// Grid indices to evaluate: all of them within budget, else a seeded sample.
pub fn sweep_selection(grid_size: usize, budget: usize, seed: u64) -> Vec<usize> {
    if grid_size <= budget {
        return (0..grid_size).collect();
    }
    let mut rng = random::seeded(seed);
    let mut idx = index::sample(&mut rng, grid_size, budget).into_vec();
    idx.sort_unstable();
    idx
}

/// The task, VAE and embeddings are shared by every cell; cells run on up
/// to `threads` workers and are reported in a fixed order.
pub fn sweep(cfg: &SweepConfig, threads: usize) -> Result<SweepReport> {
    let base = &cfg.base;
    let cells = cfg.grid.cells(&base.smoothing);
    if cells.is_empty() {
        return Err(Error::param("empty sweep grid"));
    }
    let chosen = sweep_selection(cells.len(), cfg.budget.max(1), cfg.seed);
    let task = Task::build(&base.task, base.seed).stage("task")?;
    let vae = fit_vae(base, &task).stage("vae")?;
    let embeddings = vae.encode_batch(&task.train.sequences).stage("encode")?;
    let run_cell = |i: usize| -> Result<SweepCell> {
        let p = &cells[i];
        let (arm, _) = run_arm(&task, &vae, &embeddings, Some(p), &base.surrogate, &base.mbo, 1)?;
        Ok(SweepCell {
            index: i,
            alpha: p.alpha,
            nodes: p.nodes,
            layers: p.layers,
            k: p.k,
            beta: p.beta,
            metrics: arm.metrics,
            holdout_mae: arm.holdout_mae,
        })
    };
    let mut results = parallel_map(&chosen, threads, |&i| run_cell(i))?;
    results.sort_by(|a, b| b.metrics.fitness.total_cmp(&a.metrics.fitness).then(a.index.cmp(&b.index)));
    Ok(SweepReport {
        grid_size: cells.len(),
        evaluated: results.len(),
        best_train_fitness: task.best_train_fitness(),
        cells: results,
    })
}

/// Ordered map over `items` using up to `threads` scoped workers.
fn parallel_map<I: Sync, O: Send>(items: &[I], threads: usize, f: impl Fn(&I) -> Result<O> + Sync) -> Result<Vec<O>> {
    if threads <= 1 || items.len() <= 1 {
        return items.iter().map(f).collect();
    }
    let chunk = items.len().div_ceil(threads);
    let f = &f;
    std::thread::scope(|s| {
        let handles: Vec<_> = items
            .chunks(chunk)
            .map(|part| s.spawn(move || part.iter().map(f).collect::<Result<Vec<O>>>()))
            .collect();
        let mut out = Vec::with_capacity(items.len());
        for h in handles {
            out.extend(h.join().expect("worker panicked")?);
        }
        Ok(out)
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LimitsConfig {
    pub base: RunConfig,
    pub ratios: Vec<f64>,
    pub modes: Vec<SubsampleMode>,
    pub repeats: usize,
    pub seed: u64,
}

impl Default for LimitsConfig {
    fn default() -> Self {
        Self {
            base: RunConfig { ablation: false, ..RunConfig::default() },
            ratios: vec![0.05, 0.1, 0.2, 0.5, 0.7, 1.0],
            modes: vec![SubsampleMode::Random, SubsampleMode::Lowest],
            repeats: 3,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LimitsCell {
    pub ratio: f64,
    pub mode: SubsampleMode,
    pub train_size: usize,
    pub fitness: Vec<f64>,
    pub mean: f64,
    pub std: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LimitsReport {
    pub cells: Vec<LimitsCell>,
    /// Spearman correlation between ratio and mean fitness, per mode.
    pub trend: Vec<(SubsampleMode, f64)>,
}

/// Spearman rank correlation with average ranks for ties; 0 when either
/// side is constant.
pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    fn ranks(v: &[f64]) -> Vec<f64> {
        let mut order: Vec<usize> = (0..v.len()).collect();
        order.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
        let mut r = vec![0.0; v.len()];
        let mut i = 0;
        while i < order.len() {
            let mut j = i;
            while j + 1 < order.len() && v[order[j + 1]] == v[order[i]] {
                j += 1;
            }
            let avg = (i + j) as f64 / 2.0;
            for &o in &order[i..=j] {
                r[o] = avg;
            }
            i = j + 1;
        }
        r
    }
    let (rx, ry) = (ranks(x), ranks(y));
    let n = x.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx) * (a - mx)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my) * (b - my)).sum();
    if vx == 0.0 || vy == 0.0 {
        0.0
    } else {
        cov / (vx * vy).sqrt()
    }
}

/// Median design fitness as the training split shrinks. The VAE is fitted
/// once on the full training set and shared by every cell.
pub fn limits_study(cfg: &LimitsConfig, threads: usize) -> Result<LimitsReport> {
    if cfg.ratios.iter().any(|&r| !(r > 0.0 && r <= 1.0)) {
        return Err(Error::param("ratios must lie in (0, 1]"));
    }
    let base = &cfg.base;
    let task = Task::build(&base.task, base.seed).stage("task")?;
    let vae = fit_vae(base, &task).stage("vae")?;
    let mut jobs = Vec::new();
    for &ratio in &cfg.ratios {
        for &mode in &cfg.modes {
            for rep in 0..cfg.repeats.max(1) {
                jobs.push((ratio, mode, rep));
            }
        }
    }
    let numbered: Vec<(usize, (f64, SubsampleMode, usize))> = jobs.iter().copied().enumerate().collect();
    let runs = parallel_map(&numbered, threads, |&(job, (ratio, mode, _))| {
        let cell_seed = random::derive_seed(cfg.seed, job as u64);
        let train = subsample(&task.train, ratio, mode, cell_seed)?;
        let sub = task.with_train(train);
        let emb = vae.encode_batch(&sub.train.sequences)?;
        let mut smoothing = base.smoothing.clone();
        smoothing.nodes = smoothing.nodes.max(sub.train.len());
        smoothing.k = smoothing.k.min(smoothing.nodes.saturating_sub(1)).max(1);
        let (arm, _) = run_arm(&sub, &vae, &emb, Some(&smoothing), &base.surrogate, &base.mbo, 1)?;
        Ok((sub.train.len(), arm.metrics.fitness))
    })?;
    let mut cells: Vec<LimitsCell> = Vec::new();
    for (&(ratio, mode, _), &(size, fit)) in jobs.iter().zip(&runs) {
        match cells.last_mut() {
            Some(c) if c.ratio == ratio && c.mode == mode => c.fitness.push(fit),
            _ => cells.push(LimitsCell {
                ratio,
                mode,
                train_size: size,
                fitness: vec![fit],
                mean: 0.0,
                std: 0.0,
            }),
        }
    }
    for c in &mut cells {
        let n = c.fitness.len() as f64;
        c.mean = c.fitness.iter().sum::<f64>() / n;
        c.std = (c.fitness.iter().map(|f| (f - c.mean) * (f - c.mean)).sum::<f64>() / n).sqrt();
    }
    let trend = cfg
        .modes
        .iter()
        .map(|&m| {
            let (r, f): (Vec<f64>, Vec<f64>) = cells.iter().filter(|c| c.mode == m).map(|c| (c.ratio, c.mean)).unzip();
            (m, spearman(&r, &f))
        })
        .collect();
    Ok(LimitsReport { cells, trend })
}
