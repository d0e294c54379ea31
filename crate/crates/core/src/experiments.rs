//! Config-driven experiments: synthetic data, instrumented training runs,
//! random-init rank censuses, and their CSV/SVG/JSON reports.

use std::fs;
use std::path::{Path, PathBuf};

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::canonical::{solve_zero_loss, CanonicalFitResult};
use crate::disparity::{build_disparity_with, classify_stationary_point, numerical_rank, StationaryClassification, Verdict};
use crate::error::{Error, Result};
use crate::fourier::{partial_sum_eval, project_model_with, CanonicalCoeffs, FourierProjector, FrequencyIndexSet, QuadratureGrid};
use crate::nn::{detect_dead_neurons, detect_duplicated_neurons, probe_grid, Activation, Architecture, MlpNetwork, NeuronId, TrainingSet};
use crate::plot::{LineChart, Scale};
use crate::seed;
use crate::trainer::{all_hidden_neurons, init_random, make_degenerate, sgd_train, Degeneration, InitScheme, RankMonitor, TrainSchedule, TrainingTrace};

/// Minimum pairwise distance enforced between generated inputs.
pub const MIN_INPUT_SEPARATION: f64 = 1e-6;

/// Max-norm tolerance for reporting duplicated units.
pub const DUPLICATE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataKind {
    PlantedFourier,
    RandomLabels,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkConfig {
    pub input_dim: usize,
    pub hidden_sizes: Vec<usize>,
    pub activation: Activation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    pub kind: DataKind,
    #[serde(rename = "T")]
    pub samples: usize,
    pub label_seed: u64,
    pub coeff_bandwidth: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CanonicalConfig {
    pub per_dim_limits: Vec<usize>,
    /// Defaults to `4 N_j + 4` per dimension.
    #[serde(default)]
    pub grid_points_per_dim: Option<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub minibatch: usize,
    pub lr0: f64,
    pub decay: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MonitorConfig {
    pub cadence: usize,
    pub rank_rel_tol: f64,
    pub grad_tol: f64,
}

/// Degeneracy injected right after initialisation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum DegenerateConfig {
    KillAll,
    KillNeurons { neurons: Vec<NeuronId> },
    DuplicateNeuron { src: NeuronId, dst: NeuronId },
}

impl DegenerateConfig {
    pub fn to_degeneration(&self, net: &MlpNetwork) -> Degeneration {
        match self {
            DegenerateConfig::KillAll => Degeneration::KillNeurons(all_hidden_neurons(net)),
            DegenerateConfig::KillNeurons { neurons } => Degeneration::KillNeurons(neurons.clone()),
            DegenerateConfig::DuplicateNeuron { src, dst } => Degeneration::DuplicateNeuron { src: *src, dst: *dst },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub network: NetworkConfig,
    pub data: DataConfig,
    pub canonical: CanonicalConfig,
    pub train: TrainConfig,
    pub monitor: MonitorConfig,
    pub output_dir: PathBuf,
    #[serde(default = "InitScheme::uniform_fan_in")]
    pub init: InitScheme,
    #[serde(default)]
    pub degenerate: Option<DegenerateConfig>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        let mut cfg = Self::from_json(&text)?;
        if cfg.output_dir.is_relative() {
            if let Some(base) = path.parent() {
                cfg.output_dir = base.join(&cfg.output_dir);
            }
        }
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn architecture(&self) -> Result<Architecture> {
        Architecture::new(
            self.network.input_dim,
            self.network.hidden_sizes.clone(),
            self.network.activation,
        )
    }

    pub fn index_set(&self) -> Result<FrequencyIndexSet> {
        FrequencyIndexSet::new(self.canonical.per_dim_limits.clone())
    }

    pub fn grid(&self) -> Result<QuadratureGrid> {
        let idx = self.index_set()?;
        match &self.canonical.grid_points_per_dim {
            Some(g) => QuadratureGrid::new(g.clone()),
            None => Ok(QuadratureGrid::default_for(&idx)),
        }
    }

    pub fn schedule(&self) -> TrainSchedule {
        TrainSchedule {
            epochs: self.train.epochs,
            minibatch_size: self.train.minibatch,
            lr0: self.train.lr0,
            decay: self.train.decay,
            seed: self.seed,
        }
    }

    pub fn rank_monitor(&self) -> Result<RankMonitor> {
        Ok(RankMonitor {
            cadence: self.monitor.cadence,
            index_set: self.index_set()?,
            grid: self.grid()?,
            rank_rel_tol: self.monitor.rank_rel_tol,
        })
    }

    /// Load-time checks: valid architecture, `T >= 1`, `N >= T`, Nyquist grid,
    /// and a consistent schedule and monitor.
    pub fn validate(&self) -> Result<()> {
        self.architecture()?;
        let k = self.network.input_dim;
        let t = self.data.samples;
        if t < 1 {
            return Err(Error::Config("data.T must be at least 1".into()));
        }
        if self.canonical.per_dim_limits.len() != k {
            return Err(Error::Config(format!(
                "canonical.per_dim_limits has {} entries, network.input_dim is {k}",
                self.canonical.per_dim_limits.len()
            )));
        }
        let idx = self.index_set()?;
        if idx.len() < t {
            return Err(Error::Config(format!(
                "index set size N = {} is smaller than T = {t}; N >= T is required",
                idx.len()
            )));
        }
        let grid = self.grid()?;
        if grid.dim() != k {
            return Err(Error::Config(format!(
                "canonical.grid_points_per_dim has {} entries, network.input_dim is {k}",
                grid.dim()
            )));
        }
        grid.check_nyquist(&idx)?;
        self.schedule().validate(t)?;
        if self.monitor.cadence < 1 {
            return Err(Error::Config("monitor.cadence must be at least 1".into()));
        }
        if !(self.monitor.rank_rel_tol > 0.0 && self.monitor.rank_rel_tol < 1.0) {
            return Err(Error::Config("monitor.rank_rel_tol must lie in (0, 1)".into()));
        }
        if !(self.monitor.grad_tol > 0.0) {
            return Err(Error::Config("monitor.grad_tol must be positive".into()));
        }
        if !(self.init.scale > 0.0 && self.init.scale.is_finite() && self.init.center_jitter >= 0.0) {
            return Err(Error::Config("init.scale must be positive and init.center_jitter non-negative".into()));
        }
        if let Some(d) = &self.degenerate {
            let net = MlpNetwork::zeros(self.architecture()?)?;
            match d.to_degeneration(&net) {
                Degeneration::KillNeurons(ids) => {
                    if self.network.activation != Activation::Relu {
                        return Err(Error::KillNeedsRelu);
                    }
                    for id in ids {
                        id.check(&net)?;
                    }
                }
                Degeneration::DuplicateNeuron { src, dst } => {
                    src.check(&net)?;
                    dst.check(&net)?;
                    if src.layer != dst.layer || src == dst {
                        return Err(Error::InvalidNeuron(format!("cannot duplicate {src} onto {dst}")));
                    }
                }
            }
        }
        Ok(())
    }
}

/// A Hermitian coefficient vector on the box `|k_j| <= bandwidth`, real and
/// imaginary parts uniform in `[-0.5, 0.5]` (the zero frequency is real).
pub fn planted_coefficients(dim: usize, bandwidth: usize, seed: u64) -> Result<CanonicalCoeffs> {
    let idx = FrequencyIndexSet::new(vec![bandwidth; dim])?;
    let n = idx.len();
    let mut rng = seed::component_rng(seed, seed::DATA_LABELS);
    let mut values = vec![num_complex::Complex64::new(0.0, 0.0); n];
    for i in 0..=n / 2 {
        let j = idx.negated(i);
        let re = rng.random_range(-0.5..=0.5);
        if i == j {
            values[i] = num_complex::Complex64::new(re, 0.0);
        } else {
            let im = rng.random_range(-0.5..=0.5);
            values[i] = num_complex::Complex64::new(re, im);
            values[j] = values[i].conj();
        }
    }
    CanonicalCoeffs::new(idx, values)
}

fn draw_inputs(samples: usize, dim: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = seed::component_rng(seed, seed::DATA_INPUTS);
    let mut inputs: Vec<Vec<f64>> = Vec::with_capacity(samples);
    while inputs.len() < samples {
        let x: Vec<f64> = (0..dim).map(|_| rng.random::<f64>()).collect();
        let far = inputs.iter().all(|p| {
            p.iter().zip(&x).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt() >= MIN_INPUT_SEPARATION
        });
        if far {
            inputs.push(x);
        }
    }
    inputs
}

/// Uniform inputs in `[0,1)^K` with pairwise distance at least
/// [`MIN_INPUT_SEPARATION`]; labels either evaluate a planted Fourier
/// polynomial or are uniform in `[-1, 1]`.
pub fn gen_synthetic_dataset(kind: DataKind, samples: usize, dim: usize, seed: u64, bandwidth: usize) -> Result<TrainingSet> {
    if samples < 1 {
        return Err(Error::EmptyData);
    }
    if dim < 1 {
        return Err(Error::Config("input dimension must be at least 1".into()));
    }
    let inputs = draw_inputs(samples, dim, seed);
    let targets = match kind {
        DataKind::PlantedFourier => {
            let theta = planted_coefficients(dim, bandwidth, seed)?;
            inputs
                .iter()
                .map(|x| partial_sum_eval(&theta, x).map(|p| p.value))
                .collect::<Result<Vec<f64>>>()?
        }
        DataKind::RandomLabels => {
            let mut rng = seed::component_rng(seed, seed::DATA_LABELS);
            (0..samples).map(|_| rng.random_range(-1.0..=1.0)).collect()
        }
    };
    TrainingSet::new(inputs, targets)
}

fn probe_for(dim: usize) -> Vec<Vec<f64>> {
    let per_dim = match dim {
        1 => 257,
        2 => 33,
        3 => 9,
        _ => 5,
    };
    probe_grid(dim, per_dim)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DegeneracyCounts {
    pub dead: usize,
    pub duplicated_pairs: usize,
}

pub fn degeneracy_counts(net: &MlpNetwork) -> Result<(DegeneracyCounts, Vec<NeuronId>, Vec<(NeuronId, NeuronId)>)> {
    let dead = detect_dead_neurons(net, &probe_for(net.architecture().input_dim))?;
    let dup = detect_duplicated_neurons(net, DUPLICATE_TOL)?;
    Ok((
        DegeneracyCounts {
            dead: dead.len(),
            duplicated_pairs: dup.len(),
        },
        dead,
        dup,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Success,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub steps: usize,
    pub final_loss: f64,
    pub final_rank: usize,
    pub index_set_size: usize,
    pub min_monitored_rank: usize,
    pub literal_grad_norm: f64,
    pub canonical_grad_norm: f64,
    pub verdict: Verdict,
    pub degeneracy_at_init: DegeneracyCounts,
    pub degeneracy_at_end: DegeneracyCounts,
    /// Dead units and duplicated pairs present at the end but not at init.
    pub new_dead: usize,
    pub new_duplicated_pairs: usize,
    pub canonical_fit_loss: Option<f64>,
    pub canonical_condition_number: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub status: RunStatus,
    pub error: Option<String>,
    pub trace_file: Option<String>,
    pub summary: Option<RunSummary>,
    pub plot_files: Vec<String>,
    /// Every artifact written, relative to the output directory.
    pub files: Vec<String>,
}

impl ExperimentReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn is_success(&self) -> bool {
        self.status == RunStatus::Success
    }
}

struct Writer<'a> {
    dir: &'a Path,
    files: Vec<String>,
}

impl Writer<'_> {
    fn put(&mut self, name: &str, contents: &str) -> Result<()> {
        fs::write(self.dir.join(name), contents)?;
        self.files.push(name.to_string());
        Ok(())
    }

    fn put_with(&mut self, name: &str, write: impl FnOnce(&Path) -> Result<()>) -> Result<()> {
        write(&self.dir.join(name))?;
        self.files.push(name.to_string());
        Ok(())
    }
}

fn coeffs_csv(c: &CanonicalCoeffs) -> Result<String> {
    let mut buf = Vec::new();
    c.write_csv(&mut buf)?;
    Ok(String::from_utf8(buf).expect("csv is utf-8"))
}

fn plots(trace: &TrainingTrace, w: &mut Writer<'_>) -> Result<Vec<String>> {
    let loss: Vec<(f64, f64)> = trace.rows.iter().map(|r| (r.step as f64, r.full_loss)).collect();
    let rank: Vec<(f64, f64)> = trace
        .monitored()
        .map(|r| (r.step as f64, r.rank.unwrap_or(0) as f64))
        .collect();
    w.put(
        "loss.svg",
        &LineChart {
            title: "full-batch loss",
            x_label: "step",
            y_label: "Q(w)",
            y_scale: Scale::Log10,
            points: &loss,
        }
        .render(),
    )?;
    w.put(
        "rank.svg",
        &LineChart {
            title: "disparity matrix numerical rank",
            x_label: "step",
            y_label: "rank",
            y_scale: Scale::Linear,
            points: &rank,
        }
        .render(),
    )?;
    Ok(vec!["loss.svg".into(), "rank.svg".into()])
}

struct Pipeline {
    trace_file: Option<String>,
    plot_files: Vec<String>,
    summary: Option<RunSummary>,
}

fn pipeline(cfg: &ExperimentConfig, w: &mut Writer<'_>, out: &mut Pipeline) -> Result<()> {
    let arch = cfg.architecture()?;
    let idx = cfg.index_set()?;
    let grid = cfg.grid()?;
    let data = gen_synthetic_dataset(
        cfg.data.kind,
        cfg.data.samples,
        cfg.network.input_dim,
        cfg.data.label_seed,
        cfg.data.coeff_bandwidth,
    )?;
    w.put_with("data.csv", |p| data.write_csv(p))?;

    let mut net = init_random(&arch, &cfg.init, cfg.seed)?;
    if let Some(d) = &cfg.degenerate {
        net = make_degenerate(&net, &d.to_degeneration(&net))?;
    }
    w.put_with("net_init.json", |p| net.save(p))?;
    let (at_init, dead0, dup0) = degeneracy_counts(&net)?;

    let monitor = cfg.rank_monitor()?;
    let schedule = cfg.schedule();
    let (trained, fit) = rayon::join(
        || sgd_train(&net, &data, &schedule, Some(&monitor)),
        || solve_zero_loss(&data, &idx),
    );
    let outcome = match trained {
        Ok(o) => o,
        Err(abort) => {
            w.put("trace.csv", &abort.trace.to_csv_string())?;
            out.trace_file = Some("trace.csv".into());
            out.plot_files = plots(&abort.trace, w)?;
            return Err(abort.error);
        }
    };
    w.put("trace.csv", &outcome.trace.to_csv_string())?;
    out.trace_file = Some("trace.csv".into());
    out.plot_files = plots(&outcome.trace, w)?;
    let final_net = outcome.net;
    w.put_with("net_final.json", |p| final_net.save(p))?;

    let fit: Option<CanonicalFitResult> = match fit {
        Ok(f) => {
            w.put("canonical_fit.csv", &coeffs_csv(&f.coeffs)?)?;
            w.put("canonical_fit.json", &f.summary_json("canonical_fit.csv"))?;
            Some(f)
        }
        Err(e) => {
            w.put("canonical_fit.json", &serde_json::json!({ "error": e.to_string() }).to_string())?;
            None
        }
    };

    let projector = FourierProjector::new(&idx, &grid)?;
    let theta = project_model_with(&final_net, &projector)?;
    w.put("theta_final.csv", &coeffs_csv(&theta)?)?;
    let h = build_disparity_with(&final_net, &projector)?;
    let mut buf = Vec::new();
    h.write_csv(&mut buf)?;
    w.put("disparity_final.csv", &String::from_utf8(buf).expect("csv is utf-8"))?;
    let class: StationaryClassification =
        classify_stationary_point(&final_net, &data, &h, cfg.monitor.grad_tol, cfg.monitor.rank_rel_tol)?;
    w.put("rank_final.json", &numerical_rank(&h, cfg.monitor.rank_rel_tol)?.to_json())?;

    let (at_end, dead1, dup1) = degeneracy_counts(&final_net)?;
    let new_dead = dead1.iter().filter(|d| !dead0.contains(d)).count();
    let new_dup = dup1.iter().filter(|d| !dup0.contains(d)).count();
    let last = outcome.trace.last().expect("trace has a final row");
    out.summary = Some(RunSummary {
        steps: last.step,
        final_loss: last.full_loss,
        final_rank: class.rank_report.numerical_rank,
        index_set_size: idx.len(),
        min_monitored_rank: outcome.trace.monitored().filter_map(|r| r.rank).min().unwrap_or(0),
        literal_grad_norm: class.literal_grad_norm,
        canonical_grad_norm: class.canonical_grad_norm,
        verdict: class.verdict,
        degeneracy_at_init: at_init,
        degeneracy_at_end: at_end,
        new_dead,
        new_duplicated_pairs: new_dup,
        canonical_fit_loss: fit.as_ref().map(|f| f.final_loss),
        canonical_condition_number: fit.as_ref().and_then(|f| f.condition_number),
    });
    Ok(())
}

/// Runs init, optional degeneracy injection, monitored SGD, the final
/// stationary-point classification and a canonical-space solve, writing
/// every artifact into `output_dir`. Only configuration errors are returned
/// as `Err`; failures during the run yield a report with `failed` status and
/// whatever artifacts were already written.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    fs::create_dir_all(&cfg.output_dir)?;
    let mut w = Writer {
        dir: &cfg.output_dir,
        files: Vec::new(),
    };
    w.put("config.json", &cfg.to_json())?;
    let mut out = Pipeline {
        trace_file: None,
        plot_files: Vec::new(),
        summary: None,
    };
    let result = pipeline(cfg, &mut w, &mut out);
    let (status, error) = match result {
        Ok(()) => (RunStatus::Success, None),
        Err(e) => (RunStatus::Failed, Some(e.to_string())),
    };
    let mut files = w.files;
    files.push("summary.json".into());
    let report = ExperimentReport {
        config: cfg.clone(),
        status,
        error,
        trace_file: out.trace_file,
        summary: out.summary,
        plot_files: out.plot_files,
        files,
    };
    fs::write(cfg.output_dir.join("summary.json"), report.to_json())?;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CensusRow {
    pub seed: u64,
    pub status: RunStatus,
    pub numerical_rank: Option<usize>,
    pub index_set_size: usize,
    pub sigma_ratio: Option<f64>,
    pub dead: Option<usize>,
    pub duplicated_pairs: Option<usize>,
    pub error: Option<String>,
}

impl CensusRow {
    pub fn is_full_rank(&self) -> bool {
        self.numerical_rank == Some(self.index_set_size)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CensusResult {
    pub rows: Vec<CensusRow>,
    /// Fraction of rows (failed rows included) whose `H` has full rank.
    pub full_rank_frequency: f64,
}

pub const CENSUS_HEADER: &str = "seed,status,rank,n,sigma_ratio,dead,duplicated_pairs,error";

fn cell<T: ToString>(v: &Option<T>) -> String {
    v.as_ref().map(|x| x.to_string()).unwrap_or_default()
}

impl CensusResult {
    pub fn to_csv_string(&self) -> String {
        let mut s = format!("{CENSUS_HEADER}\n");
        for r in &self.rows {
            let status = match r.status {
                RunStatus::Success => "success",
                RunStatus::Failed => "failed",
            };
            let err = r.error.as_deref().unwrap_or("").replace([',', '\n'], ";");
            s.push_str(&format!(
                "{},{status},{},{},{},{},{},{err}\n",
                r.seed,
                cell(&r.numerical_rank),
                r.index_set_size,
                cell(&r.sigma_ratio),
                cell(&r.dead),
                cell(&r.duplicated_pairs),
            ));
        }
        s
    }

    pub fn summary_json(&self) -> String {
        let failed = self.rows.iter().filter(|r| r.status == RunStatus::Failed).count();
        serde_json::to_string_pretty(&serde_json::json!({
            "seeds": self.rows.len(),
            "failed": failed,
            "full_rank": self.rows.iter().filter(|r| r.is_full_rank()).count(),
            "full_rank_frequency": self.full_rank_frequency,
        }))
        .expect("census summary serializes")
    }
}

#[derive(Debug, Clone)]
pub struct CensusSpec {
    pub arch: Architecture,
    pub init: InitScheme,
    pub degenerate: Option<DegenerateConfig>,
    pub index_set: FrequencyIndexSet,
    pub grid: QuadratureGrid,
    pub rank_rel_tol: f64,
    pub base_seed: u64,
}

impl CensusSpec {
    pub fn from_config(cfg: &ExperimentConfig) -> Result<Self> {
        Ok(Self {
            arch: cfg.architecture()?,
            init: cfg.init,
            degenerate: cfg.degenerate.clone(),
            index_set: cfg.index_set()?,
            grid: cfg.grid()?,
            rank_rel_tol: cfg.monitor.rank_rel_tol,
            base_seed: cfg.seed,
        })
    }
}

fn census_row(spec: &CensusSpec, projector: &FourierProjector, seed: u64) -> Result<CensusRow> {
    let mut net = init_random(&spec.arch, &spec.init, seed)?;
    if let Some(d) = &spec.degenerate {
        net = make_degenerate(&net, &d.to_degeneration(&net))?;
    }
    let h = build_disparity_with(&net, projector)?;
    let report = numerical_rank(&h, spec.rank_rel_tol)?;
    let (counts, _, _) = degeneracy_counts(&net)?;
    Ok(CensusRow {
        seed,
        status: RunStatus::Success,
        numerical_rank: Some(report.numerical_rank),
        index_set_size: spec.index_set.len(),
        sigma_ratio: Some(report.sigma_min_over_sigma_max),
        dead: Some(counts.dead),
        duplicated_pairs: Some(counts.duplicated_pairs),
        error: None,
    })
}

/// Initialises `n_seeds` networks (seeds `base_seed + s`) in parallel and
/// records the rank of each disparity matrix. Per-seed failures become
/// failed rows.
pub fn run_init_rank_census(spec: &CensusSpec, n_seeds: usize) -> Result<CensusResult> {
    if n_seeds < 1 {
        return Err(Error::Config("census needs at least one seed".into()));
    }
    if spec.arch.num_weights() < spec.index_set.len() {
        return Err(Error::Config(format!(
            "census requires M >= N, got M = {} and N = {}",
            spec.arch.num_weights(),
            spec.index_set.len()
        )));
    }
    let projector = FourierProjector::new(&spec.index_set, &spec.grid)?;
    let rows: Vec<CensusRow> = (0..n_seeds as u64)
        .into_par_iter()
        .map(|s| {
            let seed = spec.base_seed.wrapping_add(s);
            census_row(spec, &projector, seed).unwrap_or_else(|e| CensusRow {
                seed,
                status: RunStatus::Failed,
                numerical_rank: None,
                index_set_size: spec.index_set.len(),
                sigma_ratio: None,
                dead: None,
                duplicated_pairs: None,
                error: Some(e.to_string()),
            })
        })
        .collect();
    let full = rows.iter().filter(|r| r.is_full_rank()).count();
    Ok(CensusResult {
        full_rank_frequency: full as f64 / rows.len() as f64,
        rows,
    })
}

/// Runs a census and writes `census.csv` and `census_summary.json` into `dir`.
pub fn write_census(result: &CensusResult, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let csv = dir.join("census.csv");
    let summary = dir.join("census_summary.json");
    fs::write(&csv, result.to_csv_string())?;
    fs::write(&summary, result.summary_json())?;
    Ok(vec![csv, summary])
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn smoke_like(dir: &Path) -> ExperimentConfig {
        ExperimentConfig {
            seed: 7,
            network: NetworkConfig {
                input_dim: 1,
                hidden_sizes: vec![8],
                activation: Activation::Tanh,
            },
            data: DataConfig {
                kind: DataKind::RandomLabels,
                samples: 3,
                label_seed: 1,
                coeff_bandwidth: 1,
            },
            canonical: CanonicalConfig {
                per_dim_limits: vec![2],
                grid_points_per_dim: None,
            },
            train: TrainConfig {
                epochs: 20,
                minibatch: 3,
                lr0: 0.01,
                decay: 0.0,
            },
            monitor: MonitorConfig {
                cadence: 5,
                rank_rel_tol: 1e-10,
                grad_tol: 1e-4,
            },
            output_dir: dir.to_path_buf(),
            init: InitScheme::center_cutting(),
            degenerate: None,
        }
    }

    #[test]
    fn config_round_trips() {
        let cfg = smoke_like(Path::new("out"));
        assert_eq!(ExperimentConfig::from_json(&cfg.to_json()).unwrap(), cfg);
        assert!(cfg.to_json().contains("\"T\": 3"));
    }

    #[test]
    fn config_rejects_too_few_coefficients() {
        let mut cfg = smoke_like(Path::new("out"));
        cfg.data.samples = 6;
        cfg.train.minibatch = 6;
        let err = ExperimentConfig::from_json(&cfg.to_json()).unwrap_err();
        assert!(err.is_config_error());
        assert!(err.to_string().contains("N >= T"), "{err}");
    }

    #[test]
    fn config_rejects_coarse_grid_and_unknown_fields() {
        let mut cfg = smoke_like(Path::new("out"));
        cfg.canonical.grid_points_per_dim = Some(vec![5]);
        assert!(matches!(ExperimentConfig::from_json(&cfg.to_json()), Err(Error::Nyquist { .. })));
        let text = smoke_like(Path::new("out")).to_json().replacen("\"seed\"", "\"sede\": 1, \"seed\"", 1);
        assert!(ExperimentConfig::from_json(&text).is_err());
    }

    #[test]
    fn dataset_is_deterministic_and_separated() {
        let a = gen_synthetic_dataset(DataKind::RandomLabels, 200, 1, 3, 0).unwrap();
        let b = gen_synthetic_dataset(DataKind::RandomLabels, 200, 1, 3, 0).unwrap();
        assert_eq!(a, b);
        assert!(a.min_pairwise_distance() >= MIN_INPUT_SEPARATION);
        assert!(a.targets().iter().all(|y| (-1.0..=1.0).contains(y)));
    }

    #[test]
    fn planted_coefficients_are_hermitian() {
        let c = planted_coefficients(2, 2, 9).unwrap();
        assert_eq!(c.hermitian_defect(), 0.0);
        assert_eq!(c.values()[c.index_set().zero_index()].im, 0.0);
    }

    #[test]
    fn census_frequency_is_mean_of_rows() {
        let spec = CensusSpec {
            arch: Architecture::new(1, vec![8], Activation::Tanh).unwrap(),
            init: InitScheme::center_cutting(),
            degenerate: None,
            index_set: FrequencyIndexSet::new(vec![3]).unwrap(),
            grid: QuadratureGrid::new(vec![16]).unwrap(),
            rank_rel_tol: 1e-10,
            base_seed: 0,
        };
        let r = run_init_rank_census(&spec, 6).unwrap();
        let mean = r.rows.iter().map(|x| x.is_full_rank() as u8 as f64).sum::<f64>() / 6.0;
        assert_eq!(r.full_rank_frequency, mean);
        assert_eq!(r.to_csv_string().lines().count(), 7);
        assert_eq!(run_init_rank_census(&spec, 1).unwrap().rows, run_init_rank_census(&spec, 1).unwrap().rows);
    }

    #[test]
    fn run_writes_every_listed_file() {
        let dir = tempfile::tempdir().unwrap();
        let report = run_experiment(&smoke_like(dir.path())).unwrap();
        assert!(report.is_success(), "{:?}", report.error);
        for f in &report.files {
            assert!(dir.path().join(f).exists(), "{f}");
        }
        let echoed = fs::read_to_string(dir.path().join("config.json")).unwrap();
        assert_eq!(ExperimentConfig::from_json(&echoed).unwrap(), report.config);
    }
}
