//! Literal-space SGD with instrumentation: every step records the loss and
//! gradient norm, and every `cadence` steps the disparity matrix, its rank,
//! the canonical gradient and the chain-rule residual are recorded as well.

use std::fmt;
use std::io::Write;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::disparity::{build_disparity_with, canonical_gradient, chain_rule_residual_parts, complex_norm, numerical_rank};
use crate::error::{Error, Result};
use crate::fourier::{project_model_with, FourierProjector, FrequencyIndexSet, QuadratureGrid};
use crate::nn::{Activation, Architecture, MlpNetwork, Model, NeuronId, TrainingSet};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitKind {
    UniformFanIn,
    CenterCutting,
}

/// Weight initialisation recipe.
///
/// Every layer draws weights uniformly from `+-sqrt(3 / fan_in)`. Hidden
/// layers are then multiplied by `scale`. `uniform_fan_in` leaves biases at
/// zero; `center_cutting` sets each hidden bias so that the unit's
/// pre-activation at the cube center is `scale * u`, `u ~ U(-center_jitter,
/// center_jitter)`, i.e. its hyperplane passes near the center.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InitScheme {
    pub kind: InitKind,
    #[serde(default = "default_scale")]
    pub scale: f64,
    #[serde(default = "default_jitter")]
    pub center_jitter: f64,
}

fn default_scale() -> f64 {
    1.0
}

fn default_jitter() -> f64 {
    0.1
}

impl InitScheme {
    pub fn uniform_fan_in() -> Self {
        Self {
            kind: InitKind::UniformFanIn,
            scale: 1.0,
            center_jitter: default_jitter(),
        }
    }

    pub fn center_cutting() -> Self {
        Self {
            kind: InitKind::CenterCutting,
            scale: 1.0,
            center_jitter: default_jitter(),
        }
    }
}

pub fn init_random(arch: &Architecture, scheme: &InitScheme, seed: u64) -> Result<MlpNetwork> {
    if !(scheme.scale.is_finite() && scheme.scale > 0.0) || !(scheme.center_jitter >= 0.0) {
        return Err(Error::Config("init scale must be positive and jitter non-negative".into()));
    }
    let mut net = MlpNetwork::zeros(arch.clone())?;
    let mut rng = seed::component_rng(seed, seed::INIT);
    let mut w = net.weights().to_vec();
    let last = net.num_layers() - 1;
    // activations of the previous layer at the cube center
    let mut center: Vec<f64> = vec![0.5; arch.input_dim];
    for layer in 0..net.num_layers() {
        let fan_in = net.layer_fan_in(layer);
        let fan_out = net.layer_fan_out(layer);
        let a = (3.0 / fan_in as f64).sqrt();
        let gain = if layer < last { scale_of(scheme) } else { 1.0 };
        let mut raw = vec![0.0; fan_in * fan_out];
        for r in 0..fan_out {
            for c in 0..fan_in {
                raw[r * fan_in + c] = rng.random_range(-a..=a);
                w[net.weight_index(layer, r, c)] = gain * raw[r * fan_in + c];
            }
        }
        if layer == last {
            break;
        }
        let mut next_center = Vec::with_capacity(fan_out);
        for r in 0..fan_out {
            let bias = match scheme.kind {
                InitKind::UniformFanIn => 0.0,
                InitKind::CenterCutting => {
                    let dot: f64 = (0..fan_in).map(|c| raw[r * fan_in + c] * center[c]).sum();
                    let u = if scheme.center_jitter > 0.0 {
                        rng.random_range(-scheme.center_jitter..=scheme.center_jitter)
                    } else {
                        0.0
                    };
                    gain * (u - dot)
                }
            };
            w[net.bias_index(layer, r)] = bias;
            let pre: f64 = (0..fan_in).map(|c| w[net.weight_index(layer, r, c)] * center[c]).sum::<f64>() + bias;
            next_center.push(arch.activation.apply(pre));
        }
        center = next_center;
    }
    net.set_weights(w)?;
    Ok(net)
}

fn scale_of(scheme: &InitScheme) -> f64 {
    scheme.scale
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Degeneration {
    KillNeurons(Vec<NeuronId>),
    DuplicateNeuron { src: NeuronId, dst: NeuronId },
}

/// Injects dead or duplicated units.
///
/// Killing sets a ReLU unit's bias to `-(B * sum |w_in|) - 1`, where `B`
/// bounds the unit's inputs on the cube (`B = 1` for the first layer), so the
/// unit is inactive everywhere. Duplicating copies the incoming row, bias and
/// outgoing column of `src` onto `dst`.
pub fn make_degenerate(net: &MlpNetwork, mode: &Degeneration) -> Result<MlpNetwork> {
    let mut out = net.clone();
    match mode {
        Degeneration::KillNeurons(targets) => {
            if net.activation() != Activation::Relu {
                return Err(Error::KillNeedsRelu);
            }
            let mut targets = targets.clone();
            targets.sort();
            for id in targets {
                id.check(net)?;
                let bound = if id.layer == 0 { 1.0 } else { out.hidden_output_bound(id.layer - 1) };
                let mut w = out.weights().to_vec();
                let fan_in = out.layer_fan_in(id.layer);
                let row_abs: f64 = (0..fan_in).map(|c| w[out.weight_index(id.layer, id.unit, c)].abs()).sum();
                w[out.bias_index(id.layer, id.unit)] = -(bound * row_abs) - 1.0;
                out.set_weights(w)?;
            }
        }
        Degeneration::DuplicateNeuron { src, dst } => {
            src.check(net)?;
            dst.check(net)?;
            if src.layer != dst.layer || src == dst {
                return Err(Error::InvalidNeuron(format!("cannot duplicate {src} onto {dst}")));
            }
            let l = src.layer;
            let mut w = out.weights().to_vec();
            for c in 0..out.layer_fan_in(l) {
                w[out.weight_index(l, dst.unit, c)] = w[out.weight_index(l, src.unit, c)];
            }
            w[out.bias_index(l, dst.unit)] = w[out.bias_index(l, src.unit)];
            for r in 0..out.layer_fan_out(l + 1) {
                w[out.weight_index(l + 1, r, dst.unit)] = w[out.weight_index(l + 1, r, src.unit)];
            }
            out.set_weights(w)?;
        }
    }
    Ok(out)
}

/// Every hidden unit of the network.
pub fn all_hidden_neurons(net: &MlpNetwork) -> Vec<NeuronId> {
    net.hidden_sizes()
        .iter()
        .enumerate()
        .flat_map(|(l, &h)| (0..h).map(move |u| NeuronId::new(l, u)))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainSchedule {
    pub epochs: usize,
    pub minibatch_size: usize,
    pub lr0: f64,
    pub decay: f64,
    pub seed: u64,
}

impl TrainSchedule {
    pub fn validate(&self, samples: usize) -> Result<()> {
        if self.epochs < 1 {
            return Err(Error::Config("epochs must be at least 1".into()));
        }
        if self.minibatch_size < 1 || self.minibatch_size > samples {
            return Err(Error::Config(format!(
                "minibatch size {} outside [1, {samples}]",
                self.minibatch_size
            )));
        }
        if !(self.lr0 >= 0.0 && self.lr0.is_finite()) {
            return Err(Error::Config(format!("lr0 must be non-negative, got {}", self.lr0)));
        }
        if !(self.decay >= 0.0 && self.decay.is_finite()) {
            return Err(Error::Config(format!("decay must be non-negative, got {}", self.decay)));
        }
        Ok(())
    }

    /// `h_k = lr0 / (1 + decay * k)`
    pub fn step_size(&self, k: usize) -> f64 {
        self.lr0 / (1.0 + self.decay * k as f64)
    }

    pub fn steps_per_epoch(&self, samples: usize) -> usize {
        samples.div_ceil(self.minibatch_size)
    }
}

#[derive(Debug, Clone)]
pub struct RankMonitor {
    pub cadence: usize,
    pub index_set: FrequencyIndexSet,
    pub grid: QuadratureGrid,
    pub rank_rel_tol: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub step: usize,
    pub epoch: usize,
    /// Loss on the minibatch used for the update at this step; absent on the
    /// final row, which records the state after the last update.
    pub minibatch_loss: Option<f64>,
    pub full_loss: f64,
    pub grad_norm_literal: f64,
    pub grad_norm_canonical: Option<f64>,
    pub rank: Option<usize>,
    pub sigma_ratio: Option<f64>,
    pub chain_residual: Option<f64>,
    pub disparity_norm: Option<f64>,
}

impl TraceRow {
    pub fn is_monitored(&self) -> bool {
        self.rank.is_some()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingTrace {
    pub cadence: usize,
    pub rows: Vec<TraceRow>,
}

pub const TRACE_HEADER: &str =
    "step,epoch,minibatch_loss,full_loss,grad_norm_literal,grad_norm_canonical,rank,sigma_ratio,chain_residual";

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl TrainingTrace {
    pub fn last(&self) -> Option<&TraceRow> {
        self.rows.last()
    }

    pub fn monitored(&self) -> impl Iterator<Item = &TraceRow> {
        self.rows.iter().filter(|r| r.is_monitored())
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "{TRACE_HEADER}")?;
        for r in &self.rows {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                r.step,
                r.epoch,
                opt(r.minibatch_loss),
                r.full_loss,
                r.grad_norm_literal,
                opt(r.grad_norm_canonical),
                opt(r.rank),
                opt(r.sigma_ratio),
                opt(r.chain_residual)
            )?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv is utf-8")
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub net: MlpNetwork,
    pub trace: TrainingTrace,
}

/// A run that stopped early; the trace holds every row recorded before the failure.
#[derive(Debug)]
pub struct TrainAbort {
    pub trace: TrainingTrace,
    pub error: Error,
}

impl fmt::Display for TrainAbort {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "training aborted after {} rows: {}", self.trace.rows.len(), self.error)
    }
}

impl std::error::Error for TrainAbort {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.error)
    }
}

struct MonitorState {
    projector: FourierProjector,
    rel_tol: f64,
    cadence: usize,
}

fn measure(
    net: &MlpNetwork,
    data: &TrainingSet,
    g_lit: &[f64],
    mon: &MonitorState,
    row: &mut TraceRow,
) -> Result<()> {
    let h = build_disparity_with(net, &mon.projector)?;
    let report = numerical_rank(&h, mon.rel_tol)?;
    let theta = project_model_with(net, &mon.projector)?;
    let g_can = canonical_gradient(&theta, data)?;
    let chain = chain_rule_residual_parts(g_lit, &theta, data, &h)?;
    row.grad_norm_canonical = Some(complex_norm(&g_can));
    row.rank = Some(report.numerical_rank);
    row.sigma_ratio = Some(report.sigma_min_over_sigma_max);
    row.chain_residual = Some(chain.rel_residual);
    row.disparity_norm = Some(h.frobenius_norm());
    Ok(())
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Minibatch SGD `w <- w - h_k grad Q_batch(w)` with per-epoch seeded shuffling.
pub fn sgd_train(
    net: &MlpNetwork,
    data: &TrainingSet,
    schedule: &TrainSchedule,
    monitor: Option<&RankMonitor>,
) -> std::result::Result<TrainOutcome, TrainAbort> {
    let cadence = monitor.map(|m| m.cadence).unwrap_or(0);
    let mut trace = TrainingTrace {
        cadence,
        rows: Vec::new(),
    };
    macro_rules! bail {
        ($e:expr) => {
            return Err(TrainAbort { trace, error: $e })
        };
    }
    if let Err(e) = schedule.validate(data.len()) {
        bail!(e);
    }
    if data.dim() != net.architecture().input_dim {
        bail!(Error::DimensionMismatch {
            expected: net.architecture().input_dim,
            got: data.dim()
        });
    }
    let mon = match monitor {
        None => None,
        Some(m) => {
            if m.cadence == 0 {
                bail!(Error::Config("monitor cadence must be positive".into()));
            }
            if m.index_set.len() < data.len() {
                bail!(Error::Underdetermined {
                    n: m.index_set.len(),
                    t: data.len()
                });
            }
            match FourierProjector::new(&m.index_set, &m.grid) {
                Ok(projector) => Some(MonitorState {
                    projector,
                    rel_tol: m.rank_rel_tol,
                    cadence: m.cadence,
                }),
                Err(e) => bail!(e),
            }
        }
    };

    let mut net = net.clone();
    let mut rng = seed::component_rng(schedule.seed, seed::SHUFFLE);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut k = 0usize;

    let record = |net: &MlpNetwork,
                      k: usize,
                      epoch: usize,
                      minibatch_loss: Option<f64>,
                      force_monitor: bool|
     -> Result<TraceRow> {
        let (full_loss, g_full) = net.loss_and_grad(data)?;
        let mut row = TraceRow {
            step: k,
            epoch,
            minibatch_loss,
            full_loss,
            grad_norm_literal: norm(&g_full),
            grad_norm_canonical: None,
            rank: None,
            sigma_ratio: None,
            chain_residual: None,
            disparity_norm: None,
        };
        if let Some(m) = &mon {
            if force_monitor || k % m.cadence == 0 {
                measure(net, data, &g_full, m, &mut row)?;
            }
        }
        Ok(row)
    };

    for epoch in 1..=schedule.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(schedule.minibatch_size) {
            let (mb_loss, mb_grad) = match net.subset_loss_and_grad(data, batch) {
                Ok(v) => v,
                Err(Error::NonFinite(_)) => bail!(Error::Diverged { step: k }),
                Err(e) => bail!(e),
            };
            match record(&net, k, epoch, Some(mb_loss), false) {
                Ok(row) => trace.rows.push(row),
                Err(Error::NonFinite(_)) => bail!(Error::Diverged { step: k }),
                Err(e) => bail!(e),
            }
            let h = schedule.step_size(k);
            let next: Vec<f64> = net.weights().iter().zip(&mb_grad).map(|(w, g)| w - h * g).collect();
            if net.set_weights(next).is_err() {
                bail!(Error::Diverged { step: k });
            }
            k += 1;
        }
    }
    match record(&net, k, schedule.epochs, None, true) {
        Ok(row) => trace.rows.push(row),
        Err(Error::NonFinite(_)) => bail!(Error::Diverged { step: k }),
        Err(e) => bail!(e),
    }
    Ok(TrainOutcome { net, trace })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{detect_dead_neurons, detect_duplicated_neurons, probe_grid};

    fn arch(hidden: usize, act: Activation) -> Architecture {
        Architecture::new(1, vec![hidden], act).unwrap()
    }

    fn small_data() -> TrainingSet {
        TrainingSet::new(vec![vec![0.1], vec![0.4], vec![0.6], vec![0.9]], vec![0.5, -0.2, 0.3, 0.8]).unwrap()
    }

    #[test]
    fn init_is_deterministic_per_seed() {
        let a = arch(8, Activation::Tanh);
        let s = InitScheme::uniform_fan_in();
        assert_eq!(init_random(&a, &s, 3).unwrap(), init_random(&a, &s, 3).unwrap());
        assert_ne!(init_random(&a, &s, 3).unwrap(), init_random(&a, &s, 4).unwrap());
    }

    #[test]
    fn uniform_fan_in_ranges_and_zero_biases() {
        let a = Architecture::new(2, vec![16], Activation::Relu).unwrap();
        let net = init_random(&a, &InitScheme::uniform_fan_in(), 11).unwrap();
        let bound_in = (3.0f64 / 2.0).sqrt();
        for r in 0..16 {
            for c in 0..2 {
                assert!(net.weights()[net.weight_index(0, r, c)].abs() <= bound_in);
            }
            assert_eq!(net.weights()[net.bias_index(0, r)], 0.0);
        }
        let bound_out = (3.0f64 / 16.0).sqrt();
        for c in 0..16 {
            assert!(net.weights()[net.weight_index(1, 0, c)].abs() <= bound_out);
        }
    }

    #[test]
    fn center_cutting_puts_center_near_every_hyperplane() {
        let a = Architecture::new(3, vec![32, 8], Activation::Tanh).unwrap();
        let net = init_random(&a, &InitScheme::center_cutting(), 5).unwrap();
        let tr = net.trace(&[0.5, 0.5, 0.5]).unwrap();
        for layer in &tr.pre {
            for &z in layer {
                assert!(z.abs() <= 0.1 + 1e-12, "{z}");
            }
        }
    }

    #[test]
    fn kill_then_detect() {
        let net = init_random(&Architecture::new(2, vec![6, 5], Activation::Relu).unwrap(), &InitScheme::center_cutting(), 2).unwrap();
        let targets = vec![NeuronId::new(0, 1), NeuronId::new(0, 4), NeuronId::new(1, 3)];
        let dead_net = make_degenerate(&net, &Degeneration::KillNeurons(targets.clone())).unwrap();
        let dead = detect_dead_neurons(&dead_net, &probe_grid(2, 21)).unwrap();
        for t in &targets {
            assert!(dead.contains(t), "{t} not dead");
        }
    }

    #[test]
    fn kill_rejects_smooth_activations() {
        let net = init_random(&arch(4, Activation::Tanh), &InitScheme::uniform_fan_in(), 0).unwrap();
        assert!(matches!(
            make_degenerate(&net, &Degeneration::KillNeurons(vec![NeuronId::new(0, 0)])),
            Err(Error::KillNeedsRelu)
        ));
    }

    #[test]
    fn duplicate_then_detect() {
        let net = init_random(&arch(5, Activation::Sigmoid), &InitScheme::uniform_fan_in(), 9).unwrap();
        let dup = make_degenerate(
            &net,
            &Degeneration::DuplicateNeuron {
                src: NeuronId::new(0, 1),
                dst: NeuronId::new(0, 3),
            },
        )
        .unwrap();
        assert_eq!(
            detect_duplicated_neurons(&dup, 1e-12).unwrap(),
            vec![(NeuronId::new(0, 1), NeuronId::new(0, 3))]
        );
    }

    #[test]
    fn zero_learning_rate_is_a_no_op() {
        let net = init_random(&arch(6, Activation::Tanh), &InitScheme::center_cutting(), 1).unwrap();
        let sched = TrainSchedule {
            epochs: 5,
            minibatch_size: 2,
            lr0: 0.0,
            decay: 0.0,
            seed: 4,
        };
        let out = sgd_train(&net, &small_data(), &sched, None).unwrap();
        assert_eq!(out.net, net);
        let first = out.trace.rows[0].full_loss;
        assert!(out.trace.rows.iter().all(|r| r.full_loss == first));
        assert_eq!(out.trace.rows.len(), 5 * 2 + 1);
    }

    #[test]
    fn schedule_validation() {
        let s = TrainSchedule {
            epochs: 1,
            minibatch_size: 5,
            lr0: 0.1,
            decay: 0.0,
            seed: 0,
        };
        assert!(s.validate(4).is_err());
        assert!(TrainSchedule { minibatch_size: 4, ..s }.validate(4).is_ok());
        assert!(TrainSchedule { epochs: 0, minibatch_size: 4, ..s }.validate(4).is_err());
        assert!(TrainSchedule { decay: -1.0, minibatch_size: 4, ..s }.validate(4).is_err());
        assert_eq!(TrainSchedule { decay: 0.5, ..s }.step_size(2), 0.05);
    }

    #[test]
    fn divergence_aborts_with_partial_trace() {
        let net = init_random(&arch(8, Activation::Relu), &InitScheme::uniform_fan_in(), 3).unwrap();
        let sched = TrainSchedule {
            epochs: 200,
            minibatch_size: 4,
            lr0: 50.0,
            decay: 0.0,
            seed: 0,
        };
        let data = TrainingSet::new(vec![vec![0.2], vec![0.9]], vec![5.0, -5.0]).unwrap();
        let abort = sgd_train(&net, &data, &TrainSchedule { minibatch_size: 2, ..sched }, None).unwrap_err();
        assert!(matches!(abort.error, Error::Diverged { .. }));
        assert!(!abort.trace.rows.is_empty());
    }

    #[test]
    fn trace_csv_leaves_unmonitored_fields_empty() {
        let trace = TrainingTrace {
            cadence: 2,
            rows: vec![TraceRow {
                step: 1,
                epoch: 1,
                minibatch_loss: Some(0.5),
                full_loss: 1.0,
                grad_norm_literal: 2.0,
                grad_norm_canonical: None,
                rank: None,
                sigma_ratio: None,
                chain_residual: None,
                disparity_norm: None,
            }],
        };
        assert_eq!(trace.to_csv_string(), format!("{TRACE_HEADER}\n1,1,0.5,1,2,,,,\n"));
    }
}
