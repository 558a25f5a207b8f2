//! Unsupervised training of the allocators with the penalty loss,
//! Adam optimization, validation-based checkpoint selection, and
//! checkpoint persistence.
//!
//! The loss for one instance is
//! `1/EE + lambda_qos * sum relu(R_req - rate) + lambda_order * sum relu(p_{i-1} - p_i)`,
//! evaluated on the post-activation powers. No labels are involved.

use std::fs::File;
use std::io::{self, BufWriter, Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::autodiff::{Tape, Tensor};
use crate::model::{Allocator, GatModel, MlpModel, ModelError, Param, ParamSet};
use crate::noma::{NetworkInstance, SystemConfig};

/// Attempts to re-draw dead initial parameters (see [`train`]).
const MAX_REINITS: u32 = 24;

/// Added to the energy efficiency before inversion so an all-zero output
/// yields a large finite loss instead of infinity.
pub const EE_GUARD_EPS: f64 = 1e-12;

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error("non-finite gradient in parameter {0}; step rejected")]
    NonFiniteGradient(String),
    #[error("training diverged at epoch {epoch} (validation loss {val_loss}); last good checkpoint retained")]
    Diverged {
        epoch: usize,
        val_loss: f64,
        last_good: Box<Checkpoint>,
        history: TrainHistory,
    },
    #[error("checkpoint i/o: {0}")]
    Io(#[from] io::Error),
    #[error("checkpoint parse error: {0}")]
    Parse(String),
    #[error("unsupported checkpoint version {0}")]
    Version(u32),
}

/// Hyperparameters of one training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    /// QoS penalty weight (lambda_1).
    pub lambda_qos: f64,
    /// Power-ordering penalty weight (lambda_2).
    pub lambda_order: f64,
    pub seed: u64,
    pub system: SystemConfig,
    /// Relative pad on the rate requirement during training only:
    /// the loss targets `r_req * (1 + qos_margin)`. Users otherwise
    /// equilibrate exactly on the penalty kink and hairline rate misses
    /// flip the measured feasibility.
    #[serde(default)]
    pub qos_margin: f64,
    /// Free-form dataset label echoed into checkpoints.
    pub dataset_label: String,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            batch_size: 16,
            epochs: 50,
            lambda_qos: 10.0,
            lambda_order: 10.0,
            seed: 7,
            system: SystemConfig::default(),
            qos_margin: 0.0,
            dataset_label: String::new(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(TrainError::InvalidConfig("learning rate must be > 0".into()));
        }
        if self.batch_size == 0 || self.epochs == 0 {
            return Err(TrainError::InvalidConfig(
                "batch size and epochs must be >= 1".into(),
            ));
        }
        if self.lambda_qos < 0.0 || self.lambda_order < 0.0 {
            return Err(TrainError::InvalidConfig("penalty weights must be >= 0".into()));
        }
        if !(self.qos_margin.is_finite() && self.qos_margin >= 0.0) {
            return Err(TrainError::InvalidConfig("qos margin must be >= 0".into()));
        }
        Ok(())
    }
}

/// Penalty loss of one instance, built on the tape from post-activation
/// power tensors.
pub fn loss_on_tape(
    powers: &[Vec<Tensor>],
    instance: &NetworkInstance,
    sys: &SystemConfig,
    lambda_qos: f64,
    lambda_order: f64,
) -> Tensor {
    assert_eq!(powers.len(), instance.num_subchannels());
    let tape = powers[0][0].tape();
    let one = tape.scalar(1.0);
    let r_req = tape.scalar(sys.r_req);
    let mut rate_terms = Vec::new();
    let mut power_terms = Vec::new();
    let mut qos_terms = Vec::new();
    let mut order_terms = Vec::new();
    for (n, sub) in powers.iter().enumerate() {
        let gains = instance.gains(n);
        assert_eq!(sub.len(), gains.len());
        let mut prefix: Option<Tensor> = None;
        for (i, p) in sub.iter().enumerate() {
            let h = gains[i];
            let sinr = match &prefix {
                None => p.scale(h),
                Some(s) => p.scale(h).div(&one.add(&s.scale(h))),
            };
            let rate = sinr.ln_1p().scale(1.0 / std::f64::consts::LN_2);
            qos_terms.push(r_req.sub(&rate).relu());
            rate_terms.push(rate);
            if i > 0 {
                order_terms.push(sub[i - 1].sub(p).relu());
            }
            prefix = Some(match prefix {
                None => p.clone(),
                Some(s) => s.add(p),
            });
            power_terms.push(p.clone());
        }
    }
    let rate_sum = tape.concat(&rate_terms).sum();
    let power_sum = tape.concat(&power_terms).sum();
    let ee = rate_sum.div(&power_sum.add(&tape.scalar(sys.p_circuit)));
    let mut loss = one.div(&ee.add(&tape.scalar(EE_GUARD_EPS)));
    if !qos_terms.is_empty() {
        loss = loss.add(&tape.concat(&qos_terms).sum().scale(lambda_qos));
    }
    if !order_terms.is_empty() {
        loss = loss.add(&tape.concat(&order_terms).sum().scale(lambda_order));
    }
    loss
}

fn train_objective_system(cfg: &TrainConfig) -> SystemConfig {
    SystemConfig {
        r_req: cfg.system.r_req * (1.0 + cfg.qos_margin),
        ..cfg.system
    }
}

/// Forward + loss for one instance; value only.
pub fn instance_loss(
    model: &Allocator,
    instance: &NetworkInstance,
    cfg: &TrainConfig,
) -> Result<f64, ModelError> {
    let tape = Tape::new();
    let (powers, _) = model.forward_powers(&tape, instance, cfg.system.p_max, false)?;
    let sys = train_objective_system(cfg);
    Ok(loss_on_tape(&powers, instance, &sys, cfg.lambda_qos, cfg.lambda_order).scalar())
}

/// Forward + loss + backward for one instance; gradients are returned in
/// parameter order.
pub fn loss_and_grads(
    model: &Allocator,
    instance: &NetworkInstance,
    cfg: &TrainConfig,
) -> Result<(f64, Vec<Vec<f64>>), ModelError> {
    let tape = Tape::new();
    let (powers, bound) = model.forward_powers(&tape, instance, cfg.system.p_max, true)?;
    let sys = train_objective_system(cfg);
    let loss = loss_on_tape(&powers, instance, &sys, cfg.lambda_qos, cfg.lambda_order);
    let grads = loss.backward();
    Ok((
        loss.scalar(),
        bound.leaves.iter().map(|leaf| grads.get(leaf)).collect(),
    ))
}

/// Adam moment estimates, one slot per parameter.
#[derive(Debug, Clone)]
pub struct AdamState {
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    t: u64,
}

impl AdamState {
    pub fn new(params: &ParamSet) -> Self {
        Self {
            m: params.params.iter().map(|p| vec![0.0; p.data.len()]).collect(),
            v: params.params.iter().map(|p| vec![0.0; p.data.len()]).collect(),
            t: 0,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.t
    }
}

/// One Adam update with bias correction. Non-finite gradients reject the
/// whole step without mutating parameters or state.
pub fn optimizer_step(
    params: &mut ParamSet,
    grads: &[Vec<f64>],
    state: &mut AdamState,
    lr: f64,
) -> Result<(), TrainError> {
    assert_eq!(params.params.len(), grads.len(), "gradient count mismatch");
    for (p, g) in params.params.iter().zip(grads) {
        assert_eq!(p.data.len(), g.len(), "gradient shape mismatch for {}", p.name);
        if g.iter().any(|v| !v.is_finite()) {
            return Err(TrainError::NonFiniteGradient(p.name.clone()));
        }
    }
    state.t += 1;
    let bc1 = 1.0 - ADAM_BETA1.powi(state.t as i32);
    let bc2 = 1.0 - ADAM_BETA2.powi(state.t as i32);
    for ((p, g), (m, v)) in params
        .params
        .iter_mut()
        .zip(grads)
        .zip(state.m.iter_mut().zip(state.v.iter_mut()))
    {
        for i in 0..p.data.len() {
            m[i] = ADAM_BETA1 * m[i] + (1.0 - ADAM_BETA1) * g[i];
            v[i] = ADAM_BETA2 * v[i] + (1.0 - ADAM_BETA2) * g[i] * g[i];
            let m_hat = m[i] / bc1;
            let v_hat = v[i] / bc2;
            p.data[i] -= lr * m_hat / (v_hat.sqrt() + ADAM_EPS);
        }
    }
    Ok(())
}

/// Per-epoch loss record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub train_loss: f64,
    pub val_loss: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrainHistory {
    /// Validation loss of the initial (untrained) parameters.
    pub initial_val_loss: f64,
    pub epochs: Vec<EpochStats>,
}

impl TrainHistory {
    pub fn write_tsv(&self, path: &Path) -> io::Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        writeln!(w, "epoch\ttrain_loss\tval_loss")?;
        writeln!(w, "0\tNA\t{:.16e}", self.initial_val_loss)?;
        for (i, e) in self.epochs.iter().enumerate() {
            writeln!(w, "{}\t{:.16e}\t{:.16e}", i + 1, e.train_loss, e.val_loss)?;
        }
        w.flush()
    }
}

/// Trained model plus provenance, as persisted to disk.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub model: Allocator,
    pub train: TrainConfig,
    pub best_val_loss: f64,
    /// 1-based epoch whose parameters were kept (0 = initial parameters).
    pub epoch: usize,
    pub trained_n: usize,
    pub trained_k: usize,
}

pub struct TrainOutcome {
    pub checkpoint: Checkpoint,
    pub history: TrainHistory,
}

fn mean_val_loss(
    model: &Allocator,
    set: &[NetworkInstance],
    cfg: &TrainConfig,
) -> Result<f64, ModelError> {
    let losses: Vec<f64> = set
        .par_iter()
        .map(|inst| instance_loss(model, inst, cfg))
        .collect::<Result<_, _>>()?;
    Ok(losses.iter().sum::<f64>() / losses.len().max(1) as f64)
}

enum StartHealth {
    /// Every probe instance yields all-zero powers: the activation clamps
    /// every raw output and the loss has no gradient anywhere.
    Dead,
    /// Probe instances pin the total at exactly the budget. On that
    /// manifold the loss is scale-invariant in the raw outputs, so no
    /// gradient ever reduces the total power and the energy-efficiency
    /// term plateaus far below the optimum.
    Saturated {
        /// Fraction of probe instances pinned at the budget.
        pinned: f64,
    },
    Trainable,
}

fn probe_start(
    model: &Allocator,
    probe: &[NetworkInstance],
    sys: &SystemConfig,
) -> Result<StartHealth, ModelError> {
    let totals: Vec<f64> = probe
        .par_iter()
        .map(|inst| Ok(model.allocate(inst, sys.p_max)?.total_power()))
        .collect::<Result<_, ModelError>>()?;
    let all_dead = totals.iter().all(|&t| t == 0.0);
    let pinned = totals
        .iter()
        .filter(|&&t| t >= sys.p_max * (1.0 - 1e-9))
        .count();
    Ok(if all_dead {
        StartHealth::Dead
    } else if pinned > 0 {
        StartHealth::Saturated {
            pinned: pinned as f64 / probe.len() as f64,
        }
    } else {
        StartHealth::Trainable
    })
}

/// Unsupervised training: seeded shuffling, mini-batches, loss averaged
/// over the batch, Adam steps, and per-epoch validation. The parameters
/// with the lowest validation loss across all epochs are returned.
///
/// He-initialized parameters routinely start in one of two flat regions
/// of the budget activation: all raw readouts negative (all-zero powers,
/// exactly flat loss) or raw sums far above the budget (total power
/// pinned at `p_max`, loss scale-invariant, energy efficiency capped at
/// the interference-limited full-budget value). Before the first epoch,
/// dead starts are re-drawn deterministically from the training seed and
/// saturated starts have their readout head halved until a probe batch
/// produces totals strictly inside (0, p_max).
pub fn train(
    mut model: Allocator,
    train_set: &[NetworkInstance],
    val_set: &[NetworkInstance],
    cfg: &TrainConfig,
) -> Result<TrainOutcome, TrainError> {
    cfg.validate()?;
    if train_set.is_empty() || val_set.is_empty() {
        return Err(TrainError::InvalidConfig(
            "training and validation sets must be non-empty".into(),
        ));
    }
    let probe = &train_set[..train_set.len().min(8)];
    let mut reinits = 0u32;
    for _ in 0..64 {
        match probe_start(&model, probe, &cfg.system)? {
            StartHealth::Trainable => break,
            StartHealth::Dead if reinits < MAX_REINITS => {
                let mut rng = ChaCha8Rng::seed_from_u64(
                    cfg.seed ^ 0x7265_696e_6974_0000 ^ u64::from(reinits),
                );
                match &mut model {
                    Allocator::Gat(m) => {
                        *m = GatModel::init(m.config.clone(), &mut rng)?;
                    }
                    Allocator::Mlp(m) => {
                        *m = MlpModel::init(m.config.clone(), &mut rng)?;
                    }
                }
                reinits += 1;
            }
            StartHealth::Dead => break,
            StartHealth::Saturated { .. } => model.scale_output_head(0.5),
        }
    }
    let trained_n = train_set[0].num_subchannels();
    let trained_k = train_set[0].users_on(0);
    let checkpoint_of = |model: &Allocator, val: f64, epoch: usize| Checkpoint {
        model: model.clone(),
        train: cfg.clone(),
        best_val_loss: val,
        epoch,
        trained_n,
        trained_k,
    };

    let initial_val_loss = mean_val_loss(&model, val_set, cfg)?;
    let mut history = TrainHistory {
        initial_val_loss,
        epochs: Vec::with_capacity(cfg.epochs),
    };
    let mut best = checkpoint_of(&model, initial_val_loss, 0);

    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5348_5546_464c_4531);
    let mut adam = AdamState::new(model.params());
    let mut indices: Vec<usize> = (0..train_set.len()).collect();

    for epoch in 1..=cfg.epochs {
        indices.shuffle(&mut shuffle_rng);
        let mut epoch_loss_sum = 0.0;
        let mut batches = 0usize;
        for chunk in indices.chunks(cfg.batch_size) {
            let results: Vec<(f64, Vec<Vec<f64>>)> = chunk
                .par_iter()
                .map(|&idx| loss_and_grads(&model, &train_set[idx], cfg))
                .collect::<Result<_, _>>()?;
            let inv = 1.0 / results.len() as f64;
            let mut grad_avg: Vec<Vec<f64>> = model
                .params()
                .params
                .iter()
                .map(|p| vec![0.0; p.data.len()])
                .collect();
            let mut batch_loss = 0.0;
            for (loss, grads) in &results {
                batch_loss += loss * inv;
                for (acc, g) in grad_avg.iter_mut().zip(grads) {
                    for (a, gi) in acc.iter_mut().zip(g) {
                        *a += gi * inv;
                    }
                }
            }
            match optimizer_step(model.params_mut(), &grad_avg, &mut adam, cfg.learning_rate) {
                Ok(()) => {}
                Err(TrainError::NonFiniteGradient(_)) => {
                    history.epochs.push(EpochStats {
                        train_loss: f64::NAN,
                        val_loss: f64::NAN,
                    });
                    return Err(TrainError::Diverged {
                        epoch,
                        val_loss: f64::NAN,
                        last_good: Box::new(best),
                        history,
                    });
                }
                Err(e) => return Err(e),
            }
            // The step can push the model onto the budget-saturated
            // manifold, where its loss is scale-invariant and EE learning
            // stalls (see StartHealth::Saturated). Catching it within one
            // step and shrinking the head keeps the learned proportions
            // and avoids the latch.
            if let StartHealth::Saturated { pinned } =
                probe_start(&model, probe, &cfg.system)?
            {
                model.scale_output_head(0.9 - 0.4 * pinned);
            }
            epoch_loss_sum += batch_loss;
            batches += 1;
        }
        let train_loss = epoch_loss_sum / batches as f64;
        let val_loss = mean_val_loss(&model, val_set, cfg)?;
        history.epochs.push(EpochStats { train_loss, val_loss });
        if !val_loss.is_finite() {
            return Err(TrainError::Diverged {
                epoch,
                val_loss,
                last_good: Box::new(best),
                history,
            });
        }
        if val_loss < best.best_val_loss {
            best = checkpoint_of(&model, val_loss, epoch);
        }
    }
    Ok(TrainOutcome {
        checkpoint: best,
        history,
    })
}

/// On-disk payload encoding for checkpoints.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PayloadFormat {
    /// One line per parameter: name, then 17-significant-digit decimals.
    Text,
    /// Raw little-endian f64 values in parameter order.
    Binary,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
enum ModelHeader {
    Gat { config: crate::model::ModelConfig },
    Mlp { config: crate::model::MlpConfig },
}

#[derive(Serialize, Deserialize)]
struct CkHeader {
    version: u32,
    model: ModelHeader,
    train: TrainConfig,
    best_val_loss: f64,
    epoch: usize,
    trained_n: usize,
    trained_k: usize,
    payload: String,
    num_values: usize,
}

pub fn save_checkpoint(ck: &Checkpoint, path: &Path, format: PayloadFormat) -> Result<(), TrainError> {
    let params = ck.model.params();
    let header = CkHeader {
        version: CHECKPOINT_VERSION,
        model: match &ck.model {
            Allocator::Gat(m) => ModelHeader::Gat {
                config: m.config.clone(),
            },
            Allocator::Mlp(m) => ModelHeader::Mlp {
                config: m.config.clone(),
            },
        },
        train: ck.train.clone(),
        best_val_loss: ck.best_val_loss,
        epoch: ck.epoch,
        trained_n: ck.trained_n,
        trained_k: ck.trained_k,
        payload: match format {
            PayloadFormat::Text => "text".into(),
            PayloadFormat::Binary => "binary".into(),
        },
        num_values: params.num_values(),
    };
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "{}", serde_json::to_string(&header).expect("header serializes"))?;
    match format {
        PayloadFormat::Text => {
            for p in &params.params {
                write!(w, "{}", p.name)?;
                for v in &p.data {
                    write!(w, " {v:.16e}")?;
                }
                writeln!(w)?;
            }
        }
        PayloadFormat::Binary => {
            for p in &params.params {
                for v in &p.data {
                    w.write_all(&v.to_le_bytes())?;
                }
            }
        }
    }
    w.flush()?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint, TrainError> {
    let mut raw = Vec::new();
    File::open(path)?.read_to_end(&mut raw)?;
    let newline = raw
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| TrainError::Parse("missing header line".into()))?;
    let header: CkHeader = serde_json::from_slice(&raw[..newline])
        .map_err(|e| TrainError::Parse(format!("bad header: {e}")))?;
    if header.version != CHECKPOINT_VERSION {
        return Err(TrainError::Version(header.version));
    }
    let shapes: Vec<(String, Vec<usize>)> = match &header.model {
        ModelHeader::Gat { config } => {
            config.validate()?;
            crate::model::gat_param_shapes(config)
        }
        ModelHeader::Mlp { config } => {
            config.validate()?;
            crate::model::mlp_param_shapes(config)
        }
    };
    let expected_values: usize = shapes
        .iter()
        .map(|(_, s)| s.iter().product::<usize>().max(1))
        .sum();
    if expected_values != header.num_values {
        return Err(TrainError::Parse(format!(
            "header declares {} values but the architecture needs {}",
            header.num_values, expected_values
        )));
    }
    let body = &raw[newline + 1..];
    let mut params = Vec::with_capacity(shapes.len());
    match header.payload.as_str() {
        "text" => {
            let text = std::str::from_utf8(body)
                .map_err(|e| TrainError::Parse(format!("payload is not utf-8: {e}")))?;
            let mut lines = text.lines();
            for (name, shape) in &shapes {
                let line = lines.next().ok_or_else(|| {
                    TrainError::Parse(format!("missing payload line for parameter {name}"))
                })?;
                let mut toks = line.split(' ');
                let got = toks.next().unwrap_or_default();
                if got != name {
                    return Err(TrainError::Parse(format!(
                        "expected parameter {name}, found {got}"
                    )));
                }
                let data: Vec<f64> = toks
                    .map(|t| {
                        t.parse::<f64>()
                            .map_err(|e| TrainError::Parse(format!("bad value in {name}: {e}")))
                    })
                    .collect::<Result<_, _>>()?;
                if data.len() != shape.iter().product::<usize>().max(1) {
                    return Err(TrainError::Parse(format!(
                        "parameter {name}: {} values for shape {shape:?}",
                        data.len()
                    )));
                }
                params.push(Param {
                    name: name.clone(),
                    shape: shape.clone(),
                    data,
                });
            }
        }
        "binary" => {
            if body.len() != header.num_values * 8 {
                return Err(TrainError::Parse(format!(
                    "binary payload holds {} bytes, expected {}",
                    body.len(),
                    header.num_values * 8
                )));
            }
            let mut off = 0;
            for (name, shape) in &shapes {
                let len = shape.iter().product::<usize>().max(1);
                let data: Vec<f64> = (0..len)
                    .map(|i| {
                        let s = off + i * 8;
                        f64::from_le_bytes(body[s..s + 8].try_into().unwrap())
                    })
                    .collect();
                off += len * 8;
                params.push(Param {
                    name: name.clone(),
                    shape: shape.clone(),
                    data,
                });
            }
        }
        other => return Err(TrainError::Parse(format!("unknown payload format {other:?}"))),
    }
    let param_set = ParamSet { params };
    let model = match header.model {
        ModelHeader::Gat { config } => Allocator::Gat(GatModel::new(config, param_set)?),
        ModelHeader::Mlp { config } => Allocator::Mlp(MlpModel::new(config, param_set)?),
    };
    Ok(Checkpoint {
        model,
        train: header.train,
        best_val_loss: header.best_val_loss,
        epoch: header.epoch,
        trained_n: header.trained_n,
        trained_k: header.trained_k,
    })
}
