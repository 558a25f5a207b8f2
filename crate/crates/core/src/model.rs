//! The graph-attention power allocator and the MLP baseline.
//!
//! Each subchannel becomes a small directed graph: one node per link,
//! node feature = the link's normalized gain, and an edge from node i to
//! node j exactly when i > j in the SIC order (strictly lower-triangular
//! adjacency). The network runs multi-head attention layers over each
//! subgraph with shared parameters, reads a raw power out of every node,
//! and jointly rescales all raw powers so the total never exceeds the
//! budget.
//!
//! Neighborhood reductions (softmax denominators, aggregation sums, the
//! joint budget total) are accumulated in value-sorted order, which makes
//! the forward pass bit-exactly equivariant under node relabeling and
//! invariant under subchannel reordering.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::autodiff::{Tape, Tensor};
use crate::noma::{NetworkInstance, PowerAllocation};

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("invalid model config: {0}")]
    InvalidConfig(String),
    #[error("parameter {name} has shape {got:?}, expected {want:?}")]
    ParamShape {
        name: String,
        got: Vec<usize>,
        want: Vec<usize>,
    },
    #[error("parameter layout mismatch: {0}")]
    ParamLayout(String),
    #[error("input width {expected} does not match subchannel size {got}")]
    InputWidth { expected: usize, got: usize },
}

/// Per-subchannel graph: sorted node features plus binary adjacency.
#[derive(Debug, Clone, PartialEq)]
pub struct Subgraph {
    node_features: Vec<f64>,
    adjacency: Vec<Vec<bool>>,
}

impl Subgraph {
    /// Standard construction from SIC-sorted gains: edge i -> j iff i > j.
    pub fn from_gains(gains: &[f64]) -> Self {
        let k = gains.len();
        let adjacency = (0..k)
            .map(|i| (0..k).map(|j| i > j).collect())
            .collect();
        Self {
            node_features: gains.to_vec(),
            adjacency,
        }
    }

    /// General construction (used to probe permutation behaviour); only
    /// squareness is checked.
    pub fn new(node_features: Vec<f64>, adjacency: Vec<Vec<bool>>) -> Self {
        assert_eq!(node_features.len(), adjacency.len());
        assert!(adjacency.iter().all(|r| r.len() == node_features.len()));
        Self {
            node_features,
            adjacency,
        }
    }

    pub fn num_nodes(&self) -> usize {
        self.node_features.len()
    }

    pub fn features(&self) -> &[f64] {
        &self.node_features
    }

    pub fn adjacency(&self) -> &[Vec<bool>] {
        &self.adjacency
    }

    /// Neighborhood of node `i`: itself (self-loop, so the attention
    /// softmax is always defined) plus every j with an edge i -> j.
    pub fn neighbors(&self, i: usize) -> Vec<usize> {
        let mut out: Vec<usize> = (0..self.num_nodes())
            .filter(|&j| j == i || self.adjacency[i][j])
            .collect();
        out.sort_unstable();
        out
    }
}

/// One subgraph per subchannel of `instance`.
pub fn build_subgraphs(instance: &NetworkInstance) -> Vec<Subgraph> {
    (0..instance.num_subchannels())
        .map(|n| Subgraph::from_gains(instance.gains(n)))
        .collect()
}

/// Node-feature update rule between attention layers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Plain,
    Residual,
    Dense,
}

impl Variant {
    pub fn as_str(&self) -> &'static str {
        match self {
            Variant::Plain => "plain",
            Variant::Residual => "res",
            Variant::Dense => "dense",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "plain" => Some(Variant::Plain),
            "res" | "residual" => Some(Variant::Residual),
            "dense" => Some(Variant::Dense),
            _ => None,
        }
    }
}

/// Architecture of the graph-attention allocator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    /// Number of attention layers (L).
    pub depth: usize,
    /// Feature dimensions F(1)..F(L+1); F(1) is the raw-gain width 1.
    pub feature_dims: Vec<usize>,
    /// Attention heads per layer, D(1)..D(L).
    pub head_counts: Vec<usize>,
    pub variant: Variant,
    pub leaky_slope: f64,
    /// Hidden widths of the node-level readout.
    pub mlp_hidden_dims: Vec<usize>,
    /// Feed log10(gain) instead of the raw gain to layer 1.
    pub log_input: bool,
}

impl ModelConfig {
    /// Depth-2, 64-wide, 4-head default.
    pub fn default_gat(variant: Variant) -> Self {
        Self::with_depth(variant, 2)
    }

    /// Same widths at any depth (64 features, 4 heads per layer).
    pub fn with_depth(variant: Variant, depth: usize) -> Self {
        let mut feature_dims = vec![64; depth + 1];
        feature_dims[0] = 1;
        Self {
            depth,
            feature_dims,
            head_counts: vec![4; depth],
            variant,
            leaky_slope: 0.2,
            mlp_hidden_dims: vec![64],
            log_input: false,
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.depth < 1 {
            return Err(ModelError::InvalidConfig("depth must be >= 1".into()));
        }
        if self.feature_dims.len() != self.depth + 1 {
            return Err(ModelError::InvalidConfig(format!(
                "feature_dims has {} entries, expected depth + 1 = {}",
                self.feature_dims.len(),
                self.depth + 1
            )));
        }
        if self.head_counts.len() != self.depth {
            return Err(ModelError::InvalidConfig(format!(
                "head_counts has {} entries, expected depth = {}",
                self.head_counts.len(),
                self.depth
            )));
        }
        if self.feature_dims[0] != 1 {
            return Err(ModelError::InvalidConfig("F(1) must be 1".into()));
        }
        for l in 0..self.depth {
            let (f_out, d) = (self.feature_dims[l + 1], self.head_counts[l]);
            if d == 0 || f_out == 0 || f_out % d != 0 {
                return Err(ModelError::InvalidConfig(format!(
                    "layer {}: F(l+1)={f_out} must be a positive multiple of D(l)={d}",
                    l + 1
                )));
            }
        }
        if !self.leaky_slope.is_finite() {
            return Err(ModelError::InvalidConfig("leaky_slope must be finite".into()));
        }
        Ok(())
    }

    /// Input width of layer `l` (0-based). Dense updates accumulate all
    /// previous widths on top of the raw input.
    pub fn layer_in_dim(&self, l: usize) -> usize {
        match self.variant {
            Variant::Plain | Variant::Residual => self.feature_dims[l],
            Variant::Dense => {
                let mut width = self.feature_dims[0];
                for fl in &self.feature_dims[1..=l] {
                    width += fl;
                }
                width
            }
        }
    }

    /// Width of the node feature entering the readout.
    pub fn readout_in_dim(&self) -> usize {
        self.layer_in_dim(self.depth)
    }
}

/// Architecture of the fixed-width MLP baseline: one subchannel's K sorted
/// gains in, K raw powers out. Not size-scalable by construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpConfig {
    pub input_width: usize,
    pub hidden_dims: Vec<usize>,
    pub leaky_slope: f64,
    pub log_input: bool,
}

impl MlpConfig {
    pub fn with_input_width(input_width: usize) -> Self {
        Self {
            input_width,
            hidden_dims: vec![128, 64],
            leaky_slope: 0.2,
            log_input: false,
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.input_width == 0 {
            return Err(ModelError::InvalidConfig("input width must be >= 1".into()));
        }
        if self.hidden_dims.contains(&0) {
            return Err(ModelError::InvalidConfig("hidden widths must be >= 1".into()));
        }
        Ok(())
    }
}

/// One named learnable tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

/// All learnable parameters of a model, in canonical (checkpoint) order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParamSet {
    pub params: Vec<Param>,
}

impl ParamSet {
    pub fn num_values(&self) -> usize {
        self.params.iter().map(|p| p.data.len()).sum()
    }

    /// Creates one tape leaf per parameter, in order.
    pub fn bind(&self, tape: &Tape, requires_grad: bool) -> BoundParams {
        BoundParams {
            leaves: self
                .params
                .iter()
                .map(|p| tape.leaf(&p.shape, p.data.clone(), requires_grad))
                .collect(),
        }
    }

    /// FNV-1a over the raw bit patterns; checkpoint/no-mutation checks.
    pub fn fingerprint(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        let mut eat = |bytes: &[u8]| {
            for &b in bytes {
                h ^= b as u64;
                h = h.wrapping_mul(0x1000_0000_01b3);
            }
        };
        for p in &self.params {
            eat(p.name.as_bytes());
            for &v in &p.data {
                eat(&v.to_bits().to_le_bytes());
            }
        }
        h
    }
}

/// Tape leaves for one [`ParamSet`], same order.
pub struct BoundParams {
    pub leaves: Vec<Tensor>,
}

enum Init {
    He { fan_in: usize },
    Zero,
}

struct Template {
    name: String,
    shape: Vec<usize>,
    init: Init,
}

fn he_template(name: String, shape: Vec<usize>, fan_in: usize) -> Template {
    Template {
        name,
        shape,
        init: Init::He { fan_in },
    }
}

fn zero_template(name: String, shape: Vec<usize>) -> Template {
    Template {
        name,
        shape,
        init: Init::Zero,
    }
}

fn gat_layout(cfg: &ModelConfig) -> Vec<Template> {
    let mut t = Vec::new();
    for l in 0..cfg.depth {
        let in_dim = cfg.layer_in_dim(l);
        let per_head = cfg.feature_dims[l + 1] / cfg.head_counts[l];
        for d in 0..cfg.head_counts[l] {
            t.push(he_template(format!("l{l}.h{d}.a"), vec![per_head], per_head));
            t.push(he_template(
                format!("l{l}.h{d}.w1"),
                vec![per_head, in_dim],
                in_dim,
            ));
            t.push(he_template(
                format!("l{l}.h{d}.w2"),
                vec![per_head, in_dim],
                in_dim,
            ));
        }
        if cfg.variant == Variant::Residual {
            t.push(he_template(
                format!("l{l}.res"),
                vec![cfg.feature_dims[l + 1], in_dim],
                in_dim,
            ));
        }
    }
    let mut width = cfg.readout_in_dim();
    for (j, &hidden) in cfg.mlp_hidden_dims.iter().enumerate() {
        t.push(he_template(
            format!("readout.{j}.w"),
            vec![hidden, width],
            width,
        ));
        t.push(zero_template(format!("readout.{j}.b"), vec![hidden]));
        width = hidden;
    }
    t.push(he_template("readout.out.w".into(), vec![width], width));
    t.push(zero_template("readout.out.b".into(), vec![]));
    t
}

fn mlp_layout(cfg: &MlpConfig) -> Vec<Template> {
    let mut t = Vec::new();
    let mut width = cfg.input_width;
    for (j, &hidden) in cfg.hidden_dims.iter().enumerate() {
        t.push(he_template(
            format!("hidden.{j}.w"),
            vec![hidden, width],
            width,
        ));
        t.push(zero_template(format!("hidden.{j}.b"), vec![hidden]));
        width = hidden;
    }
    for k in 0..cfg.input_width {
        t.push(he_template(format!("out.{k}.w"), vec![width], width));
        t.push(zero_template(format!("out.{k}.b"), vec![]));
    }
    t
}

/// Standard normal via Box-Muller.
fn standard_normal(rng: &mut ChaCha8Rng) -> f64 {
    let mut u1 = rng.gen::<f64>();
    while u1 == 0.0 {
        u1 = rng.gen::<f64>();
    }
    let u2 = rng.gen::<f64>();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

fn init_from_layout(layout: &[Template], rng: &mut ChaCha8Rng) -> ParamSet {
    let params = layout
        .iter()
        .map(|t| {
            let len = t.shape.iter().product::<usize>().max(1);
            let data = match t.init {
                Init::He { fan_in } => {
                    let std = (2.0 / fan_in as f64).sqrt();
                    (0..len).map(|_| std * standard_normal(rng)).collect()
                }
                Init::Zero => vec![0.0; len],
            };
            Param {
                name: t.name.clone(),
                shape: t.shape.clone(),
                data,
            }
        })
        .collect();
    ParamSet { params }
}

fn validate_against_layout(params: &ParamSet, layout: &[Template]) -> Result<(), ModelError> {
    if params.params.len() != layout.len() {
        return Err(ModelError::ParamLayout(format!(
            "{} parameters, expected {}",
            params.params.len(),
            layout.len()
        )));
    }
    for (p, t) in params.params.iter().zip(layout) {
        if p.name != t.name {
            return Err(ModelError::ParamLayout(format!(
                "parameter {} where {} was expected",
                p.name, t.name
            )));
        }
        if p.shape != t.shape || p.data.len() != t.shape.iter().product::<usize>().max(1) {
            return Err(ModelError::ParamShape {
                name: p.name.clone(),
                got: p.shape.clone(),
                want: t.shape.clone(),
            });
        }
        if p.data.iter().any(|v| !v.is_finite()) {
            return Err(ModelError::ParamLayout(format!(
                "parameter {} contains a non-finite value",
                p.name
            )));
        }
    }
    Ok(())
}

/// He (Kaiming) initialization: every weight entry ~ N(0, 2 / fan_in),
/// biases zero.
pub fn init_gat_params(rng: &mut ChaCha8Rng, cfg: &ModelConfig) -> ParamSet {
    init_from_layout(&gat_layout(cfg), rng)
}

pub fn init_mlp_params(rng: &mut ChaCha8Rng, cfg: &MlpConfig) -> ParamSet {
    init_from_layout(&mlp_layout(cfg), rng)
}

/// Canonical parameter names and shapes for a given architecture, in
/// checkpoint payload order.
pub fn gat_param_shapes(cfg: &ModelConfig) -> Vec<(String, Vec<usize>)> {
    gat_layout(cfg).into_iter().map(|t| (t.name, t.shape)).collect()
}

pub fn mlp_param_shapes(cfg: &MlpConfig) -> Vec<(String, Vec<usize>)> {
    mlp_layout(cfg).into_iter().map(|t| (t.name, t.shape)).collect()
}

/// Lexicographic total order on f64 slices.
fn lex_cmp(a: &[f64], b: &[f64]) -> std::cmp::Ordering {
    for (x, y) in a.iter().zip(b) {
        let c = x.total_cmp(y);
        if c != std::cmp::Ordering::Equal {
            return c;
        }
    }
    a.len().cmp(&b.len())
}

/// Attention weights of node `i` over its neighborhood for one head:
/// `alpha_j = softmax_j leaky(W1 h_i + W2 h_j)^T a`.
///
/// Returns the neighbor order used (value-canonical, so the result is
/// independent of node labels) and one rank-0 weight per neighbor in that
/// order. The softmax is computed shift-stabilized from scalar primitives
/// so each weight stays addressable for the aggregation step.
pub fn attention_coefficients(
    w1h_i: &Tensor,
    w2h: &[Tensor],
    neighbors: &[usize],
    attn: &Tensor,
    slope: f64,
) -> (Vec<usize>, Vec<Tensor>) {
    assert!(!neighbors.is_empty(), "empty neighborhood");
    let tape = w1h_i.tape();
    let mut scored: Vec<(usize, Tensor)> = neighbors
        .iter()
        .map(|&j| {
            let score = w1h_i.add(&w2h[j]).leaky_relu(slope).mul(attn).sum();
            (j, score)
        })
        .collect();
    scored.sort_by(|(ja, sa), (jb, sb)| {
        sa.scalar()
            .total_cmp(&sb.scalar())
            .then_with(|| lex_cmp(&w2h[*ja].data(), &w2h[*jb].data()))
            .then(ja.cmp(jb))
    });
    let order: Vec<usize> = scored.iter().map(|(j, _)| *j).collect();
    let shift = scored
        .iter()
        .map(|(_, s)| s.scalar())
        .fold(f64::NEG_INFINITY, f64::max);
    let shift_leaf = tape.scalar(shift);
    let exps: Vec<Tensor> = scored
        .iter()
        .map(|(_, s)| s.sub(&shift_leaf).exp())
        .collect();
    let denom = tape.concat(&exps).sum();
    let alphas = exps.iter().map(|e| e.div(&denom)).collect();
    (order, alphas)
}

/// Weighted neighbor aggregation `sum_k alpha_k W2 h_k` for one head.
/// `alphas` and `order` come from [`attention_coefficients`].
pub fn aggregate(alphas: &[Tensor], order: &[usize], w2h: &[Tensor]) -> Tensor {
    assert_eq!(alphas.len(), order.len());
    let mut acc: Option<Tensor> = None;
    for (a, &j) in alphas.iter().zip(order) {
        let term = a.mul(&w2h[j]);
        acc = Some(match acc {
            Some(s) => s.add(&term),
            None => term,
        });
    }
    acc.expect("non-empty neighborhood")
}

/// Node-feature update: plain head concat, concat + learned residual, or
/// concat extended with the previous feature (dense).
pub fn update_node(
    variant: Variant,
    heads: &[Tensor],
    h_prev: &Tensor,
    w_res: Option<&Tensor>,
) -> Tensor {
    let tape = heads[0].tape();
    match variant {
        Variant::Plain => tape.concat(heads),
        Variant::Residual => {
            let res = w_res.expect("residual update needs W_res").matvec(h_prev);
            tape.concat(heads).add(&res)
        }
        Variant::Dense => {
            let mut parts = heads.to_vec();
            parts.push(h_prev.clone());
            tape.concat(&parts)
        }
    }
}

/// Node-level readout: leaky-relu MLP with a linear scalar head.
/// `hidden` holds (weight, bias) pairs; `out` is (row, bias).
pub fn readout(
    h: &Tensor,
    hidden: &[(Tensor, Tensor)],
    out: &(Tensor, Tensor),
    slope: f64,
) -> Tensor {
    let mut x = h.clone();
    for (w, b) in hidden {
        x = w.matvec(&x).add(b).leaky_relu(slope);
    }
    out.0.mul(&x).sum().add(&out.1)
}

/// Joint power-budget activation over a whole network realization:
/// `p = relu(raw) * P_Max / max(P_Max, sum relu(raw))`.
///
/// The total is accumulated in value-sorted order (subchannel-order
/// invariant) and a final constant rescale guarantees the emitted values
/// sum to at most `p_max` even after rounding.
pub fn power_activation(raw: &[Vec<Tensor>], p_max: f64) -> Vec<Vec<Tensor>> {
    assert!(!raw.is_empty() && raw.iter().all(|r| !r.is_empty()));
    let tape = raw[0][0].tape();
    let clipped: Vec<Vec<Tensor>> = raw
        .iter()
        .map(|sub| sub.iter().map(Tensor::relu).collect())
        .collect();
    let mut flat: Vec<Tensor> = clipped.iter().flatten().cloned().collect();
    flat.sort_by(|a, b| a.scalar().total_cmp(&b.scalar()));
    let total = tape.concat(&flat).sum();
    let scale = tape.scalar(p_max).div(&total.max_const(p_max));
    let mut powers: Vec<Vec<Tensor>> = clipped
        .iter()
        .map(|sub| sub.iter().map(|r| scale.mul(r)).collect())
        .collect();
    // Rounding in the scaled sum can overshoot the budget by a few ulp;
    // shave it off with constant rescales so the invariant holds exactly.
    for _ in 0..4 {
        let sum: f64 = powers.iter().flatten().map(Tensor::scalar).sum();
        if sum <= p_max {
            break;
        }
        let gamma = (p_max / sum).min(1.0 - f64::EPSILON);
        powers = powers
            .iter()
            .map(|sub| sub.iter().map(|p| p.scale(gamma)).collect())
            .collect();
    }
    debug_assert!(
        powers
            .iter()
            .flatten()
            .map(Tensor::scalar)
            .sum::<f64>()
            <= p_max
    );
    powers
}

/// Graph-attention allocator with its parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct GatModel {
    pub config: ModelConfig,
    pub params: ParamSet,
}

impl GatModel {
    pub fn new(config: ModelConfig, params: ParamSet) -> Result<Self, ModelError> {
        config.validate()?;
        validate_against_layout(&params, &gat_layout(&config))?;
        Ok(Self { config, params })
    }

    pub fn init(config: ModelConfig, rng: &mut ChaCha8Rng) -> Result<Self, ModelError> {
        config.validate()?;
        let params = init_gat_params(rng, &config);
        Ok(Self { config, params })
    }

    fn input_feature(&self, tape: &Tape, gain: f64) -> Tensor {
        let v = if self.config.log_input {
            gain.log10()
        } else {
            gain
        };
        tape.leaf(&[1], vec![v], false)
    }

    /// Raw (pre-activation) readout of every node of one subgraph.
    pub fn forward_subgraph(
        &self,
        tape: &Tape,
        subgraph: &Subgraph,
        bound: &BoundParams,
    ) -> Vec<Tensor> {
        let cfg = &self.config;
        let k = subgraph.num_nodes();
        let mut h: Vec<Tensor> = subgraph
            .features()
            .iter()
            .map(|&g| self.input_feature(tape, g))
            .collect();
        let mut cursor = 0usize;
        let next = |cursor: &mut usize| {
            let t = bound.leaves[*cursor].clone();
            *cursor += 1;
            t
        };
        for l in 0..cfg.depth {
            let heads = cfg.head_counts[l];
            let mut head_params = Vec::with_capacity(heads);
            for _ in 0..heads {
                let a = next(&mut cursor);
                let w1 = next(&mut cursor);
                let w2 = next(&mut cursor);
                head_params.push((a, w1, w2));
            }
            let w_res = if cfg.variant == Variant::Residual {
                Some(next(&mut cursor))
            } else {
                None
            };
            // Per head, cache W1 h_i and W2 h_k for every node.
            let mut head_outputs: Vec<Vec<Tensor>> = vec![Vec::with_capacity(heads); k];
            for (a, w1, w2) in &head_params {
                let w1h: Vec<Tensor> = h.iter().map(|hi| w1.matvec(hi)).collect();
                let w2h: Vec<Tensor> = h.iter().map(|hk| w2.matvec(hk)).collect();
                for i in 0..k {
                    let neighbors = subgraph.neighbors(i);
                    let (order, alphas) =
                        attention_coefficients(&w1h[i], &w2h, &neighbors, a, cfg.leaky_slope);
                    head_outputs[i].push(aggregate(&alphas, &order, &w2h));
                }
            }
            h = (0..k)
                .map(|i| update_node(cfg.variant, &head_outputs[i], &h[i], w_res.as_ref()))
                .collect();
        }
        let mut hidden = Vec::with_capacity(cfg.mlp_hidden_dims.len());
        for _ in 0..cfg.mlp_hidden_dims.len() {
            let w = next(&mut cursor);
            let b = next(&mut cursor);
            hidden.push((w, b));
        }
        let out = (next(&mut cursor), next(&mut cursor));
        debug_assert_eq!(cursor, bound.leaves.len());
        h.iter()
            .map(|hi| readout(hi, &hidden, &out, cfg.leaky_slope))
            .collect()
    }

    /// Raw readouts for every subchannel of `instance`.
    pub fn forward_raw(
        &self,
        tape: &Tape,
        instance: &NetworkInstance,
        bound: &BoundParams,
    ) -> Vec<Vec<Tensor>> {
        build_subgraphs(instance)
            .iter()
            .map(|sg| self.forward_subgraph(tape, sg, bound))
            .collect()
    }
}

/// Feed-forward baseline with fixed input width.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    pub config: MlpConfig,
    pub params: ParamSet,
}

impl MlpModel {
    pub fn new(config: MlpConfig, params: ParamSet) -> Result<Self, ModelError> {
        config.validate()?;
        validate_against_layout(&params, &mlp_layout(&config))?;
        Ok(Self { config, params })
    }

    pub fn init(config: MlpConfig, rng: &mut ChaCha8Rng) -> Result<Self, ModelError> {
        config.validate()?;
        let params = init_mlp_params(rng, &config);
        Ok(Self { config, params })
    }

    pub fn forward_raw(
        &self,
        tape: &Tape,
        instance: &NetworkInstance,
        bound: &BoundParams,
    ) -> Result<Vec<Vec<Tensor>>, ModelError> {
        let cfg = &self.config;
        let k = cfg.input_width;
        for n in 0..instance.num_subchannels() {
            if instance.users_on(n) != k {
                return Err(ModelError::InputWidth {
                    expected: k,
                    got: instance.users_on(n),
                });
            }
        }
        let mut out = Vec::with_capacity(instance.num_subchannels());
        for n in 0..instance.num_subchannels() {
            let feats: Vec<f64> = instance
                .gains(n)
                .iter()
                .map(|&g| if cfg.log_input { g.log10() } else { g })
                .collect();
            let mut x = tape.leaf(&[k], feats, false);
            let mut cursor = 0usize;
            for _ in 0..cfg.hidden_dims.len() {
                let w = &bound.leaves[cursor];
                let b = &bound.leaves[cursor + 1];
                cursor += 2;
                x = w.matvec(&x).add(b).leaky_relu(cfg.leaky_slope);
            }
            let mut raws = Vec::with_capacity(k);
            for _ in 0..k {
                let row = &bound.leaves[cursor];
                let bias = &bound.leaves[cursor + 1];
                cursor += 2;
                raws.push(row.mul(&x).sum().add(bias));
            }
            debug_assert_eq!(cursor, bound.leaves.len());
            out.push(raws);
        }
        Ok(out)
    }
}

/// Either allocator behind one interface.
#[derive(Debug, Clone, PartialEq)]
pub enum Allocator {
    Gat(GatModel),
    Mlp(MlpModel),
}

impl Allocator {
    pub fn params(&self) -> &ParamSet {
        match self {
            Allocator::Gat(m) => &m.params,
            Allocator::Mlp(m) => &m.params,
        }
    }

    pub fn params_mut(&mut self) -> &mut ParamSet {
        match self {
            Allocator::Gat(m) => &mut m.params,
            Allocator::Mlp(m) => &mut m.params,
        }
    }

    pub fn forward_raw(
        &self,
        tape: &Tape,
        instance: &NetworkInstance,
        bound: &BoundParams,
    ) -> Result<Vec<Vec<Tensor>>, ModelError> {
        match self {
            Allocator::Gat(m) => Ok(m.forward_raw(tape, instance, bound)),
            Allocator::Mlp(m) => m.forward_raw(tape, instance, bound),
        }
    }

    /// Differentiable end-to-end pass: bind parameters, read out raw
    /// powers, apply the joint budget activation.
    pub fn forward_powers(
        &self,
        tape: &Tape,
        instance: &NetworkInstance,
        p_max: f64,
        requires_grad: bool,
    ) -> Result<(Vec<Vec<Tensor>>, BoundParams), ModelError> {
        let bound = self.params().bind(tape, requires_grad);
        let raw = self.forward_raw(tape, instance, &bound)?;
        Ok((power_activation(&raw, p_max), bound))
    }

    /// Multiplies the output-head parameters by `factor`. The head is
    /// the final linear map, so every raw readout scales by exactly
    /// `factor`; positive factors preserve each node's sign.
    pub fn scale_output_head(&mut self, factor: f64) {
        let prefix = match self {
            Allocator::Gat(_) => "readout.out.",
            Allocator::Mlp(_) => "out.",
        };
        for p in &mut self.params_mut().params {
            if p.name.starts_with(prefix) {
                for v in &mut p.data {
                    *v *= factor;
                }
            }
        }
    }

    /// Plain inference: run the network and extract the allocation.
    pub fn allocate(
        &self,
        instance: &NetworkInstance,
        p_max: f64,
    ) -> Result<PowerAllocation, ModelError> {
        let tape = Tape::new();
        let (powers, _) = self.forward_powers(&tape, instance, p_max, false)?;
        let values = powers
            .iter()
            .map(|sub| sub.iter().map(Tensor::scalar).collect())
            .collect();
        Ok(PowerAllocation::new(values, instance).expect("activation output is a valid allocation"))
    }
}
