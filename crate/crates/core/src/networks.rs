//! The model zoo: shared embedding, per-task encoder / transfer / inverse
//! transfer / head networks, the perturbation generator, and checkpoint I/O.
//!
//! Default sizes follow the reference architecture: a depth-2 message
//! passing backbone (hidden 200, out 100), a 100→50 bottleneck, 50→50
//! transfer and inverse-transfer MLPs with three hidden layers of 100, and
//! a 50→25→12→1 head. Transfer and inverse transfer share the bottleneck
//! width on both ends so they compose in either order.

use std::io::{Read, Write};
use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::autodiff::{ParamId, ParamSet, Shape, Tape, Value};
use crate::dmpnn::{BatchGraph, Dmpnn, DmpnnConfig, GraphRepr};
use crate::error::{GateError, Result};
use crate::init::{xavier_uniform, zeros};
use crate::scalar::{lit, Scalar};
use crate::smiles::{EDGE_FEATURE_WIDTH, NODE_FEATURE_WIDTH};

/// Forward-pass mode: dropout is active only in training.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

// ---------------------------------------------------------------------------
// MLP
// ---------------------------------------------------------------------------

/// Layer widths and dropout rate of a plain MLP.
///
/// ReLU between layers, linear output; dropout follows each hidden
/// activation in training mode.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MlpSpec {
    pub widths: Vec<usize>,
    pub dropout: f64,
}

impl MlpSpec {
    pub fn new(widths: Vec<usize>, dropout: f64) -> Self {
        MlpSpec { widths, dropout }
    }

    fn validate(&self) -> Result<()> {
        if self.widths.len() < 2 {
            return Err(GateError::Config(format!(
                "MLP needs at least input and output widths, got {:?}",
                self.widths
            )));
        }
        if self.widths.iter().any(|&w| w == 0) {
            return Err(GateError::Config(format!("zero width in MLP {:?}", self.widths)));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(GateError::Config(format!("dropout {} outside [0,1)", self.dropout)));
        }
        Ok(())
    }
}

/// Parameter handles of an MLP.
#[derive(Clone, Debug)]
pub struct Mlp {
    pub spec: MlpSpec,
    layers: Vec<(ParamId, ParamId)>,
}

impl Mlp {
    pub fn new<T: Scalar, R: Rng>(
        name: &str,
        spec: MlpSpec,
        params: &mut ParamSet<T>,
        rng: &mut R,
    ) -> Result<Mlp> {
        spec.validate()?;
        let layers = spec
            .widths
            .windows(2)
            .enumerate()
            .map(|(l, w)| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let wid = params.alloc(
                    format!("{name}.w{l}"),
                    Shape::matrix(fan_in, fan_out),
                    xavier_uniform(fan_in, fan_out, rng),
                );
                let bid = params.alloc(format!("{name}.b{l}"), Shape::vector(fan_out), zeros(fan_out));
                (wid, bid)
            })
            .collect();
        Ok(Mlp { spec, layers })
    }

    pub fn input_width(&self) -> usize {
        self.spec.widths[0]
    }

    pub fn output_width(&self) -> usize {
        *self.spec.widths.last().unwrap()
    }

    pub fn layer_params(&self) -> &[(ParamId, ParamId)] {
        &self.layers
    }

    /// Row-wise forward over a `[batch x input]` matrix.
    pub fn forward<T: Scalar, R: Rng>(
        &self,
        tape: &mut Tape<T>,
        params: &ParamSet<T>,
        x: Value,
        mode: Mode,
        rng: &mut R,
    ) -> Result<Value> {
        if tape.shape(x).cols() != self.input_width() {
            return Err(GateError::dimension(
                "mlp input",
                tape.shape(x),
                format!("input width {}", self.input_width()),
            ));
        }
        let mut h = x;
        let last = self.layers.len() - 1;
        for (l, &(wid, bid)) in self.layers.iter().enumerate() {
            let w = tape.param(params, wid);
            let b = tape.param(params, bid);
            let lin = tape.matmul(h, w)?;
            h = tape.add_bias(lin, b)?;
            if l < last {
                h = tape.relu(h);
                h = tape.dropout(h, self.spec.dropout, rng, mode == Mode::Train)?;
            }
        }
        Ok(h)
    }
}

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

/// Widths of every network in the model, enforced at construction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NetworkConfig {
    pub node_features: usize,
    pub edge_features: usize,
    pub depth: usize,
    pub embed_hidden: usize,
    pub embed_out: usize,
    pub encoder_hidden: usize,
    pub encoder_out: usize,
    pub bottleneck_hidden: usize,
    pub latent: usize,
    pub transfer_hidden: Vec<usize>,
    pub head_hidden: Vec<usize>,
    pub dropout: f64,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        NetworkConfig {
            node_features: NODE_FEATURE_WIDTH,
            edge_features: EDGE_FEATURE_WIDTH,
            depth: 2,
            embed_hidden: 200,
            embed_out: 100,
            encoder_hidden: 200,
            encoder_out: 100,
            bottleneck_hidden: 50,
            latent: 50,
            transfer_hidden: vec![100, 100, 100],
            head_hidden: vec![25, 12],
            dropout: 0.2,
        }
    }
}

impl NetworkConfig {
    pub fn validate(&self) -> Result<()> {
        let dims = [
            self.node_features,
            self.edge_features,
            self.depth,
            self.embed_hidden,
            self.embed_out,
            self.encoder_hidden,
            self.encoder_out,
            self.bottleneck_hidden,
            self.latent,
        ];
        if dims.iter().any(|&d| d == 0)
            || self.transfer_hidden.iter().any(|&d| d == 0)
            || self.head_hidden.iter().any(|&d| d == 0)
        {
            return Err(GateError::Config("zero dimension in network config".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(GateError::Config(format!(
                "dropout {} outside [0,1)",
                self.dropout
            )));
        }
        Ok(())
    }

    /// Same architecture with every hidden/latent width divided by `divisor`
    /// (floored at 1). Used for desk-scale experiments.
    pub fn scaled_down(&self, divisor: usize) -> NetworkConfig {
        let s = |w: usize| (w / divisor).max(1);
        NetworkConfig {
            node_features: self.node_features,
            edge_features: self.edge_features,
            depth: self.depth,
            embed_hidden: s(self.embed_hidden),
            embed_out: s(self.embed_out),
            encoder_hidden: s(self.encoder_hidden),
            encoder_out: s(self.encoder_out),
            bottleneck_hidden: s(self.bottleneck_hidden),
            latent: s(self.latent),
            transfer_hidden: self.transfer_hidden.iter().map(|&w| s(w)).collect(),
            head_hidden: self.head_hidden.iter().map(|&w| s(w)).collect(),
            dropout: self.dropout,
        }
    }

    fn embedding_cfg(&self) -> DmpnnConfig {
        DmpnnConfig {
            node_in: self.node_features,
            edge_in: self.edge_features,
            hidden: self.embed_hidden,
            out: self.embed_out,
            depth: self.depth,
        }
    }

    /// The encoder backbone consumes the embedding's node states as node
    /// features and its edge hidden states as edge features.
    fn backbone_cfg(&self) -> DmpnnConfig {
        DmpnnConfig {
            node_in: self.embed_out,
            edge_in: self.embed_hidden,
            hidden: self.encoder_hidden,
            out: self.encoder_out,
            depth: self.depth,
        }
    }

    fn bottleneck_spec(&self) -> MlpSpec {
        MlpSpec::new(vec![self.encoder_out, self.bottleneck_hidden, self.latent], 0.0)
    }

    fn transfer_spec(&self) -> MlpSpec {
        let mut widths = vec![self.latent];
        widths.extend_from_slice(&self.transfer_hidden);
        widths.push(self.latent);
        MlpSpec::new(widths, self.dropout)
    }

    fn head_spec(&self) -> MlpSpec {
        let mut widths = vec![self.latent];
        widths.extend_from_slice(&self.head_hidden);
        widths.push(1);
        MlpSpec::new(widths, self.dropout)
    }
}

// ---------------------------------------------------------------------------
// Network bundles
// ---------------------------------------------------------------------------

/// Task encoder: message passing backbone plus bottleneck MLP.
#[derive(Clone, Debug)]
pub struct Encoder {
    pub backbone: Dmpnn,
    pub bottleneck: Mlp,
}

impl Encoder {
    fn new<T: Scalar, R: Rng>(
        name: &str,
        config: &NetworkConfig,
        params: &mut ParamSet<T>,
        rng: &mut R,
    ) -> Result<Encoder> {
        Ok(Encoder {
            backbone: Dmpnn::new(&format!("{name}.backbone"), config.backbone_cfg(), params, rng)?,
            bottleneck: Mlp::new(
                &format!("{name}.bottleneck"),
                config.bottleneck_spec(),
                params,
                rng,
            )?,
        })
    }

    /// Encode an embedded representation into the latent space: the backbone
    /// runs on the embedding's node/edge states, and the pooled molecule
    /// vectors pass through the bottleneck.
    pub fn encode<T: Scalar, R: Rng>(
        &self,
        tape: &mut Tape<T>,
        params: &ParamSet<T>,
        batch: &BatchGraph,
        a: &GraphRepr,
        mode: Mode,
        rng: &mut R,
    ) -> Result<Value> {
        let repr = self
            .backbone
            .forward(tape, params, batch, a.node_states, a.edge_states)?;
        self.bottleneck.forward(tape, params, repr.pooled, mode, rng)
    }
}

/// Per-task networks: encoder, transfer, inverse transfer, head.
#[derive(Clone, Debug)]
pub struct TaskNetworks {
    pub encoder: Encoder,
    pub transfer: Mlp,
    pub inverse: Mlp,
    pub head: Mlp,
}

impl TaskNetworks {
    fn new<T: Scalar, R: Rng>(
        name: &str,
        config: &NetworkConfig,
        params: &mut ParamSet<T>,
        rng: &mut R,
    ) -> Result<TaskNetworks> {
        Ok(TaskNetworks {
            encoder: Encoder::new(&format!("{name}.encoder"), config, params, rng)?,
            transfer: Mlp::new(&format!("{name}.transfer"), config.transfer_spec(), params, rng)?,
            inverse: Mlp::new(&format!("{name}.inverse"), config.transfer_spec(), params, rng)?,
            head: Mlp::new(&format!("{name}.head"), config.head_spec(), params, rng)?,
        })
    }
}

/// Full model: one shared embedding network plus per-task bundles.
#[derive(Clone, Debug)]
pub struct GateNetworks {
    pub embedding: Dmpnn,
    pub tasks: Vec<TaskNetworks>,
}

impl GateNetworks {
    /// Allocate all parameters; fails fast on inconsistent widths.
    pub fn new<T: Scalar, R: Rng>(
        config: &NetworkConfig,
        n_tasks: usize,
        params: &mut ParamSet<T>,
        rng: &mut R,
    ) -> Result<GateNetworks> {
        config.validate()?;
        if n_tasks == 0 {
            return Err(GateError::Config("at least one task required".into()));
        }
        let embedding = Dmpnn::new("embed", config.embedding_cfg(), params, rng)?;
        let tasks = (0..n_tasks)
            .map(|t| TaskNetworks::new(&format!("task{t}"), config, params, rng))
            .collect::<Result<Vec<_>>>()?;
        Ok(GateNetworks { embedding, tasks })
    }

    /// Shared embedding pass over a batch's raw features.
    pub fn embed<T: Scalar>(
        &self,
        tape: &mut Tape<T>,
        params: &ParamSet<T>,
        batch: &BatchGraph,
    ) -> Result<GraphRepr> {
        let nf = batch.node_features(tape);
        let ef = batch.edge_features(tape);
        self.embedding.forward(tape, params, batch, nf, ef)
    }
}

/// Single-task model: embedding, encoder, head (regression only).
#[derive(Clone, Debug)]
pub struct StlNetworks {
    pub embedding: Dmpnn,
    pub encoder: Encoder,
    pub head: Mlp,
}

impl StlNetworks {
    pub fn new<T: Scalar, R: Rng>(
        config: &NetworkConfig,
        params: &mut ParamSet<T>,
        rng: &mut R,
    ) -> Result<StlNetworks> {
        config.validate()?;
        Ok(StlNetworks {
            embedding: Dmpnn::new("embed", config.embedding_cfg(), params, rng)?,
            encoder: Encoder::new("task0.encoder", config, params, rng)?,
            head: Mlp::new("task0.head", config.head_spec(), params, rng)?,
        })
    }
}

/// Multi-task model: shared embedding and encoder, one head per task.
#[derive(Clone, Debug)]
pub struct MtlNetworks {
    pub embedding: Dmpnn,
    pub encoder: Encoder,
    pub heads: Vec<Mlp>,
}

impl MtlNetworks {
    pub fn new<T: Scalar, R: Rng>(
        config: &NetworkConfig,
        n_tasks: usize,
        params: &mut ParamSet<T>,
        rng: &mut R,
    ) -> Result<MtlNetworks> {
        config.validate()?;
        Ok(MtlNetworks {
            embedding: Dmpnn::new("embed", config.embedding_cfg(), params, rng)?,
            encoder: Encoder::new("shared.encoder", config, params, rng)?,
            heads: (0..n_tasks)
                .map(|t| Mlp::new(&format!("head{t}"), config.head_spec(), params, rng))
                .collect::<Result<Vec<_>>>()?,
        })
    }
}

// ---------------------------------------------------------------------------
// Perturbation
// ---------------------------------------------------------------------------

/// Perturbation-set parameters: number of copies and noise scale.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PerturbConfig {
    pub count: usize,
    pub sigma: f64,
}

impl Default for PerturbConfig {
    fn default() -> Self {
        PerturbConfig { count: 10, sigma: 0.01 }
    }
}

impl PerturbConfig {
    pub fn validate(&self) -> Result<()> {
        if self.count == 0 {
            return Err(GateError::Parameter("perturbation count must be >= 1".into()));
        }
        if !(self.sigma > 0.0) {
            return Err(GateError::Parameter(format!(
                "perturbation sigma must be > 0, got {}",
                self.sigma
            )));
        }
        Ok(())
    }
}

/// Generate `count` noise-displaced copies of an embedded representation.
///
/// Gaussian noise with standard deviation `sigma` is added to every node
/// state entry; edge states are shared untouched and pooled vectors are
/// recomputed from the perturbed node states. Gradients flow through the
/// displaced copies back into the embedding.
pub fn perturb<T: Scalar, R: Rng>(
    tape: &mut Tape<T>,
    repr: &GraphRepr,
    batch: &BatchGraph,
    cfg: &PerturbConfig,
    rng: &mut R,
) -> Result<Vec<GraphRepr>> {
    cfg.validate()?;
    let n = tape.shape(repr.node_states).count();
    let groups = batch.pooling_groups();
    (0..cfg.count)
        .map(|_| {
            let noise: Vec<T> = (0..n)
                .map(|_| {
                    let z: f64 = StandardNormal.sample(rng);
                    lit::<T>(cfg.sigma * z)
                })
                .collect();
            let node_states = tape.add_offset(repr.node_states, &noise)?;
            let pooled = tape.gather_sum(node_states, std::rc::Rc::clone(&groups))?;
            Ok(GraphRepr { node_states, edge_states: repr.edge_states, pooled })
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Checkpoints
// ---------------------------------------------------------------------------

/// Shape record for one parameter in a checkpoint header.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ParamInfo {
    pub name: String,
    pub dims: Vec<usize>,
}

/// JSON header preceding the parameter blob in a checkpoint file.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub format: String,
    pub config: NetworkConfig,
    pub seed: u64,
    pub params: Vec<ParamInfo>,
    /// Caller-defined metadata (run configuration, best metrics, ...).
    #[serde(default)]
    pub extra: serde_json::Value,
}

pub const CHECKPOINT_FORMAT: &str = "gate-checkpoint-v1";

/// Write header JSON (one line) followed by the little-endian f64 parameter
/// blob in declaration order. The byte stream round-trips exactly.
pub fn save_checkpoint(
    path: &Path,
    config: &NetworkConfig,
    seed: u64,
    extra: serde_json::Value,
    params: &ParamSet<f64>,
) -> Result<()> {
    let header = CheckpointHeader {
        format: CHECKPOINT_FORMAT.to_string(),
        config: config.clone(),
        seed,
        params: params
            .entries()
            .iter()
            .map(|e| ParamInfo { name: e.name.clone(), dims: e.shape.dims().to_vec() })
            .collect(),
        extra,
    };
    let mut file = std::fs::File::create(path)?;
    let mut line = serde_json::to_string(&header)?;
    line.push('\n');
    file.write_all(line.as_bytes())?;
    for entry in params.entries() {
        for &v in &entry.data {
            file.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

/// Read a checkpoint back: header plus per-parameter data blobs.
pub fn load_checkpoint(path: &Path) -> Result<(CheckpointHeader, Vec<Vec<f64>>)> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    let newline = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| GateError::Contract("checkpoint missing header line".into()))?;
    let header: CheckpointHeader = serde_json::from_slice(&bytes[..newline])?;
    if header.format != CHECKPOINT_FORMAT {
        return Err(GateError::Contract(format!(
            "unsupported checkpoint format '{}'",
            header.format
        )));
    }
    let mut offset = newline + 1;
    let mut blobs = Vec::with_capacity(header.params.len());
    for info in &header.params {
        let count: usize = info.dims.iter().product::<usize>().max(1);
        let need = count * 8;
        if offset + need > bytes.len() {
            return Err(GateError::Contract(format!(
                "checkpoint truncated in parameter '{}'",
                info.name
            )));
        }
        let data = bytes[offset..offset + need]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        blobs.push(data);
        offset += need;
    }
    if offset != bytes.len() {
        return Err(GateError::Contract("trailing bytes after checkpoint blob".into()));
    }
    Ok((header, blobs))
}

/// Restore loaded blobs into a freshly built parameter set.
pub fn restore_params(params: &mut ParamSet<f64>, blobs: &[Vec<f64>]) -> Result<()> {
    if params.len() != blobs.len() {
        return Err(GateError::Contract(format!(
            "checkpoint has {} parameters, model expects {}",
            blobs.len(),
            params.len()
        )));
    }
    for (entry, blob) in params.entries_mut().iter_mut().zip(blobs) {
        if entry.data.len() != blob.len() {
            return Err(GateError::dimension(
                format!("checkpoint parameter '{}'", entry.name),
                entry.data.len(),
                blob.len(),
            ));
        }
        entry.data.copy_from_slice(blob);
    }
    Ok(())
}
