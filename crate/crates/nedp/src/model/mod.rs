//! The prediction model: an embedding lookup feeding a recurrent cell (RNN
//! or LSTM) whose logits are trained to predict each walk's next node. The
//! embedding table is the real output; prediction is the training pretext.

mod adam;
mod lstm;
mod rnn;

pub use adam::{AdamState, ADAM_BETA1, ADAM_BETA2, ADAM_EPS};
pub use lstm::{lstm_backward, lstm_forward, LstmParams, LstmTrace};
pub use rnn::{rnn_backward, rnn_forward, RnnParams, RnnTrace};

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use ndarray::{Array1, Array2, ArrayView2, ArrayViewD, ArrayViewMutD, Axis};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::par;
use crate::util::mix_seed;
use crate::walk::WalkCorpus;

/// Uniform init in [-0.5/fan_in, 0.5/fan_in].
pub(crate) fn init_uniform(
    shape: (usize, usize),
    fan_in: usize,
    rng: &mut impl Rng,
) -> Array2<f64> {
    let bound = 0.5 / fan_in as f64;
    let mut a = Array2::zeros(shape);
    for x in a.iter_mut() {
        *x = rng.gen_range(-bound..bound);
    }
    a
}

/// The |V| x d node representation shared by the prediction model and the
/// Laplacian optimizer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingMatrix {
    pub values: Array2<f64>,
}

impl EmbeddingMatrix {
    pub fn init(vocab: usize, dim: usize, rng: &mut impl Rng) -> EmbeddingMatrix {
        if dim >= vocab && vocab > 0 {
            eprintln!("warning: embedding dimension {dim} >= node count {vocab}");
        }
        EmbeddingMatrix {
            values: init_uniform((vocab, dim), dim, rng),
        }
    }

    pub fn node_count(&self) -> usize {
        self.values.nrows()
    }

    pub fn dim(&self) -> usize {
        self.values.ncols()
    }

    /// Row gather: one embedding row per walk position.
    pub fn lookup(&self, walk: &[usize]) -> Result<Array2<f64>> {
        let mut out = Array2::zeros((walk.len(), self.dim()));
        for (t, &id) in walk.iter().enumerate() {
            if id >= self.node_count() {
                return Err(Error::validation(format!(
                    "node id {id} out of range (|V| = {})",
                    self.node_count()
                )));
            }
            out.row_mut(t).assign(&self.values.row(id));
        }
        Ok(out)
    }

    /// Writes `|V| d` then one `node-id v1 .. vd` line per node.
    pub fn write(&self, g: &Graph, path: impl AsRef<Path>) -> Result<()> {
        if g.node_count() != self.node_count() {
            return Err(Error::dimension(format!(
                "graph has {} nodes, embedding has {} rows",
                g.node_count(),
                self.node_count()
            )));
        }
        let file = File::create(path.as_ref())?;
        let mut out = BufWriter::new(file);
        writeln!(out, "{} {}", self.node_count(), self.dim())?;
        for i in 0..self.node_count() {
            write!(out, "{}", g.node_name(i))?;
            for v in self.values.row(i) {
                write!(out, " {v}")?;
            }
            writeln!(out)?;
        }
        out.flush()?;
        Ok(())
    }

    /// Reads an embedding file back, ordering rows by the graph's dense ids.
    pub fn read(path: impl AsRef<Path>, g: &Graph) -> Result<EmbeddingMatrix> {
        let file = File::open(path.as_ref())?;
        let mut lines = BufReader::new(file).lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::parse(1, "missing `|V| d` header"))??;
        let mut it = header.split_whitespace();
        let rows: usize = it
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::parse(1, "invalid node count in header"))?;
        let dim: usize = it
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::parse(1, "invalid dimension in header"))?;
        if rows != g.node_count() {
            return Err(Error::validation(format!(
                "embedding file has {rows} rows but graph has {} nodes",
                g.node_count()
            )));
        }
        let mut values = Array2::zeros((rows, dim));
        let mut seen = vec![false; rows];
        for (lineno, line) in lines.enumerate() {
            let line = line?;
            let lineno = lineno + 2;
            let trimmed = line.trim();
            if trimmed.is_empty() {
                continue;
            }
            let mut tokens = trimmed.split_whitespace();
            let name = tokens.next().unwrap();
            let id = g
                .node_id(name)
                .ok_or_else(|| Error::parse(lineno, format!("unknown node token `{name}`")))?;
            let mut row = values.row_mut(id);
            let mut count = 0;
            for (k, tok) in tokens.enumerate() {
                if k >= dim {
                    return Err(Error::parse(lineno, "too many values in row"));
                }
                row[k] = tok
                    .parse()
                    .map_err(|_| Error::parse(lineno, format!("invalid value `{tok}`")))?;
                count += 1;
            }
            if count != dim {
                return Err(Error::parse(
                    lineno,
                    format!("expected {dim} values, got {count}"),
                ));
            }
            seen[id] = true;
        }
        if let Some(missing) = seen.iter().position(|&s| !s) {
            return Err(Error::validation(format!(
                "embedding file is missing node `{}`",
                g.node_name(missing)
            )));
        }
        Ok(EmbeddingMatrix { values })
    }
}

/// Accumulates `rows` into `grad` at the given indices (the adjoint of the
/// embedding gather).
pub fn scatter_add_rows(
    grad: &mut Array2<f64>,
    ids: &[usize],
    rows: &ArrayView2<'_, f64>,
    scale: f64,
) {
    for (row, &id) in rows.rows().into_iter().zip(ids) {
        grad.row_mut(id).scaled_add(scale, &row);
    }
}

/// Mean per-step cross-entropy of next-node prediction, and its gradient
/// with respect to the logits: `(softmax(o_t) - onehot(target_t)) / T`.
pub fn softmax_cross_entropy(
    logits: &Array2<f64>,
    targets: &[usize],
) -> Result<(f64, Array2<f64>)> {
    let steps = logits.nrows();
    if steps == 0 {
        return Err(Error::validation("empty sequence in loss"));
    }
    if targets.len() != steps {
        return Err(Error::dimension(format!(
            "{} logit rows for {} targets",
            steps,
            targets.len()
        )));
    }
    let vocab = logits.ncols();
    let mut loss = 0.0;
    let mut dlogits = Array2::zeros(logits.raw_dim());
    let inv_t = 1.0 / steps as f64;
    for (t, &target) in targets.iter().enumerate() {
        if target >= vocab {
            return Err(Error::validation(format!(
                "target id {target} out of range (|V| = {vocab})"
            )));
        }
        let row = logits.row(t);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + row.iter().map(|&x| (x - max).exp()).sum::<f64>().ln();
        loss += lse - row[target];
        let mut drow = dlogits.row_mut(t);
        for (k, &x) in row.iter().enumerate() {
            drow[k] = (x - lse).exp() * inv_t;
        }
        drow[target] -= inv_t;
    }
    Ok((loss * inv_t, dlogits))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CellKind {
    Rnn,
    Lstm,
}

impl std::str::FromStr for CellKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rnn" => Ok(CellKind::Rnn),
            "lstm" => Ok(CellKind::Lstm),
            other => Err(Error::validation(format!(
                "unknown cell `{other}` (expected rnn or lstm)"
            ))),
        }
    }
}

impl std::fmt::Display for CellKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            CellKind::Rnn => "rnn",
            CellKind::Lstm => "lstm",
        })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainConfig {
    pub cell: CellKind,
    /// Embedding dimension d.
    pub dim: usize,
    /// Hidden size; defaults to d.
    pub hidden: usize,
    pub lr: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    /// Share the output projection with the embedding table (needs
    /// hidden == dim).
    pub tie_output: bool,
    /// Disable every bias vector in the cell and projection.
    pub use_bias: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            cell: CellKind::Lstm,
            dim: 16,
            hidden: 16,
            lr: 1e-3,
            epochs: 50,
            batch_size: 32,
            seed: 0,
            tie_output: false,
            use_bias: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 || self.hidden == 0 {
            return Err(Error::validation("embedding and hidden dims must be positive"));
        }
        if self.lr < 0.0 || !self.lr.is_finite() {
            return Err(Error::validation("learning rate must be finite and >= 0"));
        }
        if self.batch_size == 0 {
            return Err(Error::validation("batch size must be positive"));
        }
        if self.tie_output && self.hidden != self.dim {
            return Err(Error::validation(
                "tied output projection requires hidden == dim",
            ));
        }
        Ok(())
    }
}

/// Recurrent cell parameters, dispatching between the two architectures.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum CellParams {
    Rnn(RnnParams),
    Lstm(LstmParams),
}

/// Cached forward activations for either cell.
pub enum CellTrace {
    Rnn(RnnTrace),
    Lstm(LstmTrace),
}

impl CellTrace {
    /// Per-step hidden states feeding the output projection.
    pub fn states(&self) -> &Array2<f64> {
        match self {
            CellTrace::Rnn(t) => &t.states,
            CellTrace::Lstm(t) => &t.hidden,
        }
    }
}

impl CellParams {
    pub fn init(kind: CellKind, vocab: usize, cfg: &TrainConfig, rng: &mut impl Rng) -> CellParams {
        match kind {
            CellKind::Rnn => {
                CellParams::Rnn(RnnParams::init(vocab, cfg.dim, cfg.hidden, cfg.use_bias, rng))
            }
            CellKind::Lstm => {
                CellParams::Lstm(LstmParams::init(vocab, cfg.dim, cfg.hidden, cfg.use_bias, rng))
            }
        }
    }

    pub fn kind(&self) -> CellKind {
        match self {
            CellParams::Rnn(_) => CellKind::Rnn,
            CellParams::Lstm(_) => CellKind::Lstm,
        }
    }

    pub fn hidden_size(&self) -> usize {
        match self {
            CellParams::Rnn(p) => p.hidden_size(),
            CellParams::Lstm(p) => p.hidden_size(),
        }
    }

    pub fn vocab_size(&self) -> usize {
        match self {
            CellParams::Rnn(p) => p.vocab_size(),
            CellParams::Lstm(p) => p.vocab_size(),
        }
    }

    pub fn w_out(&self) -> &Array2<f64> {
        match self {
            CellParams::Rnn(p) => &p.w_out,
            CellParams::Lstm(p) => &p.w_out,
        }
    }

    pub fn b_out(&self) -> &Array1<f64> {
        match self {
            CellParams::Rnn(p) => &p.b_out,
            CellParams::Lstm(p) => &p.b_out,
        }
    }

    pub fn use_bias(&self) -> bool {
        match self {
            CellParams::Rnn(p) => p.use_bias,
            CellParams::Lstm(p) => p.use_bias,
        }
    }

    pub fn zeros_like(&self) -> CellParams {
        match self {
            CellParams::Rnn(p) => CellParams::Rnn(p.zeros_like()),
            CellParams::Lstm(p) => CellParams::Lstm(p.zeros_like()),
        }
    }

    pub fn forward_trace(&self, xs: &ArrayView2<'_, f64>) -> CellTrace {
        let h = self.hidden_size();
        match self {
            CellParams::Rnn(p) => CellTrace::Rnn(p.forward_trace(xs, &Array1::zeros(h))),
            CellParams::Lstm(p) => {
                CellTrace::Lstm(p.forward_trace(xs, &Array1::zeros(h), &Array1::zeros(h)))
            }
        }
    }

    /// Cell-internal gradients (projection excluded) and dL/dx_t.
    pub fn backward_trace(
        &self,
        xs: &ArrayView2<'_, f64>,
        trace: &CellTrace,
        d_states_direct: &Array2<f64>,
    ) -> (CellParams, Array2<f64>) {
        match (self, trace) {
            (CellParams::Rnn(p), CellTrace::Rnn(t)) => {
                let (g, dxs) = p.backward_trace(xs, t, d_states_direct);
                (CellParams::Rnn(g), dxs)
            }
            (CellParams::Lstm(p), CellTrace::Lstm(t)) => {
                let (g, dxs) = p.backward_trace(xs, t, d_states_direct);
                (CellParams::Lstm(g), dxs)
            }
            _ => panic!("forward trace does not match cell kind"),
        }
    }

    pub fn block_names(&self) -> &'static [&'static str] {
        match self {
            CellParams::Rnn(_) => &["w_in", "w_rec", "w_out", "b_h", "b_out"],
            CellParams::Lstm(_) => &[
                "w_forget", "w_input", "w_cell", "w_output", "b_forget", "b_input", "b_cell",
                "b_output", "w_out", "b_out",
            ],
        }
    }

    pub fn blocks(&self) -> Vec<ArrayViewD<'_, f64>> {
        match self {
            CellParams::Rnn(p) => vec![
                p.w_in.view().into_dyn(),
                p.w_rec.view().into_dyn(),
                p.w_out.view().into_dyn(),
                p.b_h.view().into_dyn(),
                p.b_out.view().into_dyn(),
            ],
            CellParams::Lstm(p) => vec![
                p.w_forget.view().into_dyn(),
                p.w_input.view().into_dyn(),
                p.w_cell.view().into_dyn(),
                p.w_output.view().into_dyn(),
                p.b_forget.view().into_dyn(),
                p.b_input.view().into_dyn(),
                p.b_cell.view().into_dyn(),
                p.b_output.view().into_dyn(),
                p.w_out.view().into_dyn(),
                p.b_out.view().into_dyn(),
            ],
        }
    }

    pub fn blocks_mut(&mut self) -> Vec<ArrayViewMutD<'_, f64>> {
        match self {
            CellParams::Rnn(p) => vec![
                p.w_in.view_mut().into_dyn(),
                p.w_rec.view_mut().into_dyn(),
                p.w_out.view_mut().into_dyn(),
                p.b_h.view_mut().into_dyn(),
                p.b_out.view_mut().into_dyn(),
            ],
            CellParams::Lstm(p) => vec![
                p.w_forget.view_mut().into_dyn(),
                p.w_input.view_mut().into_dyn(),
                p.w_cell.view_mut().into_dyn(),
                p.w_output.view_mut().into_dyn(),
                p.b_forget.view_mut().into_dyn(),
                p.b_input.view_mut().into_dyn(),
                p.b_cell.view_mut().into_dyn(),
                p.b_output.view_mut().into_dyn(),
                p.w_out.view_mut().into_dyn(),
                p.b_out.view_mut().into_dyn(),
            ],
        }
    }

    pub fn add_scaled(&mut self, other: &CellParams, factor: f64) {
        for (mut a, b) in self.blocks_mut().into_iter().zip(other.blocks()) {
            a.zip_mut_with(&b, |x, &y| *x += factor * y);
        }
    }
}

/// Per-walk gradient bundle produced in parallel and reduced in walk order.
struct WalkGrad {
    loss_mean: f64,
    steps: usize,
    cell: CellParams,
    dxs: Array2<f64>,
    ids: Vec<usize>,
    tied_proj: Option<Array2<f64>>,
}

/// The trainable model: cell parameters plus Adam state for the cell and the
/// embedding table.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Model {
    pub cfg: TrainConfig,
    pub cell: CellParams,
    adam_cell: AdamState,
    adam_emb: AdamState,
    epochs_done: u64,
}

impl Model {
    /// Seeded initialization of the embedding table and cell parameters.
    pub fn new(vocab: usize, cfg: TrainConfig) -> Result<(Model, EmbeddingMatrix)> {
        cfg.validate()?;
        if vocab == 0 {
            return Err(Error::validation("cannot build a model over zero nodes"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let emb = EmbeddingMatrix::init(vocab, cfg.dim, &mut rng);
        let cell = CellParams::init(cfg.cell, vocab, &cfg, &mut rng);
        let adam_cell = AdamState::new(cfg.lr, &cell.blocks());
        let adam_emb = AdamState::new(cfg.lr, &[emb.values.view().into_dyn()]);
        Ok((
            Model {
                cfg,
                cell,
                adam_cell,
                adam_emb,
                epochs_done: 0,
            },
            emb,
        ))
    }

    pub fn epochs_done(&self) -> u64 {
        self.epochs_done
    }

    /// Forward, loss, and full BPTT for one walk.
    fn walk_grad(&self, emb: &EmbeddingMatrix, walk: &[usize]) -> Result<WalkGrad> {
        let steps = walk.len() - 1;
        let inputs = &walk[..steps];
        let targets = &walk[1..];
        let xs = emb.lookup(inputs)?;
        let trace = self.cell.forward_trace(&xs.view());
        let states = trace.states();

        let tied = self.cfg.tie_output;
        let mut logits = if tied {
            states.dot(&emb.values.t())
        } else {
            states.dot(&self.cell.w_out().t())
        };
        if self.cell.use_bias() {
            logits += self.cell.b_out();
        }
        let (loss_mean, dlogits) = softmax_cross_entropy(&logits, targets)?;

        let d_direct = if tied {
            dlogits.dot(&emb.values)
        } else {
            dlogits.dot(self.cell.w_out())
        };
        let (mut cell_grads, dxs) = self.cell.backward_trace(&xs.view(), &trace, &d_direct);
        let proj_grad = dlogits.t().dot(states);
        if self.cell.use_bias() {
            let db_out = dlogits.sum_axis(Axis(0));
            match &mut cell_grads {
                CellParams::Rnn(g) => g.b_out = db_out,
                CellParams::Lstm(g) => g.b_out = db_out,
            }
        }
        let tied_proj = if tied {
            Some(proj_grad)
        } else {
            match &mut cell_grads {
                CellParams::Rnn(g) => g.w_out = proj_grad,
                CellParams::Lstm(g) => g.w_out = proj_grad,
            }
            None
        };

        Ok(WalkGrad {
            loss_mean,
            steps,
            cell: cell_grads,
            dxs,
            ids: inputs.to_vec(),
            tied_proj,
        })
    }

    /// One pass over the corpus in shuffled mini-batches: forward, BPTT, and
    /// an Adam step per batch on the cell, projection, and touched embedding
    /// rows. Returns the mean per-step loss. Walks shorter than two nodes
    /// are skipped.
    pub fn train_epoch(&mut self, emb: &mut EmbeddingMatrix, corpus: &WalkCorpus) -> Result<f64> {
        if emb.node_count() != self.cell.vocab_size() || emb.dim() != self.cfg.dim {
            return Err(Error::dimension(format!(
                "embedding is {}x{} but model expects {}x{}",
                emb.node_count(),
                emb.dim(),
                self.cell.vocab_size(),
                self.cfg.dim
            )));
        }
        let mut order: Vec<usize> = (0..corpus.walks.len())
            .filter(|&i| corpus.walks[i].len() >= 2)
            .collect();
        if order.is_empty() {
            return Err(Error::validation(
                "corpus has no walks of length >= 2 to train on",
            ));
        }
        let mut shuffle_rng =
            ChaCha8Rng::seed_from_u64(mix_seed(self.cfg.seed, 1000 + self.epochs_done));
        order.shuffle(&mut shuffle_rng);

        let mut total_loss = 0.0;
        let mut total_steps = 0usize;
        for batch in order.chunks(self.cfg.batch_size) {
            let results = par::map_slice(batch, |&wi| self.walk_grad(emb, &corpus.walks[wi]));
            let inv_b = 1.0 / batch.len() as f64;
            let mut cell_grad = self.cell.zeros_like();
            let mut emb_grad = Array2::zeros(emb.values.raw_dim());
            for result in results {
                let wg = result?;
                total_loss += wg.loss_mean * wg.steps as f64;
                total_steps += wg.steps;
                cell_grad.add_scaled(&wg.cell, inv_b);
                scatter_add_rows(&mut emb_grad, &wg.ids, &wg.dxs.view(), inv_b);
                if let Some(proj) = wg.tied_proj {
                    emb_grad.scaled_add(inv_b, &proj);
                }
            }
            self.adam_cell.step(
                self.cell.block_names(),
                &mut self.cell.blocks_mut(),
                &cell_grad.blocks(),
            )?;
            self.adam_emb.step(
                &["embedding"],
                &mut [emb.values.view_mut().into_dyn()],
                &[emb_grad.view().into_dyn()],
            )?;
        }
        self.epochs_done += 1;
        Ok(total_loss / total_steps as f64)
    }

    /// Per-node hidden state after feeding the single-element sequence [v];
    /// a debug view of the recurrent representation.
    pub fn node_hidden_states(&self, emb: &EmbeddingMatrix) -> Array2<f64> {
        let n = emb.node_count();
        let hidden = self.cell.hidden_size();
        let mut out = Array2::zeros((n, hidden));
        for v in 0..n {
            let xs = emb
                .lookup(&[v])
                .expect("node ids are in range by construction");
            let trace = self.cell.forward_trace(&xs.view());
            out.row_mut(v).assign(&trace.states().row(0));
        }
        out
    }

    pub fn save_checkpoint(&self, emb: &EmbeddingMatrix, path: impl AsRef<Path>) -> Result<()> {
        let checkpoint = Checkpoint {
            version: CHECKPOINT_VERSION,
            model: self.clone(),
            embedding: emb.clone(),
        };
        let file = File::create(path.as_ref())?;
        serde_json::to_writer(BufWriter::new(file), &checkpoint)
            .map_err(|e| Error::validation(format!("failed to serialize checkpoint: {e}")))?;
        Ok(())
    }

    pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<(Model, EmbeddingMatrix)> {
        let file = File::open(path.as_ref())?;
        let checkpoint: Checkpoint = serde_json::from_reader(BufReader::new(file))
            .map_err(|e| Error::validation(format!("failed to parse checkpoint: {e}")))?;
        if checkpoint.version != CHECKPOINT_VERSION {
            return Err(Error::validation(format!(
                "checkpoint version {} unsupported (expected {CHECKPOINT_VERSION})",
                checkpoint.version
            )));
        }
        Ok((checkpoint.model, checkpoint.embedding))
    }
}

pub const CHECKPOINT_VERSION: u32 = 1;

/// Versioned dump of all parameter blocks plus optimizer state.
#[derive(Serialize, Deserialize)]
struct Checkpoint {
    version: u32,
    model: Model,
    embedding: EmbeddingMatrix,
}
