//! Multi-input embedding-bag network with exact backpropagation and Adam,
//! in plain f64 loops — no autodiff, no BLAS.
//!
//! One parameterized architecture covers both the single-source and the
//! all-sources model: per-source embedding lookups are concatenated along
//! the token axis, token-level (spatial) dropout zeroes whole vectors,
//! mean-pooling collapses the sequence, and a relu dense stack feeds a
//! single sigmoid output.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use rand::Rng;
use thiserror::Error;

use crate::dataset::{EncodedBatch, Outcome};
use crate::schema::SourceKind;
use crate::tokenizer::AdmissionDocument;
use crate::vocab::{encode, Vocabulary};

/// Probabilities are clamped to [CLAMP, 1-CLAMP] inside the loss only;
/// reported scores are never clamped.
pub const PROB_CLAMP: f64 = 1e-7;

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPSILON: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NnError {
    #[error("token id {id} out of range for {table}: table has {rows} rows")]
    IdOutOfRange {
        table: &'static str,
        id: u32,
        rows: usize,
    },
    #[error("non-finite activation at {stage}")]
    NonFiniteActivation { stage: String },
    #[error("training-mode forward requires a random generator")]
    RngRequired,
    #[error("cache does not match the model or labels it is used with")]
    StaleCache,
    #[error("non-finite gradient")]
    NonFiniteGradient,
    #[error("invalid model configuration: {0}")]
    InvalidConfig(String),
    #[error("no vocabulary for source {0}")]
    MissingVocabulary(&'static str),
}

// ---------------------------------------------------------------------------
// Tensors
// ---------------------------------------------------------------------------

/// Dense row-major f64 matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Mat {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Mat::zeros(rows, cols);
        for r in 0..rows {
            for c in 0..cols {
                m.data[r * cols + c] = f(r, c);
            }
        }
        m
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }
}

// ---------------------------------------------------------------------------
// Configuration and parameters
// ---------------------------------------------------------------------------

/// Architecture and optimizer hyperparameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    /// Input sources in fixed order; length 1 for the single-source model,
    /// 8 for the all-sources model.
    pub sources: Vec<SourceKind>,
    pub embedding_dim: usize,
    pub embedding_dropout: f64,
    pub n_dense: usize,
    pub neurons_per_layer: usize,
    pub hidden_dropout: f64,
    pub learning_rate: f64,
}

pub const NEURON_CHOICES: [usize; 6] = [16, 32, 64, 128, 256, 512];

impl ModelConfig {
    /// Checks the tuner's search-space bounds. Forward/backward only require
    /// structural consistency, so hand-built configs (tests, fixtures) may
    /// sit outside these bounds.
    pub fn validate_search_bounds(&self) -> Result<(), NnError> {
        let fail = |msg: String| Err(NnError::InvalidConfig(msg));
        if self.sources.is_empty() {
            return fail("sources must be non-empty".into());
        }
        if !(3..=15).contains(&self.embedding_dim) {
            return fail(alloc::format!(
                "embedding_dim {} outside [3, 15]",
                self.embedding_dim
            ));
        }
        if !(0.0..=0.8).contains(&self.embedding_dropout) {
            return fail(alloc::format!(
                "embedding_dropout {} outside [0, 0.8]",
                self.embedding_dropout
            ));
        }
        if !(1..=5).contains(&self.n_dense) {
            return fail(alloc::format!("n_dense {} outside 1..=5", self.n_dense));
        }
        if !NEURON_CHOICES.contains(&self.neurons_per_layer) {
            return fail(alloc::format!(
                "neurons_per_layer {} not one of {:?}",
                self.neurons_per_layer,
                NEURON_CHOICES
            ));
        }
        if !(0.0..=0.8).contains(&self.hidden_dropout) {
            return fail(alloc::format!(
                "hidden_dropout {} outside [0, 0.8]",
                self.hidden_dropout
            ));
        }
        if !(1e-4..=0.1).contains(&self.learning_rate) {
            return fail(alloc::format!(
                "learning_rate {} outside [1e-4, 0.1]",
                self.learning_rate
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    /// Shape (out, in).
    pub weight: Mat,
    pub bias: Vec<f64>,
}

/// All trainable tensors. Also reused as the shape-carrying container for
/// gradients and Adam moment estimates.
#[derive(Debug, Clone, PartialEq)]
pub struct Parameters {
    /// Per source (aligned with `ModelConfig::sources`), shape (V_s + 2, d).
    /// Row 0 is the padding row: all-zero and never updated.
    pub embeddings: Vec<Mat>,
    pub dense: Vec<DenseLayer>,
    pub out_weight: Vec<f64>,
    pub out_bias: f64,
}

impl Parameters {
    /// Fresh parameters: embeddings ~ U(-0.05, 0.05) with a zeroed pad row,
    /// dense weights Glorot-uniform, biases zero.
    ///
    /// `table_rows[i]` is the embedding row count (vocab size + 2) for
    /// `cfg.sources[i]`.
    pub fn init<R: Rng>(cfg: &ModelConfig, table_rows: &[usize], rng: &mut R) -> Self {
        assert_eq!(cfg.sources.len(), table_rows.len());
        let d = cfg.embedding_dim;
        let mut embeddings = Vec::with_capacity(table_rows.len());
        for &rows in table_rows {
            let mut e = Mat::from_fn(rows, d, |_, _| rng.gen_range(-0.05..0.05));
            e.row_mut(0).fill(0.0);
            embeddings.push(e);
        }
        let mut dense = Vec::with_capacity(cfg.n_dense);
        let mut fan_in = d;
        for _ in 0..cfg.n_dense {
            let fan_out = cfg.neurons_per_layer;
            let limit = libm::sqrt(6.0 / (fan_in + fan_out) as f64);
            dense.push(DenseLayer {
                weight: Mat::from_fn(fan_out, fan_in, |_, _| rng.gen_range(-limit..limit)),
                bias: vec![0.0; fan_out],
            });
            fan_in = fan_out;
        }
        let limit = libm::sqrt(6.0 / (fan_in + 1) as f64);
        let out_weight = (0..fan_in).map(|_| rng.gen_range(-limit..limit)).collect();
        Parameters {
            embeddings,
            dense,
            out_weight,
            out_bias: 0.0,
        }
    }

    /// Zero tensors with the same shapes as `self`.
    pub fn zeros_like(&self) -> Self {
        Parameters {
            embeddings: self
                .embeddings
                .iter()
                .map(|e| Mat::zeros(e.rows, e.cols))
                .collect(),
            dense: self
                .dense
                .iter()
                .map(|l| DenseLayer {
                    weight: Mat::zeros(l.weight.rows, l.weight.cols),
                    bias: vec![0.0; l.bias.len()],
                })
                .collect(),
            out_weight: vec![0.0; self.out_weight.len()],
            out_bias: 0.0,
        }
    }

    pub fn all_finite(&self) -> bool {
        let mut ok = true;
        self.for_each(|v| ok &= v.is_finite());
        ok
    }

    pub fn for_each(&self, mut f: impl FnMut(f64)) {
        for e in &self.embeddings {
            e.data.iter().for_each(|&v| f(v));
        }
        for l in &self.dense {
            l.weight.data.iter().for_each(|&v| f(v));
            l.bias.iter().for_each(|&v| f(v));
        }
        self.out_weight.iter().for_each(|&v| f(v));
        f(self.out_bias);
    }

    /// Visits every scalar mutably, in the same order as [`Self::for_each`].
    pub fn for_each_mut(&mut self, mut f: impl FnMut(&mut f64)) {
        for e in &mut self.embeddings {
            e.data.iter_mut().for_each(&mut f);
        }
        for l in &mut self.dense {
            l.weight.data.iter_mut().for_each(&mut f);
            l.bias.iter_mut().for_each(&mut f);
        }
        self.out_weight.iter_mut().for_each(&mut f);
        f(&mut self.out_bias);
    }

    /// Total scalar parameter count.
    pub fn n_scalars(&self) -> usize {
        let mut n = 0;
        self.for_each(|_| n += 1);
        n
    }

    fn structure_matches(&self, cfg: &ModelConfig) -> bool {
        self.embeddings.len() == cfg.sources.len()
            && self.embeddings.iter().all(|e| e.cols == cfg.embedding_dim)
            && self.dense.len() == cfg.n_dense
            && self.dense.iter().enumerate().all(|(i, l)| {
                let fan_in = if i == 0 {
                    cfg.embedding_dim
                } else {
                    cfg.neurons_per_layer
                };
                l.weight.rows == cfg.neurons_per_layer
                    && l.weight.cols == fan_in
                    && l.bias.len() == cfg.neurons_per_layer
            })
            && self.out_weight.len() == if cfg.n_dense == 0 {
                cfg.embedding_dim
            } else {
                cfg.neurons_per_layer
            }
    }
}

// Applies `f` to every aligned (parameter, gradient, m, v) quadruple.
fn zip4(
    p: &mut Parameters,
    g: &Parameters,
    m: &mut Parameters,
    v: &mut Parameters,
    mut f: impl FnMut(&mut f64, f64, &mut f64, &mut f64),
) {
    for (i, e) in p.embeddings.iter_mut().enumerate() {
        for (j, val) in e.data.iter_mut().enumerate() {
            f(
                val,
                g.embeddings[i].data[j],
                &mut m.embeddings[i].data[j],
                &mut v.embeddings[i].data[j],
            );
        }
    }
    for (i, l) in p.dense.iter_mut().enumerate() {
        for (j, val) in l.weight.data.iter_mut().enumerate() {
            f(
                val,
                g.dense[i].weight.data[j],
                &mut m.dense[i].weight.data[j],
                &mut v.dense[i].weight.data[j],
            );
        }
        for (j, val) in l.bias.iter_mut().enumerate() {
            f(
                val,
                g.dense[i].bias[j],
                &mut m.dense[i].bias[j],
                &mut v.dense[i].bias[j],
            );
        }
    }
    for (j, val) in p.out_weight.iter_mut().enumerate() {
        f(
            val,
            g.out_weight[j],
            &mut m.out_weight[j],
            &mut v.out_weight[j],
        );
    }
    f(&mut p.out_bias, g.out_bias, &mut m.out_bias, &mut v.out_bias);
}

// ---------------------------------------------------------------------------
// Forward
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// Everything backward needs from one forward pass.
#[derive(Debug, Clone)]
pub struct Cache {
    n: usize,
    /// Per admission: (source index, token id) in concatenation order.
    tokens: Vec<Vec<(usize, u32)>>,
    /// Per token: 0 when dropped, 1/(1-p_e) when kept, 1 in Eval mode.
    token_scales: Vec<Vec<f64>>,
    /// acts[0] is the pooled vector batch, acts[l] the output of layer l.
    acts: Vec<Mat>,
    /// Pre-relu values per dense layer.
    zs: Vec<Mat>,
    /// Hidden inverted-dropout scales per dense layer (all 1 in Eval mode).
    hidden_scales: Vec<Mat>,
    probs: Vec<f64>,
}

#[derive(Debug)]
pub struct Forward {
    pub probs: Vec<f64>,
    pub cache: Cache,
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + libm::exp(-x))
    } else {
        let e = libm::exp(x);
        e / (1.0 + e)
    }
}

fn check_finite(stage: &str, values: &[f64]) -> Result<(), NnError> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(NnError::NonFiniteActivation {
            stage: String::from(stage),
        })
    }
}

pub fn forward_train<R: Rng>(
    params: &Parameters,
    cfg: &ModelConfig,
    batch: &EncodedBatch,
    rng: &mut R,
) -> Result<Forward, NnError> {
    forward(params, cfg, batch, Mode::Train, Some(rng))
}

pub fn forward_eval(
    params: &Parameters,
    cfg: &ModelConfig,
    batch: &EncodedBatch,
) -> Result<Forward, NnError> {
    forward::<rand_chacha::ChaCha8Rng>(params, cfg, batch, Mode::Eval, None)
}

/// Runs the network over a batch.
///
/// Per admission: look up embeddings for every token across the configured
/// sources, token-dropout (Train only, whole vectors, inverted scaling),
/// mean-pool over the total token count, relu dense stack with hidden
/// dropout, sigmoid output. Admissions with zero tokens pool to the zero
/// vector.
pub fn forward<R: Rng>(
    params: &Parameters,
    cfg: &ModelConfig,
    batch: &EncodedBatch,
    mode: Mode,
    mut rng: Option<&mut R>,
) -> Result<Forward, NnError> {
    if !params.structure_matches(cfg) {
        return Err(NnError::InvalidConfig(
            "parameter shapes do not match the config".into(),
        ));
    }
    if mode == Mode::Train && rng.is_none() {
        return Err(NnError::RngRequired);
    }
    let n = batch.len();
    let d = cfg.embedding_dim;
    let p_e = cfg.embedding_dropout;
    let p_h = cfg.hidden_dropout;

    let mut tokens: Vec<Vec<(usize, u32)>> = Vec::with_capacity(n);
    for i in 0..n {
        let mut row = Vec::new();
        for (s_idx, source) in cfg.sources.iter().enumerate() {
            let ids = batch
                .ids_by_source
                .get(source)
                .ok_or(NnError::MissingVocabulary(source.table_name()))?;
            let rows = params.embeddings[s_idx].rows;
            for &id in &ids[i] {
                if (id as usize) >= rows {
                    return Err(NnError::IdOutOfRange {
                        table: source.table_name(),
                        id,
                        rows,
                    });
                }
                row.push((s_idx, id));
            }
        }
        tokens.push(row);
    }

    // Pooling with spatial dropout: kept vectors are scaled by 1/(1-p_e);
    // the divisor stays the total token count, dropped tokens included.
    let mut pooled = Mat::zeros(n, d);
    let mut token_scales: Vec<Vec<f64>> = Vec::with_capacity(n);
    for i in 0..n {
        let t_total = tokens[i].len();
        let mut scales = Vec::with_capacity(t_total);
        let out = pooled.row_mut(i);
        for &(s_idx, id) in &tokens[i] {
            let scale = match (mode, &mut rng) {
                (Mode::Train, Some(r)) if p_e > 0.0 => {
                    if r.gen::<f64>() < p_e {
                        0.0
                    } else {
                        1.0 / (1.0 - p_e)
                    }
                }
                _ => 1.0,
            };
            if scale != 0.0 {
                let row = params.embeddings[s_idx].row(id as usize);
                for (o, &val) in out.iter_mut().zip(row) {
                    *o += scale * val;
                }
            }
            scales.push(scale);
        }
        if t_total > 0 {
            let inv = 1.0 / t_total as f64;
            out.iter_mut().for_each(|v| *v *= inv);
        }
        token_scales.push(scales);
    }
    check_finite("embedding_pool", &pooled.data)?;

    let mut acts = vec![pooled];
    let mut zs = Vec::with_capacity(cfg.n_dense);
    let mut hidden_scales = Vec::with_capacity(cfg.n_dense);
    for (l, layer) in params.dense.iter().enumerate() {
        let input = acts.last().expect("acts starts with the pooled batch");
        let width = layer.weight.rows;
        let mut z = Mat::zeros(n, width);
        for i in 0..n {
            let x = input.row(i);
            let zr = z.row_mut(i);
            for o in 0..width {
                let w = layer.weight.row(o);
                let mut acc = layer.bias[o];
                for (wv, xv) in w.iter().zip(x) {
                    acc += wv * xv;
                }
                zr[o] = acc;
            }
        }
        check_finite(&alloc::format!("dense{}", l + 1), &z.data)?;

        let mut scale = Mat::zeros(n, width);
        scale.data.fill(1.0);
        if mode == Mode::Train && p_h > 0.0 {
            let r = rng.as_mut().expect("checked above");
            for v in scale.data.iter_mut() {
                *v = if r.gen::<f64>() < p_h {
                    0.0
                } else {
                    1.0 / (1.0 - p_h)
                };
            }
        }
        let mut a = Mat::zeros(n, width);
        for j in 0..a.data.len() {
            a.data[j] = z.data[j].max(0.0) * scale.data[j];
        }
        zs.push(z);
        hidden_scales.push(scale);
        acts.push(a);
    }

    let last = acts.last().expect("non-empty");
    let mut probs = Vec::with_capacity(n);
    for i in 0..n {
        let mut logit = params.out_bias;
        for (w, a) in params.out_weight.iter().zip(last.row(i)) {
            logit += w * a;
        }
        if !logit.is_finite() {
            return Err(NnError::NonFiniteActivation {
                stage: String::from("output"),
            });
        }
        probs.push(sigmoid(logit));
    }

    Ok(Forward {
        probs: probs.clone(),
        cache: Cache {
            n,
            tokens,
            token_scales,
            acts,
            zs,
            hidden_scales,
            probs,
        },
    })
}

// ---------------------------------------------------------------------------
// Loss and backward
// ---------------------------------------------------------------------------

/// Mean binary cross-entropy with probabilities clamped away from 0 and 1.
pub fn bce_loss(probs: &[f64], labels: &[bool]) -> f64 {
    assert_eq!(probs.len(), labels.len());
    assert!(!probs.is_empty());
    let mut total = 0.0;
    for (&p, &y) in probs.iter().zip(labels) {
        let p = p.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
        total -= if y {
            libm::log(p)
        } else {
            libm::log(1.0 - p)
        };
    }
    total / probs.len() as f64
}

/// Exact gradients of the batch-mean BCE with respect to every parameter.
///
/// The embedding gradient of one token occurrence is
/// `(scale / t_total) * dL/dh`, accumulated over duplicate ids; the pad row
/// is forced to zero.
pub fn backward(
    params: &Parameters,
    cfg: &ModelConfig,
    cache: &Cache,
    labels: &[bool],
) -> Result<Parameters, NnError> {
    if labels.len() != cache.n
        || !params.structure_matches(cfg)
        || cache.acts.len() != cfg.n_dense + 1
        || cache.acts[0].cols != cfg.embedding_dim
    {
        return Err(NnError::StaleCache);
    }
    let n = cache.n;
    let mut grads = params.zeros_like();

    // d loss / d logit; zero where the loss clamp is active.
    let mut dlogit = Vec::with_capacity(n);
    for (&p, &y) in cache.probs.iter().zip(labels) {
        let g = if p < PROB_CLAMP || p > 1.0 - PROB_CLAMP {
            0.0
        } else {
            (p - if y { 1.0 } else { 0.0 }) / n as f64
        };
        dlogit.push(g);
    }

    let last = cache.acts.last().expect("non-empty");
    let width = params.out_weight.len();
    let mut da = Mat::zeros(n, width);
    for i in 0..n {
        let g = dlogit[i];
        grads.out_bias += g;
        let a = last.row(i);
        let dr = da.row_mut(i);
        for j in 0..width {
            grads.out_weight[j] += g * a[j];
            dr[j] = g * params.out_weight[j];
        }
    }

    for l in (0..cfg.n_dense).rev() {
        let layer = &params.dense[l];
        let z = &cache.zs[l];
        let scale = &cache.hidden_scales[l];
        let input = &cache.acts[l];
        let (out_w, in_w) = (layer.weight.rows, layer.weight.cols);

        let mut dz = Mat::zeros(n, out_w);
        for j in 0..dz.data.len() {
            let relu_grad = if z.data[j] > 0.0 { 1.0 } else { 0.0 };
            dz.data[j] = da.data[j] * scale.data[j] * relu_grad;
        }

        let g_layer = &mut grads.dense[l];
        let mut da_prev = Mat::zeros(n, in_w);
        for i in 0..n {
            let dzr = dz.row(i);
            let x = input.row(i);
            let dp = da_prev.row_mut(i);
            for o in 0..out_w {
                let g = dzr[o];
                if g == 0.0 {
                    continue;
                }
                g_layer.bias[o] += g;
                let gw = g_layer.weight.row_mut(o);
                let w = layer.weight.row(o);
                for c in 0..in_w {
                    gw[c] += g * x[c];
                    dp[c] += g * w[c];
                }
            }
        }
        da = da_prev;
    }

    // da now holds dL/d pooled.
    for i in 0..n {
        let t_total = cache.tokens[i].len();
        if t_total == 0 {
            continue;
        }
        let inv = 1.0 / t_total as f64;
        let dh = da.row(i);
        for (&(s_idx, id), &scale) in cache.tokens[i].iter().zip(&cache.token_scales[i]) {
            if scale == 0.0 {
                continue;
            }
            let row = grads.embeddings[s_idx].row_mut(id as usize);
            let f = scale * inv;
            for (g, &dv) in row.iter_mut().zip(dh) {
                *g += f * dv;
            }
        }
    }
    for e in &mut grads.embeddings {
        e.row_mut(0).fill(0.0);
    }
    Ok(grads)
}

// ---------------------------------------------------------------------------
// Adam
// ---------------------------------------------------------------------------

/// First/second moment estimates plus the step counter.
#[derive(Debug, Clone)]
pub struct AdamState {
    pub m: Parameters,
    pub v: Parameters,
    pub t: u64,
}

impl AdamState {
    pub fn new(params: &Parameters) -> Self {
        AdamState {
            m: params.zeros_like(),
            v: params.zeros_like(),
            t: 0,
        }
    }
}

/// One Adam update with bias correction. Pad embedding rows receive zero
/// gradient from `backward`, so their moments stay zero and the rows never
/// move.
pub fn adam_step(
    params: &mut Parameters,
    grads: &Parameters,
    state: &mut AdamState,
    learning_rate: f64,
) -> Result<(), NnError> {
    if !grads.all_finite() {
        return Err(NnError::NonFiniteGradient);
    }
    state.t += 1;
    let t = state.t as f64;
    let bc1 = 1.0 - libm::pow(ADAM_BETA1, t);
    let bc2 = 1.0 - libm::pow(ADAM_BETA2, t);
    let AdamState { m, v, .. } = state;
    zip4(params, grads, m, v, |theta, g, m, v| {
        *m = ADAM_BETA1 * *m + (1.0 - ADAM_BETA1) * g;
        *v = ADAM_BETA2 * *v + (1.0 - ADAM_BETA2) * g * g;
        let m_hat = *m / bc1;
        let v_hat = *v / bc2;
        *theta -= learning_rate * m_hat / (libm::sqrt(v_hat) + ADAM_EPSILON);
    });
    Ok(())
}

// ---------------------------------------------------------------------------
// Bundled model
// ---------------------------------------------------------------------------

/// A trained classifier: label, architecture, weights and the per-source
/// vocabularies its inputs must be encoded with.
#[derive(Debug, Clone)]
pub struct Model {
    pub outcome: Outcome,
    pub config: ModelConfig,
    pub params: Parameters,
    pub vocabs: BTreeMap<SourceKind, Vocabulary>,
}

impl Model {
    /// Embedding-table row counts aligned with `config.sources`.
    pub fn table_rows(&self) -> Result<Vec<usize>, NnError> {
        self.config
            .sources
            .iter()
            .map(|s| {
                self.vocabs
                    .get(s)
                    .map(Vocabulary::table_rows)
                    .ok_or(NnError::MissingVocabulary(s.table_name()))
            })
            .collect()
    }

    /// Encodes and scores documents in Eval mode, preserving input order.
    pub fn score_documents(
        &self,
        docs: &[AdmissionDocument],
        batch_size: usize,
    ) -> Result<Vec<f64>, NnError> {
        let mut scores = Vec::with_capacity(docs.len());
        for chunk in docs.chunks(batch_size.max(1)) {
            let mut ids_by_source: BTreeMap<SourceKind, Vec<Vec<u32>>> = self
                .config
                .sources
                .iter()
                .map(|&s| (s, Vec::with_capacity(chunk.len())))
                .collect();
            let mut admission_ids = Vec::with_capacity(chunk.len());
            for doc in chunk {
                let encoded = encode(doc, &self.vocabs);
                for (&source, lists) in ids_by_source.iter_mut() {
                    lists.push(
                        encoded
                            .ids_by_source
                            .get(&source)
                            .cloned()
                            .unwrap_or_default(),
                    );
                }
                admission_ids.push(doc.admission_id);
            }
            let batch = EncodedBatch {
                ids_by_source,
                labels: vec![false; chunk.len()], // unused by Eval forward
                admission_ids,
            };
            let fwd = forward_eval(&self.params, &self.config, &batch)?;
            scores.extend(fwd.probs);
        }
        Ok(scores)
    }
}
