//! Mini-batch training with validation-based early stopping, plus a
//! pluggable hyperparameter search harness (random search by default).

use alloc::collections::BTreeMap;
use alloc::vec::Vec;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::dataset::{make_batches, DatasetError, Outcome};
use crate::nncore::{
    adam_step, backward, bce_loss, forward_eval, forward_train, AdamState, ModelConfig, NnError,
    Parameters, NEURON_CHOICES,
};
use crate::schema::SourceKind;
use crate::vocab::EncodedDocument;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TrainError {
    #[error("training diverged at epoch {epoch}: non-finite loss")]
    Diverged { epoch: usize },
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error("every search trial diverged")]
    AllTrialsDiverged,
    #[error("n_trials must be at least 1")]
    NoTrials,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainLoopConfig {
    pub max_epochs: usize,
    pub patience: usize,
    pub batch_size: usize,
    pub seed: u64,
    /// Validation loss must drop by at least this much to reset patience.
    pub min_improvement: f64,
}

impl Default for TrainLoopConfig {
    fn default() -> Self {
        TrainLoopConfig {
            max_epochs: 100,
            patience: 5,
            batch_size: 256,
            seed: 0,
            min_improvement: 1e-5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochStats {
    pub train_loss: f64,
    pub val_loss: f64,
}

/// RNG seeds used by one run. Streams of a ChaCha generator keyed by
/// `master`: stream 0 initializes parameters, stream 1 drives dropout,
/// stream 2 yields one shuffle seed per epoch.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrainSeeds {
    pub master: u64,
}

#[derive(Debug, Clone)]
pub struct TrainRunResult {
    /// Parameters restored from the epoch with the lowest validation loss.
    pub params: Parameters,
    pub history: Vec<EpochStats>,
    /// 1-indexed epoch achieving the minimum validation loss (0 if no epoch ran).
    pub best_epoch: usize,
    pub best_val_loss: f64,
    pub seeds: TrainSeeds,
}

fn stream_rng(master: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(stream);
    rng
}

/// Early-stopping bookkeeping: snapshots on any strict improvement, resets
/// patience only on improvements of at least `min_improvement`.
#[derive(Debug, Clone)]
struct EarlyStopper {
    patience: usize,
    min_improvement: f64,
    best_val: f64,
    streak: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum StopDecision {
    /// New best epoch: snapshot the parameters.
    Improved { stop: bool },
    Continue { stop: bool },
}

impl EarlyStopper {
    fn new(patience: usize, min_improvement: f64) -> Self {
        EarlyStopper {
            patience,
            min_improvement,
            best_val: f64::INFINITY,
            streak: 0,
        }
    }

    fn observe(&mut self, val_loss: f64) -> StopDecision {
        if val_loss < self.best_val - self.min_improvement {
            self.streak = 0;
        } else {
            self.streak += 1;
        }
        let stop = self.streak >= self.patience;
        if val_loss < self.best_val {
            self.best_val = val_loss;
            StopDecision::Improved { stop }
        } else {
            StopDecision::Continue { stop }
        }
    }
}

/// Mean Eval-mode BCE over a document set (exact, batch-size weighted).
pub fn dataset_loss(
    params: &Parameters,
    cfg: &ModelConfig,
    docs: &[EncodedDocument],
    batch_size: usize,
    outcome: Outcome,
) -> Result<f64, TrainError> {
    let batches = make_batches(docs, batch_size, None, outcome)?;
    let mut total = 0.0;
    let mut count = 0usize;
    for batch in &batches {
        let fwd = forward_eval(params, cfg, batch)?;
        total += bce_loss(&fwd.probs, &batch.labels) * batch.len() as f64;
        count += batch.len();
    }
    Ok(total / count as f64)
}

/// Trains with shuffled mini-batch Adam steps and early stopping on the
/// full-validation loss; returns the parameters of the best epoch.
pub fn train_model(
    cfg: &ModelConfig,
    outcome: Outcome,
    vocab_rows: &BTreeMap<SourceKind, usize>,
    train_docs: &[EncodedDocument],
    val_docs: &[EncodedDocument],
    loop_cfg: &TrainLoopConfig,
) -> Result<TrainRunResult, TrainError> {
    if train_docs.is_empty() || val_docs.is_empty() {
        return Err(DatasetError::EmptyDataset.into());
    }
    let table_rows: Vec<usize> = cfg
        .sources
        .iter()
        .map(|s| {
            vocab_rows
                .get(s)
                .copied()
                .ok_or(NnError::MissingVocabulary(s.table_name()))
        })
        .collect::<Result<_, _>>()?;

    let seeds = TrainSeeds {
        master: loop_cfg.seed,
    };
    let mut init_rng = stream_rng(loop_cfg.seed, 0);
    let mut dropout_rng = stream_rng(loop_cfg.seed, 1);
    let mut shuffle_rng = stream_rng(loop_cfg.seed, 2);

    let mut params = Parameters::init(cfg, &table_rows, &mut init_rng);
    let mut state = AdamState::new(&params);
    let mut stopper = EarlyStopper::new(loop_cfg.patience, loop_cfg.min_improvement);

    let mut best_params = params.clone();
    let mut best_epoch = 0usize;
    let mut history = Vec::new();

    for epoch in 1..=loop_cfg.max_epochs {
        let shuffle_seed: u64 = shuffle_rng.gen();
        let batches = make_batches(
            train_docs,
            loop_cfg.batch_size,
            Some(shuffle_seed),
            outcome,
        )?;
        let mut train_total = 0.0;
        let mut train_count = 0usize;
        for batch in &batches {
            let fwd = forward_train(&params, cfg, batch, &mut dropout_rng)?;
            train_total += bce_loss(&fwd.probs, &batch.labels) * batch.len() as f64;
            train_count += batch.len();
            let grads = backward(&params, cfg, &fwd.cache, &batch.labels)?;
            adam_step(&mut params, &grads, &mut state, cfg.learning_rate)?;
        }
        let train_loss = train_total / train_count as f64;
        let val_loss = dataset_loss(&params, cfg, val_docs, loop_cfg.batch_size, outcome)?;
        if !train_loss.is_finite() || !val_loss.is_finite() {
            return Err(TrainError::Diverged { epoch });
        }
        history.push(EpochStats {
            train_loss,
            val_loss,
        });
        let decision = stopper.observe(val_loss);
        if let StopDecision::Improved { .. } = decision {
            best_params = params.clone();
            best_epoch = epoch;
        }
        match decision {
            StopDecision::Improved { stop: true } | StopDecision::Continue { stop: true } => break,
            _ => {}
        }
    }

    Ok(TrainRunResult {
        params: best_params,
        history,
        best_epoch,
        best_val_loss: stopper.best_val,
        seeds,
    })
}

// ---------------------------------------------------------------------------
// Hyperparameter search
// ---------------------------------------------------------------------------

/// Search-space bounds; the defaults are the tuner's full space.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchSpace {
    pub embedding_dim: (usize, usize),
    pub embedding_dropout: (f64, f64),
    pub n_dense_choices: Vec<usize>,
    pub neuron_choices: Vec<usize>,
    pub hidden_dropout: (f64, f64),
    /// Sampled log-uniformly.
    pub learning_rate: (f64, f64),
}

impl Default for SearchSpace {
    fn default() -> Self {
        SearchSpace {
            embedding_dim: (3, 15),
            embedding_dropout: (0.0, 0.8),
            n_dense_choices: alloc::vec![1, 2, 3, 4, 5],
            neuron_choices: NEURON_CHOICES.to_vec(),
            hidden_dropout: (0.0, 0.8),
            learning_rate: (1e-4, 0.1),
        }
    }
}

/// One sampled hyperparameter setting (everything but the input sources).
#[derive(Debug, Clone, PartialEq)]
pub struct HyperSample {
    pub embedding_dim: usize,
    pub embedding_dropout: f64,
    pub n_dense: usize,
    pub neurons_per_layer: usize,
    pub hidden_dropout: f64,
    pub learning_rate: f64,
}

impl HyperSample {
    pub fn into_config(self, sources: Vec<SourceKind>) -> ModelConfig {
        ModelConfig {
            sources,
            embedding_dim: self.embedding_dim,
            embedding_dropout: self.embedding_dropout,
            n_dense: self.n_dense,
            neurons_per_layer: self.neurons_per_layer,
            hidden_dropout: self.hidden_dropout,
            learning_rate: self.learning_rate,
        }
    }
}

/// Proposes the next trial's hyperparameters. Implement this to plug in a
/// smarter tuner; `RandomSearch` is the stock strategy.
pub trait SearchStrategy {
    fn propose(
        &mut self,
        trial: usize,
        space: &SearchSpace,
        history: &[TrialRecord],
        rng: &mut ChaCha8Rng,
    ) -> HyperSample;
}

/// Uniform sampling over every field, log-uniform for the learning rate.
#[derive(Debug, Clone, Copy, Default)]
pub struct RandomSearch;

impl SearchStrategy for RandomSearch {
    fn propose(
        &mut self,
        _trial: usize,
        space: &SearchSpace,
        _history: &[TrialRecord],
        rng: &mut ChaCha8Rng,
    ) -> HyperSample {
        let (d_lo, d_hi) = space.embedding_dim;
        let embedding_dim = rng.gen_range(d_lo..=d_hi);
        let embedding_dropout = rng.gen_range(space.embedding_dropout.0..=space.embedding_dropout.1);
        let n_dense = space.n_dense_choices[rng.gen_range(0..space.n_dense_choices.len())];
        let neurons_per_layer = space.neuron_choices[rng.gen_range(0..space.neuron_choices.len())];
        let hidden_dropout = rng.gen_range(space.hidden_dropout.0..=space.hidden_dropout.1);
        let (lr_lo, lr_hi) = space.learning_rate;
        let learning_rate = libm::exp(rng.gen_range(libm::log(lr_lo)..=libm::log(lr_hi)));
        HyperSample {
            embedding_dim,
            embedding_dropout,
            n_dense,
            neurons_per_layer,
            hidden_dropout,
            learning_rate,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrialStatus {
    Ok,
    Diverged,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub trial: usize,
    pub config: ModelConfig,
    /// Infinite for diverged trials.
    pub best_val_loss: f64,
    pub best_epoch: usize,
    pub status: TrialStatus,
}

#[derive(Debug, Clone)]
pub struct TuneResult {
    pub best_config: ModelConfig,
    pub best_trial: usize,
    /// Trained result of the winning trial.
    pub best_run: TrainRunResult,
    pub trials: Vec<TrialRecord>,
}

/// Samples `n_trials` configurations, trains each, and returns the one with
/// the lowest validation loss. Trial k draws from an independent RNG stream
/// of `seed`, so results do not depend on scheduling. Diverged trials are
/// recorded with infinite loss and skipped.
#[allow(clippy::too_many_arguments)]
pub fn tune(
    space: &SearchSpace,
    n_trials: usize,
    strategy: &mut dyn SearchStrategy,
    sources: &[SourceKind],
    outcome: Outcome,
    vocab_rows: &BTreeMap<SourceKind, usize>,
    train_docs: &[EncodedDocument],
    val_docs: &[EncodedDocument],
    loop_cfg: &TrainLoopConfig,
    seed: u64,
) -> Result<TuneResult, TrainError> {
    if n_trials == 0 {
        return Err(TrainError::NoTrials);
    }
    let mut trials: Vec<TrialRecord> = Vec::with_capacity(n_trials);
    let mut best: Option<(usize, TrainRunResult)> = None;
    for trial in 0..n_trials {
        let mut rng = stream_rng(seed, 1 + trial as u64);
        let sample = strategy.propose(trial, space, &trials, &mut rng);
        let config = sample.into_config(sources.to_vec());
        let trial_loop = TrainLoopConfig {
            seed: rng.gen(),
            ..loop_cfg.clone()
        };
        match train_model(&config, outcome, vocab_rows, train_docs, val_docs, &trial_loop) {
            Ok(run) => {
                let record = TrialRecord {
                    trial,
                    config: config.clone(),
                    best_val_loss: run.best_val_loss,
                    best_epoch: run.best_epoch,
                    status: TrialStatus::Ok,
                };
                let better = match &best {
                    None => true,
                    Some((best_idx, _)) => {
                        run.best_val_loss < trials[*best_idx].best_val_loss
                    }
                };
                if better {
                    best = Some((trial, run));
                }
                trials.push(record);
            }
            Err(TrainError::Diverged { epoch }) => {
                trials.push(TrialRecord {
                    trial,
                    config,
                    best_val_loss: f64::INFINITY,
                    best_epoch: epoch,
                    status: TrialStatus::Diverged,
                });
            }
            Err(other) => return Err(other),
        }
    }
    let (best_trial, best_run) = best.ok_or(TrainError::AllTrialsDiverged)?;
    Ok(TuneResult {
        best_config: trials[best_trial].config.clone(),
        best_trial,
        best_run,
        trials,
    })
}
