//! Teacher-forced SGD training for the encoder-decoder blocks and the
//! language model, with optional source/target inversion.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::corpus::{CharVocab, EncodedPair, PairKind, TrainingPair};
use crate::error::{Error, Result};
use crate::model::{axpy, Checkpoint, Dims, Inversion, LanguageModel, Scorer, Seq2Seq, Visit};
use crate::numeric::{Initializer, Scalar};

/// Gradient-norm clipping threshold.
pub const DEFAULT_CLIP_NORM: f64 = 5.0;
pub const DEFAULT_LEARNING_RATE: f64 = 0.1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BlockKind {
    /// Line to next line.
    Spb,
    /// Two lines of context to the following line.
    Cpb,
    /// Keyword to line, fine-tuned from an SPB.
    Wpb,
    Lm,
}

impl BlockKind {
    pub fn pair_kind(self) -> Option<PairKind> {
        match self {
            BlockKind::Spb => Some(PairKind::LineToLine),
            BlockKind::Cpb => Some(PairKind::ContextToLine),
            BlockKind::Wpb => Some(PairKind::WordToLine),
            BlockKind::Lm => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            BlockKind::Spb => "spb",
            BlockKind::Cpb => "cpb",
            BlockKind::Wpb => "wpb",
            BlockKind::Lm => "lm",
        }
    }
}

impl fmt::Display for BlockKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BlockKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "spb" => Ok(BlockKind::Spb),
            "cpb" => Ok(BlockKind::Cpb),
            "wpb" => Ok(BlockKind::Wpb),
            "lm" => Ok(BlockKind::Lm),
            _ => Err(Error::Input(format!("unknown block `{s}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub seed: u64,
    pub inversion: Inversion,
    /// Language-model weight in the training loss; needs a frozen LM when > 0.
    pub lambda: f64,
    pub block: BlockKind,
    /// Emit a checkpoint every this many epochs; 0 keeps only the final one.
    pub checkpoint_interval: usize,
    pub clip_norm: f64,
    pub embed: usize,
    pub hidden: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 10,
            learning_rate: DEFAULT_LEARNING_RATE,
            seed: 1,
            inversion: Inversion::Target,
            lambda: 0.0,
            block: BlockKind::Spb,
            checkpoint_interval: 0,
            clip_norm: DEFAULT_CLIP_NORM,
            embed: 32,
            hidden: 64,
        }
    }
}

impl TrainConfig {
    fn validate(&self, allow_zero_epochs: bool) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Input("learning rate must be positive".into()));
        }
        if self.epochs == 0 && !allow_zero_epochs {
            return Err(Error::Input("epochs must be at least 1".into()));
        }
        if !(self.clip_norm > 0.0) {
            return Err(Error::Input("clip norm must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.lambda) {
            return Err(Error::Input("lambda must lie in [0, 1]".into()));
        }
        if self.embed == 0 || self.hidden == 0 {
            return Err(Error::Input("model sizes must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    pub mean_loss: f64,
    pub wallclock_ms: u128,
}

impl fmt::Display for EpochStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}\t{:.6}\t{}", self.epoch, self.mean_loss, self.wallclock_ms)
    }
}

/// Result of a training run: final parameters, periodic checkpoints
/// (always including the last epoch) and the per-epoch log.
#[derive(Clone, Debug)]
pub struct TrainOutcome<M, T> {
    pub model: M,
    pub checkpoints: Vec<(usize, Checkpoint<T>)>,
    pub log: Vec<EpochStats>,
}

impl<M, T: Scalar> TrainOutcome<M, T> {
    pub fn final_checkpoint(&self) -> &Checkpoint<T> {
        &self.checkpoints.last().expect("at least one checkpoint").1
    }

    pub fn log_text(&self) -> String {
        self.log.iter().map(|s| format!("{s}\n")).collect()
    }
}

/// Encodes pairs for `block`, failing when a pair has the wrong kind.
pub fn encode_pairs(pairs: &[TrainingPair], vocab: &CharVocab, block: BlockKind) -> Result<Vec<EncodedPair>> {
    let want = block
        .pair_kind()
        .ok_or_else(|| Error::Input("the language model trains on lines, not pairs".into()))?;
    pairs
        .iter()
        .enumerate()
        .map(|(i, p)| {
            if p.kind != want {
                return Err(Error::Input(format!("pair {i} is {} but block {block} needs {want}", p.kind)));
            }
            Ok(vocab.encode_pair(p))
        })
        .collect()
}

/// Mean teacher-forced loss over `pairs` after applying `inversion`.
pub fn mean_loss<T: Scalar>(scorer: &Scorer<'_, T>, pairs: &[EncodedPair], inversion: Inversion) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::Input("no pairs to score".into()));
    }
    let mut total = 0.0;
    for p in pairs {
        let (s, t) = inversion.apply(&p.source, &p.target);
        total += scorer.sequence_nll(&s, &t)?.as_f64();
    }
    Ok(total / pairs.len() as f64)
}

/// Trains an encoder-decoder block. `init` continues from existing
/// weights; otherwise weights are drawn from `config.seed`. A frozen `lm`
/// is required when `config.lambda > 0`.
pub fn train<T: Scalar>(
    pairs: &[TrainingPair],
    vocab: &CharVocab,
    config: &TrainConfig,
    init: Option<Seq2Seq<T>>,
    lm: Option<&LanguageModel<T>>,
) -> Result<TrainOutcome<Seq2Seq<T>, T>> {
    config.validate(init.is_some())?;
    if pairs.is_empty() {
        return Err(Error::Input("no training pairs".into()));
    }
    let encoded = encode_pairs(pairs, vocab, config.block)?;
    let dims = Dims::new(vocab.len(), config.embed, config.hidden);
    let model = match init {
        Some(m) if m.dims() != dims => {
            return Err(Error::Checkpoint(format!(
                "initial weights are {:?}, config expects {dims:?}",
                m.dims()
            )))
        }
        Some(m) => m,
        None => Seq2Seq::init(dims, &mut Initializer::new(config.seed)),
    };
    // fail early on an unusable LM
    Scorer::new(&model, lm, T::lit(config.lambda))?;

    let inversion = config.inversion;
    let data: Vec<(Vec<usize>, Vec<usize>)> = encoded.iter().map(|p| inversion.apply(&p.source, &p.target)).collect();
    let lambda = T::lit(config.lambda);
    sgd(
        model,
        data.len(),
        config,
        |m, i| {
            let g = Scorer::new(m, lm, lambda)?.sequence_nll_grad(&data[i].0, &data[i].1)?;
            Ok((g.loss, g.model))
        },
        |m| Checkpoint::from_seq2seq(m, inversion),
    )
}

/// Continues training an SPB checkpoint on keyword-to-line pairs.
pub fn finetune_wpb<T: Scalar>(
    spb: &Checkpoint<T>,
    word_pairs: &[TrainingPair],
    vocab: &CharVocab,
    config: &TrainConfig,
) -> Result<TrainOutcome<Seq2Seq<T>, T>> {
    let expected = Dims::new(vocab.len(), config.embed, config.hidden);
    if spb.dims != expected {
        return Err(Error::Checkpoint(format!(
            "SPB checkpoint is {:?}, config expects {expected:?}",
            spb.dims
        )));
    }
    if spb.inversion != config.inversion {
        return Err(Error::Checkpoint(format!(
            "SPB checkpoint was trained with inversion={}, config says {}",
            spb.inversion, config.inversion
        )));
    }
    let model = spb.to_seq2seq()?;
    let config = TrainConfig {
        block: BlockKind::Wpb,
        ..config.clone()
    };
    if config.epochs == 0 {
        config.validate(true)?;
        encode_pairs(word_pairs, vocab, BlockKind::Wpb)?;
        return Ok(TrainOutcome {
            model,
            checkpoints: vec![(0, spb.clone())],
            log: Vec::new(),
        });
    }
    train(word_pairs, vocab, &config, Some(model), None)
}

/// Trains the language model on independent lines. With target inversion
/// the lines are reversed so the model matches tail-first decoding.
pub fn train_lm<T: Scalar>(
    lines: &[Vec<char>],
    vocab: &CharVocab,
    config: &TrainConfig,
) -> Result<TrainOutcome<LanguageModel<T>, T>> {
    config.validate(false)?;
    if lines.is_empty() {
        return Err(Error::Input("no training lines".into()));
    }
    let dims = Dims::new(vocab.len(), config.embed, config.hidden);
    let lm = LanguageModel::init(dims, &mut Initializer::new(config.seed));
    let inversion = config.inversion;
    let data: Vec<Vec<usize>> = lines
        .iter()
        .map(|l| {
            let ids = vocab.encode(l);
            if inversion == Inversion::Target {
                ids.into_iter().rev().collect()
            } else {
                ids
            }
        })
        .collect();
    sgd(
        lm,
        data.len(),
        config,
        |m, i| lm_loss_grad(m, &data[i]),
        |m| Checkpoint::from_lm(m, inversion),
    )
}

/// Negative log-likelihood of `ids` under the LM, with gradients.
pub fn lm_loss_grad<T: Scalar>(lm: &LanguageModel<T>, ids: &[usize]) -> Result<(T, LanguageModel<T>)> {
    let steps = lm.run(ids)?;
    let mut loss = T::zero();
    let mut dlogits = Vec::with_capacity(ids.len());
    for (step, &y) in steps.iter().zip(ids) {
        loss -= step.dist[y].ln();
        let mut dz = step.dist.clone();
        dz[y] -= T::one();
        dlogits.push(dz);
    }
    if !loss.is_finite() {
        return Err(Error::Numeric(format!("language-model loss is {loss}")));
    }
    let mut grads = lm.zeros_like();
    lm.backward(ids, &steps, &dlogits, &mut grads);
    Ok((loss, grads))
}

fn sgd<T, M, G, S>(mut model: M, n: usize, config: &TrainConfig, loss_grad: G, snapshot: S) -> Result<TrainOutcome<M, T>>
where
    T: Scalar,
    M: Visit<T>,
    G: Fn(&M, usize) -> Result<(T, M)>,
    S: Fn(&M) -> Checkpoint<T>,
{
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(0x5eed));
    let mut order: Vec<usize> = (0..n).collect();
    let lr = T::lit(config.learning_rate);
    let clip = T::lit(config.clip_norm);
    let mut log = Vec::with_capacity(config.epochs);
    let mut checkpoints = Vec::new();

    for epoch in 1..=config.epochs {
        let started = Instant::now();
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for (pos, &i) in order.iter().enumerate() {
            let (loss, grads) = loss_grad(&model, i).map_err(|e| match e {
                Error::Numeric(msg) => Error::Numeric(format!("epoch {epoch}, pair {i} (step {pos}): {msg}")),
                other => other,
            })?;
            let norm = grads.sq_norm().sqrt();
            if !norm.is_finite() {
                return Err(Error::Numeric(format!(
                    "epoch {epoch}, pair {i} (step {pos}): gradient norm is {norm}"
                )));
            }
            let scale = if norm > clip { clip / norm } else { T::one() };
            axpy(&mut model, &grads, -(lr * scale));
            total += loss.as_f64();
        }
        log.push(EpochStats {
            epoch,
            mean_loss: total / n as f64,
            wallclock_ms: started.elapsed().as_millis(),
        });
        let periodic = config.checkpoint_interval > 0 && epoch % config.checkpoint_interval == 0;
        if periodic || epoch == config.epochs {
            checkpoints.push((epoch, snapshot(&model)));
        }
    }
    Ok(TrainOutcome {
        model,
        checkpoints,
        log,
    })
}
