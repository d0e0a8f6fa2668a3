//! Bidirectional gated encoder, additive attention, gated decoder,
//! recurrent language model and their interpolation.

mod checkpoint;
mod gru;
mod lm;
mod loss;
mod params;
mod seq2seq;

use std::fmt;
use std::str::FromStr;

pub use checkpoint::{Checkpoint, ModelKind, MAGIC, VERSION};
pub use gru::{GruParams, GruStep};
pub use lm::{LanguageModel, LmStep};
pub use loss::{mix, Gradients, Scorer};
pub use params::{axpy, Visit};
pub use seq2seq::{
    Attention, AttentionKeys, DecoderStep, Dims, EncoderStates, EncoderTrace, Seq2Seq,
    TeacherForced,
};

use crate::error::{Error, Result};
use crate::numeric::Scalar;

/// Which side of each pair is reversed before training.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum Inversion {
    #[default]
    None,
    Source,
    Target,
}

impl Inversion {
    pub(crate) fn code(self) -> u8 {
        match self {
            Inversion::None => 0,
            Inversion::Source => 1,
            Inversion::Target => 2,
        }
    }

    pub(crate) fn from_code(c: u8) -> Option<Self> {
        match c {
            0 => Some(Inversion::None),
            1 => Some(Inversion::Source),
            2 => Some(Inversion::Target),
            _ => None,
        }
    }

    /// Applies the inversion to an id pair.
    pub fn apply(self, source: &[usize], target: &[usize]) -> (Vec<usize>, Vec<usize>) {
        let rev = |v: &[usize]| v.iter().rev().copied().collect::<Vec<_>>();
        match self {
            Inversion::None => (source.to_vec(), target.to_vec()),
            Inversion::Source => (rev(source), target.to_vec()),
            Inversion::Target => (source.to_vec(), rev(target)),
        }
    }
}

impl fmt::Display for Inversion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Inversion::None => "none",
            Inversion::Source => "source",
            Inversion::Target => "target",
        })
    }
}

impl FromStr for Inversion {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Inversion::None),
            "source" | "src" => Ok(Inversion::Source),
            "target" | "trg" => Ok(Inversion::Target),
            other => Err(Error::Input(format!("unknown inversion mode `{other}`"))),
        }
    }
}

/// Teacher-forced negative log-likelihood of `target` given `source` under
/// the interpolated distribution.
pub fn sequence_nll<T: Scalar>(
    model: &Seq2Seq<T>,
    lm: Option<&LanguageModel<T>>,
    lambda: T,
    source: &[usize],
    target: &[usize],
) -> Result<T> {
    Scorer::new(model, lm, lambda)?.sequence_nll(source, target)
}

/// Per-position attention weights; rows are decoder steps.
#[derive(Clone, Debug, PartialEq)]
pub struct AttentionTrace<T> {
    pub alphas: Vec<Vec<T>>,
}

impl<T: Scalar> AttentionTrace<T> {
    pub fn rows(&self) -> usize {
        self.alphas.len()
    }

    pub fn cols(&self) -> usize {
        self.alphas.first().map_or(0, Vec::len)
    }
}
