use crate::corpus::BOS;
use crate::error::{Error, Result};
use crate::numeric::{softmax_unchecked, Initializer, Matrix, Scalar};

use super::gru::{GruParams, GruStep};
use super::params::Visit;
use super::seq2seq::Dims;

/// Character-level recurrent language model: same gated cell as the
/// encoder, its own embeddings, softmax over an affine map of the state.
#[derive(Clone, Debug, PartialEq)]
pub struct LanguageModel<T> {
    pub embedding: Matrix<T>,
    pub cell: GruParams<T>,
    pub out_w: Matrix<T>,
    pub out_b: Matrix<T>,
}

#[derive(Clone, Debug)]
pub struct LmStep<T> {
    pub state: Vec<T>,
    pub dist: Vec<T>,
    pub(crate) cell: GruStep<T>,
}

impl<T: Scalar> LanguageModel<T> {
    pub fn zeros(dims: Dims) -> Self {
        Self {
            embedding: Matrix::zeros(dims.vocab, dims.embed),
            cell: GruParams::zeros(dims.hidden, dims.embed),
            out_w: Matrix::zeros(dims.vocab, dims.hidden),
            out_b: Matrix::zeros(dims.vocab, 1),
        }
    }

    pub fn init(dims: Dims, init: &mut Initializer) -> Self {
        let mut m = Self::zeros(dims);
        m.visit_mut("", &mut |_, w| *w = init.uniform(w.rows(), w.cols()));
        m
    }

    pub fn dims(&self) -> Dims {
        Dims::new(self.embedding.rows(), self.embedding.cols(), self.cell.hidden())
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.dims())
    }

    pub fn initial_state(&self) -> Vec<T> {
        vec![T::zero(); self.cell.hidden()]
    }

    /// Advances the state with `y_prev` and returns the next-character
    /// distribution.
    pub fn step(&self, state: &[T], y_prev: usize) -> LmStep<T> {
        let cell = self.cell.step(state, self.embedding.row(y_prev));
        let mut logits = self.out_w.matvec(&cell.h);
        for (z, &b) in logits.iter_mut().zip(self.out_b.as_slice()) {
            *z += b;
        }
        LmStep {
            state: cell.h.clone(),
            dist: softmax_unchecked(&logits),
            cell,
        }
    }

    /// Teacher-forced steps over `ids`, starting from `BOS`.
    pub fn run(&self, ids: &[usize]) -> Result<Vec<LmStep<T>>> {
        let v = self.dims().vocab;
        if let Some(&bad) = ids.iter().find(|&&i| i >= v) {
            return Err(Error::Domain(format!("id {bad} outside vocabulary of {v}")));
        }
        let mut out: Vec<LmStep<T>> = Vec::with_capacity(ids.len());
        let zero = self.initial_state();
        let mut prev = BOS;
        for &y in ids {
            let state = out.last().map_or(&zero, |s| &s.state);
            out.push(self.step(state, prev));
            prev = y;
        }
        Ok(out)
    }

    /// Backpropagates per-step logit gradients through the whole run.
    pub(crate) fn backward(&self, ids: &[usize], steps: &[LmStep<T>], dlogits: &[Vec<T>], grads: &mut LanguageModel<T>) {
        let hidden = self.cell.hidden();
        let embed = self.embedding.cols();
        let mut carry = vec![T::zero(); hidden];
        for t in (0..steps.len()).rev() {
            let step = &steps[t];
            let dz = &dlogits[t];
            grads.out_w.add_outer(dz, &step.state);
            for (b, &g) in grads.out_b.as_mut_slice().iter_mut().zip(dz) {
                *b += g;
            }
            let mut dh = carry;
            self.out_w.matvec_t_acc(dz, &mut dh);
            let mut dx = vec![T::zero(); embed];
            carry = self.cell.backward(&step.cell, &dh, &mut grads.cell, &mut dx);
            let y_prev = if t == 0 { BOS } else { ids[t - 1] };
            for (e, &g) in grads.embedding.row_mut(y_prev).iter_mut().zip(&dx) {
                *e += g;
            }
        }
    }
}

impl<T: Scalar> Visit<T> for LanguageModel<T> {
    fn visit<'a>(&'a self, prefix: &str, f: &mut dyn FnMut(String, &'a Matrix<T>)) {
        self.cell.visit(&format!("{prefix}lm.cell"), f);
        f(format!("{prefix}lm.embedding"), &self.embedding);
        f(format!("{prefix}lm.out.b"), &self.out_b);
        f(format!("{prefix}lm.out.w"), &self.out_w);
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(String, &mut Matrix<T>)) {
        self.cell.visit_mut(&format!("{prefix}lm.cell"), f);
        f(format!("{prefix}lm.embedding"), &mut self.embedding);
        f(format!("{prefix}lm.out.b"), &mut self.out_b);
        f(format!("{prefix}lm.out.w"), &mut self.out_w);
    }
}
