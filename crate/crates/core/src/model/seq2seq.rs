use crate::corpus::BOS;
use crate::error::{Error, Result};
use crate::numeric::{dot, softmax_unchecked, tanh_scalar, Initializer, Matrix, Scalar};

use super::gru::{GruParams, GruStep};
use super::params::Visit;

/// Model sizes. The attention projection width equals `hidden`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Dims {
    pub vocab: usize,
    pub embed: usize,
    pub hidden: usize,
}

impl Dims {
    pub fn new(vocab: usize, embed: usize, hidden: usize) -> Self {
        Self { vocab, embed, hidden }
    }

    /// Width of `[s; e(y); c]`, the output layer's input.
    pub fn output_features(&self) -> usize {
        self.hidden + self.embed + 2 * self.hidden
    }
}

/// Bidirectional gated encoder, additive attention and gated decoder.
#[derive(Clone, Debug, PartialEq)]
pub struct Seq2Seq<T> {
    /// Character embeddings shared by encoder inputs and decoder feedback.
    pub embedding: Matrix<T>,
    pub enc_forward: GruParams<T>,
    pub enc_backward: GruParams<T>,
    /// `s_0 = tanh(init_w · h'_1 + init_b)`.
    pub init_w: Matrix<T>,
    pub init_b: Matrix<T>,
    /// `v_{t,i} = v_aᵀ tanh(W_a s_{t-1} + U_a g_i)`.
    pub attn_w: Matrix<T>,
    pub attn_u: Matrix<T>,
    pub attn_v: Matrix<T>,
    /// Decoder cell; its input is `[e(y_{t-1}); c_t]`.
    pub decoder: GruParams<T>,
    /// Affine map of `[s_t; e(y_{t-1}); c_t]` to vocabulary logits.
    pub out_w: Matrix<T>,
    pub out_b: Matrix<T>,
}

/// Encoder output: `g_t = [h_t; h'_t]` for every input position.
#[derive(Clone, Debug, PartialEq)]
pub struct EncoderStates<T> {
    pub g: Vec<Vec<T>>,
}

impl<T: Scalar> EncoderStates<T> {
    pub fn len(&self) -> usize {
        self.g.len()
    }

    pub fn is_empty(&self) -> bool {
        self.g.is_empty()
    }
}

/// Encoder output plus every cell activation, indexed by input position.
#[derive(Clone, Debug)]
pub struct EncoderTrace<T> {
    pub states: EncoderStates<T>,
    pub forward: Vec<GruStep<T>>,
    /// `backward[t]` produced `h'_t` from `h'_{t+1}`.
    pub backward: Vec<GruStep<T>>,
}

/// One attention read.
#[derive(Clone, Debug)]
pub struct Attention<T> {
    pub context: Vec<T>,
    pub alpha: Vec<T>,
    pub scores: Vec<T>,
    /// `tanh(W_a s + U_a g_i)` per position.
    pub(crate) activations: Vec<Vec<T>>,
}

/// `U_a g_i` for every position; independent of the decoder state.
pub type AttentionKeys<T> = Vec<Vec<T>>;

/// Output of one decoder step.
#[derive(Clone, Debug)]
pub struct DecoderStep<T> {
    pub state: Vec<T>,
    pub dist: Vec<T>,
    pub(crate) cell: GruStep<T>,
    pub(crate) features: Vec<T>,
}

impl<T: Scalar> Seq2Seq<T> {
    pub fn zeros(dims: Dims) -> Self {
        let Dims { vocab, embed, hidden } = dims;
        Self {
            embedding: Matrix::zeros(vocab, embed),
            enc_forward: GruParams::zeros(hidden, embed),
            enc_backward: GruParams::zeros(hidden, embed),
            init_w: Matrix::zeros(hidden, hidden),
            init_b: Matrix::zeros(hidden, 1),
            attn_w: Matrix::zeros(hidden, hidden),
            attn_u: Matrix::zeros(hidden, 2 * hidden),
            attn_v: Matrix::zeros(hidden, 1),
            decoder: GruParams::zeros(hidden, embed + 2 * hidden),
            out_w: Matrix::zeros(vocab, dims.output_features()),
            out_b: Matrix::zeros(vocab, 1),
        }
    }

    /// Uniform random initialization from `init`, in visiting order.
    pub fn init(dims: Dims, init: &mut Initializer) -> Self {
        let mut m = Self::zeros(dims);
        m.visit_mut("", &mut |_, w| *w = init.uniform(w.rows(), w.cols()));
        m
    }

    pub fn dims(&self) -> Dims {
        Dims {
            vocab: self.embedding.rows(),
            embed: self.embedding.cols(),
            hidden: self.init_w.rows(),
        }
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.dims())
    }

    pub(crate) fn check_ids(&self, ids: &[usize], what: &str) -> Result<()> {
        if ids.is_empty() {
            return Err(Error::Domain(format!("{what} is empty")));
        }
        let v = self.dims().vocab;
        if let Some(&bad) = ids.iter().find(|&&i| i >= v) {
            return Err(Error::Domain(format!("{what} id {bad} outside vocabulary of {v}")));
        }
        Ok(())
    }

    pub fn encode(&self, ids: &[usize]) -> Result<EncoderStates<T>> {
        Ok(self.encode_traced(ids)?.states)
    }

    /// Runs both encoder directions, keeping activations.
    pub fn encode_traced(&self, ids: &[usize]) -> Result<EncoderTrace<T>> {
        self.check_ids(ids, "source")?;
        let hidden = self.dims().hidden;
        let zero = vec![T::zero(); hidden];

        let mut forward: Vec<GruStep<T>> = Vec::with_capacity(ids.len());
        for &id in ids {
            let prev = forward.last().map_or(&zero, |s| &s.h);
            let step = self.enc_forward.step(prev, self.embedding.row(id));
            forward.push(step);
        }

        let mut backward: Vec<GruStep<T>> = Vec::with_capacity(ids.len());
        for &id in ids.iter().rev() {
            let prev = backward.last().map_or(&zero, |s| &s.h);
            let step = self.enc_backward.step(prev, self.embedding.row(id));
            backward.push(step);
        }
        backward.reverse();

        let g = forward
            .iter()
            .zip(&backward)
            .map(|(f, b)| f.h.iter().chain(&b.h).copied().collect())
            .collect();
        Ok(EncoderTrace {
            states: EncoderStates { g },
            forward,
            backward,
        })
    }

    /// Decoder state before the first step, from the backward state at
    /// the first input position.
    pub fn initial_state(&self, enc: &EncoderStates<T>) -> Vec<T> {
        let h = self.dims().hidden;
        let mut s = self.init_w.matvec(&enc.g[0][h..]);
        for (v, &b) in s.iter_mut().zip(self.init_b.as_slice()) {
            *v = tanh_scalar(*v + b);
        }
        s
    }

    pub fn attention_keys(&self, enc: &EncoderStates<T>) -> AttentionKeys<T> {
        enc.g.iter().map(|g| self.attn_u.matvec(g)).collect()
    }

    pub fn attend(&self, s_prev: &[T], enc: &EncoderStates<T>) -> Attention<T> {
        let keys = self.attention_keys(enc);
        self.attend_with_keys(s_prev, enc, &keys)
    }

    pub fn attend_with_keys(&self, s_prev: &[T], enc: &EncoderStates<T>, keys: &AttentionKeys<T>) -> Attention<T> {
        let query = self.attn_w.matvec(s_prev);
        let activations: Vec<Vec<T>> = keys
            .iter()
            .map(|k| k.iter().zip(&query).map(|(&a, &b)| tanh_scalar(a + b)).collect())
            .collect();
        let scores: Vec<T> = activations.iter().map(|a| dot(self.attn_v.as_slice(), a)).collect();
        let alpha = softmax_unchecked(&scores);
        let mut context = vec![T::zero(); enc.g[0].len()];
        for (a, g) in alpha.iter().zip(&enc.g) {
            for (c, &x) in context.iter_mut().zip(g) {
                *c += *a * x;
            }
        }
        Attention {
            context,
            alpha,
            scores,
            activations,
        }
    }

    /// One decoder step: gated update of `s` from `[e(y_prev); c]`, then a
    /// softmax over the affine map of `[s; e(y_prev); c]`.
    pub fn decode_step(&self, s_prev: &[T], y_prev: usize, context: &[T]) -> DecoderStep<T> {
        let emb = self.embedding.row(y_prev);
        let input: Vec<T> = emb.iter().chain(context).copied().collect();
        let cell = self.decoder.step(s_prev, &input);
        let features: Vec<T> = cell.h.iter().chain(emb).chain(context).copied().collect();
        let mut logits = self.out_w.matvec(&features);
        for (z, &b) in logits.iter_mut().zip(self.out_b.as_slice()) {
            *z += b;
        }
        DecoderStep {
            state: cell.h.clone(),
            dist: softmax_unchecked(&logits),
            cell,
            features,
        }
    }

    /// Teacher-forced pass recording every step, with `BOS` as the first
    /// decoder input.
    pub fn teacher_forced(&self, source: &[usize], target: &[usize]) -> Result<TeacherForced<T>> {
        self.check_ids(target, "target")?;
        let encoder = self.encode_traced(source)?;
        let keys = self.attention_keys(&encoder.states);
        let s0 = self.initial_state(&encoder.states);
        let mut steps: Vec<(Attention<T>, DecoderStep<T>)> = Vec::with_capacity(target.len());
        let mut y_prev = BOS;
        for &y in target {
            let s_prev = steps.last().map_or(&s0, |(_, d)| &d.state);
            let att = self.attend_with_keys(s_prev, &encoder.states, &keys);
            let dec = self.decode_step(s_prev, y_prev, &att.context);
            steps.push((att, dec));
            y_prev = y;
        }
        Ok(TeacherForced { encoder, s0, steps })
    }
}

/// Full record of a teacher-forced pass.
#[derive(Clone, Debug)]
pub struct TeacherForced<T> {
    pub encoder: EncoderTrace<T>,
    pub s0: Vec<T>,
    pub steps: Vec<(Attention<T>, DecoderStep<T>)>,
}

impl<T: Scalar> TeacherForced<T> {
    /// Decoder state before step `t`.
    pub fn state_before(&self, t: usize) -> &[T] {
        if t == 0 {
            &self.s0
        } else {
            &self.steps[t - 1].1.state
        }
    }
}

impl<T: Scalar> Visit<T> for Seq2Seq<T> {
    fn visit<'a>(&'a self, prefix: &str, f: &mut dyn FnMut(String, &'a Matrix<T>)) {
        f(format!("{prefix}attn.u_a"), &self.attn_u);
        f(format!("{prefix}attn.v_a"), &self.attn_v);
        f(format!("{prefix}attn.w_a"), &self.attn_w);
        self.decoder.visit(&format!("{prefix}dec"), f);
        f(format!("{prefix}dec_init.b"), &self.init_b);
        f(format!("{prefix}dec_init.w"), &self.init_w);
        f(format!("{prefix}embedding"), &self.embedding);
        self.enc_backward.visit(&format!("{prefix}enc_bwd"), f);
        self.enc_forward.visit(&format!("{prefix}enc_fwd"), f);
        f(format!("{prefix}out.b"), &self.out_b);
        f(format!("{prefix}out.w"), &self.out_w);
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(String, &mut Matrix<T>)) {
        f(format!("{prefix}attn.u_a"), &mut self.attn_u);
        f(format!("{prefix}attn.v_a"), &mut self.attn_v);
        f(format!("{prefix}attn.w_a"), &mut self.attn_w);
        self.decoder.visit_mut(&format!("{prefix}dec"), f);
        f(format!("{prefix}dec_init.b"), &mut self.init_b);
        f(format!("{prefix}dec_init.w"), &mut self.init_w);
        f(format!("{prefix}embedding"), &mut self.embedding);
        self.enc_backward.visit_mut(&format!("{prefix}enc_bwd"), f);
        self.enc_forward.visit_mut(&format!("{prefix}enc_fwd"), f);
        f(format!("{prefix}out.b"), &mut self.out_b);
        f(format!("{prefix}out.w"), &mut self.out_w);
    }
}
