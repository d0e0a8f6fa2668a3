use crate::corpus::BOS;
use crate::error::{Error, Result};
use crate::numeric::Scalar;

use super::lm::{LanguageModel, LmStep};
use super::seq2seq::{Attention, Seq2Seq, TeacherForced};

/// `(1 - λ)·dec + λ·lm`.
pub fn mix<T: Scalar>(dec: &[T], lm: &[T], lambda: T) -> Result<Vec<T>> {
    check_lambda(lambda)?;
    if dec.len() != lm.len() {
        return Err(Error::Domain(format!(
            "distributions differ in length ({} vs {})",
            dec.len(),
            lm.len()
        )));
    }
    Ok(mix_unchecked(dec, lm, lambda))
}

pub(crate) fn mix_unchecked<T: Scalar>(dec: &[T], lm: &[T], lambda: T) -> Vec<T> {
    let keep = T::one() - lambda;
    dec.iter().zip(lm).map(|(&d, &l)| keep * d + lambda * l).collect()
}

pub(crate) fn check_lambda<T: Scalar>(lambda: T) -> Result<()> {
    if lambda >= T::zero() && lambda <= T::one() {
        Ok(())
    } else {
        Err(Error::Domain(format!("interpolation weight {lambda} outside [0, 1]")))
    }
}

/// Decoder plus optional language model, interpolated with weight `lambda`.
#[derive(Clone, Copy, Debug)]
pub struct Scorer<'a, T> {
    pub model: &'a Seq2Seq<T>,
    pub lm: Option<&'a LanguageModel<T>>,
    pub lambda: T,
}

impl<'a, T: Scalar> Scorer<'a, T> {
    pub fn new(model: &'a Seq2Seq<T>, lm: Option<&'a LanguageModel<T>>, lambda: T) -> Result<Self> {
        check_lambda(lambda)?;
        if lambda > T::zero() {
            let lm = lm.ok_or_else(|| Error::Domain("interpolation weight > 0 needs a language model".into()))?;
            if lm.dims().vocab != model.dims().vocab {
                return Err(Error::Checkpoint(format!(
                    "language model vocabulary {} differs from block vocabulary {}",
                    lm.dims().vocab,
                    model.dims().vocab
                )));
            }
        }
        Ok(Self { model, lm, lambda })
    }

    pub fn decoder_only(model: &'a Seq2Seq<T>) -> Self {
        Self {
            model,
            lm: None,
            lambda: T::zero(),
        }
    }

    fn active_lm(&self) -> Option<&'a LanguageModel<T>> {
        self.lm.filter(|_| self.lambda > T::zero())
    }

    /// Teacher-forced negative log-likelihood `-Σ log P(y_t)`.
    pub fn sequence_nll(&self, source: &[usize], target: &[usize]) -> Result<T> {
        Ok(self.forward(source, target)?.loss)
    }

    /// Loss together with gradients for the decoder and (when active) the
    /// language model.
    pub fn sequence_nll_grad(&self, source: &[usize], target: &[usize]) -> Result<Gradients<T>> {
        let fwd = self.forward(source, target)?;
        let model = self.model;
        let dims = model.dims();
        let (hidden, embed) = (dims.hidden, dims.embed);
        let mut grads = model.zeros_like();
        let mut lm_grads = self.active_lm().map(LanguageModel::zeros_like);
        let mut lm_dlogits = Vec::with_capacity(target.len());

        let enc = &fwd.tf.encoder;
        let keys_len = enc.states.len();
        let mut dg: Vec<Vec<T>> = vec![vec![T::zero(); 2 * hidden]; keys_len];
        let mut ds_next = vec![T::zero(); hidden];

        for t in (0..target.len()).rev() {
            let y = target[t];
            let y_prev = if t == 0 { BOS } else { target[t - 1] };
            let (att, dec) = &fwd.tf.steps[t];
            let (p_dec, p_lm, p) = fwd.probs[t];
            let w_dec = (T::one() - self.lambda) * p_dec / p;

            let mut dz: Vec<T> = dec.dist.iter().map(|&q| w_dec * q).collect();
            dz[y] -= w_dec;
            grads.out_w.add_outer(&dz, &dec.features);
            for (b, &g) in grads.out_b.as_mut_slice().iter_mut().zip(&dz) {
                *b += g;
            }
            let mut dfeat = vec![T::zero(); dims.output_features()];
            model.out_w.matvec_t_acc(&dz, &mut dfeat);

            let mut ds: Vec<T> = ds_next.iter().zip(&dfeat[..hidden]).map(|(&a, &b)| a + b).collect();
            let mut de_prev: Vec<T> = dfeat[hidden..hidden + embed].to_vec();
            let mut dc: Vec<T> = dfeat[hidden + embed..].to_vec();

            let mut dx = vec![T::zero(); embed + 2 * hidden];
            let dh_prev = model.decoder.backward(&dec.cell, &ds, &mut grads.decoder, &mut dx);
            for (a, &b) in de_prev.iter_mut().zip(&dx[..embed]) {
                *a += b;
            }
            for (a, &b) in dc.iter_mut().zip(&dx[embed..]) {
                *a += b;
            }
            for (e, &g) in grads.embedding.row_mut(y_prev).iter_mut().zip(&de_prev) {
                *e += g;
            }

            let s_prev = fwd.tf.state_before(t);
            let ds_att = attention_backward(model, att, s_prev, &enc.states.g, &dc, &mut grads, &mut dg);
            ds = dh_prev;
            for (a, &b) in ds.iter_mut().zip(&ds_att) {
                *a += b;
            }
            ds_next = ds;

            if let Some(lm_steps) = &fwd.lm_steps {
                let w_lm = self.lambda * p_lm / p;
                let mut dz: Vec<T> = lm_steps[t].dist.iter().map(|&q| w_lm * q).collect();
                dz[y] -= w_lm;
                lm_dlogits.push(dz);
            }
        }

        // s_0 = tanh(init_w · h'_1 + init_b)
        let s0 = &fwd.tf.s0;
        let da: Vec<T> = ds_next.iter().zip(s0).map(|(&d, &s)| d * (T::one() - s * s)).collect();
        grads.init_w.add_outer(&da, &enc.states.g[0][hidden..]);
        for (b, &g) in grads.init_b.as_mut_slice().iter_mut().zip(&da) {
            *b += g;
        }
        model.init_w.matvec_t_acc(&da, &mut dg[0][hidden..]);

        // forward encoder, right to left
        let mut carry = vec![T::zero(); hidden];
        for t in (0..keys_len).rev() {
            let dh: Vec<T> = dg[t][..hidden].iter().zip(&carry).map(|(&a, &b)| a + b).collect();
            let mut dx = vec![T::zero(); embed];
            carry = model.enc_forward.backward(&enc.forward[t], &dh, &mut grads.enc_forward, &mut dx);
            for (e, &g) in grads.embedding.row_mut(source[t]).iter_mut().zip(&dx) {
                *e += g;
            }
        }
        // backward encoder, left to right
        let mut carry = vec![T::zero(); hidden];
        for t in 0..keys_len {
            let dh: Vec<T> = dg[t][hidden..].iter().zip(&carry).map(|(&a, &b)| a + b).collect();
            let mut dx = vec![T::zero(); embed];
            carry = model.enc_backward.backward(&enc.backward[t], &dh, &mut grads.enc_backward, &mut dx);
            for (e, &g) in grads.embedding.row_mut(source[t]).iter_mut().zip(&dx) {
                *e += g;
            }
        }

        if let (Some(lm), Some(lm_grads), Some(steps)) = (self.active_lm(), lm_grads.as_mut(), &fwd.lm_steps) {
            lm_dlogits.reverse();
            lm.backward(target, steps, &lm_dlogits, lm_grads);
        }

        Ok(Gradients {
            loss: fwd.loss,
            model: grads,
            lm: lm_grads,
        })
    }

    fn forward(&self, source: &[usize], target: &[usize]) -> Result<Forward<T>> {
        let tf = self.model.teacher_forced(source, target)?;
        let lm_steps = self.active_lm().map(|lm| lm.run(target)).transpose()?;
        let mut loss = T::zero();
        let mut probs = Vec::with_capacity(target.len());
        for (t, &y) in target.iter().enumerate() {
            let p_dec = tf.steps[t].1.dist[y];
            let p_lm = lm_steps.as_ref().map_or(T::zero(), |s| s[t].dist[y]);
            let p = (T::one() - self.lambda) * p_dec + self.lambda * p_lm;
            loss -= p.ln();
            probs.push((p_dec, p_lm, p));
        }
        if !loss.is_finite() {
            return Err(Error::Numeric(format!("sequence loss is {loss}")));
        }
        Ok(Forward {
            tf,
            lm_steps,
            probs,
            loss,
        })
    }
}

struct Forward<T> {
    tf: TeacherForced<T>,
    lm_steps: Option<Vec<LmStep<T>>>,
    /// Per step: decoder probability, LM probability, mixed probability of
    /// the gold character.
    probs: Vec<(T, T, T)>,
    loss: T,
}

/// Loss and parameter gradients for one sequence pair.
#[derive(Clone, Debug)]
pub struct Gradients<T> {
    pub loss: T,
    pub model: Seq2Seq<T>,
    pub lm: Option<LanguageModel<T>>,
}

/// Gradient of the attention read w.r.t. its parameters, the encoder states
/// (accumulated into `dg`) and the previous decoder state (returned).
fn attention_backward<T: Scalar>(
    model: &Seq2Seq<T>,
    att: &Attention<T>,
    s_prev: &[T],
    g: &[Vec<T>],
    dc: &[T],
    grads: &mut Seq2Seq<T>,
    dg: &mut [Vec<T>],
) -> Vec<T> {
    let one = T::one();
    let width = model.attn_v.rows();
    let dalpha: Vec<T> = g.iter().map(|gi| crate::numeric::dot(dc, gi)).collect();
    let expect: T = att.alpha.iter().zip(&dalpha).map(|(&a, &d)| a * d).sum();
    let mut dpre_sum = vec![T::zero(); width];
    for (i, gi) in g.iter().enumerate() {
        let a = att.alpha[i];
        for (d, &c) in dg[i].iter_mut().zip(dc) {
            *d += a * c;
        }
        let dv = a * (dalpha[i] - expect);
        let act = &att.activations[i];
        for (gv, &x) in grads.attn_v.as_mut_slice().iter_mut().zip(act) {
            *gv += dv * x;
        }
        let dpre: Vec<T> = act
            .iter()
            .zip(model.attn_v.as_slice())
            .map(|(&x, &v)| dv * v * (one - x * x))
            .collect();
        grads.attn_u.add_outer(&dpre, gi);
        model.attn_u.matvec_t_acc(&dpre, &mut dg[i]);
        for (s, &d) in dpre_sum.iter_mut().zip(&dpre) {
            *s += d;
        }
    }
    grads.attn_w.add_outer(&dpre_sum, s_prev);
    let mut ds = vec![T::zero(); s_prev.len()];
    model.attn_w.matvec_t_acc(&dpre_sum, &mut ds);
    ds
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Dims, Visit};
    use crate::numeric::{grad_check, Initializer, ParamStore};

    #[test]
    fn mix_limits_and_domain() {
        let d = [0.2, 0.5, 0.3];
        let l = [0.6, 0.1, 0.3];
        assert_eq!(mix(&d, &l, 0.0).unwrap(), d);
        assert_eq!(mix(&d, &l, 1.0).unwrap(), l);
        let m = mix(&d, &l, 0.3).unwrap();
        assert!((m.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(mix(&d, &l, 1.5).is_err());
        assert!(mix(&d, &l, -0.1).is_err());
    }

    #[test]
    fn uniform_model_loss_is_length_times_log_vocab() {
        let mut m = Seq2Seq::<f64>::init(Dims::new(10, 4, 3), &mut Initializer::new(1));
        m.out_w.fill(0.0);
        m.out_b.fill(0.0);
        let loss = Scorer::decoder_only(&m).sequence_nll(&[4, 5, 6], &[7, 8, 9, 4, 5]).unwrap();
        assert!((loss - 5.0 * 10f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn lambda_needs_language_model() {
        let m = Seq2Seq::<f64>::zeros(Dims::new(6, 2, 2));
        assert!(Scorer::new(&m, None, 0.2).is_err());
        assert!(Scorer::new(&m, None, 0.0).is_ok());
    }

    #[test]
    fn mixed_loss_gradient_small_model() {
        let dims = Dims::new(9, 3, 3);
        let mut init = Initializer::new(21);
        let model = Seq2Seq::<f64>::init(dims, &mut init);
        let lm = LanguageModel::<f64>::init(dims, &mut init);
        let (src, tgt) = ([4usize, 7, 5], [6usize, 8, 4, 5]);

        let mut store = model.to_store("");
        for (k, v) in lm.to_store("") {
            store.insert(k, v).unwrap();
        }
        let loss = |ps: &ParamStore<f64>| {
            let mut m = Seq2Seq::zeros(dims);
            m.load_store("", ps)?;
            let mut l = LanguageModel::zeros(dims);
            l.load_store("", ps)?;
            let g = Scorer::new(&m, Some(&l), 0.35)?.sequence_nll_grad(&src, &tgt)?;
            let mut out = g.model.to_store("");
            for (k, v) in g.lm.unwrap().to_store("") {
                out.insert(k, v)?;
            }
            Ok((g.loss, out))
        };
        let r = grad_check(loss, &store, 1e-5).unwrap();
        assert!(r.max_relative_error < 1e-4, "{r:?}");
    }
}
