use crate::numeric::{sigmoid_in_place, tanh_in_place, Initializer, Matrix, Scalar};

use super::params::Visit;

/// Gated recurrent cell without biases:
///
/// ```text
/// u = σ(U_u h + W_u x)
/// r = σ(U_r h + W_r x)
/// d = tanh(U (h ∘ r) + W x)
/// h' = (1 - u) ∘ h + u ∘ d
/// ```
#[derive(Clone, Debug, PartialEq)]
pub struct GruParams<T> {
    pub u: Matrix<T>,
    pub w: Matrix<T>,
    pub u_update: Matrix<T>,
    pub w_update: Matrix<T>,
    pub u_reset: Matrix<T>,
    pub w_reset: Matrix<T>,
}

/// Activations of one cell step, kept for backpropagation and probing.
#[derive(Clone, Debug)]
pub struct GruStep<T> {
    pub h_prev: Vec<T>,
    pub x: Vec<T>,
    pub update: Vec<T>,
    pub reset: Vec<T>,
    pub candidate: Vec<T>,
    pub h: Vec<T>,
}

impl<T: Scalar> GruParams<T> {
    pub fn zeros(hidden: usize, input: usize) -> Self {
        Self {
            u: Matrix::zeros(hidden, hidden),
            w: Matrix::zeros(hidden, input),
            u_update: Matrix::zeros(hidden, hidden),
            w_update: Matrix::zeros(hidden, input),
            u_reset: Matrix::zeros(hidden, hidden),
            w_reset: Matrix::zeros(hidden, input),
        }
    }

    pub fn init(hidden: usize, input: usize, init: &mut Initializer) -> Self {
        Self {
            u: init.uniform(hidden, hidden),
            w: init.uniform(hidden, input),
            u_update: init.uniform(hidden, hidden),
            w_update: init.uniform(hidden, input),
            u_reset: init.uniform(hidden, hidden),
            w_reset: init.uniform(hidden, input),
        }
    }

    pub fn hidden(&self) -> usize {
        self.u.rows()
    }

    pub fn input(&self) -> usize {
        self.w.cols()
    }

    pub fn step(&self, h_prev: &[T], x: &[T]) -> GruStep<T> {
        let mut update = self.u_update.matvec(h_prev);
        self.w_update.matvec_acc(x, &mut update);
        sigmoid_in_place(&mut update);

        let mut reset = self.u_reset.matvec(h_prev);
        self.w_reset.matvec_acc(x, &mut reset);
        sigmoid_in_place(&mut reset);

        let gated: Vec<T> = h_prev.iter().zip(&reset).map(|(&h, &r)| h * r).collect();
        let mut candidate = self.u.matvec(&gated);
        self.w.matvec_acc(x, &mut candidate);
        tanh_in_place(&mut candidate);

        let h = h_prev
            .iter()
            .zip(&update)
            .zip(&candidate)
            .map(|((&hp, &u), &d)| (T::one() - u) * hp + u * d)
            .collect();
        GruStep {
            h_prev: h_prev.to_vec(),
            x: x.to_vec(),
            update,
            reset,
            candidate,
            h,
        }
    }

    /// Backpropagates `dh` (gradient w.r.t. `step.h`) through one step.
    /// Weight gradients accumulate into `grads`, the input gradient into
    /// `dx`; returns the gradient w.r.t. `step.h_prev`.
    pub fn backward(&self, step: &GruStep<T>, dh: &[T], grads: &mut GruParams<T>, dx: &mut [T]) -> Vec<T> {
        let one = T::one();
        let n = self.hidden();
        let mut dh_prev = vec![T::zero(); n];
        let mut d_update = vec![T::zero(); n];
        let mut d_cand_pre = vec![T::zero(); n];
        for i in 0..n {
            let (u, d, hp) = (step.update[i], step.candidate[i], step.h_prev[i]);
            dh_prev[i] = dh[i] * (one - u);
            d_update[i] = dh[i] * (d - hp) * u * (one - u);
            d_cand_pre[i] = dh[i] * u * (one - d * d);
        }

        // candidate path
        let gated: Vec<T> = step.h_prev.iter().zip(&step.reset).map(|(&h, &r)| h * r).collect();
        grads.u.add_outer(&d_cand_pre, &gated);
        grads.w.add_outer(&d_cand_pre, &step.x);
        self.w.matvec_t_acc(&d_cand_pre, dx);
        let mut d_gated = vec![T::zero(); n];
        self.u.matvec_t_acc(&d_cand_pre, &mut d_gated);

        let mut d_reset = vec![T::zero(); n];
        for i in 0..n {
            let r = step.reset[i];
            dh_prev[i] += d_gated[i] * r;
            d_reset[i] = d_gated[i] * step.h_prev[i] * r * (one - r);
        }

        grads.u_reset.add_outer(&d_reset, &step.h_prev);
        grads.w_reset.add_outer(&d_reset, &step.x);
        self.u_reset.matvec_t_acc(&d_reset, &mut dh_prev);
        self.w_reset.matvec_t_acc(&d_reset, dx);

        grads.u_update.add_outer(&d_update, &step.h_prev);
        grads.w_update.add_outer(&d_update, &step.x);
        self.u_update.matvec_t_acc(&d_update, &mut dh_prev);
        self.w_update.matvec_t_acc(&d_update, dx);

        dh_prev
    }
}

impl<T: Scalar> Visit<T> for GruParams<T> {
    fn visit<'a>(&'a self, prefix: &str, f: &mut dyn FnMut(String, &'a Matrix<T>)) {
        f(format!("{prefix}.u"), &self.u);
        f(format!("{prefix}.u_reset"), &self.u_reset);
        f(format!("{prefix}.u_update"), &self.u_update);
        f(format!("{prefix}.w"), &self.w);
        f(format!("{prefix}.w_reset"), &self.w_reset);
        f(format!("{prefix}.w_update"), &self.w_update);
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(String, &mut Matrix<T>)) {
        f(format!("{prefix}.u"), &mut self.u);
        f(format!("{prefix}.u_reset"), &mut self.u_reset);
        f(format!("{prefix}.u_update"), &mut self.u_update);
        f(format!("{prefix}.w"), &mut self.w);
        f(format!("{prefix}.w_reset"), &mut self.w_reset);
        f(format!("{prefix}.w_update"), &mut self.w_update);
    }
}
