use super::{Matrix, Scalar};
use crate::error::{Error, Result};

/// Largest value strictly below one. Saturated activations clamp here so
/// gate values and hidden states stay inside their open intervals.
#[inline]
fn below_one<T: Scalar>() -> T {
    T::one() - T::epsilon()
}

#[inline]
pub fn sigmoid_scalar<T: Scalar>(x: T) -> T {
    let y = if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    };
    y.max(T::min_positive_value()).min(below_one())
}

#[inline]
pub fn tanh_scalar<T: Scalar>(x: T) -> T {
    let lim = below_one::<T>();
    x.tanh().max(-lim).min(lim)
}

pub fn sigmoid<T: Scalar>(x: &Matrix<T>) -> Matrix<T> {
    x.map(sigmoid_scalar)
}

pub fn tanh<T: Scalar>(x: &Matrix<T>) -> Matrix<T> {
    x.map(tanh_scalar)
}

pub fn sigmoid_in_place<T: Scalar>(v: &mut [T]) {
    v.iter_mut().for_each(|x| *x = sigmoid_scalar(*x));
}

pub fn tanh_in_place<T: Scalar>(v: &mut [T]) {
    v.iter_mut().for_each(|x| *x = tanh_scalar(*x));
}

/// Numerically stable softmax (max-subtracted).
pub fn softmax<T: Scalar>(v: &[T]) -> Result<Vec<T>> {
    if v.is_empty() {
        return Err(Error::Domain("softmax of an empty vector".into()));
    }
    Ok(softmax_unchecked(v))
}

pub(crate) fn softmax_unchecked<T: Scalar>(v: &[T]) -> Vec<T> {
    let max = v.iter().copied().fold(T::neg_infinity(), T::max);
    let mut out: Vec<T> = v.iter().map(|&x| (x - max).exp()).collect();
    let sum: T = out.iter().copied().sum();
    out.iter_mut().for_each(|x| *x /= sum);
    out
}
