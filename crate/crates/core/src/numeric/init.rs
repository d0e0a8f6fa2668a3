use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Matrix, Scalar};

/// Half-width of the symmetric uniform initialization range.
pub const INIT_RANGE: f64 = 0.08;

/// Seeded source of initial weights, uniform in `[-INIT_RANGE, INIT_RANGE]`.
pub struct Initializer {
    rng: ChaCha8Rng,
}

impl Initializer {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn uniform<T: Scalar>(&mut self, rows: usize, cols: usize) -> Matrix<T> {
        self.uniform_in(rows, cols, INIT_RANGE)
    }

    pub fn uniform_in<T: Scalar>(&mut self, rows: usize, cols: usize, half_width: f64) -> Matrix<T> {
        let data = (0..rows * cols)
            .map(|_| T::lit(self.rng.gen_range(-half_width..=half_width)))
            .collect();
        Matrix::from_vec(rows, cols, data).expect("finite draws")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seeded_and_bounded() {
        let a: Matrix<f64> = Initializer::new(7).uniform(4, 5);
        let b: Matrix<f64> = Initializer::new(7).uniform(4, 5);
        let c: Matrix<f64> = Initializer::new(8).uniform(4, 5);
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert!(a.as_slice().iter().all(|v| v.abs() <= INIT_RANGE));
    }
}
