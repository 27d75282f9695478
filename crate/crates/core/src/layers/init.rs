use crate::autodiff::Tensor;
use crate::rng::SeededRng;
use crate::scalar::Scalar;

/// Glorot-uniform bound `√(6 / (fan_in + fan_out))`.
pub fn glorot_bound(fan_in: usize, fan_out: usize) -> f64 {
    (6.0 / (fan_in + fan_out) as f64).sqrt()
}

/// `[rows, cols]` matrix drawn from `U(−b, b)` with the Glorot bound for
/// `fan_in = cols`, `fan_out = rows`.
pub fn glorot_matrix<T: Scalar>(rows: usize, cols: usize, rng: &mut SeededRng) -> Tensor<T> {
    let bound = glorot_bound(cols, rows);
    let data = (0..rows * cols)
        .map(|_| T::of(rng.uniform_in(-bound, bound)))
        .collect();
    Tensor::new(vec![rows, cols], data).expect("shape matches data")
}

/// Vector treated as a `[1, n]` projection for the Glorot bound.
pub fn glorot_vector<T: Scalar>(n: usize, rng: &mut SeededRng) -> Tensor<T> {
    glorot_matrix::<T>(1, n, rng)
        .reshape(vec![n])
        .expect("same length")
}
