use std::f64::consts::PI;

use ndarray::Array2;

/// Orthonormal DCT-II matrix of size `n x n`; `C x` transforms the columns of
/// `x` along time and `C^T` inverts it.
pub fn dct_matrix(n: usize) -> Array2<f64> {
    Array2::from_shape_fn((n, n), |(k, i)| {
        let scale = if k == 0 { (1.0 / n as f64).sqrt() } else { (2.0 / n as f64).sqrt() };
        scale * (PI * (2 * i + 1) as f64 * k as f64 / (2 * n) as f64).cos()
    })
}

/// `(N+T) x N` matrix that copies the observation and repeats its last frame
/// `T` times.
pub fn pad_last_frame(n_obs: usize, n_pred: usize) -> Array2<f64> {
    Array2::from_shape_fn((n_obs + n_pred, n_obs), |(r, c)| {
        if r.min(n_obs - 1) == c {
            1.0
        } else {
            0.0
        }
    })
}
