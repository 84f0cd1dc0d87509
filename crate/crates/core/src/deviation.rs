//! Velocity-space deviation between the newly observed frames and the
//! previous round's prediction.
//!
//! Arrays are `(T-1) x K`, frame-major like every other pose array in the
//! crate.

use ndarray::{s, Array2, ArrayView2};

use crate::error::{dim_err, Result};
use crate::rounds::RoundLayout;

#[derive(Debug, Clone, PartialEq)]
pub struct Deviation {
    pub values: Array2<f64>,
    /// Round that produced the prediction, 0 when there is none.
    pub round_origin: usize,
}

/// Row `t` of the result is `seq[t+1] - seq[t]`.
pub fn velocity(seq: ArrayView2<f64>) -> Result<Array2<f64>> {
    let m = seq.nrows();
    if m < 2 {
        return dim_err(format!("velocity needs at least 2 frames, got {m}"));
    }
    Ok(&seq.slice(s![1.., ..]) - &seq.slice(s![..m - 1, ..]))
}

/// `v(obs_tail) - v(prev_pred)`, where `prev_pred` came from round
/// `prev_round` and `obs_tail` is the last `T` observed frames of the round
/// after it.
pub fn compute_deviation(
    obs_tail: ArrayView2<f64>,
    prev_pred: ArrayView2<f64>,
    prev_round: usize,
) -> Result<Deviation> {
    if obs_tail.dim() != prev_pred.dim() {
        return dim_err(format!(
            "observation tail is {:?} but previous prediction is {:?}",
            obs_tail.dim(),
            prev_pred.dim()
        ));
    }
    let values = velocity(obs_tail)? - velocity(prev_pred)?;
    Ok(Deviation {
        values,
        round_origin: prev_round,
    })
}

/// The round-1 deviation: `(T-1) x K` zeros.
pub fn zero_deviation(layout: RoundLayout, k: usize) -> Deviation {
    Deviation {
        values: Array2::zeros((layout.n_pred - 1, k)),
        round_origin: 0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn constant_has_zero_velocity() {
        let x = Array2::from_elem((4, 3), 2.5);
        assert_eq!(velocity(x.view()).unwrap(), Array2::<f64>::zeros((3, 3)));
    }

    #[test]
    fn unit_velocity() {
        let x = array![[0.0], [1.0], [2.0], [3.0]];
        assert_eq!(velocity(x.view()).unwrap(), array![[1.0], [1.0], [1.0]]);
    }

    #[test]
    fn velocity_matches_loop() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let x = Array2::from_shape_fn((5, 6), |_| rng.gen_range(-1.0..1.0));
        let v = velocity(x.view()).unwrap();
        for t in 0..4 {
            for k in 0..6 {
                assert_eq!(v[[t, k]], x[[t + 1, k]] - x[[t, k]]);
            }
        }
        assert!(velocity(x.slice(s![..1, ..])).is_err());
    }

    #[test]
    fn deviation_cases() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let x = Array2::from_shape_fn((6, 4), |_| rng.gen_range(-1.0..1.0));
        let d = compute_deviation(x.view(), x.view(), 1).unwrap();
        assert!(d.values.iter().all(|&v| v == 0.0));
        assert_eq!(d.values.dim(), (5, 4));

        // a constant offset per frame cancels in velocity space
        let ramp = Array2::from_shape_fn((6, 4), |(t, _)| t as f64);
        let shifted = &ramp + 7.0;
        let d = compute_deviation(ramp.view(), shifted.view(), 1).unwrap();
        assert!(d.values.iter().all(|&v| v == 0.0));

        // unit velocity vs a constant prediction
        let flat = Array2::from_elem((6, 4), 3.0);
        let d = compute_deviation(ramp.view(), flat.view(), 1).unwrap();
        assert!(d.values.iter().all(|&v| v == 1.0));

        assert!(compute_deviation(ramp.view(), flat.slice(s![..5, ..]), 1).is_err());
    }

    #[test]
    fn zero_deviation_shape() {
        let layout = RoundLayout::new(10, 10).unwrap();
        let z = zero_deviation(layout, 15);
        assert_eq!(z.values.dim(), (9, 15));
        assert_eq!(z.round_origin, 0);
        let x = Array2::from_elem((10, 15), 0.3);
        assert_eq!(compute_deviation(x.view(), x.view(), 1).unwrap().values, z.values);
    }

    proptest! {
        #[test]
        fn antisymmetric(seed in 0u64..10_000) {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let a = Array2::from_shape_fn((5, 3), |_| rng.gen_range(-5.0..5.0));
            let b = Array2::from_shape_fn((5, 3), |_| rng.gen_range(-5.0..5.0));
            let ab = compute_deviation(a.view(), b.view(), 1).unwrap();
            let ba = compute_deviation(b.view(), a.view(), 1).unwrap();
            prop_assert_eq!(ab.values, -ba.values);
        }

        /// Dyadic values (multiples of 2^-8 below 2^10) keep every sum exact.
        #[test]
        fn translation_invariant(seed in 0u64..10_000, t in 2usize..12, joints in 1usize..6) {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let k = 3 * joints;
            let mut dy = || rng.gen_range(-250_000i64..250_000) as f64 / 256.0;
            let a = Array2::from_shape_fn((t, k), |_| dy());
            let b = Array2::from_shape_fn((t, k), |_| dy());
            let c = ndarray::Array1::from_shape_fn(k, |_| dy());
            let d = ndarray::Array1::from_shape_fn(k, |_| dy());
            let plain = compute_deviation(a.view(), b.view(), 2).unwrap();
            let moved = compute_deviation((&a + &c).view(), (&b + &d).view(), 2).unwrap();
            prop_assert_eq!(plain.values.dim(), (t - 1, k));
            prop_assert_eq!(plain.values, moved.values);
        }
    }
}
