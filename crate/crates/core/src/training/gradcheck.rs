//! Finite-difference verification of analytic gradients.

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::sample_gradients;
use crate::error::Result;
use crate::nets::PredictorBundle;
use crate::rounds::TrainSample;

/// A scalar function of a flat parameter vector with an analytic gradient.
pub trait Objective {
    fn num_params(&self) -> usize;
    fn param(&self, i: usize) -> f64;
    fn set_param(&mut self, i: usize, v: f64);
    fn loss(&self) -> Result<f64>;
    fn gradient(&self) -> Result<Vec<f64>>;
}

/// Denominator floor so parameters whose gradient is ~0 compare absolutely.
pub const RELATIVE_FLOOR: f64 = 1e-6;

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(RELATIVE_FLOOR)
}

/// Max relative error between the analytic gradient and central differences
/// `(f(w+h) - f(w-h)) / 2h` over the given parameter indices.
pub fn check_objective(obj: &mut impl Objective, indices: &[usize], step: f64) -> Result<f64> {
    let analytic = obj.gradient()?;
    let mut worst = 0.0f64;
    for &i in indices {
        let w = obj.param(i);
        obj.set_param(i, w + step);
        let plus = obj.loss()?;
        obj.set_param(i, w - step);
        let minus = obj.loss()?;
        obj.set_param(i, w);
        let numeric = (plus - minus) / (2.0 * step);
        worst = worst.max(relative_error(analytic[i], numeric));
    }
    Ok(worst)
}

/// Total two-round loss of one sample as a function of the bundle's
/// parameters.
pub struct BundleObjective<'a> {
    pub bundle: PredictorBundle,
    pub sample: &'a TrainSample,
    pub detach_round1: bool,
}

impl Objective for BundleObjective<'_> {
    fn num_params(&self) -> usize {
        self.bundle.params.scalar_count()
    }

    fn param(&self, i: usize) -> f64 {
        self.bundle.params.scalar(i)
    }

    fn set_param(&mut self, i: usize, v: f64) {
        self.bundle.params.set_scalar(i, v);
    }

    fn loss(&self) -> Result<f64> {
        Ok(super::train_sample_loss(&self.bundle, self.sample)?.total)
    }

    fn gradient(&self) -> Result<Vec<f64>> {
        let (_, grads) = sample_gradients(&self.bundle, self.sample, self.detach_round1)?;
        Ok(grads.iter().flat_map(|g| g.iter().copied()).collect())
    }
}

/// Checks `n_params` randomly chosen parameters (chosen with `seed`) of the
/// total loss on `sample`; returns the maximum relative error.
pub fn gradient_check(
    bundle: &PredictorBundle,
    sample: &TrainSample,
    n_params: usize,
    step: f64,
    seed: u64,
) -> Result<f64> {
    let mut obj = BundleObjective {
        bundle: bundle.clone(),
        sample,
        detach_round1: false,
    };
    let total = obj.num_params();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut indices = index::sample(&mut rng, total, n_params.min(total)).into_vec();
    indices.sort_unstable();
    check_objective(&mut obj, &indices, step)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// `f(w) = sum_i c_i w_i + 0.5 sum_i w_i^2`, gradient `c + w` in closed form.
    struct Toy {
        w: Vec<f64>,
        c: Vec<f64>,
    }

    impl Objective for Toy {
        fn num_params(&self) -> usize {
            self.w.len()
        }
        fn param(&self, i: usize) -> f64 {
            self.w[i]
        }
        fn set_param(&mut self, i: usize, v: f64) {
            self.w[i] = v;
        }
        fn loss(&self) -> Result<f64> {
            Ok(self.w.iter().zip(&self.c).map(|(w, c)| c * w + 0.5 * w * w).sum())
        }
        fn gradient(&self) -> Result<Vec<f64>> {
            Ok(self.w.iter().zip(&self.c).map(|(w, c)| c + w).collect())
        }
    }

    /// `f(w) = sum_i sin(w_i)`.
    struct Wavy(Vec<f64>);

    impl Objective for Wavy {
        fn num_params(&self) -> usize {
            self.0.len()
        }
        fn param(&self, i: usize) -> f64 {
            self.0[i]
        }
        fn set_param(&mut self, i: usize, v: f64) {
            self.0[i] = v;
        }
        fn loss(&self) -> Result<f64> {
            Ok(self.0.iter().map(|w| w.sin()).sum())
        }
        fn gradient(&self) -> Result<Vec<f64>> {
            Ok(self.0.iter().map(|w| w.cos()).collect())
        }
    }

    #[test]
    fn closed_form_toy_is_exact() {
        let mut toy = Toy {
            w: vec![0.5, -1.25, 2.0, 0.125],
            c: vec![1.0, 0.5, -0.75, 2.0],
        };
        let err = check_objective(&mut toy, &[0, 1, 2, 3], 1e-5).unwrap();
        assert!(err < 1e-9, "{err}");
    }

    #[test]
    fn coarse_step_is_worse() {
        let mut f = Wavy(vec![0.3, 1.1, -0.7]);
        let fine = check_objective(&mut f, &[0, 1, 2], 1e-5).unwrap();
        let coarse = check_objective(&mut f, &[0, 1, 2], 1e-1).unwrap();
        assert!(coarse > fine, "coarse {coarse} fine {fine}");
    }

    #[test]
    fn wrong_gradient_is_caught() {
        struct Broken(Wavy);
        impl Objective for Broken {
            fn num_params(&self) -> usize {
                self.0.num_params()
            }
            fn param(&self, i: usize) -> f64 {
                self.0.param(i)
            }
            fn set_param(&mut self, i: usize, v: f64) {
                self.0.set_param(i, v)
            }
            fn loss(&self) -> Result<f64> {
                self.0.loss()
            }
            fn gradient(&self) -> Result<Vec<f64>> {
                Ok(self.0.gradient()?.iter().map(|g| g * 1.01).collect())
            }
        }
        let mut f = Broken(Wavy(vec![0.3, 1.1]));
        assert!(check_objective(&mut f, &[0, 1], 1e-5).unwrap() > 1e-3);
    }
}
