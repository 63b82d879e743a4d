//! Plain SGD with global-norm gradient clipping.

use crate::params::ParamStore;
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Sgd {
    pub learning_rate: f64,
    pub clip_norm: f64,
}

/// What one [`Sgd::step`] did.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepStats {
    /// Global gradient norm before clipping.
    pub grad_norm: f64,
    /// Factor applied to every gradient (1 when no clipping happened).
    pub clip_scale: f64,
}

impl Sgd {
    pub fn new(learning_rate: f64, clip_norm: f64) -> Self {
        assert!(learning_rate > 0.0, "learning rate must be positive");
        assert!(clip_norm > 0.0, "clip norm must be positive");
        Self {
            learning_rate,
            clip_norm,
        }
    }

    /// Applies `w -= lr * g` after rescaling all gradients by
    /// `clip_norm / ||g||` when the global norm exceeds `clip_norm`, then
    /// zeroes the gradients.
    pub fn step<T: Scalar>(&self, params: &mut ParamStore<T>) -> StepStats {
        let norm = params.grad_norm().as_f64();
        let clip_scale = if norm > self.clip_norm {
            self.clip_norm / norm
        } else {
            1.0
        };
        let factor = T::of(self.learning_rate * clip_scale);
        for p in params.iter_mut() {
            let grad = p.grad.data().to_vec();
            for (w, g) in p.value.data_mut().iter_mut().zip(grad) {
                *w -= factor * g;
            }
        }
        params.zero_grads();
        StepStats {
            grad_norm: norm,
            clip_scale,
        }
    }
}
