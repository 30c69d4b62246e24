//! Two-layer mention-ranking scorer and its training objectives.
//!
//! ```text
//! h_a(i)    = tanh(W_a phi_a(i) + b_a)
//! h_p(i, j) = tanh(W_p phi_p(j, i) + b_p)
//! s(i, j)   = u . [h_a(i); h_p(i, j)] + u_0     for j < i
//! s(i, i)   = v . h_a(i) + v_0
//! p(a_i = j) = softmax_j s(i, .)
//! ```
//!
//! All gradients are computed by hand-written reverse sweeps.

mod io;
mod loss;
mod network;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use io::{load_model, read_model, save_model, write_model, MODEL_FORMAT_VERSION};
pub use loss::{
    entity_centric_loss, loss, loss_and_grad, mention_ranking_loss, LossKind, Objective,
};
pub use network::{link_probabilities, predict_antecedents, score_pairs};

/// Hidden sizes used when none are given.
pub const DEFAULT_HIDDEN_A: usize = 200;
pub const DEFAULT_HIDDEN_P: usize = 700;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelDims {
    pub d_a: usize,
    pub d_p: usize,
    pub h_a: usize,
    pub h_p: usize,
}

impl ModelDims {
    pub fn num_params(&self) -> usize {
        let l = Layout::new(*self);
        l.v0.end
    }
}

type Range = std::ops::Range<usize>;

/// Offsets of each tensor in the flat parameter vector.
#[derive(Debug, Clone)]
pub(crate) struct Layout {
    pub w_a: Range,
    pub b_a: Range,
    pub w_p: Range,
    pub b_p: Range,
    pub u: Range,
    pub u0: Range,
    pub v: Range,
    pub v0: Range,
}

impl Layout {
    fn new(d: ModelDims) -> Self {
        let mut at = 0;
        let mut take = |len: usize| {
            let r = at..at + len;
            at += len;
            r
        };
        Self {
            w_a: take(d.h_a * d.d_a),
            b_a: take(d.h_a),
            w_p: take(d.h_p * d.d_p),
            b_p: take(d.h_p),
            u: take(d.h_a + d.h_p),
            u0: take(1),
            v: take(d.h_a),
            v0: take(1),
        }
    }
}

/// All trainable tensors, stored contiguously in the order
/// `W_a, b_a, W_p, b_p, u, u_0, v, v_0` (matrices row-major).
///
/// The same type doubles as a gradient container.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    dims: ModelDims,
    data: Vec<f64>,
}

impl ModelParams {
    pub fn zeros(dims: ModelDims) -> Self {
        Self {
            dims,
            data: vec![0.0; dims.num_params()],
        }
    }

    /// Uniform initialization in `[-scale, scale]`.
    pub fn random<R: Rng>(dims: ModelDims, scale: f64, rng: &mut R) -> Self {
        let data = (0..dims.num_params())
            .map(|_| rng.random_range(-scale..=scale))
            .collect();
        Self { dims, data }
    }

    /// Wraps a flat vector laid out as described on the type.
    pub fn from_flat(dims: ModelDims, data: Vec<f64>) -> Result<Self> {
        if data.len() != dims.num_params() {
            return Err(Error::Shape(format!(
                "expected {} parameters, got {}",
                dims.num_params(),
                data.len()
            )));
        }
        Ok(Self { dims, data })
    }

    pub fn dims(&self) -> ModelDims {
        self.dims
    }

    pub(crate) fn layout(&self) -> Layout {
        Layout::new(self.dims)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn w_a(&self) -> &[f64] {
        &self.data[self.layout().w_a]
    }
    pub fn b_a(&self) -> &[f64] {
        &self.data[self.layout().b_a]
    }
    pub fn w_p(&self) -> &[f64] {
        &self.data[self.layout().w_p]
    }
    pub fn b_p(&self) -> &[f64] {
        &self.data[self.layout().b_p]
    }
    pub fn u(&self) -> &[f64] {
        &self.data[self.layout().u]
    }
    pub fn u0(&self) -> f64 {
        self.data[self.layout().u0.start]
    }
    pub fn v(&self) -> &[f64] {
        &self.data[self.layout().v]
    }
    pub fn v0(&self) -> f64 {
        self.data[self.layout().v0.start]
    }

    /// `||theta||_1` over every parameter, biases included.
    pub fn l1_norm(&self) -> f64 {
        self.data.iter().map(|x| x.abs()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }
}

/// Error-type costs for the softmax-margin (`alphas`) and entity-centric
/// (`gammas`) losses, ordered (false anaphor, false new, wrong link).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostConfig {
    pub alphas: [f64; 3],
    pub gammas: [f64; 3],
}

impl Default for CostConfig {
    fn default() -> Self {
        Self {
            alphas: [0.1, 3.0, 1.0],
            gammas: [0.1, 3.0, 1.0],
        }
    }
}

impl CostConfig {
    pub fn zero() -> Self {
        Self {
            alphas: [0.0; 3],
            gammas: [0.0; 3],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.alphas.iter().chain(&self.gammas).any(|c| !(*c >= 0.0)) {
            return Err(Error::Config("costs must be non-negative".into()));
        }
        Ok(())
    }

    /// Cost of choosing antecedent `j` for mention `i` whose correct
    /// antecedents are `correct` (which is `{i}` for a discourse-new mention).
    /// Cases are checked in order: false anaphor, false new, wrong link.
    pub fn delta(&self, j: usize, i: usize, correct: &[usize]) -> f64 {
        let i_correct = correct.contains(&i);
        if j != i && i_correct {
            self.alphas[0]
        } else if j == i && !i_correct {
            self.alphas[1]
        } else if j != i && !correct.contains(&j) {
            self.alphas[2]
        } else {
            0.0
        }
    }

    /// Cost of assigning mention `i` to entity `u` when its gold entity is
    /// `gold` (entities named by first mention).
    pub fn gamma(&self, u: usize, i: usize, gold: usize) -> f64 {
        if u != i && gold == i {
            self.gammas[0]
        } else if u == i && gold != i {
            self.gammas[1]
        } else if u != gold && u != i && gold != i {
            self.gammas[2]
        } else {
            0.0
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn delta_cases() {
        let c = CostConfig::default();
        // mention 2 is discourse-new
        assert_eq!(c.delta(2, 2, &[2]), 0.0);
        assert_eq!(c.delta(0, 2, &[2]), 0.1);
        // mention 3 is anaphoric with antecedents {0, 1}
        assert_eq!(c.delta(3, 3, &[0, 1]), 3.0);
        assert_eq!(c.delta(2, 3, &[0, 1]), 1.0);
        assert_eq!(c.delta(1, 3, &[0, 1]), 0.0);
    }

    #[test]
    fn gamma_cases() {
        let c = CostConfig::default();
        assert_eq!(c.gamma(2, 2, 2), 0.0);
        assert_eq!(c.gamma(0, 2, 2), 0.1);
        assert_eq!(c.gamma(3, 3, 1), 3.0);
        assert_eq!(c.gamma(2, 3, 1), 1.0);
        assert_eq!(c.gamma(1, 3, 1), 0.0);
    }

    #[test]
    fn l1_examples() {
        let dims = ModelDims {
            d_a: 1,
            d_p: 1,
            h_a: 1,
            h_p: 1,
        };
        let mut p = ModelParams::zeros(dims);
        assert_eq!(p.l1_norm(), 0.0);
        p.as_mut_slice()[0] = 2.5;
        assert_eq!(p.l1_norm(), 2.5);
        p.as_mut_slice()[0] = 1.0;
        p.as_mut_slice()[3] = -2.0;
        assert_eq!(p.l1_norm(), 3.0);
    }

    #[test]
    fn layout_is_contiguous() {
        let dims = ModelDims {
            d_a: 3,
            d_p: 5,
            h_a: 2,
            h_p: 4,
        };
        assert_eq!(dims.num_params(), 6 + 2 + 20 + 4 + 6 + 1 + 2 + 1);
        let p = ModelParams::zeros(dims);
        assert_eq!(p.w_p().len(), 20);
        assert_eq!(p.u().len(), 6);
        assert!(ModelParams::from_flat(dims, vec![0.0; 3]).is_err());
    }
}
