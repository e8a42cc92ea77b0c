use alloc::vec;
use alloc::vec::Vec;

use super::PROBABILITY_TOL;
use crate::math::abs;
use crate::{Error, Result, Shape};

/// A Markovian deterministic policy: one action per `(h, s)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct DeterministicPolicy {
    shape: Shape,
    actions: Vec<usize>,
}

impl DeterministicPolicy {
    /// `actions` is laid out `[h][s]`.
    pub fn new(shape: Shape, actions: Vec<usize>) -> Result<Self> {
        if actions.len() != shape.stage_states() {
            return Err(Error::Dimension(alloc::format!(
                "policy needs {} actions ([H][S]), got {}",
                shape.stage_states(),
                actions.len()
            )));
        }
        for (i, &action) in actions.iter().enumerate() {
            if action >= shape.actions {
                return Err(Error::InvalidAction { h: i / shape.states, s: i % shape.states, action });
            }
        }
        Ok(Self { shape, actions })
    }

    /// The policy playing action `a` everywhere.
    pub fn constant(shape: Shape, action: usize) -> Result<Self> {
        Self::new(shape, vec![action; shape.stage_states()])
    }

    /// Decodes the `index`-th policy of the mixed-radix enumeration where the
    /// `(h, s)` digit has weight `A^(h·S + s)`.
    pub fn from_index(shape: Shape, mut index: u128) -> Self {
        let base = shape.actions as u128;
        let actions = (0..shape.stage_states())
            .map(|_| {
                let digit = (index % base) as usize;
                index /= base;
                digit
            })
            .collect();
        Self { shape, actions }
    }

    #[inline]
    pub fn shape(&self) -> Shape {
        self.shape
    }

    #[inline]
    pub fn action(&self, h: usize, s: usize) -> usize {
        self.actions[h * self.shape.states + s]
    }

    pub fn actions(&self) -> &[usize] {
        &self.actions
    }

    pub fn to_stochastic(&self) -> StochasticPolicy {
        let shape = self.shape;
        let mut probs = vec![0.0; shape.triplets()];
        for h in 0..shape.horizon {
            for s in 0..shape.states {
                probs[shape.index(h, s, self.action(h, s))] = 1.0;
            }
        }
        StochasticPolicy { shape, probs }
    }
}

/// A Markovian stochastic policy `pi_h(a | s)`.
#[derive(Clone, Debug, PartialEq)]
pub struct StochasticPolicy {
    shape: Shape,
    // [h][s][a]
    probs: Vec<f64>,
}

impl StochasticPolicy {
    pub fn new(shape: Shape, probs: Vec<f64>) -> Result<Self> {
        if probs.len() != shape.triplets() {
            return Err(Error::Dimension(alloc::format!(
                "policy needs {} probabilities ([H][S][A]), got {}",
                shape.triplets(),
                probs.len()
            )));
        }
        for h in 0..shape.horizon {
            for s in 0..shape.states {
                let row = &probs[shape.index(h, s, 0)..shape.index(h, s, 0) + shape.actions];
                let sum: f64 = row.iter().sum();
                if row.iter().any(|p| !(*p >= 0.0)) || abs(sum - 1.0) > PROBABILITY_TOL {
                    return Err(Error::PolicyRow { h, s, sum });
                }
            }
        }
        Ok(Self { shape, probs })
    }

    pub fn uniform(shape: Shape) -> Self {
        Self { shape, probs: vec![1.0 / shape.actions as f64; shape.triplets()] }
    }

    #[inline]
    pub fn shape(&self) -> Shape {
        self.shape
    }

    #[inline]
    pub fn prob(&self, h: usize, s: usize, a: usize) -> f64 {
        self.probs[self.shape.index(h, s, a)]
    }

    /// Action distribution at `(h, s)`.
    #[inline]
    pub fn row(&self, h: usize, s: usize) -> &[f64] {
        let start = self.shape.index(h, s, 0);
        &self.probs[start..start + self.shape.actions]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.probs
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn invalid_action_rejected() {
        let shape = Shape::new(1, 2, 2).unwrap();
        assert_eq!(DeterministicPolicy::new(shape, vec![0, 2]), Err(Error::InvalidAction { h: 0, s: 1, action: 2 }));
    }

    #[test]
    fn stochastic_rows_validated() {
        let shape = Shape::new(1, 1, 2).unwrap();
        assert!(StochasticPolicy::new(shape, vec![0.3, 0.7]).is_ok());
        assert!(matches!(StochasticPolicy::new(shape, vec![0.3, 0.6]), Err(Error::PolicyRow { h: 0, s: 0, .. })));
        assert!(StochasticPolicy::new(shape, vec![-0.1, 1.1]).is_err());
    }

    #[test]
    fn index_decoding_is_mixed_radix() {
        let shape = Shape::new(2, 1, 3).unwrap();
        assert_eq!(DeterministicPolicy::from_index(shape, 0).actions(), &[0, 0]);
        assert_eq!(DeterministicPolicy::from_index(shape, 5).actions(), &[2, 1]);
    }
}
