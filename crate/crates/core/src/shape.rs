use alloc::vec;
use alloc::vec::Vec;
use core::ops::{Index, IndexMut};

use crate::{Error, Result};

/// Sizes of a tabular episodic problem: horizon `H`, states `S`, actions `A`.
///
/// Stages, states and actions are 0-based throughout the crate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Shape {
    pub horizon: usize,
    pub states: usize,
    pub actions: usize,
}

impl Shape {
    pub fn new(horizon: usize, states: usize, actions: usize) -> Result<Self> {
        if horizon == 0 || states == 0 || actions == 0 {
            return Err(Error::Dimension(alloc::format!(
                "horizon, states and actions must be positive (got H={horizon}, S={states}, A={actions})"
            )));
        }
        Ok(Self { horizon, states, actions })
    }

    /// Number of `(h, s, a)` triplets.
    #[inline]
    pub fn triplets(&self) -> usize {
        self.horizon * self.states * self.actions
    }

    /// Number of `(h, s)` pairs.
    #[inline]
    pub fn stage_states(&self) -> usize {
        self.horizon * self.states
    }

    #[inline]
    pub fn index(&self, h: usize, s: usize, a: usize) -> usize {
        debug_assert!(h < self.horizon && s < self.states && a < self.actions);
        (h * self.states + s) * self.actions + a
    }

    #[inline]
    pub fn unindex(&self, i: usize) -> (usize, usize, usize) {
        let a = i % self.actions;
        let hs = i / self.actions;
        (hs / self.states, hs % self.states, a)
    }

    /// `A^(S·H)`, or `None` on overflow.
    pub fn deterministic_policy_count(&self) -> Option<u128> {
        let exp = u32::try_from(self.stage_states()).ok()?;
        (self.actions as u128).checked_pow(exp)
    }
}

/// A real-valued table indexed by `(h, s, a)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    shape: Shape,
    values: Vec<f64>,
}

impl Table {
    pub fn zeros(shape: Shape) -> Self {
        Self { shape, values: vec![0.0; shape.triplets()] }
    }

    pub fn filled(shape: Shape, value: f64) -> Self {
        Self { shape, values: vec![value; shape.triplets()] }
    }

    pub fn from_vec(shape: Shape, values: Vec<f64>) -> Result<Self> {
        if values.len() != shape.triplets() {
            return Err(Error::Dimension(alloc::format!(
                "table needs {} entries, got {}",
                shape.triplets(),
                values.len()
            )));
        }
        Ok(Self { shape, values })
    }

    pub fn from_fn(shape: Shape, mut f: impl FnMut(usize, usize, usize) -> f64) -> Self {
        let values = (0..shape.triplets())
            .map(|i| {
                let (h, s, a) = shape.unindex(i);
                f(h, s, a)
            })
            .collect();
        Self { shape, values }
    }

    #[inline]
    pub fn shape(&self) -> Shape {
        self.shape
    }

    #[inline]
    pub fn get(&self, h: usize, s: usize, a: usize) -> f64 {
        self.values[self.shape.index(h, s, a)]
    }

    #[inline]
    pub fn set(&mut self, h: usize, s: usize, a: usize, value: f64) {
        let i = self.shape.index(h, s, a);
        self.values[i] = value;
    }

    #[inline]
    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.values
    }

    /// Entries of stage `h`, laid out `[s][a]`.
    pub fn stage(&self, h: usize) -> &[f64] {
        let width = self.shape.states * self.shape.actions;
        &self.values[h * width..(h + 1) * width]
    }

    /// Entries `[a]` of the pair `(h, s)`.
    pub fn row(&self, h: usize, s: usize) -> &[f64] {
        let start = self.shape.index(h, s, 0);
        &self.values[start..start + self.shape.actions]
    }

    pub fn dot(&self, other: &Table) -> f64 {
        debug_assert_eq!(self.shape, other.shape);
        self.values.iter().zip(&other.values).map(|(x, y)| x * y).sum()
    }

    pub fn map(&self, mut f: impl FnMut(f64) -> f64) -> Table {
        Table { shape: self.shape, values: self.values.iter().map(|&x| f(x)).collect() }
    }

    pub fn scale(&self, factor: f64) -> Table {
        self.map(|x| x * factor)
    }

    /// Largest absolute entrywise difference.
    pub fn max_abs_diff(&self, other: &Table) -> f64 {
        self.values.iter().zip(&other.values).map(|(x, y)| crate::math::abs(x - y)).fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|&x| crate::math::abs(x)).fold(0.0, f64::max)
    }
}

impl Index<(usize, usize, usize)> for Table {
    type Output = f64;

    #[inline]
    fn index(&self, (h, s, a): (usize, usize, usize)) -> &f64 {
        &self.values[self.shape.index(h, s, a)]
    }
}

impl IndexMut<(usize, usize, usize)> for Table {
    #[inline]
    fn index_mut(&mut self, (h, s, a): (usize, usize, usize)) -> &mut f64 {
        let i = self.shape.index(h, s, a);
        &mut self.values[i]
    }
}
