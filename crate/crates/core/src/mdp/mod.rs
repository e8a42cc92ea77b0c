//! Tabular episodic MDPs with known transitions and Gaussian rewards.

mod eval;
mod gaps;
mod policy;

use alloc::vec::Vec;

use crate::math::abs;
use crate::{Error, Result, Shape, Table};

pub use eval::{
    occupancy_of_policy, optimal_values, plan, uniform_occupancy, value_of_policy, OptimalValues, Plan, Sense,
};
pub use gaps::{
    enumerate_deterministic_policies, gap_profile, reachability, tv_policy_divergence, GapProfile, PolicySet,
    DEFAULT_POLICY_CAP,
};
pub(crate) use gaps::{gap_tolerance, tv_divergence};
pub use policy::{DeterministicPolicy, StochasticPolicy};

/// Tolerance on stochasticity and flow conservation.
pub const PROBABILITY_TOL: f64 = 1e-9;

/// A finite-horizon MDP `(S, A, H, {p_h}, {r_h}, s_1)`.
///
/// Rewards at `(h, s, a)` are Gaussian with mean `r_h(s, a)` and unit
/// variance; only the means are stored. Transitions exist for stages
/// `0..H-1`; the last stage has no outgoing kernel.
#[derive(Clone, Debug, PartialEq)]
pub struct MdpSpec {
    shape: Shape,
    initial_state: usize,
    // [h][s][a][s'] for h in 0..H-1
    transitions: Vec<f64>,
    rewards: Table,
}

impl MdpSpec {
    /// Builds and validates an MDP. `transitions` is laid out
    /// `[h][s][a][s']` over `H-1` stages and `rewards` as `[h][s][a]`.
    pub fn new(shape: Shape, initial_state: usize, transitions: Vec<f64>, rewards: Vec<f64>) -> Result<Self> {
        let shape = Shape::new(shape.horizon, shape.states, shape.actions)?;
        if initial_state >= shape.states {
            return Err(Error::Dimension(alloc::format!(
                "initial state {initial_state} out of range for {} states",
                shape.states
            )));
        }
        let expected = (shape.horizon - 1) * shape.states * shape.actions * shape.states;
        if transitions.len() != expected {
            return Err(Error::Dimension(alloc::format!(
                "transitions need {expected} entries ([H-1][S][A][S]), got {}",
                transitions.len()
            )));
        }
        let rewards = Table::from_vec(shape, rewards)?;
        let mdp = Self { shape, initial_state, transitions, rewards };
        mdp.validate()?;
        Ok(mdp)
    }

    fn validate(&self) -> Result<()> {
        let Shape { horizon, states, actions } = self.shape;
        for h in 0..horizon.saturating_sub(1) {
            for s in 0..states {
                for a in 0..actions {
                    let row = self.transition_row(h, s, a);
                    let mut sum = 0.0;
                    for (next, &p) in row.iter().enumerate() {
                        if !p.is_finite() || p < 0.0 {
                            return Err(Error::NegativeProbability { h, s, a, next, value: p });
                        }
                        sum += p;
                    }
                    if abs(sum - 1.0) > PROBABILITY_TOL {
                        return Err(Error::Stochasticity { h, s, a, sum });
                    }
                }
            }
        }
        for i in 0..self.shape.triplets() {
            if !self.rewards.as_slice()[i].is_finite() {
                let (h, s, a) = self.shape.unindex(i);
                return Err(Error::NonFinite { h, s, a });
            }
        }
        Ok(())
    }

    /// Same dynamics, different mean rewards.
    pub fn with_rewards(&self, rewards: Table) -> Result<Self> {
        if rewards.shape() != self.shape {
            return Err(Error::Dimension("reward table shape differs from the MDP".into()));
        }
        let mdp = Self { rewards, ..self.clone() };
        mdp.validate()?;
        Ok(mdp)
    }

    /// A bandit: `S = H = 1` with the given arm means.
    pub fn bandit(means: &[f64]) -> Result<Self> {
        Self::new(Shape::new(1, 1, means.len())?, 0, Vec::new(), means.to_vec())
    }

    #[inline]
    pub fn shape(&self) -> Shape {
        self.shape
    }

    #[inline]
    pub fn horizon(&self) -> usize {
        self.shape.horizon
    }

    #[inline]
    pub fn states(&self) -> usize {
        self.shape.states
    }

    #[inline]
    pub fn actions(&self) -> usize {
        self.shape.actions
    }

    #[inline]
    pub fn initial_state(&self) -> usize {
        self.initial_state
    }

    /// Next-state distribution `p_h(. | s, a)`, for `h < H - 1`.
    #[inline]
    pub fn transition_row(&self, h: usize, s: usize, a: usize) -> &[f64] {
        let n = self.shape.states;
        let start = ((h * n + s) * self.shape.actions + a) * n;
        &self.transitions[start..start + n]
    }

    #[inline]
    pub fn transitions(&self) -> &[f64] {
        &self.transitions
    }

    #[inline]
    pub fn reward(&self, h: usize, s: usize, a: usize) -> f64 {
        self.rewards.get(h, s, a)
    }

    #[inline]
    pub fn rewards(&self) -> &Table {
        &self.rewards
    }
}

/// A state-action distribution `rho_h(s, a)`, a point of the occupancy
/// polytope when produced by this crate.
#[derive(Clone, Debug, PartialEq)]
pub struct Occupancy(Table);

impl Occupancy {
    /// Wraps a table without checking membership in the polytope; see
    /// [`Occupancy::check`].
    pub fn from_table(table: Table) -> Self {
        Self(table)
    }

    pub fn table(&self) -> &Table {
        &self.0
    }

    pub fn into_table(self) -> Table {
        self.0
    }

    /// Stage marginal `sum_a rho_h(s, a)`.
    pub fn state_mass(&self, h: usize, s: usize) -> f64 {
        self.0.row(h, s).iter().sum()
    }

    /// Verifies the initial-state and flow-conservation constraints within
    /// `tol`, as well as non-negativity.
    pub fn check(&self, mdp: &MdpSpec, tol: f64) -> Result<()> {
        let shape = mdp.shape();
        if self.0.shape() != shape {
            return Err(Error::Dimension("occupancy shape differs from the MDP".into()));
        }
        for (i, &x) in self.0.as_slice().iter().enumerate() {
            if !(x >= -tol) {
                let (h, s, a) = shape.unindex(i);
                return Err(Error::InvalidArgument(alloc::format!("negative occupancy {x} at (h={h}, s={s}, a={a})")));
            }
        }
        for s in 0..shape.states {
            let expected = if s == mdp.initial_state() { 1.0 } else { 0.0 };
            let mass = self.state_mass(0, s);
            if abs(mass - expected) > tol {
                return Err(Error::InvalidArgument(alloc::format!(
                    "initial-stage mass {mass} at state {s}, expected {expected}"
                )));
            }
        }
        for h in 1..shape.horizon {
            for next in 0..shape.states {
                let mut inflow = 0.0;
                for s in 0..shape.states {
                    for a in 0..shape.actions {
                        inflow += self.0.get(h - 1, s, a) * mdp.transition_row(h - 1, s, a)[next];
                    }
                }
                let mass = self.state_mass(h, next);
                if abs(mass - inflow) > tol {
                    return Err(Error::InvalidArgument(alloc::format!(
                        "flow conservation violated at (h={h}, s={next}): mass {mass}, inflow {inflow}"
                    )));
                }
            }
        }
        Ok(())
    }
}

impl core::ops::Deref for Occupancy {
    type Target = Table;

    fn deref(&self) -> &Table {
        &self.0
    }
}
