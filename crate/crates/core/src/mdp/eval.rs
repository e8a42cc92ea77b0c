use alloc::vec;
use alloc::vec::Vec;

use super::{DeterministicPolicy, MdpSpec, Occupancy, StochasticPolicy};
use crate::{Error, Result, Table};

fn check_shape(mdp: &MdpSpec, policy: &StochasticPolicy) -> Result<()> {
    if policy.shape() != mdp.shape() {
        return Err(Error::Dimension(alloc::format!(
            "policy shape {:?} does not match MDP shape {:?}",
            policy.shape(),
            mdp.shape()
        )));
    }
    Ok(())
}

/// `V_1^pi(s_1)` by backward induction.
pub fn value_of_policy(mdp: &MdpSpec, policy: &StochasticPolicy) -> Result<f64> {
    check_shape(mdp, policy)?;
    let shape = mdp.shape();
    let mut next_value = vec![0.0; shape.states];
    let mut value = vec![0.0; shape.states];
    for h in (0..shape.horizon).rev() {
        for s in 0..shape.states {
            let mut v = 0.0;
            for (a, &prob) in policy.row(h, s).iter().enumerate() {
                if prob == 0.0 {
                    continue;
                }
                let mut q = mdp.reward(h, s, a);
                if h + 1 < shape.horizon {
                    q += dot(mdp.transition_row(h, s, a), &next_value);
                }
                v += prob * q;
            }
            value[s] = v;
        }
        core::mem::swap(&mut value, &mut next_value);
    }
    Ok(next_value[mdp.initial_state()])
}

/// Forward recursion for `p_h^pi(s, a)`.
pub fn occupancy_of_policy(mdp: &MdpSpec, policy: &StochasticPolicy) -> Result<Occupancy> {
    check_shape(mdp, policy)?;
    Ok(forward(mdp, |h, s, a| policy.prob(h, s, a)))
}

pub(crate) fn occupancy_of_deterministic(mdp: &MdpSpec, policy: &DeterministicPolicy) -> Occupancy {
    forward(mdp, |h, s, a| if policy.action(h, s) == a { 1.0 } else { 0.0 })
}

/// Occupancy of the uniformly random policy. It is positive on exactly the
/// reachable triplets.
pub fn uniform_occupancy(mdp: &MdpSpec) -> Occupancy {
    let p = 1.0 / mdp.actions() as f64;
    forward(mdp, |_, _, _| p)
}

fn forward(mdp: &MdpSpec, prob: impl Fn(usize, usize, usize) -> f64) -> Occupancy {
    let shape = mdp.shape();
    let mut table = Table::zeros(shape);
    let mut mass = vec![0.0; shape.states];
    mass[mdp.initial_state()] = 1.0;
    let mut next = vec![0.0; shape.states];
    for h in 0..shape.horizon {
        next.iter_mut().for_each(|x| *x = 0.0);
        for s in 0..shape.states {
            if mass[s] == 0.0 {
                continue;
            }
            for a in 0..shape.actions {
                let rho = mass[s] * prob(h, s, a);
                if rho == 0.0 {
                    continue;
                }
                table.set(h, s, a, rho);
                if h + 1 < shape.horizon {
                    for (n, &p) in next.iter_mut().zip(mdp.transition_row(h, s, a)) {
                        *n += rho * p;
                    }
                }
            }
        }
        core::mem::swap(&mut mass, &mut next);
    }
    Occupancy::from_table(table)
}

#[inline]
pub(crate) fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sense {
    Maximize,
    Minimize,
}

/// Result of a dynamic-programming pass for a linear objective over the
/// occupancy polytope.
#[derive(Clone, Debug)]
pub struct Plan {
    pub policy: DeterministicPolicy,
    /// `<weights, rho>` at the returned policy, i.e. the optimum.
    pub value: f64,
    /// Optimal action values `Q_h(s, a)` for the weights.
    pub q: Table,
    /// Optimal state values `V_h(s)`, laid out `[h][s]`.
    pub v: Vec<f64>,
}

/// Exact optimization of `<weights, rho>` over the occupancy polytope by
/// backward induction. Ties go to the lowest action index.
pub fn plan(mdp: &MdpSpec, weights: &Table, sense: Sense) -> Plan {
    let shape = mdp.shape();
    debug_assert_eq!(weights.shape(), shape);
    let mut q = Table::zeros(shape);
    let mut v = vec![0.0; shape.stage_states()];
    let mut actions = vec![0usize; shape.stage_states()];
    for h in (0..shape.horizon).rev() {
        for s in 0..shape.states {
            let mut best = 0.0;
            let mut best_a = 0;
            for a in 0..shape.actions {
                let mut value = weights.get(h, s, a);
                if h + 1 < shape.horizon {
                    let next = &v[(h + 1) * shape.states..(h + 2) * shape.states];
                    value += dot(mdp.transition_row(h, s, a), next);
                }
                q.set(h, s, a, value);
                let better = match sense {
                    Sense::Maximize => value > best,
                    Sense::Minimize => value < best,
                };
                if a == 0 || better {
                    best = value;
                    best_a = a;
                }
            }
            v[h * shape.states + s] = best;
            actions[h * shape.states + s] = best_a;
        }
    }
    let policy = DeterministicPolicy::new(shape, actions).expect("actions are in range");
    Plan { value: v[mdp.initial_state()], policy, q, v }
}

/// Optimal values of the MDP's own rewards.
#[derive(Clone, Debug)]
pub struct OptimalValues {
    /// `V_1^*(s_1)`.
    pub value: f64,
    /// `Q_h^*(s, a)`.
    pub q: Table,
    /// A greedy optimal policy (lowest-index tie-breaking).
    pub policy: DeterministicPolicy,
}

pub fn optimal_values(mdp: &MdpSpec) -> OptimalValues {
    let plan = plan(mdp, mdp.rewards(), Sense::Maximize);
    OptimalValues { value: plan.value, q: plan.q, policy: plan.policy }
}
