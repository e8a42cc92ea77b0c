//! Convex programs over the occupancy polytope `Omega`.
//!
//! Linear objectives are solved exactly by dynamic programming
//! ([`planning_oracle`]). Min-max designs ([`minimize_pointwise_max`]) use a
//! log-barrier interior-point method on the epigraph form, which yields a
//! duality-gap certificate. The constrained linear maximization runs
//! pairwise Frank-Wolfe with the planning oracle inside a Lagrangian
//! bisection.

mod barrier;
mod constrained;
mod design;
mod minflow;

use alloc::vec::Vec;

use crate::mdp::{plan, MdpSpec, Occupancy, Sense, StochasticPolicy};
use crate::{Error, Result, Table};

pub use constrained::{constrained_linear_max, ConstrainedMax};
pub use design::{minimize_pointwise_max, DesignOutcome, DesignReport, Objective};
pub use minflow::{min_flow_phi, CoveringTarget, MinFlow};

/// Default relative tolerance of the iterative solvers.
pub const DEFAULT_TOL: f64 = 1e-4;

/// Occupancy of a deterministic policy maximizing (or minimizing)
/// `<weights, rho>` over `Omega`. Ties go to the lowest action index.
pub fn planning_oracle(mdp: &MdpSpec, weights: &Table, sense: Sense) -> Occupancy {
    let plan = plan(mdp, weights, sense);
    crate::mdp::occupancy_of_policy(mdp, &plan.policy.to_stochastic()).expect("planner output matches the MDP shape")
}

/// Normalizes a non-negative flow into a policy; states without mass get
/// the uniform action distribution.
pub fn policy_from_flow(flow: &Table) -> Result<StochasticPolicy> {
    let shape = flow.shape();
    if let Some(i) = flow.as_slice().iter().position(|&x| !(x >= 0.0) || !x.is_finite()) {
        let (h, s, a) = shape.unindex(i);
        return Err(Error::InvalidArgument(alloc::format!(
            "flow must be finite and non-negative, got {} at (h={h}, s={s}, a={a})",
            flow.as_slice()[i]
        )));
    }
    let uniform = 1.0 / shape.actions as f64;
    let mut probs = Vec::with_capacity(shape.triplets());
    for h in 0..shape.horizon {
        for s in 0..shape.states {
            let row = flow.row(h, s);
            let total: f64 = row.iter().sum();
            if total > 0.0 {
                probs.extend(row.iter().map(|x| x / total));
            } else {
                probs.extend(core::iter::repeat(uniform).take(shape.actions));
            }
        }
    }
    StochasticPolicy::new(shape, probs)
}

/// Pushes a nearly conserving flow back onto the occupancy polytope by
/// replaying its own conditional policy.
pub(crate) fn repair(mdp: &MdpSpec, flow: Table) -> Occupancy {
    policy_from_flow(&flow)
        .and_then(|policy| crate::mdp::occupancy_of_policy(mdp, &policy))
        .unwrap_or_else(|_| Occupancy::from_table(flow))
}

/// `sup { sum_i q_i x_i : sum_i b_i x_i^2 <= c } = sqrt(c · sum_i q_i^2 / b_i)`.
pub fn subgaussian_sup(q: &[f64], b: &[f64], c: f64) -> Result<f64> {
    if q.len() != b.len() {
        return Err(Error::Dimension(alloc::format!("q has {} entries, b has {}", q.len(), b.len())));
    }
    if let Some(index) = b.iter().position(|&x| !(x > 0.0)) {
        return Err(Error::NonPositiveWeight { index, value: b[index] });
    }
    if !(c >= 0.0) {
        return Err(Error::InvalidArgument(alloc::format!("budget must be >= 0, got {c}")));
    }
    let sum: f64 = q.iter().zip(b).map(|(q, b)| q * q / b).sum();
    Ok(crate::math::sqrt(c * sum))
}

/// Flat indices of reachable triplets, and per triplet the reachability flag.
pub(crate) fn reachable_triplets(mdp: &MdpSpec) -> (Vec<usize>, Vec<bool>) {
    let uniform = crate::mdp::uniform_occupancy(mdp);
    let mask: Vec<bool> = uniform.as_slice().iter().map(|&x| x > 0.0).collect();
    let idx = (0..mask.len()).filter(|&i| mask[i]).collect();
    (idx, mask)
}
