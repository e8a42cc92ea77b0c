use alloc::vec::Vec;

use super::barrier::{center, Barrier, Equality};
use super::{planning_oracle, reachable_triplets};
use crate::math::ln;
use crate::mdp::{uniform_occupancy, MdpSpec, Occupancy, Sense};
use crate::{Error, Result, Table};

/// Solution of `sup { <q, rho> : rho in Omega, sum rho^2 / n <= B }`.
#[derive(Clone, Debug)]
pub struct ConstrainedMax {
    /// Objective at `rho`; `-inf` when no occupancy meets the budget.
    pub value: f64,
    /// Feasible maximizer (the least-norm occupancy when infeasible).
    pub rho: Occupancy,
    /// Certified upper bound on the supremum.
    pub upper_bound: f64,
    /// Multiplier of the quadratic constraint, zero when it is inactive.
    pub lambda: f64,
}

impl ConstrainedMax {
    pub fn is_feasible(&self) -> bool {
        self.value > f64::NEG_INFINITY
    }
}

const GROWTH: f64 = 8.0;
const MAX_NEWTON: usize = 200;
const MAX_OUTER: usize = 60;

/// Maximizes a linear function over the occupancy polytope intersected with
/// the ellipsoid `sum_x rho_x^2 / n_x <= B`.
///
/// If the unconstrained planning vertex meets the budget it is returned
/// as is. Otherwise a barrier phase finds the least-norm occupancy (which
/// decides feasibility and provides a strictly feasible start) and a second
/// barrier phase follows the central path of the constrained problem.
/// Counts only matter on reachable triplets, where they must be positive.
pub fn constrained_linear_max(mdp: &MdpSpec, q: &Table, n: &Table, budget: f64, tol: f64) -> Result<ConstrainedMax> {
    let shape = mdp.shape();
    if q.shape() != shape || n.shape() != shape {
        return Err(Error::Dimension("q and n must match the MDP shape".into()));
    }
    if !(budget > 0.0) || !budget.is_finite() {
        return Err(Error::InvalidArgument(alloc::format!("budget must be positive and finite, got {budget}")));
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(alloc::format!("tolerance must be positive, got {tol}")));
    }
    if q.as_slice().iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("q must be finite".into()));
    }
    let (reachable, _) = reachable_triplets(mdp);
    if let Some(&x) = reachable.iter().find(|&&x| !(n.as_slice()[x] > 0.0)) {
        let (h, s, a) = shape.unindex(x);
        return Err(Error::Unvisited { h, s, a });
    }
    let weights: Vec<f64> = reachable.iter().map(|&x| 1.0 / n.as_slice()[x]).collect();
    let quadratic = |rho: &Table| -> f64 {
        reachable.iter().zip(&weights).map(|(&x, w)| rho.as_slice()[x] * rho.as_slice()[x] * w).sum()
    };

    let vertex = planning_oracle(mdp, q, Sense::Maximize);
    if quadratic(&vertex) <= budget {
        let value = vertex.dot(q);
        return Ok(ConstrainedMax { value, rho: vertex, upper_bound: value, lambda: 0.0 });
    }

    let eq = Equality::flow(mdp, &reachable, 0);
    let start = uniform_occupancy(mdp);
    let mut x: Vec<f64> = reachable.iter().map(|&i| start.as_slice()[i]).collect();
    let dim = x.len() as f64;
    let expand = |x: &[f64]| {
        let mut table = Table::zeros(shape);
        for (&i, &v) in reachable.iter().zip(x) {
            table.as_mut_slice()[i] = v;
        }
        Occupancy::from_table(table)
    };

    // least-norm phase: stop as soon as the iterate is strictly inside
    let mut norm = LeastNorm { weights: &weights, weight: 1.0 / quadratic(&start).max(f64::MIN_POSITIVE) };
    let mut interior = false;
    for _ in 0..MAX_OUTER {
        let (_, decrement) = center(&norm, &eq, &mut x, MAX_NEWTON);
        let g = norm.quadratic(&x);
        if g < budget * (1.0 - 1e-9) {
            interior = true;
            break;
        }
        let lower = g - (dim + decrement) / norm.weight;
        if lower > budget {
            let rho = expand(&x);
            return Ok(ConstrainedMax {
                value: f64::NEG_INFINITY,
                rho,
                upper_bound: f64::NEG_INFINITY,
                lambda: f64::INFINITY,
            });
        }
        if (dim + decrement) / norm.weight <= 1e-12 * budget {
            break;
        }
        norm.weight *= GROWTH;
    }
    let q_reduced: Vec<f64> = reachable.iter().map(|&i| q.as_slice()[i]).collect();
    let q_scale = q_reduced.iter().fold(0.0f64, |m, v| m.max(libm::fabs(*v)));
    if !interior || q_scale == 0.0 {
        // the feasible set is (numerically) the single least-norm point, or
        // every feasible point has the same value
        let rho = expand(&x);
        let value = rho.dot(q);
        return Ok(ConstrainedMax { value, rho, upper_bound: value, lambda: 0.0 });
    }

    let q_scaled: Vec<f64> = q_reduced.iter().map(|v| v / q_scale).collect();
    let mut path = CentralPath { q: &q_scaled, weights: &weights, budget, weight: 1.0 };
    let mut gap = f64::INFINITY;
    for _ in 0..MAX_OUTER {
        let (_, decrement) = center(&path, &eq, &mut x, MAX_NEWTON);
        gap = (dim + 1.0 + decrement) / path.weight;
        let value: f64 = q_scaled.iter().zip(&x).map(|(a, b)| a * b).sum();
        if gap <= tol * libm::fabs(value).max(1.0) {
            break;
        }
        path.weight *= GROWTH;
    }
    let slack = budget - path.quadratic(&x);
    let lambda = q_scale / (path.weight * slack);
    let rho = expand(&x);
    let value = rho.dot(q);
    Ok(ConstrainedMax { value, rho, upper_bound: value + gap * q_scale, lambda })
}

/// `s · sum w x^2 - sum ln x`.
struct LeastNorm<'a> {
    weights: &'a [f64],
    weight: f64,
}

impl LeastNorm<'_> {
    fn quadratic(&self, x: &[f64]) -> f64 {
        x.iter().zip(self.weights).map(|(x, w)| x * x * w).sum()
    }
}

impl Barrier for LeastNorm<'_> {
    fn value(&self, x: &[f64]) -> Option<f64> {
        let mut value = self.weight * self.quadratic(x);
        for &v in x {
            if !(v > 0.0) {
                return None;
            }
            value -= ln(v);
        }
        Some(value)
    }

    fn derivatives(&self, x: &[f64], grad: &mut [f64], hess: &mut [f64]) {
        let dim = x.len();
        for (j, (&v, &w)) in x.iter().zip(self.weights).enumerate() {
            grad[j] = 2.0 * self.weight * w * v - 1.0 / v;
            hess[j * dim + j] = 2.0 * self.weight * w + 1.0 / (v * v);
        }
    }
}

/// `-s · <q, x> - ln(B - sum w x^2) - sum ln x`.
struct CentralPath<'a> {
    q: &'a [f64],
    weights: &'a [f64],
    budget: f64,
    weight: f64,
}

impl CentralPath<'_> {
    fn quadratic(&self, x: &[f64]) -> f64 {
        x.iter().zip(self.weights).map(|(x, w)| x * x * w).sum()
    }
}

impl Barrier for CentralPath<'_> {
    fn value(&self, x: &[f64]) -> Option<f64> {
        let slack = self.budget - self.quadratic(x);
        if !(slack > 0.0) {
            return None;
        }
        let mut value = -ln(slack);
        for (&v, &q) in x.iter().zip(self.q) {
            if !(v > 0.0) {
                return None;
            }
            value -= self.weight * q * v + ln(v);
        }
        Some(value)
    }

    fn derivatives(&self, x: &[f64], grad: &mut [f64], hess: &mut [f64]) {
        let dim = x.len();
        let inv = 1.0 / (self.budget - self.quadratic(x));
        for j in 0..dim {
            let gj = 2.0 * self.weights[j] * x[j];
            grad[j] = -self.weight * self.q[j] + gj * inv - 1.0 / x[j];
            hess[j * dim + j] += 2.0 * self.weights[j] * inv + 1.0 / (x[j] * x[j]);
            for k in 0..dim {
                hess[j * dim + k] += gj * 2.0 * self.weights[k] * x[k] * inv * inv;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn bandit(q: [f64; 2], n: [f64; 2], budget: f64) -> ConstrainedMax {
        let mdp = MdpSpec::bandit(&[0.0, 0.0]).unwrap();
        let q = Table::from_vec(mdp.shape(), q.to_vec()).unwrap();
        let n = Table::from_vec(mdp.shape(), n.to_vec()).unwrap();
        constrained_linear_max(&mdp, &q, &n, budget, 1e-9).unwrap()
    }

    #[test]
    fn vertex_feasible() {
        let out = bandit([1.0, 0.0], [1.0, 1.0], 1.0);
        assert_eq!(out.value, 1.0);
        assert_eq!(out.lambda, 0.0);
    }

    #[test]
    fn zero_objective() {
        assert_eq!(bandit([0.0, 0.0], [1.0, 1.0], 0.75).value, 0.0);
    }

    #[test]
    fn active_budget() {
        // rho_1^2 + (1 - rho_1)^2 <= 0.625 gives rho_1 <= 0.75
        let out = bandit([1.0, 0.0], [1.0, 1.0], 0.625);
        assert!((out.value - 0.75).abs() < 1e-8, "{}", out.value);
        assert!(out.upper_bound >= out.value - 1e-12);
        assert!(out.lambda > 0.0);
    }

    #[test]
    fn infeasible_budget() {
        let out = bandit([1.0, 0.0], [1.0, 1.0], 0.25);
        assert!(!out.is_feasible());
        assert!((out.rho.get(0, 0, 0) - 0.5).abs() < 1e-6);
    }

    #[test]
    fn unvisited_reachable_triplet() {
        let mdp = MdpSpec::bandit(&[0.0, 0.0]).unwrap();
        let q = Table::zeros(mdp.shape());
        let n = Table::from_vec(mdp.shape(), vec![1.0, 0.0]).unwrap();
        assert_eq!(constrained_linear_max(&mdp, &q, &n, 1.0, 1e-6).unwrap_err(), Error::Unvisited { h: 0, s: 0, a: 1 });
    }
}
