use alloc::collections::BTreeSet;
use alloc::vec;
use alloc::vec::Vec;

use super::barrier::{center, Barrier, Equality};
use super::reachable_triplets;
use crate::math::ln;
use crate::mdp::{uniform_occupancy, MdpSpec, Occupancy};
use crate::{Error, Result, Table};

/// A convex term `f(rho) = constant + sum_x inverse[x] / rho[x] + sum_x linear[x] · rho[x]`
/// with `inverse >= 0`, evaluated with `0/0 = 0` and `c/0 = +inf` for `c > 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct Objective {
    pub inverse: Table,
    pub linear: Option<Table>,
    pub constant: f64,
}

impl Objective {
    pub fn inverse(inverse: Table) -> Self {
        Self { inverse, linear: None, constant: 0.0 }
    }

    pub fn with_linear(mut self, linear: Table) -> Self {
        self.linear = Some(linear);
        self
    }

    pub fn with_constant(mut self, constant: f64) -> Self {
        self.constant = constant;
        self
    }

    pub fn evaluate(&self, rho: &Table) -> f64 {
        let mut value = self.constant;
        for (&c, &x) in self.inverse.as_slice().iter().zip(rho.as_slice()) {
            if c > 0.0 {
                if x > 0.0 {
                    value += c / x;
                } else {
                    return f64::INFINITY;
                }
            }
        }
        if let Some(linear) = &self.linear {
            value += linear.dot(rho);
        }
        value
    }
}

/// Solution of `min_{rho in Omega} max_i f_i(rho)`.
#[derive(Clone, Debug)]
pub struct DesignReport {
    pub optimizer: Occupancy,
    /// `max_i f_i(optimizer)`.
    pub value: f64,
    /// Upper bound on `value - optimum`.
    pub certificate: f64,
    /// Newton steps taken.
    pub iterations: usize,
    /// Final barrier weight `1/s` in the objective's units.
    pub smoothing_parameter: f64,
}

#[derive(Clone, Debug)]
pub enum DesignOutcome {
    Solved(DesignReport),
    /// Every `rho` in `Omega` makes objective `objective` infinite, because
    /// it charges the unreachable triplet `(h, s, a)`.
    Unbounded {
        objective: usize,
        h: usize,
        s: usize,
        a: usize,
    },
}

impl DesignOutcome {
    pub fn value(&self) -> f64 {
        match self {
            Self::Solved(report) => report.value,
            Self::Unbounded { .. } => f64::INFINITY,
        }
    }

    pub fn report(&self) -> Option<&DesignReport> {
        match self {
            Self::Solved(report) => Some(report),
            Self::Unbounded { .. } => None,
        }
    }

    pub fn into_report(self) -> Option<DesignReport> {
        match self {
            Self::Solved(report) => Some(report),
            Self::Unbounded { .. } => None,
        }
    }
}

const BARRIER_GROWTH: f64 = 8.0;
const MAX_NEWTON: usize = 200;
const MAX_OUTER: usize = 80;

/// Minimizes the pointwise maximum of a finite family of convex terms over
/// the occupancy polytope.
///
/// The epigraph problem `min t s.t. f_i(rho) <= t, rho >= 0, rho in Omega`
/// is solved by a log-barrier method restricted to reachable triplets, so
/// iterates stay strictly inside the polytope. The barrier weight is grown
/// until the duality-gap bound `(m + n) / s` falls below `tol` relative to
/// the value.
pub fn minimize_pointwise_max(mdp: &MdpSpec, objectives: &[Objective], tol: f64) -> Result<DesignOutcome> {
    let shape = mdp.shape();
    if objectives.is_empty() {
        return Err(Error::InvalidArgument("the objective family is empty".into()));
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(alloc::format!("tolerance must be positive, got {tol}")));
    }
    for (i, objective) in objectives.iter().enumerate() {
        if objective.inverse.shape() != shape || objective.linear.as_ref().is_some_and(|l| l.shape() != shape) {
            return Err(Error::Dimension(alloc::format!("objective {i} has the wrong shape")));
        }
        let coefficients =
            objective.inverse.as_slice().iter().chain(objective.linear.iter().flat_map(|l| l.as_slice()));
        if coefficients.clone().any(|c| !c.is_finite()) || !objective.constant.is_finite() {
            return Err(Error::InvalidArgument(alloc::format!("objective {i} is not finite")));
        }
        if objective.inverse.as_slice().iter().any(|&c| c < 0.0) {
            return Err(Error::InvalidArgument(alloc::format!("objective {i} has a negative inverse coefficient")));
        }
    }

    let (reachable, mask) = reachable_triplets(mdp);
    for (i, objective) in objectives.iter().enumerate() {
        if let Some(x) = (0..mask.len()).find(|&x| !mask[x] && objective.inverse.as_slice()[x] > 0.0) {
            let (h, s, a) = shape.unindex(x);
            return Ok(DesignOutcome::Unbounded { objective: i, h, s, a });
        }
    }

    let start = uniform_occupancy(mdp);
    let problem = Reduced::new(&reachable, objectives);
    let rho0: Vec<f64> = reachable.iter().map(|&x| start.as_slice()[x]).collect();

    let scale = problem.magnitude(&rho0);
    if scale == 0.0 {
        // every term vanishes identically
        return Ok(DesignOutcome::Solved(DesignReport {
            value: objectives.iter().map(|o| o.evaluate(&start)).fold(f64::NEG_INFINITY, f64::max),
            optimizer: start,
            certificate: 0.0,
            iterations: 0,
            smoothing_parameter: 0.0,
        }));
    }
    let problem = problem.scaled(1.0 / scale);
    let eq = Equality::flow(mdp, &reachable, 1);
    let (rho, gap, iterations, weight) = problem.solve(&eq, &rho0, tol);

    let mut table = Table::zeros(shape);
    for (&x, &r) in reachable.iter().zip(&rho) {
        table.as_mut_slice()[x] = r;
    }
    let evaluate = |rho: &Table| objectives.iter().map(|o| o.evaluate(rho)).fold(f64::NEG_INFINITY, f64::max);
    let raw = evaluate(&table);
    let optimizer = super::repair(mdp, table);
    let value = evaluate(&optimizer);
    // the gap bounds the raw iterate; replaying its policy may cost a little more
    let drift = if raw.is_finite() { (value - raw).max(0.0) } else { 0.0 };
    Ok(DesignOutcome::Solved(DesignReport {
        optimizer,
        value,
        certificate: gap * scale + drift,
        iterations,
        smoothing_parameter: weight * scale,
    }))
}

/// The design problem restricted to reachable coordinates, with duplicate
/// objectives removed.
struct Reduced {
    n: usize,
    terms: Vec<Term>,
}

struct Term {
    // (coordinate, inverse coefficient, linear coefficient), nonzero only
    entries: Vec<(usize, f64, f64)>,
    constant: f64,
}

impl Term {
    #[inline]
    fn value(&self, rho: &[f64]) -> f64 {
        self.constant + self.entries.iter().map(|&(x, a, b)| a / rho[x] + b * rho[x]).sum::<f64>()
    }
}

impl Reduced {
    fn new(reachable: &[usize], objectives: &[Objective]) -> Self {
        let mut seen = BTreeSet::new();
        let mut terms = Vec::new();
        for objective in objectives {
            let mut entries = Vec::new();
            for (j, &x) in reachable.iter().enumerate() {
                let a = objective.inverse.as_slice()[x];
                let b = objective.linear.as_ref().map_or(0.0, |l| l.as_slice()[x]);
                if a != 0.0 || b != 0.0 {
                    entries.push((j, a, b));
                }
            }
            let key: Vec<u64> = entries
                .iter()
                .flat_map(|&(j, a, b)| [j as u64, a.to_bits(), b.to_bits()])
                .chain([objective.constant.to_bits()])
                .collect();
            if seen.insert(key) {
                terms.push(Term { entries, constant: objective.constant });
            }
        }
        Self { n: reachable.len(), terms }
    }

    fn magnitude(&self, rho: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|t| {
                libm::fabs(t.constant)
                    + t.entries.iter().map(|&(x, a, b)| a / rho[x] + libm::fabs(b) * rho[x]).sum::<f64>()
            })
            .fold(0.0, f64::max)
    }

    fn scaled(mut self, factor: f64) -> Self {
        for term in &mut self.terms {
            term.constant *= factor;
            for entry in &mut term.entries {
                entry.1 *= factor;
                entry.2 *= factor;
            }
        }
        self
    }

    fn max_value(&self, rho: &[f64]) -> f64 {
        self.terms.iter().map(|t| t.value(rho)).fold(f64::NEG_INFINITY, f64::max)
    }

    /// Returns `(rho, gap bound, newton steps, final 1/s)`.
    fn solve(&self, eq: &Equality, rho: &[f64], tol: f64) -> (Vec<f64>, f64, usize, f64) {
        let n = self.n;
        let inequalities = (self.terms.len() + n) as f64;
        // variables (rho, t)
        let mut x = rho.to_vec();
        x.push(self.max_value(rho) + 1.0);
        let mut epigraph = Epigraph { problem: self, weight: 1.0 };
        let mut steps = 0;
        for _ in 0..MAX_OUTER {
            let (taken, decrement) = center(&epigraph, eq, &mut x, MAX_NEWTON);
            steps += taken;
            let gap = (inequalities + decrement) / epigraph.weight;
            if gap <= tol * libm::fabs(self.max_value(&x[..n])).max(1e-9) {
                x.truncate(n);
                return (x, gap, steps, 1.0 / epigraph.weight);
            }
            epigraph.weight *= BARRIER_GROWTH;
        }
        let weight = epigraph.weight / BARRIER_GROWTH;
        x.truncate(n);
        (x, inequalities / weight, steps, 1.0 / weight)
    }
}

/// `s·t - sum_i ln(t - f_i(rho)) - sum_x ln rho_x`.
struct Epigraph<'a> {
    problem: &'a Reduced,
    weight: f64,
}

impl Barrier for Epigraph<'_> {
    fn value(&self, x: &[f64]) -> Option<f64> {
        let n = self.problem.n;
        let (rho, t) = (&x[..n], x[n]);
        let mut value = self.weight * t;
        for &r in rho {
            if !(r > 0.0) {
                return None;
            }
            value -= ln(r);
        }
        for term in &self.problem.terms {
            let slack = t - term.value(rho);
            if !(slack > 0.0) {
                return None;
            }
            value -= ln(slack);
        }
        Some(value)
    }

    fn derivatives(&self, x: &[f64], grad: &mut [f64], hess: &mut [f64]) {
        let n = self.problem.n;
        let dim = n + 1;
        let (rho, t) = (&x[..n], x[n]);
        grad[n] = self.weight;
        for (j, &r) in rho.iter().enumerate() {
            grad[j] -= 1.0 / r;
            hess[j * dim + j] += 1.0 / (r * r);
        }
        let mut term_grad = vec![0.0; n];
        for term in &self.problem.terms {
            let inv = 1.0 / (t - term.value(rho));
            let inv2 = inv * inv;
            for &(j, a, b) in &term.entries {
                let r = rho[j];
                term_grad[j] = b - a / (r * r);
                hess[j * dim + j] += 2.0 * a / (r * r * r) * inv;
            }
            // -ln(t - f) has gradient (grad f, -1)/slack and Hessian
            // hess f/slack + (grad f, -1)(grad f, -1)^T/slack^2
            grad[n] -= inv;
            hess[n * dim + n] += inv2;
            for &(j, _, _) in &term.entries {
                let gj = term_grad[j];
                grad[j] += gj * inv;
                hess[j * dim + n] -= gj * inv2;
                hess[n * dim + j] -= gj * inv2;
                for &(k, _, _) in &term.entries {
                    hess[j * dim + k] += gj * term_grad[k] * inv2;
                }
            }
        }
    }
}
