//! Instance-dependent complexity measures.
//!
//! All inner maxima over deterministic policies are exact: policies are
//! enumerated once per instance (see [`Instance`]) and policies sharing an
//! occupancy measure are merged. Outer minimizations over `Omega` go through
//! [`minimize_pointwise_max`], whose certificate bounds the distance to the
//! true minimum. `+inf` is an ordinary value.

use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;

use crate::flow::{min_flow_phi, minimize_pointwise_max, CoveringTarget, DesignOutcome, Objective};
use crate::math::ln;
use crate::mdp::{
    gap_profile, occupancy_of_policy, DeterministicPolicy, GapProfile, MdpSpec, Occupancy, StochasticPolicy,
    DEFAULT_POLICY_CAP,
};
use crate::{Error, Result, Table};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Quantity {
    /// `T(M, pi^eps, eps)`.
    CharacteristicTime,
    /// `C_LB(M, eps)`.
    LowerBound,
    /// The exact-identification bound for a unique optimal occupancy.
    ExactIdentification,
    /// `C_PEDEL(M, eps)`.
    Pedel,
    /// `C(M, eps)`, the single-design variant of `C_PEDEL`.
    PedelSingleDesign,
    /// `C_PRINCIPLE(M, eps)`.
    Principle,
}

impl Quantity {
    pub fn name(self) -> &'static str {
        match self {
            Self::CharacteristicTime => "characteristic_time",
            Self::LowerBound => "c_lb",
            Self::ExactIdentification => "exact_id_bound",
            Self::Pedel => "c_pedel",
            Self::PedelSingleDesign => "c_pedel_single",
            Self::Principle => "c_principle",
        }
    }
}

#[derive(Clone, Debug)]
pub struct ComplexityReport {
    pub quantity: Quantity,
    pub epsilon: f64,
    /// Non-negative, possibly `+inf`.
    pub value: f64,
    /// The value before any `delta`-dependent factor; equal to `value` for
    /// quantities without one.
    pub factor: f64,
    /// Optimizers of the designs behind the value (one per design).
    pub witness: Vec<Occupancy>,
    /// Witnessing policies, e.g. the minimizing `pi^eps` of `C_LB`.
    pub policies: Vec<DeterministicPolicy>,
    /// Upper bound on `value - true value` (scaled like `value`).
    pub certificate: f64,
}

impl ComplexityReport {
    fn infinite(quantity: Quantity, epsilon: f64, policies: Vec<DeterministicPolicy>) -> Self {
        Self {
            quantity,
            epsilon,
            value: f64::INFINITY,
            factor: f64::INFINITY,
            witness: Vec::new(),
            policies,
            certificate: 0.0,
        }
    }

    /// Certified lower bound on the true value.
    pub fn lower_bound(&self) -> f64 {
        (self.value - self.certificate).max(0.0)
    }
}

/// An MDP together with its enumerated policies and gaps, shared by every
/// complexity computation on it.
#[derive(Clone, Debug)]
pub struct Instance<'a> {
    mdp: &'a MdpSpec,
    profile: GapProfile,
    distinct: Vec<usize>,
    tol: f64,
}

impl<'a> Instance<'a> {
    pub fn new(mdp: &'a MdpSpec, cap: usize, tol: f64) -> Result<Self> {
        if !(tol > 0.0) {
            return Err(Error::InvalidArgument(alloc::format!("tolerance must be positive, got {tol}")));
        }
        let profile = gap_profile(mdp, 0.0, cap)?;
        let distinct = profile.policies.distinct();
        Ok(Self { mdp, profile, distinct, tol })
    }

    pub fn mdp(&self) -> &MdpSpec {
        self.mdp
    }

    pub fn profile(&self) -> &GapProfile {
        &self.profile
    }

    pub fn tol(&self) -> f64 {
        self.tol
    }

    fn snap(&self) -> f64 {
        crate::mdp::gap_tolerance(self.mdp)
    }

    fn check_epsilon(epsilon: f64) -> Result<()> {
        if epsilon >= 0.0 && epsilon.is_finite() {
            Ok(())
        } else {
            Err(Error::InvalidArgument(alloc::format!("epsilon must be finite and >= 0, got {epsilon}")))
        }
    }

    fn index_of(&self, policy: &DeterministicPolicy) -> Result<usize> {
        if policy.shape() != self.mdp.shape() {
            return Err(Error::Dimension("policy shape does not match the MDP".into()));
        }
        Ok(crate::mdp::PolicySet::index_of(policy))
    }

    fn solve(&self, objectives: &[Objective]) -> Result<Option<(f64, Occupancy, f64)>> {
        if objectives.is_empty() {
            let rho = crate::mdp::uniform_occupancy(self.mdp);
            return Ok(Some((0.0, rho, 0.0)));
        }
        Ok(match minimize_pointwise_max(self.mdp, objectives, self.tol)? {
            DesignOutcome::Solved(r) => Some((r.value, r.optimizer, r.certificate)),
            DesignOutcome::Unbounded { .. } => None,
        })
    }

    /// Objectives of `T(M, pi^eps, eps)` for the policy with index `i`, or
    /// `None` when the value is infinite.
    fn characteristic_objectives(&self, i: usize, epsilon: f64) -> Option<Vec<Objective>> {
        let shape = self.mdp.shape();
        let set = &self.profile.policies;
        let reference = set.occupancy(set.representative(i));
        let base_gap = self.profile.gap(i);
        let mut objectives = Vec::new();
        for &j in &self.distinct {
            let other = set.occupancy(j);
            let diff: Vec<f64> = other.as_slice().iter().zip(reference.as_slice()).map(|(a, b)| a - b).collect();
            if diff.iter().all(|&d| d == 0.0) {
                continue;
            }
            let margin = self.profile.gap(j) - base_gap + epsilon;
            if margin <= self.snap() {
                return None;
            }
            let scale = 2.0 / (margin * margin);
            let inverse = Table::from_vec(shape, diff.iter().map(|d| scale * d * d).collect()).unwrap();
            objectives.push(Objective::inverse(inverse));
        }
        Some(objectives)
    }

    fn characteristic_at(&self, i: usize, epsilon: f64) -> Result<ComplexityReport> {
        let quantity = Quantity::CharacteristicTime;
        let policy = self.profile.policies.policy(i).clone();
        let gap = self.profile.gap(i);
        if gap > epsilon {
            return Err(Error::NotEpsilonOptimal { gap, epsilon });
        }
        let Some(objectives) = self.characteristic_objectives(i, epsilon) else {
            return Ok(ComplexityReport::infinite(quantity, epsilon, vec![policy]));
        };
        Ok(match self.solve(&objectives)? {
            Some((value, rho, certificate)) => ComplexityReport {
                quantity,
                epsilon,
                value,
                factor: value,
                witness: vec![rho],
                policies: vec![policy],
                certificate,
            },
            None => ComplexityReport::infinite(quantity, epsilon, vec![policy]),
        })
    }

    /// `T(M, pi^eps, eps) = 2 min_rho max_pi sum (p^pi - p^pi_eps)^2 / (rho (Delta(pi) - Delta(pi_eps) + eps)^2)`.
    pub fn characteristic_time(&self, pi_eps: &DeterministicPolicy, epsilon: f64) -> Result<ComplexityReport> {
        Self::check_epsilon(epsilon)?;
        let i = self.index_of(pi_eps)?;
        self.characteristic_at(i, epsilon)
    }

    /// `C_LB(M, eps) = min_{pi^eps in Pi^eps} T(M, pi^eps, eps)`.
    pub fn c_lb(&self, epsilon: f64) -> Result<ComplexityReport> {
        Self::check_epsilon(epsilon)?;
        let mut best: Option<ComplexityReport> = None;
        let mut seen = Vec::new();
        for i in self.profile.near_optimal_set(epsilon) {
            // T only depends on the occupancy of pi^eps
            let class = self.profile.policies.representative(i);
            if seen.contains(&class) {
                continue;
            }
            seen.push(class);
            let report = self.characteristic_at(i, epsilon)?;
            if best.as_ref().map_or(true, |b| report.value < b.value) {
                best = Some(report);
            }
        }
        let mut report = best.expect("Pi^eps contains the optimal policy");
        report.quantity = Quantity::LowerBound;
        Ok(report)
    }

    /// `2 min_rho max_{Delta(pi) > 0} sum (p^pi - p^*)^2 / (rho Delta(pi)^2) · ln(1 / (2.4 delta))`,
    /// clamped at zero. `factor` holds the part before the logarithm.
    pub fn exact_id_bound(&self, delta: f64) -> Result<ComplexityReport> {
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::Delta(delta));
        }
        if !self.profile.unique_optimal_occupancy {
            return Err(Error::NonUniqueOptimum);
        }
        let mut report = self.characteristic_at(self.profile.optimal_index, 0.0)?;
        let log = ln(1.0 / (2.4 * delta)).max(0.0);
        report.quantity = Quantity::ExactIdentification;
        report.factor = report.value;
        report.value = if report.factor.is_infinite() && log == 0.0 { 0.0 } else { report.factor * log };
        report.certificate *= log;
        Ok(report)
    }

    /// `Delta(pi) v eps v Delta_min` per enumerated policy.
    fn pedel_denominators(&self, epsilon: f64) -> Vec<f64> {
        let floor = epsilon.max(self.profile.delta_min);
        self.profile.gaps.iter().map(|&g| g.max(floor)).collect()
    }

    fn pedel_objectives(&self, epsilon: f64, stage: Option<usize>) -> Vec<Objective> {
        let shape = self.mdp.shape();
        let denominators = self.pedel_denominators(epsilon);
        self.distinct
            .iter()
            .map(|&j| {
                let p = self.profile.policies.occupancy(j);
                let d = denominators[j];
                let inverse = Table::from_fn(shape, |h, s, a| {
                    if stage.is_some_and(|stage| stage != h) || d.is_infinite() {
                        0.0
                    } else {
                        let x = p.get(h, s, a);
                        x * x / (d * d)
                    }
                });
                Objective::inverse(inverse)
            })
            .collect()
    }

    fn require_positive_floor(&self, epsilon: f64) -> Result<()> {
        if epsilon.max(self.profile.delta_min) > 0.0 {
            Ok(())
        } else {
            Err(Error::InvalidArgument("eps v Delta_min must be positive".into()))
        }
    }

    /// `H^4 sum_h min_rho max_pi sum_{s,a} p_h^pi(s,a)^2 / (rho_h(s,a) (Delta(pi) v eps v Delta_min)^2)`.
    /// Infinite when `eps v Delta_min = 0`.
    pub fn c_pedel(&self, epsilon: f64) -> Result<ComplexityReport> {
        Self::check_epsilon(epsilon)?;
        let quantity = Quantity::Pedel;
        if self.require_positive_floor(epsilon).is_err() {
            return Ok(ComplexityReport::infinite(quantity, epsilon, Vec::new()));
        }
        let h4 = libm::pow(self.mdp.horizon() as f64, 4.0);
        let mut value = 0.0;
        let mut certificate = 0.0;
        let mut witness = Vec::new();
        for h in 0..self.mdp.horizon() {
            match self.solve(&self.pedel_objectives(epsilon, Some(h)))? {
                Some((v, rho, c)) => {
                    value += v;
                    certificate += c;
                    witness.push(rho);
                }
                None => return Ok(ComplexityReport::infinite(quantity, epsilon, Vec::new())),
            }
        }
        Ok(ComplexityReport {
            quantity,
            epsilon,
            value: h4 * value,
            factor: h4 * value,
            witness,
            policies: Vec::new(),
            certificate: h4 * certificate,
        })
    }

    /// `C(M, eps) = min_rho max_pi sum_{h,s,a} p_h^pi(s,a)^2 / (rho_h(s,a) (Delta(pi) v eps v Delta_min)^2)`.
    pub fn c_pedel_single(&self, epsilon: f64) -> Result<ComplexityReport> {
        Self::check_epsilon(epsilon)?;
        let quantity = Quantity::PedelSingleDesign;
        if self.require_positive_floor(epsilon).is_err() {
            return Ok(ComplexityReport::infinite(quantity, epsilon, Vec::new()));
        }
        Ok(match self.solve(&self.pedel_objectives(epsilon, None))? {
            Some((value, rho, certificate)) => ComplexityReport {
                quantity,
                epsilon,
                value,
                factor: value,
                witness: vec![rho],
                policies: Vec::new(),
                certificate,
            },
            None => ComplexityReport::infinite(quantity, epsilon, Vec::new()),
        })
    }

    /// `a_h(s,a) = sup_{pi in Pi^S} p_h^pi(s,a) / max(eps, Delta(pi))^2`.
    ///
    /// `Delta` is affine on `Omega`, so the supremum of the ratio over the
    /// polytope is reached on a segment between two vertices, i.e. between
    /// two deterministic occupancies. Each segment is checked at its ends,
    /// where `Delta = eps`, and at the stationary point of `p / Delta^2`.
    pub fn principle_ratios(&self, epsilon: f64) -> Result<Table> {
        Self::check_epsilon(epsilon)?;
        let shape = self.mdp.shape();
        let set = &self.profile.policies;
        let gaps: Vec<f64> = self.distinct.iter().map(|&j| self.profile.gap(j)).collect();
        let eps2 = epsilon * epsilon;
        let ratio = |p: f64, d: f64| -> f64 {
            if p <= 0.0 {
                return 0.0;
            }
            let m = epsilon.max(d);
            if m <= 0.0 {
                f64::INFINITY
            } else {
                p / (m * m)
            }
        };
        let mut out = Table::zeros(shape);
        for x in 0..shape.triplets() {
            let p: Vec<f64> = self.distinct.iter().map(|&j| set.occupancy(j).as_slice()[x]).collect();
            let mut best = 0.0f64;
            for i in 0..p.len() {
                best = best.max(ratio(p[i], gaps[i]));
                if best.is_infinite() {
                    break;
                }
                for j in i + 1..p.len() {
                    let (p0, d0) = (p[i], gaps[i]);
                    let (dp, dd) = (p[j] - p0, gaps[j] - d0);
                    if dp == 0.0 && dd == 0.0 {
                        continue;
                    }
                    let mut candidates = [f64::NAN; 2];
                    if dd != 0.0 && eps2 > 0.0 {
                        candidates[0] = (epsilon - d0) / dd;
                    }
                    if dp != 0.0 && dd != 0.0 {
                        candidates[1] = (dp * d0 - 2.0 * dd * p0) / (dp * dd);
                    }
                    for alpha in candidates {
                        if alpha > 0.0 && alpha < 1.0 {
                            best = best.max(ratio(p0 + alpha * dp, (d0 + alpha * dd).max(0.0)));
                        }
                    }
                }
            }
            out.as_mut_slice()[x] = best;
        }
        Ok(out)
    }

    /// `H^3 min_{pi_exp} max_{h,s,a} sup_{pi in Pi^S} p_h^pi(s,a) / (p_h^exp(s,a) max(eps, Delta(pi))^2)`,
    /// i.e. `H^3 phi*(a)` for the ratios `a` of [`Self::principle_ratios`].
    pub fn c_principle(&self, epsilon: f64) -> Result<ComplexityReport> {
        let quantity = Quantity::Principle;
        let ratios = self.principle_ratios(epsilon)?;
        if ratios.as_slice().iter().any(|r| r.is_infinite()) {
            return Ok(ComplexityReport::infinite(quantity, epsilon, Vec::new()));
        }
        let h3 = libm::pow(self.mdp.horizon() as f64, 3.0);
        let flow = min_flow_phi(self.mdp, &CoveringTarget::new(ratios)?, self.tol)?;
        Ok(ComplexityReport {
            quantity,
            epsilon,
            value: h3 * flow.value,
            factor: h3 * flow.value,
            witness: vec![flow.report.optimizer],
            policies: Vec::new(),
            certificate: h3 * flow.report.certificate,
        })
    }

    /// `min_{pi^eps in Pi^eps} max_{Delta(pi) <= eps v Delta_min} d(pi^eps, pi)`.
    pub fn diversity_constant(&self, epsilon: f64) -> Result<f64> {
        Self::check_epsilon(epsilon)?;
        let set = &self.profile.policies;
        let reach = epsilon.max(self.profile.delta_min);
        let candidates: Vec<usize> = self.distinct.iter().copied().filter(|&j| self.profile.gap(j) <= reach).collect();
        let mut best = f64::INFINITY;
        for i in self.profile.near_optimal_set(epsilon) {
            if set.representative(i) != i {
                continue;
            }
            let worst = candidates
                .iter()
                .map(|&j| crate::mdp::tv_divergence(set.occupancy(i), set.occupancy(j)))
                .fold(0.0, f64::max);
            best = best.min(worst);
        }
        Ok(best)
    }

    /// Checks `C_PEDEL <= 8 H^5 C_LB + 4 H^6 / (eps v Delta_min)^2`, and the
    /// diversity refinement when the diversity constant is positive.
    pub fn verify_pedel_vs_lb(&self, epsilon: f64) -> Result<PedelCheck> {
        Self::check_epsilon(epsilon)?;
        self.require_positive_floor(epsilon)?;
        let h = self.mdp.horizon() as f64;
        let pedel = self.c_pedel(epsilon)?;
        let lb = self.c_lb(epsilon)?;
        let floor = epsilon.max(self.profile.delta_min);
        let bound = 8.0 * libm::pow(h, 5.0) * lb.value + 4.0 * libm::pow(h, 6.0) / (floor * floor);
        let lhs = pedel.lower_bound();
        let diversity = self.diversity_constant(epsilon)?;
        let diversity_bound = (diversity > 0.0).then(|| 2.0 * libm::pow(h, 5.0) * (4.0 + h / diversity) * lb.value);
        Ok(PedelCheck {
            c_pedel: pedel.value,
            c_pedel_certificate: pedel.certificate,
            c_lb: lb.value,
            bound,
            holds: lhs <= bound,
            slack: bound - lhs,
            diversity,
            diversity_bound,
            diversity_holds: diversity_bound.map_or(true, |b| lhs <= b),
        })
    }

    /// Compares `max_pi sum p^pi^2 / (eta max(eps, Delta(pi))^2)` over sampled
    /// stochastic policies with four times its deterministic minimax value,
    /// at the deterministic optimizer `eta`.
    ///
    /// The sample consists of `samples` random policies (rows drawn
    /// uniformly from the simplex) followed by `samples` random mixtures of
    /// two near-optimal deterministic occupancies.
    pub fn verify_stochastic_vs_deterministic(
        &self,
        epsilon: f64,
        samples: usize,
        seed: u64,
    ) -> Result<StochasticCheck> {
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(Error::InvalidArgument(alloc::format!("epsilon must be positive, got {epsilon}")));
        }
        let shape = self.mdp.shape();
        let set = &self.profile.policies;
        let objectives: Vec<Objective> = self
            .distinct
            .iter()
            .map(|&j| {
                let d = epsilon.max(self.profile.gap(j));
                Objective::inverse(set.occupancy(j).table().map(|x| x * x / (d * d)))
            })
            .collect();
        let report = minimize_pointwise_max(self.mdp, &objectives, self.tol)?
            .into_report()
            .expect("squared occupancies vanish off the reachable set");
        let eta = report.optimizer.clone();
        let v_star = self.profile.optimal_value();
        let objective = |rho: &Occupancy| -> f64 {
            let gap = (v_star - rho.dot(self.mdp.rewards())).max(0.0);
            let d = epsilon.max(gap);
            rho.as_slice()
                .iter()
                .zip(eta.as_slice())
                .map(|(&p, &e)| if p == 0.0 { 0.0 } else { p * p / e })
                .sum::<f64>()
                / (d * d)
        };

        let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
        let mut sampled_max = 0.0f64;
        let mut evaluated = 0;
        for _ in 0..samples {
            let mut probs = vec![0.0; shape.triplets()];
            for row in probs.chunks_mut(shape.actions) {
                for p in row.iter_mut() {
                    *p = -ln(1.0 - rng.random::<f64>());
                }
                let total: f64 = row.iter().sum();
                row.iter_mut().for_each(|p| *p /= total);
            }
            let pi = StochasticPolicy::new(shape, probs)?;
            sampled_max = sampled_max.max(objective(&occupancy_of_policy(self.mdp, &pi)?));
            evaluated += 1;
        }
        let near: Vec<usize> = self.distinct.iter().copied().filter(|&j| self.profile.gap(j) <= epsilon).collect();
        let pool = if near.len() >= 2 { near } else { self.distinct.clone() };
        for _ in 0..samples {
            let i = pool[rng.random_range(0..pool.len())];
            let j = pool[rng.random_range(0..pool.len())];
            let alpha: f64 = rng.random();
            let mix = Table::from_vec(
                shape,
                set.occupancy(i)
                    .as_slice()
                    .iter()
                    .zip(set.occupancy(j).as_slice())
                    .map(|(a, b)| alpha * a + (1.0 - alpha) * b)
                    .collect(),
            )?;
            sampled_max = sampled_max.max(objective(&Occupancy::from_table(mix)));
            evaluated += 1;
        }
        let deterministic = report.value;
        let bound = 4.0 * deterministic + self.tol * deterministic;
        Ok(StochasticCheck {
            deterministic,
            sampled_max,
            samples: evaluated,
            holds: sampled_max <= bound,
            ratio: if deterministic > 0.0 { sampled_max / deterministic } else { 0.0 },
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PedelCheck {
    pub c_pedel: f64,
    pub c_pedel_certificate: f64,
    pub c_lb: f64,
    /// `8 H^5 C_LB + 4 H^6 / (eps v Delta_min)^2`.
    pub bound: f64,
    pub holds: bool,
    /// `bound - (C_PEDEL - certificate)`.
    pub slack: f64,
    pub diversity: f64,
    /// `2 H^5 (4 + H / c) C_LB` for `c` the diversity constant, if positive.
    pub diversity_bound: Option<f64>,
    pub diversity_holds: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StochasticCheck {
    /// Deterministic minimax value.
    pub deterministic: f64,
    /// Largest sampled stochastic objective at the deterministic optimizer.
    pub sampled_max: f64,
    pub samples: usize,
    pub holds: bool,
    /// `sampled_max / deterministic`.
    pub ratio: f64,
}

pub fn characteristic_time(
    mdp: &MdpSpec,
    pi_eps: &DeterministicPolicy,
    epsilon: f64,
    tol: f64,
) -> Result<ComplexityReport> {
    Instance::new(mdp, DEFAULT_POLICY_CAP, tol)?.characteristic_time(pi_eps, epsilon)
}

pub fn c_lb(mdp: &MdpSpec, epsilon: f64, tol: f64) -> Result<ComplexityReport> {
    Instance::new(mdp, DEFAULT_POLICY_CAP, tol)?.c_lb(epsilon)
}

pub fn exact_id_bound(mdp: &MdpSpec, delta: f64, tol: f64) -> Result<ComplexityReport> {
    Instance::new(mdp, DEFAULT_POLICY_CAP, tol)?.exact_id_bound(delta)
}

pub fn c_pedel(mdp: &MdpSpec, epsilon: f64, tol: f64) -> Result<ComplexityReport> {
    Instance::new(mdp, DEFAULT_POLICY_CAP, tol)?.c_pedel(epsilon)
}

pub fn c_principle(mdp: &MdpSpec, epsilon: f64, tol: f64) -> Result<ComplexityReport> {
    Instance::new(mdp, DEFAULT_POLICY_CAP, tol)?.c_principle(epsilon)
}

pub fn diversity_constant(mdp: &MdpSpec, epsilon: f64, cap: usize) -> Result<f64> {
    Instance::new(mdp, cap, crate::flow::DEFAULT_TOL)?.diversity_constant(epsilon)
}

pub fn verify_pedel_vs_lb(mdp: &MdpSpec, epsilon: f64, tol: f64) -> Result<PedelCheck> {
    Instance::new(mdp, DEFAULT_POLICY_CAP, tol)?.verify_pedel_vs_lb(epsilon)
}

pub fn verify_stochastic_vs_deterministic(
    mdp: &MdpSpec,
    epsilon: f64,
    samples: usize,
    seed: u64,
    tol: f64,
) -> Result<StochasticCheck> {
    Instance::new(mdp, DEFAULT_POLICY_CAP, tol)?.verify_stochastic_vs_deterministic(epsilon, samples, seed)
}
