use alloc::collections::BTreeMap;
use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;

use super::eval::{dot, occupancy_of_deterministic};
use super::{optimal_values, DeterministicPolicy, MdpSpec, Occupancy, OptimalValues};
use crate::math::abs;
use crate::{Error, Result, Shape, Table};

/// Default cap on `A^(S·H)` for brute-force enumeration.
pub const DEFAULT_POLICY_CAP: usize = 4096;

/// Occupancies closer than this (max-abs) are the same state-action
/// distribution.
const OCCUPANCY_TOL: f64 = 1e-9;

fn check_cap(shape: Shape, cap: usize) -> Result<usize> {
    match shape.deterministic_policy_count() {
        Some(count) if count <= cap as u128 => Ok(count as usize),
        Some(count) => Err(Error::TooLarge { policies: count.to_string(), cap }),
        None => Err(Error::TooLarge { policies: alloc::format!("{}^{}", shape.actions, shape.stage_states()), cap }),
    }
}

/// All `A^(S·H)` deterministic policies, in mixed-radix order (policy 0
/// plays action 0 everywhere).
pub fn enumerate_deterministic_policies(shape: Shape, cap: usize) -> Result<Vec<DeterministicPolicy>> {
    let count = check_cap(shape, cap)?;
    Ok((0..count as u128).map(|i| DeterministicPolicy::from_index(shape, i)).collect())
}

/// Enumerated deterministic policies with their occupancies and values.
#[derive(Clone, Debug)]
pub struct PolicySet {
    policies: Vec<DeterministicPolicy>,
    occupancies: Vec<Occupancy>,
    values: Vec<f64>,
    // representative (lowest index) of each policy's occupancy class
    class: Vec<usize>,
}

impl PolicySet {
    pub fn enumerate(mdp: &MdpSpec, cap: usize) -> Result<Self> {
        let policies = enumerate_deterministic_policies(mdp.shape(), cap)?;
        let occupancies: Vec<Occupancy> = policies.iter().map(|pi| occupancy_of_deterministic(mdp, pi)).collect();
        let values = occupancies.iter().map(|rho| rho.dot(mdp.rewards())).collect();

        // Occupancies are keyed on a 1e-12 grid; exact duplicates (policies
        // differing only where they never go) always collide.
        let mut seen: BTreeMap<Vec<i64>, usize> = BTreeMap::new();
        let class = occupancies
            .iter()
            .enumerate()
            .map(|(i, rho)| {
                let key = rho.as_slice().iter().map(|x| libm::round(x * 1e12) as i64).collect();
                *seen.entry(key).or_insert(i)
            })
            .collect();
        Ok(Self { policies, occupancies, values, class })
    }

    pub fn len(&self) -> usize {
        self.policies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.policies.is_empty()
    }

    pub fn policy(&self, i: usize) -> &DeterministicPolicy {
        &self.policies[i]
    }

    pub fn policies(&self) -> &[DeterministicPolicy] {
        &self.policies
    }

    pub fn occupancy(&self, i: usize) -> &Occupancy {
        &self.occupancies[i]
    }

    pub fn occupancies(&self) -> &[Occupancy] {
        &self.occupancies
    }

    /// `V_1^pi(s_1)` of policy `i`.
    pub fn value(&self, i: usize) -> f64 {
        self.values[i]
    }

    /// Lowest index of a policy sharing the occupancy of policy `i`.
    pub fn representative(&self, i: usize) -> usize {
        self.class[i]
    }

    /// One representative per distinct occupancy, in increasing index order.
    pub fn distinct(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.class[i] == i).collect()
    }

    /// Index of `policy` in the enumeration order.
    pub fn index_of(policy: &DeterministicPolicy) -> usize {
        let base = policy.shape().actions;
        policy.actions().iter().rev().fold(0, |acc, &a| acc * base + a)
    }
}

/// Gaps, near-optimal sets and reachability for one instance.
#[derive(Clone, Debug)]
pub struct GapProfile {
    pub epsilon: f64,
    pub optimal: OptimalValues,
    pub policies: PolicySet,
    /// `Delta(pi) = V_1^* - V_1^pi` per enumerated policy; values within
    /// round-off of zero are snapped to exactly zero.
    pub gaps: Vec<f64>,
    /// `Delta_h(s, a) = max_b Q_h^*(s, b) - Q_h^*(s, a)`.
    pub value_gaps: Table,
    /// Indices of `Pi^epsilon`.
    pub near_optimal: Vec<usize>,
    /// `Delta_min`: smallest positive gap when every optimal policy shares
    /// one occupancy, zero otherwise; `+inf` when no policy has a positive
    /// gap.
    pub delta_min: f64,
    /// Smallest positive gap regardless of uniqueness (`+inf` if none).
    pub positive_min_gap: f64,
    /// Whether all optimal policies share a single occupancy `p^*`.
    pub unique_optimal_occupancy: bool,
    /// Index of the greedy optimal policy.
    pub optimal_index: usize,
    /// `W_h(s) = sup_pi p_h^pi(s)`, laid out `[h][s]`.
    pub reachability: Vec<f64>,
}

impl GapProfile {
    pub fn shape(&self) -> Shape {
        self.value_gaps.shape()
    }

    pub fn gap(&self, i: usize) -> f64 {
        self.gaps[i]
    }

    pub fn optimal_value(&self) -> f64 {
        self.optimal.value
    }

    pub fn optimal_occupancy(&self) -> &Occupancy {
        self.policies.occupancy(self.optimal_index)
    }

    /// `Pi^eps` for another `eps`, sharing this profile's gaps.
    pub fn near_optimal_set(&self, epsilon: f64) -> Vec<usize> {
        (0..self.gaps.len()).filter(|&i| self.gaps[i] <= epsilon).collect()
    }

    pub fn is_reachable(&self, h: usize, s: usize) -> bool {
        self.reachability[h * self.shape().states + s] > 0.0
    }

    /// Reachability of the triplet with flat index `i`.
    pub fn is_reachable_triplet(&self, i: usize) -> bool {
        let (h, s, _) = self.shape().unindex(i);
        self.is_reachable(h, s)
    }
}

/// Builds the full gap profile by enumerating `Pi^D`.
pub fn gap_profile(mdp: &MdpSpec, epsilon: f64, cap: usize) -> Result<GapProfile> {
    if !(epsilon >= 0.0) {
        return Err(Error::InvalidArgument(alloc::format!("epsilon must be >= 0, got {epsilon}")));
    }
    let shape = mdp.shape();
    let policies = PolicySet::enumerate(mdp, cap)?;
    let optimal = optimal_values(mdp);
    let v_star = optimal.value;
    let snap = gap_tolerance(mdp);
    let gaps: Vec<f64> = (0..policies.len())
        .map(|i| {
            let gap = v_star - policies.value(i);
            if gap <= snap {
                0.0
            } else {
                gap
            }
        })
        .collect();

    let value_gaps = Table::from_fn(shape, |h, s, a| {
        let best = optimal.q.row(h, s).iter().copied().fold(f64::NEG_INFINITY, f64::max);
        (best - optimal.q.get(h, s, a)).max(0.0)
    });

    let optimal_index = PolicySet::index_of(&optimal.policy);
    let p_star = policies.occupancy(optimal_index);
    let unique_optimal_occupancy = (0..policies.len())
        .filter(|&i| gaps[i] == 0.0)
        .all(|i| policies.occupancy(i).max_abs_diff(p_star) <= OCCUPANCY_TOL);
    let positive_min_gap = gaps.iter().copied().filter(|&g| g > 0.0).fold(f64::INFINITY, f64::min);
    let delta_min = if unique_optimal_occupancy { positive_min_gap } else { 0.0 };

    let near_optimal = (0..policies.len()).filter(|&i| gaps[i] <= epsilon).collect();
    Ok(GapProfile {
        epsilon,
        optimal,
        policies,
        gaps,
        value_gaps,
        near_optimal,
        delta_min,
        positive_min_gap,
        unique_optimal_occupancy,
        optimal_index,
        reachability: reachability(mdp),
    })
}

/// Gaps below this are round-off.
pub(crate) fn gap_tolerance(mdp: &MdpSpec) -> f64 {
    1e-10 * (1.0 + mdp.horizon() as f64 * mdp.rewards().max_abs())
}

/// `W_h(s) = sup_pi P^pi(s_h = s)` for every `(h, s)`, laid out `[h][s]`.
///
/// One backward max-probability pass per target pair.
pub fn reachability(mdp: &MdpSpec) -> Vec<f64> {
    let shape = mdp.shape();
    let n = shape.states;
    let mut out = vec![0.0; shape.stage_states()];
    let mut value = vec![0.0; n];
    let mut prev = vec![0.0; n];
    for h in 0..shape.horizon {
        for target in 0..n {
            value.iter_mut().for_each(|v| *v = 0.0);
            value[target] = 1.0;
            for j in (0..h).rev() {
                for s in 0..n {
                    prev[s] = (0..shape.actions).map(|a| dot(mdp.transition_row(j, s, a), &value)).fold(0.0, f64::max);
                }
                core::mem::swap(&mut value, &mut prev);
            }
            out[h * n + target] = value[mdp.initial_state()];
        }
    }
    out
}

/// `d(pi, pi') = sum_h TV(p_h^pi, p_h^pi')^2`, with TV half the L1 distance
/// over `(s, a)`.
pub fn tv_policy_divergence(mdp: &MdpSpec, pi: &DeterministicPolicy, other: &DeterministicPolicy) -> f64 {
    let p = occupancy_of_deterministic(mdp, pi);
    let q = occupancy_of_deterministic(mdp, other);
    tv_divergence(&p, &q)
}

pub(crate) fn tv_divergence(p: &Occupancy, q: &Occupancy) -> f64 {
    let shape = p.shape();
    (0..shape.horizon)
        .map(|h| {
            let tv: f64 = p.stage(h).iter().zip(q.stage(h)).map(|(x, y)| abs(x - y)).sum::<f64>() / 2.0;
            tv * tv
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn enumeration_counts() {
        let count = |h, s, a, cap| enumerate_deterministic_policies(Shape::new(h, s, a).unwrap(), cap);
        assert_eq!(count(2, 2, 2, 4096).unwrap().len(), 16);
        assert_eq!(count(1, 1, 3, 4096).unwrap().len(), 3);
        let all = count(3, 3, 2, 1024).unwrap();
        assert_eq!(all.len(), 512);
        let distinct: alloc::collections::BTreeSet<_> = all.iter().map(|p| p.actions().to_vec()).collect();
        assert_eq!(distinct.len(), 512);
        assert!(matches!(count(3, 3, 2, 511), Err(Error::TooLarge { .. })));
    }

    #[test]
    fn index_of_inverts_from_index() {
        let shape = Shape::new(2, 2, 3).unwrap();
        for i in 0..81u128 {
            let p = DeterministicPolicy::from_index(shape, i);
            assert_eq!(PolicySet::index_of(&p), i as usize);
        }
    }

    #[test]
    fn bandit_gaps() {
        let mdp = MdpSpec::bandit(&[1.0, 0.4]).unwrap();
        let profile = gap_profile(&mdp, 0.5, 16).unwrap();
        assert_eq!(profile.near_optimal, [0]);
        assert!((profile.delta_min - 0.6).abs() < 1e-12);
        assert!(profile.unique_optimal_occupancy);
    }

    #[test]
    fn tied_bandit_has_zero_delta_min() {
        let mdp = MdpSpec::bandit(&[1.0, 1.0]).unwrap();
        let profile = gap_profile(&mdp, 0.0, 16).unwrap();
        assert_eq!(profile.near_optimal, [0, 1]);
        assert_eq!(profile.delta_min, 0.0);
        assert!(!profile.unique_optimal_occupancy);
        assert_eq!(profile.positive_min_gap, f64::INFINITY);
    }

    #[test]
    fn tv_divergence_bandit_arms() {
        let mdp = MdpSpec::bandit(&[1.0, 0.0]).unwrap();
        let a = DeterministicPolicy::constant(mdp.shape(), 0).unwrap();
        let b = DeterministicPolicy::constant(mdp.shape(), 1).unwrap();
        assert_eq!(tv_policy_divergence(&mdp, &a, &a), 0.0);
        assert_eq!(tv_policy_divergence(&mdp, &a, &b), 1.0);
    }

    #[test]
    fn policies_differing_off_path_share_a_class() {
        // H = 1, S = 2: only s_1 is reachable, so the action in the other
        // state never matters.
        let shape = Shape::new(1, 2, 2).unwrap();
        let mdp = MdpSpec::new(shape, 0, vec![], vec![1.0, 0.0, 0.0, 0.0]).unwrap();
        let set = PolicySet::enumerate(&mdp, 16).unwrap();
        assert_eq!(set.distinct(), [0, 1]);
        assert_eq!(set.representative(2), 0);
        let profile = gap_profile(&mdp, 0.0, 16).unwrap();
        // two optimal policies, one occupancy: p* is unique
        assert!(profile.unique_optimal_occupancy);
        assert_eq!(profile.delta_min, 1.0);
        assert_eq!(profile.reachability, [1.0, 0.0]);
    }

    #[test]
    fn negative_epsilon_rejected() {
        let mdp = MdpSpec::bandit(&[1.0, 0.0]).unwrap();
        assert!(gap_profile(&mdp, -0.1, 16).is_err());
    }
}
