mod common;

use common::*;
use pacbound_core::mdp::{
    gap_profile, occupancy_of_policy, optimal_values, reachability, uniform_occupancy, value_of_policy, MdpSpec,
    StochasticPolicy,
};
use pacbound_core::{Shape, Table};
use proptest::prelude::*;
use rand::Rng;

fn random_policy(rng: &mut impl Rng, shape: Shape) -> StochasticPolicy {
    let mut probs = Vec::with_capacity(shape.triplets());
    for _ in 0..shape.stage_states() {
        let row: Vec<f64> = (0..shape.actions).map(|_| rng.random::<f64>() + 1e-3).collect();
        let total: f64 = row.iter().sum();
        probs.extend(row.iter().map(|x| x / total));
    }
    StochasticPolicy::new(shape, probs).unwrap()
}

/// Backward induction written out directly: `Q_h^*(s, a)` as a flat vector.
fn q_star(mdp: &MdpSpec) -> Vec<f64> {
    let shape = mdp.shape();
    let (hh, ss, aa) = (shape.horizon, shape.states, shape.actions);
    let mut q = vec![0.0; hh * ss * aa];
    let mut v = vec![0.0; ss];
    for h in (0..hh).rev() {
        for s in 0..ss {
            for a in 0..aa {
                let future = if h + 1 < hh { dot(mdp.transition_row(h, s, a), &v) } else { 0.0 };
                q[(h * ss + s) * aa + a] = mdp.reward(h, s, a) + future;
            }
        }
        for s in 0..ss {
            v[s] = q[(h * ss + s) * aa..(h * ss + s + 1) * aa].iter().copied().fold(f64::NEG_INFINITY, f64::max);
        }
    }
    q
}

fn shifted(mdp: &MdpSpec, per_stage: &[f64]) -> MdpSpec {
    let shape = mdp.shape();
    let rewards = Table::from_fn(shape, |h, s, a| mdp.reward(h, s, a) + per_stage[h]);
    mdp.with_rewards(rewards).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn value_equals_occupancy_dot_reward(seed in any::<u64>()) {
        let mut rng = rng(seed);
        let mdp = random_instance(&mut rng);
        let policy = random_policy(&mut rng, mdp.shape());
        let value = value_of_policy(&mdp, &policy).unwrap();
        let rho = occupancy_of_policy(&mdp, &policy).unwrap();
        prop_assert!((value - rho.dot(mdp.rewards())).abs() <= 1e-12 * (1.0 + value.abs()));
        let direct = occupancy(&mdp, policy.as_slice());
        prop_assert!(rho.as_slice().iter().zip(&direct).all(|(a, b)| (a - b).abs() <= 1e-14));
    }

    #[test]
    fn occupancies_conserve_flow(seed in any::<u64>()) {
        let mut rng = rng(seed);
        let mdp = random_instance(&mut rng);
        let shape = mdp.shape();
        let rho = occupancy_of_policy(&mdp, &random_policy(&mut rng, shape)).unwrap();
        rho.check(&mdp, 1e-12).unwrap();
        for h in 0..shape.horizon {
            let mass: f64 = rho.stage(h).iter().sum();
            prop_assert!((mass - 1.0).abs() <= 1e-12);
        }
        uniform_occupancy(&mdp).check(&mdp, 1e-12).unwrap();
    }

    #[test]
    fn planning_matches_vertex_enumeration(seed in any::<u64>()) {
        let mut rng = rng(seed);
        let mdp = random_instance(&mut rng);
        let best = vertices(&mdp).iter().map(|v| dot(v, mdp.rewards().as_slice())).fold(f64::NEG_INFINITY, f64::max);
        let optimal = optimal_values(&mdp);
        prop_assert!((optimal.value - best).abs() <= 1e-12);
        let q = q_star(&mdp);
        prop_assert!(optimal.q.as_slice().iter().zip(&q).all(|(a, b)| (a - b).abs() <= 1e-12));
    }

    #[test]
    fn policy_gaps_match_enumeration(seed in any::<u64>()) {
        let mut rng = rng(seed);
        let mdp = random_instance(&mut rng);
        let profile = gap_profile(&mdp, 0.1, 1 << 12).unwrap();
        let values: Vec<f64> = vertices(&mdp).iter().map(|v| dot(v, mdp.rewards().as_slice())).collect();
        let best = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        prop_assert_eq!(profile.gaps.len(), values.len());
        for (i, v) in values.iter().enumerate() {
            prop_assert!((profile.gap(i) - (best - v)).abs() <= 1e-9);
            prop_assert_eq!(profile.near_optimal.contains(&i), profile.gap(i) <= 0.1);
        }
        prop_assert!(profile.gap(profile.optimal_index) == 0.0);
    }

    #[test]
    fn local_gaps_match_backward_induction(seed in any::<u64>()) {
        let mut rng = rng(seed);
        let mdp = random_instance(&mut rng);
        let shape = mdp.shape();
        let profile = gap_profile(&mdp, 0.0, 1 << 12).unwrap();
        let q = q_star(&mdp);
        for row in 0..shape.stage_states() {
            let slice = &q[row * shape.actions..(row + 1) * shape.actions];
            let top = slice.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            for a in 0..shape.actions {
                let got = profile.value_gaps.as_slice()[row * shape.actions + a];
                prop_assert!((got - (top - slice[a])).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn stagewise_shift_leaves_gaps_unchanged(seed in any::<u64>(), shift in prop::collection::vec(-5.0f64..5.0, 3)) {
        let mut rng = rng(seed);
        let mdp = random_instance(&mut rng);
        let moved = shifted(&mdp, &shift);
        let a = gap_profile(&mdp, 0.1, 1 << 12).unwrap();
        let b = gap_profile(&moved, 0.1, 1 << 12).unwrap();
        let total: f64 = shift[..mdp.horizon()].iter().sum();
        prop_assert!((b.optimal_value() - a.optimal_value() - total).abs() <= 1e-9);
        prop_assert!(a.gaps.iter().zip(&b.gaps).all(|(x, y)| (x - y).abs() <= 1e-9));
        prop_assert!(a.value_gaps.max_abs_diff(&b.value_gaps) <= 1e-9);
        prop_assert_eq!(a.unique_optimal_occupancy, b.unique_optimal_occupancy);
    }

    #[test]
    fn reachability_is_the_best_state_probability(seed in any::<u64>()) {
        let mut rng = rng(seed);
        let mdp = random_instance(&mut rng);
        let shape = mdp.shape();
        let w = reachability(&mdp);
        let verts = vertices(&mdp);
        for h in 0..shape.horizon {
            for s in 0..shape.states {
                let best = verts
                    .iter()
                    .map(|v| v[(h * shape.states + s) * shape.actions..][..shape.actions].iter().sum::<f64>())
                    .fold(0.0, f64::max);
                prop_assert!((w[h * shape.states + s] - best).abs() <= 1e-12);
            }
        }
    }
}

#[test]
fn flat_rewards_have_no_gaps() {
    let mut rng = rng(5);
    let mdp = random_mdp(&mut rng, Shape::new(3, 2, 2).unwrap());
    let flat = mdp.with_rewards(Table::filled(mdp.shape(), 0.5)).unwrap();
    let profile = gap_profile(&flat, 0.0, 1 << 12).unwrap();
    assert!(profile.gaps.iter().all(|&g| g == 0.0));
    assert_eq!(profile.near_optimal.len(), profile.gaps.len());
    assert_eq!(profile.delta_min, 0.0);
}
