mod common;

use common::*;
use pacbound_core::mdp::{occupancy_of_policy, value_of_policy, DeterministicPolicy, MdpSpec, StochasticPolicy};
use pacbound_core::sim::{
    beta, collect, derive_seed, deviation_event, sample_episode, value_diff_estimate, RewardEstimates,
};
use pacbound_core::Shape;

fn two_by_two() -> MdpSpec {
    let shape = Shape::new(2, 2, 2).unwrap();
    let transitions = vec![0.7, 0.3, 0.2, 0.8, 0.5, 0.5, 0.9, 0.1];
    let rewards = vec![0.1, 0.4, 0.3, 0.2, 0.6, 0.0, 0.5, 0.9];
    MdpSpec::new(shape, 0, transitions, rewards).unwrap()
}

fn three_stage() -> MdpSpec {
    let mut rng = rng(77);
    random_mdp(&mut rng, Shape::new(3, 3, 2).unwrap())
}

#[test]
fn first_reward_is_centred() {
    let mdp = MdpSpec::bandit(&[0.0]).unwrap();
    let policy = StochasticPolicy::uniform(mdp.shape());
    let k = 100_000u64;
    let mut estimates = RewardEstimates::new(mdp.shape());
    collect(&mdp, &policy, 2024, 0, k, &mut estimates);
    assert_eq!(estimates.counts().get(0, 0, 0), k);
    assert!(estimates.mean(0, 0, 0).abs() <= 4.0 / (k as f64).sqrt());
}

#[test]
fn episode_returns_match_policy_values() {
    let mdp = three_stage();
    let policy = StochasticPolicy::uniform(mdp.shape());
    let k = 100_000u64;
    let (mut sum, mut sq) = (0.0, 0.0);
    for episode in 0..k {
        let total: f64 = sample_episode(&mdp, &policy, 5, episode).steps.iter().map(|s| s.reward).sum();
        sum += total;
        sq += total * total;
    }
    let mean = sum / k as f64;
    let sd = (sq / k as f64 - mean * mean).sqrt();
    let value = value_of_policy(&mdp, &policy).unwrap();
    assert!((mean - value).abs() <= 4.0 * sd / (k as f64).sqrt(), "{mean} vs {value}");
}

#[test]
fn visit_frequencies_track_the_occupancy() {
    let mdp = three_stage();
    let policy = StochasticPolicy::uniform(mdp.shape());
    let k = 10_000u64;
    let mut estimates = RewardEstimates::new(mdp.shape());
    collect(&mdp, &policy, 6, 0, k, &mut estimates);
    let rho = occupancy_of_policy(&mdp, &policy).unwrap();
    for (&n, &p) in estimates.counts().as_slice().iter().zip(rho.as_slice()) {
        let freq = n as f64 / k as f64;
        assert!((freq - p).abs() <= 5.0 * (p * (1.0 - p) / k as f64).sqrt() + 1e-12, "{freq} vs {p}");
    }
    let shape = mdp.shape();
    for h in 0..shape.horizon {
        let visits: u64 = (0..shape.states)
            .flat_map(|s| (0..shape.actions).map(move |a| (s, a)))
            .map(|(s, a)| estimates.counts().get(h, s, a))
            .sum();
        assert_eq!(visits, k);
    }
}

#[test]
fn reward_estimates_are_unbiased() {
    let mdp = two_by_two();
    let policy = StochasticPolicy::uniform(mdp.shape());
    let runs = 200;
    let (mut total, mut visits) = (0.0, 0u64);
    for run in 0..runs {
        let mut estimates = RewardEstimates::new(mdp.shape());
        collect(&mdp, &policy, derive_seed(31, run), 0, 50, &mut estimates);
        total += estimates.mean(1, 1, 0);
        visits += estimates.counts().get(1, 1, 0);
    }
    let mean = total / runs as f64;
    let n_bar = visits as f64 / runs as f64;
    assert!((mean - mdp.reward(1, 1, 0)).abs() <= 4.0 / (runs as f64 * n_bar).sqrt());
}

#[test]
fn batches_merge_in_any_order() {
    let mdp = three_stage();
    let policy = StochasticPolicy::uniform(mdp.shape());
    let mut whole = RewardEstimates::new(mdp.shape());
    collect(&mdp, &policy, 9, 0, 3000, &mut whole);
    let batches: Vec<RewardEstimates> = (0..3)
        .map(|b| {
            let mut e = RewardEstimates::new(mdp.shape());
            collect(&mdp, &policy, 9, b * 1000, 1000, &mut e);
            e
        })
        .collect();
    for order in [[0, 1, 2], [2, 0, 1], [1, 2, 0]] {
        let mut merged = RewardEstimates::new(mdp.shape());
        for b in order {
            merged.merge(&batches[b]);
        }
        assert_eq!(merged.counts(), whole.counts());
        assert!(merged.means().max_abs_diff(&whole.means()) <= 1e-10);
    }
}

#[test]
fn value_difference_radius_uses_the_threshold() {
    let mdp = two_by_two();
    let shape = mdp.shape();
    let mut estimates = RewardEstimates::new(shape);
    collect(&mdp, &StochasticPolicy::uniform(shape), 3, 0, 400, &mut estimates);
    let pi = DeterministicPolicy::constant(shape, 0).unwrap().to_stochastic();
    let other = DeterministicPolicy::constant(shape, 1).unwrap().to_stochastic();
    let diff = value_diff_estimate(&mdp, &estimates, &pi, &other, 0.1).unwrap();
    let (p, q) = (occupancy_of_policy(&mdp, &pi).unwrap(), occupancy_of_policy(&mdp, &other).unwrap());
    let mut spread = 0.0;
    let mut estimate = 0.0;
    for x in 0..shape.triplets() {
        let d = p.as_slice()[x] - q.as_slice()[x];
        let n = estimates.counts().as_slice()[x] as f64;
        if d != 0.0 {
            spread += d * d / n;
            estimate += d * estimates.means().as_slice()[x];
        }
    }
    let b = beta(shape, 400, 0.1).unwrap();
    assert!((diff.radius - (b * spread).sqrt()).abs() <= 1e-12 * diff.radius);
    assert!((diff.estimate - estimate).abs() <= 1e-12);
    let same = value_diff_estimate(&mdp, &estimates, &pi, &pi, 0.1).unwrap();
    assert_eq!((same.estimate, same.radius), (0.0, 0.0));
}

#[test]
fn deviation_event_covers_most_runs() {
    let mdp = two_by_two();
    let policy = StochasticPolicy::uniform(mdp.shape());
    let delta = 0.1;
    let runs = 200u64;
    let held = (0..runs)
        .filter(|&run| deviation_event(&mdp, &policy, derive_seed(17, run), 300, delta, 1 << 10).unwrap().holds)
        .count();
    let rate = held as f64 / runs as f64;
    let sigma = ((1.0 - delta) * delta / runs as f64).sqrt();
    assert!(rate >= 1.0 - delta - 3.0 * sigma, "coverage {rate}");
}

#[test]
fn deviation_event_starts_once_covered() {
    let mdp = MdpSpec::bandit(&[0.0, 5.0]).unwrap();
    let policy = DeterministicPolicy::constant(mdp.shape(), 0).unwrap().to_stochastic();
    // the second arm is never played, so nothing is checked
    let check = deviation_event(&mdp, &policy, 1, 100, 0.1, 16).unwrap();
    assert_eq!((check.first_checked, check.worst_ratio), (None, 0.0));
    let check = deviation_event(&mdp, &StochasticPolicy::uniform(mdp.shape()), 1, 2000, 0.1, 16).unwrap();
    assert!(check.first_checked.is_some_and(|t| t >= 2));
    assert!(check.holds && check.worst_ratio < 1.0);
}
