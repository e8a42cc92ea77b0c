//! Seeded episodes with unit-variance Gaussian rewards, streaming reward
//! estimates and the concentration thresholds `beta` and `beta_bpi`.
//!
//! Every episode draws from its own generator, keyed by `(seed, episode)`,
//! so traces do not depend on the order in which episodes are produced.

use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_distr::StandardNormal;
use rand_xoshiro::Xoshiro256PlusPlus;

use crate::math::{ln, sqrt};
use crate::mdp::{MdpSpec, Occupancy, StochasticPolicy};
use crate::{Error, Result, Shape, Table};

/// Visit counts `n_h(s, a)` and the number of episodes `t`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Counts {
    shape: Shape,
    visits: Vec<u64>,
    episodes: u64,
}

impl Counts {
    pub fn new(shape: Shape) -> Self {
        Self { shape, visits: vec![0; shape.triplets()], episodes: 0 }
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    #[inline]
    pub fn get(&self, h: usize, s: usize, a: usize) -> u64 {
        self.visits[self.shape.index(h, s, a)]
    }

    pub fn as_slice(&self) -> &[u64] {
        &self.visits
    }

    pub fn episodes(&self) -> u64 {
        self.episodes
    }

    pub fn to_table(&self) -> Table {
        Table::from_vec(self.shape, self.visits.iter().map(|&n| n as f64).collect())
            .expect("counts have the table shape")
    }

    /// First reachable triplet that was never visited.
    pub fn first_unvisited(&self, mdp: &MdpSpec) -> Option<(usize, usize, usize)> {
        let (reachable, _) = crate::flow::reachable_triplets(mdp);
        reachable.into_iter().find(|&x| self.visits[x] == 0).map(|x| self.shape.unindex(x))
    }
}

/// Reward sums and counts; the estimate is the empirical mean, or 0 where
/// nothing was observed.
#[derive(Clone, Debug, PartialEq)]
pub struct RewardEstimates {
    counts: Counts,
    sums: Vec<f64>,
}

impl RewardEstimates {
    pub fn new(shape: Shape) -> Self {
        Self { counts: Counts::new(shape), sums: vec![0.0; shape.triplets()] }
    }

    pub fn counts(&self) -> &Counts {
        &self.counts
    }

    pub fn episodes(&self) -> u64 {
        self.counts.episodes
    }

    #[inline]
    pub fn mean(&self, h: usize, s: usize, a: usize) -> f64 {
        let i = self.counts.shape.index(h, s, a);
        match self.counts.visits[i] {
            0 => 0.0,
            n => self.sums[i] / n as f64,
        }
    }

    pub fn means(&self) -> Table {
        let shape = self.counts.shape;
        Table::from_fn(shape, |h, s, a| self.mean(h, s, a))
    }

    #[inline]
    fn record(&mut self, index: usize, reward: f64) {
        self.counts.visits[index] += 1;
        self.sums[index] += reward;
    }

    pub fn update(&mut self, trace: &EpisodeTrace) {
        let shape = self.counts.shape;
        for (h, step) in trace.steps.iter().enumerate() {
            self.record(shape.index(h, step.state, step.action), step.reward);
        }
        self.counts.episodes += 1;
    }

    /// Adds the observations of `other` (same shape).
    pub fn merge(&mut self, other: &RewardEstimates) {
        assert_eq!(self.counts.shape, other.counts.shape, "merging estimates of different shapes");
        for (n, m) in self.counts.visits.iter_mut().zip(&other.counts.visits) {
            *n += m;
        }
        for (s, o) in self.sums.iter_mut().zip(&other.sums) {
            *s += o;
        }
        self.counts.episodes += other.counts.episodes;
    }
}

/// One transition of an episode.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Step {
    pub state: usize,
    pub action: usize,
    pub reward: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpisodeTrace {
    /// One step per stage.
    pub steps: Vec<Step>,
    pub seed: u64,
    /// Stream index within `seed`.
    pub episode: u64,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Generator of episode `episode` under root seed `seed`.
pub fn episode_rng(seed: u64, episode: u64) -> Xoshiro256PlusPlus {
    Xoshiro256PlusPlus::seed_from_u64(splitmix64(seed ^ splitmix64(episode)))
}

/// Independent root seed for the `index`-th of several runs.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    splitmix64(splitmix64(seed).wrapping_add(index))
}

#[inline]
fn inverse_cdf(row: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    for (i, &p) in row.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    // round-off: last index with positive mass
    row.iter().rposition(|&p| p > 0.0).unwrap_or(row.len() - 1)
}

fn play(mdp: &MdpSpec, policy: &StochasticPolicy, rng: &mut impl Rng, mut visit: impl FnMut(usize, Step)) {
    let mut state = mdp.initial_state();
    for h in 0..mdp.horizon() {
        let action = inverse_cdf(policy.row(h, state), rng.random::<f64>());
        let noise: f64 = rng.sample(StandardNormal);
        visit(h, Step { state, action, reward: mdp.reward(h, state, action) + noise });
        if h + 1 < mdp.horizon() {
            state = inverse_cdf(mdp.transition_row(h, state, action), rng.random::<f64>());
        }
    }
}

/// Samples episode `episode` of the stream `seed`: actions from `policy`,
/// transitions by inverse CDF over the kernel, rewards `N(r_h(s, a), 1)`.
pub fn sample_episode(mdp: &MdpSpec, policy: &StochasticPolicy, seed: u64, episode: u64) -> EpisodeTrace {
    let mut rng = episode_rng(seed, episode);
    let mut steps = Vec::with_capacity(mdp.horizon());
    play(mdp, policy, &mut rng, |_, step| steps.push(step));
    EpisodeTrace { steps, seed, episode }
}

/// Plays episodes `first..first + count` of stream `seed` straight into
/// `estimates`; equivalent to sampling and updating one by one.
pub fn collect(
    mdp: &MdpSpec,
    policy: &StochasticPolicy,
    seed: u64,
    first: u64,
    count: u64,
    estimates: &mut RewardEstimates,
) {
    let shape = mdp.shape();
    for episode in first..first + count {
        let mut rng = episode_rng(seed, episode);
        play(mdp, policy, &mut rng, |h, step| estimates.record(shape.index(h, step.state, step.action), step.reward));
        estimates.counts.episodes += 1;
    }
}

fn check_delta(delta: f64) -> Result<()> {
    if delta > 0.0 && delta < 1.0 {
        Ok(())
    } else {
        Err(Error::Delta(delta))
    }
}

/// `beta(t, delta) = 4 ln(1/delta) + 12 S H ln(A (1 + t))`.
pub fn beta(shape: Shape, t: u64, delta: f64) -> Result<f64> {
    check_delta(delta)?;
    let (s, a, h) = (shape.states as f64, shape.actions as f64, shape.horizon as f64);
    Ok(4.0 * ln(1.0 / delta) + 12.0 * s * h * ln(a * (1.0 + t as f64)))
}

/// `beta_bpi(t, delta) = 4 H^2 ln(1/delta) + 24 S A H^3 ln(1 + t)`.
pub fn beta_bpi(shape: Shape, t: u64, delta: f64) -> Result<f64> {
    check_delta(delta)?;
    let (s, a, h) = (shape.states as f64, shape.actions as f64, shape.horizon as f64);
    Ok(4.0 * h * h * ln(1.0 / delta) + 24.0 * s * a * h * h * h * ln(1.0 + t as f64))
}

/// Estimated value difference of two occupancies with its confidence radius.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ValueDiff {
    /// `sum (p - p') r_hat`.
    pub estimate: f64,
    /// `sqrt(beta · sum (p - p')^2 / n)`.
    pub radius: f64,
}

/// Plug-in estimate of `V^p - V^q` for a given threshold value `beta`.
/// Triplets where both occupancies vanish are skipped.
pub fn occupancy_diff_estimate(
    estimates: &RewardEstimates,
    p: &Occupancy,
    q: &Occupancy,
    beta: f64,
) -> Result<ValueDiff> {
    let shape = estimates.counts.shape;
    if p.shape() != shape || q.shape() != shape {
        return Err(Error::Dimension("occupancies must match the estimates' shape".into()));
    }
    let mut estimate = 0.0;
    let mut spread = 0.0;
    for i in 0..shape.triplets() {
        let d = p.as_slice()[i] - q.as_slice()[i];
        if d == 0.0 {
            continue;
        }
        let n = estimates.counts.visits[i];
        if n == 0 {
            let (h, s, a) = shape.unindex(i);
            return Err(Error::Unvisited { h, s, a });
        }
        estimate += d * estimates.sums[i] / n as f64;
        spread += d * d / n as f64;
    }
    Ok(ValueDiff { estimate, radius: sqrt(beta * spread) })
}

/// `(V_hat^pi - V_hat^pi', radius)` with the threshold `beta(t, delta)` at
/// the current episode count. Every reachable triplet must have been
/// visited.
pub fn value_diff_estimate(
    mdp: &MdpSpec,
    estimates: &RewardEstimates,
    pi: &StochasticPolicy,
    other: &StochasticPolicy,
    delta: f64,
) -> Result<ValueDiff> {
    if let Some((h, s, a)) = estimates.counts.first_unvisited(mdp) {
        return Err(Error::Unvisited { h, s, a });
    }
    let p = crate::mdp::occupancy_of_policy(mdp, pi)?;
    let q = crate::mdp::occupancy_of_policy(mdp, other)?;
    let threshold = beta(mdp.shape(), estimates.episodes(), delta)?;
    occupancy_diff_estimate(estimates, &p, &q, threshold)
}

/// Outcome of tracking the deviation event along one stream of episodes.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DeviationCheck {
    /// Whether the event held at every checked episode count.
    pub holds: bool,
    /// First episode count at which every reachable triplet was visited.
    pub first_checked: Option<u64>,
    /// First episode count at which the event failed.
    pub first_violation: Option<u64>,
    /// Largest `((p - p')^T (r_hat - r))^2 / (beta(t, delta) sum (p - p')^2 / n)`.
    pub worst_ratio: f64,
}

/// Plays `episodes` episodes of `policy` and checks, after every episode
/// once all reachable triplets are visited, that
/// `|(p - p')^T (r_hat - r)| <= sqrt(beta(t, delta) sum (p - p')^2 / n)`
/// for every pair of deterministic occupancies.
pub fn deviation_event(
    mdp: &MdpSpec,
    policy: &StochasticPolicy,
    seed: u64,
    episodes: u64,
    delta: f64,
    cap: usize,
) -> Result<DeviationCheck> {
    check_delta(delta)?;
    let shape = mdp.shape();
    let set = crate::mdp::PolicySet::enumerate(mdp, cap)?;
    let classes = set.distinct();
    // sparse differences of every pair of distinct occupancies
    let mut pairs: Vec<Vec<(usize, f64)>> = Vec::new();
    for (k, &i) in classes.iter().enumerate() {
        for &j in &classes[k + 1..] {
            let (p, q) = (set.occupancy(i).as_slice(), set.occupancy(j).as_slice());
            pairs.push((0..shape.triplets()).filter(|&x| p[x] != q[x]).map(|x| (x, p[x] - q[x])).collect());
        }
    }
    let rewards = mdp.rewards().as_slice();
    let mut estimates = RewardEstimates::new(shape);
    let mut out = DeviationCheck { holds: true, first_checked: None, first_violation: None, worst_ratio: 0.0 };
    let mut covered = false;
    for episode in 0..episodes {
        collect(mdp, policy, seed, episode, 1, &mut estimates);
        if !covered {
            covered = estimates.counts.first_unvisited(mdp).is_none();
            if !covered {
                continue;
            }
            out.first_checked = Some(episode + 1);
        }
        let threshold = beta(shape, episode + 1, delta)?;
        for pair in &pairs {
            let (mut error, mut spread) = (0.0, 0.0);
            for &(x, d) in pair {
                let n = estimates.counts.visits[x] as f64;
                error += d * (estimates.sums[x] / n - rewards[x]);
                spread += d * d / n;
            }
            let ratio = error * error / (threshold * spread);
            out.worst_ratio = out.worst_ratio.max(ratio);
            if ratio > 1.0 && out.holds {
                out.holds = false;
                out.first_violation = Some(episode + 1);
            }
        }
    }
    Ok(out)
}
