//! Experimental Design with Implicit Policy Elimination, with known
//! transitions and unit-variance Gaussian rewards.
//!
//! The active set is explicit: it holds the occupancies of the deterministic
//! policies that survived every elimination step (one per occupancy class).
//! Burn-in uses MinFlow on the target `ln(3SAH/delta)` and then plays
//! doubling rounds of the same policy until every reachable triplet has
//! been visited.

use alloc::vec::Vec;

use crate::flow::{
    constrained_linear_max, min_flow_phi, minimize_pointwise_max, policy_from_flow, CoveringTarget, DesignOutcome,
    Objective,
};
use crate::math::{ceil, ln, pow2i, sqrt};
use crate::mdp::{gap_profile, GapProfile, MdpSpec, Occupancy, StochasticPolicy, DEFAULT_POLICY_CAP};
use crate::sim::{beta_bpi, collect, RewardEstimates};
use crate::{Error, Result, Shape, Table};

/// Which radius the lower confidence bound subtracts.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum RadiusMode {
    /// `sqrt(2^(2-k) beta_bpi)`.
    #[default]
    Analysis,
    /// `sqrt(2^(2-k) H beta_bpi)`.
    Pseudocode,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EdipeConfig {
    pub epsilon: f64,
    pub delta: f64,
    pub seed: u64,
    pub max_phases: u32,
    pub max_episodes: u64,
    pub radius: RadiusMode,
    /// Solver tolerance for the phase designs and the confidence bound.
    pub tol: f64,
    pub policy_cap: usize,
}

impl EdipeConfig {
    pub fn new(epsilon: f64, delta: f64, seed: u64) -> Self {
        Self {
            epsilon,
            delta,
            seed,
            max_phases: 40,
            max_episodes: 1 << 40,
            radius: RadiusMode::Analysis,
            tol: 1e-6,
            policy_cap: DEFAULT_POLICY_CAP,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0) || !self.epsilon.is_finite() {
            return Err(Error::InvalidArgument(alloc::format!(
                "epsilon must be positive and finite, got {}",
                self.epsilon
            )));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::Delta(self.delta));
        }
        if self.max_phases == 0 || self.max_phases > 1000 {
            return Err(Error::InvalidArgument("max_phases must lie in 1..=1000".into()));
        }
        if !(self.tol > 0.0) {
            return Err(Error::InvalidArgument("tolerance must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct BurnIn {
    pub estimates: RewardEstimates,
    /// Total burn-in episodes `d_0` (all rounds).
    pub episodes: u64,
    /// `phi*(c^0)`.
    pub phi: f64,
    /// Number of rounds played, the first one of `ceil(phi)` episodes.
    pub rounds: u32,
    pub policy: StochasticPolicy,
}

/// Covers every reachable triplet at least once, starting with
/// `ceil(phi*(c^0))` episodes of the MinFlow policy for
/// `c^0 = ln(3SAH/delta)`. Episodes use indices `0..episodes` of `seed`.
pub fn burn_in(mdp: &MdpSpec, delta: f64, seed: u64, tol: f64) -> Result<BurnIn> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::Delta(delta));
    }
    let shape = mdp.shape();
    let c0 = ln(3.0 * shape.triplets() as f64 / delta);
    let target = CoveringTarget::uniform_on_reachable(mdp, c0)?;
    let flow = min_flow_phi(mdp, &target, tol)?;
    let policy = policy_from_flow(&flow.flow)?;
    let first = (ceil(flow.value) as u64).max(1);
    let mut estimates = RewardEstimates::new(shape);
    collect(mdp, &policy, seed, 0, first, &mut estimates);
    let mut rounds = 1;
    while estimates.counts().first_unvisited(mdp).is_some() {
        let played = estimates.episodes();
        collect(mdp, &policy, seed, played, played, &mut estimates);
        rounds += 1;
    }
    Ok(BurnIn { episodes: estimates.episodes(), estimates, phi: flow.value, rounds, policy })
}

#[derive(Clone, Debug)]
pub struct PhaseDesign {
    /// `E*_k = min_eta max_{rho active} sum rho^2 / eta`.
    pub value: f64,
    pub flow: Occupancy,
    pub certificate: f64,
}

/// Solves the phase's experimental design over an explicit active set.
pub fn solve_phase_design(mdp: &MdpSpec, active: &[&Occupancy], tol: f64) -> Result<PhaseDesign> {
    if active.is_empty() {
        return Err(Error::InvalidArgument("the active set is empty".into()));
    }
    let objectives: Vec<Objective> = active.iter().map(|rho| Objective::inverse(rho.table().map(|x| x * x))).collect();
    match minimize_pointwise_max(mdp, &objectives, tol)? {
        DesignOutcome::Solved(r) => Ok(PhaseDesign { value: r.value, flow: r.optimizer, certificate: r.certificate }),
        DesignOutcome::Unbounded { .. } => unreachable!("occupancies vanish off the reachable set"),
    }
}

/// `sqrt(2^(2-k) [H] beta_bpi(t_k, delta/3))`.
pub fn confidence_radius(shape: Shape, k: u32, t: u64, delta: f64, mode: RadiusMode) -> Result<f64> {
    let b = beta_bpi(shape, t, delta / 3.0)?;
    let h = match mode {
        RadiusMode::Analysis => 1.0,
        RadiusMode::Pseudocode => shape.horizon as f64,
    };
    Ok(sqrt(pow2i(2 - k as i32) * h * b))
}

/// `V_k = sup { rho^T r_hat : rho in Omega, sum rho^2 / n <= 2^-k } - radius`,
/// `-inf` when no occupancy meets the budget.
pub fn lower_confidence_bound(
    mdp: &MdpSpec,
    estimates: &RewardEstimates,
    k: u32,
    delta: f64,
    mode: RadiusMode,
    tol: f64,
) -> Result<f64> {
    let radius = confidence_radius(mdp.shape(), k, estimates.episodes(), delta, mode)?;
    let sup = constrained_linear_max(mdp, &estimates.means(), &estimates.counts().to_table(), pow2i(-(k as i32)), tol)?;
    Ok(sup.value - radius)
}

fn ellipsoid_norm(rho: &Occupancy, counts: &Table) -> f64 {
    rho.as_slice().iter().zip(counts.as_slice()).map(|(&p, &n)| if p == 0.0 { 0.0 } else { p * p / n }).sum()
}

/// Keeps the active occupancies with `rho^T r_hat >= lower` and
/// `sum rho^2 / n <= 2^-k`. If none survives, the one with the largest
/// estimate is kept and the flag is set.
pub fn eliminate(active: &[&Occupancy], estimates: &RewardEstimates, k: u32, lower: f64) -> (Vec<usize>, bool) {
    let means = estimates.means();
    let counts = estimates.counts().to_table();
    let level = pow2i(-(k as i32));
    let kept: Vec<usize> = (0..active.len())
        .filter(|&i| active[i].dot(&means) >= lower && ellipsoid_norm(active[i], &counts) <= level)
        .collect();
    if !kept.is_empty() {
        return (kept, false);
    }
    let best = (0..active.len())
        .max_by(|&i, &j| active[i].dot(&means).total_cmp(&active[j].dot(&means)))
        .expect("active set is non-empty");
    (alloc::vec![best], true)
}

/// `sqrt(2^(2-k) beta_bpi(t_k, delta/3)) <= eps`.
pub fn stopping_check(shape: Shape, k: u32, t: u64, delta: f64, epsilon: f64) -> Result<bool> {
    Ok(confidence_radius(shape, k, t, delta, RadiusMode::Analysis)? <= epsilon)
}

#[derive(Clone, Debug)]
pub struct PhaseRecord {
    pub k: u32,
    pub e_star: f64,
    pub flow: Occupancy,
    pub policy: StochasticPolicy,
    /// `ceil(2^(k+1) E*_k)`.
    pub d_k: u64,
    /// Episodes so far, burn-in included.
    pub t_k: u64,
    pub means: Table,
    pub counts: Table,
    pub v_lower: f64,
    /// Enumeration indices of the policies active after elimination.
    pub active: Vec<usize>,
    pub safeguard: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StopReason {
    Stopped,
    PhaseCap,
    EpisodeCap,
}

#[derive(Clone, Debug)]
pub struct EdipeRun {
    pub config: EdipeConfig,
    pub burn_in: u64,
    pub burn_in_rounds: u32,
    pub phases: Vec<PhaseRecord>,
    /// Enumeration index of the returned policy.
    pub returned_index: usize,
    pub returned: crate::mdp::DeterministicPolicy,
    /// True gap of the returned policy.
    pub returned_gap: f64,
    pub tau: u64,
    pub stop: StopReason,
}

impl EdipeRun {
    pub fn is_epsilon_optimal(&self) -> bool {
        self.returned_gap <= self.config.epsilon
    }
}

pub fn run_edipe(mdp: &MdpSpec, config: &EdipeConfig) -> Result<EdipeRun> {
    config.validate()?;
    let profile = gap_profile(mdp, config.epsilon, config.policy_cap)?;
    run_with_profile(mdp, &profile, config)
}

/// [`run_edipe`] with a precomputed gap profile, for repeated runs on one
/// instance.
pub fn run_with_profile(mdp: &MdpSpec, profile: &GapProfile, config: &EdipeConfig) -> Result<EdipeRun> {
    config.validate()?;
    let set = &profile.policies;
    let shape = mdp.shape();
    let burn = burn_in(mdp, config.delta, config.seed, config.tol)?;
    let mut estimates = burn.estimates;
    let mut active = set.distinct();
    let mut phases = Vec::new();
    let mut stop = StopReason::PhaseCap;

    for k in 1..=config.max_phases {
        let occupancies: Vec<&Occupancy> = active.iter().map(|&i| set.occupancy(i)).collect();
        let design = solve_phase_design(mdp, &occupancies, config.tol)?;
        let policy = policy_from_flow(design.flow.table())?;
        let d_k = ceil(pow2i(k as i32 + 1) * design.value) as u64;
        let t = estimates.episodes();
        if t.saturating_add(d_k) > config.max_episodes {
            stop = StopReason::EpisodeCap;
            break;
        }
        collect(mdp, &policy, config.seed, t, d_k, &mut estimates);

        let v_lower = lower_confidence_bound(mdp, &estimates, k, config.delta, config.radius, config.tol)?;
        let (kept, safeguard) = eliminate(&occupancies, &estimates, k, v_lower);
        active = kept.into_iter().map(|i| active[i]).collect();
        let t_k = estimates.episodes();
        phases.push(PhaseRecord {
            k,
            e_star: design.value,
            flow: design.flow,
            policy,
            d_k,
            t_k,
            means: estimates.means(),
            counts: estimates.counts().to_table(),
            v_lower,
            active: active.clone(),
            safeguard,
        });
        if stopping_check(shape, k, t_k, config.delta, config.epsilon)? {
            stop = StopReason::Stopped;
            break;
        }
    }

    let means = estimates.means();
    let returned_index = *active
        .iter()
        .max_by(|&&i, &&j| set.occupancy(i).dot(&means).total_cmp(&set.occupancy(j).dot(&means)).then(j.cmp(&i)))
        .expect("active set is non-empty");
    Ok(EdipeRun {
        config: config.clone(),
        burn_in: burn.episodes,
        burn_in_rounds: burn.rounds,
        returned: set.policy(returned_index).clone(),
        returned_gap: profile.gap(returned_index),
        returned_index,
        tau: estimates.episodes(),
        phases,
        stop,
    })
}

/// First phase `k` whose stopping test passes when `t_k` is replaced by
/// `t`, i.e. the smallest `k` with `2^(2-k) beta_bpi(t, delta/3) <= eps^2`.
pub fn stopping_phase(shape: Shape, t: u64, delta: f64, epsilon: f64, max_phases: u32) -> Result<Option<u32>> {
    for k in 1..=max_phases {
        if stopping_check(shape, k, t, delta, epsilon)? {
            return Ok(Some(k));
        }
    }
    Ok(None)
}
