//! The structural-property suite run by `pacbound verify`.
//!
//! Each property reports a margin: how far the observed error sits inside
//! its tolerance, positive when the property holds.

use std::path::Path;
use std::time::Instant;

use pacbound_core::complexity::Instance;
use pacbound_core::edipe::{burn_in, solve_phase_design};
use pacbound_core::flow::{min_flow_phi, CoveringTarget};
use pacbound_core::mdp::{
    gap_profile, occupancy_of_policy, optimal_values, value_of_policy, MdpSpec, Occupancy, StochasticPolicy,
};
use pacbound_core::sim::{derive_seed, deviation_event};
use pacbound_core::{Shape, Table};
use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;
use serde::Serialize;

use crate::error::Result;
use crate::format::{parse_mdp, NamedMdp};
use crate::generate::{generate_instances, Family};

const BUNDLED: [(&str, &str); 6] = [
    ("bandit-two-arm.json", include_str!("../instances/bandit-two-arm.json")),
    ("bandit-small-gap.json", include_str!("../instances/bandit-small-gap.json")),
    ("two-by-two.json", include_str!("../instances/two-by-two.json")),
    ("three-state.json", include_str!("../instances/three-state.json")),
    ("tree.json", include_str!("../instances/tree.json")),
    ("flat.json", include_str!("../instances/flat.json")),
];

/// Instances shipped with the crate.
pub fn bundled_instances() -> Vec<NamedMdp> {
    BUNDLED.iter().map(|(file, text)| parse_mdp(text, Path::new(file)).expect("bundled instances are valid")).collect()
}

pub fn bundled(name: &str) -> Option<NamedMdp> {
    bundled_instances().into_iter().find(|n| n.name == name)
}

#[derive(Clone, Debug)]
pub struct VerifyConfig {
    /// Instances checked on top of the bundled ones.
    pub extra: Vec<NamedMdp>,
    /// Random instances per generator family.
    pub random_per_family: usize,
    pub seed: u64,
    pub tol: f64,
    pub epsilon: f64,
    pub delta: f64,
    pub cap_policies: usize,
    /// Seeded runs for the concentration-coverage property.
    pub coverage_runs: usize,
    pub coverage_episodes: u64,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            extra: Vec::new(),
            random_per_family: 3,
            seed: 0,
            tol: 1e-6,
            epsilon: 0.1,
            delta: 0.1,
            cap_policies: 1 << 12,
            coverage_runs: 200,
            coverage_episodes: 300,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct PropertyResult {
    pub name: &'static str,
    pub passed: bool,
    pub margin: f64,
    pub checked: usize,
    pub detail: String,
    pub wall_ms: f64,
}

/// Tracks the worst observed error against a fixed tolerance.
struct Tracker {
    tolerance: f64,
    worst: f64,
    checked: usize,
    note: String,
}

impl Tracker {
    fn new(tolerance: f64) -> Self {
        Self { tolerance, worst: 0.0, checked: 0, note: String::new() }
    }

    fn observe(&mut self, error: f64, what: impl FnOnce() -> String) {
        self.checked += 1;
        let error = if error.is_nan() { f64::INFINITY } else { error };
        if error > self.worst {
            self.worst = error;
            self.note = what();
        }
    }

    fn finish(self, name: &'static str, start: Instant) -> PropertyResult {
        let passed = self.worst <= self.tolerance;
        let detail = if self.note.is_empty() {
            format!("worst error {:.3e} (tolerance {:.1e})", self.worst, self.tolerance)
        } else {
            format!("worst error {:.3e} at {} (tolerance {:.1e})", self.worst, self.note, self.tolerance)
        };
        PropertyResult {
            name,
            passed,
            margin: self.tolerance - self.worst,
            checked: self.checked,
            detail,
            wall_ms: start.elapsed().as_secs_f64() * 1e3,
        }
    }
}

fn relative(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / a.abs().max(b.abs())
    }
}

/// Largest violation of the occupancy constraints.
pub fn conservation_error(mdp: &MdpSpec, rho: &Table) -> f64 {
    let shape = mdp.shape();
    let mut worst = 0.0f64;
    for h in 0..shape.horizon {
        for s in 0..shape.states {
            let mass: f64 = rho.row(h, s).iter().sum();
            let inflow = if h == 0 {
                (s == mdp.initial_state()) as u8 as f64
            } else {
                (0..shape.states)
                    .flat_map(|sp| (0..shape.actions).map(move |a| (sp, a)))
                    .map(|(sp, a)| rho.get(h - 1, sp, a) * mdp.transition_row(h - 1, sp, a)[s])
                    .sum()
            };
            worst = worst.max((mass - inflow).abs());
        }
    }
    let negative = rho.as_slice().iter().fold(0.0f64, |m, &x| m.max(-x));
    worst.max(negative)
}

fn random_policy(rng: &mut impl Rng, shape: Shape) -> StochasticPolicy {
    let mut probs = Vec::with_capacity(shape.triplets());
    for _ in 0..shape.stage_states() {
        let row: Vec<f64> = (0..shape.actions).map(|_| rng.random::<f64>() + 1e-3).collect();
        let total: f64 = row.iter().sum();
        probs.extend(row.into_iter().map(|x| x / total));
    }
    StochasticPolicy::new(shape, probs).expect("rows are normalized")
}

fn shifted(mdp: &MdpSpec, shift: &[f64]) -> MdpSpec {
    let rewards = Table::from_fn(mdp.shape(), |h, s, a| mdp.reward(h, s, a) + shift[h % shift.len()]);
    mdp.with_rewards(rewards).expect("same shape")
}

/// The instances a suite run covers: bundled, extra, then random ones.
pub fn suite_instances(config: &VerifyConfig) -> Result<Vec<NamedMdp>> {
    let mut out = bundled_instances();
    out.extend(config.extra.iter().cloned());
    let shapes = [Shape::new(2, 2, 2)?, Shape::new(3, 2, 2)?, Shape::new(2, 3, 2)?];
    for family in Family::ALL {
        for (i, &shape) in shapes.iter().enumerate() {
            let seed = derive_seed(config.seed, (family as u64) * 16 + i as u64);
            for g in generate_instances(family, shape, 0.3, config.random_per_family, seed)? {
                out.push(NamedMdp { name: g.id, source: Some(g.source), mdp: g.mdp });
            }
        }
    }
    Ok(out)
}

pub fn run_suite(config: &VerifyConfig) -> Result<Vec<PropertyResult>> {
    let instances = suite_instances(config)?;
    let sized: Vec<&NamedMdp> = instances
        .iter()
        .filter(|n| n.mdp.shape().deterministic_policy_count().is_some_and(|c| c <= config.cap_policies as u128))
        .collect();
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(config.seed);
    let tol = config.tol;
    let eps = config.epsilon;
    let mut results = Vec::new();

    // occupancies of random policies and of design optimizers
    let start = Instant::now();
    let mut t = Tracker::new(1e-9);
    for n in &instances {
        for _ in 0..5 {
            let rho = occupancy_of_policy(&n.mdp, &random_policy(&mut rng, n.mdp.shape()))?;
            t.observe(conservation_error(&n.mdp, rho.table()), || n.name.clone());
        }
    }
    for n in &sized {
        let profile = gap_profile(&n.mdp, eps, config.cap_policies)?;
        let active: Vec<&Occupancy> =
            profile.policies.distinct().into_iter().map(|i| profile.policies.occupancy(i)).collect();
        let design = solve_phase_design(&n.mdp, &active, tol)?;
        t.observe(conservation_error(&n.mdp, design.flow.table()), || format!("{} design", n.name));
    }
    results.push(t.finish("flow_conservation", start));

    let start = Instant::now();
    let mut t = Tracker::new(1e-10);
    for n in &instances {
        for _ in 0..5 {
            let policy = random_policy(&mut rng, n.mdp.shape());
            let value = value_of_policy(&n.mdp, &policy)?;
            let rho = occupancy_of_policy(&n.mdp, &policy)?;
            t.observe((value - rho.dot(n.mdp.rewards())).abs() / (1.0 + value.abs()), || n.name.clone());
        }
    }
    results.push(t.finish("value_occupancy_duality", start));

    let start = Instant::now();
    let mut t = Tracker::new(1e-12);
    for n in &sized {
        let profile = gap_profile(&n.mdp, eps, config.cap_policies)?;
        let best = (0..profile.policies.len()).map(|i| profile.policies.value(i)).fold(f64::NEG_INFINITY, f64::max);
        t.observe((optimal_values(&n.mdp).value - best).abs() / (1.0 + best.abs()), || n.name.clone());
    }
    results.push(t.finish("planning_matches_enumeration", start));

    let start = Instant::now();
    let mut t = Tracker::new(4.0 * tol);
    for n in &sized {
        let moved = shifted(&n.mdp, &[0.75, -1.25, 2.5]);
        let a = gap_profile(&n.mdp, eps, config.cap_policies)?;
        let b = gap_profile(&moved, eps, config.cap_policies)?;
        let gaps = a.gaps.iter().zip(&b.gaps).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        t.observe(gaps.max(a.value_gaps.max_abs_diff(&b.value_gaps)), || format!("{} gaps", n.name));
        let (ia, ib) =
            (Instance::new(&n.mdp, config.cap_policies, tol)?, Instance::new(&moved, config.cap_policies, tol)?);
        t.observe(relative(ia.c_lb(eps)?.value, ib.c_lb(eps)?.value), || format!("{} c_lb", n.name));
        t.observe(relative(ia.c_pedel(eps)?.value, ib.c_pedel(eps)?.value), || format!("{} c_pedel", n.name));
        t.observe(relative(ia.c_principle(eps)?.value, ib.c_principle(eps)?.value), || {
            format!("{} c_principle", n.name)
        });
        t.observe(relative(ia.diversity_constant(eps)?, ib.diversity_constant(eps)?), || {
            format!("{} diversity", n.name)
        });
    }
    results.push(t.finish("reward_shift_invariance", start));

    let start = Instant::now();
    let mut t = Tracker::new(4.0 * tol);
    for n in &sized {
        let base = Instance::new(&n.mdp, config.cap_policies, tol)?.c_lb(eps)?.value;
        for alpha in [0.5, 2.0] {
            let scaled = n.mdp.with_rewards(n.mdp.rewards().scale(alpha))?;
            let value = Instance::new(&scaled, config.cap_policies, tol)?.c_lb(alpha * eps)?.value;
            t.observe(relative(value * alpha * alpha, base), || format!("{} alpha {alpha}", n.name));
        }
    }
    results.push(t.finish("c_lb_inverse_square_scaling", start));

    let start = Instant::now();
    let mut t = Tracker::new(1e-12);
    for n in &sized {
        let inst = Instance::new(&n.mdp, config.cap_policies, tol)?;
        if !inst.profile().unique_optimal_occupancy {
            continue;
        }
        let exact = inst.exact_id_bound(config.delta)?;
        t.observe(relative(exact.factor, inst.c_lb(0.0)?.value), || n.name.clone());
    }
    results.push(t.finish("exact_id_equals_c_lb_at_zero", start));

    let start = Instant::now();
    let mut t = Tracker::new(0.0);
    for n in &sized {
        let inst = Instance::new(&n.mdp, config.cap_policies, tol)?;
        if eps.max(inst.profile().delta_min) <= 0.0 {
            continue;
        }
        let check = inst.verify_pedel_vs_lb(eps)?;
        // relative excess over the bound; <= 0 when the bound holds
        let excess = (check.c_pedel - check.c_pedel_certificate - check.bound) / check.bound;
        t.observe(excess.max(0.0), || n.name.clone());
        if !check.diversity_holds {
            t.observe(f64::INFINITY, || format!("{} diversity refinement", n.name));
        }
    }
    results.push(t.finish("pedel_vs_lower_bound", start));

    let start = Instant::now();
    let mut t = Tracker::new(tol);
    for (i, n) in sized.iter().enumerate() {
        let inst = Instance::new(&n.mdp, config.cap_policies, tol)?;
        let check = inst.verify_stochastic_vs_deterministic(eps, 100, derive_seed(config.seed, i as u64))?;
        t.observe((check.ratio - 4.0).max(0.0), || format!("{} ratio {:.3}", n.name, check.ratio));
    }
    results.push(t.finish("stochastic_within_four_times_deterministic", start));

    let start = Instant::now();
    let mut t = Tracker::new(1e-6);
    for n in &sized {
        let shape = n.mdp.shape();
        let reach = pacbound_core::mdp::reachability(&n.mdp);
        let target =
            Table::from_fn(shape, |h, s, _| if reach[h * shape.states + s] > 0.0 { rng.random::<f64>() } else { 0.0 });
        let base = min_flow_phi(&n.mdp, &CoveringTarget::new(target.clone())?, 1e-9)?;
        let alpha = 0.5 + 3.0 * rng.random::<f64>();
        let scaled = min_flow_phi(&n.mdp, &CoveringTarget::new(target.scale(alpha))?, 1e-9)?;
        t.observe(relative(scaled.value, alpha * base.value), || n.name.clone());
    }
    let bandit = MdpSpec::bandit(&[0.0, 0.0, 0.0])?;
    let c = [0.3, 1.2, 2.0];
    let phi = min_flow_phi(&bandit, &CoveringTarget::new(Table::from_vec(bandit.shape(), c.to_vec())?)?, 1e-9)?.value;
    t.observe(relative(phi, c.iter().sum()), || "bandit closed form".into());
    results.push(t.finish("min_flow_homogeneity", start));

    let start = Instant::now();
    let mut t = Tracker::new(0.0);
    for (i, n) in instances.iter().enumerate() {
        let burn = burn_in(&n.mdp, config.delta, derive_seed(config.seed, i as u64), tol)?;
        let missing = burn.estimates.counts().first_unvisited(&n.mdp);
        t.observe(missing.is_some() as u8 as f64, || format!("{} at {missing:?}", n.name));
    }
    results.push(t.finish("burn_in_coverage", start));

    let start = Instant::now();
    let mut t = Tracker::new(0.0);
    for n in sized.iter().take(12) {
        let loose = Instance::new(&n.mdp, config.cap_policies, 10.0 * tol)?;
        let tight = Instance::new(&n.mdp, config.cap_policies, tol)?;
        for (a, b) in [(loose.c_lb(eps)?, tight.c_lb(eps)?), (loose.c_pedel(eps)?, tight.c_pedel(eps)?)] {
            if !a.value.is_finite() {
                t.observe(if b.value.is_finite() { f64::INFINITY } else { 0.0 }, || n.name.clone());
                continue;
            }
            // both values are upper bounds certified to within their tolerance
            let allowed = a.certificate.max(b.certificate) + 1e-12 * a.value;
            let stated = 11.0 * tol * a.value;
            let excess = ((a.value - b.value).abs() - allowed.min(stated)).max(0.0) / a.value;
            t.observe(excess, || format!("{} {}", n.name, a.quantity.name()));
        }
    }
    results.push(t.finish("solver_tolerance_stability", start));

    let start = Instant::now();
    let mdp = bundled("two-by-two").expect("bundled").mdp;
    let policy = StochasticPolicy::uniform(mdp.shape());
    let mut held = 0;
    for run in 0..config.coverage_runs {
        let seed = derive_seed(config.seed ^ 0x5eed, run as u64);
        held += deviation_event(&mdp, &policy, seed, config.coverage_episodes, config.delta, config.cap_policies)?.holds
            as usize;
    }
    let runs = config.coverage_runs as f64;
    let rate = held as f64 / runs;
    let floor = 1.0 - config.delta - 3.0 * (config.delta * (1.0 - config.delta) / runs).sqrt();
    results.push(PropertyResult {
        name: "concentration_coverage",
        passed: rate >= floor,
        margin: rate - floor,
        checked: config.coverage_runs,
        detail: format!("event held in {held}/{} runs, floor {floor:.4}", config.coverage_runs),
        wall_ms: start.elapsed().as_secs_f64() * 1e3,
    });

    Ok(results)
}
