//! Drivers behind `pacbound complexity` and `pacbound edipe`.

use std::path::PathBuf;
use std::time::Instant;

use pacbound_core::complexity::{ComplexityReport, Instance};
use pacbound_core::edipe::{run_with_profile, EdipeConfig, EdipeRun, RadiusMode, StopReason};
use pacbound_core::mdp::gap_profile;
use pacbound_core::sim::derive_seed;
use pacbound_core::{Error as CoreError, Shape};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::error::{CliError, Result};
use crate::format::{read_mdp, NamedMdp};
use crate::generate::{generate_instances, Family};
use crate::output::{config_hash, ResultRow};

#[derive(Clone, Debug, Serialize)]
pub struct GeneratorSpec {
    pub family: String,
    pub horizon: usize,
    pub states: usize,
    pub actions: usize,
    pub gap: f64,
    pub count: usize,
    pub seed: u64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ExperimentConfig {
    pub mdp: Vec<PathBuf>,
    pub generator: Option<GeneratorSpec>,
    pub epsilon: f64,
    pub deltas: Vec<f64>,
    pub runs: usize,
    pub seed: u64,
    pub tol: f64,
    pub cap_policies: usize,
    pub pseudocode_radius: bool,
    pub max_phases: u32,
    pub quantities: Vec<String>,
    pub check_unique: bool,
    /// Record wall-clock times (rows are then not byte-reproducible).
    pub timing: bool,
    #[serde(skip)]
    pub out: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            mdp: Vec::new(),
            generator: None,
            epsilon: 0.1,
            deltas: vec![0.1],
            runs: 1,
            seed: 0,
            tol: 1e-6,
            cap_policies: 1 << 16,
            pseudocode_radius: false,
            max_phases: 40,
            quantities: Vec::new(),
            check_unique: false,
            timing: true,
            out: PathBuf::from("pacbound-out"),
        }
    }
}

pub const QUANTITIES: [&str; 7] =
    ["c_lb", "characteristic_time", "exact_id_bound", "c_pedel", "c_pedel_single", "c_principle", "diversity"];

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(CliError::Input(m));
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return bad(format!("--epsilon must be finite and >= 0, got {}", self.epsilon));
        }
        if self.deltas.is_empty() {
            return bad("at least one --delta is required".into());
        }
        if let Some(d) = self.deltas.iter().find(|&&d| !(d > 0.0 && d < 1.0)) {
            return bad(format!("--delta must lie in (0, 1), got {d}"));
        }
        if self.runs == 0 {
            return bad("--runs must be at least 1".into());
        }
        if !(self.tol > 0.0 && self.tol < 1.0) {
            return bad(format!("--tol must lie in (0, 1), got {}", self.tol));
        }
        if self.cap_policies == 0 {
            return bad("--cap-policies must be at least 1".into());
        }
        if !(1..=1000).contains(&self.max_phases) {
            return bad(format!("--max-phases must lie in 1..=1000, got {}", self.max_phases));
        }
        if let Some(q) = self.quantities.iter().find(|q| !QUANTITIES.contains(&q.as_str())) {
            return bad(format!("unknown quantity {q:?}; expected one of {}", QUANTITIES.join(", ")));
        }
        if self.mdp.is_empty() && self.generator.is_none() {
            return bad("give --mdp FILE or --family NAME".into());
        }
        Ok(())
    }

    pub fn hash(&self) -> String {
        config_hash(self)
    }

    pub fn load_instances(&self) -> Result<Vec<NamedMdp>> {
        let mut out = Vec::new();
        for path in &self.mdp {
            out.push(read_mdp(path)?);
        }
        if let Some(g) = &self.generator {
            let family: Family = g.family.parse().map_err(CliError::Input)?;
            let shape = Shape::new(g.horizon, g.states, g.actions)?;
            for inst in generate_instances(family, shape, g.gap, g.count, g.seed)? {
                out.push(NamedMdp { name: inst.id, source: Some(inst.source), mdp: inst.mdp });
            }
        }
        Ok(out)
    }

    fn wants(&self, quantity: &str) -> bool {
        self.quantities.is_empty() || self.quantities.iter().any(|q| q == quantity)
    }

    fn elapsed(&self, start: Instant) -> Option<f64> {
        self.timing.then(|| start.elapsed().as_secs_f64() * 1e3)
    }
}

#[derive(Debug)]
pub struct ComplexityOutput {
    pub rows: Vec<ResultRow>,
    /// Optimizers and witnessing policies, keyed by instance and quantity.
    pub witnesses: Value,
}

fn witness_json(report: &ComplexityReport) -> Value {
    json!({
        "value": if report.value.is_finite() { json!(report.value) } else { json!("+inf") },
        "certificate": report.certificate,
        "occupancies": report.witness.iter().map(|w| w.as_slice().to_vec()).collect::<Vec<_>>(),
        "policies": report.policies.iter().map(|p| p.actions().to_vec()).collect::<Vec<_>>(),
    })
}

/// Fails when a finite value is not certified to the requested accuracy.
fn certified(report: &ComplexityReport, tol: f64) -> Result<()> {
    if report.value.is_finite() && report.certificate > tol * report.value.abs() * (1.0 + 1e-6) + 1e-12 {
        return Err(CliError::Solver(format!(
            "{} certificate {:.3e} exceeds tol · value = {:.3e}",
            report.quantity.name(),
            report.certificate,
            tol * report.value.abs()
        )));
    }
    Ok(())
}

pub fn cmd_complexity(config: &ExperimentConfig) -> Result<ComplexityOutput> {
    config.validate()?;
    let hash = config.hash();
    let eps = config.epsilon;
    let mut rows = Vec::new();
    let mut witnesses = serde_json::Map::new();
    for named in config.load_instances()? {
        let inst = Instance::new(&named.mdp, config.cap_policies, config.tol)?;
        let mut dump = serde_json::Map::new();
        let row = |quantity: &str, delta: Option<f64>, value: f64, start: Instant| {
            let mut row = ResultRow::new(&named.name, quantity, &hash);
            row.epsilon = Some(eps);
            row.delta = delta;
            row.value = Some(value);
            row.wall_ms = config.elapsed(start);
            row
        };

        let mut reports: Vec<(&str, Instant, std::result::Result<ComplexityReport, CoreError>)> = Vec::new();
        if config.wants("c_lb") {
            reports.push(("c_lb", Instant::now(), inst.c_lb(eps)));
        }
        if config.wants("characteristic_time") {
            let start = Instant::now();
            let optimal = inst.profile().policies.policy(inst.profile().optimal_index).clone();
            reports.push(("characteristic_time", start, inst.characteristic_time(&optimal, eps)));
        }
        if config.wants("c_pedel") {
            reports.push(("c_pedel", Instant::now(), inst.c_pedel(eps)));
        }
        if config.wants("c_pedel_single") {
            reports.push(("c_pedel_single", Instant::now(), inst.c_pedel_single(eps)));
        }
        if config.wants("c_principle") {
            reports.push(("c_principle", Instant::now(), inst.c_principle(eps)));
        }
        for (name, start, report) in reports {
            let report = report?;
            certified(&report, config.tol)?;
            rows.push(row(name, None, report.value, start));
            dump.insert(name.to_string(), witness_json(&report));
        }

        if config.wants("exact_id_bound") || config.check_unique {
            let unique = inst.profile().unique_optimal_occupancy;
            if config.check_unique {
                let mut row = ResultRow::new(&named.name, "unique_optimum", &hash);
                row.success_flag = Some(unique);
                rows.push(row);
            }
            for &delta in &config.deltas {
                let start = Instant::now();
                match inst.exact_id_bound(delta) {
                    Ok(report) => {
                        certified(&report, config.tol)?;
                        rows.push(row("exact_id_bound", Some(delta), report.value, start));
                        dump.insert(format!("exact_id_bound@{delta}"), witness_json(&report));
                    }
                    Err(CoreError::NonUniqueOptimum) => {
                        rows.push(row("exact_id_bound", Some(delta), f64::INFINITY, start))
                    }
                    Err(e) => return Err(e.into()),
                }
            }
        }
        if config.wants("diversity") {
            let start = Instant::now();
            let value = inst.diversity_constant(eps)?;
            rows.push(row("diversity", None, value, start));
        }
        witnesses.insert(named.name.clone(), Value::Object(dump));
    }
    Ok(ComplexityOutput { rows, witnesses: Value::Object(witnesses) })
}

#[derive(Debug)]
pub struct EdipeOutput {
    pub rows: Vec<ResultRow>,
    /// One JSON document per run, in row order.
    pub logs: Vec<Value>,
    /// `(instance, delta, median tau)` for the scaling plot.
    pub medians: Vec<(String, f64, f64)>,
}

fn run_log(instance: &str, run: &EdipeRun) -> Value {
    json!({
        "instance_id": instance,
        "seed": run.config.seed,
        "epsilon": run.config.epsilon,
        "delta": run.config.delta,
        "burn_in": run.burn_in,
        "phases": run.phases.iter().map(|p| json!({
            "k": p.k,
            "E_star": p.e_star,
            "d_k": p.d_k,
            "t_k": p.t_k,
            "V_lower": if p.v_lower.is_finite() { json!(p.v_lower) } else { json!("-inf") },
            "active_count": p.active.len(),
            "safeguard": p.safeguard,
        })).collect::<Vec<_>>(),
        "tau": run.tau,
        "stop": format!("{:?}", run.stop),
        "returned_policy": run.returned.actions(),
        "gap_of_returned": run.returned_gap,
    })
}

/// `q`-quantile by linear interpolation of the sorted sample.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = q * (sorted.len() - 1) as f64;
    let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

/// 95% Wilson score interval for `k` successes out of `n`.
pub fn wilson(k: usize, n: usize) -> (f64, f64) {
    let (k, n, z) = (k as f64, n as f64, 1.96);
    let p = k / n;
    let centre = (p + z * z / (2.0 * n)) / (1.0 + z * z / n);
    let half = z * (p * (1.0 - p) / n + z * z / (4.0 * n * n)).sqrt() / (1.0 + z * z / n);
    (centre - half, centre + half)
}

pub fn cmd_edipe(config: &ExperimentConfig) -> Result<EdipeOutput> {
    config.validate()?;
    if config.epsilon <= 0.0 {
        return Err(CliError::Input("EDIPE needs --epsilon > 0".into()));
    }
    let hash = config.hash();
    let mut rows = Vec::new();
    let mut logs = Vec::new();
    let mut medians = Vec::new();
    for named in config.load_instances()? {
        let profile = gap_profile(&named.mdp, config.epsilon, config.cap_policies)?;
        for &delta in &config.deltas {
            let runs: Vec<(u64, Option<f64>, EdipeRun)> = (0..config.runs as u64)
                .into_par_iter()
                .map(|i| {
                    let seed = derive_seed(config.seed, i);
                    let mut run_config = EdipeConfig::new(config.epsilon, delta, seed);
                    run_config.tol = config.tol;
                    run_config.max_phases = config.max_phases;
                    run_config.policy_cap = config.cap_policies;
                    if config.pseudocode_radius {
                        run_config.radius = RadiusMode::Pseudocode;
                    }
                    let start = Instant::now();
                    let run = run_with_profile(&named.mdp, &profile, &run_config)?;
                    Ok((seed, config.elapsed(start), run))
                })
                .collect::<Result<_>>()?;

            let mut successes = 0;
            let mut taus = Vec::with_capacity(runs.len());
            for (seed, wall, run) in &runs {
                let success = run.stop == StopReason::Stopped && run.is_epsilon_optimal();
                successes += success as usize;
                taus.push(run.tau as f64);
                let mut row = ResultRow::new(&named.name, "edipe", &hash);
                row.epsilon = Some(config.epsilon);
                row.delta = Some(delta);
                row.seed = Some(*seed);
                row.value = Some(run.returned_gap);
                row.tau = Some(run.tau);
                row.success_flag = Some(success);
                row.wall_ms = *wall;
                rows.push(row);
                logs.push(run_log(&named.name, run));
            }
            taus.sort_by(f64::total_cmp);
            let (lo, hi) = wilson(successes, runs.len());
            let aggregate = [
                ("pac_rate", successes as f64 / runs.len() as f64),
                ("pac_rate_ci_low", lo),
                ("pac_rate_ci_high", hi),
                ("tau_q25", quantile(&taus, 0.25)),
                ("tau_median", quantile(&taus, 0.5)),
                ("tau_q75", quantile(&taus, 0.75)),
            ];
            for (quantity, value) in aggregate {
                let mut row = ResultRow::new(&named.name, quantity, &hash);
                row.epsilon = Some(config.epsilon);
                row.delta = Some(delta);
                row.value = Some(value);
                rows.push(row);
            }
            medians.push((named.name.clone(), delta, quantile(&taus, 0.5)));
        }
    }
    Ok(EdipeOutput { rows, logs, medians })
}
