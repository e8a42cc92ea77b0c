use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use pacbound::error::{CliError, Result};
use pacbound::experiment::{cmd_complexity, cmd_edipe, ExperimentConfig, GeneratorSpec};
use pacbound::format::{read_mdp, write_mdp};
use pacbound::generate::{generate_instances, Family};
use pacbound::output::{config_hash, ensure_dir, write_file, write_rows, Format, ResultRow};
use pacbound::svg;
use pacbound::verify::{run_suite, VerifyConfig};
use pacbound_core::Shape;

#[derive(Parser)]
#[command(name = "pacbound", version, about = "Instance-dependent sample complexity of PAC policy identification")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate complexity measures on each instance.
    Complexity(ComplexityArgs),
    /// Run the elimination algorithm over seeds and confidence levels.
    Edipe(EdipeArgs),
    /// Check structural properties on bundled and generated instances.
    Verify(VerifyArgs),
    /// Write generated instances as JSON files.
    Gen(GenArgs),
}

#[derive(Args)]
struct InstanceArgs {
    /// Instance file (repeatable).
    #[arg(long = "mdp", value_name = "FILE")]
    mdp: Vec<PathBuf>,
    /// Generator family: random-dense, deterministic-tree, flat-reward, two-armed-embedded.
    #[arg(long)]
    family: Option<Family>,
    #[arg(long, default_value_t = 2)]
    horizon: usize,
    #[arg(long, default_value_t = 2)]
    states: usize,
    #[arg(long, default_value_t = 2)]
    actions: usize,
    /// Arm gap for two-armed-embedded.
    #[arg(long, default_value_t = 0.5)]
    gap: f64,
    /// Number of generated instances.
    #[arg(long, default_value_t = 1)]
    count: usize,
}

#[derive(Args)]
struct Common {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Relative solver accuracy.
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
    /// Largest number of deterministic policies to enumerate.
    #[arg(long, default_value_t = 1 << 16)]
    cap_policies: usize,
    #[arg(long, env = "PACBOUND_OUT", default_value = "pacbound-out")]
    out: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Leave wall_ms blank so reruns are byte-identical.
    #[arg(long)]
    no_timing: bool,
}

#[derive(Args)]
struct ComplexityArgs {
    #[command(flatten)]
    instances: InstanceArgs,
    #[command(flatten)]
    common: Common,
    #[arg(long, default_value_t = 0.1)]
    epsilon: f64,
    /// Confidence level for exact_id_bound (repeatable).
    #[arg(long = "delta", default_values_t = [0.1])]
    deltas: Vec<f64>,
    /// Restrict to these quantities (repeatable); all by default.
    #[arg(long = "quantity")]
    quantities: Vec<String>,
    /// Report whether the optimal occupancy is unique, and the exact
    /// identification bound (+inf when it is not).
    #[arg(long)]
    check_unique: bool,
}

#[derive(Args)]
struct EdipeArgs {
    #[command(flatten)]
    instances: InstanceArgs,
    #[command(flatten)]
    common: Common,
    #[arg(long, default_value_t = 0.1)]
    epsilon: f64,
    /// Confidence level (repeatable; two or more also plot tau against delta).
    #[arg(long = "delta", default_values_t = [0.1])]
    deltas: Vec<f64>,
    #[arg(long, default_value_t = 20)]
    runs: usize,
    #[arg(long, default_value_t = 40)]
    max_phases: u32,
    /// Use the radius with the extra sqrt(H) factor.
    #[arg(long)]
    pseudocode_radius: bool,
}

#[derive(Args)]
struct VerifyArgs {
    /// Extra instance file to include (repeatable).
    #[arg(long = "mdp", value_name = "FILE")]
    mdp: Vec<PathBuf>,
    #[command(flatten)]
    common: Common,
    #[arg(long, default_value_t = 0.1)]
    epsilon: f64,
    #[arg(long, default_value_t = 0.1)]
    delta: f64,
    /// Random instances per family and shape.
    #[arg(long, default_value_t = 3)]
    random_per_family: usize,
    #[arg(long, default_value_t = 200)]
    coverage_runs: usize,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long)]
    family: Family,
    #[arg(long, default_value_t = 2)]
    horizon: usize,
    #[arg(long, default_value_t = 2)]
    states: usize,
    #[arg(long, default_value_t = 2)]
    actions: usize,
    #[arg(long, default_value_t = 0.5)]
    gap: f64,
    #[arg(long, default_value_t = 1)]
    count: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, env = "PACBOUND_OUT", default_value = "pacbound-out")]
    out: PathBuf,
}

fn base_config(instances: InstanceArgs, common: &Common) -> ExperimentConfig {
    ExperimentConfig {
        mdp: instances.mdp,
        generator: instances.family.map(|family| GeneratorSpec {
            family: family.name().into(),
            horizon: instances.horizon,
            states: instances.states,
            actions: instances.actions,
            gap: instances.gap,
            count: instances.count,
            seed: common.seed,
        }),
        seed: common.seed,
        tol: common.tol,
        cap_policies: common.cap_policies,
        timing: !common.no_timing,
        out: common.out.clone(),
        ..Default::default()
    }
}

fn file_stem(name: &str) -> String {
    name.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' }).collect()
}

fn complexity(args: ComplexityArgs) -> Result<()> {
    let config = ExperimentConfig {
        epsilon: args.epsilon,
        deltas: args.deltas,
        quantities: args.quantities,
        check_unique: args.check_unique,
        ..base_config(args.instances, &args.common)
    };
    let output = cmd_complexity(&config)?;
    let path = write_rows(&config.out, "complexity", &output.rows, args.common.format)?;
    let pretty = serde_json::to_vec_pretty(&output.witnesses).expect("witnesses serialize");
    write_file(&config.out.join("witnesses.json"), &pretty)?;

    let mut names: Vec<&str> = output.rows.iter().map(|r| r.instance_id.as_str()).collect();
    names.dedup();
    for name in names {
        let bars: Vec<(String, f64)> = output
            .rows
            .iter()
            .filter(|r| r.instance_id == name)
            .filter_map(|r| Some((r.quantity.clone(), r.value?)))
            .collect();
        let chart = svg::quantity_bars(&format!("{name}, epsilon = {}", config.epsilon), &bars);
        write_file(&config.out.join(format!("complexity-{}.svg", file_stem(name))), chart.as_bytes())?;
    }
    print_rows(&output.rows);
    println!("wrote {}", path.display());
    Ok(())
}

fn edipe(args: EdipeArgs) -> Result<()> {
    let config = ExperimentConfig {
        epsilon: args.epsilon,
        deltas: args.deltas,
        runs: args.runs,
        max_phases: args.max_phases,
        pseudocode_radius: args.pseudocode_radius,
        ..base_config(args.instances, &args.common)
    };
    let output = cmd_edipe(&config)?;
    let path = write_rows(&config.out, "edipe", &output.rows, args.common.format)?;
    let mut lines = Vec::new();
    for log in &output.logs {
        serde_json::to_writer(&mut lines, log).expect("logs serialize");
        lines.push(b'\n');
    }
    write_file(&config.out.join("runs.jsonl"), &lines)?;

    if config.deltas.len() >= 2 {
        let mut names: Vec<&str> = output.medians.iter().map(|m| m.0.as_str()).collect();
        names.dedup();
        for name in names {
            let points: Vec<(f64, f64)> = output.medians.iter().filter(|m| m.0 == name).map(|m| (m.1, m.2)).collect();
            let chart = svg::tau_vs_delta(&format!("{name}, epsilon = {}", config.epsilon), &points);
            write_file(&config.out.join(format!("tau-vs-delta-{}.svg", file_stem(name))), chart.as_bytes())?;
        }
    }
    print_rows(output.rows.iter().filter(|r| r.quantity != "edipe"));
    println!("wrote {}", path.display());
    Ok(())
}

fn verify(args: VerifyArgs) -> Result<()> {
    let extra = args.mdp.iter().map(|p| read_mdp(p)).collect::<Result<Vec<_>>>()?;
    let config = VerifyConfig {
        extra,
        random_per_family: args.random_per_family,
        seed: args.common.seed,
        tol: args.common.tol,
        epsilon: args.epsilon,
        delta: args.delta,
        cap_policies: args.common.cap_policies,
        coverage_runs: args.coverage_runs,
        ..Default::default()
    };
    let hash = config_hash(&(
        &args.mdp,
        config.random_per_family,
        config.seed,
        config.tol,
        config.epsilon,
        config.delta,
        config.cap_policies,
        config.coverage_runs,
    ));
    let results = run_suite(&config)?;
    let rows: Vec<ResultRow> = results
        .iter()
        .map(|r| {
            let mut row = ResultRow::new("suite", r.name, &hash);
            row.epsilon = Some(config.epsilon);
            row.delta = Some(config.delta);
            row.seed = Some(config.seed);
            row.value = Some(r.margin);
            row.success_flag = Some(r.passed);
            row.wall_ms = (!args.common.no_timing).then_some(r.wall_ms);
            row
        })
        .collect();
    let path = write_rows(&args.common.out, "verify", &rows, args.common.format)?;
    for r in &results {
        println!("{} {:<44} {:>5} checks  {}", if r.passed { "ok  " } else { "FAIL" }, r.name, r.checked, r.detail);
    }
    println!("wrote {}", path.display());
    match results.iter().filter(|r| !r.passed).count() {
        0 => Ok(()),
        n => Err(CliError::PropertyFailure(n)),
    }
}

fn gen(args: GenArgs) -> Result<()> {
    let shape = Shape::new(args.horizon, args.states, args.actions)?;
    ensure_dir(&args.out)?;
    for g in generate_instances(args.family, shape, args.gap, args.count, args.seed)? {
        let path = args.out.join(format!("{}.json", g.id));
        write_mdp(&path, &g.mdp, Some(&g.id), Some(&g.source))?;
        println!("{}", path.display());
    }
    Ok(())
}

fn print_rows<'a>(rows: impl IntoIterator<Item = &'a ResultRow>) {
    for r in rows {
        let value = r.value.map_or_else(String::new, |v| format!("{v:.6e}"));
        let delta = r.delta.map_or_else(String::new, |d| format!("delta={d}"));
        let flag = r.success_flag.map_or_else(String::new, |f| f.to_string());
        println!("{:<28} {:<20} {:<14} {:>14} {}", r.instance_id, r.quantity, delta, value, flag);
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Complexity(a) => complexity(a),
        Command::Edipe(a) => edipe(a),
        Command::Verify(a) => verify(a),
        Command::Gen(a) => gen(a),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("pacbound: {e}");
            e.into()
        }
    }
}
