//! Command-line interface.
//!
//! Exit codes: 0 success, 1 validation failure or bad input, 2 blow-up
//! termination when `--fail-on-blowup` is set, 3 I/O or parse errors.

use crate::error::Error;
use crate::network::validate;
use crate::scenario::{
    arcs_connect, builtin_scenario, path_verdict, NetworkRef, PreparedRun, RunManifest,
    ScenarioConfig, SCENARIO_NAMES,
};
use crate::simulator::TerminationReason;
use crate::snapshot::{arc_means, read_snapshot};
use clap::{Args, Parser, Subcommand};
use std::ffi::OsString;
use std::path::PathBuf;

#[derive(Parser)]
#[command(
    name = "netchemo",
    about = "Chemotaxis-driven cell movement on networks: maze solving experiments",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a built-in scenario or a config file.
    Simulate(SimulateArgs),
    /// Validate the network constraints of a config file.
    Validate {
        /// Scenario or network config (JSON).
        #[arg(long)]
        config: PathBuf,
    },
    /// List the built-in scenarios.
    ListScenarios,
    /// Judge the dominant path of a finished run.
    Verdict {
        /// Output directory of a previous `simulate`.
        #[arg(long)]
        run: PathBuf,
        /// Expected dominant arc ids, comma separated.
        #[arg(long, value_delimiter = ',')]
        expected: Vec<u32>,
        /// Dominance threshold ρ.
        #[arg(long, default_value_t = 0.5)]
        threshold: f64,
    },
    /// Write a built-in scenario as an editable config file.
    Export {
        #[arg(long)]
        scenario: String,
        /// Destination path (stdout when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct SimulateArgs {
    /// Built-in scenario name.
    #[arg(long, conflicts_with = "config")]
    scenario: Option<String>,
    /// Scenario config file (JSON).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override the time step.
    #[arg(long)]
    k: Option<f64>,
    /// Override the final time.
    #[arg(long = "t-end")]
    t_end: Option<f64>,
    /// Override the RNG seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Emit a snapshot every N steps.
    #[arg(long = "snapshot-every")]
    snapshot_every: Option<usize>,
    /// Output directory for snapshots and the manifest.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Exit with code 2 when the run terminates by blow-up.
    #[arg(long = "fail-on-blowup")]
    fail_on_blowup: bool,
}

fn exit_code_for(e: &Error) -> i32 {
    match e {
        Error::Io(_) | Error::Json(_) | Error::Snapshot(_) => 3,
        _ => 1,
    }
}

pub fn cli_main<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            // clap prints help/version through this path too
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code_for(&e)
        }
    }
}

fn load_scenario_config(path: &PathBuf) -> crate::Result<ScenarioConfig> {
    let text = std::fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

fn dispatch(cli: Cli) -> crate::Result<i32> {
    match cli.command {
        Command::ListScenarios => {
            for name in SCENARIO_NAMES {
                println!("{name}");
            }
            Ok(0)
        }
        Command::Simulate(args) => simulate(args),
        Command::Validate { config } => {
            let text = std::fs::read_to_string(&config)?;
            // accept either a full scenario config or a bare network config
            let net = match serde_json::from_str::<ScenarioConfig>(&text) {
                Ok(sc) => sc.resolve_network()?,
                Err(_) => crate::config::parse_network_config(&text)?.to_network()?,
            };
            let report = validate(&net);
            print!("{report}");
            Ok(if report.is_valid() { 0 } else { 1 })
        }
        Command::Verdict {
            run,
            expected,
            threshold,
        } => {
            let manifest = RunManifest::read(&run.join("manifest.json"))?;
            let last = manifest.snapshots.last().ok_or_else(|| {
                Error::Snapshot("run directory has no snapshots".into())
            })?;
            let rows = read_snapshot(&run.join(last))?;
            let means = arc_means(&rows);
            let verdict = path_verdict(&means, &expected, threshold);
            println!("{}", serde_json::to_string_pretty(&verdict)?);
            if !expected.is_empty() {
                let net = manifest.config.resolve_network()?;
                let ids: Vec<u32> = verdict.dominant.clone();
                // report connectivity of the dominant set between the outer nodes
                let outer: Vec<u32> = net
                    .nodes
                    .iter()
                    .filter(|n| n.kind.is_outer())
                    .map(|n| n.id)
                    .collect();
                if outer.len() >= 2 {
                    let connected = arcs_connect(&net, &ids, outer[0], *outer.last().unwrap());
                    eprintln!(
                        "dominant set {} nodes {} and {}",
                        if connected { "connects" } else { "does not connect" },
                        outer[0],
                        outer.last().unwrap()
                    );
                }
            }
            Ok(if verdict.matched { 0 } else { 1 })
        }
        Command::Export { scenario, out } => {
            let config = builtin_scenario(&scenario)?.inlined()?;
            let mut json = serde_json::to_string_pretty(&config)?;
            json.push('\n');
            match out {
                Some(path) => std::fs::write(path, json)?,
                None => print!("{json}"),
            }
            Ok(0)
        }
    }
}

fn simulate(args: SimulateArgs) -> crate::Result<i32> {
    let mut config = match (&args.scenario, &args.config) {
        (Some(name), None) => builtin_scenario(name)?,
        (None, Some(path)) => load_scenario_config(path)?,
        _ => {
            return Err(Error::Config(
                "pass exactly one of --scenario or --config".into(),
            ))
        }
    };
    if let Some(k) = args.k {
        config.k = Some(k);
    }
    if let Some(t) = args.t_end {
        config.t_end = t;
    }
    if let Some(s) = args.seed {
        config.seed = s;
    }
    if let Some(n) = args.snapshot_every {
        config.snapshot_every = n;
    }
    if let Some(dir) = args.out {
        config.output_dir = Some(dir);
    }

    let prepared = PreparedRun::new(config)?;
    for (arc, cond) in prepared.sim.static_monotonicity_warnings() {
        eprintln!("warning: arc {arc}: monotonicity condition {cond:?} violated");
    }
    let scenario_name = match &prepared.config.network {
        NetworkRef::Builtin(n) => n.clone(),
        NetworkRef::Inline(_) => "custom".into(),
    };
    eprintln!(
        "running {scenario_name}: {} arcs, k = {:.6}, {} steps",
        prepared.sim.net.arcs.len(),
        prepared.sim.time_step(),
        prepared.n_steps,
    );
    let started = std::time::Instant::now();
    let result = prepared.run()?;
    let elapsed = started.elapsed().as_secs_f64();
    let mu0 = result.mass_series.first().copied().unwrap_or(0.0);
    let mu_end = result.mass_series.last().copied().unwrap_or(0.0);
    println!(
        "terminated {:?} at t = {:.6} after {} steps ({elapsed:.2} s); mass {mu0:.6} -> {mu_end:.6}",
        result.termination, result.final_state.t, result.final_state.step,
    );
    if !prepared.config.expected_path.is_empty() {
        let means = result.final_arc_means(&prepared.sim.net, &prepared.sim.grids);
        let verdict = path_verdict(
            &means,
            &prepared.config.expected_path,
            prepared.config.dominance_threshold,
        );
        println!(
            "path verdict: dominant {:?}, expected {:?}, match = {}, ratio = {:.3e}",
            verdict.dominant, verdict.expected, verdict.matched, verdict.ratio
        );
    }
    if args.fail_on_blowup && result.termination == TerminationReason::BlowUp {
        return Ok(2);
    }
    Ok(0)
}
