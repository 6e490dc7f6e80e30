//! `fpolicy` command-line front end.
//!
//! Exit codes: 0 success, 1 a verification suite failed, 2 usage or
//! configuration error.

mod network;
mod output;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use fpolicy::capacity::{scale_to_boundary, stability_lp_feasible, WitnessEntry};
use fpolicy::cones::{lyapunov_value, resolve_cone, resolve_cone_pc};
use fpolicy::config::policy_from;
use fpolicy::sim::{self, ArrivalProcess, SimConfig, SimStats, TraceMode};
use fpolicy::trace::write_trace;
use fpolicy::verify::{run_suites, VerifyOptions};
use fpolicy::{RankOrdering, WeightTable};
use rayon::prelude::*;
use serde::Serialize;

use network::{load, parse_list, Setup};

#[derive(Parser)]
#[command(name = "fpolicy", version, about = "Priority-based opportunistic routing experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct NetworkArgs {
    /// TOML experiment file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Built-in topology: example, single-relay[:p], chain:N[:p], pair[:pd[:pc]], line:H[:fw[:bw[:skip]]].
    #[arg(long)]
    network: Option<String>,
}

impl NetworkArgs {
    fn load(&self, k: Option<f64>) -> Result<Setup> {
        load(self.config.as_deref(), self.network.as_deref(), k)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Rank ordering whose cone contains a backlog vector.
    Resolve {
        /// Comma-separated backlogs of relays 1..N.
        #[arg(long)]
        q: String,
        #[arg(long = "K", default_value_t = 3.0)]
        k: f64,
        /// Restrict to path-connected orderings of the given network.
        #[arg(long)]
        pc: bool,
        #[command(flatten)]
        net: NetworkArgs,
    },
    /// One simulation run.
    Simulate(SimulateArgs),
    /// Property suites; exits 1 when any suite fails.
    Verify(VerifyArgs),
    /// Stability-region membership and boundary scaling.
    Capacity {
        #[command(flatten)]
        net: NetworkArgs,
        /// Rate vector to test.
        #[arg(long)]
        lambda: Option<String>,
        /// Direction to scale to the region boundary.
        #[arg(long)]
        direction: Option<String>,
        /// Include the routing witness of the slack LP.
        #[arg(long)]
        witness: bool,
    },
    /// Grid of runs from the [sweep] section of a config file.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
        /// Worker threads; all cores when unset.
        #[arg(long)]
        jobs: Option<usize>,
        /// Also write a CSV trace per grid point.
        #[arg(long)]
        traces: bool,
    },
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    net: NetworkArgs,
    #[arg(long)]
    policy: Option<String>,
    #[arg(long)]
    tie: Option<String>,
    #[arg(long = "K")]
    k: Option<f64>,
    /// Comma-separated arrival rates; replaces the config's rates.
    #[arg(long)]
    lambda: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    horizon: Option<u64>,
    #[arg(long)]
    warmup: Option<u64>,
    /// CSV trace destination.
    #[arg(long)]
    trace_out: Option<PathBuf>,
    /// Summary JSON destination; stdout when unset.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    #[command(flatten)]
    net: NetworkArgs,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 2000)]
    samples: usize,
    /// Largest relay count for the model-free suites.
    #[arg(long, default_value_t = 4)]
    n_max: usize,
    /// Comma-separated geometric bases.
    #[arg(long = "K", default_value = "2,3,10")]
    ks: String,
    /// Geometric base for the ORCD refinement suite.
    #[arg(long = "orcd-K")]
    orcd_k: Option<f64>,
    /// Negative control: run the cone suites with a constant weight table.
    #[arg(long)]
    broken_weights: bool,
    #[arg(long, default_value_t = 10)]
    drift_states: usize,
    #[arg(long, default_value_t = 2000)]
    drift_mc: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Serialize)]
struct ResolveOutput {
    ordering: RankOrdering,
    on_boundary: bool,
    lyapunov_value: f64,
    path_connected: bool,
}

fn cmd_resolve(q: &str, k: f64, pc: bool, net: &NetworkArgs) -> Result<()> {
    let q = parse_list(q)?;
    let (res, f) = if pc {
        let setup = net.load(Some(k))?;
        if setup.model.n_relays() != q.len() {
            bail!("q has {} entries but the network has {} relays", q.len(), setup.model.n_relays());
        }
        let f = WeightTable::geometric(k, q.len())?;
        (resolve_cone_pc(&q, &f, &setup.model)?, f)
    } else {
        let f = WeightTable::geometric(k, q.len())?;
        (resolve_cone(&q, &f)?, f)
    };
    let out = ResolveOutput {
        lyapunov_value: lyapunov_value(&q, &f, &res.ordering),
        ordering: res.ordering,
        on_boundary: res.on_boundary,
        path_connected: pc,
    };
    print!("{}", output::render(&out)?);
    Ok(())
}

#[derive(Serialize)]
struct SimSummary<'a> {
    rates: &'a [f64],
    #[serde(flatten)]
    stats: &'a SimStats,
}

fn build_sim(args: &SimulateArgs) -> Result<SimConfig> {
    let setup = args.net.load(args.k)?;
    let file = setup.file.as_ref();
    let name = args
        .policy
        .clone()
        .or_else(|| file.and_then(|f| f.policy.as_ref().map(|p| p.name.clone())))
        .unwrap_or_else(|| "fpolicy".into());
    let tie = args.tie.clone().or_else(|| file.and_then(|f| f.policy.as_ref().and_then(|p| p.tie.clone())));
    let policy = policy_from(&name, tie.as_deref(), &setup.weight, &setup.model)?;
    let mut arrivals = match file.and_then(|f| f.arrivals.as_ref()) {
        Some(a) => a.build(),
        None => ArrivalProcess::none(setup.model.n_relays()),
    };
    match &args.lambda {
        Some(l) => arrivals.rates = parse_list(l)?,
        None if file.and_then(|f| f.arrivals.as_ref()).is_none() => {
            bail!("no arrival rates: pass --lambda or add an [arrivals] section")
        }
        None => {}
    }
    let sim_section = file.map(|f| f.sim.clone()).unwrap_or_default();
    let horizon = args.horizon.or(sim_section.horizon).unwrap_or(100_000);
    let seed = args.seed.or(sim_section.seed).unwrap_or(1);
    let mut cfg = SimConfig::new(setup.model, policy, arrivals, horizon, seed);
    if let Some(w) = args.warmup.or(sim_section.warmup) {
        cfg.warmup = w;
    }
    if args.trace_out.is_some() {
        cfg.trace = TraceMode::Full;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn write_trace_file(path: &Path, stats: &SimStats) -> Result<()> {
    let rows = stats.trace.as_deref().unwrap_or_default();
    output::write_atomic(path, |w| Ok(write_trace(rows, w)?))
}

fn cmd_simulate(args: &SimulateArgs) -> Result<()> {
    let cfg = build_sim(args)?;
    let stats = sim::run(&cfg)?;
    if let Some(path) = &args.trace_out {
        write_trace_file(path, &stats)?;
    }
    let summary = SimSummary {
        rates: &cfg.arrivals.rates,
        stats: &stats,
    };
    match &args.out {
        Some(path) => output::write_json(path, &summary)?,
        None => print!("{}", output::render(&summary)?),
    }
    Ok(())
}

fn cmd_verify(args: &VerifyArgs) -> Result<bool> {
    let setup = args.net.load(None)?;
    let mut opts = VerifyOptions::new(setup.model);
    opts.seed = args.seed;
    opts.samples = args.samples;
    opts.n_max = args.n_max;
    opts.ks = parse_list(&args.ks)?;
    opts.orcd_k = args.orcd_k;
    opts.drift_states = args.drift_states;
    opts.drift_mc = args.drift_mc;
    if args.broken_weights {
        let n = opts.n_max.max(opts.model.n_relays());
        opts.weight_override = Some(WeightTable::from_fn("constant", n, |_, _| 1.0));
    }
    if opts.ks.iter().any(|&k| k < 1.0 + 1e-9) {
        bail!("geometric K must be at least 1 + 1e-9");
    }
    let report = run_suites(&opts);
    match &args.out {
        Some(path) => output::write_json(path, &report)?,
        None => print!("{}", output::render(&report)?),
    }
    Ok(report.all_passed)
}

#[derive(Serialize)]
struct CapacityOutput {
    #[serde(skip_serializing_if = "Option::is_none")]
    feasible: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    slack: Option<f64>,
    /// Largest multiple of the rate (or direction) vector that is stabilizable.
    #[serde(skip_serializing_if = "Option::is_none")]
    theta_star: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    witness: Option<Vec<WitnessEntry>>,
}

fn cmd_capacity(net: &NetworkArgs, lambda: Option<&str>, direction: Option<&str>, witness: bool) -> Result<()> {
    let setup = net.load(None)?;
    let m = &setup.model;
    let mut out = CapacityOutput {
        feasible: None,
        slack: None,
        theta_star: None,
        witness: None,
    };
    match (lambda, direction) {
        (Some(l), None) => {
            let l = parse_list(l)?;
            let r = stability_lp_feasible(m, &l)?;
            out.feasible = Some(r.feasible);
            out.slack = Some(r.slack);
            if l.iter().any(|&x| x > 0.0) {
                out.theta_star = Some(scale_to_boundary(m, &l)?);
            }
            out.witness = witness.then_some(r.witness);
        }
        (None, Some(d)) => {
            let d = parse_list(d)?;
            let theta = scale_to_boundary(m, &d)?;
            out.theta_star = Some(theta);
            if witness && theta > 0.0 {
                let at: Vec<f64> = d.iter().map(|x| x * theta).collect();
                out.witness = Some(stability_lp_feasible(m, &at)?.witness);
            }
        }
        _ => bail!("pass exactly one of --lambda and --direction"),
    }
    print!("{}", output::render(&out)?);
    Ok(())
}

#[derive(Serialize)]
struct SweepPoint {
    file: String,
    policy: String,
    scaling: f64,
    rates: Vec<f64>,
    seed: u64,
    avg_total_backlog: f64,
    mean_delay: f64,
    final_total_backlog: u64,
}

#[derive(Serialize)]
struct SweepIndex {
    theta_star: Option<f64>,
    points: Vec<SweepPoint>,
}

fn cmd_sweep(config: &Path, out_dir: &Path, jobs: Option<usize>, traces: bool) -> Result<()> {
    let setup = load(Some(config), None, None)?;
    let file = setup.file.as_ref().expect("config loaded");
    let Some(sweep) = file.sweep.clone() else {
        bail!("{} has no [sweep] section", config.display());
    };
    let m = &setup.model;
    if sweep.policies.is_empty() || sweep.scalings.is_empty() || sweep.seeds.is_empty() {
        bail!("sweep needs at least one policy, scaling and seed");
    }
    if sweep.direction.len() != m.n_relays() {
        bail!("sweep direction has {} entries, network has {} relays", sweep.direction.len(), m.n_relays());
    }
    let theta = if sweep.relative { Some(scale_to_boundary(m, &sweep.direction)?) } else { None };
    let base = file.arrivals.as_ref().map(|a| a.build()).unwrap_or_else(|| ArrivalProcess::none(m.n_relays()));
    let mut points = Vec::new();
    for (pi, name) in sweep.policies.iter().enumerate() {
        let tie = file.policy.as_ref().and_then(|p| p.tie.as_deref());
        let policy = policy_from(name, tie, &setup.weight, m)?;
        for (si, &scaling) in sweep.scalings.iter().enumerate() {
            let factor = scaling * theta.unwrap_or(1.0);
            let mut arrivals = base.clone();
            arrivals.rates = sweep.direction.iter().map(|d| d * factor).collect();
            for &seed in &sweep.seeds {
                let mut cfg = SimConfig::new(m.clone(), policy.clone(), arrivals.clone(), sweep.horizon, seed);
                if let Some(w) = sweep.warmup {
                    cfg.warmup = w;
                }
                if traces {
                    cfg.trace = TraceMode::Full;
                }
                cfg.validate()?;
                points.push((format!("p{pi}-s{si}-seed{seed}"), scaling, cfg));
            }
        }
    }
    std::fs::create_dir_all(out_dir).with_context(|| format!("cannot create {}", out_dir.display()))?;
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(j) = jobs {
        pool = pool.num_threads(j);
    }
    let pool = pool.build()?;
    let results: Vec<SweepPoint> = pool.install(|| {
        points
            .par_iter()
            .map(|(stem, scaling, cfg)| -> Result<SweepPoint> {
                let stats = sim::run(cfg)?;
                if traces {
                    write_trace_file(&out_dir.join(format!("{stem}.csv")), &stats)?;
                }
                let summary = SimSummary {
                    rates: &cfg.arrivals.rates,
                    stats: &stats,
                };
                let file = format!("{stem}.json");
                output::write_json(&out_dir.join(&file), &summary)?;
                Ok(SweepPoint {
                    file,
                    policy: stats.policy.clone(),
                    scaling: *scaling,
                    rates: cfg.arrivals.rates.clone(),
                    seed: cfg.seed,
                    avg_total_backlog: stats.avg_total_backlog,
                    mean_delay: stats.mean_delay,
                    final_total_backlog: stats.final_total_backlog(),
                })
            })
            .collect::<Result<_>>()
    })?;
    let index = SweepIndex {
        theta_star: theta,
        points: results,
    };
    output::write_json(&out_dir.join("index.json"), &index)?;
    print!("{}", output::render(&index)?);
    Ok(())
}

fn run(cli: Cli) -> Result<bool> {
    match &cli.command {
        Command::Resolve { q, k, pc, net } => cmd_resolve(q, *k, *pc, net)?,
        Command::Simulate(args) => cmd_simulate(args)?,
        Command::Verify(args) => return cmd_verify(args),
        Command::Capacity {
            net,
            lambda,
            direction,
            witness,
        } => cmd_capacity(net, lambda.as_deref(), direction.as_deref(), *witness)?,
        Command::Sweep {
            config,
            out_dir,
            jobs,
            traces,
        } => cmd_sweep(config, out_dir, *jobs, *traces)?,
    }
    Ok(true)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = run(cli);
    std::io::stdout().flush().ok();
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
