//! Command-line harness: simulation, discretization, estimation, kernel
//! and bootstrap runs plus the preset validation experiments, all driven
//! by explicit seeds and echoing their configuration into every report.

use queue_infer_cli::{ingest, validate};

use std::fs;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use queue_infer::asymptotics::{build_kernel_set, default_lag, normal_band, BandMode, LagWeighting};
use queue_infer::bootstrap::{bootstrap_h, BlockConfig, BlockRule, CiMode};
use queue_infer::distributions::parse_model_spec;
use queue_infer::error::Error;
use queue_infer::estimator::{difference_sequence, estimate};
use queue_infer::seeding::{rng_for, seed_for, STREAM_BAND, STREAM_BOOTSTRAP};
use queue_infer::simulator::{
    discretize, simulate_continuous_trace, simulate_counts, ContinuousService, SimConfig,
};

const TOOL: &str = "queue-infer";

#[derive(Parser)]
#[command(name = TOOL, version, about = "Service-time inference for discrete-time infinite-server queues from arrival/departure counts")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate count paths (or a continuous event trace with --continuous).
    Simulate(SimulateArgs),
    /// Bin a continuous event trace onto a slot grid.
    Discretize(DiscretizeArgs),
    /// Estimate the service-time distribution from a count path.
    Estimate(EstimateArgs),
    /// Estimate the limit covariance kernel and confidence bands.
    Kernel(KernelArgs),
    /// Moving-block bootstrap confidence intervals.
    Bootstrap(BootstrapArgs),
    /// Run the preset validation experiments.
    McValidate(McValidateArgs),
}

#[derive(Args, Serialize)]
struct SimulateArgs {
    /// Arrival model spec (poisson:L, geometric:P, negbin:R,P, point:S,
    /// empirical:CSV). Required for discrete runs.
    #[arg(long)]
    arrival: Option<String>,
    /// Service model spec; discrete families as above, or exp:RATE /
    /// point:DURATION with --continuous.
    #[arg(long)]
    service: String,
    /// Number of observed slots (discrete mode).
    #[arg(long)]
    n: Option<usize>,
    /// Burn-in slots; default picks the smallest window that makes the
    /// pre-observation truncation bias negligible.
    #[arg(long = "burn-in")]
    burn_in: Option<usize>,
    /// Continuous-time mode: Poisson arrivals on [0, horizon).
    #[arg(long)]
    continuous: bool,
    /// Arrival intensity (continuous mode).
    #[arg(long)]
    lambda: Option<f64>,
    /// Time horizon (continuous mode).
    #[arg(long)]
    horizon: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output CSV path (t,A,D counts, or kind,time events with --continuous).
    #[arg(long)]
    out: PathBuf,
    /// Optional JSON run report.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct DiscretizeArgs {
    /// Input event-trace CSV (kind,time).
    #[arg(long = "in")]
    input: PathBuf,
    /// Slot width.
    #[arg(long)]
    h: f64,
    /// Horizon; defaults to the smallest grid multiple beyond the last event.
    #[arg(long)]
    horizon: Option<f64>,
    /// Output counts CSV.
    #[arg(long)]
    out: PathBuf,
    /// Optional JSON run report.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct EstimateArgs {
    /// Input counts CSV (t,A,D).
    #[arg(long = "in")]
    input: PathBuf,
    /// Largest evaluation point of the estimated distributions.
    #[arg(long = "x-max", default_value_t = 20)]
    x_max: usize,
    /// Output JSON report.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum WeightingArg {
    Bartlett,
    Truncated,
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum ModeArg {
    Pointwise,
    Uniform,
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum CiArg {
    Percentile,
    Basic,
}

#[derive(Args, Serialize)]
struct KernelArgs {
    /// Input counts CSV (t,A,D).
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long = "x-max", default_value_t = 10)]
    x_max: usize,
    /// Lag truncation; default floor(n^(1/3)) of the valid sample size.
    #[arg(long = "lag-L")]
    lag_l: Option<usize>,
    #[arg(long, value_enum, default_value_t = WeightingArg::Bartlett)]
    weighting: WeightingArg,
    /// Confidence level of the bands.
    #[arg(long, default_value_t = 0.95)]
    level: f64,
    /// Band construction: per-point or simultaneous.
    #[arg(long, value_enum, default_value_t = ModeArg::Pointwise)]
    mode: ModeArg,
    /// Seed for the Gaussian band simulation (uniform mode).
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output JSON report.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Serialize)]
struct BootstrapArgs {
    /// Input counts CSV (t,A,D).
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long = "x-max", default_value_t = 10)]
    x_max: usize,
    /// Explicit block length; default is the n^(1/3) rule.
    #[arg(long = "block-b")]
    block_b: Option<usize>,
    /// Number of bootstrap replicates.
    #[arg(long = "block-B", default_value_t = 500)]
    block_count: usize,
    #[arg(long, default_value_t = 0.9)]
    level: f64,
    #[arg(long = "ci", value_enum, default_value_t = CiArg::Percentile)]
    ci_mode: CiArg,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output JSON report.
    #[arg(long)]
    out: PathBuf,
    /// Optional CSV dump of every replicate (rep,x,h_star,g_star).
    #[arg(long = "dump-reps")]
    dump_reps: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct McValidateArgs {
    /// Master seed of the preset experiments.
    #[arg(long, default_value_t = validate::DEFAULT_MASTER_SEED)]
    seed: u64,
    /// Run only these criterion ids (comma separated), e.g. 1,4,5.
    #[arg(long, value_delimiter = ',')]
    only: Option<Vec<usize>>,
    /// Override the repetition count of the coverage criterion (6); the
    /// preset is 200.
    #[arg(long)]
    reps: Option<usize>,
    /// Output JSON report.
    #[arg(long)]
    out: PathBuf,
}

/// Envelope wrapped around every JSON report.
#[derive(Serialize)]
struct Report<C: Serialize, P: Serialize> {
    tool: &'static str,
    version: &'static str,
    command: &'static str,
    config: C,
    warnings: Vec<String>,
    #[serde(flatten)]
    payload: P,
}

fn write_json<C: Serialize, P: Serialize>(
    path: &PathBuf,
    report: &Report<C, P>,
) -> Result<(), Error> {
    let mut file = fs::File::create(path)?;
    serde_json::to_writer_pretty(&mut file, report)
        .map_err(|e| Error::InvalidInput(format!("report serialization failed: {e}")))?;
    file.write_all(b"\n")?;
    Ok(())
}

fn parse_continuous_service(spec: &str) -> Result<ContinuousService, Error> {
    let (family, arg) = spec.split_once(':').ok_or_else(|| {
        Error::InvalidInput(format!("continuous service spec '{spec}' lacks ':'"))
    })?;
    let value: f64 = arg.trim().parse().map_err(|_| {
        Error::InvalidInput(format!("'{arg}' is not a number in spec '{spec}'"))
    })?;
    match family {
        "exp" => Ok(ContinuousService::Exponential { rate: value }),
        "point" => Ok(ContinuousService::Deterministic { duration: value }),
        other => Err(Error::InvalidInput(format!(
            "unknown continuous service family '{other}' (use exp: or point:)"
        ))),
    }
}

fn cmd_simulate(args: SimulateArgs) -> Result<(), Error> {
    if args.continuous {
        let lambda = args
            .lambda
            .ok_or_else(|| Error::InvalidInput("--continuous requires --lambda".into()))?;
        let horizon = args
            .horizon
            .ok_or_else(|| Error::InvalidInput("--continuous requires --horizon".into()))?;
        let service = parse_continuous_service(&args.service)?;
        let trace = simulate_continuous_trace(lambda, &service, horizon, args.seed)?;
        let mut out = fs::File::create(&args.out)?;
        trace.write_csv(&mut out)?;
        if let Some(report_path) = &args.report {
            #[derive(Serialize)]
            struct Payload {
                arrivals: usize,
                departures: usize,
                dropped_departures: u64,
                horizon: f64,
            }
            let payload = Payload {
                arrivals: trace.arrival_times.len(),
                departures: trace.departure_times.len(),
                dropped_departures: trace.dropped_departures,
                horizon: trace.horizon,
            };
            let report = Report {
                tool: TOOL,
                version: env!("CARGO_PKG_VERSION"),
                command: "simulate",
                config: &args,
                warnings: vec![],
                payload,
            };
            write_json(report_path, &report)?;
        }
        return Ok(());
    }

    let arrival_spec = args
        .arrival
        .as_deref()
        .ok_or_else(|| Error::InvalidInput("discrete simulation requires --arrival".into()))?;
    let n = args
        .n
        .ok_or_else(|| Error::InvalidInput("discrete simulation requires --n".into()))?;
    let arrival = parse_model_spec(arrival_spec)?;
    let service = parse_model_spec(&args.service)?;
    let cfg = SimConfig { n, burn_in: args.burn_in, seed: args.seed };
    let paths = simulate_counts(&arrival, &service, &cfg)?;
    let mut out = fs::File::create(&args.out)?;
    paths.write_csv(&mut out)?;
    if let Some(report_path) = &args.report {
        #[derive(Serialize)]
        struct Payload {
            meta: queue_infer::simulator::PathMeta,
            n: usize,
        }
        let payload = Payload { meta: paths.meta.clone(), n: paths.len() };
        let report = Report {
            tool: TOOL,
            version: env!("CARGO_PKG_VERSION"),
            command: "simulate",
            config: &args,
            warnings: vec![],
            payload,
        };
        write_json(report_path, &report)?;
    }
    Ok(())
}

fn cmd_discretize(args: DiscretizeArgs) -> Result<(), Error> {
    let text = fs::read_to_string(&args.input)?;
    let trace = ingest::ingest_trace(&text, args.horizon, args.h)?;
    let paths = discretize(&trace, args.h)?;
    let mut out = fs::File::create(&args.out)?;
    paths.write_csv(&mut out)?;
    if let Some(report_path) = &args.report {
        #[derive(Serialize)]
        struct Payload {
            n: usize,
            total_arrivals: u64,
            total_departures: u64,
            dropped_departures: u64,
        }
        let payload = Payload {
            n: paths.len(),
            total_arrivals: paths.arrivals.iter().map(|&a| a as u64).sum(),
            total_departures: paths.departures.iter().map(|&d| d as u64).sum(),
            dropped_departures: paths.meta.dropped_after_window,
        };
        let mut warnings = vec![];
        if payload.dropped_departures > 0 {
            warnings.push(format!(
                "{} departure(s) beyond the horizon were dropped",
                payload.dropped_departures
            ));
        }
        let report = Report {
            tool: TOOL,
            version: env!("CARGO_PKG_VERSION"),
            command: "discretize",
            config: &args,
            warnings,
            payload,
        };
        write_json(report_path, &report)?;
    }
    Ok(())
}

fn cmd_estimate(args: EstimateArgs) -> Result<(), Error> {
    let text = fs::read_to_string(&args.input)?;
    let paths = ingest::ingest_counts(&text, &args.input.display().to_string())?;
    let est = estimate(&paths, args.x_max)?;
    #[derive(Serialize)]
    struct Payload {
        estimate: queue_infer::estimator::EstimateSet,
    }
    let warnings = est.warnings.clone();
    let report = Report {
        tool: TOOL,
        version: env!("CARGO_PKG_VERSION"),
        command: "estimate",
        config: &args,
        warnings,
        payload: Payload { estimate: est },
    };
    write_json(&args.out, &report)
}

fn cmd_kernel(args: KernelArgs) -> Result<(), Error> {
    let text = fs::read_to_string(&args.input)?;
    let paths = ingest::ingest_counts(&text, &args.input.display().to_string())?;
    let diffs = difference_sequence(&paths)?;
    let est = estimate(&paths, args.x_max)?;
    let lag = args.lag_l.unwrap_or_else(|| default_lag(diffs.n_valid()));
    let weighting = match args.weighting {
        WeightingArg::Bartlett => LagWeighting::Bartlett,
        WeightingArg::Truncated => LagWeighting::Truncated,
    };
    let kernel = build_kernel_set(&paths, &diffs, args.x_max, lag, weighting)?;
    let mode = match args.mode {
        ModeArg::Pointwise => BandMode::Pointwise,
        ModeArg::Uniform => BandMode::Uniform,
    };
    let mut band_rng = rng_for(seed_for(args.seed, STREAM_BAND), 0);
    let band = normal_band(
        &est.g_raw,
        &kernel.v_kernel,
        kernel.n_used,
        args.level,
        mode,
        &mut band_rng,
    )?;
    #[derive(Serialize)]
    struct Payload {
        estimate: queue_infer::estimator::EstimateSet,
        kernel: queue_infer::asymptotics::KernelSet,
        band: queue_infer::asymptotics::NormalBand,
    }
    let mut warnings = est.warnings.clone();
    warnings.extend(kernel.warnings.clone());
    warnings.extend(band.warnings.clone());
    let report = Report {
        tool: TOOL,
        version: env!("CARGO_PKG_VERSION"),
        command: "kernel",
        config: &args,
        warnings,
        payload: Payload { estimate: est, kernel, band },
    };
    write_json(&args.out, &report)
}

fn cmd_bootstrap(args: BootstrapArgs) -> Result<(), Error> {
    let text = fs::read_to_string(&args.input)?;
    let paths = ingest::ingest_counts(&text, &args.input.display().to_string())?;
    let diffs = difference_sequence(&paths)?;
    let rule = match args.block_b {
        Some(b) => BlockRule::Explicit(b),
        None => BlockRule::CubeRoot,
    };
    let cfg = BlockConfig {
        rule,
        replicates: args.block_count,
        seed: seed_for(args.seed, STREAM_BOOTSTRAP),
    };
    let ci_mode = match args.ci_mode {
        CiArg::Percentile => CiMode::Percentile,
        CiArg::Basic => CiMode::Basic,
    };
    let boot = bootstrap_h(&paths, &diffs, args.x_max, &cfg, args.level, ci_mode)?;
    if let Some(dump) = &args.dump_reps {
        let mut out = fs::File::create(dump)?;
        writeln!(out, "rep,x,h_star,g_star")?;
        for (r, row) in boot.h_star.iter().enumerate() {
            for (xi, h) in row.iter().enumerate() {
                let g = boot
                    .g_star
                    .get(r)
                    .and_then(|gr| gr.get(xi))
                    .map(|g| g.to_string())
                    .unwrap_or_default();
                writeln!(out, "{},{},{},{}", r, xi + 1, h, g)?;
            }
        }
    }
    #[derive(Serialize)]
    struct Payload {
        bootstrap: queue_infer::bootstrap::BootstrapResult,
    }
    let mut warnings = boot.warnings.clone();
    if boot.redraws > 0 {
        warnings.push(format!("{} degenerate replicate(s) were redrawn", boot.redraws));
    }
    let report = Report {
        tool: TOOL,
        version: env!("CARGO_PKG_VERSION"),
        command: "bootstrap",
        config: &args,
        warnings,
        payload: Payload { bootstrap: boot },
    };
    write_json(&args.out, &report)
}

fn cmd_mc_validate(args: McValidateArgs) -> Result<(), Error> {
    let ids: Vec<usize> = match &args.only {
        Some(list) => {
            for id in list {
                if !validate::ALL_IDS.contains(id) {
                    return Err(Error::InvalidInput(format!("unknown criterion id {id}")));
                }
            }
            list.clone()
        }
        None => validate::ALL_IDS.to_vec(),
    };
    let pool = validate::worker_pool();
    let outcomes: Vec<validate::CriterionOutcome> = pool.install(|| {
        ids.iter()
            .map(|&id| validate::run_criterion_with_opts(id, args.seed, args.reps))
            .collect()
    });
    for outcome in &outcomes {
        println!("{}", outcome.line());
    }
    let passed = outcomes.iter().filter(|o| o.pass).count();
    let failed = outcomes.len() - passed;
    #[derive(Serialize)]
    struct Payload {
        criteria: Vec<validate::CriterionOutcome>,
        passed: usize,
        failed: usize,
    }
    let report = Report {
        tool: TOOL,
        version: env!("CARGO_PKG_VERSION"),
        command: "mc-validate",
        config: &args,
        warnings: vec![],
        payload: Payload { criteria: outcomes, passed, failed },
    };
    write_json(&args.out, &report)?;
    if failed > 0 {
        return Err(Error::InvalidInput(format!("{failed} criterion(s) failed")));
    }
    Ok(())
}

fn main() {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(args) => cmd_simulate(args),
        Command::Discretize(args) => cmd_discretize(args),
        Command::Estimate(args) => cmd_estimate(args),
        Command::Kernel(args) => cmd_kernel(args),
        Command::Bootstrap(args) => cmd_bootstrap(args),
        Command::McValidate(args) => cmd_mc_validate(args),
    };
    if let Err(e) = result {
        eprintln!("error[{}]: {}", e.code(), e);
        std::process::exit(1);
    }
}
