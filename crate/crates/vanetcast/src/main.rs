use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};

use vanetcast_core::metrics::{analyze, MetricsOptions};
use vanetcast_core::scenario::{ProtocolKind, ScenarioConfig};
use vanetcast_core::trace::parse_trace;

use vanetcast::batch::{self, BatchSpec};
use vanetcast::config::{Overrides, ScenarioFile};
use vanetcast::report::{self, ReportRow};
use vanetcast::trends;

/// Deterministic multicast-routing simulator for vehicular networks.
#[derive(Parser)]
#[command(name = "vanetcast", version, about)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a single scenario, write its trace and print the metrics row.
    Run(RunArgs),
    /// Run a scenario batch and write traces plus a CSV report.
    Matrix(MatrixArgs),
    /// Recompute metrics from an existing trace file.
    Analyze(AnalyzeArgs),
    /// Evaluate the comparison trends over a metrics CSV.
    Trends(TrendsArgs),
}

#[derive(Args, Clone, Default)]
struct OverrideArgs {
    /// Routing protocol: maodv or puma.
    #[arg(long)]
    protocol: Option<ProtocolKind>,
    #[arg(long)]
    seed: Option<u64>,
    /// Vehicle count.
    #[arg(long)]
    nodes: Option<u32>,
    /// Simulated duration in seconds.
    #[arg(long)]
    duration_s: Option<f64>,
    /// Listener pool size.
    #[arg(long)]
    listeners: Option<u32>,
    /// Join/leave sessions per listener.
    #[arg(long)]
    sessions: Option<u32>,
}

impl From<&OverrideArgs> for Overrides {
    fn from(a: &OverrideArgs) -> Overrides {
        Overrides {
            protocol: a.protocol,
            seed: a.seed,
            nodes: a.nodes,
            duration_s: a.duration_s,
            listeners: a.listeners,
            sessions: a.sessions,
        }
    }
}

#[derive(Args)]
struct RunArgs {
    /// Scenario file (TOML); defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    overrides: OverrideArgs,
    /// Output directory for the trace (default: $VANETCAST_OUT or ./out).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Wall-clock budget for the run, in seconds.
    #[arg(long, default_value_t = 600)]
    budget_s: u64,
    /// Divide total delay by delivered rather than sent packets.
    #[arg(long)]
    eed_per_received: bool,
    /// Print the effective scenario as TOML and exit without running.
    #[arg(long)]
    dump_config: bool,
}

#[derive(Args)]
struct MatrixArgs {
    /// Generate the full reference comparison: both protocols over
    /// listeners {10,20,40,60} x sessions {5,10,20}, seeds shared per
    /// cell.
    #[arg(long, conflicts_with = "config")]
    paper_matrix: bool,
    /// Scenario files to run (repeatable).
    #[arg(long)]
    config: Vec<PathBuf>,
    /// Base seed for --paper-matrix and for --reps offsets.
    #[arg(long)]
    seed: Option<u64>,
    /// Repetitions per scenario with seeds base, base+1, ...
    #[arg(long, default_value_t = 1)]
    reps: u32,
    /// Output directory for traces and report.csv (default: $VANETCAST_OUT or ./out).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Wall-clock budget per scenario, in seconds.
    #[arg(long, default_value_t = 600)]
    budget_s: u64,
    /// Delete each trace after analysis, keeping only report.csv.
    #[arg(long)]
    discard_traces: bool,
    /// Divide total delay by delivered rather than sent packets.
    #[arg(long)]
    eed_per_received: bool,
}

#[derive(Args)]
struct AnalyzeArgs {
    /// Trace file to analyse.
    trace: PathBuf,
    /// Divide total delay by delivered rather than sent packets.
    #[arg(long)]
    eed_per_received: bool,
}

#[derive(Args)]
struct TrendsArgs {
    /// Metrics CSV produced by `matrix`.
    report: PathBuf,
}

fn out_dir(flag: Option<PathBuf>) -> PathBuf {
    flag.unwrap_or_else(|| {
        std::env::var_os("VANETCAST_OUT")
            .map(PathBuf::from)
            .unwrap_or_else(|| PathBuf::from("out"))
    })
}

fn load_scenario(path: Option<&PathBuf>, overrides: &OverrideArgs) -> anyhow::Result<ScenarioFile> {
    let mut file = match path {
        Some(p) => ScenarioFile::load(p).with_context(|| format!("loading {}", p.display()))?,
        None => ScenarioFile::default(),
    };
    Overrides::from(overrides).apply(&mut file);
    Ok(file)
}

fn metrics_options(eed_per_received: bool) -> MetricsOptions {
    MetricsOptions { eed_per_received }
}

fn cmd_run(args: RunArgs) -> anyhow::Result<ExitCode> {
    let file = load_scenario(args.config.as_ref(), &args.overrides)?;
    if args.dump_config {
        print!("{}", file.to_toml());
        return Ok(ExitCode::SUCCESS);
    }
    let cfg = file.to_config()?;
    let dir = out_dir(args.out);
    std::fs::create_dir_all(&dir)
        .with_context(|| format!("creating output directory {}", dir.display()))?;
    let trace_path = dir.join(format!("{}.tr", cfg.scenario_id()));
    let metrics = batch::run_scenario(
        &cfg,
        &trace_path,
        Duration::from_secs(args.budget_s),
        metrics_options(args.eed_per_received),
    )
    .map_err(|reason| anyhow::anyhow!("{reason}"))?;
    eprintln!("trace written to {}", trace_path.display());
    println!("{}", report::CSV_HEADER);
    println!("{}", ReportRow::new(&cfg, &metrics).to_csv_line());
    Ok(ExitCode::SUCCESS)
}

fn cmd_matrix(args: MatrixArgs) -> anyhow::Result<ExitCode> {
    let scenarios: Vec<ScenarioConfig> = if args.paper_matrix {
        let base = ScenarioConfig::default();
        batch::paper_matrix(&base, args.seed.unwrap_or(base.seed), args.reps)
    } else if args.config.is_empty() {
        bail!("nothing to run: pass --paper-matrix or at least one --config file");
    } else {
        let mut out = Vec::new();
        for path in &args.config {
            let file = ScenarioFile::load(path)
                .with_context(|| format!("loading {}", path.display()))?;
            let cfg = file.to_config()?;
            let base_seed = args.seed.unwrap_or(cfg.seed);
            for rep in 0..args.reps.max(1) as u64 {
                out.push(ScenarioConfig {
                    seed: base_seed + rep,
                    ..cfg.clone()
                });
            }
        }
        out
    };
    let mut spec = BatchSpec::new(scenarios, out_dir(args.out));
    spec.budget = Duration::from_secs(args.budget_s);
    spec.keep_traces = !args.discard_traces;
    spec.metrics = metrics_options(args.eed_per_received);
    spec.check_ids().map_err(|e| anyhow::anyhow!(e))?;
    let outcome = batch::run_matrix(&spec)?;
    let report_path = spec.out_dir.join("report.csv");
    std::fs::write(&report_path, report::to_csv(&outcome.rows))
        .with_context(|| format!("writing {}", report_path.display()))?;
    eprintln!(
        "{} scenario(s) succeeded, {} failed; report at {}",
        outcome.rows.len(),
        outcome.failures.len(),
        report_path.display()
    );
    for failure in &outcome.failures {
        eprintln!("FAILED {failure}");
    }
    Ok(if outcome.failures.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    })
}

fn cmd_analyze(args: AnalyzeArgs) -> anyhow::Result<ExitCode> {
    let text = std::fs::read_to_string(&args.trace)
        .with_context(|| format!("reading {}", args.trace.display()))?;
    let records = parse_trace(&text).map_err(|e| anyhow::anyhow!("{e}"))?;
    let m = analyze(&records, metrics_options(args.eed_per_received))
        .map_err(|e| anyhow::anyhow!("{e}"))?;
    println!("pdr {:.6}", m.pdr);
    println!("avg_eed_s {:.6}", m.avg_eed_s);
    println!("throughput_kbps {:.3}", m.throughput_kbps);
    println!("nrl {:.6}", m.nrl);
    println!("data_packets_sent {}", m.data_packets_sent);
    println!("data_receptions {}", m.data_receptions);
    println!("expected_receptions {}", m.expected_receptions);
    println!("control_sends {}", m.control_sends);
    Ok(ExitCode::SUCCESS)
}

fn cmd_trends(args: TrendsArgs) -> anyhow::Result<ExitCode> {
    let text = std::fs::read_to_string(&args.report)
        .with_context(|| format!("reading {}", args.report.display()))?;
    let rows = report::parse_csv(&text)?;
    let result = trends::evaluate(&rows)?;
    print!("{result}");
    Ok(if result.all_passed() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.cmd {
        Cmd::Run(a) => cmd_run(a),
        Cmd::Matrix(a) => cmd_matrix(a),
        Cmd::Analyze(a) => cmd_analyze(a),
        Cmd::Trends(a) => cmd_trends(a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
