use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use clap::{Parser, Subcommand};
use iqtwin::bench::{
    parse_duration, run_endpoint_bench, run_engine_bench, BenchProfile, BenchReport,
    EndpointBenchConfig, EngineBenchConfig, ReportFormat,
};

#[derive(Parser)]
#[command(
    name = "iqtwin-bench",
    about = "Endpoint and engine latency benchmarks"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
    /// text, csv or json
    #[arg(long, global = true, default_value = "text")]
    format: ReportFormat,
    /// Also write the report here; the format follows the extension.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_parser = parse_duration, default_value = "30s")]
    duration: Duration,
    #[arg(long, global = true, default_value_t = 1000)]
    warmup: u64,
    #[arg(long, global = true, default_value = "warn")]
    log_level: String,
}

#[derive(Subcommand)]
enum Cmd {
    /// Superposition latency of one receiver fed by N sources.
    Endpoint {
        #[arg(long, default_value_t = 1)]
        sources: usize,
        #[arg(long, default_value = "lte10")]
        profile: String,
    },
    /// Channel pipeline latency for N transmitters and N receivers.
    Engine {
        #[arg(long, default_value_t = 1)]
        links: usize,
        #[arg(long, default_value = "lte10")]
        profile: String,
        #[arg(long, default_value_t = 1)]
        taps: usize,
        #[arg(long, default_value_t = 5.0)]
        drop_threshold_ms: f64,
        /// Skip engine-side noise.
        #[arg(long)]
        no_noise: bool,
    },
}

fn run(cli: Cli) -> Result<bool, iqtwin::bench::BenchError> {
    let profile = |name: &str| {
        BenchProfile::by_name(name).map(|p| p.with_duration(cli.duration).with_warmup(cli.warmup))
    };
    let report = match &cli.cmd {
        Cmd::Endpoint {
            sources,
            profile: p,
        } => run_endpoint_bench(&EndpointBenchConfig::new(profile(p)?, *sources))?,
        Cmd::Engine {
            links,
            profile: p,
            taps,
            drop_threshold_ms,
            no_noise,
        } => {
            let mut cfg = EngineBenchConfig::new(profile(p)?, *links);
            cfg.taps = *taps;
            cfg.drop_threshold_ms = *drop_threshold_ms;
            cfg.engine_noise = !no_noise;
            run_engine_bench(&cfg)?
        }
    };
    let reports = [report];
    println!("{}", BenchReport::render(&reports, cli.format)?);
    if let Some(path) = &cli.out {
        let fmt = match path.extension().and_then(|e| e.to_str()) {
            Some("json") => ReportFormat::Json,
            Some("csv") => ReportFormat::Csv,
            _ => ReportFormat::Text,
        };
        std::fs::write(path, BenchReport::render(&reports, fmt)?)?;
    }
    Ok(reports[0].pass)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    iqtwin::init_logging(&cli.log_level);
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("iqtwin-bench: {e}");
            ExitCode::FAILURE
        }
    }
}
