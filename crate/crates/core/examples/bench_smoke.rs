//! A short run of both latency benchmarks from library code. The
//! `iqtwin-bench` binary wraps the same calls with a command line.

use std::time::Duration;

use iqtwin::bench::{
    run_endpoint_bench, run_engine_bench, BenchProfile, EndpointBenchConfig, EngineBenchConfig,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let profile = BenchProfile::by_name("lte10")?.with_duration(Duration::from_secs(2));
    let engine = run_engine_bench(&EngineBenchConfig::new(profile, 1))?;
    print!("{}", engine.text());

    let light = BenchProfile::by_name("lte1_4")?.with_duration(Duration::from_secs(2));
    for n in [1, 4] {
        let cfg = EndpointBenchConfig::new(light.clone(), n);
        print!("{}", run_endpoint_bench(&cfg)?.text());
    }
    Ok(())
}
