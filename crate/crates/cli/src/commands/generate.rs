use anyhow::Result;
use clap::Args;
use flowmat_core::synth::{write_csv, SynthConfig};
use std::path::PathBuf;

#[derive(Args)]
pub struct GenerateArgs {
    /// CSV output (`-` for stdout)
    #[arg(short, long, default_value = "-")]
    pub output: PathBuf,
    #[arg(long, default_value_t = 10_000)]
    pub flows: u64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Endpoint pool size
    #[arg(long, default_value_t = 4096)]
    pub hosts: u32,
    /// Tail exponent of the per-host flow-count distribution
    #[arg(long, default_value_t = 2.0)]
    pub degree_exponent: f64,
    /// Target mean forward packets per flow
    #[arg(long, default_value_t = 50.0)]
    pub mean_pkts: f64,
    /// Pareto tail exponent of per-flow packet counts
    #[arg(long, default_value_t = 2.5)]
    pub pkts_exponent: f64,
    /// Reverse-direction packet scale (0 disables reverse traffic)
    #[arg(long, default_value_t = 0.3)]
    pub rev_ratio: f64,
    /// Earliest flow start, Unix epoch seconds
    #[arg(long, default_value_t = 1_600_000_000)]
    pub t_start: i64,
    /// Flow starts spread over this many seconds
    #[arg(long, default_value_t = 3600)]
    pub span: u32,
    /// Longest flow duration in seconds
    #[arg(long, default_value_t = 8)]
    pub max_duration: u32,
}

pub fn run(args: GenerateArgs) -> Result<()> {
    let cfg = SynthConfig {
        flows: args.flows,
        seed: args.seed,
        hosts: args.hosts,
        degree_exponent: args.degree_exponent,
        mean_pkts: args.mean_pkts,
        pkts_exponent: args.pkts_exponent,
        rev_ratio: args.rev_ratio,
        t_start: args.t_start,
        span_secs: args.span,
        max_duration_secs: args.max_duration,
    };
    let mut writer = super::output_writer(&args.output)?;
    let summary = write_csv(&mut writer, &cfg)?;
    writer.flush()?;
    eprintln!(
        "generated {} flows, {} packets",
        summary.flows, summary.total_packets
    );
    Ok(())
}
