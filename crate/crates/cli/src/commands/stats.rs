use anyhow::{Context, Result};
use clap::Args;
use flowmat_core::tml::tml_stats;
use std::path::PathBuf;

#[derive(Args)]
pub struct StatsArgs {
    /// TML input (`-` for stdin)
    pub input: PathBuf,
}

pub fn run(args: StatsArgs) -> Result<()> {
    let stats = tml_stats(super::input_reader(&args.input)?)
        .with_context(|| format!("reading {}", args.input.display()))?;
    println!("entries:         {}", stats.entries);
    println!("total packets:   {}", stats.total_packets);
    println!("total bytes:     {}", stats.total_bytes);
    let bpp = stats.bits_per_packet();
    if bpp.is_finite() {
        println!("bits per packet: {bpp:.6}");
    } else {
        println!("bits per packet: inf (no packets)");
    }
    Ok(())
}
