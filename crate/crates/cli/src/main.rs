//! `flowmat`: netflow CSV in, anonymized hypersparse traffic matrices,
//! multi-temporal subrange statistics, and delta-coded TML streams out.

mod commands;

use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "flowmat",
    version,
    about = "Netflow traffic-matrix toolkit: ingest, window, analyze, anonymize, compress",
    propagate_version = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse flow CSV, time-normalize, and write a TML stream
    Ingest(commands::ingest::IngestArgs),
    /// Analyze a TML stream into per-window aggregate files
    Analyze(commands::analyze::AnalyzeArgs),
    /// Encode triple text (t,src,dst,count) into TML
    Encode(commands::codec::EncodeArgs),
    /// Decode TML back into triple text
    Decode(commands::codec::DecodeArgs),
    /// Re-key a TML stream through the address permutation
    Anon(commands::anon::AnonArgs),
    /// Summarize a TML stream: entries, packets, bytes, bits/packet
    Stats(commands::stats::StatsArgs),
    /// Render aggregate files as CSV or JSON lines
    Dump(commands::dump::DumpArgs),
    /// Sweep process x thread configurations and report packets/sec
    Bench(commands::bench::BenchArgs),
    /// Generate a deterministic synthetic flow corpus
    Generate(commands::generate::GenerateArgs),
    /// Internal: one benchmark worker in its own OS process
    #[command(hide = true)]
    BenchWorker(commands::bench::BenchWorkerArgs),
}

fn main() {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Ingest(args) => commands::ingest::run(args),
        Command::Analyze(args) => commands::analyze::run(args),
        Command::Encode(args) => commands::codec::run_encode(args),
        Command::Decode(args) => commands::codec::run_decode(args),
        Command::Anon(args) => commands::anon::run(args),
        Command::Stats(args) => commands::stats::run(args),
        Command::Dump(args) => commands::dump::run(args),
        Command::Bench(args) => commands::bench::run(args),
        Command::Generate(args) => commands::generate::run(args),
        Command::BenchWorker(args) => commands::bench::run_worker_process(args),
    };
    if let Err(err) = result {
        // a closed pipe downstream (e.g. | head) is not an error
        if let Some(io_err) = err.root_cause().downcast_ref::<std::io::Error>() {
            if io_err.kind() == std::io::ErrorKind::BrokenPipe {
                return;
            }
        }
        eprintln!("error: {err:#}");
        std::process::exit(1);
    }
}
