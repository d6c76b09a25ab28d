use anyhow::{bail, Context, Result};
use clap::Args;
use flowmat_core::flow::{ErrorPolicy, FlowCsvReader, MatrixAccumulator, DEFAULT_OPEN_SECONDS};
use flowmat_core::tml::TmlEncoder;
use std::path::PathBuf;

#[derive(Args)]
pub struct IngestArgs {
    /// Flow CSV input (`-` for stdin): start,end,src,dst,fwd_pkts,rev_pkts
    pub input: PathBuf,
    /// TML output (`-` for stdout)
    #[arg(short, long, default_value = "-")]
    pub output: PathBuf,
    /// What to do with malformed lines
    #[arg(long, value_enum, default_value_t = OnError::Abort)]
    pub on_error: OnError,
    /// Treat input as sorted by record start: seconds are flushed as soon
    /// as no later record can touch them, keeping memory flat
    #[arg(long)]
    pub sorted: bool,
    /// Cap on simultaneously open seconds
    #[arg(long, default_value_t = DEFAULT_OPEN_SECONDS)]
    pub budget: usize,
    /// Append a CRC32C to every TML entry
    #[arg(long)]
    pub crc: bool,
}

#[derive(Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum OnError {
    /// Stop at the first malformed line
    Abort,
    /// Skip malformed lines and report the count
    Skip,
}

pub fn run(args: IngestArgs) -> Result<()> {
    let policy = match args.on_error {
        OnError::Abort => ErrorPolicy::Abort,
        OnError::Skip => ErrorPolicy::Skip,
    };
    let mut reader = FlowCsvReader::new(super::input_reader(&args.input)?, policy);
    let writer = super::output_writer(&args.output)?;
    let mut encoder = TmlEncoder::new(writer, args.crc).context("writing TML header")?;
    let mut acc = MatrixAccumulator::new(args.budget);

    let mut records = 0u64;
    let mut packets: u128 = 0;
    let mut seconds = 0u64;
    let mut prev_start: Option<i64> = None;

    for item in reader.by_ref() {
        let (line, rec) = item?;
        if args.sorted {
            if let Some(prev) = prev_start {
                if rec.start < prev {
                    bail!(
                        "line {line}: input is not sorted by start time \
                         (drop --sorted or sort the corpus)"
                    );
                }
            }
            prev_start = Some(rec.start);
            for (tbin, matrix) in acc.drain_before(rec.start) {
                encoder.push(tbin, &matrix)?;
                seconds += 1;
            }
        }
        acc.push_record(&rec)?;
        records += 1;
        packets += (rec.fwd_pkts + rec.rev_pkts) as u128;
    }
    let skipped = reader.skipped();
    for (tbin, matrix) in acc.finish() {
        encoder.push(tbin, &matrix)?;
        seconds += 1;
    }
    encoder.finish()?;

    eprintln!("ingested {records} records ({packets} packets) into {seconds} seconds");
    if skipped > 0 {
        eprintln!("skipped {skipped} malformed lines");
    }
    Ok(())
}
