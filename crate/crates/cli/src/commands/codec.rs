//! Triple-text <-> TML conversion. The text side is one line per nonzero:
//! `t,src,dst,count`, grouped by ascending timestamp, canonical coordinate
//! order within a timestamp; addresses print as dotted quads and parse as
//! dotted quad or decimal.

use anyhow::{bail, Context, Result};
use clap::Args;
use flowmat_core::subrange::{format_addr, parse_addr};
use flowmat_core::tml::{TmlDecoder, TmlEncoder};
use flowmat_core::TrafficMatrix;
use std::io::{BufRead, Write};
use std::path::PathBuf;

#[derive(Args)]
pub struct EncodeArgs {
    /// Triple text input (`-` for stdin)
    pub input: PathBuf,
    /// TML output (`-` for stdout)
    #[arg(short, long, default_value = "-")]
    pub output: PathBuf,
    /// Append a CRC32C to every TML entry
    #[arg(long)]
    pub crc: bool,
}

#[derive(Args)]
pub struct DecodeArgs {
    /// TML input (`-` for stdin)
    pub input: PathBuf,
    /// Triple text output (`-` for stdout)
    #[arg(short, long, default_value = "-")]
    pub output: PathBuf,
}

pub fn run_encode(args: EncodeArgs) -> Result<()> {
    let reader = super::input_reader(&args.input)?;
    let writer = super::output_writer(&args.output)?;
    let mut encoder = TmlEncoder::new(writer, args.crc).context("writing TML header")?;

    let mut current_t: Option<i64> = None;
    let mut triples: Vec<(u32, u32, u64)> = Vec::new();
    let flush =
        |t: i64, triples: &mut Vec<(u32, u32, u64)>, encoder: &mut TmlEncoder<_>| -> Result<()> {
            let matrix = TrafficMatrix::from_triples(triples.drain(..))?;
            encoder.push(t, &matrix)?;
            Ok(())
        };

    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let n = idx + 1;
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 4 {
            bail!("line {n}: expected t,src,dst,count");
        }
        let t: i64 = fields[0]
            .trim()
            .parse()
            .with_context(|| format!("line {n}: bad timestamp"))?;
        let src = parse_addr(fields[1]).with_context(|| format!("line {n}: bad src"))?;
        let dst = parse_addr(fields[2]).with_context(|| format!("line {n}: bad dst"))?;
        let count: u64 = fields[3]
            .trim()
            .parse()
            .with_context(|| format!("line {n}: bad count"))?;
        if count == 0 {
            bail!("line {n}: zero counts are not representable");
        }
        match current_t {
            Some(cur) if cur == t => {}
            Some(cur) => {
                if t < cur {
                    bail!("line {n}: timestamps must be grouped ascending ({t} after {cur})");
                }
                flush(cur, &mut triples, &mut encoder)?;
                current_t = Some(t);
            }
            None => current_t = Some(t),
        }
        triples.push((src, dst, count));
    }
    if let Some(t) = current_t {
        flush(t, &mut triples, &mut encoder)?;
    }
    encoder.finish()?;
    Ok(())
}

pub fn run_decode(args: DecodeArgs) -> Result<()> {
    let decoder =
        TmlDecoder::new(super::input_reader(&args.input)?).context("reading TML header")?;
    let mut writer = super::output_writer(&args.output)?;
    for item in decoder {
        let (t, matrix) = item?;
        for (coord, count) in matrix.iter() {
            writeln!(
                writer,
                "{t},{},{},{count}",
                format_addr(coord.src),
                format_addr(coord.dst)
            )?;
        }
    }
    writer.flush()?;
    Ok(())
}
