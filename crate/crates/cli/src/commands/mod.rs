pub mod analyze;
pub mod anon;
pub mod bench;
pub mod codec;
pub mod dump;
pub mod generate;
pub mod ingest;
pub mod stats;

use anyhow::{Context, Result};
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::Path;

/// Opens a path for buffered reading; `-` means stdin.
pub fn input_reader(path: &Path) -> Result<Box<dyn BufRead>> {
    if path.as_os_str() == "-" {
        Ok(Box::new(BufReader::new(io::stdin())))
    } else {
        let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
        Ok(Box::new(BufReader::new(file)))
    }
}

/// Opens a path for buffered writing; `-` means stdout.
pub fn output_writer(path: &Path) -> Result<Box<dyn Write>> {
    if path.as_os_str() == "-" {
        Ok(Box::new(BufWriter::new(io::stdout())))
    } else {
        let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
        Ok(Box::new(BufWriter::new(file)))
    }
}

/// Decodes a whole TML input into its per-second matrix sequence.
pub fn decode_tml(path: &Path) -> Result<Vec<(i64, flowmat_core::TrafficMatrix)>> {
    let reader = input_reader(path)?;
    let decoder = flowmat_core::tml::TmlDecoder::new(reader)
        .with_context(|| format!("reading TML header from {}", path.display()))?;
    let seconds = decoder
        .collect::<std::result::Result<Vec<_>, _>>()
        .with_context(|| format!("decoding {}", path.display()))?;
    Ok(seconds)
}

/// Loads the analysis ranges: a config file when given, defaults otherwise.
pub fn load_ranges(path: Option<&Path>) -> Result<[flowmat_core::SubrangeSpec; 3]> {
    let cfg = match path {
        Some(p) => flowmat_core::analytics::RangeConfig::from_path(p)
            .with_context(|| format!("loading range config {}", p.display()))?,
        None => flowmat_core::analytics::RangeConfig::default_ranges(),
    };
    if flowmat_core::analytics::ranges_overlap(&cfg.ranges) {
        eprintln!("warning: analysis ranges overlap; grid cells will double-count");
    }
    Ok(cfg.ranges)
}
