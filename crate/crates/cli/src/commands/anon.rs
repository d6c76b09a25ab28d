use anyhow::{bail, Context, Result};
use clap::Args;
use flowmat_core::anon::{anonymize_matrix, deanonymize_matrix, AnonKey};
use flowmat_core::tml::{TmlDecoder, TmlEncoder};
use std::path::PathBuf;

/// Environment variable holding the 32-hex-character anonymization key.
pub const KEY_ENV: &str = "FLOWMAT_ANON_KEY";

#[derive(Args)]
pub struct AnonArgs {
    /// TML input (`-` for stdin)
    pub input: PathBuf,
    /// TML output (`-` for stdout)
    #[arg(short, long, default_value = "-")]
    pub output: PathBuf,
    /// File holding the key as 32 hex characters; the FLOWMAT_ANON_KEY
    /// environment variable is used when omitted. Keys are never read from
    /// the command line so they stay out of shell history.
    #[arg(long)]
    pub key_file: Option<PathBuf>,
    /// Undo an anonymization performed with the same key
    #[arg(long)]
    pub invert: bool,
    /// Append a CRC32C to every output entry
    #[arg(long)]
    pub crc: bool,
}

pub fn load_key(key_file: Option<&std::path::Path>) -> Result<AnonKey> {
    let hex = match key_file {
        Some(path) => std::fs::read_to_string(path)
            .with_context(|| format!("reading key file {}", path.display()))?,
        None => match std::env::var(KEY_ENV) {
            Ok(v) => v,
            Err(_) => bail!("no key: set {KEY_ENV} or pass --key-file (32 hex characters)"),
        },
    };
    Ok(AnonKey::from_hex(&hex)?)
}

pub fn run(args: AnonArgs) -> Result<()> {
    let key = load_key(args.key_file.as_deref())?;
    let decoder =
        TmlDecoder::new(super::input_reader(&args.input)?).context("reading TML header")?;
    let writer = super::output_writer(&args.output)?;
    let mut encoder = TmlEncoder::new(writer, args.crc).context("writing TML header")?;
    let mut entries = 0u64;
    for item in decoder {
        let (t, matrix) = item?;
        let mapped = if args.invert {
            deanonymize_matrix(&matrix, &key)
        } else {
            anonymize_matrix(&matrix, &key)
        };
        encoder.push(t, &mapped)?;
        entries += 1;
    }
    encoder.finish()?;
    eprintln!(
        "{} {entries} matrices",
        if args.invert {
            "deanonymized"
        } else {
            "anonymized"
        }
    );
    Ok(())
}
