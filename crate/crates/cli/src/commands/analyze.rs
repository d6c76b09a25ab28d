use anyhow::{Context, Result};
use clap::Args;
use flowmat_core::agg::{write_aggregates, BulkWriter, WindowMeta};
use flowmat_core::analytics::analyze_window;
use flowmat_core::tml::TmlDecoder;
use flowmat_core::window::{HierarchyBuilder, WindowConfig, WindowPacker};
use flowmat_core::Window;
use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;

#[derive(Args)]
pub struct AnalyzeArgs {
    /// TML input (`-` for stdin)
    pub input: PathBuf,
    /// Directory for one .agg file per window
    #[arg(long, conflicts_with = "bulk", required_unless_present = "bulk")]
    pub out_dir: Option<PathBuf>,
    /// Write all windows into one multi-window .agg file instead
    #[arg(long)]
    pub bulk: Option<PathBuf>,
    /// Packets per leaf window
    #[arg(long, default_value_t = 1 << 17)]
    pub leaf_nv: u64,
    /// Hierarchy depth (level k windows hold leaf_nv * 2^k packets)
    #[arg(long, default_value_t = 11)]
    pub levels: u8,
    /// Range config file; built-in non-routable/bogon/other when omitted
    #[arg(long)]
    pub ranges: Option<PathBuf>,
    /// Retain per-node distribution vectors in the output
    #[arg(long)]
    pub keep_distributions: bool,
}

pub fn run(args: AnalyzeArgs) -> Result<()> {
    let cfg = WindowConfig::new(args.leaf_nv, args.levels)?;
    let ranges = super::load_ranges(args.ranges.as_deref())?;

    if let Some(dir) = &args.out_dir {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let mut bulk = match &args.bulk {
        Some(path) => {
            let file =
                File::create(path).with_context(|| format!("creating {}", path.display()))?;
            Some(BulkWriter::new(BufWriter::new(file)))
        }
        None => None,
    };

    let decoder =
        TmlDecoder::new(super::input_reader(&args.input)?).context("reading TML header")?;
    let mut packer = WindowPacker::new(cfg);
    let mut hierarchy = HierarchyBuilder::new(cfg);
    let mut written = 0u64;

    let mut emit =
        |window: &Window, bulk: &mut Option<BulkWriter<BufWriter<File>>>| -> Result<()> {
            let grid = analyze_window(window, &ranges, args.keep_distributions);
            let meta = WindowMeta::for_window(window, cfg.leaf_nv);
            match bulk {
                Some(writer) => writer.append(&grid, &meta)?,
                None => {
                    let dir = args.out_dir.as_ref().expect("out_dir xor bulk");
                    let name = format!("window_L{:02}_S{:08}.agg", window.level, window.seq);
                    let file = File::create(dir.join(&name))
                        .with_context(|| format!("creating {name}"))?;
                    write_aggregates(BufWriter::new(file), &grid, &meta)?;
                }
            }
            written += 1;
            Ok(())
        };

    for item in decoder {
        let (tbin, matrix) = item?;
        for leaf in packer.push(tbin, &matrix)? {
            for window in hierarchy.push_leaf(leaf)? {
                emit(&window, &mut bulk)?;
            }
        }
    }
    if let Some(partial) = packer.finish() {
        for window in hierarchy.push_leaf(partial)? {
            emit(&window, &mut bulk)?;
        }
    }
    if let Some(writer) = bulk {
        writer.finish()?;
    }

    if written == 0 {
        eprintln!("no windows produced (empty input)");
    } else {
        eprintln!("wrote {written} windows");
    }
    Ok(())
}
