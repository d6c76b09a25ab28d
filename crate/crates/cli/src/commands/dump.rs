use anyhow::{Context, Result};
use clap::Args;
use flowmat_core::agg::{read_any, WindowMeta};
use flowmat_core::analytics::{NetworkQuantities, SubrangeGrid};
use serde_json::json;
use std::fs::File;
use std::io::{BufReader, Write};
use std::path::PathBuf;

#[derive(Args)]
pub struct DumpArgs {
    /// Aggregate file, single-window or multi-window
    pub input: PathBuf,
    /// Text output (`-` for stdout)
    #[arg(short, long, default_value = "-")]
    pub output: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

#[derive(Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    /// One row per grid cell, scalars only
    Csv,
    /// One JSON object per window, distributions included when present
    Jsonl,
}

const CSV_HEADER: &str = "level,seq,t_start,t_end,leaf_nv,complete,cell,valid_packets,\
unique_links,max_link_packets,unique_sources,max_source_packets,max_source_fanout,\
unique_destinations,max_destination_packets,max_destination_fanin";

pub fn run(args: DumpArgs) -> Result<()> {
    let file =
        File::open(&args.input).with_context(|| format!("opening {}", args.input.display()))?;
    let windows = read_any(BufReader::new(file))
        .with_context(|| format!("reading {}", args.input.display()))?;
    let mut out = super::output_writer(&args.output)?;

    match args.format {
        Format::Csv => {
            writeln!(out, "{CSV_HEADER}")?;
            for (grid, meta) in &windows {
                write_csv_row(&mut out, meta, "full", &grid.full)?;
                for (i, row) in grid.cells.iter().enumerate() {
                    for (j, cell) in row.iter().enumerate() {
                        write_csv_row(&mut out, meta, &format!("{i}_{j}"), cell)?;
                    }
                }
            }
        }
        Format::Jsonl => {
            for (grid, meta) in &windows {
                writeln!(out, "{}", window_json(grid, meta))?;
            }
        }
    }
    out.flush()?;
    Ok(())
}

fn write_csv_row(
    out: &mut impl Write,
    meta: &WindowMeta,
    cell: &str,
    q: &NetworkQuantities,
) -> Result<()> {
    writeln!(
        out,
        "{},{},{},{},{},{},{cell},{},{},{},{},{},{},{},{},{}",
        meta.level,
        meta.seq,
        meta.t_start,
        meta.t_end,
        meta.leaf_nv,
        meta.complete,
        q.valid_packets,
        q.unique_links,
        q.max_link_packets,
        q.unique_sources,
        q.max_source_packets,
        q.max_source_fanout,
        q.unique_destinations,
        q.max_destination_packets,
        q.max_destination_fanin,
    )?;
    Ok(())
}

fn quantities_json(q: &NetworkQuantities) -> serde_json::Value {
    let mut v = json!({
        "valid_packets": q.valid_packets,
        "unique_links": q.unique_links,
        "max_link_packets": q.max_link_packets,
        "unique_sources": q.unique_sources,
        "max_source_packets": q.max_source_packets,
        "max_source_fanout": q.max_source_fanout,
        "unique_destinations": q.unique_destinations,
        "max_destination_packets": q.max_destination_packets,
        "max_destination_fanin": q.max_destination_fanin,
    });
    if let Some(d) = &q.distributions {
        v["distributions"] = json!({
            "source_packets": d.source_packets,
            "source_fanout": d.source_fanout,
            "destination_packets": d.destination_packets,
            "destination_fanin": d.destination_fanin,
        });
    }
    v
}

fn window_json(grid: &SubrangeGrid, meta: &WindowMeta) -> serde_json::Value {
    json!({
        "level": meta.level,
        "seq": meta.seq,
        "t_start": meta.t_start,
        "t_end": meta.t_end,
        "leaf_nv": meta.leaf_nv,
        "complete": meta.complete,
        "ranges": grid.ranges.iter().map(|r| json!({
            "name": r.name(),
            "intervals": r.intervals(),
        })).collect::<Vec<_>>(),
        "full": quantities_json(&grid.full),
        "cells": grid.cells.iter().map(|row| {
            row.iter().map(quantities_json).collect::<Vec<_>>()
        }).collect::<Vec<_>>(),
    })
}
