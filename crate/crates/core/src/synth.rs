//! Deterministic synthetic flow corpora with heavy-tailed structure: host
//! popularity follows a power law (so per-host flow counts have a power-law
//! tail) and per-flow packet counts are Pareto-distributed around a
//! configurable mean. The same seed always yields byte-identical output.

use crate::flow::FlowRecord;
use crate::subrange::format_addr;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::io::{self, Write};

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub flows: u64,
    pub seed: u64,
    /// Size of the endpoint pool.
    pub hosts: u32,
    /// Tail exponent of the per-host flow-count CCDF:
    /// P(flows per host >= x) ~ x^-degree_exponent.
    pub degree_exponent: f64,
    /// Target mean forward packets per flow.
    pub mean_pkts: f64,
    /// Pareto tail exponent of per-flow packet counts (> 1).
    pub pkts_exponent: f64,
    /// Reverse-direction packet scale relative to forward; 0 disables
    /// reverse traffic.
    pub rev_ratio: f64,
    /// Earliest flow start, Unix epoch seconds.
    pub t_start: i64,
    /// Flow starts are uniform over [t_start, t_start + span_secs).
    pub span_secs: u32,
    /// Flow durations are uniform over 1..=max_duration_secs.
    pub max_duration_secs: u32,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            flows: 10_000,
            seed: 1,
            hosts: 4096,
            degree_exponent: 2.0,
            mean_pkts: 50.0,
            pkts_exponent: 2.5,
            rev_ratio: 0.3,
            t_start: 1_600_000_000,
            span_secs: 3600,
            max_duration_secs: 8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SynthSummary {
    pub flows: u64,
    pub total_packets: u128,
}

/// Spreads a host index over the full 32-bit address space; an odd
/// multiplier is a bijection mod 2^32, so distinct hosts stay distinct.
pub fn host_address(index: u32) -> u32 {
    index.wrapping_mul(0x9E37_79B1)
}

/// Cumulative popularity table: host at rank r gets weight (r+1)^(-1/alpha),
/// which makes the flow-count CCDF tail exponent approach alpha.
fn cumulative_weights(hosts: u32, degree_exponent: f64) -> Vec<f64> {
    let s = 1.0 / degree_exponent;
    let mut cum = Vec::with_capacity(hosts as usize);
    let mut total = 0.0;
    for r in 0..hosts {
        total += ((r + 1) as f64).powf(-s);
        cum.push(total);
    }
    for c in cum.iter_mut() {
        *c /= total;
    }
    cum
}

fn draw_host(cum: &[f64], rng: &mut ChaCha8Rng) -> u32 {
    let u: f64 = rng.random();
    cum.partition_point(|&c| c < u) as u32
}

/// Pareto draw with scale chosen so the mean is `mean`; capped at 10^4x
/// the scale to keep single flows from dominating a corpus.
fn draw_pareto(mean: f64, exponent: f64, rng: &mut ChaCha8Rng) -> f64 {
    let scale = mean * (exponent - 1.0) / exponent;
    let u: f64 = rng.random();
    let x = scale / (1.0 - u).powf(1.0 / exponent);
    x.min(scale * 1e4)
}

/// Generates the corpus, sorted by start time (then endpoints) so the
/// output streams through a sorted-input ingest.
pub fn generate_records(cfg: &SynthConfig) -> Vec<FlowRecord> {
    assert!(cfg.hosts >= 2, "need at least two hosts");
    assert!(cfg.pkts_exponent > 1.0, "packet-count mean must exist");
    assert!(cfg.max_duration_secs >= 1);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let cum = cumulative_weights(cfg.hosts, cfg.degree_exponent);

    let mut records = Vec::with_capacity(cfg.flows as usize);
    for _ in 0..cfg.flows {
        let src_host = draw_host(&cum, &mut rng);
        let mut dst_host = draw_host(&cum, &mut rng);
        if dst_host == src_host {
            dst_host = (dst_host + 1) % cfg.hosts;
        }
        let start = cfg.t_start + rng.random_range(0..cfg.span_secs.max(1)) as i64;
        let duration = rng.random_range(1..=cfg.max_duration_secs) as i64;
        let fwd_pkts =
            (draw_pareto(cfg.mean_pkts, cfg.pkts_exponent, &mut rng).round() as u64).max(1);
        let rev_pkts = if cfg.rev_ratio > 0.0 {
            draw_pareto(cfg.mean_pkts * cfg.rev_ratio, cfg.pkts_exponent, &mut rng).round() as u64
        } else {
            0
        };
        records.push(FlowRecord {
            start,
            end: start + duration - 1,
            src: host_address(src_host),
            dst: host_address(dst_host),
            fwd_pkts,
            rev_pkts,
        });
    }
    records.sort_unstable_by_key(|r| (r.start, r.src, r.dst, r.end, r.fwd_pkts, r.rev_pkts));
    records
}

/// Writes the corpus as ingestable CSV with a header line.
pub fn write_csv<W: Write>(mut writer: W, cfg: &SynthConfig) -> io::Result<SynthSummary> {
    let records = generate_records(cfg);
    let mut total_packets: u128 = 0;
    writer.write_all(b"start,end,src,dst,fwd_pkts,rev_pkts\n")?;
    for r in &records {
        total_packets += (r.fwd_pkts + r.rev_pkts) as u128;
        writeln!(
            writer,
            "{},{},{},{},{},{}",
            r.start,
            r.end,
            format_addr(r.src),
            format_addr(r.dst),
            r.fwd_pkts,
            r.rev_pkts
        )?;
    }
    Ok(SynthSummary {
        flows: records.len() as u64,
        total_packets,
    })
}
