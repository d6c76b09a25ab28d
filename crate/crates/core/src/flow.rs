//! Netflow record parsing and time normalization: each record's packets are
//! spread at an even rate over its 1-second bins, then all contributions to
//! a second are aggregated into that second's traffic matrix.

use crate::matrix::{Coord, MatrixError, TrafficMatrix};
use crate::subrange::parse_addr;
use std::collections::BTreeMap;
use std::io::BufRead;
use thiserror::Error;

/// Default cap on simultaneously open seconds in [`MatrixAccumulator`].
pub const DEFAULT_OPEN_SECONDS: usize = 1 << 21;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum FlowParseError {
    #[error("expected 6 comma-separated fields, found {0}")]
    FieldCount(usize),
    #[error("malformed {field} field {value:?}")]
    BadField { field: &'static str, value: String },
    #[error("record ends ({end}) before it starts ({start})")]
    EndBeforeStart { start: i64, end: i64 },
    #[error("record carries zero packets in both directions")]
    ZeroPackets,
}

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("line {line}: {source}")]
    Parse { line: u64, source: FlowParseError },
    #[error(
        "{open} seconds open at once exceeds the budget of {budget}; \
         feed time-sorted input or raise the budget"
    )]
    TooManyOpenSeconds { open: usize, budget: usize },
    #[error(transparent)]
    Overflow(#[from] MatrixError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One netflow entry: a time interval, the two endpoints, and the packet
/// counts observed in each direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FlowRecord {
    pub start: i64,
    pub end: i64,
    pub src: u32,
    pub dst: u32,
    pub fwd_pkts: u64,
    pub rev_pkts: u64,
}

impl FlowRecord {
    /// Number of 1-second bins the record spans (inclusive interval).
    pub fn tbins(&self) -> u64 {
        (self.end - self.start) as u64 + 1
    }
}

/// Parses one CSV line: `start,end,src,dst,fwd_pkts,rev_pkts` with
/// addresses in dotted-quad or decimal form.
pub fn parse_flow_csv(line: &str) -> Result<FlowRecord, FlowParseError> {
    let fields: Vec<&str> = line.trim_end_matches(['\r', '\n']).split(',').collect();
    if fields.len() != 6 {
        return Err(FlowParseError::FieldCount(fields.len()));
    }
    let int = |field: &'static str, v: &str| -> Result<i64, FlowParseError> {
        v.trim().parse().map_err(|_| FlowParseError::BadField {
            field,
            value: v.to_string(),
        })
    };
    let uint = |field: &'static str, v: &str| -> Result<u64, FlowParseError> {
        v.trim().parse().map_err(|_| FlowParseError::BadField {
            field,
            value: v.to_string(),
        })
    };
    let addr = |field: &'static str, v: &str| -> Result<u32, FlowParseError> {
        parse_addr(v).map_err(|_| FlowParseError::BadField {
            field,
            value: v.to_string(),
        })
    };

    let rec = FlowRecord {
        start: int("start", fields[0])?,
        end: int("end", fields[1])?,
        src: addr("src", fields[2])?,
        dst: addr("dst", fields[3])?,
        fwd_pkts: uint("fwd_pkts", fields[4])?,
        rev_pkts: uint("rev_pkts", fields[5])?,
    };
    if rec.end < rec.start {
        return Err(FlowParseError::EndBeforeStart {
            start: rec.start,
            end: rec.end,
        });
    }
    if rec.fwd_pkts == 0 && rec.rev_pkts == 0 {
        return Err(FlowParseError::ZeroPackets);
    }
    Ok(rec)
}

/// All packet allocations landing in one second.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinnedFlow {
    pub tbin: i64,
    pub allocations: Vec<(Coord, u64)>,
}

/// Spreads `pkts` packets over `tbins` bins at an even rate.
///
/// Returns `(bin offset, count)` pairs, ascending, counts >= 1; bins that
/// receive nothing are omitted. When `pkts >= tbins` every bin gets
/// floor(pkts/tbins) and the remainder goes to the first bin (remainder 1),
/// the first and last bins (remainder 2), or the first, last, and evenly
/// strided interior bins (remainder > 2). When `pkts < tbins` the packets
/// land one each on evenly spaced bins.
pub fn spread_packets(pkts: u64, tbins: u64) -> Vec<(u64, u64)> {
    assert!(tbins >= 1, "a record spans at least one bin");
    if pkts == 0 {
        return Vec::new();
    }
    if tbins == 1 {
        return vec![(0, pkts)];
    }
    if pkts < tbins {
        // one packet each at offsets floor(k*tbins/pkts); strictly ascending
        // because tbins/pkts > 1
        return (0..pkts)
            .map(|k| ((k as u128 * tbins as u128 / pkts as u128) as u64, 1))
            .collect();
    }

    let base = pkts / tbins;
    let extra = pkts - base * tbins;
    let mut out: Vec<(u64, u64)> = (0..tbins).map(|b| (b, base)).collect();
    if extra >= 1 {
        out[0].1 += 1;
    }
    if extra >= 2 {
        out[tbins as usize - 1].1 += 1;
    }
    if extra > 2 {
        // the remaining extra-2 increments stride evenly across the interior;
        // positions are distinct because extra < tbins
        for k in 1..=(extra - 2) {
            let num = k as u128 * (tbins - 1) as u128;
            let den = (extra - 1) as u128;
            let pos = num.div_ceil(den) as usize;
            out[pos].1 += 1;
        }
    }
    out
}

/// Expands one record into its per-second allocations. Each direction is
/// spread independently; the reverse direction swaps the endpoints.
pub fn normalize_flow(rec: &FlowRecord) -> Vec<BinnedFlow> {
    let tbins = rec.tbins();
    let fwd = spread_packets(rec.fwd_pkts, tbins);
    let rev = spread_packets(rec.rev_pkts, tbins);
    let fwd_coord = Coord::new(rec.src, rec.dst);
    let rev_coord = fwd_coord.reversed();

    let mut out: Vec<BinnedFlow> = Vec::with_capacity(fwd.len().max(rev.len()));
    let (mut i, mut j) = (0, 0);
    while i < fwd.len() || j < rev.len() {
        let next_f = fwd.get(i).map(|&(o, _)| o);
        let next_r = rev.get(j).map(|&(o, _)| o);
        let offset = match (next_f, next_r) {
            (Some(f), Some(r)) => f.min(r),
            (Some(f), None) => f,
            (None, Some(r)) => r,
            (None, None) => unreachable!(),
        };
        let mut allocations = Vec::with_capacity(2);
        if next_f == Some(offset) {
            allocations.push((fwd_coord, fwd[i].1));
            i += 1;
        }
        if next_r == Some(offset) {
            allocations.push((rev_coord, rev[j].1));
            j += 1;
        }
        out.push(BinnedFlow {
            tbin: rec.start + offset as i64,
            allocations,
        });
    }
    out
}

/// Accumulates binned allocations into per-second matrices.
///
/// Seconds stay open until drained; the budget bounds how many can be open
/// at once so unsorted input cannot grow without limit.
#[derive(Debug)]
pub struct MatrixAccumulator {
    open: BTreeMap<i64, BTreeMap<Coord, u64>>,
    budget: usize,
}

impl MatrixAccumulator {
    pub fn new(budget: usize) -> Self {
        Self {
            open: BTreeMap::new(),
            budget,
        }
    }

    pub fn open_seconds(&self) -> usize {
        self.open.len()
    }

    pub fn push(&mut self, bf: &BinnedFlow) -> Result<(), IngestError> {
        let second = self.open.entry(bf.tbin).or_default();
        for &(coord, count) in &bf.allocations {
            let slot = second.entry(coord).or_insert(0);
            *slot = slot.checked_add(count).ok_or(MatrixError::CountOverflow {
                src: coord.src,
                dst: coord.dst,
            })?;
        }
        if self.open.len() > self.budget {
            return Err(IngestError::TooManyOpenSeconds {
                open: self.open.len(),
                budget: self.budget,
            });
        }
        Ok(())
    }

    pub fn push_record(&mut self, rec: &FlowRecord) -> Result<(), IngestError> {
        for bf in normalize_flow(rec) {
            self.push(&bf)?;
        }
        Ok(())
    }

    /// Closes and returns every second strictly before `t`, ascending.
    /// Only valid when no future input can land before `t` (start-sorted
    /// records with `t` = the next record's start).
    pub fn drain_before(&mut self, t: i64) -> Vec<(i64, TrafficMatrix)> {
        let still_open = self.open.split_off(&t);
        let drained = std::mem::replace(&mut self.open, still_open);
        drained.into_iter().map(finish_second).collect()
    }

    /// Closes everything, ascending by second.
    pub fn finish(self) -> Vec<(i64, TrafficMatrix)> {
        self.open.into_iter().map(finish_second).collect()
    }
}

fn finish_second((tbin, counts): (i64, BTreeMap<Coord, u64>)) -> (i64, TrafficMatrix) {
    let entries: Vec<(Coord, u64)> = counts.into_iter().filter(|&(_, c)| c > 0).collect();
    (tbin, TrafficMatrix::from_sorted_entries_unchecked(entries))
}

/// One-shot accumulation of a whole bin stream, any record order.
pub fn bins_to_matrices<I>(bins: I, budget: usize) -> Result<Vec<(i64, TrafficMatrix)>, IngestError>
where
    I: IntoIterator<Item = BinnedFlow>,
{
    let mut acc = MatrixAccumulator::new(budget);
    for bf in bins {
        acc.push(&bf)?;
    }
    Ok(acc.finish())
}

/// What to do with lines that fail to parse.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorPolicy {
    /// Stop at the first bad line.
    Abort,
    /// Skip bad lines, counting them.
    Skip,
}

/// Line-oriented CSV reader with optional-header detection and a
/// malformed-line policy. Yields records with their line numbers.
pub struct FlowCsvReader<R: BufRead> {
    lines: std::io::Lines<R>,
    policy: ErrorPolicy,
    line_no: u64,
    skipped: u64,
    header_checked: bool,
}

impl<R: BufRead> FlowCsvReader<R> {
    pub fn new(reader: R, policy: ErrorPolicy) -> Self {
        Self {
            lines: reader.lines(),
            policy,
            line_no: 0,
            skipped: 0,
            header_checked: false,
        }
    }

    /// Lines skipped so far under [`ErrorPolicy::Skip`].
    pub fn skipped(&self) -> u64 {
        self.skipped
    }
}

impl<R: BufRead> Iterator for FlowCsvReader<R> {
    type Item = Result<(u64, FlowRecord), IngestError>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            let line = match self.lines.next()? {
                Ok(l) => l,
                Err(e) => return Some(Err(e.into())),
            };
            self.line_no += 1;
            if line.trim().is_empty() {
                continue;
            }
            // a non-numeric first field on line 1 is a header
            if !self.header_checked {
                self.header_checked = true;
                let first = line.split(',').next().unwrap_or("");
                if first.trim().parse::<i64>().is_err() {
                    continue;
                }
            }
            match parse_flow_csv(&line) {
                Ok(rec) => return Some(Ok((self.line_no, rec))),
                Err(source) => match self.policy {
                    ErrorPolicy::Abort => {
                        return Some(Err(IngestError::Parse {
                            line: self.line_no,
                            source,
                        }))
                    }
                    ErrorPolicy::Skip => {
                        self.skipped += 1;
                        continue;
                    }
                },
            }
        }
    }
}
