//! Network quantities computed from a traffic matrix: the scalar aggregates
//! (valid packets, unique links/sources/destinations, and the per-link,
//! per-source, per-destination maxima) plus the optional sparse distribution
//! vectors behind them, over the whole matrix and a 3x3 grid of address
//! subranges.

use crate::matrix::TrafficMatrix;
use crate::subrange::{SubrangeError, SubrangeSpec};
use crate::window::Window;
use thiserror::Error;

/// The scalar aggregates of one matrix. All are exact integer results;
/// every one is invariant under permutations of the address space.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct NetworkQuantities {
    /// Total packets: sum over all entries.
    pub valid_packets: u64,
    /// Distinct source/destination pairs with traffic.
    pub unique_links: u64,
    /// Largest single-link packet count.
    pub max_link_packets: u64,
    /// Distinct sources with any traffic.
    pub unique_sources: u64,
    /// Largest per-source packet total (row sum).
    pub max_source_packets: u64,
    /// Largest per-source count of distinct destinations.
    pub max_source_fanout: u64,
    /// Distinct destinations with any traffic.
    pub unique_destinations: u64,
    /// Largest per-destination packet total (column sum).
    pub max_destination_packets: u64,
    /// Largest per-destination count of distinct sources.
    pub max_destination_fanin: u64,
    /// Per-node vectors, retained on request only.
    pub distributions: Option<Distributions>,
}

/// Sparse per-node vectors, `(address, value)` ascending by address.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Distributions {
    /// Packets sent by each source (row sums).
    pub source_packets: Vec<(u32, u64)>,
    /// Distinct destinations of each source.
    pub source_fanout: Vec<(u32, u64)>,
    /// Packets received by each destination (column sums).
    pub destination_packets: Vec<(u32, u64)>,
    /// Distinct sources of each destination.
    pub destination_fanin: Vec<(u32, u64)>,
}

/// Computes every scalar aggregate in one row-order pass plus one
/// column-order pass. Distributions are filled in when requested.
pub fn compute_quantities(matrix: &TrafficMatrix, keep_distributions: bool) -> NetworkQuantities {
    let mut q = NetworkQuantities::default();
    let mut dist = keep_distributions.then(Distributions::default);

    let mut packets: u128 = 0;
    for &(_, count) in matrix.entries() {
        packets += count as u128;
        q.max_link_packets = q.max_link_packets.max(count);
    }
    q.valid_packets = u64::try_from(packets).expect("total packet count exceeds u64");
    q.unique_links = matrix.nnz();

    // row pass: entries are already grouped by source
    let mut row = matrix.entries().iter().peekable();
    while let Some(&&(first, _)) = row.peek() {
        let src = first.src;
        let mut row_packets = 0u64;
        let mut row_fanout = 0u64;
        while let Some(&&(coord, count)) = row.peek() {
            if coord.src != src {
                break;
            }
            row_packets += count;
            row_fanout += 1;
            row.next();
        }
        q.unique_sources += 1;
        q.max_source_packets = q.max_source_packets.max(row_packets);
        q.max_source_fanout = q.max_source_fanout.max(row_fanout);
        if let Some(d) = dist.as_mut() {
            d.source_packets.push((src, row_packets));
            d.source_fanout.push((src, row_fanout));
        }
    }

    // column pass over a destination-sorted copy
    let mut by_dst: Vec<(u32, u64)> = matrix.iter().map(|(c, n)| (c.dst, n)).collect();
    by_dst.sort_unstable_by_key(|&(dst, _)| dst);
    let mut col = by_dst.iter().peekable();
    while let Some(&&(first, _)) = col.peek() {
        let dst = first;
        let mut col_packets = 0u64;
        let mut col_fanin = 0u64;
        while let Some(&&(d, count)) = col.peek() {
            if d != dst {
                break;
            }
            col_packets += count;
            col_fanin += 1;
            col.next();
        }
        q.unique_destinations += 1;
        q.max_destination_packets = q.max_destination_packets.max(col_packets);
        q.max_destination_fanin = q.max_destination_fanin.max(col_fanin);
        if let Some(d) = dist.as_mut() {
            d.destination_packets.push((dst, col_packets));
            d.destination_fanin.push((dst, col_fanin));
        }
    }

    q.distributions = dist;
    q
}

/// Quantities for the whole matrix and for each cell of the 3x3 grid of
/// source subrange x destination subrange.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubrangeGrid {
    pub ranges: [SubrangeSpec; 3],
    pub full: NetworkQuantities,
    /// `cells[i][j]` covers sources in `ranges[i]`, destinations in
    /// `ranges[j]`.
    pub cells: [[NetworkQuantities; 3]; 3],
}

/// Computes the full-matrix quantities plus all 9 subrange cells.
pub fn analyze_window(
    window: &Window,
    ranges: &[SubrangeSpec; 3],
    keep_distributions: bool,
) -> SubrangeGrid {
    let full = compute_quantities(&window.matrix, keep_distributions);
    let cells = std::array::from_fn(|i| {
        std::array::from_fn(|j| {
            let cell = window.matrix.select(&ranges[i], &ranges[j]);
            compute_quantities(&cell, keep_distributions)
        })
    });
    SubrangeGrid {
        ranges: ranges.clone(),
        full,
        cells,
    }
}

/// True when any two of the three ranges share an address. Overlap is
/// allowed, but grid cells then double-count.
pub fn ranges_overlap(ranges: &[SubrangeSpec; 3]) -> bool {
    ranges[0].overlaps(&ranges[1])
        || ranges[0].overlaps(&ranges[2])
        || ranges[1].overlaps(&ranges[2])
}

/// True when the three ranges tile the whole address space with no overlap.
pub fn ranges_partition_space(ranges: &[SubrangeSpec; 3]) -> bool {
    !ranges_overlap(ranges)
        && ranges.iter().map(SubrangeSpec::address_count).sum::<u64>() == 1 << 32
}

#[derive(Debug, Error)]
pub enum RangeConfigError {
    #[error("line {line}: {source}")]
    BadCidr { line: usize, source: SubrangeError },
    #[error("line {line}: unknown section {name:?} (expected non-routable, bogon, other)")]
    UnknownSection { line: usize, name: String },
    #[error("line {line}: CIDR outside any section")]
    OutsideSection { line: usize },
    #[error("section {0:?} appears twice")]
    DuplicateSection(&'static str),
    #[error("missing section {0:?}")]
    MissingSection(&'static str),
    #[error("only one section may be declared as `complement`")]
    MultipleComplements,
    #[error("a `complement` section cannot also list CIDRs")]
    MixedComplement,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

const SECTION_NAMES: [&str; 3] = ["non-routable", "bogon", "other"];

/// The three analysis subranges: non-routable, bogon, and all other
/// traffic, in that order.
///
/// Config grammar, one directive per line:
///
/// ```text
/// # comment
/// [non-routable]
/// 10.0.0.0/8
/// [bogon]
/// 240.0.0.0/4
/// [other]
/// complement
/// ```
///
/// Section headers may appear in any order; each section lists CIDRs (or a
/// bare address, taken as /32), and at most one section may instead hold
/// the single keyword `complement`, meaning everything the other two
/// sections do not cover.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RangeConfig {
    pub ranges: [SubrangeSpec; 3],
}

impl RangeConfig {
    /// Conventional defaults: non-routable is the private and reserved
    /// blocks (10/8, 172.16/12, 192.168/16, 127/8, 169.254/16, 0/8),
    /// bogon is 240/4, other is the complement.
    pub fn default_ranges() -> Self {
        let non_routable = SubrangeSpec::from_cidrs(
            "non-routable",
            [
                "0.0.0.0/8",
                "10.0.0.0/8",
                "127.0.0.0/8",
                "169.254.0.0/16",
                "172.16.0.0/12",
                "192.168.0.0/16",
            ],
        )
        .expect("default CIDRs are valid");
        let bogon = SubrangeSpec::from_cidrs("bogon", ["240.0.0.0/4"]).expect("valid");
        let other = non_routable.union(&bogon, "").complement("other");
        Self {
            ranges: [non_routable, bogon, other],
        }
    }

    pub fn parse(text: &str) -> Result<Self, RangeConfigError> {
        // per section: collected intervals, plus the `complement` marker
        type Section = (Vec<(u32, u32)>, bool);
        let mut sections: [Option<Section>; 3] = [None, None, None];
        let mut current: Option<usize> = None;

        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let trimmed = raw.split('#').next().unwrap_or("").trim();
            if trimmed.is_empty() {
                continue;
            }
            if let Some(name) = trimmed.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
                let name = name.trim();
                let slot = SECTION_NAMES
                    .iter()
                    .position(|&s| s == name)
                    .ok_or_else(|| RangeConfigError::UnknownSection {
                        line,
                        name: name.to_string(),
                    })?;
                if sections[slot].is_some() {
                    return Err(RangeConfigError::DuplicateSection(SECTION_NAMES[slot]));
                }
                sections[slot] = Some((Vec::new(), false));
                current = Some(slot);
                continue;
            }
            let slot = current.ok_or(RangeConfigError::OutsideSection { line })?;
            let (intervals, is_complement) = sections[slot].as_mut().expect("section started");
            if trimmed == "complement" {
                if !intervals.is_empty() {
                    return Err(RangeConfigError::MixedComplement);
                }
                *is_complement = true;
            } else {
                if *is_complement {
                    return Err(RangeConfigError::MixedComplement);
                }
                let iv = crate::subrange::parse_cidr(trimmed)
                    .map_err(|source| RangeConfigError::BadCidr { line, source })?;
                intervals.push(iv);
            }
        }

        let mut specs: [Option<SubrangeSpec>; 3] = [None, None, None];
        let mut complement_slot: Option<usize> = None;
        for (slot, section) in sections.iter().enumerate() {
            let (intervals, is_complement) = section
                .as_ref()
                .ok_or(RangeConfigError::MissingSection(SECTION_NAMES[slot]))?;
            if *is_complement {
                if complement_slot.is_some() {
                    return Err(RangeConfigError::MultipleComplements);
                }
                complement_slot = Some(slot);
            } else {
                specs[slot] = Some(
                    SubrangeSpec::new(SECTION_NAMES[slot], intervals.iter().copied())
                        .expect("parse_cidr yields ordered intervals"),
                );
            }
        }
        if let Some(slot) = complement_slot {
            let others: Vec<&SubrangeSpec> = specs.iter().flatten().collect();
            let union = others[0].union(others[1], "");
            specs[slot] = Some(union.complement(SECTION_NAMES[slot]));
        }
        let [a, b, c] = specs.map(|s| s.expect("every section is filled or errors above"));
        Ok(Self { ranges: [a, b, c] })
    }

    pub fn from_path(path: &std::path::Path) -> Result<Self, RangeConfigError> {
        Self::parse(&std::fs::read_to_string(path)?)
    }
}
