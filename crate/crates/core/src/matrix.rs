//! Hypersparse traffic matrices stored as canonically ordered coordinate
//! lists, plus the entrywise kernels the rest of the pipeline builds on.

use crate::subrange::SubrangeSpec;
use thiserror::Error;

/// A source/destination address pair: one cell of the implicit
/// 2^32 x 2^32 traffic matrix.
///
/// The derived ordering is row-major lexicographic on `(src, dst)`. This is
/// the canonical ordering used everywhere: storage, window splitting, and
/// the TML delta stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Coord {
    pub src: u32,
    pub dst: u32,
}

impl Coord {
    pub const fn new(src: u32, dst: u32) -> Self {
        Self { src, dst }
    }

    /// The opposite direction of a flow.
    pub const fn reversed(self) -> Self {
        Self {
            src: self.dst,
            dst: self.src,
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MatrixError {
    /// A 64-bit packet counter overflowed while accumulating. Real windows
    /// top out around 2^27 packets, so this signals corrupt input.
    #[error("packet count overflow at coordinate ({src}, {dst})")]
    CountOverflow { src: u32, dst: u32 },
}

/// Packet counts between source/destination pairs over one time span.
///
/// Entries are strictly ascending in canonical [`Coord`] order and every
/// stored count is at least 1; removing an entry is the only representation
/// of zero.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TrafficMatrix {
    entries: Vec<(Coord, u64)>,
}

impl TrafficMatrix {
    pub fn empty() -> Self {
        Self::default()
    }

    /// Builds a matrix from unordered triples, summing duplicates.
    pub fn from_triples<I>(triples: I) -> Result<Self, MatrixError>
    where
        I: IntoIterator<Item = (u32, u32, u64)>,
    {
        let mut entries: Vec<(Coord, u64)> = triples
            .into_iter()
            .filter(|&(_, _, count)| count > 0)
            .map(|(src, dst, count)| (Coord::new(src, dst), count))
            .collect();
        entries.sort_unstable_by_key(|&(coord, _)| coord);

        let mut merged: Vec<(Coord, u64)> = Vec::with_capacity(entries.len());
        for (coord, count) in entries {
            match merged.last_mut() {
                Some((prev, acc)) if *prev == coord => {
                    *acc = acc.checked_add(count).ok_or(MatrixError::CountOverflow {
                        src: coord.src,
                        dst: coord.dst,
                    })?;
                }
                _ => merged.push((coord, count)),
            }
        }
        Ok(Self { entries: merged })
    }

    /// Wraps entries already in canonical order with positive counts.
    /// Callers (codec paths) are responsible for having validated both.
    pub(crate) fn from_sorted_entries_unchecked(entries: Vec<(Coord, u64)>) -> Self {
        debug_assert!(entries.windows(2).all(|w| w[0].0 < w[1].0));
        debug_assert!(entries.iter().all(|&(_, c)| c >= 1));
        Self { entries }
    }

    pub fn entries(&self) -> &[(Coord, u64)] {
        &self.entries
    }

    pub fn iter(&self) -> impl Iterator<Item = (Coord, u64)> + '_ {
        self.entries.iter().copied()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Number of stored (nonzero) coordinates.
    pub fn nnz(&self) -> u64 {
        self.entries.len() as u64
    }

    /// Total packet count: the sum of all entries.
    pub fn valid_packets(&self) -> u64 {
        let total: u128 = self.entries.iter().map(|&(_, c)| c as u128).sum();
        u64::try_from(total).expect("total packet count exceeds u64")
    }

    pub fn get(&self, coord: Coord) -> Option<u64> {
        self.entries
            .binary_search_by_key(&coord, |&(c, _)| c)
            .ok()
            .map(|i| self.entries[i].1)
    }

    /// Entrywise sum by linear merge of the two canonical streams.
    pub fn add(&self, other: &Self) -> Result<Self, MatrixError> {
        let (a, b) = (&self.entries, &other.entries);
        let mut out = Vec::with_capacity(a.len().max(b.len()));
        let (mut i, mut j) = (0, 0);
        while i < a.len() && j < b.len() {
            let (ca, na) = a[i];
            let (cb, nb) = b[j];
            match ca.cmp(&cb) {
                std::cmp::Ordering::Less => {
                    out.push((ca, na));
                    i += 1;
                }
                std::cmp::Ordering::Greater => {
                    out.push((cb, nb));
                    j += 1;
                }
                std::cmp::Ordering::Equal => {
                    let sum = na.checked_add(nb).ok_or(MatrixError::CountOverflow {
                        src: ca.src,
                        dst: ca.dst,
                    })?;
                    out.push((ca, sum));
                    i += 1;
                    j += 1;
                }
            }
        }
        out.extend_from_slice(&a[i..]);
        out.extend_from_slice(&b[j..]);
        Ok(Self { entries: out })
    }

    /// Sets every nonzero count to 1, keeping the coordinate set.
    pub fn zero_norm(&self) -> Self {
        Self {
            entries: self.entries.iter().map(|&(c, _)| (c, 1)).collect(),
        }
    }

    /// Keeps exactly the entries with `src` in `rows` and `dst` in `cols`,
    /// in the original order.
    pub fn select(&self, rows: &SubrangeSpec, cols: &SubrangeSpec) -> Self {
        Self {
            entries: self
                .entries
                .iter()
                .filter(|(c, _)| rows.contains(c.src) && cols.contains(c.dst))
                .copied()
                .collect(),
        }
    }

    /// Removes the entries with both endpoints inside `range`; everything
    /// else is kept intact.
    pub fn exclude(&self, range: &SubrangeSpec) -> Self {
        Self {
            entries: self
                .entries
                .iter()
                .filter(|(c, _)| !(range.contains(c.src) && range.contains(c.dst)))
                .copied()
                .collect(),
        }
    }

    /// Canonical-order/positivity check, used by tests and debug assertions.
    pub fn invariants_hold(&self) -> bool {
        self.entries.windows(2).all(|w| w[0].0 < w[1].0)
            && self.entries.iter().all(|&(_, c)| c >= 1)
    }
}
