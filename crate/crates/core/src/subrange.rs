//! Address subranges as sorted disjoint interval sets, with CIDR and
//! dotted-quad parsing. A `SubrangeSpec` plays the role of a diagonal
//! selector over the 32-bit address space.

use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SubrangeError {
    #[error("interval lower bound {lo} exceeds upper bound {hi}")]
    InvertedInterval { lo: u32, hi: u32 },
    #[error("malformed address {0:?}")]
    BadAddress(String),
    #[error("malformed CIDR {0:?}")]
    BadCidr(String),
}

/// Parses an IPv4 address in dotted-quad (`10.0.0.1`) or plain decimal
/// (`167772161`) form.
pub fn parse_addr(s: &str) -> Result<u32, SubrangeError> {
    let s = s.trim();
    if s.contains('.') {
        let mut octets = [0u8; 4];
        let mut parts = s.split('.');
        for slot in &mut octets {
            let part = parts
                .next()
                .ok_or_else(|| SubrangeError::BadAddress(s.to_string()))?;
            *slot = part
                .parse()
                .map_err(|_| SubrangeError::BadAddress(s.to_string()))?;
        }
        if parts.next().is_some() {
            return Err(SubrangeError::BadAddress(s.to_string()));
        }
        Ok(u32::from_be_bytes(octets))
    } else {
        s.parse()
            .map_err(|_| SubrangeError::BadAddress(s.to_string()))
    }
}

/// Renders an address back to dotted-quad form.
pub fn format_addr(addr: u32) -> String {
    let [a, b, c, d] = addr.to_be_bytes();
    format!("{a}.{b}.{c}.{d}")
}

/// Parses `a.b.c.d/prefix` (or a bare address, treated as /32) into the
/// inclusive address interval it covers.
pub fn parse_cidr(s: &str) -> Result<(u32, u32), SubrangeError> {
    let s = s.trim();
    let (addr_part, prefix) = match s.split_once('/') {
        Some((a, p)) => {
            let prefix: u32 = p
                .parse()
                .map_err(|_| SubrangeError::BadCidr(s.to_string()))?;
            if prefix > 32 {
                return Err(SubrangeError::BadCidr(s.to_string()));
            }
            (a, prefix)
        }
        None => (s, 32),
    };
    let base = parse_addr(addr_part).map_err(|_| SubrangeError::BadCidr(s.to_string()))?;
    let host_mask = u32::MAX.checked_shr(prefix).unwrap_or(0);
    let lo = base & !host_mask;
    Ok((lo, lo | host_mask))
}

/// Named set of disjoint, ascending, inclusive address intervals.
///
/// The constructor normalizes arbitrary input: intervals are sorted and
/// overlapping or adjacent ones coalesced, so equal address sets always
/// have equal representations.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubrangeSpec {
    name: String,
    intervals: Vec<(u32, u32)>,
}

impl SubrangeSpec {
    pub fn new<I>(name: impl Into<String>, intervals: I) -> Result<Self, SubrangeError>
    where
        I: IntoIterator<Item = (u32, u32)>,
    {
        let mut ivs: Vec<(u32, u32)> = Vec::new();
        for (lo, hi) in intervals {
            if lo > hi {
                return Err(SubrangeError::InvertedInterval { lo, hi });
            }
            ivs.push((lo, hi));
        }
        ivs.sort_unstable();
        let mut merged: Vec<(u32, u32)> = Vec::with_capacity(ivs.len());
        for (lo, hi) in ivs {
            match merged.last_mut() {
                // coalesce overlap and adjacency ([0,5] + [6,9] -> [0,9])
                Some((_, phi)) if lo <= phi.saturating_add(1) => *phi = (*phi).max(hi),
                _ => merged.push((lo, hi)),
            }
        }
        Ok(Self {
            name: name.into(),
            intervals: merged,
        })
    }

    pub fn empty(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            intervals: Vec::new(),
        }
    }

    /// The whole 32-bit address space.
    pub fn full(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            intervals: vec![(0, u32::MAX)],
        }
    }

    pub fn from_cidrs<'a, I>(name: impl Into<String>, cidrs: I) -> Result<Self, SubrangeError>
    where
        I: IntoIterator<Item = &'a str>,
    {
        let ivs = cidrs
            .into_iter()
            .map(parse_cidr)
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(name, ivs)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn intervals(&self) -> &[(u32, u32)] {
        &self.intervals
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.intervals == [(0, u32::MAX)]
    }

    /// Number of addresses covered.
    pub fn address_count(&self) -> u64 {
        self.intervals
            .iter()
            .map(|&(lo, hi)| hi as u64 - lo as u64 + 1)
            .sum()
    }

    /// Membership by binary search over the interval starts.
    pub fn contains(&self, addr: u32) -> bool {
        match self.intervals.partition_point(|&(lo, _)| lo <= addr) {
            0 => false,
            i => addr <= self.intervals[i - 1].1,
        }
    }

    pub fn iter_addresses(&self) -> impl Iterator<Item = u32> + '_ {
        self.intervals.iter().flat_map(|&(lo, hi)| lo..=hi)
    }

    pub fn union(&self, other: &Self, name: impl Into<String>) -> Self {
        Self::new(
            name,
            self.intervals.iter().chain(other.intervals.iter()).copied(),
        )
        .expect("normalized inputs cannot produce inverted intervals")
    }

    /// Every address not in this set.
    pub fn complement(&self, name: impl Into<String>) -> Self {
        let mut out = Vec::new();
        let mut next = 0u64; // u64 cursor avoids overflow at u32::MAX
        for &(lo, hi) in &self.intervals {
            if (lo as u64) > next {
                out.push((next as u32, lo - 1));
            }
            next = hi as u64 + 1;
        }
        if next <= u32::MAX as u64 {
            out.push((next as u32, u32::MAX));
        }
        Self {
            name: name.into(),
            intervals: out,
        }
    }

    pub fn overlaps(&self, other: &Self) -> bool {
        let (mut i, mut j) = (0, 0);
        while i < self.intervals.len() && j < other.intervals.len() {
            let (alo, ahi) = self.intervals[i];
            let (blo, bhi) = other.intervals[j];
            if alo <= bhi && blo <= ahi {
                return true;
            }
            if ahi < bhi {
                i += 1;
            } else {
                j += 1;
            }
        }
        false
    }
}
