//! Constant-packet windowing: repackages the per-second matrix stream into
//! windows of exactly `leaf_nv` packets, then aggregates them pairwise into
//! a binary hierarchy so every power-of-two window size comes out of one
//! pass.

use crate::matrix::{Coord, MatrixError, TrafficMatrix};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum WindowError {
    #[error("invalid window config: {0}")]
    InvalidConfig(String),
    #[error("per-second input out of order: {next} after {prev}")]
    OutOfOrder { prev: i64, next: i64 },
    #[error("complete leaf pushed after an incomplete one")]
    LeafAfterIncomplete,
    #[error(transparent)]
    Overflow(#[from] MatrixError),
}

/// Leaf window size and hierarchy depth.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WindowConfig {
    pub leaf_nv: u64,
    pub levels: u8,
}

impl WindowConfig {
    pub fn new(leaf_nv: u64, levels: u8) -> Result<Self, WindowError> {
        if leaf_nv == 0 {
            return Err(WindowError::InvalidConfig("leaf_nv must be >= 1".into()));
        }
        if levels == 0 {
            return Err(WindowError::InvalidConfig("levels must be >= 1".into()));
        }
        let top_factor = 1u64.checked_shl(u32::from(levels) - 1);
        if top_factor.and_then(|f| leaf_nv.checked_mul(f)).is_none() {
            return Err(WindowError::InvalidConfig(format!(
                "top window size leaf_nv * 2^{} overflows u64",
                levels - 1
            )));
        }
        Ok(Self { leaf_nv, levels })
    }

    /// Exact packet count of a complete window at `level`.
    pub fn window_packets(&self, level: u8) -> u64 {
        self.leaf_nv << level
    }
}

impl Default for WindowConfig {
    /// Leaf windows of 2^17 packets, 11 levels: the top of the hierarchy
    /// aggregates 2^27 packets.
    fn default() -> Self {
        Self {
            leaf_nv: 1 << 17,
            levels: 11,
        }
    }
}

/// One aggregated window. `complete` windows at level k hold exactly
/// `leaf_nv * 2^k` packets; the trailing remainder of a stream is emitted
/// with `complete = false`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Window {
    pub level: u8,
    pub seq: u64,
    pub t_start: i64,
    pub t_end: i64,
    pub matrix: TrafficMatrix,
    pub complete: bool,
}

struct Pending {
    matrix: TrafficMatrix,
    packets: u64,
    t_start: i64,
    t_end: i64,
}

/// Splits the per-second stream into exact-`leaf_nv` leaf windows.
///
/// Entries of a straddling second are consumed in canonical coordinate
/// order and the single boundary entry's count is divided so the filling
/// window reaches exactly `leaf_nv`.
pub struct WindowPacker {
    cfg: WindowConfig,
    pending: Option<Pending>,
    next_seq: u64,
    last_tbin: Option<i64>,
}

impl WindowPacker {
    pub fn new(cfg: WindowConfig) -> Self {
        Self {
            cfg,
            pending: None,
            next_seq: 0,
            last_tbin: None,
        }
    }

    pub fn push(&mut self, tbin: i64, matrix: &TrafficMatrix) -> Result<Vec<Window>, WindowError> {
        if let Some(prev) = self.last_tbin {
            if tbin <= prev {
                return Err(WindowError::OutOfOrder { prev, next: tbin });
            }
        }
        self.last_tbin = Some(tbin);

        let mut out = Vec::new();
        let entries = matrix.entries();
        let mut idx = 0usize;
        let mut taken_from_current = 0u64;
        let mut second_remaining = matrix.valid_packets();

        while second_remaining > 0 {
            let pending_packets = self.pending.as_ref().map_or(0, |p| p.packets);
            let space = self.cfg.leaf_nv - pending_packets;

            if second_remaining < space {
                let rest =
                    take_packets(entries, &mut idx, &mut taken_from_current, second_remaining);
                self.fold(rest, second_remaining, tbin)?;
                break;
            }

            let head = take_packets(entries, &mut idx, &mut taken_from_current, space);
            second_remaining -= space;
            self.fold(head, space, tbin)?;
            let filled = self.pending.take().expect("window just filled");
            out.push(Window {
                level: 0,
                seq: self.next_seq,
                t_start: filled.t_start,
                t_end: tbin,
                matrix: filled.matrix,
                complete: true,
            });
            self.next_seq += 1;
        }
        Ok(out)
    }

    /// Emits the trailing partial window, if any.
    pub fn finish(self) -> Option<Window> {
        let p = self.pending?;
        Some(Window {
            level: 0,
            seq: self.next_seq,
            t_start: p.t_start,
            t_end: p.t_end,
            matrix: p.matrix,
            complete: false,
        })
    }

    fn fold(
        &mut self,
        fragment: Vec<(Coord, u64)>,
        packets: u64,
        tbin: i64,
    ) -> Result<(), WindowError> {
        let fragment = TrafficMatrix::from_sorted_entries_unchecked(fragment);
        match self.pending.as_mut() {
            None => {
                self.pending = Some(Pending {
                    matrix: fragment,
                    packets,
                    t_start: tbin,
                    t_end: tbin,
                })
            }
            Some(p) => {
                p.matrix = p.matrix.add(&fragment)?;
                p.packets += packets;
                p.t_end = tbin;
            }
        }
        Ok(())
    }
}

/// Takes exactly `want` packets from the canonical entry stream, resuming at
/// `idx`/`taken_from_current` and dividing the boundary entry if needed.
fn take_packets(
    entries: &[(Coord, u64)],
    idx: &mut usize,
    taken_from_current: &mut u64,
    want: u64,
) -> Vec<(Coord, u64)> {
    let mut out = Vec::new();
    let mut need = want;
    while need > 0 {
        let (coord, count) = entries[*idx];
        let available = count - *taken_from_current;
        if available <= need {
            out.push((coord, available));
            need -= available;
            *idx += 1;
            *taken_from_current = 0;
        } else {
            out.push((coord, need));
            *taken_from_current += need;
            need = 0;
        }
    }
    out
}

/// Pairwise binary aggregation above the leaves. A level-k window with
/// sequence i is the sum of level-(k-1) windows 2i and 2i+1; each window is
/// emitted as soon as both children exist. At most one window per level is
/// held at a time.
pub struct HierarchyBuilder {
    pending: Vec<Option<Window>>,
    terminated: bool,
}

impl HierarchyBuilder {
    pub fn new(cfg: WindowConfig) -> Self {
        Self {
            pending: (1..cfg.levels).map(|_| None).collect(),
            terminated: false,
        }
    }

    /// Feeds the next leaf; returns it plus every window completed by it,
    /// bottom-up. An incomplete leaf passes through and stops aggregation.
    pub fn push_leaf(&mut self, leaf: Window) -> Result<Vec<Window>, WindowError> {
        if self.terminated {
            return Err(WindowError::LeafAfterIncomplete);
        }
        let mut out = vec![leaf.clone()];
        if !leaf.complete {
            self.terminated = true;
            return Ok(out);
        }
        let mut cur = leaf;
        let mut level = 0usize;
        while level < self.pending.len() {
            match self.pending[level].take() {
                None => {
                    self.pending[level] = Some(cur);
                    break;
                }
                Some(left) => {
                    debug_assert_eq!(left.seq % 2, 0);
                    debug_assert_eq!(cur.seq, left.seq + 1);
                    let merged = Window {
                        level: left.level + 1,
                        seq: left.seq / 2,
                        t_start: left.t_start,
                        t_end: cur.t_end,
                        matrix: left.matrix.add(&cur.matrix)?,
                        complete: true,
                    };
                    out.push(merged.clone());
                    cur = merged;
                    level += 1;
                }
            }
        }
        Ok(out)
    }
}

/// Packs a whole per-second stream into leaf windows.
pub fn pack_windows<I>(stream: I, cfg: WindowConfig) -> Result<Vec<Window>, WindowError>
where
    I: IntoIterator<Item = (i64, TrafficMatrix)>,
{
    let mut packer = WindowPacker::new(cfg);
    let mut out = Vec::new();
    for (tbin, matrix) in stream {
        out.extend(packer.push(tbin, &matrix)?);
    }
    out.extend(packer.finish());
    Ok(out)
}

/// Aggregates a leaf stream into all hierarchy levels.
pub fn build_hierarchy<I>(leaves: I, cfg: WindowConfig) -> Result<Vec<Window>, WindowError>
where
    I: IntoIterator<Item = Window>,
{
    let mut builder = HierarchyBuilder::new(cfg);
    let mut out = Vec::new();
    for leaf in leaves {
        out.extend(builder.push_leaf(leaf)?);
    }
    Ok(out)
}

/// Per-second stream straight to the full multi-level window stream.
pub fn pack_and_aggregate<I>(stream: I, cfg: WindowConfig) -> Result<Vec<Window>, WindowError>
where
    I: IntoIterator<Item = (i64, TrafficMatrix)>,
{
    build_hierarchy(pack_windows(stream, cfg)?, cfg)
}
