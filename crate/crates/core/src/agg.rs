//! Aggregate files: one window's subrange-grid statistics as a container of
//! named sections, self-describing and byte-deterministic.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! header:   "AGG1" | version u16 = 1 | flags u16 (bit 0: window complete)
//!         | level u64 | seq u64 | t_start i64 | t_end i64 | leaf_nv u64
//!         | section_count u64
//! section:  name_len u16 | name utf-8 | flags u8 (bit 0: mandatory)
//!         | elem_count u64 | byte_len u64 | payload
//! ```
//!
//! Sections appear in a fixed order: the full-matrix scalar block, the nine
//! grid cells (0,0)..(2,2), the three range definitions, then (optionally)
//! the sparse distribution vectors per cell. Scalar blocks are nine u64
//! values; sparse vectors are ascending (index, value) u64 pairs. Readers
//! skip unknown optional sections by length; an unknown mandatory section
//! is an error. A multi-window file is a plain concatenation of the above
//! followed by an entry index and the trailer magic "AGGX".
//!
//! The `dump` CLI subcommand renders these files as CSV or JSON lines.

use crate::analytics::{Distributions, NetworkQuantities, SubrangeGrid};
use crate::subrange::SubrangeSpec;
use crate::window::Window;
use std::io::{self, Read, Seek, SeekFrom, Write};
use thiserror::Error;

pub const AGG_MAGIC: [u8; 4] = *b"AGG1";
pub const AGG_VERSION: u16 = 1;
pub const AGG_FLAG_COMPLETE: u16 = 0x0001;
pub const AGG_INDEX_MAGIC: [u8; 4] = *b"AGGX";

const SECTION_MANDATORY: u8 = 0x01;
const CELL_TAGS: [&str; 10] = [
    "full", "0_0", "0_1", "0_2", "1_0", "1_1", "1_2", "2_0", "2_1", "2_2",
];
const DIST_KINDS: [&str; 4] = [
    "source_packets",
    "source_fanout",
    "destination_packets",
    "destination_fanin",
];

#[derive(Debug, Error)]
pub enum AggError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("bad magic {found:02x?}, not an aggregate file")]
    BadMagic { found: [u8; 4] },
    #[error("unsupported aggregate version {0}")]
    UnsupportedVersion(u16),
    #[error("truncated aggregate file")]
    Truncated,
    #[error("unknown mandatory section {0:?}")]
    UnknownMandatorySection(String),
    #[error("missing section {0:?}")]
    MissingSection(String),
    #[error("section {name:?}: {reason}")]
    MalformedSection { name: String, reason: String },
    #[error("missing or corrupt multi-window index trailer")]
    BadTrailer,
}

fn eof(e: io::Error) -> AggError {
    if e.kind() == io::ErrorKind::UnexpectedEof {
        AggError::Truncated
    } else {
        AggError::Io(e)
    }
}

/// Window identity carried in the header.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WindowMeta {
    pub level: u64,
    pub seq: u64,
    pub t_start: i64,
    pub t_end: i64,
    pub leaf_nv: u64,
    pub complete: bool,
}

impl WindowMeta {
    pub fn for_window(window: &Window, leaf_nv: u64) -> Self {
        Self {
            level: window.level as u64,
            seq: window.seq,
            t_start: window.t_start,
            t_end: window.t_end,
            leaf_nv,
            complete: window.complete,
        }
    }
}

fn scalar_block(q: &NetworkQuantities) -> [u64; 9] {
    [
        q.valid_packets,
        q.unique_links,
        q.max_link_packets,
        q.unique_sources,
        q.max_source_packets,
        q.max_source_fanout,
        q.unique_destinations,
        q.max_destination_packets,
        q.max_destination_fanin,
    ]
}

fn quantities_from_block(b: [u64; 9]) -> NetworkQuantities {
    NetworkQuantities {
        valid_packets: b[0],
        unique_links: b[1],
        max_link_packets: b[2],
        unique_sources: b[3],
        max_source_packets: b[4],
        max_source_fanout: b[5],
        unique_destinations: b[6],
        max_destination_packets: b[7],
        max_destination_fanin: b[8],
        distributions: None,
    }
}

fn write_section(out: &mut Vec<u8>, name: &str, mandatory: bool, elem_count: u64, payload: &[u8]) {
    out.extend_from_slice(&(name.len() as u16).to_le_bytes());
    out.extend_from_slice(name.as_bytes());
    out.push(if mandatory { SECTION_MANDATORY } else { 0 });
    out.extend_from_slice(&elem_count.to_le_bytes());
    out.extend_from_slice(&(payload.len() as u64).to_le_bytes());
    out.extend_from_slice(payload);
}

fn pairs_payload(pairs: &[(u32, u64)]) -> Vec<u8> {
    let mut payload = Vec::with_capacity(pairs.len() * 16);
    for &(index, value) in pairs {
        payload.extend_from_slice(&(index as u64).to_le_bytes());
        payload.extend_from_slice(&value.to_le_bytes());
    }
    payload
}

fn range_payload(spec: &SubrangeSpec) -> Vec<u8> {
    let name = spec.name().as_bytes();
    let mut payload = Vec::with_capacity(2 + name.len() + spec.intervals().len() * 16);
    payload.extend_from_slice(&(name.len() as u16).to_le_bytes());
    payload.extend_from_slice(name);
    for &(lo, hi) in spec.intervals() {
        payload.extend_from_slice(&(lo as u64).to_le_bytes());
        payload.extend_from_slice(&(hi as u64).to_le_bytes());
    }
    payload
}

fn cell_of(grid: &SubrangeGrid, tag_idx: usize) -> &NetworkQuantities {
    if tag_idx == 0 {
        &grid.full
    } else {
        &grid.cells[(tag_idx - 1) / 3][(tag_idx - 1) % 3]
    }
}

/// Serializes one window's grid; the output is a deterministic function of
/// its inputs.
pub fn aggregates_to_bytes(grid: &SubrangeGrid, meta: &WindowMeta) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(&AGG_MAGIC);
    out.extend_from_slice(&AGG_VERSION.to_le_bytes());
    let flags: u16 = if meta.complete { AGG_FLAG_COMPLETE } else { 0 };
    out.extend_from_slice(&flags.to_le_bytes());
    out.extend_from_slice(&meta.level.to_le_bytes());
    out.extend_from_slice(&meta.seq.to_le_bytes());
    out.extend_from_slice(&meta.t_start.to_le_bytes());
    out.extend_from_slice(&meta.t_end.to_le_bytes());
    out.extend_from_slice(&meta.leaf_nv.to_le_bytes());

    let with_dists = grid.full.distributions.is_some();
    let section_count = 10 + 3 + if with_dists { 40 } else { 0 };
    out.extend_from_slice(&(section_count as u64).to_le_bytes());

    for (tag_idx, tag) in CELL_TAGS.iter().enumerate() {
        let q = cell_of(grid, tag_idx);
        let mut payload = Vec::with_capacity(72);
        for v in scalar_block(q) {
            payload.extend_from_slice(&v.to_le_bytes());
        }
        write_section(&mut out, &format!("quantities/{tag}"), true, 9, &payload);
    }
    for (i, spec) in grid.ranges.iter().enumerate() {
        write_section(
            &mut out,
            &format!("range/{i}"),
            true,
            spec.intervals().len() as u64,
            &range_payload(spec),
        );
    }
    if with_dists {
        for (tag_idx, tag) in CELL_TAGS.iter().enumerate() {
            let q = cell_of(grid, tag_idx);
            let d = q
                .distributions
                .as_ref()
                .expect("all cells retain distributions together");
            let vectors = [
                &d.source_packets,
                &d.source_fanout,
                &d.destination_packets,
                &d.destination_fanin,
            ];
            for (kind, pairs) in DIST_KINDS.iter().zip(vectors) {
                write_section(
                    &mut out,
                    &format!("dist/{tag}/{kind}"),
                    false,
                    pairs.len() as u64,
                    &pairs_payload(pairs),
                );
            }
        }
    }
    out
}

/// Writes one window as a standalone aggregate file.
pub fn write_aggregates<W: Write>(
    mut writer: W,
    grid: &SubrangeGrid,
    meta: &WindowMeta,
) -> Result<(), AggError> {
    writer.write_all(&aggregates_to_bytes(grid, meta))?;
    Ok(())
}

fn read_u16<R: Read>(r: &mut R) -> Result<u16, AggError> {
    let mut b = [0u8; 2];
    r.read_exact(&mut b).map_err(eof)?;
    Ok(u16::from_le_bytes(b))
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64, AggError> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b).map_err(eof)?;
    Ok(u64::from_le_bytes(b))
}

fn read_i64<R: Read>(r: &mut R) -> Result<i64, AggError> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b).map_err(eof)?;
    Ok(i64::from_le_bytes(b))
}

fn malformed(name: &str, reason: impl Into<String>) -> AggError {
    AggError::MalformedSection {
        name: name.to_string(),
        reason: reason.into(),
    }
}

fn parse_pairs(name: &str, payload: &[u8], elems: u64) -> Result<Vec<(u32, u64)>, AggError> {
    if elems.checked_mul(16) != Some(payload.len() as u64) {
        return Err(malformed(name, "byte length does not match element count"));
    }
    let mut pairs = Vec::with_capacity(elems as usize);
    for chunk in payload.chunks_exact(16) {
        let index = u64::from_le_bytes(chunk[..8].try_into().expect("8 bytes"));
        let value = u64::from_le_bytes(chunk[8..].try_into().expect("8 bytes"));
        let index = u32::try_from(index)
            .map_err(|_| malformed(name, "index exceeds the 32-bit address space"))?;
        pairs.push((index, value));
    }
    if !pairs.windows(2).all(|w| w[0].0 < w[1].0) {
        return Err(malformed(name, "indices not strictly ascending"));
    }
    Ok(pairs)
}

/// Reads one window back; exact inverse of [`write_aggregates`].
pub fn read_aggregates<R: Read>(mut reader: R) -> Result<(SubrangeGrid, WindowMeta), AggError> {
    let mut magic = [0u8; 4];
    reader.read_exact(&mut magic).map_err(eof)?;
    if magic != AGG_MAGIC {
        return Err(AggError::BadMagic { found: magic });
    }
    let version = read_u16(&mut reader)?;
    if version != AGG_VERSION {
        return Err(AggError::UnsupportedVersion(version));
    }
    let flags = read_u16(&mut reader)?;
    let meta = WindowMeta {
        level: read_u64(&mut reader)?,
        seq: read_u64(&mut reader)?,
        t_start: read_i64(&mut reader)?,
        t_end: read_i64(&mut reader)?,
        leaf_nv: read_u64(&mut reader)?,
        complete: flags & AGG_FLAG_COMPLETE != 0,
    };
    let section_count = read_u64(&mut reader)?;

    let mut scalars: [Option<[u64; 9]>; 10] = [None; 10];
    let mut ranges: [Option<SubrangeSpec>; 3] = [None, None, None];
    let mut dists: Vec<Option<Vec<(u32, u64)>>> = vec![None; 40];

    for _ in 0..section_count {
        let name_len = read_u16(&mut reader)? as usize;
        let mut name_bytes = vec![0u8; name_len];
        reader.read_exact(&mut name_bytes).map_err(eof)?;
        let name = String::from_utf8(name_bytes)
            .map_err(|_| malformed("<non-utf8>", "section name is not UTF-8"))?;
        let mut flag = [0u8; 1];
        reader.read_exact(&mut flag).map_err(eof)?;
        let mandatory = flag[0] & SECTION_MANDATORY != 0;
        let elems = read_u64(&mut reader)?;
        let byte_len = read_u64(&mut reader)?;
        // read through take() so a corrupt length fails as truncation
        // instead of pre-allocating it
        let mut payload = Vec::new();
        (&mut reader)
            .take(byte_len)
            .read_to_end(&mut payload)
            .map_err(eof)?;
        if (payload.len() as u64) < byte_len {
            return Err(AggError::Truncated);
        }

        if let Some(tag) = name.strip_prefix("quantities/") {
            let idx = CELL_TAGS
                .iter()
                .position(|&t| t == tag)
                .ok_or_else(|| malformed(&name, "unknown cell tag"))?;
            if elems != 9 || payload.len() != 72 {
                return Err(malformed(&name, "scalar block must hold 9 values"));
            }
            let mut block = [0u64; 9];
            for (slot, chunk) in block.iter_mut().zip(payload.chunks_exact(8)) {
                *slot = u64::from_le_bytes(chunk.try_into().expect("8 bytes"));
            }
            scalars[idx] = Some(block);
        } else if let Some(i) = name.strip_prefix("range/") {
            let idx: usize = i
                .parse()
                .ok()
                .filter(|&i| i < 3)
                .ok_or_else(|| malformed(&name, "range index out of bounds"))?;
            if payload.len() < 2 {
                return Err(malformed(&name, "missing range name"));
            }
            let rn_len = u16::from_le_bytes(payload[..2].try_into().expect("2 bytes")) as usize;
            if payload.len() < 2 + rn_len {
                return Err(malformed(&name, "range name overruns payload"));
            }
            let rn = std::str::from_utf8(&payload[2..2 + rn_len])
                .map_err(|_| malformed(&name, "range name is not UTF-8"))?
                .to_string();
            let body = &payload[2 + rn_len..];
            if elems.checked_mul(16) != Some(body.len() as u64) {
                return Err(malformed(&name, "byte length does not match element count"));
            }
            let mut intervals = Vec::with_capacity(elems as usize);
            for chunk in body.chunks_exact(16) {
                let lo = u64::from_le_bytes(chunk[..8].try_into().expect("8 bytes"));
                let hi = u64::from_le_bytes(chunk[8..].try_into().expect("8 bytes"));
                let lo = u32::try_from(lo)
                    .map_err(|_| malformed(&name, "interval exceeds the address space"))?;
                let hi = u32::try_from(hi)
                    .map_err(|_| malformed(&name, "interval exceeds the address space"))?;
                intervals.push((lo, hi));
            }
            ranges[idx] = Some(
                SubrangeSpec::new(rn, intervals).map_err(|e| malformed(&name, e.to_string()))?,
            );
        } else if let Some(rest) = name.strip_prefix("dist/") {
            let (tag, kind) = rest
                .split_once('/')
                .ok_or_else(|| malformed(&name, "expected dist/<cell>/<kind>"))?;
            let tag_idx = CELL_TAGS
                .iter()
                .position(|&t| t == tag)
                .ok_or_else(|| malformed(&name, "unknown cell tag"))?;
            let kind_idx = DIST_KINDS
                .iter()
                .position(|&k| k == kind)
                .ok_or_else(|| malformed(&name, "unknown distribution kind"))?;
            dists[tag_idx * 4 + kind_idx] = Some(parse_pairs(&name, &payload, elems)?);
        } else if mandatory {
            return Err(AggError::UnknownMandatorySection(name));
        }
        // unknown optional sections are skipped by length
    }

    let mut cells: Vec<NetworkQuantities> = Vec::with_capacity(10);
    for (idx, tag) in CELL_TAGS.iter().enumerate() {
        let block =
            scalars[idx].ok_or_else(|| AggError::MissingSection(format!("quantities/{tag}")))?;
        let mut q = quantities_from_block(block);
        let slots = &mut dists[idx * 4..idx * 4 + 4];
        let present = slots.iter().filter(|s| s.is_some()).count();
        match present {
            0 => {}
            4 => {
                q.distributions = Some(Distributions {
                    source_packets: slots[0].take().expect("present"),
                    source_fanout: slots[1].take().expect("present"),
                    destination_packets: slots[2].take().expect("present"),
                    destination_fanin: slots[3].take().expect("present"),
                });
            }
            _ => {
                return Err(AggError::MissingSection(format!(
                    "dist/{tag}/* (found {present} of 4 vectors)"
                )))
            }
        }
        cells.push(q);
    }

    let [r0, r1, r2] = ranges;
    let ranges = [
        r0.ok_or_else(|| AggError::MissingSection("range/0".into()))?,
        r1.ok_or_else(|| AggError::MissingSection("range/1".into()))?,
        r2.ok_or_else(|| AggError::MissingSection("range/2".into()))?,
    ];

    let full = cells.remove(0);
    let mut it = cells.into_iter();
    let grid_cells =
        std::array::from_fn(|_| std::array::from_fn(|_| it.next().expect("nine cells parsed")));
    Ok((
        SubrangeGrid {
            ranges,
            full,
            cells: grid_cells,
        },
        meta,
    ))
}

/// Appends windows to one file; `finish` writes the entry index and the
/// `AGGX` trailer.
pub struct BulkWriter<W: Write> {
    writer: W,
    entries: Vec<(u64, u64)>,
    position: u64,
}

impl<W: Write> BulkWriter<W> {
    pub fn new(writer: W) -> Self {
        Self {
            writer,
            entries: Vec::new(),
            position: 0,
        }
    }

    pub fn append(&mut self, grid: &SubrangeGrid, meta: &WindowMeta) -> Result<(), AggError> {
        let bytes = aggregates_to_bytes(grid, meta);
        self.writer.write_all(&bytes)?;
        self.entries.push((self.position, bytes.len() as u64));
        self.position += bytes.len() as u64;
        Ok(())
    }

    pub fn finish(mut self) -> Result<W, AggError> {
        let index_offset = self.position;
        self.writer
            .write_all(&(self.entries.len() as u64).to_le_bytes())?;
        for &(offset, len) in &self.entries {
            self.writer.write_all(&offset.to_le_bytes())?;
            self.writer.write_all(&len.to_le_bytes())?;
        }
        self.writer.write_all(&index_offset.to_le_bytes())?;
        self.writer.write_all(&AGG_INDEX_MAGIC)?;
        self.writer.flush()?;
        Ok(self.writer)
    }
}

/// Reads every window of a multi-window file via its trailer index.
pub fn read_bulk<R: Read + Seek>(
    mut reader: R,
) -> Result<Vec<(SubrangeGrid, WindowMeta)>, AggError> {
    let end = reader.seek(SeekFrom::End(0))?;
    if end < 12 {
        return Err(AggError::BadTrailer);
    }
    reader.seek(SeekFrom::Start(end - 12))?;
    let index_offset = read_u64(&mut reader)?;
    let mut magic = [0u8; 4];
    reader.read_exact(&mut magic).map_err(eof)?;
    if magic != AGG_INDEX_MAGIC || index_offset > end - 12 {
        return Err(AggError::BadTrailer);
    }
    reader.seek(SeekFrom::Start(index_offset))?;
    let count = read_u64(&mut reader)?;
    let mut entries = Vec::with_capacity((count as usize).min(1 << 16));
    for _ in 0..count {
        let offset = read_u64(&mut reader)?;
        let len = read_u64(&mut reader)?;
        entries.push((offset, len));
    }
    let mut out = Vec::with_capacity(entries.len());
    for (offset, len) in entries {
        reader.seek(SeekFrom::Start(offset))?;
        out.push(read_aggregates((&mut reader).take(len))?);
    }
    Ok(out)
}

/// Reads either a single-window file or a multi-window file, detected by
/// the trailer.
pub fn read_any<R: Read + Seek>(
    mut reader: R,
) -> Result<Vec<(SubrangeGrid, WindowMeta)>, AggError> {
    let end = reader.seek(SeekFrom::End(0))?;
    if end >= 12 {
        reader.seek(SeekFrom::Start(end - 4))?;
        let mut magic = [0u8; 4];
        reader.read_exact(&mut magic).map_err(eof)?;
        if magic == AGG_INDEX_MAGIC {
            reader.seek(SeekFrom::Start(0))?;
            return read_bulk(reader);
        }
    }
    reader.seek(SeekFrom::Start(0))?;
    Ok(vec![read_aggregates(reader)?])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytics::{analyze_window, RangeConfig};
    use crate::matrix::TrafficMatrix;
    use proptest::prelude::*;
    use std::io::Cursor;

    fn sample_grid(keep_dists: bool, salt: u64) -> (SubrangeGrid, WindowMeta) {
        let matrix = TrafficMatrix::from_triples([
            (0x0A00_0001, 0x0102_0304, 3 + salt),
            (0x0102_0304, 0xF000_0001, 7),
            (0xF000_0001, 0x0A00_0001, 1),
        ])
        .unwrap();
        let window = Window {
            level: 2,
            seq: 5,
            t_start: 1000,
            t_end: 1010,
            matrix,
            complete: true,
        };
        let ranges = RangeConfig::default_ranges().ranges;
        let grid = analyze_window(&window, &ranges, keep_dists);
        let meta = WindowMeta::for_window(&window, 1 << 10);
        (grid, meta)
    }

    #[test]
    fn round_trip_without_distributions() {
        let (grid, meta) = sample_grid(false, 0);
        let bytes = aggregates_to_bytes(&grid, &meta);
        let (grid2, meta2) = read_aggregates(&bytes[..]).unwrap();
        assert_eq!(grid2, grid);
        assert_eq!(meta2, meta);
    }

    #[test]
    fn round_trip_with_distributions() {
        let (grid, meta) = sample_grid(true, 0);
        let bytes = aggregates_to_bytes(&grid, &meta);
        let (grid2, meta2) = read_aggregates(&bytes[..]).unwrap();
        assert_eq!(grid2, grid);
        assert_eq!(meta2, meta);
    }

    #[test]
    fn serialization_is_deterministic() {
        let (grid, meta) = sample_grid(true, 0);
        assert_eq!(
            aggregates_to_bytes(&grid, &meta),
            aggregates_to_bytes(&grid, &meta)
        );
    }

    #[test]
    fn empty_grid_has_zero_blocks_and_no_distributions() {
        let window = Window {
            level: 0,
            seq: 0,
            t_start: 0,
            t_end: 0,
            matrix: TrafficMatrix::empty(),
            complete: false,
        };
        let ranges = RangeConfig::default_ranges().ranges;
        let grid = analyze_window(&window, &ranges, false);
        let meta = WindowMeta::for_window(&window, 4);
        let bytes = aggregates_to_bytes(&grid, &meta);
        let (grid2, meta2) = read_aggregates(&bytes[..]).unwrap();
        assert_eq!(grid2.full, NetworkQuantities::default());
        assert!(!meta2.complete);
        assert!(grid2.full.distributions.is_none());
    }

    #[test]
    fn wrong_magic_rejected_before_parse() {
        let (grid, meta) = sample_grid(false, 0);
        let mut bytes = aggregates_to_bytes(&grid, &meta);
        bytes[0] = b'X';
        assert!(matches!(
            read_aggregates(&bytes[..]),
            Err(AggError::BadMagic { .. })
        ));
    }

    #[test]
    fn truncation_is_structured() {
        let (grid, meta) = sample_grid(false, 0);
        let bytes = aggregates_to_bytes(&grid, &meta);
        for cut in [3, 20, 60, bytes.len() - 1] {
            assert!(matches!(
                read_aggregates(&bytes[..cut]),
                Err(AggError::Truncated)
            ));
        }
    }

    #[test]
    fn absurd_section_length_is_truncation_not_allocation() {
        let (grid, meta) = sample_grid(false, 0);
        let mut bytes = aggregates_to_bytes(&grid, &meta);
        // first section's byte_len field sits after its name and flag
        let header_end = 4 + 2 + 2 + 8 * 5 + 8;
        let byte_len_pos = header_end + 2 + "quantities/full".len() + 1 + 8;
        bytes[byte_len_pos..byte_len_pos + 8].copy_from_slice(&u64::MAX.to_le_bytes());
        assert!(matches!(
            read_aggregates(&bytes[..]),
            Err(AggError::Truncated)
        ));
    }

    #[test]
    fn unknown_optional_section_is_skipped_unknown_mandatory_errors() {
        let (grid, meta) = sample_grid(false, 0);
        let bytes = aggregates_to_bytes(&grid, &meta);

        // splice an extra section right after the header and patch the count
        let splice = |mandatory: bool| -> Vec<u8> {
            let mut extra = Vec::new();
            write_section(&mut extra, "future/thing", mandatory, 1, &[0xAB; 8]);
            let header_end = 4 + 2 + 2 + 8 * 5;
            let count_pos = header_end;
            let mut out = bytes[..count_pos].to_vec();
            let old = u64::from_le_bytes(bytes[count_pos..count_pos + 8].try_into().expect("8"));
            out.extend_from_slice(&(old + 1).to_le_bytes());
            out.extend_from_slice(&extra);
            out.extend_from_slice(&bytes[count_pos + 8..]);
            out
        };

        let (grid2, _) = read_aggregates(&splice(false)[..]).unwrap();
        assert_eq!(grid2, grid);
        assert!(matches!(
            read_aggregates(&splice(true)[..]),
            Err(AggError::UnknownMandatorySection(name)) if name == "future/thing"
        ));
    }

    #[test]
    fn bulk_round_trip_and_detection() {
        let mut writer = BulkWriter::new(Vec::new());
        let (g0, m0) = sample_grid(false, 0);
        let (g1, m1) = sample_grid(true, 9);
        writer.append(&g0, &m0).unwrap();
        writer.append(&g1, &m1).unwrap();
        let bytes = writer.finish().unwrap();

        let windows = read_bulk(Cursor::new(&bytes)).unwrap();
        assert_eq!(windows.len(), 2);
        assert_eq!(windows[0], (g0.clone(), m0));
        assert_eq!(windows[1], (g1.clone(), m1));

        // read_any handles both layouts
        let auto = read_any(Cursor::new(&bytes)).unwrap();
        assert_eq!(auto.len(), 2);
        let single = aggregates_to_bytes(&g0, &m0);
        let auto_single = read_any(Cursor::new(&single)).unwrap();
        assert_eq!(auto_single, vec![(g0, m0)]);

        assert!(matches!(
            read_bulk(Cursor::new(&single)),
            Err(AggError::BadTrailer)
        ));
    }

    proptest! {
        #[test]
        fn random_grids_round_trip(
            ts in prop::collection::vec((any::<u32>(), any::<u32>(), 1u64..500), 0..60),
            keep in any::<bool>(),
            level in 0u64..11,
            seq in any::<u64>(),
        ) {
            let matrix = TrafficMatrix::from_triples(ts).unwrap();
            let window = Window {
                level: level as u8,
                seq,
                t_start: -5,
                t_end: 17,
                matrix,
                complete: seq % 2 == 0,
            };
            let ranges = RangeConfig::default_ranges().ranges;
            let grid = analyze_window(&window, &ranges, keep);
            let meta = WindowMeta::for_window(&window, 1 << 17);
            let bytes = aggregates_to_bytes(&grid, &meta);
            let (grid2, meta2) = read_aggregates(&bytes[..]).unwrap();
            prop_assert_eq!(grid2, grid);
            prop_assert_eq!(meta2, meta);
        }
    }
}
