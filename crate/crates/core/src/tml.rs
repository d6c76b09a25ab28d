//! The Time Matrix List (TML) container: a timestamped traffic-matrix
//! sequence stored as deltas between time-adjacent coordinate sets.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! header:  "TML1" | version u16 = 1 | flags u16 (bit 0: per-entry CRC32C)
//! entry:   t i64
//!        | del_count i32 | ins_count i32
//!        | D: del_count x u32   positions into the previous canonical
//!        |                      coordinate sequence, strictly ascending
//!        | I: ins_count x (src u32, dst u32)  new coordinates, ascending
//!        | V: current-set-size x u64          all current counts, canonical
//!        | crc u32              only when the header flag is set
//! ```
//!
//! The first entry deltas against the empty set. A coordinate present in
//! two consecutive matrices appears in neither D nor I; only its V slot
//! changes. Decoding replays D (positional deletes), merges I, and zips V,
//! reconstructing every matrix exactly.

use crate::matrix::{Coord, TrafficMatrix};
use std::io::{self, Read, Write};
use thiserror::Error;

pub const TML_MAGIC: [u8; 4] = *b"TML1";
pub const TML_VERSION: u16 = 1;
/// Header flag bit 0: every entry is followed by a CRC32C of its bytes.
pub const TML_FLAG_CRC: u16 = 0x0001;

#[derive(Debug, Error)]
pub enum TmlError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("bad magic {found:02x?}, not a TML stream")]
    BadMagic { found: [u8; 4] },
    #[error("unsupported TML version {0}")]
    UnsupportedVersion(u16),
    #[error("timestamps must be strictly ascending: {next} after {prev}")]
    NonAscendingTimestamp { prev: i64, next: i64 },
    #[error("matrix too large to encode ({nnz} coordinates)")]
    TooManyCoordinates { nnz: u64 },
    #[error("entry {entry} at byte {offset}: truncated stream")]
    Truncated { entry: u64, offset: u64 },
    #[error("entry {entry} at byte {offset}: negative delete/insert count ({del}, {ins})")]
    NegativeCount {
        entry: u64,
        offset: u64,
        del: i32,
        ins: i32,
    },
    #[error(
        "entry {entry} at byte {offset}: delete position {position} out of range (set size {size})"
    )]
    DeleteOutOfRange {
        entry: u64,
        offset: u64,
        position: u32,
        size: u64,
    },
    #[error("entry {entry} at byte {offset}: delete positions not strictly ascending")]
    DeleteNotAscending { entry: u64, offset: u64 },
    #[error("entry {entry} at byte {offset}: insert coordinates not strictly ascending")]
    InsertNotAscending { entry: u64, offset: u64 },
    #[error("entry {entry} at byte {offset}: insert ({src}, {dst}) already present")]
    InsertAlreadyPresent {
        entry: u64,
        offset: u64,
        src: u32,
        dst: u32,
    },
    #[error("entry {entry} at byte {offset}: timestamp {next} not after {prev}")]
    TimestampOrder {
        entry: u64,
        offset: u64,
        prev: i64,
        next: i64,
    },
    #[error("entry {entry} at byte {offset}: zero count in value list")]
    ZeroValue { entry: u64, offset: u64 },
    #[error("entry {entry} at byte {offset}: CRC mismatch (stored {stored:08x}, computed {computed:08x})")]
    CrcMismatch {
        entry: u64,
        offset: u64,
        stored: u32,
        computed: u32,
    },
}

// CRC32C (Castagnoli), reflected polynomial 0x82F63B78, table-driven.
// Check value: crc32c(b"123456789") == 0xE3069283.
fn crc32c_table() -> &'static [u32; 256] {
    use std::sync::OnceLock;
    static TABLE: OnceLock<[u32; 256]> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut table = [0u32; 256];
        for (i, slot) in table.iter_mut().enumerate() {
            let mut crc = i as u32;
            for _ in 0..8 {
                crc = if crc & 1 != 0 {
                    (crc >> 1) ^ 0x82F6_3B78
                } else {
                    crc >> 1
                };
            }
            *slot = crc;
        }
        table
    })
}

pub fn crc32c(data: &[u8]) -> u32 {
    let table = crc32c_table();
    let mut crc = u32::MAX;
    for &b in data {
        crc = (crc >> 8) ^ table[((crc ^ b as u32) & 0xFF) as usize];
    }
    !crc
}

/// Streaming encoder. Matrices must arrive with strictly ascending
/// timestamps; the header is written on construction.
pub struct TmlEncoder<W: Write> {
    writer: W,
    prev_coords: Vec<Coord>,
    last_t: Option<i64>,
    crc: bool,
    buf: Vec<u8>,
}

impl<W: Write> TmlEncoder<W> {
    pub fn new(mut writer: W, with_crc: bool) -> Result<Self, TmlError> {
        let flags: u16 = if with_crc { TML_FLAG_CRC } else { 0 };
        writer.write_all(&TML_MAGIC)?;
        writer.write_all(&TML_VERSION.to_le_bytes())?;
        writer.write_all(&flags.to_le_bytes())?;
        Ok(Self {
            writer,
            prev_coords: Vec::new(),
            last_t: None,
            crc: with_crc,
            buf: Vec::new(),
        })
    }

    pub fn push(&mut self, t: i64, matrix: &TrafficMatrix) -> Result<(), TmlError> {
        if let Some(prev) = self.last_t {
            if t <= prev {
                return Err(TmlError::NonAscendingTimestamp { prev, next: t });
            }
        }
        self.last_t = Some(t);

        if matrix.nnz() > i32::MAX as u64 || self.prev_coords.len() > u32::MAX as usize {
            return Err(TmlError::TooManyCoordinates { nnz: matrix.nnz() });
        }

        // two-pointer walk of the previous and current canonical sequences
        let mut deletes: Vec<u32> = Vec::new();
        let mut inserts: Vec<Coord> = Vec::new();
        let cur = matrix.entries();
        let (mut i, mut j) = (0usize, 0usize);
        while i < self.prev_coords.len() || j < cur.len() {
            match (self.prev_coords.get(i), cur.get(j)) {
                (Some(&p), Some(&(c, _))) if p == c => {
                    i += 1;
                    j += 1;
                }
                (Some(&p), Some(&(c, _))) if p < c => {
                    deletes.push(i as u32);
                    i += 1;
                }
                (Some(_), Some(_)) => {
                    inserts.push(cur[j].0);
                    j += 1;
                }
                (Some(_), None) => {
                    deletes.push(i as u32);
                    i += 1;
                }
                (None, Some(_)) => {
                    inserts.push(cur[j].0);
                    j += 1;
                }
                (None, None) => unreachable!(),
            }
        }

        let buf = &mut self.buf;
        buf.clear();
        buf.extend_from_slice(&t.to_le_bytes());
        buf.extend_from_slice(&(deletes.len() as i32).to_le_bytes());
        buf.extend_from_slice(&(inserts.len() as i32).to_le_bytes());
        for pos in &deletes {
            buf.extend_from_slice(&pos.to_le_bytes());
        }
        for c in &inserts {
            buf.extend_from_slice(&c.src.to_le_bytes());
            buf.extend_from_slice(&c.dst.to_le_bytes());
        }
        for &(_, count) in cur {
            buf.extend_from_slice(&count.to_le_bytes());
        }
        if self.crc {
            let crc = crc32c(buf);
            buf.extend_from_slice(&crc.to_le_bytes());
        }
        self.writer.write_all(buf)?;

        self.prev_coords.clear();
        self.prev_coords.extend(cur.iter().map(|&(c, _)| c));
        Ok(())
    }

    pub fn finish(mut self) -> Result<W, TmlError> {
        self.writer.flush()?;
        Ok(self.writer)
    }
}

/// Convenience: encodes a whole sequence into a byte vector.
pub fn tml_encode<'a, I>(seq: I, with_crc: bool) -> Result<Vec<u8>, TmlError>
where
    I: IntoIterator<Item = (i64, &'a TrafficMatrix)>,
{
    let mut enc = TmlEncoder::new(Vec::new(), with_crc)?;
    for (t, m) in seq {
        enc.push(t, m)?;
    }
    enc.finish()
}

struct CountingReader<R: Read> {
    inner: R,
    offset: u64,
}

impl<R: Read> CountingReader<R> {
    fn read_exact_or(&mut self, buf: &mut [u8], err: TmlError) -> Result<(), TmlError> {
        match self.inner.read_exact(buf) {
            Ok(()) => {
                self.offset += buf.len() as u64;
                Ok(())
            }
            Err(e) if e.kind() == io::ErrorKind::UnexpectedEof => Err(err),
            Err(e) => Err(e.into()),
        }
    }

    /// Reads 0 or buf.len() bytes; anything in between is a truncation.
    fn read_exact_or_eof(&mut self, buf: &mut [u8]) -> Result<bool, TmlError> {
        let mut filled = 0usize;
        while filled < buf.len() {
            match self.inner.read(&mut buf[filled..]) {
                Ok(0) => break,
                Ok(n) => filled += n,
                Err(e) if e.kind() == io::ErrorKind::Interrupted => continue,
                Err(e) => return Err(e.into()),
            }
        }
        self.offset += filled as u64;
        if filled == 0 {
            Ok(false)
        } else if filled == buf.len() {
            Ok(true)
        } else {
            Err(TmlError::Truncated {
                entry: 0, // caller patches in the entry index
                offset: self.offset,
            })
        }
    }
}

/// Streaming decoder; iterate to get `(timestamp, matrix)` pairs.
pub struct TmlDecoder<R: Read> {
    reader: CountingReader<R>,
    coords: Vec<Coord>,
    counts: Vec<u64>,
    entry: u64,
    last_t: Option<i64>,
    flags: u16,
    failed: bool,
}

impl<R: Read> TmlDecoder<R> {
    pub fn new(reader: R) -> Result<Self, TmlError> {
        let mut reader = CountingReader {
            inner: reader,
            offset: 0,
        };
        let mut magic = [0u8; 4];
        reader.read_exact_or(
            &mut magic,
            TmlError::Truncated {
                entry: 0,
                offset: 0,
            },
        )?;
        if magic != TML_MAGIC {
            return Err(TmlError::BadMagic { found: magic });
        }
        let mut half = [0u8; 2];
        reader.read_exact_or(
            &mut half,
            TmlError::Truncated {
                entry: 0,
                offset: 4,
            },
        )?;
        let version = u16::from_le_bytes(half);
        if version != TML_VERSION {
            return Err(TmlError::UnsupportedVersion(version));
        }
        reader.read_exact_or(
            &mut half,
            TmlError::Truncated {
                entry: 0,
                offset: 6,
            },
        )?;
        let flags = u16::from_le_bytes(half);
        Ok(Self {
            reader,
            coords: Vec::new(),
            counts: Vec::new(),
            entry: 0,
            last_t: None,
            flags,
            failed: false,
        })
    }

    pub fn flags(&self) -> u16 {
        self.flags
    }

    pub fn has_crc(&self) -> bool {
        self.flags & TML_FLAG_CRC != 0
    }

    /// Bytes consumed so far, header included.
    pub fn bytes_read(&self) -> u64 {
        self.reader.offset
    }

    fn read_next(&mut self) -> Result<Option<(i64, TrafficMatrix)>, TmlError> {
        let entry = self.entry;
        let entry_offset = self.reader.offset;

        let mut t_bytes = [0u8; 8];
        match self.reader.read_exact_or_eof(&mut t_bytes) {
            Ok(false) => return Ok(None),
            Ok(true) => {}
            Err(TmlError::Truncated { offset, .. }) => {
                return Err(TmlError::Truncated { entry, offset })
            }
            Err(e) => return Err(e),
        }
        let mut crc_buf: Option<Vec<u8>> = self.has_crc().then(|| t_bytes.to_vec());

        let mut read = |reader: &mut CountingReader<R>, buf: &mut [u8]| -> Result<(), TmlError> {
            reader.read_exact_or(
                buf,
                TmlError::Truncated {
                    entry,
                    offset: reader.offset,
                },
            )?;
            if let Some(acc) = crc_buf.as_mut() {
                acc.extend_from_slice(buf);
            }
            Ok(())
        };

        let t = i64::from_le_bytes(t_bytes);
        let mut word = [0u8; 4];
        read(&mut self.reader, &mut word)?;
        let del = i32::from_le_bytes(word);
        read(&mut self.reader, &mut word)?;
        let ins = i32::from_le_bytes(word);
        if del < 0 || ins < 0 {
            return Err(TmlError::NegativeCount {
                entry,
                offset: entry_offset,
                del,
                ins,
            });
        }

        let size = self.coords.len();
        // capacity capped: counts are attacker-controlled until the reads
        // behind them succeed
        let mut deletes: Vec<u32> = Vec::with_capacity((del as usize).min(1 << 16));
        for _ in 0..del {
            read(&mut self.reader, &mut word)?;
            let pos = u32::from_le_bytes(word);
            if pos as u64 >= size as u64 {
                return Err(TmlError::DeleteOutOfRange {
                    entry,
                    offset: self.reader.offset,
                    position: pos,
                    size: size as u64,
                });
            }
            if let Some(&last) = deletes.last() {
                if pos <= last {
                    return Err(TmlError::DeleteNotAscending {
                        entry,
                        offset: self.reader.offset,
                    });
                }
            }
            deletes.push(pos);
        }

        let mut inserts: Vec<Coord> = Vec::with_capacity((ins as usize).min(1 << 16));
        for _ in 0..ins {
            read(&mut self.reader, &mut word)?;
            let src = u32::from_le_bytes(word);
            read(&mut self.reader, &mut word)?;
            let dst = u32::from_le_bytes(word);
            let c = Coord::new(src, dst);
            if let Some(&last) = inserts.last() {
                if c <= last {
                    return Err(TmlError::InsertNotAscending {
                        entry,
                        offset: self.reader.offset,
                    });
                }
            }
            inserts.push(c);
        }

        // survivors of the previous set, with positional deletes applied
        let mut survivors: Vec<Coord> = Vec::with_capacity(size - deletes.len());
        let mut next_del = deletes.iter().peekable();
        for (pos, &coord) in self.coords.iter().enumerate() {
            if next_del.peek() == Some(&&(pos as u32)) {
                next_del.next();
            } else {
                survivors.push(coord);
            }
        }

        // three-way check while merging inserts: a coordinate may not be
        // both retained and inserted
        let new_size = survivors.len() + inserts.len();
        let mut merged: Vec<Coord> = Vec::with_capacity(new_size);
        let (mut si, mut ii) = (0usize, 0usize);
        while si < survivors.len() || ii < inserts.len() {
            match (survivors.get(si), inserts.get(ii)) {
                (Some(&s), Some(&c)) if s == c => {
                    return Err(TmlError::InsertAlreadyPresent {
                        entry,
                        offset: self.reader.offset,
                        src: c.src,
                        dst: c.dst,
                    });
                }
                (Some(&s), Some(&c)) if s < c => {
                    merged.push(s);
                    si += 1;
                }
                (Some(_), Some(&c)) => {
                    merged.push(c);
                    ii += 1;
                }
                (Some(&s), None) => {
                    merged.push(s);
                    si += 1;
                }
                (None, Some(&c)) => {
                    merged.push(c);
                    ii += 1;
                }
                (None, None) => unreachable!(),
            }
        }

        self.counts.clear();
        let mut count_bytes = [0u8; 8];
        for _ in 0..new_size {
            read(&mut self.reader, &mut count_bytes)?;
            let count = u64::from_le_bytes(count_bytes);
            if count == 0 {
                return Err(TmlError::ZeroValue {
                    entry,
                    offset: self.reader.offset,
                });
            }
            self.counts.push(count);
        }

        if let Some(acc) = crc_buf {
            let mut stored_bytes = [0u8; 4];
            self.reader.read_exact_or(
                &mut stored_bytes,
                TmlError::Truncated {
                    entry,
                    offset: self.reader.offset,
                },
            )?;
            let stored = u32::from_le_bytes(stored_bytes);
            let computed = crc32c(&acc);
            if stored != computed {
                return Err(TmlError::CrcMismatch {
                    entry,
                    offset: entry_offset,
                    stored,
                    computed,
                });
            }
        }

        if let Some(prev) = self.last_t {
            if t <= prev {
                return Err(TmlError::TimestampOrder {
                    entry,
                    offset: entry_offset,
                    prev,
                    next: t,
                });
            }
        }
        self.last_t = Some(t);
        self.coords = merged;
        self.entry += 1;

        let entries: Vec<(Coord, u64)> = self
            .coords
            .iter()
            .copied()
            .zip(self.counts.iter().copied())
            .collect();
        Ok(Some((
            t,
            TrafficMatrix::from_sorted_entries_unchecked(entries),
        )))
    }
}

impl<R: Read> Iterator for TmlDecoder<R> {
    type Item = Result<(i64, TrafficMatrix), TmlError>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.failed {
            return None;
        }
        match self.read_next() {
            Ok(Some(item)) => Some(Ok(item)),
            Ok(None) => None,
            Err(e) => {
                self.failed = true;
                Some(Err(e))
            }
        }
    }
}

/// Convenience: decodes a whole byte slice.
pub fn tml_decode(bytes: &[u8]) -> Result<Vec<(i64, TrafficMatrix)>, TmlError> {
    TmlDecoder::new(bytes)?.collect()
}

/// Stream summary produced without reconstructing any matrix: the walker
/// tracks coordinate-set sizes only and sums the value lists.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TmlStats {
    pub entries: u64,
    pub total_packets: u128,
    pub total_bytes: u64,
}

impl TmlStats {
    /// File bits per packet; infinite for a packetless stream.
    pub fn bits_per_packet(&self) -> f64 {
        if self.total_packets == 0 {
            f64::INFINITY
        } else {
            8.0 * self.total_bytes as f64 / self.total_packets as f64
        }
    }
}

/// Structural walk of a TML stream: header and entry framing are validated
/// (positions, ordering, CRC when present) while values are only summed.
pub fn tml_stats<R: Read>(reader: R) -> Result<TmlStats, TmlError> {
    let mut reader = CountingReader {
        inner: reader,
        offset: 0,
    };
    let mut magic = [0u8; 4];
    reader.read_exact_or(
        &mut magic,
        TmlError::Truncated {
            entry: 0,
            offset: 0,
        },
    )?;
    if magic != TML_MAGIC {
        return Err(TmlError::BadMagic { found: magic });
    }
    let mut half = [0u8; 2];
    reader.read_exact_or(
        &mut half,
        TmlError::Truncated {
            entry: 0,
            offset: 4,
        },
    )?;
    let version = u16::from_le_bytes(half);
    if version != TML_VERSION {
        return Err(TmlError::UnsupportedVersion(version));
    }
    reader.read_exact_or(
        &mut half,
        TmlError::Truncated {
            entry: 0,
            offset: 6,
        },
    )?;
    let flags = u16::from_le_bytes(half);
    let with_crc = flags & TML_FLAG_CRC != 0;

    let mut entries = 0u64;
    let mut total_packets: u128 = 0;
    let mut size: u64 = 0;
    let mut last_t: Option<i64> = None;

    loop {
        let entry_offset = reader.offset;
        let mut t_bytes = [0u8; 8];
        match reader.read_exact_or_eof(&mut t_bytes) {
            Ok(false) => break,
            Ok(true) => {}
            Err(TmlError::Truncated { offset, .. }) => {
                return Err(TmlError::Truncated {
                    entry: entries,
                    offset,
                })
            }
            Err(e) => return Err(e),
        }
        let mut crc_acc: Option<Vec<u8>> = with_crc.then(|| t_bytes.to_vec());
        let t = i64::from_le_bytes(t_bytes);
        if let Some(prev) = last_t {
            if t <= prev {
                return Err(TmlError::TimestampOrder {
                    entry: entries,
                    offset: entry_offset,
                    prev,
                    next: t,
                });
            }
        }
        last_t = Some(t);

        let mut read = |reader: &mut CountingReader<R>, buf: &mut [u8]| -> Result<(), TmlError> {
            reader.read_exact_or(
                buf,
                TmlError::Truncated {
                    entry: entries,
                    offset: reader.offset,
                },
            )?;
            if let Some(acc) = crc_acc.as_mut() {
                acc.extend_from_slice(buf);
            }
            Ok(())
        };

        let mut word = [0u8; 4];
        read(&mut reader, &mut word)?;
        let del = i32::from_le_bytes(word);
        read(&mut reader, &mut word)?;
        let ins = i32::from_le_bytes(word);
        if del < 0 || ins < 0 {
            return Err(TmlError::NegativeCount {
                entry: entries,
                offset: entry_offset,
                del,
                ins,
            });
        }

        let mut last_pos: Option<u32> = None;
        for _ in 0..del {
            read(&mut reader, &mut word)?;
            let pos = u32::from_le_bytes(word);
            if pos as u64 >= size {
                return Err(TmlError::DeleteOutOfRange {
                    entry: entries,
                    offset: reader.offset,
                    position: pos,
                    size,
                });
            }
            if let Some(last) = last_pos {
                if pos <= last {
                    return Err(TmlError::DeleteNotAscending {
                        entry: entries,
                        offset: reader.offset,
                    });
                }
            }
            last_pos = Some(pos);
        }

        let mut last_coord: Option<Coord> = None;
        for _ in 0..ins {
            read(&mut reader, &mut word)?;
            let src = u32::from_le_bytes(word);
            read(&mut reader, &mut word)?;
            let dst = u32::from_le_bytes(word);
            let c = Coord::new(src, dst);
            if let Some(last) = last_coord {
                if c <= last {
                    return Err(TmlError::InsertNotAscending {
                        entry: entries,
                        offset: reader.offset,
                    });
                }
            }
            last_coord = Some(c);
        }

        size = size - del as u64 + ins as u64;
        let mut count_bytes = [0u8; 8];
        for _ in 0..size {
            read(&mut reader, &mut count_bytes)?;
            let count = u64::from_le_bytes(count_bytes);
            if count == 0 {
                return Err(TmlError::ZeroValue {
                    entry: entries,
                    offset: reader.offset,
                });
            }
            total_packets += count as u128;
        }

        if let Some(acc) = crc_acc {
            let mut stored_bytes = [0u8; 4];
            reader.read_exact_or(
                &mut stored_bytes,
                TmlError::Truncated {
                    entry: entries,
                    offset: reader.offset,
                },
            )?;
            let stored = u32::from_le_bytes(stored_bytes);
            let computed = crc32c(&acc);
            if stored != computed {
                return Err(TmlError::CrcMismatch {
                    entry: entries,
                    offset: entry_offset,
                    stored,
                    computed,
                });
            }
        }
        entries += 1;
    }

    Ok(TmlStats {
        entries,
        total_packets,
        total_bytes: reader.offset,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn m(triples: &[(u32, u32, u64)]) -> TrafficMatrix {
        TrafficMatrix::from_triples(triples.iter().copied()).unwrap()
    }

    #[test]
    fn crc32c_check_value() {
        assert_eq!(crc32c(b"123456789"), 0xE306_9283);
        assert_eq!(crc32c(b""), 0);
    }

    #[test]
    fn absurd_delta_counts_fail_fast() {
        // a corrupt del_count near i32::MAX must error, not allocate
        let mut bytes = Vec::new();
        bytes.extend_from_slice(b"TML1");
        bytes.extend_from_slice(&1u16.to_le_bytes());
        bytes.extend_from_slice(&0u16.to_le_bytes());
        bytes.extend_from_slice(&1i64.to_le_bytes());
        bytes.extend_from_slice(&i32::MAX.to_le_bytes());
        bytes.extend_from_slice(&0i32.to_le_bytes());
        assert!(tml_decode(&bytes).is_err());
        assert!(tml_stats(&bytes[..]).is_err());
    }

    #[test]
    fn single_matrix_layout_is_bit_exact() {
        let bytes = tml_encode([(100i64, &m(&[(1, 2, 3)]))], false).unwrap();
        let mut expect = Vec::new();
        expect.extend_from_slice(b"TML1");
        expect.extend_from_slice(&1u16.to_le_bytes()); // version
        expect.extend_from_slice(&0u16.to_le_bytes()); // flags
        expect.extend_from_slice(&100i64.to_le_bytes()); // t
        expect.extend_from_slice(&0i32.to_le_bytes()); // del_count
        expect.extend_from_slice(&1i32.to_le_bytes()); // ins_count
        expect.extend_from_slice(&1u32.to_le_bytes()); // insert src
        expect.extend_from_slice(&2u32.to_le_bytes()); // insert dst
        expect.extend_from_slice(&3u64.to_le_bytes()); // value
        assert_eq!(bytes, expect);

        let decoded = tml_decode(&bytes).unwrap();
        assert_eq!(decoded, vec![(100, m(&[(1, 2, 3)]))]);
    }

    #[test]
    fn identical_matrices_produce_empty_delta() {
        let a = m(&[(1, 2, 3), (4, 5, 6)]);
        let bytes = tml_encode([(1i64, &a), (2i64, &a)], false).unwrap();
        // second entry: t(8) + counts(8) + no D/I + 2 values(16)
        let header = 8;
        let first = 8 + 8 + 16 + 16;
        let second = &bytes[header + first..];
        assert_eq!(second.len(), 8 + 8 + 16);
        assert_eq!(&second[8..12], &0i32.to_le_bytes()); // del_count 0
        assert_eq!(&second[12..16], &0i32.to_le_bytes()); // ins_count 0

        let decoded = tml_decode(&bytes).unwrap();
        assert_eq!(decoded[1].1, a);
    }

    #[test]
    fn delta_moves_between_coordinate_sets() {
        let a = m(&[(1, 1, 5), (2, 2, 7), (3, 3, 9)]);
        let b = m(&[(2, 2, 8), (4, 4, 1)]); // deletes (1,1),(3,3); inserts (4,4)
        let bytes = tml_encode([(10i64, &a), (11i64, &b)], false).unwrap();
        let decoded = tml_decode(&bytes).unwrap();
        assert_eq!(decoded, vec![(10, a), (11, b)]);
    }

    #[test]
    fn rejects_non_ascending_timestamps_on_encode() {
        let a = m(&[(1, 1, 1)]);
        let mut enc = TmlEncoder::new(Vec::new(), false).unwrap();
        enc.push(5, &a).unwrap();
        assert!(matches!(
            enc.push(5, &a),
            Err(TmlError::NonAscendingTimestamp { prev: 5, next: 5 })
        ));
    }

    #[test]
    fn bad_magic_and_version_are_rejected() {
        assert!(matches!(
            tml_decode(b"NOPE\x01\x00\x00\x00"),
            Err(TmlError::BadMagic { .. })
        ));
        let mut bytes = tml_encode([(1i64, &m(&[(1, 1, 1)]))], false).unwrap();
        bytes[4] = 9;
        assert!(matches!(
            tml_decode(&bytes),
            Err(TmlError::UnsupportedVersion(9))
        ));
    }

    #[test]
    fn delete_position_out_of_range_is_reported() {
        // craft: first entry inserts 1 coord; second deletes position 5
        let mut bytes = Vec::new();
        bytes.extend_from_slice(b"TML1");
        bytes.extend_from_slice(&1u16.to_le_bytes());
        bytes.extend_from_slice(&0u16.to_le_bytes());
        bytes.extend_from_slice(&1i64.to_le_bytes());
        bytes.extend_from_slice(&0i32.to_le_bytes());
        bytes.extend_from_slice(&1i32.to_le_bytes());
        bytes.extend_from_slice(&7u32.to_le_bytes());
        bytes.extend_from_slice(&8u32.to_le_bytes());
        bytes.extend_from_slice(&1u64.to_le_bytes());
        bytes.extend_from_slice(&2i64.to_le_bytes());
        bytes.extend_from_slice(&1i32.to_le_bytes()); // del_count 1
        bytes.extend_from_slice(&0i32.to_le_bytes());
        bytes.extend_from_slice(&5u32.to_le_bytes()); // position 5, size is 1
        let err = tml_decode(&bytes).unwrap_err();
        assert!(matches!(
            err,
            TmlError::DeleteOutOfRange {
                entry: 1,
                position: 5,
                size: 1,
                ..
            }
        ));
    }

    #[test]
    fn truncation_is_reported_with_position() {
        let bytes = tml_encode([(1i64, &m(&[(1, 2, 3), (4, 5, 6)]))], false).unwrap();
        let err = tml_decode(&bytes[..bytes.len() - 3]).unwrap_err();
        assert!(matches!(err, TmlError::Truncated { entry: 0, .. }));
    }

    #[test]
    fn negative_counts_are_rejected() {
        let mut bytes = Vec::new();
        bytes.extend_from_slice(b"TML1");
        bytes.extend_from_slice(&1u16.to_le_bytes());
        bytes.extend_from_slice(&0u16.to_le_bytes());
        bytes.extend_from_slice(&1i64.to_le_bytes());
        bytes.extend_from_slice(&(-1i32).to_le_bytes());
        bytes.extend_from_slice(&0i32.to_le_bytes());
        assert!(matches!(
            tml_decode(&bytes),
            Err(TmlError::NegativeCount { del: -1, .. })
        ));
    }

    #[test]
    fn crc_flag_detects_value_corruption() {
        let a = m(&[(1, 2, 3), (4, 5, 600)]);
        let mut bytes = tml_encode([(1i64, &a)], true).unwrap();
        assert_eq!(tml_decode(&bytes).unwrap()[0].1, a);
        let len = bytes.len();
        bytes[len - 6] ^= 0xFF; // flip inside the last value
        assert!(matches!(
            tml_decode(&bytes),
            Err(TmlError::CrcMismatch { entry: 0, .. })
        ));
        assert!(matches!(
            tml_stats(&bytes[..]),
            Err(TmlError::CrcMismatch { entry: 0, .. })
        ));
    }

    #[test]
    fn stats_empty_stream() {
        let bytes = tml_encode(std::iter::empty::<(i64, &TrafficMatrix)>(), false).unwrap();
        let stats = tml_stats(&bytes[..]).unwrap();
        assert_eq!(stats.entries, 0);
        assert_eq!(stats.total_packets, 0);
        assert_eq!(stats.total_bytes, 8);
        assert!(stats.bits_per_packet().is_infinite());
    }

    #[test]
    fn stats_single_entry_arithmetic() {
        let bytes = tml_encode([(1i64, &m(&[(9, 9, 1_000_000)]))], false).unwrap();
        let stats = tml_stats(&bytes[..]).unwrap();
        assert_eq!(stats.entries, 1);
        assert_eq!(stats.total_packets, 1_000_000);
        assert_eq!(stats.total_bytes, bytes.len() as u64);
        let expect = 8.0 * bytes.len() as f64 / 1.0e6;
        assert!((stats.bits_per_packet() - expect).abs() < 1e-12);
    }

    /// Random evolving matrix sequences: coordinates drift in and out.
    fn sequence_strategy() -> impl Strategy<Value = Vec<(i64, TrafficMatrix)>> {
        prop::collection::vec(
            prop::collection::vec((0u32..12, 0u32..12, 1u64..100), 0..15),
            1..25,
        )
        .prop_map(|steps| {
            steps
                .into_iter()
                .enumerate()
                .map(|(i, triples)| (i as i64 * 3, TrafficMatrix::from_triples(triples).unwrap()))
                .collect()
        })
    }

    proptest! {
        #[test]
        fn round_trip_is_lossless_and_re_encoding_is_identical(
            seq in sequence_strategy(),
            with_crc in any::<bool>(),
        ) {
            let bytes = tml_encode(seq.iter().map(|(t, m)| (*t, m)), with_crc).unwrap();
            let decoded = tml_decode(&bytes).unwrap();
            prop_assert_eq!(&decoded, &seq);
            for (_, matrix) in &decoded {
                prop_assert!(matrix.invariants_hold());
            }

            let re_encoded =
                tml_encode(decoded.iter().map(|(t, m)| (*t, m)), with_crc).unwrap();
            prop_assert_eq!(bytes, re_encoded);
        }

        #[test]
        fn persistent_coordinates_never_enter_the_delta(
            common in prop::collection::vec((0u32..8, 0u32..8, 1u64..50), 1..6),
            only_a in prop::collection::vec((8u32..12, 8u32..12, 1u64..50), 0..4),
            only_b in prop::collection::vec((12u32..16, 12u32..16, 1u64..50), 0..4),
        ) {
            let a = TrafficMatrix::from_triples(
                common.iter().chain(only_a.iter()).copied(),
            ).unwrap();
            let b = TrafficMatrix::from_triples(
                common.iter().chain(only_b.iter()).copied(),
            ).unwrap();
            let bytes = tml_encode([(0i64, &a), (1i64, &b)], false).unwrap();

            // parse the second entry's counts directly off the layout
            let second = 8 + 8 + 8 + 16 * a.nnz() as usize;
            let del = i32::from_le_bytes(bytes[second + 8..second + 12].try_into().unwrap());
            let ins = i32::from_le_bytes(bytes[second + 12..second + 16].try_into().unwrap());
            let shared = a.entries().iter().filter(|(c, _)| b.get(*c).is_some()).count();
            prop_assert_eq!(del as u64, a.nnz() - shared as u64);
            prop_assert_eq!(ins as u64, b.nnz() - shared as u64);
        }

        #[test]
        fn stats_matches_decode_and_meta(seq in sequence_strategy(), with_crc in any::<bool>()) {
            let bytes = tml_encode(seq.iter().map(|(t, m)| (*t, m)), with_crc).unwrap();
            let stats = tml_stats(&bytes[..]).unwrap();
            prop_assert_eq!(stats.entries, seq.len() as u64);
            prop_assert_eq!(stats.total_bytes, bytes.len() as u64);
            let expect: u128 = seq.iter().map(|(_, m)| m.valid_packets() as u128).sum();
            prop_assert_eq!(stats.total_packets, expect);
        }

    }

    #[test]
    fn out_of_order_inserts_are_rejected() {
        let mut bytes = Vec::new();
        bytes.extend_from_slice(b"TML1");
        bytes.extend_from_slice(&1u16.to_le_bytes());
        bytes.extend_from_slice(&0u16.to_le_bytes());
        bytes.extend_from_slice(&1i64.to_le_bytes());
        bytes.extend_from_slice(&0i32.to_le_bytes());
        bytes.extend_from_slice(&2i32.to_le_bytes()); // two inserts
        bytes.extend_from_slice(&5u32.to_le_bytes()); // (5, 5)
        bytes.extend_from_slice(&5u32.to_le_bytes());
        bytes.extend_from_slice(&1u32.to_le_bytes()); // (1, 1): out of order
        bytes.extend_from_slice(&1u32.to_le_bytes());
        bytes.extend_from_slice(&1u64.to_le_bytes());
        bytes.extend_from_slice(&1u64.to_le_bytes());
        assert!(matches!(
            tml_decode(&bytes),
            Err(TmlError::InsertNotAscending { entry: 0, .. })
        ));
    }

    #[test]
    fn reinserting_a_retained_coordinate_is_rejected() {
        // entry 0 inserts (3,3); entry 1 keeps it (no delete) and inserts
        // (3,3) again
        let mut bytes = Vec::new();
        bytes.extend_from_slice(b"TML1");
        bytes.extend_from_slice(&1u16.to_le_bytes());
        bytes.extend_from_slice(&0u16.to_le_bytes());
        bytes.extend_from_slice(&1i64.to_le_bytes());
        bytes.extend_from_slice(&0i32.to_le_bytes());
        bytes.extend_from_slice(&1i32.to_le_bytes());
        bytes.extend_from_slice(&3u32.to_le_bytes());
        bytes.extend_from_slice(&3u32.to_le_bytes());
        bytes.extend_from_slice(&4u64.to_le_bytes());
        bytes.extend_from_slice(&2i64.to_le_bytes());
        bytes.extend_from_slice(&0i32.to_le_bytes());
        bytes.extend_from_slice(&1i32.to_le_bytes());
        bytes.extend_from_slice(&3u32.to_le_bytes());
        bytes.extend_from_slice(&3u32.to_le_bytes());
        bytes.extend_from_slice(&4u64.to_le_bytes());
        bytes.extend_from_slice(&4u64.to_le_bytes());
        assert!(matches!(
            tml_decode(&bytes),
            Err(TmlError::InsertAlreadyPresent {
                entry: 1,
                src: 3,
                dst: 3,
                ..
            })
        ));
    }

    #[test]
    fn zero_value_is_rejected() {
        let mut bytes = Vec::new();
        bytes.extend_from_slice(b"TML1");
        bytes.extend_from_slice(&1u16.to_le_bytes());
        bytes.extend_from_slice(&0u16.to_le_bytes());
        bytes.extend_from_slice(&1i64.to_le_bytes());
        bytes.extend_from_slice(&0i32.to_le_bytes());
        bytes.extend_from_slice(&1i32.to_le_bytes());
        bytes.extend_from_slice(&3u32.to_le_bytes());
        bytes.extend_from_slice(&3u32.to_le_bytes());
        bytes.extend_from_slice(&0u64.to_le_bytes()); // explicit zero
        assert!(matches!(
            tml_decode(&bytes),
            Err(TmlError::ZeroValue { entry: 0, .. })
        ));
        assert!(matches!(
            tml_stats(&bytes[..]),
            Err(TmlError::ZeroValue { entry: 0, .. })
        ));
    }
}
