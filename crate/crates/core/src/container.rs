//! On-disk container.
//!
//! All integers are little-endian. Layout:
//!
//! ```text
//! header     magic "SAGE" | version u8 | flags u16 | consensus_len u64
//!            | consensus SHA-256 [32] | k u16 | read_count u64
//!            | fixed_read_len u32 (0 = variable) | partition_count u16
//!            | max_segments u8 | order_width u8 | 4 x class scheme
//!            | [embedded consensus: u64 byte length + packed record]
//!            | SHA-256 of all preceding header bytes [32]
//! table      partition_count x { start u64 | end u64 | read_count u64
//!            | 8 x (offset u64 | byte_len u64 | pad_bits u8) | crc32 u32 }
//!            | crc32 of the table u32
//! blobs      per partition, its 8 streams back to back
//! sidecar    (passthrough only) byte_len u64 | crc32 u32 | bytes
//! ```
//!
//! A class scheme is `guided u8 | K u8 | K widths | K ranks`.

use std::fs;
use std::io::Write;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::align::Alignment;
use crate::bits::BitWriter;
use crate::decode::PartitionInput;
use crate::encode::{Layout, Schemes};
use crate::error::{Error, Result, StreamId};
use crate::seqio::{pack_bases, read_packed, unpack_bases, write_packed, PackMode};
use crate::tune::ClassScheme;

pub const MAGIC: &[u8; 4] = b"SAGE";
pub const VERSION: u8 = 1;

pub mod flags {
    pub const LONG_READ: u16 = 1;
    pub const PRESERVE_ORDER: u16 = 1 << 1;
    pub const HAS_LITERALS: u16 = 1 << 2;
    pub const PASSTHROUGH: u16 = 1 << 3;
    pub const EMBEDDED_CONSENSUS: u16 = 1 << 4;
    pub const FIXED_LENGTH: u16 = 1 << 5;
    pub const CHIMERIC: u16 = 1 << 6;
    pub const INDEL_LENGTHS: u16 = 1 << 7;
    pub const MERGED_MBTA: u16 = 1 << 8;
    pub const CORNER_BIT: u16 = 1 << 9;
    pub const KNOWN: u16 = (1 << 10) - 1;
}

const STREAM_ENTRY_LEN: usize = 8 + 8 + 1;
/// Serialized size of one partition table entry.
pub const TABLE_ENTRY_LEN: usize = 8 + 8 + 8 + StreamId::COUNT * STREAM_ENTRY_LEN + 4;

pub fn consensus_digest(consensus: &[u8]) -> [u8; 32] {
    Sha256::digest(consensus).into()
}

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Header {
    pub layout: Layout,
    pub has_literals: bool,
    pub passthrough: bool,
    pub consensus_len: u64,
    pub consensus_hash: [u8; 32],
    pub k: u16,
    pub read_count: u64,
    pub partition_count: u16,
    pub schemes: Schemes,
    pub embedded_consensus: Option<Vec<u8>>,
}

impl Header {
    pub fn flags(&self) -> u16 {
        let l = &self.layout;
        let mut f = 0;
        let mut set = |cond: bool, bit: u16| {
            if cond {
                f |= bit;
            }
        };
        set(l.long_read, flags::LONG_READ);
        set(l.preserve_order, flags::PRESERVE_ORDER);
        set(self.has_literals, flags::HAS_LITERALS);
        set(self.passthrough, flags::PASSTHROUGH);
        set(self.embedded_consensus.is_some(), flags::EMBEDDED_CONSENSUS);
        set(l.fixed_read_len.is_some(), flags::FIXED_LENGTH);
        set(l.chimeric, flags::CHIMERIC);
        set(l.indel_lengths, flags::INDEL_LENGTHS);
        set(l.merged, flags::MERGED_MBTA);
        set(l.corner_bit, flags::CORNER_BIT);
        f
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut out = Vec::with_capacity(160);
        out.extend_from_slice(MAGIC);
        out.push(VERSION);
        out.extend_from_slice(&self.flags().to_le_bytes());
        out.extend_from_slice(&self.consensus_len.to_le_bytes());
        out.extend_from_slice(&self.consensus_hash);
        out.extend_from_slice(&self.k.to_le_bytes());
        out.extend_from_slice(&self.read_count.to_le_bytes());
        out.extend_from_slice(&self.layout.fixed_read_len.unwrap_or(0).to_le_bytes());
        out.extend_from_slice(&self.partition_count.to_le_bytes());
        out.push(self.layout.max_segments);
        out.push(self.layout.order_width);
        for s in [&self.schemes.mapos, &self.schemes.mmpos, &self.schemes.count, &self.schemes.side] {
            s.to_bytes(&mut out);
        }
        if let Some(cons) = &self.embedded_consensus {
            let mode = if cons.contains(&b'N') { PackMode::ThreeBit } else { PackMode::TwoBit };
            let mut rec = Vec::new();
            write_packed(&mut rec, &pack_bases(cons, mode)?)?;
            out.extend_from_slice(&(rec.len() as u64).to_le_bytes());
            out.extend_from_slice(&rec);
        }
        let digest = Sha256::digest(&out);
        out.extend_from_slice(&digest);
        Ok(out)
    }

    /// Parse a header; returns it with the number of bytes consumed.
    pub fn parse(bytes: &[u8]) -> Result<(Self, usize)> {
        let mut c = Cursor::new(bytes);
        if c.take(4)? != MAGIC {
            return Err(Error::BadMagic);
        }
        let version = c.u8()?;
        if version != VERSION {
            return Err(Error::Version {
                found: version,
                supported: VERSION,
            });
        }
        let f = c.u16()?;
        if f & !flags::KNOWN != 0 {
            return Err(Error::Format(format!("unknown header flags {:#06x}", f & !flags::KNOWN)));
        }
        let consensus_len = c.u64()?;
        let consensus_hash: [u8; 32] = c.take(32)?.try_into().expect("32 bytes");
        let k = c.u16()?;
        let read_count = c.u64()?;
        let fixed = c.u32()?;
        let partition_count = c.u16()?;
        let max_segments = c.u8()?;
        let order_width = c.u8()?;
        let mut scheme = || -> Result<ClassScheme> {
            let (s, used) = ClassScheme::from_bytes(&bytes[c.pos..])?;
            c.pos += used;
            Ok(s)
        };
        let schemes = Schemes {
            mapos: scheme()?,
            mmpos: scheme()?,
            count: scheme()?,
            side: scheme()?,
        };
        let embedded_consensus = if f & flags::EMBEDDED_CONSENSUS != 0 {
            let n = c.u64()? as usize;
            let mut rec = c.take(n)?;
            let packed = read_packed(&mut rec)?.ok_or_else(|| Error::Format("empty embedded consensus".into()))?;
            Some(unpack_bases(&packed)?)
        } else {
            None
        };
        let body_end = c.pos;
        let digest = c.take(32)?;
        if digest != Sha256::digest(&bytes[..body_end]).as_slice() {
            return Err(Error::Format("header digest mismatch".into()));
        }
        let has = |bit: u16| f & bit != 0;
        let layout = Layout {
            long_read: has(flags::LONG_READ),
            indel_lengths: has(flags::INDEL_LENGTHS),
            merged: has(flags::MERGED_MBTA),
            chimeric: has(flags::CHIMERIC),
            corner_bit: has(flags::CORNER_BIT),
            preserve_order: has(flags::PRESERVE_ORDER),
            fixed_read_len: has(flags::FIXED_LENGTH).then_some(fixed),
            order_width,
            max_segments,
        };
        if partition_count == 0 && read_count != 0 {
            return Err(Error::Format("reads present but no partitions".into()));
        }
        if let Some(cons) = &embedded_consensus {
            if cons.len() as u64 != consensus_len || consensus_digest(cons) != consensus_hash {
                return Err(Error::Format("embedded consensus does not match its digest".into()));
            }
        }
        Ok((
            Self {
                layout,
                has_literals: has(flags::HAS_LITERALS),
                passthrough: has(flags::PASSTHROUGH),
                consensus_len,
                consensus_hash,
                k,
                read_count,
                partition_count,
                schemes,
                embedded_consensus,
            },
            c.pos,
        ))
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct StreamSpan {
    /// Absolute file offset.
    pub offset: u64,
    pub byte_len: u64,
    pub pad_bits: u8,
}

impl StreamSpan {
    pub fn bit_len(&self) -> u64 {
        self.byte_len * 8 - self.pad_bits as u64
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartitionEntry {
    pub start: u64,
    pub end: u64,
    pub read_count: u64,
    pub streams: [StreamSpan; StreamId::COUNT],
    pub crc: u32,
}

impl PartitionEntry {
    pub fn stream_bits(&self, id: StreamId) -> u64 {
        self.streams[id.index()].bit_len()
    }

    fn blob_range(&self) -> (u64, u64) {
        let start = self.streams[0].offset;
        let len: u64 = self.streams.iter().map(|s| s.byte_len).sum();
        (start, start + len)
    }
}

/// Encoded content of one partition before layout in a file.
#[derive(Debug, Clone)]
pub struct PartitionBlob {
    pub start: u64,
    pub end: u64,
    pub read_count: u64,
    pub streams: [BitWriter; StreamId::COUNT],
}

/// A container held as its file bytes plus the parsed header and table.
#[derive(Debug, Clone)]
pub struct Container {
    pub header: Header,
    pub partitions: Vec<PartitionEntry>,
    sidecar: Option<(u64, u64, u32)>,
    bytes: Vec<u8>,
}

impl Container {
    /// Lay out header, table, blobs, and optional sidecar.
    pub fn build(mut header: Header, blobs: &[PartitionBlob], sidecar: Option<&[u8]>) -> Result<Self> {
        header.partition_count = u16::try_from(blobs.len())
            .map_err(|_| Error::Format(format!("{} partitions exceed the format limit", blobs.len())))?;
        header.passthrough = sidecar.is_some();
        let head = header.to_bytes()?;
        let mut offset = (head.len() + blobs.len() * TABLE_ENTRY_LEN + 4) as u64;
        let mut entries = Vec::with_capacity(blobs.len());
        for b in blobs {
            let mut streams = [StreamSpan::default(); StreamId::COUNT];
            let mut crc = crc32fast::Hasher::new();
            for (span, w) in streams.iter_mut().zip(&b.streams) {
                let bytes = w.as_bytes();
                *span = StreamSpan {
                    offset,
                    byte_len: bytes.len() as u64,
                    pad_bits: (bytes.len() as u64 * 8 - w.bit_len()) as u8,
                };
                crc.update(bytes);
                offset += bytes.len() as u64;
            }
            entries.push(PartitionEntry {
                start: b.start,
                end: b.end,
                read_count: b.read_count,
                streams,
                crc: crc.finalize(),
            });
        }
        let mut out = head;
        let table_start = out.len();
        for e in &entries {
            write_entry(&mut out, e);
        }
        let table_crc = crc32fast::hash(&out[table_start..]);
        out.extend_from_slice(&table_crc.to_le_bytes());
        for b in blobs {
            for w in &b.streams {
                out.extend_from_slice(w.as_bytes());
            }
        }
        let sidecar_span = sidecar.map(|s| {
            out.extend_from_slice(&(s.len() as u64).to_le_bytes());
            let crc = crc32fast::hash(s);
            out.extend_from_slice(&crc.to_le_bytes());
            let start = out.len() as u64;
            out.extend_from_slice(s);
            (start, s.len() as u64, crc)
        });
        Ok(Self {
            header,
            partitions: entries,
            sidecar: sidecar_span,
            bytes: out,
        })
    }

    /// Parse and validate header, table, and bounds. Partition checksums are
    /// checked when a partition is opened, so one bad partition does not
    /// hide the others.
    pub fn from_bytes(bytes: Vec<u8>) -> Result<Self> {
        let (header, used) = Header::parse(&bytes)?;
        let p = header.partition_count as usize;
        let table_end = used + p * TABLE_ENTRY_LEN;
        if bytes.len() < table_end + 4 {
            return Err(Error::Format("truncated partition table".into()));
        }
        let table_crc = u32::from_le_bytes(bytes[table_end..table_end + 4].try_into().expect("4 bytes"));
        if crc32fast::hash(&bytes[used..table_end]) != table_crc {
            return Err(Error::Format("partition table checksum mismatch".into()));
        }
        let mut c = Cursor::new(&bytes);
        c.pos = used;
        let mut partitions = Vec::with_capacity(p);
        let mut expect = (table_end + 4) as u64;
        let mut total_reads = 0u64;
        let mut prev_end = 0u64;
        for i in 0..p {
            let e = read_entry(&mut c)?;
            for s in &e.streams {
                if s.offset != expect || s.pad_bits > 7 || (s.byte_len == 0 && s.pad_bits != 0) {
                    return Err(Error::Format(format!("partition {i}: inconsistent stream layout")));
                }
                expect += s.byte_len;
            }
            if e.start > e.end || e.start < prev_end || e.end > header.consensus_len {
                return Err(Error::Format(format!("partition {i}: bad consensus range")));
            }
            prev_end = e.end;
            total_reads += e.read_count;
            partitions.push(e);
        }
        if expect > bytes.len() as u64 {
            return Err(Error::Format(format!(
                "truncated: blobs end at byte {expect}, file has {}",
                bytes.len()
            )));
        }
        if total_reads != header.read_count {
            return Err(Error::Format(format!(
                "partition table holds {total_reads} reads, header says {}",
                header.read_count
            )));
        }
        let mut sidecar = None;
        let mut end = expect as usize;
        if header.passthrough {
            let mut c = Cursor::new(&bytes);
            c.pos = end;
            let len = c.u64().map_err(|_| Error::Format("truncated sidecar".into()))?;
            let crc = c.u32().map_err(|_| Error::Format("truncated sidecar".into()))?;
            let start = c.pos as u64;
            if start + len > bytes.len() as u64 {
                return Err(Error::Format("truncated sidecar".into()));
            }
            sidecar = Some((start, len, crc));
            end = (start + len) as usize;
        }
        if end != bytes.len() {
            return Err(Error::Format(format!("{} trailing bytes after container", bytes.len() - end)));
        }
        Ok(Self {
            header,
            partitions,
            sidecar,
            bytes,
        })
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.bytes
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.bytes
    }

    pub fn len(&self) -> usize {
        self.bytes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bytes.is_empty()
    }

    pub fn verify_partition(&self, i: usize) -> Result<()> {
        let e = &self.partitions[i];
        let (a, b) = e.blob_range();
        if crc32fast::hash(&self.bytes[a as usize..b as usize]) != e.crc {
            return Err(Error::Checksum { partition: i });
        }
        Ok(())
    }

    /// Verified stream readers for partition `i`.
    pub fn partition_input(&self, i: usize) -> Result<PartitionInput<'_>> {
        self.verify_partition(i)?;
        let e = &self.partitions[i];
        let mut streams = [(&[][..], 0u64); StreamId::COUNT];
        for (slot, s) in streams.iter_mut().zip(&e.streams) {
            let a = s.offset as usize;
            *slot = (&self.bytes[a..a + s.byte_len as usize], s.bit_len());
        }
        Ok(PartitionInput {
            streams,
            start: e.start,
            read_count: e.read_count,
        })
    }

    pub fn sidecar(&self) -> Result<Option<&[u8]>> {
        match self.sidecar {
            None => Ok(None),
            Some((start, len, crc)) => {
                let s = &self.bytes[start as usize..(start + len) as usize];
                if crc32fast::hash(s) != crc {
                    return Err(Error::Format("sidecar checksum mismatch".into()));
                }
                Ok(Some(s))
            }
        }
    }

    /// Payload bits across all partitions.
    pub fn payload_bits(&self) -> u64 {
        self.partitions
            .iter()
            .flat_map(|e| e.streams.iter().map(|s| s.bit_len()))
            .sum()
    }
}

fn write_entry(out: &mut Vec<u8>, e: &PartitionEntry) {
    out.extend_from_slice(&e.start.to_le_bytes());
    out.extend_from_slice(&e.end.to_le_bytes());
    out.extend_from_slice(&e.read_count.to_le_bytes());
    for s in &e.streams {
        out.extend_from_slice(&s.offset.to_le_bytes());
        out.extend_from_slice(&s.byte_len.to_le_bytes());
        out.push(s.pad_bits);
    }
    out.extend_from_slice(&e.crc.to_le_bytes());
}

fn read_entry(c: &mut Cursor<'_>) -> Result<PartitionEntry> {
    let start = c.u64()?;
    let end = c.u64()?;
    let read_count = c.u64()?;
    let mut streams = [StreamSpan::default(); StreamId::COUNT];
    for s in streams.iter_mut() {
        *s = StreamSpan {
            offset: c.u64()?,
            byte_len: c.u64()?,
            pad_bits: c.u8()?,
        };
    }
    Ok(PartitionEntry {
        start,
        end,
        read_count,
        streams,
        crc: c.u32()?,
    })
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn new(bytes: &'a [u8]) -> Self {
        Self { bytes, pos: 0 }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::Format(format!("truncated at byte {}", self.pos)))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().expect("2 bytes")))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

pub fn write_container(path: &Path, container: &Container) -> Result<()> {
    let mut f = fs::File::create(path)?;
    f.write_all(container.as_bytes())?;
    f.sync_all()?;
    Ok(())
}

pub fn read_container(path: &Path) -> Result<Container> {
    Container::from_bytes(fs::read(path)?)
}

/// Reads assigned to one partition, in stream order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartitionAssignment {
    pub start: u64,
    pub end: u64,
    /// Indices into the ordered alignment list.
    pub members: Vec<usize>,
}

/// Split the consensus into `p` contiguous ranges holding about the same
/// number of mapped reads each. `ordered` must list mapped alignments by
/// ascending primary position, then literal ones; literal reads are dealt
/// round-robin.
pub fn partition_reads(ordered: &[Alignment], p: usize, consensus_len: u64) -> Vec<PartitionAssignment> {
    let positions: Vec<Option<u64>> = ordered.iter().map(Alignment::primary_pos).collect();
    partition_positions(&positions, p, consensus_len)
}

/// [`partition_reads`] over primary positions (`None` for literal reads).
pub fn partition_positions(ordered: &[Option<u64>], p: usize, consensus_len: u64) -> Vec<PartitionAssignment> {
    let p = p.max(1);
    let mapped: Vec<u64> = ordered.iter().map_while(|&a| a).collect();
    let m = mapped.len();
    let target = |part: usize| ((part + 1) * m).div_ceil(p);
    let mut parts: Vec<PartitionAssignment> = vec![PartitionAssignment {
        start: 0,
        end: consensus_len,
        members: Vec::new(),
    }];
    for (i, &pos) in mapped.iter().enumerate() {
        let cur = parts.len() - 1;
        if parts.len() < p && i >= target(cur) && i > 0 && pos > mapped[i - 1] {
            parts[cur].end = pos;
            parts.push(PartitionAssignment {
                start: pos,
                end: consensus_len,
                members: Vec::new(),
            });
        }
        parts.last_mut().expect("nonempty").members.push(i);
    }
    while parts.len() < p {
        parts.push(PartitionAssignment {
            start: consensus_len,
            end: consensus_len,
            members: Vec::new(),
        });
    }
    for (j, i) in (m..ordered.len()).enumerate() {
        parts[j % p].members.push(i);
    }
    parts
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::align::{AlignStatus, Segment};

    fn mapped_at(pos: u64) -> Alignment {
        Alignment {
            segments: vec![Segment {
                cons_pos: pos,
                rev: false,
                read_span: 0..10,
                mismatches: vec![],
            }],
            clip_head: vec![],
            clip_tail: vec![],
            status: AlignStatus::Mapped,
        }
    }

    fn sample_header(p: u16) -> Header {
        Header {
            layout: Layout::default(),
            has_literals: false,
            passthrough: false,
            consensus_len: 1000,
            consensus_hash: consensus_digest(b"ACGT"),
            k: 15,
            read_count: 0,
            partition_count: p,
            schemes: Schemes::fixed_defaults(),
            embedded_consensus: None,
        }
    }

    #[test]
    fn single_partition_covers_everything() {
        let alns: Vec<_> = [5, 9, 400].iter().map(|&p| mapped_at(p)).collect();
        let parts = partition_reads(&alns, 1, 1000);
        assert_eq!(parts.len(), 1);
        assert_eq!((parts[0].start, parts[0].end), (0, 1000));
        assert_eq!(parts[0].members, vec![0, 1, 2]);
    }

    #[test]
    fn clustered_reads_balance_by_count() {
        let mut alns: Vec<_> = (0..300).map(|i| mapped_at(i)).collect();
        alns.extend((0..100).map(|i| mapped_at(10_000 + i * 900)));
        let parts = partition_reads(&alns, 4, 100_000);
        for p in &parts {
            assert_eq!(p.members.len(), 100);
        }
        assert!(parts[0].end - parts[0].start < parts[3].end - parts[3].start);
        assert_eq!(parts[3].end, 100_000);
        for w in parts.windows(2) {
            assert_eq!(w[0].end, w[1].start);
        }
    }

    #[test]
    fn literals_round_robin() {
        let mut alns: Vec<_> = (0..8).map(|i| mapped_at(i * 10)).collect();
        alns.extend((0..5).map(|_| Alignment::literal(b"ACGT")));
        let parts = partition_reads(&alns, 2, 100);
        assert_eq!(parts[0].members, vec![0, 1, 2, 3, 8, 10, 12]);
        assert_eq!(parts[1].members, vec![4, 5, 6, 7, 9, 11]);
    }

    #[test]
    fn empty_container_roundtrip() {
        let c = Container::build(sample_header(0), &[], None).unwrap();
        let back = Container::from_bytes(c.as_bytes().to_vec()).unwrap();
        assert_eq!(back.header, c.header);
        assert!(back.partitions.is_empty());
    }

    #[test]
    fn header_roundtrip_with_embedded_consensus() {
        let mut h = sample_header(1);
        let cons = b"ACGTNACGT".to_vec();
        h.consensus_len = cons.len() as u64;
        h.consensus_hash = consensus_digest(&cons);
        h.embedded_consensus = Some(cons);
        h.layout.fixed_read_len = Some(150);
        h.layout.preserve_order = true;
        h.layout.order_width = 7;
        let bytes = h.to_bytes().unwrap();
        let (back, used) = Header::parse(&bytes).unwrap();
        assert_eq!(used, bytes.len());
        assert_eq!(back, h);
    }

    #[test]
    fn bad_magic_and_version() {
        let bytes = sample_header(0).to_bytes().unwrap();
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(Header::parse(&bad), Err(Error::BadMagic)));
        let mut newer = bytes;
        newer[4] = VERSION + 1;
        assert!(matches!(Header::parse(&newer), Err(Error::Version { found, .. }) if found == VERSION + 1));
    }

    #[test]
    fn truncation_detected() {
        let mut w = BitWriter::new();
        w.write_bits(0xABCD, 16);
        let mut streams: [BitWriter; StreamId::COUNT] = Default::default();
        streams[3] = w;
        let blob = PartitionBlob {
            start: 0,
            end: 1000,
            read_count: 0,
            streams,
        };
        let c = Container::build(sample_header(1), &[blob], None).unwrap();
        let mut bytes = c.into_bytes();
        bytes.pop();
        assert!(matches!(Container::from_bytes(bytes), Err(Error::Format(m)) if m.contains("truncated")));
    }
}
