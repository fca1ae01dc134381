//! Single-pass streaming decoder.
//!
//! Decoding is split the way the encoder's layout suggests: a scan unit owns
//! the guide/value streams (MaPGA, MaPA, MPGA, MPA) and turns guide codes
//! into values, while a reconstruction unit owns MBTA, the read flags, the
//! literal and order streams, and walks the consensus through a 150-base
//! window. When the reconstruction unit meets an indel sentinel it asks the
//! scan unit for the block length. Every reader only moves forward.

use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::align::MismatchKind;
use crate::bits::{BitReader, ReaderStats, SharedTrace};
use crate::encode::{
    unzigzag, Layout, SchemeKind, Schemes, CORNER_HEAD, CORNER_N_READ, CORNER_TAIL, MAX_SEGMENTS, TYPE_DEL,
    TYPE_INS, TYPE_SUB,
};
use crate::error::{Error, Result, StreamId};
use crate::seqio::{reverse_complement_in_place, CODE_TO_BASE};
use crate::tune::BitLenHistogram;

/// Bases held by the consensus window.
pub const WINDOW_BASES: usize = 150;

/// Largest single read any stream may perform.
pub const MAX_LOOKAHEAD_BITS: u32 = 64;

/// Byte slices and exact bit lengths of one partition's streams.
#[derive(Debug, Clone, Copy)]
pub struct PartitionInput<'a> {
    pub streams: [(&'a [u8], u64); StreamId::COUNT],
    /// Consensus position the first matching-position delta is relative to.
    pub start: u64,
    pub read_count: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DecodedRead {
    pub bases: Vec<u8>,
    /// Original index (preserve-order containers only).
    pub index: Option<u64>,
}

/// Distributions seen while decoding, for statistics output.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DecodeStats {
    pub matching_deltas: BitLenHistogram,
    pub mismatch_deltas: BitLenHistogram,
    /// Reads per real mismatch count (artificial corner entries excluded).
    pub mismatch_counts: BTreeMap<u64, u64>,
    /// Indel blocks per stream-level block length.
    pub indel_lengths: BTreeMap<u32, u64>,
}

impl DecodeStats {
    pub fn merge(&mut self, other: &DecodeStats) {
        self.matching_deltas.merge(&other.matching_deltas);
        self.mismatch_deltas.merge(&other.mismatch_deltas);
        for (k, v) in &other.mismatch_counts {
            *self.mismatch_counts.entry(*k).or_default() += v;
        }
        for (k, v) in &other.indel_lengths {
            *self.indel_lengths.entry(*k).or_default() += v;
        }
    }
}

/// Per-partition record of how the streams were accessed.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AccessReport {
    pub streams: [ReaderStats; StreamId::COUNT],
    pub window_loads: u64,
    /// Longest read buffer the decoder needed.
    pub peak_read_len: usize,
}

/// Fails unless every stream was read strictly forward with reads of at
/// most [`MAX_LOOKAHEAD_BITS`] bits.
pub fn audit_streaming(report: &AccessReport) -> Result<()> {
    for (id, s) in StreamId::ALL.iter().zip(&report.streams) {
        if s.backward_seeks > 0 {
            return Err(Error::Audit(format!("{id}: {} backward seeks", s.backward_seeks)));
        }
        if s.max_lookahead > MAX_LOOKAHEAD_BITS {
            return Err(Error::Audit(format!(
                "{id}: single read of {} bits exceeds {MAX_LOOKAHEAD_BITS}",
                s.max_lookahead
            )));
        }
    }
    Ok(())
}

struct ScanUnit<'a> {
    mapga: BitReader<'a>,
    mapa: BitReader<'a>,
    mpga: BitReader<'a>,
    mpa: BitReader<'a>,
    schemes: &'a Schemes,
    last_pos: u64,
}

impl<'a> ScanUnit<'a> {
    fn value(&mut self, kind: SchemeKind) -> Result<u64> {
        let scheme = self.schemes.get(kind);
        let (guide, payload) = match kind {
            SchemeKind::MatchPos => (&mut self.mapga, &mut self.mapa),
            _ => (&mut self.mpga, &mut self.mpa),
        };
        let class = if scheme.is_guided() {
            let start = guide.position();
            let mut rank = 0u32;
            while guide.read_bit()? {
                rank += 1;
                if rank as usize >= scheme.num_classes() {
                    return Err(Error::corrupt(guide.stream(), start, "guide code with no class mapping"));
                }
            }
            scheme
                .class_of_rank(rank)
                .ok_or_else(|| Error::corrupt(guide.stream(), start, "guide code with no class mapping"))?
        } else {
            0
        };
        payload.read_bits(scheme.width(class))
    }

    /// Block length of an indel the reconstruction unit just detected.
    fn indel_len(&mut self, layout: &Layout) -> Result<u32> {
        if !layout.indel_lengths || self.mpga.read_bit()? {
            return Ok(1);
        }
        let at = self.mpa.position();
        let len = self.mpa.read_bits(8)? as u32;
        if len < 2 {
            return Err(Error::corrupt(StreamId::MPA, at, format!("indel block length {len} below 2")));
        }
        Ok(len)
    }
}

/// Sequential view of the consensus through a fixed-size register.
struct ConsensusWindow<'a> {
    consensus: &'a [u8],
    buf: [u8; WINDOW_BASES],
    start: usize,
    len: usize,
    loads: u64,
}

impl<'a> ConsensusWindow<'a> {
    fn new(consensus: &'a [u8]) -> Self {
        Self {
            consensus,
            buf: [0; WINDOW_BASES],
            start: 0,
            len: 0,
            loads: 0,
        }
    }

    fn load(&mut self, pos: usize) -> bool {
        if pos >= self.consensus.len() {
            return false;
        }
        let end = (pos + WINDOW_BASES).min(self.consensus.len());
        self.len = end - pos;
        self.buf[..self.len].copy_from_slice(&self.consensus[pos..end]);
        self.start = pos;
        self.loads += 1;
        true
    }

    fn base(&mut self, pos: usize) -> Option<u8> {
        if !(self.start..self.start + self.len).contains(&pos) && !self.load(pos) {
            return None;
        }
        Some(self.buf[pos - self.start])
    }

    fn copy(&mut self, mut pos: usize, mut n: usize, out: &mut Vec<u8>) -> bool {
        while n > 0 {
            if !(self.start..self.start + self.len).contains(&pos) && !self.load(pos) {
                return false;
            }
            let from = pos - self.start;
            let take = n.min(self.len - from);
            out.extend_from_slice(&self.buf[from..from + take]);
            pos += take;
            n -= take;
        }
        true
    }
}

struct ReconstructUnit<'a> {
    mbta: BitReader<'a>,
    rflags: BitReader<'a>,
    literals: BitReader<'a>,
    order: BitReader<'a>,
    window: ConsensusWindow<'a>,
}

fn decode_base2(r: &mut BitReader<'_>) -> Result<u8> {
    Ok(CODE_TO_BASE[r.read_bits(2)? as usize])
}

fn decode_base3(r: &mut BitReader<'_>) -> Result<u8> {
    let at = r.position();
    match r.read_bits(3)? {
        c @ 0..=3 => Ok(CODE_TO_BASE[c as usize]),
        4 => Ok(b'N'),
        c => Err(Error::corrupt(r.stream(), at, format!("3-bit base code {c:03b}"))),
    }
}

/// Per-segment walk over the consensus.
struct SegmentCursor {
    pos: u64,
    rev: bool,
    /// Index in the read buffer where this segment's bases begin.
    out_start: usize,
    /// Consensus offset (relative to `pos`) of the next base to copy.
    cursor: u64,
}

/// Everything decoded for one read, filled progressively.
struct ReadState {
    out: Vec<u8>,
    len: u64,
    tail_clip: Vec<u8>,
    head_len: u64,
}

fn read_clip(recon: &mut ReconstructUnit<'_>) -> Result<Vec<u8>> {
    let n = recon.mbta.read_bits(16)? as usize;
    let mut clip = Vec::with_capacity(n);
    for _ in 0..n {
        clip.push(decode_base2(&mut recon.mbta)?);
    }
    Ok(clip)
}

/// Corner payload after its subtype. Returns true when the read is complete
/// (whole read stored in the literal stream).
fn read_corner(recon: &mut ReconstructUnit<'_>, subtype: u64, st: &mut ReadState) -> Result<bool> {
    if subtype == CORNER_N_READ {
        for _ in 0..st.len {
            let b = decode_base3(&mut recon.literals)?;
            st.out.push(b);
        }
        return Ok(true);
    }
    if subtype & CORNER_HEAD != 0 {
        let clip = read_clip(recon)?;
        st.head_len = clip.len() as u64;
        st.out.extend_from_slice(&clip);
    }
    if subtype & CORNER_TAIL != 0 {
        st.tail_clip = read_clip(recon)?;
    }
    Ok(false)
}

fn copy_cons(
    recon: &mut ReconstructUnit<'_>,
    seg: &mut SegmentCursor,
    upto: u64,
    out: &mut Vec<u8>,
    span: Option<u64>,
    at: (StreamId, u64),
) -> Result<()> {
    if upto < seg.cursor {
        return Err(Error::corrupt(at.0, at.1, format!("mismatch offset {upto} behind cursor {}", seg.cursor)));
    }
    let n = (upto - seg.cursor) as usize;
    if let Some(span) = span {
        if (out.len() - seg.out_start + n) as u64 > span {
            return Err(Error::corrupt(at.0, at.1, "mismatch beyond segment span"));
        }
    }
    if !recon.window.copy((seg.pos + seg.cursor) as usize, n, out) {
        return Err(Error::corrupt(at.0, at.1, "segment runs past the consensus end"));
    }
    seg.cursor = upto;
    Ok(())
}

/// Decode one read: the scan unit supplies counts and positions, the
/// reconstruction unit applies bases and types, asking back for indel
/// lengths when a sentinel shows up.
fn decode_next_read(
    scan: &mut ScanUnit<'_>,
    recon: &mut ReconstructUnit<'_>,
    layout: &Layout,
    mut stats: Option<&mut DecodeStats>,
) -> Result<DecodedRead> {
    let literal = recon.rflags.read_bit()?;
    if literal {
        let index = read_order(recon, layout)?;
        let three = recon.literals.read_bit()?;
        let n = recon.literals.read_bits(32)?;
        let mut bases = Vec::with_capacity(n as usize);
        for _ in 0..n {
            bases.push(if three {
                decode_base3(&mut recon.literals)?
            } else {
                decode_base2(&mut recon.literals)?
            });
        }
        return Ok(DecodedRead { bases, index });
    }

    let delta = scan.value(SchemeKind::MatchPos)?;
    if let Some(s) = stats.as_deref_mut() {
        s.matching_deltas.add(delta);
    }
    let pos = scan.last_pos + delta;
    scan.last_pos = pos;
    let index = read_order(recon, layout)?;
    let rev = recon.rflags.read_bit()?;
    let chim = layout.chimeric && recon.rflags.read_bit()?;
    let explicit_corner = !layout.corner_bit && recon.rflags.read_bit()?;
    let len = match layout.fixed_read_len {
        Some(l) => l as u64,
        None => scan.value(SchemeKind::Count)?,
    };
    let mut st = ReadState {
        out: Vec::with_capacity(len as usize),
        len,
        tail_clip: Vec::new(),
        head_len: 0,
    };
    if explicit_corner {
        let subtype = recon.mbta.read_bits(2)?;
        if read_corner(recon, subtype, &mut st)? {
            return Ok(DecodedRead { bases: st.out, index });
        }
    }

    let mut positions = vec![(pos, rev)];
    let mut spans: Vec<u64> = Vec::new();
    if chim {
        let at = recon.rflags.position();
        let nseg = recon.rflags.read_bits(3)? as usize + 1;
        if nseg < 2 || nseg > (layout.max_segments as usize).min(MAX_SEGMENTS) {
            return Err(Error::corrupt(StreamId::RFlags, at, format!("{nseg} segments exceed the header limit")));
        }
        for _ in 1..nseg {
            let r = recon.rflags.read_bit()?;
            let at = scan.mapa.position();
            let d = unzigzag(scan.value(SchemeKind::MatchPos)?);
            let p = positions.last().unwrap().0 as i64 + d;
            if p < 0 {
                return Err(Error::corrupt(StreamId::MaPA, at, "segment position before consensus start"));
            }
            positions.push((p as u64, r));
        }
        for _ in 0..nseg - 1 {
            spans.push(scan.value(SchemeKind::Side)?);
        }
    }

    let nseg = positions.len();
    let mut real_mismatches = 0u64;
    for (si, &(spos, srev)) in positions.iter().enumerate() {
        let at_count = scan.mpa.position();
        let count = scan.value(SchemeKind::Count)?;
        let mut seg = SegmentCursor {
            pos: spos,
            rev: srev,
            out_start: st.out.len(),
            cursor: 0,
        };
        // Known once any corner payload of this segment has been read.
        let span_of = |st: &ReadState| -> Option<u64> {
            if si + 1 < nseg {
                Some(spans[si])
            } else {
                let used: u64 = st.head_len + spans.iter().sum::<u64>() + st.tail_clip.len() as u64;
                st.len.checked_sub(used)
            }
        };
        let mut prev_off = 0u64;
        for e in 0..count {
            let at_pos = (StreamId::MPA, scan.mpa.position());
            let delta = scan.value(SchemeKind::MismatchPos)?;
            let off = prev_off + delta;
            prev_off = off;
            let check_disc = layout.corner_bit && si == 0 && e == 0 && off == 0;
            let slot_at = recon.mbta.position();
            let slot = recon.mbta.read_bits(2)?;
            if check_disc && recon.mbta.read_bit()? {
                if read_corner(recon, slot, &mut st)? {
                    if count != 1 || nseg != 1 {
                        return Err(Error::corrupt(StreamId::MBTA, slot_at, "whole-read corner case with extra entries"));
                    }
                    return Ok(DecodedRead { bases: st.out, index });
                }
                seg.out_start = st.out.len();
                continue;
            }
            if let Some(s) = stats.as_deref_mut() {
                s.mismatch_deltas.add(delta);
            }
            real_mismatches += 1;
            let span = span_of(&st);
            let kind = if layout.merged {
                let cons_at = spos + off;
                let cb = recon
                    .window
                    .base(cons_at as usize)
                    .ok_or_else(|| Error::corrupt(at_pos.0, at_pos.1, "mismatch beyond consensus end"))?;
                let b = CODE_TO_BASE[slot as usize];
                if b != cb {
                    copy_cons(recon, &mut seg, off, &mut st.out, span, at_pos)?;
                    st.out.push(b);
                    seg.cursor += 1;
                    MismatchKind::Sub
                } else if recon.mbta.read_bit()? {
                    MismatchKind::Del
                } else {
                    MismatchKind::Ins
                }
            } else {
                match slot {
                    TYPE_SUB => {
                        copy_cons(recon, &mut seg, off, &mut st.out, span, at_pos)?;
                        let b_at = recon.mbta.position();
                        let b = decode_base2(&mut recon.mbta)?;
                        let cb = recon.window.base((spos + off) as usize);
                        if cb == Some(b) {
                            return Err(Error::corrupt(StreamId::MBTA, b_at, "substitution repeats the consensus base"));
                        }
                        st.out.push(b);
                        seg.cursor += 1;
                        MismatchKind::Sub
                    }
                    TYPE_INS => MismatchKind::Ins,
                    TYPE_DEL => MismatchKind::Del,
                    _ => return Err(Error::corrupt(StreamId::MBTA, slot_at, "mismatch type code 11")),
                }
            };
            match kind {
                MismatchKind::Sub => {}
                MismatchKind::Ins => {
                    let n = scan.indel_len(layout)?;
                    copy_cons(recon, &mut seg, off, &mut st.out, span, at_pos)?;
                    for _ in 0..n {
                        st.out.push(decode_base2(&mut recon.mbta)?);
                    }
                    if let Some(s) = stats.as_deref_mut() {
                        *s.indel_lengths.entry(n).or_default() += 1;
                    }
                }
                MismatchKind::Del => {
                    let n = scan.indel_len(layout)?;
                    copy_cons(recon, &mut seg, off, &mut st.out, span, at_pos)?;
                    seg.cursor += n as u64;
                    if let Some(s) = stats.as_deref_mut() {
                        *s.indel_lengths.entry(n).or_default() += 1;
                    }
                }
            }
            if let Some(span) = span {
                if (st.out.len() - seg.out_start) as u64 > span {
                    return Err(Error::corrupt(StreamId::MBTA, recon.mbta.position(), "segment longer than its span"));
                }
            }
        }
        let span = span_of(&st).ok_or_else(|| {
            Error::corrupt(StreamId::MPA, at_count, "clips and spans exceed the read length")
        })?;
        let have = (st.out.len() - seg.out_start) as u64;
        let rest = span.checked_sub(have).ok_or_else(|| {
            Error::corrupt(StreamId::MBTA, recon.mbta.position(), "segment longer than its span")
        })?;
        let upto = seg.cursor + rest;
        copy_cons(recon, &mut seg, upto, &mut st.out, None, (StreamId::MPA, at_count))?;
        if seg.rev {
            reverse_complement_in_place(&mut st.out[seg.out_start..]);
        }
    }
    if let Some(s) = stats {
        *s.mismatch_counts.entry(real_mismatches).or_default() += 1;
    }
    let tail = std::mem::take(&mut st.tail_clip);
    st.out.extend_from_slice(&tail);
    if st.out.len() as u64 != st.len {
        return Err(Error::corrupt(
            StreamId::MPA,
            scan.mpa.position(),
            format!("decoded {} bases for a read of {}", st.out.len(), st.len),
        ));
    }
    Ok(DecodedRead { bases: st.out, index })
}

fn read_order(recon: &mut ReconstructUnit<'_>, layout: &Layout) -> Result<Option<u64>> {
    if layout.preserve_order {
        Ok(Some(recon.order.read_bits(layout.order_width as u32)?))
    } else {
        Ok(None)
    }
}

/// Streaming decoder over one partition.
pub struct PartitionDecoder<'a> {
    scan: ScanUnit<'a>,
    recon: ReconstructUnit<'a>,
    layout: &'a Layout,
    remaining: u64,
    stats: Option<DecodeStats>,
    peak_read_len: usize,
}

impl<'a> PartitionDecoder<'a> {
    pub fn new(input: PartitionInput<'a>, layout: &'a Layout, schemes: &'a Schemes, consensus: &'a [u8]) -> Self {
        let r = |id: StreamId| {
            let (data, bits) = input.streams[id.index()];
            BitReader::new(id, data, bits)
        };
        Self {
            scan: ScanUnit {
                mapga: r(StreamId::MaPGA),
                mapa: r(StreamId::MaPA),
                mpga: r(StreamId::MPGA),
                mpa: r(StreamId::MPA),
                schemes,
                last_pos: input.start,
            },
            recon: ReconstructUnit {
                mbta: r(StreamId::MBTA),
                rflags: r(StreamId::RFlags),
                literals: r(StreamId::Literals),
                order: r(StreamId::Order),
                window: ConsensusWindow::new(consensus),
            },
            layout,
            remaining: input.read_count,
            stats: None,
            peak_read_len: 0,
        }
    }

    /// Record every stream access into `trace`.
    pub fn set_trace(&mut self, trace: SharedTrace) {
        for r in [
            &mut self.scan.mapga,
            &mut self.scan.mapa,
            &mut self.scan.mpga,
            &mut self.scan.mpa,
            &mut self.recon.mbta,
            &mut self.recon.rflags,
            &mut self.recon.literals,
            &mut self.recon.order,
        ] {
            r.set_trace(trace.clone());
        }
    }

    pub fn collect_stats(&mut self) {
        self.stats = Some(DecodeStats::default());
    }

    pub fn stats(&self) -> Option<&DecodeStats> {
        self.stats.as_ref()
    }

    pub fn next_read(&mut self) -> Result<Option<DecodedRead>> {
        if self.remaining == 0 {
            return Ok(None);
        }
        let read = decode_next_read(&mut self.scan, &mut self.recon, self.layout, self.stats.as_mut())?;
        self.remaining -= 1;
        self.peak_read_len = self.peak_read_len.max(read.bases.len());
        Ok(Some(read))
    }

    fn report(&self) -> AccessReport {
        let mut streams = [ReaderStats::default(); StreamId::COUNT];
        for r in [
            &self.scan.mapga,
            &self.scan.mapa,
            &self.scan.mpga,
            &self.scan.mpa,
            &self.recon.mbta,
            &self.recon.rflags,
            &self.recon.literals,
            &self.recon.order,
        ] {
            streams[r.stream().index()] = r.stats();
        }
        AccessReport {
            streams,
            window_loads: self.recon.window.loads,
            peak_read_len: self.peak_read_len,
        }
    }

    /// Checks that every stream was consumed exactly.
    pub fn finish(self) -> Result<(AccessReport, Option<DecodeStats>)> {
        if self.remaining != 0 {
            return Err(Error::Format(format!("{} reads left undecoded", self.remaining)));
        }
        for r in [
            &self.scan.mapga,
            &self.scan.mapa,
            &self.scan.mpga,
            &self.scan.mpa,
            &self.recon.mbta,
            &self.recon.rflags,
            &self.recon.literals,
            &self.recon.order,
        ] {
            r.finish()?;
        }
        let report = self.report();
        Ok((report, self.stats))
    }
}

impl Iterator for PartitionDecoder<'_> {
    type Item = Result<DecodedRead>;

    fn next(&mut self) -> Option<Self::Item> {
        self.next_read().transpose()
    }
}

/// Decode a whole partition, checking full stream consumption.
pub fn decode_partition(
    input: PartitionInput<'_>,
    layout: &Layout,
    schemes: &Schemes,
    consensus: &[u8],
    with_stats: bool,
) -> Result<(Vec<DecodedRead>, AccessReport, Option<DecodeStats>)> {
    let mut dec = PartitionDecoder::new(input, layout, schemes, consensus);
    if with_stats {
        dec.collect_stats();
    }
    let mut reads = Vec::with_capacity(input.read_count.min(1 << 20) as usize);
    while let Some(r) = dec.next_read()? {
        reads.push(r);
    }
    let (report, stats) = dec.finish()?;
    audit_streaming(&report)?;
    Ok((reads, report, stats))
}

/// Decode partitions on `threads` workers; results stay in partition order.
pub fn decode_partitions(
    inputs: &[PartitionInput<'_>],
    layout: &Layout,
    schemes: &Schemes,
    consensus: &[u8],
    threads: usize,
) -> Vec<Result<(Vec<DecodedRead>, AccessReport)>> {
    let run = || {
        inputs
            .par_iter()
            .map(|&inp| decode_partition(inp, layout, schemes, consensus, false).map(|(r, a, _)| (r, a)))
            .collect()
    };
    if threads <= 1 {
        return inputs
            .iter()
            .map(|&inp| decode_partition(inp, layout, schemes, consensus, false).map(|(r, a, _)| (r, a)))
            .collect();
    }
    match rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
        Ok(pool) => pool.install(run),
        Err(_) => run(),
    }
}

#[cfg(test)]
mod tests;
