//! Bit-stream layout of reads in a partition.
//!
//! Every read is emitted through one routine, [`emit_read`], against a
//! [`Sink`]. The real stream writer, the size estimator, and the statistics
//! collector used for tuning are all sinks, so the estimate and the tuning
//! input are exact by construction.
//!
//! Per mapped read, in stream order:
//!
//! * rflags: literal bit (0), rev bit, chimeric bit (if enabled), corner bit
//!   (only when the offset-0 corner scheme is off)
//! * MaPGA/MaPA: primary matching-position delta
//! * order_idx: original index (preserve-order only)
//! * MPGA/MPA: read length (variable-length sets only)
//! * chimeric side data: segment count (3 bits, rflags), per extra segment
//!   its rev bit and zig-zag position delta, span lengths of all but the
//!   last segment
//! * per segment: mismatch count, then per mismatch the offset delta
//!   (MPGA/MPA), its MBTA entry, and for indels under the length scheme a
//!   one-bit single-base flag (MPGA) or an 8-bit length (MPA)

use crate::align::{Alignment, MismatchKind, Segment};
use crate::bits::BitWriter;
use crate::error::{Error, Result, StreamId};
use crate::seqio::base_code;
use crate::tune::{BitLenHistogram, ClassScheme};

/// The four tuned value families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SchemeKind {
    /// Matching-position deltas, primary and chimeric.
    MatchPos,
    /// Mismatch-offset deltas.
    MismatchPos,
    /// Mismatch counts and variable read lengths.
    Count,
    /// Chimeric segment span lengths.
    Side,
}

impl SchemeKind {
    pub const ALL: [SchemeKind; 4] = [
        SchemeKind::MatchPos,
        SchemeKind::MismatchPos,
        SchemeKind::Count,
        SchemeKind::Side,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    /// Guide and payload streams holding values of this kind.
    pub fn streams(self) -> (StreamId, StreamId) {
        match self {
            SchemeKind::MatchPos => (StreamId::MaPGA, StreamId::MaPA),
            _ => (StreamId::MPGA, StreamId::MPA),
        }
    }

    /// Width used when this kind is not tuned.
    pub fn default_fixed_width(self) -> u32 {
        match self {
            SchemeKind::Count => 16,
            _ => 32,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            SchemeKind::MatchPos => "matching_position",
            SchemeKind::MismatchPos => "mismatch_position",
            SchemeKind::Count => "count",
            SchemeKind::Side => "side",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Schemes {
    pub mapos: ClassScheme,
    pub mmpos: ClassScheme,
    pub count: ClassScheme,
    pub side: ClassScheme,
}

impl Schemes {
    pub fn get(&self, kind: SchemeKind) -> &ClassScheme {
        match kind {
            SchemeKind::MatchPos => &self.mapos,
            SchemeKind::MismatchPos => &self.mmpos,
            SchemeKind::Count => &self.count,
            SchemeKind::Side => &self.side,
        }
    }

    pub fn get_mut(&mut self, kind: SchemeKind) -> &mut ClassScheme {
        match kind {
            SchemeKind::MatchPos => &mut self.mapos,
            SchemeKind::MismatchPos => &mut self.mmpos,
            SchemeKind::Count => &mut self.count,
            SchemeKind::Side => &mut self.side,
        }
    }

    /// Untuned schemes wide enough for anything up to 64 bits.
    pub fn fixed_defaults() -> Self {
        let f = |k: SchemeKind| ClassScheme::fixed(k.default_fixed_width()).expect("valid width");
        Self {
            mapos: f(SchemeKind::MatchPos),
            mmpos: f(SchemeKind::MismatchPos),
            count: f(SchemeKind::Count),
            side: f(SchemeKind::Side),
        }
    }
}

/// Where payload bits go in the size breakdown.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Category {
    MatchingPositions,
    MismatchCounts,
    MismatchPositions,
    Bases,
    Types,
    Rev,
    CornerCases,
    ReadLengths,
    Chimeric,
    Literals,
    Order,
}

impl Category {
    pub const ALL: [Category; 11] = [
        Category::MatchingPositions,
        Category::MismatchCounts,
        Category::MismatchPositions,
        Category::Bases,
        Category::Types,
        Category::Rev,
        Category::CornerCases,
        Category::ReadLengths,
        Category::Chimeric,
        Category::Literals,
        Category::Order,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Category::MatchingPositions => "matching_positions",
            Category::MismatchCounts => "mismatch_counts",
            Category::MismatchPositions => "mismatch_positions",
            Category::Bases => "bases",
            Category::Types => "types",
            Category::Rev => "rev",
            Category::CornerCases => "corner_cases",
            Category::ReadLengths => "read_lengths",
            Category::Chimeric => "chimeric",
            Category::Literals => "literals",
            Category::Order => "order",
        }
    }
}

/// Payload bits per category.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Breakdown([u64; 11]);

impl Breakdown {
    pub fn get(&self, cat: Category) -> u64 {
        self.0[cat as usize]
    }

    pub fn add(&mut self, cat: Category, bits: u64) {
        self.0[cat as usize] += bits;
    }

    pub fn merge(&mut self, other: &Breakdown) {
        for (a, b) in self.0.iter_mut().zip(other.0) {
            *a += b;
        }
    }

    pub fn total(&self) -> u64 {
        self.0.iter().sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = (Category, u64)> + '_ {
        Category::ALL.iter().map(|&c| (c, self.get(c)))
    }
}

/// Encoding switches recorded in the container header.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Layout {
    pub long_read: bool,
    /// Multi-base indels carry a flag bit and an 8-bit length.
    pub indel_lengths: bool,
    /// Bases and types share MBTA entries through the sentinel rule.
    pub merged: bool,
    pub chimeric: bool,
    /// Corner cases ride on an artificial offset-0 mismatch.
    pub corner_bit: bool,
    pub preserve_order: bool,
    pub fixed_read_len: Option<u32>,
    /// Width of each order_idx entry.
    pub order_width: u8,
    pub max_segments: u8,
}

impl Default for Layout {
    fn default() -> Self {
        Self {
            long_read: false,
            indel_lengths: false,
            merged: true,
            chimeric: false,
            corner_bit: true,
            preserve_order: false,
            fixed_read_len: None,
            order_width: 0,
            max_segments: 1,
        }
    }
}

/// Bits needed to index `n` reads.
pub fn order_width_for(n: u64) -> u8 {
    if n <= 1 {
        0
    } else {
        (64 - (n - 1).leading_zeros()) as u8
    }
}

/// Unmerged MBTA type codes.
pub(crate) const TYPE_SUB: u64 = 0;
pub(crate) const TYPE_INS: u64 = 1;
pub(crate) const TYPE_DEL: u64 = 2;

/// Longest indel block expressible in the 8-bit length field.
pub const MAX_INDEL_BLOCK: u32 = 255;

/// Corner subtypes: whole read in literals, head clip, tail clip, both.
pub(crate) const CORNER_N_READ: u64 = 0;
pub(crate) const CORNER_HEAD: u64 = 1;
pub(crate) const CORNER_TAIL: u64 = 2;

pub const MAX_CLIP_LEN: usize = u16::MAX as usize;
pub const MAX_SEGMENTS: usize = 8;

#[inline]
pub fn zigzag(v: i64) -> u64 {
    ((v << 1) ^ (v >> 63)) as u64
}

#[inline]
pub fn unzigzag(v: u64) -> i64 {
    ((v >> 1) as i64) ^ -((v & 1) as i64)
}

/// Receiver of one read's bits.
pub(crate) trait Sink {
    fn raw(&mut self, stream: StreamId, cat: Category, value: u64, width: u32);
    fn value(&mut self, kind: SchemeKind, cat: Category, value: u64) -> Result<()>;
}

/// Writes the actual streams.
pub(crate) struct StreamSink<'a> {
    pub streams: [BitWriter; StreamId::COUNT],
    pub breakdown: Breakdown,
    schemes: &'a Schemes,
}

impl<'a> StreamSink<'a> {
    pub fn new(schemes: &'a Schemes) -> Self {
        Self {
            streams: Default::default(),
            breakdown: Breakdown::default(),
            schemes,
        }
    }
}

impl Sink for StreamSink<'_> {
    fn raw(&mut self, stream: StreamId, cat: Category, value: u64, width: u32) {
        self.streams[stream.index()].write_bits(value, width);
        self.breakdown.add(cat, width as u64);
    }

    fn value(&mut self, kind: SchemeKind, cat: Category, value: u64) -> Result<()> {
        let scheme = self.schemes.get(kind);
        let class = scheme
            .class_for(value)
            .ok_or_else(|| Error::Scheme(format!("{} value {value} not covered by {scheme:?}", kind.name())))?;
        let (guide, payload) = kind.streams();
        let (code, code_len) = scheme.code(class);
        let width = scheme.width(class);
        self.streams[guide.index()].write_bits(code, code_len);
        self.streams[payload.index()].write_bits(value, width);
        self.breakdown.add(cat, (code_len + width) as u64);
        Ok(())
    }
}

/// Counts what [`StreamSink`] would write. A lenient counter prices values
/// outside the schemes as the widest guide code plus their own bit length.
pub(crate) struct CountSink<'a> {
    pub breakdown: Breakdown,
    pub schemes: &'a Schemes,
    pub lenient: bool,
}

impl Sink for CountSink<'_> {
    fn raw(&mut self, _: StreamId, cat: Category, _: u64, width: u32) {
        self.breakdown.add(cat, width as u64);
    }

    fn value(&mut self, kind: SchemeKind, cat: Category, value: u64) -> Result<()> {
        let scheme = self.schemes.get(kind);
        let bits = match scheme.value_bits(value) {
            Ok(b) => b,
            Err(_) if self.lenient => {
                let widest = (0..scheme.num_classes()).map(|c| scheme.code_len(c)).max().unwrap_or(0);
                widest + crate::bits::bit_len(value)
            }
            Err(e) => return Err(e),
        };
        self.breakdown.add(cat, bits as u64);
        Ok(())
    }
}

/// Scheme-independent statistics of one partition: value histograms per
/// kind and raw bits per stream and category.
#[derive(Debug, Clone, Default)]
pub struct PartitionStats {
    pub hists: [BitLenHistogram; 4],
    pub raw_stream_bits: [u64; StreamId::COUNT],
    pub raw_breakdown: Breakdown,
}

impl Sink for PartitionStats {
    fn raw(&mut self, stream: StreamId, cat: Category, _: u64, width: u32) {
        self.raw_stream_bits[stream.index()] += width as u64;
        self.raw_breakdown.add(cat, width as u64);
    }

    fn value(&mut self, kind: SchemeKind, cat: Category, value: u64) -> Result<()> {
        let _ = cat;
        self.hists[kind.index()].add(value);
        Ok(())
    }
}

fn has_n(bases: &[u8]) -> bool {
    crate::seqio::contains_n(bases)
}

fn code2(b: u8) -> Result<u64> {
    base_code(b)
        .map(u64::from)
        .ok_or_else(|| Error::Encoding(format!("base {:?} has no 2-bit code", b as char)))
}

fn code3(b: u8) -> Result<u64> {
    match b {
        b'N' => Ok(4),
        other => code2(other),
    }
}

/// Corner subtype for a mapped read, if it needs one.
pub(crate) fn corner_subtype(read: &[u8], aln: &Alignment) -> Option<u64> {
    if has_n(read) {
        Some(CORNER_N_READ)
    } else {
        let st = (!aln.clip_head.is_empty()) as u64 * CORNER_HEAD + (!aln.clip_tail.is_empty()) as u64 * CORNER_TAIL;
        (st != 0).then_some(st)
    }
}

fn emit_clip<S: Sink>(sink: &mut S, clip: &[u8]) -> Result<()> {
    if clip.len() > MAX_CLIP_LEN {
        return Err(Error::Encoding(format!("clip of {} bases exceeds {MAX_CLIP_LEN}", clip.len())));
    }
    sink.raw(StreamId::MBTA, Category::CornerCases, clip.len() as u64, 16);
    for &b in clip {
        sink.raw(StreamId::MBTA, Category::Bases, code2(b)?, 2);
    }
    Ok(())
}

/// Subtype (already in MBTA) is followed by its payload.
fn emit_corner_payload<S: Sink>(sink: &mut S, subtype: u64, read: &[u8], aln: &Alignment) -> Result<()> {
    if subtype == CORNER_N_READ {
        for &b in read {
            sink.raw(StreamId::Literals, Category::Bases, code3(b)?, 3);
        }
        return Ok(());
    }
    if subtype & CORNER_HEAD != 0 {
        emit_clip(sink, &aln.clip_head)?;
    }
    if subtype & CORNER_TAIL != 0 {
        emit_clip(sink, &aln.clip_tail)?;
    }
    Ok(())
}

/// One stream-level mismatch entry. Long blocks are split; without the
/// length scheme every indel base is its own entry (insertions stay at the
/// same offset, deletions advance by one).
#[derive(Debug, Clone, Copy)]
pub(crate) struct Entry<'a> {
    pub offset: u32,
    pub kind: MismatchKind,
    pub len: u32,
    pub payload: &'a [u8],
}

pub(crate) fn for_each_entry<'a>(
    seg: &'a Segment,
    indel_lengths: bool,
    mut f: impl FnMut(Entry<'a>) -> Result<()>,
) -> Result<()> {
    let chunk = if indel_lengths { MAX_INDEL_BLOCK as usize } else { 1 };
    for m in &seg.mismatches {
        match m.kind {
            MismatchKind::Sub => f(Entry {
                offset: m.offset,
                kind: MismatchKind::Sub,
                len: 1,
                payload: &m.payload,
            })?,
            MismatchKind::Ins => {
                for piece in m.payload.chunks(chunk) {
                    f(Entry {
                        offset: m.offset,
                        kind: MismatchKind::Ins,
                        len: piece.len() as u32,
                        payload: piece,
                    })?;
                }
            }
            MismatchKind::Del => {
                let mut off = m.offset;
                let mut left = m.block_len;
                while left > 0 {
                    let c = left.min(chunk as u32);
                    f(Entry {
                        offset: off,
                        kind: MismatchKind::Del,
                        len: c,
                        payload: &[],
                    })?;
                    off += c;
                    left -= c;
                }
            }
        }
    }
    Ok(())
}

pub(crate) fn entry_count(seg: &Segment, indel_lengths: bool) -> u64 {
    let chunk = if indel_lengths { MAX_INDEL_BLOCK as u64 } else { 1 };
    seg.mismatches
        .iter()
        .map(|m| match m.kind {
            MismatchKind::Sub => 1,
            _ => (m.block_len as u64).div_ceil(chunk),
        })
        .sum()
}

fn emit_indel_len<S: Sink>(sink: &mut S, layout: &Layout, len: u32) {
    if !layout.indel_lengths {
        debug_assert_eq!(len, 1);
        return;
    }
    if len == 1 {
        sink.raw(StreamId::MPGA, Category::MismatchPositions, 1, 1);
    } else {
        sink.raw(StreamId::MPGA, Category::MismatchPositions, 0, 1);
        sink.raw(StreamId::MPA, Category::MismatchPositions, len as u64, 8);
    }
}

/// MBTA entry; `disc` inserts the corner discriminator (0, real mismatch)
/// right after the leading 2-bit slot.
fn emit_entry<S: Sink>(sink: &mut S, layout: &Layout, cons_base: u8, e: &Entry<'_>, disc: bool) -> Result<()> {
    let slot_disc = |sink: &mut S| {
        if disc {
            sink.raw(StreamId::MBTA, Category::CornerCases, 0, 1);
        }
    };
    if layout.merged {
        match e.kind {
            MismatchKind::Sub => {
                sink.raw(StreamId::MBTA, Category::Bases, code2(e.payload[0])?, 2);
                slot_disc(sink);
            }
            MismatchKind::Ins | MismatchKind::Del => {
                sink.raw(StreamId::MBTA, Category::Types, code2(cons_base)?, 2);
                slot_disc(sink);
                sink.raw(StreamId::MBTA, Category::Types, (e.kind == MismatchKind::Del) as u64, 1);
                emit_indel_len(sink, layout, e.len);
            }
        }
    } else {
        let t = match e.kind {
            MismatchKind::Sub => TYPE_SUB,
            MismatchKind::Ins => TYPE_INS,
            MismatchKind::Del => TYPE_DEL,
        };
        sink.raw(StreamId::MBTA, Category::Types, t, 2);
        slot_disc(sink);
        match e.kind {
            MismatchKind::Sub => sink.raw(StreamId::MBTA, Category::Bases, code2(e.payload[0])?, 2),
            _ => emit_indel_len(sink, layout, e.len),
        }
    }
    if e.kind == MismatchKind::Ins {
        for &b in e.payload {
            sink.raw(StreamId::MBTA, Category::Bases, code2(b)?, 2);
        }
    }
    Ok(())
}

fn emit_order<S: Sink>(sink: &mut S, layout: &Layout, order: u64) {
    if layout.preserve_order {
        sink.raw(StreamId::Order, Category::Order, order, layout.order_width as u32);
    }
}

/// Emit one read. `prev_pos` is the previous mapped read's primary position
/// in this partition (the partition start for the first one).
pub(crate) fn emit_read<S: Sink>(
    sink: &mut S,
    layout: &Layout,
    consensus: &[u8],
    read: &[u8],
    aln: &Alignment,
    prev_pos: &mut u64,
    order: u64,
) -> Result<()> {
    if !aln.is_mapped() {
        sink.raw(StreamId::RFlags, Category::Literals, 1, 1);
        emit_order(sink, layout, order);
        if read.len() > u32::MAX as usize {
            return Err(Error::Encoding("read longer than 2^32 bases".into()));
        }
        let three = has_n(read);
        sink.raw(StreamId::Literals, Category::Literals, three as u64, 1);
        sink.raw(StreamId::Literals, Category::Literals, read.len() as u64, 32);
        for &b in read {
            if three {
                sink.raw(StreamId::Literals, Category::Literals, code3(b)?, 3);
            } else {
                sink.raw(StreamId::Literals, Category::Literals, code2(b)?, 2);
            }
        }
        return Ok(());
    }

    sink.raw(StreamId::RFlags, Category::Literals, 0, 1);
    let primary = aln
        .primary()
        .ok_or_else(|| Error::Encoding("mapped alignment without segments".into()))?;
    let pos = primary.cons_pos;
    if pos < *prev_pos {
        return Err(Error::Encoding(format!("matching position {pos} precedes {}", *prev_pos)));
    }
    sink.value(SchemeKind::MatchPos, Category::MatchingPositions, pos - *prev_pos)?;
    *prev_pos = pos;
    emit_order(sink, layout, order);

    let corner = corner_subtype(read, aln);
    let n_read = corner == Some(CORNER_N_READ);
    let chim = aln.segments.len() > 1 && !n_read;
    if chim && (!layout.chimeric || aln.segments.len() > (layout.max_segments as usize).min(MAX_SEGMENTS)) {
        return Err(Error::Encoding(format!(
            "{} segments not allowed by layout (chimeric={}, max {})",
            aln.segments.len(),
            layout.chimeric,
            layout.max_segments
        )));
    }
    sink.raw(StreamId::RFlags, Category::Rev, (primary.rev && !n_read) as u64, 1);
    if layout.chimeric {
        sink.raw(StreamId::RFlags, Category::Chimeric, chim as u64, 1);
    }
    if !layout.corner_bit {
        sink.raw(StreamId::RFlags, Category::CornerCases, corner.is_some() as u64, 1);
    }
    match layout.fixed_read_len {
        Some(l) if l as usize != read.len() => {
            return Err(Error::Encoding(format!("read of {} bases in a fixed-length ({l}) set", read.len())))
        }
        Some(_) => {}
        None => sink.value(SchemeKind::Count, Category::ReadLengths, read.len() as u64)?,
    }

    if !layout.corner_bit {
        if let Some(st) = corner {
            sink.raw(StreamId::MBTA, Category::CornerCases, st, 2);
            emit_corner_payload(sink, st, read, aln)?;
            if n_read {
                return Ok(());
            }
        }
    } else if n_read {
        sink.value(SchemeKind::Count, Category::MismatchCounts, 1)?;
        sink.value(SchemeKind::MismatchPos, Category::CornerCases, 0)?;
        sink.raw(StreamId::MBTA, Category::CornerCases, CORNER_N_READ, 2);
        sink.raw(StreamId::MBTA, Category::CornerCases, 1, 1);
        return emit_corner_payload(sink, CORNER_N_READ, read, aln);
    }

    if chim {
        let segs = &aln.segments;
        sink.raw(StreamId::RFlags, Category::Chimeric, (segs.len() - 1) as u64, 3);
        for w in segs.windows(2) {
            sink.raw(StreamId::RFlags, Category::Chimeric, w[1].rev as u64, 1);
            let d = w[1].cons_pos as i64 - w[0].cons_pos as i64;
            sink.value(SchemeKind::MatchPos, Category::Chimeric, zigzag(d))?;
        }
        for seg in &segs[..segs.len() - 1] {
            sink.value(SchemeKind::Side, Category::Chimeric, seg.span_len() as u64)?;
        }
    }

    for (si, seg) in aln.segments.iter().enumerate() {
        let artificial = if si == 0 && layout.corner_bit { corner } else { None };
        let count = entry_count(seg, layout.indel_lengths) + artificial.is_some() as u64;
        sink.value(SchemeKind::Count, Category::MismatchCounts, count)?;
        let mut first = true;
        if let Some(st) = artificial {
            sink.value(SchemeKind::MismatchPos, Category::CornerCases, 0)?;
            sink.raw(StreamId::MBTA, Category::CornerCases, st, 2);
            sink.raw(StreamId::MBTA, Category::CornerCases, 1, 1);
            emit_corner_payload(sink, st, read, aln)?;
            first = false;
        }
        let base = seg.cons_pos as usize;
        let mut prev_off = 0u32;
        for_each_entry(seg, layout.indel_lengths, |e| {
            let delta = e
                .offset
                .checked_sub(prev_off)
                .ok_or_else(|| Error::Encoding(format!("mismatch offsets decrease at {}", e.offset)))?;
            sink.value(SchemeKind::MismatchPos, Category::MismatchPositions, delta as u64)?;
            prev_off = e.offset;
            let disc = layout.corner_bit && si == 0 && first && e.offset == 0;
            first = false;
            let cons_base = if layout.merged && e.kind != MismatchKind::Sub {
                *consensus
                    .get(base + e.offset as usize)
                    .ok_or_else(|| Error::Encoding("indel beyond consensus end".into()))?
            } else {
                b'A'
            };
            emit_entry(sink, layout, cons_base, &e, disc)
        })?;
    }
    Ok(())
}

/// Sentinel and bounds conditions the stream format relies on.
pub fn check_encodable(aln: &Alignment, read: &[u8], consensus: &[u8]) -> Result<()> {
    aln.check_invariants().map_err(|e| Error::Encoding(e.to_string()))?;
    if !aln.is_mapped() || has_n(read) {
        return Ok(());
    }
    for seg in &aln.segments {
        let base = seg.cons_pos as usize;
        if base as u64 + seg.cons_len() > consensus.len() as u64 {
            return Err(Error::Encoding(format!("segment at {base} runs past the consensus")));
        }
        for m in &seg.mismatches {
            let at = base + m.offset as usize;
            match m.kind {
                MismatchKind::Sub => {
                    let c = consensus[at];
                    if m.payload.len() != 1 || m.payload[0] == c || base_code(m.payload[0]).is_none() {
                        return Err(Error::Encoding(format!(
                            "substitution at {at} does not differ from consensus base {:?}",
                            c as char
                        )));
                    }
                }
                MismatchKind::Ins => {
                    if at >= consensus.len() || base_code(consensus[at]).is_none() {
                        return Err(Error::Encoding(format!("insertion sentinel at {at} is not A/C/G/T")));
                    }
                }
                MismatchKind::Del => {
                    let end = at + m.block_len as usize;
                    if consensus[at..end].iter().any(|&b| base_code(b).is_none()) {
                        return Err(Error::Encoding(format!("deletion at {at} covers a non-ACGT base")));
                    }
                }
            }
        }
    }
    for clip in [&aln.clip_head, &aln.clip_tail] {
        if clip.len() > MAX_CLIP_LEN {
            return Err(Error::Encoding(format!("clip of {} bases", clip.len())));
        }
    }
    Ok(())
}

/// Exact bits the encoder spends on `aln`, given the previous primary
/// position in its partition.
pub fn estimate_bits(
    read: &[u8],
    aln: &Alignment,
    layout: &Layout,
    schemes: &Schemes,
    consensus: &[u8],
    prev_pos: u64,
) -> Result<Breakdown> {
    let mut sink = CountSink {
        breakdown: Breakdown::default(),
        schemes,
        lenient: false,
    };
    let mut prev = prev_pos.min(aln.primary_pos().unwrap_or(prev_pos));
    emit_read(&mut sink, layout, consensus, read, aln, &mut prev, 0)?;
    Ok(sink.breakdown)
}

/// Stable sort by primary position; literal alignments keep their relative
/// order after all mapped ones. Returns the permutation and the position
/// deltas of the mapped prefix (the first delta is the first position).
pub fn sort_and_delta(alignments: &[Alignment]) -> (Vec<usize>, Vec<u64>) {
    let mut order: Vec<usize> = (0..alignments.len()).collect();
    order.sort_by_key(|&i| match alignments[i].primary_pos() {
        Some(p) => (0u8, p),
        None => (1u8, 0),
    });
    let mut deltas = Vec::new();
    let mut prev = 0u64;
    for &i in &order {
        if let Some(p) = alignments[i].primary_pos() {
            deltas.push(p - prev);
            prev = p;
        }
    }
    (order, deltas)
}

/// MaPGA and MaPA for a run of matching-position deltas.
pub fn encode_matching_positions(deltas: &[u64], scheme: &ClassScheme) -> Result<(BitWriter, BitWriter)> {
    let schemes = Schemes {
        mapos: scheme.clone(),
        ..Schemes::fixed_defaults()
    };
    let mut sink = StreamSink::new(&schemes);
    for &d in deltas {
        sink.value(SchemeKind::MatchPos, Category::MatchingPositions, d)?;
    }
    let [mapga, mapa, ..] = sink.streams;
    Ok((mapga, mapa))
}

/// MPGA and MPA content of one alignment's segments: counts, offset deltas,
/// and (with `long_read`) indel flags and lengths.
pub fn encode_mismatch_positions(
    aln: &Alignment,
    count_scheme: &ClassScheme,
    pos_scheme: &ClassScheme,
    long_read: bool,
) -> Result<(BitWriter, BitWriter)> {
    let schemes = Schemes {
        mmpos: pos_scheme.clone(),
        count: count_scheme.clone(),
        ..Schemes::fixed_defaults()
    };
    let layout = Layout {
        long_read,
        indel_lengths: long_read,
        merged: false,
        corner_bit: false,
        ..Layout::default()
    };
    let mut sink = StreamSink::new(&schemes);
    for seg in &aln.segments {
        sink.value(SchemeKind::Count, Category::MismatchCounts, entry_count(seg, layout.indel_lengths))?;
        let mut prev = 0u32;
        for_each_entry(seg, layout.indel_lengths, |e| {
            let delta = e
                .offset
                .checked_sub(prev)
                .ok_or_else(|| Error::Encoding(format!("mismatch offsets decrease at {}", e.offset)))?;
            sink.value(SchemeKind::MismatchPos, Category::MismatchPositions, delta as u64)?;
            prev = e.offset;
            if e.kind != MismatchKind::Sub {
                emit_indel_len(&mut sink, &layout, e.len);
            }
            Ok(())
        })?;
    }
    let [_, _, mpga, mpa, ..] = sink.streams;
    Ok((mpga, mpa))
}

/// Merged MBTA entries of one alignment (no corner handling).
pub fn encode_bases_types(aln: &Alignment, consensus: &[u8], long_read: bool) -> Result<BitWriter> {
    let schemes = Schemes::fixed_defaults();
    let layout = Layout {
        long_read,
        indel_lengths: long_read,
        corner_bit: false,
        ..Layout::default()
    };
    let mut sink = StreamSink::new(&schemes);
    for seg in &aln.segments {
        for m in &seg.mismatches {
            if m.kind == MismatchKind::Sub && consensus.get(seg.cons_pos as usize + m.offset as usize) == Some(&m.payload[0]) {
                return Err(Error::Encoding(format!(
                    "substitution at offset {} repeats the consensus base",
                    m.offset
                )));
            }
        }
        for_each_entry(seg, layout.indel_lengths, |e| {
            let cb = consensus
                .get(seg.cons_pos as usize + e.offset as usize)
                .copied()
                .ok_or_else(|| Error::Encoding("mismatch beyond consensus end".into()))?;
            emit_entry(&mut sink, &layout, cb, &e, false)
        })?;
    }
    let streams = sink.streams;
    Ok(streams[StreamId::MBTA.index()].clone())
}

/// One partition's encoded streams.
#[derive(Debug, Clone)]
pub struct EncodedStreams {
    pub streams: [BitWriter; StreamId::COUNT],
    pub breakdown: Breakdown,
}

/// Encode reads (already in stream order) of one partition.
pub fn encode_partition(
    items: &[(usize, &[u8], &Alignment)],
    layout: &Layout,
    schemes: &Schemes,
    consensus: &[u8],
    partition_start: u64,
) -> Result<EncodedStreams> {
    let mut sink = StreamSink::new(schemes);
    let mut prev = partition_start;
    for &(order, read, aln) in items {
        emit_read(&mut sink, layout, consensus, read, aln, &mut prev, order as u64)?;
    }
    Ok(EncodedStreams {
        streams: sink.streams,
        breakdown: sink.breakdown,
    })
}

/// Statistics pass over one partition.
pub fn partition_stats(
    items: &[(usize, &[u8], &Alignment)],
    layout: &Layout,
    consensus: &[u8],
    partition_start: u64,
) -> Result<PartitionStats> {
    let mut stats = PartitionStats::default();
    let mut prev = partition_start;
    for &(order, read, aln) in items {
        emit_read(&mut stats, layout, consensus, read, aln, &mut prev, order as u64)?;
    }
    Ok(stats)
}
