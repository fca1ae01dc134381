//! End-to-end compression and decompression of read sets.
//!
//! Compression aligns every read, settles per-read choices (literal,
//! single, segmented) with a provisional cost model, then searches the
//! encoding switches allowed by the requested [`Ablation`] level, pricing
//! each candidate exactly in container bytes from one statistics pass.

use std::borrow::Cow;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::align::{align_read_outcome, build_index, AlignOutcome, AlignParams, AlignStatus, Alignment};
use crate::container::{
    consensus_digest, hex, partition_positions, Container, Header, PartitionAssignment, PartitionBlob,
};
use crate::decode::{decode_partition, AccessReport, DecodeStats, DecodedRead, PartitionDecoder};
use crate::encode::{
    check_encodable, encode_partition, order_width_for, partition_stats, sort_and_delta, Breakdown, CountSink,
    Layout, PartitionStats, SchemeKind, Schemes, MAX_SEGMENTS,
};
use crate::error::{Error, Result, StreamId};
use crate::seqio::ReadRecord;
use crate::tune::{optimize_classes, BitLenHistogram, ClassScheme};

/// Cumulative optimization levels. Each level allows everything below it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Ablation {
    /// Fixed widths everywhere, unmerged bases/types, explicit corner flags.
    No,
    /// Tuned matching-position classes.
    O1,
    /// Tuned mismatch-position/count classes and indel block lengths.
    O2,
    /// Chimeric segments and merged base/type entries.
    O3,
    /// Corner cases via an artificial offset-0 mismatch.
    O4,
}

impl Ablation {
    pub const ALL: [Ablation; 5] = [Ablation::No, Ablation::O1, Ablation::O2, Ablation::O3, Ablation::O4];

    pub fn name(self) -> &'static str {
        match self {
            Ablation::No => "NO",
            Ablation::O1 => "O1",
            Ablation::O2 => "O2",
            Ablation::O3 => "O3",
            Ablation::O4 => "O4",
        }
    }

    fn tunes(self, kind: SchemeKind) -> bool {
        match kind {
            SchemeKind::MatchPos => self >= Ablation::O1,
            _ => self >= Ablation::O2,
        }
    }
}

impl fmt::Display for Ablation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Ablation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ablation::ALL
            .into_iter()
            .find(|a| a.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Format(format!("unknown optimization level {s:?} (NO, O1..O4)")))
    }
}

#[derive(Debug, Clone)]
pub struct CompressOptions {
    /// Seed length; defaults to the read-mode default.
    pub k: Option<usize>,
    /// Most classes per tuned scheme.
    pub max_classes: usize,
    pub max_segments: usize,
    pub partitions: usize,
    pub preserve_order: bool,
    /// `None` picks long-read mode when the longest read exceeds 1000 bases.
    pub long_read: Option<bool>,
    pub embed_consensus: bool,
    /// Keep read identifiers and qualities in a sidecar.
    pub passthrough: bool,
    pub ablation: Ablation,
    pub threads: usize,
    pub params: Option<AlignParams>,
}

impl Default for CompressOptions {
    fn default() -> Self {
        Self {
            k: None,
            max_classes: 4,
            max_segments: 2,
            partitions: 1,
            preserve_order: false,
            long_read: None,
            embed_consensus: false,
            passthrough: false,
            ablation: Ablation::O4,
            threads: 1,
            params: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CompressStats {
    pub breakdown: Breakdown,
    pub layout: Layout,
    pub schemes: Schemes,
    pub reads: usize,
    pub mapped: usize,
    pub literal: usize,
    pub chimeric: usize,
    pub corner: usize,
    /// Container size the search predicted; equals the built size.
    pub predicted_bytes: u64,
}

#[derive(Debug, Clone)]
pub struct Compressed {
    pub container: Container,
    pub stats: CompressStats,
}

fn run_in_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> T {
    if threads <= 1 {
        return f();
    }
    match rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
        Ok(pool) => pool.install(f),
        Err(_) => f(),
    }
}

pub fn resolve_long_read(reads: &[ReadRecord], opt: Option<bool>) -> bool {
    opt.unwrap_or_else(|| reads.iter().any(|r| r.len() > 1000))
}

pub fn default_params(long_read: bool, opts: &CompressOptions) -> AlignParams {
    let mut p = opts.params.clone().unwrap_or_else(|| {
        if long_read {
            AlignParams::long_reads()
        } else {
            AlignParams::short_reads()
        }
    });
    if let Some(k) = opts.k {
        p.k = k;
    }
    p.max_segments = opts.max_segments.clamp(1, MAX_SEGMENTS);
    p
}

/// Align, decide, tune, encode.
pub fn compress(reads: &[ReadRecord], consensus: &[u8], opts: &CompressOptions) -> Result<Compressed> {
    let long = resolve_long_read(reads, opts.long_read);
    let params = default_params(long, opts);
    let index = build_index(consensus, params.k)?;
    let outcomes: Vec<AlignOutcome> = run_in_pool(opts.threads, || {
        reads
            .par_iter()
            .map(|r| align_read_outcome(&r.bases, &index, &params))
            .collect()
    });
    drop(index);
    compress_aligned(reads, outcomes, consensus, params.k, long, opts)
}

fn has_n(bases: &[u8]) -> bool {
    crate::seqio::contains_n(bases)
}

struct Choices {
    single: Vec<Alignment>,
    /// Present when at least one read is cheaper segmented.
    chimeric: Option<Vec<Alignment>>,
}

/// Schemes fitted to `stats` (tuned where there are values) for pricing
/// per-read alternatives.
fn provisional_schemes(stats: &PartitionStats, max_k: usize) -> Result<Schemes> {
    let mut s = Schemes::fixed_defaults();
    for kind in SchemeKind::ALL {
        let h = &stats.hists[kind.index()];
        if !h.is_empty() {
            *s.get_mut(kind) = optimize_classes(h, max_k)?;
        }
    }
    Ok(s)
}

fn decide(
    reads: &[ReadRecord],
    outcomes: Vec<AlignOutcome>,
    consensus: &[u8],
    long: bool,
    max_segments: usize,
    max_k: usize,
) -> Result<Choices> {
    let layout = Layout {
        long_read: long,
        indel_lengths: long,
        merged: true,
        chimeric: true,
        corner_bit: true,
        max_segments: max_segments as u8,
        ..Layout::default()
    };
    let mut single_out: Vec<Alignment> = Vec::with_capacity(reads.len());
    let mut chim_picks: Vec<(usize, Alignment)> = Vec::new();
    for o in outcomes {
        single_out.push(o.single);
        if let Some(ch) = o.chimeric {
            chim_picks.push((single_out.len() - 1, ch));
        }
    }
    let (order, _) = sort_and_delta(&single_out);
    let items: Vec<(usize, &[u8], &Alignment)> =
        order.iter().map(|&i| (i, reads[i].bases.as_slice(), &single_out[i])).collect();
    let stats = partition_stats(&items, &layout, consensus, 0)?;
    drop(items);
    let schemes = provisional_schemes(&stats, max_k)?;
    let mapped = single_out.iter().filter(|a| a.is_mapped()).count().max(1) as u64;
    let typical = consensus.len() as u64 / mapped;

    let price = |read: &[u8], aln: &Alignment| -> u64 {
        let mut sink = CountSink {
            breakdown: Breakdown::default(),
            schemes: &schemes,
            lenient: true,
        };
        let mut prev = aln.primary_pos().map_or(0, |p| p.saturating_sub(typical));
        match crate::encode::emit_read(&mut sink, &layout, consensus, read, aln, &mut prev, 0) {
            Ok(()) => sink.breakdown.total(),
            Err(_) => u64::MAX,
        }
    };

    // Literal pricing only looks at the read itself.
    let literal = Alignment {
        segments: Vec::new(),
        clip_head: Vec::new(),
        clip_tail: Vec::new(),
        status: AlignStatus::Literal,
    };
    for (read, single) in reads.iter().zip(single_out.iter_mut()) {
        let bases = &read.bases;
        if single.is_mapped() && !has_n(bases) && price(bases, &literal) <= price(bases, single) {
            *single = Alignment::literal(bases);
        }
    }
    let mut chosen = Vec::new();
    if max_segments >= 2 {
        for (i, ch) in chim_picks {
            let bases = &reads[i].bases;
            if !has_n(bases) && price(bases, &ch) < price(bases, &single_out[i]) {
                chosen.push((i, ch));
            }
        }
    }
    let chimeric = (!chosen.is_empty()).then(|| {
        let mut all = single_out.clone();
        for (i, ch) in chosen {
            all[i] = ch;
        }
        all
    });
    Ok(Choices {
        single: single_out,
        chimeric,
    })
}

/// Split a scheme's cost on `hist` into guide and payload bits.
fn split_cost(hist: &BitLenHistogram, scheme: &ClassScheme) -> Result<(u64, u64)> {
    let (mut guide, mut payload) = (0u64, 0u64);
    for (bits, count) in hist.iter() {
        let class = (0..scheme.num_classes())
            .find(|&c| scheme.width(c) >= bits)
            .ok_or_else(|| Error::Scheme(format!("{bits}-bit value not covered")))?;
        guide += count * scheme.code_len(class) as u64;
        payload += count * scheme.width(class) as u64;
    }
    Ok((guide, payload))
}

/// Stream bytes of all partitions under `schemes`.
fn stream_bytes(stats: &[PartitionStats], schemes: &Schemes) -> Result<u64> {
    let mut total = 0u64;
    for ps in stats {
        let mut bits = ps.raw_stream_bits;
        for kind in SchemeKind::ALL {
            let (g, p) = kind.streams();
            let (gb, pb) = split_cost(&ps.hists[kind.index()], schemes.get(kind))?;
            bits[g.index()] += gb;
            bits[p.index()] += pb;
        }
        total += bits.iter().map(|b| b.div_ceil(8)).sum::<u64>();
    }
    Ok(total)
}

struct Plan {
    /// Original read indices in stream order.
    order: Vec<usize>,
    parts: Vec<PartitionAssignment>,
}

fn plan(alns: &[Alignment], p: usize, consensus_len: u64) -> Plan {
    let (order, _) = sort_and_delta(alns);
    let positions: Vec<Option<u64>> = order.iter().map(|&i| alns[i].primary_pos()).collect();
    let parts = if alns.is_empty() {
        Vec::new()
    } else {
        partition_positions(&positions, p, consensus_len)
    };
    Plan { order, parts }
}

fn items_of<'a>(
    plan: &Plan,
    part: &PartitionAssignment,
    reads: &'a [ReadRecord],
    alns: &'a [Alignment],
) -> Vec<(usize, &'a [u8], &'a Alignment)> {
    part.members
        .iter()
        .map(|&m| {
            let i = plan.order[m];
            (i, reads[i].bases.as_slice(), &alns[i])
        })
        .collect()
}

struct Candidate {
    bytes: u64,
    variant: usize,
    layout: Layout,
    schemes: Schemes,
}

/// Fields of the header that do not depend on the search.
struct HeaderBase {
    consensus_len: u64,
    consensus_hash: [u8; 32],
    k: u16,
    read_count: u64,
    embedded: Option<Vec<u8>>,
}

impl HeaderBase {
    fn header(&self, layout: &Layout, schemes: &Schemes, partitions: usize, has_literals: bool) -> Header {
        Header {
            layout: layout.clone(),
            has_literals,
            passthrough: false,
            consensus_len: self.consensus_len,
            consensus_hash: self.consensus_hash,
            k: self.k,
            read_count: self.read_count,
            partition_count: partitions as u16,
            schemes: schemes.clone(),
            embedded_consensus: self.embedded.clone(),
        }
    }
}

/// Encoding-stage entry point for alignments computed elsewhere.
pub fn compress_aligned(
    reads: &[ReadRecord],
    outcomes: Vec<AlignOutcome>,
    consensus: &[u8],
    k: usize,
    long: bool,
    opts: &CompressOptions,
) -> Result<Compressed> {
    if outcomes.len() != reads.len() {
        return Err(Error::Encoding("one alignment outcome per read required".into()));
    }
    if opts.partitions == 0 || opts.partitions > u16::MAX as usize {
        return Err(Error::Encoding(format!("partition count {} outside 1..=65535", opts.partitions)));
    }
    if !(1..=crate::tune::MAX_CLASSES).contains(&opts.max_classes) {
        return Err(Error::Encoding(format!("max classes {} outside 1..=8", opts.max_classes)));
    }
    let max_segments = opts.max_segments.clamp(1, MAX_SEGMENTS);
    let choices = decide(reads, outcomes, consensus, long, max_segments, opts.max_classes)?;
    let mut variants = vec![choices.single];
    if opts.ablation >= Ablation::O3 {
        if let Some(ch) = choices.chimeric {
            variants.push(ch);
        }
    }
    for v in &variants {
        for (r, a) in reads.iter().zip(v) {
            check_encodable(a, &r.bases, consensus)?;
        }
    }

    let preserve = opts.preserve_order || opts.passthrough;
    let fixed_read_len = match reads.first() {
        Some(r) if reads.iter().all(|x| x.len() == r.len()) => Some(r.len() as u32),
        _ => None,
    };
    let base = HeaderBase {
        consensus_len: consensus.len() as u64,
        consensus_hash: consensus_digest(consensus),
        k: k as u16,
        read_count: reads.len() as u64,
        embedded: opts.embed_consensus.then(|| consensus.to_vec()),
    };
    let p = if reads.is_empty() { 0 } else { opts.partitions };

    let toggles = |allowed: bool| if allowed { vec![false, true] } else { vec![false] };
    let mut best: Option<Candidate> = None;
    let plans: Vec<Plan> = variants.iter().map(|v| plan(v, p, consensus.len() as u64)).collect();
    for (vi, alns) in variants.iter().enumerate() {
        let plan = &plans[vi];
        let has_literals = alns.iter().any(|a| !a.is_mapped());
        for merged in toggles(opts.ablation >= Ablation::O3) {
            for indel_lengths in toggles(opts.ablation >= Ablation::O2 && long) {
                for corner_bit in toggles(opts.ablation >= Ablation::O4) {
                    let layout = Layout {
                        long_read: long,
                        indel_lengths,
                        merged,
                        chimeric: vi == 1,
                        corner_bit,
                        preserve_order: preserve,
                        fixed_read_len,
                        order_width: if preserve { order_width_for(reads.len() as u64) } else { 0 },
                        max_segments: max_segments as u8,
                    };
                    let stats: Vec<PartitionStats> = run_in_pool(opts.threads, || {
                        plan.parts
                            .par_iter()
                            .map(|part| partition_stats(&items_of(plan, part, reads, alns), &layout, consensus, part.start))
                            .collect::<Result<Vec<_>>>()
                    })?;
                    let mut global = vec![BitLenHistogram::new(); 4];
                    for ps in &stats {
                        for kind in SchemeKind::ALL {
                            global[kind.index()].merge(&ps.hists[kind.index()]);
                        }
                    }
                    let mut options: Vec<Vec<ClassScheme>> = Vec::with_capacity(4);
                    for kind in SchemeKind::ALL {
                        let h = &global[kind.index()];
                        let width = kind.default_fixed_width().max(h.max_bit_len().unwrap_or(1));
                        let mut opts_k = vec![ClassScheme::fixed(width)?];
                        if opts.ablation.tunes(kind) && !h.is_empty() {
                            opts_k.push(optimize_classes(h, opts.max_classes)?);
                        }
                        options.push(opts_k);
                    }
                    for a in &options[0] {
                        for b in &options[1] {
                            for c in &options[2] {
                                for d in &options[3] {
                                    let schemes = Schemes {
                                        mapos: a.clone(),
                                        mmpos: b.clone(),
                                        count: c.clone(),
                                        side: d.clone(),
                                    };
                                    let head = base.header(&layout, &schemes, p, has_literals).to_bytes()?.len() as u64;
                                    let bytes = head + stream_bytes(&stats, &schemes)?;
                                    if best.as_ref().is_none_or(|b| bytes < b.bytes) {
                                        best = Some(Candidate {
                                            bytes,
                                            variant: vi,
                                            layout: layout.clone(),
                                            schemes,
                                        });
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    let best = best.expect("at least one configuration");
    log::debug!("chosen layout {:?} at {} bytes before table", best.layout, best.bytes);

    let alns = &variants[best.variant];
    let plan = &plans[best.variant];
    let has_literals = alns.iter().any(|a| !a.is_mapped());
    let encoded = run_in_pool(opts.threads, || {
        plan.parts
            .par_iter()
            .map(|part| {
                let items = items_of(plan, part, reads, alns);
                encode_partition(&items, &best.layout, &best.schemes, consensus, part.start).map(|e| (part, items.len(), e))
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let mut breakdown = Breakdown::default();
    let blobs: Vec<PartitionBlob> = encoded
        .into_iter()
        .map(|(part, n, e)| {
            breakdown.merge(&e.breakdown);
            PartitionBlob {
                start: part.start,
                end: part.end,
                read_count: n as u64,
                streams: e.streams,
            }
        })
        .collect();
    let sidecar = opts.passthrough.then(|| build_sidecar(reads));
    let header = base.header(&best.layout, &best.schemes, p, has_literals);
    let container = Container::build(header, &blobs, sidecar.as_deref())?;
    let predicted = best.bytes
        + (p * crate::container::TABLE_ENTRY_LEN + 4) as u64
        + sidecar.as_ref().map_or(0, |s| s.len() as u64 + 12);
    debug_assert_eq!(predicted, container.len() as u64);

    let mapped = alns.iter().filter(|a| a.is_mapped()).count();
    let stats = CompressStats {
        breakdown,
        layout: best.layout.clone(),
        schemes: best.schemes.clone(),
        reads: reads.len(),
        mapped,
        literal: reads.len() - mapped,
        chimeric: alns.iter().filter(|a| a.segments.len() > 1).count(),
        corner: reads
            .iter()
            .zip(alns)
            .filter(|(r, a)| a.is_mapped() && (has_n(&r.bases) || a.has_clips()))
            .count(),
        predicted_bytes: predicted,
    };
    Ok(Compressed { container, stats })
}

/// Encode explicit alignments with explicit schemes and switches, skipping
/// the search. Alignments must reproduce their reads.
pub fn encode_with(
    reads: &[ReadRecord],
    alignments: &[Alignment],
    consensus: &[u8],
    k: u16,
    layout: &Layout,
    schemes: &Schemes,
    partitions: usize,
) -> Result<Container> {
    if reads.len() != alignments.len() {
        return Err(Error::Encoding("one alignment per read required".into()));
    }
    for (r, a) in reads.iter().zip(alignments) {
        check_encodable(a, &r.bases, consensus)?;
        if crate::align::reconstruct(a, consensus)? != r.bases {
            return Err(Error::Encoding(format!("alignment of {} does not reproduce the read", r.id)));
        }
    }
    let p = if reads.is_empty() { 0 } else { partitions.max(1) };
    let plan = plan(alignments, p, consensus.len() as u64);
    let mut blobs = Vec::with_capacity(p);
    for part in &plan.parts {
        let items = items_of(&plan, part, reads, alignments);
        let e = encode_partition(&items, layout, schemes, consensus, part.start)?;
        blobs.push(PartitionBlob {
            start: part.start,
            end: part.end,
            read_count: items.len() as u64,
            streams: e.streams,
        });
    }
    let header = Header {
        layout: layout.clone(),
        has_literals: alignments.iter().any(|a| !a.is_mapped()),
        passthrough: false,
        consensus_len: consensus.len() as u64,
        consensus_hash: consensus_digest(consensus),
        k,
        read_count: reads.len() as u64,
        partition_count: p as u16,
        schemes: schemes.clone(),
        embedded_consensus: None,
    };
    Container::build(header, &blobs, None)
}

/// Identifiers and qualities in original read order:
/// per read `u32 id_len | id | u32 qual_len | qual`.
pub fn build_sidecar(reads: &[ReadRecord]) -> Vec<u8> {
    let mut out = Vec::new();
    for r in reads {
        out.extend_from_slice(&(r.id.len() as u32).to_le_bytes());
        out.extend_from_slice(r.id.as_bytes());
        let q = r.qual.as_deref().unwrap_or(&[]);
        out.extend_from_slice(&(q.len() as u32).to_le_bytes());
        out.extend_from_slice(q);
    }
    out
}

pub fn parse_sidecar(bytes: &[u8], n: usize) -> Result<Vec<(String, Option<Vec<u8>>)>> {
    let mut out = Vec::with_capacity(n);
    let mut pos = 0usize;
    let field = |pos: &mut usize| -> Result<&[u8]> {
        let bad = || Error::Format("truncated sidecar record".into());
        let len_bytes = bytes.get(*pos..*pos + 4).ok_or_else(bad)?;
        let len = u32::from_le_bytes(len_bytes.try_into().expect("4 bytes")) as usize;
        let s = bytes.get(*pos + 4..*pos + 4 + len).ok_or_else(bad)?;
        *pos += 4 + len;
        Ok(s)
    };
    for _ in 0..n {
        let id = String::from_utf8(field(&mut pos)?.to_vec()).map_err(|_| Error::Format("sidecar id is not UTF-8".into()))?;
        let q = field(&mut pos)?;
        out.push((id, (!q.is_empty()).then(|| q.to_vec())));
    }
    if pos != bytes.len() {
        return Err(Error::Format("trailing bytes in sidecar".into()));
    }
    Ok(out)
}

/// The consensus to decode against: embedded, or supplied and matching the
/// header digest.
pub fn resolve_consensus<'a>(container: &'a Container, supplied: Option<&'a [u8]>) -> Result<Cow<'a, [u8]>> {
    let h = &container.header;
    let cons: &[u8] = match (supplied, &h.embedded_consensus) {
        (Some(c), _) => c,
        (None, Some(e)) => e,
        (None, None) => {
            return Err(Error::Format(
                "container does not embed its consensus; supply the reference".into(),
            ))
        }
    };
    let digest = consensus_digest(cons);
    if digest != h.consensus_hash || cons.len() as u64 != h.consensus_len {
        return Err(Error::ConsensusMismatch {
            expected: hex(&h.consensus_hash),
            found: hex(&digest),
        });
    }
    Ok(Cow::Borrowed(cons))
}

#[derive(Debug, Clone, Default)]
pub struct DecompressOptions {
    pub threads: usize,
    /// Skip partitions that fail instead of aborting.
    pub best_effort: bool,
    /// Restore input order when the container carries order indices.
    pub preserve_order: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RecoveredRead {
    pub bases: Vec<u8>,
    pub id: Option<String>,
    pub qual: Option<Vec<u8>>,
    pub index: Option<u64>,
}

#[derive(Debug)]
pub struct Decompressed {
    pub reads: Vec<RecoveredRead>,
    pub reports: Vec<AccessReport>,
    /// Partitions skipped under best-effort decoding.
    pub failed: Vec<(usize, Error)>,
}

fn attach(reads: Vec<DecodedRead>, side: Option<&[(String, Option<Vec<u8>>)]>) -> Vec<RecoveredRead> {
    reads
        .into_iter()
        .map(|r| {
            let meta = side.and_then(|s| r.index.and_then(|i| s.get(i as usize)));
            RecoveredRead {
                bases: r.bases,
                id: meta.map(|m| m.0.clone()),
                qual: meta.and_then(|m| m.1.clone()),
                index: r.index,
            }
        })
        .collect()
}

/// Decode every partition (in parallel when `threads > 1`).
pub fn decompress(container: &Container, consensus: Option<&[u8]>, opts: &DecompressOptions) -> Result<Decompressed> {
    let cons = resolve_consensus(container, consensus)?;
    let h = &container.header;
    let side = match container.sidecar()? {
        Some(bytes) => Some(parse_sidecar(bytes, h.read_count as usize)?),
        None => None,
    };
    let n = container.partitions.len();
    let results: Vec<Result<(Vec<DecodedRead>, AccessReport)>> = run_in_pool(opts.threads, || {
        (0..n)
            .into_par_iter()
            .map(|i| {
                let input = container.partition_input(i)?;
                decode_partition(input, &h.layout, &h.schemes, &cons, false).map(|(r, a, _)| (r, a))
            })
            .collect()
    });
    let mut reads = Vec::with_capacity(h.read_count as usize);
    let mut reports = Vec::with_capacity(n);
    let mut failed = Vec::new();
    for (i, r) in results.into_iter().enumerate() {
        match r {
            Ok((rs, rep)) => {
                reads.extend(rs);
                reports.push(rep);
            }
            Err(e) if opts.best_effort => {
                log::warn!("partition {i} skipped: {e}");
                failed.push((i, e));
            }
            Err(e) => return Err(e),
        }
    }
    if opts.preserve_order && h.layout.preserve_order {
        reads.sort_by_key(|r| r.index);
    }
    Ok(Decompressed {
        reads: attach(reads, side.as_deref()),
        reports,
        failed,
    })
}

/// Decode partition by partition, handing each read to `f` as soon as it is
/// reconstructed.
pub fn decode_streaming(
    container: &Container,
    consensus: Option<&[u8]>,
    mut f: impl FnMut(DecodedRead) -> Result<()>,
) -> Result<Vec<AccessReport>> {
    let cons = resolve_consensus(container, consensus)?;
    let h = &container.header;
    let mut reports = Vec::with_capacity(container.partitions.len());
    for i in 0..container.partitions.len() {
        let input = container.partition_input(i)?;
        let mut dec = PartitionDecoder::new(input, &h.layout, &h.schemes, &cons);
        while let Some(r) = dec.next_read()? {
            f(r)?;
        }
        let (report, _) = dec.finish()?;
        crate::decode::audit_streaming(&report)?;
        reports.push(report);
    }
    Ok(reports)
}

/// Decode while collecting value distributions.
pub fn collect_stats(container: &Container, consensus: Option<&[u8]>) -> Result<DecodeStats> {
    let cons = resolve_consensus(container, consensus)?;
    let h = &container.header;
    let mut all = DecodeStats::default();
    for i in 0..container.partitions.len() {
        let input = container.partition_input(i)?;
        let (_, _, stats) = decode_partition(input, &h.layout, &h.schemes, &cons, true)?;
        all.merge(&stats.expect("requested"));
    }
    Ok(all)
}

/// Per-stream payload bits summed over partitions.
pub fn stream_bits(container: &Container) -> [u64; StreamId::COUNT] {
    let mut out = [0u64; StreamId::COUNT];
    for e in &container.partitions {
        for id in StreamId::ALL {
            out[id.index()] += e.stream_bits(id);
        }
    }
    out
}

#[cfg(test)]
mod tests;
