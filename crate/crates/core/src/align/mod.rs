//! Compression-time matching of reads against the consensus.
//!
//! Candidates come from k-mer seed voting on both strands; hits are grouped
//! by diagonal, chained, and the best candidates are extended with a banded
//! fitting alignment that follows the chain. Reads whose single best
//! placement is poor may be split into up to `max_segments` pieces placed
//! independently (chimeric reads). Unaligned read ends become clips, and a
//! read with no acceptable placement is stored literally.

pub mod dp;
mod index;

use std::ops::Range;

use crate::error::{Error, Result};
use crate::seqio::{base_code, reverse_complement, reverse_complement_in_place};

use dp::{banded_fit, global_banded, glocal, Col, Fit};
pub use dp::{edit_distance, fitting_distance};
pub use index::{build_index, kmer_code, ConsensusIndex};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MismatchKind {
    Sub,
    Ins,
    Del,
}

/// One difference between a segment and its consensus slice. `offset` is in
/// consensus coordinates relative to the segment's `cons_pos`; an insertion
/// at `offset` goes before that consensus base.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mismatch {
    pub offset: u32,
    pub kind: MismatchKind,
    pub block_len: u32,
    pub payload: Vec<u8>,
}

impl Mismatch {
    pub fn sub(offset: u32, base: u8) -> Self {
        Self {
            offset,
            kind: MismatchKind::Sub,
            block_len: 1,
            payload: vec![base],
        }
    }

    pub fn ins(offset: u32, bases: Vec<u8>) -> Self {
        Self {
            offset,
            kind: MismatchKind::Ins,
            block_len: bases.len() as u32,
            payload: bases,
        }
    }

    pub fn del(offset: u32, len: u32) -> Self {
        Self {
            offset,
            kind: MismatchKind::Del,
            block_len: len,
            payload: Vec::new(),
        }
    }

    /// Consensus bases this mismatch consumes.
    pub fn cons_len(&self) -> u32 {
        match self.kind {
            MismatchKind::Sub => 1,
            MismatchKind::Ins => 0,
            MismatchKind::Del => self.block_len,
        }
    }

    pub fn edit_cost(&self) -> u32 {
        self.block_len
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Segment {
    pub cons_pos: u64,
    /// The read piece is the reverse complement of the patched consensus slice.
    pub rev: bool,
    pub read_span: Range<usize>,
    pub mismatches: Vec<Mismatch>,
}

impl Segment {
    pub fn span_len(&self) -> usize {
        self.read_span.len()
    }

    /// Consensus bases covered by this segment.
    pub fn cons_len(&self) -> u64 {
        let mut len = self.span_len() as i64;
        for m in &self.mismatches {
            match m.kind {
                MismatchKind::Ins => len -= m.block_len as i64,
                MismatchKind::Del => len += m.block_len as i64,
                MismatchKind::Sub => {}
            }
        }
        len.max(0) as u64
    }

    pub fn edit_cost(&self) -> u64 {
        self.mismatches.iter().map(|m| m.edit_cost() as u64).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AlignStatus {
    Mapped,
    Literal,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Alignment {
    pub segments: Vec<Segment>,
    pub clip_head: Vec<u8>,
    pub clip_tail: Vec<u8>,
    pub status: AlignStatus,
}

impl Alignment {
    /// The whole read carried verbatim.
    pub fn literal(read: &[u8]) -> Self {
        Self {
            segments: Vec::new(),
            clip_head: read.to_vec(),
            clip_tail: Vec::new(),
            status: AlignStatus::Literal,
        }
    }

    pub fn is_mapped(&self) -> bool {
        self.status == AlignStatus::Mapped
    }

    pub fn is_chimeric(&self) -> bool {
        self.segments.len() > 1
    }

    pub fn primary(&self) -> Option<&Segment> {
        self.segments.first()
    }

    pub fn primary_pos(&self) -> Option<u64> {
        self.primary().map(|s| s.cons_pos)
    }

    pub fn has_clips(&self) -> bool {
        self.is_mapped() && !(self.clip_head.is_empty() && self.clip_tail.is_empty())
    }

    pub fn mismatch_count(&self) -> usize {
        self.segments.iter().map(|s| s.mismatches.len()).sum()
    }

    pub fn edit_cost(&self) -> u64 {
        self.segments.iter().map(Segment::edit_cost).sum()
    }

    pub fn read_len(&self) -> usize {
        self.clip_head.len() + self.segments.iter().map(Segment::span_len).sum::<usize>() + self.clip_tail.len()
    }

    /// Structural invariants: spans ordered and contiguous between the clips,
    /// offsets increasing, literal alignments segment-free.
    pub fn check_invariants(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Align(m));
        match self.status {
            AlignStatus::Literal => {
                if !self.segments.is_empty() || !self.clip_tail.is_empty() {
                    return fail("literal alignment carries segments or a tail clip".into());
                }
            }
            AlignStatus::Mapped => {
                if self.segments.is_empty() {
                    return fail("mapped alignment without segments".into());
                }
                let mut expect = self.clip_head.len();
                for (i, seg) in self.segments.iter().enumerate() {
                    if seg.read_span.start != expect || seg.read_span.is_empty() {
                        return fail(format!("segment {i} span {:?} does not continue at {expect}", seg.read_span));
                    }
                    expect = seg.read_span.end;
                    check_mismatch_order(&seg.mismatches).map_err(|m| Error::Align(format!("segment {i}: {m}")))?;
                }
            }
        }
        Ok(())
    }
}

fn check_mismatch_order(mms: &[Mismatch]) -> std::result::Result<(), String> {
    let mut next_free = 0u64;
    let mut last: Option<&Mismatch> = None;
    for m in mms {
        if m.block_len == 0 {
            return Err(format!("empty block at offset {}", m.offset));
        }
        if let Some(prev) = last {
            if m.offset <= prev.offset {
                return Err(format!("offsets not increasing: {} after {}", m.offset, prev.offset));
            }
        }
        if (m.offset as u64) < next_free {
            return Err(format!("mismatch at {} overlaps a deletion", m.offset));
        }
        next_free = m.offset as u64 + m.cons_len() as u64;
        last = Some(m);
    }
    Ok(())
}

/// Forward-strand bases of `seg` (before any reverse complement).
fn patch_consensus(seg: &Segment, consensus: &[u8], out: &mut Vec<u8>) -> Result<()> {
    let start = seg.cons_pos as usize;
    let span = seg.span_len();
    let out_start = out.len();
    let mut cursor = start;
    let oob = |what: &str| Error::Align(format!("segment at {start}: {what} outside consensus"));
    for m in &seg.mismatches {
        let target = start + m.offset as usize;
        if target < cursor {
            return Err(Error::Align(format!("mismatch offset {} behind cursor", m.offset)));
        }
        out.extend_from_slice(consensus.get(cursor..target).ok_or_else(|| oob("copy"))?);
        cursor = target;
        match m.kind {
            MismatchKind::Sub => {
                out.push(m.payload[0]);
                cursor += 1;
            }
            MismatchKind::Ins => out.extend_from_slice(&m.payload),
            MismatchKind::Del => cursor += m.block_len as usize,
        }
        if cursor > consensus.len() {
            return Err(oob("mismatch"));
        }
    }
    let have = out.len() - out_start;
    if have > span {
        return Err(Error::Align(format!("segment at {start} produces {have} bases for span {span}")));
    }
    let rest = span - have;
    out.extend_from_slice(consensus.get(cursor..cursor + rest).ok_or_else(|| oob("tail copy"))?);
    Ok(())
}

/// Read-orientation bases of one segment.
pub fn apply_segment(seg: &Segment, consensus: &[u8]) -> Result<Vec<u8>> {
    let mut out = Vec::with_capacity(seg.span_len());
    patch_consensus(seg, consensus, &mut out)?;
    if seg.rev {
        reverse_complement_in_place(&mut out);
    }
    Ok(out)
}

/// Rebuild the read described by `aln`. This is the reference the streaming
/// decoder is checked against.
pub fn reconstruct(aln: &Alignment, consensus: &[u8]) -> Result<Vec<u8>> {
    let mut out = aln.clip_head.clone();
    for seg in &aln.segments {
        out.extend_from_slice(&apply_segment(seg, consensus)?);
    }
    out.extend_from_slice(&aln.clip_tail);
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlignParams {
    pub k: usize,
    /// Edits per aligned base above which a placement is rejected.
    pub max_edit_rate: f64,
    /// Half-width of the DP band around the seed chain.
    pub band: usize,
    pub max_segments: usize,
    pub min_seed_hits: usize,
    pub seed_stride: usize,
    /// Seeds with more consensus occurrences than this do not vote.
    pub max_seed_occ: usize,
    /// Candidates extended per read.
    pub max_candidates: usize,
}

impl AlignParams {
    pub fn short_reads() -> Self {
        Self {
            k: 15,
            max_edit_rate: 0.10,
            band: 16,
            max_segments: 2,
            min_seed_hits: 2,
            seed_stride: 4,
            max_seed_occ: 64,
            max_candidates: 3,
        }
    }

    pub fn long_reads() -> Self {
        Self {
            k: 17,
            max_edit_rate: 0.25,
            band: 32,
            max_segments: 2,
            min_seed_hits: 2,
            seed_stride: 2,
            max_seed_occ: 64,
            max_candidates: 3,
        }
    }
}

/// Bit-cost model used to choose between encodings of one read.
pub trait BitCost: Sync {
    fn alignment_bits(&self, read: &[u8], aln: &Alignment) -> u64;
}

/// Rough stand-in for the encoder's estimator, for callers without tuned
/// schemes.
#[derive(Debug, Clone, Copy, Default)]
pub struct RoughCost;

impl BitCost for RoughCost {
    fn alignment_bits(&self, read: &[u8], aln: &Alignment) -> u64 {
        if !aln.is_mapped() {
            return 1 + 33 + 2 * read.len() as u64;
        }
        let mut bits = 24;
        for (i, seg) in aln.segments.iter().enumerate() {
            bits += 6 + if i > 0 { 28 } else { 0 };
            for m in &seg.mismatches {
                bits += 10 + 2 * m.payload.len() as u64 + (m.kind != MismatchKind::Sub) as u64 * 3;
            }
        }
        if aln.has_clips() {
            bits += 40 + 2 * (aln.clip_head.len() + aln.clip_tail.len()) as u64;
        }
        bits
    }
}

/// The single best placement and, when warranted, a segmented alternative.
#[derive(Debug, Clone)]
pub struct AlignOutcome {
    pub single: Alignment,
    pub chimeric: Option<Alignment>,
}

impl AlignOutcome {
    /// Keep the segmentation only if it is cheaper; fall back to a literal if
    /// that is cheaper still.
    pub fn choose(self, read: &[u8], cost: &dyn BitCost) -> Alignment {
        let mut best = self.single;
        if let Some(ch) = self.chimeric {
            if cost.alignment_bits(read, &ch) < cost.alignment_bits(read, &best) {
                best = ch;
            }
        }
        if best.is_mapped() {
            let lit = Alignment::literal(read);
            if cost.alignment_bits(read, &lit) <= cost.alignment_bits(read, &best) {
                return lit;
            }
        }
        best
    }
}

#[derive(Debug, Clone)]
struct Candidate {
    rev: bool,
    /// Colinear `(query offset, consensus position)` seed anchors.
    chain: Vec<(u32, u32)>,
    votes: usize,
    start_est: i64,
}

impl Candidate {
    /// Read interval (forward coordinates) covered by the chain.
    fn fwd_interval(&self, n: usize, k: usize) -> Range<usize> {
        let qlo = self.chain.first().map(|a| a.0 as usize).unwrap_or(0);
        let qhi = self.chain.last().map(|a| a.0 as usize + k).unwrap_or(0).min(n);
        if self.rev {
            n - qhi..n - qlo
        } else {
            qlo..qhi
        }
    }
}

fn seed_hits(seq: &[u8], index: &ConsensusIndex, params: &AlignParams) -> Vec<(i64, u32, u32)> {
    let k = index.k();
    if seq.len() < k {
        return Vec::new();
    }
    let last = seq.len() - k;
    let stride = params.seed_stride.max(1);
    let mut hits = Vec::with_capacity(last / stride + 2);
    let mask = if k == 32 { u64::MAX } else { (1u64 << (2 * k)) - 1 };
    // Rolling code over the read; `run` counts trailing A/C/G/T bases.
    let (mut code, mut run) = (0u64, 0usize);
    let mut next = 0usize;
    for (i, &b) in seq.iter().enumerate() {
        match base_code(b) {
            Some(c) => {
                code = ((code << 2) | c as u64) & mask;
                run += 1;
            }
            None => run = 0,
        }
        if i + 1 < k {
            continue;
        }
        let q = i + 1 - k;
        if q != next {
            continue;
        }
        if run >= k {
            let pos = index.lookup(code);
            if pos.len() <= params.max_seed_occ {
                for &p in pos {
                    hits.push((p as i64 - q as i64, q as u32, p));
                }
            }
        }
        if q == last {
            break;
        }
        next = (q + stride).min(last);
    }
    hits
}

/// Longest chain strictly increasing in both query and consensus.
fn chain_anchors(mut pts: Vec<(u32, u32)>) -> Vec<(u32, u32)> {
    pts.sort_by(|a, b| a.0.cmp(&b.0).then(b.1.cmp(&a.1)));
    let mut tails: Vec<usize> = Vec::new();
    let mut prev = vec![usize::MAX; pts.len()];
    for i in 0..pts.len() {
        let p = pts[i].1;
        let slot = tails.partition_point(|&t| pts[t].1 < p);
        if slot > 0 {
            prev[i] = tails[slot - 1];
        }
        if slot == tails.len() {
            tails.push(i);
        } else {
            tails[slot] = i;
        }
    }
    let mut out = Vec::with_capacity(tails.len());
    let mut cur = tails.last().copied().unwrap_or(usize::MAX);
    while cur != usize::MAX {
        out.push(pts[cur]);
        cur = prev[cur];
    }
    out.reverse();
    out
}

fn collect_candidates(read: &[u8], rc: &[u8], index: &ConsensusIndex, params: &AlignParams) -> Vec<Candidate> {
    let mut out = Vec::new();
    let tol = params.band.max(8) as i64;
    for (rev, seq) in [(false, read), (true, rc)] {
        let mut hits = seed_hits(seq, index, params);
        hits.sort_unstable();
        let mut start = 0;
        while start < hits.len() {
            let mut end = start + 1;
            while end < hits.len() && hits[end].0 - hits[end - 1].0 <= tol {
                end += 1;
            }
            let chain = chain_anchors(hits[start..end].iter().map(|h| (h.1, h.2)).collect());
            if chain.len() >= params.min_seed_hits.max(1) {
                let (q0, p0) = chain[0];
                out.push(Candidate {
                    rev,
                    votes: chain.len(),
                    start_est: p0 as i64 - q0 as i64,
                    chain,
                });
            }
            start = end;
        }
    }
    out.sort_by(|a, b| {
        b.votes
            .cmp(&a.votes)
            .then(a.start_est.cmp(&b.start_est))
            .then(a.rev.cmp(&b.rev))
    });
    out
}

/// Expected consensus boundary for each query row, interpolated along the chain.
fn band_centers(chain: &[(u32, u32)], n: usize) -> Vec<i64> {
    let mut centers = Vec::with_capacity(n + 1);
    let (fq, fp) = (chain[0].0 as i64, chain[0].1 as i64);
    let (lq, lp) = {
        let l = chain[chain.len() - 1];
        (l.0 as i64, l.1 as i64)
    };
    let mut seg = 0usize;
    for i in 0..=n as i64 {
        let c = if i <= fq {
            fp - (fq - i)
        } else if i >= lq {
            lp + (i - lq)
        } else {
            while (chain[seg + 1].0 as i64) < i {
                seg += 1;
            }
            let (aq, ap) = (chain[seg].0 as i64, chain[seg].1 as i64);
            let (bq, bp) = (chain[seg + 1].0 as i64, chain[seg + 1].1 as i64);
            ap + (i - aq) * (bp - ap) / (bq - aq)
        };
        centers.push(c);
    }
    centers
}

/// Largest DP matrix spent on one gap between exact runs.
const MAX_GAP_CELLS: usize = 1 << 22;
/// Gaps larger than this are filled with a banded DP.
const BANDED_GAP_CELLS: usize = 1 << 12;
const GAP_BAND_SLACK: usize = 16;
const END_CAP: usize = 256;

/// Exact-match runs `(query, consensus, len)` implied by overlapping seeds
/// of length `k` on one diagonal, trimmed so runs never overlap.
fn exact_runs(chain: &[(u32, u32)], k: usize) -> Vec<(usize, usize, usize)> {
    let mut runs: Vec<(usize, usize, usize)> = Vec::new();
    for &(q, p) in chain {
        let (q, p) = (q as usize, p as usize);
        if let Some(last) = runs.last_mut() {
            let (lq, lp, ll) = *last;
            if p as i64 - q as i64 == lp as i64 - lq as i64 && q <= lq + ll {
                last.2 = ll.max(q + k - lq);
                continue;
            }
            let shift = (lq + ll).saturating_sub(q).max((lp + ll).saturating_sub(p));
            if shift >= k {
                continue;
            }
            runs.push((q + shift, p + shift, k - shift));
        } else {
            runs.push((q, p, k));
        }
    }
    runs
}

/// Alignment stitched from exact seed runs, with small DPs for the read
/// ends and the gaps between runs.
fn chain_fit(query: &[u8], cons: &[u8], chain: &[(u32, u32)], k: usize, band: usize) -> Option<Fit> {
    let runs = exact_runs(chain, k);
    let &(q0, p0, _) = runs.first()?;
    if runs.iter().any(|&(q, p, l)| q + l > query.len() || p + l > cons.len()) {
        return None;
    }
    let mut cols = Vec::with_capacity(query.len() + 16);
    let mut edits = 0u32;

    // Read ends far beyond the outermost seeds are left unaligned
    // (inserted) past END_CAP bases; clipping removes them later.
    let h0 = q0.saturating_sub(END_CAP);
    cols.extend(std::iter::repeat_n(Col::Ins, h0));
    edits += h0 as u32;
    let hl = q0 - h0;
    let slack = band + hl / 4;
    let ws = p0.saturating_sub(hl + slack);
    let (hs, head, e) = glocal(&query[h0..q0], &cons[ws..p0], true, false, MAX_GAP_CELLS)?;
    let cons_start = ws + hs;
    cols.extend(head);
    edits += e;

    for (i, &(q, p, l)) in runs.iter().enumerate() {
        cols.extend(std::iter::repeat_n(Col::Match, l));
        let (qe, pe) = (q + l, p + l);
        if let Some(&(nq, np, _)) = runs.get(i + 1) {
            let (gq, gc) = (&query[qe..nq], &cons[pe..np]);
            let cells = (gq.len() + 1) * (gc.len() + 1);
            if cells > MAX_GAP_CELLS {
                return None;
            }
            let hamming = (gq.len() == gc.len()).then(|| gq.iter().zip(gc).filter(|(a, b)| a != b).count());
            let (gap, e) = if let Some(h @ 0..=1) = hamming {
                // equal lengths and at most one difference: already optimal
                let cols = gq.iter().zip(gc).map(|(a, b)| if a == b { Col::Match } else { Col::Sub }).collect();
                (cols, h as u32)
            } else if cells > BANDED_GAP_CELLS {
                global_banded(gq, gc, GAP_BAND_SLACK)
            } else {
                let (_, gap, e) = glocal(gq, gc, false, false, MAX_GAP_CELLS)?;
                (gap, e)
            };
            cols.extend(gap);
            edits += e;
        } else {
            let t = (query.len() - qe).min(END_CAP);
            let we = (pe + t + band + t / 4).min(cons.len());
            let (_, tail, e) = glocal(&query[qe..qe + t], &cons[pe..we], false, true, MAX_GAP_CELLS)?;
            cols.extend(tail);
            edits += e;
            let rest = query.len() - qe - t;
            cols.extend(std::iter::repeat_n(Col::Ins, rest));
            edits += rest as u32;
        }
    }
    Some(Fit { cons_start, cols, edits })
}

fn fit_query(query: &[u8], cons: &[u8], chain: &[(u32, u32)], k: usize, band: usize) -> Option<Fit> {
    if chain.is_empty() || query.is_empty() {
        return None;
    }
    let diag = chain[0].1 as i64 - chain[0].0 as i64;
    let single_diag = chain.iter().all(|&(q, p)| p as i64 - q as i64 == diag);
    if single_diag && diag >= 0 && diag as usize + query.len() <= cons.len() {
        let start = diag as usize;
        let window = &cons[start..start + query.len()];
        let cols: Vec<Col> = query
            .iter()
            .zip(window)
            .map(|(a, b)| if a == b { Col::Match } else { Col::Sub })
            .collect();
        let subs = cols.iter().filter(|&&c| c == Col::Sub).count();
        if subs <= (query.len() / 32).max(2) {
            return Some(Fit {
                cons_start: start,
                cols,
                edits: subs as u32,
            });
        }
    }
    chain_fit(query, cons, chain, k, band).or_else(|| banded_fit(query, cons, &band_centers(chain, query.len()), band))
}

/// Score drop (match +1, edit -3) that justifies clipping a read end.
const CLIP_MIN_PENALTY: i64 = 12;

fn clip_point<'a>(cols: impl Iterator<Item = &'a Col>) -> Option<usize> {
    let (mut cum, mut best, mut at) = (0i64, 0i64, None);
    for (i, c) in cols.enumerate() {
        cum += if *c == Col::Match { 1 } else { -3 };
        if cum < best {
            best = cum;
            at = Some(i + 1);
        }
    }
    if best <= -CLIP_MIN_PENALTY {
        at
    } else {
        None
    }
}

#[inline]
fn same_base(a: u8, b: u8) -> bool {
    a == b && a != b'N'
}

#[derive(Debug)]
struct Placed {
    cons_start: usize,
    front_clip: usize,
    back_clip: usize,
    mismatches: Vec<Mismatch>,
    edits: u64,
}

/// Turn a fit into an encodable mismatch list: optional end clipping,
/// removal of leading/trailing indels, left-normalized indels, and the
/// sentinel condition (indels only over A/C/G/T consensus bases).
fn place(query: &[u8], cons: &[u8], fit: Fit, clip_front: bool, clip_back: bool) -> Option<Placed> {
    let mut cols = fit.cols;
    let mut cons_start = fit.cons_start;
    let mut qstart = 0usize;
    let mut qend = query.len();

    if clip_front {
        if let Some(cut) = clip_point(cols.iter()) {
            for c in &cols[..cut] {
                qstart += c.consumes_query() as usize;
                cons_start += c.consumes_cons() as usize;
            }
            cols.drain(..cut);
        }
    }
    if clip_back {
        if let Some(cut) = clip_point(cols.iter().rev()) {
            let keep = cols.len() - cut;
            for c in &cols[keep..] {
                qend -= c.consumes_query() as usize;
            }
            cols.truncate(keep);
        }
    }
    let lead_del = cols.iter().take_while(|&&c| c == Col::Del).count();
    cols.drain(..lead_del);
    cons_start += lead_del;
    while cols.last() == Some(&Col::Del) {
        cols.pop();
    }

    let lead = cols.iter().take_while(|&&c| c == Col::Ins).count();
    if lead > 0 {
        if cons_start >= lead {
            cons_start -= lead;
            for t in 0..lead {
                cols[t] = if query[qstart + t] == cons[cons_start + t] { Col::Match } else { Col::Sub };
            }
        } else if clip_front {
            qstart += lead;
            cols.drain(..lead);
        } else {
            return None;
        }
    }
    let trail = cols.iter().rev().take_while(|&&c| c == Col::Ins).count();
    if trail > 0 {
        let cons_end = cons_start + cols.iter().filter(|c| c.consumes_cons()).count();
        if cons_end + trail <= cons.len() {
            let first = cols.len() - trail;
            for t in 0..trail {
                cols[first + t] = if query[qend - trail + t] == cons[cons_end + t] { Col::Match } else { Col::Sub };
            }
        } else if clip_back {
            qend -= trail;
            cols.truncate(cols.len() - trail);
        } else {
            return None;
        }
    }
    if qend <= qstart || cols.is_empty() {
        return None;
    }

    let mut mms: Vec<Mismatch> = Vec::new();
    let (mut off, mut qi, mut i) = (0u32, qstart, 0usize);
    while i < cols.len() {
        match cols[i] {
            Col::Match => {
                off += 1;
                qi += 1;
                i += 1;
            }
            Col::Sub => {
                mms.push(Mismatch::sub(off, query[qi]));
                off += 1;
                qi += 1;
                i += 1;
            }
            Col::Ins => {
                let s = i;
                while i < cols.len() && cols[i] == Col::Ins {
                    i += 1;
                }
                let l = i - s;
                mms.push(Mismatch::ins(off, query[qi..qi + l].to_vec()));
                qi += l;
            }
            Col::Del => {
                let s = i;
                while i < cols.len() && cols[i] == Col::Del {
                    i += 1;
                }
                let l = (i - s) as u32;
                mms.push(Mismatch::del(off, l));
                off += l;
            }
        }
    }
    debug_assert_eq!(qi, qend);

    left_normalize(&mut mms, &cons[cons_start..]);
    check_mismatch_order(&mms).ok()?;
    for m in &mms {
        let at = cons_start + m.offset as usize;
        let ok = match m.kind {
            MismatchKind::Sub => true,
            MismatchKind::Ins => cons.get(at).and_then(|&b| base_code(b)).is_some(),
            MismatchKind::Del => cons
                .get(at..at + m.block_len as usize)
                .is_some_and(|s| s.iter().all(|&b| base_code(b).is_some())),
        };
        if !ok {
            return None;
        }
    }
    let edits = mms.iter().map(|m| m.edit_cost() as u64).sum();
    Some(Placed {
        cons_start,
        front_clip: qstart,
        back_clip: query.len() - qend,
        mismatches: mms,
        edits,
    })
}

/// Shift every indel block to its leftmost equivalent offset without
/// crossing the previous mismatch or reaching offset 0.
fn left_normalize(mms: &mut Vec<Mismatch>, cons: &[u8]) {
    let mut out: Vec<Mismatch> = Vec::with_capacity(mms.len());
    for mut m in mms.drain(..) {
        let limit = match out.last() {
            None => 1,
            Some(p) => match p.kind {
                MismatchKind::Del => p.offset + p.block_len,
                _ => p.offset + 1,
            },
        }
        .max(1);
        match m.kind {
            MismatchKind::Del => {
                while m.offset > limit {
                    let o = m.offset as usize;
                    let l = m.block_len as usize;
                    if same_base(cons[o - 1], cons[o + l - 1]) {
                        m.offset -= 1;
                    } else {
                        break;
                    }
                }
                if let Some(p) = out.last_mut() {
                    if p.kind == MismatchKind::Del && p.offset + p.block_len == m.offset {
                        p.block_len += m.block_len;
                        continue;
                    }
                }
            }
            MismatchKind::Ins => {
                while m.offset > limit {
                    let o = m.offset as usize;
                    let last = *m.payload.last().expect("nonempty insertion");
                    if same_base(cons[o - 1], last) {
                        m.payload.rotate_right(1);
                        m.offset -= 1;
                    } else {
                        break;
                    }
                }
            }
            MismatchKind::Sub => {}
        }
        out.push(m);
    }
    *mms = out;
}

/// Ungapped placement along the chain's single diagonal, when it has too
/// few substitutions for clipping ever to pay off.
fn hamming_place(query: &[u8], cons: &[u8], chain: &[(u32, u32)]) -> Option<Placed> {
    let &(q0, p0) = chain.first()?;
    let diag = p0 as i64 - q0 as i64;
    if diag < 0 || chain.iter().any(|&(q, p)| p as i64 - q as i64 != diag) {
        return None;
    }
    let start = diag as usize;
    let window = cons.get(start..start + query.len())?;
    let max_subs = (((CLIP_MIN_PENALTY - 1) / 3) as usize).min((query.len() / 32).max(2));
    let mut mismatches = Vec::new();
    for (i, (&a, &b)) in query.iter().zip(window).enumerate() {
        if a != b {
            if mismatches.len() == max_subs {
                return None;
            }
            mismatches.push(Mismatch::sub(i as u32, a));
        }
    }
    Some(Placed {
        cons_start: start,
        front_clip: 0,
        back_clip: 0,
        edits: mismatches.len() as u64,
        mismatches,
    })
}

/// Align one query piece; `front`/`back` allow clipping of the respective
/// query end.
fn place_piece(
    query: &[u8],
    cons: &[u8],
    chain: &[(u32, u32)],
    params: &AlignParams,
    front: bool,
    back: bool,
) -> Option<Placed> {
    let placed = match hamming_place(query, cons, chain) {
        Some(p) => p,
        None => place(query, cons, fit_query(query, cons, chain, params.k, params.band)?, front, back)?,
    };
    let span = query.len() - placed.front_clip - placed.back_clip;
    if span < params.k.min(query.len()) || placed.edits as f64 > params.max_edit_rate * span as f64 {
        return None;
    }
    Some(placed)
}

fn single_from(read: &[u8], cand: &Candidate, p: Placed) -> Alignment {
    let n = read.len();
    let (head, tail) = if cand.rev {
        (p.back_clip, p.front_clip)
    } else {
        (p.front_clip, p.back_clip)
    };
    Alignment {
        segments: vec![Segment {
            cons_pos: p.cons_start as u64,
            rev: cand.rev,
            read_span: head..n - tail,
            mismatches: p.mismatches,
        }],
        clip_head: read[..head].to_vec(),
        clip_tail: read[n - tail..].to_vec(),
        status: AlignStatus::Mapped,
    }
}

fn best_single(read: &[u8], rc: &[u8], cands: &[Candidate], index: &ConsensusIndex, params: &AlignParams) -> Option<Alignment> {
    let cons = index.consensus();
    let mut best: Option<(u64, Alignment)> = None;
    let top_votes = cands.first().map_or(0, |c| c.votes);
    for cand in cands.iter().take(params.max_candidates.max(1)) {
        // A clean placement is not worth challenging with weakly supported
        // candidates.
        if let Some((s, _)) = &best {
            if *s == 0 || (cand.votes * 2 < top_votes && (*s as f64) < read.len() as f64 * 0.05) {
                break;
            }
        }
        let query = if cand.rev { rc } else { read };
        let Some(p) = place_piece(query, cons, &cand.chain, params, true, true) else {
            continue;
        };
        let score = p.edits + (p.front_clip + p.back_clip) as u64;
        if best.as_ref().is_none_or(|(s, _)| score < *s) {
            best = Some((score, single_from(read, cand, p)));
        }
    }
    best.map(|(_, a)| a)
}

/// Greedy cover: best candidate first, then whichever remaining candidate
/// explains the most still-unexplained read bases.
fn segment_read(read: &[u8], rc: &[u8], cands: &[Candidate], index: &ConsensusIndex, params: &AlignParams) -> Option<Alignment> {
    let n = read.len();
    let k = index.k();
    let max_segments = params.max_segments.min(8);
    if max_segments < 2 || cands.len() < 2 {
        return None;
    }
    let min_gain = 2 * k;
    let mut chosen: Vec<usize> = vec![0];
    let mut covered = vec![false; n];
    for b in cands[0].fwd_interval(n, k) {
        covered[b] = true;
    }
    while chosen.len() < max_segments {
        let mut pick: Option<(usize, usize)> = None;
        for (ci, cand) in cands.iter().enumerate() {
            if chosen.contains(&ci) {
                continue;
            }
            let gain = cand.fwd_interval(n, k).filter(|&b| !covered[b]).count();
            if gain >= min_gain && pick.is_none_or(|(_, g)| gain > g) {
                pick = Some((ci, gain));
            }
        }
        let Some((ci, _)) = pick else { break };
        for b in cands[ci].fwd_interval(n, k) {
            covered[b] = true;
        }
        chosen.push(ci);
    }
    if chosen.len() < 2 {
        return None;
    }
    chosen.sort_by_key(|&ci| cands[ci].fwd_interval(n, k).start);

    let mut bounds = vec![0usize];
    for w in chosen.windows(2) {
        let a = cands[w[0]].fwd_interval(n, k);
        let b = cands[w[1]].fwd_interval(n, k);
        let mid = (a.end + b.start) / 2;
        let prev = *bounds.last().unwrap();
        if mid <= prev + k || mid + k >= n {
            return None;
        }
        bounds.push(mid);
    }
    bounds.push(n);

    let cons = index.consensus();
    let last = chosen.len() - 1;
    let mut segments = Vec::with_capacity(chosen.len());
    let (mut head, mut tail) = (0usize, 0usize);
    for (si, &ci) in chosen.iter().enumerate() {
        let cand = &cands[ci];
        let (lo, hi) = (bounds[si], bounds[si + 1]);
        // piece in the candidate's orientation
        let (query, qoff) = if cand.rev { (&rc[n - hi..n - lo], n - hi) } else { (&read[lo..hi], lo) };
        let chain: Vec<(u32, u32)> = cand
            .chain
            .iter()
            .filter(|&&(q, _)| q as usize >= qoff && q as usize + k <= qoff + query.len())
            .map(|&(q, p)| (q - qoff as u32, p))
            .collect();
        let (clip_read_head, clip_read_tail) = (si == 0, si == last);
        let (front, back) = if cand.rev {
            (clip_read_tail, clip_read_head)
        } else {
            (clip_read_head, clip_read_tail)
        };
        let p = place_piece(query, cons, &chain, params, front, back)?;
        let (h, t) = if cand.rev { (p.back_clip, p.front_clip) } else { (p.front_clip, p.back_clip) };
        if si == 0 {
            head = h;
        }
        if si == last {
            tail = t;
        }
        segments.push(Segment {
            cons_pos: p.cons_start as u64,
            rev: cand.rev,
            read_span: lo + h..hi - t,
            mismatches: p.mismatches,
        });
    }
    Some(Alignment {
        segments,
        clip_head: read[..head].to_vec(),
        clip_tail: read[n - tail..].to_vec(),
        status: AlignStatus::Mapped,
    })
}

fn verified(aln: Alignment, read: &[u8], cons: &[u8]) -> Option<Alignment> {
    if aln.check_invariants().is_err() {
        return None;
    }
    match reconstruct(&aln, cons) {
        Ok(r) if r == read => Some(aln),
        _ => {
            log::debug!("discarding alignment that does not reproduce its read");
            None
        }
    }
}

/// Both the best single placement and (if the single placement is poor) a
/// segmented alternative. The choice between them is left to the caller's
/// cost model.
pub fn align_read_outcome(read: &[u8], index: &ConsensusIndex, params: &AlignParams) -> AlignOutcome {
    let n = read.len();
    let k = index.k();
    if n < k {
        return AlignOutcome {
            single: Alignment::literal(read),
            chimeric: None,
        };
    }
    let cons = index.consensus();
    let rc = reverse_complement(read);
    let cands = collect_candidates(read, &rc, index, params);
    let single = best_single(read, &rc, &cands, index, params)
        .and_then(|a| verified(a, read, cons))
        .unwrap_or_else(|| Alignment::literal(read));

    let threshold = (n as f64 * 0.05).max(8.0);
    let poor = !single.is_mapped()
        || single.mismatch_count() as f64 > threshold
        || (single.clip_head.len() + single.clip_tail.len()) as f64 > threshold;
    let chimeric = if poor && params.max_segments >= 2 {
        segment_read(read, &rc, &cands, index, params).and_then(|a| verified(a, read, cons))
    } else {
        None
    };
    AlignOutcome { single, chimeric }
}

pub fn align_read(read: &[u8], index: &ConsensusIndex, params: &AlignParams, cost: &dyn BitCost) -> Alignment {
    align_read_outcome(read, index, params).choose(read, cost)
}
