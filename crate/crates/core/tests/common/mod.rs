//! Seeded read-set simulation shared by the integration tests.

#![allow(dead_code)]

use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sage_core::seqio::{reverse_complement, ReadRecord};

pub const ACGT: &[u8; 4] = b"ACGT";

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_seq(rng: &mut impl Rng, n: usize) -> Vec<u8> {
    (0..n).map(|_| ACGT[rng.gen_range(0..4)]).collect()
}

fn other_base(rng: &mut impl Rng, b: u8) -> u8 {
    loop {
        let c = ACGT[rng.gen_range(0..4)];
        if c != b {
            return c;
        }
    }
}

/// Copy `src` applying substitutions at `sub` and indels at `indel` per
/// base; indel lengths are drawn from 1..=`max_indel`.
pub fn mutate(rng: &mut impl Rng, src: &[u8], sub: f64, indel: f64, max_indel: usize) -> Vec<u8> {
    mutate_traced(rng, src, sub, indel, max_indel).0
}

/// [`mutate`] that also reports substitution offsets into `src` and whether
/// any indel was applied.
pub fn mutate_traced(rng: &mut impl Rng, src: &[u8], sub: f64, indel: f64, max_indel: usize) -> (Vec<u8>, Vec<u32>, bool) {
    let mut out = Vec::with_capacity(src.len() + src.len() / 16);
    let mut subs = Vec::new();
    let mut had_indel = false;
    let mut i = 0;
    while i < src.len() {
        let roll: f64 = rng.gen();
        if roll < sub {
            out.push(other_base(rng, src[i]));
            subs.push(i as u32);
            i += 1;
        } else if roll < sub + indel {
            had_indel = true;
            let n = rng.gen_range(1..=max_indel);
            if rng.gen_bool(0.5) {
                out.extend(random_seq(rng, n));
            } else {
                i += n;
            }
        } else {
            out.push(src[i]);
            i += 1;
        }
    }
    (out, subs, had_indel)
}

/// Where a plain, substitution-only read came from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Truth {
    pub pos: u64,
    pub rev: bool,
    /// Substitution offsets relative to `pos`, ascending.
    pub subs: Vec<u32>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Odd {
    Plain,
    NBases,
    Clipped,
    Chimera,
    Random,
}

#[derive(Debug, Clone)]
pub struct SimParams {
    pub depth: f64,
    pub len_min: usize,
    pub len_max: usize,
    pub sub: f64,
    pub indel: f64,
    pub max_indel: usize,
    /// Weights of [`Odd`] variants: plain, N, clipped, chimera, random.
    pub odd_weights: [u32; 5],
    pub rev_fraction: f64,
}

impl SimParams {
    pub fn short(depth: f64, len: usize, sub: f64) -> Self {
        Self {
            depth,
            len_min: len,
            len_max: len,
            sub,
            indel: 0.0001,
            max_indel: 2,
            odd_weights: [1, 0, 0, 0, 0],
            rev_fraction: 0.5,
        }
    }

    pub fn long(depth: f64, len_min: usize, len_max: usize, error: f64) -> Self {
        Self {
            depth,
            len_min,
            len_max,
            sub: error * 0.5,
            indel: error * 0.5,
            max_indel: 8,
            odd_weights: [1, 0, 0, 0, 0],
            rev_fraction: 0.5,
        }
    }

    pub fn with_oddities(mut self, weights: [u32; 5]) -> Self {
        self.odd_weights = weights;
        self
    }
}

#[derive(Debug, Clone)]
pub struct Simulated {
    pub consensus: Vec<u8>,
    pub reads: Vec<ReadRecord>,
    pub kinds: Vec<Odd>,
    /// Known origin of plain reads generated without indels.
    pub truth: Vec<Option<Truth>>,
}

impl Simulated {
    pub fn bases(&self) -> u64 {
        self.reads.iter().map(|r| r.bases.len() as u64).sum()
    }

    /// Size of the reads as FASTQ-less ASCII (one line per sequence).
    pub fn ascii_bytes(&self) -> u64 {
        self.reads.iter().map(|r| r.bases.len() as u64 + 1).sum()
    }

    pub fn sorted_bases(&self) -> Vec<Vec<u8>> {
        let mut v: Vec<Vec<u8>> = self.reads.iter().map(|r| r.bases.clone()).collect();
        v.sort_unstable();
        v
    }
}

pub fn simulate(rng: &mut impl Rng, consensus: Vec<u8>, p: &SimParams) -> Simulated {
    let mean_len = (p.len_min + p.len_max) as f64 / 2.0;
    let n = ((consensus.len() as f64 * p.depth) / mean_len).round() as usize;
    let odd = WeightedIndex::new(p.odd_weights).expect("some weight");
    let kinds_all = [Odd::Plain, Odd::NBases, Odd::Clipped, Odd::Chimera, Odd::Random];
    let mut reads = Vec::with_capacity(n);
    let mut kinds = Vec::with_capacity(n);
    let mut truth = Vec::with_capacity(n);
    for i in 0..n {
        let len = rng.gen_range(p.len_min..=p.len_max).min(consensus.len() / 2);
        let pos = rng.gen_range(0..=consensus.len() - len);
        let kind = kinds_all[odd.sample(rng)];
        let mut origin = None;
        let mut bases = match kind {
            Odd::Random => random_seq(rng, len),
            Odd::Chimera => {
                let half = len / 2;
                let other = loop {
                    let o = rng.gen_range(0..=consensus.len() - (len - half));
                    if o.abs_diff(pos) > 10_000.min(consensus.len() / 4) {
                        break o;
                    }
                };
                let mut b = mutate(rng, &consensus[pos..pos + half], p.sub, p.indel, p.max_indel);
                b.extend(mutate(rng, &consensus[other..other + len - half], p.sub, p.indel, p.max_indel));
                b
            }
            _ => {
                let (b, subs, had_indel) = mutate_traced(rng, &consensus[pos..pos + len], p.sub, p.indel, p.max_indel);
                if kind == Odd::Plain && !had_indel {
                    origin = Some(Truth {
                        pos: pos as u64,
                        rev: false,
                        subs,
                    });
                }
                b
            }
        };
        match kind {
            Odd::NBases => {
                for _ in 0..rng.gen_range(1..4) {
                    let at = rng.gen_range(0..bases.len());
                    bases[at] = b'N';
                }
            }
            Odd::Clipped => {
                let clip_len = rng.gen_range(15..40).min(len / 3);
                let clip = random_seq(rng, clip_len);
                let keep = bases.len() - clip.len();
                if rng.gen_bool(0.5) {
                    bases.truncate(keep);
                    bases.splice(0..0, clip);
                } else {
                    bases.drain(..bases.len() - keep);
                    bases.extend(clip);
                }
            }
            _ => {}
        }
        if bases.is_empty() {
            bases.push(b'A');
        }
        if rng.gen_bool(p.rev_fraction) {
            bases = reverse_complement(&bases);
            if let Some(t) = origin.as_mut() {
                t.rev = true;
            }
        }
        reads.push(ReadRecord {
            id: format!("read{i}"),
            bases,
            qual: None,
        });
        kinds.push(kind);
        truth.push(origin);
    }
    Simulated {
        consensus,
        reads,
        kinds,
        truth,
    }
}

/// A log-uniform draw from `[lo, hi]`.
pub fn log_uniform(rng: &mut impl Rng, lo: f64, hi: f64) -> f64 {
    (rng.gen_range(lo.ln()..=hi.ln())).exp()
}
