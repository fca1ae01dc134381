//! Per-dataset tuning of bit-width classes and their unary guide codes.
//!
//! A [`ClassScheme`] is a strictly increasing list of payload widths. Each
//! value is stored in the smallest class wide enough for it, preceded by that
//! class's guide code: the class with frequency rank `r` gets `r` one-bits
//! followed by a zero (`0`, `10`, `110`, ...). A fixed scheme has a single
//! class and no guide at all.

use crate::bits::bit_len;
use crate::error::{Error, Result};

pub const MAX_BIT_LEN: u32 = 64;
/// Upper bound on classes per scheme.
pub const MAX_CLASSES: usize = 8;

#[derive(Clone, PartialEq, Eq)]
pub struct BitLenHistogram {
    counts: [u64; MAX_BIT_LEN as usize + 1],
}

impl Default for BitLenHistogram {
    fn default() -> Self {
        Self {
            counts: [0; MAX_BIT_LEN as usize + 1],
        }
    }
}

impl std::fmt::Debug for BitLenHistogram {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_map().entries(self.iter()).finish()
    }
}

impl BitLenHistogram {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, value: u64) {
        self.counts[bit_len(value) as usize] += 1;
    }

    pub fn add_bit_len(&mut self, bits: u32, n: u64) {
        assert!((1..=MAX_BIT_LEN).contains(&bits));
        self.counts[bits as usize] += n;
    }

    pub fn count(&self, bits: u32) -> u64 {
        self.counts.get(bits as usize).copied().unwrap_or(0)
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn is_empty(&self) -> bool {
        self.total() == 0
    }

    pub fn max_bit_len(&self) -> Option<u32> {
        (1..=MAX_BIT_LEN).rev().find(|&b| self.counts[b as usize] > 0)
    }

    /// Nonzero `(bit_len, count)` pairs in ascending bit length.
    pub fn iter(&self) -> impl Iterator<Item = (u32, u64)> + '_ {
        (1..=MAX_BIT_LEN).filter_map(|b| {
            let c = self.counts[b as usize];
            (c > 0).then_some((b, c))
        })
    }

    pub fn merge(&mut self, other: &BitLenHistogram) {
        for (a, b) in self.counts.iter_mut().zip(other.counts.iter()) {
            *a += b;
        }
    }
}

pub fn histogram(values: &[u64]) -> BitLenHistogram {
    let mut h = BitLenHistogram::new();
    for &v in values {
        h.add(v);
    }
    h
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ClassScheme {
    widths: Vec<u8>,
    /// `ranks[c]` is the frequency rank of class `c`; its guide code is
    /// `ranks[c]` ones followed by a zero.
    ranks: Vec<u8>,
    guided: bool,
}

impl ClassScheme {
    pub fn new(widths: Vec<u32>, ranks: Vec<u32>) -> Result<Self> {
        if widths.is_empty() || widths.len() > MAX_CLASSES {
            return Err(Error::Scheme(format!("{} classes (allowed 1..={MAX_CLASSES})", widths.len())));
        }
        if widths.len() != ranks.len() {
            return Err(Error::Scheme("widths and ranks differ in length".into()));
        }
        if widths.iter().any(|&w| w == 0 || w > MAX_BIT_LEN) {
            return Err(Error::Scheme(format!("class width out of range in {widths:?}")));
        }
        if widths.windows(2).any(|p| p[0] >= p[1]) {
            return Err(Error::Scheme(format!("class widths not strictly increasing: {widths:?}")));
        }
        let mut seen = vec![false; ranks.len()];
        for &r in &ranks {
            match seen.get_mut(r as usize) {
                Some(s) if !*s => *s = true,
                _ => return Err(Error::Scheme(format!("ranks {ranks:?} are not a permutation"))),
            }
        }
        Ok(Self {
            widths: widths.into_iter().map(|w| w as u8).collect(),
            ranks: ranks.into_iter().map(|r| r as u8).collect(),
            guided: true,
        })
    }

    /// Ranks assigned by descending `counts`, ties going to the narrower class.
    pub fn from_frequencies(widths: Vec<u32>, counts: &[u64]) -> Result<Self> {
        if counts.len() != widths.len() {
            return Err(Error::Scheme("one count per class required".into()));
        }
        let mut order: Vec<usize> = (0..widths.len()).collect();
        order.sort_by(|&a, &b| counts[b].cmp(&counts[a]).then(a.cmp(&b)));
        let mut ranks = vec![0u32; widths.len()];
        for (rank, &class) in order.iter().enumerate() {
            ranks[class] = rank as u32;
        }
        Self::new(widths, ranks)
    }

    /// One class of `width` bits with no guide code.
    pub fn fixed(width: u32) -> Result<Self> {
        let mut s = Self::new(vec![width], vec![0])?;
        s.guided = false;
        Ok(s)
    }

    /// Placeholder used when a scheme has no values to describe.
    pub fn trivial() -> Self {
        Self::new(vec![1], vec![0]).expect("valid")
    }

    pub fn widths(&self) -> impl Iterator<Item = u32> + '_ {
        self.widths.iter().map(|&w| w as u32)
    }

    pub fn num_classes(&self) -> usize {
        self.widths.len()
    }

    pub fn is_guided(&self) -> bool {
        self.guided
    }

    pub fn width(&self, class: usize) -> u32 {
        self.widths[class] as u32
    }

    pub fn max_width(&self) -> u32 {
        *self.widths.last().expect("nonempty") as u32
    }

    pub fn rank(&self, class: usize) -> u32 {
        self.ranks[class] as u32
    }

    pub fn class_of_rank(&self, rank: u32) -> Option<usize> {
        self.ranks.iter().position(|&r| r as u32 == rank)
    }

    /// Smallest class wide enough for `value`.
    pub fn class_for(&self, value: u64) -> Option<usize> {
        let need = bit_len(value);
        self.widths.iter().position(|&w| w as u32 >= need)
    }

    pub fn code_len(&self, class: usize) -> u32 {
        if self.guided {
            self.ranks[class] as u32 + 1
        } else {
            0
        }
    }

    /// Guide code of `class` as `(bits, len)` ready for an LSB-first writer.
    pub fn code(&self, class: usize) -> (u64, u32) {
        if !self.guided {
            return (0, 0);
        }
        let r = self.ranks[class] as u32;
        ((1u64 << r) - 1, r + 1)
    }

    /// Total bits (guide plus payload) spent on `value`.
    pub fn value_bits(&self, value: u64) -> Result<u32> {
        let class = self.class_for(value).ok_or_else(|| self.coverage_error(bit_len(value)))?;
        Ok(self.code_len(class) + self.width(class))
    }

    fn coverage_error(&self, need: u32) -> Error {
        Error::Scheme(format!(
            "value needs {need} bits but widest class is {} bits",
            self.max_width()
        ))
    }

    pub fn to_bytes(&self, out: &mut Vec<u8>) {
        out.push(self.guided as u8);
        out.push(self.widths.len() as u8);
        out.extend_from_slice(&self.widths);
        out.extend_from_slice(&self.ranks);
    }

    /// Parses a serialized scheme, returning it and the bytes consumed.
    pub fn from_bytes(bytes: &[u8]) -> Result<(Self, usize)> {
        let short = || Error::Format("truncated class scheme".into());
        let guided = *bytes.first().ok_or_else(short)?;
        let k = *bytes.get(1).ok_or_else(short)? as usize;
        let body = bytes.get(2..2 + 2 * k).ok_or_else(short)?;
        let widths = body[..k].iter().map(|&w| w as u32).collect();
        let ranks = body[k..].iter().map(|&r| r as u32).collect();
        let mut s = Self::new(widths, ranks).map_err(|e| Error::Format(format!("bad class scheme: {e}")))?;
        match guided {
            1 => {}
            0 if k == 1 => s.guided = false,
            _ => return Err(Error::Format(format!("bad class scheme guide flag {guided}"))),
        }
        Ok((s, 2 + 2 * k))
    }
}

/// Exact bit total of encoding every value in `hist` under `scheme`.
pub fn cost_of(hist: &BitLenHistogram, scheme: &ClassScheme) -> Result<u64> {
    let mut total = 0u64;
    let mut class = 0usize;
    for (bits, count) in hist.iter() {
        while class < scheme.num_classes() && scheme.width(class) < bits {
            class += 1;
        }
        if class == scheme.num_classes() {
            return Err(scheme.coverage_error(bits));
        }
        total += count * (scheme.code_len(class) + scheme.width(class)) as u64;
    }
    Ok(total)
}

/// Minimum-cost guided scheme with at most `max_k` classes.
///
/// Classes are contiguous runs of the distinct bit lengths present, each as
/// wide as its longest member. Code lengths are a bijection onto `1..=K`, so
/// the search runs over (prefix of lengths, set of code lengths used) and is
/// exact; ranks of the result are then reassigned by frequency, which leaves
/// the cost unchanged.
pub fn optimize_classes(hist: &BitLenHistogram, max_k: usize) -> Result<ClassScheme> {
    if !(1..=MAX_CLASSES).contains(&max_k) {
        return Err(Error::Scheme(format!("max classes {max_k} outside 1..={MAX_CLASSES}")));
    }
    let present: Vec<(u32, u64)> = hist.iter().collect();
    if present.is_empty() {
        return Err(Error::Scheme("cannot optimize an empty histogram".into()));
    }
    let m = present.len();
    let mut prefix = vec![0u64; m + 1];
    for (i, &(_, c)) in present.iter().enumerate() {
        prefix[i + 1] = prefix[i] + c;
    }

    let masks = 1usize << max_k;
    const UNSET: u64 = u64::MAX;
    let mut best = vec![UNSET; (m + 1) * masks];
    let mut parent = vec![(0u32, 0u32); (m + 1) * masks];
    best[0] = 0;
    for i in 0..m {
        for mask in 0..masks {
            let here = best[i * masks + mask];
            if here == UNSET {
                continue;
            }
            for j in i + 1..=m {
                let n = prefix[j] - prefix[i];
                let width = present[j - 1].0 as u64;
                for t in 0..max_k {
                    if mask & (1 << t) != 0 {
                        continue;
                    }
                    let next = mask | (1 << t);
                    let cost = here + n * (width + t as u64 + 1);
                    let slot = j * masks + next;
                    if cost < best[slot] {
                        best[slot] = cost;
                        parent[slot] = (i as u32, mask as u32);
                    }
                }
            }
        }
    }

    let (mut mask, _) = (0..masks)
        .filter(|&mk| best[m * masks + mk] != UNSET)
        .map(|mk| (mk, best[m * masks + mk]))
        .min_by(|a, b| a.1.cmp(&b.1).then(a.0.count_ones().cmp(&b.0.count_ones())))
        .expect("at least one feasible scheme");

    let mut ends = Vec::new();
    let mut j = m;
    while j > 0 {
        ends.push(j);
        let (pi, pmask) = parent[j * masks + mask];
        j = pi as usize;
        mask = pmask as usize;
    }
    ends.reverse();
    let mut widths = Vec::with_capacity(ends.len());
    let mut counts = Vec::with_capacity(ends.len());
    let mut start = 0;
    for &end in &ends {
        widths.push(present[end - 1].0);
        counts.push(prefix[end] - prefix[start]);
        start = end;
    }
    ClassScheme::from_frequencies(widths, &counts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    fn hist_of(pairs: &[(u32, u64)]) -> BitLenHistogram {
        let mut h = BitLenHistogram::new();
        for &(b, c) in pairs {
            h.add_bit_len(b, c);
        }
        h
    }

    /// Every subset of widths `1..=max_width` (containing the top length),
    /// codes by frequency rank. Shares nothing with the DP path.
    fn brute_force_cost(hist: &BitLenHistogram, max_k: usize, max_width: u32) -> u64 {
        let top = hist.max_bit_len().unwrap();
        let mut best = u64::MAX;
        for subset in 1u32..(1 << max_width) {
            let widths: Vec<u32> = (1..=max_width).filter(|w| subset & (1 << (w - 1)) != 0).collect();
            if widths.len() > max_k || *widths.last().unwrap() < top {
                continue;
            }
            let mut counts = vec![0u64; widths.len()];
            for (b, c) in hist.iter() {
                let class = widths.iter().position(|&w| w >= b).unwrap();
                counts[class] += c;
            }
            let mut order: Vec<usize> = (0..widths.len()).collect();
            order.sort_by(|&a, &b| counts[b].cmp(&counts[a]));
            let mut cost = 0;
            for (rank, &class) in order.iter().enumerate() {
                cost += counts[class] * (widths[class] as u64 + rank as u64 + 1);
            }
            best = best.min(cost);
        }
        best
    }

    #[test]
    fn histogram_counts_bit_lengths() {
        let h = histogram(&[0, 1, 2, 3, 7, 8]);
        assert_eq!(h.iter().collect::<Vec<_>>(), vec![(1, 2), (2, 2), (3, 1), (4, 1)]);
        assert!(histogram(&[]).is_empty());
    }

    #[test]
    fn histogram_matches_recount() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let values: Vec<u64> = (0..100_000).map(|_| rng.gen_range(0..1u64 << 16)).collect();
        let h = histogram(&values);
        for b in 1..=MAX_BIT_LEN {
            let recount = values
                .iter()
                .filter(|&&v| {
                    let mut n = 0;
                    let mut x = v;
                    while x > 0 {
                        n += 1;
                        x >>= 1;
                    }
                    n.max(1) == b
                })
                .count() as u64;
            assert_eq!(h.count(b), recount, "bit length {b}");
        }
    }

    #[test]
    fn single_class() {
        let h = hist_of(&[(4, 1000)]);
        let s = optimize_classes(&h, 4).unwrap();
        assert_eq!(s.widths().collect::<Vec<_>>(), vec![4]);
        assert_eq!(cost_of(&h, &s).unwrap(), 5000);
    }

    #[test]
    fn two_classes_beat_one() {
        let h = hist_of(&[(2, 900), (8, 100)]);
        let one = ClassScheme::new(vec![8], vec![0]).unwrap();
        assert_eq!(cost_of(&h, &one).unwrap(), 9000);
        let s = optimize_classes(&h, 4).unwrap();
        assert_eq!(s.widths().collect::<Vec<_>>(), vec![2, 8]);
        assert_eq!(cost_of(&h, &s).unwrap(), 3700);
        assert_eq!(brute_force_cost(&h, 4, 12), 3700);
        assert_eq!(s.code(0), (0b0, 1));
        assert_eq!(s.code(1), (0b1, 2));
    }

    #[test]
    fn coverage_violation() {
        let h = hist_of(&[(3, 5), (9, 1)]);
        let s = ClassScheme::new(vec![3, 8], vec![0, 1]).unwrap();
        assert!(matches!(cost_of(&h, &s), Err(Error::Scheme(_))));
        assert!(s.value_bits(1 << 8).is_err());
    }

    #[test]
    fn empty_histogram_rejected() {
        assert!(optimize_classes(&BitLenHistogram::new(), 3).is_err());
        assert!(optimize_classes(&hist_of(&[(1, 1)]), 0).is_err());
        assert!(optimize_classes(&hist_of(&[(1, 1)]), 9).is_err());
    }

    #[test]
    fn four_class_codes_are_unary() {
        let s = ClassScheme::from_frequencies(vec![1, 2, 3, 4], &[40, 30, 20, 10]).unwrap();
        let codes: Vec<_> = (0..4).map(|c| s.code(c)).collect();
        // LSB-first: "0", "10", "110", "1110"
        assert_eq!(codes, vec![(0b0, 1), (0b01, 2), (0b011, 3), (0b0111, 4)]);
    }

    #[test]
    fn dp_matches_enumeration_on_random_histograms() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0x5eed);
        for _ in 0..100 {
            let mut h = BitLenHistogram::new();
            let distinct = rng.gen_range(1..=12);
            for _ in 0..distinct {
                h.add_bit_len(rng.gen_range(1..=12), rng.gen_range(1..5000));
            }
            let max_k = rng.gen_range(1..=5);
            let s = optimize_classes(&h, max_k).unwrap();
            assert!(s.num_classes() <= max_k);
            assert_eq!(cost_of(&h, &s).unwrap(), brute_force_cost(&h, max_k, 12), "{h:?} k={max_k}");
        }
    }

    #[test]
    fn serialization_roundtrip() {
        let s = ClassScheme::from_frequencies(vec![2, 5, 9], &[1, 7, 3]).unwrap();
        let mut buf = Vec::new();
        s.to_bytes(&mut buf);
        let f = ClassScheme::fixed(32).unwrap();
        f.to_bytes(&mut buf);
        let (a, n) = ClassScheme::from_bytes(&buf).unwrap();
        assert_eq!(a, s);
        let (b, _) = ClassScheme::from_bytes(&buf[n..]).unwrap();
        assert_eq!(b, f);
        assert!(!b.is_guided());
        assert!(ClassScheme::from_bytes(&buf[..3]).is_err());
    }

    fn arb_hist() -> impl Strategy<Value = BitLenHistogram> {
        proptest::collection::vec((1u32..=40, 1u64..10_000), 1..15).prop_map(|pairs| hist_of(&pairs))
    }

    proptest! {
        #[test]
        fn cost_monotone_in_k(h in arb_hist()) {
            let mut prev = u64::MAX;
            for k in 1..=MAX_CLASSES {
                let c = cost_of(&h, &optimize_classes(&h, k).unwrap()).unwrap();
                prop_assert!(c <= prev);
                prev = c;
            }
        }

        #[test]
        fn codes_follow_frequency(h in arb_hist(), k in 1usize..=8) {
            let s = optimize_classes(&h, k).unwrap();
            prop_assert!(s.max_width() >= h.max_bit_len().unwrap());
            let mut counts = vec![0u64; s.num_classes()];
            for (b, c) in h.iter() {
                counts[s.class_for((1u64 << b) - 1).unwrap()] += c;
            }
            for a in 0..s.num_classes() {
                for b in 0..s.num_classes() {
                    if counts[a] > counts[b] {
                        prop_assert!(s.code_len(a) <= s.code_len(b));
                    }
                }
            }
        }

        #[test]
        fn guide_codes_parse_unambiguously(ranks in proptest::collection::vec(0usize..8, 1..200)) {
            use crate::bits::{BitReader, BitWriter};
            use crate::error::StreamId;
            let s = ClassScheme::from_frequencies((1..=8).collect(), &[8, 7, 6, 5, 4, 3, 2, 1]).unwrap();
            let mut w = BitWriter::new();
            for &c in &ranks {
                let (bits, len) = s.code(c);
                w.write_bits(bits, len);
            }
            let n = w.bit_len();
            let bytes = w.into_bytes();
            let mut r = BitReader::new(StreamId::MPGA, &bytes, n);
            for &c in &ranks {
                let mut ones = 0;
                while r.read_bit().unwrap() {
                    ones += 1;
                }
                prop_assert_eq!(s.class_of_rank(ones), Some(c));
            }
            prop_assert_eq!(r.remaining(), 0);
        }
    }
}
