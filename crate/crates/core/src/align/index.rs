use crate::error::{Error, Result};
use crate::seqio::base_code;

/// Bits of the k-mer code used to address the bucket table.
const BUCKET_BASES: usize = 10;

/// k-mer index over the consensus: every N-free k-mer start position,
/// grouped by k-mer, positions ascending.
#[derive(Debug, Clone)]
pub struct ConsensusIndex {
    bases: Vec<u8>,
    k: usize,
    /// Sorted distinct k-mer codes.
    kmers: Vec<u64>,
    /// `positions[starts[i]..starts[i + 1]]` belong to `kmers[i]`.
    starts: Vec<u32>,
    positions: Vec<u32>,
    /// First `kmers` index per bucket of leading bases.
    buckets: Vec<u32>,
    bucket_shift: u32,
}

/// 2-bit packed code of `seq`, or `None` if it contains anything but ACGT.
pub fn kmer_code(seq: &[u8]) -> Option<u64> {
    debug_assert!(seq.len() <= 32);
    let mut code = 0u64;
    for &b in seq {
        code = (code << 2) | base_code(b)? as u64;
    }
    Some(code)
}

impl ConsensusIndex {
    pub fn build(consensus: &[u8], k: usize) -> Result<Self> {
        if !(1..=32).contains(&k) {
            return Err(Error::Align(format!("seed length {k} outside 1..=32")));
        }
        if consensus.len() < k {
            return Err(Error::Align(format!(
                "consensus of {} bases is shorter than seed length {k}",
                consensus.len()
            )));
        }
        if consensus.len() > u32::MAX as usize {
            return Err(Error::Align("consensus longer than 2^32 bases".into()));
        }
        let mask = if k == 32 { u64::MAX } else { (1u64 << (2 * k)) - 1 };
        let mut pairs: Vec<(u64, u32)> = Vec::with_capacity(consensus.len());
        let mut code = 0u64;
        let mut run = 0usize;
        for (i, &b) in consensus.iter().enumerate() {
            match base_code(b) {
                Some(c) => {
                    code = ((code << 2) | c as u64) & mask;
                    run += 1;
                }
                None => run = 0,
            }
            if run >= k {
                pairs.push((code, (i + 1 - k) as u32));
            }
        }
        pairs.sort_unstable();

        let mut kmers = Vec::new();
        let mut starts = Vec::new();
        let mut positions = Vec::with_capacity(pairs.len());
        for (i, &(kmer, pos)) in pairs.iter().enumerate() {
            if i == 0 || pairs[i - 1].0 != kmer {
                kmers.push(kmer);
                starts.push(positions.len() as u32);
            }
            positions.push(pos);
        }
        starts.push(positions.len() as u32);

        let bucket_bases = BUCKET_BASES.min(k);
        let bucket_shift = 2 * (k - bucket_bases) as u32;
        let nbuckets = 1usize << (2 * bucket_bases);
        let mut buckets = vec![0u32; nbuckets + 1];
        let mut idx = 0usize;
        for (b, slot) in buckets.iter_mut().enumerate() {
            while idx < kmers.len() && ((kmers[idx] >> bucket_shift) as usize) < b {
                idx += 1;
            }
            *slot = idx as u32;
        }

        Ok(Self {
            bases: consensus.to_vec(),
            k,
            kmers,
            starts,
            positions,
            buckets,
            bucket_shift,
        })
    }

    pub fn consensus(&self) -> &[u8] {
        &self.bases
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn num_kmers(&self) -> usize {
        self.kmers.len()
    }

    /// Iterate `(kmer, positions)` in ascending k-mer order.
    pub fn iter(&self) -> impl Iterator<Item = (u64, &[u32])> + '_ {
        self.kmers.iter().enumerate().map(|(i, &km)| {
            (km, &self.positions[self.starts[i] as usize..self.starts[i + 1] as usize])
        })
    }

    pub fn lookup(&self, kmer: u64) -> &[u32] {
        let b = (kmer >> self.bucket_shift) as usize;
        if b + 1 >= self.buckets.len() {
            return &[];
        }
        let lo = self.buckets[b] as usize;
        let hi = self.buckets[b + 1] as usize;
        match self.kmers[lo..hi].binary_search(&kmer) {
            Ok(i) => {
                let i = lo + i;
                &self.positions[self.starts[i] as usize..self.starts[i + 1] as usize]
            }
            Err(_) => &[],
        }
    }

    pub fn lookup_seq(&self, seq: &[u8]) -> &[u32] {
        if seq.len() != self.k {
            return &[];
        }
        kmer_code(seq).map(|c| self.lookup(c)).unwrap_or(&[])
    }
}

pub fn build_index(consensus: &[u8], k: usize) -> Result<ConsensusIndex> {
    ConsensusIndex::build(consensus, k)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn repeated_kmer_positions() {
        let idx = build_index(b"ACGTACGT", 4).unwrap();
        assert_eq!(idx.lookup_seq(b"ACGT"), &[0, 4]);
        assert_eq!(idx.lookup_seq(b"CGTA"), &[1]);
        assert_eq!(idx.lookup_seq(b"TTTT"), &[] as &[u32]);
    }

    #[test]
    fn kmers_with_n_are_skipped() {
        let idx = build_index(b"ACGNACGT", 4).unwrap();
        for absent in [&b"ACGN"[..], b"CGNA", b"GNAC", b"NACG"] {
            assert!(idx.lookup_seq(absent).is_empty());
        }
        assert_eq!(idx.lookup_seq(b"ACGT"), &[4]);
        assert_eq!(idx.iter().map(|(_, p)| p.len()).sum::<usize>(), 1);
    }

    #[test]
    fn too_short_consensus() {
        assert!(matches!(build_index(b"ACG", 4), Err(Error::Align(_))));
    }

    proptest! {
        #[test]
        fn index_is_complete_and_sorted(
            cons in proptest::collection::vec(proptest::sample::select(&b"ACGTN"[..]), 20..400),
            k in 3usize..14,
        ) {
            let idx = build_index(&cons, k).unwrap();
            let mut total = 0;
            for (_, pos) in idx.iter() {
                prop_assert!(pos.windows(2).all(|w| w[0] < w[1]));
                prop_assert!(pos.iter().all(|&p| p as usize + k <= cons.len()));
                total += pos.len();
            }
            let expected: Vec<usize> = (0..=cons.len() - k)
                .filter(|&p| !cons[p..p + k].contains(&b'N'))
                .collect();
            prop_assert_eq!(total, expected.len());
            for p in expected {
                prop_assert!(idx.lookup_seq(&cons[p..p + k]).contains(&(p as u32)));
            }
        }
    }
}
