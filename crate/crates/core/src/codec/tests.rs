use super::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::seqio::reverse_complement;

const BASES: &[u8; 4] = b"ACGT";

fn random_seq(rng: &mut ChaCha8Rng, n: usize) -> Vec<u8> {
    (0..n).map(|_| BASES[rng.gen_range(0..4)]).collect()
}

fn mutate(rng: &mut ChaCha8Rng, src: &[u8], rate: f64) -> Vec<u8> {
    let mut out = Vec::with_capacity(src.len() + 8);
    let mut i = 0;
    while i < src.len() {
        if rng.gen_bool(rate) {
            match rng.gen_range(0..3) {
                0 => {
                    let mut b = BASES[rng.gen_range(0..4)];
                    while b == src[i] {
                        b = BASES[rng.gen_range(0..4)];
                    }
                    out.push(b);
                    i += 1;
                }
                1 => {
                    for _ in 0..rng.gen_range(1..4) {
                        out.push(BASES[rng.gen_range(0..4)]);
                    }
                }
                _ => i += rng.gen_range(1..4),
            }
        } else {
            out.push(src[i]);
            i += 1;
        }
    }
    out
}

/// A mixed short-read set: clean, mutated, reversed, N-bearing, clipped,
/// unrelated, and two-locus reads.
fn mixed_reads(seed: u64, n: usize, len: usize) -> (Vec<u8>, Vec<ReadRecord>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cons = random_seq(&mut rng, 20_000);
    let mut reads = Vec::with_capacity(n);
    for i in 0..n {
        let pos = rng.gen_range(0..cons.len() - 2 * len);
        let mut bases = match i % 7 {
            0 => cons[pos..pos + len].to_vec(),
            1 | 2 => mutate(&mut rng, &cons[pos..pos + len], 0.02),
            3 => {
                let mut b = cons[pos..pos + len].to_vec();
                let at = rng.gen_range(0..len);
                b[at] = b'N';
                b
            }
            4 => {
                let mut b = random_seq(&mut rng, 20);
                b.extend_from_slice(&cons[pos..pos + len - 20]);
                b
            }
            5 => random_seq(&mut rng, len),
            _ => {
                let other = rng.gen_range(0..cons.len() - len);
                let mut b = cons[pos..pos + len / 2].to_vec();
                b.extend_from_slice(&cons[other..other + len - len / 2]);
                b
            }
        };
        if rng.gen_bool(0.5) {
            bases = reverse_complement(&bases);
        }
        reads.push(ReadRecord {
            id: format!("r{i}"),
            bases,
            qual: None,
        });
    }
    (cons, reads)
}

fn sorted_bases(reads: impl IntoIterator<Item = Vec<u8>>) -> Vec<Vec<u8>> {
    let mut v: Vec<Vec<u8>> = reads.into_iter().collect();
    v.sort();
    v
}

fn roundtrip(cons: &[u8], reads: &[ReadRecord], opts: &CompressOptions) -> Compressed {
    let c = compress(reads, cons, opts).unwrap();
    assert_eq!(c.stats.predicted_bytes, c.container.len() as u64);
    let parsed = Container::from_bytes(c.container.as_bytes().to_vec()).unwrap();
    let out = decompress(&parsed, Some(cons), &DecompressOptions::default()).unwrap();
    assert_eq!(
        sorted_bases(out.reads.into_iter().map(|r| r.bases)),
        sorted_bases(reads.iter().map(|r| r.bases.clone())),
        "level {}",
        opts.ablation
    );
    c
}

#[test]
fn every_level_roundtrips_mixed_reads() {
    let (cons, reads) = mixed_reads(1, 400, 150);
    for ablation in Ablation::ALL {
        let opts = CompressOptions {
            ablation,
            ..CompressOptions::default()
        };
        roundtrip(&cons, &reads, &opts);
    }
}

#[test]
fn sizes_do_not_grow_with_level() {
    let (cons, reads) = mixed_reads(2, 600, 120);
    let mut prev = u64::MAX;
    for ablation in Ablation::ALL {
        let opts = CompressOptions {
            ablation,
            ..CompressOptions::default()
        };
        let size = roundtrip(&cons, &reads, &opts).container.len() as u64;
        assert!(size <= prev, "{ablation}: {size} > {prev}");
        prev = size;
    }
}

#[test]
fn partitions_and_order_roundtrip() {
    let (cons, reads) = mixed_reads(3, 300, 100);
    let opts = CompressOptions {
        partitions: 5,
        preserve_order: true,
        threads: 2,
        ..CompressOptions::default()
    };
    let c = roundtrip(&cons, &reads, &opts);
    assert_eq!(c.container.partitions.len(), 5);
    let out = decompress(
        &c.container,
        Some(&cons),
        &DecompressOptions {
            preserve_order: true,
            ..DecompressOptions::default()
        },
    )
    .unwrap();
    let got: Vec<&[u8]> = out.reads.iter().map(|r| r.bases.as_slice()).collect();
    let want: Vec<&[u8]> = reads.iter().map(|r| r.bases.as_slice()).collect();
    assert_eq!(got, want);
}

#[test]
fn passthrough_keeps_ids_and_qualities() {
    let (cons, mut reads) = mixed_reads(4, 50, 80);
    for (i, r) in reads.iter_mut().enumerate() {
        r.qual = Some(vec![b'!' + (i % 40) as u8; r.bases.len()]);
    }
    let opts = CompressOptions {
        passthrough: true,
        embed_consensus: true,
        ..CompressOptions::default()
    };
    let c = roundtrip(&cons, &reads, &opts);
    let out = decompress(
        &c.container,
        None,
        &DecompressOptions {
            preserve_order: true,
            ..DecompressOptions::default()
        },
    )
    .unwrap();
    for (got, want) in out.reads.iter().zip(&reads) {
        assert_eq!(got.id.as_deref(), Some(want.id.as_str()));
        assert_eq!(got.qual, want.qual);
        assert_eq!(got.bases, want.bases);
    }
}

#[test]
fn long_reads_roundtrip() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let cons = random_seq(&mut rng, 60_000);
    let reads: Vec<ReadRecord> = (0..30)
        .map(|i| {
            let len = rng.gen_range(1500..4000);
            let pos = rng.gen_range(0..cons.len() - len);
            ReadRecord {
                id: format!("l{i}"),
                bases: mutate(&mut rng, &cons[pos..pos + len], 0.08),
                qual: None,
            }
        })
        .collect();
    for ablation in [Ablation::No, Ablation::O2, Ablation::O4] {
        let opts = CompressOptions {
            ablation,
            ..CompressOptions::default()
        };
        let c = roundtrip(&cons, &reads, &opts);
        assert!(c.stats.layout.long_read);
    }
}

#[test]
fn empty_read_set_roundtrips() {
    let (cons, _) = mixed_reads(6, 0, 100);
    let c = roundtrip(&cons, &[], &CompressOptions::default());
    assert_eq!(c.container.partitions.len(), 0);
}

#[test]
fn wrong_consensus_is_rejected() {
    let (cons, reads) = mixed_reads(7, 20, 100);
    let c = compress(&reads, &cons, &CompressOptions::default()).unwrap();
    let mut other = cons.clone();
    other[10] = if other[10] == b'A' { b'C' } else { b'A' };
    let err = decompress(&c.container, Some(&other), &DecompressOptions::default()).unwrap_err();
    assert!(matches!(err, Error::ConsensusMismatch { .. }));
    let err = decompress(&c.container, None, &DecompressOptions::default()).unwrap_err();
    assert!(matches!(err, Error::Format(_)));
}

#[test]
fn sidecar_roundtrip_and_truncation() {
    let reads = vec![
        ReadRecord {
            id: "a".into(),
            bases: b"ACGT".to_vec(),
            qual: Some(b"IIII".to_vec()),
        },
        ReadRecord {
            id: "bb".into(),
            bases: b"GG".to_vec(),
            qual: None,
        },
    ];
    let s = build_sidecar(&reads);
    let back = parse_sidecar(&s, 2).unwrap();
    assert_eq!(back[0], ("a".to_string(), Some(b"IIII".to_vec())));
    assert_eq!(back[1], ("bb".to_string(), None));
    assert!(parse_sidecar(&s[..s.len() - 1], 2).is_err());
    assert!(parse_sidecar(&s, 1).is_err());
}

#[test]
fn ablation_names_parse() {
    for a in Ablation::ALL {
        assert_eq!(a.name().parse::<Ablation>().unwrap(), a);
    }
    assert_eq!("o3".parse::<Ablation>().unwrap(), Ablation::O3);
    assert!("O5".parse::<Ablation>().is_err());
}
