use super::*;
use crate::align::{align_read_outcome, build_index, reconstruct, AlignParams, AlignStatus, Alignment, Mismatch, Segment};
use crate::bits::{BitWriter, TraceEvent};
use crate::encode::{encode_partition, sort_and_delta};
use crate::tune::ClassScheme;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::cell::RefCell;
use std::rc::Rc;

fn input(streams: &[BitWriter; StreamId::COUNT], start: u64, read_count: u64) -> PartitionInput<'_> {
    let mut s: [(&[u8], u64); StreamId::COUNT] = [(&[], 0); StreamId::COUNT];
    for (slot, w) in s.iter_mut().zip(streams) {
        *slot = (w.as_bytes(), w.bit_len());
    }
    PartitionInput {
        streams: s,
        start,
        read_count,
    }
}

fn mapped(cons_pos: u64, len: usize, mismatches: Vec<Mismatch>) -> Alignment {
    Alignment {
        segments: vec![Segment {
            cons_pos,
            rev: false,
            read_span: 0..len,
            mismatches,
        }],
        clip_head: Vec::new(),
        clip_tail: Vec::new(),
        status: AlignStatus::Mapped,
    }
}

fn random_seq(rng: &mut ChaCha8Rng, n: usize) -> Vec<u8> {
    (0..n).map(|_| b"ACGT"[rng.gen_range(0..4)]).collect()
}

fn layouts() -> Vec<Layout> {
    let mut out = Vec::new();
    for bits in 0..16u32 {
        out.push(Layout {
            long_read: bits & 1 != 0,
            indel_lengths: bits & 1 != 0,
            merged: bits & 2 != 0,
            chimeric: bits & 4 != 0,
            corner_bit: bits & 8 != 0,
            preserve_order: bits & 3 == 1,
            fixed_read_len: None,
            order_width: 12,
            max_segments: if bits & 4 != 0 { 3 } else { 1 },
        });
    }
    out
}

#[test]
fn decoded_reads_equal_reconstruction() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let cons = random_seq(&mut rng, 40_000);
    let params = AlignParams {
        max_segments: 3,
        ..AlignParams::short_reads()
    };
    let index = build_index(&cons, params.k).unwrap();
    let mut reads = Vec::new();
    for i in 0..300 {
        let len = rng.gen_range(80..300);
        let pos = rng.gen_range(0..cons.len() - len);
        let mut r = cons[pos..pos + len].to_vec();
        for _ in 0..rng.gen_range(0..6) {
            let at = rng.gen_range(0..r.len());
            match rng.gen_range(0..3) {
                0 => r[at] = b"ACGT"[rng.gen_range(0..4)],
                1 => r.insert(at, b"ACGT"[rng.gen_range(0..4)]),
                _ => {
                    r.remove(at);
                }
            }
        }
        match i % 6 {
            0 => r = random_seq(&mut rng, len),
            1 => r[rng.gen_range(0..len / 2)] = b'N',
            2 => {
                let other = rng.gen_range(0..cons.len() - len);
                r.truncate(len / 2);
                r.extend_from_slice(&cons[other..other + len / 2]);
            }
            3 => {
                let mut h = random_seq(&mut rng, 25);
                h.extend_from_slice(&r);
                r = h;
            }
            _ => {}
        }
        if rng.gen_bool(0.5) {
            r = crate::seqio::reverse_complement(&r);
        }
        reads.push(r);
    }
    let alns: Vec<Alignment> = reads
        .iter()
        .map(|r| {
            let o = align_read_outcome(r, &index, &params);
            o.chimeric.unwrap_or(o.single)
        })
        .collect();
    let (order, _) = sort_and_delta(&alns);
    let schemes = Schemes::fixed_defaults();
    for layout in layouts() {
        let usable: Vec<usize> = order
            .iter()
            .copied()
            .filter(|&i| layout.chimeric || alns[i].segments.len() <= 1 || reads[i].contains(&b'N'))
            .collect();
        let items: Vec<(usize, &[u8], &Alignment)> =
            usable.iter().map(|&i| (i, reads[i].as_slice(), &alns[i])).collect();
        let enc = encode_partition(&items, &layout, &schemes, &cons, 0).unwrap();
        let (out, report, _) = decode_partition(input(&enc.streams, 0, items.len() as u64), &layout, &schemes, &cons, false).unwrap();
        assert_eq!(out.len(), items.len());
        for (d, &(i, read, aln)) in out.iter().zip(&items) {
            assert_eq!(d.bases, read, "layout {layout:?}");
            if aln.is_mapped() {
                assert_eq!(reconstruct(aln, &cons).unwrap(), d.bases);
            }
            assert_eq!(d.index, layout.preserve_order.then_some(i as u64));
        }
        audit_streaming(&report).unwrap();
        assert!(report.streams.iter().all(|s| s.max_lookahead <= MAX_LOOKAHEAD_BITS));
    }
}

#[test]
fn exact_read_leaves_mbta_untouched() {
    let cons = b"ACGTTGCAACGTTGCAACGT".to_vec();
    let layout = Layout::default();
    let schemes = Schemes::fixed_defaults();
    let read = cons[2..14].to_vec();
    let aln = mapped(2, 12, Vec::new());
    let enc = encode_partition(&[(0, &read, &aln)], &layout, &schemes, &cons, 0).unwrap();
    assert_eq!(enc.streams[StreamId::MBTA.index()].bit_len(), 0);
    let (out, report, _) = decode_partition(input(&enc.streams, 0, 1), &layout, &schemes, &cons, false).unwrap();
    assert_eq!(out[0].bases, read);
    assert_eq!(report.streams[StreamId::MBTA.index()].bits_consumed, 0);
}

#[test]
fn insertion_lengthens_the_read() {
    let cons = b"ACGTTGCAACGTTGCAACGT".to_vec();
    let mut read = cons[0..10].to_vec();
    read.splice(4..4, *b"GG");
    let aln = mapped(0, 12, vec![Mismatch::ins(4, b"GG".to_vec())]);
    assert_eq!(reconstruct(&aln, &cons).unwrap(), read);
    for layout in layouts().into_iter().filter(|l| !l.preserve_order) {
        let schemes = Schemes::fixed_defaults();
        let enc = encode_partition(&[(0, &read, &aln)], &layout, &schemes, &cons, 0).unwrap();
        let (out, _, _) = decode_partition(input(&enc.streams, 0, 1), &layout, &schemes, &cons, false).unwrap();
        assert_eq!(out[0].bases.len(), 10 + 2);
        assert_eq!(out[0].bases, read);
    }
}

#[test]
fn audit_rejects_backward_seeks_and_wide_reads() {
    let mut report = AccessReport::default();
    audit_streaming(&report).unwrap();
    report.streams[StreamId::MPA.index()].backward_seeks = 1;
    assert!(matches!(audit_streaming(&report), Err(Error::Audit(_))));
    let mut report = AccessReport::default();
    report.streams[StreamId::MBTA.index()].max_lookahead = MAX_LOOKAHEAD_BITS + 1;
    assert!(matches!(audit_streaming(&report), Err(Error::Audit(_))));
}

#[test]
fn seeking_back_is_recorded() {
    let mut w = BitWriter::new();
    w.write_bits(0xff, 8);
    let mut r = BitReader::new(StreamId::MPA, w.as_bytes(), 8);
    r.read_bits(4).unwrap();
    r.seek(0);
    let report = AccessReport {
        streams: std::array::from_fn(|i| if i == StreamId::MPA.index() { r.stats() } else { ReaderStats::default() }),
        ..AccessReport::default()
    };
    assert!(audit_streaming(&report).is_err());
}

#[test]
fn unmapped_guide_code_is_corruption() {
    let cons = b"ACGTTGCAACGTTGCAACGT".to_vec();
    let layout = Layout::default();
    let schemes = Schemes {
        mapos: ClassScheme::new(vec![2, 4], vec![0, 1]).unwrap(),
        ..Schemes::fixed_defaults()
    };
    let read = cons[1..11].to_vec();
    let aln = mapped(1, 10, Vec::new());
    let mut enc = encode_partition(&[(0, &read, &aln)], &layout, &schemes, &cons, 0).unwrap();
    let mut g = BitWriter::new();
    g.write_bits(0b111, 3);
    enc.streams[StreamId::MaPGA.index()] = g;
    let err = decode_partition(input(&enc.streams, 0, 1), &layout, &schemes, &cons, false).unwrap_err();
    match err {
        Error::Corrupt { stream, bit_offset, message } => {
            assert_eq!(stream, StreamId::MaPGA);
            assert_eq!(bit_offset, 0);
            assert!(message.contains("no class mapping"));
        }
        other => panic!("unexpected {other}"),
    }
}

#[test]
fn truncated_stream_names_stream_and_offset() {
    let cons = b"ACGTTGCAACGTTGCAACGT".to_vec();
    let layout = Layout::default();
    let schemes = Schemes::fixed_defaults();
    let read = cons[1..11].to_vec();
    let aln = mapped(1, 10, vec![Mismatch::sub(3, b'A')]);
    let enc = encode_partition(&[(0, &read, &aln)], &layout, &schemes, &cons, 0).unwrap();
    let mut inp = input(&enc.streams, 0, 1);
    let mpa = inp.streams[StreamId::MPA.index()];
    inp.streams[StreamId::MPA.index()] = (mpa.0, mpa.1 - 1);
    match decode_partition(inp, &layout, &schemes, &cons, false).unwrap_err() {
        Error::Corrupt { stream, .. } => assert_eq!(stream, StreamId::MPA),
        other => panic!("unexpected {other}"),
    }
    // leftover bits are corruption too
    let mut inp = input(&enc.streams, 0, 0);
    inp.read_count = 0;
    assert!(decode_partition(inp, &layout, &schemes, &cons, false).is_err());
}

#[test]
fn empty_partition_decodes_to_nothing() {
    let streams: [BitWriter; StreamId::COUNT] = Default::default();
    let (out, report, _) =
        decode_partition(input(&streams, 0, 0), &Layout::default(), &Schemes::fixed_defaults(), b"ACGT", false).unwrap();
    assert!(out.is_empty());
    assert_eq!(report.window_loads, 0);
}

#[test]
fn trace_shows_guide_then_payload() {
    let cons = b"ACGTTGCAACGTTGCAACGT".to_vec();
    let layout = Layout::default();
    let schemes = Schemes {
        mapos: ClassScheme::new(vec![2, 4], vec![0, 1]).unwrap(),
        ..Schemes::fixed_defaults()
    };
    let read = cons[9..19].to_vec();
    let aln = mapped(9, 10, Vec::new());
    let enc = encode_partition(&[(0, &read, &aln)], &layout, &schemes, &cons, 0).unwrap();
    let mut dec = PartitionDecoder::new(input(&enc.streams, 0, 1), &layout, &schemes, &cons);
    let trace = Rc::new(RefCell::new(Vec::new()));
    dec.set_trace(trace.clone());
    assert_eq!(dec.next_read().unwrap().unwrap().bases, read);
    dec.finish().unwrap();
    let ev: Vec<TraceEvent> = trace
        .borrow()
        .iter()
        .filter(|e| matches!(e.stream, StreamId::MaPGA | StreamId::MaPA))
        .cloned()
        .collect();
    let shape: Vec<(StreamId, u32, u64)> = ev.iter().map(|e| (e.stream, e.width, e.value)).collect();
    assert_eq!(
        shape,
        [(StreamId::MaPGA, 1, 1), (StreamId::MaPGA, 1, 0), (StreamId::MaPA, 4, 9)]
    );
}

#[test]
fn window_streams_long_reads_in_chunks() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let cons = random_seq(&mut rng, 5000);
    let aln = mapped(100, 1500, vec![Mismatch::sub(700, if cons[800] == b'A' { b'C' } else { b'A' })]);
    let read = reconstruct(&aln, &cons).unwrap();
    let layout = Layout::default();
    let schemes = Schemes::fixed_defaults();
    let enc = encode_partition(&[(0, &read, &aln)], &layout, &schemes, &cons, 0).unwrap();
    let (out, report, _) = decode_partition(input(&enc.streams, 0, 1), &layout, &schemes, &cons, false).unwrap();
    assert_eq!(out[0].bases, read);
    assert!(report.window_loads >= (1500 / WINDOW_BASES) as u64);
    assert_eq!(report.peak_read_len, 1500);
}
