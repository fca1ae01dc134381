//! LSB-first bit packing.
//!
//! Every packed stream in the crate uses one rule: bit `i` of the stream is
//! bit `i % 8` of byte `i / 8`, and a `width`-bit value is written starting
//! from its least significant bit. Streams are zero-padded to whole bytes.

use std::cell::RefCell;
use std::rc::Rc;

use crate::error::{Error, Result, StreamId};

/// Largest value width accepted by a single read or write.
pub const MAX_WIDTH: u32 = 64;

#[inline]
fn low_mask(width: u32) -> u64 {
    if width >= 64 {
        u64::MAX
    } else {
        (1u64 << width) - 1
    }
}

/// Number of bits needed to write `value` in binary; `bit_len(0) == 1`.
#[inline]
pub fn bit_len(value: u64) -> u32 {
    (64 - value.leading_zeros()).max(1)
}

#[derive(Debug, Default, Clone)]
pub struct BitWriter {
    buf: Vec<u8>,
    len: u64,
}

impl BitWriter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_capacity_bits(bits: u64) -> Self {
        Self {
            buf: Vec::with_capacity(bits.div_ceil(8) as usize),
            len: 0,
        }
    }

    /// Append the low `width` bits of `value`. Higher bits must be zero.
    pub fn write_bits(&mut self, value: u64, width: u32) {
        debug_assert!(width <= MAX_WIDTH);
        debug_assert!(width == 64 || value >> width == 0, "value {value} wider than {width}");
        let mut v = value;
        let mut left = width;
        while left > 0 {
            let used = (self.len % 8) as u32;
            if used == 0 {
                self.buf.push(0);
            }
            let take = (8 - used).min(left);
            let last = self.buf.last_mut().expect("byte pushed above");
            *last |= ((v & low_mask(take)) as u8) << used;
            v = if take == 64 { 0 } else { v >> take };
            left -= take;
            self.len += take as u64;
        }
    }

    #[inline]
    pub fn write_bit(&mut self, bit: bool) {
        self.write_bits(bit as u64, 1);
    }

    /// Number of bits written so far (excluding padding).
    pub fn bit_len(&self) -> u64 {
        self.len
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.buf
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.buf
    }
}

/// One read recorded by a traced [`BitReader`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceEvent {
    pub stream: StreamId,
    pub bit_offset: u64,
    pub width: u32,
    pub value: u64,
}

pub type SharedTrace = Rc<RefCell<Vec<TraceEvent>>>;

/// Access statistics kept by every [`BitReader`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ReaderStats {
    pub reads: u64,
    pub bits_consumed: u64,
    /// Largest number of bits requested by a single read.
    pub max_lookahead: u32,
    pub backward_seeks: u64,
}

/// Forward-only reader over a bit stream with a fixed logical length.
#[derive(Debug, Clone)]
pub struct BitReader<'a> {
    data: &'a [u8],
    bit_len: u64,
    pos: u64,
    stream: StreamId,
    stats: ReaderStats,
    trace: Option<SharedTrace>,
}

impl<'a> BitReader<'a> {
    /// `bit_len` may not exceed `data.len() * 8`.
    pub fn new(stream: StreamId, data: &'a [u8], bit_len: u64) -> Self {
        debug_assert!(bit_len <= data.len() as u64 * 8);
        Self {
            data,
            bit_len: bit_len.min(data.len() as u64 * 8),
            pos: 0,
            stream,
            stats: ReaderStats::default(),
            trace: None,
        }
    }

    pub fn set_trace(&mut self, trace: SharedTrace) {
        self.trace = Some(trace);
    }

    pub fn stream(&self) -> StreamId {
        self.stream
    }

    pub fn position(&self) -> u64 {
        self.pos
    }

    pub fn bit_len(&self) -> u64 {
        self.bit_len
    }

    pub fn remaining(&self) -> u64 {
        self.bit_len - self.pos
    }

    pub fn stats(&self) -> ReaderStats {
        self.stats
    }

    pub fn read_bits(&mut self, width: u32) -> Result<u64> {
        if width > MAX_WIDTH {
            return Err(Error::corrupt(self.stream, self.pos, format!("read of {width} bits exceeds register")));
        }
        if self.pos + width as u64 > self.bit_len {
            return Err(Error::corrupt(
                self.stream,
                self.pos,
                format!("stream exhausted reading {width} bits ({} left)", self.remaining()),
            ));
        }
        let start = self.pos;
        let mut out = 0u64;
        let mut got = 0u32;
        while got < width {
            let byte = self.data[(self.pos / 8) as usize] as u64;
            let used = (self.pos % 8) as u32;
            let take = (8 - used).min(width - got);
            out |= ((byte >> used) & low_mask(take)) << got;
            got += take;
            self.pos += take as u64;
        }
        self.stats.reads += 1;
        self.stats.bits_consumed += width as u64;
        self.stats.max_lookahead = self.stats.max_lookahead.max(width);
        if let Some(trace) = &self.trace {
            trace.borrow_mut().push(TraceEvent {
                stream: self.stream,
                bit_offset: start,
                width,
                value: out,
            });
        }
        Ok(out)
    }

    #[inline]
    pub fn read_bit(&mut self) -> Result<bool> {
        Ok(self.read_bits(1)? == 1)
    }

    /// Reposition the cursor. The decoder never calls this; it exists so the
    /// streaming audit can be exercised against a misbehaving reader.
    pub fn seek(&mut self, pos: u64) {
        if pos < self.pos {
            self.stats.backward_seeks += 1;
        }
        self.pos = pos.min(self.bit_len);
    }

    /// Errors unless every bit has been consumed and the byte padding is zero.
    pub fn finish(&self) -> Result<()> {
        if self.pos != self.bit_len {
            return Err(Error::corrupt(
                self.stream,
                self.pos,
                format!("{} unread bits at end of stream", self.bit_len - self.pos),
            ));
        }
        let total = self.data.len() as u64 * 8;
        let mut p = self.bit_len;
        while p < total {
            if (self.data[(p / 8) as usize] >> (p % 8)) & 1 != 0 {
                return Err(Error::corrupt(self.stream, p, "nonzero padding bit"));
            }
            p += 1;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn lsb_first_layout() {
        let mut w = BitWriter::new();
        w.write_bits(0b01, 2);
        w.write_bits(0b10, 2);
        w.write_bits(0b111, 3);
        assert_eq!(w.as_bytes(), &[0b0111_1001]);
        assert_eq!(w.bit_len(), 7);
        w.write_bits(0x1ff, 9);
        assert_eq!(w.as_bytes(), &[0b1111_1001, 0xff]);
    }

    #[test]
    fn full_width_values() {
        let mut w = BitWriter::new();
        w.write_bit(true);
        w.write_bits(u64::MAX, 64);
        w.write_bits(0x8000_0000_0000_0001, 64);
        let bytes = w.into_bytes();
        let mut r = BitReader::new(StreamId::MPA, &bytes, 129);
        assert!(r.read_bit().unwrap());
        assert_eq!(r.read_bits(64).unwrap(), u64::MAX);
        assert_eq!(r.read_bits(64).unwrap(), 0x8000_0000_0000_0001);
        r.finish().unwrap();
    }

    #[test]
    fn exhaustion_reports_offset() {
        let bytes = [0xffu8];
        let mut r = BitReader::new(StreamId::MBTA, &bytes, 5);
        r.read_bits(4).unwrap();
        match r.read_bits(2) {
            Err(Error::Corrupt { stream, bit_offset, .. }) => {
                assert_eq!(stream, StreamId::MBTA);
                assert_eq!(bit_offset, 4);
            }
            other => panic!("expected corruption, got {other:?}"),
        }
    }

    #[test]
    fn nonzero_padding_detected() {
        let bytes = [0b1000_0001u8];
        let mut r = BitReader::new(StreamId::MPGA, &bytes, 1);
        r.read_bit().unwrap();
        assert!(r.finish().is_err());
    }

    #[test]
    fn seek_backward_is_counted() {
        let bytes = [0u8; 4];
        let mut r = BitReader::new(StreamId::MaPA, &bytes, 32);
        r.read_bits(10).unwrap();
        r.seek(3);
        assert_eq!(r.stats().backward_seeks, 1);
    }

    #[test]
    fn bit_len_of_zero_is_one() {
        assert_eq!(bit_len(0), 1);
        assert_eq!(bit_len(1), 1);
        assert_eq!(bit_len(2), 2);
        assert_eq!(bit_len(255), 8);
        assert_eq!(bit_len(256), 9);
        assert_eq!(bit_len(u64::MAX), 64);
    }

    proptest! {
        #[test]
        fn write_read_identity(fields in proptest::collection::vec((any::<u64>(), 1u32..=64), 0..200)) {
            let mut w = BitWriter::new();
            let fields: Vec<(u64, u32)> = fields
                .into_iter()
                .map(|(v, width)| (if width == 64 { v } else { v & ((1 << width) - 1) }, width))
                .collect();
            for &(v, width) in &fields {
                w.write_bits(v, width);
            }
            let total = w.bit_len();
            let bytes = w.into_bytes();
            prop_assert_eq!(bytes.len() as u64, total.div_ceil(8));
            let mut r = BitReader::new(StreamId::MPA, &bytes, total);
            for &(v, width) in &fields {
                prop_assert_eq!(r.read_bits(width).unwrap(), v);
            }
            prop_assert!(r.finish().is_ok());
        }
    }
}
