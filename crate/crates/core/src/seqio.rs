//! Read-set parsing, writing, and base packing.

use std::io::{self, BufRead, Read, Write};

use log::warn;

use crate::bits::{BitReader, BitWriter};
use crate::error::{Error, Result, StreamId};

/// 2-bit code of a base (A=0, C=1, G=2, T=3); `None` for anything else.
#[inline]
pub fn base_code(b: u8) -> Option<u8> {
    match b {
        b'A' => Some(0),
        b'C' => Some(1),
        b'G' => Some(2),
        b'T' => Some(3),
        _ => None,
    }
}

pub const CODE_TO_BASE: [u8; 4] = *b"ACGT";

const COMPLEMENT: [u8; 256] = {
    let mut t = [0u8; 256];
    let mut i = 0;
    while i < 256 {
        t[i] = i as u8;
        i += 1;
    }
    t[b'A' as usize] = b'T';
    t[b'C' as usize] = b'G';
    t[b'G' as usize] = b'C';
    t[b'T' as usize] = b'A';
    t
};

/// Complement of A/C/G/T; anything else maps to itself.
#[inline]
pub fn complement(b: u8) -> u8 {
    COMPLEMENT[b as usize]
}

pub fn reverse_complement(seq: &[u8]) -> Vec<u8> {
    seq.iter().rev().map(|&b| complement(b)).collect()
}

pub fn reverse_complement_in_place(seq: &mut [u8]) {
    seq.reverse();
    for b in seq.iter_mut() {
        *b = complement(*b);
    }
}

/// Uppercase `raw` into `out`, rejecting characters outside {A,C,G,T,N} (any case).
fn normalize_bases(raw: &[u8], out: &mut Vec<u8>) -> std::result::Result<(), String> {
    out.clear();
    out.reserve(raw.len());
    for &c in raw {
        let up = c.to_ascii_uppercase();
        match up {
            b'A' | b'C' | b'G' | b'T' | b'N' => out.push(up),
            _ => return Err(format!("illegal base character {:?}", c as char)),
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReadRecord {
    pub id: String,
    pub bases: Vec<u8>,
    /// Quality line, kept only in passthrough mode.
    pub qual: Option<Vec<u8>>,
}

impl ReadRecord {
    /// Validates and uppercases `bases`.
    pub fn new(id: impl Into<String>, bases: &[u8]) -> Result<Self> {
        let mut norm = Vec::new();
        normalize_bases(bases, &mut norm).map_err(|message| Error::Parse { record: 0, message })?;
        if norm.is_empty() {
            return Err(Error::Parse {
                record: 0,
                message: "empty sequence".into(),
            });
        }
        Ok(Self {
            id: id.into(),
            bases: norm,
            qual: None,
        })
    }

    pub fn len(&self) -> usize {
        self.bases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bases.is_empty()
    }

    pub fn has_n(&self) -> bool {
        contains_n(&self.bases)
    }
}

/// Whether `bases` contains an `N`, eight bytes at a time.
pub fn contains_n(bases: &[u8]) -> bool {
    const LO: u64 = 0x0101_0101_0101_0101;
    const HI: u64 = 0x8080_8080_8080_8080;
    const NS: u64 = LO * b'N' as u64;
    let mut chunks = bases.chunks_exact(8);
    for c in &mut chunks {
        let x = u64::from_le_bytes(c.try_into().expect("8 bytes")) ^ NS;
        if x.wrapping_sub(LO) & !x & HI != 0 {
            return true;
        }
    }
    chunks.remainder().contains(&b'N')
}

fn read_trimmed_line<R: BufRead>(r: &mut R, buf: &mut Vec<u8>) -> io::Result<bool> {
    buf.clear();
    if r.read_until(b'\n', buf)? == 0 {
        return Ok(false);
    }
    while matches!(buf.last(), Some(b'\n' | b'\r')) {
        buf.pop();
    }
    Ok(true)
}

/// Streaming 4-line FASTQ parser.
pub struct FastqReader<R> {
    inner: R,
    index: u64,
    keep_quality: bool,
    done: bool,
    header: Vec<u8>,
    seq: Vec<u8>,
    plus: Vec<u8>,
    qual: Vec<u8>,
}

pub fn parse_fastq<R: BufRead>(inner: R) -> FastqReader<R> {
    FastqReader {
        inner,
        index: 0,
        keep_quality: false,
        done: false,
        header: Vec::new(),
        seq: Vec::new(),
        plus: Vec::new(),
        qual: Vec::new(),
    }
}

impl<R: BufRead> FastqReader<R> {
    /// Retain quality lines on the emitted records (passthrough mode).
    pub fn with_quality(mut self, keep: bool) -> Self {
        self.keep_quality = keep;
        self
    }

    fn err(&self, message: impl Into<String>) -> Error {
        Error::Parse {
            record: self.index,
            message: message.into(),
        }
    }

    fn next_record(&mut self) -> Result<Option<ReadRecord>> {
        // skip blank lines between records / at end of file
        loop {
            if !read_trimmed_line(&mut self.inner, &mut self.header)? {
                return Ok(None);
            }
            if !self.header.is_empty() {
                break;
            }
        }
        if self.header[0] != b'@' {
            return Err(self.err("header line does not start with '@'"));
        }
        if !read_trimmed_line(&mut self.inner, &mut self.seq)? {
            return Err(self.err("truncated record: missing sequence line"));
        }
        if !read_trimmed_line(&mut self.inner, &mut self.plus)? {
            return Err(self.err("truncated record: missing '+' line"));
        }
        if self.plus.first() != Some(&b'+') {
            return Err(self.err("separator line does not start with '+'"));
        }
        if !read_trimmed_line(&mut self.inner, &mut self.qual)? {
            return Err(self.err("truncated record: missing quality line"));
        }
        if self.qual.len() != self.seq.len() {
            return Err(self.err(format!(
                "quality length {} differs from sequence length {}",
                self.qual.len(),
                self.seq.len()
            )));
        }
        let mut bases = Vec::new();
        normalize_bases(&self.seq, &mut bases).map_err(|m| self.err(m))?;
        if bases.is_empty() {
            return Err(self.err("empty sequence"));
        }
        let id = String::from_utf8_lossy(&self.header[1..]).into_owned();
        let qual = self.keep_quality.then(|| self.qual.clone());
        Ok(Some(ReadRecord { id, bases, qual }))
    }
}

impl<R: BufRead> Iterator for FastqReader<R> {
    type Item = Result<ReadRecord>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        let out = self.next_record();
        match &out {
            Ok(Some(_)) => self.index += 1,
            _ => self.done = true,
        }
        out.transpose()
    }
}

/// All records of a (possibly multi-line) FASTA stream.
pub fn parse_fasta_records<R: BufRead>(mut inner: R) -> Result<Vec<(String, Vec<u8>)>> {
    let mut out: Vec<(String, Vec<u8>)> = Vec::new();
    let mut line = Vec::new();
    let mut norm = Vec::new();
    while read_trimmed_line(&mut inner, &mut line)? {
        if line.is_empty() {
            continue;
        }
        if line[0] == b'>' {
            out.push((String::from_utf8_lossy(&line[1..]).trim().to_string(), Vec::new()));
            continue;
        }
        let Some(last) = out.last_mut() else {
            return Err(Error::Fasta("sequence data before the first '>' header".into()));
        };
        normalize_bases(&line, &mut norm).map_err(|m| Error::Fasta(format!("record {:?}: {m}", last.0)))?;
        last.1.extend_from_slice(&norm);
    }
    Ok(out)
}

/// First record of a FASTA stream, used as the consensus. Extra records are
/// ignored with a warning.
pub fn parse_fasta<R: BufRead>(inner: R) -> Result<(String, Vec<u8>)> {
    let mut records = parse_fasta_records(inner)?;
    if records.is_empty() {
        return Err(Error::Fasta("no '>' header line (empty file?)".into()));
    }
    if records.len() > 1 {
        warn!(
            "FASTA has {} records; using only the first ({:?})",
            records.len(),
            records[0].0
        );
    }
    let (name, bases) = records.swap_remove(0);
    if bases.is_empty() {
        return Err(Error::Fasta(format!("record {name:?} has an empty sequence")));
    }
    Ok((name, bases))
}

/// Reads from FASTQ or FASTA, sniffed from the first non-blank byte.
pub fn read_records<R: BufRead>(mut inner: R, keep_quality: bool) -> Result<Vec<ReadRecord>> {
    let first = loop {
        let buf = inner.fill_buf()?;
        match buf.iter().position(|c| !c.is_ascii_whitespace()) {
            Some(i) => break Some(buf[i]),
            None if buf.is_empty() => break None,
            None => {
                let n = buf.len();
                inner.consume(n);
            }
        }
    };
    match first {
        None => Ok(Vec::new()),
        Some(b'>') => parse_fasta_records(inner)?
            .into_iter()
            .enumerate()
            .map(|(i, (id, bases))| {
                if bases.is_empty() {
                    Err(Error::Parse {
                        record: i as u64,
                        message: "empty sequence".into(),
                    })
                } else {
                    Ok(ReadRecord { id, bases, qual: None })
                }
            })
            .collect(),
        Some(_) => parse_fastq(inner).with_quality(keep_quality).collect(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PackMode {
    TwoBit,
    ThreeBit,
    OneHot,
}

impl PackMode {
    pub fn bits_per_base(self) -> u32 {
        match self {
            PackMode::TwoBit => 2,
            PackMode::ThreeBit => 3,
            PackMode::OneHot => 4,
        }
    }

    /// Mode byte used by the packed binary record format.
    pub fn code(self) -> u8 {
        self.bits_per_base() as u8
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            2 => Some(PackMode::TwoBit),
            3 => Some(PackMode::ThreeBit),
            4 => Some(PackMode::OneHot),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PackedSeq {
    pub mode: PackMode,
    pub bits: Vec<u8>,
    pub len: u64,
}

fn three_bit_code(b: u8) -> Option<u64> {
    match b {
        b'N' => Some(4),
        other => base_code(other).map(u64::from),
    }
}

pub fn pack_bases(bases: &[u8], mode: PackMode) -> Result<PackedSeq> {
    let bpb = mode.bits_per_base();
    let mut w = BitWriter::with_capacity_bits(bases.len() as u64 * bpb as u64);
    for (i, &b) in bases.iter().enumerate() {
        let code = match mode {
            PackMode::TwoBit => base_code(b).map(u64::from),
            PackMode::ThreeBit => three_bit_code(b),
            PackMode::OneHot => match b {
                b'N' => Some(0),
                other => base_code(other).map(|c| 1u64 << c),
            },
        };
        let code = code.ok_or_else(|| {
            Error::Encoding(format!("base {:?} at index {i} cannot be packed as {mode:?}", b as char))
        })?;
        w.write_bits(code, bpb);
    }
    Ok(PackedSeq {
        mode,
        bits: w.into_bytes(),
        len: bases.len() as u64,
    })
}

pub fn unpack_bases(packed: &PackedSeq) -> Result<Vec<u8>> {
    let bpb = packed.mode.bits_per_base();
    let total = packed.len * bpb as u64;
    if (packed.bits.len() as u64) < total.div_ceil(8) {
        return Err(Error::Format(format!(
            "packed sequence holds {} bytes, {} bases need {}",
            packed.bits.len(),
            packed.len,
            total.div_ceil(8)
        )));
    }
    let mut r = BitReader::new(StreamId::Literals, &packed.bits, total);
    let mut out = Vec::with_capacity(packed.len as usize);
    for i in 0..packed.len {
        let code = r.read_bits(bpb)?;
        let base = match packed.mode {
            PackMode::TwoBit => CODE_TO_BASE[code as usize],
            PackMode::ThreeBit => match code {
                0..=3 => CODE_TO_BASE[code as usize],
                4 => b'N',
                _ => {
                    return Err(Error::corrupt(
                        StreamId::Literals,
                        i * 3,
                        format!("invalid 3-bit base code {code:03b}"),
                    ))
                }
            },
            PackMode::OneHot => match code {
                0 => b'N',
                1 => b'A',
                2 => b'C',
                4 => b'G',
                8 => b'T',
                _ => {
                    return Err(Error::corrupt(
                        StreamId::Literals,
                        i * 4,
                        format!("invalid one-hot nibble {code:04b}"),
                    ))
                }
            },
        };
        out.push(base);
    }
    Ok(out)
}

pub fn write_fastq<W: Write>(w: &mut W, id: &str, bases: &[u8], qual: &[u8]) -> io::Result<()> {
    w.write_all(b"@")?;
    w.write_all(id.as_bytes())?;
    w.write_all(b"\n")?;
    w.write_all(bases)?;
    w.write_all(b"\n+\n")?;
    w.write_all(qual)?;
    w.write_all(b"\n")
}

pub fn write_fasta<W: Write>(w: &mut W, id: &str, bases: &[u8]) -> io::Result<()> {
    w.write_all(b">")?;
    w.write_all(id.as_bytes())?;
    w.write_all(b"\n")?;
    w.write_all(bases)?;
    w.write_all(b"\n")
}

pub fn write_line<W: Write>(w: &mut W, bases: &[u8]) -> io::Result<()> {
    w.write_all(bases)?;
    w.write_all(b"\n")
}

/// Packed binary record: mode byte, u64 little-endian base count, packed bits.
pub fn write_packed<W: Write>(w: &mut W, packed: &PackedSeq) -> io::Result<()> {
    w.write_all(&[packed.mode.code()])?;
    w.write_all(&packed.len.to_le_bytes())?;
    w.write_all(&packed.bits)
}

/// Next packed binary record, or `None` at a clean end of stream.
pub fn read_packed<R: Read>(r: &mut R) -> Result<Option<PackedSeq>> {
    let mut mode = [0u8; 1];
    match r.read(&mut mode)? {
        0 => return Ok(None),
        _ => {}
    }
    let mode = PackMode::from_code(mode[0])
        .ok_or_else(|| Error::Format(format!("unknown packed mode byte {}", mode[0])))?;
    let mut len = [0u8; 8];
    r.read_exact(&mut len)?;
    let len = u64::from_le_bytes(len);
    let nbytes = (len * mode.bits_per_base() as u64).div_ceil(8);
    let mut bits = vec![0u8; nbytes as usize];
    r.read_exact(&mut bits)?;
    Ok(Some(PackedSeq { mode, bits, len }))
}

/// Encoding of decoded reads on output.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum OutFormat {
    /// FASTQ text; the FASTQ parser reads it back.
    Ascii,
    Fasta,
    /// Bare sequences, one per line.
    Lines,
    Packed(PackMode),
}

impl OutFormat {
    pub const ALL: [OutFormat; 6] = [
        OutFormat::Ascii,
        OutFormat::Fasta,
        OutFormat::Lines,
        OutFormat::Packed(PackMode::TwoBit),
        OutFormat::Packed(PackMode::ThreeBit),
        OutFormat::Packed(PackMode::OneHot),
    ];

    pub fn name(self) -> &'static str {
        match self {
            OutFormat::Ascii => "ascii",
            OutFormat::Fasta => "fasta",
            OutFormat::Lines => "lines",
            OutFormat::Packed(PackMode::TwoBit) => "two-bit",
            OutFormat::Packed(PackMode::ThreeBit) => "three-bit",
            OutFormat::Packed(PackMode::OneHot) => "one-hot",
        }
    }
}

impl std::fmt::Display for OutFormat {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for OutFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.to_ascii_lowercase().replace('_', "-");
        Ok(match norm.as_str() {
            "ascii" | "fastq" => OutFormat::Ascii,
            "fasta" => OutFormat::Fasta,
            "lines" | "raw" => OutFormat::Lines,
            "two-bit" | "2bit" => OutFormat::Packed(PackMode::TwoBit),
            "three-bit" | "3bit" => OutFormat::Packed(PackMode::ThreeBit),
            "one-hot" | "onehot" => OutFormat::Packed(PackMode::OneHot),
            _ => return Err(Error::Format(format!("unknown output format {s:?}"))),
        })
    }
}

/// Quality character written when a read carries no stored qualities.
pub const PLACEHOLDER_QUAL: u8 = b'I';

/// Writes reads one at a time in an [`OutFormat`].
///
/// Under two-bit packing, reads containing N cannot be represented; they are
/// held back and appended as three-bit records by [`ReadWriter::finish`].
pub struct ReadWriter<W: Write> {
    out: W,
    format: OutFormat,
    written: u64,
    deferred: Vec<Vec<u8>>,
    qual_buf: Vec<u8>,
}

impl<W: Write> ReadWriter<W> {
    pub fn new(out: W, format: OutFormat) -> Self {
        Self {
            out,
            format,
            written: 0,
            deferred: Vec::new(),
            qual_buf: Vec::new(),
        }
    }

    /// Missing ids become `read<N>` with N counting from zero.
    pub fn write(&mut self, id: Option<&str>, bases: &[u8], qual: Option<&[u8]>) -> Result<()> {
        let n = self.written;
        self.written += 1;
        let fallback;
        let id = match id {
            Some(id) => id,
            None => {
                fallback = format!("read{n}");
                &fallback
            }
        };
        match self.format {
            OutFormat::Ascii => {
                let q = match qual {
                    Some(q) => q,
                    None => {
                        self.qual_buf.clear();
                        self.qual_buf.resize(bases.len(), PLACEHOLDER_QUAL);
                        &self.qual_buf
                    }
                };
                write_fastq(&mut self.out, id, bases, q)?;
            }
            OutFormat::Fasta => write_fasta(&mut self.out, id, bases)?,
            OutFormat::Lines => write_line(&mut self.out, bases)?,
            OutFormat::Packed(PackMode::TwoBit) if bases.contains(&b'N') => self.deferred.push(bases.to_vec()),
            OutFormat::Packed(mode) => write_packed(&mut self.out, &pack_bases(bases, mode)?)?,
        }
        Ok(())
    }

    /// Flush deferred N reads and the sink. Returns how many reads were
    /// moved to the trailing three-bit section, and the sink.
    pub fn finish(mut self) -> Result<(usize, W)> {
        let deferred = std::mem::take(&mut self.deferred);
        if !deferred.is_empty() {
            warn!(
                "{} read(s) contain N and cannot be two-bit packed; appended as three-bit records",
                deferred.len()
            );
        }
        for bases in &deferred {
            write_packed(&mut self.out, &pack_bases(bases, PackMode::ThreeBit)?)?;
        }
        self.out.flush()?;
        Ok((deferred.len(), self.out))
    }
}
