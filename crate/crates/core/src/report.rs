//! Benchmark reports and the pipelined-throughput model.

use std::fmt::Write as _;
use std::time::Instant;

use crate::codec::{compress, decode_streaming, Ablation, CompressOptions};
use crate::encode::{Breakdown, Category};
use crate::error::{Error, Result};
use crate::seqio::ReadRecord;

/// One stage of a read-processing pipeline.
#[derive(Debug, Clone, PartialEq)]
pub struct StageSpec {
    pub name: String,
    /// Bases per second.
    pub throughput: f64,
}

impl StageSpec {
    pub fn new(name: impl Into<String>, throughput: f64) -> Result<Self> {
        let name = name.into();
        if !(throughput.is_finite() && throughput > 0.0) {
            return Err(Error::Format(format!("stage {name}: throughput must be positive, got {throughput}")));
        }
        Ok(Self { name, throughput })
    }

    /// Parse `name=throughput`, e.g. `decompress=1e8`.
    pub fn parse(s: &str) -> Result<Self> {
        let (name, tp) = s
            .split_once('=')
            .ok_or_else(|| Error::Format(format!("stage {s:?} is not name=throughput")))?;
        let tp: f64 = tp
            .trim()
            .parse()
            .map_err(|_| Error::Format(format!("stage {name}: bad throughput {tp:?}")))?;
        Self::new(name.trim(), tp)
    }
}

/// Stages overlap, so the slowest one sets the pace.
pub fn pipeline_throughput(stages: &[StageSpec]) -> Result<f64> {
    stages
        .iter()
        .map(|s| s.throughput)
        .reduce(f64::min)
        .ok_or_else(|| Error::Format("pipeline needs at least one stage".into()))
}

/// The stage that bounds the pipeline.
pub fn bottleneck(stages: &[StageSpec]) -> Option<&StageSpec> {
    stages.iter().reduce(|a, b| if b.throughput < a.throughput { b } else { a })
}

pub fn ratio(input_bytes: u64, compressed_bytes: u64) -> f64 {
    input_bytes as f64 / compressed_bytes.max(1) as f64
}

/// Outcome of an external compressor run on the same input.
#[derive(Debug, Clone, PartialEq)]
pub struct ExternalResult {
    pub command: String,
    pub compressed_bytes: u64,
    pub ratio: f64,
}

#[derive(Debug, Clone)]
pub struct BenchReport {
    pub level: Ablation,
    pub input_bytes: u64,
    pub compressed_bytes: u64,
    pub ratio: f64,
    pub compress_secs: f64,
    pub decompress_secs: f64,
    /// Decoded bases per second.
    pub decode_throughput: f64,
    pub breakdown: Breakdown,
    /// Bits across all streams; equals the breakdown total.
    pub payload_bits: u64,
    pub reads: usize,
    pub external: Option<ExternalResult>,
}

/// Compress, then decode and verify, timing both.
pub fn bench(
    reads: &[ReadRecord],
    consensus: &[u8],
    input_bytes: u64,
    opts: &CompressOptions,
) -> Result<BenchReport> {
    let t = Instant::now();
    let c = compress(reads, consensus, opts)?;
    let compress_secs = t.elapsed().as_secs_f64();

    let mut want: Vec<&[u8]> = reads.iter().map(|r| r.bases.as_slice()).collect();
    want.sort_unstable();
    let mut got = Vec::with_capacity(reads.len());
    let mut bases = 0u64;
    let t = Instant::now();
    decode_streaming(&c.container, Some(consensus), |r| {
        bases += r.bases.len() as u64;
        got.push(r.bases);
        Ok(())
    })?;
    let decompress_secs = t.elapsed().as_secs_f64();
    got.sort_unstable();
    if got.len() != want.len() || got.iter().zip(&want).any(|(a, b)| a.as_slice() != *b) {
        return Err(Error::Format("decoded reads differ from the input".into()));
    }
    let payload_bits = c.container.payload_bits();
    debug_assert_eq!(payload_bits, c.stats.breakdown.total());
    let compressed_bytes = c.container.len() as u64;
    Ok(BenchReport {
        level: opts.ablation,
        input_bytes,
        compressed_bytes,
        ratio: ratio(input_bytes, compressed_bytes),
        compress_secs,
        decompress_secs,
        decode_throughput: bases as f64 / decompress_secs.max(1e-9),
        breakdown: c.stats.breakdown,
        payload_bits,
        reads: reads.len(),
        external: None,
    })
}

impl BenchReport {
    pub fn render(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "level              {}", self.level);
        let _ = writeln!(s, "reads              {}", self.reads);
        let _ = writeln!(s, "input bytes        {}", self.input_bytes);
        let _ = writeln!(s, "compressed bytes   {}", self.compressed_bytes);
        let _ = writeln!(s, "ratio              {:.2}", self.ratio);
        let _ = writeln!(s, "compress time      {:.3} s", self.compress_secs);
        let _ = writeln!(s, "decompress time    {:.3} s", self.decompress_secs);
        let _ = writeln!(s, "decode throughput  {:.3e} bases/s", self.decode_throughput);
        if let Some(e) = &self.external {
            let _ = writeln!(s, "external           {} -> {} bytes, ratio {:.2}", e.command, e.compressed_bytes, e.ratio);
        }
        let _ = writeln!(s, "payload bits       {}", self.payload_bits);
        for (cat, bits) in self.breakdown.iter() {
            let _ = writeln!(s, "  {:<20} {bits}", cat.name());
        }
        s
    }
}

/// Category table for several reports side by side, as CSV.
pub fn breakdown_csv(reports: &[BenchReport]) -> String {
    let mut s = String::from("level,total_bytes");
    for c in Category::ALL {
        s.push(',');
        s.push_str(c.name());
    }
    s.push('\n');
    for r in reports {
        let _ = write!(s, "{},{}", r.level, r.compressed_bytes);
        for c in Category::ALL {
            let _ = write!(s, ",{}", r.breakdown.get(c));
        }
        s.push('\n');
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn stage(name: &str, tp: f64) -> StageSpec {
        StageSpec::new(name, tp).unwrap()
    }

    #[test]
    fn slowest_stage_bounds_the_pipeline() {
        let stages = [stage("io", 7e9), stage("decompress", 1e8), stage("map", 5e9)];
        assert_eq!(pipeline_throughput(&stages).unwrap(), 1e8);
        assert_eq!(bottleneck(&stages).unwrap().name, "decompress");
        assert_eq!(pipeline_throughput(&[stage("only", 42.0)]).unwrap(), 42.0);
        assert!(pipeline_throughput(&[]).is_err());
    }

    #[test]
    fn stage_parsing() {
        assert_eq!(StageSpec::parse("io=7e9").unwrap(), stage("io", 7e9));
        assert!(StageSpec::parse("io").is_err());
        assert!(StageSpec::parse("io=0").is_err());
        assert!(StageSpec::parse("io=-3").is_err());
        assert!(StageSpec::parse("io=fast").is_err());
    }

    #[test]
    fn ratio_is_input_over_output() {
        assert_eq!(ratio(1000, 100), 10.0);
    }

    proptest! {
        #[test]
        fn pipeline_is_min_and_order_free(tps in proptest::collection::vec(1e-3f64..1e12, 1..20), rot in 0usize..20) {
            let stages: Vec<StageSpec> = tps.iter().enumerate().map(|(i, &t)| stage(&format!("s{i}"), t)).collect();
            let want = tps.iter().copied().fold(f64::INFINITY, f64::min);
            prop_assert_eq!(pipeline_throughput(&stages).unwrap(), want);
            let mut rotated = stages.clone();
            rotated.rotate_left(rot % stages.len());
            rotated.reverse();
            prop_assert_eq!(pipeline_throughput(&rotated).unwrap(), want);
        }
    }
}
