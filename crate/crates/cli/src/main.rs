//! `sage`: compress, decompress and inspect read sets against a consensus.

mod stats;

use std::fs::{self, File};
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode, Stdio};

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};
use log::{info, warn};
use sage_core::codec::{
    collect_stats, compress, decode_streaming, decompress, stream_bits, Ablation, CompressOptions, CompressStats,
    DecompressOptions,
};
use sage_core::container::{hex, read_container, Container};
use sage_core::report::{self, bottleneck, breakdown_csv, pipeline_throughput, ExternalResult, StageSpec};
use sage_core::seqio::{parse_fasta, read_records, OutFormat, ReadRecord, ReadWriter};
use sage_core::StreamId;

#[derive(Parser)]
#[command(name = "sage", version, about = "Consensus-based compression of genomic read sets")]
struct Cli {
    /// More log output (repeat for debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Compress a FASTQ/FASTA read set against a reference.
    Compress(CompressArgs),
    /// Decode a container back to reads.
    Decompress(DecompressArgs),
    /// Show header and partition summaries, or value distributions as CSV.
    Inspect(InspectArgs),
    /// Compression ratio, throughput and size breakdown, optionally per level.
    Bench(BenchArgs),
    /// Throughput of overlapped stages given as name=bases_per_second.
    Pipeline(PipelineArgs),
}

#[derive(Args)]
struct EncodeFlags {
    /// Seed length (default 15 for short reads, 17 for long reads).
    #[arg(long)]
    k: Option<usize>,
    /// Most value-width classes per tuned scheme (1..=8).
    #[arg(long = "max-classes", default_value_t = 4)]
    max_classes: usize,
    /// Most consensus segments per chimeric read.
    #[arg(long = "max-segments", default_value_t = 2)]
    max_segments: usize,
    /// Number of independently decodable partitions.
    #[arg(long, default_value_t = 1)]
    partitions: usize,
    /// Store original read order.
    #[arg(long = "preserve-order")]
    preserve_order: bool,
    /// Force long-read mode on or off (default: on when any read exceeds 1000 bases).
    #[arg(long = "long-read")]
    long_read: Option<bool>,
    /// Store the consensus inside the container.
    #[arg(long = "embed-consensus")]
    embed_consensus: bool,
    /// Keep read ids and qualities.
    #[arg(long)]
    passthrough: bool,
    /// Highest optimization level to use (NO, O1..O4).
    #[arg(long, default_value = "O4")]
    ablation: Ablation,
    /// Worker threads (default: partition count; SAGE_THREADS overrides).
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args)]
struct CompressArgs {
    /// Reference FASTA used as the consensus.
    #[arg(long = "ref", short = 'r')]
    reference: PathBuf,
    /// Reads, FASTQ or FASTA.
    input: PathBuf,
    #[arg(short, long)]
    output: PathBuf,
    #[command(flatten)]
    flags: EncodeFlags,
}

#[derive(Args)]
struct DecompressArgs {
    input: PathBuf,
    /// Reference FASTA (not needed when the consensus is embedded).
    #[arg(long = "ref", short = 'r')]
    reference: Option<PathBuf>,
    /// Output path (default: stdout).
    #[arg(short, long)]
    output: Option<PathBuf>,
    /// ascii (FASTQ), fasta, lines, two-bit, three-bit, one-hot.
    #[arg(long, short = 'f', default_value = "ascii")]
    format: OutFormat,
    /// Restore input order when the container stores it.
    #[arg(long = "preserve-order")]
    preserve_order: bool,
    /// Skip partitions that fail to decode.
    #[arg(long = "best-effort")]
    best_effort: bool,
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args)]
struct InspectArgs {
    input: PathBuf,
    /// Reference FASTA, needed for --stats unless the consensus is embedded.
    #[arg(long = "ref", short = 'r')]
    reference: Option<PathBuf>,
    /// Decode and print value distributions as CSV.
    #[arg(long)]
    stats: bool,
    /// Write each CSV table to its own file in this directory instead of stdout.
    #[arg(long = "stats-dir", requires = "stats")]
    stats_dir: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long = "ref", short = 'r')]
    reference: PathBuf,
    input: PathBuf,
    /// Shell command compressing stdin to stdout, for a ratio comparison.
    #[arg(long)]
    external: Option<String>,
    /// Levels to compare, comma separated (e.g. NO,O1,O2,O3,O4).
    #[arg(long, value_delimiter = ',')]
    ablate: Vec<Ablation>,
    #[command(flatten)]
    flags: EncodeFlags,
}

#[derive(Args)]
struct PipelineArgs {
    /// Stages as name=throughput, e.g. io=7e9 decompress=1e8 map=5e9.
    #[arg(required = true)]
    stages: Vec<String>,
}

/// An error with its process exit code.
struct Failure {
    code: i32,
    err: anyhow::Error,
}

impl From<sage_core::Error> for Failure {
    fn from(e: sage_core::Error) -> Self {
        Failure {
            code: e.exit_code(),
            err: e.into(),
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        sage_core::Error::Io(e).into()
    }
}

trait Ctx<T> {
    fn ctx(self, what: impl FnOnce() -> String) -> Result<T, Failure>;
}

impl<T, E: Into<Failure>> Ctx<T> for Result<T, E> {
    fn ctx(self, what: impl FnOnce() -> String) -> Result<T, Failure> {
        self.map_err(|e| {
            let f = e.into();
            Failure {
                code: f.code,
                err: f.err.context(what()),
            }
        })
    }
}

type CliResult<T = ()> = Result<T, Failure>;

fn main() -> ExitCode {
    // Usage errors exit with 1; clap's default of 2 would collide with parse errors.
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    let r = match cli.cmd {
        Cmd::Compress(a) => cmd_compress(a),
        Cmd::Decompress(a) => cmd_decompress(a),
        Cmd::Inspect(a) => cmd_inspect(a),
        Cmd::Bench(a) => cmd_bench(a),
        Cmd::Pipeline(a) => cmd_pipeline(a),
    };
    match r {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.err);
            ExitCode::from(f.code as u8)
        }
    }
}

fn threads(flag: Option<usize>, partitions: usize) -> CliResult<usize> {
    if let Ok(v) = std::env::var("SAGE_THREADS") {
        return v.trim().parse::<usize>().map(|n| n.max(1)).map_err(|_| Failure {
            code: 1,
            err: anyhow!("SAGE_THREADS must be a positive integer, got {v:?}"),
        });
    }
    Ok(flag.unwrap_or(partitions).max(1))
}

fn load_reference(path: &Path) -> CliResult<Vec<u8>> {
    let f = File::open(path).ctx(|| format!("reading reference {}", path.display()))?;
    let (name, seq) = parse_fasta(BufReader::new(f)).ctx(|| format!("parsing reference {}", path.display()))?;
    info!("reference {name}: {} bases", seq.len());
    Ok(seq)
}

fn load_reads(path: &Path, keep_quality: bool) -> CliResult<(Vec<ReadRecord>, u64)> {
    let f = File::open(path).ctx(|| format!("reading {}", path.display()))?;
    let size = f.metadata()?.len();
    let reads = read_records(BufReader::new(f), keep_quality).ctx(|| format!("parsing {}", path.display()))?;
    Ok((reads, size))
}

fn load_container(path: &Path) -> CliResult<Container> {
    read_container(path).ctx(|| format!("reading container {}", path.display()))
}

fn encode_options(f: &EncodeFlags) -> CliResult<CompressOptions> {
    Ok(CompressOptions {
        k: f.k,
        max_classes: f.max_classes,
        max_segments: f.max_segments,
        partitions: f.partitions,
        preserve_order: f.preserve_order,
        long_read: f.long_read,
        embed_consensus: f.embed_consensus,
        passthrough: f.passthrough,
        ablation: f.ablation,
        threads: threads(f.threads, f.partitions)?,
        params: None,
    })
}

/// Write through a temporary file next to `path` and rename on success, so
/// a failed run leaves nothing behind.
fn write_atomically(path: &Path, f: impl FnOnce(&mut BufWriter<&mut File>) -> CliResult) -> CliResult {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).ctx(|| format!("creating output in {}", dir.display()))?;
    {
        let mut w = BufWriter::new(tmp.as_file_mut());
        f(&mut w)?;
        w.flush()?;
    }
    tmp.as_file().sync_all()?;
    tmp.persist(path)
        .map_err(|e| e.error)
        .ctx(|| format!("writing {}", path.display()))?;
    Ok(())
}

fn print_summary(stats: &CompressStats, input_bytes: u64, output_bytes: u64) {
    println!("reads              {}", stats.reads);
    println!(
        "  mapped {} (chimeric {}, corner {}), literal {}",
        stats.mapped, stats.chimeric, stats.corner, stats.literal
    );
    println!("input bytes        {input_bytes}");
    println!("compressed bytes   {output_bytes}");
    println!("ratio              {:.2}", report::ratio(input_bytes, output_bytes));
    println!("payload bits       {}", stats.breakdown.total());
    for (cat, bits) in stats.breakdown.iter() {
        println!("  {:<20} {bits}", cat.name());
    }
}

fn cmd_compress(a: CompressArgs) -> CliResult {
    let consensus = load_reference(&a.reference)?;
    let opts = encode_options(&a.flags)?;
    let (reads, input_bytes) = load_reads(&a.input, opts.passthrough)?;
    let c = compress(&reads, &consensus, &opts)?;
    write_atomically(&a.output, |w| Ok(w.write_all(c.container.as_bytes())?))?;
    print_summary(&c.stats, input_bytes, c.container.len() as u64);
    Ok(())
}

fn emit_reads(a: &DecompressArgs, container: &Container, cons: Option<&[u8]>, out: impl Write) -> CliResult {
    let mut w = ReadWriter::new(out, a.format);
    let streaming = !a.preserve_order && !a.best_effort && container.sidecar()?.is_none();
    if streaming {
        decode_streaming(container, cons, |r| w.write(None, &r.bases, None))?;
    } else {
        let opts = DecompressOptions {
            threads: threads(a.threads, container.partitions.len())?,
            best_effort: a.best_effort,
            preserve_order: a.preserve_order,
        };
        let d = decompress(container, cons, &opts)?;
        if a.preserve_order && !container.header.layout.preserve_order {
            warn!("container does not store read order; reads are in consensus order");
        }
        for r in &d.reads {
            w.write(r.id.as_deref(), &r.bases, r.qual.as_deref())?;
        }
        if !d.failed.is_empty() {
            warn!("{} partition(s) could not be decoded", d.failed.len());
        }
    }
    w.finish()?;
    Ok(())
}

fn cmd_decompress(a: DecompressArgs) -> CliResult {
    let container = load_container(&a.input)?;
    let cons = a.reference.as_deref().map(load_reference).transpose()?;
    match &a.output {
        Some(path) => write_atomically(path, |w| emit_reads(&a, &container, cons.as_deref(), w)),
        None => emit_reads(&a, &container, cons.as_deref(), io::stdout().lock()),
    }
}

fn scheme_line(s: &sage_core::tune::ClassScheme) -> String {
    let widths: Vec<String> = s.widths().map(|w| w.to_string()).collect();
    format!("{} [{}]", if s.is_guided() { "tuned" } else { "fixed" }, widths.join(","))
}

fn print_header(c: &Container) {
    let h = &c.header;
    let l = &h.layout;
    println!("container bytes    {}", c.len());
    println!("reads              {}", h.read_count);
    println!("partitions         {}", h.partition_count);
    println!("consensus          {} bases, sha256 {}", h.consensus_len, hex(&h.consensus_hash));
    println!("embedded consensus {}", h.embedded_consensus.is_some());
    println!("seed length        {}", h.k);
    println!("mode               {}", if l.long_read { "long-read" } else { "short-read" });
    match l.fixed_read_len {
        Some(n) => println!("read length        {n} (fixed)"),
        None => println!("read length        variable"),
    }
    println!(
        "layout             merged={} chimeric={} (max {} segments) indel_lengths={} corner_bit={}",
        l.merged, l.chimeric, l.max_segments, l.indel_lengths, l.corner_bit
    );
    println!("preserve order     {} (index width {})", l.preserve_order, l.order_width);
    println!("literals           {}", h.has_literals);
    println!("passthrough        {}", h.passthrough);
    println!("scheme mapos       {}", scheme_line(&h.schemes.mapos));
    println!("scheme mmpos       {}", scheme_line(&h.schemes.mmpos));
    println!("scheme count       {}", scheme_line(&h.schemes.count));
    println!("scheme side        {}", scheme_line(&h.schemes.side));
    let total = stream_bits(c);
    println!("payload bits       {}", total.iter().sum::<u64>());
    for id in StreamId::ALL {
        println!("  {:<10} {}", id.name(), total[id.index()]);
    }
}

fn print_partitions(c: &Container) {
    let mut head = String::from("partition,start,end,reads,crc_ok");
    for id in StreamId::ALL {
        head.push(',');
        head.push_str(id.name());
    }
    println!("{head}");
    for (i, e) in c.partitions.iter().enumerate() {
        let ok = c.verify_partition(i).is_ok();
        let bits: Vec<String> = StreamId::ALL.iter().map(|&id| e.stream_bits(id).to_string()).collect();
        println!("{i},{},{},{},{ok},{}", e.start, e.end, e.read_count, bits.join(","));
    }
}

fn cmd_inspect(a: InspectArgs) -> CliResult {
    let container = load_container(&a.input)?;
    if !a.stats {
        print_header(&container);
        println!();
        print_partitions(&container);
        return Ok(());
    }
    let cons = a.reference.as_deref().map(load_reference).transpose()?;
    let tables = stats::tables(&collect_stats(&container, cons.as_deref())?);
    match &a.stats_dir {
        Some(dir) => {
            fs::create_dir_all(dir).ctx(|| format!("creating {}", dir.display()))?;
            for t in &tables {
                let path = dir.join(format!("{}.csv", t.name));
                fs::write(&path, &t.csv).ctx(|| format!("writing {}", path.display()))?;
            }
        }
        None => print!("{}", stats::concatenated(&tables)),
    }
    Ok(())
}

/// Run `command` through the shell with the input on stdin and count what it
/// writes to stdout. Any failure only drops the comparison.
fn run_external(command: &str, input: &Path, input_bytes: u64) -> Option<ExternalResult> {
    let run = || -> anyhow::Result<u64> {
        let mut child = Command::new("sh")
            .arg("-c")
            .arg(command)
            .stdin(File::open(input)?)
            .stdout(Stdio::piped())
            .stderr(Stdio::null())
            .spawn()
            .context("spawning shell")?;
        let mut n = 0u64;
        let mut buf = [0u8; 1 << 16];
        let mut out = child.stdout.take().expect("piped");
        loop {
            match out.read(&mut buf)? {
                0 => break,
                k => n += k as u64,
            }
        }
        let status = child.wait()?;
        if !status.success() {
            return Err(anyhow!("exited with {status}"));
        }
        Ok(n)
    };
    match run() {
        Ok(n) => Some(ExternalResult {
            command: command.to_string(),
            compressed_bytes: n,
            ratio: report::ratio(input_bytes, n),
        }),
        Err(e) => {
            warn!("external compressor {command:?} failed ({e:#}); comparison omitted");
            None
        }
    }
}

fn cmd_bench(a: BenchArgs) -> CliResult {
    let consensus = load_reference(&a.reference)?;
    let base = encode_options(&a.flags)?;
    let (reads, input_bytes) = load_reads(&a.input, base.passthrough)?;
    let external = a.external.as_deref().and_then(|cmd| run_external(cmd, &a.input, input_bytes));
    let levels = if a.ablate.is_empty() { vec![base.ablation] } else { a.ablate.clone() };
    let mut reports = Vec::with_capacity(levels.len());
    for (i, level) in levels.into_iter().enumerate() {
        let opts = CompressOptions {
            ablation: level,
            ..base.clone()
        };
        let mut r = report::bench(&reads, &consensus, input_bytes, &opts)?;
        r.external = external.clone();
        if i > 0 {
            println!();
        }
        print!("{}", r.render());
        reports.push(r);
    }
    if reports.len() > 1 {
        println!();
        print!("{}", breakdown_csv(&reports));
    }
    Ok(())
}

fn cmd_pipeline(a: PipelineArgs) -> CliResult {
    let stages = a.stages.iter().map(|s| StageSpec::parse(s)).collect::<Result<Vec<_>, _>>()?;
    for s in &stages {
        println!("{:<16} {:.3e} bases/s", s.name, s.throughput);
    }
    let tp = pipeline_throughput(&stages)?;
    let slow = bottleneck(&stages).expect("nonempty");
    println!("pipeline         {tp:.3e} bases/s (bound by {})", slow.name);
    Ok(())
}
