//! `dfrkit` command-line front end.
//!
//! Stages talk to each other only through files: FMAT features, scheme
//! JSON, code JSON and DFRT token streams. Exit codes: 0 on success, 1 for
//! I/O and format problems, 2 for invalid or infeasible inputs.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::bench::{bench_downsample, bench_dp};
use crate::downsample::{
    downsample, downsample_fast, scheme_from_proportions_with_rng, DownsampleMode,
};
use crate::error::{invalid, Error, Result};
use crate::features::{load_features, save_features, FeatureFormat, FeatureSequence};
use crate::fsq::FsqSpec;
use crate::meltman::{melt_sample, MeltConfig};
use crate::objective::Objective;
use crate::scheduler::{schedule, schedule_with_vanilla, SchedulerParams};
use crate::scheme::Scheme;
use crate::streaming::{chunk_plan, stream_schedule, ChunkConfig};
use crate::tokens::{bitrate, pack, unpack, TokenStream};

#[derive(Debug, Parser)]
#[command(
    name = "dfrkit",
    version,
    about = "Dynamic-frame-rate scheduling and token tools"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Find the best downsample scheme for a feature file.
    Schedule(ScheduleArgs),
    /// Schedule chunk by chunk, as a streaming encoder would.
    StreamSchedule(StreamScheduleArgs),
    /// Average features over the segments of a scheme.
    Downsample(DownsampleArgs),
    /// Map feature rows to FSQ codes.
    Quantize(QuantizeArgs),
    /// Pack codes and segment lengths into a DFRT token file.
    Pack(PackArgs),
    /// Decode a DFRT token file to JSON.
    Unpack(UnpackArgs),
    /// Report content and duration bitrates of a DFRT token file.
    Bitrate(BitrateArgs),
    /// Draw curriculum segment-length proportions as JSON lines.
    MeltSample(MeltSampleArgs),
    /// Timing and state-count benchmarks.
    #[command(subcommand)]
    Bench(BenchCommand),
}

#[derive(Debug, Args)]
pub struct InputArgs {
    /// Input format.
    #[arg(long, default_value = "binary", value_parser = parse_feature_format)]
    pub format: FeatureFormat,
    /// Frame rate for CSV input, in Hz.
    #[arg(long, default_value_t = 80.0)]
    pub base_rate: f64,
}

#[derive(Debug, Args)]
pub struct SchedulerArgs {
    /// Target downsampling ratio R_S.
    #[arg(long, default_value_t = 2.0)]
    pub rate: f64,
    /// Maximum segment length U.
    #[arg(long, default_value_t = 4)]
    pub max_seg: usize,
    #[arg(long, default_value = "jh", value_parser = parse_objective)]
    pub objective: Objective,
}

impl SchedulerArgs {
    fn params(&self) -> Result<SchedulerParams> {
        SchedulerParams::new(self.rate, self.max_seg, self.objective)
    }
}

#[derive(Debug, Args)]
pub struct ScheduleArgs {
    /// Feature file(s). With several inputs `--out` names a directory.
    #[arg(long, required = true, num_args = 1..)]
    pub input: Vec<PathBuf>,
    #[command(flatten)]
    pub io: InputArgs,
    #[command(flatten)]
    pub sched: SchedulerArgs,
    /// Scheme JSON destination; printed to stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Use the unpruned dynamic program.
    #[arg(long)]
    pub vanilla: bool,
    /// Worker threads across input files.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
}

#[derive(Debug, Args)]
pub struct StreamScheduleArgs {
    #[arg(long, required = true, num_args = 1..)]
    pub input: Vec<PathBuf>,
    #[command(flatten)]
    pub io: InputArgs,
    #[command(flatten)]
    pub sched: SchedulerArgs,
    #[arg(long, default_value_t = 500.0)]
    pub chunk_ms: f64,
    #[arg(long, default_value_t = 50.0)]
    pub overlap_ms: f64,
    #[arg(long, default_value_t = 3000.0)]
    pub context_ms: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
}

#[derive(Debug, Args)]
pub struct DownsampleArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[command(flatten)]
    pub io: InputArgs,
    #[arg(long)]
    pub scheme: PathBuf,
    #[arg(long, default_value = "compact", value_parser = parse_mode)]
    pub mode: DownsampleMode,
    /// Use the per-segment loop instead of the scatter/gather path.
    #[arg(long)]
    pub naive: bool,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value = "binary", value_parser = parse_feature_format)]
    pub out_format: FeatureFormat,
}

#[derive(Debug, Args)]
pub struct QuantizeArgs {
    /// Rows to quantize, typically compact downsampled features.
    #[arg(long)]
    pub input: PathBuf,
    #[command(flatten)]
    pub io: InputArgs,
    /// FSQ levels: inline JSON (`[5,5,3,...]` or `{"levels": [...]}`) or a
    /// path to a JSON file.
    #[arg(long)]
    pub levels: String,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PackArgs {
    /// Code JSON written by `quantize`.
    #[arg(long)]
    pub codes: PathBuf,
    #[arg(long)]
    pub scheme: PathBuf,
    /// Override the frame rate recorded in the code file.
    #[arg(long)]
    pub base_rate: Option<f64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct UnpackArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BitrateArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Emit JSON instead of text.
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct MeltSampleArgs {
    /// Config JSON with keys U, S_p, p_tgt, c, epsilon, rho; defaults otherwise.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Training step g.
    #[arg(long)]
    pub step: u64,
    /// Number of draws.
    #[arg(long, default_value_t = 1)]
    pub n: usize,
    #[arg(long, env = "DFRKIT_SEED")]
    pub seed: Option<u64>,
    /// Also realise each draw as a scheme over this many frames.
    #[arg(long)]
    pub frames: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum BenchCommand {
    /// Vanilla vs pruned dynamic program.
    Dp(BenchDpArgs),
    /// Scatter/gather vs per-segment downsampling.
    Downsample(BenchDownsampleArgs),
}

#[derive(Debug, Args)]
pub struct BenchDpArgs {
    #[arg(long = "T", default_value_t = 1000)]
    pub frames: usize,
    #[arg(long = "Tprime", default_value_t = 500)]
    pub target: usize,
    #[arg(long = "U", default_value_t = 4)]
    pub max_seg: usize,
    #[arg(long = "d", default_value_t = 64)]
    pub dim: usize,
    #[arg(long, default_value_t = 5)]
    pub trials: usize,
    #[arg(long, env = "DFRKIT_SEED", default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct BenchDownsampleArgs {
    #[arg(long = "T", default_value_t = 800)]
    pub frames: usize,
    #[arg(long = "d", default_value_t = 256)]
    pub dim: usize,
    #[arg(long = "U", default_value_t = 4)]
    pub max_seg: usize,
    #[arg(long, default_value_t = 10)]
    pub trials: usize,
    #[arg(long, env = "DFRKIT_SEED", default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub json: bool,
}

fn parse_feature_format(s: &str) -> std::result::Result<FeatureFormat, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_objective(s: &str) -> std::result::Result<Objective, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_mode(s: &str) -> std::result::Result<DownsampleMode, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

/// Per-segment codes as written by `quantize`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CodeFile {
    pub levels: Vec<u32>,
    #[serde(rename = "K")]
    pub codebook_size: u64,
    pub base_rate_hz: f64,
    pub codes: Vec<u64>,
}

/// JSON view of a token stream as written by `unpack`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenFile {
    #[serde(rename = "K")]
    pub codebook_size: u64,
    #[serde(rename = "U")]
    pub max_duration: u8,
    pub base_rate_hz: f64,
    pub frames: u64,
    pub codes: Vec<u64>,
    pub durations: Vec<u8>,
}

impl From<&TokenStream> for TokenFile {
    fn from(ts: &TokenStream) -> Self {
        Self {
            codebook_size: ts.codebook_size(),
            max_duration: ts.max_duration(),
            base_rate_hz: ts.base_rate_hz(),
            frames: ts.frames(),
            codes: ts.codes(),
            durations: ts.durations(),
        }
    }
}

#[derive(Debug, Serialize)]
struct MeltLine {
    step: u64,
    p: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    segments: Option<Option<Vec<usize>>>,
}

fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = read_text(path)?;
    serde_json::from_str(&text).map_err(|e| {
        let msg = format!("{}: {e}", path.display());
        if e.is_data() {
            Error::Validation(msg)
        } else {
            Error::Format(msg)
        }
    })
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => write_file(path, text.as_bytes()),
        None => {
            let mut stdout = io::stdout().lock();
            stdout
                .write_all(text.as_bytes())
                .map_err(|e| Error::io("<stdout>", e))
        }
    }
}

fn load(path: &Path, io: &InputArgs) -> Result<FeatureSequence> {
    load_features(path, io.format, io.base_rate)
}

/// Runs `job` for each input on a pool of `jobs` threads, writing one scheme
/// JSON per input.
fn schedule_files<F>(inputs: &[PathBuf], out: Option<&Path>, jobs: usize, job: F) -> Result<()>
where
    F: Fn(&Path) -> Result<(Scheme, Option<f64>)> + Sync,
{
    if jobs == 0 {
        return Err(invalid!("--jobs must be at least 1"));
    }
    if inputs.len() > 1 && out.is_none() {
        return Err(invalid!("--out <dir> is required with several inputs"));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| invalid!("thread pool: {e}"))?;
    let results: Vec<Result<(Scheme, Option<f64>)>> =
        pool.install(|| inputs.par_iter().map(|p| job(p)).collect());

    for (input, result) in inputs.iter().zip(results) {
        let (scheme, score) = result?;
        let json = scheme.to_json() + "\n";
        let dest = match out {
            Some(dir) if inputs.len() > 1 => {
                fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
                let stem = input.file_stem().unwrap_or_default().to_string_lossy();
                Some(dir.join(format!("{stem}.scheme.json")))
            }
            other => other.map(Path::to_path_buf),
        };
        match &dest {
            Some(path) => {
                write_file(path, json.as_bytes())?;
                match score {
                    Some(s) => println!("{}: T'={} score={s}", input.display(), scheme.len()),
                    None => println!("{}: T'={}", input.display(), scheme.len()),
                }
            }
            None => {
                emit(None, &json)?;
                if let Some(s) = score {
                    eprintln!("score={s}");
                }
            }
        }
    }
    Ok(())
}

fn cmd_schedule(args: &ScheduleArgs) -> Result<()> {
    let params = args.sched.params()?;
    schedule_files(&args.input, args.out.as_deref(), args.jobs, |path| {
        let h = load(path, &args.io)?;
        let result = if args.vanilla {
            schedule_with_vanilla(&h, &params)?
        } else {
            schedule(&h, &params)?
        };
        Ok((result.scheme, Some(result.score)))
    })
}

fn cmd_stream_schedule(args: &StreamScheduleArgs) -> Result<()> {
    let params = args.sched.params()?;
    let config = ChunkConfig {
        chunk_ms: args.chunk_ms,
        overlap_ms: args.overlap_ms,
        context_ms: args.context_ms,
    };
    schedule_files(&args.input, args.out.as_deref(), args.jobs, |path| {
        let h = load(path, &args.io)?;
        let plan = chunk_plan(h.frames(), h.base_rate_hz(), config)?;
        Ok((stream_schedule(&h, &params, &plan)?, None))
    })
}

fn cmd_downsample(args: &DownsampleArgs) -> Result<()> {
    let h = load(&args.input, &args.io)?;
    let scheme: Scheme = read_json(&args.scheme)?;
    let out = if args.naive {
        downsample(&h, &scheme, args.mode)?
    } else {
        downsample_fast(&h, &scheme, args.mode)?
    };
    save_features(&out, &args.out, args.out_format)
}

fn load_levels(arg: &str) -> Result<FsqSpec> {
    let trimmed = arg.trim_start();
    if trimmed.starts_with('[') || trimmed.starts_with('{') {
        FsqSpec::from_json(arg)
    } else {
        FsqSpec::from_json(&read_text(Path::new(arg))?)
    }
}

fn cmd_quantize(args: &QuantizeArgs) -> Result<()> {
    let spec = load_levels(&args.levels)?;
    let rows = load(&args.input, &args.io)?;
    let codes = spec.quantize_seq(&rows)?;
    let file = CodeFile {
        levels: spec.levels().to_vec(),
        codebook_size: spec.codebook_size(),
        base_rate_hz: rows.base_rate_hz(),
        codes,
    };
    let json = serde_json::to_string(&file).expect("codes serialize") + "\n";
    emit(args.out.as_deref(), &json)
}

fn cmd_pack(args: &PackArgs) -> Result<()> {
    let codes: CodeFile = read_json(&args.codes)?;
    let scheme: Scheme = read_json(&args.scheme)?;
    let rate = args.base_rate.unwrap_or(codes.base_rate_hz);
    let ts = TokenStream::from_scheme(&codes.codes, &scheme, codes.codebook_size, rate)?;
    write_file(&args.out, &pack(&ts))?;
    println!(
        "{} tokens, {} frames, {} bytes",
        ts.len(),
        ts.frames(),
        fs::metadata(&args.out).map(|m| m.len()).unwrap_or(0)
    );
    Ok(())
}

fn cmd_unpack(args: &UnpackArgs) -> Result<()> {
    let ts = unpack(&read_bytes(&args.input)?)?;
    let json = serde_json::to_string(&TokenFile::from(&ts)).expect("tokens serialize") + "\n";
    emit(args.out.as_deref(), &json)
}

fn cmd_bitrate(args: &BitrateArgs) -> Result<()> {
    let ts = unpack(&read_bytes(&args.input)?)?;
    let br = bitrate(&ts)?;
    if args.json {
        println!(
            "{}",
            serde_json::to_string(&br).expect("bitrate serializes")
        );
        return Ok(());
    }
    println!(
        "tokens: {}  frames: {}  audio: {:.3} s",
        ts.len(),
        ts.frames(),
        br.seconds
    );
    println!("token rate: {:.2} Hz", br.mean_token_rate_hz);
    println!(
        "content:  {:.2} kbps ({:.1} bps, log2 K = {:.3} bits/token)",
        br.content_bps / 1000.0,
        br.content_bps,
        (ts.codebook_size() as f64).log2()
    );
    println!(
        "duration: {:.2} kbps ({:.1} bps, log2 U = {:.3} bits/token)",
        br.duration_bps / 1000.0,
        br.duration_bps,
        (ts.max_duration() as f64).log2()
    );
    println!(
        "packed:   {} + {} bits/token, {:.1} + {:.1} bps",
        ts.content_bits(),
        ts.duration_bits(),
        br.packed_content_bps,
        br.packed_duration_bps
    );
    Ok(())
}

fn cmd_melt_sample(args: &MeltSampleArgs) -> Result<()> {
    let mut cfg = match &args.config {
        Some(path) => MeltConfig::from_json(&read_text(path)?)?,
        None => MeltConfig::default(),
    };
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut text = String::new();
    for _ in 0..args.n {
        let p = melt_sample(args.step, &cfg, &mut rng);
        let segments = match args.frames {
            None => None,
            Some(frames) => Some(match &p {
                Some(p) => Some(
                    scheme_from_proportions_with_rng(p, frames, cfg.max_seg, &mut rng)?
                        .into_segments(),
                ),
                None => None,
            }),
        };
        let line = MeltLine {
            step: args.step,
            p,
            segments,
        };
        text.push_str(&serde_json::to_string(&line).expect("line serializes"));
        text.push('\n');
    }
    emit(args.out.as_deref(), &text)
}

fn cmd_bench(cmd: &BenchCommand) -> Result<()> {
    match cmd {
        BenchCommand::Dp(a) => {
            let report = bench_dp(a.frames, a.target, a.max_seg, a.dim, a.trials, a.seed)?;
            if a.json {
                println!(
                    "{}",
                    serde_json::to_string(&report).expect("report serializes")
                );
            } else {
                println!("{report}");
            }
        }
        BenchCommand::Downsample(a) => {
            let report = bench_downsample(a.frames, a.dim, a.max_seg, a.trials, a.seed)?;
            if a.json {
                println!(
                    "{}",
                    serde_json::to_string(&report).expect("report serializes")
                );
            } else {
                println!("{report}");
            }
        }
    }
    Ok(())
}

pub fn execute(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Schedule(a) => cmd_schedule(a),
        Command::StreamSchedule(a) => cmd_stream_schedule(a),
        Command::Downsample(a) => cmd_downsample(a),
        Command::Quantize(a) => cmd_quantize(a),
        Command::Pack(a) => cmd_pack(a),
        Command::Unpack(a) => cmd_unpack(a),
        Command::Bitrate(a) => cmd_bitrate(a),
        Command::MeltSample(a) => cmd_melt_sample(a),
        Command::Bench(c) => cmd_bench(c),
    }
}

/// Parses `std::env::args`, runs the command and returns the exit code.
pub fn run() -> i32 {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
