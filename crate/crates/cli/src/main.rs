//! `segprep` — batch front end for the segmentation and data-prep toolkit.
//!
//! Exit codes: 0 success, 1 usage error, 2 input-format error,
//! 3 processing error. Every failure prints a single
//! `error: <category>: <detail>` line to stderr.

use std::fs::File;
use std::io::{self, BufReader, Read, Write};
use std::path::{Path, PathBuf};

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};

use segprep_core::audio::{read_wav, AudioError};
use segprep_core::clean::{clean_corpus, read_corpus, write_corpus, CleanError, LangProfile};
use segprep_core::fbank::{cmvn, fbank, length_filter, write_fbnk, FbankConfig, LengthVerdict};
use segprep_core::resegment::{
    read_aligned_manifest, resegment_corpus, write_aligned_manifest, ResegmentError, ResegmentMode,
};
use segprep_core::segment::{
    hybrid_segment, read_manifest, segment_stats, vad_segment, write_manifest, PauseScoring,
    Segment, SegmentError, SegmenterConfig,
};
use segprep_core::specaugment::{spec_augment, SpecAugmentConfig};
use segprep_core::vad::{detect_voice, read_decisions, write_decisions, VadConfig, VadDecisions, VadError};

#[derive(Parser)]
#[command(name = "segprep", version, about = "Speech segmentation and data preparation toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Detect voiced frames in a WAV file and emit a decisions file.
    Vad(VadArgs),
    /// Split a WAV or decisions file into segments and emit a manifest.
    Segment(SegmentArgs),
    /// Extract log-Mel filterbank features from a WAV file.
    Fbank(FbankArgs),
    /// Re-segment an aligned corpus at random word boundaries.
    Resegment(ResegmentArgs),
    /// Clean a parallel corpus of noisy and wrong-language pairs.
    Clean(CleanArgs),
    /// Summarize a segment manifest.
    Stats(StatsArgs),
}

#[derive(Args)]
struct VadArgs {
    /// Input WAV file (16 kHz mono 16-bit PCM).
    wav: PathBuf,
    /// Frame duration in milliseconds (10, 20 or 30).
    #[arg(long, default_value_t = 20)]
    frame_ms: u32,
    /// Aggressiveness 0-3; higher marks fewer frames as speech.
    #[arg(long, default_value_t = 2)]
    aggr: u8,
    /// Frames each voiced run is extended to the right.
    #[arg(long, default_value_t = 4)]
    hangover: usize,
    /// Output decisions file (stdout when omitted).
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SegmentMode {
    Hybrid,
    Vad,
}

#[derive(Args)]
struct SegmentArgs {
    /// Input WAV file or VAD decisions file (detected by content).
    input: PathBuf,
    /// Segmentation strategy.
    #[arg(long, value_enum, default_value_t = SegmentMode::Hybrid)]
    mode: SegmentMode,
    /// Minimum segment length in seconds (hybrid mode).
    #[arg(long, default_value_t = 17.0)]
    min: f64,
    /// Maximum segment length in seconds (hybrid mode).
    #[arg(long, default_value_t = 20.0)]
    max: f64,
    /// Score candidate pauses only by their overlap with the cut window
    /// instead of their full length (hybrid mode).
    #[arg(long)]
    in_window_only: bool,
    /// Minimum pause length in frames before a pause splits segments
    /// (vad mode).
    #[arg(long, default_value_t = 10)]
    min_pause: usize,
    /// Segments shorter than this many seconds are dropped (vad mode).
    #[arg(long, default_value_t = 0.5)]
    min_speech: f64,
    /// Frame duration for the VAD step when the input is a WAV file.
    #[arg(long, default_value_t = 20)]
    frame_ms: u32,
    /// VAD aggressiveness when the input is a WAV file.
    #[arg(long, default_value_t = 2)]
    aggr: u8,
    /// Speaker id recorded in the manifest (default: the source stem).
    #[arg(long)]
    speaker: Option<String>,
    /// Wav name recorded in the manifest; defaults to the input file name
    /// (decisions files fall back to `<stem>.wav`).
    #[arg(long)]
    source: Option<String>,
    /// Output manifest (stdout when omitted).
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct FbankArgs {
    /// Input WAV file (16 kHz mono 16-bit PCM).
    wav: PathBuf,
    /// Apply utterance-level cepstral mean and variance normalization.
    #[arg(long)]
    cmvn: bool,
    /// Apply masking after extraction (and after CMVN when both are set).
    #[arg(long)]
    specaugment: bool,
    /// Seed for the masking draws.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Reject utterances with more frames than this.
    #[arg(long)]
    max_frames: Option<usize>,
    /// Output feature file (stdout when omitted).
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ResegmentCliMode {
    MergeThenSplit,
    SplitOnly,
}

#[derive(Args)]
struct ResegmentArgs {
    /// Aligned corpus manifest (9-column TSV).
    tsv: PathBuf,
    /// Global seed; per-sample draws derive from it and the sample id.
    #[arg(long)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = ResegmentCliMode::MergeThenSplit)]
    mode: ResegmentCliMode,
    /// Output manifest (stdout when omitted).
    #[arg(short, long)]
    output: Option<PathBuf>,
    /// Write the run report as JSON to this path.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct CleanArgs {
    /// Parallel corpus (`src\ttgt` per line).
    tsv: PathBuf,
    /// Expected target-language profile: a builtin code (de, en) or a
    /// profile file path.
    #[arg(long, default_value = "de")]
    tgt_profile: String,
    /// Contrast profiles; repeat the flag for several.
    #[arg(long, default_values_t = [String::from("en")])]
    contrast: Vec<String>,
    /// Output corpus (stdout when omitted).
    #[arg(short, long)]
    output: Option<PathBuf>,
    /// Write the cleaning report as JSON to this path.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct StatsArgs {
    /// Segment manifest to summarize.
    manifest: PathBuf,
}

/// Failure category, mapped onto the exit code table.
enum CliError {
    Usage(String),
    InputFormat(String),
    Processing(String),
}

impl CliError {
    fn code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::InputFormat(_) => 2,
            CliError::Processing(_) => 3,
        }
    }

    fn category(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::InputFormat(_) => "input-format",
            CliError::Processing(_) => "processing",
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::InputFormat(m) | CliError::Processing(m) => m,
        }
    }
}

impl From<AudioError> for CliError {
    fn from(e: AudioError) -> Self {
        match e {
            AudioError::BadFrameDuration(_) => CliError::Usage(e.to_string()),
            AudioError::Io(_) => CliError::Processing(e.to_string()),
            _ => CliError::InputFormat(e.to_string()),
        }
    }
}

impl From<VadError> for CliError {
    fn from(e: VadError) -> Self {
        match e {
            VadError::Audio(inner) => inner.into(),
            VadError::BadAggressiveness(_) => CliError::Usage(e.to_string()),
            VadError::BadDecisionsFormat { .. } => CliError::InputFormat(e.to_string()),
            VadError::Io(_) => CliError::Processing(e.to_string()),
        }
    }
}

impl From<SegmentError> for CliError {
    fn from(e: SegmentError) -> Self {
        match e {
            SegmentError::BadBounds { .. } | SegmentError::ConfigTooTight { .. } => {
                CliError::Usage(e.to_string())
            }
            SegmentError::BadManifest { .. } => CliError::InputFormat(e.to_string()),
            SegmentError::EmptyInput | SegmentError::Io(_) => CliError::Processing(e.to_string()),
        }
    }
}

impl From<ResegmentError> for CliError {
    fn from(e: ResegmentError) -> Self {
        match e {
            ResegmentError::BadManifest { .. } => CliError::InputFormat(e.to_string()),
            _ => CliError::Processing(e.to_string()),
        }
    }
}

impl From<CleanError> for CliError {
    fn from(e: CleanError) -> Self {
        match e {
            CleanError::BadFormat { .. } | CleanError::BadProfileFormat(_) => {
                CliError::InputFormat(e.to_string())
            }
            _ => CliError::Processing(e.to_string()),
        }
    }
}

impl From<segprep_core::fbank::FeatureError> for CliError {
    fn from(e: segprep_core::fbank::FeatureError) -> Self {
        use segprep_core::fbank::FeatureError;
        match e {
            FeatureError::BadConfig(_) => CliError::Usage(e.to_string()),
            FeatureError::BadFeatureFile(_) => CliError::InputFormat(e.to_string()),
            _ => CliError::Processing(e.to_string()),
        }
    }
}

fn main() {
    std::process::exit(run(std::env::args_os()));
}

fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    print!("{e}");
                    0
                }
                _ => {
                    let rendered = e.render().to_string();
                    let first = rendered.lines().next().unwrap_or("invalid arguments");
                    eprintln!("error: usage: {}", first.strip_prefix("error: ").unwrap_or(first));
                    1
                }
            }
        }
    };
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {}: {}", e.category(), e.message());
            e.code()
        }
    }
}

fn dispatch(command: Command) -> Result<(), CliError> {
    match command {
        Command::Vad(args) => cmd_vad(args),
        Command::Segment(args) => cmd_segment(args),
        Command::Fbank(args) => cmd_fbank(args),
        Command::Resegment(args) => cmd_resegment(args),
        Command::Clean(args) => cmd_clean(args),
        Command::Stats(args) => cmd_stats(args),
    }
}

/// Opens an input file, mapping a missing path onto an input-format error
/// that names the file.
fn open_input(path: &Path) -> Result<File, CliError> {
    File::open(path)
        .map_err(|e| CliError::InputFormat(format!("cannot read {}: {e}", path.display())))
}

fn write_output(path: Option<&Path>, bytes: &[u8]) -> Result<(), CliError> {
    match path {
        Some(p) => std::fs::write(p, bytes)
            .map_err(|e| CliError::Processing(format!("cannot write {}: {e}", p.display()))),
        None => io::stdout()
            .write_all(bytes)
            .map_err(|e| CliError::Processing(format!("cannot write stdout: {e}"))),
    }
}

fn read_wav_checked(path: &Path) -> Result<segprep_core::AudioBuffer64, CliError> {
    open_input(path)?; // surface missing files with the file name
    Ok(read_wav::<f64>(path)?)
}

fn cmd_vad(args: VadArgs) -> Result<(), CliError> {
    let buffer = read_wav_checked(&args.wav)?;
    let config = VadConfig {
        frame_ms: args.frame_ms,
        aggressiveness: args.aggr,
        hangover_frames: args.hangover,
    };
    let decisions = detect_voice(&buffer, &config)?;
    let mut out = Vec::new();
    write_decisions(&decisions, &mut out).map_err(VadError::from)?;
    write_output(args.output.as_deref(), &out)
}

/// A WAV input starts with `RIFF`; anything else is read as a decisions file.
fn load_decisions_for_segment(
    args: &SegmentArgs,
) -> Result<(VadDecisions, String), CliError> {
    let mut file = open_input(&args.input)?;
    let mut magic = [0u8; 4];
    let n = file.read(&mut magic).map_err(|e| {
        CliError::InputFormat(format!("cannot read {}: {e}", args.input.display()))
    })?;
    let is_wav = n == 4 && &magic == b"RIFF";

    let default_source = if is_wav {
        args.input
            .file_name()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "input.wav".to_string())
    } else {
        format!(
            "{}.wav",
            args.input
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "input".to_string())
        )
    };
    let source = args.source.clone().unwrap_or(default_source);

    let decisions = if is_wav {
        let buffer = read_wav::<f64>(&args.input)?;
        let config = VadConfig {
            frame_ms: args.frame_ms,
            aggressiveness: args.aggr,
            ..VadConfig::default()
        };
        detect_voice(&buffer, &config)?
    } else {
        read_decisions(BufReader::new(open_input(&args.input)?))?
    };
    Ok((decisions, source))
}

fn cmd_segment(args: SegmentArgs) -> Result<(), CliError> {
    let (decisions, source) = load_decisions_for_segment(&args)?;
    let speaker = args.speaker.clone().unwrap_or_else(|| {
        Path::new(&source)
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "unknown".to_string())
    });

    let segments: Vec<Segment> = match args.mode {
        SegmentMode::Hybrid => {
            let config = SegmenterConfig {
                min_len_s: args.min,
                max_len_s: args.max,
                pause_scoring: if args.in_window_only {
                    PauseScoring::WindowOverlapOnly
                } else {
                    PauseScoring::FullLength
                },
            };
            hybrid_segment(&decisions, &config, &source, &speaker)?
        }
        SegmentMode::Vad => vad_segment(&decisions, args.min_pause, args.min_speech, &source, &speaker),
    };

    let mut out = Vec::new();
    write_manifest(&segments, &mut out).map_err(SegmentError::from)?;
    write_output(args.output.as_deref(), &out)
}

fn cmd_fbank(args: FbankArgs) -> Result<(), CliError> {
    let buffer = read_wav_checked(&args.wav)?;
    let config = FbankConfig::default();
    let mut matrix = fbank(&buffer, &config)?;
    if let Some(max_frames) = args.max_frames {
        if length_filter(&matrix, max_frames) == LengthVerdict::Reject {
            return Err(CliError::Processing(format!(
                "{}: {} frames exceed the {} frame limit",
                args.wav.display(),
                matrix.rows(),
                max_frames
            )));
        }
    }
    if args.cmvn {
        matrix = cmvn(&matrix)?;
    }
    if args.specaugment {
        let sa = SpecAugmentConfig {
            seed: args.seed,
            ..SpecAugmentConfig::default()
        };
        matrix = spec_augment(&matrix, &sa);
    }
    let mut out = Vec::new();
    write_fbnk(&matrix, &mut out).map_err(|e| CliError::Processing(e.to_string()))?;
    write_output(args.output.as_deref(), &out)
}

fn cmd_resegment(args: ResegmentArgs) -> Result<(), CliError> {
    let samples = read_aligned_manifest(BufReader::new(open_input(&args.tsv)?))?;
    let mode = match args.mode {
        ResegmentCliMode::MergeThenSplit => ResegmentMode::MergeThenSplit,
        ResegmentCliMode::SplitOnly => ResegmentMode::SplitOnly,
    };
    let (output, report) = resegment_corpus(&samples, args.seed, mode);

    let mut out = Vec::new();
    write_aligned_manifest(&output, &mut out).map_err(ResegmentError::from)?;
    write_output(args.output.as_deref(), &out)?;

    if let Some(report_path) = &args.report {
        let json = serde_json::to_string_pretty(&report)
            .map_err(|e| CliError::Processing(e.to_string()))?;
        write_output(Some(report_path), format!("{json}\n").as_bytes())?;
    }
    Ok(())
}

fn resolve_profile(name: &str) -> Result<LangProfile, CliError> {
    if let Some(profile) = LangProfile::builtin(name) {
        return Ok(profile);
    }
    let path = Path::new(name);
    if path.exists() {
        return Ok(LangProfile::read(BufReader::new(open_input(path)?))?);
    }
    Err(CliError::Usage(format!(
        "unknown profile {name:?}: not a builtin code (de, en) or a readable file"
    )))
}

fn cmd_clean(args: CleanArgs) -> Result<(), CliError> {
    let expected = resolve_profile(&args.tgt_profile)?;
    let contrasts = args
        .contrast
        .iter()
        .map(|c| resolve_profile(c))
        .collect::<Result<Vec<_>, _>>()?;
    let pairs = read_corpus(BufReader::new(open_input(&args.tsv)?))?;
    let (kept, report) = clean_corpus(pairs, &expected, &contrasts)?;

    let mut out = Vec::new();
    write_corpus(&kept, &mut out).map_err(CleanError::from)?;
    write_output(args.output.as_deref(), &out)?;

    if let Some(report_path) = &args.report {
        let json = serde_json::to_string_pretty(&report)
            .map_err(|e| CliError::Processing(e.to_string()))?;
        write_output(Some(report_path), format!("{json}\n").as_bytes())?;
    }
    Ok(())
}

fn cmd_stats(args: StatsArgs) -> Result<(), CliError> {
    let segments = read_manifest(BufReader::new(open_input(&args.manifest)?))?;
    let stats = segment_stats(&segments)?;
    let json =
        serde_json::to_string_pretty(&stats).map_err(|e| CliError::Processing(e.to_string()))?;
    write_output(None, format!("{json}\n").as_bytes())
}
