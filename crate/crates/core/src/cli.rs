//! The `speechtok` batch command line.
//!
//! Every subcommand is deterministic given its inputs, config and `--seed`.
//! Binary outputs get a `<out>.meta.json` sidecar recording the seed and the
//! resolved configuration. Exit codes: 0 success, 2 I/O, 3 shape or config,
//! 4 data format, 5 scorer plugin protocol.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::audio::AudioBuffer;
use crate::datapipe::{build_intlv, build_itts, split_pair, AlignedPair, CorpusStats, IntlvStart, Provenance, DEFAULT_PUNCTUATION};
use crate::error::{Error, Result};
use crate::features::{split_instances, stack_frames, unstack_frames, FeatureSequence, DEFAULT_STACK_FACTOR};
use crate::formats::{self, TokenFile};
use crate::mel::{compute_mel, MelConfig};
use crate::metrics::{self, BigramScorer, EvalRecord, OracleScorer, PluginScorer, RandomScorer, Scorer};
use crate::rvq::{evaluate, train_rvq, TrainConfig};
use crate::seed;
use crate::stream::{build_loss_mask, serialize, FormatTag, InterleavedStream, Segment, SerializeOptions, SpecialTokens, TokenFrame, Vocab};

pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 2;
pub const EXIT_CONFIG: i32 = 3;
pub const EXIT_DATA: i32 = 4;
pub const EXIT_PLUGIN: i32 = 5;

/// Exit status for an error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Io { .. } => EXIT_IO,
        Error::EmptyInput(_) | Error::InvalidConfig(_) | Error::ShapeMismatch(_) | Error::IndexOutOfRange { .. } => EXIT_CONFIG,
        Error::InvalidSample { .. }
        | Error::InvalidStream(_)
        | Error::MalformedWire(_)
        | Error::InsufficientData(_)
        | Error::Format(_) => EXIT_DATA,
        Error::ScorerError(_) => EXIT_PLUGIN,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum OutputFormat {
    /// One JSON document per line.
    Jsonl,
    /// A single JSON array.
    Json,
}

#[derive(Debug, Parser)]
#[command(name = "speechtok", version, about = "Speech tokenizer toolkit: mel features, RVQ codebooks, interleaved records, evaluation")]
struct Cli {
    /// JSON config for the subcommand (mel: frontend settings, train-rvq: training settings).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Global seed; every module seed is derived from it.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (results do not depend on it).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Layout of multi-document outputs (training report, packed records).
    #[arg(long, global = true, value_enum, default_value_t = OutputFormat::Jsonl)]
    format: OutputFormat,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Audio (16-bit mono WAV, or raw f32 with --raw-rate) to stacked log-mel features (AFV1).
    Mel {
        input: PathBuf,
        #[arg(short, long)]
        out: PathBuf,
        /// Treat the input as raw little-endian f32 samples at this rate.
        #[arg(long)]
        raw_rate: Option<u32>,
        #[arg(long, default_value_t = DEFAULT_STACK_FACTOR)]
        stack: usize,
    },
    /// Train RVQ codebooks on the AFV1 files listed in a manifest (one path per line).
    TrainRvq {
        manifest: PathBuf,
        #[arg(short, long)]
        out: PathBuf,
        /// Training report path (default `<out>.report.jsonl`, or `.json` with --format json).
        #[arg(long)]
        report: Option<PathBuf>,
        /// Start from this RVQ1 stack instead of initialising from the corpus.
        #[arg(long)]
        init: Option<PathBuf>,
        /// Cut each file into instances of this many vectors (0 keeps whole files).
        #[arg(long, default_value_t = 0)]
        instance_frames: usize,
    },
    /// Features (AFV1) to audio tokens (ATK1) by nearest-codeword RVQ.
    Encode {
        features: PathBuf,
        #[arg(long)]
        codebooks: PathBuf,
        #[arg(short, long)]
        out: PathBuf,
        /// Use only the first N layers.
        #[arg(long)]
        layers: Option<usize>,
    },
    /// Audio tokens (ATK1) back to features (AFV1); EOA frames are skipped.
    Decode {
        tokens: PathBuf,
        #[arg(long)]
        codebooks: PathBuf,
        #[arg(short, long)]
        out: PathBuf,
        /// Write per-mel-frame rows instead of stacked vectors.
        #[arg(long)]
        unstack: bool,
        #[arg(long, default_value_t = DEFAULT_STACK_FACTOR)]
        stack: usize,
        /// Frame rate recorded for the stacked vectors.
        #[arg(long, default_value_t = 12.5)]
        frame_rate: f64,
    },
    /// Assemble interleaved training records from an aligned-utterance manifest (JSONL).
    Pack {
        manifest: PathBuf,
        #[arg(short, long)]
        out: PathBuf,
        /// Record format: ASR, AQA, S2TT, INTLV, TTS, ITTS or PURE_AUDIO.
        #[arg(long)]
        tag: FormatTag,
        /// Text prompt for ASR/AQA/S2TT records without their own `prompt`.
        #[arg(long)]
        prompt: Option<String>,
        /// Split utterances at sentence punctuation before building INTLV/ITTS records.
        #[arg(long)]
        split_punct: bool,
        /// Punctuation characters used by --split-punct.
        #[arg(long)]
        punctuation: Option<String>,
        /// Switch token ids: `TEXT_TO_AUDIO,AUDIO_TO_TEXT` or a JSON file `{"switch_ta": .., "switch_at": ..}`.
        #[arg(long)]
        special: Option<String>,
        /// Wrap audio-first / audio-last records in switch tokens as well.
        #[arg(long)]
        edge_switches: bool,
        #[arg(long, value_enum, default_value_t = StartArg::Audio)]
        intlv_start: StartArg,
        /// Corpus statistics path (default `<out>.stats.json`).
        #[arg(long)]
        stats: Option<PathBuf>,
    },
    /// Perplexity-comparison accuracy of a scorer on evaluation records (JSONL).
    Eval {
        records: PathBuf,
        /// builtin:oracle, builtin:anti, builtin:random, builtin:bigram:<corpus.jsonl> or exec:<command line>.
        #[arg(long)]
        scorer: String,
    },
    /// Token statistics of an ATK1 file and/or WER between line-aligned transcripts.
    Metrics {
        #[arg(long)]
        tokens: Option<PathBuf>,
        #[arg(long, requires = "hypothesis")]
        reference: Option<PathBuf>,
        #[arg(long, requires = "reference")]
        hypothesis: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum StartArg {
    Audio,
    Text,
    Random,
}

impl From<StartArg> for IntlvStart {
    fn from(s: StartArg) -> Self {
        match s {
            StartArg::Audio => IntlvStart::Audio,
            StartArg::Text => IntlvStart::Text,
            StartArg::Random => IntlvStart::Random,
        }
    }
}

#[derive(Default)]
struct Output {
    stdout: Vec<u8>,
    stderr: Vec<u8>,
}

impl Output {
    fn json(&mut self, v: &impl Serialize) {
        let line = serde_json::to_string(v).expect("value serialises");
        self.stdout.extend_from_slice(line.as_bytes());
        self.stdout.push(b'\n');
    }

    fn warn(&mut self, msg: &str) {
        self.stderr.extend_from_slice(format!("warning: {msg}\n").as_bytes());
    }
}

/// Parse `args` (including the program name) and run the subcommand. Returns the exit status.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let text = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = stdout.write_all(text.as_bytes());
                    EXIT_OK
                }
                _ => {
                    let _ = stderr.write_all(text.as_bytes());
                    EXIT_CONFIG
                }
            };
        }
    };

    let mut out = Output::default();
    let result = match cli.threads {
        Some(0) => Err(Error::config("--threads must be >= 1")),
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(|| dispatch(&cli, &mut out)),
            Err(e) => Err(Error::config(format!("thread pool: {e}"))),
        },
        None => dispatch(&cli, &mut out),
    };
    let _ = stdout.write_all(&out.stdout);
    let _ = stderr.write_all(&out.stderr);
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            exit_code(&e)
        }
    }
}

fn dispatch(cli: &Cli, out: &mut Output) -> Result<()> {
    match &cli.command {
        Command::Mel { input, out: path, raw_rate, stack } => cmd_mel(cli, input, path, *raw_rate, *stack, out),
        Command::TrainRvq {
            manifest,
            out: path,
            report,
            init,
            instance_frames,
        } => cmd_train_rvq(cli, manifest, path, report.as_deref(), init.as_deref(), *instance_frames, out),
        Command::Encode {
            features,
            codebooks,
            out: path,
            layers,
        } => cmd_encode(cli, features, codebooks, path, *layers, out),
        Command::Decode {
            tokens,
            codebooks,
            out: path,
            unstack,
            stack,
            frame_rate,
        } => cmd_decode(tokens, codebooks, path, *unstack, *stack, *frame_rate, out),
        Command::Pack { .. } => cmd_pack(cli, out),
        Command::Eval { records, scorer } => cmd_eval(cli, records, scorer, out),
        Command::Metrics {
            tokens,
            reference,
            hypothesis,
        } => cmd_metrics(tokens.as_deref(), reference.as_deref(), hypothesis.as_deref(), out),
    }
}

fn global_seed(cli: &Cli) -> u64 {
    cli.seed.unwrap_or(0)
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn load_config<T: DeserializeOwned + Default>(path: Option<&Path>) -> Result<T> {
    match path {
        None => Ok(T::default()),
        Some(p) => serde_json::from_str(&read_text(p)?).map_err(|e| Error::config(format!("{}: {e}", p.display()))),
    }
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

/// `<out>.meta.json`: command, seed and resolved settings of the run that wrote `out`.
fn write_meta(out: &Path, command: &str, seed: u64, settings: Value) -> Result<()> {
    let meta = json!({
        "tool": "speechtok",
        "version": env!("CARGO_PKG_VERSION"),
        "command": command,
        "seed": seed,
        "settings": settings,
    });
    write_text(&with_suffix(out, ".meta.json"), &(serde_json::to_string_pretty(&meta).expect("meta serialises") + "\n"))
}

/// JSONL or a JSON array, newline-terminated.
fn render_documents<T: Serialize>(docs: &[T], format: OutputFormat) -> String {
    match format {
        OutputFormat::Jsonl => docs
            .iter()
            .map(|d| serde_json::to_string(d).expect("document serialises") + "\n")
            .collect(),
        OutputFormat::Json => serde_json::to_string(docs).expect("documents serialise") + "\n",
    }
}

fn cmd_mel(cli: &Cli, input: &Path, path: &Path, raw_rate: Option<u32>, stack: usize, out: &mut Output) -> Result<()> {
    let cfg: MelConfig = load_config(cli.config.as_deref())?;
    let audio = match raw_rate {
        Some(rate) => AudioBuffer::read_raw_f32(input, rate)?,
        None => AudioBuffer::read_wav(input)?,
    };
    let features = stack_frames(&compute_mel(&audio, &cfg)?, stack)?;
    formats::write_afv1(path, &features)?;
    write_meta(path, "mel", global_seed(cli), json!({ "mel": cfg, "stack": stack }))?;
    out.json(&json!({
        "frames": features.n_frames(),
        "frame_rate": features.frame_rate(),
        "dim": features.dim(),
    }));
    Ok(())
}

/// Non-empty, non-comment lines with their 1-based line numbers.
fn manifest_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.parent().unwrap_or(Path::new("")).join(p)
    }
}

fn cmd_train_rvq(
    cli: &Cli,
    manifest: &Path,
    path: &Path,
    report_path: Option<&Path>,
    init: Option<&Path>,
    instance_frames: usize,
    out: &mut Output,
) -> Result<()> {
    let mut cfg: TrainConfig = load_config(cli.config.as_deref())?;
    let seed = match cli.seed {
        Some(s) => {
            cfg.reseed(s);
            s
        }
        None => cfg.seed,
    };
    cfg.validate()?;

    let mut corpus = Vec::new();
    for (_, line) in manifest_lines(&read_text(manifest)?) {
        let features = formats::read_afv1(resolve(manifest, Path::new(line)))?;
        if instance_frames > 0 {
            corpus.extend(split_instances(&features, instance_frames)?);
        } else {
            corpus.push(features);
        }
    }
    if let Some(f) = corpus.iter().find(|f| f.dim() != corpus[0].dim()) {
        return Err(Error::ShapeMismatch(format!(
            "manifest mixes feature dimensions {} and {}",
            corpus[0].dim(),
            f.dim()
        )));
    }

    let initial = match init {
        Some(p) => formats::read_rvq1(p)?,
        None => cfg.init_stack(&corpus)?,
    };
    let (trained, report) = train_rvq(&initial, &corpus, &cfg)?;

    // Evaluate what actually lands on disk: codewords are stored as f32.
    let bytes = formats::encode_rvq1(&trained)?;
    let stored = formats::decode_rvq1(&bytes)?;
    fs::write(path, &bytes).map_err(|e| Error::io(path, e))?;
    let report_path = report_path.map(Path::to_path_buf).unwrap_or_else(|| {
        with_suffix(
            path,
            match cli.format {
                OutputFormat::Jsonl => ".report.jsonl",
                OutputFormat::Json => ".report.json",
            },
        )
    });
    write_text(&report_path, &render_documents(&report.steps, cli.format))?;
    write_meta(path, "train-rvq", seed, serde_json::to_value(&cfg).expect("config serialises"))?;

    let summary = evaluate(&stored, &corpus)?;
    out.json(&json!({
        "steps": report.steps.len(),
        "layers": stored.n_layers(),
        "vectors": summary.vectors,
        "feature_mae": summary.feature_mae,
        "commit_loss": summary.commit_loss,
        "utilization": summary.utilization,
        "seed": seed,
    }));
    Ok(())
}

fn cmd_encode(cli: &Cli, features: &Path, codebooks: &Path, path: &Path, layers: Option<usize>, out: &mut Output) -> Result<()> {
    let feats = formats::read_afv1(features)?;
    let mut stack = formats::read_rvq1(codebooks)?;
    if let Some(n) = layers {
        stack = stack.truncated(n)?;
    }
    if !feats.is_empty() && feats.dim() != stack.dim() {
        return Err(Error::ShapeMismatch(format!(
            "features have dimension {}, codebooks {}",
            feats.dim(),
            stack.dim()
        )));
    }
    let frames: Vec<TokenFrame> = feats
        .vectors()
        .collect::<Vec<_>>()
        .par_iter()
        .map(|x| stack.encode_vector(x).map(TokenFrame::new))
        .collect::<Result<_>>()?;
    let sizes = stack.sizes().iter().map(|&k| k as u32).collect();
    let n = frames.len();
    formats::write_atk1(path, &TokenFile::new(sizes, frames)?)?;
    write_meta(path, "encode", global_seed(cli), json!({ "layers": stack.n_layers() }))?;
    out.json(&json!({ "frames": n, "layers": stack.n_layers() }));
    Ok(())
}

fn cmd_decode(tokens: &Path, codebooks: &Path, path: &Path, unstack: bool, stack_factor: usize, frame_rate: f64, out: &mut Output) -> Result<()> {
    let file = formats::read_atk1(tokens)?;
    let full = formats::read_rvq1(codebooks)?;
    let n_layers = file.codebook_sizes.len();
    let stack = full.truncated(n_layers)?;
    let stack_sizes: Vec<u32> = stack.sizes().iter().map(|&k| k as u32).collect();
    if stack_sizes != file.codebook_sizes {
        return Err(Error::ShapeMismatch(format!(
            "token file codebook sizes {:?} do not match codebooks {:?}",
            file.codebook_sizes, stack_sizes
        )));
    }
    let kept: Vec<&TokenFrame> = file.frames.iter().filter(|f| !f.is_eoa(&file.codebook_sizes)).collect();
    let skipped = file.frames.len() - kept.len();
    if skipped > 0 {
        out.warn(&format!("skipped {skipped} EOA frame(s)"));
    }
    let rows: Vec<Vec<f64>> = kept
        .par_iter()
        .map(|f| stack.decode_indices(f.indices()))
        .collect::<Result<_>>()?;
    let data: Vec<f64> = rows.into_iter().flatten().collect();
    let decoded = FeatureSequence::new(data, stack.dim(), frame_rate, stack_factor)?;
    let written = if unstack {
        let mel = unstack_frames(&decoded, "decoded")?;
        FeatureSequence::new(mel.data().to_vec(), mel.n_mels(), mel.frame_rate(), 1)?
    } else {
        decoded
    };
    formats::write_afv1(path, &written)?;
    out.json(&json!({
        "frames": written.n_frames(),
        "dim": written.dim(),
        "skipped_eoa": skipped,
    }));
    Ok(())
}

/// One aligned utterance in a pack manifest.
#[derive(Debug, Deserialize)]
struct ManifestEntry {
    text: String,
    atk1_path: PathBuf,
    frame_range: [usize; 2],
    duration_s: f64,
    #[serde(default)]
    provenance: Provenance,
    /// Consecutive lines sharing a `doc` value form one INTLV/ITTS record.
    #[serde(default)]
    doc: Value,
    #[serde(default)]
    prompt: Option<String>,
    /// Answer or translation text for AQA/S2TT.
    #[serde(default)]
    response: Option<String>,
}

/// Where an audio segment's frames live: `[start, end)` of an ATK1 file, with
/// the path as written in the manifest.
#[derive(Debug, Clone, Serialize)]
struct FramesRef {
    path: String,
    start: usize,
    end: usize,
}

#[derive(Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
enum SegmentRecord<'a> {
    Text { tokens: &'a [u32] },
    Audio { frames_ref: FramesRef },
}

#[derive(Serialize)]
struct PackedRecord<'a> {
    format: FormatTag,
    segments: Vec<SegmentRecord<'a>>,
    /// Loss flag per token of the serialized record (switch tokens and EOA frames included).
    mask: Vec<bool>,
}

/// A pair plus the location of its frames.
struct SourcedPair {
    pair: AlignedPair,
    frames: FramesRef,
}

fn default_prompt(tag: FormatTag) -> &'static str {
    match tag {
        FormatTag::Aqa => "Answer the question in the audio.",
        FormatTag::S2tt => "Translate the audio.",
        _ => "Transcribe the audio.",
    }
}

/// `TEXT_TO_AUDIO,AUDIO_TO_TEXT`, or a path to a JSON `{switch_ta, switch_at}` table.
fn parse_special(s: &str) -> Result<SpecialTokens> {
    if !s.contains(',') {
        let p = Path::new(s);
        return serde_json::from_str(&read_text(p)?).map_err(|e| Error::config(format!("{}: {e}", p.display())));
    }
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    let parse = |p: &str| p.parse::<u32>().map_err(|e| Error::config(format!("--special {s:?}: {e}")));
    match parts.as_slice() {
        [ta, at] => Ok(SpecialTokens {
            switch_ta: parse(ta)?,
            switch_at: parse(at)?,
        }),
        _ => Err(Error::config(format!("--special expects TEXT_TO_AUDIO,AUDIO_TO_TEXT, got {s:?}"))),
    }
}

fn line_error(manifest: &Path, line: usize, e: impl std::fmt::Display) -> Error {
    Error::Format(format!("{}:{line}: {e}", manifest.display()))
}

fn text_segment(text: &str, what: &str) -> Result<Segment> {
    let ids = crate::datapipe::text_to_ids(text);
    if ids.is_empty() {
        return Err(Error::InsufficientData(format!("empty {what}")));
    }
    Ok(Segment::Text(ids))
}

fn cmd_pack(cli: &Cli, out: &mut Output) -> Result<()> {
    let Command::Pack {
        manifest,
        out: path,
        tag,
        prompt,
        split_punct,
        punctuation,
        special,
        edge_switches,
        intlv_start,
        stats: stats_path,
    } = &cli.command
    else {
        unreachable!("dispatched on Pack");
    };
    let tag = *tag;
    let special = special.as_deref().map(parse_special).transpose()?.unwrap_or_default();
    let opts = SerializeOptions {
        edge_switches: *edge_switches,
    };
    let rules: Vec<char> = punctuation
        .as_deref()
        .map(|p| p.chars().collect())
        .unwrap_or_else(|| DEFAULT_PUNCTUATION.to_vec());
    let intlv_seed = seed::derive(global_seed(cli), "pack.intlv");

    // Parse the manifest and cut audio spans out of the referenced token files.
    let text = read_text(manifest)?;
    let mut files: BTreeMap<PathBuf, TokenFile> = BTreeMap::new();
    let mut sizes: Option<Vec<u32>> = None;
    let mut entries: Vec<(usize, ManifestEntry, SourcedPair)> = Vec::new();
    for (line, raw) in manifest_lines(&text) {
        let entry: ManifestEntry = serde_json::from_str(raw).map_err(|e| line_error(manifest, line, e))?;
        let atk1 = resolve(manifest, &entry.atk1_path);
        if !files.contains_key(&atk1) {
            let file = formats::read_atk1(&atk1)?;
            match &sizes {
                None => sizes = Some(file.codebook_sizes.clone()),
                Some(s) if *s != file.codebook_sizes => {
                    return Err(Error::ShapeMismatch(format!(
                        "{} has codebook sizes {:?}, earlier files {:?}",
                        atk1.display(),
                        file.codebook_sizes,
                        s
                    )));
                }
                Some(_) => {}
            }
            files.insert(atk1.clone(), file);
        }
        let file = &files[&atk1];
        let [start, end] = entry.frame_range;
        if start > end || end > file.frames.len() {
            return Err(line_error(
                manifest,
                line,
                format!("frame_range [{start}, {end}] outside {} frames of {}", file.frames.len(), atk1.display()),
            ));
        }
        let pair = AlignedPair::new(entry.text.clone(), file.frames[start..end].to_vec(), entry.duration_s, entry.provenance)
            .map_err(|e| line_error(manifest, line, e))?;
        let frames = FramesRef {
            path: entry.atk1_path.display().to_string(),
            start,
            end,
        };
        entries.push((line, entry, SourcedPair { pair, frames }));
    }

    // Group into records: (first line, stream, frame refs of its audio segments, seconds).
    let mut records: Vec<(usize, InterleavedStream, Vec<FramesRef>, f64)> = Vec::new();
    match tag {
        FormatTag::Intlv | FormatTag::Itts => {
            let mut i = 0;
            while i < entries.len() {
                let mut j = i + 1;
                while j < entries.len() && entries[j].1.doc == entries[i].1.doc {
                    j += 1;
                }
                let group = &entries[i..j];
                let first_line = group[0].0;
                let mut pairs: Vec<AlignedPair> = Vec::new();
                let mut refs: Vec<FramesRef> = Vec::new();
                for (line, _, sp) in group {
                    let pieces = if *split_punct {
                        split_pair(&sp.pair, &rules).map_err(|e| line_error(manifest, *line, e))?
                    } else {
                        vec![sp.pair.clone()]
                    };
                    // Pieces hold consecutive sub-ranges of the pair's frames.
                    let mut at = sp.frames.start;
                    for piece in pieces {
                        refs.push(FramesRef {
                            path: sp.frames.path.clone(),
                            start: at,
                            end: at + piece.frames.len(),
                        });
                        at += piece.frames.len();
                        pairs.push(piece);
                    }
                }
                let stream = if tag == FormatTag::Intlv {
                    build_intlv(&pairs, (*intlv_start).into(), seed::mix(intlv_seed, &[records.len() as u64]))
                } else {
                    build_itts(&pairs)
                }
                .map_err(|e| line_error(manifest, first_line, e))?;
                let audio_first = matches!(stream.segments().first(), Some(Segment::Audio(_)));
                let audio_refs = refs
                    .into_iter()
                    .enumerate()
                    .filter(|(k, _)| tag == FormatTag::Itts || (k % 2 == 0) == audio_first)
                    .map(|(_, r)| r)
                    .collect();
                let seconds = group.iter().map(|(_, e, _)| e.duration_s).sum();
                records.push((first_line, stream, audio_refs, seconds));
                i = j;
            }
        }
        _ => {
            for (line, entry, sp) in &entries {
                let audio = Segment::Audio(sp.pair.frames.clone());
                let stream = (|| -> Result<InterleavedStream> {
                    if sp.pair.frames.is_empty() {
                        return Err(Error::InsufficientData("empty frame_range".into()));
                    }
                    let prompt = entry.prompt.as_deref().or(prompt.as_deref()).unwrap_or(default_prompt(tag));
                    let segments = match tag {
                        FormatTag::Asr => vec![text_segment(prompt, "prompt")?, audio, text_segment(&sp.pair.text, "text")?],
                        FormatTag::Aqa | FormatTag::S2tt => {
                            let response = entry
                                .response
                                .as_deref()
                                .ok_or_else(|| Error::InsufficientData(format!("{tag} entry needs a response")))?;
                            vec![text_segment(prompt, "prompt")?, audio, text_segment(response, "response")?]
                        }
                        FormatTag::Tts => vec![text_segment(&sp.pair.text, "text")?, audio],
                        FormatTag::PureAudio => vec![audio],
                        FormatTag::Intlv | FormatTag::Itts => unreachable!("handled above"),
                    };
                    InterleavedStream::new(tag, segments)
                })()
                .map_err(|e| line_error(manifest, *line, e))?;
                records.push((*line, stream, vec![sp.frames.clone()], entry.duration_s));
            }
        }
    }

    // Serializing checks every record against the vocabulary; the mask is aligned to that sequence.
    let vocab = sizes.clone().map(|s| Vocab::new(special, s)).transpose()?;
    let mut packed = Vec::with_capacity(records.len());
    for (line, stream, refs, _) in &records {
        let vocab = vocab.as_ref().expect("records imply a token file");
        let wire_len = serialize(stream, vocab, opts).map_err(|e| line_error(manifest, *line, e))?.len();
        let mask = build_loss_mask(stream, opts).0;
        debug_assert_eq!(mask.len(), wire_len);
        let mut refs = refs.iter();
        let segments = stream
            .segments()
            .iter()
            .map(|s| match s {
                Segment::Text(t) => SegmentRecord::Text { tokens: t },
                Segment::Audio(_) => SegmentRecord::Audio {
                    frames_ref: refs.next().expect("one frame ref per audio segment").clone(),
                },
            })
            .collect();
        packed.push(PackedRecord {
            format: stream.format(),
            segments,
            mask,
        });
    }
    write_text(path, &render_documents(&packed, cli.format))?;

    let mut stats = CorpusStats::default();
    for (_, stream, _, seconds) in &records {
        stats.add(stream, *seconds);
    }
    let stats_path = stats_path.clone().unwrap_or_else(|| with_suffix(path, ".stats.json"));
    write_text(&stats_path, &(serde_json::to_string(&stats).expect("stats serialise") + "\n"))?;
    write_meta(
        path,
        "pack",
        global_seed(cli),
        json!({
            "tag": tag,
            "special": special,
            "edge_switches": edge_switches,
            "split_punct": split_punct,
            "intlv_start": format!("{intlv_start:?}").to_lowercase(),
        }),
    )?;
    out.json(&stats);
    Ok(())
}

fn read_eval_records(path: &Path) -> Result<Vec<EvalRecord>> {
    let text = read_text(path)?;
    manifest_lines(&text)
        .map(|(line, raw)| {
            let r: EvalRecord = serde_json::from_str(raw).map_err(|e| line_error(path, line, e))?;
            r.validate().map_err(|e| line_error(path, line, e))?;
            Ok(r)
        })
        .collect()
}

fn read_token_corpus(path: &Path) -> Result<Vec<Vec<u32>>> {
    let text = read_text(path)?;
    manifest_lines(&text)
        .map(|(line, raw)| serde_json::from_str(raw).map_err(|e| line_error(path, line, e)))
        .collect()
}

fn build_scorer(spec: &str, records: &[EvalRecord], seed: u64) -> Result<Box<dyn Scorer>> {
    if let Some(cmd) = spec.strip_prefix("exec:") {
        let mut words = cmd.split_whitespace();
        let program = words
            .next()
            .ok_or_else(|| Error::config("exec: scorer needs a command"))?;
        let args: Vec<String> = words.map(String::from).collect();
        return Ok(Box::new(PluginScorer::spawn(program, &args)?));
    }
    if let Some(path) = spec.strip_prefix("builtin:bigram:") {
        let corpus = read_token_corpus(Path::new(path))?;
        return Ok(Box::new(BigramScorer::train(corpus.iter().map(Vec::as_slice))));
    }
    match spec {
        "builtin:oracle" => Ok(Box::new(OracleScorer::new(records))),
        "builtin:anti" => Ok(Box::new(OracleScorer::anti(records))),
        "builtin:random" => Ok(Box::new(RandomScorer::new(seed::derive(seed, "eval.random")))),
        _ => Err(Error::config(format!("unknown scorer {spec:?}"))),
    }
}

fn cmd_eval(cli: &Cli, records_path: &Path, spec: &str, out: &mut Output) -> Result<()> {
    let records = read_eval_records(records_path)?;
    let mut scorer = build_scorer(spec, &records, global_seed(cli))?;
    let acc = metrics::accuracy(&records, scorer.as_mut())?;
    out.json(&json!({ "accuracy": acc, "n": records.len() }));
    Ok(())
}

fn cmd_metrics(tokens: Option<&Path>, reference: Option<&Path>, hypothesis: Option<&Path>, out: &mut Output) -> Result<()> {
    if tokens.is_none() && reference.is_none() {
        return Err(Error::config("metrics needs --tokens and/or --reference/--hypothesis"));
    }
    let mut doc = serde_json::Map::new();
    if let Some(p) = tokens {
        let file = formats::read_atk1(p)?;
        let frames: Vec<TokenFrame> = file
            .frames
            .iter()
            .filter(|f| !f.is_eoa(&file.codebook_sizes))
            .cloned()
            .collect();
        let n_layers = file.codebook_sizes.len();
        let mut layers = Vec::new();
        for (l, &k) in file.codebook_sizes.iter().enumerate() {
            layers.push(json!({
                "layer": l,
                "size": k,
                "utilization": metrics::codebook_utilization(&frames, l, k as usize)?,
                "entropy": metrics::token_entropy(&frames, l)?,
            }));
        }
        let mi: Vec<f64> = (1..n_layers)
            .map(|l| metrics::interlayer_mi(&frames, l - 1, l))
            .collect::<Result<_>>()?;
        doc.insert("frames".into(), json!(frames.len()));
        doc.insert("layers".into(), json!(layers));
        doc.insert("adjacent_mi".into(), json!(mi));
    }
    if let (Some(r), Some(h)) = (reference, hypothesis) {
        let refs = read_text(r)?;
        let hyps = read_text(h)?;
        let refs: Vec<&str> = refs.lines().collect();
        let hyps: Vec<&str> = hyps.lines().collect();
        if refs.len() != hyps.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} reference lines vs {} hypothesis lines",
                refs.len(),
                hyps.len()
            )));
        }
        let (mut edits, mut words) = (0usize, 0usize);
        for (a, b) in refs.iter().zip(&hyps) {
            let a: Vec<&str> = a.split_whitespace().collect();
            let b: Vec<&str> = b.split_whitespace().collect();
            edits += metrics::edit_distance(&a, &b);
            words += a.len();
        }
        if words == 0 {
            return Err(Error::EmptyInput("reference transcripts have no words".into()));
        }
        doc.insert("wer".into(), json!(edits as f64 / words as f64));
        doc.insert("reference_words".into(), json!(words));
    }
    out.json(&doc);
    Ok(())
}
