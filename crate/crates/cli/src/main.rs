use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{ArgGroup, Args, Parser, Subcommand, ValueEnum};

mod commands;

#[derive(Parser, Debug)]
#[command(
    name = "geolmk",
    version,
    about = "Geodesic landmark maps for segmented volumes"
)]
struct Cli {
    /// Worker threads. Defaults to 1, except `geodesic`, which uses all cores.
    #[arg(long, global = true, env = "GEOLMK_THREADS")]
    threads: Option<usize>,

    /// Log level filter (error, warn, info, debug, trace).
    #[arg(long, global = true, default_value = "warn")]
    log_level: String,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic mandible mask and its landmarks.
    Phantom(PhantomArgs),
    /// Unsigned distance to the background, in millimeters.
    Edt(TransformArgs),
    /// Signed distance: positive inside, negative outside.
    Sdt(TransformArgs),
    /// One geodesic map per landmark, written as <out-dir>/<name>.gvol.
    Geodesic(GeodesicArgs),
    /// Pointwise minimum of geodesic maps.
    Fuse(FuseArgs),
    /// Quantize a fused map into classes 0..=20 (255 on background).
    Quantize(QuantizeArgs),
    /// Recover sparse landmarks from a fused or quantized map.
    DecodeLandmarks(DecodeLandmarksArgs),
    /// Extract the boundary sequence of the midsagittal slice.
    ExtractSeq(ExtractSeqArgs),
    /// Name the flagged rows of a boundary sequence.
    DecodeSeq(DecodeSeqArgs),
    /// Synthesize boundary sequences from a PCA shape model.
    PcaAugment(PcaAugmentArgs),
    /// Largest connected component and hole filling.
    Postprocess(PostprocessArgs),
    /// Overlap and surface-distance scores between two masks.
    EvalSeg(EvalSegArgs),
    /// Per-landmark errors between two landmark files.
    EvalLandmarks(EvalLandmarksArgs),
    /// Layer-by-layer feature and parameter counts of a reference network.
    Netspec(NetspecArgs),
}

#[derive(Args, Debug)]
struct PhantomArgs {
    /// Phantom spec JSON; omitted fields take their defaults.
    #[arg(long)]
    spec: Option<PathBuf>,
    /// Output mask volume.
    #[arg(short, long)]
    output: PathBuf,
    /// Output landmark JSON.
    #[arg(long)]
    landmarks: PathBuf,
    /// Also write landmarks as a labelled i32 volume.
    #[arg(long)]
    labeled_volume: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct TransformArgs {
    #[arg(long)]
    mask: PathBuf,
    /// Output f64 volume.
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Args, Debug)]
struct GeodesicArgs {
    #[arg(long)]
    mask: PathBuf,
    #[arg(long)]
    landmarks: PathBuf,
    #[arg(long)]
    out_dir: PathBuf,
    /// Voxel neighborhood: 6 or 26.
    #[arg(long, default_value_t = 26)]
    connectivity: u32,
    /// Largest distance an off-mask landmark may be snapped, in mm.
    #[arg(long, default_value_t = geolmk::geodesic::DEFAULT_SNAP_LIMIT_MM)]
    snap_limit: f64,
    /// Comma-separated landmark names (default: every present sparse landmark).
    #[arg(long, value_delimiter = ',')]
    names: Vec<String>,
}

#[derive(Args, Debug)]
struct FuseArgs {
    /// Geodesic map volumes.
    #[arg(required = true)]
    maps: Vec<PathBuf>,
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Args, Debug)]
#[command(group(ArgGroup::new("bin").required(true).args(["sbin", "auto_sbin"])))]
struct QuantizeArgs {
    /// Fused f64 map.
    #[arg(long)]
    map: PathBuf,
    /// Bin width in mm.
    #[arg(long)]
    sbin: Option<f64>,
    /// Bin width = largest finite distance / 20.
    #[arg(long)]
    auto_sbin: bool,
    /// Object mask; unreachable foreground then gets the top class.
    #[arg(long)]
    mask: Option<PathBuf>,
    /// Output u8 volume.
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Args, Debug)]
struct DecodeLandmarksArgs {
    /// Quantized (u8) or fused (f64) map.
    #[arg(long)]
    map: PathBuf,
    #[arg(long)]
    mask: PathBuf,
    /// Comma-separated sparse landmark names (default: Me,CdL,CdR,CorL,CorR).
    #[arg(long, value_delimiter = ',')]
    names: Vec<String>,
    /// Output landmark JSON (stdout when omitted).
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ExtractSeqArgs {
    #[arg(long)]
    mask: PathBuf,
    #[arg(long)]
    landmarks: PathBuf,
    /// Output sequence JSON (stdout when omitted).
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct DecodeSeqArgs {
    /// Sequence JSON.
    #[arg(long)]
    seq: PathBuf,
    /// Write decoded landmarks as landmark JSON (needs a crop window).
    #[arg(long)]
    landmarks: Option<PathBuf>,
    /// Output decoded rows as JSON (stdout when omitted).
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct PcaAugmentArgs {
    /// JSON array of training sequences.
    #[arg(long)]
    training: PathBuf,
    #[arg(long)]
    count: usize,
    /// Coefficients are clamped to this many standard deviations.
    #[arg(long, default_value_t = 2.0)]
    sigma_cap: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output JSON array (stdout when omitted).
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct PostprocessArgs {
    #[arg(long)]
    mask: PathBuf,
    /// Keep only the largest connected component.
    #[arg(long)]
    largest_cc: bool,
    /// Fill enclosed background cavities.
    #[arg(long)]
    fill: bool,
    /// Connectivity for the component search: 6 or 26.
    #[arg(long, default_value_t = 26)]
    connectivity: u32,
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Args, Debug)]
struct EvalSegArgs {
    #[arg(long)]
    pred: PathBuf,
    #[arg(long)]
    gt: PathBuf,
    /// Hausdorff percentile (100 is the maximum).
    #[arg(long, default_value_t = 100.0)]
    percentile: f64,
    #[arg(long, default_value = "case")]
    case_id: String,
    /// Machine-readable output.
    #[arg(long)]
    json: bool,
    /// Also write a one-row CSV report.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args, Debug)]
#[command(group(ArgGroup::new("grid").args(["spacing", "reference"])))]
struct EvalLandmarksArgs {
    #[arg(long)]
    pred: PathBuf,
    #[arg(long)]
    gt: PathBuf,
    /// Voxel spacing sx,sy,sz in mm (default 1,1,1).
    #[arg(long, value_delimiter = ',', num_args = 3)]
    spacing: Vec<f64>,
    /// Take the spacing from this volume's header.
    #[arg(long)]
    reference: Option<PathBuf>,
    #[arg(long, default_value = "case")]
    case_id: String,
    /// Machine-readable output.
    #[arg(long)]
    json: bool,
    /// Also write a one-row CSV report.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum Arch {
    Tiramisu,
    Unet,
    Lstm,
}

#[derive(Args, Debug)]
struct NetspecArgs {
    #[arg(long, value_enum)]
    arch: Arch,
    /// Dense-block growth rate (tiramisu only).
    #[arg(long, default_value_t = 16)]
    growth_rate: u32,
    /// Stacked cells (lstm only).
    #[arg(long, default_value_t = 64)]
    cells: u32,
    /// Hidden units per cell (lstm only).
    #[arg(long, default_value_t = 512)]
    units: u32,
    /// Input row width (lstm only).
    #[arg(long, default_value_t = 64)]
    row_width: u32,
    /// Machine-readable output.
    #[arg(long)]
    json: bool,
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.chain().find_map(|e| e.downcast_ref::<geolmk::Error>()) {
        Some(e) if e.is_validation() => 2,
        // A missing input is the caller's mistake, not an environment failure.
        Some(geolmk::Error::Io { source, .. }) if source.kind() == std::io::ErrorKind::NotFound => {
            2
        }
        Some(_) => 1,
        None if err.chain().any(|e| e.is::<commands::UsageError>()) => 2,
        None => 1,
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let threads = match (cli.threads, &cli.command) {
        (Some(0), _) => {
            return Err(commands::UsageError("--threads must be at least 1".into()).into())
        }
        (Some(n), _) => Some(n),
        (None, Command::Geodesic(_)) => None,
        (None, _) => Some(1),
    };
    if let Some(n) = threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring the thread pool")?;
    }
    match cli.command {
        Command::Phantom(a) => commands::phantom(a),
        Command::Edt(a) => commands::transform(a, false),
        Command::Sdt(a) => commands::transform(a, true),
        Command::Geodesic(a) => commands::geodesic(a),
        Command::Fuse(a) => commands::fuse(a),
        Command::Quantize(a) => commands::quantize(a),
        Command::DecodeLandmarks(a) => commands::decode_landmarks(a),
        Command::ExtractSeq(a) => commands::extract_seq(a),
        Command::DecodeSeq(a) => commands::decode_seq(a),
        Command::PcaAugment(a) => commands::pca_augment(a),
        Command::Postprocess(a) => commands::postprocess(a),
        Command::EvalSeg(a) => commands::eval_seg(a),
        Command::EvalLandmarks(a) => commands::eval_landmarks(a),
        Command::Netspec(a) => commands::netspec(a),
    }
}

/// Writes `text` to `path`, or to stdout without one.
fn emit(text: &str, path: Option<&Path>) -> anyhow::Result<()> {
    match path {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

/// The error chain joined by ": ", skipping causes that their parent
/// already spells out.
fn message(err: &anyhow::Error) -> String {
    let mut out = String::new();
    for e in err.chain() {
        let text = e.to_string();
        if !out.ends_with(&text) {
            if !out.is_empty() {
                out.push_str(": ");
            }
            out.push_str(&text);
        }
    }
    out
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::new()
        .parse_filters(&cli.log_level)
        .format_timestamp(None)
        .init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", message(&e));
            ExitCode::from(exit_code(&e))
        }
    }
}
