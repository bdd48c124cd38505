//! `ltae` command line. Machine-readable JSON goes to stdout, diagnostics to
//! stderr. Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric or
//! divergence error.

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use crate::bench::rank3_recording;
use crate::checkpoint::{load_checkpoint, model_hash, save_checkpoint, FORMAT_VERSION};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::signal::{
    load_recording, normalize, read_meta, save_recording, synthesize, write_meta, Recording,
    RecordingMeta, SynthesisSpec, DEFAULT_SAMPLE_RATE_HZ,
};
use crate::trainer::{train_with_observer, TrainConfig, TrainedModel};
use crate::trajectory::{
    build_manifold, displacement, encode_sequence, kinematics, load_trajectory_csv, median_filter,
    save_trajectory_csv, separation, to_trajectory, window_samples, DisplacementMode,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

#[derive(Parser, Debug)]
#[command(
    name = "ltae",
    version,
    about = "Encode multichannel psychophysiological recordings into 3D latent trajectories"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic recording (CSV plus <name>.meta.json).
    Synth(SynthArgs),
    /// Train the autoencoder on one or more recordings (pooled end to end).
    Train(TrainArgs),
    /// Write the latent code of every frame of a recording.
    Encode(EncodeArgs),
    /// Project a task recording onto the resting manifold as a filtered 3D trajectory.
    Track(TrackArgs),
    /// Separation statistics between two trajectory files.
    Compare(CompareArgs),
    /// Print a checkpoint's network, final angles and convergence flag.
    Inspect(InspectArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Preset {
    Rest,
    Low,
    High,
    /// Noiseless linear mixture of three sources.
    Rank3,
}

#[derive(Args, Debug)]
struct SynthArgs {
    /// Synthesis spec (JSON).
    #[arg(long, conflicts_with = "preset", required_unless_present = "preset")]
    spec: Option<PathBuf>,
    /// Built-in 24-channel benchmark instead of a spec file.
    #[arg(long, value_enum)]
    preset: Option<Preset>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// Overrides the spec's duration (seconds).
    #[arg(long)]
    duration: Option<f64>,
    /// Overrides the spec's condition tag.
    #[arg(long)]
    condition: Option<String>,
    /// Overrides the spec's noise amplitude.
    #[arg(long)]
    noise: Option<f64>,
}

#[derive(Args, Debug)]
struct TrainArgs {
    /// Training recording(s); several are concatenated.
    #[arg(long, required = true, num_args = 1..)]
    data: Vec<PathBuf>,
    /// Training config (JSON); flags below override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    /// JSON-lines training log (default: <out>.log.jsonl).
    #[arg(long)]
    log: Option<PathBuf>,
    /// Sample rate when no sidecar metadata is present.
    #[arg(long)]
    rate: Option<f64>,
    #[arg(long)]
    max_epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    momentum: Option<f64>,
    #[arg(long)]
    penalty_weight: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    tolerance_deg: Option<f64>,
    #[arg(long)]
    latent_dim: Option<usize>,
    /// Skip the common-mode conditioning epoch.
    #[arg(long)]
    no_snr_floor: bool,
    /// Skip the per-epoch polar orthonormalization.
    #[arg(long)]
    no_orthonormalize: bool,
}

#[derive(Args, Debug)]
struct EncodeArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    rate: Option<f64>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum DisplacementArg {
    Centroid,
    NearestPoint,
}

#[derive(Args, Debug)]
struct TrackArgs {
    #[arg(long)]
    model: PathBuf,
    /// Resting-state recording defining the manifold.
    #[arg(long)]
    resting: PathBuf,
    #[arg(long)]
    task: PathBuf,
    /// Median filter window in milliseconds.
    #[arg(long, default_value_t = 100.0)]
    filter_ms: f64,
    #[arg(long)]
    out: PathBuf,
    /// Also write the xy/xz/yz projections as SVG.
    #[arg(long)]
    svg: Option<PathBuf>,
    /// Also write the trajectory with its metadata as JSON.
    #[arg(long)]
    json: Option<PathBuf>,
    /// Condition tag (default: the task's sidecar condition, else its file stem).
    #[arg(long)]
    tag: Option<String>,
    #[arg(long, value_enum, default_value = "centroid")]
    displacement: DisplacementArg,
    #[arg(long)]
    rate: Option<f64>,
}

#[derive(Args, Debug)]
struct CompareArgs {
    #[arg(long)]
    traj_a: PathBuf,
    #[arg(long)]
    traj_b: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Label for the first trajectory (default: its file stem).
    #[arg(long)]
    tag_a: Option<String>,
    #[arg(long)]
    tag_b: Option<String>,
}

#[derive(Args, Debug)]
struct InspectArgs {
    #[arg(long)]
    model: PathBuf,
}

/// Parses `argv` (including the program name), runs the subcommand and
/// returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let _ = write!(std::io::stderr(), "{}", e.render());
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
        }
    };
    let result = match cli.command {
        Command::Synth(a) => synth(a),
        Command::Train(a) => train_cmd(a),
        Command::Encode(a) => encode(a),
        Command::Track(a) => track(a),
        Command::Compare(a) => compare(a),
        Command::Inspect(a) => inspect(a),
    };
    match result {
        Ok(v) => {
            let mut out = std::io::stdout().lock();
            let _ = serde_json::to_writer_pretty(&mut out, &v);
            let _ = writeln!(out);
            EXIT_OK
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn exit_code(e: &Error) -> i32 {
    if e.is_numeric() {
        EXIT_NUMERIC
    } else {
        EXIT_DATA
    }
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

fn write_json(path: &Path, v: &impl serde::Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(v)?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Loads a recording using, in order of precedence, the explicit rate, the
/// sidecar's rate, then the default.
fn load_with_meta(path: &Path, rate: Option<f64>) -> Result<(Recording, Option<RecordingMeta>)> {
    let meta = read_meta(path)?;
    let rate = rate.or(meta.as_ref().map(|m| m.sample_rate_hz));
    Ok((load_recording(path, rate)?, meta))
}

fn file_stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

fn synth(a: SynthArgs) -> Result<Value> {
    let rec = match (a.preset, &a.spec) {
        (Some(Preset::Rank3), _) => rank3_recording(a.seed, a.duration.unwrap_or(60.0))?,
        (preset, spec_path) => {
            let mut spec = match (preset, spec_path) {
                (Some(p), _) => {
                    let condition = match p {
                        Preset::Low => "low",
                        Preset::High => "high",
                        _ => "rest",
                    };
                    SynthesisSpec::benchmark(condition, 60.0)
                }
                (None, Some(path)) => read_json(path)?,
                (None, None) => unreachable!("clap requires --spec or --preset"),
            };
            if let Some(d) = a.duration {
                spec.duration_s = d;
            }
            if let Some(c) = &a.condition {
                spec.condition = c.clone();
            }
            if let Some(n) = a.noise {
                spec.noise_amplitude = n;
            }
            synthesize(&spec, a.seed)?
        }
    };
    let condition = match a.preset {
        Some(Preset::Rank3) => a.condition.clone().unwrap_or_else(|| "rank3".into()),
        Some(Preset::Low) => a.condition.clone().unwrap_or_else(|| "low".into()),
        Some(Preset::High) => a.condition.clone().unwrap_or_else(|| "high".into()),
        Some(Preset::Rest) => a.condition.clone().unwrap_or_else(|| "rest".into()),
        None => match &a.spec {
            Some(p) => a
                .condition
                .clone()
                .unwrap_or(read_json::<SynthesisSpec>(p)?.condition),
            None => unreachable!(),
        },
    };
    save_recording(&rec, &a.out)?;
    let meta = RecordingMeta {
        sample_rate_hz: rec.sample_rate_hz(),
        condition: Some(condition.clone()),
    };
    write_meta(&a.out, &meta)?;
    Ok(json!({
        "out": a.out,
        "frames": rec.n_frames(),
        "channels": rec.n_channels(),
        "sample_rate_hz": rec.sample_rate_hz(),
        "condition": condition,
        "seed": a.seed,
    }))
}

fn train_cmd(a: TrainArgs) -> Result<Value> {
    let mut cfg: TrainConfig = match &a.config {
        Some(p) => read_json(p)?,
        None => TrainConfig::default(),
    };
    macro_rules! set {
        ($($field:ident),*) => {$( if let Some(v) = a.$field { cfg.$field = v; } )*};
    }
    set!(
        max_epochs,
        batch_size,
        lr,
        momentum,
        penalty_weight,
        seed,
        latent_dim
    );
    if let Some(t) = a.tolerance_deg {
        cfg.ortho.tolerance_deg = t;
    }
    if a.no_snr_floor {
        cfg.snr_floor_epoch = false;
    }
    if a.no_orthonormalize {
        cfg.ortho.orthonormalize_each_epoch = false;
    }

    let mut parts = Vec::with_capacity(a.data.len());
    for p in &a.data {
        parts.push(load_with_meta(p, a.rate)?.0);
    }
    let rec = Recording::concat(&parts)?;

    let log_path = a.log.clone().unwrap_or_else(|| {
        let mut s = a.out.clone().into_os_string();
        s.push(".log.jsonl");
        PathBuf::from(s)
    });
    let log_file = File::create(&log_path).map_err(|e| Error::io(&log_path, e))?;
    let mut log = BufWriter::new(log_file);
    let mut log_err = None;
    let result = train_with_observer(&rec, &cfg, |r| {
        eprintln!(
            "epoch {:>4}{} mse {:.4e} penalty {:.3e} max dev {:.4}° ({:.0} ms)",
            r.epoch,
            if r.curriculum { " (common-mode)" } else { "" },
            r.mse,
            r.penalty,
            r.max_deviation_deg,
            r.wall_ms
        );
        let line = serde_json::to_string(r).expect("record serializes");
        if let Err(e) = writeln!(log, "{line}") {
            log_err.get_or_insert(e);
        }
    });
    if let Some(e) = log_err {
        return Err(Error::io(&log_path, e));
    }
    log.flush().map_err(|e| Error::io(&log_path, e))?;
    let model = result?;

    if model.stats.has_degenerate() {
        eprintln!("warning: flat channels were normalized with std 1");
    }
    save_checkpoint(&model, &a.out)?;
    let last = model.history.last();
    Ok(json!({
        "checkpoint": a.out,
        "checkpoint_hash": model_hash(&model),
        "log": log_path,
        "converged": model.converged,
        "epochs": model.history.epochs.len(),
        "final_mse": last.map(|r| r.mse),
        "final_angles_deg": last.map(|r| r.angles_deg.clone()),
        "final_max_deviation_deg": last.map(|r| r.max_deviation_deg),
        "tolerance_deg": model.config.ortho.tolerance_deg,
        "degenerate_channels": degenerate_channels(&rec, &model),
    }))
}

fn degenerate_channels(rec: &Recording, model: &TrainedModel) -> Vec<String> {
    rec.channels()
        .iter()
        .zip(&model.stats.degenerate)
        .filter(|(_, &d)| d)
        .map(|(c, _)| c.name.clone())
        .collect()
}

fn encode(a: EncodeArgs) -> Result<Value> {
    let model = load_checkpoint(&a.model)?;
    let (rec, _) = load_with_meta(&a.data, a.rate)?;
    let latents = encode_sequence(&model, &normalize(&rec, &model.stats)?)?;
    write_latents(&latents, rec.sample_rate_hz(), &a.out)?;
    Ok(json!({
        "out": a.out,
        "frames": latents.rows(),
        "latent_dim": latents.cols(),
        "model_checkpoint_hash": model_hash(&model),
    }))
}

fn write_latents(z: &Matrix, rate: f64, path: &Path) -> Result<()> {
    let io = |e| Error::io(path, e);
    let mut out = BufWriter::new(File::create(path).map_err(io)?);
    let header: Vec<String> = std::iter::once("t_s".to_string())
        .chain((0..z.cols()).map(|i| format!("z{i}")))
        .collect();
    writeln!(out, "{}", header.join(",")).map_err(io)?;
    for (i, row) in z.row_iter().enumerate() {
        write!(out, "{}", i as f64 / rate).map_err(io)?;
        for v in row {
            write!(out, ",{v}").map_err(io)?;
        }
        writeln!(out).map_err(io)?;
    }
    out.flush().map_err(io)
}

fn track(a: TrackArgs) -> Result<Value> {
    let model = load_checkpoint(&a.model)?;
    let hash = model_hash(&model);
    let (rest, _) = load_with_meta(&a.resting, a.rate)?;
    let (task, task_meta) = load_with_meta(&a.task, a.rate)?;
    let tag = a
        .tag
        .clone()
        .or(task_meta.and_then(|m| m.condition))
        .unwrap_or_else(|| file_stem(&a.task));

    let rest_latents = encode_sequence(&model, &normalize(&rest, &model.stats)?)?;
    let manifold = build_manifold(&rest_latents)?;
    if manifold.rank_deficient {
        eprintln!("warning: resting manifold has fewer than 3 nonzero singular values");
    }
    let task_latents = encode_sequence(&model, &normalize(&task, &model.stats)?)?;
    let raw = to_trajectory(&task_latents, &manifold, task.sample_rate_hz(), &tag)?;
    let traj = median_filter(&raw, a.filter_ms)?;
    let mode = match a.displacement {
        DisplacementArg::Centroid => DisplacementMode::Centroid,
        DisplacementArg::NearestPoint => DisplacementMode::NearestPoint,
    };
    let disp = displacement(&traj, &manifold, mode)?;
    let kin = kinematics(&traj)?;
    save_trajectory_csv(&traj, Some(&disp), Some(&kin.speed), &a.out)?;

    let window = window_samples(a.filter_ms, traj.sample_rate_hz);
    let metadata = json!({
        "condition_tag": tag,
        "sample_rate_hz": traj.sample_rate_hz,
        "filter_window_ms": a.filter_ms,
        "filter_window_samples": window,
        "displacement_mode": mode,
        "model_checkpoint_hash": hash,
        "samples": traj.len(),
        "mean_displacement": disp.iter().sum::<f64>() / disp.len() as f64,
        "mean_speed": kin.speed.iter().sum::<f64>() / kin.speed.len() as f64,
        "manifold_singular_values": manifold.singular_values,
        "manifold_rank_deficient": manifold.rank_deficient,
        "out": a.out,
    });
    if let Some(path) = &a.json {
        let mut doc = metadata.clone();
        doc["coords"] = json!(traj
            .coords
            .row_iter()
            .map(|r| r.to_vec())
            .collect::<Vec<_>>());
        doc["displacement"] = json!(disp);
        doc["speed"] = json!(kin.speed);
        write_json(path, &doc)?;
    }
    if let Some(path) = &a.svg {
        let rest_raw = to_trajectory(&rest_latents, &manifold, rest.sample_rate_hz(), "rest")?;
        let rest_traj = median_filter(&rest_raw, a.filter_ms)?;
        let svg = crate::plot::render_svg(&[&rest_traj, &traj]);
        std::fs::write(path, svg).map_err(|e| Error::io(path, e))?;
    }
    Ok(metadata)
}

fn compare(a: CompareArgs) -> Result<Value> {
    let tag_a = a.tag_a.clone().unwrap_or_else(|| file_stem(&a.traj_a));
    let tag_b = a.tag_b.clone().unwrap_or_else(|| file_stem(&a.traj_b));
    let ta = load_trajectory_csv(&a.traj_a, &tag_a, DEFAULT_SAMPLE_RATE_HZ)?;
    let tb = load_trajectory_csv(&a.traj_b, &tag_b, DEFAULT_SAMPLE_RATE_HZ)?;
    let report = separation(&ta, &tb)?;
    write_json(&a.out, &report)?;
    Ok(serde_json::to_value(report)?)
}

fn inspect(a: InspectArgs) -> Result<Value> {
    let model = load_checkpoint(&a.model)?;
    let last = model.history.last();
    Ok(json!({
        "format_version": FORMAT_VERSION,
        "checkpoint_hash": model_hash(&model),
        "spec": model.spec,
        "parameters": model.spec.parameter_count(),
        "config": model.config,
        "converged": model.converged,
        "epochs": model.history.epochs.len(),
        "final": last.map(|r| json!({
            "epoch": r.epoch,
            "mse": r.mse,
            "penalty": r.penalty,
            "angles_deg": r.angles_deg,
            "max_deviation_deg": r.max_deviation_deg,
        })),
        "degenerate_channels": model.stats.degenerate.iter().filter(|&&d| d).count(),
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn command_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn numeric_errors_get_their_own_code() {
        let div = Error::Divergence {
            epoch: 3,
            loss: f64::INFINITY,
        };
        assert_eq!(exit_code(&div), EXIT_NUMERIC);
        assert_eq!(exit_code(&Error::Shape("x".into())), EXIT_DATA);
    }

    #[test]
    fn usage_errors_return_one() {
        assert_eq!(run(["ltae", "train"]), EXIT_USAGE);
        assert_eq!(run(["ltae", "nope"]), EXIT_USAGE);
        assert_eq!(run(["ltae", "--help"]), EXIT_OK);
    }
}
