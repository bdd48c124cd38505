//! C ABI for the `ltae` pipeline.
//!
//! Every fallible function returns an [`LtaeStatus`]; on failure a
//! human-readable message is available from [`ltae_last_error_message`] on
//! the same thread. Handles are opaque and owned by the caller, who releases
//! them with the matching `*_free` function. Trajectory buffers are `n × 3`
//! row-major arrays of doubles.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use ltae::checkpoint::{load_checkpoint, model_hash, save_checkpoint};
use ltae::linalg::{pairwise_angles, Matrix};
use ltae::signal::{default_channels, load_recording, normalize, read_meta, ChannelId, Recording};
use ltae::trainer::{train, TrainConfig, TrainedModel};
use ltae::trajectory::{
    encode_sequence, kinematics, median_filter_samples, separation, Trajectory, TRAJECTORY_DIM,
};
use ltae::Error;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LtaeStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullPointer = 1,
    /// An argument was out of range, a string was not UTF-8, or an output
    /// buffer was too small.
    InvalidArgument = 2,
    Io = 3,
    /// Malformed CSV or JSON, or an ill-formed recording.
    Parse = 4,
    /// Dimensions disagree or there are too few samples.
    Shape = 5,
    /// Non-finite values, rank loss or degenerate geometry.
    Numeric = 6,
    Divergence = 7,
    /// Corrupt checkpoint or incompatible format version.
    Checkpoint = 8,
    /// An internal panic was caught at the boundary.
    Panic = 9,
}

/// Separation statistics between two trajectories.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default)]
pub struct LtaeSeparation {
    pub centroid_distance: f64,
    pub spread_a: f64,
    pub spread_b: f64,
    pub pooled_spread: f64,
    pub separation_ratio: f64,
}

/// A trained model with its normalization statistics.
pub struct LtaeModel {
    inner: TrainedModel,
}

/// A multichannel recording.
pub struct LtaeRecording {
    inner: Recording,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior NULs removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

struct Failure(LtaeStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::Io { .. } => LtaeStatus::Io,
            Error::Parse { .. }
            | Error::Json(_)
            | Error::EmptyInput(_)
            | Error::InvalidRecording(_)
            | Error::MissingReferenceChannel(_) => LtaeStatus::Parse,
            Error::Shape(_) | Error::InsufficientData(_) | Error::Contract(_) => LtaeStatus::Shape,
            Error::Parameter(_) => LtaeStatus::InvalidArgument,
            Error::NonFinite(_)
            | Error::RankDeficient { .. }
            | Error::DegenerateVector(_)
            | Error::DegenerateLatent(_)
            | Error::DegenerateDistribution(_) => LtaeStatus::Numeric,
            Error::Divergence { .. } => LtaeStatus::Divergence,
            Error::IncompatibleCheckpoint { .. } | Error::Integrity(_) => LtaeStatus::Checkpoint,
        };
        Failure(status, e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(LtaeStatus::NullPointer, format!("{what} is null"))
}

fn invalid(msg: impl Into<String>) -> Failure {
    Failure(LtaeStatus::InvalidArgument, msg.into())
}

/// Runs `f`, converting errors and panics into a status plus thread-local message.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> LtaeStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            LtaeStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_last_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(format!("internal panic: {msg}"));
            LtaeStatus::Panic
        }
    }
}

unsafe fn path_arg(p: *const c_char, what: &str) -> Result<PathBuf, Failure> {
    Ok(PathBuf::from(str_arg(p, what)?))
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| invalid(format!("{what} is not valid UTF-8")))
}

unsafe fn in_slice<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn out_slice<'a>(p: *mut f64, len: usize, what: &str) -> Result<&'a mut [f64], Failure> {
    if len == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts_mut(p, len))
}

unsafe fn trajectory_arg(
    p: *const f64,
    n: usize,
    rate: f64,
    what: &str,
) -> Result<Trajectory, Failure> {
    let len = n
        .checked_mul(TRAJECTORY_DIM)
        .ok_or_else(|| invalid(format!("{what}: length overflows")))?;
    let data = in_slice(p, len, what)?.to_vec();
    let coords = Matrix::from_vec(n, TRAJECTORY_DIM, data)?;
    Ok(Trajectory::new(rate, coords, what)?)
}

unsafe fn write_out<T>(out: *mut T, value: T, what: &str) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null(what));
    }
    out.write(value);
    Ok(())
}

/// Message describing the most recent failure on the calling thread, or NULL
/// after a successful call. The pointer stays valid until the next `ltae_*`
/// call on the same thread.
#[no_mangle]
pub extern "C" fn ltae_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ltae_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Loads a CSV recording. `sample_rate_hz <= 0` takes the rate from the
/// `<name>.meta.json` sidecar, falling back to 300 Hz.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ltae_recording_load(
    path: *const c_char,
    sample_rate_hz: f64,
    out: *mut *mut LtaeRecording,
) -> LtaeStatus {
    guard(|| {
        let path = path_arg(path, "path")?;
        let rate = if sample_rate_hz > 0.0 {
            Some(sample_rate_hz)
        } else {
            read_meta(&path)?.map(|m| m.sample_rate_hz)
        };
        let rec = load_recording(&path, rate)?;
        write_out(
            out,
            Box::into_raw(Box::new(LtaeRecording { inner: rec })),
            "out",
        )
    })
}

/// Builds a recording from `n_frames × n_channels` row-major samples.
/// `channel_names` may be NULL when `n_channels` is 24, selecting the
/// default montage.
///
/// # Safety
/// `frames` must hold `n_frames * n_channels` doubles; `channel_names`, if
/// non-NULL, must hold `n_channels` NUL-terminated strings.
#[no_mangle]
pub unsafe extern "C" fn ltae_recording_from_frames(
    frames: *const f64,
    n_frames: usize,
    n_channels: usize,
    channel_names: *const *const c_char,
    sample_rate_hz: f64,
    out: *mut *mut LtaeRecording,
) -> LtaeStatus {
    guard(|| {
        let channels = if channel_names.is_null() {
            let d = default_channels();
            if d.len() != n_channels {
                return Err(invalid(format!(
                    "channel_names is NULL but n_channels is {n_channels}, not {}",
                    d.len()
                )));
            }
            d
        } else {
            (0..n_channels)
                .map(|i| str_arg(*channel_names.add(i), "channel name").map(ChannelId::infer))
                .collect::<Result<_, _>>()?
        };
        let len = n_frames
            .checked_mul(n_channels)
            .ok_or_else(|| invalid("frame count overflows"))?;
        let data = in_slice(frames, len, "frames")?.to_vec();
        let m = Matrix::from_vec(n_frames, n_channels, data)?;
        let rec = Recording::new(sample_rate_hz, channels, m)?;
        write_out(
            out,
            Box::into_raw(Box::new(LtaeRecording { inner: rec })),
            "out",
        )
    })
}

/// # Safety
/// `rec` must be NULL or a handle from this library that was not freed yet.
#[no_mangle]
pub unsafe extern "C" fn ltae_recording_free(rec: *mut LtaeRecording) {
    if !rec.is_null() {
        drop(Box::from_raw(rec));
    }
}

/// # Safety
/// `rec` must be a live handle; the outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn ltae_recording_dims(
    rec: *const LtaeRecording,
    n_frames: *mut usize,
    n_channels: *mut usize,
) -> LtaeStatus {
    guard(|| {
        let rec = &rec.as_ref().ok_or_else(|| null("rec"))?.inner;
        write_out(n_frames, rec.n_frames(), "n_frames")?;
        write_out(n_channels, rec.n_channels(), "n_channels")
    })
}

/// Loads a checkpoint file.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ltae_model_load(
    path: *const c_char,
    out: *mut *mut LtaeModel,
) -> LtaeStatus {
    guard(|| {
        let model = load_checkpoint(&path_arg(path, "path")?)?;
        write_out(
            out,
            Box::into_raw(Box::new(LtaeModel { inner: model })),
            "out",
        )
    })
}

/// Trains a model on `rec`. `config_json` may be NULL for defaults; fields
/// omitted from it keep their default values.
///
/// # Safety
/// `rec` must be a live handle; `config_json` NULL or NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn ltae_model_train(
    rec: *const LtaeRecording,
    config_json: *const c_char,
    out: *mut *mut LtaeModel,
) -> LtaeStatus {
    guard(|| {
        let rec = &rec.as_ref().ok_or_else(|| null("rec"))?.inner;
        let cfg: TrainConfig = if config_json.is_null() {
            TrainConfig::default()
        } else {
            serde_json::from_str(str_arg(config_json, "config_json")?).map_err(Error::from)?
        };
        let model = train(rec, &cfg)?;
        write_out(
            out,
            Box::into_raw(Box::new(LtaeModel { inner: model })),
            "out",
        )
    })
}

/// # Safety
/// `model` must be a live handle; `path` NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn ltae_model_save(
    model: *const LtaeModel,
    path: *const c_char,
) -> LtaeStatus {
    guard(|| {
        let model = &model.as_ref().ok_or_else(|| null("model"))?.inner;
        Ok(save_checkpoint(model, &path_arg(path, "path")?)?)
    })
}

/// # Safety
/// `model` must be NULL or a handle from this library that was not freed yet.
#[no_mangle]
pub unsafe extern "C" fn ltae_model_free(model: *mut LtaeModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// # Safety
/// `model` must be a live handle; the outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn ltae_model_dims(
    model: *const LtaeModel,
    input_dim: *mut usize,
    latent_dim: *mut usize,
) -> LtaeStatus {
    guard(|| {
        let m = &model.as_ref().ok_or_else(|| null("model"))?.inner;
        write_out(input_dim, m.spec.input_dim, "input_dim")?;
        write_out(latent_dim, m.spec.latent_dim, "latent_dim")
    })
}

/// Whether training met the angular tolerance.
///
/// # Safety
/// `model` must be a live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ltae_model_converged(
    model: *const LtaeModel,
    out: *mut bool,
) -> LtaeStatus {
    guard(|| {
        let m = &model.as_ref().ok_or_else(|| null("model"))?.inner;
        write_out(out, m.converged, "out")
    })
}

/// Writes the 64-character hex content hash plus a NUL terminator; `buf_len`
/// must be at least 65.
///
/// # Safety
/// `model` must be a live handle; `buf` must hold `buf_len` bytes.
#[no_mangle]
pub unsafe extern "C" fn ltae_model_hash(
    model: *const LtaeModel,
    buf: *mut c_char,
    buf_len: usize,
) -> LtaeStatus {
    guard(|| {
        let m = &model.as_ref().ok_or_else(|| null("model"))?.inner;
        if buf.is_null() {
            return Err(null("buf"));
        }
        let hash = model_hash(m);
        if buf_len <= hash.len() {
            return Err(invalid(format!(
                "buf_len must be at least {}",
                hash.len() + 1
            )));
        }
        ptr::copy_nonoverlapping(hash.as_ptr().cast::<c_char>(), buf, hash.len());
        *buf.add(hash.len()) = 0;
        Ok(())
    })
}

/// Normalizes `rec` with the model's statistics and writes the
/// `n_frames × latent_dim` latent codes row-major into `out`.
///
/// # Safety
/// Handles must be live; `out` must hold `out_len` doubles.
#[no_mangle]
pub unsafe extern "C" fn ltae_model_encode(
    model: *const LtaeModel,
    rec: *const LtaeRecording,
    out: *mut f64,
    out_len: usize,
) -> LtaeStatus {
    guard(|| {
        let m = &model.as_ref().ok_or_else(|| null("model"))?.inner;
        let rec = &rec.as_ref().ok_or_else(|| null("rec"))?.inner;
        let need = rec.n_frames() * m.spec.latent_dim;
        if out_len < need {
            return Err(invalid(format!("out_len {out_len} < required {need}")));
        }
        let z = encode_sequence(m, &normalize(rec, &m.stats)?)?;
        out_slice(out, need, "out")?.copy_from_slice(z.as_slice());
        Ok(())
    })
}

/// Centered per-axis running median of an `n × 3` trajectory. `window` is
/// an odd sample count no larger than `10 * n`.
///
/// # Safety
/// `coords` and `out` must each hold `3 * n` doubles.
#[no_mangle]
pub unsafe extern "C" fn ltae_median_filter(
    coords: *const f64,
    n: usize,
    window: usize,
    out: *mut f64,
) -> LtaeStatus {
    guard(|| {
        let t = trajectory_arg(coords, n, 1.0, "coords")?;
        let f = median_filter_samples(&t, window)?;
        out_slice(out, n * TRAJECTORY_DIM, "out")?.copy_from_slice(f.coords.as_slice());
        Ok(())
    })
}

/// Finite-difference velocity, acceleration (`n × 3` each) and speed
/// (`n`) of a trajectory sampled at `sample_rate_hz`. Any output may be NULL
/// to skip it. Requires `n >= 3`.
///
/// # Safety
/// `coords` must hold `3 * n` doubles; non-NULL outputs must be sized as above.
#[no_mangle]
pub unsafe extern "C" fn ltae_kinematics(
    coords: *const f64,
    n: usize,
    sample_rate_hz: f64,
    velocity: *mut f64,
    acceleration: *mut f64,
    speed: *mut f64,
) -> LtaeStatus {
    guard(|| {
        let t = trajectory_arg(coords, n, sample_rate_hz, "coords")?;
        let k = kinematics(&t)?;
        if !velocity.is_null() {
            out_slice(velocity, 3 * n, "velocity")?.copy_from_slice(k.velocity.as_slice());
        }
        if !acceleration.is_null() {
            out_slice(acceleration, 3 * n, "acceleration")?
                .copy_from_slice(k.acceleration.as_slice());
        }
        if !speed.is_null() {
            out_slice(speed, n, "speed")?.copy_from_slice(&k.speed);
        }
        Ok(())
    })
}

/// Centroid distance over pooled spread between two trajectories.
///
/// # Safety
/// `a` and `b` must hold `3 * n_a` and `3 * n_b` doubles; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ltae_separation(
    a: *const f64,
    n_a: usize,
    b: *const f64,
    n_b: usize,
    out: *mut LtaeSeparation,
) -> LtaeStatus {
    guard(|| {
        let ta = trajectory_arg(a, n_a, 1.0, "a")?;
        let tb = trajectory_arg(b, n_b, 1.0, "b")?;
        let r = separation(&ta, &tb)?;
        let report = LtaeSeparation {
            centroid_distance: r.centroid_distance,
            spread_a: r.spread_a,
            spread_b: r.spread_b,
            pooled_spread: r.pooled_spread,
            separation_ratio: r.separation_ratio,
        };
        write_out(out, report, "out")
    })
}

/// Angles in degrees between every pair of columns of a row-major
/// `rows × cols` matrix, in lexicographic pair order; `out` receives
/// `cols * (cols - 1) / 2` values.
///
/// # Safety
/// `data` must hold `rows * cols` doubles and `out` the number above.
#[no_mangle]
pub unsafe extern "C" fn ltae_pairwise_angles(
    data: *const f64,
    rows: usize,
    cols: usize,
    out: *mut f64,
) -> LtaeStatus {
    guard(|| {
        let len = rows
            .checked_mul(cols)
            .ok_or_else(|| invalid("matrix size overflows"))?;
        let m = Matrix::from_vec(rows, cols, in_slice(data, len, "data")?.to_vec())?;
        let angles = pairwise_angles(&m)?;
        out_slice(out, angles.len(), "out")?.copy_from_slice(&angles);
        Ok(())
    })
}
