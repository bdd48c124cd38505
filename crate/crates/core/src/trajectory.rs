//! Inference side: latent sequences, the resting-state manifold, 3D
//! trajectories, median filtering, displacement, kinematics and condition
//! separation.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{svd, Matrix};
use crate::nn::encode_batch;
use crate::trainer::TrainedModel;

pub const TRAJECTORY_DIM: usize = 3;
/// Short median window used to clean the encoder output.
pub const SHORT_WINDOW_MS: f64 = 100.0;
/// Long median window used to expose slow trajectories.
pub const LONG_WINDOW_MS: f64 = 6000.0;

/// Latent code of every frame of a normalized recording, in order.
pub fn encode_sequence(model: &TrainedModel, rec: &crate::signal::Recording) -> Result<Matrix> {
    if rec.n_channels() != model.spec.input_dim {
        return Err(Error::Shape(format!(
            "recording has {} channels, model expects {}",
            rec.n_channels(),
            model.spec.input_dim
        )));
    }
    let expected = model.stats.fingerprint();
    match rec.normalized_with() {
        Some(f) if f == expected => {}
        Some(_) => {
            return Err(Error::Contract(
                "recording was normalized with different stats than the model's".into(),
            ))
        }
        None => {
            return Err(Error::Contract(
                "recording must be normalized with the model's stats before encoding".into(),
            ))
        }
    }
    encode_batch(&model.spec, &model.weights, rec.frames())
}

/// Latent point cloud of resting data with its centroid and principal frame.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RestingManifold {
    pub points: Matrix,
    pub centroid: Vec<f64>,
    /// L × 3, orthonormal columns: top right singular vectors of the centered cloud.
    pub basis3: Matrix,
    pub singular_values: Vec<f64>,
    /// Fewer than three nonzero singular values; trailing basis columns are an
    /// arbitrary orthonormal completion.
    pub rank_deficient: bool,
}

pub fn build_manifold(latents: &Matrix) -> Result<RestingManifold> {
    if latents.rows() < 4 {
        return Err(Error::InsufficientData(format!(
            "manifold needs at least 4 points, got {}",
            latents.rows()
        )));
    }
    if latents.cols() < TRAJECTORY_DIM {
        return Err(Error::Shape(format!(
            "latent dimension {} is below {TRAJECTORY_DIM}",
            latents.cols()
        )));
    }
    let centroid = latents.column_means();
    let f = svd(&latents.centered())?;
    let basis3 = Matrix::from_fn(latents.cols(), TRAJECTORY_DIM, |r, c| f.v[(r, c)]);
    let smax = f.s[0];
    let rank_deficient = smax == 0.0 || f.s[TRAJECTORY_DIM - 1] <= smax * 1e-12;
    Ok(RestingManifold {
        points: latents.clone(),
        centroid,
        basis3,
        singular_values: f.s,
        rank_deficient,
    })
}

impl RestingManifold {
    /// The manifold's own points in its 3D frame.
    pub fn projected_points(&self) -> Matrix {
        project(&self.points, &self.centroid, &self.basis3)
    }
}

fn project(latents: &Matrix, centroid: &[f64], basis: &Matrix) -> Matrix {
    let mut centered = latents.clone();
    for r in 0..centered.rows() {
        for (v, c) in centered.row_mut(r).iter_mut().zip(centroid) {
            *v -= c;
        }
    }
    centered.matmul(basis)
}

/// Timestamped 3D coordinates in the resting manifold's frame.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub sample_rate_hz: f64,
    /// T × 3.
    pub coords: Matrix,
    pub condition_tag: String,
}

impl Trajectory {
    pub fn new(
        sample_rate_hz: f64,
        coords: Matrix,
        condition_tag: impl Into<String>,
    ) -> Result<Self> {
        if !(sample_rate_hz > 0.0 && sample_rate_hz.is_finite()) {
            return Err(Error::Parameter(format!(
                "sample rate must be positive, got {sample_rate_hz}"
            )));
        }
        if coords.cols() != TRAJECTORY_DIM {
            return Err(Error::Shape(format!(
                "trajectory needs {TRAJECTORY_DIM} columns, got {}",
                coords.cols()
            )));
        }
        if coords.rows() == 0 {
            return Err(Error::EmptyInput("trajectory has no samples".into()));
        }
        if !coords.is_finite() {
            return Err(Error::NonFinite("trajectory coordinates".into()));
        }
        Ok(Trajectory {
            sample_rate_hz,
            coords,
            condition_tag: condition_tag.into(),
        })
    }

    pub fn len(&self) -> usize {
        self.coords.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.rows() == 0
    }

    pub fn time_s(&self, i: usize) -> f64 {
        i as f64 / self.sample_rate_hz
    }
}

/// `(latents − centroid) · basis3`: always three coordinates, whatever L is.
pub fn to_trajectory(
    latents: &Matrix,
    manifold: &RestingManifold,
    rate: f64,
    tag: &str,
) -> Result<Trajectory> {
    if latents.cols() != manifold.basis3.rows() {
        return Err(Error::Shape(format!(
            "latents have {} dimensions, manifold has {}",
            latents.cols(),
            manifold.basis3.rows()
        )));
    }
    Trajectory::new(
        rate,
        project(latents, &manifold.centroid, &manifold.basis3),
        tag,
    )
}

/// Odd window length in samples for a duration in milliseconds.
pub fn window_samples(window_ms: f64, rate: f64) -> usize {
    let w = (window_ms / 1000.0 * rate).round().max(1.0) as usize;
    if w.is_multiple_of(2) {
        w + 1
    } else {
        w
    }
}

/// Centered sliding median per axis. Windows are truncated at the edges
/// (even-sized edge windows take the mean of the two middle values).
pub fn median_filter(traj: &Trajectory, window_ms: f64) -> Result<Trajectory> {
    if !(window_ms > 0.0 && window_ms.is_finite()) {
        return Err(Error::Parameter(format!(
            "window must be positive, got {window_ms} ms"
        )));
    }
    median_filter_samples(traj, window_samples(window_ms, traj.sample_rate_hz))
}

pub fn median_filter_samples(traj: &Trajectory, window: usize) -> Result<Trajectory> {
    if window == 0 || window.is_multiple_of(2) {
        return Err(Error::Parameter(format!(
            "window must be a positive odd sample count, got {window}"
        )));
    }
    if window > 10 * traj.len() {
        return Err(Error::Parameter(format!(
            "window of {window} samples exceeds ten times the trajectory length {}",
            traj.len()
        )));
    }
    let mut out = traj.coords.clone();
    for axis in 0..TRAJECTORY_DIM {
        let filtered = sliding_median(&traj.coords.column(axis), window / 2);
        for (r, v) in filtered.into_iter().enumerate() {
            out[(r, axis)] = v;
        }
    }
    Trajectory::new(traj.sample_rate_hz, out, traj.condition_tag.clone())
}

/// Median of `x[i−half ..= i+half] ∩ [0, n)` for every `i`, using a sorted
/// window that is updated incrementally.
fn sliding_median(x: &[f64], half: usize) -> Vec<f64> {
    let n = x.len();
    let mut sorted: Vec<f64> = Vec::with_capacity(2 * half + 1);
    for &v in &x[..(half + 1).min(n)] {
        insert_sorted(&mut sorted, v);
    }
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        if i > 0 {
            if i + half < n {
                insert_sorted(&mut sorted, x[i + half]);
            }
            if i > half {
                remove_sorted(&mut sorted, x[i - half - 1]);
            }
        }
        out.push(median_of_sorted(&sorted));
    }
    out
}

fn insert_sorted(v: &mut Vec<f64>, x: f64) {
    let at = v.partition_point(|y| y.total_cmp(&x).is_lt());
    v.insert(at, x);
}

fn remove_sorted(v: &mut Vec<f64>, x: f64) {
    let at = v.partition_point(|y| y.total_cmp(&x).is_lt());
    debug_assert!(v[at].to_bits() == x.to_bits());
    v.remove(at);
}

pub(crate) fn median_of_sorted(v: &[f64]) -> f64 {
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DisplacementMode {
    /// Distance to the manifold centroid (the frame origin).
    #[default]
    Centroid,
    /// Distance to the nearest manifold point in the 3D frame.
    NearestPoint,
}

pub fn displacement(
    traj: &Trajectory,
    manifold: &RestingManifold,
    mode: DisplacementMode,
) -> Result<Vec<f64>> {
    match mode {
        DisplacementMode::Centroid => Ok(traj.coords.row_iter().map(norm3).collect()),
        DisplacementMode::NearestPoint => {
            if manifold.points.rows() == 0 {
                return Err(Error::EmptyInput("manifold has no points".into()));
            }
            let pts = manifold.projected_points();
            Ok(traj
                .coords
                .row_iter()
                .map(|c| {
                    pts.row_iter()
                        .map(|p| {
                            (0..TRAJECTORY_DIM)
                                .map(|k| (c[k] - p[k]) * (c[k] - p[k]))
                                .sum::<f64>()
                        })
                        .fold(f64::INFINITY, f64::min)
                        .sqrt()
                })
                .collect())
        }
    }
}

fn norm3(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Kinematics {
    /// T × 3, latent units per second.
    pub velocity: Matrix,
    /// T × 3, latent units per second².
    pub acceleration: Matrix,
    pub speed: Vec<f64>,
}

/// Central differences in the interior, one-sided at both ends; acceleration
/// differentiates the velocity the same way.
pub fn kinematics(traj: &Trajectory) -> Result<Kinematics> {
    if traj.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "kinematics needs at least 3 samples, got {}",
            traj.len()
        )));
    }
    let velocity = differentiate(&traj.coords, traj.sample_rate_hz);
    let acceleration = differentiate(&velocity, traj.sample_rate_hz);
    let speed = velocity.row_iter().map(norm3).collect();
    Ok(Kinematics {
        velocity,
        acceleration,
        speed,
    })
}

fn differentiate(x: &Matrix, rate: f64) -> Matrix {
    let n = x.rows();
    Matrix::from_fn(n, x.cols(), |r, c| match r {
        0 => (x[(1, c)] - x[(0, c)]) * rate,
        r if r == n - 1 => (x[(r, c)] - x[(r - 1, c)]) * rate,
        r => (x[(r + 1, c)] - x[(r - 1, c)]) * rate / 2.0,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeparationReport {
    pub condition_a: String,
    pub condition_b: String,
    pub centroid_distance: f64,
    /// Mean distance of A's samples to A's centroid.
    pub spread_a: f64,
    pub spread_b: f64,
    /// Sample-weighted mean of the two spreads.
    pub pooled_spread: f64,
    pub separation_ratio: f64,
}

pub fn separation(a: &Trajectory, b: &Trajectory) -> Result<SeparationReport> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptyInput(
            "separation needs two nonempty trajectories".into(),
        ));
    }
    let ca = a.coords.column_means();
    let cb = b.coords.column_means();
    let spread = |t: &Trajectory, c: &[f64]| {
        t.coords
            .row_iter()
            .map(|r| {
                r.iter()
                    .zip(c)
                    .map(|(x, m)| (x - m) * (x - m))
                    .sum::<f64>()
                    .sqrt()
            })
            .sum::<f64>()
            / t.len() as f64
    };
    let spread_a = spread(a, &ca);
    let spread_b = spread(b, &cb);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let pooled_spread = (na * spread_a + nb * spread_b) / (na + nb);
    if pooled_spread <= 1e-12 {
        return Err(Error::DegenerateDistribution(format!(
            "pooled spread {pooled_spread:e} is zero"
        )));
    }
    let centroid_distance = ca
        .iter()
        .zip(&cb)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt();
    Ok(SeparationReport {
        condition_a: a.condition_tag.clone(),
        condition_b: b.condition_tag.clone(),
        centroid_distance,
        spread_a,
        spread_b,
        pooled_spread,
        separation_ratio: centroid_distance / pooled_spread,
    })
}

/// Writes `t_s,x,y,z` plus optional `displacement` and `speed` columns.
pub fn save_trajectory_csv(
    traj: &Trajectory,
    displacement: Option<&[f64]>,
    speed: Option<&[f64]>,
    path: &Path,
) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    write_trajectory_csv(traj, displacement, speed, &mut out).map_err(|e| Error::io(path, e))?;
    out.flush().map_err(|e| Error::io(path, e))
}

pub fn write_trajectory_csv(
    traj: &Trajectory,
    displacement: Option<&[f64]>,
    speed: Option<&[f64]>,
    out: &mut impl Write,
) -> std::io::Result<()> {
    let mut header = String::from("t_s,x,y,z");
    if displacement.is_some() {
        header.push_str(",displacement");
    }
    if speed.is_some() {
        header.push_str(",speed");
    }
    writeln!(out, "{header}")?;
    for (i, row) in traj.coords.row_iter().enumerate() {
        write!(out, "{},{},{},{}", traj.time_s(i), row[0], row[1], row[2])?;
        if let Some(d) = displacement {
            write!(out, ",{}", d[i])?;
        }
        if let Some(s) = speed {
            write!(out, ",{}", s[i])?;
        }
        writeln!(out)?;
    }
    Ok(())
}

/// Reads a trajectory CSV written by [`save_trajectory_csv`]. The sample rate
/// is recovered from the time column (one sample → `fallback_rate`).
pub fn load_trajectory_csv(path: &Path, tag: &str, fallback_rate: f64) -> Result<Trajectory> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(file);
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| parse_error(0, None, e.to_string()))?
        .iter()
        .map(str::to_string)
        .collect();
    let col = |name: &str| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| parse_error(0, Some(name), "missing column".into()))
    };
    let idx = [col("t_s")?, col("x")?, col("y")?, col("z")?];
    let mut times = Vec::new();
    let mut coords = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 1;
        let rec = rec.map_err(|e| parse_error(row, None, e.to_string()))?;
        for (k, &c) in idx.iter().enumerate() {
            let cell = rec.get(c).unwrap_or("");
            let v: f64 = cell
                .parse()
                .ok()
                .filter(|v: &f64| v.is_finite())
                .ok_or_else(|| {
                    parse_error(row, Some(&header[c]), format!("bad number {cell:?}"))
                })?;
            if k == 0 {
                times.push(v);
            } else {
                coords.push(v);
            }
        }
    }
    if times.is_empty() {
        return Err(Error::EmptyInput(format!(
            "{} has no samples",
            path.display()
        )));
    }
    let rate = if times.len() > 1 {
        let span = times[times.len() - 1] - times[0];
        if span <= 0.0 {
            return Err(parse_error(
                times.len(),
                Some("t_s"),
                "time does not increase".into(),
            ));
        }
        (times.len() - 1) as f64 / span
    } else {
        fallback_rate
    };
    Trajectory::new(
        rate,
        Matrix::from_vec(times.len(), TRAJECTORY_DIM, coords)?,
        tag,
    )
}

fn parse_error(row: usize, column: Option<&str>, message: String) -> Error {
    Error::Parse {
        row,
        column: column.map(str::to_string),
        message,
    }
}
