//! Angular orthogonality penalty on the latent code, its gradient, the
//! per-epoch polar orthonormalization of the latent layer and the
//! convergence test.
//!
//! The penalty acts on the mean-centered latent columns `a_i` of a batch:
//!
//! ```text
//! P = Σ_{i<j} cos²θ_ij,   cos θ_ij = a_i·a_j / (‖a_i‖ ‖a_j‖)
//! ```
//!
//! so it vanishes exactly when every pair of latent dimensions is
//! uncorrelated, i.e. at 90° to each other.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{pairwise_angles, polar_orthonormalize, Matrix};
use crate::nn::{LatentPenalty, NetworkSpec, Weights};

pub const DEFAULT_TOLERANCE_DEG: f64 = 0.3;
/// The stricter tolerance quoted for the end of training.
pub const STRICT_TOLERANCE_DEG: f64 = 0.15;
const MIN_COLUMN_NORM: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnglePenaltyReport {
    pub penalty: f64,
    /// Angle of every latent column pair `(i, j)`, `i < j`, in degrees.
    pub angles_deg: Vec<f64>,
    /// `max |θ − 90°|` over all pairs.
    pub max_deviation_deg: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OrthoConfig {
    pub tolerance_deg: f64,
    pub orthonormalize_each_epoch: bool,
}

impl Default for OrthoConfig {
    fn default() -> Self {
        OrthoConfig {
            tolerance_deg: DEFAULT_TOLERANCE_DEG,
            orthonormalize_each_epoch: true,
        }
    }
}

impl OrthoConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance_deg > 0.0 && self.tolerance_deg.is_finite()) {
            return Err(Error::Parameter(format!(
                "orthogonality tolerance must be positive, got {}",
                self.tolerance_deg
            )));
        }
        Ok(())
    }
}

struct Centered {
    cols: Vec<Vec<f64>>,
    norms: Vec<f64>,
}

fn center(z: &Matrix) -> Result<Centered> {
    if z.rows() < 2 {
        return Err(Error::InsufficientData(format!(
            "angular penalty needs at least 2 latent rows, got {}",
            z.rows()
        )));
    }
    let c = z.centered();
    let cols: Vec<Vec<f64>> = (0..c.cols()).map(|j| c.column(j)).collect();
    let norms: Vec<f64> = cols
        .iter()
        .map(|v| v.iter().map(|x| x * x).sum::<f64>().sqrt())
        .collect();
    if let Some(j) = norms.iter().position(|&n| n <= MIN_COLUMN_NORM) {
        return Err(Error::DegenerateLatent(j));
    }
    Ok(Centered { cols, norms })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn angular_penalty(z: &Matrix) -> Result<AnglePenaltyReport> {
    let c = center(z)?;
    let l = c.cols.len();
    let mut penalty = 0.0;
    for i in 0..l {
        for j in i + 1..l {
            let cos = dot(&c.cols[i], &c.cols[j]) / (c.norms[i] * c.norms[j]);
            penalty += cos * cos;
        }
    }
    let angles_deg = pairwise_angles(&Matrix::from_columns(&c.cols)?)?;
    let max_deviation_deg = angles_deg
        .iter()
        .map(|a| (a - 90.0).abs())
        .fold(0.0, f64::max);
    Ok(AnglePenaltyReport {
        penalty,
        angles_deg,
        max_deviation_deg,
    })
}

/// `∂P/∂Z`, including the effect of the column centering.
pub fn angular_penalty_gradient(z: &Matrix) -> Result<Matrix> {
    penalty_and_gradient(z).map(|(_, g)| g)
}

fn penalty_and_gradient(z: &Matrix) -> Result<(f64, Matrix)> {
    let c = center(z)?;
    let (n, l) = z.shape();
    let mut grad_cols = vec![vec![0.0; n]; l];
    let mut penalty = 0.0;
    for i in 0..l {
        for j in i + 1..l {
            let (a, b) = (&c.cols[i], &c.cols[j]);
            let (na, nb) = (c.norms[i], c.norms[j]);
            let cos = dot(a, b) / (na * nb);
            penalty += cos * cos;
            // d cos/da = b/(|a||b|) − cos·a/|a|², symmetric in b.
            let k = 2.0 * cos;
            for r in 0..n {
                grad_cols[i][r] += k * (b[r] / (na * nb) - cos * a[r] / (na * na));
                grad_cols[j][r] += k * (a[r] / (na * nb) - cos * b[r] / (nb * nb));
            }
        }
    }
    // Chain through the centering projection I − 11ᵀ/n.
    for g in &mut grad_cols {
        let mean = g.iter().sum::<f64>() / n as f64;
        g.iter_mut().for_each(|x| *x -= mean);
    }
    Ok((penalty, Matrix::from_columns(&grad_cols)?))
}

/// [`LatentPenalty`] adapter for the angular penalty.
#[derive(Clone, Copy, Debug, Default)]
pub struct AngularPenalty;

impl LatentPenalty for AngularPenalty {
    fn value(&self, latents: &Matrix) -> Result<f64> {
        angular_penalty(latents).map(|r| r.penalty)
    }

    fn value_and_gradient(&self, latents: &Matrix) -> Result<(f64, Matrix)> {
        penalty_and_gradient(latents)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum OrthoStep {
    Applied,
    /// The latent layer had (numerically) dependent rows and was left as is.
    SkippedRankDeficient {
        smallest_singular_value: f64,
    },
}

/// Replaces the weight matrix of the layer producing the latent code by the
/// nearest matrix with orthonormal rows. Biases and other layers are untouched.
pub fn epoch_orthonormalize(w: &mut Weights, spec: &NetworkSpec) -> Result<OrthoStep> {
    w.check_shape(spec)?;
    let layer = &mut w.layers[spec.latent_layer];
    match polar_orthonormalize(&layer.weight.transpose()) {
        Ok(q) => {
            layer.weight = q.transpose();
            Ok(OrthoStep::Applied)
        }
        Err(Error::RankDeficient { smallest }) => Ok(OrthoStep::SkippedRankDeficient {
            smallest_singular_value: smallest,
        }),
        Err(e) => Err(e),
    }
}

/// True iff every latent pair is within the configured tolerance of 90°.
pub fn check_convergence(report: &AnglePenaltyReport, cfg: &OrthoConfig) -> bool {
    report.max_deviation_deg <= cfg.tolerance_deg
}
