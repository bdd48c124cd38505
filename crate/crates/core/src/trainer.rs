//! Training loop: common-mode curriculum, minibatch momentum SGD on
//! `MSE + λ·P`, per-epoch orthonormalization of the latent layer and
//! angle-based early stopping.

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::nn::{
    encode_and_score, gradients, init_weights, sgd_step, LatentPenalty, NetworkSpec, Velocity,
    Weights, DEFAULT_LATENT_DIM,
};
use crate::ortho::{
    angular_penalty, check_convergence, epoch_orthonormalize, AnglePenaltyReport, AngularPenalty,
    OrthoConfig, OrthoStep,
};
use crate::signal::{common_mode_pattern, compute_stats, normalize, NormalizationStats, Recording};

/// Loss above which training is declared divergent.
pub const DIVERGENCE_LOSS: f64 = 1e6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub max_epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub momentum: f64,
    /// Weight λ of the angular penalty.
    pub penalty_weight: f64,
    pub ortho: OrthoConfig,
    pub seed: u64,
    /// Replace the first epoch by the common-mode reference pattern.
    pub snr_floor_epoch: bool,
    pub latent_dim: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            max_epochs: 200,
            batch_size: 64,
            lr: 1e-3,
            momentum: 0.9,
            penalty_weight: 1.0,
            ortho: OrthoConfig::default(),
            seed: 0,
            snr_floor_epoch: true,
            latent_dim: DEFAULT_LATENT_DIM,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Parameter(m));
        if self.max_epochs == 0 {
            return bad("max_epochs must be positive".into());
        }
        if self.batch_size == 0 {
            return bad("batch_size must be positive".into());
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return bad(format!("lr must be positive, got {}", self.lr));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return bad(format!(
                "momentum must lie in [0, 1), got {}",
                self.momentum
            ));
        }
        if !(self.penalty_weight >= 0.0 && self.penalty_weight.is_finite()) {
            return bad(format!(
                "penalty_weight must be nonnegative, got {}",
                self.penalty_weight
            ));
        }
        if self.latent_dim == 0 {
            return bad("latent_dim must be positive".into());
        }
        self.ortho.validate()
    }
}

/// One completed epoch.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Whether this epoch ran on the common-mode pattern instead of real data.
    pub curriculum: bool,
    /// Reconstruction MSE over the full (real) training set after the epoch.
    pub mse: f64,
    /// Angular penalty of the full training set's latent codes after the epoch.
    pub penalty: f64,
    pub angles_deg: Vec<f64>,
    pub max_deviation_deg: f64,
    pub orthonormalized: bool,
    /// Minibatches whose latent codes were degenerate, trained on MSE alone.
    pub penalty_skipped_batches: usize,
    /// Not serialized; checkpoints and logs carry only reproducible content.
    #[serde(skip)]
    pub wall_ms: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub epochs: Vec<EpochRecord>,
}

impl TrainHistory {
    pub fn last(&self) -> Option<&EpochRecord> {
        self.epochs.last()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainedModel {
    pub spec: NetworkSpec,
    pub weights: Weights,
    pub stats: NormalizationStats,
    pub config: TrainConfig,
    pub history: TrainHistory,
    pub converged: bool,
}

/// Epoch-indexed training data. Datasets are produced on demand so that a
/// long schedule never holds more than one shuffled copy.
#[derive(Clone, Debug)]
pub struct Curriculum {
    real: Matrix,
    common_mode: Option<Matrix>,
    seed: u64,
}

impl Curriculum {
    /// Whether `epoch` is the common-mode conditioning pass.
    pub fn is_curriculum_epoch(&self, epoch: usize) -> bool {
        epoch == 0 && self.common_mode.is_some()
    }

    /// Rows fed to the optimizer in `epoch`, in presentation order.
    pub fn dataset(&self, epoch: usize) -> Matrix {
        if self.is_curriculum_epoch(epoch) {
            return self.common_mode.clone().expect("checked above");
        }
        let mut order: Vec<usize> = (0..self.real.rows()).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(epoch as u64 + 1);
        order.shuffle(&mut rng);
        self.real.select_rows(&order)
    }

    pub fn real_data(&self) -> &Matrix {
        &self.real
    }
}

/// Epoch 0 is the tiled A1/A2 pattern (same length as the data) when the
/// SNR-floor epoch is enabled; every other epoch is a seeded shuffle of the
/// real data.
pub fn build_curriculum(train_rec: &Recording, cfg: &TrainConfig) -> Result<Curriculum> {
    if train_rec.normalized_with().is_none() {
        return Err(Error::Contract(
            "curriculum expects a normalized recording".into(),
        ));
    }
    let common_mode = if cfg.snr_floor_epoch {
        Some(
            common_mode_pattern(train_rec, train_rec.n_frames())?
                .frames()
                .clone(),
        )
    } else {
        None
    };
    Ok(Curriculum {
        real: train_rec.frames().clone(),
        common_mode,
        seed: cfg.seed,
    })
}

pub fn train(rec: &Recording, cfg: &TrainConfig) -> Result<TrainedModel> {
    train_with_observer(rec, cfg, |_| {})
}

/// [`train`], calling `observer` after every completed epoch.
pub fn train_with_observer(
    rec: &Recording,
    cfg: &TrainConfig,
    mut observer: impl FnMut(&EpochRecord),
) -> Result<TrainedModel> {
    cfg.validate()?;
    if rec.n_frames() < 2 * cfg.batch_size {
        return Err(Error::InsufficientData(format!(
            "{} frames is fewer than two batches of {}",
            rec.n_frames(),
            cfg.batch_size
        )));
    }
    let stats = compute_stats(rec)?;
    let data = normalize(rec, &stats)?;
    let curriculum = build_curriculum(&data, cfg)?;
    let spec = NetworkSpec::autoencoder(rec.n_channels(), cfg.latent_dim)?;
    let mut weights = init_weights(&spec, cfg.seed);
    let mut velocity = Velocity::zeros(&spec);
    let mut history = TrainHistory::default();
    let mut converged = false;
    let penalty = AngularPenalty;

    for epoch in 0..cfg.max_epochs {
        let started = Instant::now();
        let is_curriculum = curriculum.is_curriculum_epoch(epoch);
        let dataset = curriculum.dataset(epoch);
        let mut skipped = 0;
        for (start, end) in batch_bounds(dataset.rows(), cfg.batch_size) {
            let batch = dataset.slice_rows(start, end);
            let report = match gradients(
                &batch,
                &spec,
                &weights,
                cfg.penalty_weight,
                Some(&penalty as &dyn LatentPenalty),
            ) {
                Ok(r) => r,
                Err(Error::DegenerateLatent(_)) => {
                    skipped += 1;
                    gradients(&batch, &spec, &weights, 0.0, None)?
                }
                Err(e) => return Err(e),
            };
            let loss = report.loss(cfg.penalty_weight);
            if !loss.is_finite() || loss > DIVERGENCE_LOSS {
                return Err(Error::Divergence { epoch, loss });
            }
            sgd_step(
                &mut weights,
                &report.grads,
                cfg.lr,
                cfg.momentum,
                &mut velocity,
            )?;
        }
        if !weights.is_finite() {
            return Err(Error::Divergence {
                epoch,
                loss: f64::NAN,
            });
        }

        let orthonormalized = cfg.ortho.orthonormalize_each_epoch
            && epoch_orthonormalize(&mut weights, &spec)? == OrthoStep::Applied;

        let (latents, sse) = encode_and_score(&spec, &weights, curriculum.real_data())?;
        let mse = sse / (latents.rows() * spec.input_dim) as f64;
        if !mse.is_finite() || mse > DIVERGENCE_LOSS {
            return Err(Error::Divergence { epoch, loss: mse });
        }
        let angles = evaluate_angles(&latents)?;
        let record = EpochRecord {
            epoch,
            curriculum: is_curriculum,
            mse,
            penalty: angles.penalty,
            angles_deg: angles.angles_deg.clone(),
            max_deviation_deg: angles.max_deviation_deg,
            orthonormalized,
            penalty_skipped_batches: skipped,
            wall_ms: started.elapsed().as_secs_f64() * 1e3,
        };
        observer(&record);
        history.epochs.push(record);

        if !is_curriculum && check_convergence(&angles, &cfg.ortho) {
            converged = true;
            break;
        }
    }

    Ok(TrainedModel {
        spec,
        weights,
        stats,
        config: cfg.clone(),
        history,
        converged,
    })
}

/// Angular report of the full latent matrix. A collapsed latent dimension is
/// reported as maximally non-orthogonal rather than aborting training.
fn evaluate_angles(latents: &Matrix) -> Result<AnglePenaltyReport> {
    match angular_penalty(latents) {
        Ok(r) => Ok(r),
        Err(Error::DegenerateLatent(_)) => {
            let l = latents.cols();
            let pairs = l * l.saturating_sub(1) / 2;
            Ok(AnglePenaltyReport {
                penalty: pairs as f64,
                angles_deg: vec![0.0; pairs],
                max_deviation_deg: 90.0,
            })
        }
        Err(e) => Err(e),
    }
}

/// Half-open minibatch ranges. A trailing batch of a single row is merged
/// into its predecessor, since the penalty needs at least two rows.
pub fn batch_bounds(rows: usize, batch_size: usize) -> Vec<(usize, usize)> {
    let mut out: Vec<(usize, usize)> = (0..rows)
        .step_by(batch_size)
        .map(|s| (s, (s + batch_size).min(rows)))
        .collect();
    if out.len() > 1 && out.last().is_some_and(|(s, e)| e - s < 2) {
        let (_, e) = out.pop().expect("len > 1");
        out.last_mut().expect("len > 0").1 = e;
    }
    out
}
