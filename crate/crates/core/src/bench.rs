//! Seeded synthetic benchmarks: a noiseless rank-3 mixture and the
//! two-condition filter-separation pipeline.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::Result;
use crate::linalg::Matrix;
use crate::signal::{
    default_channels, normalize, synthesize, Recording, SynthesisSpec, DEFAULT_SAMPLE_RATE_HZ,
};
use crate::trainer::{train, TrainConfig};
use crate::trajectory::{
    build_manifold, encode_sequence, median_filter, separation, to_trajectory, SeparationReport,
    LONG_WINDOW_MS, SHORT_WINDOW_MS,
};

pub const RANK3_SOURCES: usize = 3;

/// Every channel of the default montage is a fixed linear mixture of three
/// latent sources (each a pair of seeded sinusoids), without noise. The data
/// matrix therefore has rank exactly 3.
pub fn rank3_recording(seed: u64, duration_s: f64) -> Result<Recording> {
    let channels = default_channels();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sources: Vec<[(f64, f64, f64); 2]> = (0..RANK3_SOURCES)
        .map(|_| {
            let mut tone = || {
                (
                    2.0 * PI * rng.random_range(0.5..15.0),
                    rng.random_range(0.5..1.5),
                    rng.random_range(0.0..2.0 * PI),
                )
            };
            [tone(), tone()]
        })
        .collect();
    let mixing = Matrix::from_fn(channels.len(), RANK3_SOURCES, |_, _| {
        StandardNormal.sample(&mut rng)
    });
    let n = (duration_s * DEFAULT_SAMPLE_RATE_HZ).round() as usize;
    let mut frames = Matrix::zeros(n, channels.len());
    for i in 0..n {
        let t = i as f64 / DEFAULT_SAMPLE_RATE_HZ;
        let s: Vec<f64> = sources
            .iter()
            .map(|tones| tones.iter().map(|&(w, a, p)| a * (w * t + p).sin()).sum())
            .collect();
        for c in 0..channels.len() {
            frames[(i, c)] = (0..RANK3_SOURCES).map(|k| mixing[(c, k)] * s[k]).sum();
        }
    }
    Recording::new(DEFAULT_SAMPLE_RATE_HZ, channels, frames)
}

/// Outcome of [`filter_separation`] for one seed.
#[derive(Clone, Debug, PartialEq)]
pub struct FilterSeparation {
    pub short: SeparationReport,
    pub long: SeparationReport,
}

impl FilterSeparation {
    pub fn long_separates_at_least_as_well(&self) -> bool {
        self.long.separation_ratio >= self.short.separation_ratio
    }
}

pub const BENCH_REST_S: f64 = 20.0;
pub const BENCH_TASK_S: f64 = 30.0;
pub const BENCH_TRAIN_EPOCHS: usize = 4;

/// Two-condition pipeline: train on synthetic resting data, encode a
/// low- and a high-load recording, project both onto the resting manifold
/// and compare their separation after the short and the long median filter.
pub fn filter_separation(seed: u64) -> Result<FilterSeparation> {
    let rest = synthesize(&SynthesisSpec::benchmark("rest", BENCH_REST_S), seed)?;
    let cfg = TrainConfig {
        max_epochs: BENCH_TRAIN_EPOCHS,
        seed,
        ..TrainConfig::default()
    };
    let model = train(&rest, &cfg)?;
    let rest_latents = encode_sequence(&model, &normalize(&rest, &model.stats)?)?;
    let manifold = build_manifold(&rest_latents)?;

    let mut trajectories = Vec::new();
    for (k, condition) in ["low", "high"].into_iter().enumerate() {
        let task_seed = seed.wrapping_mul(1_000_003).wrapping_add(k as u64 + 1);
        let rec = synthesize(
            &SynthesisSpec::benchmark(condition, BENCH_TASK_S),
            task_seed,
        )?;
        let latents = encode_sequence(&model, &normalize(&rec, &model.stats)?)?;
        trajectories.push(to_trajectory(
            &latents,
            &manifold,
            rec.sample_rate_hz(),
            condition,
        )?);
    }
    let (low, high) = (&trajectories[0], &trajectories[1]);
    let short = separation(
        &median_filter(low, SHORT_WINDOW_MS)?,
        &median_filter(high, SHORT_WINDOW_MS)?,
    )?;
    let long = separation(
        &median_filter(low, LONG_WINDOW_MS)?,
        &median_filter(high, LONG_WINDOW_MS)?,
    )?;
    Ok(FilterSeparation { short, long })
}
