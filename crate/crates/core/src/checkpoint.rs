//! Binary checkpoint container.
//!
//! ```text
//! "LTAE"            4 bytes magic
//! version           u32 LE
//! meta length       u64 LE
//! meta              JSON {spec, config, stats, history, converged}; epoch
//!                   wall-clock times are not stored
//! weights           f64 LE, per layer: weight (row-major), then bias
//! crc32             u32 LE over every preceding byte
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::nn::{LayerParams, NetworkSpec, Weights};
use crate::signal::NormalizationStats;
use crate::trainer::{TrainConfig, TrainHistory, TrainedModel};

pub const MAGIC: &[u8; 4] = b"LTAE";
pub const FORMAT_VERSION: u32 = 1;
const HEADER_LEN: usize = 4 + 4 + 8;

#[derive(Serialize, Deserialize)]
struct Meta {
    spec: NetworkSpec,
    config: TrainConfig,
    stats: NormalizationStats,
    history: TrainHistory,
    converged: bool,
}

pub fn to_bytes(model: &TrainedModel) -> Result<Vec<u8>> {
    let meta = serde_json::to_vec(&Meta {
        spec: model.spec.clone(),
        config: model.config.clone(),
        stats: model.stats.clone(),
        history: model.history.clone(),
        converged: model.converged,
    })?;
    let params = model.weights.flat();
    let mut out = Vec::with_capacity(HEADER_LEN + meta.len() + params.len() * 8 + 4);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(meta.len() as u64).to_le_bytes());
    out.extend_from_slice(&meta);
    for p in params {
        out.extend_from_slice(&p.to_le_bytes());
    }
    let crc = crc32fast::hash(&out);
    out.extend_from_slice(&crc.to_le_bytes());
    Ok(out)
}

pub fn from_bytes(bytes: &[u8]) -> Result<TrainedModel> {
    if bytes.len() < HEADER_LEN + 4 {
        return Err(Error::Integrity(format!(
            "file too short ({} bytes)",
            bytes.len()
        )));
    }
    if &bytes[..4] != MAGIC {
        return Err(Error::Integrity("bad magic bytes".into()));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes"));
    if version != FORMAT_VERSION {
        return Err(Error::IncompatibleCheckpoint {
            found: version,
            expected: FORMAT_VERSION,
        });
    }
    let (body, tail) = bytes.split_at(bytes.len() - 4);
    let stored = u32::from_le_bytes(tail.try_into().expect("4 bytes"));
    let actual = crc32fast::hash(body);
    if stored != actual {
        return Err(Error::Integrity(format!(
            "crc mismatch (stored {stored:08x}, computed {actual:08x})"
        )));
    }
    let meta_len = u64::from_le_bytes(body[8..16].try_into().expect("8 bytes")) as usize;
    let meta_end = HEADER_LEN
        .checked_add(meta_len)
        .filter(|&e| e <= body.len())
        .ok_or_else(|| Error::Integrity("metadata length exceeds file".into()))?;
    let meta: Meta = serde_json::from_slice(&body[HEADER_LEN..meta_end])
        .map_err(|e| Error::Integrity(format!("metadata: {e}")))?;
    meta.spec
        .validate()
        .map_err(|e| Error::Integrity(format!("stored network spec: {e}")))?;

    let raw = &body[meta_end..];
    let expected = meta.spec.parameter_count() * 8;
    if raw.len() != expected {
        return Err(Error::Integrity(format!(
            "weight block has {} bytes, spec needs {expected}",
            raw.len()
        )));
    }
    let mut values = raw
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")));
    let mut layers = Vec::with_capacity(meta.spec.layers.len());
    for l in &meta.spec.layers {
        let w: Vec<f64> = values.by_ref().take(l.out_dim * l.in_dim).collect();
        let bias: Vec<f64> = values.by_ref().take(l.out_dim).collect();
        let weight = Matrix::from_vec(l.out_dim, l.in_dim, w)
            .map_err(|e| Error::Integrity(format!("weights: {e}")))?;
        if bias.iter().any(|b| !b.is_finite()) {
            return Err(Error::Integrity("non-finite bias".into()));
        }
        layers.push(LayerParams { weight, bias });
    }
    if meta.stats.n_channels() != meta.spec.input_dim {
        return Err(Error::Integrity(
            "stats do not match the network input".into(),
        ));
    }
    Ok(TrainedModel {
        spec: meta.spec,
        weights: Weights { layers },
        stats: meta.stats,
        config: meta.config,
        history: meta.history,
        converged: meta.converged,
    })
}

pub fn save_checkpoint(model: &TrainedModel, path: &Path) -> Result<()> {
    let bytes = to_bytes(model)?;
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<TrainedModel> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    from_bytes(&bytes)
}

/// SHA-256 over everything that determines the model's behavior (spec,
/// config, stats, weights, convergence flag).
pub fn model_hash(model: &TrainedModel) -> String {
    let mut h = Sha256::new();
    h.update(MAGIC);
    h.update(serde_json::to_vec(&model.spec).expect("spec serializes"));
    h.update(serde_json::to_vec(&model.config).expect("config serializes"));
    h.update(serde_json::to_vec(&model.stats).expect("stats serialize"));
    h.update([model.converged as u8]);
    for p in model.weights.flat() {
        h.update(p.to_le_bytes());
    }
    hex::encode(h.finalize())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::init_weights;
    use crate::trainer::EpochRecord;

    fn model() -> TrainedModel {
        let spec = NetworkSpec::autoencoder(24, 3).unwrap();
        TrainedModel {
            weights: init_weights(&spec, 42),
            spec,
            stats: NormalizationStats {
                mean: (0..24).map(|i| i as f64 / 7.0).collect(),
                std: (0..24).map(|i| 1.0 + i as f64 / 3.0).collect(),
                degenerate: vec![false; 24],
            },
            config: TrainConfig::default(),
            history: TrainHistory {
                epochs: vec![EpochRecord {
                    epoch: 0,
                    curriculum: true,
                    mse: 0.123456789,
                    penalty: 1e-7,
                    angles_deg: vec![89.9, 90.1, 90.0],
                    max_deviation_deg: 0.1,
                    orthonormalized: true,
                    penalty_skipped_batches: 0,
                    wall_ms: 12.5,
                }],
            },
            converged: true,
        }
    }

    #[test]
    fn round_trip_is_exact() {
        let mut m = model();
        let back = from_bytes(&to_bytes(&m).unwrap()).unwrap();
        m.history.epochs[0].wall_ms = 0.0;
        assert_eq!(back, m);
        assert_eq!(model_hash(&back), model_hash(&m));
    }

    #[test]
    fn layout_starts_with_magic_and_version() {
        let bytes = to_bytes(&model()).unwrap();
        assert_eq!(&bytes[..4], b"LTAE");
        assert_eq!(
            u32::from_le_bytes(bytes[4..8].try_into().unwrap()),
            FORMAT_VERSION
        );
    }

    #[test]
    fn truncation_and_bit_flips_are_detected() {
        let bytes = to_bytes(&model()).unwrap();
        for cut in [3, 20, bytes.len() / 2, bytes.len() - 1] {
            assert!(
                matches!(from_bytes(&bytes[..cut]), Err(Error::Integrity(_))),
                "cut {cut}"
            );
        }
        let mut flipped = bytes.clone();
        let at = bytes.len() - 100;
        flipped[at] ^= 0x10;
        assert!(matches!(from_bytes(&flipped), Err(Error::Integrity(_))));
    }

    #[test]
    fn hash_tracks_weights_but_not_wall_clock() {
        let a = model();
        let mut b = a.clone();
        b.history.epochs[0].wall_ms = 99.0;
        assert_eq!(model_hash(&a), model_hash(&b));
        assert_eq!(to_bytes(&a).unwrap(), to_bytes(&b).unwrap());
        b.weights.layers[0].bias[0] = 1e-300;
        assert_ne!(model_hash(&a), model_hash(&b));
    }
}
