//! Multichannel recordings: CSV ingestion, z-score normalization, the
//! common-mode reference pattern and seeded synthesis.

use std::collections::{BTreeMap, HashSet};
use std::f64::consts::PI;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::linalg::Matrix;

pub const DEFAULT_SAMPLE_RATE_HZ: f64 = 300.0;
/// Standard deviations below this mark a channel as flat.
pub const DEGENERATE_STD: f64 = 1e-12;

/// The 24-channel montage used by default: 19 scalp EEG sites, the two ear
/// references and the three peripheral channels.
pub const DEFAULT_MONTAGE: [&str; 24] = [
    "Fp1", "Fp2", "F7", "F3", "Fz", "F4", "F8", "T3", "C3", "Cz", "C4", "T4", "T5", "P3", "Pz",
    "P4", "T6", "O1", "O2", "A1", "A2", "ECG", "EDA", "RR",
];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum ChannelKind {
    Eeg,
    Ecg,
    Eda,
    Rr,
    /// Common-mode reference (A1/A2 only).
    Ref,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ChannelId {
    pub name: String,
    pub kind: ChannelKind,
}

impl ChannelId {
    /// Kind inferred from the label: A1/A2 are references, ECG/EDA/RR are
    /// peripheral, everything else is EEG.
    pub fn infer(name: &str) -> Self {
        let kind = match name.to_ascii_uppercase().as_str() {
            "A1" | "A2" => ChannelKind::Ref,
            "ECG" => ChannelKind::Ecg,
            "EDA" => ChannelKind::Eda,
            "RR" => ChannelKind::Rr,
            _ => ChannelKind::Eeg,
        };
        ChannelId {
            name: name.to_string(),
            kind,
        }
    }
}

pub fn default_channels() -> Vec<ChannelId> {
    DEFAULT_MONTAGE
        .iter()
        .map(|n| ChannelId::infer(n))
        .collect()
}

fn is_reference_name(name: &str) -> bool {
    name.eq_ignore_ascii_case("A1") || name.eq_ignore_ascii_case("A2")
}

/// Rectangular multichannel time series, one row per frame.
#[derive(Clone, Debug, PartialEq)]
pub struct Recording {
    sample_rate_hz: f64,
    channels: Vec<ChannelId>,
    frames: Matrix,
    /// Fingerprint of the stats this recording was normalized with.
    normalized_with: Option<String>,
}

impl Recording {
    pub fn new(sample_rate_hz: f64, channels: Vec<ChannelId>, frames: Matrix) -> Result<Self> {
        if !(sample_rate_hz.is_finite() && sample_rate_hz > 0.0) {
            return Err(Error::Parameter(format!(
                "sample rate must be positive, got {sample_rate_hz}"
            )));
        }
        if channels.is_empty() {
            return Err(Error::InvalidRecording("no channels".into()));
        }
        let mut seen = HashSet::new();
        for ch in &channels {
            if ch.name.is_empty() {
                return Err(Error::InvalidRecording("empty channel name".into()));
            }
            if !seen.insert(ch.name.as_str()) {
                return Err(Error::InvalidRecording(format!(
                    "duplicate channel name {:?}",
                    ch.name
                )));
            }
            if ch.kind == ChannelKind::Ref && !is_reference_name(&ch.name) {
                return Err(Error::InvalidRecording(format!(
                    "channel {:?} is marked REF but only A1/A2 are reference channels",
                    ch.name
                )));
            }
        }
        if frames.cols() != channels.len() {
            return Err(Error::Shape(format!(
                "{} channels but frames have {} columns",
                channels.len(),
                frames.cols()
            )));
        }
        if !frames.is_finite() {
            return Err(Error::NonFinite("recording frames".into()));
        }
        Ok(Recording {
            sample_rate_hz,
            channels,
            frames,
            normalized_with: None,
        })
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.sample_rate_hz
    }

    pub fn channels(&self) -> &[ChannelId] {
        &self.channels
    }

    pub fn frames(&self) -> &Matrix {
        &self.frames
    }

    pub fn n_frames(&self) -> usize {
        self.frames.rows()
    }

    pub fn n_channels(&self) -> usize {
        self.channels.len()
    }

    pub fn duration_s(&self) -> f64 {
        self.n_frames() as f64 / self.sample_rate_hz
    }

    pub fn channel_index(&self, name: &str) -> Option<usize> {
        self.channels.iter().position(|c| c.name == name)
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        self.channel_index(name).map(|i| self.frames.column(i))
    }

    /// Fingerprint of the [`NormalizationStats`] applied by [`normalize`], if any.
    pub fn normalized_with(&self) -> Option<&str> {
        self.normalized_with.as_deref()
    }

    /// Joins recordings end to end. All parts must share channels and rate.
    pub fn concat(parts: &[Recording]) -> Result<Recording> {
        let first = parts
            .first()
            .ok_or_else(|| Error::EmptyInput("no recordings to concatenate".into()))?;
        let mut data = Vec::new();
        for p in parts {
            if p.channels != first.channels {
                return Err(Error::Shape(
                    "recordings have different channel lists".into(),
                ));
            }
            if p.sample_rate_hz != first.sample_rate_hz {
                return Err(Error::Parameter(
                    "recordings have different sample rates".into(),
                ));
            }
            if p.normalized_with != first.normalized_with {
                return Err(Error::Contract(
                    "recordings are normalized with different stats".into(),
                ));
            }
            data.extend_from_slice(p.frames.as_slice());
        }
        let rows = data.len() / first.n_channels();
        let mut out = Recording::new(
            first.sample_rate_hz,
            first.channels.clone(),
            Matrix::from_vec(rows, first.n_channels(), data)?,
        )?;
        out.normalized_with = first.normalized_with.clone();
        Ok(out)
    }
}

/// Sidecar metadata stored next to a recording CSV as `<name>.meta.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecordingMeta {
    pub sample_rate_hz: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub condition: Option<String>,
}

/// `dir/rec.csv` → `dir/rec.meta.json`.
pub fn meta_path(csv_path: &Path) -> PathBuf {
    let stem = csv_path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    csv_path.with_file_name(format!("{stem}.meta.json"))
}

pub fn read_meta(csv_path: &Path) -> Result<Option<RecordingMeta>> {
    let path = meta_path(csv_path);
    if !path.exists() {
        return Ok(None);
    }
    let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    Ok(Some(serde_json::from_str(&text)?))
}

pub fn write_meta(csv_path: &Path, meta: &RecordingMeta) -> Result<()> {
    let path = meta_path(csv_path);
    let mut text = serde_json::to_string_pretty(meta)?;
    text.push('\n');
    std::fs::write(&path, text).map_err(|e| Error::io(&path, e))
}

/// Reads a recording CSV: a header of channel names, then one row per frame.
pub fn load_recording(path: &Path, expected_rate: Option<f64>) -> Result<Recording> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_recording(file, expected_rate)
}

pub fn parse_recording(
    reader: impl std::io::Read,
    expected_rate: Option<f64>,
) -> Result<Recording> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| csv_error(0, e))?
        .iter()
        .map(str::to_string)
        .collect();
    if header.is_empty() || header.iter().all(String::is_empty) {
        return Err(Error::EmptyInput("recording has no header".into()));
    }
    let mut data = Vec::new();
    let mut rows = 0;
    for (i, record) in rdr.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| csv_error(row, e))?;
        if record.len() != header.len() {
            return Err(Error::Parse {
                row,
                column: None,
                message: format!("expected {} cells, found {}", header.len(), record.len()),
            });
        }
        for (cell, name) in record.iter().zip(&header) {
            let value: f64 = cell.parse().map_err(|_| Error::Parse {
                row,
                column: Some(name.clone()),
                message: format!("not a number: {cell:?}"),
            })?;
            if !value.is_finite() {
                return Err(Error::Parse {
                    row,
                    column: Some(name.clone()),
                    message: format!("non-finite value {cell:?}"),
                });
            }
            data.push(value);
        }
        rows += 1;
    }
    if rows == 0 {
        return Err(Error::EmptyInput("recording has no data rows".into()));
    }
    let channels = header.iter().map(|n| ChannelId::infer(n)).collect();
    Recording::new(
        expected_rate.unwrap_or(DEFAULT_SAMPLE_RATE_HZ),
        channels,
        Matrix::from_vec(rows, header.len(), data)?,
    )
}

fn csv_error(row: usize, e: csv::Error) -> Error {
    Error::Parse {
        row,
        column: None,
        message: e.to_string(),
    }
}

/// Writes the recording as CSV. Floats use the shortest representation that
/// reads back to the same value.
pub fn save_recording(rec: &Recording, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    write_recording(rec, &mut out).map_err(|e| Error::io(path, e))?;
    out.flush().map_err(|e| Error::io(path, e))
}

pub fn write_recording(rec: &Recording, out: &mut impl Write) -> std::io::Result<()> {
    let names: Vec<&str> = rec.channels.iter().map(|c| c.name.as_str()).collect();
    writeln!(out, "{}", names.join(","))?;
    let mut line = String::new();
    for row in rec.frames.row_iter() {
        line.clear();
        for (i, v) in row.iter().enumerate() {
            if i > 0 {
                line.push(',');
            }
            line.push_str(&v.to_string());
        }
        writeln!(out, "{line}")?;
    }
    Ok(())
}

/// Per-channel mean and population standard deviation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormalizationStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    /// Channels whose std fell below [`DEGENERATE_STD`] and was replaced by 1.
    pub degenerate: Vec<bool>,
}

impl NormalizationStats {
    pub fn identity(channels: usize) -> Self {
        NormalizationStats {
            mean: vec![0.0; channels],
            std: vec![1.0; channels],
            degenerate: vec![false; channels],
        }
    }

    pub fn n_channels(&self) -> usize {
        self.mean.len()
    }

    pub fn has_degenerate(&self) -> bool {
        self.degenerate.iter().any(|&d| d)
    }

    /// Content hash used to tag recordings normalized with these stats.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        for v in self.mean.iter().chain(&self.std) {
            h.update(v.to_le_bytes());
        }
        hex::encode(&h.finalize()[..8])
    }
}

pub fn compute_stats(rec: &Recording) -> Result<NormalizationStats> {
    let n = rec.n_frames();
    if n < 2 {
        return Err(Error::InsufficientData(format!(
            "need at least 2 frames for channel statistics, got {n}"
        )));
    }
    let mean = rec.frames.column_means();
    let mut var = vec![0.0; rec.n_channels()];
    for row in rec.frames.row_iter() {
        for ((acc, v), m) in var.iter_mut().zip(row).zip(&mean) {
            let d = v - m;
            *acc += d * d;
        }
    }
    let mut std = Vec::with_capacity(var.len());
    let mut degenerate = Vec::with_capacity(var.len());
    for v in var {
        let s = (v / n as f64).sqrt();
        let flat = s < DEGENERATE_STD;
        std.push(if flat { 1.0 } else { s });
        degenerate.push(flat);
    }
    Ok(NormalizationStats {
        mean,
        std,
        degenerate,
    })
}

/// `(value − mean) / std`, per channel. The result remembers the stats it
/// was normalized with.
pub fn normalize(rec: &Recording, stats: &NormalizationStats) -> Result<Recording> {
    check_stats_width(rec, stats)?;
    let mut out = rec.clone();
    for r in 0..out.n_frames() {
        for ((v, m), s) in out
            .frames
            .row_mut(r)
            .iter_mut()
            .zip(&stats.mean)
            .zip(&stats.std)
        {
            *v = (*v - m) / s;
        }
    }
    out.normalized_with = Some(stats.fingerprint());
    Ok(out)
}

/// Inverse of [`normalize`].
pub fn denormalize(rec: &Recording, stats: &NormalizationStats) -> Result<Recording> {
    check_stats_width(rec, stats)?;
    let mut out = rec.clone();
    for r in 0..out.n_frames() {
        for ((v, m), s) in out
            .frames
            .row_mut(r)
            .iter_mut()
            .zip(&stats.mean)
            .zip(&stats.std)
        {
            *v = *v * s + m;
        }
    }
    out.normalized_with = None;
    Ok(out)
}

fn check_stats_width(rec: &Recording, stats: &NormalizationStats) -> Result<()> {
    if stats.n_channels() != rec.n_channels() || stats.std.len() != rec.n_channels() {
        return Err(Error::Shape(format!(
            "stats cover {} channels, recording has {}",
            stats.n_channels(),
            rec.n_channels()
        )));
    }
    Ok(())
}

/// Tiles `[A1 samples, A2 samples]` to `length_frames` and writes the same
/// sequence into every channel, giving a signal with zero differential content.
pub fn common_mode_pattern(rec: &Recording, length_frames: usize) -> Result<Recording> {
    if length_frames == 0 {
        return Err(Error::Parameter("pattern length must be positive".into()));
    }
    let a1 = rec
        .column("A1")
        .ok_or_else(|| Error::MissingReferenceChannel("A1".into()))?;
    let a2 = rec
        .column("A2")
        .ok_or_else(|| Error::MissingReferenceChannel("A2".into()))?;
    let tile: Vec<f64> = a1.into_iter().chain(a2).collect();
    let c = rec.n_channels();
    let frames = Matrix::from_fn(length_frames, c, |r, _| tile[r % tile.len()]);
    let mut out = Recording::new(rec.sample_rate_hz, rec.channels.clone(), frames)?;
    out.normalized_with = rec.normalized_with.clone();
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sinusoid {
    pub freq_hz: f64,
    pub amplitude: f64,
    #[serde(default)]
    pub phase_rad: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelSynth {
    pub name: String,
    #[serde(default)]
    pub sinusoids: Vec<Sinusoid>,
}

/// Amplitude gain applied to sinusoids with `lo_hz <= freq < hi_hz`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BandGain {
    pub lo_hz: f64,
    pub hi_hz: f64,
    pub gain: f64,
}

fn default_sample_rate() -> f64 {
    DEFAULT_SAMPLE_RATE_HZ
}

fn default_condition() -> String {
    "rest".into()
}

/// Parameters for [`synthesize`]; the JSON form of this struct is the
/// synthesis spec file accepted by the CLI.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthesisSpec {
    pub channels: Vec<ChannelSynth>,
    pub duration_s: f64,
    #[serde(default = "default_sample_rate")]
    pub sample_rate_hz: f64,
    /// Standard deviation of the additive Gaussian noise.
    #[serde(default)]
    pub noise_amplitude: f64,
    #[serde(default = "default_condition")]
    pub condition: String,
    /// Per-condition band gains; conditions absent here use
    /// [`default_band_gains`].
    #[serde(default)]
    pub band_gains: BTreeMap<String, Vec<BandGain>>,
}

/// Built-in spectral weighting per condition tag. Unknown tags get no gains.
pub fn default_band_gains(condition: &str) -> Vec<BandGain> {
    let band = |lo_hz, hi_hz, gain| BandGain { lo_hz, hi_hz, gain };
    match condition {
        "rest" => vec![band(8.0, 13.0, 1.5)],
        "low" => vec![band(0.0, 0.5, 1.5), band(4.0, 8.0, 1.3)],
        "high" => vec![
            band(0.0, 0.5, 2.5),
            band(8.0, 13.0, 0.6),
            band(13.0, 30.0, 2.0),
        ],
        _ => Vec::new(),
    }
}

impl SynthesisSpec {
    fn gains(&self) -> Vec<BandGain> {
        self.band_gains
            .get(&self.condition)
            .cloned()
            .unwrap_or_else(|| default_band_gains(&self.condition))
    }

    /// A desk-scale stand-in for a 24-channel session: EEG rhythms with
    /// per-site phases, cardiac, electrodermal and respiratory channels with
    /// tonic levels, and weak reference channels.
    pub fn benchmark(condition: &str, duration_s: f64) -> Self {
        let s = |freq_hz, amplitude, phase_rad| Sinusoid {
            freq_hz,
            amplitude,
            phase_rad,
        };
        let channels = DEFAULT_MONTAGE
            .iter()
            .enumerate()
            .map(|(i, name)| {
                let p = i as f64 * 0.37;
                let sinusoids = match ChannelId::infer(name).kind {
                    ChannelKind::Eeg => {
                        vec![s(6.0, 0.7, p), s(10.0, 1.0, 1.3 * p), s(20.0, 0.5, 0.7 * p)]
                    }
                    ChannelKind::Ref => vec![s(10.0, 0.2, p), s(0.0, 0.3, PI / 2.0)],
                    ChannelKind::Ecg => vec![s(1.2, 1.0, 0.0), s(2.4, 0.5, 0.3)],
                    ChannelKind::Eda => vec![s(0.0, 1.0, PI / 2.0), s(0.05, 0.3, 0.0)],
                    ChannelKind::Rr => vec![s(0.0, 0.5, PI / 2.0), s(0.25, 1.0, 0.0)],
                };
                ChannelSynth {
                    name: name.to_string(),
                    sinusoids,
                }
            })
            .collect();
        SynthesisSpec {
            channels,
            duration_s,
            sample_rate_hz: DEFAULT_SAMPLE_RATE_HZ,
            noise_amplitude: 0.5,
            condition: condition.to_string(),
            band_gains: BTreeMap::new(),
        }
    }
}

/// Sum of (condition-weighted) sinusoids plus seeded Gaussian noise, per channel.
/// A pure function of `(spec, seed)`.
pub fn synthesize(spec: &SynthesisSpec, seed: u64) -> Result<Recording> {
    if !(spec.duration_s.is_finite() && spec.duration_s > 0.0) {
        return Err(Error::Parameter(format!(
            "duration must be positive, got {}",
            spec.duration_s
        )));
    }
    if !(spec.sample_rate_hz.is_finite() && spec.sample_rate_hz > 0.0) {
        return Err(Error::Parameter(format!(
            "sample rate must be positive, got {}",
            spec.sample_rate_hz
        )));
    }
    if !(spec.noise_amplitude.is_finite() && spec.noise_amplitude >= 0.0) {
        return Err(Error::Parameter(
            "noise amplitude must be nonnegative".into(),
        ));
    }
    let n = (spec.duration_s * spec.sample_rate_hz).round() as usize;
    if n == 0 {
        return Err(Error::Parameter("duration shorter than one sample".into()));
    }
    let gains = spec.gains();
    let weight = |f: f64| -> f64 {
        gains
            .iter()
            .filter(|b| f >= b.lo_hz && f < b.hi_hz)
            .map(|b| b.gain)
            .product()
    };
    let components: Vec<Vec<(f64, f64, f64)>> = spec
        .channels
        .iter()
        .map(|ch| {
            ch.sinusoids
                .iter()
                .map(|s| {
                    (
                        2.0 * PI * s.freq_hz,
                        s.amplitude * weight(s.freq_hz),
                        s.phase_rad,
                    )
                })
                .collect()
        })
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let c = spec.channels.len();
    let mut frames = Matrix::zeros(n, c);
    for i in 0..n {
        let t = i as f64 / spec.sample_rate_hz;
        for (j, comps) in components.iter().enumerate() {
            let mut x: f64 = comps
                .iter()
                .map(|&(w, a, phi)| a * (w * t + phi).sin())
                .sum();
            if spec.noise_amplitude > 0.0 {
                let z: f64 = StandardNormal.sample(&mut rng);
                x += spec.noise_amplitude * z;
            }
            frames[(i, j)] = x;
        }
    }
    let channels = spec
        .channels
        .iter()
        .map(|c| ChannelId::infer(&c.name))
        .collect();
    Recording::new(spec.sample_rate_hz, channels, frames)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(header: &[&str], rows: &[Vec<f64>]) -> Recording {
        Recording::new(
            300.0,
            header.iter().map(|n| ChannelId::infer(n)).collect(),
            Matrix::from_rows(rows).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn parses_minimal_csv() {
        let r = parse_recording("A1,A2,Fp1\n1,2,3\n4,5,6\n".as_bytes(), None).unwrap();
        assert_eq!(r.n_channels(), 3);
        assert_eq!(r.n_frames(), 2);
        assert_eq!(r.channels()[0].kind, ChannelKind::Ref);
        assert_eq!(r.channels()[2].kind, ChannelKind::Eeg);
        assert_eq!(r.sample_rate_hz(), 300.0);
    }

    #[test]
    fn accepts_crlf_and_infers_kinds() {
        let r = parse_recording("ECG,EDA,RR,Cz\r\n1,2,3,4\r\n".as_bytes(), Some(256.0)).unwrap();
        let kinds: Vec<_> = r.channels().iter().map(|c| c.kind).collect();
        assert_eq!(
            kinds,
            vec![
                ChannelKind::Ecg,
                ChannelKind::Eda,
                ChannelKind::Rr,
                ChannelKind::Eeg
            ]
        );
        assert_eq!(r.sample_rate_hz(), 256.0);
    }

    #[test]
    fn nan_cell_names_row_and_column() {
        let err = parse_recording("A1,A2\n1,2\n3,NaN\n".as_bytes(), None).unwrap_err();
        match err {
            Error::Parse { row, column, .. } => {
                assert_eq!(row, 2);
                assert_eq!(column.as_deref(), Some("A2"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn non_numeric_and_ragged_rows() {
        let err = parse_recording("A1,A2\n1,x\n".as_bytes(), None).unwrap_err();
        assert!(matches!(err, Error::Parse { row: 1, column: Some(ref c), .. } if c == "A2"));
        let err = parse_recording("A1,A2\n1,2\n3\n".as_bytes(), None).unwrap_err();
        assert!(matches!(
            err,
            Error::Parse {
                row: 2,
                column: None,
                ..
            }
        ));
    }

    #[test]
    fn empty_inputs() {
        assert!(matches!(
            parse_recording("".as_bytes(), None),
            Err(Error::EmptyInput(_))
        ));
        assert!(matches!(
            parse_recording("A1,A2\n".as_bytes(), None),
            Err(Error::EmptyInput(_))
        ));
    }

    #[test]
    fn duplicate_channels_rejected() {
        assert!(matches!(
            parse_recording("Cz,Cz\n1,2\n".as_bytes(), None),
            Err(Error::InvalidRecording(_))
        ));
    }

    #[test]
    fn ref_kind_reserved_for_ear_references() {
        let ch = vec![ChannelId {
            name: "Cz".into(),
            kind: ChannelKind::Ref,
        }];
        assert!(Recording::new(300.0, ch, Matrix::zeros(1, 1)).is_err());
    }

    #[test]
    fn three_hundred_rows_span_one_second() {
        let mut csv = String::from("A1\n");
        for i in 0..300 {
            csv.push_str(&format!("{i}\n"));
        }
        let r = parse_recording(csv.as_bytes(), None).unwrap();
        assert_eq!(r.n_frames(), 300);
        assert_eq!(r.duration_s(), 1.0);
    }

    #[test]
    fn constant_channel_is_flagged() {
        let r = rec(
            &["A1", "Cz"],
            &[vec![1.0, 0.0], vec![1.0, 2.0], vec![1.0, 4.0]],
        );
        let s = compute_stats(&r).unwrap();
        assert_eq!(s.mean[0], 1.0);
        assert_eq!(s.std[0], 1.0);
        assert_eq!(s.degenerate, vec![true, false]);
        assert!(s.has_degenerate());
    }

    #[test]
    fn two_point_stats() {
        let r = rec(&["Cz"], &[vec![0.0], vec![2.0]]);
        let s = compute_stats(&r).unwrap();
        assert_eq!((s.mean[0], s.std[0]), (1.0, 1.0));
        assert!(matches!(
            compute_stats(&rec(&["Cz"], &[vec![1.0]])),
            Err(Error::InsufficientData(_))
        ));
    }

    #[test]
    fn identity_stats_leave_values_alone() {
        let r = rec(&["A1", "A2"], &[vec![1.5, -2.0], vec![3.0, 7.0]]);
        let n = normalize(&r, &NormalizationStats::identity(2)).unwrap();
        assert_eq!(n.frames(), r.frames());
        assert!(n.normalized_with().is_some());
        assert!(matches!(
            normalize(&r, &NormalizationStats::identity(3)),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn common_mode_single_tile_and_wraparound() {
        let r = rec(
            &["A1", "A2", "Fp1"],
            &[vec![1.0, 3.0, 9.0], vec![2.0, 4.0, 9.0]],
        );
        let p = common_mode_pattern(&r, 4).unwrap();
        for c in 0..3 {
            assert_eq!(p.frames().column(c), vec![1.0, 2.0, 3.0, 4.0]);
        }
        let p = common_mode_pattern(&r, 6).unwrap();
        for c in 0..3 {
            assert_eq!(p.frames().column(c), vec![1.0, 2.0, 3.0, 4.0, 1.0, 2.0]);
        }
    }

    #[test]
    fn common_mode_double_length_is_one_full_tile() {
        let rows: Vec<Vec<f64>> = (0..7)
            .map(|i| vec![i as f64, 100.0 + i as f64, -1.0])
            .collect();
        let r = rec(&["A1", "A2", "Cz"], &rows);
        let p = common_mode_pattern(&r, 14).unwrap();
        for t in 0..14 {
            let expected = if t < 7 {
                t as f64
            } else {
                100.0 + (t - 7) as f64
            };
            assert!(p.frames().row(t).iter().all(|&v| v == expected));
        }
    }

    #[test]
    fn common_mode_requires_references() {
        let r = rec(&["A1", "Cz"], &[vec![1.0, 2.0]]);
        assert!(matches!(
            common_mode_pattern(&r, 4),
            Err(Error::MissingReferenceChannel(ref c)) if c == "A2"
        ));
    }

    fn unit_sine_spec() -> SynthesisSpec {
        SynthesisSpec {
            channels: vec![ChannelSynth {
                name: "Cz".into(),
                sinusoids: vec![Sinusoid {
                    freq_hz: 1.0,
                    amplitude: 1.0,
                    phase_rad: 0.0,
                }],
            }],
            duration_s: 1.0,
            sample_rate_hz: 300.0,
            noise_amplitude: 0.0,
            condition: "none".into(),
            band_gains: BTreeMap::new(),
        }
    }

    #[test]
    fn noiseless_sine_is_closed_form() {
        let r = synthesize(&unit_sine_spec(), 0).unwrap();
        assert_eq!(r.n_frames(), 300);
        for i in 0..300 {
            let t = i as f64 / 300.0;
            assert!((r.frames()[(i, 0)] - (2.0 * PI * t).sin()).abs() < 1e-12);
        }
    }

    #[test]
    fn synthesis_is_deterministic() {
        let spec = SynthesisSpec::benchmark("high", 2.0);
        assert_eq!(synthesize(&spec, 5).unwrap(), synthesize(&spec, 5).unwrap());
        assert_ne!(synthesize(&spec, 5).unwrap(), synthesize(&spec, 6).unwrap());
    }

    #[test]
    fn synthesis_rejects_bad_parameters() {
        let mut spec = unit_sine_spec();
        spec.duration_s = 0.0;
        assert!(matches!(synthesize(&spec, 0), Err(Error::Parameter(_))));
        let mut spec = unit_sine_spec();
        spec.sample_rate_hz = -1.0;
        assert!(matches!(synthesize(&spec, 0), Err(Error::Parameter(_))));
    }

    #[test]
    fn condition_gains_scale_bands() {
        let mut spec = unit_sine_spec();
        spec.channels[0].sinusoids[0].freq_hz = 10.0;
        spec.condition = "rest".into();
        let rest = synthesize(&spec, 0).unwrap();
        spec.condition = "other".into();
        let plain = synthesize(&spec, 0).unwrap();
        for i in 0..300 {
            assert!((rest.frames()[(i, 0)] - 1.5 * plain.frames()[(i, 0)]).abs() < 1e-12);
        }
    }

    #[test]
    fn spec_json_defaults() {
        let spec: SynthesisSpec = serde_json::from_str(
            r#"{"channels":[{"name":"A1","sinusoids":[{"freq_hz":2,"amplitude":1}]}],"duration_s":1}"#,
        )
        .unwrap();
        assert_eq!(spec.sample_rate_hz, 300.0);
        assert_eq!(spec.condition, "rest");
        assert_eq!(spec.noise_amplitude, 0.0);
    }
}
