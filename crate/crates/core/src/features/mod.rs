//! Acoustic supervision signals: log-mel spectrogram, frame energy, frame
//! pitch, phoneme-level averaging and quantization.
//!
//! Framing: frames are centred every `hop` samples on a signal reflect-padded
//! by `fft_size / 2` on both sides, so `n` samples give `n / hop + 1` frames.
//! A periodic Hann window of `win` samples sits in the middle of each
//! `fft_size` frame. Mel, energy and pitch all share this grid.

mod fft;
mod pitch;
mod quantize;

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use thiserror::Error;

use crate::matrix::Matrix;
use crate::regulator::DurationSequence;

pub use pitch::PitchConfig;
pub use quantize::{dequantize, quantize, QuantizerConfig, Scale};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FeatureError {
    #[error("sample rate {got} Hz does not match configured {expected} Hz")]
    ConfigMismatch { expected: u32, got: u32 },
    #[error("audio has no samples")]
    EmptyAudio,
    #[error("audio has {got} samples, pitch analysis needs at least {needed}")]
    AudioTooShort { needed: usize, got: usize },
    #[error("invalid configuration: {0}")]
    BadConfig(String),
    #[error("durations cover {expected} frames but the series has {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("non-finite or out-of-range value at index {0}")]
    BadValue(usize),
}

impl FeatureError {
    pub fn code(&self) -> &'static str {
        match self {
            FeatureError::ConfigMismatch { .. } => "ConfigMismatch",
            FeatureError::EmptyAudio => "EmptyAudio",
            FeatureError::AudioTooShort { .. } => "AudioTooShort",
            FeatureError::BadConfig(_) => "BadConfig",
            FeatureError::LengthMismatch { .. } => "LengthMismatch",
            FeatureError::BadValue(_) => "BadValue",
        }
    }
}

fn bad_config(msg: &str) -> FeatureError {
    FeatureError::BadConfig(msg.into())
}

/// Mono audio at a known sample rate.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioBuffer {
    samples: Vec<f64>,
    sample_rate: u32,
}

impl AudioBuffer {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self, FeatureError> {
        if sample_rate == 0 {
            return Err(bad_config("sample rate must be positive"));
        }
        if let Some(i) = samples.iter().position(|s| !s.is_finite()) {
            return Err(FeatureError::BadValue(i));
        }
        Ok(Self {
            samples,
            sample_rate,
        })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn duration_sec(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureConfig {
    pub sample_rate: u32,
    pub win_ms: u32,
    pub hop_ms: u32,
    pub n_mels: usize,
    pub fft_size: usize,
    pub fmin: f64,
    pub fmax: f64,
    pub log_floor: f64,
    pub pitch: PitchConfig,
}

impl Default for FeatureConfig {
    /// 16 kHz, 80 mel bins, 40 ms windows every 10 ms, 1024-point FFT, 0-8 kHz.
    fn default() -> Self {
        Self {
            sample_rate: 16_000,
            win_ms: 40,
            hop_ms: 10,
            n_mels: 80,
            fft_size: 1024,
            fmin: 0.0,
            fmax: 8_000.0,
            log_floor: 1e-5,
            pitch: PitchConfig::default(),
        }
    }
}

impl FeatureConfig {
    pub fn validate(&self) -> Result<(), FeatureError> {
        if self.sample_rate == 0 || self.win_ms == 0 || self.hop_ms == 0 {
            return Err(bad_config("sample_rate, win_ms and hop_ms must be positive"));
        }
        let rate = self.sample_rate as u64;
        if !(self.win_ms as u64 * rate).is_multiple_of(1000) || !(self.hop_ms as u64 * rate).is_multiple_of(1000) {
            return Err(bad_config("window and hop must be a whole number of samples"));
        }
        if self.n_mels == 0 {
            return Err(bad_config("n_mels must be positive"));
        }
        if !self.fft_size.is_power_of_two() || self.fft_size < self.win_length() {
            return Err(bad_config("fft_size must be a power of two no smaller than the window"));
        }
        let nyquist = self.sample_rate as f64 / 2.0;
        if !(self.fmin >= 0.0 && self.fmin < self.fmax && self.fmax <= nyquist) {
            return Err(bad_config("need 0 <= fmin < fmax <= sample_rate / 2"));
        }
        if !(self.log_floor > 0.0 && self.log_floor.is_finite()) {
            return Err(bad_config("log_floor must be positive"));
        }
        self.pitch.validate(self.sample_rate)?;
        let lag_max = libm::floor(self.sample_rate as f64 / self.pitch.f0_min) as usize;
        if lag_max + 2 > self.win_length() {
            return Err(bad_config("window too short for the lowest pitch"));
        }
        Ok(())
    }

    pub fn win_length(&self) -> usize {
        (self.win_ms as u64 * self.sample_rate as u64 / 1000) as usize
    }

    pub fn hop_length(&self) -> usize {
        (self.hop_ms as u64 * self.sample_rate as u64 / 1000) as usize
    }

    pub fn n_bins(&self) -> usize {
        self.fft_size / 2 + 1
    }

    /// Frames produced for `n_samples` samples under centre padding.
    pub fn frame_count(&self, n_samples: usize) -> usize {
        n_samples / self.hop_length() + 1
    }
}

/// `frames x n_mels` natural-log mel magnitudes.
#[derive(Debug, Clone, PartialEq)]
pub struct MelSpectrogram {
    pub frames: Matrix,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeriesKind {
    Energy,
    /// Hz, with 0.0 marking unvoiced frames.
    PitchHz,
}

/// One non-negative value per frame.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameSeries {
    pub values: Vec<f64>,
    pub kind: SeriesKind,
}

impl FrameSeries {
    pub fn new(values: Vec<f64>, kind: SeriesKind) -> Result<Self, FeatureError> {
        if let Some(i) = values.iter().position(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(FeatureError::BadValue(i));
        }
        Ok(Self { values, kind })
    }
}

/// Index into a reflect-padded signal (numpy `reflect` mode, repeated as needed).
pub(crate) fn reflect_index(i: isize, n: usize) -> usize {
    if n == 1 {
        return 0;
    }
    let period = 2 * (n as isize - 1);
    let m = i.rem_euclid(period);
    if m >= n as isize {
        (period - m) as usize
    } else {
        m as usize
    }
}

/// Periodic Hann window.
pub fn hann_window(len: usize) -> Vec<f64> {
    (0..len)
        .map(|i| 0.5 - 0.5 * libm::cos(2.0 * PI * i as f64 / len as f64))
        .collect()
}

pub fn hz_to_mel(hz: f64) -> f64 {
    const F_SP: f64 = 200.0 / 3.0;
    const MIN_LOG_HZ: f64 = 1000.0;
    const MIN_LOG_MEL: f64 = MIN_LOG_HZ / F_SP;
    let logstep = libm::log(6.4) / 27.0;
    if hz >= MIN_LOG_HZ {
        MIN_LOG_MEL + libm::log(hz / MIN_LOG_HZ) / logstep
    } else {
        hz / F_SP
    }
}

pub fn mel_to_hz(mel: f64) -> f64 {
    const F_SP: f64 = 200.0 / 3.0;
    const MIN_LOG_HZ: f64 = 1000.0;
    const MIN_LOG_MEL: f64 = MIN_LOG_HZ / F_SP;
    let logstep = libm::log(6.4) / 27.0;
    if mel >= MIN_LOG_MEL {
        MIN_LOG_HZ * libm::exp(logstep * (mel - MIN_LOG_MEL))
    } else {
        F_SP * mel
    }
}

/// Slaney-style mel filterbank, `n_bins x n_mels`, with area-normalized
/// triangles (each filter scaled by `2 / (upper_hz - lower_hz)`).
pub fn mel_filterbank(cfg: &FeatureConfig) -> Matrix {
    let n_bins = cfg.n_bins();
    let lo = hz_to_mel(cfg.fmin);
    let hi = hz_to_mel(cfg.fmax);
    let edges: Vec<f64> = (0..cfg.n_mels + 2)
        .map(|i| mel_to_hz(lo + (hi - lo) * i as f64 / (cfg.n_mels + 1) as f64))
        .collect();
    let bin_hz = cfg.sample_rate as f64 / cfg.fft_size as f64;
    Matrix::from_fn(n_bins, cfg.n_mels, |k, m| {
        let f = k as f64 * bin_hz;
        let (a, b, c) = (edges[m], edges[m + 1], edges[m + 2]);
        let rise = (f - a) / (b - a);
        let fall = (c - f) / (c - b);
        let w = rise.min(fall).max(0.0);
        w * 2.0 / (c - a)
    })
}

/// Shared framing, FFT and filterbank for one configuration.
#[derive(Debug, Clone)]
pub struct FeatureExtractor {
    cfg: FeatureConfig,
    window: Vec<f64>,
    fft: fft::Fft,
    filterbank: Matrix,
}

impl FeatureExtractor {
    pub fn new(cfg: FeatureConfig) -> Result<Self, FeatureError> {
        cfg.validate()?;
        Ok(Self {
            window: hann_window(cfg.win_length()),
            fft: fft::Fft::new(cfg.fft_size),
            filterbank: mel_filterbank(&cfg),
            cfg,
        })
    }

    pub fn config(&self) -> &FeatureConfig {
        &self.cfg
    }

    fn check(&self, audio: &AudioBuffer) -> Result<(), FeatureError> {
        if audio.sample_rate != self.cfg.sample_rate {
            return Err(FeatureError::ConfigMismatch {
                expected: self.cfg.sample_rate,
                got: audio.sample_rate,
            });
        }
        if audio.samples.is_empty() {
            return Err(FeatureError::EmptyAudio);
        }
        Ok(())
    }

    /// Windowed, zero-centred analysis frame `t` (length `fft_size`).
    pub fn frame(&self, samples: &[f64], t: usize) -> Vec<f64> {
        let n_fft = self.cfg.fft_size;
        let win = self.window.len();
        let offset = (n_fft - win) / 2;
        let start = (t * self.cfg.hop_length()) as isize - (n_fft / 2) as isize;
        let mut buf = vec![0.0; n_fft];
        for (j, w) in self.window.iter().enumerate() {
            let idx = reflect_index(start + (offset + j) as isize, samples.len());
            buf[offset + j] = samples[idx] * w;
        }
        buf
    }

    /// Linear STFT magnitudes, `frames x (fft_size / 2 + 1)`.
    pub fn magnitudes(&self, audio: &AudioBuffer) -> Result<Matrix, FeatureError> {
        self.check(audio)?;
        let n_frames = self.cfg.frame_count(audio.samples.len());
        let n_bins = self.cfg.n_bins();
        let mut out = Vec::with_capacity(n_frames * n_bins);
        let mut im = vec![0.0; self.cfg.fft_size];
        for t in 0..n_frames {
            let mut re = self.frame(&audio.samples, t);
            im.iter_mut().for_each(|v| *v = 0.0);
            self.fft.forward(&mut re, &mut im);
            out.extend((0..n_bins).map(|k| libm::hypot(re[k], im[k])));
        }
        Ok(Matrix::from_raw(n_frames, n_bins, out))
    }

    pub fn mel_from_magnitudes(&self, mags: &Matrix) -> MelSpectrogram {
        let mut mel = mags.matmul(&self.filterbank);
        let floor = self.cfg.log_floor;
        for v in mel.as_mut_slice() {
            *v = libm::log(v.max(floor));
        }
        MelSpectrogram { frames: mel }
    }

    pub fn energy_from_magnitudes(&self, mags: &Matrix) -> FrameSeries {
        let values = (0..mags.rows())
            .map(|t| libm::sqrt(mags.row(t).iter().map(|m| m * m).sum::<f64>()))
            .collect();
        FrameSeries {
            values,
            kind: SeriesKind::Energy,
        }
    }

    pub fn mel_spectrogram(&self, audio: &AudioBuffer) -> Result<MelSpectrogram, FeatureError> {
        Ok(self.mel_from_magnitudes(&self.magnitudes(audio)?))
    }

    pub fn energy_per_frame(&self, audio: &AudioBuffer) -> Result<FrameSeries, FeatureError> {
        Ok(self.energy_from_magnitudes(&self.magnitudes(audio)?))
    }

    pub fn pitch_per_frame(&self, audio: &AudioBuffer) -> Result<FrameSeries, FeatureError> {
        self.check(audio)?;
        pitch::track(
            &audio.samples,
            &self.cfg.pitch,
            self.cfg.sample_rate,
            self.cfg.win_length(),
            self.cfg.hop_length(),
            self.cfg.frame_count(audio.samples.len()),
        )
    }
}

pub fn mel_spectrogram(audio: &AudioBuffer, cfg: &FeatureConfig) -> Result<MelSpectrogram, FeatureError> {
    FeatureExtractor::new(cfg.clone())?.mel_spectrogram(audio)
}

pub fn energy_per_frame(audio: &AudioBuffer, cfg: &FeatureConfig) -> Result<FrameSeries, FeatureError> {
    FeatureExtractor::new(cfg.clone())?.energy_per_frame(audio)
}

pub fn pitch_per_frame(audio: &AudioBuffer, cfg: &FeatureConfig) -> Result<FrameSeries, FeatureError> {
    FeatureExtractor::new(cfg.clone())?.pitch_per_frame(audio)
}

/// Averages a frame series over each phoneme's frames.
///
/// Pitch averages only voiced (non-zero) frames. Phonemes with no frames, or
/// no voiced frames, get 0.0.
pub fn average_by_phoneme(
    series: &FrameSeries,
    durations: &DurationSequence,
) -> Result<Vec<f64>, FeatureError> {
    if durations.total() != series.values.len() {
        return Err(FeatureError::LengthMismatch {
            expected: durations.total(),
            got: series.values.len(),
        });
    }
    let mut out = Vec::with_capacity(durations.len());
    let mut start = 0;
    for &d in durations.as_slice() {
        let seg = &series.values[start..start + d];
        start += d;
        let (sum, n) = match series.kind {
            SeriesKind::Energy => (seg.iter().sum::<f64>(), seg.len()),
            SeriesKind::PitchHz => seg
                .iter()
                .filter(|v| **v > 0.0)
                .fold((0.0, 0), |(s, n), v| (s + v, n + 1)),
        };
        out.push(if n == 0 { 0.0 } else { sum / n as f64 });
    }
    Ok(out)
}
