//! Normalized-autocorrelation pitch tracker.
//!
//! For each frame the normalized cross-correlation between the window's head
//! and its lag-shifted tail is computed over the f0 search range. Local
//! maxima above the voicing threshold are candidates; the shortest lag whose
//! peak is within `octave_ratio` of the best one wins, which avoids picking
//! sub-harmonics. The peak is refined with a parabola through its neighbours.

use alloc::vec::Vec;

use super::{FeatureError, FrameSeries, SeriesKind};

#[derive(Debug, Clone, PartialEq)]
pub struct PitchConfig {
    pub f0_min: f64,
    pub f0_max: f64,
    /// Minimum normalized correlation at the chosen peak.
    pub voicing_threshold: f64,
    pub octave_ratio: f64,
    /// Frames with RMS below this are unvoiced without further analysis.
    pub silence_rms: f64,
}

impl Default for PitchConfig {
    fn default() -> Self {
        Self {
            f0_min: 50.0,
            f0_max: 600.0,
            voicing_threshold: 0.3,
            octave_ratio: 0.9,
            silence_rms: 1e-4,
        }
    }
}

impl PitchConfig {
    pub(crate) fn validate(&self, sample_rate: u32) -> Result<(), FeatureError> {
        let ok = self.f0_min > 0.0
            && self.f0_min < self.f0_max
            && self.f0_max <= sample_rate as f64 / 2.0
            && (0.0..=1.0).contains(&self.voicing_threshold)
            && self.octave_ratio > 0.0
            && self.octave_ratio <= 1.0
            && self.silence_rms >= 0.0;
        if ok {
            Ok(())
        } else {
            Err(FeatureError::BadConfig("invalid pitch search settings".into()))
        }
    }

    fn lag_range(&self, sample_rate: u32) -> (usize, usize) {
        let sr = sample_rate as f64;
        (libm::ceil(sr / self.f0_max) as usize, libm::floor(sr / self.f0_min) as usize)
    }
}

pub(crate) fn track(
    samples: &[f64],
    cfg: &PitchConfig,
    sample_rate: u32,
    win: usize,
    hop: usize,
    n_frames: usize,
) -> Result<FrameSeries, FeatureError> {
    if samples.is_empty() {
        return Err(FeatureError::EmptyAudio);
    }
    let (lag_min, lag_max) = cfg.lag_range(sample_rate);
    if lag_max + 2 > win {
        return Err(FeatureError::BadConfig(
            "analysis window too short for the lowest f0".into(),
        ));
    }
    if samples.len() < win {
        return Err(FeatureError::AudioTooShort {
            needed: win,
            got: samples.len(),
        });
    }
    let mut values = Vec::with_capacity(n_frames);
    let mut nccf = Vec::new();
    for t in 0..n_frames {
        // window centred on the frame, shifted inwards at the edges
        let start = (t * hop).saturating_sub(win / 2).min(samples.len() - win);
        let frame = &samples[start..start + win];
        values.push(estimate(frame, cfg, sample_rate, lag_min, lag_max, &mut nccf));
    }
    Ok(FrameSeries {
        values,
        kind: SeriesKind::PitchHz,
    })
}

fn estimate(
    x: &[f64],
    cfg: &PitchConfig,
    sample_rate: u32,
    lag_min: usize,
    lag_max: usize,
    nccf: &mut Vec<f64>,
) -> f64 {
    let n = x.len();
    let energy: f64 = x.iter().map(|v| v * v).sum();
    if libm::sqrt(energy / n as f64) < cfg.silence_rms {
        return 0.0;
    }
    // prefix[i] = sum of x[..i]^2
    let mut prefix = Vec::with_capacity(n + 1);
    prefix.push(0.0);
    for v in x {
        prefix.push(prefix.last().unwrap() + v * v);
    }
    let lo = lag_min.saturating_sub(1).max(1);
    let hi = lag_max + 1;
    nccf.clear();
    nccf.resize(hi + 1, 0.0);
    for lag in lo..=hi {
        let m = n - lag;
        let cross: f64 = x[..m].iter().zip(&x[lag..]).map(|(a, b)| a * b).sum();
        let e_head = prefix[m];
        let e_tail = prefix[n] - prefix[lag];
        let denom = libm::sqrt(e_head * e_tail);
        nccf[lag] = if denom > 0.0 { cross / denom } else { 0.0 };
    }

    let start = lag_min.max(lo + 1);
    let peaks = (start..=lag_max).filter(|&l| {
        nccf[l] >= cfg.voicing_threshold && nccf[l] > nccf[l - 1] && nccf[l] >= nccf[l + 1]
    });
    let best = peaks.clone().map(|l| nccf[l]).fold(f64::NEG_INFINITY, f64::max);
    if !best.is_finite() {
        return 0.0;
    }
    let Some(lag) = peaks.into_iter().find(|&l| nccf[l] >= cfg.octave_ratio * best) else {
        return 0.0;
    };

    let (a, b, c) = (nccf[lag - 1], nccf[lag], nccf[lag + 1]);
    let curvature = a - 2.0 * b + c;
    let shift = if curvature < 0.0 {
        (0.5 * (a - c) / curvature).clamp(-0.5, 0.5)
    } else {
        0.0
    };
    let f0 = sample_rate as f64 / (lag as f64 + shift);
    if f0 >= cfg.f0_min && f0 <= cfg.f0_max {
        f0
    } else {
        0.0
    }
}
