use alloc::vec::Vec;

use super::FeatureError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scale {
    Linear,
    Log,
}

/// `n_bins` equal-width bins over `[v_min, v_max]`, measured in the chosen scale.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantizerConfig {
    pub n_bins: usize,
    pub v_min: f64,
    pub v_max: f64,
    pub scale: Scale,
}

impl Default for QuantizerConfig {
    fn default() -> Self {
        Self {
            n_bins: 256,
            v_min: 1e-2,
            v_max: 1e2,
            scale: Scale::Log,
        }
    }
}

impl QuantizerConfig {
    pub fn validate(&self) -> Result<(), FeatureError> {
        let bad = |m: &str| Err(FeatureError::BadConfig(m.into()));
        if self.n_bins == 0 {
            return bad("n_bins must be positive");
        }
        if !(self.v_min.is_finite() && self.v_max.is_finite()) || self.v_min >= self.v_max {
            return bad("quantizer needs finite v_min < v_max");
        }
        if self.scale == Scale::Log && self.v_min <= 0.0 {
            return bad("log-scale quantizer needs v_min > 0");
        }
        Ok(())
    }

    fn warp(&self, v: f64) -> f64 {
        match self.scale {
            Scale::Linear => v,
            Scale::Log => libm::log(v),
        }
    }

    fn unwarp(&self, v: f64) -> f64 {
        match self.scale {
            Scale::Linear => v,
            Scale::Log => libm::exp(v),
        }
    }

    /// Width of one bin in the warped domain (log units for `Scale::Log`).
    pub fn bin_width(&self) -> f64 {
        (self.warp(self.v_max) - self.warp(self.v_min)) / self.n_bins as f64
    }

    fn bin(&self, v: f64) -> usize {
        let v = v.clamp(self.v_min, self.v_max);
        let lo = self.warp(self.v_min);
        let t = (self.warp(v) - lo) / (self.warp(self.v_max) - lo);
        (libm::floor(t * self.n_bins as f64) as usize).min(self.n_bins - 1)
    }
}

/// Bin index of every value after clamping to `[v_min, v_max]`.
pub fn quantize(values: &[f64], q: &QuantizerConfig) -> Result<Vec<usize>, FeatureError> {
    q.validate()?;
    values
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            if v.is_nan() {
                Err(FeatureError::BadValue(i))
            } else {
                Ok(q.bin(v))
            }
        })
        .collect()
}

/// Bin centres (in the warped domain) mapped back to values.
pub fn dequantize(indices: &[usize], q: &QuantizerConfig) -> Result<Vec<f64>, FeatureError> {
    q.validate()?;
    let lo = q.warp(q.v_min);
    let w = q.bin_width();
    indices
        .iter()
        .enumerate()
        .map(|(i, &b)| {
            if b >= q.n_bins {
                Err(FeatureError::BadValue(i))
            } else {
                Ok(q.unwarp(lo + (b as f64 + 0.5) * w))
            }
        })
        .collect()
}
