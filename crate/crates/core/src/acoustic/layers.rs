//! Forward-only building blocks. Activations are `rows x channels` matrices.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::matrix::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamKind {
    Weight,
    Bias,
    NormGain,
    NormBias,
}

pub struct ParamRef<'a> {
    pub name: String,
    pub kind: ParamKind,
    pub shape: Vec<usize>,
    pub values: &'a [f64],
}

pub struct ParamMut<'a> {
    pub name: String,
    pub kind: ParamKind,
    pub shape: Vec<usize>,
    pub values: &'a mut [f64],
}

pub(crate) trait Params {
    fn visit<'a>(&'a self, prefix: &str, f: &mut dyn FnMut(ParamRef<'a>));
    fn visit_mut<'a>(&'a mut self, prefix: &str, f: &mut dyn FnMut(ParamMut<'a>));
}

fn p<'a>(prefix: &str, name: &str, kind: ParamKind, shape: Vec<usize>, values: &'a [f64]) -> ParamRef<'a> {
    ParamRef {
        name: format!("{prefix}.{name}"),
        kind,
        shape,
        values,
    }
}

fn pm<'a>(prefix: &str, name: &str, kind: ParamKind, shape: Vec<usize>, values: &'a mut [f64]) -> ParamMut<'a> {
    ParamMut {
        name: format!("{prefix}.{name}"),
        kind,
        shape,
        values,
    }
}

/// `y = x W + b`, `W` is `in x out`.
#[derive(Debug, Clone, PartialEq)]
pub struct Linear {
    pub weight: Matrix,
    pub bias: Vec<f64>,
}

impl Linear {
    pub fn new(input: usize, output: usize) -> Self {
        Self {
            weight: Matrix::zeros(input, output),
            bias: vec![0.0; output],
        }
    }

    pub fn forward(&self, x: &Matrix) -> Matrix {
        let mut y = x.matmul(&self.weight);
        for r in 0..y.rows() {
            for (v, b) in y.row_mut(r).iter_mut().zip(&self.bias) {
                *v += b;
            }
        }
        y
    }
}

impl Params for Linear {
    fn visit<'a>(&'a self, prefix: &str, f: &mut dyn FnMut(ParamRef<'a>)) {
        let (i, o) = self.weight.shape();
        f(p(prefix, "weight", ParamKind::Weight, vec![i, o], self.weight.as_slice()));
        f(p(prefix, "bias", ParamKind::Bias, vec![o], &self.bias));
    }

    fn visit_mut<'a>(&'a mut self, prefix: &str, f: &mut dyn FnMut(ParamMut<'a>)) {
        let (i, o) = self.weight.shape();
        f(pm(prefix, "weight", ParamKind::Weight, vec![i, o], self.weight.as_mut_slice()));
        f(pm(prefix, "bias", ParamKind::Bias, vec![o], &mut self.bias));
    }
}

/// 1-D convolution over time with zero "same" padding and odd kernel.
///
/// Weights are stored tap-major: row `j * in + i` holds the output weights
/// for input channel `i` at tap `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct Conv1d {
    pub kernel: usize,
    pub in_channels: usize,
    pub weight: Matrix,
    pub bias: Vec<f64>,
}

impl Conv1d {
    pub fn new(in_channels: usize, out_channels: usize, kernel: usize) -> Self {
        debug_assert!(kernel % 2 == 1);
        Self {
            kernel,
            in_channels,
            weight: Matrix::zeros(kernel * in_channels, out_channels),
            bias: vec![0.0; out_channels],
        }
    }

    pub fn forward(&self, x: &Matrix) -> Matrix {
        assert_eq!(x.dim(), self.in_channels);
        let out_ch = self.weight.dim();
        let pad = self.kernel / 2;
        let n = x.rows();
        let mut y = Matrix::zeros(n, out_ch);
        for t in 0..n {
            let dst = y.row_mut(t);
            dst.copy_from_slice(&self.bias);
            for j in 0..self.kernel {
                let Some(src) = (t + j).checked_sub(pad).filter(|&s| s < n) else {
                    continue;
                };
                for (i, &a) in x.row(src).iter().enumerate() {
                    let w = self.weight.row(j * self.in_channels + i);
                    for (d, wv) in dst.iter_mut().zip(w) {
                        *d += a * wv;
                    }
                }
            }
        }
        y
    }
}

impl Params for Conv1d {
    fn visit<'a>(&'a self, prefix: &str, f: &mut dyn FnMut(ParamRef<'a>)) {
        let shape = vec![self.kernel, self.in_channels, self.weight.dim()];
        f(p(prefix, "weight", ParamKind::Weight, shape, self.weight.as_slice()));
        f(p(prefix, "bias", ParamKind::Bias, vec![self.bias.len()], &self.bias));
    }

    fn visit_mut<'a>(&'a mut self, prefix: &str, f: &mut dyn FnMut(ParamMut<'a>)) {
        let shape = vec![self.kernel, self.in_channels, self.weight.dim()];
        f(pm(prefix, "weight", ParamKind::Weight, shape, self.weight.as_mut_slice()));
        let n = self.bias.len();
        f(pm(prefix, "bias", ParamKind::Bias, vec![n], &mut self.bias));
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerNorm {
    pub gain: Vec<f64>,
    pub bias: Vec<f64>,
}

const NORM_EPS: f64 = 1e-5;

impl LayerNorm {
    pub fn new(dim: usize) -> Self {
        Self {
            gain: vec![1.0; dim],
            bias: vec![0.0; dim],
        }
    }

    pub fn forward_in_place(&self, x: &mut Matrix) {
        let d = x.dim() as f64;
        for r in 0..x.rows() {
            let row = x.row_mut(r);
            let mean = row.iter().sum::<f64>() / d;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / d;
            let inv = 1.0 / libm::sqrt(var + NORM_EPS);
            for ((v, g), b) in row.iter_mut().zip(&self.gain).zip(&self.bias) {
                *v = (*v - mean) * inv * g + b;
            }
        }
    }
}

impl Params for LayerNorm {
    fn visit<'a>(&'a self, prefix: &str, f: &mut dyn FnMut(ParamRef<'a>)) {
        let n = self.gain.len();
        f(p(prefix, "gain", ParamKind::NormGain, vec![n], &self.gain));
        f(p(prefix, "bias", ParamKind::NormBias, vec![n], &self.bias));
    }

    fn visit_mut<'a>(&'a mut self, prefix: &str, f: &mut dyn FnMut(ParamMut<'a>)) {
        let n = self.gain.len();
        f(pm(prefix, "gain", ParamKind::NormGain, vec![n], &mut self.gain));
        f(pm(prefix, "bias", ParamKind::NormBias, vec![n], &mut self.bias));
    }
}

fn relu_in_place(x: &mut Matrix) {
    for v in x.as_mut_slice() {
        *v = v.max(0.0);
    }
}

/// Multi-head scaled dot-product self-attention.
#[derive(Debug, Clone, PartialEq)]
pub struct SelfAttention {
    pub heads: usize,
    pub query: Linear,
    pub key: Linear,
    pub value: Linear,
    pub output: Linear,
}

impl SelfAttention {
    pub fn new(hidden: usize, heads: usize) -> Self {
        Self {
            heads,
            query: Linear::new(hidden, hidden),
            key: Linear::new(hidden, hidden),
            value: Linear::new(hidden, hidden),
            output: Linear::new(hidden, hidden),
        }
    }

    pub fn forward(&self, x: &Matrix) -> Matrix {
        let n = x.rows();
        let hidden = x.dim();
        let head_dim = hidden / self.heads;
        let scale = 1.0 / libm::sqrt(head_dim as f64);
        let q = self.query.forward(x);
        let k = self.key.forward(x);
        let v = self.value.forward(x);
        let mut ctx = Matrix::zeros(n, hidden);
        let mut scores = vec![0.0; n];
        for h in 0..self.heads {
            let cols = h * head_dim..(h + 1) * head_dim;
            for t in 0..n {
                let qt = &q.row(t)[cols.clone()];
                let mut max = f64::NEG_INFINITY;
                for (s, score) in scores.iter_mut().enumerate() {
                    let ks = &k.row(s)[cols.clone()];
                    *score = qt.iter().zip(ks).map(|(a, b)| a * b).sum::<f64>() * scale;
                    max = max.max(*score);
                }
                let mut z = 0.0;
                for score in scores.iter_mut() {
                    *score = libm::exp(*score - max);
                    z += *score;
                }
                let dst = &mut ctx.row_mut(t)[cols.clone()];
                for (s, &w) in scores.iter().enumerate() {
                    let vs = &v.row(s)[cols.clone()];
                    for (d, vv) in dst.iter_mut().zip(vs) {
                        *d += w / z * vv;
                    }
                }
            }
        }
        self.output.forward(&ctx)
    }
}

impl Params for SelfAttention {
    fn visit<'a>(&'a self, prefix: &str, f: &mut dyn FnMut(ParamRef<'a>)) {
        self.query.visit(&format!("{prefix}.query"), f);
        self.key.visit(&format!("{prefix}.key"), f);
        self.value.visit(&format!("{prefix}.value"), f);
        self.output.visit(&format!("{prefix}.output"), f);
    }

    fn visit_mut<'a>(&'a mut self, prefix: &str, f: &mut dyn FnMut(ParamMut<'a>)) {
        self.query.visit_mut(&format!("{prefix}.query"), f);
        self.key.visit_mut(&format!("{prefix}.key"), f);
        self.value.visit_mut(&format!("{prefix}.value"), f);
        self.output.visit_mut(&format!("{prefix}.output"), f);
    }
}

/// Feed-Forward Transformer block: self-attention and a two-layer
/// convolutional feed-forward, each with a residual and post-LayerNorm.
#[derive(Debug, Clone, PartialEq)]
pub struct FftBlock {
    pub attention: SelfAttention,
    pub attention_norm: LayerNorm,
    pub conv1: Conv1d,
    pub conv2: Conv1d,
    pub ff_norm: LayerNorm,
}

impl FftBlock {
    pub fn new(hidden: usize, heads: usize, ff_channels: usize, kernel: usize) -> Self {
        Self {
            attention: SelfAttention::new(hidden, heads),
            attention_norm: LayerNorm::new(hidden),
            conv1: Conv1d::new(hidden, ff_channels, kernel),
            conv2: Conv1d::new(ff_channels, hidden, kernel),
            ff_norm: LayerNorm::new(hidden),
        }
    }

    pub fn forward(&self, x: &Matrix) -> Matrix {
        let mut h = self.attention.forward(x);
        h.add_assign(x);
        self.attention_norm.forward_in_place(&mut h);
        let mut ff = self.conv1.forward(&h);
        relu_in_place(&mut ff);
        let mut out = self.conv2.forward(&ff);
        out.add_assign(&h);
        self.ff_norm.forward_in_place(&mut out);
        out
    }
}

impl Params for FftBlock {
    fn visit<'a>(&'a self, prefix: &str, f: &mut dyn FnMut(ParamRef<'a>)) {
        self.attention.visit(&format!("{prefix}.attention"), f);
        self.attention_norm.visit(&format!("{prefix}.attention_norm"), f);
        self.conv1.visit(&format!("{prefix}.conv1"), f);
        self.conv2.visit(&format!("{prefix}.conv2"), f);
        self.ff_norm.visit(&format!("{prefix}.ff_norm"), f);
    }

    fn visit_mut<'a>(&'a mut self, prefix: &str, f: &mut dyn FnMut(ParamMut<'a>)) {
        self.attention.visit_mut(&format!("{prefix}.attention"), f);
        self.attention_norm.visit_mut(&format!("{prefix}.attention_norm"), f);
        self.conv1.visit_mut(&format!("{prefix}.conv1"), f);
        self.conv2.visit_mut(&format!("{prefix}.conv2"), f);
        self.ff_norm.visit_mut(&format!("{prefix}.ff_norm"), f);
    }
}

/// Two conv(k)+ReLU+LayerNorm layers and a projection to one scalar per row.
#[derive(Debug, Clone, PartialEq)]
pub struct VariancePredictor {
    pub conv1: Conv1d,
    pub norm1: LayerNorm,
    pub conv2: Conv1d,
    pub norm2: LayerNorm,
    pub projection: Linear,
}

impl VariancePredictor {
    pub fn new(hidden: usize, channels: usize, kernel: usize) -> Self {
        Self {
            conv1: Conv1d::new(hidden, channels, kernel),
            norm1: LayerNorm::new(channels),
            conv2: Conv1d::new(channels, channels, kernel),
            norm2: LayerNorm::new(channels),
            projection: Linear::new(channels, 1),
        }
    }

    pub fn forward(&self, x: &Matrix) -> Vec<f64> {
        let mut h = self.conv1.forward(x);
        relu_in_place(&mut h);
        self.norm1.forward_in_place(&mut h);
        let mut h2 = self.conv2.forward(&h);
        relu_in_place(&mut h2);
        self.norm2.forward_in_place(&mut h2);
        self.projection.forward(&h2).into_vec()
    }
}

impl Params for VariancePredictor {
    fn visit<'a>(&'a self, prefix: &str, f: &mut dyn FnMut(ParamRef<'a>)) {
        self.conv1.visit(&format!("{prefix}.conv1"), f);
        self.norm1.visit(&format!("{prefix}.norm1"), f);
        self.conv2.visit(&format!("{prefix}.conv2"), f);
        self.norm2.visit(&format!("{prefix}.norm2"), f);
        self.projection.visit(&format!("{prefix}.projection"), f);
    }

    fn visit_mut<'a>(&'a mut self, prefix: &str, f: &mut dyn FnMut(ParamMut<'a>)) {
        self.conv1.visit_mut(&format!("{prefix}.conv1"), f);
        self.norm1.visit_mut(&format!("{prefix}.norm1"), f);
        self.conv2.visit_mut(&format!("{prefix}.conv2"), f);
        self.norm2.visit_mut(&format!("{prefix}.norm2"), f);
        self.projection.visit_mut(&format!("{prefix}.projection"), f);
    }
}

/// Sinusoidal position encodings added in place.
pub fn add_positional_encoding(x: &mut Matrix) {
    let dim = x.dim();
    for pos in 0..x.rows() {
        let row = x.row_mut(pos);
        for (c, v) in row.iter_mut().enumerate() {
            let i = (c / 2) as f64;
            let angle = pos as f64 / libm::pow(10_000.0, 2.0 * i / dim as f64);
            *v += if c % 2 == 0 { libm::sin(angle) } else { libm::cos(angle) };
        }
    }
}
