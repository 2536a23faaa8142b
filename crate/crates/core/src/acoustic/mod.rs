//! Forward-only acoustic model with the proposed dataflow.
//!
//! IPA embeddings → encoder FFT blocks → phoneme length regulator (one row
//! per language-dependent phoneme) → + speaker embedding → duration, pitch
//! and energy predictors behind stop-gradient edges → + pitch embedding
//! (1-D convolution over phoneme pitch) → duration expansion → decoder FFT
//! blocks → mel projection.
//!
//! Parameters come from a seeded xorshift64* stream (see [`crate::rng`]);
//! nothing here trains.

mod layers;

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use thiserror::Error;

use crate::matrix::Matrix;
use crate::regulator::{self, DurationSequence, LengthSequence};
use crate::rng::XorShift64Star;

pub use layers::{
    add_positional_encoding, Conv1d, FftBlock, LayerNorm, Linear, ParamKind, ParamMut, ParamRef,
    SelfAttention, VariancePredictor,
};
use layers::Params;

/// Attention heads per FFT block.
pub const HEADS: usize = 2;
/// Parameters are drawn uniformly from `[-INIT_RANGE, INIT_RANGE)`.
pub const INIT_RANGE: f64 = 0.1;
/// `exp(log-duration)` above this many frames is reported instead of expanded.
pub const MAX_FRAMES_PER_PHONEME: f64 = 10_000.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("invalid model config: {0}")]
    BadConfig(String),
    #[error("shape mismatch in {what}: expected {expected}, got {got}")]
    ShapeMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("speaker {id} out of range (model has {n_speakers})")]
    UnknownSpeaker { id: usize, n_speakers: usize },
    #[error("IPA id {id} out of range (model has {n_symbols})")]
    UnknownSymbol { id: usize, n_symbols: usize },
    #[error("predicted duration for phoneme {index} exceeds {MAX_FRAMES_PER_PHONEME} frames")]
    DurationOverflow { index: usize },
    #[error("no parameter named {0:?}")]
    UnknownParam(String),
}

impl ModelError {
    pub fn code(&self) -> &'static str {
        match self {
            ModelError::BadConfig(_) => "BadConfig",
            ModelError::ShapeMismatch { .. } => "ShapeMismatch",
            ModelError::UnknownSpeaker { .. } => "UnknownSpeaker",
            ModelError::UnknownSymbol { .. } => "UnknownSymbol",
            ModelError::DurationOverflow { .. } => "DurationOverflow",
            ModelError::UnknownParam(_) => "UnknownParam",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModelConfig {
    pub n_ipa_symbols: usize,
    pub n_speakers: usize,
    pub hidden: usize,
    pub enc_layers: usize,
    pub dec_layers: usize,
    pub conv_kernel: usize,
    pub ff_channels: usize,
    pub n_mels: usize,
    pub pitch_embed_kernel: usize,
    pub predictor_kernel: usize,
}

impl Default for ModelConfig {
    /// Hidden 256, 4 + 4 FFT blocks, kernel 9, 1024 feed-forward channels, 80 mels.
    fn default() -> Self {
        Self {
            n_ipa_symbols: 56,
            n_speakers: 8,
            hidden: 256,
            enc_layers: 4,
            dec_layers: 4,
            conv_kernel: 9,
            ff_channels: 1024,
            n_mels: 80,
            pitch_embed_kernel: 3,
            predictor_kernel: 3,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |m: &str| Err(ModelError::BadConfig(m.to_string()));
        if self.n_ipa_symbols == 0 || self.n_speakers == 0 {
            return bad("symbol and speaker tables must be non-empty");
        }
        if self.hidden == 0 || self.ff_channels == 0 || self.n_mels == 0 {
            return bad("hidden, ff_channels and n_mels must be positive");
        }
        if !self.hidden.is_multiple_of(HEADS) {
            return bad("hidden must be divisible by the head count (2)");
        }
        for (name, k) in [
            ("conv_kernel", self.conv_kernel),
            ("pitch_embed_kernel", self.pitch_embed_kernel),
            ("predictor_kernel", self.predictor_kernel),
        ] {
            if k % 2 == 0 {
                return Err(ModelError::BadConfig(format!("{name} must be odd, got {k}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Weights {
    config: ModelConfig,
    pub ipa_embedding: Matrix,
    pub speaker_embedding: Matrix,
    pub encoder: Vec<FftBlock>,
    pub duration_predictor: VariancePredictor,
    pub pitch_predictor: VariancePredictor,
    pub energy_predictor: VariancePredictor,
    pub pitch_embedding: Conv1d,
    pub decoder: Vec<FftBlock>,
    pub mel_projection: Linear,
}

impl Weights {
    /// All-zero parameters (norm gains one) with the configured shapes.
    pub fn zeroed(config: &ModelConfig) -> Result<Self, ModelError> {
        config.validate()?;
        let c = config;
        let block = || FftBlock::new(c.hidden, HEADS, c.ff_channels, c.conv_kernel);
        let predictor = || VariancePredictor::new(c.hidden, c.hidden, c.predictor_kernel);
        Ok(Self {
            config: c.clone(),
            ipa_embedding: Matrix::zeros(c.n_ipa_symbols, c.hidden),
            speaker_embedding: Matrix::zeros(c.n_speakers, c.hidden),
            encoder: (0..c.enc_layers).map(|_| block()).collect(),
            duration_predictor: predictor(),
            pitch_predictor: predictor(),
            energy_predictor: predictor(),
            pitch_embedding: Conv1d::new(1, c.hidden, c.pitch_embed_kernel),
            decoder: (0..c.dec_layers).map(|_| block()).collect(),
            mel_projection: Linear::new(c.hidden, c.n_mels),
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    /// Visits every parameter tensor in a fixed order.
    pub fn for_each_param<'a>(&'a self, mut f: impl FnMut(ParamRef<'a>)) {
        let f: &mut dyn FnMut(ParamRef<'a>) = &mut f;
        f(ParamRef {
            name: "ipa_embedding".into(),
            kind: ParamKind::Weight,
            shape: vec![self.ipa_embedding.rows(), self.ipa_embedding.dim()],
            values: self.ipa_embedding.as_slice(),
        });
        f(ParamRef {
            name: "speaker_embedding".into(),
            kind: ParamKind::Weight,
            shape: vec![self.speaker_embedding.rows(), self.speaker_embedding.dim()],
            values: self.speaker_embedding.as_slice(),
        });
        for (i, b) in self.encoder.iter().enumerate() {
            b.visit(&format!("encoder.{i}"), f);
        }
        self.duration_predictor.visit("duration_predictor", f);
        self.pitch_predictor.visit("pitch_predictor", f);
        self.energy_predictor.visit("energy_predictor", f);
        self.pitch_embedding.visit("pitch_embedding", f);
        for (i, b) in self.decoder.iter().enumerate() {
            b.visit(&format!("decoder.{i}"), f);
        }
        self.mel_projection.visit("mel_projection", f);
    }

    pub fn for_each_param_mut<'a>(&'a mut self, mut f: impl FnMut(ParamMut<'a>)) {
        let f: &mut dyn FnMut(ParamMut<'a>) = &mut f;
        let shape = vec![self.ipa_embedding.rows(), self.ipa_embedding.dim()];
        f(ParamMut {
            name: "ipa_embedding".into(),
            kind: ParamKind::Weight,
            shape,
            values: self.ipa_embedding.as_mut_slice(),
        });
        let shape = vec![self.speaker_embedding.rows(), self.speaker_embedding.dim()];
        f(ParamMut {
            name: "speaker_embedding".into(),
            kind: ParamKind::Weight,
            shape,
            values: self.speaker_embedding.as_mut_slice(),
        });
        for (i, b) in self.encoder.iter_mut().enumerate() {
            b.visit_mut(&format!("encoder.{i}"), f);
        }
        self.duration_predictor.visit_mut("duration_predictor", f);
        self.pitch_predictor.visit_mut("pitch_predictor", f);
        self.energy_predictor.visit_mut("energy_predictor", f);
        self.pitch_embedding.visit_mut("pitch_embedding", f);
        for (i, b) in self.decoder.iter_mut().enumerate() {
            b.visit_mut(&format!("decoder.{i}"), f);
        }
        self.mel_projection.visit_mut("mel_projection", f);
    }

    pub fn param_count(&self) -> usize {
        let mut n = 0;
        self.for_each_param(|p| n += p.values.len());
        n
    }

    /// Overwrites one named parameter tensor.
    pub fn set_param(&mut self, name: &str, shape: &[usize], values: &[f64]) -> Result<(), ModelError> {
        let mut found = None;
        self.for_each_param_mut(|p| {
            if p.name == name {
                found = Some(if p.shape.as_slice() == shape && p.values.len() == values.len() {
                    p.values.copy_from_slice(values);
                    Ok(())
                } else {
                    Err(ModelError::ShapeMismatch {
                        what: "parameter",
                        expected: p.values.len(),
                        got: values.len(),
                    })
                });
            }
        });
        if values.iter().any(|v| !v.is_finite()) {
            return Err(ModelError::BadConfig(format!("{name} has non-finite values")));
        }
        found.unwrap_or_else(|| Err(ModelError::UnknownParam(name.to_string())))
    }
}

/// Deterministic parameters for `(config, seed)`.
///
/// Weights and biases are uniform in `[-0.1, 0.1)`, visited in
/// [`Weights::for_each_param`] order; LayerNorm gains are 1 and offsets 0.
pub fn init_weights(config: &ModelConfig, seed: u64) -> Result<Weights, ModelError> {
    let mut w = Weights::zeroed(config)?;
    let mut rng = XorShift64Star::new(seed);
    w.for_each_param_mut(|p| match p.kind {
        ParamKind::Weight | ParamKind::Bias => {
            for v in p.values.iter_mut() {
                *v = rng.uniform(-INIT_RANGE, INIT_RANGE);
            }
        }
        ParamKind::NormGain => p.values.fill(1.0),
        ParamKind::NormBias => p.values.fill(0.0),
    });
    Ok(w)
}

/// IPA ids with the phoneme lengths grouping them.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModelInput {
    pub ipa_ids: Vec<usize>,
    pub lengths: LengthSequence,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Mode {
    /// Ground-truth durations (frames), pitch and energy per phoneme.
    TeacherForced {
        durations: DurationSequence,
        pitch: Vec<f64>,
        energy: Vec<f64>,
    },
    /// Durations are `round(exp(log-duration prediction))`, pitch is predicted.
    Inference,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceEntry {
    pub stage: String,
    pub shape: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForwardOutput {
    pub mel_pred: Matrix,
    /// Log-domain frame counts per phoneme.
    pub dur_pred: Vec<f64>,
    pub pitch_pred: Vec<f64>,
    pub energy_pred: Vec<f64>,
    pub durations_used: DurationSequence,
    pub trace: Vec<TraceEntry>,
}

fn check_len(what: &'static str, expected: usize, got: usize) -> Result<(), ModelError> {
    if expected == got {
        Ok(())
    } else {
        Err(ModelError::ShapeMismatch { what, expected, got })
    }
}

/// Stage names recorded in [`ForwardOutput::trace`], in order.
pub mod stage {
    pub const EMBED: &str = "embed";
    pub const ENCODER: &str = "encoder";
    pub const AGGREGATE: &str = "aggregate";
    pub const ADD_SPEAKER: &str = "add_speaker";
    pub const STOP_GRAD_DURATION: &str = "stop_grad:duration_predictor";
    pub const DURATION_PREDICTOR: &str = "duration_predictor";
    pub const STOP_GRAD_PITCH: &str = "stop_grad:pitch_predictor";
    pub const PITCH_PREDICTOR: &str = "pitch_predictor";
    pub const STOP_GRAD_ENERGY: &str = "stop_grad:energy_predictor";
    pub const ENERGY_PREDICTOR: &str = "energy_predictor";
    pub const PITCH_EMBEDDING: &str = "add_pitch_embedding";
    pub const EXPAND: &str = "expand";
    pub const DECODER: &str = "decoder";
    pub const MEL: &str = "mel_projection";
}

pub fn forward(
    w: &Weights,
    input: &ModelInput,
    speaker: usize,
    mode: &Mode,
) -> Result<ForwardOutput, ModelError> {
    let cfg = &w.config;
    let t_x = input.ipa_ids.len();
    let t_l = input.lengths.len();
    check_len("phoneme lengths vs IPA ids", input.lengths.total(), t_x)?;
    if let Some(&id) = input.ipa_ids.iter().find(|&&id| id >= cfg.n_ipa_symbols) {
        return Err(ModelError::UnknownSymbol {
            id,
            n_symbols: cfg.n_ipa_symbols,
        });
    }
    if speaker >= cfg.n_speakers {
        return Err(ModelError::UnknownSpeaker {
            id: speaker,
            n_speakers: cfg.n_speakers,
        });
    }
    if let Mode::TeacherForced {
        durations,
        pitch,
        energy,
    } = mode
    {
        check_len("teacher durations", t_l, durations.len())?;
        check_len("teacher pitch", t_l, pitch.len())?;
        check_len("teacher energy", t_l, energy.len())?;
    }

    let mut trace = Vec::new();
    let mut record = |stage: &str, shape: &[usize]| {
        trace.push(TraceEntry {
            stage: stage.to_string(),
            shape: shape.to_vec(),
        })
    };
    let hidden = cfg.hidden;

    let mut x = Matrix::from_fn(t_x, hidden, |r, c| w.ipa_embedding.get(input.ipa_ids[r], c));
    add_positional_encoding(&mut x);
    record(stage::EMBED, &[t_x, hidden]);

    for block in &w.encoder {
        x = block.forward(&x);
    }
    record(stage::ENCODER, &[t_x, hidden]);

    let mut h = regulator::aggregate(&x, &input.lengths).map_err(|_| ModelError::ShapeMismatch {
        what: "aggregate",
        expected: input.lengths.total(),
        got: t_x,
    })?;
    record(stage::AGGREGATE, &[t_l, hidden]);

    let spk = w.speaker_embedding.row(speaker);
    for r in 0..t_l {
        for (v, s) in h.row_mut(r).iter_mut().zip(spk) {
            *v += s;
        }
    }
    record(stage::ADD_SPEAKER, &[t_l, hidden]);

    // Stop-gradient edges are the identity going forward.
    record(stage::STOP_GRAD_DURATION, &[t_l, hidden]);
    let dur_pred = w.duration_predictor.forward(&h);
    record(stage::DURATION_PREDICTOR, &[t_l]);
    record(stage::STOP_GRAD_PITCH, &[t_l, hidden]);
    let pitch_pred = w.pitch_predictor.forward(&h);
    record(stage::PITCH_PREDICTOR, &[t_l]);
    record(stage::STOP_GRAD_ENERGY, &[t_l, hidden]);
    let energy_pred = w.energy_predictor.forward(&h);
    record(stage::ENERGY_PREDICTOR, &[t_l]);

    let (durations, pitch) = match mode {
        Mode::TeacherForced {
            durations, pitch, ..
        } => (durations.clone(), pitch.clone()),
        Mode::Inference => {
            let mut frames = Vec::with_capacity(t_l);
            for (index, &d) in dur_pred.iter().enumerate() {
                let n = libm::round(libm::exp(d)).max(0.0);
                if n.is_nan() || n > MAX_FRAMES_PER_PHONEME {
                    return Err(ModelError::DurationOverflow { index });
                }
                frames.push(n as usize);
            }
            (DurationSequence::new(frames), pitch_pred.clone())
        }
    };

    let pitch_col = Matrix::new(t_l, 1, pitch).map_err(|_| ModelError::BadConfig("non-finite pitch".into()))?;
    let pitch_emb = w.pitch_embedding.forward(&pitch_col);
    h.add_assign(&pitch_emb);
    record(stage::PITCH_EMBEDDING, &[t_l, hidden]);

    let mut frames = regulator::expand(&h, &durations).map_err(|_| ModelError::ShapeMismatch {
        what: "expand",
        expected: t_l,
        got: durations.len(),
    })?;
    let t_f = frames.rows();
    record(stage::EXPAND, &[t_f, hidden]);

    add_positional_encoding(&mut frames);
    for block in &w.decoder {
        frames = block.forward(&frames);
    }
    record(stage::DECODER, &[t_f, hidden]);

    let mel_pred = w.mel_projection.forward(&frames);
    record(stage::MEL, &[t_f, cfg.n_mels]);

    Ok(ForwardOutput {
        mel_pred,
        dur_pred,
        pitch_pred,
        energy_pred,
        durations_used: durations,
        trace,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossTargets {
    pub mel: Matrix,
    pub log_durations: Vec<f64>,
    pub pitch: Vec<f64>,
    pub energy: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Losses {
    pub mel_loss: f64,
    pub dur_loss: f64,
    pub pitch_loss: f64,
    pub energy_loss: f64,
}

fn mse(what: &'static str, pred: &[f64], target: &[f64]) -> Result<f64, ModelError> {
    check_len(what, pred.len(), target.len())?;
    if pred.is_empty() {
        return Ok(0.0);
    }
    let sum: f64 = pred.iter().zip(target).map(|(p, t)| (p - t) * (p - t)).sum();
    Ok(sum / pred.len() as f64)
}

/// Mean squared error of each prediction against its target. Empty pairs give 0.
pub fn mse_losses(out: &ForwardOutput, targets: &LossTargets) -> Result<Losses, ModelError> {
    check_len("mel rows", out.mel_pred.rows(), targets.mel.rows())?;
    check_len("mel columns", out.mel_pred.dim(), targets.mel.dim())?;
    Ok(Losses {
        mel_loss: mse("mel", out.mel_pred.as_slice(), targets.mel.as_slice())?,
        dur_loss: mse("log durations", &out.dur_pred, &targets.log_durations)?,
        pitch_loss: mse("pitch", &out.pitch_pred, &targets.pitch)?,
        energy_loss: mse("energy", &out.energy_pred, &targets.energy)?,
    })
}
