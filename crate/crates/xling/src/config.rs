//! Flat `key = value` configuration files.
//!
//! A pipeline config may hold any of these keys; paths are relative to the
//! config file. A model config file uses the `model.` keys without the
//! prefix.
//!
//! ```text
//! lexicon.en = en_arpabet.dict      lexicon.cn = cn_pinyin.dict
//! lexicon.ipa = ldp_to_ipa.dict     lexicon.inventory = ipa_inventory.txt
//! feature.sample_rate = 16000       feature.win_ms = 40       feature.hop_ms = 10
//! feature.n_mels = 80               feature.fft_size = 1024   feature.fmin = 0
//! feature.fmax = 8000               feature.log_floor = 1e-5
//! pitch.f0_min = 50                 pitch.f0_max = 600        pitch.voicing_threshold = 0.3
//! quantizer.energy.bins = 256       quantizer.energy.min = 0.01
//! quantizer.energy.max = 100        quantizer.energy.scale = log
//! quantizer.pitch.*                 (same keys)
//! model.hidden = 256                model.enc_layers = 4      ...
//! dataset.spec = d1.spec            out = out/    seed = 0    jobs = 4
//! ```

use std::path::{Path, PathBuf};
use std::str::FromStr;

use xling_core::acoustic::ModelConfig;
use xling_core::features::{FeatureConfig, QuantizerConfig, Scale};
use xling_core::lexicon::{
    Lexicon, BUNDLED_CN_PINYIN, BUNDLED_EN_ARPABET, BUNDLED_IPA_INVENTORY, BUNDLED_LDP_TO_IPA,
};

use crate::error::{Context, Error, Result};
use crate::fsutil;

/// One `key = value` line.
#[derive(Debug, Clone, PartialEq)]
pub struct KvLine {
    pub line: usize,
    pub key: String,
    pub value: String,
}

pub fn parse_kv(origin: &str, src: &str) -> Result<Vec<KvLine>> {
    let mut out: Vec<KvLine> = Vec::new();
    for (i, raw) in src.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::config(origin, i + 1, "expected key = value"))?;
        let key = k.trim().to_string();
        if key.is_empty() {
            return Err(Error::config(origin, i + 1, "empty key"));
        }
        if let Some(prev) = out.iter().find(|l| l.key == key) {
            return Err(Error::config(
                origin,
                i + 1,
                format!("{key} already set on line {}", prev.line),
            ));
        }
        out.push(KvLine {
            line: i + 1,
            key,
            value: v.trim().to_string(),
        });
    }
    Ok(out)
}

fn num<T: FromStr>(origin: &str, kv: &KvLine) -> Result<T> {
    kv.value
        .parse()
        .map_err(|_| Error::config(origin, kv.line, format!("{}: cannot parse {:?}", kv.key, kv.value)))
}

/// Applies one un-prefixed model key. Returns false for unknown keys.
fn apply_model_key(cfg: &mut ModelConfig, origin: &str, key: &str, kv: &KvLine) -> Result<bool> {
    let slot = match key {
        "n_ipa_symbols" => &mut cfg.n_ipa_symbols,
        "n_speakers" => &mut cfg.n_speakers,
        "hidden" => &mut cfg.hidden,
        "enc_layers" => &mut cfg.enc_layers,
        "dec_layers" => &mut cfg.dec_layers,
        "conv_kernel" => &mut cfg.conv_kernel,
        "ff_channels" => &mut cfg.ff_channels,
        "n_mels" => &mut cfg.n_mels,
        "pitch_embed_kernel" => &mut cfg.pitch_embed_kernel,
        "predictor_kernel" => &mut cfg.predictor_kernel,
        _ => return Ok(false),
    };
    *slot = num(origin, kv)?;
    Ok(true)
}

pub fn model_config_to_text(cfg: &ModelConfig) -> String {
    format!(
        "n_ipa_symbols = {}\nn_speakers = {}\nhidden = {}\nenc_layers = {}\ndec_layers = {}\n\
         conv_kernel = {}\nff_channels = {}\nn_mels = {}\npitch_embed_kernel = {}\npredictor_kernel = {}\n",
        cfg.n_ipa_symbols,
        cfg.n_speakers,
        cfg.hidden,
        cfg.enc_layers,
        cfg.dec_layers,
        cfg.conv_kernel,
        cfg.ff_channels,
        cfg.n_mels,
        cfg.pitch_embed_kernel,
        cfg.predictor_kernel
    )
}

/// Reads a standalone model config; unset keys keep `base` values.
pub fn parse_model_config(origin: &str, src: &str, base: ModelConfig) -> Result<ModelConfig> {
    let mut cfg = base;
    for kv in parse_kv(origin, src)? {
        if !apply_model_key(&mut cfg, origin, &kv.key, &kv)? {
            return Err(Error::config(origin, kv.line, format!("unknown key {:?}", kv.key)));
        }
    }
    cfg.validate().at(origin)?;
    Ok(cfg)
}

fn apply_feature_key(cfg: &mut FeatureConfig, origin: &str, key: &str, kv: &KvLine) -> Result<bool> {
    match key {
        "feature.sample_rate" => cfg.sample_rate = num(origin, kv)?,
        "feature.win_ms" => cfg.win_ms = num(origin, kv)?,
        "feature.hop_ms" => cfg.hop_ms = num(origin, kv)?,
        "feature.n_mels" => cfg.n_mels = num(origin, kv)?,
        "feature.fft_size" => cfg.fft_size = num(origin, kv)?,
        "feature.fmin" => cfg.fmin = num(origin, kv)?,
        "feature.fmax" => cfg.fmax = num(origin, kv)?,
        "feature.log_floor" => cfg.log_floor = num(origin, kv)?,
        "pitch.f0_min" => cfg.pitch.f0_min = num(origin, kv)?,
        "pitch.f0_max" => cfg.pitch.f0_max = num(origin, kv)?,
        "pitch.voicing_threshold" => cfg.pitch.voicing_threshold = num(origin, kv)?,
        "pitch.octave_ratio" => cfg.pitch.octave_ratio = num(origin, kv)?,
        "pitch.silence_rms" => cfg.pitch.silence_rms = num(origin, kv)?,
        _ => return Ok(false),
    }
    Ok(true)
}

fn apply_quantizer_key(q: &mut QuantizerConfig, origin: &str, key: &str, kv: &KvLine) -> Result<bool> {
    match key {
        "bins" => q.n_bins = num(origin, kv)?,
        "min" => q.v_min = num(origin, kv)?,
        "max" => q.v_max = num(origin, kv)?,
        "scale" => {
            q.scale = match kv.value.as_str() {
                "linear" => Scale::Linear,
                "log" => Scale::Log,
                other => {
                    return Err(Error::config(
                        origin,
                        kv.line,
                        format!("scale must be linear or log, got {other:?}"),
                    ))
                }
            }
        }
        _ => return Ok(false),
    }
    Ok(true)
}

pub fn default_pitch_quantizer() -> QuantizerConfig {
    QuantizerConfig {
        n_bins: 256,
        v_min: 50.0,
        v_max: 600.0,
        scale: Scale::Log,
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct LexiconPaths {
    pub en: Option<PathBuf>,
    pub cn: Option<PathBuf>,
    pub ipa: Option<PathBuf>,
    pub inventory: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub lexicon: LexiconPaths,
    pub features: FeatureConfig,
    pub energy_quantizer: QuantizerConfig,
    pub pitch_quantizer: QuantizerConfig,
    /// `n_ipa_symbols` is filled from the lexicon inventory unless set.
    pub model: ModelConfig,
    pub model_symbols_set: bool,
    pub dataset_spec: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub jobs: Option<usize>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            lexicon: LexiconPaths::default(),
            features: FeatureConfig::default(),
            energy_quantizer: QuantizerConfig::default(),
            pitch_quantizer: default_pitch_quantizer(),
            model: ModelConfig::default(),
            model_symbols_set: false,
            dataset_spec: None,
            out: None,
            seed: None,
            jobs: None,
        }
    }
}

impl PipelineConfig {
    pub fn parse(origin: &str, src: &str, base_dir: &Path) -> Result<Self> {
        let mut cfg = Self::default();
        let path = |kv: &KvLine| Some(base_dir.join(&kv.value));
        for kv in parse_kv(origin, src)? {
            let key = kv.key.as_str();
            let known = match key {
                "lexicon.en" => {
                    cfg.lexicon.en = path(&kv);
                    true
                }
                "lexicon.cn" => {
                    cfg.lexicon.cn = path(&kv);
                    true
                }
                "lexicon.ipa" => {
                    cfg.lexicon.ipa = path(&kv);
                    true
                }
                "lexicon.inventory" => {
                    cfg.lexicon.inventory = path(&kv);
                    true
                }
                "dataset.spec" => {
                    cfg.dataset_spec = path(&kv);
                    true
                }
                "out" => {
                    cfg.out = path(&kv);
                    true
                }
                "seed" => {
                    cfg.seed = Some(num(origin, &kv)?);
                    true
                }
                "jobs" => {
                    cfg.jobs = Some(num(origin, &kv)?);
                    true
                }
                _ => {
                    if let Some(rest) = key.strip_prefix("model.") {
                        cfg.model_symbols_set |= rest == "n_ipa_symbols";
                        apply_model_key(&mut cfg.model, origin, rest, &kv)?
                    } else if let Some(rest) = key.strip_prefix("quantizer.energy.") {
                        apply_quantizer_key(&mut cfg.energy_quantizer, origin, rest, &kv)?
                    } else if let Some(rest) = key.strip_prefix("quantizer.pitch.") {
                        apply_quantizer_key(&mut cfg.pitch_quantizer, origin, rest, &kv)?
                    } else {
                        apply_feature_key(&mut cfg.features, origin, key, &kv)?
                    }
                }
            };
            if !known {
                return Err(Error::config(origin, kv.line, format!("unknown key {key:?}")));
            }
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let src = fsutil::read_to_string(path)?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&path.display().to_string(), &src, base)
    }

    /// Checks referenced files exist and every sub-config is valid.
    pub fn validate(&self) -> Result<()> {
        let files = [
            &self.lexicon.en,
            &self.lexicon.cn,
            &self.lexicon.ipa,
            &self.lexicon.inventory,
            &self.dataset_spec,
        ];
        for p in files.into_iter().flatten() {
            if !p.is_file() {
                return Err(Error::io(
                    p,
                    std::io::Error::new(std::io::ErrorKind::NotFound, "referenced file does not exist"),
                ));
            }
        }
        self.features.validate().at("feature config")?;
        self.energy_quantizer.validate().at("energy quantizer")?;
        self.pitch_quantizer.validate().at("pitch quantizer")?;
        self.model.validate().at("model config")?;
        if self.jobs == Some(0) {
            return Err(Error::Usage("jobs must be at least 1".into()));
        }
        Ok(())
    }

    pub fn load_lexicon(&self) -> Result<Lexicon> {
        let read = |p: &Option<PathBuf>, bundled: &'static str| -> Result<String> {
            match p {
                Some(p) => fsutil::read_to_string(p),
                None => Ok(bundled.to_string()),
            }
        };
        let en = read(&self.lexicon.en, BUNDLED_EN_ARPABET)?;
        let cn = read(&self.lexicon.cn, BUNDLED_CN_PINYIN)?;
        let ipa = read(&self.lexicon.ipa, BUNDLED_LDP_TO_IPA)?;
        let inv = read(&self.lexicon.inventory, BUNDLED_IPA_INVENTORY)?;
        Lexicon::from_sources(&en, &cn, &ipa, &inv).at("lexicon")
    }

    /// Model config sized to `lexicon`'s inventory unless set explicitly.
    pub fn model_for(&self, lexicon: &Lexicon) -> Result<ModelConfig> {
        let mut m = self.model.clone();
        if !self.model_symbols_set {
            m.n_ipa_symbols = lexicon.inventory().len();
        }
        if m.n_ipa_symbols < lexicon.inventory().len() {
            return Err(Error::Usage(format!(
                "model.n_ipa_symbols = {} is smaller than the IPA inventory ({})",
                m.n_ipa_symbols,
                lexicon.inventory().len()
            )));
        }
        m.validate().at("model config")?;
        Ok(m)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_all_sections() {
        let src = "feature.win_ms = 40\nquantizer.pitch.bins = 64\nquantizer.energy.scale = linear\n\
                   model.hidden = 8\nseed = 3\nlexicon.en = en.dict # comment\n";
        let c = PipelineConfig::parse("c", src, Path::new("/cfg")).unwrap();
        assert_eq!(c.pitch_quantizer.n_bins, 64);
        assert_eq!(c.energy_quantizer.scale, Scale::Linear);
        assert_eq!(c.model.hidden, 8);
        assert_eq!(c.seed, Some(3));
        assert_eq!(c.lexicon.en, Some(PathBuf::from("/cfg/en.dict")));
    }

    #[test]
    fn errors_carry_line_numbers() {
        let e = PipelineConfig::parse("c", "seed = 1\nbogus = 2\n", Path::new(".")).unwrap_err();
        assert_eq!(e.to_string(), "c:2: unknown key \"bogus\"");
        let e = PipelineConfig::parse("c", "seed = x\n", Path::new(".")).unwrap_err();
        assert_eq!(e.code(), "ConfigError");
        assert!(parse_kv("c", "a = 1\na = 2\n").is_err());
    }

    #[test]
    fn missing_referenced_file_fails_validation() {
        let c = PipelineConfig::parse("c", "lexicon.en = /nonexistent/en.dict\n", Path::new(".")).unwrap();
        assert_eq!(c.validate().unwrap_err().code(), "IoError");
    }

    #[test]
    fn model_config_round_trip() {
        let m = ModelConfig { hidden: 16, ..ModelConfig::default() };
        let text = model_config_to_text(&m);
        assert_eq!(parse_model_config("m", &text, ModelConfig::default()).unwrap(), m);
        assert!(parse_model_config("m", "hidden = 7\n", ModelConfig::default()).is_err());
    }

    #[test]
    fn model_symbols_follow_inventory() {
        let c = PipelineConfig::default();
        let lex = c.load_lexicon().unwrap();
        assert_eq!(c.model_for(&lex).unwrap().n_ipa_symbols, lex.inventory().len());
    }
}
