use std::path::{Path, PathBuf};

use rayon::prelude::*;
use xling_core::acoustic::{forward, init_weights, ForwardOutput, ModelInput, Mode};
use xling_core::corpus::{self, balance_report, AlignmentRecord, DatasetSpec};
use xling_core::features::{
    average_by_phoneme, quantize, FeatureExtractor, FrameSeries, QuantizerConfig,
};
use xling_core::regulator;
use xling_core::{DurationSequence, LengthSequence};

use crate::cli::{
    Cli, Command, FeaturesArgs, ForwardArgs, G2pArgs, ManifestArgs, RegulateArgs, StatsArgs,
};
use crate::config::{self, PipelineConfig};
use crate::error::{Context as _, Error, Result};
use crate::xlf::{self, Tensor};
use crate::{fsutil, phon, wav, weights};

/// Resolved settings shared by every command.
pub struct Context {
    pub config: PipelineConfig,
    pub out: PathBuf,
    pub seed: u64,
    pool: rayon::ThreadPool,
}

impl Context {
    pub fn from_cli(cli: &Cli) -> Result<Self> {
        let mut config = match &cli.config {
            Some(p) => PipelineConfig::load(p)?,
            None => PipelineConfig::default(),
        };
        if cli.jobs.is_some() {
            config.jobs = cli.jobs;
        }
        config.validate()?;
        let mut builder = rayon::ThreadPoolBuilder::new();
        if let Some(n) = config.jobs {
            builder = builder.num_threads(n);
        }
        let pool = builder
            .build()
            .map_err(|e| Error::Usage(format!("cannot start worker pool: {e}")))?;
        Ok(Self {
            out: cli.out.clone().or_else(|| config.out.clone()).unwrap_or_else(|| "out".into()),
            seed: cli.seed.or(config.seed).unwrap_or(0),
            config,
            pool,
        })
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }
}

/// Runs one command and returns the files it wrote, in a fixed order.
pub fn run(cli: &Cli) -> Result<Vec<PathBuf>> {
    let ctx = Context::from_cli(cli)?;
    match &cli.command {
        Command::G2p(a) => g2p(&ctx, a),
        Command::Regulate(a) => regulate(&ctx, a),
        Command::Features(a) => features(&ctx, a),
        Command::Stats(a) => stats(&ctx, a),
        Command::Forward(a) => forward_cmd(&ctx, a),
        Command::Manifest(a) => manifest(&ctx, a),
    }
}

fn check_id(id: &str, origin: &str) -> Result<()> {
    if id.is_empty() || id.contains(['/', '\\']) || id == "." || id == ".." {
        return Err(Error::Usage(format!("{origin}: {id:?} cannot be used as an output name")));
    }
    Ok(())
}

fn g2p(ctx: &Context, a: &G2pArgs) -> Result<Vec<PathBuf>> {
    let lexicon = ctx.config.load_lexicon()?;
    let items: Vec<(String, String, String)> = match (&a.source.text, &a.source.input) {
        (Some(text), _) => vec![(a.id.clone(), text.clone(), "--text".to_string())],
        (None, Some(path)) => {
            let src = fsutil::read_to_string(path)?;
            let mut items = Vec::new();
            for (i, line) in src.lines().enumerate() {
                if line.trim().is_empty() {
                    continue;
                }
                let (id, text) = line.split_once('\t').ok_or_else(|| {
                    Error::format(path, format!("line {}: expected utt_id<TAB>text", i + 1))
                })?;
                items.push((id.to_string(), text.to_string(), format!("{}:{}", path.display(), i + 1)));
            }
            items
        }
        (None, None) => unreachable!("clap requires one input"),
    };
    let mut written = Vec::new();
    for (id, text, origin) in items {
        check_id(&id, &origin)?;
        let seq = lexicon.text_to_phoneme_sequence(&text).at(&origin)?;
        let path = ctx.path(&format!("{id}.phon"));
        fsutil::write_atomic(&path, phon::encode(&seq).as_bytes())?;
        log::info!("{id}: {} LDPs, {} IPA symbols", seq.ldp.len(), seq.ipa.len());
        written.push(path);
    }
    Ok(written)
}

fn parse_list(flag: &str, s: &str) -> Result<Vec<usize>> {
    if s.trim().is_empty() {
        return Ok(Vec::new());
    }
    s.split(',')
        .map(|v| {
            v.trim()
                .parse()
                .map_err(|_| Error::Usage(format!("{flag}: {v:?} is not a non-negative integer")))
        })
        .collect()
}

fn regulate(ctx: &Context, a: &RegulateArgs) -> Result<Vec<PathBuf>> {
    check_id(&a.name, "--name")?;
    let x = xlf::read_single(&a.embeddings)?.to_matrix(&a.embeddings)?;
    let lengths = LengthSequence::new(parse_list("--lengths", &a.lengths)?).at("--lengths")?;
    let y = regulator::aggregate(&x, &lengths).at(a.embeddings.display())?;
    let mut written = Vec::new();
    let p = ctx.path(&format!("{}.aggregated.xlf", a.name));
    xlf::write(&p, &[Tensor::matrix("aggregated", &y)])?;
    written.push(p);
    if let Some(d) = &a.durations {
        let d = DurationSequence::new(parse_list("--durations", d)?);
        let z = regulator::expand(&y, &d).at("--durations")?;
        let p = ctx.path(&format!("{}.expanded.xlf", a.name));
        xlf::write(&p, &[Tensor::matrix("expanded", &z)])?;
        written.push(p);
    }
    Ok(written)
}

struct FeatureJob {
    id: String,
    wav: PathBuf,
    alignment: Option<PathBuf>,
}

fn bins_tensor(name: &str, values: &[f64], q: &QuantizerConfig, origin: &str) -> Result<Tensor> {
    let bins = quantize(values, q).at(origin)?;
    Ok(Tensor::vector(name, bins.into_iter().map(|b| b as f64).collect()))
}

fn extract_one(ctx: &Context, ext: &FeatureExtractor, job: &FeatureJob) -> Result<Vec<PathBuf>> {
    let origin = job.wav.display().to_string();
    let audio = wav::read(&job.wav)?;
    let mags = ext.magnitudes(&audio).at(&origin)?;
    let mel = ext.mel_from_magnitudes(&mags);
    let energy = ext.energy_from_magnitudes(&mags);
    let pitch = ext.pitch_per_frame(&audio).at(&origin)?;
    let n_frames = mel.frames.rows();

    let mut outputs = vec![
        ("mel", vec![Tensor::matrix("mel", &mel.frames)]),
        ("energy", vec![Tensor::vector("energy", energy.values.clone())]),
        ("pitch", vec![Tensor::vector("pitch", pitch.values.clone())]),
    ];
    if let Some(align_path) = &job.alignment {
        let aorigin = align_path.display().to_string();
        let record = AlignmentRecord::parse(&job.id, &fsutil::read_to_string(align_path)?).at(&aorigin)?;
        record.check_duration(audio.duration_sec()).at(&aorigin)?;
        let durations = record.durations_for_frames(n_frames).at(&aorigin)?;
        let e_phone = average_by_phoneme(&energy, &durations).at(&aorigin)?;
        let p_phone = average_by_phoneme(&pitch, &durations).at(&aorigin)?;
        let d_values = durations.as_slice().iter().map(|&d| d as f64).collect();
        let q = &ctx.config;
        outputs.push(("durations", vec![Tensor::vector("durations", d_values)]));
        outputs.push((
            "energy.bins",
            vec![bins_tensor("energy_bins", &e_phone, &q.energy_quantizer, &aorigin)?],
        ));
        outputs.push((
            "pitch.bins",
            vec![bins_tensor("pitch_bins", &p_phone, &q.pitch_quantizer, &aorigin)?],
        ));
        outputs.push(("energy.phone", vec![Tensor::vector("energy_phone", e_phone)]));
        outputs.push(("pitch.phone", vec![Tensor::vector("pitch_phone", p_phone)]));
    }
    let mut written = Vec::new();
    for (suffix, sections) in outputs {
        let p = ctx.path(&format!("{}.{suffix}.xlf", job.id));
        xlf::write(&p, &sections)?;
        written.push(p);
    }
    log::debug!("{}: {n_frames} frames", job.id);
    Ok(written)
}

fn read_manifest(path: &Path) -> Result<Vec<corpus::ManifestEntry>> {
    let src = fsutil::read_to_string(path)?;
    corpus::parse_manifest(&path.display().to_string(), &src).at(path.display())
}

/// Runs `f` over `items` on the pool; the first failure in input order wins.
fn par_map<T: Sync, R: Send>(ctx: &Context, items: &[T], f: impl Fn(&T) -> Result<R> + Sync) -> Result<Vec<R>> {
    ctx.pool.install(|| items.par_iter().map(&f).collect::<Vec<_>>()).into_iter().collect()
}

fn features(ctx: &Context, a: &FeaturesArgs) -> Result<Vec<PathBuf>> {
    let ext = FeatureExtractor::new(ctx.config.features.clone()).at("feature config")?;
    let jobs = match (&a.source.wav, &a.source.manifest) {
        (Some(w), _) => {
            let id = match &a.id {
                Some(id) => id.clone(),
                None => w
                    .file_stem()
                    .and_then(|s| s.to_str())
                    .ok_or_else(|| Error::format(w, "file name is not UTF-8"))?
                    .to_string(),
            };
            vec![FeatureJob {
                id,
                wav: w.clone(),
                alignment: a.alignment.clone(),
            }]
        }
        (None, Some(m)) => read_manifest(m)?
            .into_iter()
            .map(|e| FeatureJob {
                id: e.utt_id,
                wav: e.audio_path.into(),
                alignment: Some(e.alignment_path.into()),
            })
            .collect(),
        (None, None) => unreachable!("clap requires one input"),
    };
    for j in &jobs {
        check_id(&j.id, &j.wav.display().to_string())?;
    }
    let written = par_map(ctx, &jobs, |j| extract_one(ctx, &ext, j))?;
    log::info!("features for {} utterances", jobs.len());
    Ok(written.into_iter().flatten().collect())
}

struct Range {
    min: f64,
    max: f64,
}

impl Range {
    fn empty() -> Self {
        Range {
            min: f64::INFINITY,
            max: f64::NEG_INFINITY,
        }
    }

    fn add_positive(&mut self, series: &FrameSeries) -> usize {
        let mut n = 0;
        for &v in series.values.iter().filter(|v| **v > 0.0) {
            self.min = self.min.min(v);
            self.max = self.max.max(v);
            n += 1;
        }
        n
    }
}

fn stats(ctx: &Context, a: &StatsArgs) -> Result<Vec<PathBuf>> {
    let ext = FeatureExtractor::new(ctx.config.features.clone()).at("feature config")?;
    let entries = read_manifest(&a.manifest)?;
    if entries.is_empty() {
        return Err(corpus::CorpusError::EmptyManifest).at(a.manifest.display());
    }
    let per_utt = par_map(ctx, &entries, |e| {
        let path = Path::new(&e.audio_path);
        let audio = wav::read(path)?;
        let energy = ext.energy_per_frame(&audio).at(path.display())?;
        let pitch = ext.pitch_per_frame(&audio).at(path.display())?;
        Ok((energy, pitch))
    })?;
    let (mut energy, mut pitch) = (Range::empty(), Range::empty());
    let (mut frames, mut voiced) = (0, 0);
    for (e, p) in &per_utt {
        frames += e.values.len();
        energy.add_positive(e);
        voiced += pitch.add_positive(p);
    }
    if voiced == 0 || !energy.min.is_finite() {
        return Err(Error::Usage(format!(
            "{}: no voiced frames, cannot size the quantizers",
            a.manifest.display()
        )));
    }
    let text = format!(
        "# {} utterances, {frames} frames, {voiced} voiced\n\
         quantizer.energy.min = {}\nquantizer.energy.max = {}\n\
         quantizer.pitch.min = {}\nquantizer.pitch.max = {}\n",
        entries.len(),
        energy.min,
        energy.max,
        pitch.min,
        pitch.max
    );
    let p = ctx.path("stats.txt");
    fsutil::write_atomic(&p, text.as_bytes())?;
    Ok(vec![p])
}

fn read_vector(path: &Path) -> Result<Vec<f64>> {
    let t = xlf::read_single(path)?;
    if t.shape.len() != 1 {
        return Err(Error::format(path, format!("expected a vector, found shape {:?}", t.shape)));
    }
    Ok(t.values)
}

fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn teacher_mode(prefix: &Path) -> Result<Mode> {
    let dpath = with_suffix(prefix, ".durations.xlf");
    let durations = read_vector(&dpath)?
        .into_iter()
        .map(|v| {
            if v >= 0.0 && v.fract() == 0.0 {
                Ok(v as usize)
            } else {
                Err(Error::format(&dpath, format!("duration {v} is not a whole frame count")))
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Mode::TeacherForced {
        durations: DurationSequence::new(durations),
        pitch: read_vector(&with_suffix(prefix, ".pitch.phone.xlf"))?,
        energy: read_vector(&with_suffix(prefix, ".energy.phone.xlf"))?,
    })
}

pub fn trace_text(out: &ForwardOutput) -> String {
    let mut s = String::new();
    for t in &out.trace {
        let dims: Vec<String> = t.shape.iter().map(usize::to_string).collect();
        s.push_str(&format!("{}\t{}\n", t.stage, dims.join("x")));
    }
    s
}

fn forward_cmd(ctx: &Context, a: &ForwardArgs) -> Result<Vec<PathBuf>> {
    let name = match &a.name {
        Some(n) => n.clone(),
        None => a.phon.file_stem().and_then(|s| s.to_str()).unwrap_or("forward").to_string(),
    };
    check_id(&name, "--name")?;
    let lexicon = ctx.config.load_lexicon()?;
    let mut model = ctx.config.model_for(&lexicon)?;
    if let Some(p) = &a.model_config {
        model = config::parse_model_config(&p.display().to_string(), &fsutil::read_to_string(p)?, model)?;
    }
    let seq = phon::decode(&fsutil::read_to_string(&a.phon)?, &a.phon)?;
    let input = ModelInput {
        ipa_ids: seq.ipa_ids(lexicon.inventory()).at(a.phon.display())?,
        lengths: seq.lengths.clone(),
    };
    let w = match &a.weights {
        Some(p) => weights::load(p, &model)?,
        None => init_weights(&model, ctx.seed).at("model config")?,
    };
    let mode = match &a.features_prefix {
        Some(prefix) => teacher_mode(prefix)?,
        None => Mode::Inference,
    };
    let out = forward(&w, &input, a.speaker, &mode).at(a.phon.display())?;
    let durations: Vec<f64> = out.durations_used.as_slice().iter().map(|&d| d as f64).collect();
    let sections = vec![
        Tensor::new("mel_pred", vec![out.mel_pred.rows(), out.mel_pred.dim()], out.mel_pred.as_slice().to_vec()),
        Tensor::vector("dur_pred", out.dur_pred.clone()),
        Tensor::vector("pitch_pred", out.pitch_pred.clone()),
        Tensor::vector("energy_pred", out.energy_pred.clone()),
        Tensor::vector("durations_used", durations),
    ];
    let mut written = Vec::new();
    let p = ctx.path(&format!("{name}.forward.xlf"));
    xlf::write(&p, &sections)?;
    written.push(p);
    let p = ctx.path(&format!("{name}.trace.txt"));
    fsutil::write_atomic(&p, trace_text(&out).as_bytes())?;
    written.push(p);
    if let Some(p) = &a.save_weights {
        weights::save(p, &w)?;
        written.push(p.clone());
    }
    log::info!("{name}: {} frames", out.mel_pred.rows());
    Ok(written)
}

fn manifest(ctx: &Context, a: &ManifestArgs) -> Result<Vec<PathBuf>> {
    let spec_path = a
        .spec
        .clone()
        .or_else(|| ctx.config.dataset_spec.clone())
        .ok_or_else(|| Error::Usage("manifest needs --spec or dataset.spec in --config".into()))?;
    let spec_origin = spec_path.display().to_string();
    let spec = load_dataset_spec(&spec_path)?;
    let name = a.name.clone().unwrap_or_else(|| spec.name.clone());
    check_id(&name, "--name")?;
    let scans = ctx
        .pool
        .install(|| crate::scan::scan_roots(&spec, &a.roots, ctx.config.features.sample_rate))?;
    let entries = corpus::build_manifest(&spec, &scans).at(&spec_origin)?;
    let report = balance_report(&entries).at(&spec_origin)?;
    let mp = ctx.path(&format!("{name}.manifest"));
    fsutil::write_atomic(&mp, corpus::write_manifest(&entries).at(&spec_origin)?.as_bytes())?;
    let bp = ctx.path(&format!("{name}.balance.txt"));
    fsutil::write_atomic(&bp, report.to_text().as_bytes())?;
    if report.flagged {
        log::warn!("{name}: a language or gender exceeds 60% of the hours");
    }
    log::info!("{name}: {} utterances, {:.4} h", entries.len(), report.total_hours);
    Ok(vec![mp, bp])
}

pub fn load_dataset_spec(path: &Path) -> Result<DatasetSpec> {
    let origin = path.display().to_string();
    DatasetSpec::parse(&origin, &fsutil::read_to_string(path)?).at(&origin)
}
