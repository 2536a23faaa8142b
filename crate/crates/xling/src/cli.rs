use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "xling", version, about = "Cross-lingual TTS frontend pipelines")]
pub struct Cli {
    /// Pipeline config file (key = value). Flags override its values.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Worker threads for per-utterance work [default: logical CPUs]
    #[arg(long, global = true, value_name = "N")]
    pub jobs: Option<usize>,
    /// Seed for model parameter generation [default: 0]
    #[arg(long, global = true, value_name = "U64")]
    pub seed: Option<u64>,
    /// Output directory [default: out]
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Text to phoneme sequence dump (<id>.phon)
    G2p(G2pArgs),
    /// Aggregate IPA-level embeddings per phoneme and expand by durations
    Regulate(RegulateArgs),
    /// Mel, energy and pitch from audio, plus phoneme averages when aligned
    Features(FeaturesArgs),
    /// Corpus-wide energy and pitch ranges for the quantizers
    Stats(StatsArgs),
    /// Run the acoustic model stub on a phoneme sequence
    Forward(ForwardArgs),
    /// Build a dataset manifest and language/gender balance report
    Manifest(ManifestArgs),
}

#[derive(Debug, Args)]
#[group(required = true, multiple = false, id = "g2p_input")]
pub struct G2pSource {
    /// Text to convert
    #[arg(long)]
    pub text: Option<String>,
    /// File of `utt_id<TAB>text` lines
    #[arg(long, value_name = "PATH")]
    pub input: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct G2pArgs {
    #[command(flatten)]
    pub source: G2pSource,
    /// Output name used with --text
    #[arg(long, default_value = "utt")]
    pub id: String,
}

#[derive(Debug, Args)]
pub struct RegulateArgs {
    /// Rank-2 XLF1 tensor of IPA-level rows
    #[arg(long, value_name = "PATH")]
    pub embeddings: PathBuf,
    /// Phoneme lengths, comma separated (e.g. 2,1,3)
    #[arg(long, value_name = "LIST")]
    pub lengths: String,
    /// Frame durations, comma separated; enables the expanded output
    #[arg(long, value_name = "LIST")]
    pub durations: Option<String>,
    /// Output file prefix
    #[arg(long, default_value = "regulated")]
    pub name: String,
}

#[derive(Debug, Args)]
#[group(required = true, multiple = false, id = "features_input")]
pub struct FeaturesSource {
    /// Single WAV file (mono, 16-bit PCM or 32-bit float)
    #[arg(long, value_name = "PATH")]
    pub wav: Option<PathBuf>,
    /// Manifest whose entries are all processed
    #[arg(long, value_name = "PATH")]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FeaturesArgs {
    #[command(flatten)]
    pub source: FeaturesSource,
    /// Alignment for --wav (LABEL<TAB>frames per line)
    #[arg(long, value_name = "PATH", requires = "wav")]
    pub alignment: Option<PathBuf>,
    /// Output name for --wav [default: file stem]
    #[arg(long, requires = "wav")]
    pub id: Option<String>,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    /// Manifest to measure
    #[arg(long, value_name = "PATH")]
    pub manifest: PathBuf,
}

#[derive(Debug, Args)]
pub struct ForwardArgs {
    /// Phoneme sequence dump from `g2p`
    #[arg(long, value_name = "PATH")]
    pub phon: PathBuf,
    /// Speaker index
    #[arg(long, default_value_t = 0)]
    pub speaker: usize,
    /// Teacher forcing from `<PREFIX>.durations.xlf`, `.pitch.phone.xlf`
    /// and `.energy.phone.xlf`; inference mode when absent
    #[arg(long, value_name = "PREFIX")]
    pub features_prefix: Option<PathBuf>,
    /// Model config file; overrides model.* keys of --config
    #[arg(long, value_name = "PATH")]
    pub model_config: Option<PathBuf>,
    /// Load parameters instead of generating them from the seed
    #[arg(long, value_name = "PATH")]
    pub weights: Option<PathBuf>,
    /// Also write the parameters used
    #[arg(long, value_name = "PATH")]
    pub save_weights: Option<PathBuf>,
    /// Output file prefix [default: phon file stem]
    #[arg(long)]
    pub name: Option<String>,
}

#[derive(Debug, Args)]
pub struct ManifestArgs {
    /// Dataset spec [default: dataset.spec from --config]
    #[arg(long, value_name = "PATH")]
    pub spec: Option<PathBuf>,
    /// Directory holding one folder per speaker; repeatable
    #[arg(long = "root", value_name = "DIR", required = true)]
    pub roots: Vec<PathBuf>,
    /// Output file prefix [default: spec name]
    #[arg(long)]
    pub name: Option<String>,
}
