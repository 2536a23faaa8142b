//! Writes the synthetic mini-corpus.
//!
//! ```text
//! cargo run --release -p xling --example make_minicorpus -- <dir> [seed]
//! ```

use std::path::PathBuf;
use std::process::ExitCode;

use xling_core::Lexicon;

fn main() -> ExitCode {
    let mut args = std::env::args().skip(1);
    let Some(root) = args.next().map(PathBuf::from) else {
        eprintln!("usage: make_minicorpus <dir> [seed]");
        return ExitCode::FAILURE;
    };
    let seed = match args.next().map(|s| s.parse::<u64>()) {
        None => 0,
        Some(Ok(s)) => s,
        Some(Err(e)) => {
            eprintln!("bad seed: {e}");
            return ExitCode::FAILURE;
        }
    };
    match xling::minicorpus::generate(&root, &Lexicon::bundled(), seed) {
        Ok(spec) => {
            println!("wrote {} speakers under {}", spec.members.len(), root.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("ERROR {}: {e}", e.code());
            ExitCode::FAILURE
        }
    }
}
