//! Text dump of a [`PhonemeSequence`], one LDP per line:
//!
//! ```text
//! LABEL<TAB>LANG<TAB>META<TAB>LENGTH<TAB>IPA IPA ...
//! ```
//!
//! `META` is the stress or tone digit, or `-` when absent.

use std::path::Path;

use xling_core::lexicon::{IpaSymbol, LdpSymbol};
use xling_core::{Language, LengthSequence, PhonemeSequence};

use crate::error::{Error, Result};

pub fn encode(seq: &PhonemeSequence) -> String {
    let mut out = String::new();
    for (ldp, ipa) in seq.segments() {
        let meta = ldp.meta.map_or("-".to_string(), |m| m.to_string());
        let ipa: Vec<&str> = ipa.iter().map(IpaSymbol::as_str).collect();
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\n",
            ldp.label,
            ldp.language.as_str(),
            meta,
            ipa.len(),
            ipa.join(" ")
        ));
    }
    out
}

pub fn decode(src: &str, origin: &Path) -> Result<PhonemeSequence> {
    let mut seq = PhonemeSequence::default();
    let mut lengths = Vec::new();
    for (i, line) in src.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let bad = |d: String| Error::format(origin, format!("line {}: {d}", i + 1));
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != 5 {
            return Err(bad(format!("expected 5 tab-separated fields, found {}", f.len())));
        }
        let language = Language::parse(f[1]).ok_or_else(|| bad(format!("unknown language {:?}", f[1])))?;
        let meta = match f[2] {
            "-" => None,
            m => Some(m.parse::<u8>().map_err(|_| bad(format!("bad meta {m:?}")))?),
        };
        let raw = match meta {
            Some(m) => format!("{}{m}", f[0]),
            None => f[0].to_string(),
        };
        let ldp = LdpSymbol::parse(&raw, language).ok_or_else(|| bad(format!("bad LDP {raw:?}")))?;
        let n: usize = f[3].parse().map_err(|_| bad(format!("bad length {:?}", f[3])))?;
        let ipa: Vec<IpaSymbol> = f[4].split(' ').filter(|s| !s.is_empty()).map(|s| IpaSymbol(s.into())).collect();
        if n == 0 || ipa.len() != n {
            return Err(bad(format!("length {n} does not match {} IPA symbols", ipa.len())));
        }
        seq.ldp.push(ldp);
        seq.ipa.extend(ipa);
        lengths.push(n);
    }
    seq.lengths = LengthSequence::new(lengths).map_err(|e| Error::format(origin, e.to_string()))?;
    Ok(seq)
}
