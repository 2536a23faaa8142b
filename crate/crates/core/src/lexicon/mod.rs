//! Mixed Mandarin/English text to language-dependent phonemes (LDP) and IPA.
//!
//! English words become ARPABET phonemes, Mandarin characters become Pinyin
//! syllables. Each LDP is then looked up in an LDP→IPA dictionary; the
//! number of IPA symbols it decomposes into is its phoneme length.
//!
//! Dictionary files are UTF-8 text, one entry per line, `KEY<TAB>SYM1 SYM2 ...`.
//! Lines whose first non-blank character is `#` are comments. When a key
//! occurs more than once the first entry wins (CMU variants, polyphonic
//! hanzi). LDP→IPA keys are `LANG:LABEL`, e.g. `EN:K` or `CN:hao`.

mod tokenize;

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use thiserror::Error;

use crate::regulator::LengthSequence;

pub use tokenize::{is_han, tokenize, Script, Token};

pub const BUNDLED_EN_ARPABET: &str = include_str!("../../data/en_arpabet.dict");
pub const BUNDLED_CN_PINYIN: &str = include_str!("../../data/cn_pinyin.dict");
pub const BUNDLED_LDP_TO_IPA: &str = include_str!("../../data/ldp_to_ipa.dict");
pub const BUNDLED_IPA_INVENTORY: &str = include_str!("../../data/ipa_inventory.txt");

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LexiconError {
    #[error("{file}:{line}: {detail}")]
    Parse {
        file: String,
        line: usize,
        detail: String,
    },
    #[error("{file}:{line}: IPA symbol {symbol:?} is not in the inventory")]
    UnknownIpaSymbol {
        file: String,
        line: usize,
        symbol: String,
    },
    #[error("out-of-vocabulary token {surface:?} at chars {start}..{end}")]
    Oov {
        surface: String,
        start: usize,
        end: usize,
    },
    #[error("no IPA mapping for {language} LDP {label:?} (token at chars {start}..{end})")]
    UnmappedLdp {
        label: String,
        language: Language,
        start: usize,
        end: usize,
    },
    #[error("IPA symbol {0:?} is not in the inventory")]
    NotInInventory(String),
}

impl LexiconError {
    pub fn code(&self) -> &'static str {
        match self {
            LexiconError::Parse { .. } => "LexiconParse",
            LexiconError::UnknownIpaSymbol { .. } => "UnknownIpaSymbol",
            LexiconError::Oov { .. } => "OOV",
            LexiconError::UnmappedLdp { .. } => "UnmappedLDP",
            LexiconError::NotInInventory(_) => "NotInInventory",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Language {
    Cn,
    En,
}

impl Language {
    pub fn as_str(self) -> &'static str {
        match self {
            Language::Cn => "CN",
            Language::En => "EN",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "CN" | "cn" => Some(Language::Cn),
            "EN" | "en" => Some(Language::En),
            _ => None,
        }
    }
}

impl fmt::Display for Language {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A language-dependent phoneme: an ARPABET symbol or a Pinyin syllable.
///
/// The stress digit (EN) or tone digit (CN) lives in `meta`; `label` never
/// contains digits.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct LdpSymbol {
    pub label: String,
    pub language: Language,
    pub meta: Option<u8>,
}

impl LdpSymbol {
    /// Splits a trailing stress/tone digit off `raw` (`IH1` → `IH` + 1).
    pub fn parse(raw: &str, language: Language) -> Option<Self> {
        let (label, meta) = match raw.chars().last()?.to_digit(10) {
            Some(d) => (&raw[..raw.len() - 1], Some(d as u8)),
            None => (raw, None),
        };
        if label.is_empty() || label.chars().any(|c| c.is_ascii_digit() || c.is_whitespace()) {
            return None;
        }
        if language == Language::Cn && meta.is_some_and(|t| t > 5) {
            return None;
        }
        Some(Self {
            label: label.to_string(),
            language,
            meta,
        })
    }
}

impl fmt::Display for LdpSymbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label)?;
        if let Some(m) = self.meta {
            write!(f, "{m}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct IpaSymbol(pub String);

impl IpaSymbol {
    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for IpaSymbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// The IPA symbol set. Symbol ids follow file order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Inventory {
    symbols: Vec<String>,
    index: BTreeMap<String, usize>,
}

impl Inventory {
    pub fn parse(src: &str) -> Result<Self, LexiconError> {
        let mut symbols = Vec::new();
        let mut index = BTreeMap::new();
        for (n, line) in src.lines().enumerate() {
            let sym = line.trim();
            if sym.is_empty() || sym.starts_with('#') {
                continue;
            }
            if sym.contains(char::is_whitespace) {
                return Err(parse_err("ipa_inventory", n + 1, "one symbol per line expected"));
            }
            if index.insert(sym.to_string(), symbols.len()).is_some() {
                return Err(parse_err("ipa_inventory", n + 1, "duplicate symbol"));
            }
            symbols.push(sym.to_string());
        }
        Ok(Self { symbols, index })
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn id(&self, symbol: &str) -> Option<usize> {
        self.index.get(symbol).copied()
    }

    pub fn symbol(&self, id: usize) -> Option<&str> {
        self.symbols.get(id).map(String::as_str)
    }

    pub fn symbols(&self) -> impl Iterator<Item = &str> {
        self.symbols.iter().map(String::as_str)
    }
}

/// Parallel LDP / IPA / phoneme-length sequences for one utterance.
///
/// `lengths[i]` IPA symbols belong to `ldp[i]`; the lengths sum to `ipa.len()`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct PhonemeSequence {
    pub ldp: Vec<LdpSymbol>,
    pub ipa: Vec<IpaSymbol>,
    pub lengths: LengthSequence,
}

impl PhonemeSequence {
    /// IPA slice belonging to each LDP, in order.
    pub fn segments(&self) -> impl Iterator<Item = (&LdpSymbol, &[IpaSymbol])> {
        let mut start = 0;
        self.ldp.iter().zip(self.lengths.as_slice()).map(move |(l, &n)| {
            let seg = &self.ipa[start..start + n];
            start += n;
            (l, seg)
        })
    }

    /// Maps the IPA symbols to inventory ids.
    pub fn ipa_ids(&self, inventory: &Inventory) -> Result<Vec<usize>, LexiconError> {
        self.ipa
            .iter()
            .map(|s| {
                inventory
                    .id(s.as_str())
                    .ok_or_else(|| LexiconError::NotInInventory(s.0.clone()))
            })
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct Lexicon {
    en_entries: BTreeMap<String, Vec<LdpSymbol>>,
    cn_entries: BTreeMap<char, LdpSymbol>,
    ipa_entries: BTreeMap<(Language, String), Vec<IpaSymbol>>,
    inventory: Inventory,
}

fn parse_err(file: &str, line: usize, detail: &str) -> LexiconError {
    LexiconError::Parse {
        file: file.to_string(),
        line,
        detail: detail.to_string(),
    }
}

/// Yields `(line_no, key, symbols)` for every entry line.
fn entries<'a>(
    file: &'a str,
    src: &'a str,
) -> impl Iterator<Item = Result<(usize, &'a str, Vec<&'a str>), LexiconError>> + 'a {
    src.lines().enumerate().filter_map(move |(n, line)| {
        let line_no = n + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            return None;
        }
        let Some((key, rhs)) = line.split_once('\t') else {
            return Some(Err(parse_err(file, line_no, "expected KEY<TAB>SYMBOLS")));
        };
        let key = key.trim();
        let syms: Vec<&str> = rhs.split_whitespace().collect();
        if key.is_empty() {
            return Some(Err(parse_err(file, line_no, "empty key")));
        }
        if syms.is_empty() {
            return Some(Err(parse_err(file, line_no, "entry maps to an empty sequence")));
        }
        Some(Ok((line_no, key, syms)))
    })
}

impl Lexicon {
    /// Parses the three dictionaries and the IPA inventory.
    pub fn from_sources(
        en_arpabet: &str,
        cn_pinyin: &str,
        ldp_to_ipa: &str,
        ipa_inventory: &str,
    ) -> Result<Self, LexiconError> {
        let inventory = Inventory::parse(ipa_inventory)?;

        let mut en_entries = BTreeMap::new();
        for entry in entries("en_arpabet", en_arpabet) {
            let (line, key, syms) = entry?;
            if !key.chars().all(|c| c.is_ascii_alphabetic() || c == '\'') {
                return Err(parse_err("en_arpabet", line, "word must match [A-Za-z']+"));
            }
            let phones = syms
                .iter()
                .map(|s| LdpSymbol::parse(s, Language::En))
                .collect::<Option<Vec<_>>>()
                .ok_or_else(|| parse_err("en_arpabet", line, "malformed ARPABET symbol"))?;
            en_entries.entry(key.to_ascii_lowercase()).or_insert(phones);
        }

        let mut cn_entries = BTreeMap::new();
        for entry in entries("cn_pinyin", cn_pinyin) {
            let (line, key, syms) = entry?;
            let mut chars = key.chars();
            let (Some(hanzi), None) = (chars.next(), chars.next()) else {
                return Err(parse_err("cn_pinyin", line, "key must be a single character"));
            };
            if !is_han(hanzi) {
                return Err(parse_err("cn_pinyin", line, "key is not a Han character"));
            }
            if syms.len() != 1 {
                return Err(parse_err("cn_pinyin", line, "expected exactly one Pinyin syllable"));
            }
            let syl = LdpSymbol::parse(syms[0], Language::Cn)
                .ok_or_else(|| parse_err("cn_pinyin", line, "malformed Pinyin syllable"))?;
            cn_entries.entry(hanzi).or_insert(syl);
        }

        let mut ipa_entries = BTreeMap::new();
        for entry in entries("ldp_to_ipa", ldp_to_ipa) {
            let (line, key, syms) = entry?;
            let (lang, label) = key
                .split_once(':')
                .and_then(|(l, label)| Some((Language::parse(l)?, label)))
                .ok_or_else(|| parse_err("ldp_to_ipa", line, "key must be LANG:LABEL"))?;
            if label.is_empty() || label.chars().any(|c| c.is_ascii_digit()) {
                return Err(parse_err("ldp_to_ipa", line, "LDP label must be non-empty without digits"));
            }
            let mut ipa = Vec::with_capacity(syms.len());
            for s in syms {
                if inventory.id(s).is_none() {
                    return Err(LexiconError::UnknownIpaSymbol {
                        file: "ldp_to_ipa".to_string(),
                        line,
                        symbol: s.to_string(),
                    });
                }
                ipa.push(IpaSymbol(s.to_string()));
            }
            ipa_entries.entry((lang, label.to_string())).or_insert(ipa);
        }

        Ok(Self {
            en_entries,
            cn_entries,
            ipa_entries,
            inventory,
        })
    }

    /// The dictionaries shipped with the crate.
    pub fn bundled() -> Self {
        Self::from_sources(
            BUNDLED_EN_ARPABET,
            BUNDLED_CN_PINYIN,
            BUNDLED_LDP_TO_IPA,
            BUNDLED_IPA_INVENTORY,
        )
        .expect("bundled lexicon is well-formed")
    }

    pub fn inventory(&self) -> &Inventory {
        &self.inventory
    }

    pub fn en_words(&self) -> impl Iterator<Item = &str> {
        self.en_entries.keys().map(String::as_str)
    }

    pub fn hanzi(&self) -> impl Iterator<Item = char> + '_ {
        self.cn_entries.keys().copied()
    }

    /// LDPs produced by the word dictionaries that have no IPA entry.
    pub fn unmapped_ldps(&self) -> Vec<(Language, String)> {
        let mut missing: Vec<(Language, String)> = self
            .en_entries
            .values()
            .flatten()
            .chain(self.cn_entries.values())
            .filter(|s| !self.ipa_entries.contains_key(&(s.language, s.label.clone())))
            .map(|s| (s.language, s.label.clone()))
            .collect();
        missing.sort();
        missing.dedup();
        missing
    }

    /// Converts a Han or Latin token to its LDP symbols.
    pub fn lookup_ldp(&self, token: &Token) -> Result<Vec<LdpSymbol>, LexiconError> {
        let oov = || LexiconError::Oov {
            surface: token.surface.clone(),
            start: token.span.0,
            end: token.span.1,
        };
        match token.script {
            Script::Latin => self
                .en_entries
                .get(&token.surface.to_ascii_lowercase())
                .cloned()
                .ok_or_else(oov),
            Script::Han => {
                let c = token.surface.chars().next().ok_or_else(oov)?;
                self.cn_entries
                    .get(&c)
                    .map(|s| alloc::vec![s.clone()])
                    .ok_or_else(oov)
            }
            Script::Punct => Err(oov()),
        }
    }

    /// IPA decomposition of one LDP and its phoneme length.
    ///
    /// Stress and tone metadata do not take part in the lookup.
    pub fn ldp_to_ipa(&self, ldp: &LdpSymbol) -> Result<(Vec<IpaSymbol>, usize), LexiconError> {
        self.ipa_entries
            .get(&(ldp.language, ldp.label.clone()))
            .map(|ipa| (ipa.clone(), ipa.len()))
            .ok_or_else(|| LexiconError::UnmappedLdp {
                label: ldp.label.clone(),
                language: ldp.language,
                start: 0,
                end: 0,
            })
    }

    pub fn text_to_phoneme_sequence(&self, text: &str) -> Result<PhonemeSequence, LexiconError> {
        let mut ldp = Vec::new();
        let mut ipa = Vec::new();
        let mut lengths = Vec::new();
        for token in tokenize(text) {
            if token.script == Script::Punct {
                continue;
            }
            for sym in self.lookup_ldp(&token)? {
                let (symbols, n) = self.ldp_to_ipa(&sym).map_err(|e| match e {
                    LexiconError::UnmappedLdp {
                        label, language, ..
                    } => LexiconError::UnmappedLdp {
                        label,
                        language,
                        start: token.span.0,
                        end: token.span.1,
                    },
                    other => other,
                })?;
                ipa.extend(symbols);
                lengths.push(n);
                ldp.push(sym);
            }
        }
        Ok(PhonemeSequence {
            ldp,
            ipa,
            lengths: LengthSequence::new(lengths).expect("IPA entries are never empty"),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn latin(s: &str) -> Token {
        Token {
            surface: s.into(),
            script: Script::Latin,
            span: (0, s.chars().count()),
        }
    }

    fn han(s: &str) -> Token {
        Token {
            surface: s.into(),
            script: Script::Han,
            span: (0, 1),
        }
    }

    fn en(label: &str, meta: Option<u8>) -> LdpSymbol {
        LdpSymbol {
            label: label.into(),
            language: Language::En,
            meta,
        }
    }

    #[test]
    fn mixed_maps_to_five_arpabet_symbols() {
        // en_arpabet.dict: "mixed\tM IH1 K S T"
        let lex = Lexicon::bundled();
        assert_eq!(
            lex.lookup_ldp(&latin("mixed")).unwrap(),
            vec![en("M", None), en("IH", Some(1)), en("K", None), en("S", None), en("T", None)]
        );
        assert_eq!(lex.lookup_ldp(&latin("MiXeD")).unwrap().len(), 5);
    }

    #[test]
    fn hao_carries_tone_three() {
        // cn_pinyin.dict: "好\thao3" precedes "好\thao4"
        let lex = Lexicon::bundled();
        let got = lex.lookup_ldp(&han("好")).unwrap();
        assert_eq!(
            got,
            vec![LdpSymbol {
                label: "hao".into(),
                language: Language::Cn,
                meta: Some(3)
            }]
        );
    }

    #[test]
    fn unknown_word_is_oov() {
        let lex = Lexicon::bundled();
        assert!(matches!(
            lex.lookup_ldp(&latin("zzxqv")),
            Err(LexiconError::Oov { .. })
        ));
    }

    #[test]
    fn ipa_lookups() {
        let lex = Lexicon::bundled();
        let (k, n) = lex.ldp_to_ipa(&en("K", None)).unwrap();
        assert_eq!(k, vec![IpaSymbol("k".into())]);
        assert_eq!(n, 1);

        // ldp_to_ipa.dict: "CN:hao\tx a ʊ"
        let hao = LdpSymbol::parse("hao3", Language::Cn).unwrap();
        let (ipa, n) = lex.ldp_to_ipa(&hao).unwrap();
        assert!(n >= 2);
        assert_eq!(n, ipa.len());
        assert_eq!(ipa, vec![IpaSymbol("x".into()), IpaSymbol("a".into()), IpaSymbol("ʊ".into())]);

        // stress is metadata, not part of the key
        assert_eq!(lex.ldp_to_ipa(&en("IH", Some(0))), lex.ldp_to_ipa(&en("IH", Some(2))));
    }

    #[test]
    fn missing_ipa_mapping() {
        let lex = Lexicon::bundled();
        assert!(matches!(
            lex.ldp_to_ipa(&en("QQ", None)),
            Err(LexiconError::UnmappedLdp { .. })
        ));
    }

    #[test]
    fn empty_text_gives_empty_sequence() {
        let seq = Lexicon::bundled().text_to_phoneme_sequence("").unwrap();
        assert!(seq.ldp.is_empty() && seq.ipa.is_empty() && seq.lengths.is_empty());
    }

    #[test]
    fn mixed_sequence_bookkeeping() {
        let seq = Lexicon::bundled().text_to_phoneme_sequence("mixed").unwrap();
        assert_eq!(seq.ldp.len(), 5);
        assert!(seq.lengths.as_slice().iter().all(|&l| l >= 1));
        assert_eq!(seq.lengths.total(), seq.ipa.len());
    }

    #[test]
    fn punctuation_contributes_nothing() {
        let lex = Lexicon::bundled();
        let a = lex.text_to_phoneme_sequence("你好, hello!").unwrap();
        let b = lex.text_to_phoneme_sequence("你好 hello").unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn oov_error_carries_offsets() {
        let err = Lexicon::bundled()
            .text_to_phoneme_sequence("我 zzxqv")
            .unwrap_err();
        assert_eq!(
            err,
            LexiconError::Oov {
                surface: "zzxqv".into(),
                start: 2,
                end: 7
            }
        );
    }

    #[test]
    fn unmapped_error_carries_token_offsets() {
        let lex = Lexicon::from_sources("hi\tHH AY1\n", "", "EN:HH\th\n", "h\n").unwrap();
        let err = lex.text_to_phoneme_sequence("  hi").unwrap_err();
        assert_eq!(
            err,
            LexiconError::UnmappedLdp {
                label: "AY".into(),
                language: Language::En,
                start: 2,
                end: 4
            }
        );
    }

    #[test]
    fn bundled_lexicon_is_fully_mapped() {
        assert!(Lexicon::bundled().unmapped_ldps().is_empty());
    }

    #[test]
    fn parse_errors() {
        let inv = "k\n";
        assert!(matches!(
            Lexicon::from_sources("cat K AE1 T\n", "", "", inv),
            Err(LexiconError::Parse { line: 1, .. })
        ));
        assert!(matches!(
            Lexicon::from_sources("# c\ncat\t \n", "", "", inv),
            Err(LexiconError::Parse { line: 2, .. })
        ));
        assert!(matches!(
            Lexicon::from_sources("", "", "EN:K\tq\n", inv),
            Err(LexiconError::UnknownIpaSymbol { .. })
        ));
        assert!(matches!(
            Lexicon::from_sources("", "好好\thao3\n", "", inv),
            Err(LexiconError::Parse { .. })
        ));
        assert!(matches!(
            Lexicon::from_sources("", "", "K\tk\n", inv),
            Err(LexiconError::Parse { .. })
        ));
    }

    #[test]
    fn ldp_symbol_parsing() {
        assert_eq!(LdpSymbol::parse("IH1", Language::En), Some(en("IH", Some(1))));
        assert_eq!(LdpSymbol::parse("K", Language::En), Some(en("K", None)));
        assert_eq!(LdpSymbol::parse("1", Language::En), None);
        assert_eq!(LdpSymbol::parse("ma7", Language::Cn), None);
        assert_eq!(LdpSymbol::parse("A11", Language::En), None);
    }
}
