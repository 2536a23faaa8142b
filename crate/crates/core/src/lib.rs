//! Cross-lingual text-to-speech frontend primitives.
//!
//! Mixed Mandarin/English text is turned into language-dependent phonemes
//! (ARPABET for English, Pinyin syllables for Mandarin), then into IPA
//! symbols together with per-phoneme lengths. The phoneme length regulator
//! folds IPA-level embeddings back to one row per language-dependent
//! phoneme so that durations from a monolingual aligner apply directly.
//!
//! The crate is `no_std` and only needs `alloc`. File and audio IO, the
//! tensor container and the command line live in the `xling` crate.

#![no_std]

extern crate alloc;

pub mod acoustic;
pub mod corpus;
pub mod features;
pub mod lexicon;
pub mod matrix;
pub mod regulator;
pub mod rng;

pub use lexicon::{Language, Lexicon, PhonemeSequence};
pub use matrix::Matrix;
pub use regulator::{DurationSequence, LengthSequence};
