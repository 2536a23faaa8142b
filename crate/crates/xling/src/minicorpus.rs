//! Deterministic synthetic corpus shaped like the three cross-lingual
//! training sets, at 1/100 of their hours.
//!
//! Each utterance is random text drawn from the bundled lexicons, a frame
//! duration per phoneme, and a harmonic tone whose pitch moves per phoneme.
//! The audio is not speech; it only exercises the tooling.

use std::path::Path;

use xling_core::corpus::{DatasetSpec, Gender, SpeakerSpec};
use xling_core::lexicon::Lexicon;
use xling_core::rng::XorShift64Star;
use xling_core::Language;

use crate::error::{Context, Result};
use crate::{fsutil, wav};

pub const SAMPLE_RATE: u32 = 16_000;
const HOP: usize = 160;
/// Each speaker gets this much more audio than its cap, so caps bite.
const OVERSHOOT: f64 = 1.25;
/// Shortest utterance, in frames; longer than one analysis window.
const MIN_FRAMES: usize = 50;

pub const D1_SPEC: &str = include_str!("../data/d1.spec");
pub const D1_D2_SPEC: &str = include_str!("../data/d1_d2.spec");
pub const D1_D2_D3_SPEC: &str = include_str!("../data/d1_d2_d3.spec");

pub fn full_spec() -> DatasetSpec {
    DatasetSpec::parse("d1_d2_d3.spec", D1_D2_D3_SPEC).expect("bundled spec is valid")
}

fn base_f0(gender: Gender) -> f64 {
    match gender {
        Gender::M => 120.0,
        Gender::F => 220.0,
    }
}

struct Utterance {
    text: String,
    alignment: String,
    samples: Vec<f64>,
}

fn pick<'a, T>(rng: &mut XorShift64Star, items: &'a [T]) -> &'a T {
    &items[rng.below(items.len() as u64) as usize]
}

/// Random text for the speaker's language with per-LDP frame counts.
fn draw(
    rng: &mut XorShift64Star,
    lexicon: &Lexicon,
    words: &[String],
    hanzi: &[char],
    language: Language,
    n_tokens: usize,
) -> (String, Vec<usize>) {
    let text = match language {
        Language::Cn => (0..n_tokens).map(|_| *pick(rng, hanzi)).collect::<String>(),
        Language::En => (0..n_tokens).map(|_| pick(rng, words).as_str()).collect::<Vec<_>>().join(" "),
    };
    let seq = lexicon
        .text_to_phoneme_sequence(&text)
        .expect("text drawn from the lexicon");
    let frames = seq
        .ldp
        .iter()
        .map(|ldp| match ldp.language {
            Language::Cn => 12 + rng.below(13) as usize,
            Language::En => 5 + rng.below(8) as usize,
        })
        .collect();
    (text, frames)
}

/// Spreads `total` frames over `n` phonemes as evenly as possible.
fn spread(total: usize, n: usize) -> Vec<usize> {
    (0..n).map(|i| total / n + usize::from(i < total % n)).collect()
}

fn synth_utterance(
    rng: &mut XorShift64Star,
    lexicon: &Lexicon,
    text: &str,
    frames: &[usize],
    speaker: &SpeakerSpec,
) -> Utterance {
    let seq = lexicon
        .text_to_phoneme_sequence(text)
        .expect("text drawn from the lexicon");
    let f0 = base_f0(speaker.gender);
    let mut alignment = String::new();
    let mut samples = Vec::new();
    let mut phase = 0.0f64;
    for (ldp, &frames) in seq.ldp.iter().zip(frames) {
        alignment.push_str(&format!("{}\t{frames}\n", ldp.label));
        let f = f0 * rng.uniform(0.85, 1.2);
        let n = frames * HOP;
        for i in 0..n {
            // short fades keep phoneme joins click-free
            let edge = (i.min(n - 1 - i) as f64 / 80.0).min(1.0);
            phase += 2.0 * std::f64::consts::PI * f / SAMPLE_RATE as f64;
            let v = 0.5 * phase.sin() + 0.2 * (2.0 * phase).sin() + 0.1 * (3.0 * phase).sin();
            samples.push(0.5 * edge * v);
        }
    }
    Utterance {
        text: text.to_string(),
        alignment,
        samples,
    }
}

/// Writes `<root>/<speaker>/<speaker>_NNNN.{wav,txt,align}` for every member
/// of the full spec. Output depends only on `seed` and the lexicon.
pub fn generate(root: &Path, lexicon: &Lexicon, seed: u64) -> Result<DatasetSpec> {
    let spec = full_spec();
    let words: Vec<String> = lexicon.en_words().map(str::to_string).collect();
    let hanzi: Vec<char> = lexicon.hanzi().collect();
    for (k, speaker) in spec.members.iter().enumerate() {
        let mut rng = XorShift64Star::new(seed ^ (k as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
        let dir = root.join(&speaker.speaker_id);
        // The cap is filled to the frame, then extra utterances follow.
        let cap_frames = (speaker.max_hours * 3600.0 * 100.0).round() as usize;
        let target = (cap_frames as f64 * OVERSHOOT) as usize;
        let mut total = 0;
        let mut index = 0;
        while total < target {
            let n_tokens = match speaker.language {
                Language::Cn => 4 + rng.below(6) as usize,
                Language::En => 3 + rng.below(4) as usize,
            };
            let (text, mut frames) = draw(&mut rng, lexicon, &words, &hanzi, speaker.language, n_tokens);
            let room = cap_frames.saturating_sub(total);
            // never leave a remainder too short to analyse
            if room > 0 && frames.iter().sum::<usize>() + MIN_FRAMES > room {
                frames = spread(room, frames.len());
            }
            let u = synth_utterance(&mut rng, lexicon, &text, &frames, speaker);
            let stem = format!("{}_{index:04}", speaker.speaker_id);
            wav::write(&dir.join(format!("{stem}.wav")), &u.samples, SAMPLE_RATE)?;
            fsutil::write_atomic(&dir.join(format!("{stem}.txt")), format!("{}\n", u.text).as_bytes())?;
            fsutil::write_atomic(&dir.join(format!("{stem}.align")), u.alignment.as_bytes())?;
            total += frames.iter().sum::<usize>();
            index += 1;
        }
        log::info!("{}: {index} utterances, {total} frames", speaker.speaker_id);
    }
    fsutil::write_atomic(
        &root.join("SYNTHETIC.txt"),
        b"Synthetic tones generated from random lexicon text. Not speech.\n",
    )?;
    for (name, text) in [("d1.spec", D1_SPEC), ("d1_d2.spec", D1_D2_SPEC), ("d1_d2_d3.spec", D1_D2_D3_SPEC)] {
        DatasetSpec::parse(name, text).at(name)?;
        fsutil::write_atomic(&root.join(name), text.as_bytes())?;
    }
    Ok(spec)
}
