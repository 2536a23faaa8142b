//! Dataset specs, manifests, alignment files and language/gender balance.
//!
//! Filesystem scanning lives in the std crate; this module takes the scanned
//! per-speaker utterance lists and does the validation, capping and
//! accounting.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use thiserror::Error;

use crate::lexicon::Language;
use crate::regulator::DurationSequence;

/// Alignment frames per second (10 ms hop).
pub const FRAMES_PER_SECOND: f64 = 100.0;
/// Allowed gap between summed alignment frames and the audio length.
pub const ALIGN_TOLERANCE_FRAMES: usize = 2;
/// A language or gender above this share of total hours is flagged.
pub const IMBALANCE_SHARE: f64 = 0.6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CorpusError {
    #[error("{file}:{line}: {detail}")]
    Parse {
        file: String,
        line: usize,
        detail: String,
    },
    #[error("{utt_id}: alignment sums to {got} frames, audio implies {expected} (±{ALIGN_TOLERANCE_FRAMES})")]
    DurationMismatch {
        utt_id: String,
        expected: usize,
        got: usize,
    },
    #[error("speaker {0:?} not found under any scan root")]
    MissingSpeaker(String),
    #[error("utterance id {0:?} appears more than once")]
    DuplicateUtterance(String),
    #[error("manifest is empty")]
    EmptyManifest,
    #[error("invalid dataset spec: {0}")]
    BadSpec(String),
    #[error("field {field} cannot be stored in a manifest: {detail}")]
    InvalidField { field: &'static str, detail: String },
}

impl CorpusError {
    pub fn code(&self) -> &'static str {
        match self {
            CorpusError::Parse { .. } => "ParseError",
            CorpusError::DurationMismatch { .. } => "DurationMismatch",
            CorpusError::MissingSpeaker(_) => "MissingSpeaker",
            CorpusError::DuplicateUtterance(_) => "DuplicateUtterance",
            CorpusError::EmptyManifest => "EmptyManifest",
            CorpusError::BadSpec(_) => "BadSpec",
            CorpusError::InvalidField { .. } => "InvalidField",
        }
    }
}

fn parse_err(file: &str, line: usize, detail: impl Into<String>) -> CorpusError {
    CorpusError::Parse {
        file: file.to_string(),
        line,
        detail: detail.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Gender {
    M,
    F,
}

impl Gender {
    pub fn as_str(self) -> &'static str {
        match self {
            Gender::M => "M",
            Gender::F => "F",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "M" => Some(Gender::M),
            "F" => Some(Gender::F),
            _ => None,
        }
    }
}

impl fmt::Display for Gender {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Number of 10 ms frames an utterance of `duration_sec` should align to.
pub fn expected_frames(duration_sec: f64) -> usize {
    libm::round(duration_sec * FRAMES_PER_SECOND).max(0.0) as usize
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AlignmentRecord {
    pub utt_id: String,
    pub ldp_labels: Vec<String>,
    pub frame_durations: DurationSequence,
}

impl AlignmentRecord {
    /// Parses `LABEL<TAB>frames` lines. Blank lines are skipped; a file with
    /// no records is an error.
    pub fn parse(utt_id: &str, src: &str) -> Result<Self, CorpusError> {
        let mut labels = Vec::new();
        let mut frames = Vec::new();
        for (i, raw) in src.lines().enumerate() {
            let line = raw.trim_end_matches('\r');
            if line.trim().is_empty() {
                continue;
            }
            let (label, count) = line
                .split_once('\t')
                .ok_or_else(|| parse_err(utt_id, i + 1, "expected LABEL<TAB>frames"))?;
            if label.is_empty() || label.chars().any(char::is_whitespace) {
                return Err(parse_err(utt_id, i + 1, format!("bad label {label:?}")));
            }
            let n: usize = count
                .trim()
                .parse()
                .map_err(|_| parse_err(utt_id, i + 1, format!("bad frame count {count:?}")))?;
            labels.push(label.to_string());
            frames.push(n);
        }
        if labels.is_empty() {
            return Err(parse_err(utt_id, 1, "alignment has no entries"));
        }
        Ok(Self {
            utt_id: utt_id.to_string(),
            ldp_labels: labels,
            frame_durations: DurationSequence::new(frames),
        })
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (l, d) in self.ldp_labels.iter().zip(self.frame_durations.as_slice()) {
            s.push_str(&format!("{l}\t{d}\n"));
        }
        s
    }

    /// Checks the frame total against `duration_sec` within ±2 frames.
    pub fn check_duration(&self, duration_sec: f64) -> Result<(), CorpusError> {
        let expected = expected_frames(duration_sec);
        let got = self.frame_durations.total();
        if got.abs_diff(expected) <= ALIGN_TOLERANCE_FRAMES {
            Ok(())
        } else {
            Err(CorpusError::DurationMismatch {
                utt_id: self.utt_id.clone(),
                expected,
                got,
            })
        }
    }
    /// Durations stretched or trimmed to exactly `n_frames` feature frames.
    ///
    /// Centre-padded framing yields one frame more than `duration * 100`, so
    /// a difference of up to three frames is accepted. The last phoneme
    /// absorbs it; when trimming empties it, earlier phonemes are trimmed.
    pub fn durations_for_frames(&self, n_frames: usize) -> Result<DurationSequence, CorpusError> {
        let total = self.frame_durations.total();
        if total.abs_diff(n_frames) > ALIGN_TOLERANCE_FRAMES + 1 {
            return Err(CorpusError::DurationMismatch {
                utt_id: self.utt_id.clone(),
                expected: n_frames,
                got: total,
            });
        }
        let mut d = self.frame_durations.as_slice().to_vec();
        if n_frames >= total {
            if let Some(last) = d.last_mut() {
                *last += n_frames - total;
            }
        } else {
            let mut excess = total - n_frames;
            for v in d.iter_mut().rev() {
                let cut = excess.min(*v);
                *v -= cut;
                excess -= cut;
            }
        }
        Ok(DurationSequence::new(d))
    }
}


#[derive(Debug, Clone, PartialEq)]
pub struct ManifestEntry {
    pub utt_id: String,
    pub audio_path: String,
    pub text: String,
    pub speaker_id: String,
    pub language: Language,
    pub gender: Gender,
    pub duration_sec: f64,
    pub alignment_path: String,
}

const MANIFEST_FIELDS: usize = 8;

fn check_field(field: &'static str, value: &str) -> Result<(), CorpusError> {
    if value.contains('|') || value.contains('\n') || value.contains('\r') {
        return Err(CorpusError::InvalidField {
            field,
            detail: format!("{value:?} contains '|' or a line break"),
        });
    }
    Ok(())
}

impl ManifestEntry {
    /// `utt_id|audio_path|text|speaker|language|gender|duration_sec|alignment_path`
    pub fn to_line(&self) -> Result<String, CorpusError> {
        check_field("utt_id", &self.utt_id)?;
        check_field("audio_path", &self.audio_path)?;
        check_field("text", &self.text)?;
        check_field("speaker", &self.speaker_id)?;
        check_field("alignment_path", &self.alignment_path)?;
        if !(self.duration_sec > 0.0 && self.duration_sec.is_finite()) {
            return Err(CorpusError::InvalidField {
                field: "duration_sec",
                detail: format!("{} is not a positive duration", self.duration_sec),
            });
        }
        Ok(format!(
            "{}|{}|{}|{}|{}|{}|{}|{}",
            self.utt_id,
            self.audio_path,
            self.text,
            self.speaker_id,
            self.language.as_str(),
            self.gender,
            self.duration_sec,
            self.alignment_path
        ))
    }

    pub fn parse_line(file: &str, line_no: usize, line: &str) -> Result<Self, CorpusError> {
        let f: Vec<&str> = line.split('|').collect();
        if f.len() != MANIFEST_FIELDS {
            return Err(parse_err(
                file,
                line_no,
                format!("expected {MANIFEST_FIELDS} fields, found {}", f.len()),
            ));
        }
        let language = Language::parse(f[4])
            .ok_or_else(|| parse_err(file, line_no, format!("unknown language {:?}", f[4])))?;
        let gender = Gender::parse(f[5])
            .ok_or_else(|| parse_err(file, line_no, format!("unknown gender {:?}", f[5])))?;
        let duration_sec: f64 = f[6]
            .parse()
            .ok()
            .filter(|d: &f64| *d > 0.0 && d.is_finite())
            .ok_or_else(|| parse_err(file, line_no, format!("bad duration {:?}", f[6])))?;
        Ok(Self {
            utt_id: f[0].to_string(),
            audio_path: f[1].to_string(),
            text: f[2].to_string(),
            speaker_id: f[3].to_string(),
            language,
            gender,
            duration_sec,
            alignment_path: f[7].to_string(),
        })
    }
}

/// Renders a manifest, one entry per line.
pub fn write_manifest(entries: &[ManifestEntry]) -> Result<String, CorpusError> {
    let mut out = String::new();
    for e in entries {
        out.push_str(&e.to_line()?);
        out.push('\n');
    }
    Ok(out)
}

pub fn parse_manifest(file: &str, src: &str) -> Result<Vec<ManifestEntry>, CorpusError> {
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for (i, line) in src.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let e = ManifestEntry::parse_line(file, i + 1, line)?;
        if !seen.insert(e.utt_id.clone()) {
            return Err(CorpusError::DuplicateUtterance(e.utt_id));
        }
        out.push(e);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpeakerSpec {
    pub speaker_id: String,
    pub language: Language,
    pub gender: Gender,
    pub max_hours: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSpec {
    pub name: String,
    pub members: Vec<SpeakerSpec>,
}

impl DatasetSpec {
    pub fn new(name: impl Into<String>, members: Vec<SpeakerSpec>) -> Result<Self, CorpusError> {
        let spec = Self {
            name: name.into(),
            members,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), CorpusError> {
        if self.name.trim().is_empty() {
            return Err(CorpusError::BadSpec("missing name".into()));
        }
        if self.members.is_empty() {
            return Err(CorpusError::BadSpec("no members".into()));
        }
        let mut ids = BTreeSet::new();
        for m in &self.members {
            if !(m.max_hours > 0.0 && m.max_hours.is_finite()) {
                return Err(CorpusError::BadSpec(format!(
                    "{}: max_hours must be positive, got {}",
                    m.speaker_id, m.max_hours
                )));
            }
            if m.speaker_id.is_empty() || m.speaker_id.chars().any(|c| c.is_whitespace() || c == '|' || c == '/') {
                return Err(CorpusError::BadSpec(format!("bad speaker id {:?}", m.speaker_id)));
            }
            if !ids.insert(m.speaker_id.as_str()) {
                return Err(CorpusError::BadSpec(format!("duplicate speaker {}", m.speaker_id)));
            }
        }
        Ok(())
    }

    /// Parses
    ///
    /// ```text
    /// name = d1
    /// member = spk_cn_m CN M 5
    /// ```
    ///
    /// with `#` comments and blank lines ignored.
    pub fn parse(file: &str, src: &str) -> Result<Self, CorpusError> {
        let mut name = None;
        let mut members = Vec::new();
        for (i, raw) in src.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| parse_err(file, i + 1, "expected key = value"))?;
            let value = value.trim();
            match key.trim() {
                "name" => {
                    if name.replace(value.to_string()).is_some() {
                        return Err(parse_err(file, i + 1, "name given twice"));
                    }
                }
                "member" => {
                    let f: Vec<&str> = value.split_whitespace().collect();
                    if f.len() != 4 {
                        return Err(parse_err(
                            file,
                            i + 1,
                            "member needs: speaker language gender max_hours",
                        ));
                    }
                    let language = Language::parse(f[1])
                        .ok_or_else(|| parse_err(file, i + 1, format!("unknown language {:?}", f[1])))?;
                    let gender = Gender::parse(f[2])
                        .ok_or_else(|| parse_err(file, i + 1, format!("unknown gender {:?}", f[2])))?;
                    let max_hours: f64 = f[3]
                        .parse()
                        .map_err(|_| parse_err(file, i + 1, format!("bad hours {:?}", f[3])))?;
                    members.push(SpeakerSpec {
                        speaker_id: f[0].to_string(),
                        language,
                        gender,
                        max_hours,
                    });
                }
                other => return Err(parse_err(file, i + 1, format!("unknown key {other:?}"))),
            }
        }
        let name = name.ok_or_else(|| CorpusError::BadSpec("missing name".into()))?;
        Self::new(name, members)
    }

    pub fn to_text(&self) -> String {
        let mut s = format!("name = {}\n", self.name);
        for m in &self.members {
            s.push_str(&format!(
                "member = {} {} {} {}\n",
                m.speaker_id,
                m.language.as_str(),
                m.gender,
                m.max_hours
            ));
        }
        s
    }

    pub fn total_cap_hours(&self) -> f64 {
        self.members.iter().map(|m| m.max_hours).sum()
    }

    pub fn member(&self, speaker_id: &str) -> Option<&SpeakerSpec> {
        self.members.iter().find(|m| m.speaker_id == speaker_id)
    }
}

/// One utterance found on disk for a speaker.
#[derive(Debug, Clone, PartialEq)]
pub struct ScannedUtterance {
    pub utt_id: String,
    /// File name used for cap ordering.
    pub file_name: String,
    pub audio_path: String,
    pub text: String,
    pub duration_sec: f64,
    pub alignment_path: String,
    pub alignment: AlignmentRecord,
}

/// Applies a speaker's hour cap: keeps the longest prefix, in file-name
/// order, whose total stays within `max_hours`.
pub fn apply_cap(mut utts: Vec<ScannedUtterance>, max_hours: f64) -> Vec<ScannedUtterance> {
    utts.sort_by(|a, b| a.file_name.cmp(&b.file_name));
    let cap = max_hours * 3600.0;
    let mut total = 0.0;
    let mut keep = 0;
    for u in &utts {
        // Tolerate round-off when the cap is met exactly.
        if total + u.duration_sec > cap * (1.0 + 1e-12) {
            break;
        }
        total += u.duration_sec;
        keep += 1;
    }
    utts.truncate(keep);
    utts
}

/// Assembles a manifest in spec member order from per-speaker scans.
pub fn build_manifest(
    spec: &DatasetSpec,
    scans: &BTreeMap<String, Vec<ScannedUtterance>>,
) -> Result<Vec<ManifestEntry>, CorpusError> {
    spec.validate()?;
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for m in &spec.members {
        let utts = scans
            .get(&m.speaker_id)
            .ok_or_else(|| CorpusError::MissingSpeaker(m.speaker_id.clone()))?;
        for u in apply_cap(utts.clone(), m.max_hours) {
            u.alignment.check_duration(u.duration_sec)?;
            if !seen.insert(u.utt_id.clone()) {
                return Err(CorpusError::DuplicateUtterance(u.utt_id));
            }
            let entry = ManifestEntry {
                utt_id: u.utt_id,
                audio_path: u.audio_path,
                text: u.text,
                speaker_id: m.speaker_id.clone(),
                language: m.language,
                gender: m.gender,
                duration_sec: u.duration_sec,
                alignment_path: u.alignment_path,
            };
            entry.to_line()?;
            out.push(entry);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BalanceReport {
    /// Hours per (language, gender), in CN-M, CN-F, EN-M, EN-F order.
    pub cells: Vec<(Language, Gender, f64)>,
    pub total_hours: f64,
    /// Hours per speaker, in first-appearance order.
    pub speakers: Vec<(String, f64)>,
    pub flagged: bool,
}

impl BalanceReport {
    pub fn language_hours(&self, language: Language) -> f64 {
        self.cells.iter().filter(|c| c.0 == language).map(|c| c.2).sum()
    }

    pub fn gender_hours(&self, gender: Gender) -> f64 {
        self.cells.iter().filter(|c| c.1 == gender).map(|c| c.2).sum()
    }

    pub fn language_share(&self, language: Language) -> f64 {
        self.language_hours(language) / self.total_hours
    }

    pub fn gender_share(&self, gender: Gender) -> f64 {
        self.gender_hours(gender) / self.total_hours
    }

    pub fn to_text(&self) -> String {
        let mut s = format!("total_hours\t{:.6}\n", self.total_hours);
        for (l, g, h) in &self.cells {
            s.push_str(&format!("cell\t{}\t{}\t{:.6}\n", l.as_str(), g, h));
        }
        for l in [Language::Cn, Language::En] {
            s.push_str(&format!("language\t{}\t{:.2}%\n", l.as_str(), 100.0 * self.language_share(l)));
        }
        for g in [Gender::M, Gender::F] {
            s.push_str(&format!("gender\t{}\t{:.2}%\n", g, 100.0 * self.gender_share(g)));
        }
        for (spk, h) in &self.speakers {
            s.push_str(&format!("speaker\t{spk}\t{h:.6}\n"));
        }
        s.push_str(&format!("flagged\t{}\n", self.flagged));
        s
    }
}

pub fn balance_report(manifest: &[ManifestEntry]) -> Result<BalanceReport, CorpusError> {
    if manifest.is_empty() {
        return Err(CorpusError::EmptyManifest);
    }
    let keys = [
        (Language::Cn, Gender::M),
        (Language::Cn, Gender::F),
        (Language::En, Gender::M),
        (Language::En, Gender::F),
    ];
    let mut cells: Vec<(Language, Gender, f64)> = keys.iter().map(|&(l, g)| (l, g, 0.0)).collect();
    let mut speakers: Vec<(String, f64)> = Vec::new();
    let mut total = 0.0;
    for e in manifest {
        let h = e.duration_sec / 3600.0;
        total += h;
        if let Some(c) = cells.iter_mut().find(|c| c.0 == e.language && c.1 == e.gender) {
            c.2 += h;
        }
        match speakers.iter_mut().find(|s| s.0 == e.speaker_id) {
            Some(s) => s.1 += h,
            None => speakers.push((e.speaker_id.clone(), h)),
        }
    }
    let mut report = BalanceReport {
        cells,
        total_hours: total,
        speakers,
        flagged: false,
    };
    let limit = IMBALANCE_SHARE + 1e-12;
    report.flagged = [Language::Cn, Language::En]
        .iter()
        .any(|&l| report.language_share(l) > limit)
        || [Gender::M, Gender::F].iter().any(|&g| report.gender_share(g) > limit);
    Ok(report)
}
