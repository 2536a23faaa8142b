use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use xling_core::corpus::{AlignmentRecord, DatasetSpec, ScannedUtterance};

use crate::error::{Context, Error, Result};
use crate::{fsutil, wav};

/// Lists `<dir>/*.wav` with their `.txt` transcript and `.align` alignment,
/// in file-name order.
pub fn scan_speaker(dir: &Path, sample_rate: u32) -> Result<Vec<ScannedUtterance>> {
    let mut wavs: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .map(|e| e.map(|e| e.path()).map_err(|err| Error::io(dir, err)))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .filter(|p| p.extension().is_some_and(|x| x == "wav") && p.is_file())
        .collect();
    wavs.sort();
    wavs.iter()
        .map(|audio| {
            let utt_id = audio
                .file_stem()
                .and_then(|s| s.to_str())
                .ok_or_else(|| Error::format(audio, "file name is not UTF-8"))?
                .to_string();
            let text = fsutil::read_to_string(&audio.with_extension("txt"))?.trim().to_string();
            let align_path = audio.with_extension("align");
            let alignment = AlignmentRecord::parse(&utt_id, &fsutil::read_to_string(&align_path)?)
                .at(align_path.display())?;
            let (duration_sec, rate) = wav::duration_sec(audio)?;
            if rate != sample_rate {
                return Err(Error::Wav {
                    path: audio.clone(),
                    detail: format!("sample rate {rate} Hz, expected {sample_rate} Hz"),
                });
            }
            if duration_sec <= 0.0 {
                return Err(Error::Wav {
                    path: audio.clone(),
                    detail: "no samples".into(),
                });
            }
            Ok(ScannedUtterance {
                file_name: audio.file_name().unwrap().to_string_lossy().into_owned(),
                audio_path: audio.display().to_string(),
                text,
                duration_sec,
                alignment_path: align_path.display().to_string(),
                alignment,
                utt_id,
            })
        })
        .collect()
}

/// Scans every spec member under the first root holding its directory.
/// Speakers found nowhere are left out, which `build_manifest` reports.
pub fn scan_roots(
    spec: &DatasetSpec,
    roots: &[PathBuf],
    sample_rate: u32,
) -> Result<BTreeMap<String, Vec<ScannedUtterance>>> {
    let found: Vec<Option<(String, Vec<ScannedUtterance>)>> = spec
        .members
        .par_iter()
        .map(|m| {
            let Some(dir) = roots.iter().map(|r| r.join(&m.speaker_id)).find(|d| d.is_dir()) else {
                return Ok(None);
            };
            log::debug!("scanning {}", dir.display());
            Ok(Some((m.speaker_id.clone(), scan_speaker(&dir, sample_rate)?)))
        })
        .collect::<Result<_>>()?;
    Ok(found.into_iter().flatten().collect())
}
