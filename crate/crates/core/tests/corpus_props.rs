use proptest::prelude::*;
use xling_core::corpus::{balance_report, parse_manifest, write_manifest, Gender, ManifestEntry};
use xling_core::Language;

fn entry() -> impl Strategy<Value = ManifestEntry> {
    (
        "[a-z0-9_]{1,8}",
        "[^|\\r\\n]{0,20}",
        0usize..4,
        prop::bool::ANY,
        prop::bool::ANY,
        0.01f64..30.0,
    )
        .prop_map(|(id, text, spk, cn, male, dur)| ManifestEntry {
            utt_id: id.clone(),
            audio_path: format!("{id}.wav"),
            text,
            speaker_id: format!("spk{spk}"),
            language: if cn { Language::Cn } else { Language::En },
            gender: if male { Gender::M } else { Gender::F },
            duration_sec: dur,
            alignment_path: format!("{id}.align"),
        })
}

proptest! {
    #[test]
    fn manifest_round_trip(entries in prop::collection::btree_map("[a-z]{1,6}", entry(), 0..10)) {
        let entries: Vec<ManifestEntry> = entries
            .into_iter()
            .map(|(k, mut e)| { e.utt_id = k; e })
            .collect();
        let text = write_manifest(&entries).unwrap();
        prop_assert_eq!(parse_manifest("m", &text).unwrap(), entries);
    }

    #[test]
    fn balance_totals_add_up(entries in prop::collection::vec(entry(), 1..20)) {
        let r = balance_report(&entries).unwrap();
        let hours: f64 = entries.iter().map(|e| e.duration_sec / 3600.0).sum();
        let cells: f64 = r.cells.iter().map(|c| c.2).sum();
        prop_assert!((r.total_hours - hours).abs() < 1e-6);
        prop_assert!((cells - hours).abs() < 1e-6);
        let spk: f64 = r.speakers.iter().map(|s| s.1).sum();
        prop_assert!((spk - hours).abs() < 1e-6);
    }
}
