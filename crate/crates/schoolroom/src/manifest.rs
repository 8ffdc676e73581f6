//! JSONL records: the input utterance table and the output manifests.

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use schoolroom_core::assemble::{Condition, Order, Split};
use schoolroom_core::pairing::Role;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Read one JSON value per non-blank line.
pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    if !path.is_file() {
        return Err(Error::MissingInput(path.into()));
    }
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| Error::Format {
            path: path.into(),
            line: i + 1,
            message: e.to_string(),
        })?);
    }
    Ok(out)
}

pub fn write_jsonl<T: Serialize>(path: &Path, records: impl IntoIterator<Item = T>) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for r in records {
        serde_json::to_writer(&mut w, &r).map_err(|e| Error::io(path, e.into()))?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// One row of the input utterance table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UtteranceRecord {
    pub id: String,
    /// Relative paths resolve against the table's directory.
    pub audio_path: String,
    pub transcript: String,
    pub speaker_id: String,
    pub role: Role,
    pub source_corpus: String,
    /// Official split of the source corpus, kept verbatim.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split: Option<Split>,
    /// Unit that must not be divided across splits (a classroom channel).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub group: Option<String>,
}

/// One output record. Dialogue fields are absent for single utterances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    /// Relative to the output root.
    pub audio_path: String,
    pub transcript: String,
    pub speaker_id: String,
    pub role: Role,
    pub split: Split,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rir_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snr_db: Option<f64>,
    /// Seed that regenerates this item on its own.
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub condition: Option<Condition>,
    pub duration_s: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub order: Option<Order>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub overlap_s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gap_s: Option<f64>,
    #[serde(default, skip_serializing_if = "is_false")]
    pub overlap_redrawn: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dialogue: Option<DialogueInfo>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise: Option<NoiseInfo>,
}

fn is_false(b: &bool) -> bool {
    !*b
}

/// Which utterances a dialogue was built from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DialogueInfo {
    pub child_id: String,
    pub adult_id: String,
    pub adult_speaker_id: String,
    pub similarity: f64,
    /// Gain applied when the overlapped sum exceeded full scale.
    pub level_gain: f64,
}

/// How the noise of a noisy rendition was produced, enough to rebuild the
/// exact noise component: `noise[i] = track[(offset + i) % len] · noise_gain · speech_gain`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseInfo {
    pub track: String,
    pub offset: usize,
    pub noise_gain: f64,
    pub speech_gain: f64,
    pub clipped: bool,
}

/// `manifests/<condition>_<split>.jsonl`
pub fn manifest_name(condition: Condition, split: Split) -> String {
    format!("{condition}_{split}.jsonl")
}

/// `<condition>/<split>/<id>.wav`
pub fn audio_rel_path(condition: Condition, split: Split, id: &str) -> String {
    format!("{condition}/{split}/{id}.wav")
}

/// Restrict an id to characters safe in file names.
pub fn file_safe(id: &str) -> String {
    id.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.') {
                c
            } else {
                '_'
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn optional_fields_are_omitted() {
        let e = ManifestEntry {
            id: "u1".into(),
            audio_path: "clean/train/u1.wav".into(),
            transcript: "hello".into(),
            speaker_id: "s1".into(),
            role: Role::Child,
            split: Split::Train,
            rir_id: None,
            snr_db: None,
            seed: 3,
            condition: Some(Condition::Clean),
            duration_s: 1.0,
            order: None,
            overlap_s: None,
            gap_s: None,
            overlap_redrawn: false,
            dialogue: None,
            noise: None,
        };
        let s = serde_json::to_string(&e).unwrap();
        assert!(!s.contains("rir_id") && !s.contains("overlap_redrawn"));
        assert!(s.contains("\"condition\":\"clean\""));
        let back: ManifestEntry = serde_json::from_str(&s).unwrap();
        assert_eq!(back, e);
    }

    #[test]
    fn jsonl_round_trip_and_line_errors() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.jsonl");
        write_jsonl(&p, [1u32, 2, 3]).unwrap();
        assert_eq!(read_jsonl::<u32>(&p).unwrap(), [1, 2, 3]);
        fs::write(&p, "1\n\n{oops}\n").unwrap();
        match read_jsonl::<u32>(&p) {
            Err(Error::Format { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            read_jsonl::<u32>(&dir.path().join("none")),
            Err(Error::MissingInput(_))
        ));
    }

    #[test]
    fn layout_names() {
        assert_eq!(manifest_name(Condition::RirNoise, Split::Dev), "rir+noise_dev.jsonl");
        assert_eq!(audio_rel_path(Condition::Noise, Split::Test, "a"), "noise/test/a.wav");
        assert_eq!(file_safe("kid 7/x:y"), "kid_7_x_y");
    }
}
