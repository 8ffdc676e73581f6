//! A small synthetic corpus and config shared by the integration tests.

#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use schoolroom::embeddings::{write_embeddings, EmbeddingFile, EmbeddingHeader, EmbeddingRecord};
use schoolroom::manifest::{write_jsonl, UtteranceRecord};
use schoolroom::wav::{write_wav, Encoding, RangePolicy};
use schoolroom_core::pairing::Role;
use schoolroom_core::AudioBuffer;

pub const RATE: u32 = 16_000;
pub const DIM: usize = 8;

/// Harmonic tone with a 4 Hz syllable envelope, standing in for speech.
pub fn voice(f0: f64, seconds: f64, rng: &mut StdRng) -> AudioBuffer {
    let n = (seconds * f64::from(RATE)) as usize;
    let phase: f64 = rng.random_range(0.0..1.0);
    let samples = (0..n)
        .map(|i| {
            let t = i as f64 / f64::from(RATE);
            let env = (0.5 - 0.5 * (2.0 * std::f64::consts::PI * (4.0 * t + phase)).cos()).max(0.0);
            let tone: f64 = (1..=5)
                .map(|k| (2.0 * std::f64::consts::PI * f0 * k as f64 * t).sin() / k as f64)
                .sum();
            0.25 * env * tone
        })
        .collect();
    AudioBuffer::new(samples, RATE).unwrap()
}

fn unit(rng: &mut StdRng) -> Vec<f64> {
    let v: Vec<f64> = (0..DIM).map(|_| rng.random_range(-1.0..1.0)).collect();
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.into_iter().map(|x| x / n).collect()
}

pub struct Fixture {
    pub dir: PathBuf,
    pub config: PathBuf,
    pub utterances: usize,
}

/// Write utterances, embeddings, a babble source pool and a config with a
/// reduced bank into `dir`.
pub fn fixture(dir: &Path, speakers_per_role: usize, utts_per_speaker: usize) -> Fixture {
    let mut rng = StdRng::seed_from_u64(11);
    let audio = dir.join("audio");
    let mut records = Vec::new();
    let mut embeddings = Vec::new();
    for (role, f0) in [(Role::Child, 280.0), (Role::Adult, 130.0)] {
        for s in 0..speakers_per_role {
            let speaker = format!("{}{s:02}", role.as_str());
            for u in 0..utts_per_speaker {
                let id = format!("{speaker}_{u}");
                let seconds = rng.random_range(1.0..2.0);
                let buf = voice(f0 + 10.0 * s as f64, seconds, &mut rng);
                write_wav(
                    &buf,
                    audio.join(format!("{id}.wav")),
                    Encoding::Pcm16,
                    RangePolicy::Strict,
                )
                .unwrap();
                records.push(UtteranceRecord {
                    id: id.clone(),
                    audio_path: format!("audio/{id}.wav"),
                    transcript: format!("words of {id}"),
                    speaker_id: speaker.clone(),
                    role,
                    source_corpus: "synthetic".into(),
                    split: None,
                    group: None,
                });
                embeddings.push(EmbeddingRecord {
                    id,
                    role,
                    dim: None,
                    values: unit(&mut rng),
                });
            }
        }
    }
    write_jsonl(&dir.join("utterances.jsonl"), &records).unwrap();
    let header = EmbeddingHeader {
        model_name: "fixture".into(),
        dim: DIM,
        count: embeddings.len(),
    };
    write_embeddings(
        &dir.join("embeddings.jsonl"),
        &EmbeddingFile {
            header,
            records: embeddings,
        },
    )
    .unwrap();

    let pool = dir.join("pool");
    for k in 0..4 {
        let buf = voice(150.0 + 40.0 * k as f64, 1.5, &mut rng);
        write_wav(
            &buf,
            pool.join(format!("clip{k}.wav")),
            Encoding::Pcm16,
            RangePolicy::Strict,
        )
        .unwrap();
    }

    let config = dir.join("config.toml");
    fs::write(&config, CONFIG).unwrap();
    Fixture {
        dir: dir.to_path_buf(),
        config,
        utterances: records.len(),
    }
}

const CONFIG: &str = r#"
seed = 7
workers = 1

[paths]
utterances = "utterances.jsonl"
embeddings = "embeddings.jsonl"
source_pool = "pool"
output = "out"

[rir_bank]
n_rooms = 2
positions_per_room = 3
rir_len_s = 0.25
max_order = 8

[babble]
n_sources = 3
duration_s = 6.0
waypoint_dwell_s = 2.0
event_rate_per_min = 0.0

[babble.sim]
max_order = 6
rir_len_s = 0.2
"#;

pub fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_schoolroom"))
}

pub fn run(args: &[&str], cwd: &Path) -> Output {
    bin()
        .args(args)
        .current_dir(cwd)
        .env_remove("SCHOOLROOM_SEED")
        .output()
        .unwrap()
}

/// Every file below `dir` with the given extension.
pub fn files_with_ext(dir: &Path, ext: &str) -> Vec<PathBuf> {
    let mut out = Vec::new();
    if !dir.is_dir() {
        return out;
    }
    for e in fs::read_dir(dir).unwrap() {
        let p = e.unwrap().path();
        if p.is_dir() {
            out.extend(files_with_ext(&p, ext));
        } else if p.extension().is_some_and(|x| x == ext) {
            out.push(p);
        }
    }
    out.sort();
    out
}
