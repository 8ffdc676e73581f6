//! The commands behind each subcommand. Each returns a JSON summary; with
//! `dry_run` set, a command validates its inputs, reports its plan and
//! writes nothing.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use schoolroom_core::assemble::{
    build_dialogue, partition, AssemblySpec, Condition, PartitionItem, Split, SplitAssignment, Turn, CLIP_CEILING,
};
use schoolroom_core::babble::{plan_babble, BabbleMetadata, BabbleSpec};
use schoolroom_core::ess::{extract_with_deconvolver, generate_sweep, inverse_filter, Deconvolver, RirGeometry};
use schoolroom_core::pairing::{MatchedPair, Role, Utterance};
use schoolroom_core::room::{Point3, RirBank};
use schoolroom_core::{seed, signal, AudioBuffer};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::bank_io::{read_bank, write_bank};
use crate::config::{Input, PipelineConfig};
use crate::embeddings::{parse_embeddings, read_embeddings};
use crate::log;
use crate::manifest::{
    audio_rel_path, file_safe, manifest_name, read_jsonl, write_jsonl, DialogueInfo, ManifestEntry, UtteranceRecord,
};
use crate::stages::{self, NoiseTrack, PreparedBank, RenderContext};
use crate::wav::{quantize_buffer, read_wav, wav_duration, write_wav, RangePolicy};
use crate::{Error, Result};

pub const BANK_DIR: &str = "rir_bank";
pub const NOISE_DIR: &str = "noise";
pub const MANIFEST_DIR: &str = "manifests";
pub const SPLITS_FILE: &str = "splits.jsonl";
pub const PAIRS_FILE: &str = "pairs.jsonl";

fn rel(path: &Path, root: &Path) -> String {
    path.strip_prefix(root).unwrap_or(path).display().to_string()
}

fn read_at_rate(path: &Path, rate: u32) -> Result<AudioBuffer> {
    let audio = read_wav(path)?;
    Ok(signal::resample(&audio, rate)?)
}

/// Every `*.wav` under `dir`, sorted by file name.
fn wav_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x.eq_ignore_ascii_case("wav")))
        .collect();
    files.sort();
    Ok(files)
}

fn load_pool(dir: &Path, rate: u32) -> Result<Vec<AudioBuffer>> {
    wav_files(dir)?.par_iter().map(|p| read_at_rate(p, rate)).collect()
}

// ---------------------------------------------------------------- sweep-gen

pub fn sweep_gen(cfg: &PipelineConfig, dry_run: bool) -> Result<Value> {
    let out = cfg.output_dir()?;
    let spec = cfg.sweep;
    let summary = json!({
        "samples": spec.len(),
        "sample_rate": spec.sample_rate,
        "rate_constant_s": spec.rate_constant(),
        "files": ["sweep.wav", "inverse.wav", "sweep.json"],
    });
    if dry_run {
        return Ok(summary);
    }
    let sweep = generate_sweep(&spec)?;
    // The inverse filter's envelope can exceed full scale; store it at unit peak.
    let mut inverse = inverse_filter(&spec)?;
    inverse.normalize_peak(1.0);
    write_wav(&sweep, out.join("sweep.wav"), cfg.encoding, RangePolicy::Strict)?;
    write_wav(&inverse, out.join("inverse.wav"), cfg.encoding, RangePolicy::Strict)?;
    let text = serde_json::to_string_pretty(&spec).expect("spec serializes");
    fs::write(out.join("sweep.json"), text).map_err(|e| Error::io(&out, e))?;
    Ok(summary)
}

// -------------------------------------------------------------- rir-extract

/// Deconvolve each recording with the configured sweep. The RIR id is the
/// file stem.
pub fn rir_extract(cfg: &PipelineConfig, recordings: &[PathBuf], room_id: &str, dry_run: bool) -> Result<Value> {
    if recordings.is_empty() {
        return Err(Error::Config("rir-extract needs at least one --input recording".into()));
    }
    for r in recordings {
        if !r.is_file() {
            return Err(Error::MissingInput(r.clone()));
        }
    }
    let out = cfg.output_dir()?.join(BANK_DIR);
    let rir_len = (cfg.extract.rir_len_s * f64::from(cfg.sweep.sample_rate)).round() as usize;
    if dry_run {
        return Ok(json!({ "recordings": recordings.len(), "rir_len": rir_len, "output": out }));
    }
    let deconvolver = Deconvolver::new(&cfg.sweep, cfg.extract.regularization)?;
    let extractions = recordings
        .par_iter()
        .map(|p| {
            let rec = read_wav(p)?;
            let id = p
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default();
            let geometry = RirGeometry {
                id,
                room_id: room_id.to_string(),
                source: Point3::new(0.0, 0.0, 0.0),
                receiver: Point3::new(0.0, 0.0, 0.0),
            };
            Ok(extract_with_deconvolver(
                &deconvolver,
                &rec,
                rir_len,
                geometry,
                cfg.extract.anchor,
            )?)
        })
        .collect::<Result<Vec<_>>>()?;
    let peaks: Vec<i64> = extractions.iter().map(|e| e.peak_lag).collect();
    let bank = RirBank {
        rooms: Vec::new(),
        rirs: extractions.into_iter().map(|e| e.rir).collect(),
    };
    write_bank(&out, &bank)?;
    log::emit("rir-extract", "done", json!({ "items": bank.len() }));
    Ok(json!({ "rirs": bank.len(), "peak_lags": peaks, "output": out }))
}

// ----------------------------------------------------------------- rir-bank

fn bank_spec(cfg: &PipelineConfig) -> Result<schoolroom_core::room::RirBankSpec> {
    let mut spec = cfg.rir_bank.clone();
    spec.seed = cfg.stage_seed("rir-bank")?;
    Ok(spec)
}

pub fn rir_bank(cfg: &PipelineConfig, dry_run: bool) -> Result<Value> {
    let spec = bank_spec(cfg)?;
    let out = cfg.output_dir()?.join(BANK_DIR);
    if dry_run {
        return Ok(json!({ "rooms": spec.n_rooms, "rirs": spec.expected_count(), "seed": spec.seed }));
    }
    let bank = build_bank(cfg)?;
    write_bank(&out, &bank)?;
    Ok(json!({ "rooms": bank.rooms.len(), "rirs": bank.len(), "seed": spec.seed, "output": out }))
}

fn build_bank(cfg: &PipelineConfig) -> Result<RirBank> {
    let spec = bank_spec(cfg)?;
    log::emit(
        "rir-bank",
        "start",
        json!({ "items": spec.expected_count(), "seed": spec.seed }),
    );
    let bank = stages::generate_bank(&spec)?;
    log::emit("rir-bank", "done", json!({ "items": bank.len() }));
    Ok(bank)
}

/// The configured bank, else one already in the output tree.
fn existing_bank(cfg: &PipelineConfig) -> Result<Option<RirBank>> {
    if let Some(dir) = cfg.optional(Input::RirBank)? {
        return read_bank(&dir).map(Some);
    }
    let dir = cfg.output_dir()?.join(BANK_DIR);
    if dir.join(crate::bank_io::INDEX_FILE).is_file() {
        return read_bank(&dir).map(Some);
    }
    Ok(None)
}

// ------------------------------------------------------------------- babble

/// One babble spec per track: per room of the bank in matched mode,
/// otherwise `noise_tracks` copies of the configured room.
fn babble_specs(cfg: &PipelineConfig, bank: Option<&RirBank>) -> Result<Vec<(String, BabbleSpec)>> {
    let base_seed = cfg.stage_seed("babble")?;
    if cfg.matched_acoustics {
        let bank = bank.ok_or_else(|| Error::stage("babble", "matched acoustics needs an RIR bank"))?;
        let mut specs = Vec::new();
        for (k, room) in bank.rooms.iter().enumerate() {
            let mut waypoints: Vec<Point3> = Vec::new();
            for r in bank.rirs.iter().filter(|r| r.room_id == room.id) {
                for p in [r.source, r.receiver] {
                    if !waypoints.contains(&p) {
                        waypoints.push(p);
                    }
                }
            }
            if waypoints.is_empty() {
                return Err(Error::stage("babble", format!("room {} has no positions", room.id)));
            }
            let spec = BabbleSpec {
                room: room.clone(),
                listener_waypoints: waypoints,
                seed: seed::derive(base_seed, k as u64),
                ..cfg.babble.clone()
            };
            specs.push((format!("babble_{}", file_safe(&room.id)), spec));
        }
        if specs.is_empty() {
            return Err(Error::stage(
                "babble",
                "matched acoustics needs rooms in the bank index",
            ));
        }
        Ok(specs)
    } else {
        Ok((0..cfg.noise_tracks)
            .map(|k| {
                let spec = BabbleSpec {
                    seed: seed::derive(base_seed, k as u64),
                    ..cfg.babble.clone()
                };
                (format!("babble_{k:02}"), spec)
            })
            .collect())
    }
}

fn babble_pools(cfg: &PipelineConfig) -> Result<(Vec<AudioBuffer>, Vec<AudioBuffer>)> {
    let sources = match cfg.babble.n_sources {
        0 => Vec::new(),
        _ => load_pool(&cfg.required(Input::SourcePool)?, cfg.sample_rate)?,
    };
    let events = if cfg.babble.event_rate_per_min > 0.0 {
        load_pool(&cfg.required(Input::EventPool)?, cfg.sample_rate)?
    } else {
        Vec::new()
    };
    Ok((sources, events))
}

/// Render tracks into `<out>/noise`, returning them as read back from disk.
fn build_noise(cfg: &PipelineConfig, bank: Option<&RirBank>) -> Result<Vec<NoiseTrack>> {
    let specs = babble_specs(cfg, bank)?;
    let (sources, events) = babble_pools(cfg)?;
    let dir = cfg.output_dir()?.join(NOISE_DIR);
    let mut tracks = Vec::with_capacity(specs.len());
    for (name, spec) in specs {
        log::emit(
            "babble",
            "start",
            json!({ "track": name, "seed": spec.seed, "sources": spec.n_sources }),
        );
        let plan = plan_babble(&spec, &sources, &events)?;
        let babble = stages::render_babble(&plan, &sources, &events)?;
        let audio = quantize_buffer(&babble.audio, cfg.encoding);
        write_wav(
            &audio,
            dir.join(format!("{name}.wav")),
            cfg.encoding,
            RangePolicy::Strict,
        )?;
        let meta = serde_json::to_string_pretty(&babble.metadata).expect("metadata serializes");
        let sidecar = dir.join(format!("{name}.json"));
        fs::write(&sidecar, meta).map_err(|e| Error::io(&sidecar, e))?;
        log::emit("babble", "done", json!({ "track": name, "events": plan.events.len() }));
        tracks.push(NoiseTrack {
            name,
            audio,
            room_id: Some(spec.room.id.clone()),
        });
    }
    Ok(tracks)
}

fn read_noise_dir(dir: &Path, rate: u32) -> Result<Vec<NoiseTrack>> {
    wav_files(dir)?
        .iter()
        .map(|p| {
            let name = p
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default();
            let sidecar = p.with_extension("json");
            let room_id = match fs::read_to_string(&sidecar) {
                Ok(text) => serde_json::from_str::<BabbleMetadata>(&text).ok().map(|m| m.room.id),
                Err(_) => None,
            };
            Ok(NoiseTrack {
                name,
                audio: read_at_rate(p, rate)?,
                room_id,
            })
        })
        .collect()
}

/// The configured noise directory, else tracks already in the output tree.
fn existing_noise(cfg: &PipelineConfig) -> Result<Option<Vec<NoiseTrack>>> {
    if let Some(dir) = cfg.optional(Input::Noise)? {
        return read_noise_dir(&dir, cfg.sample_rate).map(Some);
    }
    let dir = cfg.output_dir()?.join(NOISE_DIR);
    if dir.is_dir() && !wav_files(&dir)?.is_empty() {
        return read_noise_dir(&dir, cfg.sample_rate).map(Some);
    }
    Ok(None)
}

pub fn babble(cfg: &PipelineConfig, dry_run: bool) -> Result<Value> {
    let bank = if cfg.matched_acoustics {
        existing_bank(cfg)?
    } else {
        None
    };
    let specs = babble_specs(cfg, bank.as_ref())?;
    let plan: Vec<Value> = specs
        .iter()
        .map(|(n, s)| json!({ "track": n, "room": s.room.id, "seed": s.seed, "duration_s": s.duration_s }))
        .collect();
    if dry_run {
        babble_pools_exist(cfg)?;
        return Ok(json!({ "tracks": plan }));
    }
    let tracks = build_noise(cfg, bank.as_ref())?;
    Ok(json!({ "tracks": plan, "written": tracks.len() }))
}

fn babble_pools_exist(cfg: &PipelineConfig) -> Result<()> {
    if cfg.babble.n_sources > 0 {
        cfg.required(Input::SourcePool)?;
    }
    if cfg.babble.event_rate_per_min > 0.0 {
        cfg.required(Input::EventPool)?;
    }
    Ok(())
}

// -------------------------------------------------- utterances and splits

#[derive(Debug, Clone)]
pub struct LoadedUtterance {
    pub record: UtteranceRecord,
    pub path: PathBuf,
    pub duration_s: f64,
}

fn load_utterances(cfg: &PipelineConfig) -> Result<Vec<LoadedUtterance>> {
    let table = cfg.required(Input::Utterances)?;
    let base = table.parent().map(Path::to_path_buf).unwrap_or_default();
    let records: Vec<UtteranceRecord> = read_jsonl(&table)?;
    let loaded = records
        .into_par_iter()
        .map(|record| {
            let path = base.join(&record.audio_path);
            if !path.is_file() {
                return Err(Error::MissingInput(path));
            }
            let duration_s = wav_duration(&path)?;
            Ok(LoadedUtterance {
                record,
                path,
                duration_s,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut ids: Vec<&str> = loaded.iter().map(|u| u.record.id.as_str()).collect();
    ids.sort_unstable();
    if let Some(w) = ids.windows(2).find(|w| w[0] == w[1]) {
        return Err(Error::stage("utterances", format!("duplicate utterance id {}", w[0])));
    }
    Ok(loaded)
}

fn split_utterances(cfg: &PipelineConfig, utts: &[LoadedUtterance]) -> Result<SplitAssignment> {
    let items: Vec<PartitionItem> = utts
        .iter()
        .map(|u| PartitionItem {
            id: u.record.id.clone(),
            speaker_id: u.record.speaker_id.clone(),
            source_corpus: u.record.source_corpus.clone(),
            duration_s: u.duration_s,
            group: u.record.group.clone(),
            fixed_split: u.record.split,
        })
        .collect();
    let seed = cfg.stage_seed("partition")?;
    let assignment = partition(&items, &cfg.splits, seed)?;
    let r = assignment.realized_ratios(&items);
    log::emit(
        "partition",
        "done",
        json!({ "items": items.len(), "seed": seed, "train": r.train, "dev": r.dev, "test": r.test }),
    );
    Ok(assignment)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct SplitRow {
    id: String,
    speaker_id: String,
    split: Split,
}

fn write_splits(out: &Path, utts: &[LoadedUtterance], a: &SplitAssignment) -> Result<()> {
    let mut rows: Vec<SplitRow> = utts
        .iter()
        .map(|u| SplitRow {
            id: u.record.id.clone(),
            speaker_id: u.record.speaker_id.clone(),
            split: a.get(&u.record.id).expect("every item is assigned"),
        })
        .collect();
    rows.sort_by(|x, y| x.id.cmp(&y.id));
    write_jsonl(&out.join(SPLITS_FILE), rows)
}

pub fn partition_cmd(cfg: &PipelineConfig, dry_run: bool) -> Result<Value> {
    let utts = load_utterances(cfg)?;
    let a = split_utterances(cfg, &utts)?;
    let mut counts: BTreeMap<Split, usize> = BTreeMap::new();
    for s in a.by_id.values() {
        *counts.entry(*s).or_default() += 1;
    }
    if !dry_run {
        write_splits(&cfg.output_dir()?, &utts, &a)?;
    }
    Ok(json!({ "utterances": utts.len(), "per_split": counts }))
}

// --------------------------------------------------------------------- pair

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PairRow {
    pub split: Split,
    #[serde(flatten)]
    pub pair: MatchedPair,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Pairing {
    pub pairs: Vec<PairRow>,
    pub unmatched_children: Vec<String>,
    pub unmatched_adults: Vec<String>,
}

/// Match children to adults inside each split, so no dialogue crosses one.
fn pair_within_splits(cfg: &PipelineConfig, utts: &[LoadedUtterance], a: &SplitAssignment) -> Result<Pairing> {
    let path = cfg.required(Input::Embeddings)?;
    let file = read_embeddings(&path)?;
    let by_id: HashMap<&str, &crate::embeddings::EmbeddingRecord> =
        file.records.iter().map(|r| (r.id.as_str(), r)).collect();
    let mut out = Pairing::default();
    for split in Split::ALL {
        let mut children = Vec::new();
        let mut adults = Vec::new();
        for u in utts.iter().filter(|u| a.get(&u.record.id) == Some(split)) {
            let emb = by_id
                .get(u.record.id.as_str())
                .ok_or_else(|| Error::stage("pair", format!("no embedding for utterance {}", u.record.id)))?;
            if emb.role != u.record.role {
                return Err(Error::stage(
                    "pair",
                    format!("role of {} differs between table and embeddings", u.record.id),
                ));
            }
            let utt = Utterance {
                id: u.record.id.clone(),
                transcript: u.record.transcript.clone(),
                embedding: emb.values.clone(),
                duration_s: u.duration_s,
                speaker_id: u.record.speaker_id.clone(),
                role: u.record.role,
                source_corpus: u.record.source_corpus.clone(),
            };
            match u.record.role {
                Role::Child => children.push(utt),
                Role::Adult => adults.push(utt),
            }
        }
        let outcome = stages::pair_utterances(children, adults)?;
        log::emit("pair", "done", json!({ "split": split, "pairs": outcome.pairs.len() }));
        out.pairs
            .extend(outcome.pairs.into_iter().map(|pair| PairRow { split, pair }));
        out.unmatched_children.extend(outcome.unmatched_children);
        out.unmatched_adults.extend(outcome.unmatched_adults);
    }
    out.unmatched_children.sort();
    out.unmatched_adults.sort();
    Ok(out)
}

fn write_pairs(out: &Path, p: &Pairing) -> Result<()> {
    let mut lines: Vec<Value> = p
        .pairs
        .iter()
        .map(|r| serde_json::to_value(r).expect("pair serializes"))
        .collect();
    lines.extend(
        p.unmatched_children
            .iter()
            .map(|id| json!({ "unmatched": id, "role": "child" })),
    );
    lines.extend(
        p.unmatched_adults
            .iter()
            .map(|id| json!({ "unmatched": id, "role": "adult" })),
    );
    write_jsonl(&out.join(PAIRS_FILE), lines)
}

pub fn pair_cmd(cfg: &PipelineConfig, dry_run: bool) -> Result<Value> {
    let utts = load_utterances(cfg)?;
    if dry_run {
        let file = parse_embeddings(&cfg.required(Input::Embeddings)?)?;
        return Ok(
            json!({ "utterances": utts.len(), "embeddings": file.records.len(), "violations": file.violations().len() }),
        );
    }
    let a = split_utterances(cfg, &utts)?;
    let p = pair_within_splits(cfg, &utts, &a)?;
    let out = cfg.output_dir()?;
    write_splits(&out, &utts, &a)?;
    write_pairs(&out, &p)?;
    Ok(json!({
        "pairs": p.pairs.len(),
        "unmatched_children": p.unmatched_children.len(),
        "unmatched_adults": p.unmatched_adults.len(),
    }))
}

// ----------------------------------------------------------------- assemble

struct DialogueJob<'a> {
    id: String,
    split: Split,
    pair: &'a MatchedPair,
    child: &'a LoadedUtterance,
    adult: &'a LoadedUtterance,
}

fn dialogue_jobs<'a>(pairs: &'a Pairing, utts: &'a [LoadedUtterance]) -> Result<Vec<DialogueJob<'a>>> {
    let by_id: HashMap<&str, &LoadedUtterance> = utts.iter().map(|u| (u.record.id.as_str(), u)).collect();
    let mut jobs: Vec<DialogueJob<'a>> = pairs
        .pairs
        .iter()
        .map(|row| DialogueJob {
            id: file_safe(&format!("{}__{}", row.pair.child_id, row.pair.adult_id)),
            split: row.split,
            pair: &row.pair,
            child: by_id[row.pair.child_id.as_str()],
            adult: by_id[row.pair.adult_id.as_str()],
        })
        .collect();
    jobs.sort_by(|a, b| a.id.cmp(&b.id));
    if let Some(w) = jobs.windows(2).find(|w| w[0].id == w[1].id) {
        return Err(Error::stage(
            "assemble",
            format!("dialogue id {} is not unique", w[0].id),
        ));
    }
    Ok(jobs)
}

/// Build one clean dialogue, quantized to the output encoding.
fn build_clean(
    cfg: &PipelineConfig,
    spec: &AssemblySpec,
    job: &DialogueJob<'_>,
) -> Result<(ManifestEntry, AudioBuffer)> {
    let child = read_at_rate(&job.child.path, cfg.sample_rate)?;
    let adult = read_at_rate(&job.adult.path, cfg.sample_rate)?;
    let item_seed = seed::derive_str(spec.seed, &job.id);
    let (d, mut audio) = build_dialogue(
        job.pair,
        Turn {
            audio: &child,
            transcript: &job.child.record.transcript,
        },
        Turn {
            audio: &adult,
            transcript: &job.adult.record.transcript,
        },
        spec,
        item_seed,
    )?;
    let level_gain = if audio.peak() > 1.0 {
        audio.normalize_peak(CLIP_CEILING)
    } else {
        1.0
    };
    let audio = quantize_buffer(&audio, cfg.encoding);
    let entry = ManifestEntry {
        id: job.id.clone(),
        audio_path: audio_rel_path(Condition::Clean, job.split, &job.id),
        transcript: d.transcript,
        speaker_id: job.child.record.speaker_id.clone(),
        role: Role::Child,
        split: job.split,
        rir_id: None,
        snr_db: None,
        seed: item_seed,
        condition: Some(Condition::Clean),
        duration_s: d.duration_s,
        order: Some(d.order),
        overlap_s: d.overlap_s,
        gap_s: d.gap_s,
        overlap_redrawn: d.overlap_redrawn,
        dialogue: Some(DialogueInfo {
            child_id: job.pair.child_id.clone(),
            adult_id: job.pair.adult_id.clone(),
            adult_speaker_id: job.adult.record.speaker_id.clone(),
            similarity: job.pair.similarity,
            level_gain,
        }),
        noise: None,
    };
    Ok((entry, audio))
}

/// Write one manifest per (condition, split), records ordered by id.
pub fn write_manifests(root: &Path, conditions: &[Condition], entries: &[ManifestEntry]) -> Result<Vec<PathBuf>> {
    let mut groups: BTreeMap<(Condition, Split), Vec<&ManifestEntry>> = BTreeMap::new();
    for c in conditions {
        for s in Split::ALL {
            groups.insert((*c, s), Vec::new());
        }
    }
    for e in entries {
        let c = e.condition.unwrap_or(Condition::Clean);
        groups.entry((c, e.split)).or_default().push(e);
    }
    let mut written = Vec::new();
    for ((c, s), mut list) in groups {
        list.sort_by(|a, b| a.id.cmp(&b.id));
        let path = root.join(MANIFEST_DIR).join(manifest_name(c, s));
        write_jsonl(&path, list)?;
        written.push(path);
    }
    Ok(written)
}

struct Prepared {
    bank: Option<RirBank>,
    prepared: Option<PreparedBank>,
    noise: Vec<NoiseTrack>,
}

/// Bank and noise needed by `conditions`, built when not supplied.
fn prepare_effects(cfg: &PipelineConfig, conditions: &[Condition], build_missing: bool) -> Result<Prepared> {
    let needs_rir = conditions.iter().any(|c| c.uses_rir()) || cfg.matched_acoustics;
    let needs_noise = conditions.iter().any(|c| c.uses_noise());
    let mut bank = if needs_rir { existing_bank(cfg)? } else { None };
    if needs_rir && bank.is_none() {
        if !build_missing {
            return Err(schoolroom_core::Error::MissingDependency("rir conditions need an RIR bank".into()).into());
        }
        let b = build_bank(cfg)?;
        write_bank(&cfg.output_dir()?.join(BANK_DIR), &b)?;
        bank = Some(read_bank(&cfg.output_dir()?.join(BANK_DIR))?);
    }
    let prepared = match &bank {
        Some(b) => Some(PreparedBank::new(b, cfg.sample_rate, &cfg.convolver)?),
        None => None,
    };
    let mut noise = if needs_noise {
        existing_noise(cfg)?.unwrap_or_default()
    } else {
        Vec::new()
    };
    if needs_noise && noise.is_empty() {
        if !build_missing {
            return Err(schoolroom_core::Error::MissingDependency("noise conditions need noise tracks".into()).into());
        }
        noise = build_noise(cfg, bank.as_ref())?;
    }
    Ok(Prepared { bank, prepared, noise })
}

fn context<'a>(cfg: &PipelineConfig, p: &'a Prepared, out: &'a Path) -> Result<RenderContext<'a>> {
    Ok(RenderContext {
        bank: p.prepared.as_ref(),
        noise: &p.noise,
        matched_acoustics: cfg.matched_acoustics,
        snr_range_db: cfg.snr_range_db,
        seed: cfg.stage_seed("conditions")?,
        encoding: cfg.encoding,
        out_root: out,
    })
}

fn assembly_spec(cfg: &PipelineConfig) -> Result<AssemblySpec> {
    Ok(AssemblySpec {
        seed: cfg.stage_seed("assemble")?,
        ..cfg.assembly
    })
}

/// Partition, pair and build dialogues, rendering `conditions` for each.
fn assemble_and_render(cfg: &PipelineConfig, conditions: &[Condition], effects: &Prepared) -> Result<Value> {
    let out = cfg.output_dir()?;
    let utts = load_utterances(cfg)?;
    let a = split_utterances(cfg, &utts)?;
    let pairing = pair_within_splits(cfg, &utts, &a)?;
    write_splits(&out, &utts, &a)?;
    write_pairs(&out, &pairing)?;
    let jobs = dialogue_jobs(&pairing, &utts)?;
    let spec = assembly_spec(cfg)?;
    let ctx = context(cfg, effects, &out)?;
    log::emit(
        "assemble",
        "start",
        json!({ "items": jobs.len(), "seed": spec.seed, "conditions": conditions }),
    );
    let entries = ctx.render_condition_set(&jobs, conditions, |job| build_clean(cfg, &spec, job))?;
    let manifests = write_manifests(&out, conditions, &entries)?;
    log::emit(
        "assemble",
        "done",
        json!({ "items": jobs.len(), "records": entries.len() }),
    );
    let overlapped = entries
        .iter()
        .filter(|e| e.condition == Some(conditions[0]) && e.overlap_s.is_some())
        .count();
    Ok(json!({
        "dialogues": jobs.len(),
        "overlapped": overlapped,
        "records": entries.len(),
        "manifests": manifests.iter().map(|p| rel(p, &out)).collect::<Vec<_>>(),
    }))
}

pub fn assemble(cfg: &PipelineConfig, dry_run: bool) -> Result<Value> {
    if dry_run {
        let utts = load_utterances(cfg)?;
        cfg.required(Input::Embeddings)?;
        return Ok(json!({ "utterances": utts.len(), "conditions": ["clean"] }));
    }
    let none = Prepared {
        bank: None,
        prepared: None,
        noise: Vec::new(),
    };
    assemble_and_render(cfg, &[Condition::Clean], &none)
}

// ---------------------------------------------------------------------- mix

/// Manifests to mix: the configured one, else every clean manifest of the
/// output tree.
fn input_manifests(cfg: &PipelineConfig) -> Result<Vec<PathBuf>> {
    if let Some(p) = cfg.optional(Input::Manifest)? {
        return Ok(vec![p]);
    }
    let dir = cfg.output_dir()?.join(MANIFEST_DIR);
    let found: Vec<PathBuf> = Split::ALL
        .iter()
        .map(|s| dir.join(manifest_name(Condition::Clean, *s)))
        .filter(|p| p.is_file())
        .collect();
    if found.is_empty() {
        return Err(Error::Config(
            "mix needs paths.manifest or clean manifests under the output root".into(),
        ));
    }
    Ok(found)
}

/// Audio paths resolve against the manifest's directory, then its parent
/// (the output-root layout).
fn resolve_audio(manifest: &Path, audio: &str) -> PathBuf {
    let dir = manifest.parent().unwrap_or(Path::new("."));
    let direct = dir.join(audio);
    if direct.is_file() {
        return direct;
    }
    dir.parent()
        .map(|p| p.join(audio))
        .filter(|p| p.is_file())
        .unwrap_or(direct)
}

pub fn mix(cfg: &PipelineConfig, dry_run: bool) -> Result<Value> {
    let manifests = input_manifests(cfg)?;
    let mut items: Vec<(ManifestEntry, PathBuf)> = Vec::new();
    for m in &manifests {
        for e in read_jsonl::<ManifestEntry>(m)? {
            let audio = resolve_audio(m, &e.audio_path);
            items.push((e, audio));
        }
    }
    items.sort_by(|a, b| a.0.id.cmp(&b.0.id));
    if dry_run {
        for (_, p) in &items {
            if !p.is_file() {
                return Err(Error::MissingInput(p.clone()));
            }
        }
        return Ok(json!({ "items": items.len(), "conditions": cfg.conditions }));
    }
    let effects = prepare_effects(cfg, &cfg.conditions, false)?;
    let out = cfg.output_dir()?;
    let ctx = context(cfg, &effects, &out)?;
    log::emit(
        "mix",
        "start",
        json!({ "items": items.len(), "conditions": cfg.conditions }),
    );
    let entries = ctx.render_condition_set(&items, &cfg.conditions, |(e, p)| {
        let audio = quantize_buffer(&read_at_rate(p, cfg.sample_rate)?, cfg.encoding);
        let mut base = e.clone();
        base.condition = Some(Condition::Clean);
        base.rir_id = None;
        base.snr_db = None;
        base.noise = None;
        Ok((base, audio))
    })?;
    write_manifests(&out, &cfg.conditions, &entries)?;
    log::emit("mix", "done", json!({ "records": entries.len() }));
    Ok(json!({ "items": items.len(), "records": entries.len() }))
}

// ----------------------------------------------------------------- pipeline

pub fn pipeline(cfg: &PipelineConfig, dry_run: bool) -> Result<Value> {
    let conditions = cfg.conditions.clone();
    if dry_run {
        let utts = load_utterances(cfg)?;
        cfg.required(Input::Embeddings)?;
        if conditions.iter().any(|c| c.uses_noise()) && cfg.optional(Input::Noise)?.is_none() {
            babble_pools_exist(cfg)?;
        }
        let spec = bank_spec(cfg)?;
        return Ok(json!({
            "stages": ["rir-bank", "babble", "partition", "pair", "assemble", "mix"],
            "utterances": utts.len(),
            "conditions": conditions,
            "rirs": spec.expected_count(),
            "seed": cfg.master_seed()?,
        }));
    }
    let effects = prepare_effects(cfg, &conditions, true)?;
    let mut summary = assemble_and_render(cfg, &conditions, &effects)?;
    summary["rirs"] = json!(effects.bank.as_ref().map_or(0, RirBank::len));
    summary["noise_tracks"] = json!(effects.noise.len());
    Ok(summary)
}

pub fn validate_embeddings_cmd(path: &Path) -> Result<Value> {
    let file = parse_embeddings(path)?;
    let violations: Vec<String> = file.violations().iter().map(ToString::to_string).collect();
    if let Some(first) = violations.first() {
        return Err(Error::Format {
            path: path.into(),
            line: file.violations()[0].line,
            message: format!("{first} ({} violations)", violations.len()),
        });
    }
    Ok(json!({ "model_name": file.header.model_name, "dim": file.header.dim, "records": file.records.len() }))
}
