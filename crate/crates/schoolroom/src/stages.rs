//! Parallel building blocks of the pipeline.
//!
//! Every parallel map collects in input order and every random draw comes
//! from a per-item seed, so results do not depend on the worker count.

use std::path::Path;

use rayon::prelude::*;
use schoolroom_core::assemble::{draw_item, render_condition, Condition, ItemDraws};
use schoolroom_core::babble::{finish_mix, Babble, BabblePlan};
use schoolroom_core::convolve::{Convolver, PartitionConfig};
use schoolroom_core::pairing::{
    greedy_match_matrix, normalize_embeddings, similarity_row, validate_embeddings, MatchOutcome, SimilarityMatrix,
    Utterance,
};
use schoolroom_core::room::{plan_rir_bank, RirBank, RirBankSpec, Simulator};
use schoolroom_core::{signal, AudioBuffer};

use crate::manifest::{audio_rel_path, ManifestEntry, NoiseInfo};
use crate::wav::{quantize_buffer, write_wav, Encoding, RangePolicy};
use crate::{Error, Result};

/// A pool sized by `workers` (0 means one thread per core).
pub fn thread_pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::stage("workers", e.to_string()))
}

/// Render every RIR of a bank, in parallel, in job order.
pub fn generate_bank(spec: &RirBankSpec) -> Result<RirBank> {
    let plan = plan_rir_bank(spec)?;
    let sim = Simulator::new(plan.options)?;
    let rirs = plan
        .jobs
        .par_iter()
        .map(|job| plan.render(&sim, job))
        .collect::<schoolroom_core::Result<Vec<_>>>()?;
    Ok(RirBank {
        rooms: plan.rooms,
        rirs,
    })
}

/// Cosine matrix of unit-norm embeddings, one parallel task per child.
pub fn similarity_matrix(children: &[Utterance], adults: &[Utterance]) -> Result<SimilarityMatrix> {
    let adult_vecs: Vec<&[f64]> = adults.iter().map(|a| a.embedding.as_slice()).collect();
    let rows: Vec<Vec<f64>> = children
        .par_iter()
        .map(|c| similarity_row(&c.embedding, &adult_vecs))
        .collect();
    if children.is_empty() {
        return Ok(SimilarityMatrix {
            rows: 0,
            cols: adults.len(),
            data: Vec::new(),
        });
    }
    Ok(SimilarityMatrix::from_rows(rows)?)
}

/// Normalize, build the matrix in parallel, then match greedily.
pub fn pair_utterances(children: Vec<Utterance>, adults: Vec<Utterance>) -> Result<MatchOutcome> {
    validate_embeddings(&children, &adults)?;
    let children = normalize_embeddings(children)?;
    let adults = normalize_embeddings(adults)?;
    let matrix = similarity_matrix(&children, &adults)?;
    let cid: Vec<String> = children.iter().map(|u| u.id.clone()).collect();
    let aid: Vec<String> = adults.iter().map(|u| u.id.clone()).collect();
    Ok(greedy_match_matrix(&cid, &aid, &matrix)?)
}

/// Render sources and events of a babble plan in parallel.
pub fn render_babble(plan: &BabblePlan, source_pool: &[AudioBuffer], event_pool: &[AudioBuffer]) -> Result<Babble> {
    let sim = plan.simulator()?;
    let sources = plan
        .sources
        .par_iter()
        .map(|s| plan.render_source(&sim, s, source_pool))
        .collect::<schoolroom_core::Result<Vec<_>>>()?;
    let events = plan
        .events
        .par_iter()
        .map(|e| plan.render_event(&sim, e, event_pool))
        .collect::<schoolroom_core::Result<Vec<_>>>()?;
    Ok(finish_mix(plan, sources.into_iter().chain(events))?)
}

/// A bank resampled to the corpus rate with every kernel transformed once.
pub struct PreparedBank {
    pub ids: Vec<String>,
    pub room_ids: Vec<String>,
    pub convolvers: Vec<Convolver>,
}

impl PreparedBank {
    pub fn new(bank: &RirBank, sample_rate: u32, config: &PartitionConfig) -> Result<Self> {
        let convolvers = bank
            .rirs
            .par_iter()
            .map(|r| {
                let taps = signal::resample(&r.taps, sample_rate)?;
                if taps.is_empty() {
                    return Err(schoolroom_core::Error::EmptyBuffer);
                }
                Ok(Convolver::new(taps.samples(), config))
            })
            .collect::<schoolroom_core::Result<Vec<_>>>()?;
        Ok(Self {
            ids: bank.rirs.iter().map(|r| r.id.clone()).collect(),
            room_ids: bank.rirs.iter().map(|r| r.room_id.clone()).collect(),
            convolvers,
        })
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }
}

/// A noise track and, when known, the room it was rendered in.
#[derive(Debug, Clone)]
pub struct NoiseTrack {
    pub name: String,
    pub audio: AudioBuffer,
    pub room_id: Option<String>,
}

/// Everything shared by the renditions of a corpus.
pub struct RenderContext<'a> {
    pub bank: Option<&'a PreparedBank>,
    pub noise: &'a [NoiseTrack],
    pub matched_acoustics: bool,
    pub snr_range_db: (f64, f64),
    /// Seed of the condition stage; items derive from it by id.
    pub seed: u64,
    pub encoding: Encoding,
    pub out_root: &'a Path,
}

impl RenderContext<'_> {
    /// Per-item draws; in matched mode the noise track follows the RIR's room.
    pub fn draws(&self, id: &str) -> Result<ItemDraws> {
        let bank_len = self.bank.map_or(0, PreparedBank::len);
        let mut d = draw_item(self.seed, id, bank_len, self.noise.len(), self.snr_range_db);
        if self.matched_acoustics {
            if let (Some(bank), Some(r)) = (self.bank, d.rir_index) {
                let room = &bank.room_ids[r];
                d.noise_index = self.noise.iter().position(|t| t.room_id.as_deref() == Some(room));
                if d.noise_index.is_none() && !self.noise.is_empty() {
                    return Err(Error::stage("mix", format!("no noise track rendered in room {room}")));
                }
            }
        }
        Ok(d)
    }

    fn check(&self, conditions: &[Condition]) -> Result<()> {
        for c in conditions {
            if c.uses_rir() && self.bank.is_none_or(PreparedBank::is_empty) {
                return Err(
                    schoolroom_core::Error::MissingDependency(format!("{c} needs a non-empty RIR bank")).into(),
                );
            }
            if c.uses_noise() && self.noise.is_empty() {
                return Err(schoolroom_core::Error::MissingDependency(format!("{c} needs a noise track")).into());
            }
        }
        Ok(())
    }

    /// Render and write every condition of one item. `base` describes the
    /// clean item; `clean` must already be quantized to the output encoding.
    pub fn render_item(
        &self,
        base: &ManifestEntry,
        clean: &AudioBuffer,
        conditions: &[Condition],
    ) -> Result<Vec<ManifestEntry>> {
        let draws = self.draws(&base.id)?;
        let rir = draws
            .rir_index
            .and_then(|i| self.bank.map(|b| (b.ids[i].clone(), &b.convolvers[i])));
        let noise = draws.noise_index.map(|i| &self.noise[i]);
        let mut out = Vec::with_capacity(conditions.len());
        for &condition in conditions {
            let r = render_condition(
                condition,
                clean,
                &draws,
                rir.as_ref().map(|x| x.1),
                noise.map(|t| &t.audio),
            )?;
            let rel = audio_rel_path(condition, base.split, &base.id);
            let audio = quantize_buffer(&r.audio, self.encoding);
            write_wav(&audio, self.out_root.join(&rel), self.encoding, RangePolicy::Strict)?;
            let mut e = base.clone();
            e.audio_path = rel;
            e.condition = Some(condition);
            e.rir_id = condition
                .uses_rir()
                .then(|| rir.as_ref().map(|x| x.0.clone()))
                .flatten();
            e.snr_db = r.snr_db;
            e.noise = r.mix.as_ref().zip(noise).map(|(m, t)| NoiseInfo {
                track: t.name.clone(),
                offset: m.offset,
                noise_gain: m.noise_gain,
                speech_gain: m.speech_gain,
                clipped: m.clipped,
            });
            out.push(e);
        }
        Ok(out)
    }

    /// Render a batch under `conditions`, in parallel. `load` produces the
    /// clean entry and audio of one item inside its worker, so only the items
    /// in flight are held in memory. Output is grouped by item, then by
    /// condition order.
    pub fn render_condition_set<T: Sync>(
        &self,
        items: &[T],
        conditions: &[Condition],
        load: impl Fn(&T) -> Result<(ManifestEntry, AudioBuffer)> + Sync,
    ) -> Result<Vec<ManifestEntry>> {
        self.check(conditions)?;
        let nested = items
            .par_iter()
            .map(|item| {
                let (base, clean) = load(item)?;
                self.render_item(&base, &clean, conditions)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(nested.into_iter().flatten().collect())
    }
}

/// Convolve every item with one RIR drawn uniformly from the bank by
/// `hash(assignment_seed, item_id)`; outputs keep the input's peak level.
pub fn reverberate_batch<T: Sync>(
    items: &[T],
    bank: &PreparedBank,
    assignment_seed: u64,
    encoding: Encoding,
    out_root: &Path,
    load: impl Fn(&T) -> Result<(ManifestEntry, AudioBuffer)> + Sync,
) -> Result<Vec<ManifestEntry>> {
    let ctx = RenderContext {
        bank: Some(bank),
        noise: &[],
        matched_acoustics: false,
        snr_range_db: (0.0, 0.0),
        seed: assignment_seed,
        encoding,
        out_root,
    };
    ctx.render_condition_set(items, &[Condition::Rir], load)
}
