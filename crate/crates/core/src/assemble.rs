//! Dialogue assembly, noise mixing, corpus splits and the condition matrix.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::convolve::{Convolver, PartitionConfig};
use crate::math;
use crate::pairing::{MatchedPair, Role};
use crate::seed;
use crate::signal::{self, AudioBuffer};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AssemblySpec {
    pub overlap_probability: f64,
    pub overlap_range_s: (f64, f64),
    pub gap_range_s: (f64, f64),
    pub child_first_probability: f64,
    pub seed: u64,
}

impl Default for AssemblySpec {
    fn default() -> Self {
        Self {
            overlap_probability: 0.2,
            overlap_range_s: (0.5, 1.0),
            gap_range_s: (0.1, 0.5),
            child_first_probability: 0.5,
            seed: 0,
        }
    }
}

impl AssemblySpec {
    pub fn validate(&self) -> Result<()> {
        for (name, p) in [
            ("overlap_probability", self.overlap_probability),
            ("child_first_probability", self.child_first_probability),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidArgument(format!("{name} must lie in [0, 1], got {p}")));
            }
        }
        let (lo, hi) = self.overlap_range_s;
        if !(lo > 0.0 && hi >= lo && hi.is_finite()) {
            return Err(Error::InvalidArgument(format!("overlap range {lo}..{hi} invalid")));
        }
        let (lo, hi) = self.gap_range_s;
        if !(lo >= 0.0 && hi >= lo && hi.is_finite()) {
            return Err(Error::InvalidArgument(format!("gap range {lo}..{hi} invalid")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Order {
    ChildFirst,
    AdultFirst,
}

/// The turn-taking parameters of one dialogue. Exactly one of `overlap_s`
/// and `gap_s` is set; both are quantized to whole samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dialogue {
    pub pair: MatchedPair,
    pub order: Order,
    pub overlap_s: Option<f64>,
    pub gap_s: Option<f64>,
    /// The drawn overlap did not fit and was redrawn below the shorter turn.
    pub overlap_redrawn: bool,
    pub first_duration_s: f64,
    pub second_duration_s: f64,
    pub duration_s: f64,
    pub transcript: String,
    pub item_seed: u64,
}

impl Dialogue {
    /// `d1 + d2 − overlap` or `d1 + d2 + gap`.
    pub fn expected_duration_s(&self) -> f64 {
        let base = self.first_duration_s + self.second_duration_s;
        match (self.overlap_s, self.gap_s) {
            (Some(o), None) => base - o,
            (None, Some(g)) => base + g,
            _ => f64::NAN,
        }
    }
}

/// One side of a dialogue: audio plus its verbatim transcript.
#[derive(Debug, Clone, Copy)]
pub struct Turn<'a> {
    pub audio: &'a AudioBuffer,
    pub transcript: &'a str,
}

/// Transcript of both turns in speaking order, each behind a role tag.
pub fn merge_transcripts(first: (Role, &str), second: (Role, &str)) -> String {
    format!(
        "[{}] {} [{}] {}",
        first.0.as_str(),
        first.1,
        second.0.as_str(),
        second.1
    )
}

/// Lay two utterances end to end, overlapped or separated by silence.
///
/// Every draw comes from `derive(spec.seed, item_seed)`: order, then whether
/// to overlap, then the overlap or gap length. An overlap longer than the
/// shorter turn is redrawn uniformly below that length and flagged.
pub fn build_dialogue(
    pair: &MatchedPair,
    child: Turn<'_>,
    adult: Turn<'_>,
    spec: &AssemblySpec,
    item_seed: u64,
) -> Result<(Dialogue, AudioBuffer)> {
    spec.validate()?;
    child.audio.ensure_same_rate(adult.audio)?;
    if child.audio.is_empty() || adult.audio.is_empty() {
        return Err(Error::EmptyBuffer);
    }
    let fs = f64::from(child.audio.sample_rate());
    let mut rng = seed::rng(seed::derive(spec.seed, item_seed));

    let child_first = rng.random::<f64>() < spec.child_first_probability;
    let overlapped = rng.random::<f64>() < spec.overlap_probability;
    let (order, first, second) = if child_first {
        (Order::ChildFirst, (Role::Child, child), (Role::Adult, adult))
    } else {
        (Order::AdultFirst, (Role::Adult, adult), (Role::Child, child))
    };
    let (l1, l2) = (first.1.audio.len(), second.1.audio.len());

    let (start, overlap_s, gap_s, redrawn) = if overlapped {
        let drawn = uniform(&mut rng, spec.overlap_range_s);
        let mut n = math::round(drawn * fs) as usize;
        let limit = l1.min(l2);
        let mut redrawn = false;
        if n > limit {
            redrawn = true;
            n = 0;
            while n == 0 || n >= limit {
                n = math::round(rng.random::<f64>() * limit as f64) as usize;
                if limit <= 1 {
                    n = limit;
                    break;
                }
            }
        }
        (l1 - n, Some(n as f64 / fs), None, redrawn)
    } else {
        let n = math::round(uniform(&mut rng, spec.gap_range_s) * fs) as usize;
        (l1 + n, None, Some(n as f64 / fs), false)
    };

    let total = (start + l2).max(l1);
    let mut out = vec![0.0; total];
    for (o, s) in out.iter_mut().zip(first.1.audio.samples()) {
        *o += s;
    }
    for (o, s) in out[start..].iter_mut().zip(second.1.audio.samples()) {
        *o += s;
    }
    let dialogue = Dialogue {
        pair: pair.clone(),
        order,
        overlap_s,
        gap_s,
        overlap_redrawn: redrawn,
        first_duration_s: l1 as f64 / fs,
        second_duration_s: l2 as f64 / fs,
        duration_s: total as f64 / fs,
        transcript: merge_transcripts((first.0, first.1.transcript), (second.0, second.1.transcript)),
        item_seed,
    };
    Ok((dialogue, AudioBuffer::new(out, child.audio.sample_rate())?))
}

fn uniform(rng: &mut impl Rng, r: (f64, f64)) -> f64 {
    if r.0 < r.1 {
        rng.random_range(r.0..r.1)
    } else {
        r.0
    }
}

/// Peak level the mix is pulled back to when speech plus noise would clip.
pub const CLIP_CEILING: f64 = 0.99;

/// A noisy mix and its two components, so that
/// `mixed = speech_gain·clean + noise` sample for sample.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseMix {
    pub mixed: AudioBuffer,
    /// The noise exactly as added (scaled, and rescaled if clipping).
    pub noise: AudioBuffer,
    pub offset: usize,
    /// Gain applied to the raw noise segment to reach the SNR.
    pub noise_gain: f64,
    /// Overall gain applied after mixing (1 unless clipping was avoided).
    pub speech_gain: f64,
    pub clipped: bool,
}

/// Active-speech RMS with the default activity frames.
pub fn speech_level(clean: &AudioBuffer) -> Result<f64> {
    let level = signal::measure_level(clean, signal::ACTIVITY_FRAME_MS, signal::ACTIVITY_THRESHOLD_DB)?;
    if level.active_rms == 0.0 {
        return Err(Error::SilentInput);
    }
    Ok(level.active_rms)
}

/// Add a seeded segment of `noise` under `clean` at `snr_db`, measured as
/// active-speech RMS against the noise segment's RMS. Noise shorter than the
/// speech is tiled.
pub fn mix_noise(clean: &AudioBuffer, noise: &AudioBuffer, snr_db: f64, item_seed: u64) -> Result<NoiseMix> {
    clean.ensure_same_rate(noise)?;
    if !snr_db.is_finite() {
        return Err(Error::InvalidArgument("snr_db must be finite".into()));
    }
    if noise.is_empty() {
        return Err(Error::EmptyBuffer);
    }
    let speech = speech_level(clean)?;
    let n = clean.len();
    let m = noise.len();
    let mut rng = seed::rng(seed::derive_str(item_seed, "noise-offset"));
    let offset = if m >= n {
        rng.random_range(0..=m - n)
    } else {
        rng.random_range(0..m)
    };
    let segment: Vec<f64> = (0..n).map(|i| noise.samples()[(offset + i) % m]).collect();
    let noise_rms = signal::rms(&segment);
    if noise_rms == 0.0 {
        return Err(Error::InvalidArgument("noise segment is silent".into()));
    }
    let noise_gain = speech / (noise_rms * math::db_to_amp(snr_db));
    let mut scaled: Vec<f64> = segment.iter().map(|v| v * noise_gain).collect();
    let mut mixed: Vec<f64> = clean.samples().iter().zip(&scaled).map(|(s, v)| s + v).collect();
    let peak = signal::peak(&mixed);
    let (speech_gain, clipped) = if peak > 1.0 {
        let g = CLIP_CEILING / peak;
        mixed.iter_mut().for_each(|v| *v *= g);
        scaled.iter_mut().for_each(|v| *v *= g);
        (g, true)
    } else {
        (1.0, false)
    };
    Ok(NoiseMix {
        mixed: AudioBuffer::new(mixed, clean.sample_rate())?,
        noise: AudioBuffer::new(scaled, clean.sample_rate())?,
        offset,
        noise_gain,
        speech_gain,
        clipped,
    })
}

/// Convolve with an impulse response (resampled to the signal's rate when
/// needed), keep the input length, and match the input's peak level.
pub fn reverberate(clean: &AudioBuffer, rir: &AudioBuffer) -> Result<AudioBuffer> {
    if rir.is_empty() {
        return Err(Error::EmptyBuffer);
    }
    let resampled;
    let kernel = if rir.sample_rate() == clean.sample_rate() {
        rir
    } else {
        resampled = signal::resample(rir, clean.sample_rate())?;
        &resampled
    };
    reverberate_prepared(clean, &Convolver::new(kernel.samples(), &PartitionConfig::default()))
}

/// [`reverberate`] with a kernel already at the signal's rate and prepared
/// for repeated use.
pub fn reverberate_prepared(clean: &AudioBuffer, rir: &Convolver) -> Result<AudioBuffer> {
    if clean.is_empty() || rir.kernel_len() == 0 {
        return Err(Error::EmptyBuffer);
    }
    let mut wet = rir.process(clean.samples());
    wet.truncate(clean.len());
    let mut out = AudioBuffer::new(wet, clean.sample_rate())?;
    if out.peak() > 0.0 {
        out.normalize_peak(clean.peak());
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Condition {
    #[serde(rename = "clean")]
    Clean,
    #[serde(rename = "rir")]
    Rir,
    #[serde(rename = "noise")]
    Noise,
    #[serde(rename = "rir+noise")]
    RirNoise,
}

impl Condition {
    pub const ALL: [Condition; 4] = [Condition::Clean, Condition::Rir, Condition::Noise, Condition::RirNoise];

    pub fn as_str(self) -> &'static str {
        match self {
            Condition::Clean => "clean",
            Condition::Rir => "rir",
            Condition::Noise => "noise",
            Condition::RirNoise => "rir+noise",
        }
    }

    pub fn uses_rir(self) -> bool {
        matches!(self, Condition::Rir | Condition::RirNoise)
    }

    pub fn uses_noise(self) -> bool {
        matches!(self, Condition::Noise | Condition::RirNoise)
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Condition {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "clean" => Ok(Condition::Clean),
            "rir" => Ok(Condition::Rir),
            "noise" => Ok(Condition::Noise),
            "rir+noise" | "rir_noise" => Ok(Condition::RirNoise),
            other => Err(Error::InvalidArgument(format!("unknown condition {other:?}"))),
        }
    }
}

/// Per-item random choices shared by every condition of that item.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ItemDraws {
    pub seed: u64,
    pub rir_index: Option<usize>,
    pub noise_index: Option<usize>,
    pub snr_db: f64,
}

/// Draw an item's RIR, noise track and SNR from `derive(seed, item_id)`.
pub fn draw_item(
    seed: u64,
    item_id: &str,
    bank_len: usize,
    noise_tracks: usize,
    snr_range_db: (f64, f64),
) -> ItemDraws {
    let item_seed = seed::derive_str(seed, item_id);
    let mut rng = seed::rng(item_seed);
    let rir_index = (bank_len > 0).then(|| rng.random_range(0..bank_len));
    let noise_index = (noise_tracks > 0).then(|| rng.random_range(0..noise_tracks));
    let snr_db = uniform(&mut rng, snr_range_db);
    ItemDraws {
        seed: item_seed,
        rir_index,
        noise_index,
        snr_db,
    }
}

/// Default per-item SNR range for noise conditions, dB.
pub const DEFAULT_SNR_RANGE_DB: (f64, f64) = (0.0, 20.0);

/// One rendering of one item.
#[derive(Debug, Clone, PartialEq)]
pub struct Rendition {
    pub condition: Condition,
    pub audio: AudioBuffer,
    pub snr_db: Option<f64>,
    pub mix: Option<NoiseMix>,
}

/// Render `clean` under `condition`. Reverberation comes first, then the
/// (already reverberant) noise track is added on top. The RIR must already be
/// at the signal's rate.
pub fn render_condition(
    condition: Condition,
    clean: &AudioBuffer,
    draws: &ItemDraws,
    rir: Option<&Convolver>,
    noise: Option<&AudioBuffer>,
) -> Result<Rendition> {
    let speech = if condition.uses_rir() {
        let rir = rir.ok_or_else(|| Error::MissingDependency(format!("{condition} needs an RIR bank")))?;
        reverberate_prepared(clean, rir)?
    } else {
        clean.clone()
    };
    if condition.uses_noise() {
        let noise = noise.ok_or_else(|| Error::MissingDependency(format!("{condition} needs a noise track")))?;
        let mix = mix_noise(&speech, noise, draws.snr_db, draws.seed)?;
        Ok(Rendition {
            condition,
            audio: mix.mixed.clone(),
            snr_db: Some(draws.snr_db),
            mix: Some(mix),
        })
    } else {
        Ok(Rendition {
            condition,
            audio: speech,
            snr_db: None,
            mix: None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Dev,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Dev, Split::Test];

    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Dev => "dev",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "dev" | "valid" | "validation" => Ok(Split::Dev),
            "test" => Ok(Split::Test),
            other => Err(Error::InvalidArgument(format!("unknown split {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitRatios {
    pub train: f64,
    pub dev: f64,
    pub test: f64,
}

impl Default for SplitRatios {
    fn default() -> Self {
        Self {
            train: 0.8,
            dev: 0.1,
            test: 0.1,
        }
    }
}

impl SplitRatios {
    pub fn validate(&self) -> Result<()> {
        let r = [self.train, self.dev, self.test];
        if r.iter().any(|v| !(*v >= 0.0 && v.is_finite())) || (r.iter().sum::<f64>() - 1.0).abs() > 1e-6 {
            return Err(Error::InvalidArgument(format!(
                "split ratios {r:?} must be non-negative and sum to 1"
            )));
        }
        Ok(())
    }

    pub fn get(&self, split: Split) -> f64 {
        match split {
            Split::Train => self.train,
            Split::Dev => self.dev,
            Split::Test => self.test,
        }
    }
}

/// One row of the table handed to [`partition`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionItem {
    pub id: String,
    pub speaker_id: String,
    pub source_corpus: String,
    pub duration_s: f64,
    /// Coarser unit that must stay together (a recording channel, say).
    #[serde(default)]
    pub group: Option<String>,
    /// Split dictated by the source corpus; honored verbatim.
    #[serde(default)]
    pub fixed_split: Option<Split>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SplitAssignment {
    pub by_id: BTreeMap<String, Split>,
}

impl SplitAssignment {
    pub fn get(&self, id: &str) -> Option<Split> {
        self.by_id.get(id).copied()
    }

    /// Share of total duration per split.
    pub fn realized_ratios(&self, items: &[PartitionItem]) -> SplitRatios {
        let mut d = [0.0; 3];
        for it in items {
            if let Some(s) = self.get(&it.id) {
                d[s as usize] += it.duration_s;
            }
        }
        let total: f64 = d.iter().sum();
        let total = if total > 0.0 { total } else { 1.0 };
        SplitRatios {
            train: d[0] / total,
            dev: d[1] / total,
            test: d[2] / total,
        }
    }

    /// Speakers found in more than one split.
    pub fn leaking_speakers(&self, items: &[PartitionItem]) -> Vec<String> {
        let mut seen: BTreeMap<&str, Split> = BTreeMap::new();
        let mut leaks = Vec::new();
        for it in items {
            if let Some(s) = self.get(&it.id) {
                match seen.get(it.speaker_id.as_str()) {
                    Some(prev) if *prev != s => leaks.push(it.speaker_id.clone()),
                    Some(_) => {}
                    None => {
                        seen.insert(&it.speaker_id, s);
                    }
                }
            }
        }
        leaks.sort();
        leaks.dedup();
        leaks
    }
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn find(&mut self, mut x: usize) -> usize {
        while self.0[x] != x {
            self.0[x] = self.0[self.0[x]];
            x = self.0[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.0[hi] = lo;
        }
    }
}

/// Speaker-disjoint split by duration.
///
/// Items sharing a speaker or a group form one unit. Units carrying a fixed
/// split go there; two different fixed splits in one unit are a conflict.
/// The remaining units are visited in seeded random order and each goes to
/// the split furthest below its duration target.
pub fn partition(items: &[PartitionItem], ratios: &SplitRatios, seed: u64) -> Result<SplitAssignment> {
    ratios.validate()?;
    let mut ids: Vec<&str> = items.iter().map(|i| i.id.as_str()).collect();
    ids.sort_unstable();
    if let Some(w) = ids.windows(2).find(|w| w[0] == w[1]) {
        return Err(Error::DuplicateId(w[0].into()));
    }
    if let Some(it) = items
        .iter()
        .find(|i| !(i.duration_s >= 0.0 && i.duration_s.is_finite()))
    {
        return Err(Error::InvalidArgument(format!("item {} has invalid duration", it.id)));
    }

    // Work in id order so the input order never matters.
    let mut order: Vec<usize> = (0..items.len()).collect();
    order.sort_by(|&a, &b| items[a].id.cmp(&items[b].id));
    let mut uf = UnionFind((0..items.len()).collect());
    let mut first_of: BTreeMap<(u8, &str), usize> = BTreeMap::new();
    for &i in &order {
        let it = &items[i];
        let mut keys = vec![(0u8, it.speaker_id.as_str())];
        if let Some(g) = &it.group {
            keys.push((1, g.as_str()));
        }
        for k in keys {
            match first_of.get(&k) {
                Some(&j) => uf.union(i, j),
                None => {
                    first_of.insert(k, i);
                }
            }
        }
    }

    struct Unit {
        members: Vec<usize>,
        duration: f64,
        fixed: Option<Split>,
    }
    let mut units: BTreeMap<usize, Unit> = BTreeMap::new();
    for &i in &order {
        let root = uf.find(i);
        let unit = units.entry(root).or_insert(Unit {
            members: Vec::new(),
            duration: 0.0,
            fixed: None,
        });
        unit.members.push(i);
        unit.duration += items[i].duration_s;
        if let Some(f) = items[i].fixed_split {
            match unit.fixed {
                Some(prev) if prev != f => {
                    return Err(Error::SplitConflict {
                        speaker: items[i].speaker_id.clone(),
                    })
                }
                _ => unit.fixed = Some(f),
            }
        }
    }

    let total: f64 = items.iter().map(|i| i.duration_s).sum();
    let mut filled = [0.0f64; 3];
    let mut by_id = BTreeMap::new();
    let mut free = Vec::new();
    // Members arrive in id order, so members[0] names the unit stably.
    let mut units: Vec<Unit> = units.into_values().collect();
    units.sort_by(|a, b| items[a.members[0]].id.cmp(&items[b.members[0]].id));
    for unit in units {
        match unit.fixed {
            Some(s) => {
                filled[s as usize] += unit.duration;
                for &m in &unit.members {
                    by_id.insert(items[m].id.clone(), s);
                }
            }
            None => free.push(unit),
        }
    }
    let mut rng = seed::rng(seed::derive_str(seed, "partition"));
    free.shuffle(&mut rng);
    for unit in free {
        let pick = Split::ALL
            .into_iter()
            .filter(|s| ratios.get(*s) > 0.0)
            .max_by(|a, b| {
                let da = ratios.get(*a) * total - filled[*a as usize];
                let db = ratios.get(*b) * total - filled[*b as usize];
                da.total_cmp(&db).then((*b as usize).cmp(&(*a as usize)))
            })
            .unwrap_or(Split::Train);
        filled[pick as usize] += unit.duration;
        for &m in &unit.members {
            by_id.insert(items[m].id.clone(), pick);
        }
    }
    Ok(SplitAssignment { by_id })
}

/// Convenience: seconds → samples at `rate`.
pub fn seconds_to_samples(seconds: f64, rate: u32) -> usize {
    math::round(seconds * f64::from(rate)) as usize
}

impl fmt::Display for Order {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Order::ChildFirst => "child_first",
            Order::AdultFirst => "adult_first",
        })
    }
}

/// Text form of a role-tagged transcript split back into its turns.
pub fn split_transcript(merged: &str) -> Vec<(String, String)> {
    let mut out: Vec<(String, String)> = Vec::new();
    let mut rest = merged;
    while let Some(open) = rest.find('[') {
        let Some(close) = rest[open..].find(']') else { break };
        let tag = rest[open + 1..open + close].to_string();
        rest = &rest[open + close + 1..];
        let next = ["[child] ", "[adult] "]
            .iter()
            .filter_map(|t| rest.find(&format!(" {t}")))
            .min()
            .unwrap_or(rest.len());
        out.push((tag, rest[..next].trim_start_matches(' ').to_string()));
        rest = &rest[next..];
    }
    out
}
