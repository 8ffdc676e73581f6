//! Classroom babble: many reverberant talkers plus intermittent events,
//! heard by a listener that moves between waypoints.
//!
//! Synthesis happens in two steps. [`plan_babble`] makes every random choice
//! (positions, gains, clip timelines, event times) from per-source and
//! per-event seeds; [`BabblePlan::render_source`] and
//! [`BabblePlan::render_event`] then turn single entries into audio. The mix is
//! a plain sum, so sources can be rendered in any order or in parallel.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::convolve::{Convolver, PartitionConfig};
use crate::math;
use crate::room::{Absorption, Point3, Room, SimOptions, Simulator};
use crate::seed;
use crate::signal::{self, AudioBuffer};
use crate::{Error, Result};

/// Output peak after normalization.
pub const OUTPUT_PEAK: f64 = 0.9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BabbleSpec {
    pub n_sources: usize,
    pub duration_s: f64,
    pub room: Room,
    pub listener_waypoints: Vec<Point3>,
    pub waypoint_dwell_s: f64,
    pub event_rate_per_min: f64,
    pub source_gain_db_range: (f64, f64),
    pub event_gain_db_range: (f64, f64),
    /// Silence between consecutive clips of one source, seconds.
    pub gap_range_s: (f64, f64),
    /// Minimum distance of sources and events from any surface, meters.
    pub wall_margin_m: f64,
    pub crossfade_ms: f64,
    /// Rate of the pools and of the output.
    pub sample_rate: u32,
    /// RIR rendering; RIRs are resampled to `sample_rate` before use.
    pub sim: SimOptions,
    pub seed: u64,
}

impl Default for BabbleSpec {
    fn default() -> Self {
        Self {
            n_sources: 25,
            duration_s: 60.0,
            room: Room {
                id: "classroom".into(),
                dims: [9.0, 7.0, 3.0],
                absorption: Absorption::uniform(0.3),
                speed_of_sound: crate::room::DEFAULT_SPEED_OF_SOUND,
            },
            listener_waypoints: vec![
                Point3::new(2.0, 2.0, 1.2),
                Point3::new(4.5, 3.5, 1.6),
                Point3::new(7.0, 5.0, 1.2),
            ],
            waypoint_dwell_s: 10.0,
            event_rate_per_min: 2.0,
            source_gain_db_range: (-6.0, 0.0),
            event_gain_db_range: (-6.0, 0.0),
            gap_range_s: (0.5, 3.0),
            wall_margin_m: 0.3,
            crossfade_ms: 50.0,
            sample_rate: 16_000,
            sim: SimOptions::default(),
            seed: 0,
        }
    }
}

fn check_range(name: &str, r: (f64, f64)) -> Result<()> {
    if r.0.is_finite() && r.1.is_finite() && r.0 <= r.1 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "{name} range {}..{} is invalid",
            r.0, r.1
        )))
    }
}

impl BabbleSpec {
    pub fn validate(&self) -> Result<()> {
        self.room.validate()?;
        self.sim.validate()?;
        if !(self.duration_s > 0.0 && self.duration_s.is_finite()) {
            return Err(Error::InvalidArgument("duration_s must be positive".into()));
        }
        if self.sample_rate == 0 {
            return Err(Error::InvalidSampleRate);
        }
        if self.listener_waypoints.is_empty() {
            return Err(Error::InvalidArgument(
                "at least one listener waypoint is required".into(),
            ));
        }
        if let Some(p) = self.listener_waypoints.iter().find(|p| !self.room.contains(**p, 0.0)) {
            return Err(Error::OutsideRoom { x: p.x, y: p.y, z: p.z });
        }
        if !(self.waypoint_dwell_s > 0.0) {
            return Err(Error::InvalidArgument("waypoint_dwell_s must be positive".into()));
        }
        if !(self.event_rate_per_min >= 0.0 && self.event_rate_per_min.is_finite()) {
            return Err(Error::InvalidArgument("event_rate_per_min must be non-negative".into()));
        }
        check_range("source gain", self.source_gain_db_range)?;
        check_range("event gain", self.event_gain_db_range)?;
        check_range("gap", self.gap_range_s)?;
        if self.gap_range_s.0 < 0.0 {
            return Err(Error::InvalidArgument("gaps cannot be negative".into()));
        }
        if !(self.crossfade_ms >= 0.0) {
            return Err(Error::InvalidArgument("crossfade_ms must be non-negative".into()));
        }
        if !(self.wall_margin_m >= 0.0) || self.room.dims.iter().any(|d| *d <= 2.0 * self.wall_margin_m) {
            return Err(Error::InvalidArgument("room too small for the wall margin".into()));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        math::round(self.duration_s * f64::from(self.sample_rate)) as usize
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// A stretch of time during which the listener stays at one waypoint.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ListenerSegment {
    pub start_s: f64,
    pub end_s: f64,
    pub waypoint: usize,
    pub position: Point3,
}

/// Tile `[0, duration_s]` with dwell-length segments cycling through the
/// waypoints; the last segment is cut at `duration_s`. A single waypoint
/// yields one segment.
pub fn plan_listener_path(waypoints: &[Point3], duration_s: f64, dwell_s: f64) -> Result<Vec<ListenerSegment>> {
    if waypoints.is_empty() {
        return Err(Error::InvalidArgument("at least one waypoint is required".into()));
    }
    if !(dwell_s > 0.0) {
        return Err(Error::InvalidArgument("dwell_s must be positive".into()));
    }
    if !(duration_s > 0.0 && duration_s.is_finite()) {
        return Err(Error::InvalidArgument("duration_s must be positive".into()));
    }
    if waypoints.len() == 1 {
        return Ok(vec![ListenerSegment {
            start_s: 0.0,
            end_s: duration_s,
            waypoint: 0,
            position: waypoints[0],
        }]);
    }
    let count = math::ceil(duration_s / dwell_s - 1e-9).max(1.0) as usize;
    Ok((0..count)
        .map(|i| {
            let w = i % waypoints.len();
            ListenerSegment {
                start_s: i as f64 * dwell_s,
                end_s: if i + 1 == count {
                    duration_s
                } else {
                    (i + 1) as f64 * dwell_s
                },
                waypoint: w,
                position: waypoints[w],
            }
        })
        .collect())
}

/// One clip on a source timeline; `len` is already truncated to the track.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClipPlacement {
    pub clip: usize,
    pub start: usize,
    pub len: usize,
}

/// A talker: where it sits, how loud it is, and what it says when.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceTrack {
    pub index: usize,
    pub position: Point3,
    pub gain_db: f64,
    pub clips: Vec<ClipPlacement>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventPlacement {
    pub index: usize,
    pub time_s: f64,
    pub clip: usize,
    pub position: Point3,
    pub gain_db: f64,
}

/// Every random decision of a babble track.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BabblePlan {
    pub spec: BabbleSpec,
    pub listener: Vec<ListenerSegment>,
    pub sources: Vec<SourceTrack>,
    pub events: Vec<EventPlacement>,
}

fn uniform(rng: &mut impl Rng, r: (f64, f64)) -> f64 {
    if r.0 < r.1 {
        rng.random_range(r.0..r.1)
    } else {
        r.0
    }
}

fn interior_point(rng: &mut impl Rng, room: &Room, margin: f64) -> Point3 {
    let [lx, ly, lz] = room.dims;
    Point3::new(
        rng.random_range(margin..lx - margin),
        rng.random_range(margin..ly - margin),
        rng.random_range(margin..lz - margin),
    )
}

fn check_pool(pool: &[AudioBuffer], rate: u32) -> Result<()> {
    for clip in pool {
        if clip.sample_rate() != rate {
            return Err(Error::SampleRateMismatch {
                left: clip.sample_rate(),
                right: rate,
            });
        }
        if clip.is_empty() {
            return Err(Error::EmptyBuffer);
        }
    }
    Ok(())
}

/// Draw positions, gains, clip timelines and Poisson event times.
pub fn plan_babble(spec: &BabbleSpec, source_pool: &[AudioBuffer], event_pool: &[AudioBuffer]) -> Result<BabblePlan> {
    spec.validate()?;
    if spec.n_sources > 0 && source_pool.is_empty() {
        return Err(Error::EmptyPool);
    }
    if spec.event_rate_per_min > 0.0 && event_pool.is_empty() {
        return Err(Error::EmptyPool);
    }
    check_pool(source_pool, spec.sample_rate)?;
    check_pool(event_pool, spec.sample_rate)?;

    let listener = plan_listener_path(&spec.listener_waypoints, spec.duration_s, spec.waypoint_dwell_s)?;
    let total = spec.len();
    let fs = f64::from(spec.sample_rate);
    let source_root = seed::derive_str(spec.seed, "babble-source");

    let sources = (0..spec.n_sources)
        .map(|k| {
            let mut rng = seed::rng(seed::derive(source_root, k as u64));
            let position = interior_point(&mut rng, &spec.room, spec.wall_margin_m);
            let gain_db = uniform(&mut rng, spec.source_gain_db_range);
            let mut clips = Vec::new();
            let mut t = math::round(uniform(&mut rng, spec.gap_range_s) * fs) as usize;
            while t < total {
                let clip = rng.random_range(0..source_pool.len());
                let len = source_pool[clip].len().min(total - t);
                clips.push(ClipPlacement { clip, start: t, len });
                t += len + math::round(uniform(&mut rng, spec.gap_range_s) * fs) as usize;
            }
            SourceTrack {
                index: k,
                position,
                gain_db,
                clips,
            }
        })
        .collect();

    let mut events = Vec::new();
    if spec.event_rate_per_min > 0.0 {
        let mut rng = seed::rng(seed::derive_str(spec.seed, "babble-events"));
        let rate = spec.event_rate_per_min / 60.0;
        let mut t = 0.0;
        loop {
            let u: f64 = rng.random();
            t += -math::ln(1.0 - u) / rate;
            if t >= spec.duration_s {
                break;
            }
            events.push(EventPlacement {
                index: events.len(),
                time_s: t,
                clip: rng.random_range(0..event_pool.len()),
                position: interior_point(&mut rng, &spec.room, spec.wall_margin_m),
                gain_db: uniform(&mut rng, spec.event_gain_db_range),
            });
        }
    }

    Ok(BabblePlan {
        spec: spec.clone(),
        listener,
        sources,
        events,
    })
}

impl BabblePlan {
    /// The same plan with source `k` removed; every other draw is untouched.
    pub fn without_source(&self, k: usize) -> Self {
        let mut plan = self.clone();
        plan.sources.retain(|s| s.index != k);
        plan
    }

    fn segment_bounds(&self) -> Vec<(usize, usize, usize)> {
        let fs = f64::from(self.spec.sample_rate);
        let total = self.spec.len();
        self.listener
            .iter()
            .map(|s| {
                let a = (math::round(s.start_s * fs) as usize).min(total);
                let b = (math::round(s.end_s * fs) as usize).min(total);
                (a, b, s.waypoint)
            })
            .collect()
    }

    /// Impulse response from `position` to a waypoint at the output rate.
    fn rir(&self, sim: &Simulator, position: Point3, waypoint: usize) -> Result<Vec<f64>> {
        let rir = sim.simulate(&self.spec.room, position, self.spec.listener_waypoints[waypoint])?;
        Ok(signal::resample(&rir.taps, self.spec.sample_rate)?.into_samples())
    }

    /// Place `dry` in the room at `position` and record it along the
    /// listener path, crossfading between waypoints with equal power.
    fn spatialize(&self, sim: &Simulator, dry: &[f64], position: Point3) -> Result<Vec<f64>> {
        let total = self.spec.len();
        let mut out = vec![0.0; total];
        if dry.iter().all(|v| *v == 0.0) {
            return Ok(out);
        }
        let bounds = self.segment_bounds();
        let fade = math::round(self.spec.crossfade_ms / 1000.0 * f64::from(self.spec.sample_rate)) as usize;
        let half = fade / 2;
        let last = bounds.len() - 1;
        let cfg = PartitionConfig::default();
        for w in 0..self.spec.listener_waypoints.len() {
            if !bounds.iter().any(|b| b.2 == w) {
                continue;
            }
            let wet = Convolver::new(&self.rir(sim, position, w)?, &cfg).process(dry);
            for (i, &(a, b, wp)) in bounds.iter().enumerate() {
                if wp != w {
                    continue;
                }
                let lo = if i == 0 { a } else { a.saturating_sub(half) };
                let hi = if i == last { b } else { (b + (fade - half)).min(total) };
                for t in lo..hi {
                    let mut g = 1.0;
                    if i > 0 && fade > 0 && t + half < a + fade {
                        let u = (t + half - a) as f64 / fade as f64;
                        g *= math::sin(0.5 * math::PI * u.clamp(0.0, 1.0));
                    }
                    if i < last && fade > 0 && t + half >= b {
                        let u = (t + half - b) as f64 / fade as f64;
                        g *= math::cos(0.5 * math::PI * u.clamp(0.0, 1.0));
                    }
                    out[t] += g * wet[t];
                }
            }
        }
        Ok(out)
    }

    /// The reverberant, gain-scaled contribution of one source, at full
    /// output length and before normalization.
    pub fn render_source(&self, sim: &Simulator, track: &SourceTrack, pool: &[AudioBuffer]) -> Result<Vec<f64>> {
        let mut dry = vec![0.0; self.spec.len()];
        let g = math::db_to_amp(track.gain_db);
        for c in &track.clips {
            let clip = pool.get(c.clip).ok_or(Error::EmptyPool)?.samples();
            for (d, s) in dry[c.start..c.start + c.len].iter_mut().zip(clip) {
                *d = g * s;
            }
        }
        self.spatialize(sim, &dry, track.position)
    }

    pub fn render_event(&self, sim: &Simulator, event: &EventPlacement, pool: &[AudioBuffer]) -> Result<Vec<f64>> {
        let total = self.spec.len();
        let mut dry = vec![0.0; total];
        let start = math::round(event.time_s * f64::from(self.spec.sample_rate)) as usize;
        let g = math::db_to_amp(event.gain_db);
        let clip = pool.get(event.clip).ok_or(Error::EmptyPool)?.samples();
        for (d, s) in dry[start.min(total)..].iter_mut().zip(clip) {
            *d = g * s;
        }
        self.spatialize(sim, &dry, event.position)
    }

    /// Simulator configured for this plan's RIRs.
    pub fn simulator(&self) -> Result<Simulator> {
        Simulator::new(self.spec.sim)
    }
}

/// Where things were and when, serialized next to the noise track.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BabbleMetadata {
    pub seed: u64,
    pub sample_rate: u32,
    pub duration_s: f64,
    pub room: Room,
    pub source_positions: Vec<Point3>,
    pub source_gains_db: Vec<f64>,
    pub event_times_s: Vec<f64>,
    pub listener: Vec<ListenerSegment>,
    /// Gain that brought the summed mix to the output peak (1 for silence).
    pub normalization_gain: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Babble {
    pub audio: AudioBuffer,
    pub metadata: BabbleMetadata,
}

/// Sum rendered contributions and peak-normalize to [`OUTPUT_PEAK`].
pub fn finish_mix(plan: &BabblePlan, parts: impl IntoIterator<Item = Vec<f64>>) -> Result<Babble> {
    let mut mix = vec![0.0; plan.spec.len()];
    for part in parts {
        for (m, p) in mix.iter_mut().zip(&part) {
            *m += p;
        }
    }
    let mut audio = AudioBuffer::new(mix, plan.spec.sample_rate)?;
    let normalization_gain = if audio.peak() > 0.0 {
        audio.normalize_peak(OUTPUT_PEAK)
    } else {
        1.0
    };
    Ok(Babble {
        audio,
        metadata: BabbleMetadata {
            seed: plan.spec.seed,
            sample_rate: plan.spec.sample_rate,
            duration_s: plan.spec.duration_s,
            room: plan.spec.room.clone(),
            source_positions: plan.sources.iter().map(|s| s.position).collect(),
            source_gains_db: plan.sources.iter().map(|s| s.gain_db).collect(),
            event_times_s: plan.events.iter().map(|e| e.time_s).collect(),
            listener: plan.listener.clone(),
            normalization_gain,
        },
    })
}

/// Render a plan sequentially.
pub fn render_babble(plan: &BabblePlan, source_pool: &[AudioBuffer], event_pool: &[AudioBuffer]) -> Result<Babble> {
    let sim = plan.simulator()?;
    let mut parts = Vec::with_capacity(plan.sources.len() + plan.events.len());
    for s in &plan.sources {
        parts.push(plan.render_source(&sim, s, source_pool)?);
    }
    for e in &plan.events {
        parts.push(plan.render_event(&sim, e, event_pool)?);
    }
    finish_mix(plan, parts)
}

pub fn synthesize_babble(spec: &BabbleSpec, source_pool: &[AudioBuffer], event_pool: &[AudioBuffer]) -> Result<Babble> {
    let plan = plan_babble(spec, source_pool, event_pool)?;
    render_babble(&plan, source_pool, event_pool)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    fn tone_pool(rate: u32, seed: u64, n: usize) -> Vec<AudioBuffer> {
        let mut rng = seed::rng(seed);
        (0..n)
            .map(|_| {
                let len = rng.random_range(rate as usize / 4..rate as usize);
                let f = rng.random_range(150.0..600.0);
                let x = (0..len)
                    .map(|i| 0.5 * (2.0 * core::f64::consts::PI * f * i as f64 / f64::from(rate)).sin())
                    .collect();
                AudioBuffer::new(x, rate).unwrap()
            })
            .collect()
    }

    fn small_spec() -> BabbleSpec {
        BabbleSpec {
            n_sources: 4,
            duration_s: 3.0,
            waypoint_dwell_s: 1.0,
            event_rate_per_min: 30.0,
            sample_rate: 8000,
            sim: SimOptions {
                rir_len_s: 0.2,
                sample_rate: 24_000,
                ..SimOptions::default()
            },
            seed: 5,
            ..BabbleSpec::default()
        }
    }

    #[test]
    fn schedule_examples() {
        let w = [
            Point3::new(1.0, 1.0, 1.0),
            Point3::new(2.0, 2.0, 1.0),
            Point3::new(3.0, 3.0, 1.0),
        ];
        let one = plan_listener_path(&w[..1], 60.0, 10.0).unwrap();
        assert_eq!(one.len(), 1);
        assert_eq!((one[0].start_s, one[0].end_s), (0.0, 60.0));
        let six = plan_listener_path(&w, 60.0, 10.0).unwrap();
        assert_eq!(six.iter().map(|s| s.waypoint).collect::<Vec<_>>(), [0, 1, 2, 0, 1, 2]);
        assert_eq!(six[5].end_s, 60.0);
        assert!(plan_listener_path(&w, 60.0, 0.0).is_err());
        assert!(plan_listener_path(&[], 60.0, 1.0).is_err());
    }

    #[test]
    fn empty_mixes() {
        let pool = tone_pool(8000, 1, 3);
        let spec = BabbleSpec {
            n_sources: 0,
            event_rate_per_min: 0.0,
            ..small_spec()
        };
        let out = synthesize_babble(&spec, &[], &[]).unwrap();
        assert_eq!(out.audio.len(), 24_000);
        assert!(out.audio.samples().iter().all(|v| *v == 0.0));

        let spec = BabbleSpec {
            n_sources: 0,
            event_rate_per_min: 120.0,
            ..small_spec()
        };
        let plan = plan_babble(&spec, &[], &pool).unwrap();
        assert!(plan.sources.is_empty() && !plan.events.is_empty());
        let out = render_babble(&plan, &[], &pool).unwrap();
        assert!((out.audio.peak() - OUTPUT_PEAK).abs() < 1e-12);
    }

    #[test]
    fn errors() {
        let pool = tone_pool(8000, 1, 2);
        assert_eq!(plan_babble(&small_spec(), &[], &pool).unwrap_err(), Error::EmptyPool);
        let mut spec = small_spec();
        spec.listener_waypoints.push(Point3::new(100.0, 1.0, 1.0));
        assert!(matches!(
            plan_babble(&spec, &pool, &pool),
            Err(Error::OutsideRoom { .. })
        ));
        let wrong = tone_pool(16_000, 1, 2);
        assert!(matches!(
            plan_babble(&small_spec(), &wrong, &pool),
            Err(Error::SampleRateMismatch { .. })
        ));
    }

    #[test]
    fn metadata_and_determinism() {
        let pool = tone_pool(8000, 2, 5);
        let spec = BabbleSpec {
            n_sources: 25,
            duration_s: 1.0,
            ..small_spec()
        };
        let plan = plan_babble(&spec, &pool, &pool).unwrap();
        assert_eq!(plan.sources.len(), 25);
        let mut pos: Vec<[f64; 3]> = plan.sources.iter().map(|s| s.position.to_array()).collect();
        pos.sort_by(|a, b| a.partial_cmp(b).unwrap());
        pos.dedup();
        assert_eq!(pos.len(), 25);
        for s in &plan.sources {
            assert!(spec.room.contains(s.position, 0.3));
            assert!((-6.0..=0.0).contains(&s.gain_db));
        }
        let a = synthesize_babble(&small_spec(), &pool, &pool).unwrap();
        let b = synthesize_babble(&small_spec(), &pool, &pool).unwrap();
        assert_eq!(a, b);
        assert!(a.audio.peak() <= OUTPUT_PEAK + 1e-6);
        let c = synthesize_babble(
            &BabbleSpec {
                seed: 6,
                ..small_spec()
            },
            &pool,
            &pool,
        )
        .unwrap();
        assert_ne!(a.audio, c.audio);
    }

    #[test]
    fn tracks_tile_the_duration() {
        let pool = tone_pool(8000, 3, 4);
        let plan = plan_babble(&small_spec(), &pool, &pool).unwrap();
        for s in &plan.sources {
            let mut end = 0;
            for c in &s.clips {
                assert!(c.start >= end);
                assert!(c.len <= pool[c.clip].len());
                end = c.start + c.len;
            }
            assert!(end <= plan.spec.len());
            if let Some(c) = s.clips.last() {
                if c.len < pool[c.clip].len() {
                    assert_eq!(end, plan.spec.len());
                }
            }
        }
    }

    #[test]
    fn removing_a_source_removes_exactly_its_render() {
        let pool = tone_pool(8000, 4, 4);
        let plan = plan_babble(&small_spec(), &pool, &pool).unwrap();
        let sim = plan.simulator().unwrap();
        let full = render_babble(&plan, &pool, &pool).unwrap();
        let k = 2;
        let reduced = render_babble(&plan.without_source(k), &pool, &pool).unwrap();
        let part = plan.render_source(&sim, &plan.sources[k], &pool).unwrap();
        let (gf, gr) = (full.metadata.normalization_gain, reduced.metadata.normalization_gain);
        for ((f, r), p) in full.audio.samples().iter().zip(reduced.audio.samples()).zip(&part) {
            assert!((f / gf - r / gr - p).abs() < 1e-6);
        }
    }

    #[test]
    fn crossfade_keeps_power_for_a_stationary_field() {
        // Two waypoints at the same spot: equal-power fades of identical
        // signals sum to sin + cos, which peaks at √2 mid-fade.
        let mut spec = small_spec();
        let p = Point3::new(4.0, 3.0, 1.2);
        spec.listener_waypoints = vec![p, p];
        spec.n_sources = 1;
        spec.event_rate_per_min = 0.0;
        spec.gap_range_s = (0.0, 0.0);
        let pool = vec![AudioBuffer::new(vec![0.5; 48_000], 8000).unwrap()];
        let plan = plan_babble(&spec, &pool, &[]).unwrap();
        let sim = plan.simulator().unwrap();
        let out = plan.render_source(&sim, &plan.sources[0], &pool).unwrap();
        let boundary = 8000;
        let mid = out[boundary];
        let steady = out[boundary - 1000];
        assert!((mid / steady - 2f64.sqrt()).abs() < 0.05, "{mid} vs {steady}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn segments_tile_without_gaps(n in 1usize..6, duration in 0.1f64..500.0, dwell in 0.05f64..50.0) {
            let w: Vec<Point3> = (0..n).map(|i| Point3::new(i as f64 + 1.0, 1.0, 1.0)).collect();
            let segs = plan_listener_path(&w, duration, dwell).unwrap();
            prop_assert_eq!(segs[0].start_s, 0.0);
            prop_assert_eq!(segs.last().unwrap().end_s, duration);
            for pair in segs.windows(2) {
                prop_assert_eq!(pair[0].end_s, pair[1].start_s);
                prop_assert!(pair[0].end_s > pair[0].start_s);
            }
            for (i, s) in segs.iter().enumerate() {
                prop_assert_eq!(s.waypoint, i % n);
                if n > 1 && i + 1 < segs.len() {
                    prop_assert!((s.end_s - s.start_s - dwell).abs() < 1e-9 * duration.max(1.0));
                }
            }
        }
    }

    #[test]
    fn event_counts_follow_poisson_mean() {
        let pool = tone_pool(8000, 5, 2);
        let spec = BabbleSpec {
            n_sources: 0,
            duration_s: 120.0,
            event_rate_per_min: 6.0,
            ..small_spec()
        };
        let runs = 400;
        let total: usize = (0..runs)
            .map(|s| {
                plan_babble(
                    &BabbleSpec {
                        seed: s,
                        ..spec.clone()
                    },
                    &[],
                    &pool,
                )
                .unwrap()
                .events
                .len()
            })
            .sum();
        let lambda = spec.duration_s * spec.event_rate_per_min / 60.0;
        let mean = total as f64 / runs as f64;
        let sigma = (lambda / runs as f64).sqrt();
        assert!((mean - lambda).abs() < 3.0 * sigma, "mean {mean}, expected {lambda}");
    }
}
