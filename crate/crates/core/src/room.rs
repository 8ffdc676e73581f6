//! Shoebox rooms and the image-source method.
//!
//! Along each axis of length `L`, mirroring the source across the two walls
//! produces images at `(1 − 2q)·s + 2m·L` for integer `m` and `q ∈ {0, 1}`.
//! Such an image has bounced `|m − q|` times off the wall at 0 and `|m|` times
//! off the wall at `L`; with `β = √(1 − α)` per surface it arrives at the
//! receiver with amplitude `Π β^n / (4π·d)` after `d / c` seconds.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::ess::{Origin, Rir};
use crate::math;
use crate::seed;
use crate::signal::AudioBuffer;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 3]", into = "[f64; 3]")]
pub struct Point3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Point3 {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    pub fn distance(self, other: Point3) -> f64 {
        let (dx, dy, dz) = (self.x - other.x, self.y - other.y, self.z - other.z);
        math::sqrt(dx * dx + dy * dy + dz * dz)
    }
}

impl From<[f64; 3]> for Point3 {
    fn from(a: [f64; 3]) -> Self {
        Self::new(a[0], a[1], a[2])
    }
}

impl From<Point3> for [f64; 3] {
    fn from(p: Point3) -> Self {
        p.to_array()
    }
}

/// Energy absorption coefficient of each of the six surfaces.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Absorption {
    pub floor: f64,
    pub ceiling: f64,
    /// Wall at x = 0.
    pub wall_x0: f64,
    /// Wall at x = Lx.
    pub wall_x1: f64,
    pub wall_y0: f64,
    pub wall_y1: f64,
}

impl Absorption {
    pub const fn uniform(alpha: f64) -> Self {
        Self {
            floor: alpha,
            ceiling: alpha,
            wall_x0: alpha,
            wall_x1: alpha,
            wall_y0: alpha,
            wall_y1: alpha,
        }
    }

    /// Per axis, the (low wall, high wall) coefficients.
    fn pairs(&self) -> [(f64, f64); 3] {
        [
            (self.wall_x0, self.wall_x1),
            (self.wall_y0, self.wall_y1),
            (self.floor, self.ceiling),
        ]
    }

    fn all(&self) -> [f64; 6] {
        [
            self.floor,
            self.ceiling,
            self.wall_x0,
            self.wall_x1,
            self.wall_y0,
            self.wall_y1,
        ]
    }

    pub fn map(self, mut f: impl FnMut(f64) -> f64) -> Self {
        Self {
            floor: f(self.floor),
            ceiling: f(self.ceiling),
            wall_x0: f(self.wall_x0),
            wall_x1: f(self.wall_x1),
            wall_y0: f(self.wall_y0),
            wall_y1: f(self.wall_y1),
        }
    }
}

pub const DEFAULT_SPEED_OF_SOUND: f64 = 343.0;

fn default_speed() -> f64 {
    DEFAULT_SPEED_OF_SOUND
}

/// An empty rectangular room with one corner at the origin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Room {
    pub id: String,
    /// (Lx, Ly, Lz) in meters; z is height.
    pub dims: [f64; 3],
    pub absorption: Absorption,
    #[serde(default = "default_speed")]
    pub speed_of_sound: f64,
}

impl Room {
    pub fn new(id: impl Into<String>, dims: [f64; 3], absorption: Absorption) -> Result<Self> {
        let room = Self {
            id: id.into(),
            dims,
            absorption,
            speed_of_sound: DEFAULT_SPEED_OF_SOUND,
        };
        room.validate()?;
        Ok(room)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.dims.iter().all(|d| d.is_finite() && *d > 0.0) {
            return Err(Error::InvalidRoom(format!(
                "dimensions must be positive, got {:?}",
                self.dims
            )));
        }
        if !self.absorption.all().iter().all(|a| (0.0..=1.0).contains(a)) {
            return Err(Error::InvalidRoom("absorption coefficients must lie in [0, 1]".into()));
        }
        if !(self.speed_of_sound.is_finite() && self.speed_of_sound > 0.0) {
            return Err(Error::InvalidRoom("speed of sound must be positive".into()));
        }
        Ok(())
    }

    pub fn volume(&self) -> f64 {
        self.dims.iter().product()
    }

    /// Σ Sᵢ·αᵢ in square meters (metric sabins).
    pub fn absorption_area(&self) -> f64 {
        let [lx, ly, lz] = self.dims;
        let a = &self.absorption;
        lx * ly * (a.floor + a.ceiling) + ly * lz * (a.wall_x0 + a.wall_x1) + lx * lz * (a.wall_y0 + a.wall_y1)
    }

    /// True when `p` lies strictly inside, at least `margin` from every surface.
    pub fn contains(&self, p: Point3, margin: f64) -> bool {
        p.to_array()
            .iter()
            .zip(&self.dims)
            .all(|(c, l)| *c > margin && *c < l - margin)
    }

    pub fn center(&self) -> Point3 {
        Point3::new(self.dims[0] / 2.0, self.dims[1] / 2.0, self.dims[2] / 2.0)
    }

    fn check_inside(&self, p: Point3) -> Result<()> {
        if self.contains(p, 0.0) {
            Ok(())
        } else {
            Err(Error::OutsideRoom { x: p.x, y: p.y, z: p.z })
        }
    }
}

/// Sabine reverberation time, `0.161·V / Σ Sᵢαᵢ` seconds.
pub fn sabine_t60(room: &Room) -> Result<f64> {
    room.validate()?;
    let area = room.absorption_area();
    if area <= 0.0 {
        return Err(Error::NoAbsorption);
    }
    Ok(0.161 * room.volume() / area)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimOptions {
    /// Highest total reflection count rendered.
    pub max_order: u32,
    /// Images quieter than this, relative to the direct path, are dropped.
    pub min_gain_db: f64,
    pub rir_len_s: f64,
    pub sample_rate: u32,
}

impl Default for SimOptions {
    fn default() -> Self {
        Self {
            max_order: 30,
            min_gain_db: -80.0,
            rir_len_s: 1.0,
            sample_rate: 48_000,
        }
    }
}

impl SimOptions {
    pub fn validate(&self) -> Result<()> {
        if self.sample_rate == 0 {
            return Err(Error::InvalidSampleRate);
        }
        if !(self.rir_len_s > 0.0 && self.rir_len_s.is_finite()) {
            return Err(Error::InvalidArgument("rir_len_s must be positive".into()));
        }
        if self.min_gain_db.is_nan() {
            return Err(Error::InvalidArgument("min_gain_db is NaN".into()));
        }
        Ok(())
    }

    pub fn rir_len(&self) -> usize {
        math::round(self.rir_len_s * f64::from(self.sample_rate)).max(1.0) as usize
    }
}

/// One image-source contribution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Arrival {
    pub delay_s: f64,
    pub amplitude: f64,
    pub order: u32,
}

const FD_TAPS: usize = 32;
const FD_HALF: f64 = (FD_TAPS / 2) as f64;
const FD_STEPS: usize = 1024;
const FD_BETA: f64 = 9.0;
/// Cutoff as a fraction of the sample rate. Keeps the response inside the
/// band an audible-range sweep can measure.
const FD_CUTOFF: f64 = 0.33;

/// Table of unit-DC-gain fractional-delay kernels, Kaiser-windowed sinc.
#[derive(Debug, Clone)]
pub struct FractionalDelay {
    /// Row `i` delays by `i / FD_STEPS` of a sample.
    rows: Vec<[f64; FD_TAPS]>,
}

impl Default for FractionalDelay {
    fn default() -> Self {
        Self::new()
    }
}

impl FractionalDelay {
    pub fn new() -> Self {
        let i0_beta = math::bessel_i0(FD_BETA);
        let rows = (0..=FD_STEPS)
            .map(|i| {
                let frac = i as f64 / FD_STEPS as f64;
                let mut row = [0.0; FD_TAPS];
                for (k, v) in row.iter_mut().enumerate() {
                    let x = k as f64 - (FD_HALF - 1.0) - frac;
                    *v =
                        2.0 * FD_CUTOFF * math::sinc(2.0 * FD_CUTOFF * x) * math::kaiser(x / FD_HALF, FD_BETA, i0_beta);
                }
                let sum: f64 = row.iter().sum();
                row.iter_mut().for_each(|v| *v /= sum);
                row
            })
            .collect();
        Self { rows }
    }

    /// Add `amplitude` delayed by `delay` samples into `out`.
    pub fn add(&self, out: &mut [f64], delay: f64, amplitude: f64) {
        let base = math::floor(delay);
        let pos = (delay - base) * FD_STEPS as f64;
        let i = (pos as usize).min(FD_STEPS - 1);
        let w = pos - i as f64;
        let (a, b) = (&self.rows[i], &self.rows[i + 1]);
        let first = base as i64 - (FD_TAPS as i64 / 2 - 1);
        for k in 0..FD_TAPS {
            let idx = first + k as i64;
            if idx >= 0 && (idx as usize) < out.len() {
                out[idx as usize] += amplitude * (a[k] + w * (b[k] - a[k]));
            }
        }
    }
}

/// Per-axis image list: (signed offset image − receiver, gain, order).
fn axis_images(len: f64, s: f64, r: f64, alphas: (f64, f64), max_order: u32, reach: f64) -> Vec<(f64, f64, u32)> {
    let b0 = math::sqrt(1.0 - alphas.0);
    let b1 = math::sqrt(1.0 - alphas.1);
    let m_max = (reach / (2.0 * len)) as i64 + 2;
    let mut out = Vec::new();
    for m in -m_max..=m_max {
        for q in 0..2i64 {
            let n0 = (m - q).unsigned_abs() as u32;
            let n1 = m.unsigned_abs() as u32;
            let order = n0 + n1;
            if order > max_order {
                continue;
            }
            let offset = (1 - 2 * q) as f64 * s + 2.0 * m as f64 * len - r;
            if offset.abs() > reach {
                continue;
            }
            let gain = math::powi(b0, n0) * math::powi(b1, n1);
            if gain == 0.0 {
                continue;
            }
            out.push((offset, gain, order));
        }
    }
    out
}

/// Renders image-source RIRs; holds the fractional-delay table.
#[derive(Debug, Clone)]
pub struct Simulator {
    options: SimOptions,
    delay: FractionalDelay,
}

impl Simulator {
    pub fn new(options: SimOptions) -> Result<Self> {
        options.validate()?;
        Ok(Self {
            options,
            delay: FractionalDelay::new(),
        })
    }

    pub fn options(&self) -> &SimOptions {
        &self.options
    }

    /// Every image that reaches the receiver inside the RIR window, in
    /// enumeration order. The direct path comes first.
    pub fn arrivals(&self, room: &Room, source: Point3, receiver: Point3) -> Result<Vec<Arrival>> {
        room.validate()?;
        room.check_inside(source)?;
        room.check_inside(receiver)?;
        let direct = source.distance(receiver);
        if direct < 1e-9 {
            return Err(Error::CoincidentPositions);
        }
        let opts = &self.options;
        let c = room.speed_of_sound;
        let reach = c * opts.rir_len_s + FD_HALF * c / f64::from(opts.sample_rate);
        let floor = math::db_to_amp(opts.min_gain_db) / (4.0 * math::PI * direct);

        let (s, r) = (source.to_array(), receiver.to_array());
        let pairs = room.absorption.pairs();
        let axes: Vec<_> = (0..3)
            .map(|i| axis_images(room.dims[i], s[i], r[i], pairs[i], opts.max_order, reach))
            .collect();

        let mut out = vec![Arrival {
            delay_s: direct / c,
            amplitude: 1.0 / (4.0 * math::PI * direct),
            order: 0,
        }];
        for &(dx, gx, ox) in &axes[0] {
            for &(dy, gy, oy) in &axes[1] {
                if ox + oy > opts.max_order || dx * dx + dy * dy > reach * reach {
                    continue;
                }
                for &(dz, gz, oz) in &axes[2] {
                    let order = ox + oy + oz;
                    if order == 0 || order > opts.max_order {
                        continue;
                    }
                    let d = math::sqrt(dx * dx + dy * dy + dz * dz);
                    if d > reach {
                        continue;
                    }
                    let amplitude = gx * gy * gz / (4.0 * math::PI * d);
                    if amplitude < floor {
                        continue;
                    }
                    out.push(Arrival {
                        delay_s: d / c,
                        amplitude,
                        order,
                    });
                }
            }
        }
        Ok(out)
    }

    /// Raw taps: arrivals placed with band-limited fractional delays, at
    /// physical scale (direct path sums to `1/(4π·d)`).
    pub fn render(&self, room: &Room, source: Point3, receiver: Point3) -> Result<Vec<f64>> {
        let arrivals = self.arrivals(room, source, receiver)?;
        let fs = f64::from(self.options.sample_rate);
        let mut taps = vec![0.0; self.options.rir_len()];
        for a in arrivals {
            self.delay.add(&mut taps, a.delay_s * fs, a.amplitude);
        }
        Ok(taps)
    }

    pub fn simulate(&self, room: &Room, source: Point3, receiver: Point3) -> Result<Rir> {
        let taps = self.render(room, source, receiver)?;
        Ok(Rir {
            id: room.id.clone(),
            taps: AudioBuffer::new(taps, self.options.sample_rate)?,
            room_id: room.id.clone(),
            source,
            receiver,
            origin: Origin::Simulated,
        })
    }
}

/// One-shot image-source simulation. The returned RIR carries the room id
/// as its own id; bank generation assigns pair-specific ids.
pub fn simulate_rir(room: &Room, source: Point3, receiver: Point3, options: &SimOptions) -> Result<Rir> {
    Simulator::new(*options)?.simulate(room, source, receiver)
}

/// Schroeder backward-integrated energy decay, dB relative to total energy.
pub fn schroeder_curve(taps: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    let mut edc: Vec<f64> = taps
        .iter()
        .rev()
        .map(|v| {
            acc += v * v;
            acc
        })
        .collect();
    edc.reverse();
    let total = edc.first().copied().unwrap_or(0.0);
    edc.iter()
        .map(|e| {
            if total > 0.0 {
                10.0 * math::log10(e / total)
            } else {
                f64::NEG_INFINITY
            }
        })
        .collect()
}

/// Reverberation time from a −5 to −35 dB linear fit of the Schroeder curve,
/// extrapolated to 60 dB.
pub fn measure_t60(taps: &[f64], sample_rate: u32) -> Result<f64> {
    if sample_rate == 0 {
        return Err(Error::InvalidSampleRate);
    }
    let edc = schroeder_curve(taps);
    if edc.is_empty() || !edc[0].is_finite() {
        return Err(Error::SilentInput);
    }
    let start = edc.iter().position(|v| *v <= -5.0);
    let end = edc.iter().position(|v| *v <= -35.0);
    let (start, end) = match (start, end) {
        (Some(s), Some(e)) if e > s + 1 => (s, e),
        _ => {
            let reached = edc.iter().copied().filter(|v| v.is_finite()).fold(0.0, f64::min);
            return Err(Error::DecayTooShort(reached));
        }
    };
    let fs = f64::from(sample_rate);
    let n = (end - start) as f64;
    let (mut sx, mut sy) = (0.0, 0.0);
    for (i, v) in edc[start..end].iter().enumerate() {
        sx += (start + i) as f64 / fs;
        sy += v;
    }
    let (mx, my) = (sx / n, sy / n);
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (i, v) in edc[start..end].iter().enumerate() {
        let dx = (start + i) as f64 / fs - mx;
        sxy += dx * (v - my);
        sxx += dx * dx;
    }
    let slope = sxy / sxx;
    if !(slope < 0.0) {
        return Err(Error::DecayTooShort(edc[end]));
    }
    Ok(-60.0 / slope)
}

/// Sampling ranges and layout for a bank of simulated classrooms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RirBankSpec {
    pub n_rooms: usize,
    pub positions_per_room: usize,
    pub dims_min: [f64; 3],
    pub dims_max: [f64; 3],
    pub absorption_range: (f64, f64),
    pub rir_len_s: f64,
    pub sample_rate: u32,
    pub max_order: u32,
    pub seed: u64,
}

impl Default for RirBankSpec {
    fn default() -> Self {
        Self {
            n_rooms: 8,
            positions_per_room: 5,
            dims_min: [6.0, 6.0, 2.7],
            dims_max: [12.0, 12.0, 4.0],
            absorption_range: (0.1, 0.6),
            rir_len_s: 1.0,
            sample_rate: 48_000,
            max_order: 30,
            seed: 0,
        }
    }
}

/// Inset of the corner positions from the walls, meters.
pub const CORNER_INSET: f64 = 0.5;
/// Height of the corner positions, meters.
pub const POSITION_HEIGHT: f64 = 1.2;

impl RirBankSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_rooms == 0 {
            return Err(Error::InvalidArgument("n_rooms must be at least 1".into()));
        }
        if self.positions_per_room < 2 {
            return Err(Error::InvalidArgument("positions_per_room must be at least 2".into()));
        }
        for i in 0..3 {
            let (lo, hi) = (self.dims_min[i], self.dims_max[i]);
            if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                return Err(Error::InvalidArgument(format!(
                    "dimension range {i} is degenerate: {lo}..{hi}"
                )));
            }
        }
        if self.dims_min[0] <= 2.0 * CORNER_INSET || self.dims_min[1] <= 2.0 * CORNER_INSET {
            return Err(Error::InvalidArgument(
                "rooms too small for inset corner positions".into(),
            ));
        }
        if self.dims_min[2] <= POSITION_HEIGHT {
            return Err(Error::InvalidArgument("rooms lower than the position height".into()));
        }
        let (a, b) = self.absorption_range;
        if !(0.0..=1.0).contains(&a) || !(0.0..=1.0).contains(&b) || a > b {
            return Err(Error::InvalidArgument(format!("absorption range {a}..{b} invalid")));
        }
        if b == 0.0 {
            return Err(Error::NoAbsorption);
        }
        self.sim_options().validate()
    }

    pub fn sim_options(&self) -> SimOptions {
        SimOptions {
            max_order: self.max_order,
            rir_len_s: self.rir_len_s,
            sample_rate: self.sample_rate,
            ..SimOptions::default()
        }
    }

    pub fn expected_count(&self) -> usize {
        self.n_rooms * self.positions_per_room * (self.positions_per_room - 1)
    }
}

/// Position layout: center, the four inset corners, then seeded extras.
pub fn room_positions(room: &Room, count: usize, seed: u64) -> Vec<Point3> {
    let [lx, ly, lz] = room.dims;
    let (lo, hx, hy) = (CORNER_INSET, lx - CORNER_INSET, ly - CORNER_INSET);
    let mut out = vec![
        room.center(),
        Point3::new(lo, lo, POSITION_HEIGHT),
        Point3::new(hx, lo, POSITION_HEIGHT),
        Point3::new(hx, hy, POSITION_HEIGHT),
        Point3::new(lo, hy, POSITION_HEIGHT),
    ];
    out.truncate(count);
    let mut rng = seed::rng(seed::derive_str(seed, "extra-positions"));
    while out.len() < count {
        out.push(Point3::new(
            rng.random_range(lo..hx),
            rng.random_range(lo..hy),
            rng.random_range(CORNER_INSET.min(lz / 2.0)..(lz - CORNER_INSET).max(lz / 2.0)),
        ));
    }
    out
}

/// One (room, source, receiver) rendering task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RirJob {
    pub id: String,
    pub room_index: usize,
    pub source_index: usize,
    pub receiver_index: usize,
}

/// Rooms, positions and jobs of a bank, before any rendering.
#[derive(Debug, Clone, PartialEq)]
pub struct BankPlan {
    pub rooms: Vec<Room>,
    pub positions: Vec<Vec<Point3>>,
    pub jobs: Vec<RirJob>,
    pub options: SimOptions,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RirBank {
    pub rooms: Vec<Room>,
    pub rirs: Vec<Rir>,
}

impl RirBank {
    pub fn len(&self) -> usize {
        self.rirs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rirs.is_empty()
    }

    pub fn room(&self, id: &str) -> Option<&Room> {
        self.rooms.iter().find(|r| r.id == id)
    }
}

/// Sample rooms and enumerate every ordered source/receiver pair. Jobs are
/// ordered by (room, source, receiver).
pub fn plan_rir_bank(spec: &RirBankSpec) -> Result<BankPlan> {
    spec.validate()?;
    let mut rooms = Vec::with_capacity(spec.n_rooms);
    let mut positions = Vec::with_capacity(spec.n_rooms);
    let mut jobs = Vec::with_capacity(spec.expected_count());
    let (a_lo, a_hi) = spec.absorption_range;
    for r in 0..spec.n_rooms {
        let room_seed = seed::derive(seed::derive_str(spec.seed, "rir-bank"), r as u64);
        let mut rng = seed::rng(room_seed);
        let mut draw = |lo: f64, hi: f64| if lo < hi { rng.random_range(lo..hi) } else { lo };
        let dims = [
            draw(spec.dims_min[0], spec.dims_max[0]),
            draw(spec.dims_min[1], spec.dims_max[1]),
            draw(spec.dims_min[2], spec.dims_max[2]),
        ];
        let absorption = Absorption {
            floor: draw(a_lo, a_hi),
            ceiling: draw(a_lo, a_hi),
            wall_x0: draw(a_lo, a_hi),
            wall_x1: draw(a_lo, a_hi),
            wall_y0: draw(a_lo, a_hi),
            wall_y1: draw(a_lo, a_hi),
        };
        let room_id = format!("room{r:02}");
        let room = Room::new(room_id.clone(), dims, absorption)?;
        let pos = room_positions(&room, spec.positions_per_room, room_seed);
        for s in 0..pos.len() {
            for t in 0..pos.len() {
                if s != t {
                    jobs.push(RirJob {
                        id: format!("{room_id}_s{s}_r{t}"),
                        room_index: r,
                        source_index: s,
                        receiver_index: t,
                    });
                }
            }
        }
        rooms.push(room);
        positions.push(pos);
    }
    Ok(BankPlan {
        rooms,
        positions,
        jobs,
        options: spec.sim_options(),
    })
}

impl BankPlan {
    pub fn render(&self, sim: &Simulator, job: &RirJob) -> Result<Rir> {
        let room = &self.rooms[job.room_index];
        let pos = &self.positions[job.room_index];
        let mut rir = sim.simulate(room, pos[job.source_index], pos[job.receiver_index])?;
        rir.id = job.id.clone();
        Ok(rir)
    }
}

/// Render a whole bank sequentially.
pub fn generate_rir_bank(spec: &RirBankSpec) -> Result<RirBank> {
    let plan = plan_rir_bank(spec)?;
    let sim = Simulator::new(plan.options)?;
    let rirs = plan
        .jobs
        .iter()
        .map(|j| plan.render(&sim, j))
        .collect::<Result<Vec<_>>>()?;
    Ok(RirBank {
        rooms: plan.rooms,
        rirs,
    })
}
