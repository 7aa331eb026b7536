//! Access-trace data model, calibrated workload synthesis and traffic scaling.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::cmp::Ordering;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Interval, ObjectId, Result, Timestamp, UserId};

/// One observatory data product: an instrument type deployed at a location.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataObject {
    pub id: ObjectId,
    pub name: String,
    pub instrument_type: u32,
    /// Locations are numbered so that nearby sites get nearby ids.
    pub location: u32,
    /// Bytes per second of observation time.
    pub data_rate: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Catalog {
    objects: Vec<DataObject>,
}

impl Catalog {
    /// Builds a catalog from `(name, instrument_type, location, data_rate)` rows.
    /// Ids are assigned in row order.
    pub fn from_rows<I>(rows: I) -> Result<Self>
    where
        I: IntoIterator<Item = (String, u32, u32, f64)>,
    {
        let mut objects = Vec::new();
        let mut seen = BTreeMap::new();
        for (i, (name, instrument_type, location, data_rate)) in rows.into_iter().enumerate() {
            if !(data_rate.is_finite() && data_rate > 0.0) {
                return Err(Error::InvalidWorkload(format!(
                    "object {name}: data rate must be positive, got {data_rate}"
                )));
            }
            if let Some(prev) = seen.insert((instrument_type, location), i) {
                return Err(Error::InvalidWorkload(format!(
                    "object {name} duplicates instrument {instrument_type} at location {location} (row {prev})"
                )));
            }
            objects.push(DataObject {
                id: ObjectId(i as u32),
                name,
                instrument_type,
                location,
                data_rate,
            });
        }
        Ok(Self { objects })
    }

    pub fn len(&self) -> usize {
        self.objects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.objects.is_empty()
    }

    pub fn get(&self, id: ObjectId) -> Option<&DataObject> {
        self.objects.get(id.index())
    }

    pub fn objects(&self) -> &[DataObject] {
        &self.objects
    }

    pub fn find(&self, name: &str) -> Option<ObjectId> {
        self.objects.iter().find(|o| o.name == name).map(|o| o.id)
    }

    pub fn name_index(&self) -> BTreeMap<&str, ObjectId> {
        self.objects.iter().map(|o| (o.name.as_str(), o.id)).collect()
    }

    pub fn rate(&self, id: ObjectId) -> f64 {
        self.objects[id.index()].data_rate
    }

    /// Transfer size of `range` for `id`: data rate times range length.
    pub fn bytes(&self, id: ObjectId, range: &Interval) -> u64 {
        bytes_for(self.rate(id), range.len())
    }
}

/// Size in bytes of `len` seconds of observation data at `rate` bytes/s.
pub fn bytes_for(rate: f64, len: i64) -> u64 {
    if len <= 0 {
        return 0;
    }
    libm::ceil(rate * len as f64) as u64
}

/// One request tuple `(ts, user, object, tr)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AccessRecord {
    pub ts: Timestamp,
    pub user: UserId,
    pub object: ObjectId,
    pub range: Interval,
}

impl AccessRecord {
    pub fn new(ts: Timestamp, user: UserId, object: ObjectId, range: Interval) -> Self {
        Self { ts, user, object, range }
    }

    fn order(&self, other: &Self) -> Ordering {
        self.ts
            .total_cmp(&other.ts)
            .then(self.object.cmp(&other.object))
            .then(self.range.start.cmp(&other.range.start))
            .then(self.user.cmp(&other.user))
            .then(self.range.end.cmp(&other.range.end))
    }
}

/// Sorts records by timestamp, ties broken by `(object, range_start)`.
pub fn sort_records(records: &mut [AccessRecord]) {
    records.sort_by(AccessRecord::order);
}

/// Time-ordered requests of one user.
#[derive(Debug, Clone, PartialEq)]
pub struct RequestSequence {
    pub user: UserId,
    pub records: Vec<AccessRecord>,
}

impl RequestSequence {
    pub fn new(user: UserId, mut records: Vec<AccessRecord>) -> Self {
        records.retain(|r| r.user == user);
        sort_records(&mut records);
        Self { user, records }
    }

    /// The sub-sequence touching `object`.
    pub fn for_object(&self, object: ObjectId) -> impl Iterator<Item = &AccessRecord> {
        self.records.iter().filter(move |r| r.object == object)
    }
}

/// Splits a sorted trace into one sequence per user, ordered by user id.
pub fn group_by_user(records: &[AccessRecord]) -> Vec<RequestSequence> {
    let mut by_user: BTreeMap<UserId, Vec<AccessRecord>> = BTreeMap::new();
    for r in records {
        by_user.entry(r.user).or_default().push(*r);
    }
    by_user
        .into_iter()
        .map(|(user, records)| RequestSequence::new(user, records))
        .collect()
}

/// Compresses (`factor > 1`) or stretches (`factor < 1`) request arrivals
/// around the first timestamp. Observation ranges are left untouched.
pub fn scale_traffic(records: &[AccessRecord], factor: f64) -> Result<Vec<AccessRecord>> {
    if !(factor.is_finite() && factor > 0.0) {
        return Err(Error::InvalidScale(factor));
    }
    let Some(first) = records.first() else {
        return Ok(Vec::new());
    };
    let t0 = records.iter().map(|r| r.ts).fold(first.ts, f64::min);
    Ok(records
        .iter()
        .map(|r| AccessRecord { ts: t0 + (r.ts - t0) / factor, ..*r })
        .collect())
}

/// Regular, real-time and overlapping shares of program transfer volume.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RequestMix {
    pub regular: f64,
    pub real_time: f64,
    pub overlapping: f64,
}

impl RequestMix {
    fn as_array(&self) -> [f64; 3] {
        [self.regular, self.real_time, self.overlapping]
    }
}

/// Polling schedule of one synthetic program-request kind.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PollShape {
    /// Seconds between consecutive requests.
    pub period: i64,
    /// Length of the requested observation window.
    pub window: i64,
}

/// Calibration targets for [`synthesize_trace`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WorkloadSpec {
    pub n_users: u32,
    pub human_user_fraction: f64,
    pub program_volume_fraction: f64,
    pub mix: RequestMix,
    /// When set, the overlapping window is derived so that this share of
    /// each overlapping request repeats the previous one.
    pub overlap_duplicate_fraction: Option<f64>,
    /// Trace length in seconds.
    pub duration: i64,
    pub catalog_size: u32,
    /// Probability that a human's next object neighbors the session focus.
    pub spatial_correlation: f64,
    pub rng_seed: u64,
    pub regular: PollShape,
    pub real_time: PollShape,
    pub overlapping: PollShape,
    /// Upper bound on per-request arrival jitter, as a fraction of the period.
    pub jitter_fraction: f64,
    /// Mean object data rate in bytes per second before calibration.
    pub mean_data_rate: f64,
    /// Number of access regions users are spread over.
    pub n_regions: u32,
}

impl Default for WorkloadSpec {
    fn default() -> Self {
        Self {
            n_users: 200,
            human_user_fraction: 0.867,
            program_volume_fraction: 0.901,
            mix: RequestMix { regular: 0.1376, real_time: 0.2562, overlapping: 0.6062 },
            overlap_duplicate_fraction: None,
            duration: 30 * crate::SECONDS_PER_DAY,
            catalog_size: 240,
            spatial_correlation: 0.8,
            rng_seed: 1,
            regular: PollShape { period: 3_600, window: 3_600 },
            real_time: PollShape { period: 60, window: 60 },
            overlapping: PollShape { period: 3_600, window: 86_400 },
            jitter_fraction: 0.01,
            mean_data_rate: 25_000.0,
            n_regions: 6,
        }
    }
}

/// Synthetic request kinds; program kinds follow a fixed polling schedule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum UserKind {
    Human,
    Regular,
    RealTime,
    Overlapping,
}

const PROGRAM_KINDS: [UserKind; 3] = [UserKind::Regular, UserKind::RealTime, UserKind::Overlapping];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserProfile {
    pub id: UserId,
    pub name: String,
    pub region: u32,
    /// Generator ground truth; not visible to the delivery framework.
    pub kind: UserKind,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticTrace {
    pub catalog: Catalog,
    pub users: Vec<UserProfile>,
    pub records: Vec<AccessRecord>,
}

impl WorkloadSpec {
    /// Calibration targets of the ocean-observatory trace: 86.7% human
    /// users, 90.1% program volume, overlap-dominated program traffic with
    /// 90.4% duplicate data inside overlapping requests.
    pub fn ooi_like() -> Self {
        Self {
            human_user_fraction: 0.867,
            program_volume_fraction: 0.901,
            // reported shares (13.8 / 25.7 / 60.8) sum to 100.3%; normalized
            mix: RequestMix { regular: 0.1376, real_time: 0.2562, overlapping: 0.6062 },
            overlap_duplicate_fraction: Some(0.904),
            ..Self::default()
        }
    }

    /// Calibration targets of the geodetic-facility trace: regular-dominated
    /// program traffic.
    pub fn gage_like() -> Self {
        Self {
            human_user_fraction: 0.941,
            program_volume_fraction: 0.906,
            // reported shares (77.2 / 6.1 / 17.2) sum to 100.5%; normalized
            mix: RequestMix { regular: 0.7682, real_time: 0.0607, overlapping: 0.1711 },
            overlap_duplicate_fraction: Some(0.896),
            ..Self::default()
        }
    }

    /// Window length of overlapping requests after applying the duplicate target.
    pub fn overlap_window(&self) -> i64 {
        match self.overlap_duplicate_fraction {
            Some(dup) if dup < 1.0 => {
                libm::round(self.overlapping.period as f64 / (1.0 - dup)) as i64
            }
            _ => self.overlapping.window,
        }
    }

    fn shape(&self, kind: UserKind) -> PollShape {
        match kind {
            UserKind::Regular => self.regular,
            UserKind::RealTime => self.real_time,
            UserKind::Overlapping => {
                PollShape { period: self.overlapping.period, window: self.overlap_window() }
            }
            UserKind::Human => PollShape { period: 0, window: 0 },
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidWorkload(msg));
        let fractions = [
            ("human_user_fraction", self.human_user_fraction),
            ("program_volume_fraction", self.program_volume_fraction),
            ("mix.regular", self.mix.regular),
            ("mix.real_time", self.mix.real_time),
            ("mix.overlapping", self.mix.overlapping),
            ("spatial_correlation", self.spatial_correlation),
            ("overlap_duplicate_fraction", self.overlap_duplicate_fraction.unwrap_or(0.0)),
        ];
        for (name, v) in fractions {
            if !(0.0..=1.0).contains(&v) {
                return bad(format!("{name} must lie in [0, 1], got {v}"));
            }
        }
        let sum: f64 = self.mix.as_array().iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return bad(format!("request mix must sum to 1, got {sum}"));
        }
        if self.n_users == 0 {
            return bad("n_users must be positive".into());
        }
        if self.duration <= 0 {
            return bad("duration must be positive".into());
        }
        if self.catalog_size == 0 {
            return bad("catalog_size must be positive".into());
        }
        if self.n_regions == 0 {
            return bad("n_regions must be positive".into());
        }
        if !(0.0..=0.01).contains(&self.jitter_fraction) {
            return bad(format!("jitter_fraction must lie in [0, 0.01], got {}", self.jitter_fraction));
        }
        if !(self.mean_data_rate.is_finite() && self.mean_data_rate > 0.0) {
            return bad("mean_data_rate must be positive".into());
        }
        if self.overlap_duplicate_fraction == Some(1.0) {
            return bad("overlap_duplicate_fraction must be below 1".into());
        }
        for kind in PROGRAM_KINDS {
            let s = self.shape(kind);
            if s.period <= 0 || s.window <= 0 {
                return bad(format!("{kind:?} period and window must be positive"));
            }
        }
        let (humans, programs) = self.population();
        if programs == 0 && self.program_volume_fraction > 0.0 {
            return bad("program volume requested but no program users".into());
        }
        if humans == 0 && self.program_volume_fraction < 1.0 {
            return bad("human volume requested but no human users".into());
        }
        for (kind, n) in PROGRAM_KINDS.iter().zip(self.kind_counts(programs)) {
            if n > 0 && self.shape(*kind).period > self.duration {
                return bad(format!(
                    "duration {} is shorter than one {kind:?} period ({})",
                    self.duration,
                    self.shape(*kind).period
                ));
            }
        }
        Ok(())
    }

    fn population(&self) -> (u32, u32) {
        let programs =
            libm::round(self.n_users as f64 * (1.0 - self.human_user_fraction)) as u32;
        let programs = programs.min(self.n_users);
        (self.n_users - programs, programs)
    }

    /// Splits program users across kinds so that per-user volume roughly
    /// tracks the target mix; rate calibration absorbs the remainder.
    fn kind_counts(&self, programs: u32) -> [u32; 3] {
        let mix = self.mix.as_array();
        let weights: Vec<f64> = PROGRAM_KINDS
            .iter()
            .zip(mix)
            .map(|(k, m)| {
                let s = self.shape(*k);
                if s.period <= 0 || s.window <= 0 {
                    0.0
                } else {
                    m / (s.window.min(self.duration) as f64 / s.period as f64)
                }
            })
            .collect();
        let total: f64 = weights.iter().sum();
        let mut counts = [0u32; 3];
        if total <= 0.0 || programs == 0 {
            return counts;
        }
        let quotas: Vec<f64> = weights.iter().map(|w| w / total * programs as f64).collect();
        for (c, q) in counts.iter_mut().zip(&quotas) {
            *c = libm::floor(*q) as u32;
        }
        let mut left = programs - counts.iter().sum::<u32>();
        let mut order: Vec<usize> = (0..3).collect();
        order.sort_by(|&a, &b| {
            let ra = quotas[a] - libm::floor(quotas[a]);
            let rb = quotas[b] - libm::floor(quotas[b]);
            rb.total_cmp(&ra).then(a.cmp(&b))
        });
        for &i in order.iter().cycle() {
            if left == 0 {
                break;
            }
            if weights[i] > 0.0 {
                counts[i] += 1;
                left -= 1;
            }
        }
        // every requested kind gets at least one user when possible
        for i in 0..3 {
            if mix[i] > 0.0 && counts[i] == 0 {
                let donor = (0..3).filter(|&j| counts[j] > 1).max_by_key(|&j| counts[j]);
                if let Some(j) = donor {
                    counts[j] -= 1;
                    counts[i] += 1;
                }
            }
        }
        counts
    }
}

struct Zipf {
    cdf: Vec<f64>,
}

impl Zipf {
    fn new(n: usize, exponent: f64) -> Self {
        let mut acc = 0.0;
        let cdf = (1..=n)
            .map(|k| {
                acc += 1.0 / libm::pow(k as f64, exponent);
                acc
            })
            .collect();
        Self { cdf }
    }

    fn sample(&self, rng: &mut impl Rng) -> usize {
        let total = *self.cdf.last().unwrap_or(&1.0);
        let u = rng.gen::<f64>() * total;
        self.cdf.partition_point(|&c| c <= u).min(self.cdf.len().saturating_sub(1))
    }
}

fn shuffle<T>(items: &mut [T], rng: &mut impl Rng) {
    for i in (1..items.len()).rev() {
        let j = rng.gen_range(0..=i);
        items.swap(i, j);
    }
}

struct Layout {
    n_types: u32,
    n_locations: u32,
    /// `(type, location) -> object`
    grid: BTreeMap<(u32, u32), ObjectId>,
}

impl Layout {
    fn object(&self, t: u32, l: u32) -> Option<ObjectId> {
        self.grid.get(&(t, l)).copied()
    }
}

fn build_catalog(spec: &WorkloadSpec, rng: &mut ChaCha8Rng) -> (Catalog, Layout) {
    let size = spec.catalog_size;
    let n_types = (libm::round(libm::sqrt(size as f64 / 4.0)) as u32).clamp(1, size);
    let n_locations = size.div_ceil(n_types);
    let mut rows = Vec::with_capacity(size as usize);
    let mut grid = BTreeMap::new();
    'outer: for l in 0..n_locations {
        for t in 0..n_types {
            if rows.len() as u32 == size {
                break 'outer;
            }
            let rate = spec.mean_data_rate * rng.gen_range(0.5..1.5);
            grid.insert((t, l), ObjectId(rows.len() as u32));
            rows.push((format!("i{t:02}-l{l:03}"), t, l, rate));
        }
    }
    let catalog = Catalog::from_rows(rows).expect("generated catalog is well-formed");
    (catalog, Layout { n_types, n_locations, grid })
}

/// Instrument types polled by each program kind. Kinds get disjoint pools
/// whenever the catalog has at least three instrument types.
fn kind_types(layout: &Layout, kind_idx: usize) -> Vec<u32> {
    if layout.n_types >= 3 {
        (0..layout.n_types).filter(|t| (*t as usize) % 3 == kind_idx).collect()
    } else {
        (0..layout.n_types).collect()
    }
}

struct ProgramUser {
    user: UserId,
    kind_idx: usize,
    objects: Vec<ObjectId>,
    /// Seconds after each period boundary at which the schedule fires.
    offset: i64,
    /// Seconds between consecutive objects of the set.
    spacing: i64,
}

fn program_records(
    spec: &WorkloadSpec,
    users: &[ProgramUser],
    rng: &mut ChaCha8Rng,
) -> Vec<AccessRecord> {
    let mut out = Vec::new();
    for pu in users {
        let shape = spec.shape(PROGRAM_KINDS[pu.kind_idx]);
        let max_jitter = spec.jitter_fraction * shape.period as f64;
        let mut k = 1i64;
        loop {
            let nominal = k * shape.period + pu.offset;
            if nominal >= spec.duration {
                break;
            }
            let range = Interval { start: (nominal - shape.window).max(0), end: nominal };
            for (j, &obj) in pu.objects.iter().enumerate() {
                let jitter = if max_jitter > 0.0 { rng.gen_range(0.0..max_jitter) } else { 0.0 };
                let ts = nominal as f64 + (j as i64 * pu.spacing) as f64 + jitter;
                if ts < spec.duration as f64 {
                    out.push(AccessRecord::new(ts, pu.user, obj, range));
                }
            }
            k += 1;
        }
    }
    out
}

struct HumanRequest {
    ts: f64,
    user: UserId,
    object: ObjectId,
    end: i64,
    base_len: i64,
}

fn human_requests(
    spec: &WorkloadSpec,
    layout: &Layout,
    humans: &[UserId],
    rng: &mut ChaCha8Rng,
) -> Vec<HumanRequest> {
    const LENGTHS: [i64; 5] = [3_600, 6 * 3_600, 86_400, 3 * 86_400, 7 * 86_400];
    let locations = Zipf::new(layout.n_locations as usize, 1.1);
    let mut hot: Vec<u32> = (0..layout.n_locations).collect();
    shuffle(&mut hot, rng);
    let types = Zipf::new(layout.n_types as usize, 1.0);
    let mut type_order: Vec<u32> = (0..layout.n_types).collect();
    shuffle(&mut type_order, rng);
    // roughly one browsing session every three days
    let mean_sessions = (spec.duration as f64 / (3.0 * crate::SECONDS_PER_DAY as f64)).max(1.0);
    let mut out = Vec::new();
    for &user in humans {
        let favourite: [u32; 2] = [type_order[types.sample(rng)], type_order[types.sample(rng)]];
        let sessions = (libm::round(mean_sessions * rng.gen_range(0.5..1.5)) as usize).max(1);
        for _ in 0..sessions {
            let start = rng.gen_range(0.0..(spec.duration as f64 * 0.98));
            let focus = hot[locations.sample(rng)];
            let base_len = LENGTHS[rng.gen_range(0..LENGTHS.len())];
            let lag = rng.gen_range(0..=3 * crate::SECONDS_PER_DAY);
            let end = ((libm::floor(start) as i64) - lag).max(1);
            let n_requests = rng.gen_range(3..=8);
            let mut ts = start;
            let mut picked: Vec<ObjectId> = Vec::new();
            for _ in 0..n_requests {
                let mut chosen = None;
                for _attempt in 0..8 {
                    let cand = if rng.gen::<f64>() < spec.spatial_correlation {
                        let lo = focus.saturating_sub(1);
                        let hi = (focus + 1).min(layout.n_locations - 1);
                        let l = rng.gen_range(lo..=hi);
                        let t = favourite[rng.gen_range(0..2)];
                        layout.object(t, l)
                    } else {
                        let t = rng.gen_range(0..layout.n_types);
                        let l = rng.gen_range(0..layout.n_locations);
                        layout.object(t, l)
                    };
                    if let Some(c) = cand.filter(|c| !picked.contains(c)) {
                        chosen = Some(c);
                        break;
                    }
                }
                let Some(object) = chosen else { continue };
                picked.push(object);
                if ts >= spec.duration as f64 {
                    break;
                }
                out.push(HumanRequest { ts, user, object, end, base_len });
                ts += rng.gen_range(20.0..180.0);
            }
        }
    }
    out
}

/// Generates a deterministic synthetic trace calibrated to `spec`.
///
/// Program users poll on fixed schedules (one kind each); human users issue
/// a few short, spatially correlated browsing sessions. Data rates of each
/// program kind's instrument pool are rescaled so that per-kind volume hits
/// the requested mix, and human window lengths are rescaled so that the
/// human share of volume hits `1 - program_volume_fraction`.
pub fn synthesize_trace(spec: &WorkloadSpec) -> Result<SyntheticTrace> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.rng_seed);
    let (mut catalog, layout) = build_catalog(spec, &mut rng);
    let (n_humans, n_programs) = spec.population();
    let counts = spec.kind_counts(n_programs);

    let mut kinds: Vec<UserKind> = Vec::with_capacity(spec.n_users as usize);
    kinds.extend(core::iter::repeat_n(UserKind::Human, n_humans as usize));
    for (kind, n) in PROGRAM_KINDS.iter().zip(counts) {
        kinds.extend(core::iter::repeat_n(*kind, n as usize));
    }
    shuffle(&mut kinds, &mut rng);
    let users: Vec<UserProfile> = kinds
        .iter()
        .enumerate()
        .map(|(i, &kind)| UserProfile {
            id: UserId(i as u32),
            name: format!("u{i:04}"),
            region: rng.gen_range(0..spec.n_regions),
            kind,
        })
        .collect();

    // program schedules
    let pools: Vec<Vec<ObjectId>> = (0..3)
        .map(|k| {
            let types = kind_types(&layout, k);
            let mut pool: Vec<ObjectId> = layout
                .grid
                .iter()
                .filter(|((t, _), _)| types.contains(t))
                .map(|(_, id)| *id)
                .collect();
            shuffle(&mut pool, &mut rng);
            pool
        })
        .collect();
    let mut program_users = Vec::new();
    for u in users.iter().filter(|u| u.kind != UserKind::Human) {
        let kind_idx = PROGRAM_KINDS.iter().position(|k| *k == u.kind).unwrap();
        let pool = &pools[kind_idx];
        let zipf = Zipf::new(pool.len(), 1.0);
        let base = pool[zipf.sample(&mut rng)];
        let mut objects = alloc::vec![base];
        if u.kind != UserKind::RealTime {
            let set_size = match rng.gen_range(0..4) {
                0 | 1 => 1,
                2 => 2,
                _ => 3,
            };
            let loc = catalog.get(base).unwrap().location;
            let mut mates: Vec<ObjectId> = kind_types(&layout, kind_idx)
                .into_iter()
                .filter_map(|t| layout.object(t, loc))
                .filter(|o| *o != base)
                .collect();
            shuffle(&mut mates, &mut rng);
            objects.extend(mates.into_iter().take(set_size - 1));
            shuffle(&mut objects, &mut rng);
        }
        let period = spec.shape(u.kind).period;
        let offset = if u.kind == UserKind::RealTime || period < 120 {
            0
        } else {
            60 * rng.gen_range(0..(period / 60).max(1))
        };
        program_users.push(ProgramUser {
            user: u.id,
            kind_idx,
            objects,
            offset,
            spacing: rng.gen_range(5..=30),
        });
    }
    let mut records = program_records(spec, &program_users, &mut rng);

    // per-kind rate calibration
    let kind_of_user: BTreeMap<UserId, usize> =
        program_users.iter().map(|p| (p.user, p.kind_idx)).collect();
    let mut raw = [0.0f64; 3];
    for r in &records {
        raw[kind_of_user[&r.user]] += catalog.rate(r.object) * r.range.len() as f64;
    }
    let program_total: f64 = raw.iter().sum();
    let disjoint_pools = layout.n_types >= 3;
    if program_total > 0.0 && disjoint_pools {
        let mix = spec.mix.as_array();
        let mut scale = [1.0f64; 3];
        for k in 0..3 {
            if raw[k] > 0.0 {
                scale[k] = mix[k] * program_total / raw[k];
            }
        }
        let objects: Vec<DataObject> = catalog
            .objects()
            .iter()
            .map(|o| {
                let k = (o.instrument_type as usize) % 3;
                DataObject { data_rate: o.data_rate * scale[k], ..o.clone() }
            })
            .collect();
        catalog = Catalog { objects };
    }

    // human sessions, with window lengths calibrated to the volume target
    let humans: Vec<UserId> =
        users.iter().filter(|u| u.kind == UserKind::Human).map(|u| u.id).collect();
    let human = human_requests(spec, &layout, &humans, &mut rng);
    let program_total: f64 =
        records.iter().map(|r| catalog.rate(r.object) * r.range.len() as f64).sum();
    let human_raw: f64 = human.iter().map(|h| catalog.rate(h.object) * h.base_len as f64).sum();
    let human_target = if spec.program_volume_fraction > 0.0 {
        program_total * (1.0 - spec.program_volume_fraction) / spec.program_volume_fraction
    } else {
        human_raw
    };
    let stretch = if human_raw > 0.0 { human_target / human_raw } else { 1.0 };
    for h in human {
        let len = (libm::round(h.base_len as f64 * stretch) as i64).max(1);
        let range = Interval { start: h.end - len, end: h.end };
        records.push(AccessRecord::new(h.ts, h.user, h.object, range));
    }

    sort_records(&mut records);
    Ok(SyntheticTrace { catalog, users, records })
}
