//! Virtual groups of users with shared interests, data-hub selection and
//! hot-data replication.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::trace::AccessRecord;
use crate::{DtnId, Error, Interval, ObjectId, Result, UserId};

/// Request-count profile of one user, L2-normalized.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserInterestVector {
    pub user: UserId,
    pub home_dtn: DtnId,
    pub vector: Vec<f64>,
}

impl UserInterestVector {
    pub fn is_zero(&self) -> bool {
        self.vector.iter().all(|v| *v == 0.0)
    }
}

/// Builds one vector per user in `homes` from requests in `records`.
pub fn interest_vectors(
    records: &[AccessRecord],
    homes: &BTreeMap<UserId, DtnId>,
    n_objects: usize,
) -> Vec<UserInterestVector> {
    let mut counts: BTreeMap<UserId, Vec<f64>> = BTreeMap::new();
    for r in records {
        if r.object.index() < n_objects {
            counts.entry(r.user).or_insert_with(|| vec![0.0; n_objects])[r.object.index()] += 1.0;
        }
    }
    homes
        .iter()
        .map(|(&user, &home_dtn)| {
            let mut vector = counts.remove(&user).unwrap_or_else(|| vec![0.0; n_objects]);
            let norm = libm::sqrt(vector.iter().map(|v| v * v).sum::<f64>());
            if norm > 0.0 {
                vector.iter_mut().for_each(|v| *v /= norm);
            }
            UserInterestVector { user, home_dtn, vector }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubGroup {
    pub home_dtn: DtnId,
    pub members: Vec<UserId>,
    pub hub: Option<DtnId>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VirtualGroup {
    pub id: usize,
    pub members: Vec<UserId>,
    pub centroid: Vec<f64>,
    pub sub_groups: Vec<SubGroup>,
}

impl VirtualGroup {
    /// DTNs that are home to at least one member.
    pub fn member_dtns(&self) -> Vec<DtnId> {
        self.sub_groups.iter().map(|s| s.home_dtn).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMeans {
    pub centroids: Vec<Vec<f64>>,
    pub assignment: Vec<usize>,
    /// Within-cluster sum of squares after each assignment step.
    pub objective: Vec<f64>,
    pub iterations: usize,
}

pub const KMEANS_MAX_ITER: usize = 100;
pub const KMEANS_TOL: f64 = 1e-6;

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(p: &[f64], centroids: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (i, c) in centroids.iter().enumerate() {
        let d = dist2(p, c);
        if d < best.1 {
            best = (i, d);
        }
    }
    best
}

/// Lloyd's algorithm with k-means++ seeding. `k` is capped at the number of
/// distinct points; clusters that lose all points keep their centroid.
pub fn kmeans(points: &[Vec<f64>], k: usize, seed: u64) -> KMeans {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids: Vec<Vec<f64>> = Vec::new();
    if !points.is_empty() && k > 0 {
        centroids.push(points[rng.gen_range(0..points.len())].clone());
        while centroids.len() < k {
            let d: Vec<f64> = points.iter().map(|p| nearest(p, &centroids).1).collect();
            let total: f64 = d.iter().sum();
            if !(total > 0.0) {
                break;
            }
            let mut target = rng.gen::<f64>() * total;
            let mut pick = d.iter().rposition(|v| *v > 0.0).unwrap();
            for (i, v) in d.iter().enumerate() {
                if *v > 0.0 && target < *v {
                    pick = i;
                    break;
                }
                target -= v;
            }
            centroids.push(points[pick].clone());
        }
    }

    let dim = points.first().map_or(0, Vec::len);
    let mut assignment = vec![0; points.len()];
    let mut objective = Vec::new();
    let mut iterations = 0;
    while iterations < KMEANS_MAX_ITER && !centroids.is_empty() {
        iterations += 1;
        let mut sse = 0.0;
        for (p, a) in points.iter().zip(assignment.iter_mut()) {
            let (i, d) = nearest(p, &centroids);
            *a = i;
            sse += d;
        }
        objective.push(sse);
        let mut sums = vec![vec![0.0; dim]; centroids.len()];
        let mut counts = vec![0usize; centroids.len()];
        for (p, &a) in points.iter().zip(&assignment) {
            counts[a] += 1;
            sums[a].iter_mut().zip(p).for_each(|(s, x)| *s += x);
        }
        let mut shift: f64 = 0.0;
        for ((c, s), n) in centroids.iter_mut().zip(sums).zip(counts) {
            if n == 0 {
                continue;
            }
            let next: Vec<f64> = s.into_iter().map(|v| v / n as f64).collect();
            shift = shift.max(libm::sqrt(dist2(c, &next)));
            *c = next;
        }
        if shift <= KMEANS_TOL {
            break;
        }
    }
    KMeans { centroids, assignment, objective, iterations }
}

/// Clusters the active users into at most `k` groups and splits each group
/// by home DTN. Groups are numbered by their smallest member.
pub fn cluster_users(vectors: &[UserInterestVector], k: usize, seed: u64) -> Vec<VirtualGroup> {
    let active: Vec<&UserInterestVector> = vectors.iter().filter(|v| !v.is_zero()).collect();
    let points: Vec<Vec<f64>> = active.iter().map(|v| v.vector.clone()).collect();
    let km = kmeans(&points, k.min(points.len()), seed);
    let mut clusters: BTreeMap<usize, Vec<&UserInterestVector>> = BTreeMap::new();
    for (v, &a) in active.iter().zip(&km.assignment) {
        clusters.entry(a).or_default().push(v);
    }
    let mut groups: Vec<VirtualGroup> = clusters
        .into_iter()
        .map(|(c, mut members)| {
            members.sort_by_key(|v| v.user);
            let mut by_dtn: BTreeMap<DtnId, Vec<UserId>> = BTreeMap::new();
            for v in &members {
                by_dtn.entry(v.home_dtn).or_default().push(v.user);
            }
            VirtualGroup {
                id: 0,
                members: members.iter().map(|v| v.user).collect(),
                centroid: km.centroids[c].clone(),
                sub_groups: by_dtn
                    .into_iter()
                    .map(|(home_dtn, members)| SubGroup { home_dtn, members, hub: None })
                    .collect(),
            }
        })
        .collect();
    groups.sort_by_key(|g| g.members[0]);
    for (i, g) in groups.iter_mut().enumerate() {
        g.id = i;
    }
    groups
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HubWeights {
    pub throughput: f64,
    pub availability: f64,
    pub frequency: f64,
}

impl Default for HubWeights {
    fn default() -> Self {
        Self { throughput: 0.6, availability: 0.2, frequency: 0.2 }
    }
}

/// Raw per-candidate terms of the hub score.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct HubSelectionInputs {
    /// Summed throughput from the candidate to the other DTNs, Gbps.
    pub throughput_sum: BTreeMap<DtnId, f64>,
    /// Free fraction of the candidate's resources.
    pub availability: BTreeMap<DtnId, f64>,
    /// Group requests per hour arriving through the candidate.
    pub frequency: BTreeMap<DtnId, f64>,
    pub weights: HubWeights,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HubScore {
    pub dtn: DtnId,
    pub throughput: f64,
    pub availability: f64,
    pub frequency: f64,
    pub score: f64,
}

fn min_max(values: &[f64]) -> Vec<f64> {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    values
        .iter()
        .map(|v| if hi > lo { (v - lo) / (hi - lo) } else { 0.0 })
        .collect()
}

/// Weighted score of every candidate with each term min-max normalized
/// across the candidates.
pub fn hub_scores(candidates: &[DtnId], inputs: &HubSelectionInputs) -> Vec<HubScore> {
    let get = |m: &BTreeMap<DtnId, f64>, d: &DtnId| m.get(d).copied().unwrap_or(0.0);
    let p: Vec<f64> = candidates.iter().map(|d| get(&inputs.throughput_sum, d)).collect();
    let u: Vec<f64> = candidates.iter().map(|d| get(&inputs.availability, d)).collect();
    let f: Vec<f64> = candidates.iter().map(|d| get(&inputs.frequency, d)).collect();
    let (np, nu, nf) = (min_max(&p), min_max(&u), min_max(&f));
    let w = inputs.weights;
    candidates
        .iter()
        .enumerate()
        .map(|(i, &dtn)| HubScore {
            dtn,
            throughput: p[i],
            availability: u[i],
            frequency: f[i],
            score: w.throughput * np[i] + w.availability * nu[i] + w.frequency * nf[i],
        })
        .collect()
}

/// Highest-scoring candidate; ties go to the lowest DTN id.
pub fn select_hub(candidates: &[DtnId], inputs: &HubSelectionInputs) -> Result<DtnId> {
    let scores = hub_scores(candidates, inputs);
    scores
        .iter()
        .max_by(|a, b| a.score.total_cmp(&b.score).then(b.dtn.cmp(&a.dtn)))
        .map(|s| s.dtn)
        .ok_or(Error::NoCandidates)
}

/// A hot segment to copy into the hub cache.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Replication {
    pub object: ObjectId,
    pub range: Interval,
    pub bytes: u64,
}

/// Ranks objects by group access count (ties by object id) and takes them
/// in order until the next one no longer fits the budget.
pub fn replicate_hot(
    counts: &BTreeMap<ObjectId, u64>,
    ranges: &BTreeMap<ObjectId, Interval>,
    bytes: impl Fn(ObjectId, &Interval) -> u64,
    budget: u64,
) -> Vec<Replication> {
    let mut ranked: Vec<(ObjectId, u64)> = counts.iter().map(|(o, c)| (*o, *c)).filter(|(_, c)| *c > 0).collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    let mut left = budget;
    let mut out = Vec::new();
    for (object, _) in ranked {
        let Some(range) = ranges.get(&object) else {
            continue;
        };
        let size = bytes(object, range);
        if size > left {
            break;
        }
        left -= size;
        out.push(Replication { object, range: *range, bytes: size });
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlacementConfig {
    /// Seconds between rebalances.
    pub epoch: f64,
    /// Number of groups; `None` means one per client DTN.
    pub k: Option<usize>,
    /// Replication budget as a fraction of the hub cache capacity.
    pub budget_fraction: f64,
    pub weights: HubWeights,
}

impl Default for PlacementConfig {
    fn default() -> Self {
        Self { epoch: 7.0 * 86_400.0, k: None, budget_fraction: 0.1, weights: HubWeights::default() }
    }
}

/// Group/hub state after one rebalance.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Placement {
    pub epoch: u64,
    pub groups: Vec<VirtualGroup>,
    pub scores: BTreeMap<usize, Vec<HubScore>>,
}

impl Placement {
    pub fn hub_of(&self, group: usize) -> Option<DtnId> {
        self.groups.get(group)?.sub_groups.first()?.hub
    }
}

/// Everything a rebalance looks at, snapshotted by the caller.
pub struct RebalanceInputs<'a> {
    pub records: &'a [AccessRecord],
    pub homes: &'a BTreeMap<UserId, DtnId>,
    pub n_objects: usize,
    pub window_hours: f64,
    pub throughput: &'a dyn Fn(DtnId, DtnId) -> f64,
    pub availability: &'a dyn Fn(DtnId) -> f64,
}

/// Re-clusters users and picks each group's hub. Candidates are the
/// group's member DTNs; the throughput term sums over the other member
/// DTNs. Rebalancing moves no data.
pub fn rebalance(epoch: u64, k: usize, seed: u64, weights: HubWeights, inputs: &RebalanceInputs<'_>) -> Placement {
    let vectors = interest_vectors(inputs.records, inputs.homes, inputs.n_objects);
    let mut groups = cluster_users(&vectors, k, seed);
    let mut scores = BTreeMap::new();
    for g in &mut groups {
        let dtns = g.member_dtns();
        let members: BTreeSet<UserId> = g.members.iter().copied().collect();
        let mut per_dtn: BTreeMap<DtnId, f64> = BTreeMap::new();
        for r in inputs.records.iter().filter(|r| members.contains(&r.user)) {
            if let Some(d) = inputs.homes.get(&r.user) {
                *per_dtn.entry(*d).or_default() += 1.0;
            }
        }
        let hours = inputs.window_hours.max(1e-9);
        let hub_inputs = HubSelectionInputs {
            throughput_sum: dtns
                .iter()
                .map(|&i| (i, dtns.iter().filter(|&&j| j != i).map(|&j| (inputs.throughput)(i, j)).sum()))
                .collect(),
            availability: dtns.iter().map(|&i| (i, (inputs.availability)(i))).collect(),
            frequency: dtns.iter().map(|&i| (i, per_dtn.get(&i).copied().unwrap_or(0.0) / hours)).collect(),
            weights,
        };
        let hub = select_hub(&dtns, &hub_inputs).ok();
        for s in &mut g.sub_groups {
            s.hub = hub;
        }
        scores.insert(g.id, hub_scores(&dtns, &hub_inputs));
    }
    Placement { epoch, groups, scores }
}
