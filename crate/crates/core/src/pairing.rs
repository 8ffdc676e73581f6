//! Semantic child/adult pairing over sentence embeddings.
//!
//! Matching is global greedy without replacement: repeatedly take the most
//! similar (child, adult) pair among unmatched items. Inputs are ordered by
//! id before anything else happens, so the result does not depend on input
//! order; equal similarities resolve to the smallest (child_id, adult_id).

use alloc::collections::BinaryHeap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::{Ordering, Reverse};

use serde::{Deserialize, Serialize};

use crate::math;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Child,
    Adult,
}

impl Role {
    pub fn as_str(self) -> &'static str {
        match self {
            Role::Child => "child",
            Role::Adult => "adult",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Utterance {
    pub id: String,
    pub transcript: String,
    pub embedding: Vec<f64>,
    pub duration_s: f64,
    pub speaker_id: String,
    pub role: Role,
    pub source_corpus: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchedPair {
    pub child_id: String,
    pub adult_id: String,
    pub similarity: f64,
}

/// Pairs in selection order plus whatever was left over, sorted by id.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MatchOutcome {
    pub pairs: Vec<MatchedPair>,
    pub unmatched_children: Vec<String>,
    pub unmatched_adults: Vec<String>,
}

/// Scale `values` to unit L2 norm in place.
pub fn normalize_vector(id: &str, values: &mut [f64]) -> Result<()> {
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument(format!("embedding of {id} is not finite")));
    }
    let norm = math::sqrt(values.iter().map(|v| v * v).sum());
    if norm == 0.0 {
        return Err(Error::ZeroEmbedding { id: id.into() });
    }
    values.iter_mut().for_each(|v| *v /= norm);
    Ok(())
}

/// Normalize every embedding; fails on the first zero vector.
pub fn normalize_embeddings(mut utterances: Vec<Utterance>) -> Result<Vec<Utterance>> {
    for u in &mut utterances {
        normalize_vector(&u.id, &mut u.embedding)?;
    }
    Ok(utterances)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Dense child × adult cosine matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl SimilarityMatrix {
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::InvalidArgument("ragged similarity matrix".into()));
        }
        if rows.iter().flatten().any(|v| v.is_nan()) {
            return Err(Error::InvalidArgument("similarity matrix contains NaN".into()));
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data: rows.into_iter().flatten().collect(),
        })
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.cols + col]
    }

    pub fn row(&self, row: usize) -> &[f64] {
        &self.data[row * self.cols..(row + 1) * self.cols]
    }
}

/// One row of the similarity matrix: child `child` against every adult.
pub fn similarity_row(child: &[f64], adults: &[&[f64]]) -> Vec<f64> {
    adults.iter().map(|a| dot(child, a)).collect()
}

/// Check ids are unique and all embeddings share one dimension.
pub fn validate_embeddings(children: &[Utterance], adults: &[Utterance]) -> Result<usize> {
    let dim = children
        .iter()
        .chain(adults)
        .map(|u| u.embedding.len())
        .next()
        .unwrap_or(0);
    for u in children.iter().chain(adults) {
        if u.embedding.len() != dim {
            return Err(Error::DimensionMismatch {
                id: u.id.clone(),
                expected: dim,
                found: u.embedding.len(),
            });
        }
        if u.embedding.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!("embedding of {} is not finite", u.id)));
        }
    }
    for side in [children, adults] {
        let mut ids: Vec<&str> = side.iter().map(|u| u.id.as_str()).collect();
        ids.sort_unstable();
        if let Some(w) = ids.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::DuplicateId(w[0].into()));
        }
    }
    Ok(dim)
}

fn sorted_order(ids: &[&str]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..ids.len()).collect();
    idx.sort_by(|&a, &b| ids[a].cmp(ids[b]));
    idx
}

/// Heap key: larger similarity first, then smaller child, then smaller adult.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Key(f64, Reverse<usize>, Reverse<usize>);

impl Eq for Key {}

impl Ord for Key {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0
            .total_cmp(&other.0)
            .then(self.1.cmp(&other.1))
            .then(self.2.cmp(&other.2))
    }
}

impl PartialOrd for Key {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Adults are ranked per child in batches of this many candidates.
const BATCH: usize = 64;

/// Greedy core over sorted positions: `sim(c, a)` for child rank `c` and
/// adult rank `a`. Returns (c, a, similarity) in selection order.
fn greedy_core(n_children: usize, n_adults: usize, sim: impl Fn(usize, usize) -> f64) -> Vec<(usize, usize, f64)> {
    // Candidate order for one child: similarity descending, adult ascending.
    let before = |x: (f64, usize), y: (f64, usize)| y.0.total_cmp(&x.0).then(x.1.cmp(&y.1));
    let mut taken = vec![false; n_adults];
    let mut batches: Vec<Vec<(f64, usize)>> = vec![Vec::new(); n_children];
    let mut cursor = vec![0usize; n_children];
    let mut last: Vec<Option<(f64, usize)>> = vec![None; n_children];

    // Next untaken candidate for child c, refilling its batch from the row.
    let mut next = |c: usize, taken: &[bool]| -> Option<(f64, usize)> {
        loop {
            while cursor[c] < batches[c].len() {
                let cand = batches[c][cursor[c]];
                if !taken[cand.1] {
                    return Some(cand);
                }
                cursor[c] += 1;
            }
            let mut pool: Vec<(f64, usize)> = (0..n_adults)
                .filter(|&a| !taken[a])
                .map(|a| (sim(c, a), a))
                .filter(|&cand| last[c].is_none_or(|l| before(l, cand) == Ordering::Less))
                .collect();
            if pool.is_empty() {
                return None;
            }
            if pool.len() > BATCH {
                pool.select_nth_unstable_by(BATCH - 1, |x, y| before(*x, *y));
                pool.truncate(BATCH);
            }
            pool.sort_by(|x, y| before(*x, *y));
            last[c] = pool.last().copied();
            batches[c] = pool;
            cursor[c] = 0;
        }
    };

    let mut heap = BinaryHeap::with_capacity(n_children);
    for c in 0..n_children {
        if let Some((s, a)) = next(c, &taken) {
            heap.push(Key(s, Reverse(c), Reverse(a)));
        }
    }
    let mut out = Vec::with_capacity(n_children.min(n_adults));
    while let Some(Key(s, Reverse(c), Reverse(a))) = heap.pop() {
        if taken[a] {
            if let Some((s2, a2)) = next(c, &taken) {
                heap.push(Key(s2, Reverse(c), Reverse(a2)));
            }
            continue;
        }
        taken[a] = true;
        out.push((c, a, s));
    }
    out
}

fn outcome(child_ids: &[&str], adult_ids: &[&str], picks: Vec<(usize, usize, f64)>) -> MatchOutcome {
    let (co, ao) = (sorted_order(child_ids), sorted_order(adult_ids));
    let mut used_c = vec![false; child_ids.len()];
    let mut used_a = vec![false; adult_ids.len()];
    let pairs = picks
        .into_iter()
        .map(|(c, a, similarity)| {
            used_c[c] = true;
            used_a[a] = true;
            MatchedPair {
                child_id: child_ids[co[c]].into(),
                adult_id: adult_ids[ao[a]].into(),
                similarity,
            }
        })
        .collect();
    let left = |ids: &[&str], order: &[usize], used: &[bool]| -> Vec<String> {
        order
            .iter()
            .enumerate()
            .filter(|(rank, _)| !used[*rank])
            .map(|(_, &i)| ids[i].into())
            .collect()
    };
    MatchOutcome {
        unmatched_children: left(child_ids, &co, &used_c),
        unmatched_adults: left(adult_ids, &ao, &used_a),
        pairs,
    }
}

/// Greedy matching on embeddings, which should already be unit norm
/// (cosine similarity is then the dot product).
pub fn greedy_match(children: &[Utterance], adults: &[Utterance]) -> Result<MatchOutcome> {
    validate_embeddings(children, adults)?;
    let child_ids: Vec<&str> = children.iter().map(|u| u.id.as_str()).collect();
    let adult_ids: Vec<&str> = adults.iter().map(|u| u.id.as_str()).collect();
    let co = sorted_order(&child_ids);
    let ao = sorted_order(&adult_ids);
    let picks = greedy_core(children.len(), adults.len(), |c, a| {
        dot(&children[co[c]].embedding, &adults[ao[a]].embedding)
    });
    Ok(outcome(&child_ids, &adult_ids, picks))
}

/// Greedy matching over a precomputed matrix whose rows follow `child_ids`
/// and columns follow `adult_ids`.
pub fn greedy_match_matrix(child_ids: &[String], adult_ids: &[String], sim: &SimilarityMatrix) -> Result<MatchOutcome> {
    if sim.rows != child_ids.len() || sim.cols != adult_ids.len() {
        return Err(Error::InvalidArgument(format!(
            "matrix is {}x{} for {} children and {} adults",
            sim.rows,
            sim.cols,
            child_ids.len(),
            adult_ids.len()
        )));
    }
    let child_ids: Vec<&str> = child_ids.iter().map(String::as_str).collect();
    let adult_ids: Vec<&str> = adult_ids.iter().map(String::as_str).collect();
    for ids in [&child_ids, &adult_ids] {
        let mut s = ids.clone();
        s.sort_unstable();
        if let Some(w) = s.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::DuplicateId(w[0].into()));
        }
    }
    let co = sorted_order(&child_ids);
    let ao = sorted_order(&adult_ids);
    let picks = greedy_core(child_ids.len(), adult_ids.len(), |c, a| sim.get(co[c], ao[a]));
    Ok(outcome(&child_ids, &adult_ids, picks))
}
