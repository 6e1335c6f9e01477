//! Protocol metrics: context independence (positive signalling), causal
//! influence of communication (positive listening) and topographic
//! similarity (compositionality).

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::language::ConceptVector;
use crate::trace::TraceRecord;
use crate::world::ActionId;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricError {
    #[error("no observations")]
    Empty,
    #[error("smoothing constant must be non-negative and finite")]
    BadSmoothing,
    #[error("need at least {needed} items, got {got}")]
    TooFew { needed: usize, got: usize },
    #[error("concept and message lists differ in length ({0} vs {1})")]
    Misaligned(usize, usize),
    #[error("degenerate space: {0} distances are constant")]
    DegenerateSpace(&'static str),
}

/// Count-based translation model over observed concept and message symbols.
#[derive(Debug, Clone)]
pub struct TranslationModel<C, M> {
    concepts: Vec<C>,
    messages: Vec<M>,
    /// `counts[c][m]`
    counts: Vec<Vec<f64>>,
    alpha: f64,
}

impl<C: Ord + Clone, M: Ord + Clone> TranslationModel<C, M> {
    pub fn fit(pairs: &[(C, M)], alpha: f64) -> Result<Self, MetricError> {
        if pairs.is_empty() {
            return Err(MetricError::Empty);
        }
        if !(alpha >= 0.0 && alpha.is_finite()) {
            return Err(MetricError::BadSmoothing);
        }
        let concepts: BTreeMap<C, usize> = index_of(pairs.iter().map(|(c, _)| c));
        let messages: BTreeMap<M, usize> = index_of(pairs.iter().map(|(_, m)| m));
        let mut counts = vec![vec![0.0; messages.len()]; concepts.len()];
        for (c, m) in pairs {
            counts[concepts[c]][messages[m]] += 1.0;
        }
        Ok(Self {
            concepts: concepts.into_keys().collect(),
            messages: messages.into_keys().collect(),
            counts,
            alpha,
        })
    }

    pub fn concepts(&self) -> &[C] {
        &self.concepts
    }

    pub fn messages(&self) -> &[M] {
        &self.messages
    }

    /// `p(c | m)` by dense indices.
    pub fn p_concept_given_message(&self, c: usize, m: usize) -> f64 {
        let column: f64 = self.counts.iter().map(|row| row[m]).sum();
        (self.counts[c][m] + self.alpha) / (column + self.alpha * self.concepts.len() as f64)
    }

    /// `p(m | c)` by dense indices.
    pub fn p_message_given_concept(&self, m: usize, c: usize) -> f64 {
        let row: f64 = self.counts[c].iter().sum();
        (self.counts[c][m] + self.alpha) / (row + self.alpha * self.messages.len() as f64)
    }

    /// The message most indicative of concept `c`: maximal `p(c|m)`, ties
    /// broken by larger `p(m|c)` and then by the smaller message symbol.
    pub fn best_message(&self, c: usize) -> usize {
        let mut best = 0;
        let mut best_key = (self.p_concept_given_message(c, 0), self.p_message_given_concept(0, c));
        for m in 1..self.messages.len() {
            let key = (self.p_concept_given_message(c, m), self.p_message_given_concept(m, c));
            if key.0 > best_key.0 || (key.0 == best_key.0 && key.1 > best_key.1) {
                best = m;
                best_key = key;
            }
        }
        best
    }
}

fn index_of<'a, T: Ord + Clone + 'a>(items: impl Iterator<Item = &'a T>) -> BTreeMap<T, usize> {
    let mut map: BTreeMap<T, usize> = items.map(|t| (t.clone(), 0)).collect();
    for (i, v) in map.values_mut().enumerate() {
        *v = i;
    }
    map
}

/// Context independence over `(concept, message)` observations with
/// additive-`alpha` smoothing. Lies in `[0, 1]`.
pub fn context_independence<C: Ord + Clone, M: Ord + Clone>(pairs: &[(C, M)], alpha: f64) -> Result<f64, MetricError> {
    let model = TranslationModel::fit(pairs, alpha)?;
    let n = model.concepts.len();
    let total: f64 = (0..n)
        .map(|c| {
            let m = model.best_message(c);
            model.p_concept_given_message(c, m) * model.p_message_given_concept(m, c)
        })
        .sum();
    Ok(total / n as f64)
}

/// Plug-in mutual information `I(m; a)` in bits between messages and actions.
pub fn causal_influence<M: Ord, A: Ord>(pairs: &[(M, A)]) -> Result<f64, MetricError> {
    if pairs.is_empty() {
        return Err(MetricError::Empty);
    }
    let mut joint: BTreeMap<(&M, &A), f64> = BTreeMap::new();
    let mut pm: BTreeMap<&M, f64> = BTreeMap::new();
    let mut pa: BTreeMap<&A, f64> = BTreeMap::new();
    for (m, a) in pairs {
        *joint.entry((m, a)).or_default() += 1.0;
        *pm.entry(m).or_default() += 1.0;
        *pa.entry(a).or_default() += 1.0;
    }
    let n = pairs.len() as f64;
    let mi: f64 = joint
        .iter()
        .map(|((m, a), &count)| {
            let p = count / n;
            p * (p / ((pm[m] / n) * (pa[a] / n))).log2()
        })
        .sum();
    // rounding can leave a tiny negative value for independent tables
    Ok(mi.max(0.0))
}

pub fn hamming(a: &[u8], b: &[u8]) -> usize {
    a.iter().zip(b).filter(|(x, y)| x != y).count() + a.len().abs_diff(b.len())
}

/// Levenshtein distance over symbol sequences.
pub fn edit_distance<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for (i, x) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, y) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(x != y);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

/// Average (fractional) ranks, 1-based.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&i, &j| values[i].total_cmp(&values[j]));
    let mut ranks = vec![0.0; values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start;
        while end + 1 < order.len() && values[order[end + 1]] == values[order[start]] {
            end += 1;
        }
        let rank = (start + end) as f64 / 2.0 + 1.0;
        for &k in &order[start..=end] {
            ranks[k] = rank;
        }
        start = end + 1;
    }
    ranks
}

pub fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let cov: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    if vx == 0.0 || vy == 0.0 {
        return None;
    }
    Some((cov / (vx.sqrt() * vy.sqrt())).clamp(-1.0, 1.0))
}

/// Spearman correlation between two aligned distance lists.
pub fn spearman(concept_distances: &[f64], message_distances: &[f64]) -> Result<f64, MetricError> {
    let constant = |v: &[f64]| v.iter().all(|x| *x == v[0]);
    if concept_distances.is_empty() || constant(concept_distances) {
        return Err(MetricError::DegenerateSpace("concept"));
    }
    if constant(message_distances) {
        return Err(MetricError::DegenerateSpace("message"));
    }
    pearson(&average_ranks(concept_distances), &average_ranks(message_distances))
        .ok_or(MetricError::DegenerateSpace("message"))
}

fn pairwise<T>(items: &[T], dist: impl Fn(&T, &T) -> f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(items.len() * items.len().saturating_sub(1) / 2);
    for i in 0..items.len() {
        for j in i + 1..items.len() {
            out.push(dist(&items[i], &items[j]));
        }
    }
    out
}

fn check_aligned(a: usize, b: usize) -> Result<(), MetricError> {
    if a != b {
        return Err(MetricError::Misaligned(a, b));
    }
    if a < 3 {
        return Err(MetricError::TooFew { needed: 3, got: a });
    }
    Ok(())
}

/// Topographic similarity: Spearman ρ between pairwise Hamming distances of
/// concepts and pairwise edit distances of message symbol sequences.
pub fn topographic_similarity<S: PartialEq>(concepts: &[ConceptVector], messages: &[Vec<S>]) -> Result<f64, MetricError> {
    check_aligned(concepts.len(), messages.len())?;
    let dc = pairwise(concepts, |a, b| hamming(a.bits(), b.bits()) as f64);
    let dm = pairwise(messages, |a, b| edit_distance(a, b) as f64);
    spearman(&dc, &dm)
}

/// Topographic similarity for continuous messages, using Euclidean distance.
pub fn topographic_similarity_continuous(concepts: &[ConceptVector], messages: &[Vec<f64>]) -> Result<f64, MetricError> {
    check_aligned(concepts.len(), messages.len())?;
    let dc = pairwise(concepts, |a, b| hamming(a.bits(), b.bits()) as f64);
    let dm = pairwise(messages, |a, b| euclidean(a, b));
    spearman(&dc, &dm)
}

/// How concept/message pairs are formed from a trace round.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SymbolView {
    /// Whole concept vs. the concatenated message symbols of the round.
    #[default]
    Concatenated,
    /// The k-th set concept bit paired with the k-th message (tagged with its
    /// position), for k below both counts.
    PerAttribute,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceMetrics {
    pub episodes: usize,
    pub ci: Option<f64>,
    pub cic: Option<f64>,
    pub topsim: Option<f64>,
    /// Why a metric could not be computed, keyed by metric name.
    pub notes: BTreeMap<String, String>,
}

pub fn ci_pairs(records: &[TraceRecord], view: SymbolView) -> Vec<(Vec<u64>, Vec<u64>)> {
    match view {
        SymbolView::Concatenated => records
            .iter()
            .map(|r| (r.concept.bits().iter().map(|&b| u64::from(b)).collect(), r.message_sequence()))
            .collect(),
        SymbolView::PerAttribute => records
            .iter()
            .flat_map(|r| {
                let bits = r.concept.set_bits();
                let symbols = r.message_sequence();
                bits.into_iter()
                    .zip(symbols)
                    .enumerate()
                    .map(|(k, (bit, sym))| (vec![bit as u64], vec![k as u64, sym]))
                    .collect::<Vec<_>>()
            })
            .collect(),
    }
}

pub fn cic_pairs(records: &[TraceRecord]) -> Vec<(Vec<u64>, ActionId)> {
    records
        .iter()
        .flat_map(|r| {
            let m = r.message_sequence();
            r.actions.iter().map(move |a| (m.clone(), *a))
        })
        .collect()
}

/// CI, CIC and topsim over a whole trace. Metrics that cannot be computed
/// (too few records, degenerate spaces) are `None` with a note.
pub fn evaluate_trace(records: &[TraceRecord], alpha: f64, view: SymbolView) -> TraceMetrics {
    let mut notes = BTreeMap::new();
    let mut keep = |name: &str, r: Result<f64, MetricError>| match r {
        Ok(v) => Some(v),
        Err(e) => {
            notes.insert(name.to_string(), e.to_string());
            None
        }
    };
    let ci = keep("ci", context_independence(&ci_pairs(records, view), alpha));
    let cic = keep("cic", causal_influence(&cic_pairs(records)));
    let concepts: Vec<ConceptVector> = records.iter().map(|r| r.concept).collect();
    let topsim = match records.iter().map(TraceRecord::continuous_sequence).collect::<Option<Vec<_>>>() {
        Some(values) if !records.is_empty() => topographic_similarity_continuous(&concepts, &values),
        _ => {
            let seqs: Vec<Vec<u64>> = records.iter().map(TraceRecord::message_sequence).collect();
            topographic_similarity(&concepts, &seqs)
        }
    };
    let topsim = keep("topsim", topsim);
    TraceMetrics { episodes: records.len(), ci, cic, topsim, notes }
}
