//! Brute-force reference formulas, written independently of the library.
#![allow(dead_code, clippy::needless_range_loop)]

use std::collections::BTreeMap;

/// CI from a dense count table `n[c][m]` over observed rows and columns.
pub fn ci_table(n: &[Vec<u32>], alpha: f64) -> f64 {
    let rows = n.len();
    let cols = n[0].len();
    let mut total = 0.0;
    for c in 0..rows {
        let row_sum: u32 = n[c].iter().sum();
        let mut best: Option<(f64, f64)> = None;
        for m in 0..cols {
            let col_sum: u32 = (0..rows).map(|k| n[k][m]).sum();
            let pcm = (f64::from(n[c][m]) + alpha) / (f64::from(col_sum) + alpha * rows as f64);
            let pmc = (f64::from(n[c][m]) + alpha) / (f64::from(row_sum) + alpha * cols as f64);
            let better = match best {
                None => true,
                Some((bc, bm)) => pcm > bc || (pcm == bc && pmc > bm),
            };
            if better {
                best = Some((pcm, pmc));
            }
        }
        let (pcm, pmc) = best.unwrap();
        total += pcm * pmc;
    }
    total / rows as f64
}

fn entropy(counts: impl Iterator<Item = u32>, n: f64) -> f64 {
    counts
        .filter(|&k| k > 0)
        .map(|k| {
            let p = f64::from(k) / n;
            -p * p.log2()
        })
        .sum()
}

/// `H(M) + H(A) - H(M, A)` from a joint count table `n[m][a]`.
pub fn mi_table(n: &[Vec<u32>]) -> f64 {
    let total = f64::from(n.iter().flatten().sum::<u32>());
    let hm = entropy(n.iter().map(|r| r.iter().sum()), total);
    let ha = entropy((0..n[0].len()).map(|a| n.iter().map(|r| r[a]).sum()), total);
    let hj = entropy(n.iter().flatten().copied(), total);
    (hm + ha - hj).max(0.0)
}

/// Table cells expanded into observation pairs.
pub fn pairs_of(n: &[Vec<u32>]) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for (r, row) in n.iter().enumerate() {
        for (c, &k) in row.iter().enumerate() {
            out.extend(std::iter::repeat_n((r, c), k as usize));
        }
    }
    out
}

/// Drops all-zero rows and columns.
pub fn compact(n: &[Vec<u32>]) -> Vec<Vec<u32>> {
    let keep_cols: Vec<usize> = (0..n[0].len()).filter(|&c| n.iter().any(|r| r[c] > 0)).collect();
    n.iter()
        .filter(|r| r.iter().any(|&k| k > 0))
        .map(|r| keep_cols.iter().map(|&c| r[c]).collect())
        .collect()
}

/// Levenshtein distance by plain recursion (short inputs only).
pub fn levenshtein<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    match (a.split_first(), b.split_first()) {
        (None, _) => b.len(),
        (_, None) => a.len(),
        (Some((x, ra)), Some((y, rb))) => {
            let sub = levenshtein(ra, rb) + usize::from(x != y);
            sub.min(levenshtein(ra, b) + 1).min(levenshtein(a, rb) + 1)
        }
    }
}

/// Fractional ranks by counting.
pub fn ranks(v: &[f64]) -> Vec<f64> {
    v.iter()
        .map(|x| {
            let less = v.iter().filter(|y| *y < x).count() as f64;
            let equal = v.iter().filter(|y| *y == x).count() as f64;
            less + (equal + 1.0) / 2.0
        })
        .collect()
}

pub fn correlation(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len() as f64;
    let (sx, sy) = (x.iter().sum::<f64>(), y.iter().sum::<f64>());
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
    let sxx: f64 = x.iter().map(|a| a * a).sum();
    let syy: f64 = y.iter().map(|b| b * b).sum();
    let den = ((n * sxx - sx * sx) * (n * syy - sy * sy)).sqrt();
    (den > 0.0).then(|| (n * sxy - sx * sy) / den)
}

/// Topsim: Spearman between pairwise Hamming and pairwise Levenshtein distances.
pub fn topsim_brute(concepts: &[[u8; 18]], messages: &[Vec<u64>]) -> Option<f64> {
    let mut dc = Vec::new();
    let mut dm = Vec::new();
    for i in 0..concepts.len() {
        for j in 0..i {
            dc.push(concepts[i].iter().zip(&concepts[j]).filter(|(a, b)| a != b).count() as f64);
            dm.push(levenshtein(&messages[i], &messages[j]) as f64);
        }
    }
    correlation(&ranks(&dc), &ranks(&dm))
}

pub fn counts_by<K: Ord>(items: impl Iterator<Item = K>) -> BTreeMap<K, u32> {
    let mut out = BTreeMap::new();
    for k in items {
        *out.entry(k).or_insert(0) += 1;
    }
    out
}
