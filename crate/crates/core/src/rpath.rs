//! Rejection paths: the sequence of estimated FDRs evaluated at each order
//! statistic of a procedure's decision statistic.
//!
//! Two procedures agree on a data set exactly when they rank the tests the
//! same way and assign the same FDR estimate at every prefix, so comparing
//! paths position by position compares procedures at every level alpha at
//! once.

use serde::Serialize;

use crate::freq::Pi0Estimate;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RejectionPath {
    label: String,
    /// Original test index at each path position.
    indices: Vec<usize>,
    /// Decision statistic at each position, most significant first.
    thresholds: Vec<f64>,
    /// Estimated FDR when rejecting the first `i + 1` tests, in [0, 1].
    fdr: Vec<f64>,
    pi0_used: Option<Pi0Estimate>,
}

impl RejectionPath {
    /// Assemble a path whose entries are already in rejection order.
    pub fn new(
        label: impl Into<String>,
        indices: Vec<usize>,
        thresholds: Vec<f64>,
        fdr: Vec<f64>,
        pi0_used: Option<Pi0Estimate>,
    ) -> Result<Self> {
        let m = indices.len();
        for len in [thresholds.len(), fdr.len()] {
            if len != m {
                return Err(Error::LengthMismatch {
                    left: m,
                    right: len,
                });
            }
        }
        if m == 0 {
            return Err(Error::domain("path", "rejection path is empty"));
        }
        if let Some(i) = fdr.iter().position(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::domain(
                "fdr",
                format!("value {} at position {i} outside [0, 1]", fdr[i]),
            ));
        }
        Ok(Self {
            label: label.into(),
            indices,
            thresholds,
            fdr,
            pi0_used,
        })
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn len(&self) -> usize {
        self.fdr.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fdr.is_empty()
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn thresholds(&self) -> &[f64] {
        &self.thresholds
    }

    pub fn fdr(&self) -> &[f64] {
        &self.fdr
    }

    pub fn pi0_used(&self) -> Option<&Pi0Estimate> {
        self.pi0_used.as_ref()
    }

    /// Original indices of the first `k` tests on the path.
    pub fn rejected(&self, k: usize) -> &[usize] {
        &self.indices[..k.min(self.len())]
    }
}

/// Stable permutation sorting `keys` ascending, ties broken by index.
pub(crate) fn ascending_order(keys: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..keys.len()).collect();
    order.sort_by(|&a, &b| keys[a].total_cmp(&keys[b]).then(a.cmp(&b)));
    order
}

/// Stable permutation sorting `keys` descending, ties broken by index.
pub(crate) fn descending_order(keys: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..keys.len()).collect();
    order.sort_by(|&a, &b| keys[b].total_cmp(&keys[a]).then(a.cmp(&b)));
    order
}

/// For each position of a sorted sequence, the (exclusive) end of its tie group.
pub(crate) fn tie_group_ends(sorted: &[f64]) -> Vec<usize> {
    let m = sorted.len();
    let mut ends = vec![m; m];
    let mut i = m;
    while i > 0 {
        let end = i;
        let mut start = i - 1;
        while start > 0 && sorted[start - 1] == sorted[end - 1] {
            start -= 1;
        }
        for e in &mut ends[start..end] {
            *e = end;
        }
        i = start;
    }
    ends
}

/// Number of tests rejected at level `alpha`: the largest `k` with
/// `fdr[k-1] <= alpha`, extended to the end of its tie group.
pub fn cutoff_at_level(path: &RejectionPath, alpha: f64) -> Result<usize> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::domain(
            "alpha",
            format!("must lie in (0, 1], got {alpha}"),
        ));
    }
    let Some(last) = path.fdr.iter().rposition(|&v| v <= alpha) else {
        return Ok(0);
    };
    let mut k = last + 1;
    while k < path.len() && path.thresholds[k] == path.thresholds[k - 1] {
        k += 1;
    }
    Ok(k)
}

/// Position-by-position comparison of two paths over the same battery.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PathComparison {
    /// `a.fdr[i] - b.fdr[i]`.
    pub diff: Vec<f64>,
    /// `a.fdr[i] / b.fdr[i]` where `b.fdr[i] > 0`.
    pub ratio: Vec<Option<f64>>,
    pub sup_norm: f64,
}

impl PathComparison {
    pub fn len(&self) -> usize {
        self.diff.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diff.is_empty()
    }
}

pub fn compare_paths(a: &RejectionPath, b: &RejectionPath) -> Result<PathComparison> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    let diff: Vec<f64> = a.fdr.iter().zip(&b.fdr).map(|(x, y)| x - y).collect();
    let ratio = a
        .fdr
        .iter()
        .zip(&b.fdr)
        .map(|(x, y)| (*y > 0.0).then(|| x / y))
        .collect();
    let sup_norm = diff.iter().fold(0.0_f64, |acc, d| acc.max(d.abs()));
    Ok(PathComparison {
        diff,
        ratio,
        sup_norm,
    })
}

/// Average (mid) ranks, 1-based.
pub fn average_ranks(x: &[f64]) -> Vec<f64> {
    let order = ascending_order(x);
    let sorted: Vec<f64> = order.iter().map(|&i| x[i]).collect();
    let ends = tie_group_ends(&sorted);
    let mut ranks = vec![0.0; x.len()];
    let mut start = 0;
    while start < sorted.len() {
        let end = ends[start];
        let mid = (start + 1 + end) as f64 / 2.0;
        for &i in &order[start..end] {
            ranks[i] = mid;
        }
        start = end;
    }
    ranks
}

/// Spearman correlation with average ranks for ties.
pub fn rank_correlation(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    if x.len() < 2 {
        return Err(Error::domain("x", "need at least two observations"));
    }
    let rx = average_ranks(x);
    let ry = average_ranks(y);
    let n = rx.len() as f64;
    let mean = (n + 1.0) / 2.0;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in rx.iter().zip(&ry) {
        let (da, db) = (a - mean, b - mean);
        sxy += da * db;
        sxx += da * da;
        syy += db * db;
    }
    if sxx == 0.0 {
        return Err(Error::domain(
            "x",
            "constant sequence has no rank correlation",
        ));
    }
    if syy == 0.0 {
        return Err(Error::domain(
            "y",
            "constant sequence has no rank correlation",
        ));
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Count of adjacent pairs on path `a` that path `b` ranks the other way round.
pub fn adjacent_order_disagreements(a: &RejectionPath, b: &RejectionPath) -> Result<usize> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    let mut position_in_b = vec![usize::MAX; b.len()];
    for (pos, &i) in b.indices.iter().enumerate() {
        if i >= position_in_b.len() {
            return Err(Error::domain("indices", "paths cover different tests"));
        }
        position_in_b[i] = pos;
    }
    Ok(a.indices
        .windows(2)
        .filter(|w| position_in_b[w[0]] > position_in_b[w[1]])
        .count())
}
