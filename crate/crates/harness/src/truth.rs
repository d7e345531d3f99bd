//! Realised error rates against simulation truth.

use fdrpath::TestBattery;
use serde::Serialize;

use crate::error::{HarnessError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TruthEval {
    /// False rejections over `max(1, rejections)`.
    pub fdp: f64,
    /// Missed alternatives over `max(1, non-rejections)`.
    pub fnr: f64,
    pub rejections: usize,
    pub alpha: f64,
}

/// Score the rejection set `rejected` (original test indices).
pub fn evaluate_truth(battery: &TestBattery, rejected: &[usize], alpha: f64) -> Result<TruthEval> {
    let truth = battery.gamma_truth().ok_or_else(|| {
        HarnessError::Core(fdrpath::Error::Domain {
            field: "gamma_truth".into(),
            reason: "battery carries no simulation truth".into(),
        })
    })?;
    let mut is_rejected = vec![false; truth.len()];
    for &i in rejected {
        let slot = is_rejected.get_mut(i).ok_or_else(|| {
            HarnessError::Core(fdrpath::Error::Domain {
                field: "rejected".into(),
                reason: format!("index {i} outside a battery of {} tests", truth.len()),
            })
        })?;
        *slot = true;
    }
    let r = is_rejected.iter().filter(|&&x| x).count();
    let false_rejections = truth
        .iter()
        .zip(&is_rejected)
        .filter(|&(&alt, &rej)| rej && !alt)
        .count();
    let missed = truth
        .iter()
        .zip(&is_rejected)
        .filter(|&(&alt, &rej)| !rej && alt)
        .count();
    let kept = truth.len() - r;
    Ok(TruthEval {
        fdp: false_rejections as f64 / r.max(1) as f64,
        fnr: missed as f64 / kept.max(1) as f64,
        rejections: r,
        alpha,
    })
}
