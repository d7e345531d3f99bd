//! Goodness-of-fit check of a fitted mixture against observed z^2 values.
//!
//! At each level the sample quantile is compared with the quantile of the
//! fitted law using the asymptotic normality of sample quantiles,
//! `sqrt(m) (q_hat - xi) -> N(0, eta (1 - eta) / f(xi)^2)`. The nine
//! per-level tests are not corrected for multiplicity, and the fit is
//! treated as fixed even though it was estimated from the same data.

use std::fmt::Write as _;

use serde::Serialize;

use crate::peb::MixtureFit;
use crate::statdist::{sample_quantile, Distribution};
use crate::{Error, Result};

pub const DEFAULT_LEVELS: [f64; 9] = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9];
pub const DEFAULT_FLAG_THRESHOLD: f64 = 0.05;
pub const MIN_TESTS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Direction {
    /// Fitted quantile significantly above the sample quantile.
    FittedOver,
    /// Fitted quantile significantly below the sample quantile.
    FittedUnder,
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuantileCheck {
    pub level: f64,
    pub sample_quantile: f64,
    pub fitted_quantile: f64,
    pub standard_error: f64,
    pub z_statistic: f64,
    pub p_value: f64,
    pub direction: Direction,
}

impl QuantileCheck {
    /// Row built from published or precomputed numbers; the direction is
    /// judged at the default threshold.
    pub fn from_values(
        level: f64,
        sample_quantile: f64,
        fitted_quantile: f64,
        p_value: f64,
    ) -> Self {
        Self {
            level,
            sample_quantile,
            fitted_quantile,
            standard_error: f64::NAN,
            z_statistic: f64::NAN,
            p_value,
            direction: direction(
                sample_quantile,
                fitted_quantile,
                p_value,
                DEFAULT_FLAG_THRESHOLD,
            ),
        }
    }
}

fn direction(sample: f64, fitted: f64, p: f64, threshold: f64) -> Direction {
    if p > threshold {
        Direction::None
    } else if fitted < sample {
        Direction::FittedUnder
    } else if fitted > sample {
        Direction::FittedOver
    } else {
        Direction::None
    }
}

type Getter = fn(&QuantileCheck) -> f64;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiagnosisReport {
    pub rows: Vec<QuantileCheck>,
}

impl DiagnosisReport {
    /// Recompute directions at another threshold.
    pub fn with_threshold(mut self, threshold: f64) -> Result<Self> {
        check_threshold(threshold)?;
        for row in &mut self.rows {
            row.direction = direction(
                row.sample_quantile,
                row.fitted_quantile,
                row.p_value,
                threshold,
            );
        }
        Ok(self)
    }

    /// Wide table: one column per level, rows for the sample quantile, the
    /// fitted quantile and the p-value.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("statistic");
        for r in &self.rows {
            write!(out, ",{}", r.level).unwrap();
        }
        out.push('\n');
        let lines: [(&str, Getter); 3] = [
            ("sample_quantile", |r| r.sample_quantile),
            ("fitted_quantile", |r| r.fitted_quantile),
            ("p_value", |r| r.p_value),
        ];
        for (name, get) in lines {
            out.push_str(name);
            for r in &self.rows {
                write!(out, ",{:.16e}", get(r)).unwrap();
            }
            out.push('\n');
        }
        out
    }
}

fn check_threshold(threshold: f64) -> Result<()> {
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(Error::domain(
            "p_threshold",
            format!("must lie in (0, 1), got {threshold}"),
        ));
    }
    Ok(())
}

/// Compare sample quantiles of `zsq` with quantiles of the z^2 law induced
/// by `fit`.
pub fn quantile_diagnosis(
    zsq: &[f64],
    fit: &MixtureFit,
    levels: &[f64],
) -> Result<DiagnosisReport> {
    quantile_diagnosis_against(zsq, &fit.zsq_mixture()?, levels)
}

/// Same check against an arbitrary fitted distribution on the data scale.
pub fn quantile_diagnosis_against<D: Distribution + ?Sized>(
    data: &[f64],
    fitted: &D,
    levels: &[f64],
) -> Result<DiagnosisReport> {
    let m = data.len();
    if m < MIN_TESTS {
        return Err(Error::domain(
            "zsq",
            format!("need at least {MIN_TESTS} statistics, got {m}"),
        ));
    }
    if let Some(i) = data.iter().position(|v| !v.is_finite()) {
        return Err(Error::domain(
            "zsq",
            format!("non-finite value at index {i}"),
        ));
    }
    if levels.is_empty() {
        return Err(Error::domain("levels", "no levels supplied"));
    }
    if let Some(l) = levels.iter().find(|l| !(**l > 0.0 && **l < 1.0)) {
        return Err(Error::domain("levels", format!("{l} is outside (0, 1)")));
    }
    let mut sorted = data.to_vec();
    sorted.sort_by(f64::total_cmp);

    let rows = levels
        .iter()
        .map(|&eta| {
            let sample = sample_quantile(&sorted, eta);
            let xi = fitted.quantile(eta)?;
            let density = fitted.pdf(xi);
            if !(density > 0.0 && density.is_finite()) {
                return Err(Error::numeric(
                    None,
                    format!("fitted density at the {eta} quantile is {density}"),
                ));
            }
            let se = (eta * (1.0 - eta) / m as f64).sqrt() / density;
            let z = (sample - xi) / se;
            let p = libm::erfc(z.abs() / std::f64::consts::SQRT_2).max(f64::MIN_POSITIVE);
            Ok(QuantileCheck {
                level: eta,
                sample_quantile: sample,
                fitted_quantile: xi,
                standard_error: se,
                z_statistic: z,
                p_value: p,
                direction: direction(sample, xi, p, DEFAULT_FLAG_THRESHOLD),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DiagnosisReport { rows })
}

/// True when some fitted quantile sits below its sample quantile with a
/// p-value at or under `p_threshold`.
pub fn flag_anticonservative(report: &DiagnosisReport, p_threshold: f64) -> Result<bool> {
    check_threshold(p_threshold)?;
    Ok(report
        .rows
        .iter()
        .any(|r| r.fitted_quantile < r.sample_quantile && r.p_value <= p_threshold))
}
