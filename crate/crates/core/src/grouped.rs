//! Grouped (non-exchangeable) testing under known group parameters.
//!
//! Test `i` in group `d` is null with probability `pi_{d,0}` and its z^2 is
//! drawn from the group's null or alternative law. Tests are ranked by the
//! weighted likelihood ratio
//!
//! ```text
//! wlr_i = (1 - pi_{d,0}) / pi_{d,0} * f_{d,1}(z_i^2) / f_{d,0}(z_i^2)
//! ```
//!
//! whose posterior null probability is `1 / (1 + wlr_i)`.

use serde::{Deserialize, Serialize};

use crate::peb::{bayes_path, LocalFdrVector};
use crate::rpath::{ascending_order, descending_order, tie_group_ends, RejectionPath};
use crate::statdist::{DistFamily, Distribution, SeededRng};
use crate::twogroups::{likelihood_ratio, TestBattery, TwoGroupsSpec};
use crate::{Error, Result};

pub const DEFAULT_MC_DRAWS: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroupModel {
    pub pi0: f64,
    /// Null law of z^2.
    pub null: DistFamily,
    /// Alternative law of z^2.
    pub alt: DistFamily,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroupSpec {
    pub groups: Vec<GroupModel>,
}

impl GroupSpec {
    pub fn new(groups: Vec<GroupModel>) -> Result<Self> {
        let spec = Self { groups };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.groups.is_empty() {
            return Err(Error::domain("groups", "at least one group is required"));
        }
        for g in &self.groups {
            // Reuse the two-groups checks on each group's laws.
            TwoGroupsSpec::new(g.pi0, g.null, g.alt, 1)?;
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.groups.len()
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }

    pub fn pi0s(&self) -> Vec<f64> {
        self.groups.iter().map(|g| g.pi0).collect()
    }

    fn group(&self, k: usize) -> Result<&GroupModel> {
        self.groups
            .get(k)
            .ok_or_else(|| Error::domain("group", format!("label {k} has no specification")))
    }

    /// Simulate `sizes[k]` tests from group `k`, groups laid out in order.
    pub fn simulate(&self, sizes: &[usize], rng: &mut SeededRng) -> Result<TestBattery> {
        self.validate()?;
        if sizes.len() != self.len() {
            return Err(Error::LengthMismatch {
                left: self.len(),
                right: sizes.len(),
            });
        }
        let m: usize = sizes.iter().sum();
        if m == 0 {
            return Err(Error::domain("sizes", "no tests requested"));
        }
        let group: Vec<usize> = sizes
            .iter()
            .enumerate()
            .flat_map(|(k, &n)| std::iter::repeat_n(k, n))
            .collect();
        let truth: Vec<bool> = group
            .iter()
            .map(|&k| rng.uniform() >= self.groups[k].pi0)
            .collect();
        let zsq: Vec<f64> = group
            .iter()
            .zip(&truth)
            .map(|(&k, &alt)| {
                let g = &self.groups[k];
                if alt {
                    g.alt.draw(rng)
                } else {
                    g.null.draw(rng)
                }
            })
            .collect();
        let z = crate::twogroups::sign_randomize(&zsq, rng)?;
        let pvalue = group
            .iter()
            .zip(&zsq)
            .map(|(&k, &x)| self.groups[k].null.sf(x).max(f64::MIN_POSITIVE))
            .collect();
        TestBattery::from_parts(z, zsq, pvalue, Some(truth), Some(group))
    }
}

/// A weighted likelihood ratio and the group it was computed in.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WlrStatistic {
    pub value: f64,
    pub group: usize,
}

/// `((1 - pi0) / pi0) * lr`.
pub fn wlr_from_lr(lr: f64, pi0: f64) -> Result<f64> {
    if !(pi0 > 0.0 && pi0 <= 1.0) {
        return Err(Error::domain(
            "pi0",
            format!("group null proportion must lie in (0, 1], got {pi0}"),
        ));
    }
    if !(lr >= 0.0) {
        return Err(Error::domain(
            "lr",
            format!("must be non-negative, got {lr}"),
        ));
    }
    if pi0 == 1.0 {
        return Ok(0.0);
    }
    Ok((1.0 - pi0) / pi0 * lr)
}

/// Weighted likelihood ratio of statistic `z` in group `group`.
pub fn wlr(z: f64, group: usize, spec: &GroupSpec) -> Result<WlrStatistic> {
    let g = spec.group(group)?;
    let value = wlr_from_lr(likelihood_ratio(&g.null, &g.alt, z * z), g.pi0)?;
    Ok(WlrStatistic { value, group })
}

fn battery_groups(battery: &TestBattery, k: usize) -> Result<&[usize]> {
    let groups = battery
        .groups()
        .ok_or_else(|| Error::domain("group", "battery carries no group labels"))?;
    if let Some(i) = groups.iter().position(|&g| g >= k) {
        return Err(Error::domain(
            "group",
            format!(
                "test {i} has label {} but only {k} groups are specified",
                groups[i]
            ),
        ));
    }
    Ok(groups)
}

/// wlr for every test of a grouped battery.
pub fn wlr_statistics(battery: &TestBattery, spec: &GroupSpec) -> Result<Vec<f64>> {
    let groups = battery_groups(battery, spec.len())?;
    battery
        .z()
        .iter()
        .zip(groups)
        .map(|(&z, &g)| wlr(z, g, spec).map(|w| w.value))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CdfMethod {
    Analytic,
    MonteCarlo { n_mc: usize, seed: u64 },
}

/// Null distribution of wlr within one group.
#[derive(Debug, Clone, PartialEq)]
pub enum GroupNullCdf {
    /// wlr is constant under the null.
    PointMass(f64),
    /// wlr is a monotone function of z^2.
    Analytic {
        weight: f64,
        null: DistFamily,
        alt: DistFamily,
        increasing: bool,
    },
    /// Sorted null draws of wlr.
    Empirical(Vec<f64>),
}

impl GroupNullCdf {
    fn ln_lr(null: &DistFamily, alt: &DistFamily, x: f64) -> f64 {
        alt.ln_pdf(x) - null.ln_pdf(x)
    }

    /// The z^2 value where `ln LR` equals `target`, for monotone LR.
    fn invert(null: &DistFamily, alt: &DistFamily, increasing: bool, target: f64) -> f64 {
        let f = |x: f64| Self::ln_lr(null, alt, x) - target;
        let (a0, t0) = null.as_gamma().expect("validated gamma-type law");
        let (a1, t1) = alt.as_gamma().expect("validated gamma-type law");
        if a0 == a1 {
            let c = libm::lgamma(a0) - libm::lgamma(a1) + a0 * t0.ln() - a1 * t1.ln();
            return (target - c) / (1.0 / t0 - 1.0 / t1);
        }
        // Bisection on the monotone log ratio.
        let sign = if increasing { 1.0 } else { -1.0 };
        let mut lo = 0.0;
        let mut hi = 1.0;
        while sign * f(hi) < 0.0 {
            lo = hi;
            hi *= 2.0;
            if hi > 1e300 {
                return f64::INFINITY;
            }
        }
        for _ in 0..2000 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if sign * f(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    /// `P(wlr <= t)` under the group null.
    pub fn cdf(&self, t: f64) -> f64 {
        match self {
            Self::PointMass(c) => {
                if t >= *c {
                    1.0
                } else {
                    0.0
                }
            }
            Self::Analytic {
                weight,
                null,
                alt,
                increasing,
            } => {
                if t <= 0.0 {
                    return 0.0;
                }
                let x = Self::invert(null, alt, *increasing, (t / weight).ln());
                match (*increasing, x > 0.0) {
                    (true, true) => null.cdf(x),
                    (true, false) => 0.0,
                    (false, true) => null.sf(x),
                    (false, false) => 1.0,
                }
            }
            Self::Empirical(draws) => {
                draws.partition_point(|&d| d <= t) as f64 / draws.len() as f64
            }
        }
    }

    /// `P(wlr >= t)` under the group null.
    pub fn tail(&self, t: f64) -> f64 {
        match self {
            Self::PointMass(c) => {
                if t <= *c {
                    1.0
                } else {
                    0.0
                }
            }
            Self::Analytic { .. } => 1.0 - self.cdf(t),
            Self::Empirical(draws) => {
                (draws.len() - draws.partition_point(|&d| d < t)) as f64 / draws.len() as f64
            }
        }
    }
}

/// Per-group null distributions of wlr.
#[derive(Debug, Clone, PartialEq)]
pub struct NullWlrCdf {
    groups: Vec<GroupNullCdf>,
}

impl NullWlrCdf {
    pub fn groups(&self) -> &[GroupNullCdf] {
        &self.groups
    }

    pub fn cdf(&self, group: usize, t: f64) -> Result<f64> {
        Ok(self.get(group)?.cdf(t))
    }

    pub fn tail(&self, group: usize, t: f64) -> Result<f64> {
        Ok(self.get(group)?.tail(t))
    }

    fn get(&self, group: usize) -> Result<&GroupNullCdf> {
        self.groups
            .get(group)
            .ok_or_else(|| Error::domain("group", format!("no null cdf for group {group}")))
    }
}

fn monotone_direction(null: &DistFamily, alt: &DistFamily) -> Option<Option<bool>> {
    let (a0, t0) = null.as_gamma()?;
    let (a1, t1) = alt.as_gamma()?;
    if a0 == a1 && t0 == t1 {
        return Some(None);
    }
    if a1 >= a0 && t1 >= t0 {
        Some(Some(true))
    } else if a1 <= a0 && t1 <= t0 {
        Some(Some(false))
    } else {
        None
    }
}

/// Null cdf of wlr for every group.
///
/// The analytic form composes the null z^2 cdf with the inverse of the
/// likelihood ratio and needs LR to be monotone in z^2. Monte Carlo draws
/// for group `k` come from child stream `k` of `seed`.
pub fn null_wlr_cdf(spec: &GroupSpec, method: CdfMethod) -> Result<NullWlrCdf> {
    spec.validate()?;
    let groups = spec
        .groups
        .iter()
        .enumerate()
        .map(|(k, g)| {
            let weight = wlr_from_lr(1.0, g.pi0)?;
            if weight == 0.0 {
                return Ok(GroupNullCdf::PointMass(0.0));
            }
            match method {
                CdfMethod::Analytic => match monotone_direction(&g.null, &g.alt) {
                    Some(None) => Ok(GroupNullCdf::PointMass(weight)),
                    Some(Some(increasing)) => Ok(GroupNullCdf::Analytic {
                        weight,
                        null: g.null,
                        alt: g.alt,
                        increasing,
                    }),
                    None => Err(Error::Unsupported(format!(
                        "group {k}: likelihood ratio is not monotone in z^2; use Monte Carlo"
                    ))),
                },
                CdfMethod::MonteCarlo { n_mc, seed } => {
                    if n_mc == 0 {
                        return Err(Error::domain("n_mc", "need at least one draw"));
                    }
                    let mut rng = SeededRng::new(seed).child(k as u64);
                    let mut draws: Vec<f64> = (0..n_mc)
                        .map(|_| weight * likelihood_ratio(&g.null, &g.alt, g.null.draw(&mut rng)))
                        .collect();
                    draws.sort_by(f64::total_cmp);
                    Ok(GroupNullCdf::Empirical(draws))
                }
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(NullWlrCdf { groups })
}

/// Frequentist FDR path over descending wlr thresholds.
///
/// At threshold `t` with `R = #{wlr >= t}` rejections, the expected number
/// of false rejections is `sum_i pi_{d_i,0} P0(wlr >= t | d_i)`, capped by
/// the prior null mass `sum_{i rejected} pi_{d_i,0}` of the rejected set.
pub fn grouped_fdr_path(
    battery: &TestBattery,
    spec: &GroupSpec,
    cdfs: &NullWlrCdf,
) -> Result<RejectionPath> {
    let groups = battery_groups(battery, spec.len())?;
    if cdfs.groups.len() < spec.len() {
        return Err(Error::domain(
            "group",
            format!(
                "null cdfs cover {} of {} groups",
                cdfs.groups.len(),
                spec.len()
            ),
        ));
    }
    let stats = wlr_statistics(battery, spec)?;
    let mut counts = vec![0usize; spec.len()];
    for &g in groups {
        counts[g] += 1;
    }
    let expected_nulls: Vec<f64> = counts
        .iter()
        .zip(&spec.groups)
        .map(|(&n, g)| n as f64 * g.pi0)
        .collect();

    let order = descending_order(&stats);
    let sorted: Vec<f64> = order.iter().map(|&i| stats[i]).collect();
    let ends = tie_group_ends(&sorted);
    let mut prior_mass = Vec::with_capacity(sorted.len());
    let mut acc = 0.0;
    for &i in &order {
        acc += spec.groups[groups[i]].pi0;
        prior_mass.push(acc);
    }

    let mut fdr = vec![0.0; sorted.len()];
    let mut start = 0;
    while start < sorted.len() {
        let end = ends[start];
        let t = sorted[start];
        let false_rejections: f64 = expected_nulls
            .iter()
            .zip(&cdfs.groups)
            .filter(|(n, _)| **n > 0.0)
            .map(|(n, cdf)| n * cdf.tail(t))
            .sum();
        let value = (false_rejections.min(prior_mass[end - 1]) / end as f64).clamp(0.0, 1.0);
        fdr[start..end].iter_mut().for_each(|v| *v = value);
        start = end;
    }
    RejectionPath::new("grouped-fdr", order, sorted, fdr, None)
}

/// Posterior null probabilities `1 / (1 + wlr_i)` under the group oracle.
pub fn grouped_local_fdr(battery: &TestBattery, spec: &GroupSpec) -> Result<LocalFdrVector> {
    let stats = wlr_statistics(battery, spec)?;
    LocalFdrVector::new(stats.iter().map(|w| 1.0 / (1.0 + w)).collect())
}

/// Bayesian FDR path of the grouped oracle local fdrs.
pub fn grouped_bayes_path(battery: &TestBattery, spec: &GroupSpec) -> Result<RejectionPath> {
    bayes_path(&grouped_local_fdr(battery, spec)?, "grouped-bayes")
}

/// Weighted p-value path: tests ordered by `p_i / w_{d_i}`.
///
/// At ratio cutoff `s` group `k` uses p-threshold `min(1, s w_k)`; the FDR
/// estimate is `pi_R sum_k m_k min(1, s w_k) / R`, with `pi_R` the mean
/// group null proportion over the `R` rejected tests.
pub fn weighted_p_path(
    battery: &TestBattery,
    weights: &[f64],
    group_pi0: &[f64],
) -> Result<RejectionPath> {
    if weights.len() != group_pi0.len() {
        return Err(Error::LengthMismatch {
            left: weights.len(),
            right: group_pi0.len(),
        });
    }
    if let Some(w) = weights.iter().find(|w| !(**w > 0.0 && w.is_finite())) {
        return Err(Error::domain(
            "weights",
            format!("must be positive, got {w}"),
        ));
    }
    if let Some(p) = group_pi0.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(Error::domain("pi0", format!("must lie in [0, 1], got {p}")));
    }
    let groups = battery_groups(battery, weights.len())?;
    let ratio: Vec<f64> = battery
        .pvalues()
        .iter()
        .zip(groups)
        .map(|(p, &g)| p / weights[g])
        .collect();
    let mut counts = vec![0usize; weights.len()];
    for &g in groups {
        counts[g] += 1;
    }

    let order = ascending_order(&ratio);
    let sorted: Vec<f64> = order.iter().map(|&i| ratio[i]).collect();
    let ends = tie_group_ends(&sorted);
    let mut prior_mass = Vec::with_capacity(sorted.len());
    let mut acc = 0.0;
    for &i in &order {
        acc += group_pi0[groups[i]];
        prior_mass.push(acc);
    }
    let fdr = sorted
        .iter()
        .zip(&ends)
        .map(|(&s, &end)| {
            let mean_pi0 = prior_mass[end - 1] / end as f64;
            let expected: f64 = counts
                .iter()
                .zip(weights)
                .map(|(&n, w)| n as f64 * (s * w).min(1.0))
                .sum();
            (mean_pi0 * expected / end as f64).clamp(0.0, 1.0)
        })
        .collect();
    RejectionPath::new("weighted-p", order, sorted, fdr, None)
}
