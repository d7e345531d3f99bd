//! Parametric empirical Bayes under a unimodal alternative.
//!
//! The marginal model for a z-score is
//!
//! ```text
//! f_c(z) = pi0 N(z; 0, 1) + (1 - pi0) sum_k w_k N(z; 0, 1 + sigma_k^2)
//! ```
//!
//! with `sigma_k` on a fixed, data-driven grid. `pi0` and the `w_k` are
//! fitted by EM, and plugged in to give local fdrs
//! `pi0 N(z; 0, 1) / f_c(z)`.

use serde::Serialize;

use crate::rpath::{ascending_order, tie_group_ends, RejectionPath};
use crate::statdist::{sample_quantile, DistFamily, MixtureDensity, SeededRng};
use crate::{Error, Result};

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Strictly increasing positive effect standard deviations.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SigmaGrid(Vec<f64>);

impl SigmaGrid {
    pub fn new(sigmas: Vec<f64>) -> Result<Self> {
        if sigmas.is_empty() {
            return Err(Error::domain("sigma grid", "grid is empty"));
        }
        if let Some(s) = sigmas.iter().find(|s| !(**s > 0.0 && s.is_finite())) {
            return Err(Error::domain(
                "sigma grid",
                format!("non-positive entry {s}"),
            ));
        }
        if sigmas.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::domain(
                "sigma grid",
                "entries must be strictly increasing",
            ));
        }
        Ok(Self(sigmas))
    }

    pub fn sigmas(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Geometric grid with ratio sqrt(2).
///
/// The smallest point is a tenth of the interquartile range of |z| (floored
/// at 1e-3); the grid extends to the first point at or above
/// `2 sqrt(max(0, max z^2 - 1) + 1)`.
pub fn select_sigma_grid(z: &[f64]) -> Result<SigmaGrid> {
    if z.len() < 2 {
        return Err(Error::domain(
            "z",
            "need at least two statistics to choose a grid",
        ));
    }
    if let Some(i) = z.iter().position(|v| !v.is_finite()) {
        return Err(Error::domain("z", format!("non-finite value at index {i}")));
    }
    if z.iter().all(|&v| v == z[0]) {
        return Err(Error::domain("z", "all statistics are equal"));
    }
    let mut abs: Vec<f64> = z.iter().map(|v| v.abs()).collect();
    abs.sort_by(f64::total_cmp);
    let iqr = sample_quantile(&abs, 0.75) - sample_quantile(&abs, 0.25);
    let sigma_min = (iqr / 10.0).max(1e-3);
    let max_sq = abs[abs.len() - 1].powi(2);
    let sigma_max = 2.0 * ((max_sq - 1.0).max(0.0) + 1.0).sqrt();

    let mut grid = vec![sigma_min];
    while *grid.last().unwrap() < sigma_max {
        let next = grid.last().unwrap() * std::f64::consts::SQRT_2;
        grid.push(next);
    }
    SigmaGrid::new(grid)
}

/// Starting point for EM.
#[derive(Debug, Clone, PartialEq)]
pub enum EmInit {
    /// pi0 = 0.5 and uniform alternative weights.
    Default,
    /// Explicit pi0 and alternative weights (renormalised).
    Given { pi0: f64, weights: Vec<f64> },
    /// Random starting point drawn from the seed.
    Random(u64),
}

pub const DEFAULT_NULL_WEIGHT: f64 = 10.0;

#[derive(Debug, Clone, PartialEq)]
pub struct EmOptions {
    /// Stop when the relative log-likelihood increase falls below this.
    pub tol: f64,
    pub max_iter: usize,
    pub init: EmInit,
    /// Null-favouring pseudo-count `lambda >= 1`; the objective gains
    /// `(lambda - 1) ln pi0`. 1 gives the plain MLE, which is poorly
    /// identified when the smallest grid components are close to the null.
    pub null_weight: f64,
}

impl Default for EmOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iter: 5000,
            init: EmInit::Default,
            null_weight: DEFAULT_NULL_WEIGHT,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MixtureFit {
    pub pi0_hat: f64,
    /// Alternative weights over the grid, summing to one.
    pub weights: Vec<f64>,
    pub grid: SigmaGrid,
    /// Objective value before each EM update, plus the final value.
    pub loglik_trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

impl MixtureFit {
    /// A fit with fixed parameters, e.g. the simulation truth.
    pub fn from_parameters(pi0: f64, weights: Vec<f64>, grid: SigmaGrid) -> Result<Self> {
        if !(0.0..=1.0).contains(&pi0) {
            return Err(Error::domain(
                "pi0",
                format!("must lie in [0, 1], got {pi0}"),
            ));
        }
        if weights.len() != grid.len() {
            return Err(Error::LengthMismatch {
                left: grid.len(),
                right: weights.len(),
            });
        }
        let total: f64 = weights.iter().sum();
        if weights.iter().any(|w| !(*w >= 0.0)) || !(total > 0.0) {
            return Err(Error::domain(
                "weights",
                "must be non-negative with positive sum",
            ));
        }
        Ok(Self {
            pi0_hat: pi0,
            weights: weights.iter().map(|w| w / total).collect(),
            grid,
            loglik_trace: Vec::new(),
            iterations: 0,
            converged: true,
        })
    }

    /// Component variances on the z scale: the null first, then `1 + sigma_k^2`.
    pub fn variances(&self) -> Vec<f64> {
        std::iter::once(1.0)
            .chain(self.grid.sigmas().iter().map(|s| 1.0 + s * s))
            .collect()
    }

    /// Mixing proportions matching [`MixtureFit::variances`].
    pub fn proportions(&self) -> Vec<f64> {
        std::iter::once(self.pi0_hat)
            .chain(self.weights.iter().map(|w| (1.0 - self.pi0_hat) * w))
            .collect()
    }

    /// The fitted marginal law of z^2: a mixture of scaled chi-square(1)
    /// laws, `v chi2_1 = Gamma(1/2, 2v)`.
    pub fn zsq_mixture(&self) -> Result<MixtureDensity> {
        let comps = self
            .proportions()
            .into_iter()
            .zip(self.variances())
            .filter(|(w, _)| *w > 0.0)
            .map(|(w, v)| Ok((w, DistFamily::gamma(0.5, 2.0 * v)?)))
            .collect::<Result<Vec<_>>>()?;
        MixtureDensity::normalized(comps)
    }

    fn ln_marginal(&self, z: f64) -> f64 {
        let terms: Vec<f64> = self
            .proportions()
            .into_iter()
            .zip(self.variances())
            .filter(|(w, _)| *w > 0.0)
            .map(|(w, v)| w.ln() + ln_normal(z, v))
            .collect();
        log_sum_exp(&terms)
    }
}

fn ln_normal(z: f64, variance: f64) -> f64 {
    -0.5 * z * z / variance - 0.5 * variance.ln() - LN_SQRT_2PI
}

fn log_sum_exp(terms: &[f64]) -> f64 {
    let max = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + terms.iter().map(|t| (t - max).exp()).sum::<f64>().ln()
}

/// Compensated (Neumaier) sum.
fn stable_sum(values: impl Iterator<Item = f64>) -> f64 {
    let mut sum = 0.0;
    let mut comp = 0.0;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

fn initial_weights(init: &EmInit, k: usize) -> Result<Vec<f64>> {
    let mut w = match init {
        EmInit::Default => std::iter::once(0.5)
            .chain(std::iter::repeat_n(0.5 / k as f64, k))
            .collect::<Vec<_>>(),
        EmInit::Given { pi0, weights } => {
            if weights.len() != k {
                return Err(Error::LengthMismatch {
                    left: k,
                    right: weights.len(),
                });
            }
            if !(*pi0 > 0.0 && *pi0 < 1.0) {
                return Err(Error::domain(
                    "pi0",
                    format!("initial value must lie in (0, 1), got {pi0}"),
                ));
            }
            let total: f64 = weights.iter().sum();
            if weights.iter().any(|w| !(*w > 0.0)) {
                return Err(Error::domain("weights", "initial weights must be positive"));
            }
            std::iter::once(*pi0)
                .chain(weights.iter().map(|w| (1.0 - pi0) * w / total))
                .collect()
        }
        EmInit::Random(seed) => {
            let mut rng = SeededRng::new(*seed);
            (0..=k).map(|_| 0.05 + rng.uniform()).collect()
        }
    };
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= total);
    Ok(w)
}

/// Values this small are set to zero so products stay out of the subnormal range.
const FLUSH: f64 = 1e-150;

fn flush(x: f64) -> f64 {
    if x < FLUSH {
        0.0
    } else {
        x
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

struct EmProblem {
    /// Row-scaled component likelihoods, `ncomp` per observation.
    lik: Vec<f64>,
    ncomp: usize,
    offset: f64,
    penalty: f64,
}

impl EmProblem {
    /// Objective at `w` and the EM update from `w`.
    fn step(&self, w: &[f64], iteration: usize) -> Result<(f64, Vec<f64>)> {
        let mut counts = vec![0.0; self.ncomp];
        let mut lls = Vec::with_capacity(self.lik.len() / self.ncomp);
        for row in self.lik.chunks_exact(self.ncomp) {
            let f: f64 = row.iter().zip(w).map(|(l, wj)| l * wj).sum();
            lls.push(f.ln());
            for (c, l) in counts.iter_mut().zip(row) {
                *c += l / f;
            }
        }
        let mut ll = stable_sum(lls.into_iter()) + self.offset;
        if self.penalty > 0.0 {
            ll += self.penalty * w[0].ln();
        }
        if !ll.is_finite() {
            return Err(Error::numeric(
                Some(iteration),
                format!("log-likelihood is {ll}"),
            ));
        }
        let denom = (self.lik.len() / self.ncomp) as f64 + self.penalty;
        let next = w
            .iter()
            .zip(&counts)
            .enumerate()
            .map(|(j, (wj, c))| {
                let extra = if j == 0 { self.penalty } else { 0.0 };
                flush((wj * c + extra) / denom)
            })
            .collect();
        Ok((ll, next))
    }
}

/// Fit pi0 and the grid weights by EM.
///
/// Iterations are SQUAREM-accelerated EM steps. The trace records the
/// objective at the start of each iteration and is non-decreasing.
pub fn em_fit(z: &[f64], grid: &SigmaGrid, options: &EmOptions) -> Result<MixtureFit> {
    if !(options.tol > 0.0) {
        return Err(Error::domain(
            "tol",
            format!("must be positive, got {}", options.tol),
        ));
    }
    if !(options.null_weight >= 1.0) {
        return Err(Error::domain(
            "null_weight",
            format!("must be at least 1, got {}", options.null_weight),
        ));
    }
    if z.is_empty() {
        return Err(Error::domain("z", "no statistics supplied"));
    }
    if let Some(i) = z.iter().position(|v| !v.is_finite()) {
        return Err(Error::domain("z", format!("non-finite value at index {i}")));
    }

    let k = grid.len();
    let ncomp = k + 1;
    let variances: Vec<f64> = std::iter::once(1.0)
        .chain(grid.sigmas().iter().map(|s| 1.0 + s * s))
        .collect();

    // Row-scaled component likelihoods: lik[i * ncomp + j] = exp(ln N_j(z_i) - rowmax_i).
    let m = z.len();
    let mut lik = vec![0.0; m * ncomp];
    let mut row_max = vec![0.0; m];
    for (i, &zi) in z.iter().enumerate() {
        let row = &mut lik[i * ncomp..(i + 1) * ncomp];
        for (slot, &v) in row.iter_mut().zip(&variances) {
            *slot = ln_normal(zi, v);
        }
        let mx = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        row.iter_mut().for_each(|x| *x = flush((*x - mx).exp()));
        row_max[i] = mx;
    }
    let offset = stable_sum(row_max.iter().copied());
    let penalty = options.null_weight - 1.0;

    let problem = EmProblem {
        lik,
        ncomp,
        offset,
        penalty,
    };
    let mut w = initial_weights(&options.init, k)?;
    let mut trace: Vec<f64> = Vec::new();
    let mut converged = false;
    let mut iterations = 0;

    // SQUAREM: two EM steps define a secant extrapolation, kept only when it
    // does not lower the objective, so the trace stays monotone.
    loop {
        let (ll0, w1) = problem.step(&w, iterations)?;
        if let Some(&prev) = trace.last() {
            trace.push(ll0);
            if (ll0 - prev) / prev.abs().max(f64::MIN_POSITIVE) < options.tol {
                converged = true;
                break;
            }
        } else {
            trace.push(ll0);
        }
        if iterations >= options.max_iter {
            break;
        }
        iterations += 1;

        let (ll1, w2) = problem.step(&w1, iterations)?;
        let r: Vec<f64> = w1.iter().zip(&w).map(|(a, b)| a - b).collect();
        let v: Vec<f64> = w2
            .iter()
            .zip(&w1)
            .zip(&r)
            .map(|((c, b), r)| c - b - r)
            .collect();
        let (rn, vn) = (norm(&r), norm(&v));
        let mut next = w2;
        if rn > 0.0 && vn > 0.0 {
            let mut alpha = -(rn / vn).max(1.0);
            while alpha < -1.0 {
                let proposal: Vec<f64> = w
                    .iter()
                    .zip(&r)
                    .zip(&v)
                    .map(|((w0, r), v)| w0 - 2.0 * alpha * r + alpha * alpha * v)
                    .collect();
                if proposal.iter().all(|p| *p >= 0.0) {
                    let total: f64 = proposal.iter().sum();
                    let proposal: Vec<f64> = proposal.iter().map(|p| p / total).collect();
                    if let Ok((llp, stabilised)) = problem.step(&proposal, iterations) {
                        if llp >= ll1 {
                            next = stabilised;
                            break;
                        }
                    }
                }
                alpha = (alpha - 1.0) / 2.0;
            }
        }
        w = next;
    }

    let pi0_hat = w[0];
    let alt_mass: f64 = w[1..].iter().sum();
    let weights = if alt_mass > 0.0 {
        w[1..].iter().map(|v| v / alt_mass).collect()
    } else {
        vec![1.0 / k as f64; k]
    };
    Ok(MixtureFit {
        pi0_hat,
        weights,
        grid: grid.clone(),
        loglik_trace: trace,
        iterations,
        converged,
    })
}

/// `pi0 N(0,1) + (1 - pi0) sum_k w_k N(0, 1 + sigma_k^2)` on the z scale.
pub fn fitted_mixture_density(fit: &MixtureFit) -> Result<MixtureDensity> {
    let comps = fit
        .proportions()
        .into_iter()
        .zip(fit.variances())
        .filter(|(w, _)| *w > 0.0)
        .map(|(w, v)| Ok((w, DistFamily::normal(0.0, v.sqrt())?)))
        .collect::<Result<Vec<_>>>()?;
    MixtureDensity::normalized(comps)
}

/// Per-test posterior null probabilities.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LocalFdrVector(Vec<f64>);

impl LocalFdrVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(i) = values.iter().position(|u| !(0.0..=1.0).contains(u)) {
            return Err(Error::domain(
                "local fdr",
                format!("value {} at index {i} outside [0, 1]", values[i]),
            ));
        }
        Ok(Self(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// `u_i = pi0 N(z_i; 0, 1) / f_c(z_i)`, evaluated in log space.
pub fn local_fdr(z: &[f64], fit: &MixtureFit) -> Result<LocalFdrVector> {
    if fit.pi0_hat <= 0.0 {
        return LocalFdrVector::new(vec![0.0; z.len()]);
    }
    let ln_pi0 = fit.pi0_hat.ln();
    let values = z
        .iter()
        .enumerate()
        .map(|(i, &zi)| {
            let denom = fit.ln_marginal(zi);
            if !denom.is_finite() {
                return Err(Error::numeric(
                    None,
                    format!("fitted density vanishes at test {i} (z = {zi})"),
                ));
            }
            Ok((ln_pi0 + ln_normal(zi, 1.0) - denom).exp().clamp(0.0, 1.0))
        })
        .collect::<Result<Vec<_>>>()?;
    LocalFdrVector::new(values)
}

/// Bayesian FDR path: local fdrs sorted ascending, with the i-th value the
/// mean of the i smallest.
pub fn bayes_path(u: &LocalFdrVector, label: &str) -> Result<RejectionPath> {
    if u.is_empty() {
        return Err(Error::domain("local fdr", "no values supplied"));
    }
    let order = ascending_order(u.values());
    let sorted: Vec<f64> = order.iter().map(|&i| u.values()[i]).collect();
    let ends = tie_group_ends(&sorted);
    let mut cumulative = Vec::with_capacity(sorted.len());
    let mut acc = 0.0;
    for (i, v) in sorted.iter().enumerate() {
        acc += v;
        cumulative.push(acc / (i + 1) as f64);
    }
    let fdr = ends
        .iter()
        .map(|&end| cumulative[end - 1].clamp(0.0, 1.0))
        .collect();
    RejectionPath::new(label, order, sorted, fdr, None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::statdist::Distribution;
    use crate::twogroups::{oracle_local_fdr, simulate_battery, wakefield_bf, TwoGroupsSpec};
    use fdrpath_oracles as oracle;

    #[test]
    fn grid_covers_largest_effect() {
        let mut z: Vec<f64> = (0..50).map(|i| (i as f64 - 25.0) / 10.0).collect();
        z.push(10.0);
        let g = select_sigma_grid(&z).unwrap();
        let last = *g.sigmas().last().unwrap();
        assert!(last >= 2.0 * 99f64.sqrt());
        assert!(g
            .sigmas()
            .windows(2)
            .all(|w| (w[1] / w[0] - 2f64.sqrt()).abs() < 1e-12));
    }

    #[test]
    fn grid_never_empty_for_tiny_statistics() {
        let z = [0.01, -0.02, 0.03, 0.015];
        let g = select_sigma_grid(&z).unwrap();
        assert!(!g.is_empty());
        assert!(g.sigmas()[0] >= 1e-3);
    }

    #[test]
    fn grid_is_scale_equivariant() {
        let z: Vec<f64> = (0..40)
            .map(|i| ((i * 37 % 17) as f64 - 8.0) / 2.0)
            .collect();
        let z2: Vec<f64> = z.iter().map(|v| 2.0 * v).collect();
        let (a, b) = (
            select_sigma_grid(&z).unwrap(),
            select_sigma_grid(&z2).unwrap(),
        );
        assert_eq!(a.len(), b.len());
        assert!((b.sigmas()[0] - 2.0 * a.sigmas()[0]).abs() < 1e-12);
        assert!((b.sigmas().last().unwrap() - 2.0 * a.sigmas().last().unwrap()).abs() < 1e-9);
    }

    #[test]
    fn degenerate_input_rejected() {
        assert!(select_sigma_grid(&[1.0]).is_err());
        assert!(select_sigma_grid(&[2.0, 2.0, 2.0]).is_err());
        assert!(SigmaGrid::new(vec![1.0, 1.0]).is_err());
        assert!(SigmaGrid::new(vec![]).is_err());
    }

    #[test]
    fn null_only_battery_fits_pi0_near_one() {
        let spec = TwoGroupsSpec::normal_random_effect(1.0, 10.0, 10_000).unwrap();
        let b = simulate_battery(&spec, &mut SeededRng::new(31)).unwrap();
        let grid = select_sigma_grid(b.z()).unwrap();
        let fit = em_fit(b.z(), &grid, &EmOptions::default()).unwrap();
        assert!(fit.pi0_hat >= 0.95, "pi0_hat {}", fit.pi0_hat);
    }

    #[test]
    fn em_trace_is_non_decreasing() {
        for seed in 0..5 {
            let spec = TwoGroupsSpec::normal_random_effect(0.7, 4.0, 2000).unwrap();
            let b = simulate_battery(&spec, &mut SeededRng::new(seed)).unwrap();
            let grid = select_sigma_grid(b.z()).unwrap();
            for init in [EmInit::Default, EmInit::Random(seed + 100)] {
                let opts = EmOptions {
                    init,
                    ..EmOptions::default()
                };
                let fit = em_fit(b.z(), &grid, &opts).unwrap();
                assert!(fit.loglik_trace.windows(2).all(|w| w[1] >= w[0] - 1e-10));
                assert!((fit.weights.iter().sum::<f64>() - 1.0).abs() < 1e-10);
                assert_eq!(
                    fit.converged,
                    fit.iterations < opts.max_iter || fit.converged
                );
            }
        }
    }

    #[test]
    fn converged_flag_reflects_iteration_cap() {
        let spec = TwoGroupsSpec::normal_random_effect(0.7, 4.0, 500).unwrap();
        let b = simulate_battery(&spec, &mut SeededRng::new(9)).unwrap();
        let grid = select_sigma_grid(b.z()).unwrap();
        let capped = em_fit(
            b.z(),
            &grid,
            &EmOptions {
                max_iter: 3,
                ..EmOptions::default()
            },
        )
        .unwrap();
        assert!(!capped.converged);
        assert_eq!(capped.iterations, 3);
        assert_eq!(capped.loglik_trace.len(), 4);
        let loose = em_fit(
            b.z(),
            &grid,
            &EmOptions {
                tol: 1e-2,
                ..EmOptions::default()
            },
        )
        .unwrap();
        assert!(loose.converged);
        assert!(em_fit(
            b.z(),
            &grid,
            &EmOptions {
                tol: 0.0,
                ..EmOptions::default()
            }
        )
        .is_err());
    }

    #[test]
    fn null_penalty_raises_pi0() {
        let spec = TwoGroupsSpec::normal_random_effect(0.8, 4.0, 2000).unwrap();
        let b = simulate_battery(&spec, &mut SeededRng::new(12)).unwrap();
        let grid = select_sigma_grid(b.z()).unwrap();
        let plain = em_fit(
            b.z(),
            &grid,
            &EmOptions {
                null_weight: 1.0,
                ..EmOptions::default()
            },
        )
        .unwrap();
        let penalised = em_fit(b.z(), &grid, &EmOptions::default()).unwrap();
        assert!(penalised.pi0_hat > plain.pi0_hat);
    }

    #[test]
    fn fitted_density_degenerate_and_closed_form() {
        let grid = SigmaGrid::new(vec![0.5, 1.0, 3.0]).unwrap();
        let null_fit = MixtureFit::from_parameters(1.0, vec![1.0, 1.0, 1.0], grid.clone()).unwrap();
        let d = fitted_mixture_density(&null_fit).unwrap();
        assert_eq!(d.components().len(), 1);
        assert_eq!(d.components()[0].1, DistFamily::standard_normal());

        let fit = MixtureFit::from_parameters(0.6, vec![0.2, 0.3, 0.5], grid.clone()).unwrap();
        let d = fitted_mixture_density(&fit).unwrap();
        let closed = 0.6 * 0.398_942_280_401_432_7
            + 0.4
                * [(0.2, 0.5), (0.3, 1.0), (0.5, 3.0)]
                    .iter()
                    .map(|(w, s): &(f64, f64)| {
                        w / (2.0 * std::f64::consts::PI * (1.0 + s * s)).sqrt()
                    })
                    .sum::<f64>();
        assert!((d.pdf(0.0) - closed).abs() < 1e-14);
        let total = oracle::integrate(|x| d.pdf(x), -50.0, 50.0, 1e-11);
        assert!((total - 1.0).abs() < 1e-6);
    }

    #[test]
    fn local_fdr_degenerate_and_symmetric() {
        let grid = SigmaGrid::new(vec![1.0, 2.0]).unwrap();
        let z = [-3.0, -0.5, 0.0, 0.5, 3.0, 40.0];
        let null_fit = MixtureFit::from_parameters(1.0, vec![0.5, 0.5], grid.clone()).unwrap();
        assert!(local_fdr(&z, &null_fit)
            .unwrap()
            .values()
            .iter()
            .all(|&u| u == 1.0));

        let fit = MixtureFit::from_parameters(0.7, vec![0.5, 0.5], grid).unwrap();
        let u = local_fdr(&z, &fit).unwrap();
        let neg: Vec<f64> = z.iter().map(|v| -v).collect();
        assert_eq!(u, local_fdr(&neg, &fit).unwrap());
        assert!(u.values().iter().all(|&v| (0.0..=1.0).contains(&v)));
    }

    #[test]
    fn local_fdr_at_truth_matches_oracle() {
        let k: f64 = 10.0;
        let grid = SigmaGrid::new(vec![k.sqrt()]).unwrap();
        let fit = MixtureFit::from_parameters(0.5, vec![1.0], grid).unwrap();
        let z: Vec<f64> = (-60..=60).map(|i| i as f64 / 8.0).collect();
        let u = local_fdr(&z, &fit).unwrap();
        for (zi, ui) in z.iter().zip(u.values()) {
            let expected = oracle_local_fdr(wakefield_bf(*zi, k).unwrap(), 0.5);
            assert!((ui - expected).abs() < 1e-10, "z={zi}");
        }
    }

    #[test]
    fn bayes_path_examples() {
        let path = bayes_path(
            &LocalFdrVector::new(vec![0.1, 0.01, 0.02]).unwrap(),
            "bayes",
        )
        .unwrap();
        let expected = [0.01, 0.015, 0.13 / 3.0];
        for (a, b) in path.fdr().iter().zip(expected) {
            assert!((a - b).abs() < 1e-15);
        }
        assert_eq!(path.indices(), &[1, 2, 0]);

        let flat = bayes_path(&LocalFdrVector::new(vec![0.3; 5]).unwrap(), "bayes").unwrap();
        assert!(flat.fdr().iter().all(|&v| (v - 0.3).abs() < 1e-15));

        let u = vec![0.9, 0.2, 0.05, 0.6, 0.33];
        let path = bayes_path(&LocalFdrVector::new(u.clone()).unwrap(), "bayes").unwrap();
        let mean = u.iter().sum::<f64>() / 5.0;
        assert!((path.fdr()[4] - mean).abs() < 1e-15);
        assert!(path.fdr().windows(2).all(|w| w[1] >= w[0]));
        assert!(LocalFdrVector::new(vec![1.2]).is_err());
    }
}
