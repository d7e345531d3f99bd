//! The generative two-groups model on the z^2 scale.
//!
//! Each test is null with probability `pi0`. Its squared statistic comes from
//! the null or the alternative family, and the sign of `z` is drawn
//! independently afterwards, so the two-sided p-value of `z` is exactly the
//! chi-square(1) survival function at `z^2`.

use serde::{Deserialize, Serialize};

use crate::statdist::{DistFamily, Distribution, SeededRng};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TwoGroupsSpec {
    pub pi0: f64,
    /// Null law of z^2.
    pub null: DistFamily,
    /// Alternative law of z^2.
    pub alt: DistFamily,
    pub m: usize,
}

impl TwoGroupsSpec {
    pub fn new(pi0: f64, null: DistFamily, alt: DistFamily, m: usize) -> Result<Self> {
        let spec = Self { pi0, null, alt, m };
        spec.validate()?;
        Ok(spec)
    }

    /// The z-scale mixture `pi0 N(0,1) + (1-pi0) N(0, 1+k)` expressed on z^2.
    pub fn normal_random_effect(pi0: f64, k: f64, m: usize) -> Result<Self> {
        if !(k > 0.0) {
            return Err(Error::domain(
                "k",
                format!("effect variance must be positive, got {k}"),
            ));
        }
        Self::new(
            pi0,
            DistFamily::ChiSquare1,
            DistFamily::gamma(0.5, 2.0 * (1.0 + k))?,
            m,
        )
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.pi0) {
            return Err(Error::domain(
                "pi0",
                format!("must lie in [0, 1], got {}", self.pi0),
            ));
        }
        if self.m == 0 {
            return Err(Error::domain("m", "at least one test is required"));
        }
        for d in [&self.null, &self.alt] {
            d.validate()?;
            if d.as_gamma().is_none() {
                return Err(Error::domain(
                    "family",
                    "z^2-scale laws must be chi-square-1 or gamma",
                ));
            }
        }
        Ok(())
    }

    /// f1(z^2) / f0(z^2), which equals the z-scale density ratio for
    /// symmetric laws.
    pub fn bayes_factor(&self, zsq: f64) -> BayesFactor {
        BayesFactor(likelihood_ratio(&self.null, &self.alt, zsq))
    }

    /// Oracle local fdrs `Pr(null | z_i)` under the true model.
    pub fn oracle_local_fdrs(&self, zsq: &[f64]) -> Vec<f64> {
        zsq.iter()
            .map(|&x| oracle_local_fdr(self.bayes_factor(x), self.pi0))
            .collect()
    }
}

/// Ratio of two z^2-scale densities, evaluated in log space.
pub(crate) fn likelihood_ratio(null: &DistFamily, alt: &DistFamily, zsq: f64) -> f64 {
    // Both gamma-type densities may diverge at zero; the ratio has a limit.
    let x = if zsq > 0.0 { zsq } else { f64::MIN_POSITIVE };
    (alt.ln_pdf(x) - null.ln_pdf(x)).exp()
}

/// Observed statistics for `m` tests, with optional simulation truth and
/// group labels.
///
/// Inference routines take the `z`, `zsq`, `pvalue` and `group` slices only;
/// the truth is reachable through [`TestBattery::gamma_truth`] for evaluating
/// realised error rates.
#[derive(Debug, Clone, PartialEq)]
pub struct TestBattery {
    z: Vec<f64>,
    zsq: Vec<f64>,
    pvalue: Vec<f64>,
    gamma_truth: Option<Vec<bool>>,
    group: Option<Vec<usize>>,
}

impl TestBattery {
    /// Battery from signed z-scores under the theoretical N(0,1) null.
    pub fn from_z(z: Vec<f64>) -> Result<Self> {
        if z.is_empty() {
            return Err(Error::domain("z", "battery is empty"));
        }
        if let Some(i) = z.iter().position(|v| !v.is_finite()) {
            return Err(Error::domain("z", format!("non-finite value at index {i}")));
        }
        let zsq: Vec<f64> = z.iter().map(|v| v * v).collect();
        let pvalue = zsq.iter().map(|&x| DistFamily::ChiSquare1.sf(x)).collect();
        Ok(Self {
            z,
            zsq,
            pvalue,
            gamma_truth: None,
            group: None,
        })
    }

    /// Assemble from precomputed columns. All columns must have equal length.
    pub fn from_parts(
        z: Vec<f64>,
        zsq: Vec<f64>,
        pvalue: Vec<f64>,
        gamma_truth: Option<Vec<bool>>,
        group: Option<Vec<usize>>,
    ) -> Result<Self> {
        let m = z.len();
        if m == 0 {
            return Err(Error::domain("z", "battery is empty"));
        }
        for len in [zsq.len(), pvalue.len()]
            .into_iter()
            .chain(gamma_truth.as_ref().map(Vec::len))
            .chain(group.as_ref().map(Vec::len))
        {
            if len != m {
                return Err(Error::LengthMismatch {
                    left: m,
                    right: len,
                });
            }
        }
        if let Some(i) = pvalue.iter().position(|p| !(*p > 0.0 && *p <= 1.0)) {
            return Err(Error::domain(
                "pvalue",
                format!("must lie in (0, 1], got {} at index {i}", pvalue[i]),
            ));
        }
        Ok(Self {
            z,
            zsq,
            pvalue,
            gamma_truth,
            group,
        })
    }

    pub fn with_groups(mut self, group: Vec<usize>) -> Result<Self> {
        if group.len() != self.len() {
            return Err(Error::LengthMismatch {
                left: self.len(),
                right: group.len(),
            });
        }
        self.group = Some(group);
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.z.len()
    }

    pub fn is_empty(&self) -> bool {
        self.z.is_empty()
    }

    pub fn z(&self) -> &[f64] {
        &self.z
    }

    pub fn zsq(&self) -> &[f64] {
        &self.zsq
    }

    pub fn pvalues(&self) -> &[f64] {
        &self.pvalue
    }

    pub fn groups(&self) -> Option<&[usize]> {
        self.group.as_deref()
    }

    /// `true` marks an alternative.
    pub fn gamma_truth(&self) -> Option<&[bool]> {
        self.gamma_truth.as_deref()
    }
}

/// Draw a battery from `spec`.
///
/// Draw order is fixed: all latent indicators, then all z^2 values, then all
/// signs.
pub fn simulate_battery(spec: &TwoGroupsSpec, rng: &mut SeededRng) -> Result<TestBattery> {
    spec.validate()?;
    let truth: Vec<bool> = (0..spec.m).map(|_| rng.uniform() >= spec.pi0).collect();
    let zsq: Vec<f64> = truth
        .iter()
        .map(|&alt| {
            if alt {
                spec.alt.draw(rng)
            } else {
                spec.null.draw(rng)
            }
        })
        .collect();
    let z = sign_randomize(&zsq, rng)?;
    let pvalue = zsq.iter().map(|&x| spec.null.sf(x)).collect();
    Ok(TestBattery {
        z,
        zsq,
        pvalue,
        gamma_truth: Some(truth),
        group: None,
    })
}

/// `z_i = s_i * sqrt(zsq_i)` with independent fair signs `s_i`.
pub fn sign_randomize(zsq: &[f64], rng: &mut SeededRng) -> Result<Vec<f64>> {
    if let Some(i) = zsq.iter().position(|v| !(*v >= 0.0)) {
        return Err(Error::domain(
            "zsq",
            format!("must be non-negative, got {} at index {i}", zsq[i]),
        ));
    }
    Ok(zsq.iter().map(|&x| rng.sign() * x.sqrt()).collect())
}

/// A marginal likelihood ratio `f1(z) / f0(z)`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct BayesFactor(pub f64);

impl BayesFactor {
    pub fn value(self) -> f64 {
        self.0
    }
}

/// Bayes factor of N(0, 1+k) against N(0, 1) at `z`.
pub fn wakefield_bf(z: f64, k: f64) -> Result<BayesFactor> {
    if !(k >= 0.0) || !k.is_finite() {
        return Err(Error::domain("k", format!("must be non-negative, got {k}")));
    }
    if k == 0.0 {
        return Ok(BayesFactor(1.0));
    }
    let shrink = k / (1.0 + k);
    Ok(BayesFactor(
        (0.5 * shrink * z * z - 0.5 * (1.0 + k).ln()).exp(),
    ))
}

/// `pi0 / (pi0 + (1 - pi0) BF)`.
pub fn oracle_local_fdr(bf: BayesFactor, pi0: f64) -> f64 {
    if pi0 >= 1.0 {
        return 1.0;
    }
    let denom = pi0 + (1.0 - pi0) * bf.0;
    if denom.is_infinite() {
        return 0.0;
    }
    if denom == 0.0 {
        // pi0 = 0 and BF = 0
        return 0.0;
    }
    (pi0 / denom).clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use fdrpath_oracles as oracle;
    use proptest::prelude::*;

    #[test]
    fn all_null_battery_has_uniform_pvalues() {
        let spec = TwoGroupsSpec::new(
            1.0,
            DistFamily::ChiSquare1,
            DistFamily::gamma(0.5, 22.0).unwrap(),
            10_000,
        )
        .unwrap();
        let b = simulate_battery(&spec, &mut SeededRng::new(3)).unwrap();
        assert!(b.gamma_truth().unwrap().iter().all(|&g| !g));
        let (_, p) = oracle::ks_one_sample(b.pvalues(), |x| x.clamp(0.0, 1.0));
        assert!(p > 0.01, "KS p {p}");
    }

    #[test]
    fn alternative_fraction_matches_pi0() {
        let spec = TwoGroupsSpec::new(
            0.55,
            DistFamily::ChiSquare1,
            DistFamily::gamma(0.5, 22.0).unwrap(),
            20_000,
        )
        .unwrap();
        let b = simulate_battery(&spec, &mut SeededRng::new(8)).unwrap();
        let frac = b.gamma_truth().unwrap().iter().filter(|&&g| g).count() as f64 / 20_000.0;
        let tol = 3.0 * (0.55 * 0.45 / 20_000.0_f64).sqrt();
        assert!((frac - 0.45).abs() < tol, "fraction {frac}");
    }

    #[test]
    fn random_effect_spec_is_gamma_on_zsq() {
        let spec = TwoGroupsSpec::normal_random_effect(0.5, 10.0, 1000).unwrap();
        assert_eq!(spec.alt, DistFamily::gamma(0.5, 22.0).unwrap());
        assert_eq!(spec.null, DistFamily::ChiSquare1);
        // oracle BF from densities equals the closed form
        for z in [0.0_f64, 0.5, 2.0, 4.0] {
            let a = spec.bayes_factor(z * z).value();
            let b = wakefield_bf(z, 10.0).unwrap().value();
            assert!((a - b).abs() < 1e-12 * b.max(1.0), "z={z}");
        }
    }

    #[test]
    fn battery_invariants_hold() {
        let spec = TwoGroupsSpec::normal_random_effect(0.5, 10.0, 5000).unwrap();
        let b = simulate_battery(&spec, &mut SeededRng::new(1)).unwrap();
        for i in 0..b.len() {
            assert!((b.z()[i] * b.z()[i] - b.zsq()[i]).abs() <= 1e-12 * b.zsq()[i].max(1.0));
            let p = DistFamily::ChiSquare1.sf(b.zsq()[i]);
            assert!((b.pvalues()[i] - p).abs() < 1e-12);
        }
    }

    #[test]
    fn sign_of_four_is_two() {
        let z = sign_randomize(&[4.0], &mut SeededRng::new(0)).unwrap();
        assert!(z[0] == 2.0 || z[0] == -2.0);
    }

    #[test]
    fn signs_are_balanced() {
        let m = 100_000;
        let z = sign_randomize(&vec![1.0; m], &mut SeededRng::new(17)).unwrap();
        let mean = z.iter().sum::<f64>() / m as f64;
        assert!(mean.abs() < 3.0 / (m as f64).sqrt());
    }

    #[test]
    fn two_sided_p_of_signed_root_equals_chi_square_sf() {
        let zsq = DistFamily::gamma(0.3, 22.0)
            .unwrap()
            .sample(2000, &mut SeededRng::new(2))
            .unwrap();
        let z = sign_randomize(&zsq, &mut SeededRng::new(4)).unwrap();
        for (zi, xi) in z.iter().zip(&zsq) {
            let p_z = crate::freq::pvalue_two_sided(*zi);
            assert!((p_z - DistFamily::ChiSquare1.sf(*xi)).abs() < 1e-12);
        }
    }

    #[test]
    fn negative_zsq_is_rejected() {
        assert!(matches!(
            sign_randomize(&[1.0, -0.1], &mut SeededRng::new(0)),
            Err(Error::Domain { .. })
        ));
    }

    #[test]
    fn wakefield_examples() {
        assert_eq!(wakefield_bf(3.7, 0.0).unwrap().value(), 1.0);
        let at0 = wakefield_bf(0.0, 10.0).unwrap().value();
        assert!((at0 - 1.0 / 11f64.sqrt()).abs() < 1e-12);
        assert!((at0 - 0.301_511).abs() < 1e-6);
        let at2 = wakefield_bf(2.0, 10.0).unwrap().value();
        // density-ratio cross-check
        let alt = DistFamily::normal(0.0, 11f64.sqrt()).unwrap();
        let null = DistFamily::standard_normal();
        assert!((at2 - alt.pdf(2.0) / null.pdf(2.0)).abs() < 1e-12);
        assert!((at2 - 1.8575).abs() < 1e-4, "{at2}");
        assert!(wakefield_bf(1.0, -0.5).is_err());
    }

    #[test]
    fn oracle_local_fdr_examples() {
        assert_eq!(oracle_local_fdr(BayesFactor(1.0), 0.5), 0.5);
        assert_eq!(oracle_local_fdr(BayesFactor(123.0), 1.0), 1.0);
        assert_eq!(oracle_local_fdr(BayesFactor(3.0), 0.5), 0.25);
        assert_eq!(oracle_local_fdr(BayesFactor(f64::INFINITY), 0.5), 0.0);
    }

    #[test]
    fn mixture_cdf_of_simulated_zsq_converges() {
        let spec = TwoGroupsSpec::new(
            0.6,
            DistFamily::ChiSquare1,
            DistFamily::gamma(0.7, 22.0).unwrap(),
            100_000,
        )
        .unwrap();
        let b = simulate_battery(&spec, &mut SeededRng::new(99)).unwrap();
        let sup =
            oracle::ecdf_sup_distance(b.zsq(), |x| 0.6 * spec.null.cdf(x) + 0.4 * spec.alt.cdf(x));
        assert!(sup < 0.01, "sup {sup}");
    }

    proptest! {
        #[test]
        fn bf_rank_reverses_pvalue_rank(z in prop::collection::vec(-8.0f64..8.0, 2..60), k in 0.1f64..50.0) {
            let bf: Vec<f64> = z.iter().map(|&v| wakefield_bf(v, k).unwrap().value()).collect();
            let p: Vec<f64> = z.iter().map(|&v| crate::freq::pvalue_two_sided(v)).collect();
            let neg_p: Vec<f64> = p.iter().map(|v| -v).collect();
            prop_assert_eq!(oracle::naive_ranks(&bf), oracle::naive_ranks(&neg_p));
        }

        #[test]
        fn local_fdr_is_monotone_in_zsq(a in 0.0f64..60.0, b in 0.0f64..60.0, k in 0.1f64..50.0, pi0 in 0.01f64..0.99) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            let u_lo = oracle_local_fdr(wakefield_bf(lo.sqrt(), k).unwrap(), pi0);
            let u_hi = oracle_local_fdr(wakefield_bf(hi.sqrt(), k).unwrap(), pi0);
            prop_assert!(u_hi <= u_lo);
        }
    }
}
