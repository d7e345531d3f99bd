//! Frequentist FDR machinery: two-sided p-values, quantile estimators of the
//! null proportion, and Benjamini-Hochberg / q-value rejection paths built
//! from the asymptotic estimate `m * pi0 * t / max(1, #{p_i <= t})`.

use serde::{Deserialize, Serialize};

use crate::rpath::{ascending_order, tie_group_ends, RejectionPath};
use crate::statdist::{DistFamily, Distribution};
use crate::{Error, Result};

/// Where a null-proportion value came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Pi0Source {
    QuantileOfP,
    QuantileOfZsq,
    FixedOne,
    EmFit,
    /// The true simulation value.
    Oracle,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pi0Estimate {
    pub value: f64,
    /// Tuning quantile for the quantile estimators.
    pub eta: Option<f64>,
    pub source: Pi0Source,
}

impl Pi0Estimate {
    pub fn fixed_one() -> Self {
        Self {
            value: 1.0,
            eta: None,
            source: Pi0Source::FixedOne,
        }
    }

    pub fn oracle(value: f64) -> Result<Self> {
        Self::checked(value, None, Pi0Source::Oracle)
    }

    pub fn em_fit(value: f64) -> Result<Self> {
        Self::checked(value, None, Pi0Source::EmFit)
    }

    fn checked(value: f64, eta: Option<f64>, source: Pi0Source) -> Result<Self> {
        if !(value > 0.0 && value <= 1.0) {
            return Err(Error::domain(
                "pi0",
                format!("must lie in (0, 1], got {value}"),
            ));
        }
        Ok(Self { value, eta, source })
    }
}

/// Two-sided normal p-value, computed as the chi-square(1) survival
/// function at `z^2`.
pub fn pvalue_two_sided(z: f64) -> f64 {
    DistFamily::ChiSquare1.sf(z * z)
}

fn check_eta(eta: f64) -> Result<()> {
    if !(eta > 0.0 && eta < 1.0) {
        return Err(Error::domain(
            "eta",
            format!("must lie in (0, 1), got {eta}"),
        ));
    }
    Ok(())
}

/// `min(1, #{p_i >= eta} / (m (1 - eta)))`, an upper-bound estimate of pi0.
pub fn pi0_quantile_estimate(pvalues: &[f64], eta: f64) -> Result<Pi0Estimate> {
    check_eta(eta)?;
    if pvalues.is_empty() {
        return Err(Error::domain("pvalues", "no p-values supplied"));
    }
    let m = pvalues.len() as f64;
    let above = pvalues.iter().filter(|&&p| p >= eta).count() as f64;
    // An empty upper tail would give zero; count at least one to stay in (0, 1].
    let value = (above.max(1.0) / (m * (1.0 - eta))).min(1.0);
    Ok(Pi0Estimate {
        value,
        eta: Some(eta),
        source: Pi0Source::QuantileOfP,
    })
}

/// `min(1, #{z_i^2 <= q_eta} / (m eta))` where `q_eta` is the eta-quantile of
/// chi-square(1). Agrees with [`pi0_quantile_estimate`] at level `1 - eta`
/// on the induced two-sided p-values.
pub fn pi0_zsq_estimate(zsq: &[f64], eta: f64) -> Result<Pi0Estimate> {
    check_eta(eta)?;
    if zsq.is_empty() {
        return Err(Error::domain("zsq", "no statistics supplied"));
    }
    let threshold = DistFamily::ChiSquare1.quantile(eta)?;
    let m = zsq.len() as f64;
    let below = zsq.iter().filter(|&&x| x <= threshold).count() as f64;
    let value = (below.max(1.0) / (m * eta)).min(1.0);
    Ok(Pi0Estimate {
        value,
        eta: Some(eta),
        source: Pi0Source::QuantileOfZsq,
    })
}

/// Raw (unclamped) estimate `m * pi0 * t / max(1, #{p_i <= t})`.
pub fn fdr_estimate_at(t: f64, pvalues: &[f64], pi0: &Pi0Estimate) -> Result<f64> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::domain(
            "t",
            format!("threshold must lie in [0, 1], got {t}"),
        ));
    }
    let m = pvalues.len() as f64;
    let rejected = pvalues.iter().filter(|&&p| p <= t).count().max(1) as f64;
    Ok(m * pi0.value * t / rejected)
}

fn check_pvalues(pvalues: &[f64]) -> Result<()> {
    if pvalues.is_empty() {
        return Err(Error::domain("pvalues", "no p-values supplied"));
    }
    if let Some(i) = pvalues.iter().position(|p| !(*p > 0.0 && *p <= 1.0)) {
        return Err(Error::domain(
            "pvalue",
            format!("must lie in (0, 1], got {} at index {i}", pvalues[i]),
        ));
    }
    Ok(())
}

/// p-value rejection path with a given null proportion:
/// `fdr_i = pi0 * min(1, m p_(i) / #{p <= p_(i)})`.
///
/// Tied p-values share the value computed at the end of their tie group.
pub fn pvalue_path(pvalues: &[f64], pi0: Pi0Estimate, label: &str) -> Result<RejectionPath> {
    check_pvalues(pvalues)?;
    let m = pvalues.len() as f64;
    let order = ascending_order(pvalues);
    let sorted: Vec<f64> = order.iter().map(|&i| pvalues[i]).collect();
    let ends = tie_group_ends(&sorted);
    let fdr = sorted
        .iter()
        .zip(&ends)
        .map(|(&p, &end)| pi0.value * (m * p / end as f64).min(1.0))
        .collect();
    RejectionPath::new(label, order, sorted, fdr, Some(pi0))
}

/// Benjamini-Hochberg path (pi0 = 1).
pub fn bh_path(pvalues: &[f64]) -> Result<RejectionPath> {
    pvalue_path(pvalues, Pi0Estimate::fixed_one(), "bh")
}

/// q-value path: the BH path scaled by the quantile estimate of pi0.
pub fn qvalue_path(pvalues: &[f64], eta: f64) -> Result<RejectionPath> {
    check_pvalues(pvalues)?;
    let pi0 = pi0_quantile_estimate(pvalues, eta)?;
    pvalue_path(pvalues, pi0, "qvalue")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rpath::{compare_paths, cutoff_at_level};
    use crate::statdist::SeededRng;
    use crate::twogroups::{simulate_battery, TwoGroupsSpec};
    use fdrpath_oracles as oracle;
    use proptest::prelude::*;

    #[test]
    fn two_sided_pvalues() {
        assert_eq!(pvalue_two_sided(0.0), 1.0);
        assert!((pvalue_two_sided(1.959_964) - 0.05).abs() < 1e-7);
        assert_eq!(pvalue_two_sided(-1.959_964), pvalue_two_sided(1.959_964));
    }

    #[test]
    fn quantile_estimate_hand_example() {
        let est = pi0_quantile_estimate(&[0.1, 0.2, 0.6, 0.8], 0.5).unwrap();
        assert_eq!(est.value, 1.0);
        assert_eq!(est.eta, Some(0.5));
        assert!(pi0_quantile_estimate(&[], 0.5).is_err());
        assert!(pi0_quantile_estimate(&[0.3], 1.0).is_err());
    }

    #[test]
    fn null_only_estimate_near_one() {
        let spec = TwoGroupsSpec::normal_random_effect(1.0, 10.0, 10_000).unwrap();
        let b = simulate_battery(&spec, &mut SeededRng::new(21)).unwrap();
        let est = pi0_quantile_estimate(b.pvalues(), 0.5).unwrap();
        assert!((est.value - 1.0).abs() < 0.05);
    }

    #[test]
    fn zsq_estimate_examples() {
        let q = DistFamily::ChiSquare1.quantile(0.5).unwrap();
        assert!((q - 0.454_936).abs() < 1e-6);
        assert_eq!(
            pi0_zsq_estimate(&[0.1, 0.2, 5.0, 9.0], 0.5).unwrap().value,
            1.0
        );
        assert_eq!(pi0_zsq_estimate(&[0.0; 10], 0.5).unwrap().value, 1.0);
        assert!(pi0_zsq_estimate(&[], 0.5).is_err());
    }

    #[test]
    fn zsq_estimate_equals_pvalue_estimate_on_random_batteries() {
        let mut rng = SeededRng::new(1234);
        for rep in 0..1000 {
            let shape = 0.1 + 0.9 * rng.uniform();
            let pi0 = rng.uniform();
            let spec = TwoGroupsSpec::new(
                pi0,
                DistFamily::ChiSquare1,
                DistFamily::gamma(shape, 22.0).unwrap(),
                50 + rep % 200,
            )
            .unwrap();
            let b = simulate_battery(&spec, &mut rng.child(rep as u64)).unwrap();
            let a = pi0_zsq_estimate(b.zsq(), 0.5).unwrap().value;
            let c = pi0_quantile_estimate(b.pvalues(), 0.5).unwrap().value;
            assert_eq!(a, c, "replicate {rep}");
            let eta = 0.05 + 0.9 * rng.uniform();
            let a = pi0_zsq_estimate(b.zsq(), eta).unwrap().value;
            let c = pi0_quantile_estimate(b.pvalues(), 1.0 - eta).unwrap().value;
            // same counts; denominators m*eta and m*(1-(1-eta)) may differ by an ulp
            assert!((a - c).abs() <= 1e-14, "replicate {rep}, eta {eta}");
        }
    }

    #[test]
    fn fdr_estimate_examples() {
        let mut p = vec![0.5; 100];
        for v in p.iter_mut().take(5) {
            *v = 0.001;
        }
        let one = Pi0Estimate::fixed_one();
        assert!((fdr_estimate_at(0.01, &p, &one).unwrap() - 0.2).abs() < 1e-15);
        assert_eq!(fdr_estimate_at(0.0, &p, &one).unwrap(), 0.0);
        assert!((fdr_estimate_at(0.0001, &p, &one).unwrap() - 0.01).abs() < 1e-15);
        assert!(fdr_estimate_at(1.5, &p, &one).is_err());
    }

    #[test]
    fn bh_path_hand_example() {
        let path = bh_path(&[0.01, 0.02, 0.5]).unwrap();
        let expected = [0.03, 0.03, 0.5];
        for (a, b) in path.fdr().iter().zip(expected) {
            assert!((a - b).abs() < 1e-15);
        }
        assert_eq!(cutoff_at_level(&path, 0.05).unwrap(), 2);
        assert_eq!(
            cutoff_at_level(&bh_path(&[0.04]).unwrap(), 0.05).unwrap(),
            1
        );
        assert!(bh_path(&[0.1, 0.0]).is_err());
        assert!(bh_path(&[1.2]).is_err());
    }

    #[test]
    fn qvalue_path_hand_example() {
        let path = qvalue_path(&[0.01, 0.02, 0.5], 0.5).unwrap();
        let pi0 = path.pi0_used().unwrap().value;
        assert!((pi0 - 2.0 / 3.0).abs() < 1e-15);
        let expected = [0.02, 0.02, 1.0 / 3.0];
        for (a, b) in path.fdr().iter().zip(expected) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn qvalue_is_bh_when_estimate_is_one() {
        let p = [0.3, 0.6, 0.7, 0.9, 0.55];
        assert_eq!(pi0_quantile_estimate(&p, 0.5).unwrap().value, 1.0);
        assert_eq!(
            qvalue_path(&p, 0.5).unwrap().fdr(),
            bh_path(&p).unwrap().fdr()
        );
    }

    #[test]
    fn qvalue_over_bh_ratio_is_constant() {
        let spec = TwoGroupsSpec::normal_random_effect(0.6, 10.0, 3000).unwrap();
        let b = simulate_battery(&spec, &mut SeededRng::new(77)).unwrap();
        let bh = bh_path(b.pvalues()).unwrap();
        let q = qvalue_path(b.pvalues(), 0.5).unwrap();
        let pi0 = q.pi0_used().unwrap().value;
        assert!(pi0 < 1.0);
        let cmp = compare_paths(&q, &bh).unwrap();
        for r in cmp.ratio.iter().flatten() {
            assert!((r - pi0).abs() < 1e-12);
        }
    }

    #[test]
    fn ties_share_a_path_value() {
        let path = bh_path(&[0.02, 0.01, 0.02, 0.5]).unwrap();
        assert_eq!(path.indices(), &[1, 0, 2, 3]);
        assert_eq!(path.fdr()[1], path.fdr()[2]);
        assert!((path.fdr()[1] - 0.04 / 3.0 * 2.0).abs() < 1e-15);
    }

    #[test]
    fn bh_cutoff_equals_step_up_on_random_instances() {
        let mut rng = SeededRng::new(4242);
        let alphas = [0.01, 0.02, 0.05, 0.1, 0.15, 0.2];
        for rep in 0..1000 {
            let m = 1 + (rng.uniform() * 20.0) as usize;
            let p: Vec<f64> = (0..m)
                .map(|_| {
                    let u = rng.uniform();
                    // mix in small p-values and exact ties
                    if u < 0.3 {
                        (u * 0.05).max(1e-6)
                    } else if u < 0.4 {
                        0.01
                    } else {
                        u
                    }
                })
                .collect();
            let path = bh_path(&p).unwrap();
            for alpha in alphas {
                assert_eq!(
                    cutoff_at_level(&path, alpha).unwrap(),
                    oracle::step_up_count(&p, alpha),
                    "replicate {rep}, alpha {alpha}, p {p:?}"
                );
            }
        }
    }

    proptest! {
        #[test]
        fn estimate_non_increasing_in_rejections(t in 0.0f64..1.0, extra in 0usize..50) {
            let mut p = vec![0.99; 60];
            let base = fdr_estimate_at(t, &p, &Pi0Estimate::fixed_one()).unwrap();
            for v in p.iter_mut().take(extra) { *v = t.max(1e-9) / 2.0; }
            let more = fdr_estimate_at(t, &p, &Pi0Estimate::fixed_one()).unwrap();
            prop_assert!(more <= base);
        }

        #[test]
        fn pi0_estimates_stay_in_unit_interval(p in prop::collection::vec(1e-12f64..=1.0, 1..100), eta in 0.01f64..0.99) {
            let v = pi0_quantile_estimate(&p, eta).unwrap().value;
            prop_assert!(v > 0.0 && v <= 1.0);
        }
    }
}
