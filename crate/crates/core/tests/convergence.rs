use fdrpath::freq::{pvalue_path, Pi0Estimate};
use fdrpath::grouped::{
    null_wlr_cdf, CdfMethod, GroupModel, GroupNullCdf, GroupSpec, DEFAULT_MC_DRAWS,
};
use fdrpath::peb::{bayes_path, em_fit, local_fdr, select_sigma_grid, EmOptions, LocalFdrVector};
use fdrpath::rpath::compare_paths;
use fdrpath::twogroups::simulate_battery;
use fdrpath::{DistFamily, SeededRng, TwoGroupsSpec};
use fdrpath_oracles as oracle;

const SIZES: [usize; 3] = [200, 2000, 20_000];

fn median_distance(m: usize, seeds: u64, f: impl Fn(&TwoGroupsSpec, u64) -> f64) -> f64 {
    let spec = TwoGroupsSpec::normal_random_effect(0.5, 10.0, m).unwrap();
    let d: Vec<f64> = (0..seeds).map(|s| f(&spec, s)).collect();
    oracle::median(&d)
}

#[test]
fn oracle_bayes_and_frequentist_paths_converge() {
    let dist = |spec: &TwoGroupsSpec, seed: u64| {
        let b = simulate_battery(spec, &mut SeededRng::new(seed)).unwrap();
        let u = LocalFdrVector::new(spec.oracle_local_fdrs(b.zsq())).unwrap();
        let bayes = bayes_path(&u, "bayes").unwrap();
        let freq = pvalue_path(
            b.pvalues(),
            Pi0Estimate::oracle(spec.pi0).unwrap(),
            "oracle",
        )
        .unwrap();
        compare_paths(&bayes, &freq).unwrap().sup_norm
    };
    let med: Vec<f64> = SIZES
        .iter()
        .map(|&m| median_distance(m, 10, dist))
        .collect();
    assert!(med.windows(2).all(|w| w[1] < w[0]), "{med:?}");
    assert!(med[2] <= 0.02, "{med:?}");
}

#[test]
fn fitted_bayes_path_approaches_expected_path() {
    let dist = |spec: &TwoGroupsSpec, seed: u64| {
        let b = simulate_battery(spec, &mut SeededRng::new(100 + seed)).unwrap();
        let grid = select_sigma_grid(b.z()).unwrap();
        let fit = em_fit(b.z(), &grid, &EmOptions::default()).unwrap();
        let bayes = bayes_path(&local_fdr(b.z(), &fit).unwrap(), "peb").unwrap();
        let expected = pvalue_path(
            b.pvalues(),
            Pi0Estimate::em_fit(fit.pi0_hat).unwrap(),
            "expected",
        )
        .unwrap();
        compare_paths(&bayes, &expected).unwrap().sup_norm
    };
    let med: Vec<f64> = SIZES
        .iter()
        .map(|&m| median_distance(m, 10, dist))
        .collect();
    assert!(med.windows(2).all(|w| w[1] < w[0]), "{med:?}");
}

#[test]
fn analytic_and_monte_carlo_null_wlr_cdfs_agree() {
    let spec = GroupSpec::new(vec![
        GroupModel {
            pi0: 0.8,
            null: DistFamily::ChiSquare1,
            alt: DistFamily::gamma(0.5, 2.0 * 6.0).unwrap(),
        },
        GroupModel {
            pi0: 0.4,
            null: DistFamily::ChiSquare1,
            alt: DistFamily::gamma(0.5, 2.0 * 21.0).unwrap(),
        },
    ])
    .unwrap();
    let analytic = null_wlr_cdf(&spec, CdfMethod::Analytic).unwrap();
    let mc = null_wlr_cdf(
        &spec,
        CdfMethod::MonteCarlo {
            n_mc: DEFAULT_MC_DRAWS,
            seed: 77,
        },
    )
    .unwrap();
    for (k, group) in mc.groups().iter().enumerate() {
        let GroupNullCdf::Empirical(draws) = group else {
            panic!("expected draws")
        };
        let sup = oracle::ecdf_sup_distance(draws, |t| analytic.cdf(k, t).unwrap());
        assert!(sup <= 2e-3, "group {k}: {sup}");
    }
}
