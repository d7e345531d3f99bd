//! Distribution kernel: the normal, chi-square(1) and gamma families, finite
//! mixtures of them, and a seeded random number generator.
//!
//! Evaluation is pure. Sampling always takes an explicit [`SeededRng`]; there
//! is no global generator.

use libm::{erf, erfc};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution as _, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::{gamma_lr, gamma_ur, ln_gamma};

use crate::{Error, Result};

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Density, distribution and quantile functions of a univariate law.
pub trait Distribution {
    fn pdf(&self, x: f64) -> f64;

    fn cdf(&self, x: f64) -> f64;

    fn sf(&self, x: f64) -> f64 {
        1.0 - self.cdf(x)
    }

    /// Closed support interval, possibly with infinite ends.
    fn support(&self) -> (f64, f64);

    /// Inverse cdf by bracketed Newton iteration with bisection fallback.
    fn quantile(&self, p: f64) -> Result<f64> {
        invert_cdf(self, p)
    }
}

/// What [`dist_eval`] should compute.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvalKind {
    Pdf,
    Cdf,
    Sf,
    Quantile,
}

/// Evaluate `d` at `x` with domain checking.
pub fn dist_eval<D: Distribution + ?Sized>(d: &D, x: f64, kind: EvalKind) -> Result<f64> {
    if x.is_nan() {
        return Err(Error::domain("x", "NaN argument"));
    }
    match kind {
        EvalKind::Pdf => Ok(d.pdf(x)),
        EvalKind::Cdf => Ok(d.cdf(x)),
        EvalKind::Sf => Ok(d.sf(x)),
        EvalKind::Quantile => d.quantile(x),
    }
}

/// A parametric family member. On the z^2 scale the chi-square(1) law is the
/// theoretical null and gamma laws describe alternatives.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DistFamily {
    Normal {
        mean: f64,
        sd: f64,
    },
    #[serde(rename = "chi-square-1")]
    ChiSquare1,
    Gamma {
        shape: f64,
        scale: f64,
    },
}

impl DistFamily {
    pub fn normal(mean: f64, sd: f64) -> Result<Self> {
        let d = DistFamily::Normal { mean, sd };
        d.validate()?;
        Ok(d)
    }

    pub fn standard_normal() -> Self {
        DistFamily::Normal { mean: 0.0, sd: 1.0 }
    }

    pub fn gamma(shape: f64, scale: f64) -> Result<Self> {
        let d = DistFamily::Gamma { shape, scale };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            DistFamily::Normal { mean, sd } => {
                if !mean.is_finite() {
                    return Err(Error::domain("mean", format!("must be finite, got {mean}")));
                }
                if !(sd > 0.0 && sd.is_finite()) {
                    return Err(Error::domain("sd", format!("must be positive, got {sd}")));
                }
            }
            DistFamily::ChiSquare1 => {}
            DistFamily::Gamma { shape, scale } => {
                if !(shape > 0.0 && shape.is_finite()) {
                    return Err(Error::domain(
                        "shape",
                        format!("must be positive, got {shape}"),
                    ));
                }
                if !(scale > 0.0 && scale.is_finite()) {
                    return Err(Error::domain(
                        "scale",
                        format!("must be positive, got {scale}"),
                    ));
                }
            }
        }
        Ok(())
    }

    /// Gamma (shape, scale) view of the non-negative families.
    pub fn as_gamma(&self) -> Option<(f64, f64)> {
        match *self {
            DistFamily::ChiSquare1 => Some((0.5, 2.0)),
            DistFamily::Gamma { shape, scale } => Some((shape, scale)),
            DistFamily::Normal { .. } => None,
        }
    }

    pub fn ln_pdf(&self, x: f64) -> f64 {
        match *self {
            DistFamily::Normal { mean, sd } => {
                let u = (x - mean) / sd;
                -0.5 * u * u - sd.ln() - LN_SQRT_2PI
            }
            _ => {
                let (k, theta) = self.as_gamma().unwrap();
                if x < 0.0 {
                    return f64::NEG_INFINITY;
                }
                if x == 0.0 {
                    return match k.partial_cmp(&1.0).unwrap() {
                        std::cmp::Ordering::Less => f64::INFINITY,
                        std::cmp::Ordering::Equal => -theta.ln(),
                        std::cmp::Ordering::Greater => f64::NEG_INFINITY,
                    };
                }
                (k - 1.0) * x.ln() - x / theta - ln_gamma(k) - k * theta.ln()
            }
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            DistFamily::Normal { mean, .. } => mean,
            DistFamily::ChiSquare1 => 1.0,
            DistFamily::Gamma { shape, scale } => shape * scale,
        }
    }

    /// Draw `n` values.
    pub fn sample(&self, n: usize, rng: &mut SeededRng) -> Result<Vec<f64>> {
        if n == 0 {
            return Err(Error::domain("n", "sample size must be at least 1"));
        }
        self.validate()?;
        let mut out = Vec::with_capacity(n);
        match *self {
            DistFamily::Normal { mean, sd } => {
                for _ in 0..n {
                    out.push(mean + sd * rng.standard_normal());
                }
            }
            DistFamily::ChiSquare1 => {
                for _ in 0..n {
                    let z = rng.standard_normal();
                    out.push(z * z);
                }
            }
            DistFamily::Gamma { shape, scale } => {
                let g =
                    Gamma::new(shape, scale).map_err(|e| Error::domain("shape", e.to_string()))?;
                for _ in 0..n {
                    out.push(g.sample(rng));
                }
            }
        }
        Ok(out)
    }

    /// A single draw; parameters must already be valid.
    pub(crate) fn draw(&self, rng: &mut SeededRng) -> f64 {
        match *self {
            DistFamily::Normal { mean, sd } => mean + sd * rng.standard_normal(),
            DistFamily::ChiSquare1 => {
                let z = rng.standard_normal();
                z * z
            }
            DistFamily::Gamma { shape, scale } => Gamma::new(shape, scale)
                .expect("validated gamma parameters")
                .sample(rng),
        }
    }
}

/// Sampling entry point mirroring [`dist_eval`].
/// Linear-interpolation sample quantile (R type 7) of ascending `sorted`.
///
/// `sorted` must be non-empty and `p` in [0, 1].
pub fn sample_quantile(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn dist_sample(d: &DistFamily, n: usize, rng: &mut SeededRng) -> Result<Vec<f64>> {
    d.sample(n, rng)
}

impl Distribution for DistFamily {
    fn pdf(&self, x: f64) -> f64 {
        self.ln_pdf(x).exp()
    }

    fn cdf(&self, x: f64) -> f64 {
        match *self {
            DistFamily::Normal { mean, sd } => {
                0.5 * erfc(-(x - mean) / (sd * std::f64::consts::SQRT_2))
            }
            DistFamily::ChiSquare1 => {
                if x <= 0.0 {
                    0.0
                } else {
                    erf((0.5 * x).sqrt())
                }
            }
            DistFamily::Gamma { shape, scale } => {
                if x <= 0.0 {
                    0.0
                } else if x.is_infinite() {
                    1.0
                } else {
                    gamma_lr(shape, x / scale)
                }
            }
        }
    }

    fn sf(&self, x: f64) -> f64 {
        match *self {
            DistFamily::Normal { mean, sd } => {
                0.5 * erfc((x - mean) / (sd * std::f64::consts::SQRT_2))
            }
            DistFamily::ChiSquare1 => {
                if x <= 0.0 {
                    1.0
                } else {
                    erfc((0.5 * x).sqrt())
                }
            }
            DistFamily::Gamma { shape, scale } => {
                if x <= 0.0 {
                    1.0
                } else if x.is_infinite() {
                    0.0
                } else {
                    gamma_ur(shape, x / scale)
                }
            }
        }
    }

    fn support(&self) -> (f64, f64) {
        match self {
            DistFamily::Normal { .. } => (f64::NEG_INFINITY, f64::INFINITY),
            _ => (0.0, f64::INFINITY),
        }
    }
}

/// Finite mixture `sum_j w_j * f_j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureDensity {
    components: Vec<(f64, DistFamily)>,
}

impl MixtureDensity {
    /// Weights must be non-negative and sum to one within 1e-12.
    pub fn new(components: Vec<(f64, DistFamily)>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::domain(
                "components",
                "mixture needs at least one component",
            ));
        }
        let mut total = 0.0;
        for (w, d) in &components {
            if !(*w >= 0.0 && w.is_finite()) {
                return Err(Error::domain(
                    "weight",
                    format!("must be non-negative, got {w}"),
                ));
            }
            d.validate()?;
            total += w;
        }
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::domain(
                "weight",
                format!("weights sum to {total}, not 1"),
            ));
        }
        Ok(Self { components })
    }

    /// Build from weights that are only approximately normalised.
    pub fn normalized(components: Vec<(f64, DistFamily)>) -> Result<Self> {
        let total: f64 = components.iter().map(|(w, _)| *w).sum();
        if !(total > 0.0 && total.is_finite()) {
            return Err(Error::domain("weight", format!("weights sum to {total}")));
        }
        Self::new(
            components
                .into_iter()
                .map(|(w, d)| (w / total, d))
                .collect(),
        )
    }

    pub fn components(&self) -> &[(f64, DistFamily)] {
        &self.components
    }

    pub fn sample(&self, n: usize, rng: &mut SeededRng) -> Result<Vec<f64>> {
        if n == 0 {
            return Err(Error::domain("n", "sample size must be at least 1"));
        }
        let mut cumulative = Vec::with_capacity(self.components.len());
        let mut acc = 0.0;
        for (w, _) in &self.components {
            acc += w;
            cumulative.push(acc);
        }
        Ok((0..n)
            .map(|_| {
                let u = rng.uniform() * acc;
                let j = cumulative
                    .iter()
                    .position(|&c| u < c)
                    .unwrap_or(self.components.len() - 1);
                self.components[j].1.draw(rng)
            })
            .collect())
    }
}

impl Distribution for MixtureDensity {
    fn pdf(&self, x: f64) -> f64 {
        self.components.iter().map(|(w, d)| w * d.pdf(x)).sum()
    }

    fn cdf(&self, x: f64) -> f64 {
        self.components.iter().map(|(w, d)| w * d.cdf(x)).sum()
    }

    fn sf(&self, x: f64) -> f64 {
        self.components.iter().map(|(w, d)| w * d.sf(x)).sum()
    }

    fn support(&self) -> (f64, f64) {
        self.components
            .iter()
            .map(|(_, d)| d.support())
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (a, b)| {
                (lo.min(a), hi.max(b))
            })
    }
}

const QUANTILE_TOL: f64 = 1e-10;

/// Solve `cdf(x) = p` on the support of `d`.
pub fn invert_cdf<D: Distribution + ?Sized>(d: &D, p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::domain(
            "probability",
            format!("must lie in (0, 1), got {p}"),
        ));
    }
    let (support_lo, support_hi) = d.support();

    // Bracket [lo, hi] with cdf(lo) < p <= cdf(hi).
    let mut lo = if support_lo.is_finite() {
        support_lo
    } else {
        -1.0
    };
    let mut step = 1.0;
    while support_lo.is_infinite() && d.cdf(lo) >= p {
        lo -= step;
        step *= 2.0;
        if lo < -1e300 {
            return Err(Error::numeric(
                None,
                "failed to bracket quantile from below",
            ));
        }
    }
    let mut hi = if support_lo.is_finite() {
        support_lo + 1.0
    } else {
        1.0
    };
    step = 1.0;
    while d.cdf(hi) < p {
        lo = lo.max(hi);
        hi += step;
        step *= 2.0;
        if hi > 1e300 || hi > support_hi {
            return Err(Error::numeric(
                None,
                "failed to bracket quantile from above",
            ));
        }
    }

    let mut x = 0.5 * (lo + hi);
    for _ in 0..400 {
        let f = d.cdf(x) - p;
        if f == 0.0 {
            return Ok(x);
        }
        if f < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let density = d.pdf(x);
        let newton = x - f / density;
        let next = if density > 0.0 && newton.is_finite() && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        let scale = next.abs().max(f64::MIN_POSITIVE);
        if (next - x).abs() <= QUANTILE_TOL * 1e-4 * scale || hi - lo <= QUANTILE_TOL * 1e-4 * scale
        {
            return Ok(next);
        }
        x = next;
    }
    Ok(x)
}

/// Deterministic ChaCha8 generator with an explicit 64-bit seed.
///
/// Child generators for parallel work are derived with [`SeededRng::child`];
/// the derivation depends only on the parent seed and the stream index, never
/// on how many values the parent has produced.
#[derive(Debug, Clone)]
pub struct SeededRng {
    seed: u64,
    inner: ChaCha8Rng,
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

impl SeededRng {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            inner: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Independent generator for stream `index`.
    pub fn child(&self, index: u64) -> Self {
        Self::new(splitmix64(self.seed ^ splitmix64(index.wrapping_add(1))))
    }

    /// Uniform draw on [0, 1).
    pub fn uniform(&mut self) -> f64 {
        self.inner.random::<f64>()
    }

    pub fn standard_normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.inner)
    }

    /// Fair coin: +1.0 or -1.0.
    pub fn sign(&mut self) -> f64 {
        if self.inner.random::<bool>() {
            1.0
        } else {
            -1.0
        }
    }
}

impl RngCore for SeededRng {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use fdrpath_oracles as oracle;

    const P_GRID: [f64; 9] = [0.001, 0.01, 0.1, 0.25, 0.5, 0.75, 0.9, 0.99, 0.999];

    fn families() -> Vec<DistFamily> {
        vec![
            DistFamily::standard_normal(),
            DistFamily::normal(1.5, 3.0).unwrap(),
            DistFamily::ChiSquare1,
            DistFamily::gamma(0.1, 22.0).unwrap(),
            DistFamily::gamma(0.5, 2.0).unwrap(),
            DistFamily::gamma(2.0, 3.0).unwrap(),
            DistFamily::gamma(0.9, 0.5).unwrap(),
        ]
    }

    #[test]
    fn standard_normal_density_at_zero() {
        let d = DistFamily::standard_normal();
        let v = dist_eval(&d, 0.0, EvalKind::Pdf).unwrap();
        assert!((v - 0.398_942_280_4).abs() < 1e-10);
    }

    #[test]
    fn chi_square_upper_five_percent_point() {
        let x = 1.959_963_984_540_054_f64.powi(2);
        let sf = dist_eval(&DistFamily::ChiSquare1, x, EvalKind::Sf).unwrap();
        assert!((sf - 0.05).abs() < 1e-12);
        // independent route: erf series at sqrt(x/2)
        assert!((sf - oracle::erfc_series((x / 2.0).sqrt())).abs() < 1e-12);
        let x2 = 3.841_458_8;
        assert!((DistFamily::ChiSquare1.sf(x2) - 0.05).abs() < 1e-8);
    }

    #[test]
    fn gamma_half_two_is_chi_square_one() {
        let g = DistFamily::gamma(0.5, 2.0).unwrap();
        for x in [1e-8, 0.01, 0.3, 1.0, 3.84, 10.0, 40.0] {
            assert!(
                (g.cdf(x) - DistFamily::ChiSquare1.cdf(x)).abs() < 1e-13,
                "x={x}"
            );
            assert!((g.pdf(x) - DistFamily::ChiSquare1.pdf(x)).abs() < 1e-12 * g.pdf(x).max(1.0));
        }
    }

    #[test]
    fn invalid_parameters_name_the_field() {
        match DistFamily::gamma(-1.0, 1.0) {
            Err(Error::Domain { field, .. }) => assert_eq!(field, "shape"),
            other => panic!("unexpected {other:?}"),
        }
        match DistFamily::normal(0.0, 0.0) {
            Err(Error::Domain { field, .. }) => assert_eq!(field, "sd"),
            other => panic!("unexpected {other:?}"),
        }
        match dist_eval(&DistFamily::ChiSquare1, 1.5, EvalKind::Quantile) {
            Err(Error::Domain { field, .. }) => assert_eq!(field, "probability"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn quantile_inverts_cdf_on_grid() {
        for d in families() {
            for p in P_GRID {
                let q = d.quantile(p).unwrap();
                assert!(
                    (d.cdf(q) - p).abs() < 1e-8,
                    "{d:?} p={p} q={q} cdf={}",
                    d.cdf(q)
                );
            }
        }
    }

    #[test]
    fn densities_integrate_to_one() {
        for d in families() {
            let total = match d {
                DistFamily::Normal { mean, sd } => {
                    oracle::integrate(|x| d.pdf(x), mean - 40.0 * sd, mean + 40.0 * sd, 1e-10)
                }
                _ => {
                    // x = u^(1/k) removes the x^(k-1) singularity at zero
                    let (k, theta) = d.as_gamma().unwrap();
                    let upper = (theta * (k + 60.0)).powf(k);
                    oracle::integrate(
                        |u| {
                            if u <= 0.0 {
                                let x = f64::MIN_POSITIVE;
                                return d.pdf(x) * x.powf(1.0 - k) / k;
                            }
                            let x = u.powf(1.0 / k);
                            d.pdf(x) * x / (k * u)
                        },
                        0.0,
                        upper,
                        1e-10,
                    )
                }
            };
            assert!((total - 1.0).abs() < 1e-6, "{d:?} integral {total}");
        }
    }

    #[test]
    fn mixture_cdf_is_weighted_sum() {
        let comps = vec![
            (0.3, DistFamily::ChiSquare1),
            (0.7, DistFamily::gamma(0.4, 22.0).unwrap()),
        ];
        let mix = MixtureDensity::new(comps.clone()).unwrap();
        for x in [0.0, 0.1, 1.0, 5.0, 50.0] {
            let direct = 0.3 * comps[0].1.cdf(x) + 0.7 * comps[1].1.cdf(x);
            assert_eq!(mix.cdf(x), direct);
            assert!(mix.pdf(x) >= 0.0);
        }
        let q = mix.quantile(0.5).unwrap();
        assert!((mix.cdf(q) - 0.5).abs() < 1e-10);
    }

    #[test]
    fn mixture_rejects_bad_weights() {
        assert!(MixtureDensity::new(vec![(0.5, DistFamily::ChiSquare1)]).is_err());
        assert!(MixtureDensity::new(vec![
            (1.2, DistFamily::ChiSquare1),
            (-0.2, DistFamily::ChiSquare1)
        ])
        .is_err());
        assert!(MixtureDensity::normalized(vec![(2.0, DistFamily::ChiSquare1)]).is_ok());
    }

    #[test]
    fn same_seed_same_draws() {
        let d = DistFamily::gamma(0.3, 22.0).unwrap();
        let a = d.sample(1000, &mut SeededRng::new(42)).unwrap();
        let b = d.sample(1000, &mut SeededRng::new(42)).unwrap();
        assert_eq!(a, b);
        let c = d.sample(1000, &mut SeededRng::new(43)).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn children_are_independent_of_parent_state() {
        let parent = SeededRng::new(7);
        let mut advanced = parent.clone();
        advanced.uniform();
        assert_eq!(parent.child(3).seed(), advanced.child(3).seed());
        assert_ne!(parent.child(3).seed(), parent.child(4).seed());
    }

    #[test]
    fn zero_sample_size_is_rejected() {
        assert!(DistFamily::ChiSquare1
            .sample(0, &mut SeededRng::new(1))
            .is_err());
    }

    #[test]
    fn squared_normal_matches_gamma() {
        let phi: f64 = 3.0;
        let mut rng = SeededRng::new(11);
        let n = 100_000;
        let z = DistFamily::normal(0.0, phi)
            .unwrap()
            .sample(n, &mut rng)
            .unwrap();
        let zsq: Vec<f64> = z.iter().map(|v| v * v).collect();
        let g = DistFamily::gamma(0.5, 2.0 * phi * phi)
            .unwrap()
            .sample(n, &mut rng)
            .unwrap();
        let (_, p) = oracle::ks_two_sample(&zsq, &g);
        assert!(p > 0.01, "KS p = {p}");
    }

    #[test]
    fn gamma_sample_mean_within_three_standard_errors() {
        let (k, theta) = (2.0, 3.0);
        let n = 1_000_000;
        let x = DistFamily::gamma(k, theta)
            .unwrap()
            .sample(n, &mut SeededRng::new(5))
            .unwrap();
        let mean = x.iter().sum::<f64>() / n as f64;
        let se = theta * (k / n as f64).sqrt();
        assert!((mean - k * theta).abs() < 3.0 * se, "mean {mean}");
    }

    #[test]
    fn empirical_cdf_matches_analytic() {
        for (i, d) in families().into_iter().enumerate() {
            let x = d
                .sample(1_000_000, &mut SeededRng::new(100 + i as u64))
                .unwrap();
            let sup = oracle::ecdf_sup_distance(&x, |v| d.cdf(v));
            assert!(sup < 5e-3, "{d:?} sup {sup}");
        }
    }
}
