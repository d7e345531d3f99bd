//! Config-driven simulation study.
//!
//! Every (cell, replicate) job owns a generator seeded from
//! `base seed + replicate` and split by cell index, so results do not
//! depend on scheduling. Jobs run on the rayon pool; artifacts are
//! rendered afterwards in (cell, replicate) order.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use fdrpath::diagnose::{flag_anticonservative, quantile_diagnosis, DiagnosisReport, MIN_TESTS};
use fdrpath::freq::{
    bh_path, pi0_quantile_estimate, pi0_zsq_estimate, pvalue_path, qvalue_path, Pi0Estimate,
};
use fdrpath::grouped::{
    grouped_bayes_path, grouped_fdr_path, null_wlr_cdf, weighted_p_path, CdfMethod, NullWlrCdf,
};
use fdrpath::peb::{
    bayes_path, em_fit, local_fdr, select_sigma_grid, EmOptions, LocalFdrVector, MixtureFit,
};
use fdrpath::rpath::{compare_paths, cutoff_at_level};
use fdrpath::twogroups::simulate_battery;
use fdrpath::{RejectionPath, SeededRng, TestBattery};
use rayon::prelude::*;

use crate::config::{Cell, CellModel, Method, SavePaths, ScenarioConfig, WlrCdfConfig};
use crate::error::{HarnessError, Result};
use crate::io::{battery_csv, comparison_csv, fmt_f64, path_csv, write_file};
use crate::svg::{Chart, Mark, Series};
use crate::truth::{evaluate_truth, TruthEval};

/// Stream index reserved for Monte Carlo null draws, kept apart from the
/// per-cell replicate streams.
const MC_STREAM: u64 = 1 << 32;

/// Build the rejection path of `method` on `battery`. `model` carries the
/// true parameters needed by the oracle and grouped methods; `fit` is
/// required by the empirical Bayes methods.
pub fn method_path(
    method: Method,
    battery: &TestBattery,
    model: Option<&CellModel>,
    cdfs: Option<&NullWlrCdf>,
    fit: Option<&MixtureFit>,
    eta: f64,
) -> Result<RejectionPath> {
    let missing = |what: &str| HarnessError::Config(format!("{} needs {what}", method.name()));
    let path = match method {
        Method::Bh => bh_path(battery.pvalues())?,
        Method::Qvalue => qvalue_path(battery.pvalues(), eta)?,
        Method::Peb => {
            let fit = fit.ok_or_else(|| missing("a mixture fit"))?;
            bayes_path(&local_fdr(battery.z(), fit)?, method.name())?
        }
        Method::PebFreq => {
            let fit = fit.ok_or_else(|| missing("a mixture fit"))?;
            pvalue_path(
                battery.pvalues(),
                Pi0Estimate::em_fit(fit.pi0_hat)?,
                method.name(),
            )?
        }
        Method::OracleBayes | Method::OracleFreq => {
            let Some(CellModel::TwoGroups(spec)) = model else {
                return Err(missing("a two-groups model"));
            };
            if method == Method::OracleBayes {
                let u = LocalFdrVector::new(spec.oracle_local_fdrs(battery.zsq()))?;
                bayes_path(&u, method.name())?
            } else {
                pvalue_path(
                    battery.pvalues(),
                    Pi0Estimate::oracle(spec.pi0)?,
                    method.name(),
                )?
            }
        }
        Method::GroupedWlr | Method::GroupedBayes | Method::WeightedP => {
            let Some(CellModel::Grouped { spec, config }) = model else {
                return Err(missing("a grouped model"));
            };
            match method {
                Method::GroupedWlr => grouped_fdr_path(
                    battery,
                    spec,
                    cdfs.ok_or_else(|| missing("null wlr distributions"))?,
                )?,
                Method::GroupedBayes => grouped_bayes_path(battery, spec)?,
                _ => weighted_p_path(battery, &config.weights(), &spec.pi0s())?,
            }
        }
    };
    Ok(path)
}

/// Empirical Bayes fit with the default grid and options.
pub fn fit_mixture(z: &[f64]) -> Result<MixtureFit> {
    let grid = select_sigma_grid(z)?;
    Ok(em_fit(z, &grid, &EmOptions::default())?)
}

#[derive(Debug, Clone)]
pub struct MethodOutcome {
    pub method: Method,
    pub truth: TruthEval,
    /// Kept only for saved replicates.
    pub path: Option<RejectionPath>,
}

#[derive(Debug, Clone)]
pub struct ComparisonOutcome {
    pub a: Method,
    pub b: Method,
    pub sup_norm: f64,
    /// Rendered comparison table, kept only for saved replicates.
    pub table: Option<Vec<u8>>,
    /// (fdr_a, fdr_b) pairs for the scatter chart of saved replicates.
    pub points: Option<Vec<(f64, f64)>>,
}

#[derive(Debug, Clone)]
pub struct ReplicateResult {
    pub cell: usize,
    pub replicate: usize,
    pub seed: u64,
    pub m: usize,
    pub pi0_tilde: f64,
    pub pi0_zsq: f64,
    pub fit: Option<MixtureFit>,
    pub diagnosis: Option<DiagnosisReport>,
    pub flagged: Option<bool>,
    pub methods: Vec<MethodOutcome>,
    pub comparisons: Vec<ComparisonOutcome>,
    pub battery: Option<TestBattery>,
}

#[derive(Debug, Clone)]
pub struct ScenarioResults {
    pub config: ScenarioConfig,
    pub cells: Vec<Cell>,
    pub replicates: Vec<ReplicateResult>,
}

fn saved(config: &ScenarioConfig, replicate: usize) -> bool {
    match config.save_paths {
        SavePaths::None => false,
        SavePaths::First => replicate == 0,
        SavePaths::All => true,
    }
}

fn cell_cdfs(config: &ScenarioConfig, index: usize, cell: &Cell) -> Result<Option<NullWlrCdf>> {
    let CellModel::Grouped { spec, config: g } = &cell.model else {
        return Ok(None);
    };
    if !config.methods.contains(&Method::GroupedWlr) {
        return Ok(None);
    }
    let method = match g.wlr_cdf {
        WlrCdfConfig::Analytic => CdfMethod::Analytic,
        WlrCdfConfig::MonteCarlo { n_mc } => CdfMethod::MonteCarlo {
            n_mc,
            seed: SeededRng::new(config.seed)
                .child(MC_STREAM + index as u64)
                .seed(),
        },
    };
    Ok(Some(null_wlr_cdf(spec, method)?))
}

fn run_replicate(
    config: &ScenarioConfig,
    cell_index: usize,
    cell: &Cell,
    cdfs: Option<&NullWlrCdf>,
    replicate: usize,
) -> Result<ReplicateResult> {
    let seed = config.seed.wrapping_add(replicate as u64);
    let mut rng = SeededRng::new(seed).child(cell_index as u64);
    let battery = match &cell.model {
        CellModel::TwoGroups(spec) => simulate_battery(spec, &mut rng)?,
        CellModel::Grouped { spec, config: g } => spec.simulate(&g.sizes, &mut rng)?,
    };
    let keep = saved(config, replicate);
    let pi0_tilde = pi0_quantile_estimate(battery.pvalues(), config.eta)?.value;
    let pi0_zsq = pi0_zsq_estimate(battery.zsq(), config.eta)?.value;

    let fit = if config.methods.iter().any(|m| m.needs_fit()) {
        Some(fit_mixture(battery.z())?)
    } else {
        None
    };
    let (diagnosis, flagged) = match &fit {
        Some(fit) if battery.len() >= MIN_TESTS => {
            let report = quantile_diagnosis(battery.zsq(), fit, &config.levels)?
                .with_threshold(config.flag_threshold)?;
            let flag = flag_anticonservative(&report, config.flag_threshold)?;
            (Some(report), Some(flag))
        }
        _ => (None, None),
    };

    let mut paths = BTreeMap::new();
    let mut methods = Vec::with_capacity(config.methods.len());
    for &method in &config.methods {
        let path = method_path(
            method,
            &battery,
            Some(&cell.model),
            cdfs,
            fit.as_ref(),
            config.eta,
        )?;
        let k = cutoff_at_level(&path, config.alpha)?;
        let truth = evaluate_truth(&battery, path.rejected(k), config.alpha)?;
        methods.push(MethodOutcome {
            method,
            truth,
            path: keep.then(|| path.clone()),
        });
        paths.insert(method, path);
    }
    let comparisons = config
        .comparisons
        .iter()
        .map(|&(a, b)| {
            let (pa, pb) = (&paths[&a], &paths[&b]);
            let cmp = compare_paths(pa, pb)?;
            let (table, points) = if keep {
                let pts = pa
                    .fdr()
                    .iter()
                    .copied()
                    .zip(pb.fdr().iter().copied())
                    .collect();
                (Some(comparison_csv(pa, pb, &cmp)?), Some(pts))
            } else {
                (None, None)
            };
            Ok(ComparisonOutcome {
                a,
                b,
                sup_norm: cmp.sup_norm,
                table,
                points,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(ReplicateResult {
        cell: cell_index,
        replicate,
        seed,
        m: battery.len(),
        pi0_tilde,
        pi0_zsq,
        fit,
        diagnosis,
        flagged,
        methods,
        comparisons,
        battery: keep.then_some(battery),
    })
}

/// Run every replicate of every cell without touching the file system.
pub fn compute_scenario(config: &ScenarioConfig) -> Result<ScenarioResults> {
    config.validate()?;
    let cells = config.cells()?;
    let cdfs = cells
        .iter()
        .enumerate()
        .map(|(i, c)| cell_cdfs(config, i, c))
        .collect::<Result<Vec<_>>>()?;
    let jobs: Vec<(usize, usize)> = (0..cells.len())
        .flat_map(|c| (0..config.replicates).map(move |r| (c, r)))
        .collect();
    let replicates = jobs
        .par_iter()
        .map(|&(c, r)| run_replicate(config, c, &cells[c], cdfs[c].as_ref(), r))
        .collect::<Result<Vec<_>>>()?;
    Ok(ScenarioResults {
        config: config.clone(),
        cells,
        replicates,
    })
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len().max(1) as f64
}

fn quantile(v: &[f64], p: f64) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    fdrpath::statdist::sample_quantile(&s, p)
}

fn csv_bytes(header: &[&str], rows: Vec<Vec<String>>) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for row in rows {
        w.write_record(&row)?;
    }
    w.into_inner()
        .map_err(|e| HarnessError::Config(format!("csv buffer: {e}")))
}

fn opt(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}

impl ScenarioResults {
    fn cell_reps(&self, cell: usize) -> impl Iterator<Item = &ReplicateResult> {
        self.replicates.iter().filter(move |r| r.cell == cell)
    }

    /// Every artifact keyed by its path relative to the scenario directory.
    pub fn artifacts(&self) -> Result<BTreeMap<PathBuf, Vec<u8>>> {
        let mut out = BTreeMap::new();
        let cfg = &self.config;
        out.insert("config.json".into(), (cfg.to_json()? + "\n").into_bytes());

        let mut cell_rows = Vec::new();
        for (i, c) in self.cells.iter().enumerate() {
            let m = self.cell_reps(i).next().map_or(0, |r| r.m);
            cell_rows.push(vec![
                i.to_string(),
                c.label.clone(),
                m.to_string(),
                fmt_f64(c.model.true_pi0()),
            ]);
        }
        out.insert(
            "cells.csv".into(),
            csv_bytes(&["cell", "label", "m", "pi0_true"], cell_rows)?,
        );

        let label = |r: &ReplicateResult| self.cells[r.cell].label.clone();
        let mut rep_rows = Vec::new();
        let mut pi0_rows = Vec::new();
        let mut diag_rows = Vec::new();
        let mut cmp_rows = Vec::new();
        for r in &self.replicates {
            for mo in &r.methods {
                rep_rows.push(vec![
                    label(r),
                    r.replicate.to_string(),
                    r.seed.to_string(),
                    mo.method.name().into(),
                    mo.truth.rejections.to_string(),
                    fmt_f64(mo.truth.fdp),
                    fmt_f64(mo.truth.fnr),
                ]);
            }
            pi0_rows.push(vec![
                label(r),
                r.replicate.to_string(),
                fmt_f64(self.cells[r.cell].model.true_pi0()),
                fmt_f64(r.pi0_tilde),
                fmt_f64(r.pi0_zsq),
                opt(r.fit.as_ref().map(|f| f.pi0_hat)),
                r.fit
                    .as_ref()
                    .map(|f| f.iterations.to_string())
                    .unwrap_or_default(),
                r.fit
                    .as_ref()
                    .map(|f| f.converged.to_string())
                    .unwrap_or_default(),
                r.flagged.map(|f| f.to_string()).unwrap_or_default(),
            ]);
            if let Some(d) = &r.diagnosis {
                for q in &d.rows {
                    diag_rows.push(vec![
                        label(r),
                        r.replicate.to_string(),
                        q.level.to_string(),
                        fmt_f64(q.sample_quantile),
                        fmt_f64(q.fitted_quantile),
                        fmt_f64(q.standard_error),
                        fmt_f64(q.z_statistic),
                        fmt_f64(q.p_value),
                        serde_json::to_value(q.direction)?
                            .as_str()
                            .unwrap_or_default()
                            .to_owned(),
                    ]);
                }
            }
            for c in &r.comparisons {
                cmp_rows.push(vec![
                    label(r),
                    r.replicate.to_string(),
                    c.a.name().into(),
                    c.b.name().into(),
                    fmt_f64(c.sup_norm),
                ]);
            }
        }
        out.insert(
            "replicates.csv".into(),
            csv_bytes(
                &[
                    "cell",
                    "replicate",
                    "seed",
                    "method",
                    "rejections",
                    "fdp",
                    "fnr",
                ],
                rep_rows,
            )?,
        );
        out.insert(
            "pi0.csv".into(),
            csv_bytes(
                &[
                    "cell",
                    "replicate",
                    "pi0_true",
                    "pi0_tilde",
                    "pi0_zsq",
                    "pi0_hat",
                    "em_iterations",
                    "em_converged",
                    "flagged",
                ],
                pi0_rows,
            )?,
        );
        if !diag_rows.is_empty() {
            out.insert(
                "diagnosis.csv".into(),
                csv_bytes(
                    &[
                        "cell",
                        "replicate",
                        "level",
                        "sample_quantile",
                        "fitted_quantile",
                        "standard_error",
                        "z_statistic",
                        "p_value",
                        "direction",
                    ],
                    diag_rows,
                )?,
            );
        }
        if !cmp_rows.is_empty() {
            out.insert(
                "comparisons.csv".into(),
                csv_bytes(
                    &["cell", "replicate", "method_a", "method_b", "sup_norm"],
                    cmp_rows,
                )?,
            );
        }
        self.summaries(&mut out)?;
        self.saved_artifacts(&mut out)?;
        Ok(out)
    }

    fn summaries(&self, out: &mut BTreeMap<PathBuf, Vec<u8>>) -> Result<()> {
        let cfg = &self.config;
        let (mut method_rows, mut pi0_rows, mut flag_rows, mut cmp_rows) =
            (Vec::new(), Vec::new(), Vec::new(), Vec::new());
        let mut pi0_series: BTreeMap<&str, Vec<(f64, f64)>> = BTreeMap::new();
        for (i, cell) in self.cells.iter().enumerate() {
            let reps: Vec<_> = self.cell_reps(i).collect();
            let n = reps.len();
            for &method in &cfg.methods {
                let t: Vec<TruthEval> = reps
                    .iter()
                    .flat_map(|r| {
                        r.methods
                            .iter()
                            .filter(|o| o.method == method)
                            .map(|o| o.truth)
                    })
                    .collect();
                let fdp: Vec<f64> = t.iter().map(|e| e.fdp).collect();
                let fnr: Vec<f64> = t.iter().map(|e| e.fnr).collect();
                let rej: Vec<f64> = t.iter().map(|e| e.rejections as f64).collect();
                method_rows.push(vec![
                    cell.label.clone(),
                    method.name().into(),
                    n.to_string(),
                    cfg.alpha.to_string(),
                    fmt_f64(mean(&fdp)),
                    fmt_f64(mean(&fnr)),
                    fmt_f64(mean(&rej)),
                ]);
            }
            let truth = cell.model.true_pi0();
            let mut estimators: Vec<(&str, Vec<f64>)> = vec![
                ("pi0_tilde", reps.iter().map(|r| r.pi0_tilde).collect()),
                ("pi0_zsq", reps.iter().map(|r| r.pi0_zsq).collect()),
            ];
            if reps.iter().all(|r| r.fit.is_some()) {
                estimators.push((
                    "pi0_hat",
                    reps.iter()
                        .filter_map(|r| r.fit.as_ref().map(|f| f.pi0_hat))
                        .collect(),
                ));
            }
            for (name, v) in estimators {
                let abs: Vec<f64> = v.iter().map(|x| (x - truth).abs()).collect();
                let at_least = v.iter().filter(|&&x| x >= truth).count() as f64 / n as f64;
                pi0_rows.push(vec![
                    cell.label.clone(),
                    name.into(),
                    n.to_string(),
                    fmt_f64(truth),
                    fmt_f64(mean(&v)),
                    fmt_f64(quantile(&v, 0.5)),
                    fmt_f64(quantile(&v, 0.05)),
                    fmt_f64(quantile(&v, 0.95)),
                    fmt_f64(mean(&abs)),
                    fmt_f64(at_least),
                ]);
                if name != "pi0_zsq" {
                    pi0_series
                        .entry(name)
                        .or_default()
                        .extend(v.iter().map(|&x| (i as f64, x)));
                }
            }
            let flags: Vec<bool> = reps.iter().filter_map(|r| r.flagged).collect();
            if !flags.is_empty() {
                let rate = flags.iter().filter(|&&f| f).count() as f64 / flags.len() as f64;
                flag_rows.push(vec![
                    cell.label.clone(),
                    flags.len().to_string(),
                    fmt_f64(rate),
                ]);
            }
            for &(a, b) in &cfg.comparisons {
                let sups: Vec<f64> = reps
                    .iter()
                    .flat_map(|r| {
                        r.comparisons
                            .iter()
                            .filter(|c| c.a == a && c.b == b)
                            .map(|c| c.sup_norm)
                    })
                    .collect();
                cmp_rows.push(vec![
                    cell.label.clone(),
                    a.name().into(),
                    b.name().into(),
                    n.to_string(),
                    fmt_f64(quantile(&sups, 0.5)),
                    fmt_f64(mean(&sups)),
                    fmt_f64(sups.iter().copied().fold(f64::NEG_INFINITY, f64::max)),
                ]);
            }
        }
        out.insert(
            "summary_methods.csv".into(),
            csv_bytes(
                &[
                    "cell",
                    "method",
                    "replicates",
                    "alpha",
                    "mean_fdp",
                    "mean_fnr",
                    "mean_rejections",
                ],
                method_rows,
            )?,
        );
        out.insert(
            "summary_pi0.csv".into(),
            csv_bytes(
                &[
                    "cell",
                    "estimator",
                    "replicates",
                    "pi0_true",
                    "mean",
                    "median",
                    "q05",
                    "q95",
                    "mean_abs_error",
                    "frac_at_least_true",
                ],
                pi0_rows,
            )?,
        );
        if !flag_rows.is_empty() {
            out.insert(
                "summary_diagnosis.csv".into(),
                csv_bytes(&["cell", "replicates", "flag_rate"], flag_rows)?,
            );
        }
        if !cmp_rows.is_empty() {
            out.insert(
                "summary_comparisons.csv".into(),
                csv_bytes(
                    &[
                        "cell",
                        "method_a",
                        "method_b",
                        "replicates",
                        "median_sup_norm",
                        "mean_sup_norm",
                        "max_sup_norm",
                    ],
                    cmp_rows,
                )?,
            );
        }
        if self.cells.len() > 1 {
            let mut title = String::from("pi0 estimates by cell:");
            for (i, c) in self.cells.iter().enumerate() {
                write!(title, " {i}={}", c.label).unwrap();
            }
            let chart = Chart {
                title,
                x_label: "cell".into(),
                y_label: "pi0".into(),
                series: pi0_series
                    .into_iter()
                    .map(|(name, points)| Series {
                        name: name.into(),
                        mark: Mark::Points,
                        points,
                    })
                    .collect(),
                diagonal: false,
                reference_y: self.cells.first().map(|c| c.model.true_pi0()),
            };
            out.insert("plots/pi0.svg".into(), chart.render().into_bytes());
        }
        Ok(())
    }

    fn saved_artifacts(&self, out: &mut BTreeMap<PathBuf, Vec<u8>>) -> Result<()> {
        for r in &self.replicates {
            let base = PathBuf::from(&self.cells[r.cell].label).join(format!("rep{}", r.replicate));
            if let Some(b) = &r.battery {
                out.insert(
                    Path::new("batteries").join(&base).with_extension("csv"),
                    battery_csv(b)?,
                );
            }
            if let Some(d) = &r.diagnosis {
                if r.battery.is_some() {
                    out.insert(
                        Path::new("diagnosis").join(&base).with_extension("csv"),
                        d.to_csv().into_bytes(),
                    );
                }
            }
            let mut lines = Vec::new();
            for mo in &r.methods {
                if let Some(p) = &mo.path {
                    let file = Path::new("paths")
                        .join(&base)
                        .join(format!("{}.csv", mo.method.name()));
                    out.insert(file, path_csv(p)?);
                    lines.push(Series {
                        name: mo.method.name().into(),
                        mark: Mark::Line,
                        points: p
                            .fdr()
                            .iter()
                            .enumerate()
                            .map(|(k, &f)| ((k + 1) as f64, f))
                            .collect(),
                    });
                }
            }
            if !lines.is_empty() {
                let chart = Chart {
                    title: format!(
                        "FDR paths, {} replicate {}",
                        self.cells[r.cell].label, r.replicate
                    ),
                    x_label: "rejections".into(),
                    y_label: "estimated FDR".into(),
                    series: lines,
                    diagonal: false,
                    reference_y: Some(self.config.alpha),
                };
                out.insert(
                    Path::new("plots").join(&base).join("paths.svg"),
                    chart.render().into_bytes(),
                );
            }
            for c in &r.comparisons {
                let stem = format!("{}-vs-{}", c.a.name(), c.b.name());
                if let Some(t) = &c.table {
                    out.insert(
                        Path::new("comparisons")
                            .join(&base)
                            .join(format!("{stem}.csv")),
                        t.clone(),
                    );
                }
                if let Some(points) = &c.points {
                    let chart = Chart {
                        title: format!("{} replicate {}", self.cells[r.cell].label, r.replicate),
                        x_label: format!("{} FDR", c.a.name()),
                        y_label: format!("{} FDR", c.b.name()),
                        series: vec![Series {
                            name: stem.clone(),
                            mark: Mark::Points,
                            points: points.clone(),
                        }],
                        diagonal: true,
                        reference_y: None,
                    };
                    out.insert(
                        Path::new("plots").join(&base).join(format!("{stem}.svg")),
                        chart.render().into_bytes(),
                    );
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioReport {
    /// Directory holding the artifacts: `<root>/<scenario id>`.
    pub dir: PathBuf,
    /// Relative paths of the files written, sorted.
    pub files: Vec<PathBuf>,
}

/// Run `config` and write its artifacts under `root/<id>`.
pub fn run_scenario(config: &ScenarioConfig, root: &Path) -> Result<ScenarioReport> {
    let results = compute_scenario(config)?;
    let dir = root.join(&config.id);
    let artifacts = results.artifacts()?;
    for (rel, bytes) in &artifacts {
        write_file(&dir.join(rel), bytes)?;
    }
    Ok(ScenarioReport {
        dir,
        files: artifacts.into_keys().collect(),
    })
}
