use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use fdrpath::diagnose::{
    flag_anticonservative, quantile_diagnosis, DEFAULT_FLAG_THRESHOLD, DEFAULT_LEVELS,
};
use fdrpath::grouped::{null_wlr_cdf, CdfMethod};
use fdrpath::rpath::compare_paths;
use fdrpath::twogroups::simulate_battery;
use fdrpath::{DistFamily, SeededRng, TwoGroupsSpec, DEFAULT_ETA};
use fdrpath_harness::config::{CellModel, GroupedConfig, ModelConfig, WlrCdfConfig};
use fdrpath_harness::io::{battery_csv, comparison_csv, path_csv, read_battery_csv, read_path_csv};
use fdrpath_harness::scenario::{fit_mixture, method_path};
use fdrpath_harness::svg::{Chart, Mark, Series};
use fdrpath_harness::{load_pvalues_csv, run_scenario, Method, ScenarioConfig, OUTPUT_ENV};

#[derive(Parser)]
#[command(
    name = "fdrpath",
    version,
    about = "False discovery rate paths: simulation, estimation and diagnosis"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a two-groups battery and write it as CSV.
    Simulate(SimulateArgs),
    /// Run one method on a battery and write its rejection path.
    Fdr(FdrArgs),
    /// Path utilities.
    Path {
        #[command(subcommand)]
        command: PathCommand,
    },
    /// Fit the empirical Bayes mixture and check it against the data.
    Diagnose(DiagnoseArgs),
    /// Grouped analysis with known group parameters.
    Grouped(GroupedArgs),
    /// Config-driven studies.
    Scenario {
        #[command(subcommand)]
        command: ScenarioCommand,
    },
    /// Turn a one-column p-value file into a battery CSV.
    ImportPvalues(ImportArgs),
}

#[derive(Subcommand)]
enum PathCommand {
    /// Compare two path CSVs position by position.
    Compare(CompareArgs),
}

#[derive(Subcommand)]
enum ScenarioCommand {
    /// Run every replicate of a scenario and write its artifacts.
    Run(ScenarioArgs),
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    pi0: f64,
    #[arg(long)]
    m: usize,
    /// Variance of the normal random effect; ignored when --alt-shape is set.
    #[arg(long, default_value_t = 10.0)]
    k: f64,
    /// Gamma shape of the alternative law of z^2.
    #[arg(long, requires = "alt_scale")]
    alt_shape: Option<f64>,
    #[arg(long)]
    alt_scale: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output file; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct FdrArgs {
    #[arg(long)]
    battery: PathBuf,
    #[arg(long, value_parser = parse_method)]
    method: Method,
    /// JSON model for the oracle and grouped methods, in scenario-config
    /// form, e.g. {"two-groups": {...}}.
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_ETA)]
    eta: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CompareArgs {
    a: PathBuf,
    b: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write a scatter chart of the two paths.
    #[arg(long)]
    svg: Option<PathBuf>,
}

#[derive(Args)]
struct DiagnoseArgs {
    #[arg(long)]
    battery: PathBuf,
    /// Comma-separated quantile levels.
    #[arg(long, value_delimiter = ',')]
    levels: Option<Vec<f64>>,
    #[arg(long, default_value_t = DEFAULT_FLAG_THRESHOLD)]
    threshold: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct GroupedArgs {
    /// Grouped model JSON: groups, sizes, optional weights and wlr_cdf.
    #[arg(long)]
    model: PathBuf,
    /// Existing battery with a group column; simulated from the model when
    /// omitted.
    #[arg(long)]
    battery: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ScenarioArgs {
    config: PathBuf,
    /// Override the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output root; defaults to the config value, then $FDRPATH_OUT, then
    /// ./fdrpath-out.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ImportArgs {
    input: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_method(s: &str) -> Result<Method, String> {
    serde_json::from_value(serde_json::Value::String(s.into()))
        .map_err(|_| format!("unknown method {s:?}"))
}

fn emit(out: Option<&Path>, bytes: &[u8]) -> anyhow::Result<()> {
    match out {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir)
                    .with_context(|| format!("creating {}", dir.display()))?;
            }
            std::fs::write(p, bytes).with_context(|| format!("writing {}", p.display()))
        }
        None => Ok(std::io::stdout().write_all(bytes)?),
    }
}

fn load_model(path: &Path) -> anyhow::Result<CellModel> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let model: ModelConfig =
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    Ok(match model {
        ModelConfig::TwoGroups(spec) => {
            spec.validate()?;
            CellModel::TwoGroups(spec)
        }
        ModelConfig::Grouped(config) => CellModel::Grouped {
            spec: config.spec()?,
            config,
        },
    })
}

fn simulate(a: SimulateArgs) -> anyhow::Result<()> {
    let spec = match (a.alt_shape, a.alt_scale) {
        (Some(shape), Some(scale)) => TwoGroupsSpec::new(
            a.pi0,
            DistFamily::ChiSquare1,
            DistFamily::gamma(shape, scale)?,
            a.m,
        )?,
        _ => TwoGroupsSpec::normal_random_effect(a.pi0, a.k, a.m)?,
    };
    let battery = simulate_battery(&spec, &mut SeededRng::new(a.seed))?;
    emit(a.out.as_deref(), &battery_csv(&battery)?)
}

fn fdr(a: FdrArgs) -> anyhow::Result<()> {
    let battery = read_battery_csv(&a.battery)?;
    let model = a.model.as_deref().map(load_model).transpose()?;
    let cdfs = match &model {
        Some(CellModel::Grouped { spec, .. }) if a.method == Method::GroupedWlr => {
            Some(null_wlr_cdf(spec, CdfMethod::Analytic)?)
        }
        _ => None,
    };
    let fit = if a.method.needs_fit() {
        Some(fit_mixture(battery.z())?)
    } else {
        None
    };
    let path = method_path(
        a.method,
        &battery,
        model.as_ref(),
        cdfs.as_ref(),
        fit.as_ref(),
        a.eta,
    )?;
    emit(a.out.as_deref(), &path_csv(&path)?)
}

fn compare(a: CompareArgs) -> anyhow::Result<()> {
    let pa = read_path_csv(&a.a, "a")?;
    let pb = read_path_csv(&a.b, "b")?;
    let cmp = compare_paths(&pa, &pb)?;
    eprintln!("sup_norm={}", cmp.sup_norm);
    if let Some(svg) = &a.svg {
        let chart = Chart {
            title: "path comparison".into(),
            x_label: a.a.display().to_string(),
            y_label: a.b.display().to_string(),
            series: vec![Series {
                name: "fdr".into(),
                mark: Mark::Points,
                points: pa
                    .fdr()
                    .iter()
                    .copied()
                    .zip(pb.fdr().iter().copied())
                    .collect(),
            }],
            diagonal: true,
            reference_y: None,
        };
        emit(Some(svg), chart.render().as_bytes())?;
    }
    emit(a.out.as_deref(), &comparison_csv(&pa, &pb, &cmp)?)
}

fn diagnose(a: DiagnoseArgs) -> anyhow::Result<()> {
    let battery = read_battery_csv(&a.battery)?;
    let fit = fit_mixture(battery.z())?;
    let levels = a.levels.unwrap_or_else(|| DEFAULT_LEVELS.to_vec());
    let report = quantile_diagnosis(battery.zsq(), &fit, &levels)?.with_threshold(a.threshold)?;
    let flagged = flag_anticonservative(&report, a.threshold)?;
    eprintln!("pi0_hat={} flagged={flagged}", fit.pi0_hat);
    emit(a.out.as_deref(), report.to_csv().as_bytes())
}

fn grouped(a: GroupedArgs) -> anyhow::Result<()> {
    let text = std::fs::read_to_string(&a.model)
        .with_context(|| format!("reading {}", a.model.display()))?;
    let config: GroupedConfig =
        serde_json::from_str(&text).with_context(|| format!("parsing {}", a.model.display()))?;
    let spec = config.spec()?;
    let battery = match &a.battery {
        Some(p) => read_battery_csv(p)?,
        None => spec.simulate(&config.sizes, &mut SeededRng::new(a.seed))?,
    };
    if battery.groups().is_none() {
        bail!("battery has no group column");
    }
    let method = match config.wlr_cdf {
        WlrCdfConfig::Analytic => CdfMethod::Analytic,
        WlrCdfConfig::MonteCarlo { n_mc } => CdfMethod::MonteCarlo { n_mc, seed: a.seed },
    };
    let cdfs = null_wlr_cdf(&spec, method)?;
    let model = CellModel::Grouped { spec, config };
    emit(Some(&a.out.join("battery.csv")), &battery_csv(&battery)?)?;
    let mut paths = Vec::new();
    for m in [Method::GroupedWlr, Method::GroupedBayes, Method::WeightedP] {
        let path = method_path(m, &battery, Some(&model), Some(&cdfs), None, DEFAULT_ETA)?;
        emit(
            Some(&a.out.join(format!("{}.csv", m.name()))),
            &path_csv(&path)?,
        )?;
        paths.push(path);
    }
    let cmp = compare_paths(&paths[1], &paths[0])?;
    eprintln!("sup_norm(grouped-bayes, grouped-wlr)={}", cmp.sup_norm);
    emit(
        Some(&a.out.join("grouped-bayes-vs-grouped-wlr.csv")),
        &comparison_csv(&paths[1], &paths[0], &cmp)?,
    )
}

fn scenario(a: ScenarioArgs) -> anyhow::Result<()> {
    let mut config = ScenarioConfig::load(&a.config)?;
    if let Some(seed) = a.seed {
        config.seed = seed;
    }
    let root = a
        .out
        .or_else(|| config.output_dir.clone())
        .or_else(|| std::env::var_os(OUTPUT_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("fdrpath-out"));
    let report = run_scenario(&config, &root)?;
    println!(
        "wrote {} files to {}",
        report.files.len(),
        report.dir.display()
    );
    Ok(())
}

fn import(a: ImportArgs) -> anyhow::Result<()> {
    let battery = load_pvalues_csv(&a.input)?;
    emit(a.out.as_deref(), &battery_csv(&battery)?)
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Fdr(a) => fdr(a),
        Command::Path {
            command: PathCommand::Compare(a),
        } => compare(a),
        Command::Diagnose(a) => diagnose(a),
        Command::Grouped(a) => grouped(a),
        Command::Scenario {
            command: ScenarioCommand::Run(a),
        } => scenario(a),
        Command::ImportPvalues(a) => import(a),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
