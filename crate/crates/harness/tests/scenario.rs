use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use fdrpath_harness::scenario::compute_scenario;
use fdrpath_harness::{run_scenario, HarnessError, ScenarioConfig};

fn config_file(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../configs")
        .join(name)
}

fn small_concordance() -> ScenarioConfig {
    let mut c = ScenarioConfig::load(&config_file("concordance.json")).unwrap();
    c.replicates = 3;
    c.sweep.m = vec![200, 2000];
    c
}

fn read_tree(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(
                    p.strip_prefix(dir).unwrap().to_path_buf(),
                    fs::read(&p).unwrap(),
                );
            }
        }
    }
    out
}

#[test]
fn bundled_configs_parse() {
    for name in ["concordance.json", "pi0-shapes.json", "grouped.json"] {
        let c = ScenarioConfig::load(&config_file(name)).unwrap();
        assert!(!c.cells().unwrap().is_empty(), "{name}");
    }
}

#[test]
fn reruns_are_byte_identical() {
    let c = small_concordance();
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let ra = run_scenario(&c, a.path()).unwrap();
    let rb = run_scenario(&c, b.path()).unwrap();
    assert_eq!(ra.files, rb.files);
    let (ta, tb) = (read_tree(&ra.dir), read_tree(&rb.dir));
    assert_eq!(ta.len(), ra.files.len());
    assert_eq!(ta, tb);
}

#[test]
fn concordance_outputs() {
    let mut c = small_concordance();
    c.sweep.m = vec![200, 2000, 20000];
    c.replicates = 1;
    let dir = tempfile::tempdir().unwrap();
    let report = run_scenario(&c, dir.path()).unwrap();
    let tables: Vec<_> = report
        .files
        .iter()
        .filter(|f| f.starts_with("comparisons") && f.extension().is_some_and(|e| e == "csv"))
        .collect();
    assert_eq!(tables.len(), 3);
    let plots = report
        .files
        .iter()
        .filter(|f| {
            f.to_string_lossy()
                .ends_with("oracle-bayes-vs-oracle-freq.svg")
        })
        .count();
    assert_eq!(plots, 3);
    let table = fs::read_to_string(report.dir.join(tables[0])).unwrap();
    assert!(table.starts_with("rank,threshold_a,threshold_b,fdr_a,fdr_b,diff,ratio\n"));
    let summary = fs::read_to_string(report.dir.join("summary_comparisons.csv")).unwrap();
    assert_eq!(summary.lines().count(), 4);
}

#[test]
fn replicates_do_not_depend_on_each_other_or_on_scheduling() {
    let c = small_concordance();
    let mut fewer = c.clone();
    fewer.replicates = 2;
    let full = compute_scenario(&c).unwrap();
    let part = compute_scenario(&fewer).unwrap();
    for p in &part.replicates {
        let f = full
            .replicates
            .iter()
            .find(|r| r.cell == p.cell && r.replicate == p.replicate)
            .unwrap();
        assert_eq!(f.seed, p.seed);
        assert_eq!(f.pi0_tilde, p.pi0_tilde);
        let fdp = |r: &fdrpath_harness::scenario::ReplicateResult| {
            r.methods.iter().map(|m| m.truth.fdp).collect::<Vec<_>>()
        };
        assert_eq!(fdp(f), fdp(p));
    }
    let pool = |n| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .unwrap()
    };
    let one = pool(1).install(|| compute_scenario(&c).unwrap().artifacts().unwrap());
    let four = pool(4).install(|| compute_scenario(&c).unwrap().artifacts().unwrap());
    assert_eq!(one, four);
}

#[test]
fn pi0_and_diagnosis_tables() {
    let mut c = ScenarioConfig::load(&config_file("pi0-shapes.json")).unwrap();
    c.replicates = 2;
    c.sweep.alt_shape = vec![0.3, 0.9];
    if let fdrpath_harness::config::ModelConfig::TwoGroups(s) = &mut c.model {
        s.m = 1000;
    }
    let dir = tempfile::tempdir().unwrap();
    let report = run_scenario(&c, dir.path()).unwrap();
    let pi0 = fs::read_to_string(report.dir.join("summary_pi0.csv")).unwrap();
    for cell in ["shape0.3", "shape0.9"] {
        for est in ["pi0_tilde", "pi0_hat"] {
            assert!(pi0.contains(&format!("{cell},{est},2,")), "{cell} {est}");
        }
    }
    let diag = fs::read_to_string(report.dir.join("diagnosis.csv")).unwrap();
    assert_eq!(diag.lines().count(), 1 + 2 * 2 * 9);
    assert!(report.dir.join("summary_diagnosis.csv").exists());
    assert!(report.dir.join("plots/pi0.svg").exists());
}

#[test]
fn grouped_scenario_runs() {
    let mut c = ScenarioConfig::load(&config_file("grouped.json")).unwrap();
    c.replicates = 1;
    let dir = tempfile::tempdir().unwrap();
    let report = run_scenario(&c, dir.path()).unwrap();
    let summary = fs::read_to_string(report.dir.join("summary_methods.csv")).unwrap();
    for m in ["grouped-wlr", "grouped-bayes", "weighted-p", "bh"] {
        assert!(summary.contains(&format!("base,{m},1,")), "{m}");
    }
    let battery = fs::read_to_string(report.dir.join("batteries/base/rep0.csv")).unwrap();
    assert!(battery.starts_with("index,z,zsq,pvalue,group,gamma_truth\n"));
}

#[test]
fn unwritable_output_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    fs::write(&blocker, "x").unwrap();
    let mut c = small_concordance();
    c.replicates = 1;
    assert!(matches!(
        run_scenario(&c, &blocker),
        Err(HarnessError::Io { .. })
    ));
}

#[test]
fn seed_changes_outputs() {
    let mut c = small_concordance();
    c.replicates = 1;
    let a = compute_scenario(&c).unwrap().artifacts().unwrap();
    c.seed += 100;
    let b = compute_scenario(&c).unwrap().artifacts().unwrap();
    assert_ne!(
        a[Path::new("replicates.csv")],
        b[Path::new("replicates.csv")]
    );
}
