//! CSV readers and writers for batteries, rejection paths and path
//! comparisons. Floats are written with 17 significant digits, which
//! round-trips every `f64`.

use std::fs;
use std::io::Write;
use std::path::Path;

use fdrpath::rpath::PathComparison;
use fdrpath::{DistFamily, Distribution, RejectionPath, TestBattery};

use crate::error::{HarnessError, Result};

pub const BATTERY_HEADER: [&str; 4] = ["index", "z", "zsq", "pvalue"];
pub const PATH_HEADER: [&str; 3] = ["rank", "threshold", "fdr_estimate"];
pub const COMPARISON_HEADER: [&str; 7] = [
    "rank",
    "threshold_a",
    "threshold_b",
    "fdr_a",
    "fdr_b",
    "diff",
    "ratio",
];

pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

pub(crate) fn create_parent(path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    }
    Ok(())
}

pub(crate) fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    create_parent(path)?;
    let mut f = fs::File::create(path).map_err(|e| HarnessError::io(path, e))?;
    f.write_all(bytes).map_err(|e| HarnessError::io(path, e))
}

fn finish(w: csv::Writer<Vec<u8>>) -> Result<Vec<u8>> {
    w.into_inner()
        .map_err(|e| HarnessError::Config(format!("csv buffer: {e}")))
}

pub fn battery_csv(battery: &TestBattery) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header: Vec<&str> = BATTERY_HEADER.to_vec();
    if battery.groups().is_some() {
        header.push("group");
    }
    if battery.gamma_truth().is_some() {
        header.push("gamma_truth");
    }
    w.write_record(&header)?;
    for i in 0..battery.len() {
        let mut row = vec![
            i.to_string(),
            fmt_f64(battery.z()[i]),
            fmt_f64(battery.zsq()[i]),
            fmt_f64(battery.pvalues()[i]),
        ];
        if let Some(g) = battery.groups() {
            row.push(g[i].to_string());
        }
        if let Some(t) = battery.gamma_truth() {
            row.push(u8::from(t[i]).to_string());
        }
        w.write_record(&row)?;
    }
    finish(w)
}

pub fn write_battery_csv(battery: &TestBattery, path: &Path) -> Result<()> {
    write_file(path, &battery_csv(battery)?)
}

fn parse_field<T: std::str::FromStr>(path: &Path, line: usize, name: &str, raw: &str) -> Result<T> {
    raw.trim().parse().map_err(|_| HarnessError::Parse {
        path: path.to_path_buf(),
        line,
        reason: format!("cannot parse {name} from {raw:?}"),
    })
}

pub fn read_battery_csv(path: &Path) -> Result<TestBattery> {
    let mut r = csv::Reader::from_path(path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(io) => HarnessError::io(path, io),
        other => HarnessError::Config(format!("{}: {other:?}", path.display())),
    })?;
    let header = r.headers()?.clone();
    let names: Vec<&str> = header.iter().collect();
    if names.len() < 4 || names[..4] != BATTERY_HEADER {
        return Err(HarnessError::Parse {
            path: path.to_path_buf(),
            line: 1,
            reason: format!("expected header starting {}", BATTERY_HEADER.join(",")),
        });
    }
    let group_col = names.iter().position(|n| *n == "group");
    let truth_col = names.iter().position(|n| *n == "gamma_truth");
    let (mut z, mut zsq, mut p) = (Vec::new(), Vec::new(), Vec::new());
    let mut group = group_col.map(|_| Vec::new());
    let mut truth = truth_col.map(|_| Vec::new());
    for rec in r.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        z.push(parse_field::<f64>(path, line, "z", &rec[1])?);
        zsq.push(parse_field::<f64>(path, line, "zsq", &rec[2])?);
        p.push(parse_field::<f64>(path, line, "pvalue", &rec[3])?);
        if let (Some(c), Some(g)) = (group_col, group.as_mut()) {
            g.push(parse_field::<usize>(path, line, "group", &rec[c])?);
        }
        if let (Some(c), Some(t)) = (truth_col, truth.as_mut()) {
            t.push(match rec[c].trim() {
                "1" | "true" => true,
                "0" | "false" => false,
                other => {
                    return Err(HarnessError::Parse {
                        path: path.to_path_buf(),
                        line,
                        reason: format!("gamma_truth must be 0 or 1, got {other:?}"),
                    })
                }
            });
        }
    }
    Ok(TestBattery::from_parts(z, zsq, p, truth, group)?)
}

pub fn path_csv(path: &RejectionPath) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(PATH_HEADER)?;
    for (i, (t, f)) in path.thresholds().iter().zip(path.fdr()).enumerate() {
        w.write_record([(i + 1).to_string(), fmt_f64(*t), fmt_f64(*f)])?;
    }
    finish(w)
}

pub fn write_path_csv(path: &RejectionPath, file: &Path) -> Result<()> {
    write_file(file, &path_csv(path)?)
}

/// Read a path CSV. Test indices are not stored, so positions stand in
/// for them.
pub fn read_path_csv(file: &Path, label: &str) -> Result<RejectionPath> {
    let mut r = csv::Reader::from_path(file).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(io) => HarnessError::io(file, io),
        other => HarnessError::Config(format!("{}: {other:?}", file.display())),
    })?;
    let names: Vec<String> = r.headers()?.iter().map(str::to_owned).collect();
    if names != PATH_HEADER {
        return Err(HarnessError::Parse {
            path: file.to_path_buf(),
            line: 1,
            reason: format!("expected header {}", PATH_HEADER.join(",")),
        });
    }
    let (mut thresholds, mut fdr) = (Vec::new(), Vec::new());
    for rec in r.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        thresholds.push(parse_field::<f64>(file, line, "threshold", &rec[1])?);
        fdr.push(parse_field::<f64>(file, line, "fdr_estimate", &rec[2])?);
    }
    let indices = (0..fdr.len()).collect();
    Ok(RejectionPath::new(label, indices, thresholds, fdr, None)?)
}

pub fn comparison_csv(
    a: &RejectionPath,
    b: &RejectionPath,
    cmp: &PathComparison,
) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(COMPARISON_HEADER)?;
    for i in 0..cmp.len() {
        w.write_record([
            (i + 1).to_string(),
            fmt_f64(a.thresholds()[i]),
            fmt_f64(b.thresholds()[i]),
            fmt_f64(a.fdr()[i]),
            fmt_f64(b.fdr()[i]),
            fmt_f64(cmp.diff[i]),
            cmp.ratio[i].map(fmt_f64).unwrap_or_default(),
        ])?;
    }
    finish(w)
}

/// Load one p-value per line. A single non-numeric header line is allowed;
/// blank lines are skipped. `z` is rebuilt as the positive two-sided
/// normal score of each p-value.
pub fn load_pvalues_csv(path: &Path) -> Result<TestBattery> {
    let text = fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
    let mut pvalues = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let field = raw.trim();
        if field.is_empty() {
            continue;
        }
        let is_header = line == 1
            && field
                .chars()
                .all(|c| c.is_ascii_alphabetic() || c == '_' || c == '"');
        if is_header {
            continue;
        }
        let p: f64 = parse_field(path, line, "p-value", field)?;
        if !(p > 0.0 && p <= 1.0) {
            return Err(HarnessError::Domain {
                path: path.to_path_buf(),
                line,
                reason: format!("p-value {p} outside (0, 1]"),
            });
        }
        pvalues.push(p);
    }
    if pvalues.is_empty() {
        return Err(HarnessError::Domain {
            path: path.to_path_buf(),
            line: 0,
            reason: "no p-values found".into(),
        });
    }
    let normal = DistFamily::standard_normal();
    let z = pvalues
        .iter()
        .map(|&p| {
            normal
                .quantile(p / 2.0)
                .map(|q| if q < 0.0 { -q } else { 0.0 })
        })
        .collect::<fdrpath::Result<Vec<f64>>>()?;
    let zsq = z.iter().map(|v| v * v).collect();
    Ok(TestBattery::from_parts(z, zsq, pvalues, None, None)?)
}
