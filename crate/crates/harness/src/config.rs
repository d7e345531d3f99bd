//! Scenario configuration, read from JSON. Unknown keys are rejected.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use fdrpath::diagnose::{DEFAULT_FLAG_THRESHOLD, DEFAULT_LEVELS};
use fdrpath::grouped::{GroupModel, GroupSpec, DEFAULT_MC_DRAWS};
use fdrpath::{DistFamily, TwoGroupsSpec, DEFAULT_ETA};
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    /// Benjamini-Hochberg.
    Bh,
    /// BH scaled by the quantile estimate of pi0.
    Qvalue,
    /// Bayesian path of the fitted empirical Bayes local fdrs.
    Peb,
    /// p-value path scaled by the fitted pi0.
    PebFreq,
    /// Bayesian path of the true local fdrs.
    OracleBayes,
    /// p-value path scaled by the true pi0.
    OracleFreq,
    GroupedWlr,
    GroupedBayes,
    WeightedP,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Bh => "bh",
            Method::Qvalue => "qvalue",
            Method::Peb => "peb",
            Method::PebFreq => "peb-freq",
            Method::OracleBayes => "oracle-bayes",
            Method::OracleFreq => "oracle-freq",
            Method::GroupedWlr => "grouped-wlr",
            Method::GroupedBayes => "grouped-bayes",
            Method::WeightedP => "weighted-p",
        }
    }

    pub fn needs_fit(self) -> bool {
        matches!(self, Method::Peb | Method::PebFreq)
    }

    fn grouped_only(self) -> bool {
        matches!(
            self,
            Method::GroupedWlr | Method::GroupedBayes | Method::WeightedP
        )
    }

    fn two_groups_only(self) -> bool {
        matches!(self, Method::OracleBayes | Method::OracleFreq)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WlrCdfConfig {
    #[default]
    Analytic,
    MonteCarlo {
        n_mc: usize,
    },
}

impl WlrCdfConfig {
    pub fn default_monte_carlo() -> Self {
        WlrCdfConfig::MonteCarlo {
            n_mc: DEFAULT_MC_DRAWS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroupedConfig {
    pub groups: Vec<GroupModel>,
    /// Number of tests drawn from each group.
    pub sizes: Vec<usize>,
    /// Weighted-p weights per group; defaults to the prior odds
    /// `(1 - pi0) / pi0`.
    #[serde(default)]
    pub weights: Option<Vec<f64>>,
    #[serde(default)]
    pub wlr_cdf: WlrCdfConfig,
}

impl GroupedConfig {
    pub fn spec(&self) -> Result<GroupSpec> {
        Ok(GroupSpec::new(self.groups.clone())?)
    }

    pub fn weights(&self) -> Vec<f64> {
        self.weights
            .clone()
            .unwrap_or_else(|| self.groups.iter().map(|g| (1.0 - g.pi0) / g.pi0).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelConfig {
    TwoGroups(TwoGroupsSpec),
    Grouped(GroupedConfig),
}

/// Values swept over; cells are the Cartesian product of the non-empty
/// lists. Only two-groups models can be swept.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub m: Vec<usize>,
    /// Shape of a gamma alternative on z^2; the scale is kept.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub alt_shape: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SavePaths {
    None,
    /// Replicate 0 of every cell.
    #[default]
    First,
    All,
}

fn default_eta() -> f64 {
    DEFAULT_ETA
}

fn default_levels() -> Vec<f64> {
    DEFAULT_LEVELS.to_vec()
}

fn default_threshold() -> f64 {
    DEFAULT_FLAG_THRESHOLD
}

fn default_alpha() -> f64 {
    0.1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub id: String,
    pub model: ModelConfig,
    #[serde(default)]
    pub sweep: Sweep,
    pub methods: Vec<Method>,
    pub replicates: usize,
    pub seed: u64,
    #[serde(default = "default_eta")]
    pub eta: f64,
    #[serde(default = "default_levels")]
    pub levels: Vec<f64>,
    #[serde(default = "default_threshold")]
    pub flag_threshold: f64,
    /// Level used to cut each path for the truth evaluation.
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    /// Pairs of methods whose paths are compared position by position.
    #[serde(default)]
    pub comparisons: Vec<(Method, Method)>,
    #[serde(default)]
    pub save_paths: SavePaths,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

/// One resolved point of the sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub label: String,
    pub model: CellModel,
}

#[derive(Debug, Clone, PartialEq)]
pub enum CellModel {
    TwoGroups(TwoGroupsSpec),
    Grouped {
        spec: GroupSpec,
        config: GroupedConfig,
    },
}

impl CellModel {
    pub fn true_pi0(&self) -> f64 {
        match self {
            CellModel::TwoGroups(s) => s.pi0,
            CellModel::Grouped { config, .. } => {
                let m: usize = config.sizes.iter().sum();
                let mass: f64 = config
                    .groups
                    .iter()
                    .zip(&config.sizes)
                    .map(|(g, &n)| g.pi0 * n as f64)
                    .sum();
                mass / m.max(1) as f64
            }
        }
    }
}

fn invalid(msg: impl Into<String>) -> HarnessError {
    HarnessError::Config(msg.into())
}

impl ScenarioConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.id.is_empty()
            || !self
                .id
                .chars()
                .all(|c| c.is_ascii_alphanumeric() || "-_.".contains(c))
        {
            return Err(invalid("id must be non-empty and use only [A-Za-z0-9._-]"));
        }
        if self.replicates == 0 {
            return Err(invalid("replicates must be at least 1"));
        }
        if self.methods.is_empty() {
            return Err(invalid("at least one method is required"));
        }
        let unique: BTreeSet<_> = self.methods.iter().collect();
        if unique.len() != self.methods.len() {
            return Err(invalid("methods must not repeat"));
        }
        if !(self.eta > 0.0 && self.eta < 1.0) {
            return Err(invalid(format!("eta must lie in (0, 1), got {}", self.eta)));
        }
        if self.levels.is_empty() || self.levels.iter().any(|l| !(*l > 0.0 && *l < 1.0)) {
            return Err(invalid("levels must be non-empty and inside (0, 1)"));
        }
        if !(self.flag_threshold > 0.0 && self.flag_threshold < 1.0) {
            return Err(invalid("flag_threshold must lie in (0, 1)"));
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(invalid("alpha must lie in (0, 1]"));
        }
        for (a, b) in &self.comparisons {
            if !unique.contains(a) || !unique.contains(b) {
                return Err(invalid(format!(
                    "comparison {} vs {} uses a method that is not run",
                    a.name(),
                    b.name()
                )));
            }
        }
        let grouped = matches!(self.model, ModelConfig::Grouped(_));
        for m in &self.methods {
            if grouped && m.two_groups_only() {
                return Err(invalid(format!("{} needs a two-groups model", m.name())));
            }
            if !grouped && m.grouped_only() {
                return Err(invalid(format!("{} needs a grouped model", m.name())));
            }
        }
        if let ModelConfig::Grouped(g) = &self.model {
            g.spec()?;
            if g.sizes.len() != g.groups.len() {
                return Err(invalid("sizes must give one count per group"));
            }
            if g.sizes.iter().sum::<usize>() == 0 {
                return Err(invalid("grouped model has no tests"));
            }
            if let Some(w) = &g.weights {
                if w.len() != g.groups.len() {
                    return Err(invalid("weights must give one value per group"));
                }
            }
            if self.methods.contains(&Method::WeightedP)
                && g.weights().iter().any(|w| !(*w > 0.0 && w.is_finite()))
            {
                return Err(invalid("weighted-p needs positive finite weights; set them explicitly when a group has pi0 of 0 or 1"));
            }
            if self.methods.contains(&Method::GroupedWlr) && g.groups.iter().any(|x| x.pi0 == 0.0) {
                return Err(invalid("grouped-wlr needs every group pi0 above 0"));
            }
            if let WlrCdfConfig::MonteCarlo { n_mc: 0 } = g.wlr_cdf {
                return Err(invalid("n_mc must be positive"));
            }
            if !self.sweep.m.is_empty() || !self.sweep.alt_shape.is_empty() {
                return Err(invalid("sweeps apply to two-groups models only"));
            }
        }
        for cell in self.cells()? {
            if let CellModel::TwoGroups(s) = cell.model {
                s.validate()?;
            }
        }
        Ok(())
    }

    /// Resolve the sweep into cells, in a fixed order (m outer, shape inner).
    pub fn cells(&self) -> Result<Vec<Cell>> {
        match &self.model {
            ModelConfig::Grouped(g) => Ok(vec![Cell {
                label: "base".into(),
                model: CellModel::Grouped {
                    spec: g.spec()?,
                    config: g.clone(),
                },
            }]),
            ModelConfig::TwoGroups(base) => {
                let ms: Vec<Option<usize>> = if self.sweep.m.is_empty() {
                    vec![None]
                } else {
                    self.sweep.m.iter().copied().map(Some).collect()
                };
                let shapes: Vec<Option<f64>> = if self.sweep.alt_shape.is_empty() {
                    vec![None]
                } else {
                    self.sweep.alt_shape.iter().copied().map(Some).collect()
                };
                let mut cells = Vec::new();
                for m in &ms {
                    for shape in &shapes {
                        let mut spec = *base;
                        let mut parts = Vec::new();
                        if let Some(m) = m {
                            spec.m = *m;
                            parts.push(format!("m{m}"));
                        }
                        if let Some(shape) = shape {
                            let (_, scale) = spec.alt.as_gamma().ok_or_else(|| {
                                invalid("alt_shape sweep needs a gamma alternative")
                            })?;
                            spec.alt = DistFamily::gamma(*shape, scale)?;
                            parts.push(format!("shape{shape}"));
                        }
                        let label = if parts.is_empty() {
                            "base".to_string()
                        } else {
                            parts.join("-")
                        };
                        cells.push(Cell {
                            label,
                            model: CellModel::TwoGroups(spec),
                        });
                    }
                }
                Ok(cells)
            }
        }
    }
}
