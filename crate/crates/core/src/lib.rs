//! Bayesian and frequentist false discovery rate control under a common
//! rejection-path data model.
//!
//! The crate is organised bottom-up:
//!
//! * [`statdist`]: densities, cdfs, quantiles and seeded sampling for the
//!   normal, chi-square(1) and gamma families and their finite mixtures.
//! * [`twogroups`]: the generative two-groups model, simulated test
//!   batteries, Bayes factors and oracle local fdrs.
//! * [`freq`]: p-values, quantile estimators of the null proportion,
//!   Benjamini-Hochberg and q-value rejection paths.
//! * [`peb`]: parametric empirical Bayes fitting of a centered normal
//!   mixture alternative by EM, and the resulting local fdrs.
//! * [`rpath`]: rejection paths, level-alpha cutoffs, path comparison and
//!   rank correlation.
//! * [`diagnose`]: quantile-based diagnosis of a fitted mixture.
//! * [`grouped`]: non-exchangeable (grouped) testing with weighted
//!   likelihood ratio statistics.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod diagnose;
mod error;
pub mod freq;
pub mod grouped;
pub mod peb;
pub mod rpath;
pub mod statdist;
pub mod twogroups;

pub use error::{Error, Result};
pub use rpath::RejectionPath;
pub use statdist::{DistFamily, Distribution, MixtureDensity, SeededRng};
pub use twogroups::{TestBattery, TwoGroupsSpec};

/// Default quantile level used by the null-proportion estimators.
pub const DEFAULT_ETA: f64 = 0.5;
