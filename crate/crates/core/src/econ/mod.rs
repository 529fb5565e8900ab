//! Estimator core: fixed-effects OLS with cluster-robust inference, 2SLS
//! with weak-instrument and underidentification diagnostics, Poisson
//! pseudo-ML with fixed-effect absorption, and the Wooldridge one-step
//! GMM production-function estimator.

mod dataset;
mod fe;
mod iv;
mod ols;
mod poisson;
mod report;
mod tfp;

pub use dataset::{build_interaction, Dataset};
pub use iv::{augment_interaction_instruments, tsls};
pub use ols::fe_ols;
pub use poisson::{diffusion_poisson, ppml_fe, trend_poisson, DiffusionSource, TrendVariant};
pub use tfp::{wooldridge_tfp, TfpInput, TfpResult};

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{Error, Result};

/// Which fixed effects a model absorbs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct FixedEffects {
    pub firm: bool,
    pub year: bool,
}

impl FixedEffects {
    pub const NONE: FixedEffects = FixedEffects { firm: false, year: false };
    pub const FIRM: FixedEffects = FixedEffects { firm: true, year: false };
    pub const YEAR: FixedEffects = FixedEffects { firm: false, year: true };
    pub const TWO_WAY: FixedEffects = FixedEffects { firm: true, year: true };

    pub fn any(self) -> bool {
        self.firm || self.year
    }
}

/// Grouping for the cluster-robust sandwich.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ClusterBy {
    #[default]
    Firm,
    Year,
    /// Every observation its own cluster (heteroskedasticity-robust).
    Observation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Linear,
    Poisson,
}

/// Declarative regression specification.
#[derive(Debug, Clone, Serialize)]
pub struct ModelSpec {
    pub dependent: String,
    pub regressors: Vec<String>,
    pub fixed_effects: FixedEffects,
    pub cluster: ClusterBy,
    pub endogenous: Vec<String>,
    pub instruments: Vec<String>,
    pub family: Family,
}

impl ModelSpec {
    pub fn linear(dependent: &str, regressors: &[&str]) -> Self {
        ModelSpec {
            dependent: dependent.to_string(),
            regressors: regressors.iter().map(|s| s.to_string()).collect(),
            fixed_effects: FixedEffects::NONE,
            cluster: ClusterBy::Firm,
            endogenous: Vec::new(),
            instruments: Vec::new(),
            family: Family::Linear,
        }
    }

    pub fn poisson(dependent: &str, regressors: &[&str]) -> Self {
        let mut spec = ModelSpec::linear(dependent, regressors);
        spec.family = Family::Poisson;
        spec
    }

    pub fn with_fe(mut self, fe: FixedEffects) -> Self {
        self.fixed_effects = fe;
        self
    }

    pub fn with_cluster(mut self, cluster: ClusterBy) -> Self {
        self.cluster = cluster;
        self
    }

    pub fn with_iv(mut self, endogenous: &[&str], instruments: &[&str]) -> Self {
        self.endogenous = endogenous.iter().map(|s| s.to_string()).collect();
        self.instruments = instruments.iter().map(|s| s.to_string()).collect();
        self
    }

    pub(crate) fn validate(&self) -> Result<()> {
        for e in &self.endogenous {
            if !self.regressors.contains(e) {
                return Err(Error::Config(format!(
                    "endogenous variable {e} is not among the regressors"
                )));
            }
        }
        for z in &self.instruments {
            if self.regressors.contains(z) {
                return Err(Error::Config(format!(
                    "instrument {z} also appears among the regressors"
                )));
            }
        }
        if !self.endogenous.is_empty() && self.instruments.len() < self.endogenous.len() {
            return Err(Error::Estimation(format!(
                "underidentified: {} instruments for {} endogenous regressors",
                self.instruments.len(),
                self.endogenous.len()
            )));
        }
        Ok(())
    }
}

/// One estimated coefficient with its cluster-robust standard error.
#[derive(Debug, Clone, Serialize)]
pub struct Coefficient {
    pub name: String,
    pub estimate: f64,
    pub se: f64,
}

impl Coefficient {
    pub fn t_stat(&self) -> f64 {
        self.estimate / self.se
    }

    /// Two-sided p-value from a t distribution with `df` degrees of
    /// freedom (G−1 under cluster-robust inference).
    pub fn p_value(&self, df: f64) -> f64 {
        report::t_p_value(self.t_stat(), df)
    }
}

/// Observations removed before estimation, by reason.
#[derive(Debug, Clone, Default, Serialize)]
pub struct DroppedReport {
    pub missing: usize,
    pub singleton: usize,
    pub separated: usize,
    pub collinear: Vec<String>,
}

/// Common result shape for every estimator in this module.
#[derive(Debug, Clone, Serialize)]
pub struct RegressionResult {
    pub model: String,
    pub coefficients: Vec<Coefficient>,
    pub n_obs: usize,
    pub n_clusters: usize,
    pub r_squared_within: Option<f64>,
    pub r_squared_overall: Option<f64>,
    pub fe_absorbed: BTreeMap<String, usize>,
    pub diagnostics: BTreeMap<String, f64>,
    pub dropped: DroppedReport,
    pub warnings: Vec<String>,
}

impl RegressionResult {
    pub fn coefficient(&self, name: &str) -> Option<&Coefficient> {
        self.coefficients.iter().find(|c| c.name == name)
    }

    /// Degrees of freedom used for p-values: clusters − 1.
    pub fn inference_df(&self) -> f64 {
        (self.n_clusters.max(2) - 1) as f64
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("regression result serializes")
    }

    pub fn to_table(&self, title: &str) -> String {
        report::format_table(self, title)
    }
}
