//! Column-oriented estimation dataset: named numeric columns (NaN marks a
//! missing value) keyed to entity, year, and cluster identifiers.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::panel::FirmYearObservation;

/// A rectangular dataset ready for estimation. Missing values are NaN;
/// listwise deletion happens inside each estimator.
#[derive(Debug, Clone, Default)]
pub struct Dataset {
    pub entity: Vec<String>,
    pub year: Vec<i32>,
    columns: BTreeMap<String, Vec<f64>>,
}

impl Dataset {
    pub fn new(entity: Vec<String>, year: Vec<i32>) -> Self {
        assert_eq!(entity.len(), year.len());
        Dataset { entity, year, columns: BTreeMap::new() }
    }

    pub fn len(&self) -> usize {
        self.entity.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entity.is_empty()
    }

    /// Adds or replaces a column; `None` entries become NaN.
    pub fn add_column(&mut self, name: &str, values: Vec<Option<f64>>) {
        assert_eq!(values.len(), self.len(), "column {name} length mismatch");
        self.columns.insert(
            name.to_string(),
            values.into_iter().map(|v| v.unwrap_or(f64::NAN)).collect(),
        );
    }

    pub fn add_dense_column(&mut self, name: &str, values: Vec<f64>) {
        assert_eq!(values.len(), self.len(), "column {name} length mismatch");
        self.columns.insert(name.to_string(), values);
    }

    pub fn has_column(&self, name: &str) -> bool {
        name == "const" || self.columns.contains_key(name)
    }

    /// Column values; the reserved name `const` synthesizes an all-ones
    /// column.
    pub fn column(&self, name: &str) -> Result<Vec<f64>> {
        if name == "const" {
            return Ok(vec![1.0; self.len()]);
        }
        self.columns
            .get(name)
            .cloned()
            .ok_or_else(|| Error::Config(format!("unknown column {name}")))
    }

    pub fn column_names(&self) -> Vec<&str> {
        self.columns.keys().map(|s| s.as_str()).collect()
    }

    /// Builds the standard estimation dataset from an assembled panel.
    pub fn from_panel(panel: &[FirmYearObservation]) -> Dataset {
        let entity: Vec<String> = panel.iter().map(|r| r.firm_id.clone()).collect();
        let year: Vec<i32> = panel.iter().map(|r| r.year).collect();
        let mut data = Dataset::new(entity, year);
        macro_rules! col {
            ($name:literal, $field:ident) => {
                data.add_column($name, panel.iter().map(|r| r.$field).collect());
            };
        }
        col!("readiness_baseline", readiness_baseline);
        col!("readiness_external", readiness_external);
        col!("readiness_internal", readiness_internal);
        col!("ai_strategy", ai_strategy);
        col!("ai_talent", ai_talent);
        col!("ai_asset", ai_asset);
        col!("ai_capability", ai_capability);
        col!("revenue_per_employee", revenue_per_employee);
        col!("tfp", tfp);
        col!("trademarks", trademarks);
        col!("log_total_assets", log_total_assets);
        col!("leverage", leverage);
        col!("tobin_q", tobin_q);
        col!("lagged_policy", lagged_policy);
        data
    }

    /// Rows where every listed column is non-missing.
    pub fn complete_rows(&self, columns: &[&str]) -> Result<Vec<usize>> {
        let cols: Vec<Vec<f64>> = columns
            .iter()
            .map(|c| self.column(c))
            .collect::<Result<_>>()?;
        Ok((0..self.len())
            .filter(|&i| cols.iter().all(|c| c[i].is_finite()))
            .collect())
    }
}

/// Adds the elementwise product column named `{a}_x_{b}`; missing if
/// either factor is missing. Returns the new column's name.
pub fn build_interaction(data: &mut Dataset, a: &str, b: &str) -> Result<String> {
    let ca = data.column(a)?;
    let cb = data.column(b)?;
    let name = format!("{a}_x_{b}");
    let product: Vec<f64> = ca.iter().zip(&cb).map(|(x, y)| x * y).collect();
    data.add_dense_column(&name, product);
    Ok(name)
}
