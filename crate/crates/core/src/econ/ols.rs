//! Fixed-effects OLS with cluster-robust standard errors. Fixed effects
//! are absorbed by iterated demeaning; the explicit-dummy solution is the
//! test oracle.

use std::collections::BTreeMap;

use super::dataset::Dataset;
use super::fe::{
    cluster_codes, cluster_sandwich, demean, drop_singletons, encode, fe_dof, solve_wls, Grouping,
};
use super::{DroppedReport, Family, ModelSpec, RegressionResult};
use crate::error::{Error, Result};

/// The estimation sample after listwise deletion and singleton removal,
/// with group encodings for demeaning and clustering.
pub(super) struct Prepared {
    pub rows: Vec<usize>,
    pub firm: Grouping,
    pub year: Grouping,
    pub clusters: Grouping,
    pub dropped: DroppedReport,
    /// Regressor list actually used (auto-intercept applied).
    pub regressors: Vec<String>,
}

pub(super) fn prepare_sample(
    spec: &ModelSpec,
    data: &Dataset,
    extra_columns: &[&str],
) -> Result<Prepared> {
    spec.validate()?;
    let mut regressors = spec.regressors.clone();
    if !spec.fixed_effects.any() && !regressors.iter().any(|r| r == "const") {
        regressors.insert(0, "const".to_string());
    }
    let mut needed: Vec<&str> = vec![spec.dependent.as_str()];
    needed.extend(regressors.iter().map(|s| s.as_str()));
    needed.extend(extra_columns.iter().copied());
    let rows = data.complete_rows(&needed)?;
    let mut dropped = DroppedReport {
        missing: data.len() - rows.len(),
        ..DroppedReport::default()
    };

    let firm_keys: Vec<&str> = rows.iter().map(|&i| data.entity[i].as_str()).collect();
    let year_keys: Vec<i32> = rows.iter().map(|&i| data.year[i]).collect();
    let rows = if spec.fixed_effects.any() {
        let firm0 = encode(&firm_keys);
        let year0 = encode(&year_keys);
        let (kept, n_singleton) = drop_singletons(spec.fixed_effects, &firm0.codes, &year0.codes);
        dropped.singleton = n_singleton;
        kept.into_iter().map(|i| rows[i]).collect()
    } else {
        rows
    };
    if rows.len() < regressors.len() + 1 {
        return Err(Error::Estimation(format!(
            "estimation sample has {} rows for {} parameters",
            rows.len(),
            regressors.len()
        )));
    }
    let firm_keys: Vec<&str> = rows.iter().map(|&i| data.entity[i].as_str()).collect();
    let year_keys: Vec<i32> = rows.iter().map(|&i| data.year[i]).collect();
    let firm = encode(&firm_keys);
    let year = encode(&year_keys);
    let clusters = cluster_codes(spec.cluster, &firm, &year, rows.len());
    if clusters.n_groups < 2 {
        return Err(Error::Estimation(
            "fewer than 2 clusters in the estimation sample".to_string(),
        ));
    }
    Ok(Prepared { rows, firm, year, clusters, dropped, regressors })
}

pub(super) fn take(data: &Dataset, name: &str, rows: &[usize]) -> Result<Vec<f64>> {
    let col = data.column(name)?;
    Ok(rows.iter().map(|&i| col[i]).collect())
}

pub(super) fn centered_sst(y: &[f64]) -> f64 {
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    y.iter().map(|v| (v - mean).powi(2)).sum()
}

pub(super) fn fe_counts(spec: &ModelSpec, p: &Prepared) -> BTreeMap<String, usize> {
    let mut fe_absorbed = BTreeMap::new();
    if spec.fixed_effects.firm {
        fe_absorbed.insert("firm".to_string(), p.firm.n_groups);
    }
    if spec.fixed_effects.year {
        fe_absorbed.insert("year".to_string(), p.year.n_groups);
    }
    fe_absorbed
}

/// Linear fixed-effects regression with cluster-robust inference.
pub fn fe_ols(spec: &ModelSpec, data: &Dataset) -> Result<RegressionResult> {
    if spec.family != Family::Linear {
        return Err(Error::Config("fe_ols requires a linear family spec".to_string()));
    }
    if !spec.endogenous.is_empty() {
        return Err(Error::Config(
            "spec declares endogenous regressors; use tsls".to_string(),
        ));
    }
    let p = prepare_sample(spec, data, &[])?;
    let y_orig = take(data, &spec.dependent, &p.rows)?;

    let mut cols: Vec<Vec<f64>> = Vec::with_capacity(p.regressors.len() + 1);
    cols.push(y_orig.clone());
    for r in &p.regressors {
        cols.push(take(data, r, &p.rows)?);
    }
    demean(&mut cols, spec.fixed_effects, &p.firm, &p.year, None)?;
    let y_dm = cols.remove(0);
    let x_dm = cols;

    let fit = solve_wls(&x_dm, &y_dm, None)?;
    let mut warnings = Vec::new();
    let mut dropped = p.dropped.clone();
    for (j, name) in p.regressors.iter().enumerate() {
        if !fit.kept.contains(&j) {
            warnings.push(format!("regressor {name} dropped: collinear or absorbed"));
            dropped.collinear.push(name.clone());
        }
    }

    let k_total = fit.kept.len() + fe_dof(spec.fixed_effects, p.firm.n_groups, p.year.n_groups);
    let x_kept: Vec<&Vec<f64>> = fit.kept.iter().map(|&j| &x_dm[j]).collect();
    let cov = cluster_sandwich(&x_kept, &fit.residuals, &p.clusters, &fit.xtx_inv, k_total)?;

    let ssr: f64 = fit.residuals.iter().map(|e| e * e).sum();
    let sst_within = centered_sst(&y_dm);
    let sst_overall = centered_sst(&y_orig);
    let coefficients = fit
        .kept
        .iter()
        .enumerate()
        .map(|(a, &j)| super::Coefficient {
            name: p.regressors[j].clone(),
            estimate: fit.beta[a],
            se: cov[(a, a)].sqrt(),
        })
        .collect();

    Ok(RegressionResult {
        model: "fe_ols".to_string(),
        coefficients,
        n_obs: p.rows.len(),
        n_clusters: p.clusters.n_groups,
        r_squared_within: (sst_within > 0.0).then(|| 1.0 - ssr / sst_within),
        r_squared_overall: (sst_overall > 0.0).then(|| 1.0 - ssr / sst_overall),
        fe_absorbed: fe_counts(spec, &p),
        diagnostics: BTreeMap::new(),
        dropped,
        warnings,
    })
}
