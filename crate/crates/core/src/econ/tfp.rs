//! Production-function estimation in the Wooldridge (2009) one-equation
//! GMM form: labor and capital elasticities identified through a
//! third-order polynomial proxy in lagged capital and materials, with
//! lagged labor and current capital as instruments.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};

/// One firm-year production observation (all in logs).
#[derive(Debug, Clone)]
pub struct TfpInput {
    pub firm_id: String,
    pub year: i32,
    pub ln_output: f64,
    pub ln_labor: f64,
    pub ln_capital: f64,
    pub ln_materials: f64,
}

/// Estimated elasticities plus the firm-year TFP residual series.
#[derive(Debug, Clone, Serialize)]
pub struct TfpResult {
    pub beta_l: f64,
    pub beta_k: f64,
    pub se_l: f64,
    pub se_k: f64,
    pub n_obs: usize,
    pub n_firms: usize,
    pub dropped_firms: usize,
    pub warnings: Vec<String>,
    /// TFP_it = y − β̂_l·l − β̂_k·k for every input row.
    pub tfp: Vec<(String, i32, f64)>,
}

/// Full third-order polynomial basis in two variables (9 terms, constant
/// excluded — the year dummies span it).
fn poly3(a: f64, b: f64) -> [f64; 9] {
    [a, b, a * a, a * b, b * b, a * a * a, a * a * b, a * b * b, b * b * b]
}

const POLY_DIM: usize = 9;

/// Wooldridge one-step GMM: the residual equation
/// u = y − β_l·l − β_k·k − Σ γ_p P_p(k_{t−1}, m_{t−1}) − τ_t with moments
/// E[z·u] = 0, z = {k, l_{t−1}, P_p, year dummies}; two-step efficient
/// GMM with firm-clustered weighting (point estimates coincide with the
/// one-step solution because the system is just identified).
pub fn wooldridge_tfp(inputs: &[TfpInput]) -> Result<TfpResult> {
    let mut index: BTreeMap<(&str, i32), &TfpInput> = BTreeMap::new();
    for row in inputs {
        if index.insert((&row.firm_id, row.year), row).is_some() {
            return Err(Error::Data(format!(
                "duplicate ({}, {}) in TFP input",
                row.firm_id, row.year
            )));
        }
    }
    // estimation rows need the same firm at t−1
    let mut sample: Vec<(&TfpInput, &TfpInput)> = Vec::new();
    for row in inputs {
        if let Some(prev) = index.get(&(row.firm_id.as_str(), row.year - 1)) {
            sample.push((row, prev));
        }
    }
    let firms_total: std::collections::BTreeSet<&str> =
        inputs.iter().map(|r| r.firm_id.as_str()).collect();
    let firms_used: std::collections::BTreeSet<&str> =
        sample.iter().map(|(r, _)| r.firm_id.as_str()).collect();
    let dropped_firms = firms_total.len() - firms_used.len();
    let n = sample.len();

    let mut years: Vec<i32> = sample.iter().map(|(r, _)| r.year).collect();
    years.sort_unstable();
    years.dedup();
    let t_dim = years.len();
    let p = 2 + POLY_DIM + t_dim; // β_l, β_k, γ_1..9, τ_t
    if n < p + 1 {
        return Err(Error::Estimation(format!(
            "TFP estimation sample has {n} rows for {p} parameters"
        )));
    }

    // W (regressors) and Z (instruments), both n × p
    let mut w = DMatrix::<f64>::zeros(n, p);
    let mut z = DMatrix::<f64>::zeros(n, p);
    let mut y = DVector::<f64>::zeros(n);
    for (i, (row, prev)) in sample.iter().enumerate() {
        y[i] = row.ln_output;
        w[(i, 0)] = row.ln_labor;
        w[(i, 1)] = row.ln_capital;
        z[(i, 0)] = row.ln_capital;
        z[(i, 1)] = prev.ln_labor;
        let basis = poly3(prev.ln_capital, prev.ln_materials);
        for (j, &v) in basis.iter().enumerate() {
            w[(i, 2 + j)] = v;
            z[(i, 2 + j)] = v;
        }
        let t = years.binary_search(&row.year).expect("year in index");
        w[(i, 2 + POLY_DIM + t)] = 1.0;
        z[(i, 2 + POLY_DIM + t)] = 1.0;
    }

    let mut warnings = Vec::new();
    let a = z.transpose() * &w; // p × p
    let g = z.transpose() * &y;
    let solve_ridge = |m: &DMatrix<f64>, rhs: &DVector<f64>, warnings: &mut Vec<String>| {
        if let Some(sol) = m.clone().lu().solve(rhs) {
            if sol.iter().all(|v| v.is_finite()) {
                return sol;
            }
        }
        let delta = 1e-8 * m.trace().abs().max(1.0) / p as f64;
        warnings.push(format!("moment matrix near-singular; ridge {delta:.2e} applied"));
        let ridged = m + DMatrix::identity(p, p) * delta;
        ridged.lu().solve(rhs).expect("ridged system solvable")
    };
    let beta1 = solve_ridge(&a, &g, &mut warnings);

    // cluster-robust efficient weighting (two-step); just-identified, so
    // the point estimate is unchanged but the variance uses Ω
    let u1 = &y - &w * &beta1;
    let clusters: Vec<&str> = sample.iter().map(|(r, _)| r.firm_id.as_str()).collect();
    let codes = super::fe::encode(&clusters);
    let mut cluster_sums = DMatrix::<f64>::zeros(p, codes.n_groups);
    for i in 0..n {
        for j in 0..p {
            cluster_sums[(j, codes.codes[i])] += z[(i, j)] * u1[i];
        }
    }
    let omega = &cluster_sums * cluster_sums.transpose();
    let omega_inv = match nalgebra::Cholesky::new(omega.clone()) {
        Some(chol) => chol.inverse(),
        None => {
            let delta = 1e-8 * omega.trace().abs().max(1.0) / p as f64;
            warnings.push(format!(
                "GMM weighting matrix singular; ridge {delta:.2e} applied"
            ));
            nalgebra::Cholesky::new(&omega + DMatrix::identity(p, p) * delta)
                .ok_or_else(|| Error::Estimation("weighting matrix not repairable".to_string()))?
                .inverse()
        }
    };
    let awa = a.transpose() * &omega_inv * &a;
    let awg = a.transpose() * &omega_inv * &g;
    let beta = solve_ridge(&awa, &awg, &mut warnings);

    // efficient-GMM variance with the cluster small-sample factor
    let gf = codes.n_groups as f64;
    let nf = n as f64;
    let c = gf / (gf - 1.0) * (nf - 1.0) / (nf - p as f64).max(1.0);
    let v = awa
        .lu()
        .try_inverse()
        .ok_or_else(|| Error::Estimation("GMM variance matrix singular".to_string()))?
        * c;

    let beta_l = beta[0];
    let beta_k = beta[1];
    let tfp: Vec<(String, i32, f64)> = inputs
        .iter()
        .map(|r| {
            (
                r.firm_id.clone(),
                r.year,
                r.ln_output - beta_l * r.ln_labor - beta_k * r.ln_capital,
            )
        })
        .collect();
    Ok(TfpResult {
        beta_l,
        beta_k,
        se_l: v[(0, 0)].sqrt(),
        se_k: v[(1, 1)].sqrt(),
        n_obs: n,
        n_firms: firms_used.len(),
        dropped_firms,
        warnings,
        tfp,
    })
}
