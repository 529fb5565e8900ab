//! Shared estimation machinery: fixed-effect encoding, singleton
//! dropping, (weighted) iterated demeaning, a collinearity-aware weighted
//! least-squares solver, and the cluster-robust sandwich.

use nalgebra::{DMatrix, DVector};

use super::{ClusterBy, FixedEffects};
use crate::error::{Error, Result};

// tighter than the 1e-10 coefficient guarantee so that re-demeaning an
// already-demeaned panel changes nothing at the 1e-12 level
pub const DEMEAN_TOL: f64 = 1e-13;
pub const DEMEAN_MAX_SWEEPS: usize = 10_000;

/// Integer-coded grouping of the selected rows along one dimension.
#[derive(Debug, Clone)]
pub struct Grouping {
    pub codes: Vec<usize>,
    pub n_groups: usize,
}

pub fn encode<T: Ord + Clone>(keys: &[T]) -> Grouping {
    let mut sorted: Vec<&T> = keys.iter().collect();
    sorted.sort();
    sorted.dedup();
    let index: std::collections::BTreeMap<&T, usize> =
        sorted.iter().enumerate().map(|(i, k)| (*k, i)).collect();
    Grouping {
        codes: keys.iter().map(|k| index[k]).collect(),
        n_groups: index.len(),
    }
}

/// Iteratively removes rows that are alone in any absorbed fixed-effect
/// group (they contribute nothing within). Returns kept row positions
/// (indices into `firm`/`year`) and the number removed.
pub fn drop_singletons(
    fe: FixedEffects,
    firm: &[usize],
    year: &[usize],
) -> (Vec<usize>, usize) {
    let n = firm.len();
    let mut keep: Vec<bool> = vec![true; n];
    loop {
        let mut changed = false;
        for (dim_active, codes) in [(fe.firm, firm), (fe.year, year)] {
            if !dim_active {
                continue;
            }
            let max_code = codes.iter().copied().max().unwrap_or(0);
            let mut sizes = vec![0usize; max_code + 1];
            for i in 0..n {
                if keep[i] {
                    sizes[codes[i]] += 1;
                }
            }
            for i in 0..n {
                if keep[i] && sizes[codes[i]] == 1 {
                    keep[i] = false;
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }
    let kept: Vec<usize> = (0..n).filter(|&i| keep[i]).collect();
    let dropped = n - kept.len();
    (kept, dropped)
}

/// Degrees of freedom absorbed by the fixed effects (LSDV parameter
/// count, including the implicit constant).
pub fn fe_dof(fe: FixedEffects, n_firms: usize, n_years: usize) -> usize {
    match (fe.firm, fe.year) {
        (true, true) => n_firms + n_years - 1,
        (true, false) => n_firms,
        (false, true) => n_years,
        (false, false) => 0,
    }
}

fn sweep(col: &mut [f64], codes: &[usize], n_groups: usize, weights: Option<&[f64]>) -> f64 {
    let mut sums = vec![0.0f64; n_groups];
    let mut wsum = vec![0.0f64; n_groups];
    for (i, &v) in col.iter().enumerate() {
        let w = weights.map_or(1.0, |w| w[i]);
        sums[codes[i]] += w * v;
        wsum[codes[i]] += w;
    }
    let means: Vec<f64> = sums
        .iter()
        .zip(&wsum)
        .map(|(s, w)| if *w > 0.0 { s / w } else { 0.0 })
        .collect();
    let mut max_change = 0.0f64;
    for (i, v) in col.iter_mut().enumerate() {
        let m = means[codes[i]];
        *v -= m;
        max_change = max_change.max(m.abs());
    }
    max_change
}

/// Alternating (weighted) group demeaning of every column until the
/// largest subtracted mean falls below `DEMEAN_TOL`.
pub fn demean(
    cols: &mut [Vec<f64>],
    fe: FixedEffects,
    firm: &Grouping,
    year: &Grouping,
    weights: Option<&[f64]>,
) -> Result<()> {
    if !fe.any() {
        return Ok(());
    }
    for col in cols.iter_mut() {
        for _ in 0..DEMEAN_MAX_SWEEPS {
            let mut max_change = 0.0f64;
            if fe.firm {
                max_change = max_change.max(sweep(col, &firm.codes, firm.n_groups, weights));
            }
            if fe.year {
                max_change = max_change.max(sweep(col, &year.codes, year.n_groups, weights));
            }
            if max_change < DEMEAN_TOL {
                break;
            }
        }
    }
    Ok(())
}

/// Weighted least squares with collinearity dropping.
pub struct WlsFit {
    /// Indices (into the input column list) of retained regressors.
    pub kept: Vec<usize>,
    pub beta: DVector<f64>,
    /// (X'WX)^{-1} over the retained regressors.
    pub xtx_inv: DMatrix<f64>,
    /// Residuals y − Xβ over all rows.
    pub residuals: Vec<f64>,
}

/// Solves min Σ w_i (y_i − x_i'β)². Columns that are (weighted) linear
/// combinations of earlier retained columns are dropped; their indices
/// are absent from `kept`.
pub fn solve_wls(x_cols: &[Vec<f64>], y: &[f64], weights: Option<&[f64]>) -> Result<WlsFit> {
    let n = y.len();
    let wsqrt: Vec<f64> = (0..n)
        .map(|i| weights.map_or(1.0, |w| w[i]).sqrt())
        .collect();

    // modified Gram-Schmidt in the weighted inner product to detect rank
    let mut kept: Vec<usize> = Vec::new();
    let mut basis: Vec<Vec<f64>> = Vec::new();
    for (j, col) in x_cols.iter().enumerate() {
        let mut v: Vec<f64> = col.iter().zip(&wsqrt).map(|(x, s)| x * s).collect();
        let orig_norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        for b in &basis {
            let proj: f64 = v.iter().zip(b).map(|(a, c)| a * c).sum();
            for (a, c) in v.iter_mut().zip(b) {
                *a -= proj * c;
            }
        }
        let resid_norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if orig_norm <= 0.0 || resid_norm <= 1e-8 * orig_norm {
            continue; // collinear (or fully absorbed) column
        }
        for a in v.iter_mut() {
            *a /= resid_norm;
        }
        basis.push(v);
        kept.push(j);
    }
    if kept.is_empty() {
        return Err(Error::Estimation(
            "no linearly independent regressors remain".to_string(),
        ));
    }

    let k = kept.len();
    let mut xtx = DMatrix::<f64>::zeros(k, k);
    let mut xty = DVector::<f64>::zeros(k);
    for (a, &ja) in kept.iter().enumerate() {
        for (b, &jb) in kept.iter().enumerate().skip(a) {
            let mut dot = 0.0;
            for i in 0..n {
                dot += wsqrt[i] * wsqrt[i] * x_cols[ja][i] * x_cols[jb][i];
            }
            xtx[(a, b)] = dot;
            xtx[(b, a)] = dot;
        }
        let mut dot = 0.0;
        for i in 0..n {
            dot += wsqrt[i] * wsqrt[i] * x_cols[ja][i] * y[i];
        }
        xty[a] = dot;
    }
    let chol = nalgebra::Cholesky::new(xtx.clone())
        .ok_or_else(|| Error::Estimation("normal equations are singular".to_string()))?;
    let beta = chol.solve(&xty);
    let xtx_inv = chol.inverse();
    let residuals: Vec<f64> = (0..n)
        .map(|i| {
            let fitted: f64 = kept
                .iter()
                .enumerate()
                .map(|(a, &j)| beta[a] * x_cols[j][i])
                .sum();
            y[i] - fitted
        })
        .collect();
    Ok(WlsFit { kept, beta, xtx_inv, residuals })
}

/// Cluster codes for the selected rows under a clustering rule.
pub fn cluster_codes(
    cluster: ClusterBy,
    firm: &Grouping,
    year: &Grouping,
    n: usize,
) -> Grouping {
    match cluster {
        ClusterBy::Firm => firm.clone(),
        ClusterBy::Year => year.clone(),
        ClusterBy::Observation => Grouping {
            codes: (0..n).collect(),
            n_groups: n,
        },
    }
}

/// Cluster-robust sandwich: V = c · A (Σ_g s_g s_g') A with
/// s_g = Σ_{i∈g} u_i x_i and c = G/(G−1) · (N−1)/(N−K).
pub fn cluster_sandwich(
    x_cols: &[&Vec<f64>],
    scores_u: &[f64],
    clusters: &Grouping,
    xtx_inv: &DMatrix<f64>,
    k_total: usize,
) -> Result<DMatrix<f64>> {
    let k = x_cols.len();
    let n = scores_u.len();
    let g = clusters.n_groups;
    if g < 2 {
        return Err(Error::Estimation(format!(
            "cluster-robust inference needs at least 2 clusters, found {g}"
        )));
    }
    let mut sums = DMatrix::<f64>::zeros(k, g);
    for i in 0..n {
        let c = clusters.codes[i];
        for (a, col) in x_cols.iter().enumerate() {
            sums[(a, c)] += scores_u[i] * col[i];
        }
    }
    let meat = &sums * sums.transpose();
    let nf = n as f64;
    let gf = g as f64;
    let denom = (nf - k_total as f64).max(1.0);
    let c = gf / (gf - 1.0) * (nf - 1.0) / denom;
    Ok(xtx_inv * meat * xtx_inv * c)
}
