//! Two-stage least squares with fixed-effect absorption, cluster-robust
//! inference, and the weak-instrument / underidentification diagnostics
//! (first-stage F, Cragg-Donald Wald F, Kleibergen-Paap rk LM).

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use super::dataset::Dataset;
use super::fe::{cluster_sandwich, demean, fe_dof, solve_wls};
use super::ols::{centered_sst, fe_counts, prepare_sample, take};
use super::{fe_ols, Coefficient, Family, ModelSpec, RegressionResult};
use crate::error::{Error, Result};

/// For every endogenous interaction `a_x_b` with `b` exogenous, adds the
/// instrument interactions `z_x_b` for each base instrument `z`, building
/// the needed columns. Mirrors the two-endogenous-regressor IV design
/// where the policy instrument is interacted with readiness.
pub fn augment_interaction_instruments(spec: &mut ModelSpec, data: &mut Dataset) -> Result<()> {
    let base_instruments: Vec<String> = spec
        .instruments
        .iter()
        .filter(|z| !z.contains("_x_"))
        .cloned()
        .collect();
    let interactions: Vec<(String, String)> = spec
        .endogenous
        .iter()
        .filter_map(|e| {
            let (a, b) = e.split_once("_x_")?;
            (spec.endogenous.iter().any(|x| x == a) && !spec.endogenous.iter().any(|x| x == b))
                .then(|| (a.to_string(), b.to_string()))
        })
        .collect();
    for (_, b) in interactions {
        for z in &base_instruments {
            let name = format!("{z}_x_{b}");
            if !data.has_column(&name) {
                super::dataset::build_interaction(data, z, &b)?;
            }
            if !spec.instruments.contains(&name) {
                spec.instruments.push(name);
            }
        }
    }
    Ok(())
}

/// Residualizes each target column on the basis columns (in place).
fn residualize(targets: &mut [Vec<f64>], basis: &[Vec<f64>]) -> Result<()> {
    if basis.is_empty() {
        return Ok(());
    }
    for t in targets.iter_mut() {
        let fit = solve_wls(basis, t, None)?;
        *t = fit.residuals;
    }
    Ok(())
}

fn inv_sqrt(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let eig = SymmetricEigen::new(m.clone());
    let max_eig = eig.eigenvalues.iter().fold(0.0f64, |a, &b| a.max(b));
    let mut d = DMatrix::<f64>::zeros(m.nrows(), m.nrows());
    for (i, &v) in eig.eigenvalues.iter().enumerate() {
        if v <= 1e-12 * max_eig.max(1e-300) {
            return Err(Error::Estimation(
                "rank failure: a moment matrix is not positive definite".to_string(),
            ));
        }
        d[(i, i)] = 1.0 / v.sqrt();
    }
    Ok(&eig.eigenvectors * d * eig.eigenvectors.transpose())
}

fn cross(a: &[Vec<f64>], b: &[Vec<f64>], scale: f64) -> DMatrix<f64> {
    let mut m = DMatrix::<f64>::zeros(a.len(), b.len());
    for (i, ca) in a.iter().enumerate() {
        for (j, cb) in b.iter().enumerate() {
            m[(i, j)] = ca.iter().zip(cb).map(|(x, y)| x * y).sum::<f64>() * scale;
        }
    }
    m
}

fn chi2_p(stat: f64, df: f64) -> f64 {
    if df <= 0.0 || !stat.is_finite() {
        return f64::NAN;
    }
    let dist = ChiSquared::new(df).expect("valid chi-squared");
    1.0 - dist.cdf(stat.max(0.0))
}

/// Two-stage least squares. With an empty endogenous set this is exactly
/// [`fe_ols`].
pub fn tsls(spec: &ModelSpec, data: &Dataset) -> Result<RegressionResult> {
    if spec.family != Family::Linear {
        return Err(Error::Config("tsls requires a linear family spec".to_string()));
    }
    if spec.endogenous.is_empty() {
        let mut ols_spec = spec.clone();
        ols_spec.instruments.clear();
        return fe_ols(&ols_spec, data);
    }
    let instrument_names: Vec<&str> = spec.instruments.iter().map(|s| s.as_str()).collect();
    let p = prepare_sample(spec, data, &instrument_names)?;
    let n = p.rows.len();
    let y_orig = take(data, &spec.dependent, &p.rows)?;

    // demean everything jointly: y, regressors, instruments
    let mut cols: Vec<Vec<f64>> = vec![y_orig.clone()];
    for r in &p.regressors {
        cols.push(take(data, r, &p.rows)?);
    }
    for z in &spec.instruments {
        cols.push(take(data, z, &p.rows)?);
    }
    demean(&mut cols, spec.fixed_effects, &p.firm, &p.year, None)?;
    let y_dm = cols.remove(0);
    let x_all: Vec<Vec<f64>> = cols.drain(..p.regressors.len()).collect();
    let z_cols: Vec<Vec<f64>> = cols;

    let endog_pos: Vec<usize> = p
        .regressors
        .iter()
        .enumerate()
        .filter(|(_, r)| spec.endogenous.contains(r))
        .map(|(j, _)| j)
        .collect();
    let exog_pos: Vec<usize> = (0..p.regressors.len())
        .filter(|j| !endog_pos.contains(j))
        .collect();
    let exog: Vec<Vec<f64>> = exog_pos.iter().map(|&j| x_all[j].clone()).collect();
    let m = endog_pos.len();
    let q = z_cols.len();

    // first stage per endogenous regressor, with F on excluded instruments
    let mut first_stage: Vec<Vec<f64>> = Vec::with_capacity(m);
    let mut diagnostics = std::collections::BTreeMap::new();
    let mut fs_cols: Vec<Vec<f64>> = exog.clone();
    fs_cols.extend(z_cols.iter().cloned());
    let l_total = exog.len() + q + fe_dof(spec.fixed_effects, p.firm.n_groups, p.year.n_groups);
    for (idx, &j) in endog_pos.iter().enumerate() {
        let endog_col = &x_all[j];
        let unrestricted = solve_wls(&fs_cols, endog_col, None)?;
        for zi in 0..q {
            if !unrestricted.kept.contains(&(exog.len() + zi)) {
                return Err(Error::Estimation(format!(
                    "rank failure in first stage for {}: instrument {} is collinear",
                    p.regressors[j], spec.instruments[zi]
                )));
            }
        }
        let ssr_u: f64 = unrestricted.residuals.iter().map(|e| e * e).sum();
        let ssr_r: f64 = if exog.is_empty() {
            endog_col.iter().map(|v| v * v).sum()
        } else {
            let restricted = solve_wls(&exog, endog_col, None)?;
            restricted.residuals.iter().map(|e| e * e).sum()
        };
        let df_denom = (n as f64 - l_total as f64).max(1.0);
        let f_stat = ((ssr_r - ssr_u) / q as f64) / (ssr_u / df_denom);
        diagnostics.insert(format!("first_stage_F_{}", p.regressors[j]), f_stat);
        if idx == 0 {
            diagnostics.insert("first_stage_F".to_string(), f_stat);
        }
        let fitted: Vec<f64> = endog_col
            .iter()
            .zip(&unrestricted.residuals)
            .map(|(v, e)| v - e)
            .collect();
        first_stage.push(fitted);
    }

    // second stage on exogenous regressors + fitted endogenous values
    let mut x_hat: Vec<Vec<f64>> = Vec::with_capacity(p.regressors.len());
    let mut fitted_iter = first_stage.iter();
    for j in 0..p.regressors.len() {
        if endog_pos.contains(&j) {
            x_hat.push(fitted_iter.next().unwrap().clone());
        } else {
            x_hat.push(x_all[j].clone());
        }
    }
    let fit = solve_wls(&x_hat, &y_dm, None)?;
    for (j, name) in p.regressors.iter().enumerate() {
        if !fit.kept.contains(&j) && endog_pos.contains(&j) {
            return Err(Error::Estimation(format!(
                "rank failure: projected endogenous regressor {name} is collinear with the exogenous regressors"
            )));
        }
    }
    let mut warnings = Vec::new();
    let mut dropped = p.dropped.clone();
    for (j, name) in p.regressors.iter().enumerate() {
        if !fit.kept.contains(&j) {
            warnings.push(format!("regressor {name} dropped: collinear or absorbed"));
            dropped.collinear.push(name.clone());
        }
    }

    // residuals from the ORIGINAL regressors, scores from the projected ones
    let residuals: Vec<f64> = (0..n)
        .map(|i| {
            let fitted: f64 = fit
                .kept
                .iter()
                .enumerate()
                .map(|(a, &j)| fit.beta[a] * x_all[j][i])
                .sum();
            y_dm[i] - fitted
        })
        .collect();
    let k_total = fit.kept.len() + fe_dof(spec.fixed_effects, p.firm.n_groups, p.year.n_groups);
    let xh_kept: Vec<&Vec<f64>> = fit.kept.iter().map(|&j| &x_hat[j]).collect();
    let cov = cluster_sandwich(&xh_kept, &residuals, &p.clusters, &fit.xtx_inv, k_total)?;

    // diagnostics on the residualized system
    let mut x_tilde: Vec<Vec<f64>> = endog_pos.iter().map(|&j| x_all[j].clone()).collect();
    let mut z_tilde = z_cols.clone();
    residualize(&mut x_tilde, &exog)?;
    residualize(&mut z_tilde, &exog)?;

    // Cragg-Donald: minimum eigenvalue of the concentration matrix
    let zz = cross(&z_tilde, &z_tilde, 1.0);
    let zx = cross(&z_tilde, &x_tilde, 1.0);
    let xx = cross(&x_tilde, &x_tilde, 1.0);
    let zz_inv_sqrt = inv_sqrt(&zz)?;
    let pzx = zx.transpose() * &zz_inv_sqrt * &zz_inv_sqrt * &zx; // X'P_Z X
    let mzx = &xx - &pzx; // X'M_Z X
    let sigma_vv = &mzx / (n as f64 - l_total as f64).max(1.0);
    // a perfect first stage (zero residual variance) has unbounded CD F
    let cd_f = match inv_sqrt(&sigma_vv) {
        Ok(sv_inv_sqrt) => {
            let conc = &sv_inv_sqrt * (&pzx / q as f64) * &sv_inv_sqrt;
            SymmetricEigen::new(conc)
                .eigenvalues
                .iter()
                .fold(f64::INFINITY, |a, &b| a.min(b))
        }
        Err(_) => f64::INFINITY,
    };
    diagnostics.insert("cragg_donald_F".to_string(), cd_f);

    // Kleibergen-Paap rk LM (and the homoskedastic Anderson reduction)
    let (kp, anderson) = rk_lm(&x_tilde, &z_tilde, &p.clusters)?;
    let df = (q - m + 1) as f64;
    diagnostics.insert("kp_rk_lm".to_string(), kp);
    diagnostics.insert("kp_rk_lm_p".to_string(), chi2_p(kp, df));
    diagnostics.insert("anderson_lm".to_string(), anderson);
    diagnostics.insert("anderson_lm_p".to_string(), chi2_p(anderson, df));

    let ssr: f64 = residuals.iter().map(|e| e * e).sum();
    let sst_within = centered_sst(&y_dm);
    let sst_overall = centered_sst(&y_orig);
    let coefficients: Vec<Coefficient> = fit
        .kept
        .iter()
        .enumerate()
        .map(|(a, &j)| Coefficient {
            name: p.regressors[j].clone(),
            estimate: fit.beta[a],
            se: cov[(a, a)].sqrt(),
        })
        .collect();

    Ok(RegressionResult {
        model: "tsls".to_string(),
        coefficients,
        n_obs: n,
        n_clusters: p.clusters.n_groups,
        r_squared_within: (sst_within > 0.0).then(|| 1.0 - ssr / sst_within),
        r_squared_overall: (sst_overall > 0.0).then(|| 1.0 - ssr / sst_overall),
        fe_absorbed: fe_counts(spec, &p),
        diagnostics,
        dropped,
        warnings,
    })
}

/// Kleibergen-Paap rk LM statistic for underidentification (rank m−1
/// against rank m of the first-stage coefficient matrix), with the
/// cluster-robust covariance; also returns the homoskedastic path, which
/// reduces algebraically to the Anderson canonical-correlation LM
/// N·ccorr²_min.
fn rk_lm(
    x_tilde: &[Vec<f64>],
    z_tilde: &[Vec<f64>],
    clusters: &super::fe::Grouping,
) -> Result<(f64, f64)> {
    let n = x_tilde[0].len();
    let nf = n as f64;
    let m = x_tilde.len();
    let q = z_tilde.len();
    let zz_inv_sqrt = inv_sqrt(&cross(z_tilde, z_tilde, 1.0 / nf))?;
    let xx_inv_sqrt = inv_sqrt(&cross(x_tilde, x_tilde, 1.0 / nf))?;
    let f_hat = &zz_inv_sqrt * cross(z_tilde, x_tilde, 1.0 / nf) * &xx_inv_sqrt;

    // orthonormalized data: zn_i = zz^{-1/2} z_i, xn_i = xx^{-1/2} x_i
    let svd = f_hat.clone().svd(true, true);
    let u = svd.u.as_ref().expect("svd computed");
    let v_t = svd.v_t.as_ref().expect("svd computed");
    // a_perp: last q-m+1 left singular directions; b_perp: last right one
    let a_perp = u.columns(m - 1, q - m + 1).into_owned();
    let b_perp = v_t.row(m - 1).transpose().into_owned();
    let lambda: DVector<f64> = (a_perp.transpose() * &f_hat * &b_perp).column(0).into_owned();
    let anderson = nf * lambda.dot(&lambda);

    // per-observation projected scores v_i = (a'zn_i)(xn_i'b)
    let r = q - m + 1;
    let mut cluster_sums = DMatrix::<f64>::zeros(r, clusters.n_groups);
    for i in 0..n {
        let zi = DVector::from_iterator(q, z_tilde.iter().map(|c| c[i]));
        let xi = DVector::from_iterator(m, x_tilde.iter().map(|c| c[i]));
        let zn = &zz_inv_sqrt * zi;
        let xn = &xx_inv_sqrt * xi;
        let vi = (a_perp.transpose() * zn) * (xn.dot(&b_perp));
        for a in 0..r {
            cluster_sums[(a, clusters.codes[i])] += vi[a];
        }
    }
    let w = &cluster_sums * cluster_sums.transpose() / nf;
    let w_inv = nalgebra::Cholesky::new(w)
        .ok_or_else(|| Error::Estimation("rk LM covariance is singular".to_string()))?
        .inverse();
    let kp = nf * (lambda.transpose() * w_inv * &lambda)[(0, 0)];
    Ok((kp, anderson))
}
