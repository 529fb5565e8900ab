//! Poisson pseudo-maximum-likelihood with fixed-effect absorption via
//! weighted iterated demeaning, plus the patent-count study wrappers
//! (bio trend and diffusion regressions).

use std::collections::{BTreeMap, BTreeSet};

use super::dataset::{build_interaction, Dataset};
use super::fe::{
    cluster_codes, cluster_sandwich, demean, drop_singletons, encode, fe_dof, solve_wls,
};
use super::{
    Coefficient, DroppedReport, Family, FixedEffects, ModelSpec, RegressionResult,
};
use crate::corpus::ApplicantType;
use crate::error::{Error, Result};

const DEVIANCE_TOL: f64 = 1e-9;
const MAX_IRLS_ITER: usize = 100;

fn deviance(y: &[f64], mu: &[f64]) -> f64 {
    y.iter()
        .zip(mu)
        .map(|(&yi, &mi)| {
            if yi > 0.0 {
                2.0 * (yi * (yi / mi).ln() - (yi - mi))
            } else {
                2.0 * mi
            }
        })
        .sum()
}

/// Poisson pseudo-ML with absorbed fixed effects, IRLS inner loop, and
/// cluster-robust sandwich standard errors. Groups whose outcome is
/// identically zero under an absorbed fixed effect are dropped (their
/// effect is unbounded below) and reported as separated.
pub fn ppml_fe(spec: &ModelSpec, data: &Dataset) -> Result<RegressionResult> {
    if spec.family != Family::Poisson {
        return Err(Error::Config("ppml_fe requires a poisson family spec".to_string()));
    }
    spec.validate()?;
    if !spec.endogenous.is_empty() {
        return Err(Error::Config("ppml_fe does not support instrumental variables".to_string()));
    }
    let mut regressors = spec.regressors.clone();
    if !spec.fixed_effects.any() && !regressors.iter().any(|r| r == "const") {
        regressors.insert(0, "const".to_string());
    }
    let mut needed: Vec<&str> = vec![spec.dependent.as_str()];
    needed.extend(regressors.iter().map(|s| s.as_str()));
    let mut rows = data.complete_rows(&needed)?;
    let mut dropped = DroppedReport {
        missing: data.len() - rows.len(),
        ..DroppedReport::default()
    };
    let mut warnings = Vec::new();

    let y_all = data.column(&spec.dependent)?;
    if rows.iter().any(|&i| y_all[i] < 0.0) {
        return Err(Error::Data(format!(
            "dependent {} has negative values; Poisson requires y >= 0",
            spec.dependent
        )));
    }
    if rows.iter().any(|&i| y_all[i].fract() != 0.0) {
        warnings.push(format!(
            "dependent {} is not integer-valued; pseudo-ML point estimates remain valid",
            spec.dependent
        ));
    }

    // separation and singleton dropping, iterated to a fixed point
    loop {
        let firm_keys: Vec<&str> = rows.iter().map(|&i| data.entity[i].as_str()).collect();
        let year_keys: Vec<i32> = rows.iter().map(|&i| data.year[i]).collect();
        let firm = encode(&firm_keys);
        let year = encode(&year_keys);
        let mut keep = vec![true; rows.len()];
        for (active, grouping) in [(spec.fixed_effects.firm, &firm), (spec.fixed_effects.year, &year)] {
            if !active {
                continue;
            }
            let mut sums = vec![0.0f64; grouping.n_groups];
            for (pos, &i) in rows.iter().enumerate() {
                if keep[pos] {
                    sums[grouping.codes[pos]] += y_all[i];
                }
            }
            for (pos, flag) in keep.iter_mut().enumerate() {
                if *flag && sums[grouping.codes[pos]] == 0.0 {
                    *flag = false;
                }
            }
        }
        let n_separated = keep.iter().filter(|k| !**k).count();
        dropped.separated += n_separated;
        let mut next: Vec<usize> = rows
            .iter()
            .enumerate()
            .filter(|(pos, _)| keep[*pos])
            .map(|(_, &i)| i)
            .collect();
        let mut n_singleton = 0;
        if spec.fixed_effects.any() {
            let firm_keys: Vec<&str> = next.iter().map(|&i| data.entity[i].as_str()).collect();
            let year_keys: Vec<i32> = next.iter().map(|&i| data.year[i]).collect();
            let firm = encode(&firm_keys);
            let year = encode(&year_keys);
            let (kept, n) = drop_singletons(spec.fixed_effects, &firm.codes, &year.codes);
            n_singleton = n;
            dropped.singleton += n;
            next = kept.into_iter().map(|pos| next[pos]).collect();
        }
        let stable = n_separated == 0 && n_singleton == 0;
        rows = next;
        if stable {
            break;
        }
    }
    if rows.is_empty() || rows.iter().all(|&i| y_all[i] == 0.0) {
        return Err(Error::Estimation(format!(
            "dependent {} is identically zero on the estimation sample",
            spec.dependent
        )));
    }
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

    let n = rows.len();
    let y: Vec<f64> = rows.iter().map(|&i| y_all[i]).collect();
    let x_orig: Vec<Vec<f64>> = regressors
        .iter()
        .map(|r| {
            let col = data.column(r)?;
            Ok(rows.iter().map(|&i| col[i]).collect())
        })
        .collect::<Result<_>>()?;

    let y_mean = y.iter().sum::<f64>() / n as f64;
    let mut eta: Vec<f64> = y.iter().map(|&yi| ((yi + y_mean) / 2.0).ln()).collect();
    let mut dev_prev = f64::INFINITY;
    let mut trace: Vec<f64> = Vec::new();
    let mut converged = false;
    let mut final_fit = None;
    let mut final_w: Vec<f64> = Vec::new();
    for _ in 0..MAX_IRLS_ITER {
        let mu: Vec<f64> = eta.iter().map(|e| e.exp()).collect();
        let w = mu.clone();
        let z: Vec<f64> = (0..n).map(|i| eta[i] + (y[i] - mu[i]) / mu[i]).collect();
        let mut cols = Vec::with_capacity(regressors.len() + 1);
        cols.push(z.clone());
        cols.extend(x_orig.iter().cloned());
        demean(&mut cols, spec.fixed_effects, &firm, &year, Some(&w))?;
        let z_dm = cols.remove(0);
        let fit = solve_wls(&cols, &z_dm, Some(&w))?;
        eta = (0..n).map(|i| z[i] - fit.residuals[i]).collect();
        let mu_new: Vec<f64> = eta.iter().map(|e| e.exp()).collect();
        let dev = deviance(&y, &mu_new);
        trace.push(dev);
        let done = (dev_prev - dev).abs() < DEVIANCE_TOL * (1.0 + dev.abs());
        dev_prev = dev;
        final_fit = Some(fit);
        final_w = mu_new;
        if done {
            converged = true;
            break;
        }
    }
    if !converged {
        let tail: Vec<String> = trace.iter().rev().take(5).map(|d| format!("{d:.6e}")).collect();
        return Err(Error::Estimation(format!(
            "IRLS did not converge in {MAX_IRLS_ITER} iterations; last deviances: {}",
            tail.join(", ")
        )));
    }
    let fit = final_fit.expect("at least one IRLS iteration ran");

    // refresh the weighted demeaning at the converged weights so the
    // sandwich uses the final projection
    let mut cols = x_orig.clone();
    demean(&mut cols, spec.fixed_effects, &firm, &year, Some(&final_w))?;
    let scores: Vec<f64> = (0..n).map(|i| y[i] - final_w[i]).collect();
    for (j, name) in regressors.iter().enumerate() {
        if !fit.kept.contains(&j) {
            warnings.push(format!("regressor {name} dropped: collinear or absorbed"));
            dropped.collinear.push(name.clone());
        }
    }
    let k_total = fit.kept.len() + fe_dof(spec.fixed_effects, firm.n_groups, year.n_groups);
    let x_kept: Vec<&Vec<f64>> = fit.kept.iter().map(|&j| &cols[j]).collect();
    let cov = cluster_sandwich(&x_kept, &scores, &clusters, &fit.xtx_inv, k_total)?;

    let mut diagnostics = BTreeMap::new();
    diagnostics.insert("deviance".to_string(), dev_prev);
    let coefficients: Vec<Coefficient> = fit
        .kept
        .iter()
        .enumerate()
        .map(|(a, &j)| Coefficient {
            name: regressors[j].clone(),
            estimate: fit.beta[a],
            se: cov[(a, a)].sqrt(),
        })
        .collect();

    let mut fe_absorbed = BTreeMap::new();
    if spec.fixed_effects.firm {
        fe_absorbed.insert("firm".to_string(), firm.n_groups);
    }
    if spec.fixed_effects.year {
        fe_absorbed.insert("year".to_string(), year.n_groups);
    }
    Ok(RegressionResult {
        model: "ppml_fe".to_string(),
        coefficients,
        n_obs: n,
        n_clusters: clusters.n_groups,
        r_squared_within: None,
        r_squared_overall: None,
        fe_absorbed,
        diagnostics,
        dropped,
        warnings,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrendVariant {
    /// Bio dummy + linear year trend + interaction, no fixed effects.
    TrendDummy,
    /// IPC4 and year fixed effects; only the interaction is estimated.
    TwoWayFe,
}

/// Bio-differential growth regression over Section G patent counts:
/// count ~ bio dummy, year trend, and their interaction (or two-way FE
/// with the interaction only). Reports exp(β₃)−1 as
/// `differential_growth`.
pub fn trend_poisson(
    counts: &[(String, i32, u64)],
    bio_set: &BTreeSet<String>,
    variant: TrendVariant,
) -> Result<RegressionResult> {
    if counts.is_empty() {
        return Err(Error::Data("empty count panel".to_string()));
    }
    let base_year = counts.iter().map(|(_, y, _)| *y).min().expect("nonempty");
    let entities: Vec<String> = counts.iter().map(|(c, _, _)| c.clone()).collect();
    let years: Vec<i32> = counts.iter().map(|(_, y, _)| *y).collect();
    let mut data = Dataset::new(entities, years);
    data.add_dense_column("count", counts.iter().map(|(_, _, n)| *n as f64).collect());
    data.add_dense_column(
        "bio",
        counts
            .iter()
            .map(|(c, _, _)| bio_set.contains(c) as u8 as f64)
            .collect(),
    );
    data.add_dense_column(
        "trend",
        counts.iter().map(|(_, y, _)| (*y - base_year) as f64).collect(),
    );
    build_interaction(&mut data, "bio", "trend")?;
    let spec = match variant {
        TrendVariant::TrendDummy => ModelSpec::poisson("count", &["bio", "trend", "bio_x_trend"]),
        TrendVariant::TwoWayFe => {
            ModelSpec::poisson("count", &["bio_x_trend"]).with_fe(FixedEffects::TWO_WAY)
        }
    };
    let mut res = ppml_fe(&spec, &data)?;
    if let Some(c) = res.coefficient("bio_x_trend") {
        let growth = c.estimate.exp() - 1.0;
        res.diagnostics.insert("differential_growth".to_string(), growth);
    }
    Ok(res)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DiffusionSource {
    Research,
    Individual,
}

/// Diffusion regression: enterprise co-occurrence counts on lags 1–3 of
/// research-institution (main) or individual (placebo) counts, with IPC4
/// and year fixed effects. Absent (code, year, type) combinations count
/// as zero within the observed year span.
pub fn diffusion_poisson(
    counts: &[(String, i32, ApplicantType, u64)],
    source: DiffusionSource,
) -> Result<RegressionResult> {
    if counts.is_empty() {
        return Err(Error::Data("empty count panel".to_string()));
    }
    let src_type = match source {
        DiffusionSource::Research => ApplicantType::Research,
        DiffusionSource::Individual => ApplicantType::Individual,
    };
    let mut table: BTreeMap<(&str, i32), [f64; 2]> = BTreeMap::new();
    let codes: BTreeSet<&str> = counts.iter().map(|(c, _, _, _)| c.as_str()).collect();
    let y_min = counts.iter().map(|(_, y, _, _)| *y).min().expect("nonempty");
    let y_max = counts.iter().map(|(_, y, _, _)| *y).max().expect("nonempty");
    for code in &codes {
        for year in y_min..=y_max {
            table.insert((code, year), [0.0, 0.0]);
        }
    }
    for (code, year, atype, n) in counts {
        let entry = table.get_mut(&(code.as_str(), *year)).expect("grid covers all keys");
        if *atype == ApplicantType::Enterprise {
            entry[0] += *n as f64;
        }
        if *atype == src_type {
            entry[1] += *n as f64;
        }
    }
    if y_max - y_min < 3 {
        return Err(Error::Data(
            "diffusion regression needs at least 4 consecutive years".to_string(),
        ));
    }
    let mut entities = Vec::new();
    let mut years = Vec::new();
    let mut dep = Vec::new();
    let mut lags: [Vec<f64>; 3] = [Vec::new(), Vec::new(), Vec::new()];
    for code in &codes {
        for year in (y_min + 3)..=y_max {
            entities.push(code.to_string());
            years.push(year);
            dep.push(table[&(*code, year)][0]);
            for (k, lag) in lags.iter_mut().enumerate() {
                lag.push(table[&(*code, year - 1 - k as i32)][1]);
            }
        }
    }
    let mut data = Dataset::new(entities, years);
    data.add_dense_column("enterprise", dep);
    data.add_dense_column("source_lag1", lags[0].clone());
    data.add_dense_column("source_lag2", lags[1].clone());
    data.add_dense_column("source_lag3", lags[2].clone());
    let spec = ModelSpec::poisson("enterprise", &["source_lag1", "source_lag2", "source_lag3"])
        .with_fe(FixedEffects::TWO_WAY);
    ppml_fe(&spec, &data)
}

#[cfg(test)]
mod tests {
    use super::super::ClusterBy;
    use super::*;

    #[test]
    fn intercept_only_matches_mean() {
        let mut data = Dataset::new(
            vec!["a".into(), "b".into(), "c".into()],
            vec![1, 2, 3],
        );
        data.add_dense_column("y", vec![2.0, 2.0, 2.0]);
        let spec = ModelSpec::poisson("y", &[]).with_cluster(ClusterBy::Observation);
        let res = ppml_fe(&spec, &data).unwrap();
        let c = res.coefficient("const").unwrap();
        assert!((c.estimate - 2.0f64.ln()).abs() < 1e-9);
    }

    /// Independent oracle: Newton-Raphson Poisson ML on explicit columns.
    fn newton_poisson(x_cols: &[Vec<f64>], y: &[f64]) -> Vec<f64> {
        use nalgebra::{DMatrix, DVector};
        let n = y.len();
        let k = x_cols.len();
        let mut beta = DVector::<f64>::zeros(k);
        for _ in 0..200 {
            let eta: Vec<f64> = (0..n)
                .map(|i| (0..k).map(|j| beta[j] * x_cols[j][i]).sum())
                .collect();
            let mu: Vec<f64> = eta.iter().map(|e: &f64| e.exp()).collect();
            let mut hess = DMatrix::<f64>::zeros(k, k);
            let mut grad = DVector::<f64>::zeros(k);
            for i in 0..n {
                for a in 0..k {
                    grad[a] += (y[i] - mu[i]) * x_cols[a][i];
                    for b in 0..k {
                        hess[(a, b)] += mu[i] * x_cols[a][i] * x_cols[b][i];
                    }
                }
            }
            let step = hess.lu().solve(&grad).expect("hessian invertible");
            beta += &step;
            if step.amax() < 1e-12 {
                break;
            }
        }
        beta.iter().copied().collect()
    }

    #[test]
    fn firm_fe_matches_dummy_newton() {
        // 3 firms x 4 years with a regressor and planted firm effects
        let mut entities = Vec::new();
        let mut years = Vec::new();
        let mut x = Vec::new();
        let mut y = Vec::new();
        let fe = [0.2, -0.3, 0.5];
        for f in 0..3usize {
            for t in 0..4usize {
                entities.push(format!("f{f}"));
                years.push(2016 + t as i32);
                let xv = ((f * 5 + t * 3) % 7) as f64 / 4.0;
                x.push(xv);
                // deterministic counts near the planted mean
                let mu = (0.6 * xv + fe[f]).exp();
                y.push(mu.round().max(if t == 0 { 1.0 } else { 0.0 }));
            }
        }
        let mut data = Dataset::new(entities.clone(), years);
        data.add_dense_column("x", x.clone());
        data.add_dense_column("y", y.clone());
        let spec = ModelSpec::poisson("y", &["x"]).with_fe(FixedEffects::FIRM);
        let res = ppml_fe(&spec, &data).unwrap();
        // oracle with explicit firm dummies
        let n = y.len();
        let mut cols = vec![x];
        for f in 0..3usize {
            cols.push(
                (0..n)
                    .map(|i| (entities[i] == format!("f{f}")) as u8 as f64)
                    .collect(),
            );
        }
        let oracle = newton_poisson(&cols, &y);
        let got = res.coefficient("x").unwrap().estimate;
        assert!((got - oracle[0]).abs() < 1e-6, "got {got} oracle {}", oracle[0]);
    }

    #[test]
    fn separated_firm_dropped_and_reported() {
        let mut entities = Vec::new();
        let mut years = Vec::new();
        let mut x = Vec::new();
        let mut y = Vec::new();
        for f in 0..3usize {
            for t in 0..3usize {
                entities.push(format!("f{f}"));
                years.push(2016 + t as i32);
                x.push((t + f) as f64 / 2.0);
                y.push(if f == 2 { 0.0 } else { (t + 1) as f64 });
            }
        }
        let mut data = Dataset::new(entities, years);
        data.add_dense_column("x", x);
        data.add_dense_column("y", y);
        let spec = ModelSpec::poisson("y", &["x"]).with_fe(FixedEffects::FIRM);
        let res = ppml_fe(&spec, &data).unwrap();
        assert_eq!(res.dropped.separated, 3);
        assert_eq!(res.n_obs, 6);
    }

    #[test]
    fn score_equations_and_mean_preservation() {
        let mut entities = Vec::new();
        let mut years = Vec::new();
        let mut x = Vec::new();
        let mut y = Vec::new();
        for f in 0..4usize {
            for t in 0..5usize {
                entities.push(format!("f{f}"));
                years.push(2016 + t as i32);
                let xv = ((f * 7 + t * 11) % 13) as f64 / 6.0;
                x.push(xv);
                y.push(((0.4 * xv + 0.1 * f as f64).exp()).round() + ((f + t) % 2) as f64);
            }
        }
        let mut data = Dataset::new(entities.clone(), years.clone());
        data.add_dense_column("x", x.clone());
        data.add_dense_column("y", y.clone());
        let spec = ModelSpec::poisson("y", &["x"]).with_fe(FixedEffects::TWO_WAY);
        let res = ppml_fe(&spec, &data).unwrap();
        // reconstruct fitted means from the converged model by refitting
        // with explicit dummies (oracle) to validate Σŷ = Σy and scores
        let n = y.len();
        let mut cols = vec![x.clone()];
        for f in 0..4usize {
            cols.push((0..n).map(|i| (entities[i] == format!("f{f}")) as u8 as f64).collect());
        }
        for t in 1..5usize {
            cols.push((0..n).map(|i| (years[i] == 2016 + t as i32) as u8 as f64).collect());
        }
        let oracle = newton_poisson(&cols, &y);
        assert!((res.coefficient("x").unwrap().estimate - oracle[0]).abs() < 1e-6);
        let mu: Vec<f64> = (0..n)
            .map(|i| {
                (0..cols.len())
                    .map(|j| oracle[j] * cols[j][i])
                    .sum::<f64>()
                    .exp()
            })
            .collect();
        let sum_y: f64 = y.iter().sum();
        let sum_mu: f64 = mu.iter().sum();
        assert!((sum_y - sum_mu).abs() < 1e-6);
        let score: f64 = (0..n).map(|i| (y[i] - mu[i]) * x[i]).sum();
        assert!(score.abs() < 1e-6);
    }

    #[test]
    fn all_zero_dependent_is_error() {
        let mut data = Dataset::new(vec!["a".into(), "b".into()], vec![1, 2]);
        data.add_dense_column("y", vec![0.0, 0.0]);
        let spec = ModelSpec::poisson("y", &[]).with_cluster(ClusterBy::Observation);
        assert!(ppml_fe(&spec, &data).is_err());
    }

    #[test]
    fn trend_identical_series_has_zero_interaction() {
        let mut counts = Vec::new();
        let series = [5u64, 7, 9, 12, 14];
        for (code, is_bio) in [("G16B", true), ("G06F", false)] {
            let _ = is_bio;
            for (t, &n) in series.iter().enumerate() {
                counts.push((code.to_string(), 2016 + t as i32, n));
            }
        }
        let bio: BTreeSet<String> = ["G16B".to_string()].into_iter().collect();
        let res = trend_poisson(&counts, &bio, TrendVariant::TrendDummy).unwrap();
        let b3 = res.coefficient("bio_x_trend").unwrap().estimate;
        assert!(b3.abs() < 1e-7, "interaction {b3}");
        assert!(res.diagnostics["differential_growth"].abs() < 1e-6);
    }

    #[test]
    fn diffusion_grid_and_lags() {
        // planted: enterprise count at t follows research count at t-1
        let mut counts = Vec::new();
        let research: BTreeMap<&str, [u64; 6]> = [
            ("G06F", [2, 5, 3, 8, 6, 10]),
            ("H04L", [1, 7, 4, 2, 9, 5]),
        ]
        .into_iter()
        .collect();
        for (code, series) in &research {
            for (t, &r) in series.iter().enumerate() {
                let year = 2015 + t as i32;
                counts.push((code.to_string(), year, ApplicantType::Research, r));
                if t >= 1 {
                    counts.push((
                        code.to_string(),
                        year,
                        ApplicantType::Enterprise,
                        2 * series[t - 1],
                    ));
                }
            }
        }
        let res = diffusion_poisson(&counts, DiffusionSource::Research).unwrap();
        assert!(res.coefficient("source_lag1").unwrap().estimate > 0.0);
    }
}
