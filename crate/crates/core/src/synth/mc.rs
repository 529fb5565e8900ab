//! Monte Carlo recovery studies over the planted DGP: coverage and
//! rejection of the complementarity interaction, OLS-vs-2SLS bias under
//! endogeneity, instrument exclusivity on the zero-AI subsample, and
//! production-function elasticity recovery.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::econ::{
    build_interaction, fe_ols, tsls, wooldridge_tfp, ClusterBy, Dataset, FixedEffects, ModelSpec,
    RegressionResult,
};
use crate::error::Result;
use crate::panel::{filter_zero_ai, lead, FirmYearObservation};
use crate::synth::{generate, generate_production, pipeline_panel, SyntheticConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Study {
    /// Exogenous capability; fe_ols recovery and CI coverage of β₃.
    Complementarity,
    /// β₃ = 0; rejection rate of the 5% test.
    ComplementarityNull,
    /// Endogenous capability; paired OLS / 2SLS bias and first stage.
    Iv,
    /// Zero-AI subsample; instrument × readiness should be null.
    Exclusivity,
    /// Wooldridge GMM elasticities against pooled OLS.
    Tfp,
}

impl Study {
    pub fn name(self) -> &'static str {
        match self {
            Study::Complementarity => "complementarity",
            Study::ComplementarityNull => "complementarity_null",
            Study::Iv => "iv",
            Study::Exclusivity => "exclusivity",
            Study::Tfp => "tfp",
        }
    }
}

/// Recovery of one planted parameter across replications.
#[derive(Debug, Clone, Serialize)]
pub struct ParamRecovery {
    pub truth: f64,
    pub mean_estimate: f64,
    pub bias: f64,
    pub rmse: f64,
    /// Share of replications whose 95% cluster-robust CI covers the truth.
    pub coverage: f64,
    /// Share of replications rejecting zero at the 5% level.
    pub rejection: f64,
}

fn recover(truth: f64, estimates: &[f64], ses: &[f64], dfs: &[f64]) -> ParamRecovery {
    let n = estimates.len() as f64;
    let mean = estimates.iter().sum::<f64>() / n;
    let rmse =
        (estimates.iter().map(|e| (e - truth).powi(2)).sum::<f64>() / n).sqrt();
    let mut covered = 0usize;
    let mut rejected = 0usize;
    for i in 0..estimates.len() {
        let crit = StudentsT::new(0.0, 1.0, dfs[i].max(1.0))
            .expect("valid t distribution")
            .inverse_cdf(0.975);
        if (estimates[i] - truth).abs() <= crit * ses[i] {
            covered += 1;
        }
        if (estimates[i] / ses[i]).abs() > crit {
            rejected += 1;
        }
    }
    ParamRecovery {
        truth,
        mean_estimate: mean,
        bias: mean - truth,
        rmse,
        coverage: covered as f64 / n,
        rejection: rejected as f64 / n,
    }
}

/// Aggregate Monte Carlo report; failed replications are counted, never
/// fatal.
#[derive(Debug, Clone, Serialize)]
pub struct McReport {
    pub study: String,
    pub replications: usize,
    pub failures: usize,
    /// One message per failed replication.
    pub failure_messages: Vec<String>,
    pub params: BTreeMap<String, ParamRecovery>,
    /// Study-specific scalar diagnostics (shares, mean statistics).
    pub extras: BTreeMap<String, f64>,
}

/// Builds the estimation dataset: the panel columns plus the led outcome
/// and the capability × readiness interaction.
pub fn estimation_dataset(panel: &[FirmYearObservation]) -> Result<Dataset> {
    let mut data = Dataset::from_panel(panel);
    data.add_column("lead_rpe", lead(panel, |r| r.revenue_per_employee, 1));
    data.add_column("lead_trademarks", lead(panel, |r| r.trademarks, 1));
    build_interaction(&mut data, "ai_capability", "readiness_external")?;
    Ok(data)
}

const PERFORMANCE_REGRESSORS: [&str; 3] = [
    "ai_capability",
    "readiness_external",
    "ai_capability_x_readiness_external",
];

fn performance_spec() -> ModelSpec {
    ModelSpec::linear("lead_rpe", &PERFORMANCE_REGRESSORS)
        .with_fe(FixedEffects::TWO_WAY)
        .with_cluster(ClusterBy::Firm)
}

fn performance_ols(panel: &[FirmYearObservation]) -> Result<RegressionResult> {
    let data = estimation_dataset(panel)?;
    fe_ols(&performance_spec(), &data)
}

/// Copies the selected rows of a dataset (used for subsample studies).
fn select_rows(data: &Dataset, rows: &[usize]) -> Dataset {
    let entity = rows.iter().map(|&i| data.entity[i].clone()).collect();
    let year = rows.iter().map(|&i| data.year[i]).collect();
    let mut out = Dataset::new(entity, year);
    for name in data.column_names() {
        let col = data.column(name).expect("existing column");
        out.add_dense_column(name, rows.iter().map(|&i| col[i]).collect());
    }
    out
}

fn rep_config(config: &SyntheticConfig, rep: usize) -> SyntheticConfig {
    let mut cfg = config.clone();
    cfg.stream = config.stream + 1 + rep as u64;
    cfg
}

/// Runs one study for `replications` independent replications (distinct
/// RNG streams off the base seed) and aggregates recovery statistics.
pub fn monte_carlo(config: &SyntheticConfig, replications: usize, study: Study) -> McReport {
    let mut report = McReport {
        study: study.name().to_string(),
        replications,
        failures: 0,
        failure_messages: Vec::new(),
        params: BTreeMap::new(),
        extras: BTreeMap::new(),
    };
    match study {
        Study::Complementarity | Study::ComplementarityNull => {
            let mut config = config.clone();
            config.truth.endogeneity = 0.0;
            if study == Study::ComplementarityNull {
                config.truth.beta_interaction = 0.0;
            }
            let mut est = Vec::new();
            let mut ses = Vec::new();
            let mut dfs = Vec::new();
            for rep in 0..replications {
                let run = || -> Result<(f64, f64, f64)> {
                    let data = generate(&rep_config(&config, rep))?;
                    let panel = pipeline_panel(&data)?;
                    let res = performance_ols(&panel)?;
                    let c = res
                        .coefficient("ai_capability_x_readiness_external")
                        .ok_or_else(|| {
                            crate::Error::Estimation("interaction coefficient dropped".into())
                        })?;
                    Ok((c.estimate, c.se, res.inference_df()))
                };
                match run() {
                    Ok((e, s, d)) => {
                        est.push(e);
                        ses.push(s);
                        dfs.push(d);
                    }
                    Err(e) => {
                        report.failures += 1;
                        report.failure_messages.push(format!("rep {rep}: {e}"));
                    }
                }
            }
            if !est.is_empty() {
                report.params.insert(
                    "beta_interaction".to_string(),
                    recover(config.truth.beta_interaction, &est, &ses, &dfs),
                );
                let mean_t: f64 = est
                    .iter()
                    .zip(&ses)
                    .map(|(e, s)| e / s)
                    .sum::<f64>()
                    / est.len() as f64;
                report.extras.insert("mean_t".to_string(), mean_t);
            }
        }
        Study::Iv => {
            let mut config = config.clone();
            if config.truth.endogeneity == 0.0 {
                config.truth.endogeneity = 0.8;
            }
            let (mut ols_est, mut ols_se, mut ols_df) = (Vec::new(), Vec::new(), Vec::new());
            let (mut iv_est, mut iv_se, mut iv_df) = (Vec::new(), Vec::new(), Vec::new());
            let mut f_stats = Vec::new();
            let mut first_stage_positive = 0usize;
            for rep in 0..replications {
                let run = || -> Result<(f64, f64, f64, f64, f64, f64, f64, bool)> {
                    let data = generate(&rep_config(&config, rep))?;
                    let panel = pipeline_panel(&data)?;
                    let mut dataset = estimation_dataset(&panel)?;
                    let ols = fe_ols(&performance_spec(), &dataset)?;
                    let mut spec = performance_spec().with_iv(
                        &["ai_capability", "ai_capability_x_readiness_external"],
                        &["lagged_policy"],
                    );
                    crate::econ::augment_interaction_instruments(&mut spec, &mut dataset)?;
                    let iv = tsls(&spec, &mut dataset)?;
                    let co = ols
                        .coefficient("ai_capability_x_readiness_external")
                        .ok_or_else(|| crate::Error::Estimation("OLS interaction dropped".into()))?
                        .clone();
                    let ci = iv
                        .coefficient("ai_capability_x_readiness_external")
                        .ok_or_else(|| crate::Error::Estimation("IV interaction dropped".into()))?
                        .clone();
                    let f = iv
                        .diagnostics
                        .get("first_stage_F_ai_capability")
                        .copied()
                        .unwrap_or(f64::NAN);
                    // explicit first stage for the policy coefficient sign
                    let fs_spec = ModelSpec::linear(
                        "ai_capability",
                        &["lagged_policy", "readiness_external"],
                    )
                    .with_fe(FixedEffects::TWO_WAY)
                    .with_cluster(ClusterBy::Firm);
                    let fs = fe_ols(&fs_spec, &dataset)?;
                    let positive = fs
                        .coefficient("lagged_policy")
                        .is_some_and(|c| c.estimate > 0.0);
                    Ok((
                        co.estimate,
                        co.se,
                        ols.inference_df(),
                        ci.estimate,
                        ci.se,
                        iv.inference_df(),
                        f,
                        positive,
                    ))
                };
                match run() {
                    Ok((oe, os, od, ie, is, id, f, pos)) => {
                        ols_est.push(oe);
                        ols_se.push(os);
                        ols_df.push(od);
                        iv_est.push(ie);
                        iv_se.push(is);
                        iv_df.push(id);
                        f_stats.push(f);
                        if pos {
                            first_stage_positive += 1;
                        }
                    }
                    Err(e) => {
                        report.failures += 1;
                        report.failure_messages.push(format!("rep {rep}: {e}"));
                    }
                }
            }
            if !iv_est.is_empty() {
                let truth = config.truth.beta_interaction;
                report.params.insert(
                    "beta_interaction_ols".to_string(),
                    recover(truth, &ols_est, &ols_se, &ols_df),
                );
                report.params.insert(
                    "beta_interaction_tsls".to_string(),
                    recover(truth, &iv_est, &iv_se, &iv_df),
                );
                let n = f_stats.len() as f64;
                report
                    .extras
                    .insert("mean_first_stage_f".to_string(), f_stats.iter().sum::<f64>() / n);
                report.extras.insert(
                    "share_first_stage_f_gt_10".to_string(),
                    f_stats.iter().filter(|f| **f > 10.0).count() as f64 / n,
                );
                report.extras.insert(
                    "share_first_stage_positive".to_string(),
                    first_stage_positive as f64 / n,
                );
            }
        }
        Study::Exclusivity => {
            let mut config = config.clone();
            if config.truth.endogeneity == 0.0 {
                config.truth.endogeneity = 0.8;
            }
            let mut small_t = 0usize;
            let mut total = 0usize;
            for rep in 0..replications {
                let run = || -> Result<f64> {
                    let data = generate(&rep_config(&config, rep))?;
                    let panel = pipeline_panel(&data)?;
                    let mut dataset = estimation_dataset(&panel)?;
                    build_interaction(&mut dataset, "lagged_policy", "readiness_external")?;
                    let zero: std::collections::BTreeSet<(String, i32)> =
                        filter_zero_ai(&panel, false)
                            .into_iter()
                            .map(|r| (r.firm_id, r.year))
                            .collect();
                    let rows: Vec<usize> = (0..dataset.len())
                        .filter(|&i| {
                            zero.contains(&(dataset.entity[i].clone(), dataset.year[i]))
                        })
                        .collect();
                    let sub = select_rows(&dataset, &rows);
                    let spec = ModelSpec::linear(
                        "lead_rpe",
                        &["lagged_policy_x_readiness_external"],
                    )
                    .with_fe(FixedEffects::TWO_WAY)
                    .with_cluster(ClusterBy::Firm);
                    let res = fe_ols(&spec, &sub)?;
                    let c = res
                        .coefficient("lagged_policy_x_readiness_external")
                        .ok_or_else(|| crate::Error::Estimation("interaction dropped".into()))?;
                    Ok(c.t_stat())
                };
                match run() {
                    Ok(t) => {
                        total += 1;
                        if t.abs() < 2.0 {
                            small_t += 1;
                        }
                    }
                    Err(e) => {
                        report.failures += 1;
                        report.failure_messages.push(format!("rep {rep}: {e}"));
                    }
                }
            }
            if total > 0 {
                report
                    .extras
                    .insert("share_t_lt_2".to_string(), small_t as f64 / total as f64);
            }
        }
        Study::Tfp => {
            let firm_ids: Vec<String> =
                (0..config.n_firms).map(|f| format!("F{f:04}")).collect();
            let (mut bl, mut bl_se, mut bl_df) = (Vec::new(), Vec::new(), Vec::new());
            let (mut bk, mut bk_se, mut bk_df) = (Vec::new(), Vec::new(), Vec::new());
            let mut both_within = 0usize;
            let mut ols_over = 0usize;
            let mut total = 0usize;
            for rep in 0..replications {
                let run = || -> Result<(f64, f64, f64, f64, bool)> {
                    let mut rng = ChaCha20Rng::seed_from_u64(config.seed);
                    rng.set_stream(config.stream + 1 + rep as u64);
                    let inputs =
                        generate_production(&mut rng, &firm_ids, config.years, &config.truth);
                    let gmm = wooldridge_tfp(&inputs)?;
                    // pooled OLS with year effects for the bias comparison
                    let entity: Vec<String> =
                        inputs.iter().map(|r| r.firm_id.clone()).collect();
                    let year: Vec<i32> = inputs.iter().map(|r| r.year).collect();
                    let mut data = Dataset::new(entity, year);
                    data.add_dense_column("y", inputs.iter().map(|r| r.ln_output).collect());
                    data.add_dense_column("l", inputs.iter().map(|r| r.ln_labor).collect());
                    data.add_dense_column("k", inputs.iter().map(|r| r.ln_capital).collect());
                    let spec = ModelSpec::linear("y", &["l", "k"])
                        .with_fe(FixedEffects::YEAR)
                        .with_cluster(ClusterBy::Firm);
                    let ols = fe_ols(&spec, &data)?;
                    let ols_l = ols
                        .coefficient("l")
                        .ok_or_else(|| crate::Error::Estimation("labor dropped".into()))?
                        .estimate;
                    Ok((gmm.beta_l, gmm.se_l, gmm.beta_k, gmm.se_k, ols_l > gmm.beta_l))
                };
                match run() {
                    Ok((l, sl, k, sk, over)) => {
                        total += 1;
                        let df = (config.n_firms.max(2) - 1) as f64;
                        bl.push(l);
                        bl_se.push(sl);
                        bl_df.push(df);
                        bk.push(k);
                        bk_se.push(sk);
                        bk_df.push(df);
                        if (l - config.truth.beta_l).abs() <= 0.05
                            && (k - config.truth.beta_k).abs() <= 0.05
                        {
                            both_within += 1;
                        }
                        if over {
                            ols_over += 1;
                        }
                    }
                    Err(e) => {
                        report.failures += 1;
                        report.failure_messages.push(format!("rep {rep}: {e}"));
                    }
                }
            }
            if total > 0 {
                report
                    .params
                    .insert("beta_l".to_string(), recover(config.truth.beta_l, &bl, &bl_se, &bl_df));
                report
                    .params
                    .insert("beta_k".to_string(), recover(config.truth.beta_k, &bk, &bk_se, &bk_df));
                report.extras.insert(
                    "share_within_0_05".to_string(),
                    both_within as f64 / total as f64,
                );
                report
                    .extras
                    .insert("share_ols_overestimates_l".to_string(), ols_over as f64 / total as f64);
            }
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_config() -> SyntheticConfig {
        SyntheticConfig {
            n_firms: 60,
            years: (2016, 2019),
            market_patents_per_year: 150,
            seed: 3,
            ..SyntheticConfig::default()
        }
    }

    #[test]
    fn complementarity_smoke_runs_clean() {
        let report = monte_carlo(&tiny_config(), 3, Study::Complementarity);
        assert_eq!(report.failures, 0, "{:?}", report.failure_messages);
        let p = &report.params["beta_interaction"];
        assert!(p.mean_estimate.is_finite());
        assert!(p.rmse < 1.0, "rmse {}", p.rmse);
    }

    #[test]
    fn monte_carlo_is_deterministic() {
        let a = monte_carlo(&tiny_config(), 2, Study::Complementarity);
        let b = monte_carlo(&tiny_config(), 2, Study::Complementarity);
        assert_eq!(
            serde_json::to_string(&a.params).unwrap(),
            serde_json::to_string(&b.params).unwrap()
        );
    }

    #[test]
    fn iv_smoke_reports_first_stage() {
        let report = monte_carlo(&tiny_config(), 2, Study::Iv);
        assert_eq!(report.failures, 0, "{:?}", report.failure_messages);
        assert!(report.extras.contains_key("mean_first_stage_f"));
        assert!(report.params.contains_key("beta_interaction_tsls"));
    }

    #[test]
    fn exclusivity_smoke() {
        let report = monte_carlo(&tiny_config(), 2, Study::Exclusivity);
        assert_eq!(report.failures, 0, "{:?}", report.failure_messages);
        assert!(report.extras["share_t_lt_2"] >= 0.0);
    }

    #[test]
    fn tfp_smoke_recovers_roughly() {
        let config = SyntheticConfig {
            n_firms: 200,
            ..tiny_config()
        };
        let report = monte_carlo(&config, 2, Study::Tfp);
        assert_eq!(report.failures, 0, "{:?}", report.failure_messages);
        let l = &report.params["beta_l"];
        assert!((l.mean_estimate - 0.6).abs() < 0.1, "beta_l {}", l.mean_estimate);
    }
}
