//! Result serialization: two-sided p-values and the aligned-column text
//! table with significance stars at the 10/5/1% levels.

use statrs::distribution::{ContinuousCDF, StudentsT};

use super::RegressionResult;

pub fn t_p_value(t: f64, df: f64) -> f64 {
    if !t.is_finite() {
        return f64::NAN;
    }
    let dist = StudentsT::new(0.0, 1.0, df.max(1.0)).expect("valid t distribution");
    2.0 * (1.0 - dist.cdf(t.abs()))
}

pub fn stars(p: f64) -> &'static str {
    if p < 0.01 {
        "***"
    } else if p < 0.05 {
        "**"
    } else if p < 0.1 {
        "*"
    } else {
        ""
    }
}

pub fn format_table(result: &RegressionResult, title: &str) -> String {
    let df = result.inference_df();
    let name_width = result
        .coefficients
        .iter()
        .map(|c| c.name.len())
        .chain(["Variable".len()])
        .max()
        .unwrap_or(8)
        .max(8);
    let mut out = String::new();
    out.push_str(title);
    out.push('\n');
    out.push_str(&"=".repeat(name_width + 18));
    out.push('\n');
    out.push_str(&format!("{:<name_width$}  {:>16}\n", "Variable", result.model));
    out.push_str(&"-".repeat(name_width + 18));
    out.push('\n');
    for c in &result.coefficients {
        let p = c.p_value(df);
        out.push_str(&format!(
            "{:<name_width$}  {:>13.4}{:<3}\n",
            c.name,
            c.estimate,
            stars(p)
        ));
        out.push_str(&format!("{:<name_width$}  {:>13}\n", "", format!("({:.4})", c.se)));
    }
    out.push_str(&"-".repeat(name_width + 18));
    out.push('\n');
    for (fe, count) in &result.fe_absorbed {
        out.push_str(&format!("{:<name_width$}  {:>16}\n", format!("{fe} FE"), format!("Yes ({count})")));
    }
    out.push_str(&format!("{:<name_width$}  {:>16}\n", "Observations", result.n_obs));
    out.push_str(&format!("{:<name_width$}  {:>16}\n", "Clusters", result.n_clusters));
    if let Some(r2) = result.r_squared_within {
        out.push_str(&format!("{:<name_width$}  {:>16.4}\n", "R2 (within)", r2));
    }
    if let Some(r2) = result.r_squared_overall {
        out.push_str(&format!("{:<name_width$}  {:>16.4}\n", "R2 (overall)", r2));
    }
    for (key, value) in &result.diagnostics {
        out.push_str(&format!("{:<name_width$}  {:>16.4}\n", key.as_str(), value));
    }
    if result.dropped.singleton + result.dropped.separated > 0 {
        out.push_str(&format!(
            "{:<name_width$}  {:>16}\n",
            "Dropped (s/s)",
            format!("{}/{}", result.dropped.singleton, result.dropped.separated)
        ));
    }
    out.push_str(&"=".repeat(name_width + 18));
    out.push('\n');
    out.push_str("Standard errors clustered; * p<0.10, ** p<0.05, *** p<0.01\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn star_thresholds() {
        assert_eq!(stars(0.005), "***");
        assert_eq!(stars(0.03), "**");
        assert_eq!(stars(0.07), "*");
        assert_eq!(stars(0.2), "");
    }

    #[test]
    fn p_value_symmetric_and_monotone() {
        assert!((t_p_value(0.0, 30.0) - 1.0).abs() < 1e-12);
        assert_eq!(t_p_value(2.0, 30.0), t_p_value(-2.0, 30.0));
        assert!(t_p_value(3.0, 30.0) < t_p_value(2.0, 30.0));
        // large-df t approaches the normal: |t|=1.96 near p=0.05
        let p = t_p_value(1.959964, 1e6);
        assert!((p - 0.05).abs() < 1e-4);
    }
}
