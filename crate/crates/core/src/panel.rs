//! Firm-year estimation panel: join of readiness, capability, financial,
//! and TFP sources anchored on financial coverage, plus leads, the lagged
//! policy instrument, summary statistics, and analysis subsamples.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::capability::{CapabilityRow, Lexicon};
use crate::corpus::{FirmFinancialRow, PolicyRecord, TextDocument, TextKind};
use crate::error::{Error, Result};
use crate::readiness::ReadinessRow;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum AdopterClass {
    Early,
    Late,
    #[default]
    Unknown,
}

/// One estimation-panel row. Every analysis column is optional; the join
/// keeps financial rows even when a source has no matching record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FirmYearObservation {
    pub firm_id: String,
    pub year: i32,
    pub readiness_baseline: Option<f64>,
    pub readiness_external: Option<f64>,
    pub readiness_internal: Option<f64>,
    pub patent_count: Option<u64>,
    pub ai_strategy: Option<f64>,
    pub ai_talent: Option<f64>,
    pub ai_asset: Option<f64>,
    pub ai_capability: Option<f64>,
    pub revenue_per_employee: Option<f64>,
    pub tfp: Option<f64>,
    pub trademarks: Option<f64>,
    pub log_total_assets: Option<f64>,
    pub leverage: Option<f64>,
    pub tobin_q: Option<f64>,
    pub province: Option<String>,
    pub lagged_policy: Option<f64>,
    pub adopter_class: AdopterClass,
}

/// ln(revenue / employees); missing when employees ≤ 0 or revenue
/// non-positive.
pub fn revenue_per_employee(revenue: f64, employees: f64) -> Option<f64> {
    if employees <= 0.0 || revenue <= 0.0 || !revenue.is_finite() || !employees.is_finite() {
        None
    } else {
        Some((revenue / employees).ln())
    }
}

/// Join missingness counts, one per non-anchor source.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AssemblyReport {
    pub rows: usize,
    pub missing_readiness: usize,
    pub missing_capability: usize,
    pub missing_tfp: usize,
}

fn unique_index<'a, T, F>(rows: &'a [T], source: &str, key: F) -> Result<BTreeMap<(&'a str, i32), &'a T>>
where
    F: Fn(&'a T) -> (&'a str, i32),
{
    let mut map = BTreeMap::new();
    for row in rows {
        let k = key(row);
        if map.insert(k, row).is_some() {
            return Err(Error::Data(format!(
                "duplicate ({}, {}) in {source} source",
                k.0, k.1
            )));
        }
    }
    Ok(map)
}

/// Left-joins all sources onto the financial rows. Duplicate (firm, year)
/// keys in any source are a hard error.
pub fn assemble_panel(
    readiness: &[ReadinessRow],
    capability: &[CapabilityRow],
    financials: &[FirmFinancialRow],
    tfp: &BTreeMap<(String, i32), f64>,
) -> Result<(Vec<FirmYearObservation>, AssemblyReport)> {
    let readiness_idx = unique_index(readiness, "readiness", |r| (r.firm_id.as_str(), r.year))?;
    let capability_idx = unique_index(capability, "capability", |r| (r.firm_id.as_str(), r.year))?;
    // financials anchor the join, so their keys must be unique too
    unique_index(financials, "financials", |r| (r.firm_id.as_str(), r.year))?;

    let mut report = AssemblyReport {
        rows: financials.len(),
        missing_readiness: 0,
        missing_capability: 0,
        missing_tfp: 0,
    };
    let mut panel = Vec::with_capacity(financials.len());
    for fin in financials {
        let key = (fin.firm_id.as_str(), fin.year);
        let rdy = readiness_idx.get(&key);
        let cap = capability_idx.get(&key);
        let firm_tfp = tfp.get(&(fin.firm_id.clone(), fin.year)).copied();
        if rdy.is_none() {
            report.missing_readiness += 1;
        }
        if cap.is_none() {
            report.missing_capability += 1;
        }
        if firm_tfp.is_none() {
            report.missing_tfp += 1;
        }
        panel.push(FirmYearObservation {
            firm_id: fin.firm_id.clone(),
            year: fin.year,
            readiness_baseline: rdy.and_then(|r| r.baseline),
            readiness_external: rdy.and_then(|r| r.external),
            readiness_internal: rdy.and_then(|r| r.internal),
            patent_count: rdy.map(|r| r.patent_count as u64),
            ai_strategy: cap.and_then(|c| c.ai_strategy),
            ai_talent: cap.and_then(|c| c.ai_talent),
            ai_asset: cap.and_then(|c| c.ai_asset),
            ai_capability: cap.and_then(|c| c.ai_capability),
            revenue_per_employee: match (fin.revenue, fin.employees) {
                (Some(r), Some(e)) => revenue_per_employee(r, e),
                _ => None,
            },
            tfp: firm_tfp,
            trademarks: fin.trademarks,
            log_total_assets: fin.total_assets.and_then(|a| (a > 0.0).then(|| a.ln())),
            leverage: fin.leverage,
            tobin_q: fin.tobin_q,
            province: fin.province.clone(),
            lagged_policy: None,
            adopter_class: AdopterClass::Unknown,
        });
    }
    panel.sort_by(|a, b| (a.firm_id.as_str(), a.year).cmp(&(b.firm_id.as_str(), b.year)));
    Ok((panel, report))
}

/// Lead of a column by `k` years within a firm. The value at (i, t) is the
/// value at (i, t+k) only when every intermediate year t+1..t+k exists for
/// the firm; gaps do not bridge, so lead(lead(x,1),1) = lead(x,2).
pub fn lead<F>(panel: &[FirmYearObservation], var: F, k: i32) -> Vec<Option<f64>>
where
    F: Fn(&FirmYearObservation) -> Option<f64>,
{
    assert!(k >= 1, "lead horizon must be >= 1");
    let mut index: BTreeMap<(&str, i32), usize> = BTreeMap::new();
    for (i, row) in panel.iter().enumerate() {
        index.insert((&row.firm_id, row.year), i);
    }
    panel
        .iter()
        .map(|row| {
            for step in 1..=k {
                let target = index.get(&(row.firm_id.as_str(), row.year + step));
                match target {
                    None => return None,
                    Some(&idx) if step == k => return var(&panel[idx]),
                    Some(_) => {}
                }
            }
            unreachable!()
        })
        .collect()
}

/// Fills `lagged_policy(i, t)` with the number of policies in the firm's
/// province effective on or before t−1. Rows without a province stay
/// missing; a known province with no policies counts 0.
pub fn policy_instrument(policies: &[PolicyRecord], panel: &mut [FirmYearObservation]) {
    let mut by_province: BTreeMap<&str, Vec<i32>> = BTreeMap::new();
    for p in policies {
        by_province.entry(&p.province).or_default().push(p.effective_year);
    }
    for years in by_province.values_mut() {
        years.sort_unstable();
    }
    for row in panel.iter_mut() {
        row.lagged_policy = row.province.as_deref().map(|prov| {
            by_province
                .get(prov)
                .map_or(0, |years| years.partition_point(|&y| y <= row.year - 1)) as f64
        });
    }
}

/// One summary line per variable: mean, sample sd, nearest-rank P1 and
/// P99, and the non-missing count.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub variable: String,
    pub mean: f64,
    pub sd: f64,
    pub p1: f64,
    pub p99: f64,
    pub n: usize,
}

/// Nearest-rank percentile: the ceil(p·N/100)-th order statistic (1-based).
fn nearest_rank(sorted: &[f64], p: u32) -> f64 {
    let n = sorted.len() as u64;
    let rank = (u64::from(p) * n).div_ceil(100).max(1) as usize;
    sorted[rank - 1]
}

/// Computes Table-1 style summary statistics. All-missing variables are
/// omitted and named in the returned warning list.
pub fn summarize<'a, F>(
    panel: &[FirmYearObservation],
    variables: &[(&'a str, F)],
) -> (Vec<SummaryRow>, Vec<String>)
where
    F: Fn(&FirmYearObservation) -> Option<f64>,
{
    let mut rows = Vec::new();
    let mut warnings = Vec::new();
    for (name, var) in variables {
        let mut values: Vec<f64> = panel.iter().filter_map(var).collect();
        if values.is_empty() {
            warnings.push(format!("variable {name} has no non-missing values; omitted"));
            continue;
        }
        values.sort_by(|a, b| a.total_cmp(b));
        let n = values.len();
        let mean = values.iter().sum::<f64>() / n as f64;
        let sd = if n > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0)).sqrt()
        } else {
            0.0
        };
        rows.push(SummaryRow {
            variable: name.to_string(),
            mean,
            sd,
            p1: nearest_rank(&values, 1),
            p99: nearest_rank(&values, 99),
            n,
        });
    }
    (rows, warnings)
}

/// Classifies each firm: early if it has at least one AI-matching posting
/// in 2016 or 2017, late if it has posting records but none matching in
/// that window, unknown if it has no posting records at all.
pub fn split_adopters(
    panel: &mut [FirmYearObservation],
    texts: &[TextDocument],
    talent_lexicon: &Lexicon,
) {
    let mut has_postings: BTreeSet<&str> = BTreeSet::new();
    let mut early: BTreeSet<&str> = BTreeSet::new();
    for doc in texts.iter().filter(|d| d.kind == TextKind::JobPosting) {
        has_postings.insert(&doc.firm_id);
        if (2016..=2017).contains(&doc.year) {
            let hit = talent_lexicon.matches(&doc.text)
                || doc.title.as_deref().is_some_and(|t| talent_lexicon.matches(t));
            if hit {
                early.insert(&doc.firm_id);
            }
        }
    }
    for row in panel.iter_mut() {
        row.adopter_class = if early.contains(row.firm_id.as_str()) {
            AdopterClass::Early
        } else if has_postings.contains(row.firm_id.as_str()) {
            AdopterClass::Late
        } else {
            AdopterClass::Unknown
        };
    }
}

/// Rows with neither AI hiring nor AI assets (talent = 0 and asset = 0),
/// or the complementary subsample (talent or asset > 0) when `complement`.
/// Rows missing either component are excluded from both subsamples.
pub fn filter_zero_ai(panel: &[FirmYearObservation], complement: bool) -> Vec<FirmYearObservation> {
    panel
        .iter()
        .filter(|row| match (row.ai_talent, row.ai_asset) {
            (Some(t), Some(a)) => {
                let zero = t == 0.0 && a == 0.0;
                zero != complement
            }
            _ => false,
        })
        .cloned()
        .collect()
}

/// Writes the panel as CSV with the fixed header; missing values are empty
/// fields.
pub fn write_panel_csv(path: &Path, panel: &[FirmYearObservation]) -> Result<()> {
    let mut writer = csv::Writer::from_path(path).map_err(|e| Error::Data(e.to_string()))?;
    for row in panel {
        writer.serialize(row).map_err(|e| Error::Data(e.to_string()))?;
    }
    writer.flush().map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Reads a panel written by [`write_panel_csv`]; empty fields deserialize
/// as missing.
pub fn read_panel_csv(path: &Path) -> Result<Vec<FirmYearObservation>> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| Error::Io {
        path: path.display().to_string(),
        source: std::io::Error::new(std::io::ErrorKind::NotFound, e.to_string()),
    })?;
    let mut panel = Vec::new();
    for (i, record) in reader.deserialize::<FirmYearObservation>().enumerate() {
        panel.push(record.map_err(|e| Error::Parse {
            path: path.display().to_string(),
            line: i + 2,
            message: e.to_string(),
        })?);
    }
    Ok(panel)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::capability::LexiconKind;
    use crate::corpus::normalize_text;

    fn fin(firm: &str, year: i32) -> FirmFinancialRow {
        FirmFinancialRow {
            firm_id: firm.to_string(),
            year,
            revenue: Some(1000.0),
            employees: Some(10.0),
            total_assets: Some(1.0e6),
            leverage: Some(0.4),
            tobin_q: Some(1.5),
            trademarks: Some(2.0),
            province: Some("guangdong".to_string()),
            ln_output: None,
            ln_labor: None,
            ln_capital: None,
            ln_materials: None,
        }
    }

    fn rdy(firm: &str, year: i32, baseline: f64) -> ReadinessRow {
        ReadinessRow {
            firm_id: firm.to_string(),
            year,
            baseline: Some(baseline),
            external: Some(baseline),
            internal: Some(baseline),
            patent_count: 3,
        }
    }

    fn cap(firm: &str, year: i32, value: f64) -> CapabilityRow {
        CapabilityRow {
            firm_id: firm.to_string(),
            year,
            ai_strategy: Some(value),
            ai_talent: Some(value.min(1.0)),
            ai_asset: Some(value),
            ai_capability: Some(3.0 * value),
        }
    }

    fn obs(firm: &str, year: i32) -> FirmYearObservation {
        FirmYearObservation {
            firm_id: firm.to_string(),
            year,
            readiness_baseline: None,
            readiness_external: None,
            readiness_internal: None,
            patent_count: None,
            ai_strategy: None,
            ai_talent: None,
            ai_asset: None,
            ai_capability: None,
            revenue_per_employee: None,
            tfp: None,
            trademarks: None,
            log_total_assets: None,
            leverage: None,
            tobin_q: None,
            province: None,
            lagged_policy: None,
            adopter_class: AdopterClass::Unknown,
        }
    }

    #[test]
    fn revenue_per_employee_log_identity() {
        let v = revenue_per_employee(13.0f64.exp() * 50.0, 50.0).unwrap();
        assert!((v - 13.0).abs() < 1e-12);
        assert_eq!(revenue_per_employee(100.0, 100.0), Some(0.0));
        assert_eq!(revenue_per_employee(100.0, 0.0), None);
        assert_eq!(revenue_per_employee(100.0, -5.0), None);
    }

    #[test]
    fn assemble_fully_matched() {
        let financials = vec![fin("A", 2016), fin("A", 2017), fin("B", 2016), fin("B", 2017)];
        let readiness: Vec<ReadinessRow> = financials
            .iter()
            .map(|f| rdy(&f.firm_id, f.year, 0.5))
            .collect();
        let capability: Vec<CapabilityRow> = financials
            .iter()
            .map(|f| cap(&f.firm_id, f.year, 0.2))
            .collect();
        let tfp: BTreeMap<(String, i32), f64> = financials
            .iter()
            .map(|f| ((f.firm_id.clone(), f.year), 1.0))
            .collect();
        let (panel, report) = assemble_panel(&readiness, &capability, &financials, &tfp).unwrap();
        assert_eq!(panel.len(), 4);
        assert_eq!(report.missing_readiness, 0);
        assert_eq!(report.missing_capability, 0);
        assert_eq!(report.missing_tfp, 0);
        assert!(panel.iter().all(|r| r.readiness_baseline == Some(0.5)));
        assert!(panel.iter().all(|r| r.revenue_per_employee == Some(100.0f64.ln())));
    }

    #[test]
    fn assemble_left_join_keeps_unmatched_financials() {
        let financials = vec![fin("A", 2016), fin("B", 2016)];
        let readiness = vec![rdy("A", 2016, 0.5)];
        let (panel, report) =
            assemble_panel(&readiness, &[], &financials, &BTreeMap::new()).unwrap();
        assert_eq!(panel.len(), 2);
        assert_eq!(report.missing_readiness, 1);
        assert_eq!(report.missing_capability, 2);
        let b = panel.iter().find(|r| r.firm_id == "B").unwrap();
        assert!(b.readiness_baseline.is_none());
        assert!(b.revenue_per_employee.is_some());
    }

    #[test]
    fn assemble_duplicate_key_is_error() {
        let financials = vec![fin("A", 2016)];
        let capability = vec![cap("A", 2016, 0.1), cap("A", 2016, 0.2)];
        let err = assemble_panel(&[], &capability, &financials, &BTreeMap::new()).unwrap_err();
        assert!(err.to_string().contains("A, 2016"), "{err}");
        assert!(err.to_string().contains("capability"), "{err}");
    }

    #[test]
    fn lead_boundary_and_gap() {
        let mut a16 = obs("A", 2016);
        a16.tfp = Some(1.0);
        let mut a17 = obs("A", 2017);
        a17.tfp = Some(2.0);
        let mut b16 = obs("B", 2016);
        b16.tfp = Some(3.0);
        let mut b18 = obs("B", 2018);
        b18.tfp = Some(4.0);
        let panel = vec![a16, a17, b16, b18];
        let led = lead(&panel, |r| r.tfp, 1);
        assert_eq!(led, vec![Some(2.0), None, None, None]);
    }

    #[test]
    fn lead_two_requires_consecutive_years() {
        let mut rows = Vec::new();
        for (year, v) in [(2016, 1.0), (2017, 2.0), (2018, 3.0)] {
            let mut r = obs("A", year);
            r.tfp = Some(v);
            rows.push(r);
        }
        let led2 = lead(&rows, |r| r.tfp, 2);
        assert_eq!(led2, vec![Some(3.0), None, None]);
        // composition identity on the gap-free panel
        let led1 = lead(&rows, |r| r.tfp, 1);
        let shifted: Vec<FirmYearObservation> = rows
            .iter()
            .zip(&led1)
            .map(|(r, v)| {
                let mut r = r.clone();
                r.tfp = *v;
                r
            })
            .collect();
        assert_eq!(lead(&shifted, |r| r.tfp, 1), led2);
    }

    fn policy(province: &str, year: i32, id: &str) -> PolicyRecord {
        PolicyRecord {
            province: province.to_string(),
            effective_year: year,
            policy_id: id.to_string(),
        }
    }

    #[test]
    fn policy_instrument_cumulative_lag() {
        let policies = vec![
            policy("guangdong", 2015, "p1"),
            policy("guangdong", 2016, "p2"),
            policy("guangdong", 2017, "p3"),
            policy("zhejiang", 2016, "p4"),
        ];
        let mut panel = vec![obs("A", 2017), obs("B", 2016), obs("C", 2017)];
        panel[0].province = Some("guangdong".to_string());
        panel[1].province = Some("hainan".to_string());
        panel[2].province = None;
        policy_instrument(&policies, &mut panel);
        // 2015 and 2016 count at t=2017; the 2017 policy enters at 2018
        assert_eq!(panel[0].lagged_policy, Some(2.0));
        assert_eq!(panel[1].lagged_policy, Some(0.0));
        assert_eq!(panel[2].lagged_policy, None);
    }

    #[test]
    fn policy_instrument_nondecreasing_in_t() {
        let policies = vec![policy("x", 2015, "a"), policy("x", 2017, "b")];
        let mut panel: Vec<FirmYearObservation> = (2015..=2019)
            .map(|y| {
                let mut r = obs("A", y);
                r.province = Some("x".to_string());
                r
            })
            .collect();
        policy_instrument(&policies, &mut panel);
        let counts: Vec<f64> = panel.iter().map(|r| r.lagged_policy.unwrap()).collect();
        assert_eq!(counts, vec![0.0, 1.0, 1.0, 2.0, 2.0]);
    }

    #[test]
    fn summarize_nearest_rank() {
        let mut panel: Vec<FirmYearObservation> = (1..=100)
            .map(|i| {
                let mut r = obs("A", 2000 + i);
                r.tfp = Some(i as f64);
                r
            })
            .collect();
        panel.reverse();
        let (rows, warnings) = summarize(&panel, &[("tfp", |r: &FirmYearObservation| r.tfp)]);
        assert!(warnings.is_empty());
        assert_eq!(rows[0].p1, 1.0);
        assert_eq!(rows[0].p99, 99.0);
        assert_eq!(rows[0].n, 100);
        assert!((rows[0].mean - 50.5).abs() < 1e-12);
    }

    #[test]
    fn summarize_constant_and_singleton() {
        let mut a = obs("A", 2016);
        a.tfp = Some(7.0);
        let mut b = obs("B", 2016);
        b.tfp = Some(7.0);
        let (rows, _) = summarize(&[a.clone(), b], &[("tfp", |r: &FirmYearObservation| r.tfp)]);
        assert_eq!(rows[0].sd, 0.0);
        assert_eq!((rows[0].p1, rows[0].p99), (7.0, 7.0));
        let (rows, _) = summarize(&[a], &[("tfp", |r: &FirmYearObservation| r.tfp)]);
        assert_eq!((rows[0].mean, rows[0].p1, rows[0].p99), (7.0, 7.0, 7.0));
    }

    #[test]
    fn summarize_all_missing_warns() {
        let panel = vec![obs("A", 2016)];
        let (rows, warnings) = summarize(&panel, &[("tfp", |r: &FirmYearObservation| r.tfp)]);
        assert!(rows.is_empty());
        assert_eq!(warnings.len(), 1);
    }

    #[test]
    fn summarize_order_invariant() {
        let mut panel: Vec<FirmYearObservation> = (0..37)
            .map(|i| {
                let mut r = obs("A", 1990 + i);
                r.tfp = Some(((i * 13) % 37) as f64);
                r
            })
            .collect();
        let (fwd, _) = summarize(&panel, &[("tfp", |r: &FirmYearObservation| r.tfp)]);
        panel.reverse();
        let (rev, _) = summarize(&panel, &[("tfp", |r: &FirmYearObservation| r.tfp)]);
        assert_eq!(fwd, rev);
    }

    fn posting(firm: &str, year: i32, text: &str) -> TextDocument {
        TextDocument {
            firm_id: firm.to_string(),
            year,
            kind: TextKind::JobPosting,
            text: normalize_text(text),
            value: None,
            title: None,
        }
    }

    #[test]
    fn adopter_partition() {
        let lex = Lexicon::new(LexiconKind::Talent, ["machine learning".to_string()]).unwrap();
        let texts = vec![
            posting("E", 2016, "machine learning engineer"),
            posting("L", 2016, "accountant"),
            posting("L", 2019, "machine learning engineer"),
        ];
        let mut panel = vec![obs("E", 2018), obs("L", 2018), obs("U", 2018)];
        split_adopters(&mut panel, &texts, &lex);
        assert_eq!(panel[0].adopter_class, AdopterClass::Early);
        assert_eq!(panel[1].adopter_class, AdopterClass::Late);
        assert_eq!(panel[2].adopter_class, AdopterClass::Unknown);
    }

    #[test]
    fn zero_ai_filter_and_complement() {
        let mut panel = Vec::new();
        for (i, (t, a)) in [
            (Some(0.0), Some(0.0)),
            (Some(0.0), Some(5.1)),
            (Some(0.2), Some(0.0)),
            (Some(0.0), Some(0.0)),
            (None, Some(0.0)),
            (Some(0.0), Some(0.0)),
        ]
        .iter()
        .enumerate()
        {
            let mut r = obs(&format!("F{i}"), 2016);
            r.ai_talent = *t;
            r.ai_asset = *a;
            panel.push(r);
        }
        assert_eq!(filter_zero_ai(&panel, false).len(), 3);
        assert_eq!(filter_zero_ai(&panel, true).len(), 2);
    }

    #[test]
    fn csv_round_trip_preserves_missing() {
        let mut a = obs("A", 2016);
        a.tfp = Some(1.25);
        a.province = Some("guangdong".to_string());
        a.adopter_class = AdopterClass::Early;
        let b = obs("B", 2017);
        let panel = vec![a, b];
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("panel.csv");
        write_panel_csv(&path, &panel).unwrap();
        let back = read_panel_csv(&path).unwrap();
        assert_eq!(back, panel);
    }
}
