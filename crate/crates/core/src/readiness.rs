//! Firm-year readiness: portfolio-weighted decile scores, plus the
//! decomposition into the external-technological-evolution variant (pooled
//! portfolio, yearly scores) and the internal-strategic-pivot variant
//! (yearly portfolio, pooled scores).

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use crate::cooccur::{count_cooccurrence, decile_scores, CooccurrenceTable, CountScope, DomainScoreTable};
use crate::corpus::{AiCodeSet, Ipc4, PatentRecord};

/// How AI-designated codes inside a firm's own portfolio are scored.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AiCodePolicy {
    /// An AI-class patent is maximally AI-integrated: score 1.0.
    #[default]
    ScoreOne,
    /// Drop AI codes and renormalize the remaining weights.
    Exclude,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ReadinessVariant {
    Baseline,
    External,
    Internal,
}

/// A firm's code-occurrence portfolio over a window (one year or pooled).
/// Weights are code-occurrence counts over the summed code-occurrence total,
/// matching the worked-example arithmetic rather than a patent-count
/// denominator.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FirmPortfolio {
    pub firm_id: String,
    pub code_counts: BTreeMap<Ipc4, u64>,
    pub code_weights: BTreeMap<Ipc4, f64>,
    pub patent_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FirmReadiness {
    pub firm_id: String,
    pub year: i32,
    pub value: f64,
    pub variant: ReadinessVariant,
}

/// Builds a firm's portfolio from its patents in a window. Returns `None`
/// for an empty window; readiness is then missing, not zero.
pub fn firm_portfolio<'a, I>(firm_id: &str, patents: I) -> Option<FirmPortfolio>
where
    I: IntoIterator<Item = &'a PatentRecord>,
{
    let mut code_counts: BTreeMap<Ipc4, u64> = BTreeMap::new();
    let mut patent_count = 0;
    for patent in patents {
        patent_count += 1;
        for code in &patent.ipc4_codes {
            *code_counts.entry(*code).or_insert(0) += 1;
        }
    }
    if patent_count == 0 {
        return None;
    }
    let total: u64 = code_counts.values().sum();
    let code_weights = code_counts
        .iter()
        .map(|(code, &c)| (*code, c as f64 / total as f64))
        .collect();
    Some(FirmPortfolio {
        firm_id: firm_id.to_string(),
        code_counts,
        code_weights,
        patent_count,
    })
}

/// Portfolio-weighted readiness against one score table:
/// value = sum_j weight(j) * score(j), computed as a count-weighted sum over
/// the integer score levels so the convex combination is exact.
pub fn firm_readiness(
    portfolio: &FirmPortfolio,
    scores: &DomainScoreTable,
    ai_codes: &AiCodeSet,
    policy: AiCodePolicy,
) -> Option<f64> {
    let mut weighted_levels: u64 = 0;
    let mut total: u64 = 0;
    for (code, &count) in &portfolio.code_counts {
        let level = if ai_codes.contains(code) {
            match policy {
                AiCodePolicy::ScoreOne => 10,
                AiCodePolicy::Exclude => continue,
            }
        } else {
            scores.level(code)
        };
        weighted_levels += count * u64::from(level);
        total += count;
    }
    if total == 0 {
        return None; // exclude policy emptied the portfolio
    }
    Some(weighted_levels as f64 / (10.0 * total as f64))
}

/// External-technological-evolution series: one fixed pooled portfolio
/// evaluated against each year's score table.
pub fn readiness_external(
    pooled: &FirmPortfolio,
    yearly_scores: &BTreeMap<i32, DomainScoreTable>,
    ai_codes: &AiCodeSet,
    policy: AiCodePolicy,
) -> Vec<FirmReadiness> {
    yearly_scores
        .iter()
        .filter_map(|(&year, scores)| {
            firm_readiness(pooled, scores, ai_codes, policy).map(|value| FirmReadiness {
                firm_id: pooled.firm_id.clone(),
                year,
                value,
                variant: ReadinessVariant::External,
            })
        })
        .collect()
}

/// Internal-strategic-pivot series: each year's portfolio evaluated against
/// the single pooled score table.
pub fn readiness_internal(
    yearly_portfolios: &BTreeMap<i32, FirmPortfolio>,
    pooled_scores: &DomainScoreTable,
    ai_codes: &AiCodeSet,
    policy: AiCodePolicy,
) -> Vec<FirmReadiness> {
    yearly_portfolios
        .iter()
        .filter_map(|(&year, portfolio)| {
            firm_readiness(portfolio, pooled_scores, ai_codes, policy).map(|value| FirmReadiness {
                firm_id: portfolio.firm_id.clone(),
                year,
                value,
                variant: ReadinessVariant::Internal,
            })
        })
        .collect()
}

/// One firm-year readiness row with all three variants.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReadinessRow {
    pub firm_id: String,
    pub year: i32,
    pub baseline: Option<f64>,
    pub external: Option<f64>,
    pub internal: Option<f64>,
    pub patent_count: usize,
}

/// All score tables the readiness computation needs: one per year plus the
/// pooled table built by summing yearly counts before decile ranking.
#[derive(Debug, Clone)]
pub struct ScoreTables {
    pub yearly: BTreeMap<i32, DomainScoreTable>,
    pub pooled: DomainScoreTable,
    pub yearly_counts: BTreeMap<i32, CooccurrenceTable>,
}

/// Builds per-year and pooled decile tables from a tagged corpus.
pub fn build_score_tables(corpus: &[PatentRecord], years: (i32, i32), ai_codes: &AiCodeSet) -> ScoreTables {
    let mut yearly = BTreeMap::new();
    let mut yearly_counts = BTreeMap::new();
    let mut pooled_counts: Option<CooccurrenceTable> = None;
    for year in years.0..=years.1 {
        let table = count_cooccurrence(corpus, year, CountScope::NonAiOnly, ai_codes);
        match &mut pooled_counts {
            Some(p) => p.merge(&table),
            None => pooled_counts = Some(table.clone()),
        }
        yearly.insert(year, decile_scores(&table));
        yearly_counts.insert(year, table);
    }
    let pooled = decile_scores(&pooled_counts.expect("year range nonempty"));
    ScoreTables {
        yearly,
        pooled,
        yearly_counts,
    }
}

/// Computes baseline, external, and internal readiness for every firm-year
/// with at least one patent in the relevant window.
pub fn readiness_panel(
    corpus: &[PatentRecord],
    firm_ids: &BTreeSet<String>,
    years: (i32, i32),
    ai_codes: &AiCodeSet,
    policy: AiCodePolicy,
) -> Vec<ReadinessRow> {
    let tables = build_score_tables(corpus, years, ai_codes);

    // group the firms' patents once
    let mut by_firm: BTreeMap<&str, Vec<&PatentRecord>> = BTreeMap::new();
    for patent in corpus {
        if firm_ids.contains(&patent.applicant_id) {
            by_firm.entry(&patent.applicant_id).or_default().push(patent);
        }
    }

    let mut rows = Vec::new();
    for (&firm_id, patents) in &by_firm {
        let pooled_portfolio = firm_portfolio(
            firm_id,
            patents
                .iter()
                .filter(|p| p.year >= years.0 && p.year <= years.1)
                .copied(),
        );
        let mut yearly_portfolios: BTreeMap<i32, FirmPortfolio> = BTreeMap::new();
        for year in years.0..=years.1 {
            if let Some(p) = firm_portfolio(firm_id, patents.iter().filter(|p| p.year == year).copied())
            {
                yearly_portfolios.insert(year, p);
            }
        }
        let external: BTreeMap<i32, f64> = pooled_portfolio
            .as_ref()
            .map(|pp| {
                readiness_external(pp, &tables.yearly, ai_codes, policy)
                    .into_iter()
                    .map(|r| (r.year, r.value))
                    .collect()
            })
            .unwrap_or_default();
        let internal: BTreeMap<i32, f64> =
            readiness_internal(&yearly_portfolios, &tables.pooled, ai_codes, policy)
                .into_iter()
                .map(|r| (r.year, r.value))
                .collect();
        for year in years.0..=years.1 {
            let portfolio = yearly_portfolios.get(&year);
            let baseline = portfolio
                .and_then(|p| firm_readiness(p, &tables.yearly[&year], ai_codes, policy));
            rows.push(ReadinessRow {
                firm_id: firm_id.to_string(),
                year,
                baseline,
                external: external.get(&year).copied(),
                internal: internal.get(&year).copied(),
                patent_count: portfolio.map_or(0, |p| p.patent_count),
            });
        }
    }
    rows
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cooccur::ScoreMethod;
    use crate::corpus::ApplicantType;

    fn ipc(code: &str) -> Ipc4 {
        Ipc4::parse(code).unwrap()
    }

    fn patent(id: &str, firm: &str, year: i32, codes: &[&str]) -> PatentRecord {
        PatentRecord {
            patent_id: id.to_string(),
            year,
            applicant_id: firm.to_string(),
            applicant_type: ApplicantType::Enterprise,
            ipc4_codes: codes.iter().map(|c| ipc(c)).collect(),
            is_ai: false,
        }
    }

    fn score_table(entries: &[(&str, u8)]) -> DomainScoreTable {
        DomainScoreTable {
            year: 2016,
            levels: entries.iter().map(|(c, l)| (ipc(c), *l)).collect(),
            method: ScoreMethod::FrequencyDecile,
        }
    }

    fn no_ai() -> AiCodeSet {
        [ipc("G06N")].into_iter().collect()
    }

    #[test]
    fn portfolio_weights_from_code_counts() {
        // 1 x G01B, 6 x A61B, 3 x G16H
        let mut patents = Vec::new();
        patents.push(patent("P0", "A", 2016, &["G01B"]));
        for i in 0..6 {
            patents.push(patent(&format!("PA{i}"), "A", 2016, &["A61B"]));
        }
        for i in 0..3 {
            patents.push(patent(&format!("PG{i}"), "A", 2016, &["G16H"]));
        }
        let p = firm_portfolio("A", patents.iter()).unwrap();
        assert_eq!(p.patent_count, 10);
        assert!((p.code_weights[&ipc("G01B")] - 0.1).abs() < 1e-15);
        assert!((p.code_weights[&ipc("A61B")] - 0.6).abs() < 1e-15);
        assert!((p.code_weights[&ipc("G16H")] - 0.3).abs() < 1e-15);
    }

    #[test]
    fn single_patent_single_code() {
        let patents = [patent("P1", "A", 2016, &["A61B"])];
        let p = firm_portfolio("A", patents.iter()).unwrap();
        assert_eq!(p.code_weights[&ipc("A61B")], 1.0);
    }

    #[test]
    fn multi_code_patent_splits_weight() {
        let patents = [patent("P1", "A", 2016, &["A61B", "G16H"])];
        let p = firm_portfolio("A", patents.iter()).unwrap();
        assert_eq!(p.code_weights[&ipc("A61B")], 0.5);
        assert_eq!(p.code_weights[&ipc("G16H")], 0.5);
    }

    #[test]
    fn empty_window_yields_none() {
        assert!(firm_portfolio("A", std::iter::empty()).is_none());
    }

    #[test]
    fn worked_example_value() {
        // Portfolio 0.1/0.6/0.3 against scores 0.8/0.5/0.6 -> 0.56
        let mut patents = vec![patent("P0", "A", 2016, &["G01B"])];
        for i in 0..6 {
            patents.push(patent(&format!("PA{i}"), "A", 2016, &["A61B"]));
        }
        for i in 0..3 {
            patents.push(patent(&format!("PG{i}"), "A", 2016, &["G16H"]));
        }
        let p = firm_portfolio("A", patents.iter()).unwrap();
        let scores = score_table(&[("G01B", 8), ("A61B", 5), ("G16H", 6)]);
        let v = firm_readiness(&p, &scores, &no_ai(), AiCodePolicy::ScoreOne).unwrap();
        assert!((v - 0.56).abs() < 1e-12);
    }

    #[test]
    fn absent_codes_floor_at_zero() {
        let patents = [patent("P1", "A", 2016, &["A61B"])];
        let p = firm_portfolio("A", patents.iter()).unwrap();
        let scores = score_table(&[]);
        assert_eq!(
            firm_readiness(&p, &scores, &no_ai(), AiCodePolicy::ScoreOne),
            Some(0.0)
        );
    }

    #[test]
    fn top_decile_portfolio_hits_ceiling() {
        let patents = [patent("P1", "A", 2016, &["A61B", "C07D"])];
        let p = firm_portfolio("A", patents.iter()).unwrap();
        let scores = score_table(&[("A61B", 10), ("C07D", 10)]);
        assert_eq!(
            firm_readiness(&p, &scores, &no_ai(), AiCodePolicy::ScoreOne),
            Some(1.0)
        );
    }

    #[test]
    fn ai_code_policies() {
        let patents = [
            patent("P1", "A", 2016, &["G06N"]),
            patent("P2", "A", 2016, &["A61B"]),
        ];
        let p = firm_portfolio("A", patents.iter()).unwrap();
        let scores = score_table(&[("A61B", 4)]);
        let ai = no_ai();
        // score_one: (1.0 + 0.4) / 2
        let v = firm_readiness(&p, &scores, &ai, AiCodePolicy::ScoreOne).unwrap();
        assert!((v - 0.7).abs() < 1e-12);
        // exclude: only A61B remains
        let v = firm_readiness(&p, &scores, &ai, AiCodePolicy::Exclude).unwrap();
        assert!((v - 0.4).abs() < 1e-12);
        // exclude on an all-AI portfolio -> missing
        let only_ai = [patent("P1", "A", 2016, &["G06N"])];
        let p = firm_portfolio("A", only_ai.iter()).unwrap();
        assert_eq!(firm_readiness(&p, &scores, &ai, AiCodePolicy::Exclude), None);
    }

    #[test]
    fn external_constant_when_scores_constant() {
        let patents = [
            patent("P1", "A", 2016, &["A61B"]),
            patent("P2", "A", 2018, &["C07D"]),
        ];
        let pooled = firm_portfolio("A", patents.iter()).unwrap();
        let mut yearly = BTreeMap::new();
        for year in 2016..=2018 {
            let mut t = score_table(&[("A61B", 3), ("C07D", 9)]);
            t.year = year;
            yearly.insert(year, t);
        }
        let series = readiness_external(&pooled, &yearly, &no_ai(), AiCodePolicy::ScoreOne);
        assert_eq!(series.len(), 3);
        assert!(series.windows(2).all(|w| w[0].value == w[1].value));
    }

    #[test]
    fn external_single_code_follows_scores() {
        let patents = [patent("P1", "A", 2016, &["A61B"])];
        let pooled = firm_portfolio("A", patents.iter()).unwrap();
        let mut yearly = BTreeMap::new();
        let mut t16 = score_table(&[("A61B", 3)]);
        t16.year = 2016;
        let mut t22 = score_table(&[("A61B", 9)]);
        t22.year = 2022;
        yearly.insert(2016, t16);
        yearly.insert(2022, t22);
        let series = readiness_external(&pooled, &yearly, &no_ai(), AiCodePolicy::ScoreOne);
        assert_eq!(series[0].value, 0.3);
        assert_eq!(series[1].value, 0.9);
    }

    #[test]
    fn internal_follows_portfolio_shift() {
        let mut portfolios = BTreeMap::new();
        portfolios.insert(
            2016,
            firm_portfolio("A", [patent("P1", "A", 2016, &["A61B"])].iter()).unwrap(),
        );
        portfolios.insert(
            2022,
            firm_portfolio("A", [patent("P2", "A", 2022, &["C07D"])].iter()).unwrap(),
        );
        let pooled_scores = score_table(&[("A61B", 2), ("C07D", 8)]);
        let series = readiness_internal(&portfolios, &pooled_scores, &no_ai(), AiCodePolicy::ScoreOne);
        assert_eq!(series[0].value, 0.2);
        assert_eq!(series[1].value, 0.8);
    }

    #[test]
    fn internal_constant_when_portfolios_constant() {
        let mut portfolios = BTreeMap::new();
        for year in 2016..=2019 {
            portfolios.insert(
                year,
                firm_portfolio("A", [patent("P1", "A", year, &["A61B", "G16H"])].iter()).unwrap(),
            );
        }
        let pooled_scores = score_table(&[("A61B", 2), ("G16H", 8)]);
        let series = readiness_internal(&portfolios, &pooled_scores, &no_ai(), AiCodePolicy::ScoreOne);
        assert!(series.windows(2).all(|w| w[0].value == w[1].value));
    }

    #[test]
    fn readiness_is_linear_in_weights() {
        // mixture of two single-code portfolios vs mixture of their values
        let scores = score_table(&[("A61B", 3), ("C07D", 9)]);
        let ai = no_ai();
        // 1 patent A61B + 3 patents C07D = mixture alpha=0.25
        let mut patents = vec![patent("P1", "A", 2016, &["A61B"])];
        for i in 0..3 {
            patents.push(patent(&format!("PC{i}"), "A", 2016, &["C07D"]));
        }
        let p = firm_portfolio("A", patents.iter()).unwrap();
        let v = firm_readiness(&p, &scores, &ai, AiCodePolicy::ScoreOne).unwrap();
        assert!((v - (0.25 * 0.3 + 0.75 * 0.9)).abs() < 1e-12);
    }
}
