//! Independent re-derivation of firm-year readiness by direct enumeration
//! over the raw patent corpus. Shares no code with the readiness module;
//! used only to cross-check the pipeline in tests.

use std::collections::BTreeMap;

use crate::corpus::{AiCodeSet, Ipc4, PatentRecord};

/// Frequency of each non-AI IPC4 code among the AI patents of one year
/// (an AI patent contributes once per distinct code).
fn ai_frequencies(corpus: &[PatentRecord], year: i32, ai_codes: &AiCodeSet) -> BTreeMap<Ipc4, u64> {
    let mut freq: BTreeMap<Ipc4, u64> = BTreeMap::new();
    for patent in corpus {
        if patent.year != year || !patent.ipc4_codes.iter().any(|c| ai_codes.contains(c)) {
            continue;
        }
        for code in &patent.ipc4_codes {
            if !ai_codes.contains(code) {
                *freq.entry(*code).or_insert(0) += 1;
            }
        }
    }
    freq
}

/// Average-rank decile levels (10 = top decile) for a frequency map,
/// derived from first principles: sort descending, average the 1-based
/// positions of each tie group, bucket by ceil(10 * rank / N).
fn decile_levels(freq: &BTreeMap<Ipc4, u64>) -> BTreeMap<Ipc4, u64> {
    let mut entries: Vec<(Ipc4, u64)> = freq.iter().map(|(c, f)| (*c, *f)).collect();
    entries.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    let n = entries.len() as u64;
    let mut levels = BTreeMap::new();
    let mut start = 0usize;
    while start < entries.len() {
        let mut end = start;
        while end < entries.len() && entries[end].1 == entries[start].1 {
            end += 1;
        }
        // 1-based positions start+1 ..= end share the average rank
        let positions: u64 = (start as u64 + 1..=end as u64).sum();
        let count = (end - start) as u64;
        // decile of the average rank; kept in integers via cross
        // multiplication: ceil((10 * positions / count) / n)
        let decile = (10 * positions + count * n - 1) / (count * n);
        for entry in &entries[start..end] {
            levels.insert(entry.0, 11 - decile);
        }
        start = end;
    }
    levels
}

/// Recomputes the baseline readiness of one firm-year: the firm's code
/// occurrences that year, weighted by the year's decile scores, with AI
/// codes scored 1.
pub fn oracle_readiness(
    corpus: &[PatentRecord],
    firm_id: &str,
    year: i32,
    ai_codes: &AiCodeSet,
) -> Option<f64> {
    let levels = decile_levels(&ai_frequencies(corpus, year, ai_codes));
    let mut occurrences: BTreeMap<Ipc4, u64> = BTreeMap::new();
    let mut any = false;
    for patent in corpus {
        if patent.applicant_id == firm_id && patent.year == year {
            any = true;
            for code in &patent.ipc4_codes {
                *occurrences.entry(*code).or_insert(0) += 1;
            }
        }
    }
    if !any {
        return None;
    }
    let mut weighted: u64 = 0;
    let mut total: u64 = 0;
    for (code, count) in &occurrences {
        let level = if ai_codes.contains(code) {
            10
        } else {
            levels.get(code).copied().unwrap_or(0)
        };
        weighted += count * level;
        total += count;
    }
    Some(weighted as f64 / (10.0 * total as f64))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::ApplicantType;
    use crate::readiness::{readiness_panel, AiCodePolicy};
    use crate::synth::{generate, SyntheticConfig};

    fn ipc(code: &str) -> Ipc4 {
        Ipc4::parse(code).unwrap()
    }

    fn patent(id: &str, firm: &str, year: i32, codes: &[&str]) -> PatentRecord {
        let ipc4_codes: std::collections::BTreeSet<Ipc4> =
            codes.iter().map(|c| ipc(c)).collect();
        let is_ai = false;
        PatentRecord {
            patent_id: id.to_string(),
            year,
            applicant_id: firm.to_string(),
            applicant_type: ApplicantType::Enterprise,
            ipc4_codes,
            is_ai,
        }
    }

    #[test]
    fn worked_fixture_scores_fifty_six_hundredths() {
        // Ten market AI patents build a frequency table placing G01B in
        // the 8th score level, A61B in the 5th, G16H in the 6th: with ten
        // codes ranked, levels are 10,9,...,1 top-down, so co-occurrence
        // counts are arranged to land the three codes at ranks 3, 6, 5.
        let ai = [ipc("G06N")].into_iter().collect::<AiCodeSet>();
        let mut corpus = Vec::new();
        let fillers = ["B01D", "C07D", "D01F", "E02B", "F01L", "G02B", "H01L"];
        let ranked: Vec<(&str, usize)> = vec![
            (fillers[0], 10),
            (fillers[1], 9),
            ("G01B", 8),
            (fillers[2], 7),
            ("G16H", 6),
            ("A61B", 5),
            (fillers[3], 4),
            (fillers[4], 3),
            (fillers[5], 2),
            (fillers[6], 1),
        ];
        let mut serial = 0;
        for (code, copies) in &ranked {
            for _ in 0..*copies {
                corpus.push(patent(&format!("M{serial}"), "market", 2016, &["G06N", code]));
                serial += 1;
            }
        }
        // firm portfolio: 1 x G01B, 6 x A61B, 3 x G16H
        corpus.push(patent("P0", "A", 2016, &["G01B"]));
        for i in 0..6 {
            corpus.push(patent(&format!("PA{i}"), "A", 2016, &["A61B"]));
        }
        for i in 0..3 {
            corpus.push(patent(&format!("PG{i}"), "A", 2016, &["G16H"]));
        }
        let v = oracle_readiness(&corpus, "A", 2016, &ai).unwrap();
        assert!((v - 0.56).abs() < 1e-12, "oracle value {v}");
    }

    #[test]
    fn single_patent_single_code_returns_its_score() {
        let ai = [ipc("G06N")].into_iter().collect::<AiCodeSet>();
        let corpus = vec![
            patent("M1", "market", 2016, &["G06N", "A61B"]),
            patent("M2", "market", 2016, &["G06N", "A61B"]),
            patent("M3", "market", 2016, &["G06N", "C07D"]),
            patent("P1", "A", 2016, &["A61B"]),
        ];
        // A61B ranks 1 of 2 -> decile ceil(10*1/2) = 5 -> level 6 -> 0.6
        let v = oracle_readiness(&corpus, "A", 2016, &ai).unwrap();
        assert!((v - 0.6).abs() < 1e-12, "{v}");
    }

    #[test]
    fn missing_firm_year_is_none() {
        let ai = [ipc("G06N")].into_iter().collect::<AiCodeSet>();
        let corpus = vec![patent("P1", "A", 2016, &["A61B"])];
        assert!(oracle_readiness(&corpus, "A", 2017, &ai).is_none());
        assert!(oracle_readiness(&corpus, "B", 2016, &ai).is_none());
    }

    #[test]
    fn oracle_matches_pipeline_exactly_on_random_corpus() {
        let config = SyntheticConfig {
            n_firms: 50,
            years: (2016, 2019),
            market_patents_per_year: 150,
            seed: 11,
            ..SyntheticConfig::default()
        };
        let data = generate(&config).unwrap();
        let rows = readiness_panel(
            &data.patents,
            &data.firm_ids,
            config.years,
            &data.ai_codes,
            AiCodePolicy::ScoreOne,
        );
        let mut compared = 0;
        for row in &rows {
            let oracle = oracle_readiness(&data.patents, &row.firm_id, row.year, &data.ai_codes);
            assert_eq!(
                oracle, row.baseline,
                "mismatch for ({}, {})",
                row.firm_id, row.year
            );
            if oracle.is_some() {
                compared += 1;
            }
        }
        assert!(compared > 100, "only {compared} firm-years compared");
    }
}
