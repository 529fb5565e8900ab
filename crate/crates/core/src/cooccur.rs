//! Yearly AI co-occurrence counting per IPC4 code, decile scoring (raw
//! frequency and the ratio alternative), and derived artifacts: network edge
//! lists, section growth indices, and decile transition matrices.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::corpus::{AiCodeSet, Ipc4, PatentRecord};
use crate::error::{Error, Result};

/// Which codes a co-occurrence count covers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CountScope {
    /// Exclude AI-designated codes from the keys (readiness basis).
    NonAiOnly,
    /// Include AI–AI edges (network export basis).
    AllCodes,
}

/// Per-year co-occurrence frequencies: for each IPC4 code, the number of AI
/// patents that year whose code set contains it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CooccurrenceTable {
    pub year: i32,
    pub counts: BTreeMap<Ipc4, u64>,
    pub ai_patent_total: u64,
}

impl CooccurrenceTable {
    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    /// Commutative shard merge: counting shard-wise then merging equals
    /// counting the whole corpus.
    pub fn merge(&mut self, other: &CooccurrenceTable) {
        for (code, n) in &other.counts {
            *self.counts.entry(*code).or_insert(0) += n;
        }
        self.ai_patent_total += other.ai_patent_total;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreMethod {
    FrequencyDecile,
    RatioDecile,
}

/// Decile scores per IPC4 code. Scores are stored as integer levels 1..=10
/// (score = level / 10); codes absent from the map score exactly 0.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DomainScoreTable {
    pub year: i32,
    pub levels: BTreeMap<Ipc4, u8>,
    pub method: ScoreMethod,
}

impl DomainScoreTable {
    /// Score in {0.0, 0.1, ..., 1.0}; 0 for codes with no co-occurrence.
    pub fn score(&self, code: &Ipc4) -> f64 {
        self.levels.get(code).map_or(0.0, |&l| f64::from(l) / 10.0)
    }

    /// Integer score level in 0..=10.
    pub fn level(&self, code: &Ipc4) -> u8 {
        self.levels.get(code).copied().unwrap_or(0)
    }
}

/// Counts, for one year, how many AI patents each IPC4 code appears in.
/// Each AI patent contributes at most 1 per distinct code it carries.
pub fn count_cooccurrence(
    corpus: &[PatentRecord],
    year: i32,
    scope: CountScope,
    ai_codes: &AiCodeSet,
) -> CooccurrenceTable {
    let mut counts: BTreeMap<Ipc4, u64> = BTreeMap::new();
    let mut ai_patent_total = 0;
    for patent in corpus.iter().filter(|p| p.year == year && p.is_ai) {
        ai_patent_total += 1;
        for code in &patent.ipc4_codes {
            if scope == CountScope::NonAiOnly && ai_codes.contains(code) {
                continue;
            }
            *counts.entry(*code).or_insert(0) += 1;
        }
    }
    CooccurrenceTable {
        year,
        counts,
        ai_patent_total,
    }
}

/// Counts how many patents (AI or not) each IPC4 code appears in for one
/// year. Denominator for [`ratio_scores`].
pub fn count_all_codes(corpus: &[PatentRecord], year: i32) -> BTreeMap<Ipc4, u64> {
    let mut counts: BTreeMap<Ipc4, u64> = BTreeMap::new();
    for patent in corpus.iter().filter(|p| p.year == year) {
        for code in &patent.ipc4_codes {
            *counts.entry(*code).or_insert(0) += 1;
        }
    }
    counts
}

/// Assigns average-rank deciles to the given (code, sort key) pairs.
///
/// Codes are sorted descending by key; a tie group at positions p..p+k-1
/// receives the average rank r = (sum of positions)/k and decile
/// d = ceil(10 r / N), hence level 11 - d. Integer arithmetic throughout so
/// equal keys always share a level.
fn rank_to_levels<K: Ord + Copy>(mut entries: Vec<(Ipc4, K)>) -> BTreeMap<Ipc4, u8> {
    let n = entries.len() as u64;
    let mut levels = BTreeMap::new();
    if n == 0 {
        return levels;
    }
    entries.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    let mut pos = 0u64; // 0-based start of current tie group
    while (pos as usize) < entries.len() {
        let key = entries[pos as usize].1;
        let mut end = pos;
        while (end as usize) < entries.len()
            && entries[end as usize].1.cmp(&key) == std::cmp::Ordering::Equal
        {
            end += 1;
        }
        let k = end - pos;
        // positions pos+1 ..= end (1-based); sum = k*pos + k(k+1)/2
        let sum_positions = k * pos + k * (k + 1) / 2;
        // d = ceil(10 * (sum_positions / k) / n) = ceil(10*sum_positions / (k*n))
        let denom = k * n;
        let d = (10 * sum_positions).div_ceil(denom);
        debug_assert!((1..=10).contains(&d));
        let level = (11 - d) as u8;
        for entry in &entries[pos as usize..end as usize] {
            levels.insert(entry.0, level);
        }
        pos = end;
    }
    levels
}

/// Converts raw co-occurrence frequencies into decile scores.
pub fn decile_scores(table: &CooccurrenceTable) -> DomainScoreTable {
    let entries: Vec<(Ipc4, u64)> = table
        .counts
        .iter()
        .filter(|(_, &c)| c > 0)
        .map(|(code, &c)| (*code, c))
        .collect();
    DomainScoreTable {
        year: table.year,
        levels: rank_to_levels(entries),
        method: ScoreMethod::FrequencyDecile,
    }
}

/// Decile scores over the ratio of AI co-occurrence to total occurrence.
/// Ratios are compared exactly as rationals, so equal ratios share a score.
pub fn ratio_scores(
    table: &CooccurrenceTable,
    all_counts: &BTreeMap<Ipc4, u64>,
) -> Result<DomainScoreTable> {
    // Equality must be ratio equality (cross-multiplied), not structural,
    // so 3/3 and 7/7 tie.
    #[derive(Clone, Copy)]
    struct Ratio {
        num: u64,
        den: u64,
    }
    impl Ord for Ratio {
        fn cmp(&self, other: &Self) -> std::cmp::Ordering {
            let lhs = u128::from(self.num) * u128::from(other.den);
            let rhs = u128::from(other.num) * u128::from(self.den);
            lhs.cmp(&rhs)
        }
    }
    impl PartialOrd for Ratio {
        fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
            Some(self.cmp(other))
        }
    }
    impl PartialEq for Ratio {
        fn eq(&self, other: &Self) -> bool {
            self.cmp(other) == std::cmp::Ordering::Equal
        }
    }
    impl Eq for Ratio {}

    let mut entries = Vec::with_capacity(table.counts.len());
    for (code, &count) in &table.counts {
        if count == 0 {
            continue;
        }
        let all = *all_counts.get(code).ok_or_else(|| {
            Error::Data(format!(
                "code {code} counted in AI patents but absent from the all-patent counts"
            ))
        })?;
        if all < count {
            return Err(Error::Data(format!(
                "code {code}: all-patent count {all} below AI co-occurrence count {count}"
            )));
        }
        entries.push((*code, Ratio { num: count, den: all }));
    }
    Ok(DomainScoreTable {
        year: table.year,
        levels: rank_to_levels(entries),
        method: ScoreMethod::RatioDecile,
    })
}

/// Per-section growth indices: index(s, t) = 100 * total(s,t) / total(s, base).
/// Sections with a zero base-year total are omitted.
pub fn section_growth_index(
    tables: &[CooccurrenceTable],
    base_year: i32,
) -> Result<BTreeMap<(char, i32), f64>> {
    let section_totals = |t: &CooccurrenceTable| -> BTreeMap<char, u64> {
        let mut totals = BTreeMap::new();
        for (code, &c) in &t.counts {
            *totals.entry(code.section()).or_insert(0) += c;
        }
        totals
    };
    let base = tables
        .iter()
        .find(|t| t.year == base_year)
        .ok_or_else(|| Error::Data(format!("base year {base_year} not among the tables")))?;
    let base_totals = section_totals(base);
    let mut index = BTreeMap::new();
    for table in tables {
        for (section, total) in section_totals(table) {
            match base_totals.get(&section) {
                Some(&b) if b > 0 => {
                    index.insert((section, table.year), 100.0 * total as f64 / b as f64);
                }
                _ => {} // undefined: zero or missing base total
            }
        }
    }
    Ok(index)
}

/// 11x11 decile transition counts over the union of both code sets; absent
/// codes score 0. Cell `[a][b]` counts codes at level `a` in `from` and
/// level `b` in `to`.
pub fn decile_transitions(from: &DomainScoreTable, to: &DomainScoreTable) -> [[u64; 11]; 11] {
    assert_eq!(from.method, to.method, "transition tables must share a method");
    let mut matrix = [[0u64; 11]; 11];
    let union: std::collections::BTreeSet<Ipc4> = from
        .levels
        .keys()
        .chain(to.levels.keys())
        .copied()
        .collect();
    for code in union {
        matrix[from.level(&code) as usize][to.level(&code) as usize] += 1;
    }
    matrix
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct NetworkNode {
    pub code: Ipc4,
    pub is_ai: bool,
    pub count: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct NetworkEdge {
    pub src: Ipc4,
    pub dst: Ipc4,
    pub weight: u64,
    pub src_is_ai: bool,
    pub dst_is_ai: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Network {
    pub nodes: Vec<NetworkNode>,
    pub edges: Vec<NetworkEdge>,
}

/// Co-occurrence network for one year: nodes are codes appearing in strictly
/// more than `min_count` AI patents; edges pair an AI code with every other
/// code sharing a patent, weighted by the number of shared AI patents.
/// Output ordering is lexicographic, hence byte-deterministic.
pub fn export_network(
    corpus: &[PatentRecord],
    year: i32,
    ai_codes: &AiCodeSet,
    min_count: u64,
) -> Network {
    let table = count_cooccurrence(corpus, year, CountScope::AllCodes, ai_codes);
    let keep: std::collections::BTreeSet<Ipc4> = table
        .counts
        .iter()
        .filter(|(_, &c)| c > min_count)
        .map(|(code, _)| *code)
        .collect();
    let nodes = keep
        .iter()
        .map(|code| NetworkNode {
            code: *code,
            is_ai: ai_codes.contains(code),
            count: table.counts[code],
        })
        .collect();

    let mut edge_counts: BTreeMap<(Ipc4, Ipc4), u64> = BTreeMap::new();
    for patent in corpus.iter().filter(|p| p.year == year && p.is_ai) {
        let codes: Vec<Ipc4> = patent.ipc4_codes.iter().copied().collect();
        for (i, &a) in codes.iter().enumerate() {
            for &b in &codes[i + 1..] {
                let a_is_ai = ai_codes.contains(&a);
                let b_is_ai = ai_codes.contains(&b);
                if !a_is_ai && !b_is_ai {
                    continue; // only edges anchored at an AI code
                }
                if !keep.contains(&a) || !keep.contains(&b) {
                    continue;
                }
                // AI endpoint first; AI-AI pairs stay lexicographic.
                let key = if a_is_ai { (a, b) } else { (b, a) };
                *edge_counts.entry(key).or_insert(0) += 1;
            }
        }
    }
    let edges = edge_counts
        .into_iter()
        .map(|((src, dst), weight)| NetworkEdge {
            src,
            dst,
            weight,
            src_is_ai: ai_codes.contains(&src),
            dst_is_ai: ai_codes.contains(&dst),
        })
        .collect();
    Network { nodes, edges }
}


#[cfg(test)]
mod prop_tests {
    use super::*;
    use proptest::prelude::*;

    fn pool_code(i: usize) -> Ipc4 {
        let section = (b'A' + (i / 26) as u8) as char;
        let subclass = (b'A' + (i % 26) as u8) as char;
        Ipc4::parse(&format!("{section}42{subclass}")).unwrap()
    }

    fn table(counts: &[u64]) -> CooccurrenceTable {
        CooccurrenceTable {
            year: 2016,
            counts: counts
                .iter()
                .enumerate()
                .map(|(i, &c)| (pool_code(i), c))
                .collect(),
            ai_patent_total: counts.iter().sum(),
        }
    }

    proptest! {
        #[test]
        fn decile_laws_hold_for_arbitrary_counts(
            counts in proptest::collection::vec(1u64..1000, 1..150),
            factor in prop_oneof![Just(2u64), Just(7), Just(1000)],
        ) {
            let base = decile_scores(&table(&counts));
            // scale invariance
            let scaled: Vec<u64> = counts.iter().map(|c| c * factor).collect();
            prop_assert_eq!(&decile_scores(&table(&scaled)).levels, &base.levels);
            // bounds, tie equality, monotonicity
            for (i, &ci) in counts.iter().enumerate() {
                let li = base.level(&pool_code(i));
                prop_assert!((1..=10).contains(&li));
                for (j, &cj) in counts.iter().enumerate().skip(i + 1) {
                    let lj = base.level(&pool_code(j));
                    match ci.cmp(&cj) {
                        std::cmp::Ordering::Equal => prop_assert_eq!(li, lj),
                        std::cmp::Ordering::Less => prop_assert!(li <= lj),
                        std::cmp::Ordering::Greater => prop_assert!(li >= lj),
                    }
                }
            }
        }
    }
}
