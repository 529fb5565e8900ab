//! Firm AI-capability components from text and asset inputs: strategy
//! (log keyword frequency in disclosures), talent (share of AI job
//! postings), asset (log matched asset value), and their standardized sum.

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use aho_corasick::{AhoCorasick, MatchKind};
use serde::Serialize;

use crate::corpus::{normalize_text, TextDocument, TextKind};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LexiconKind {
    Strategy,
    Talent,
    AssetFixed,
    AssetIntangible,
}

/// A normalized keyword set with a leftmost-longest matcher. Nested terms
/// ("learning" inside "machine learning") never double count: the scan
/// consumes the longest term at each position.
#[derive(Debug, Clone)]
pub struct Lexicon {
    pub kind: LexiconKind,
    pub terms: BTreeSet<String>,
    matcher: AhoCorasick,
}

impl Lexicon {
    pub fn new(kind: LexiconKind, raw_terms: impl IntoIterator<Item = String>) -> Result<Self> {
        let terms: BTreeSet<String> = raw_terms
            .into_iter()
            .map(|t| normalize_text(&t))
            .filter(|t| !t.is_empty())
            .collect();
        if terms.is_empty() {
            return Err(Error::Config(format!("lexicon {kind:?} has no terms")));
        }
        let matcher = AhoCorasick::builder()
            .match_kind(MatchKind::LeftmostLongest)
            .build(&terms)
            .map_err(|e| Error::Config(format!("lexicon {kind:?} build failed: {e}")))?;
        Ok(Lexicon { kind, terms, matcher })
    }

    /// Loads a lexicon file: one term per line, `#` comments allowed.
    pub fn load(kind: LexiconKind, path: &Path) -> Result<Self> {
        let content = fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })?;
        let terms = content
            .lines()
            .map(|l| l.split('#').next().unwrap_or("").trim().to_string())
            .filter(|l| !l.is_empty());
        Lexicon::new(kind, terms)
    }

    /// Number of non-overlapping matches, scanning left to right and
    /// preferring the longest term at each position.
    pub fn count_matches(&self, text: &str) -> u64 {
        self.matcher.find_iter(text).count() as u64
    }

    /// Whether the text contains at least one term.
    pub fn matches(&self, text: &str) -> bool {
        self.matcher.find(text).is_some()
    }
}

/// ln(1 + total keyword count) over a firm-year's disclosure documents;
/// 0.0 when there are no documents or no matches.
pub fn ai_strategy<'a, I>(mdna_docs: I, lexicon: &Lexicon) -> f64
where
    I: IntoIterator<Item = &'a TextDocument>,
{
    let count: u64 = mdna_docs
        .into_iter()
        .map(|d| lexicon.count_matches(&d.text))
        .sum();
    (1.0 + count as f64).ln()
}

/// Share of postings whose title or description matches any term; `None`
/// when the firm-year has no postings at all.
pub fn ai_talent<'a, I>(postings: I, lexicon: &Lexicon) -> Option<f64>
where
    I: IntoIterator<Item = &'a TextDocument>,
{
    let mut total = 0u64;
    let mut matched = 0u64;
    for posting in postings {
        total += 1;
        let hit = lexicon.matches(&posting.text)
            || posting.title.as_deref().is_some_and(|t| lexicon.matches(t));
        if hit {
            matched += 1;
        }
    }
    if total == 0 {
        None
    } else {
        Some(matched as f64 / total as f64)
    }
}

/// ln(1 + summed value of asset lines matching either asset lexicon).
pub fn ai_asset<'a, I>(
    asset_lines: I,
    fixed: &Lexicon,
    intangible: &Lexicon,
) -> Result<f64>
where
    I: IntoIterator<Item = &'a TextDocument>,
{
    let mut total = 0.0;
    for line in asset_lines {
        let value = line.value.ok_or_else(|| {
            Error::Data(format!("asset line for firm {} lacks a value", line.firm_id))
        })?;
        if value < 0.0 {
            return Err(Error::Data(format!(
                "negative asset value {value} for firm {}",
                line.firm_id
            )));
        }
        if fixed.matches(&line.text) || intangible.matches(&line.text) {
            total += value;
        }
    }
    Ok((1.0 + total).ln())
}

/// One firm-year capability row. `ai_capability` is filled by
/// [`composite_capability`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CapabilityRow {
    pub firm_id: String,
    pub year: i32,
    pub ai_strategy: Option<f64>,
    pub ai_talent: Option<f64>,
    pub ai_asset: Option<f64>,
    pub ai_capability: Option<f64>,
}

/// All four lexicons the capability computation needs.
#[derive(Debug, Clone)]
pub struct LexiconSet {
    pub strategy: Lexicon,
    pub talent: Lexicon,
    pub asset_fixed: Lexicon,
    pub asset_intangible: Lexicon,
}

/// Computes the three components for every (firm, year) present in the
/// text corpus, over the configured year range.
pub fn capability_components(
    texts: &[TextDocument],
    lexicons: &LexiconSet,
    years: (i32, i32),
) -> Result<Vec<CapabilityRow>> {
    use std::collections::BTreeMap;
    let mut by_key: BTreeMap<(&str, i32), Vec<&TextDocument>> = BTreeMap::new();
    for doc in texts {
        if doc.year >= years.0 && doc.year <= years.1 {
            by_key.entry((&doc.firm_id, doc.year)).or_default().push(doc);
        }
    }
    let mut rows = Vec::with_capacity(by_key.len());
    for ((firm_id, year), docs) in by_key {
        let mdna: Vec<&TextDocument> = docs.iter().filter(|d| d.kind == TextKind::Mdna).copied().collect();
        let postings: Vec<&TextDocument> =
            docs.iter().filter(|d| d.kind == TextKind::JobPosting).copied().collect();
        let assets: Vec<&TextDocument> =
            docs.iter().filter(|d| d.kind == TextKind::AssetLine).copied().collect();
        rows.push(CapabilityRow {
            firm_id: firm_id.to_string(),
            year,
            ai_strategy: Some(ai_strategy(mdna.iter().copied(), &lexicons.strategy)),
            ai_talent: ai_talent(postings.iter().copied(), &lexicons.talent),
            ai_asset: Some(ai_asset(
                assets.iter().copied(),
                &lexicons.asset_fixed,
                &lexicons.asset_intangible,
            )?),
            ai_capability: None,
        });
    }
    Ok(rows)
}

/// Standardization scope for the composite.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Standardization {
    /// z-scores over the entire panel (default).
    #[default]
    Panel,
    /// z-scores within each year.
    PerYear,
}

/// Panel-standardizes each component and fills `ai_capability` as the sum of
/// the three z-scores. A zero-spread component contributes 0 for every row
/// (reported via the returned flag list). Rows missing any component keep
/// `ai_capability = None`.
pub fn composite_capability(
    rows: &mut [CapabilityRow],
    standardization: Standardization,
) -> Result<Vec<String>> {
    let complete = rows
        .iter()
        .filter(|r| r.ai_strategy.is_some() && r.ai_talent.is_some() && r.ai_asset.is_some())
        .count();
    if complete < 2 {
        return Err(Error::Data(format!(
            "composite needs at least 2 complete observations, found {complete}"
        )));
    }
    let mut flags = Vec::new();
    let groups: Vec<Option<i32>> = match standardization {
        Standardization::Panel => vec![None],
        Standardization::PerYear => {
            let mut years: Vec<i32> = rows.iter().map(|r| r.year).collect();
            years.sort_unstable();
            years.dedup();
            years.into_iter().map(Some).collect()
        }
    };

    let component_names = ["ai_strategy", "ai_talent", "ai_asset"];
    for group in groups {
        let in_group = |r: &CapabilityRow| group.is_none_or(|y| r.year == y);
        // per-component moments over non-missing values
        let mut z_params = [None; 3];
        for (c, name) in component_names.iter().enumerate() {
            let values: Vec<f64> = rows
                .iter()
                .filter(|r| in_group(r))
                .filter_map(|r| component(r, c))
                .collect();
            if values.is_empty() {
                continue;
            }
            let n = values.len() as f64;
            let mean = values.iter().sum::<f64>() / n;
            let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
            let sd = var.sqrt();
            if sd == 0.0 {
                flags.push(format!("component {name} has zero spread; its z-scores are 0"));
            }
            z_params[c] = Some((mean, sd));
        }
        for row in rows.iter_mut().filter(|r| in_group(r)) {
            let mut sum = 0.0;
            let mut all_present = true;
            for c in 0..3 {
                match (component(row, c), z_params[c]) {
                    (Some(x), Some((mean, sd))) => {
                        sum += if sd > 0.0 { (x - mean) / sd } else { 0.0 };
                    }
                    _ => {
                        all_present = false;
                        break;
                    }
                }
            }
            row.ai_capability = all_present.then_some(sum);
        }
    }
    Ok(flags)
}

fn component(row: &CapabilityRow, idx: usize) -> Option<f64> {
    match idx {
        0 => row.ai_strategy,
        1 => row.ai_talent,
        _ => row.ai_asset,
    }
}
