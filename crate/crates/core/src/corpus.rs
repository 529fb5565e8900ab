//! Ingestion and validation of patent records, firm financial panels,
//! disclosure texts, and policy registries.
//!
//! Every loader returns the well-formed records together with an
//! [`IngestReport`] listing each rejected row and its source line; rows are
//! never silently dropped.

use std::collections::BTreeSet;
use std::collections::HashSet;
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A four-character International Patent Classification prefix:
/// section letter A–H, two digits, subclass letter.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Ipc4([u8; 4]);

impl Ipc4 {
    /// Parses an IPC symbol, uppercasing and truncating to the first four
    /// characters. Fails when the prefix does not match the IPC4 pattern.
    pub fn parse(raw: &str) -> std::result::Result<Self, String> {
        let s = raw.trim();
        if s.len() < 4 {
            return Err(format!("IPC code {raw:?} shorter than 4 characters"));
        }
        let bytes: Vec<u8> = s.bytes().take(4).map(|b| b.to_ascii_uppercase()).collect();
        let ok = matches!(bytes[0], b'A'..=b'H')
            && bytes[1].is_ascii_digit()
            && bytes[2].is_ascii_digit()
            && bytes[3].is_ascii_uppercase();
        if !ok {
            return Err(format!("IPC code {raw:?} does not match the IPC4 pattern"));
        }
        Ok(Ipc4([bytes[0], bytes[1], bytes[2], bytes[3]]))
    }

    pub fn as_str(&self) -> &str {
        std::str::from_utf8(&self.0).expect("ipc4 bytes are ascii")
    }

    /// Section letter, A–H.
    pub fn section(&self) -> char {
        self.0[0] as char
    }
}

impl fmt::Display for Ipc4 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl fmt::Debug for Ipc4 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Ipc4({})", self.as_str())
    }
}

impl FromStr for Ipc4 {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Ipc4::parse(s)
    }
}

impl Serialize for Ipc4 {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for Ipc4 {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Ipc4::parse(&s).map_err(serde::de::Error::custom)
    }
}

/// The configured set of AI-designated IPC4 codes.
pub type AiCodeSet = BTreeSet<Ipc4>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ApplicantType {
    Individual,
    Enterprise,
    Research,
    Government,
}

impl ApplicantType {
    pub const ALL: [ApplicantType; 4] = [
        ApplicantType::Individual,
        ApplicantType::Enterprise,
        ApplicantType::Research,
        ApplicantType::Government,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            ApplicantType::Individual => "individual",
            ApplicantType::Enterprise => "enterprise",
            ApplicantType::Research => "research",
            ApplicantType::Government => "government",
        }
    }
}

impl FromStr for ApplicantType {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "individual" => Ok(ApplicantType::Individual),
            "enterprise" => Ok(ApplicantType::Enterprise),
            "research" => Ok(ApplicantType::Research),
            "government" => Ok(ApplicantType::Government),
            other => Err(format!("unknown applicant type {other:?}")),
        }
    }
}

/// One patent application. Duplicate IPC4 codes within a patent collapse to
/// a set; co-occurrence is defined on distinct classes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatentRecord {
    pub patent_id: String,
    pub year: i32,
    pub applicant_id: String,
    pub applicant_type: ApplicantType,
    pub ipc4_codes: BTreeSet<Ipc4>,
    pub is_ai: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FirmFinancialRow {
    pub firm_id: String,
    pub year: i32,
    pub revenue: Option<f64>,
    pub employees: Option<f64>,
    pub total_assets: Option<f64>,
    pub leverage: Option<f64>,
    pub tobin_q: Option<f64>,
    pub trademarks: Option<f64>,
    pub province: Option<String>,
    pub ln_output: Option<f64>,
    pub ln_labor: Option<f64>,
    pub ln_capital: Option<f64>,
    pub ln_materials: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TextKind {
    Mdna,
    JobPosting,
    AssetLine,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TextDocument {
    pub firm_id: String,
    pub year: i32,
    pub kind: TextKind,
    /// Case-folded, whitespace-collapsed body text.
    pub text: String,
    /// Currency value; present iff `kind == AssetLine`.
    pub value: Option<f64>,
    /// Posting title; present only for job postings.
    pub title: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PolicyRecord {
    pub province: String,
    pub effective_year: i32,
    pub policy_id: String,
}

/// Case-folds and collapses whitespace. Applied to every text field at
/// ingestion so keyword matching can assume normalized input.
pub fn normalize_text(raw: &str) -> String {
    let mut out = String::with_capacity(raw.len());
    let mut pending_space = false;
    for ch in raw.chars() {
        if ch.is_whitespace() {
            pending_space = !out.is_empty();
        } else {
            if pending_space {
                out.push(' ');
                pending_space = false;
            }
            for lc in ch.to_lowercase() {
                out.push(lc);
            }
        }
    }
    out
}

/// One rejected or suspicious source row.
#[derive(Debug, Clone, Serialize)]
pub struct IngestIssue {
    pub line: usize,
    pub message: String,
    pub fatal: bool,
}

/// Per-file validation report. `errors()` holds rows that were dropped,
/// `warnings()` rows that were kept with a caveat (e.g. duplicate ids).
#[derive(Debug, Clone, Default, Serialize)]
pub struct IngestReport {
    pub issues: Vec<IngestIssue>,
}

impl IngestReport {
    fn error(&mut self, line: usize, message: impl Into<String>) {
        self.issues.push(IngestIssue {
            line,
            message: message.into(),
            fatal: true,
        });
    }

    fn warn(&mut self, line: usize, message: impl Into<String>) {
        self.issues.push(IngestIssue {
            line,
            message: message.into(),
            fatal: false,
        });
    }

    pub fn errors(&self) -> impl Iterator<Item = &IngestIssue> {
        self.issues.iter().filter(|i| i.fatal)
    }

    pub fn warnings(&self) -> impl Iterator<Item = &IngestIssue> {
        self.issues.iter().filter(|i| !i.fatal)
    }

    pub fn n_errors(&self) -> usize {
        self.errors().count()
    }
}

#[derive(Debug, Clone)]
pub struct Loaded<T> {
    pub records: Vec<T>,
    pub report: IngestReport,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PatentFormat {
    Jsonl,
    Csv,
}

fn read_to_string(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })
}

#[derive(Deserialize)]
struct RawPatent {
    id: String,
    year: i32,
    applicant_id: String,
    applicant_type: String,
    ipc4: Vec<String>,
}

fn validate_patent(
    raw: RawPatent,
    year_range: Option<(i32, i32)>,
) -> std::result::Result<PatentRecord, String> {
    if raw.ipc4.is_empty() {
        return Err(format!("patent {:?} has zero IPC4 codes", raw.id));
    }
    if let Some((lo, hi)) = year_range {
        if raw.year < lo || raw.year > hi {
            return Err(format!(
                "patent {:?} year {} outside configured range {lo}..={hi}",
                raw.id, raw.year
            ));
        }
    }
    let applicant_type: ApplicantType = raw.applicant_type.parse()?;
    let mut codes = BTreeSet::new();
    for code in &raw.ipc4 {
        codes.insert(Ipc4::parse(code)?);
    }
    Ok(PatentRecord {
        patent_id: raw.id,
        year: raw.year,
        applicant_id: raw.applicant_id,
        applicant_type,
        ipc4_codes: codes,
        is_ai: false,
    })
}

/// Loads patent records from JSONL or CSV (`;`-joined ipc4 column).
///
/// Malformed rows go to the report with their 1-based source line; duplicate
/// patent ids are kept-first with a warning. `is_ai` is left false pending
/// [`tag_ai`].
pub fn load_patents(
    path: &Path,
    format: PatentFormat,
    year_range: Option<(i32, i32)>,
) -> Result<Loaded<PatentRecord>> {
    let content = read_to_string(path)?;
    let mut report = IngestReport::default();
    let mut records = Vec::new();
    let mut seen_ids: HashSet<String> = HashSet::new();

    let mut push = |raw: RawPatent, line: usize, report: &mut IngestReport, records: &mut Vec<PatentRecord>| {
        match validate_patent(raw, year_range) {
            Ok(rec) => {
                if seen_ids.contains(&rec.patent_id) {
                    report.warn(
                        line,
                        format!("duplicate patent_id {:?}; keeping first", rec.patent_id),
                    );
                } else {
                    seen_ids.insert(rec.patent_id.clone());
                    records.push(rec);
                }
            }
            Err(msg) => report.error(line, msg),
        }
    };

    match format {
        PatentFormat::Jsonl => {
            for (idx, line) in content.lines().enumerate() {
                let lineno = idx + 1;
                if line.trim().is_empty() {
                    continue;
                }
                match serde_json::from_str::<RawPatent>(line) {
                    Ok(raw) => push(raw, lineno, &mut report, &mut records),
                    Err(e) => report.error(lineno, format!("invalid JSON row: {e}")),
                }
            }
        }
        PatentFormat::Csv => {
            let mut rdr = csv::ReaderBuilder::new()
                .flexible(true)
                .from_reader(content.as_bytes());
            #[derive(Deserialize)]
            struct CsvPatent {
                id: String,
                year: i32,
                applicant_id: String,
                applicant_type: String,
                ipc4: String,
            }
            for (idx, row) in rdr.deserialize::<CsvPatent>().enumerate() {
                let lineno = idx + 2; // header is line 1
                match row {
                    Ok(r) => {
                        let ipc4 = r
                            .ipc4
                            .split(';')
                            .map(str::trim)
                            .filter(|s| !s.is_empty())
                            .map(String::from)
                            .collect();
                        let raw = RawPatent {
                            id: r.id,
                            year: r.year,
                            applicant_id: r.applicant_id,
                            applicant_type: r.applicant_type,
                            ipc4,
                        };
                        push(raw, lineno, &mut report, &mut records);
                    }
                    Err(e) => report.error(lineno, format!("invalid CSV row: {e}")),
                }
            }
        }
    }
    Ok(Loaded { records, report })
}

/// Sets `is_ai` on every record and returns the tagged sequence together
/// with the AI patent count. A patent is AI iff its code set intersects
/// `ai_codes`.
pub fn tag_ai(mut records: Vec<PatentRecord>, ai_codes: &AiCodeSet) -> (Vec<PatentRecord>, usize) {
    let mut n_ai = 0;
    for rec in &mut records {
        rec.is_ai = rec.ipc4_codes.iter().any(|c| ai_codes.contains(c));
        if rec.is_ai {
            n_ai += 1;
        }
    }
    (records, n_ai)
}

/// Loads the AI IPC4 code list: one code per line, `#` comments allowed.
pub fn load_code_list(path: &Path) -> Result<AiCodeSet> {
    let content = read_to_string(path)?;
    let mut set = AiCodeSet::new();
    for (idx, line) in content.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let code = Ipc4::parse(line).map_err(|msg| Error::Parse {
            path: path.display().to_string(),
            line: idx + 1,
            message: msg,
        })?;
        set.insert(code);
    }
    if set.is_empty() {
        return Err(Error::Config(format!(
            "AI code list {} is empty",
            path.display()
        )));
    }
    Ok(set)
}

fn parse_opt_f64(field: &str) -> std::result::Result<Option<f64>, String> {
    let t = field.trim();
    if t.is_empty() {
        return Ok(None);
    }
    t.parse::<f64>()
        .map(Some)
        .map_err(|e| format!("bad numeric field {field:?}: {e}"))
}

/// Loads the firm financial panel from CSV with a header row matching the
/// `FirmFinancialRow` field names. `(firm_id, year)` duplicates are
/// kept-first with an error entry.
pub fn load_firms(path: &Path) -> Result<Loaded<FirmFinancialRow>> {
    let content = read_to_string(path)?;
    let mut rdr = csv::Reader::from_reader(content.as_bytes());
    let headers = rdr
        .headers()
        .map_err(|e| Error::Parse {
            path: path.display().to_string(),
            line: 1,
            message: e.to_string(),
        })?
        .clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let required = ["firm_id", "year"];
    for name in required {
        if col(name).is_none() {
            return Err(Error::Parse {
                path: path.display().to_string(),
                line: 1,
                message: format!("missing required column {name:?}"),
            });
        }
    }
    let idx_firm = col("firm_id").unwrap();
    let idx_year = col("year").unwrap();
    let numeric = [
        "revenue",
        "employees",
        "total_assets",
        "leverage",
        "tobin_q",
        "trademarks",
        "ln_output",
        "ln_labor",
        "ln_capital",
        "ln_materials",
    ];
    let idx_num: Vec<Option<usize>> = numeric.iter().map(|n| col(n)).collect();
    let idx_province = col("province");

    let mut report = IngestReport::default();
    let mut records = Vec::new();
    let mut seen: HashSet<(String, i32)> = HashSet::new();
    for (idx, row) in rdr.records().enumerate() {
        let lineno = idx + 2;
        let row = match row {
            Ok(r) => r,
            Err(e) => {
                report.error(lineno, format!("invalid CSV row: {e}"));
                continue;
            }
        };
        let firm_id = row.get(idx_firm).unwrap_or("").trim().to_string();
        let year: i32 = match row.get(idx_year).unwrap_or("").trim().parse() {
            Ok(y) => y,
            Err(e) => {
                report.error(lineno, format!("bad year: {e}"));
                continue;
            }
        };
        if firm_id.is_empty() {
            report.error(lineno, "empty firm_id");
            continue;
        }
        let mut nums = [None; 10];
        let mut bad = None;
        for (slot, maybe_idx) in idx_num.iter().enumerate() {
            if let Some(i) = maybe_idx {
                match parse_opt_f64(row.get(*i).unwrap_or("")) {
                    Ok(v) => nums[slot] = v,
                    Err(msg) => {
                        bad = Some(format!("column {:?}: {msg}", numeric[slot]));
                        break;
                    }
                }
            }
        }
        if let Some(msg) = bad {
            report.error(lineno, msg);
            continue;
        }
        if let Some(t) = nums[5] {
            if t < 0.0 {
                report.error(lineno, format!("negative trademark count {t}"));
                continue;
            }
        }
        if !seen.insert((firm_id.clone(), year)) {
            report.error(lineno, format!("duplicate (firm_id, year) = ({firm_id}, {year}); keeping first"));
            continue;
        }
        let province = idx_province
            .and_then(|i| row.get(i))
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(String::from);
        records.push(FirmFinancialRow {
            firm_id,
            year,
            revenue: nums[0],
            employees: nums[1],
            total_assets: nums[2],
            leverage: nums[3],
            tobin_q: nums[4],
            trademarks: nums[5],
            province,
            ln_output: nums[6],
            ln_labor: nums[7],
            ln_capital: nums[8],
            ln_materials: nums[9],
        });
    }
    Ok(Loaded { records, report })
}

#[derive(Deserialize)]
struct RawText {
    firm_id: String,
    year: i32,
    kind: TextKind,
    text: String,
    #[serde(default)]
    value: Option<f64>,
    #[serde(default)]
    title: Option<String>,
}

/// Loads disclosure texts, job postings, and asset lines from JSONL.
pub fn load_texts(path: &Path) -> Result<Loaded<TextDocument>> {
    let content = read_to_string(path)?;
    let mut report = IngestReport::default();
    let mut records = Vec::new();
    for (idx, line) in content.lines().enumerate() {
        let lineno = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawText = match serde_json::from_str(line) {
            Ok(r) => r,
            Err(e) => {
                report.error(lineno, format!("invalid JSON row: {e}"));
                continue;
            }
        };
        let text = normalize_text(&raw.text);
        if text.is_empty() {
            report.error(lineno, "text empty after normalization");
            continue;
        }
        match (raw.kind, raw.value) {
            (TextKind::AssetLine, None) => {
                report.error(lineno, "asset_line row missing value");
                continue;
            }
            (TextKind::AssetLine, Some(v)) if v < 0.0 => {
                report.error(lineno, format!("negative asset value {v}"));
                continue;
            }
            (TextKind::Mdna | TextKind::JobPosting, Some(_)) => {
                report.error(lineno, "value present on non-asset row");
                continue;
            }
            _ => {}
        }
        records.push(TextDocument {
            firm_id: raw.firm_id,
            year: raw.year,
            kind: raw.kind,
            text,
            value: raw.value,
            title: raw.title.map(|t| normalize_text(&t)),
        });
    }
    Ok(Loaded { records, report })
}

/// Loads the policy registry from CSV (province, effective_year, policy_id).
/// `(province, policy_id)` duplicates are kept-first with an error entry.
pub fn load_policies(path: &Path) -> Result<Loaded<PolicyRecord>> {
    let content = read_to_string(path)?;
    let mut rdr = csv::Reader::from_reader(content.as_bytes());
    let mut report = IngestReport::default();
    let mut records = Vec::new();
    let mut seen: HashSet<(String, String)> = HashSet::new();
    #[derive(Deserialize)]
    struct RawPolicy {
        province: String,
        effective_year: i32,
        policy_id: String,
    }
    for (idx, row) in rdr.deserialize::<RawPolicy>().enumerate() {
        let lineno = idx + 2;
        match row {
            Ok(r) => {
                if !seen.insert((r.province.clone(), r.policy_id.clone())) {
                    report.error(
                        lineno,
                        format!("duplicate (province, policy_id) = ({}, {})", r.province, r.policy_id),
                    );
                    continue;
                }
                records.push(PolicyRecord {
                    province: r.province,
                    effective_year: r.effective_year,
                    policy_id: r.policy_id,
                });
            }
            Err(e) => report.error(lineno, format!("invalid CSV row: {e}")),
        }
    }
    Ok(Loaded { records, report })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_temp(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    #[test]
    fn ipc4_parse_and_normalize() {
        let code = Ipc4::parse("g06n").unwrap();
        assert_eq!(code.as_str(), "G06N");
        assert_eq!(code.section(), 'G');
        // Full symbols truncate to the IPC4 prefix.
        assert_eq!(Ipc4::parse("A61K 31/00").unwrap().as_str(), "A61K");
        assert!(Ipc4::parse("Z06N").is_err());
        assert!(Ipc4::parse("G0N6").is_err());
        assert!(Ipc4::parse("G06").is_err());
    }

    #[test]
    fn load_patents_single_row() {
        let f = write_temp(
            r#"{"id":"P1","year":2016,"applicant_id":"A","applicant_type":"enterprise","ipc4":["G01B"]}"#,
        );
        let loaded = load_patents(f.path(), PatentFormat::Jsonl, None).unwrap();
        assert_eq!(loaded.records.len(), 1);
        let rec = &loaded.records[0];
        assert_eq!(rec.patent_id, "P1");
        assert_eq!(rec.year, 2016);
        assert!(!rec.is_ai);
        assert_eq!(rec.ipc4_codes.iter().next().unwrap().as_str(), "G01B");
        assert_eq!(loaded.report.n_errors(), 0);
    }

    #[test]
    fn load_patents_lowercase_codes_normalized() {
        let f = write_temp(
            r#"{"id":"P1","year":2016,"applicant_id":"A","applicant_type":"enterprise","ipc4":["g06n"]}"#,
        );
        let loaded = load_patents(f.path(), PatentFormat::Jsonl, None).unwrap();
        assert_eq!(
            loaded.records[0].ipc4_codes.iter().next().unwrap().as_str(),
            "G06N"
        );
    }

    #[test]
    fn load_patents_zero_code_row_reported() {
        let f = write_temp(concat!(
            r#"{"id":"P1","year":2016,"applicant_id":"A","applicant_type":"enterprise","ipc4":["G01B"]}"#,
            "\n",
            r#"{"id":"P2","year":2016,"applicant_id":"A","applicant_type":"enterprise","ipc4":[]}"#,
            "\n",
            r#"{"id":"P3","year":2016,"applicant_id":"B","applicant_type":"research","ipc4":["A61B"]}"#,
        ));
        let loaded = load_patents(f.path(), PatentFormat::Jsonl, None).unwrap();
        assert_eq!(loaded.records.len(), 2);
        assert_eq!(loaded.report.n_errors(), 1);
        let issue = loaded.report.errors().next().unwrap();
        assert_eq!(issue.line, 2);
    }

    #[test]
    fn load_patents_duplicate_id_keeps_first() {
        let f = write_temp(concat!(
            r#"{"id":"P1","year":2016,"applicant_id":"A","applicant_type":"enterprise","ipc4":["G01B"]}"#,
            "\n",
            r#"{"id":"P1","year":2017,"applicant_id":"A","applicant_type":"enterprise","ipc4":["A61B"]}"#,
        ));
        let loaded = load_patents(f.path(), PatentFormat::Jsonl, None).unwrap();
        assert_eq!(loaded.records.len(), 1);
        assert_eq!(loaded.records[0].year, 2016);
        assert_eq!(loaded.report.warnings().count(), 1);
    }

    #[test]
    fn load_patents_csv_semicolon_codes() {
        let f = write_temp("id,year,applicant_id,applicant_type,ipc4\nP1,2016,A,enterprise,G06N;A61B\n");
        let loaded = load_patents(f.path(), PatentFormat::Csv, None).unwrap();
        assert_eq!(loaded.records.len(), 1);
        assert_eq!(loaded.records[0].ipc4_codes.len(), 2);
    }

    #[test]
    fn load_patents_year_range_enforced() {
        let f = write_temp(
            r#"{"id":"P1","year":1999,"applicant_id":"A","applicant_type":"enterprise","ipc4":["G01B"]}"#,
        );
        let loaded = load_patents(f.path(), PatentFormat::Jsonl, Some((2016, 2022))).unwrap();
        assert!(loaded.records.is_empty());
        assert_eq!(loaded.report.n_errors(), 1);
    }

    #[test]
    fn loading_is_idempotent() {
        let body = concat!(
            r#"{"id":"P1","year":2016,"applicant_id":"A","applicant_type":"enterprise","ipc4":["G01B","A61B"]}"#,
            "\n",
            r#"{"id":"P2","year":2017,"applicant_id":"B","applicant_type":"individual","ipc4":["G06N"]}"#,
        );
        let f = write_temp(body);
        let a = load_patents(f.path(), PatentFormat::Jsonl, None).unwrap();
        let b = load_patents(f.path(), PatentFormat::Jsonl, None).unwrap();
        assert_eq!(a.records, b.records);
    }

    fn mk_patent(id: &str, codes: &[&str]) -> PatentRecord {
        PatentRecord {
            patent_id: id.to_string(),
            year: 2016,
            applicant_id: "A".to_string(),
            applicant_type: ApplicantType::Enterprise,
            ipc4_codes: codes.iter().map(|c| Ipc4::parse(c).unwrap()).collect(),
            is_ai: false,
        }
    }

    #[test]
    fn tag_ai_intersection() {
        let ai: AiCodeSet = [Ipc4::parse("G06N").unwrap()].into_iter().collect();
        let (tagged, n) = tag_ai(
            vec![mk_patent("P1", &["G06N", "A61B"]), mk_patent("P2", &["A61B"])],
            &ai,
        );
        assert!(tagged[0].is_ai);
        assert!(!tagged[1].is_ai);
        assert_eq!(n, 1);
    }

    #[test]
    fn tag_ai_counts_over_fixture() {
        let ai: AiCodeSet = [Ipc4::parse("G06N").unwrap()].into_iter().collect();
        let patents = vec![
            mk_patent("P1", &["G06N"]),
            mk_patent("P2", &["A61B"]),
            mk_patent("P3", &["G06N", "C07D"]),
            mk_patent("P4", &["B23Q"]),
            mk_patent("P5", &["H01L"]),
        ];
        // brute-force recount
        let expected = patents
            .iter()
            .filter(|p| p.ipc4_codes.iter().any(|c| ai.contains(c)))
            .count();
        let (_, n) = tag_ai(patents, &ai);
        assert_eq!(n, expected);
        assert_eq!(n, 2);
    }

    #[test]
    fn tag_ai_commutes_with_concatenation() {
        let ai: AiCodeSet = [Ipc4::parse("G06N").unwrap()].into_iter().collect();
        let a = vec![mk_patent("P1", &["G06N"]), mk_patent("P2", &["A61B"])];
        let b = vec![mk_patent("P3", &["G06N", "B23Q"])];
        let mut joined = a.clone();
        joined.extend(b.clone());
        let (tagged_joined, _) = tag_ai(joined, &ai);
        let (mut tagged_a, _) = tag_ai(a, &ai);
        let (tagged_b, _) = tag_ai(b, &ai);
        tagged_a.extend(tagged_b);
        assert_eq!(tagged_joined, tagged_a);
    }

    #[test]
    fn normalize_text_folds_case_and_whitespace() {
        assert_eq!(normalize_text("  Deep\tLearning\n and AI "), "deep learning and ai");
        assert_eq!(normalize_text("   "), "");
    }

    #[test]
    fn load_texts_validates_values() {
        let f = write_temp(concat!(
            r#"{"firm_id":"F1","year":2016,"kind":"mdna","text":"Machine Learning"}"#,
            "\n",
            r#"{"firm_id":"F1","year":2016,"kind":"asset_line","text":"ai server"}"#,
            "\n",
            r#"{"firm_id":"F1","year":2016,"kind":"asset_line","text":"ai server","value":10.0}"#,
        ));
        let loaded = load_texts(f.path()).unwrap();
        assert_eq!(loaded.records.len(), 2);
        assert_eq!(loaded.report.n_errors(), 1);
        assert_eq!(loaded.records[0].text, "machine learning");
    }

    #[test]
    fn load_code_list_with_comments() {
        let f = write_temp("# AI codes\nG06N\ng06f # lowercase ok\n\nG16B\n");
        let set = load_code_list(f.path()).unwrap();
        assert_eq!(set.len(), 3);
        assert!(set.contains(&Ipc4::parse("G06F").unwrap()));
    }

    #[test]
    fn load_policies_duplicates_rejected() {
        let f = write_temp("province,effective_year,policy_id\nGD,2016,POL1\nGD,2017,POL1\n");
        let loaded = load_policies(f.path()).unwrap();
        assert_eq!(loaded.records.len(), 1);
        assert_eq!(loaded.report.n_errors(), 1);
    }

    #[test]
    fn load_firms_missing_fields_and_duplicates() {
        let f = write_temp(
            "firm_id,year,revenue,employees,total_assets,leverage,tobin_q,trademarks,province\n\
             F1,2016,1000,10,5000,0.4,1.5,3,GD\n\
             F1,2016,2000,20,6000,0.5,1.6,4,GD\n\
             F2,2016,,,,,,,\n",
        );
        let loaded = load_firms(f.path()).unwrap();
        assert_eq!(loaded.records.len(), 2);
        assert_eq!(loaded.report.n_errors(), 1);
        assert!(loaded.records[1].revenue.is_none());
        assert!(loaded.records[1].province.is_none());
    }
}
