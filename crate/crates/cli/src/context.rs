//! Shared run state: loaded inputs, SHA-256 input hashes, and the
//! intermediate caches (estimation panel, score tables, TFP) that the
//! recipes reuse. The panel cache also persists to disk keyed by the
//! combined input hash, so reruns skip reassembly.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use aiready_core::capability::{
    capability_components, composite_capability, Lexicon, LexiconKind, LexiconSet, Standardization,
};
use aiready_core::corpus::{
    load_code_list, load_firms, load_patents, load_policies, load_texts, tag_ai, AiCodeSet,
    FirmFinancialRow, PatentFormat, PatentRecord, PolicyRecord, TextDocument,
};
use aiready_core::econ::{wooldridge_tfp, TfpInput, TfpResult};
use aiready_core::panel::{
    assemble_panel, policy_instrument, read_panel_csv, write_panel_csv, FirmYearObservation,
};
use aiready_core::readiness::{build_score_tables, readiness_panel, AiCodePolicy, ScoreTables};
use aiready_core::{Error, Result};

use crate::config::PipelineConfig;
use crate::output::atomic_write_with;

pub struct Context {
    pub config: PipelineConfig,
    pub out: PathBuf,
    pub patents: Vec<PatentRecord>,
    pub ai_codes: AiCodeSet,
    pub firms: Vec<FirmFinancialRow>,
    pub texts: Vec<TextDocument>,
    pub policies: Vec<PolicyRecord>,
    pub lexicons: LexiconSet,
    pub firm_ids: BTreeSet<String>,
    /// config key -> SHA-256 of the input file.
    pub input_hashes: BTreeMap<String, String>,
    pub warnings: Vec<String>,
    panel: Option<Vec<FirmYearObservation>>,
    tables: Option<ScoreTables>,
    tfp: Option<TfpResult>,
}

fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut hasher = Sha256::new();
    hasher.update(&bytes);
    Ok(format!("{:x}", hasher.finalize()))
}

impl Context {
    pub fn load(config: PipelineConfig, out: &Path) -> Result<Self> {
        let mut input_hashes = BTreeMap::new();
        for (key, path) in config.inputs() {
            input_hashes.insert(key.to_string(), sha256_file(path)?);
        }
        let mut warnings = Vec::new();

        let loaded = load_patents(&config.patents, PatentFormat::Jsonl, Some(config.years))?;
        if loaded.report.n_errors() > 0 {
            warnings.push(format!("patents: {} rejected rows", loaded.report.n_errors()));
        }
        let ai_codes = load_code_list(&config.ai_codes)?;
        let (patents, n_ai) = tag_ai(loaded.records, &ai_codes);
        if n_ai == 0 {
            return Err(Error::Data("corpus contains no AI patents".into()));
        }
        let firms = load_firms(&config.firms)?;
        if firms.report.n_errors() > 0 {
            warnings.push(format!("firms: {} rejected rows", firms.report.n_errors()));
        }
        let texts = load_texts(&config.texts)?;
        if texts.report.n_errors() > 0 {
            warnings.push(format!("texts: {} rejected rows", texts.report.n_errors()));
        }
        let policies = load_policies(&config.policies)?;
        if policies.report.n_errors() > 0 {
            warnings.push(format!("policies: {} rejected rows", policies.report.n_errors()));
        }
        let lexicons = LexiconSet {
            strategy: Lexicon::load(LexiconKind::Strategy, &config.lexicon_strategy)?,
            talent: Lexicon::load(LexiconKind::Talent, &config.lexicon_talent)?,
            asset_fixed: Lexicon::load(LexiconKind::AssetFixed, &config.lexicon_asset_fixed)?,
            asset_intangible: Lexicon::load(
                LexiconKind::AssetIntangible,
                &config.lexicon_asset_intangible,
            )?,
        };
        let firm_ids: BTreeSet<String> = firms.records.iter().map(|r| r.firm_id.clone()).collect();

        Ok(Context {
            config,
            out: out.to_path_buf(),
            patents,
            ai_codes,
            firms: firms.records,
            texts: texts.records,
            policies: policies.records,
            lexicons,
            firm_ids,
            input_hashes,
            warnings,
            panel: None,
            tables: None,
            tfp: None,
        })
    }

    /// Combined hash over all inputs; keys every shared cache.
    pub fn input_hash(&self) -> String {
        let mut hasher = Sha256::new();
        for (key, hash) in &self.input_hashes {
            hasher.update(key.as_bytes());
            hasher.update(hash.as_bytes());
        }
        format!("{:x}", hasher.finalize())[..16].to_string()
    }

    /// Wooldridge TFP over the production columns of the firm file.
    pub fn tfp(&mut self) -> Result<&TfpResult> {
        if self.tfp.is_none() {
            let inputs: Vec<TfpInput> = self
                .firms
                .iter()
                .filter_map(|r| {
                    Some(TfpInput {
                        firm_id: r.firm_id.clone(),
                        year: r.year,
                        ln_output: r.ln_output?,
                        ln_labor: r.ln_labor?,
                        ln_capital: r.ln_capital?,
                        ln_materials: r.ln_materials?,
                    })
                })
                .collect();
            if inputs.is_empty() {
                return Err(Error::Data(
                    "firm file has no complete production (ln_*) rows".into(),
                ));
            }
            self.tfp = Some(wooldridge_tfp(&inputs)?);
        }
        Ok(self.tfp.as_ref().expect("just set"))
    }

    /// Per-year and pooled decile score tables.
    pub fn score_tables(&mut self) -> &ScoreTables {
        if self.tables.is_none() {
            self.tables = Some(build_score_tables(
                &self.patents,
                self.config.years,
                &self.ai_codes,
            ));
        }
        self.tables.as_ref().expect("just set")
    }

    /// The assembled estimation panel, cached in memory and on disk under
    /// `cache/panel-{input_hash}.csv`.
    pub fn panel(&mut self) -> Result<Vec<FirmYearObservation>> {
        if let Some(panel) = &self.panel {
            return Ok(panel.clone());
        }
        let cache_dir = self.out.join("cache");
        let cache = cache_dir.join(format!("panel-{}.csv", self.input_hash()));
        if cache.is_file() {
            let panel = read_panel_csv(&cache)?;
            self.panel = Some(panel.clone());
            return Ok(panel);
        }
        let tfp_map: BTreeMap<(String, i32), f64> = match self.tfp() {
            Ok(res) => res
                .tfp
                .iter()
                .map(|(f, y, v)| ((f.clone(), *y), *v))
                .collect(),
            Err(e) => {
                self.warnings.push(format!("tfp column skipped: {e}"));
                BTreeMap::new()
            }
        };
        let readiness = readiness_panel(
            &self.patents,
            &self.firm_ids,
            self.config.years,
            &self.ai_codes,
            AiCodePolicy::ScoreOne,
        );
        let mut cap = capability_components(&self.texts, &self.lexicons, self.config.years)?;
        let cap_warnings = composite_capability(&mut cap, Standardization::Panel)?;
        self.warnings.extend(cap_warnings);
        let (mut panel, report) = assemble_panel(&readiness, &cap, &self.firms, &tfp_map)?;
        if report.missing_readiness > 0 {
            self.warnings
                .push(format!("panel: {} rows without readiness", report.missing_readiness));
        }
        policy_instrument(&self.policies, &mut panel);

        fs::create_dir_all(&cache_dir).map_err(|source| Error::Io {
            path: cache_dir.display().to_string(),
            source,
        })?;
        atomic_write_with(&cache, |tmp| write_panel_csv(tmp, &panel))?;
        self.panel = Some(panel.clone());
        Ok(panel)
    }
}
