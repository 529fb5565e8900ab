//! The study recipes behind each output table, registered as trait
//! objects so `run` can dispatch on recipe names without knowing any
//! concrete type. Every recipe consumes the shared [`Context`] caches and
//! returns its artifacts (JSON result, text table, plot CSVs).

use std::collections::{BTreeMap, BTreeSet};

use serde_json::{json, Value};

use aiready_core::cooccur::{
    count_all_codes, count_cooccurrence, decile_transitions, export_network, ratio_scores,
    section_growth_index, CooccurrenceTable, CountScope,
};
use aiready_core::econ::{
    augment_interaction_instruments, build_interaction, diffusion_poisson, fe_ols, ppml_fe,
    trend_poisson, tsls, ClusterBy, Dataset, DiffusionSource, FixedEffects, ModelSpec,
    RegressionResult, TrendVariant,
};
use aiready_core::panel::{
    filter_zero_ai, lead, split_adopters, summarize, AdopterClass, FirmYearObservation,
};
use aiready_core::readiness::{firm_portfolio, firm_readiness, AiCodePolicy};
use aiready_core::{Error, Result};

use crate::context::Context;

/// What one recipe run produces.
pub struct Artifacts {
    pub json: Value,
    pub table: String,
    /// (file name, CSV content) pairs.
    pub plots: Vec<(String, String)>,
    pub warnings: Vec<String>,
}

pub trait Recipe {
    fn name(&self) -> &'static str;
    fn title(&self) -> &'static str;
    fn run(&self, ctx: &mut Context) -> Result<Artifacts>;
}

/// All recipes in battery order.
pub fn registry() -> Vec<Box<dyn Recipe>> {
    vec![
        Box::new(Summary),
        Box::new(Demand { firm_fe: false }),
        Box::new(Demand { firm_fe: true }),
        Box::new(Performance),
        Box::new(PerformanceDecomposed),
        Box::new(Iv),
        Box::new(IvExclusivity),
        Box::new(Innovation),
        Box::new(Adopters),
        Box::new(RobustRatio),
        Box::new(RobustNoAiFilers),
        Box::new(GrowthBio),
        Box::new(Diffusion),
        Box::new(Tfp),
    ]
}

pub fn find(name: &str) -> Option<Box<dyn Recipe>> {
    registry().into_iter().find(|r| r.name() == name)
}

const CONTROLS: [&str; 3] = ["log_total_assets", "leverage", "tobin_q"];
const VARIANTS: [(&str, &str); 3] = [
    ("baseline", "readiness_baseline"),
    ("external", "readiness_external"),
    ("internal", "readiness_internal"),
];

/// Panel dataset with led outcomes and all three capability × readiness
/// interactions.
fn estimation_dataset(panel: &[FirmYearObservation]) -> Result<Dataset> {
    let mut data = Dataset::from_panel(panel);
    data.add_column("lead_rpe", lead(panel, |r| r.revenue_per_employee, 1));
    data.add_column("lead_trademarks", lead(panel, |r| r.trademarks, 1));
    data.add_column("lead_tfp", lead(panel, |r| r.tfp, 1));
    for (_, col) in VARIANTS {
        build_interaction(&mut data, "ai_capability", col)?;
    }
    Ok(data)
}

fn with_controls<'a>(head: &[&'a str]) -> Vec<&'a str> {
    head.iter().chain(CONTROLS.iter()).copied().collect()
}

/// One performance column: lead outcome on capability, one readiness
/// variant, their interaction, and the controls, with two-way FE.
fn performance_column(data: &Dataset, outcome: &str, readiness: &str) -> Result<RegressionResult> {
    let interaction = format!("ai_capability_x_{readiness}");
    let regs = with_controls(&["ai_capability", readiness, &interaction]);
    fe_ols(
        &ModelSpec::linear(outcome, &regs)
            .with_fe(FixedEffects::TWO_WAY)
            .with_cluster(ClusterBy::Firm),
        data,
    )
}

/// Copies the selected rows of a dataset (subsample recipes).
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

fn columns_artifacts(
    title: &str,
    columns: Vec<(&str, RegressionResult)>,
) -> Artifacts {
    let mut json = BTreeMap::new();
    let mut table = String::new();
    let mut warnings = Vec::new();
    for (name, res) in columns {
        warnings.extend(res.warnings.iter().cloned());
        table.push_str(&res.to_table(&format!("{title} — {name}")));
        table.push('\n');
        json.insert(
            name.to_string(),
            serde_json::to_value(&res).expect("result serializes"),
        );
    }
    Artifacts {
        json: json!({ "columns": json }),
        table,
        plots: Vec::new(),
        warnings,
    }
}

struct Summary;

impl Recipe for Summary {
    fn name(&self) -> &'static str {
        "summary"
    }
    fn title(&self) -> &'static str {
        "Summary statistics"
    }
    fn run(&self, ctx: &mut Context) -> Result<Artifacts> {
        let panel = ctx.panel()?;
        type Var = fn(&FirmYearObservation) -> Option<f64>;
        let vars: [(&str, Var); 13] = [
            ("readiness_baseline", |r| r.readiness_baseline),
            ("readiness_external", |r| r.readiness_external),
            ("readiness_internal", |r| r.readiness_internal),
            ("ai_strategy", |r| r.ai_strategy),
            ("ai_talent", |r| r.ai_talent),
            ("ai_asset", |r| r.ai_asset),
            ("ai_capability", |r| r.ai_capability),
            ("revenue_per_employee", |r| r.revenue_per_employee),
            ("tfp", |r| r.tfp),
            ("trademarks", |r| r.trademarks),
            ("log_total_assets", |r| r.log_total_assets),
            ("leverage", |r| r.leverage),
            ("tobin_q", |r| r.tobin_q),
        ];
        let (rows, warnings) = summarize(&panel, &vars);
        let mut table = format!("{}\n", self.title());
        table.push_str(&format!(
            "{:<22} {:>10} {:>10} {:>10} {:>10} {:>8}\n",
            "Variable", "Mean", "SD", "P1", "P99", "N"
        ));
        for row in &rows {
            table.push_str(&format!(
                "{:<22} {:>10.3} {:>10.3} {:>10.3} {:>10.3} {:>8}\n",
                row.variable, row.mean, row.sd, row.p1, row.p99, row.n
            ));
        }

        // readiness-by-industry plot: a firm's industry is the modal IPC
        // section of its patents
        let mut firm_section: BTreeMap<&str, BTreeMap<char, u64>> = BTreeMap::new();
        for p in &ctx.patents {
            let by_section = firm_section.entry(&p.applicant_id).or_default();
            for code in &p.ipc4_codes {
                *by_section.entry(code.section()).or_insert(0) += 1;
            }
        }
        let modal: BTreeMap<&str, char> = firm_section
            .iter()
            .filter_map(|(firm, sections)| {
                sections
                    .iter()
                    .max_by_key(|(s, c)| (**c, std::cmp::Reverse(**s)))
                    .map(|(s, _)| (*firm, *s))
            })
            .collect();
        let mut by_industry: BTreeMap<char, (f64, usize)> = BTreeMap::new();
        for row in &panel {
            if let (Some(section), Some(v)) =
                (modal.get(row.firm_id.as_str()), row.readiness_baseline)
            {
                let entry = by_industry.entry(*section).or_insert((0.0, 0));
                entry.0 += v;
                entry.1 += 1;
            }
        }
        let mut industry_csv = String::from("industry,mean_readiness,n\n");
        for (section, (sum, n)) in &by_industry {
            industry_csv.push_str(&format!("{section},{},{n}\n", sum / *n as f64));
        }

        let network = export_network(&ctx.patents, ctx.config.years.1, &ctx.ai_codes, 1);
        let mut network_csv = String::from("src,dst,weight,src_is_ai,dst_is_ai\n");
        for e in &network.edges {
            network_csv.push_str(&format!(
                "{},{},{},{},{}\n",
                e.src, e.dst, e.weight, e.src_is_ai, e.dst_is_ai
            ));
        }

        Ok(Artifacts {
            json: json!({
                "statistics": serde_json::to_value(&rows).expect("rows serialize"),
                "n_firms": ctx.firm_ids.len(),
                "n_patents": ctx.patents.len(),
            }),
            table,
            plots: vec![
                ("readiness_by_industry.csv".into(), industry_csv),
                ("network_edges.csv".into(), network_csv),
            ],
            warnings,
        })
    }
}

/// Demand test: AI capability on each readiness variant.
struct Demand {
    firm_fe: bool,
}

impl Recipe for Demand {
    fn name(&self) -> &'static str {
        if self.firm_fe {
            "demand_firm_fe"
        } else {
            "demand"
        }
    }
    fn title(&self) -> &'static str {
        if self.firm_fe {
            "Demand test (firm and year FE)"
        } else {
            "Demand test"
        }
    }
    fn run(&self, ctx: &mut Context) -> Result<Artifacts> {
        let panel = ctx.panel()?;
        let data = estimation_dataset(&panel)?;
        let fe = if self.firm_fe {
            FixedEffects::TWO_WAY
        } else {
            FixedEffects::YEAR
        };
        let mut columns = Vec::new();
        for (name, col) in VARIANTS {
            let regs = with_controls(&[col]);
            let res = fe_ols(
                &ModelSpec::linear("ai_capability", &regs)
                    .with_fe(fe)
                    .with_cluster(ClusterBy::Firm),
                &data,
            )?;
            columns.push((name, res));
        }
        Ok(columns_artifacts(self.title(), columns))
    }
}

/// Performance test: led productivity on capability × readiness, one
/// column per readiness variant.
struct Performance;

impl Recipe for Performance {
    fn name(&self) -> &'static str {
        "performance"
    }
    fn title(&self) -> &'static str {
        "Performance test"
    }
    fn run(&self, ctx: &mut Context) -> Result<Artifacts> {
        let panel = ctx.panel()?;
        let data = estimation_dataset(&panel)?;
        let mut columns = Vec::new();
        for (name, col) in VARIANTS {
            columns.push((name, performance_column(&data, "lead_rpe", col)?));
        }
        Ok(columns_artifacts(self.title(), columns))
    }
}

/// Both decomposition variants in a single specification.
struct PerformanceDecomposed;

impl Recipe for PerformanceDecomposed {
    fn name(&self) -> &'static str {
        "performance_decomposed"
    }
    fn title(&self) -> &'static str {
        "Performance test, decomposed readiness"
    }
    fn run(&self, ctx: &mut Context) -> Result<Artifacts> {
        let panel = ctx.panel()?;
        let data = estimation_dataset(&panel)?;
        let regs = with_controls(&[
            "ai_capability",
            "readiness_external",
            "readiness_internal",
            "ai_capability_x_readiness_external",
            "ai_capability_x_readiness_internal",
        ]);
        let res = fe_ols(
            &ModelSpec::linear("lead_rpe", &regs)
                .with_fe(FixedEffects::TWO_WAY)
                .with_cluster(ClusterBy::Firm),
            &data,
        )?;
        Ok(columns_artifacts(self.title(), vec![("decomposed", res)]))
    }
}

/// 2SLS with the lagged policy count instrumenting capability and its
/// readiness interaction; reports the explicit first stage alongside.
struct Iv;

impl Recipe for Iv {
    fn name(&self) -> &'static str {
        "iv"
    }
    fn title(&self) -> &'static str {
        "Instrumental variables"
    }
    fn run(&self, ctx: &mut Context) -> Result<Artifacts> {
        let panel = ctx.panel()?;
        let mut data = estimation_dataset(&panel)?;
        let regs = with_controls(&[
            "ai_capability",
            "readiness_external",
            "ai_capability_x_readiness_external",
        ]);
        let mut spec = ModelSpec::linear("lead_rpe", &regs)
            .with_fe(FixedEffects::TWO_WAY)
            .with_cluster(ClusterBy::Firm)
            .with_iv(
                &["ai_capability", "ai_capability_x_readiness_external"],
                &["lagged_policy"],
            );
        augment_interaction_instruments(&mut spec, &mut data)?;
        let second = tsls(&spec, &data)?;
        let fs_regs = with_controls(&["lagged_policy", "readiness_external"]);
        let first = fe_ols(
            &ModelSpec::linear("ai_capability", &fs_regs)
                .with_fe(FixedEffects::TWO_WAY)
                .with_cluster(ClusterBy::Firm),
            &data,
        )?;
        Ok(columns_artifacts(
            self.title(),
            vec![("first_stage", first), ("second_stage", second)],
        ))
    }
}

/// Exclusivity check: among firm-years with no AI signal at all, the
/// instrument (interacted with readiness) should not move the outcome.
struct IvExclusivity;

impl Recipe for IvExclusivity {
    fn name(&self) -> &'static str {
        "iv_exclusivity"
    }
    fn title(&self) -> &'static str {
        "Instrument exclusivity (zero-AI subsample)"
    }
    fn run(&self, ctx: &mut Context) -> Result<Artifacts> {
        let panel = ctx.panel()?;
        let mut data = estimation_dataset(&panel)?;
        build_interaction(&mut data, "lagged_policy", "readiness_external")?;
        let zero: BTreeSet<(String, i32)> = filter_zero_ai(&panel, false)
            .into_iter()
            .map(|r| (r.firm_id, r.year))
            .collect();
        if zero.is_empty() {
            return Err(Error::Data("zero-AI subsample is empty".into()));
        }
        let rows: Vec<usize> = (0..data.len())
            .filter(|&i| zero.contains(&(data.entity[i].clone(), data.year[i])))
            .collect();
        let sub = select_rows(&data, &rows);
        let regs = with_controls(&["lagged_policy_x_readiness_external"]);
        let res = fe_ols(
            &ModelSpec::linear("lead_rpe", &regs)
                .with_fe(FixedEffects::TWO_WAY)
                .with_cluster(ClusterBy::Firm),
            &sub,
        )?;
        Ok(columns_artifacts(self.title(), vec![("zero_ai", res)]))
    }
}

/// Trademark counts via PPML, one column per readiness variant.
struct Innovation;

impl Recipe for Innovation {
    fn name(&self) -> &'static str {
        "innovation"
    }
    fn title(&self) -> &'static str {
        "Product innovation (trademarks)"
    }
    fn run(&self, ctx: &mut Context) -> Result<Artifacts> {
        let panel = ctx.panel()?;
        let data = estimation_dataset(&panel)?;
        let mut columns = Vec::new();
        for (name, col) in VARIANTS {
            let interaction = format!("ai_capability_x_{col}");
            let regs = with_controls(&["ai_capability", col, &interaction]);
            let res = ppml_fe(
                &ModelSpec::poisson("lead_trademarks", &regs)
                    .with_fe(FixedEffects::TWO_WAY)
                    .with_cluster(ClusterBy::Firm),
                &data,
            )?;
            columns.push((name, res));
        }
        Ok(columns_artifacts(self.title(), columns))
    }
}

/// Early vs late adopters, classified from AI-talent postings.
struct Adopters;

impl Recipe for Adopters {
    fn name(&self) -> &'static str {
        "adopters"
    }
    fn title(&self) -> &'static str {
        "Early vs late adopters"
    }
    fn run(&self, ctx: &mut Context) -> Result<Artifacts> {
        let mut panel = ctx.panel()?;
        let texts = ctx.texts.clone();
        split_adopters(&mut panel, &texts, &ctx.lexicons.talent);
        let mut columns = Vec::new();
        for (name, class) in [("early", AdopterClass::Early), ("late", AdopterClass::Late)] {
            let sub: Vec<FirmYearObservation> = panel
                .iter()
                .filter(|r| r.adopter_class == class)
                .cloned()
                .collect();
            if sub.is_empty() {
                return Err(Error::Data(format!("{name}-adopter subsample is empty")));
            }
            let data = estimation_dataset(&sub)?;
            columns.push((name, performance_column(&data, "lead_rpe", "readiness_baseline")?));
        }
        Ok(columns_artifacts(self.title(), columns))
    }
}

/// Performance test with the ratio-based readiness measure.
struct RobustRatio;

impl Recipe for RobustRatio {
    fn name(&self) -> &'static str {
        "robust_ratio"
    }
    fn title(&self) -> &'static str {
        "Robustness: ratio readiness"
    }
    fn run(&self, ctx: &mut Context) -> Result<Artifacts> {
        let mut panel = ctx.panel()?;
        let (y0, y1) = ctx.config.years;
        let mut tables = BTreeMap::new();
        for year in y0..=y1 {
            let table = count_cooccurrence(&ctx.patents, year, CountScope::NonAiOnly, &ctx.ai_codes);
            let all = count_all_codes(&ctx.patents, year);
            tables.insert(year, ratio_scores(&table, &all)?);
        }
        let mut by_firm_year: BTreeMap<(&str, i32), Vec<&_>> = BTreeMap::new();
        for p in &ctx.patents {
            by_firm_year
                .entry((p.applicant_id.as_str(), p.year))
                .or_default()
                .push(p);
        }
        for row in panel.iter_mut() {
            row.readiness_baseline = by_firm_year
                .get(&(row.firm_id.as_str(), row.year))
                .and_then(|ps| firm_portfolio(&row.firm_id, ps.iter().copied()))
                .and_then(|portfolio| {
                    firm_readiness(
                        &portfolio,
                        &tables[&row.year],
                        &ctx.ai_codes,
                        AiCodePolicy::ScoreOne,
                    )
                });
        }
        let data = estimation_dataset(&panel)?;
        let res = performance_column(&data, "lead_rpe", "readiness_baseline")?;
        Ok(columns_artifacts(self.title(), vec![("ratio", res)]))
    }
}

/// Performance test excluding every firm that ever filed an AI patent.
struct RobustNoAiFilers;

impl Recipe for RobustNoAiFilers {
    fn name(&self) -> &'static str {
        "robust_no_ai_filers"
    }
    fn title(&self) -> &'static str {
        "Robustness: AI-patent filers excluded"
    }
    fn run(&self, ctx: &mut Context) -> Result<Artifacts> {
        let panel = ctx.panel()?;
        let filers: BTreeSet<&str> = ctx
            .patents
            .iter()
            .filter(|p| p.is_ai)
            .map(|p| p.applicant_id.as_str())
            .collect();
        let sub: Vec<FirmYearObservation> = panel
            .iter()
            .filter(|r| !filers.contains(r.firm_id.as_str()))
            .cloned()
            .collect();
        if sub.is_empty() {
            return Err(Error::Data("every firm filed an AI patent".into()));
        }
        let data = estimation_dataset(&sub)?;
        let res = performance_column(&data, "lead_rpe", "readiness_baseline")?;
        Ok(columns_artifacts(self.title(), vec![("no_ai_filers", res)]))
    }
}

/// Bio-differential growth of section-G AI co-occurrence counts.
struct GrowthBio;

impl Recipe for GrowthBio {
    fn name(&self) -> &'static str {
        "growth_bio"
    }
    fn title(&self) -> &'static str {
        "Bio-IPC4 growth"
    }
    fn run(&self, ctx: &mut Context) -> Result<Artifacts> {
        let (y0, _) = ctx.config.years;
        let tables = ctx.score_tables();
        let mut counts: Vec<(String, i32, u64)> = Vec::new();
        for (year, table) in &tables.yearly_counts {
            for (code, &n) in &table.counts {
                if code.section() == 'G' {
                    counts.push((code.to_string(), *year, n));
                }
            }
        }
        let bio: BTreeSet<String> = ["G16B", "G16H"].iter().map(|s| s.to_string()).collect();
        let dummy = trend_poisson(&counts, &bio, TrendVariant::TrendDummy)?;
        let two_way = trend_poisson(&counts, &bio, TrendVariant::TwoWayFe)?;

        let yearly: Vec<CooccurrenceTable> = tables.yearly_counts.values().cloned().collect();
        let index = section_growth_index(&yearly, y0)?;
        let mut growth_csv = String::from("section,year,index\n");
        for ((section, year), value) in &index {
            growth_csv.push_str(&format!("{section},{year},{value}\n"));
        }
        let first = tables.yearly.values().next().expect("years validated");
        let last = tables.yearly.values().next_back().expect("years validated");
        let matrix = decile_transitions(first, last);
        let mut transitions_csv = String::from("from_level,to_level,count\n");
        for (from, row) in matrix.iter().enumerate() {
            for (to, n) in row.iter().enumerate() {
                transitions_csv.push_str(&format!("{from},{to},{n}\n"));
            }
        }

        let mut artifacts = columns_artifacts(
            self.title(),
            vec![("trend_dummy", dummy), ("two_way_fe", two_way)],
        );
        artifacts.plots = vec![
            ("growth_index.csv".into(), growth_csv),
            ("decile_transitions.csv".into(), transitions_csv),
        ];
        Ok(artifacts)
    }
}

/// Applicant-type diffusion: enterprise counts on lagged research counts,
/// with the individual-count placebo.
struct Diffusion;

impl Recipe for Diffusion {
    fn name(&self) -> &'static str {
        "diffusion"
    }
    fn title(&self) -> &'static str {
        "Applicant-type diffusion"
    }
    fn run(&self, ctx: &mut Context) -> Result<Artifacts> {
        let mut counts: BTreeMap<(String, i32, aiready_core::corpus::ApplicantType), u64> =
            BTreeMap::new();
        for p in ctx.patents.iter().filter(|p| p.is_ai) {
            for code in &p.ipc4_codes {
                if !ctx.ai_codes.contains(code) {
                    *counts
                        .entry((code.to_string(), p.year, p.applicant_type))
                        .or_insert(0) += 1;
                }
            }
        }
        let counts: Vec<_> = counts
            .into_iter()
            .map(|((code, year, at), n)| (code, year, at, n))
            .collect();
        let research = diffusion_poisson(&counts, DiffusionSource::Research)?;
        let placebo = diffusion_poisson(&counts, DiffusionSource::Individual)?;
        Ok(columns_artifacts(
            self.title(),
            vec![("research", research), ("individual_placebo", placebo)],
        ))
    }
}

/// Production-function elasticities plus the performance test on TFP.
struct Tfp;

impl Recipe for Tfp {
    fn name(&self) -> &'static str {
        "tfp"
    }
    fn title(&self) -> &'static str {
        "Total factor productivity"
    }
    fn run(&self, ctx: &mut Context) -> Result<Artifacts> {
        let panel = ctx.panel()?;
        let gmm = ctx.tfp()?.clone();
        let data = estimation_dataset(&panel)?;
        let res = performance_column(&data, "lead_tfp", "readiness_baseline")?;
        let mut artifacts = columns_artifacts(self.title(), vec![("performance_tfp", res)]);
        artifacts.warnings.extend(gmm.warnings.iter().cloned());
        let mut table = format!(
            "Elasticities (GMM)\nbeta_l {:.4} ({:.4})\nbeta_k {:.4} ({:.4})\nObservations {}  Firms {}  Dropped firms {}\n\n",
            gmm.beta_l, gmm.se_l, gmm.beta_k, gmm.se_k, gmm.n_obs, gmm.n_firms, gmm.dropped_firms
        );
        table.push_str(&artifacts.table);
        artifacts.table = table;
        artifacts.json = json!({
            "elasticities": {
                "beta_l": gmm.beta_l,
                "beta_k": gmm.beta_k,
                "se_l": gmm.se_l,
                "se_k": gmm.se_k,
                "n_obs": gmm.n_obs,
                "n_firms": gmm.n_firms,
                "dropped_firms": gmm.dropped_firms,
            },
            "columns": artifacts.json["columns"],
        });
        Ok(artifacts)
    }
}
