//! Synthetic corpus generation from a planted data-generating process:
//! schema-compatible patents, firm financials, text stubs, and policy
//! registries whose known coefficients serve as the ground-truth oracle
//! for the Monte Carlo recovery studies in [`mc`].

pub mod mc;
pub mod oracle;

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Normal, Poisson};
use serde::Serialize;

use crate::capability::{
    capability_components, composite_capability, Lexicon, LexiconKind, LexiconSet, Standardization,
};
use crate::corpus::{
    normalize_text, tag_ai, AiCodeSet, ApplicantType, FirmFinancialRow, Ipc4, PatentRecord,
    PolicyRecord, TextDocument, TextKind,
};
use crate::econ::TfpInput;
use crate::error::{Error, Result};
use crate::panel::{assemble_panel, policy_instrument, FirmYearObservation};
use crate::readiness::{readiness_panel, AiCodePolicy};

/// Every planted parameter of the data-generating process.
#[derive(Debug, Clone, Serialize)]
pub struct SyntheticTruth {
    /// Outcome intercept.
    pub beta0: f64,
    /// β₁: AI capability main effect on the t+1 outcome.
    pub beta_capability: f64,
    /// β₂: readiness main effect.
    pub beta_readiness: f64,
    /// β₃: capability × readiness interaction (0 for null studies).
    pub beta_interaction: f64,
    pub firm_fe_sd: f64,
    /// Linear year effect per year since the window start.
    pub year_effect: f64,
    /// First-stage loading of the lagged policy count on the capability
    /// driver.
    pub policy_strength: f64,
    /// Loading of the latent shock shared between the capability driver
    /// and the outcome error; 0 makes capability exogenous.
    pub endogeneity: f64,
    pub noise_sd: f64,
    /// Poisson trademark log-rate: intercept, capability, readiness,
    /// interaction.
    pub theta_trademarks: [f64; 4],
    pub beta_l: f64,
    pub beta_k: f64,
    /// Productivity AR(1) coefficient.
    pub rho: f64,
    /// Market applicant-type shares: enterprise, research, individual,
    /// government. Must sum to 1.
    pub applicant_shares: [f64; 4],
    /// Differential yearly log-growth of biology-domain AI counts.
    pub bio_growth: f64,
}

impl Default for SyntheticTruth {
    fn default() -> Self {
        SyntheticTruth {
            beta0: 1.0,
            beta_capability: 0.08,
            beta_readiness: 0.6,
            beta_interaction: 0.25,
            firm_fe_sd: 0.4,
            year_effect: 0.03,
            policy_strength: 0.8,
            endogeneity: 0.0,
            noise_sd: 0.25,
            theta_trademarks: [0.5, 0.25, 0.4, 0.2],
            beta_l: 0.6,
            beta_k: 0.3,
            rho: 0.7,
            applicant_shares: [0.70, 0.22, 0.07, 0.01],
            bio_growth: 0.15,
        }
    }
}

/// Generator configuration; (seed, stream) fully determine the output.
#[derive(Debug, Clone)]
pub struct SyntheticConfig {
    pub n_firms: usize,
    pub years: (i32, i32),
    pub n_provinces: usize,
    pub seed: u64,
    /// ChaCha stream id; Monte Carlo replications use distinct streams.
    pub stream: u64,
    /// Poisson mean of patents per firm-year.
    pub patents_per_firm: f64,
    /// Market AI patents per year (these drive the decile tables).
    pub market_patents_per_year: usize,
    /// Number of non-AI IPC4 codes in the universe.
    pub universe_size: usize,
    /// Only the first `hot_codes` universe codes appear in market AI
    /// patents; the cold remainder scores 0, giving readiness its lower
    /// tail.
    pub hot_codes: usize,
    pub ai_codes: Vec<String>,
    /// Replicate the window-start market draw across all years, so yearly
    /// score tables (and hence readiness_external) are constant.
    pub freeze_external: bool,
    /// Replicate each firm's window-start patent draw across all years, so
    /// yearly portfolios (and hence readiness_internal) are constant.
    pub freeze_internal: bool,
    /// Firm-years whose exogenous capability driver falls below this
    /// threshold emit no AI text signal at all (the zero-AI subsample).
    pub zero_ai_threshold: f64,
    pub truth: SyntheticTruth,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            n_firms: 500,
            years: (2016, 2022),
            n_provinces: 10,
            seed: 42,
            stream: 0,
            patents_per_firm: 3.0,
            market_patents_per_year: 400,
            universe_size: 110,
            hot_codes: 80,
            ai_codes: vec!["G06N".into(), "G06T".into(), "G10L".into()],
            freeze_external: false,
            freeze_internal: false,
            zero_ai_threshold: 0.35,
            truth: SyntheticTruth::default(),
        }
    }
}

/// A generated corpus bundle, schema-compatible with the ingestion module.
#[derive(Debug, Clone)]
pub struct SyntheticData {
    pub config: SyntheticConfig,
    pub patents: Vec<PatentRecord>,
    pub ai_codes: AiCodeSet,
    pub firms: Vec<FirmFinancialRow>,
    pub texts: Vec<TextDocument>,
    pub policies: Vec<PolicyRecord>,
    pub firm_ids: BTreeSet<String>,
    pub truth: SyntheticTruth,
}

pub const STRATEGY_TERMS: &[&str] = &[
    "machine learning",
    "deep learning",
    "artificial intelligence",
    "neural network",
];
pub const TALENT_TERMS: &[&str] = &[
    "machine learning",
    "algorithm engineer",
    "deep learning",
    "computer vision",
];
pub const ASSET_FIXED_TERMS: &[&str] = &["gpu server", "computing cluster"];
pub const ASSET_INTANGIBLE_TERMS: &[&str] = &["machine learning platform", "ai software"];

/// The lexicons the generated text stubs are written against.
pub fn default_lexicons() -> LexiconSet {
    let mk = |kind, terms: &[&str]| {
        Lexicon::new(kind, terms.iter().map(|s| s.to_string())).expect("builtin lexicon valid")
    };
    LexiconSet {
        strategy: mk(LexiconKind::Strategy, STRATEGY_TERMS),
        talent: mk(LexiconKind::Talent, TALENT_TERMS),
        asset_fixed: mk(LexiconKind::AssetFixed, ASSET_FIXED_TERMS),
        asset_intangible: mk(LexiconKind::AssetIntangible, ASSET_INTANGIBLE_TERMS),
    }
}

/// Deterministic non-AI IPC4 universe: classes 10.. within each section,
/// so the codes never collide with the AI set (whose classes are below 10).
fn universe_codes(n: usize) -> Result<Vec<Ipc4>> {
    const SECTIONS: &[u8] = b"ABCDEFGH";
    if n > SECTIONS.len() * 90 {
        return Err(Error::Config(format!("universe size {n} exceeds the code space")));
    }
    (0..n)
        .map(|i| {
            let section = SECTIONS[i % SECTIONS.len()] as char;
            let class = 10 + i / SECTIONS.len();
            let subclass = (b'A' + ((i / SECTIONS.len()) % 26) as u8) as char;
            Ipc4::parse(&format!("{section}{class:02}{subclass}")).map_err(Error::Config)
        })
        .collect()
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Weighted sampling without replacement of `k` indices (k <= weights.len()).
fn weighted_distinct(rng: &mut ChaCha20Rng, weights: &[f64], k: usize) -> Vec<usize> {
    let mut picked: Vec<usize> = Vec::with_capacity(k);
    let mut w: Vec<f64> = weights.to_vec();
    for _ in 0..k.min(weights.len()) {
        let total: f64 = w.iter().sum();
        if total <= 0.0 {
            break;
        }
        let mut u = rng.gen::<f64>() * total;
        let mut chosen = w.len() - 1;
        for (i, &wi) in w.iter().enumerate() {
            if u < wi {
                chosen = i;
                break;
            }
            u -= wi;
        }
        picked.push(chosen);
        w[chosen] = 0.0;
    }
    picked
}

fn sample_type(rng: &mut ChaCha20Rng, shares: &[f64; 4]) -> ApplicantType {
    let order = [
        ApplicantType::Enterprise,
        ApplicantType::Research,
        ApplicantType::Individual,
        ApplicantType::Government,
    ];
    let mut u = rng.gen::<f64>();
    for (share, t) in shares.iter().zip(order) {
        if u < *share {
            return t;
        }
        u -= share;
    }
    ApplicantType::Government
}

fn validate(config: &SyntheticConfig) -> Result<()> {
    let t = &config.truth;
    if config.n_firms < 2 {
        return Err(Error::Config("synthetic corpus needs at least 2 firms".into()));
    }
    if config.years.0 >= config.years.1 {
        return Err(Error::Config(format!(
            "year range ({}, {}) is not increasing",
            config.years.0, config.years.1
        )));
    }
    if config.n_provinces < 2 {
        return Err(Error::Config("policy instrument needs at least 2 provinces".into()));
    }
    if config.ai_codes.is_empty() || config.market_patents_per_year == 0 {
        return Err(Error::Config("configuration would yield an empty AI corpus".into()));
    }
    if config.hot_codes < 8 || config.hot_codes > config.universe_size {
        return Err(Error::Config(format!(
            "hot_codes {} must lie in 8..=universe_size {}",
            config.hot_codes, config.universe_size
        )));
    }
    if !(config.patents_per_firm > 0.0) {
        return Err(Error::Config("patents_per_firm must be positive".into()));
    }
    let fields = [
        t.beta0,
        t.beta_capability,
        t.beta_readiness,
        t.beta_interaction,
        t.firm_fe_sd,
        t.year_effect,
        t.policy_strength,
        t.endogeneity,
        t.noise_sd,
        t.beta_l,
        t.beta_k,
        t.rho,
        t.bio_growth,
    ];
    if fields.iter().chain(&t.theta_trademarks).chain(&t.applicant_shares).any(|v| !v.is_finite())
    {
        return Err(Error::Config("non-finite planted parameter".into()));
    }
    let share_sum: f64 = t.applicant_shares.iter().sum();
    if (share_sum - 1.0).abs() > 1e-9 || t.applicant_shares.iter().any(|s| *s < 0.0) {
        return Err(Error::Config(format!("applicant shares sum to {share_sum}, not 1")));
    }
    Ok(())
}

/// Draws the full corpus bundle from the planted DGP. Outcomes at t+1 are
/// built from the *realized* pipeline capability and readiness at t, so
/// the planted coefficients are recoverable by the estimators exactly as
/// specified.
pub fn generate(config: &SyntheticConfig) -> Result<SyntheticData> {
    validate(config)?;
    let truth = config.truth.clone();
    let (y0, y1) = config.years;
    let mut rng = ChaCha20Rng::seed_from_u64(config.seed);
    rng.set_stream(config.stream);
    let normal = Normal::new(0.0, 1.0).expect("unit normal");

    let universe = universe_codes(config.universe_size)?;
    let mut ai_set = AiCodeSet::new();
    for raw in &config.ai_codes {
        let code = Ipc4::parse(raw).map_err(Error::Config)?;
        if universe.contains(&code) {
            return Err(Error::Config(format!("AI code {code} collides with the universe")));
        }
        ai_set.insert(code);
    }
    let ai_list: Vec<Ipc4> = ai_set.iter().copied().collect();

    // market AI patents: year-drifting code intensities over the hot codes
    // plus the two bio codes, whose intensity grows at the planted
    // differential rate (the growth_bio study target)
    let hot = config.hot_codes;
    let bio_codes = [
        Ipc4::parse("G16B").map_err(Error::Config)?,
        Ipc4::parse("G16H").map_err(Error::Config)?,
    ];
    let base: Vec<f64> = (0..hot).map(|_| normal.sample(&mut rng)).collect();
    let drift: Vec<f64> = (0..hot).map(|_| 0.25 * normal.sample(&mut rng)).collect();
    let mut patents: Vec<PatentRecord> = Vec::new();
    let mut market_blueprint: Vec<(ApplicantType, BTreeSet<Ipc4>)> = Vec::new();
    for year in y0..=y1 {
        let rows: Vec<(ApplicantType, BTreeSet<Ipc4>)> = if config.freeze_external && year > y0 {
            market_blueprint.clone()
        } else {
            let t = (year - y0) as f64;
            let mut w: Vec<f64> = (0..hot).map(|i| (base[i] + drift[i] * t).exp()).collect();
            w.extend(bio_codes.iter().map(|_| (truth.bio_growth * t).exp()));
            (0..config.market_patents_per_year)
                .map(|_| {
                    let at = sample_type(&mut rng, &truth.applicant_shares);
                    let mut codes = BTreeSet::new();
                    codes.insert(ai_list[rng.gen_range(0..ai_list.len())]);
                    let extra = 1 + rng.gen_range(0..3);
                    for idx in weighted_distinct(&mut rng, &w, extra) {
                        codes.insert(if idx < hot { universe[idx] } else { bio_codes[idx - hot] });
                    }
                    (at, codes)
                })
                .collect()
        };
        if year == y0 {
            market_blueprint = rows.clone();
        }
        for (j, (at, codes)) in rows.iter().enumerate() {
            patents.push(PatentRecord {
                patent_id: format!("M{year}_{j:05}"),
                year,
                applicant_id: format!("mkt_{year}_{j:05}"),
                applicant_type: *at,
                ipc4_codes: codes.clone(),
                is_ai: false,
            });
        }
    }

    // firm patents: home-code propensities, occasional AI filings (which
    // would perturb the yearly tables, so they are suppressed whenever the
    // external side is frozen)
    let firm_ids: Vec<String> = (0..config.n_firms).map(|f| format!("F{f:04}")).collect();
    let firm_ai_prob = if config.freeze_external { 0.0 } else { 0.06 };
    let patent_count_dist = Poisson::new(config.patents_per_firm)
        .map_err(|e| Error::Config(format!("patents_per_firm: {e}")))?;
    for firm in &firm_ids {
        let home_idx = weighted_distinct(&mut rng, &vec![1.0; config.universe_size], 6);
        let home: Vec<Ipc4> = home_idx.iter().map(|&i| universe[i]).collect();
        let home_w: Vec<f64> = (0..home.len()).map(|_| rng.gen::<f64>() + 0.1).collect();
        let mut firm_blueprint: Vec<BTreeSet<Ipc4>> = Vec::new();
        for year in y0..=y1 {
            let code_sets: Vec<BTreeSet<Ipc4>> = if config.freeze_internal && year > y0 {
                firm_blueprint.clone()
            } else {
                let count = patent_count_dist.sample(&mut rng) as usize;
                (0..count)
                    .map(|_| {
                        let mut codes = BTreeSet::new();
                        if rng.gen::<f64>() < firm_ai_prob {
                            codes.insert(ai_list[rng.gen_range(0..ai_list.len())]);
                            if rng.gen::<f64>() < 0.5 {
                                let idx = weighted_distinct(&mut rng, &home_w, 1);
                                codes.insert(home[idx[0]]);
                            }
                        } else {
                            let k = 1 + rng.gen_range(0..3);
                            for idx in weighted_distinct(&mut rng, &home_w, k) {
                                codes.insert(home[idx]);
                            }
                        }
                        codes
                    })
                    .collect()
            };
            if year == y0 {
                firm_blueprint = code_sets.clone();
            }
            for (i, codes) in code_sets.iter().enumerate() {
                patents.push(PatentRecord {
                    patent_id: format!("P{firm}_{year}_{i:02}"),
                    year,
                    applicant_id: firm.clone(),
                    applicant_type: ApplicantType::Enterprise,
                    ipc4_codes: codes.clone(),
                    is_ai: false,
                });
            }
        }
    }
    let (patents, n_ai) = tag_ai(patents, &ai_set);
    if n_ai == 0 {
        return Err(Error::Config("configuration yielded an empty AI corpus".into()));
    }

    // provinces and staggered policy arrivals
    let provinces: Vec<String> = (0..config.n_provinces).map(|i| format!("prov{i:02}")).collect();
    let firm_prov: Vec<usize> =
        (0..config.n_firms).map(|_| rng.gen_range(0..config.n_provinces)).collect();
    let mut policies: Vec<PolicyRecord> = Vec::new();
    for prov in &provinces {
        let mut serial = 0;
        for year in (y0 - 1)..=(y1 - 1) {
            if rng.gen::<f64>() < 0.35 {
                policies.push(PolicyRecord {
                    province: prov.clone(),
                    effective_year: year,
                    policy_id: format!("pol_{prov}_{serial:02}"),
                });
                serial += 1;
            }
        }
    }
    let mut policy_years: BTreeMap<&str, Vec<i32>> = BTreeMap::new();
    for p in &policies {
        policy_years.entry(&p.province).or_default().push(p.effective_year);
    }
    for years in policy_years.values_mut() {
        years.sort_unstable();
    }
    let lagged_policy = |prov: &str, year: i32| -> f64 {
        policy_years
            .get(prov)
            .map_or(0, |ys| ys.partition_point(|&y| y <= year - 1)) as f64
    };

    // realized readiness drives both the capability driver and the outcome
    let firm_set: BTreeSet<String> = firm_ids.iter().cloned().collect();
    let readiness = readiness_panel(&patents, &firm_set, config.years, &ai_set, AiCodePolicy::ScoreOne);
    let r_ext: BTreeMap<(&str, i32), f64> = readiness
        .iter()
        .filter_map(|r| r.external.map(|v| ((r.firm_id.as_str(), r.year), v)))
        .collect();

    // latent draws and text stubs
    let gamma: Vec<f64> = (0..config.n_firms).map(|_| truth.firm_fe_sd * normal.sample(&mut rng)).collect();
    let u_cap: Vec<f64> = (0..config.n_firms).map(|_| 0.3 * normal.sample(&mut rng)).collect();
    let mut s_shock: BTreeMap<(&str, i32), f64> = BTreeMap::new();
    let mut texts: Vec<TextDocument> = Vec::new();
    for (f, firm) in firm_ids.iter().enumerate() {
        for year in y0..=y1 {
            let s = normal.sample(&mut rng);
            let eta = normal.sample(&mut rng);
            s_shock.insert((firm.as_str(), year), s);
            let pol = lagged_policy(&provinces[firm_prov[f]], year);
            let r = r_ext.get(&(firm.as_str(), year)).copied().unwrap_or(0.0);
            let q_base = truth.policy_strength * pol + 0.6 * r + u_cap[f] + 0.4 * eta;
            let q = q_base + truth.endogeneity * s;
            let zero_ai = q_base < config.zero_ai_threshold;

            let mut body = String::from("annual report on operations and strategy");
            if !zero_ai {
                let rate = (0.7 * q + 0.4).exp().clamp(0.05, 40.0);
                let n_terms = Poisson::new(rate).expect("positive rate").sample(&mut rng) as u64;
                for _ in 0..n_terms {
                    body.push_str(" machine learning initiative");
                }
            }
            texts.push(TextDocument {
                firm_id: firm.clone(),
                year,
                kind: TextKind::Mdna,
                text: normalize_text(&body),
                value: None,
                title: None,
            });

            let p_hit = if zero_ai { 0.0 } else { sigmoid(0.9 * q - 0.8) };
            for _ in 0..6 {
                let hit = rng.gen::<f64>() < p_hit;
                let (text, title) = if hit {
                    ("algorithm engineer role in applied research", "machine learning engineer")
                } else {
                    ("regional sales associate role", "sales associate")
                };
                texts.push(TextDocument {
                    firm_id: firm.clone(),
                    year,
                    kind: TextKind::JobPosting,
                    text: normalize_text(text),
                    value: None,
                    title: Some(normalize_text(title)),
                });
            }

            let zeta = normal.sample(&mut rng);
            if !zero_ai {
                texts.push(TextDocument {
                    firm_id: firm.clone(),
                    year,
                    kind: TextKind::AssetLine,
                    text: normalize_text("gpu server cluster for the machine learning platform"),
                    value: Some((1.2 + 0.8 * q + 0.2 * zeta).exp()),
                    title: None,
                });
            }
            texts.push(TextDocument {
                firm_id: firm.clone(),
                year,
                kind: TextKind::AssetLine,
                text: normalize_text("office equipment and furniture"),
                value: Some(80.0),
                title: None,
            });
        }
    }

    // realized capability (the same numbers the estimation pipeline sees)
    let lexicons = default_lexicons();
    let mut cap_rows = capability_components(&texts, &lexicons, config.years)?;
    composite_capability(&mut cap_rows, Standardization::Panel)?;
    let k_map: BTreeMap<(&str, i32), f64> = cap_rows
        .iter()
        .filter_map(|c| c.ai_capability.map(|v| ((c.firm_id.as_str(), c.year), v)))
        .collect();

    // production inputs are an independent Cobb-Douglas block
    let tfp_inputs = generate_production(&mut rng, &firm_ids, config.years, &truth);
    let tfp_idx: BTreeMap<(&str, i32), &TfpInput> = tfp_inputs
        .iter()
        .map(|r| ((r.firm_id.as_str(), r.year), r))
        .collect();

    // outcomes: y_t responds to the realized (K, R) at t-1 with the
    // planted coefficients; the shared shock s_{t-1} enters the error
    // whenever endogeneity is on
    let mut firms: Vec<FirmFinancialRow> = Vec::new();
    for (f, firm) in firm_ids.iter().enumerate() {
        for year in y0..=y1 {
            let e = normal.sample(&mut rng);
            let mut y = truth.beta0
                + gamma[f]
                + truth.year_effect * (year - y0) as f64
                + truth.noise_sd * e;
            let mut k_prev = 0.0;
            let mut r_prev = 0.0;
            if year > y0 {
                if let (Some(&k), Some(&r)) = (
                    k_map.get(&(firm.as_str(), year - 1)),
                    r_ext.get(&(firm.as_str(), year - 1)),
                ) {
                    y += truth.beta_capability * k
                        + truth.beta_readiness * r
                        + truth.beta_interaction * k * r;
                    k_prev = k;
                    r_prev = r;
                }
                y += 0.9 * truth.endogeneity * s_shock[&(firm.as_str(), year - 1)];
            }
            let employees = (4.0 + 0.2 * normal.sample(&mut rng)).exp();
            let revenue = employees * y.exp();

            let [t0, t1, t2, t3] = truth.theta_trademarks;
            let rate = (t0 + t1 * k_prev + t2 * r_prev + t3 * k_prev * r_prev)
                .exp()
                .clamp(1e-6, 60.0);
            let trademarks = Poisson::new(rate).expect("positive rate").sample(&mut rng);

            let total_assets = (10.0 + 0.5 * normal.sample(&mut rng)).exp();
            let leverage = 0.2 + 0.5 * rng.gen::<f64>();
            let tobin_q = (0.5 + 0.3 * normal.sample(&mut rng)).exp();
            let prod = tfp_idx[&(firm.as_str(), year)];
            firms.push(FirmFinancialRow {
                firm_id: firm.clone(),
                year,
                revenue: Some(revenue),
                employees: Some(employees),
                total_assets: Some(total_assets),
                leverage: Some(leverage),
                tobin_q: Some(tobin_q),
                trademarks: Some(trademarks.round()),
                province: Some(provinces[firm_prov[f]].clone()),
                ln_output: Some(prod.ln_output),
                ln_labor: Some(prod.ln_labor),
                ln_capital: Some(prod.ln_capital),
                ln_materials: Some(prod.ln_materials),
            });
        }
    }

    Ok(SyntheticData {
        config: config.clone(),
        patents,
        ai_codes: ai_set,
        firms,
        texts,
        policies,
        firm_ids: firm_set,
        truth,
    })
}

/// Cobb-Douglas production block: productivity follows an AR(1), capital
/// is predetermined (built from lagged productivity), labor responds to
/// current productivity (the OLS bias source), and materials reveal
/// (productivity, capital) exactly as the proxy assumption requires.
pub fn generate_production(
    rng: &mut ChaCha20Rng,
    firm_ids: &[String],
    years: (i32, i32),
    truth: &SyntheticTruth,
) -> Vec<TfpInput> {
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let (y0, y1) = years;
    let mut rows = Vec::with_capacity(firm_ids.len() * (y1 - y0 + 1) as usize);
    for firm in firm_ids {
        let kappa = 2.5 + 0.3 * normal.sample(rng);
        let lambda = 1.5 + 0.3 * normal.sample(rng);
        let sd0 = 0.08 / (1.0 - truth.rho * truth.rho).sqrt();
        let mut omega_prev = sd0 * normal.sample(rng);
        let mut labor_shock = 0.25 * normal.sample(rng);
        for year in y0..=y1 {
            let omega = truth.rho * omega_prev + 0.08 * normal.sample(rng);
            labor_shock = 0.6 * labor_shock + 0.25 * normal.sample(rng);
            let k = kappa + 0.6 * omega_prev + 0.3 * normal.sample(rng);
            let l = lambda + 0.7 * omega + labor_shock;
            let m = 0.5 + omega + 0.5 * k;
            let y = truth.beta_l * l
                + truth.beta_k * k
                + omega
                + 0.02 * (year - y0) as f64
                + 0.03 * normal.sample(rng);
            rows.push(TfpInput {
                firm_id: firm.clone(),
                year,
                ln_output: y,
                ln_labor: l,
                ln_capital: k,
                ln_materials: m,
            });
            omega_prev = omega;
        }
    }
    rows
}

/// Rate loading of lagged research counts in the enterprise diffusion DGP.
const DIFFUSION_DELTA: f64 = 0.12;

/// Section-G code-year AI patent counts with a planted differential
/// growth rate: bio codes (G16B, G16H) gain `truth.bio_growth` extra
/// log-growth per year on top of the common trend. Returns the counts
/// and the bio code set.
pub fn generate_trend_counts(
    config: &SyntheticConfig,
) -> (Vec<(String, i32, u64)>, BTreeSet<String>) {
    let mut rng = ChaCha20Rng::seed_from_u64(config.seed);
    rng.set_stream(config.stream.wrapping_add(0xB10));
    let bio: BTreeSet<String> = ["G16B", "G16H"].iter().map(|s| s.to_string()).collect();
    let mut codes: Vec<String> = (1..=30).map(|c| format!("G{c:02}B")).collect();
    codes.extend(bio.iter().cloned());
    let (y0, y1) = config.years;
    let mut counts = Vec::new();
    for code in &codes {
        let base = 2.0 + rng.gen_range(-0.5..0.5);
        let is_bio = bio.contains(code);
        for year in y0..=y1 {
            let t = (year - y0) as f64;
            let rate = (base + 0.05 * t + if is_bio { config.truth.bio_growth * t } else { 0.0 })
                .exp();
            let n = Poisson::new(rate).expect("positive rate").sample(&mut rng) as u64;
            if n > 0 {
                counts.push((code.clone(), year, n));
            }
        }
    }
    (counts, bio)
}

/// Code-year-applicant-type AI patent counts for the diffusion study:
/// research-institution counts evolve autonomously, enterprise counts
/// load on last year's research count with coefficient
/// [`DIFFUSION_DELTA`], and individual counts are independent of both
/// (the placebo source).
pub fn generate_diffusion_counts(
    config: &SyntheticConfig,
) -> Vec<(String, i32, ApplicantType, u64)> {
    let mut rng = ChaCha20Rng::seed_from_u64(config.seed);
    rng.set_stream(config.stream.wrapping_add(0xD1F));
    let (y0, y1) = config.years;
    let mut counts = Vec::new();
    for c in 1..=60 {
        let code = format!("G{c:02}C");
        let base_res = 1.2 + rng.gen_range(-0.4..0.4);
        let base_ent = 0.8 + rng.gen_range(-0.4..0.4);
        let base_ind: f64 = 0.6 + rng.gen_range(-0.4..0.4);
        let mut research_prev = 0u64;
        for year in (y0 - 1)..=y1 {
            let research = Poisson::new((base_res + 0.03 * (year - y0) as f64).exp())
                .expect("positive rate")
                .sample(&mut rng) as u64;
            if research > 0 {
                counts.push((code.clone(), year, ApplicantType::Research, research));
            }
            if year >= y0 {
                let rate_ent =
                    (base_ent + DIFFUSION_DELTA * research_prev as f64 + 0.02 * (year - y0) as f64)
                        .exp();
                let enterprise =
                    Poisson::new(rate_ent).expect("positive rate").sample(&mut rng) as u64;
                if enterprise > 0 {
                    counts.push((code.clone(), year, ApplicantType::Enterprise, enterprise));
                }
                let individual =
                    Poisson::new(base_ind.exp()).expect("positive rate").sample(&mut rng) as u64;
                if individual > 0 {
                    counts.push((code.clone(), year, ApplicantType::Individual, individual));
                }
            }
            research_prev = research;
        }
    }
    counts
}

/// Runs the full measurement pipeline on an in-memory bundle and returns
/// the assembled estimation panel (without the TFP column; recipes that
/// need it attach the GMM residual series).
pub fn pipeline_panel(data: &SyntheticData) -> Result<Vec<FirmYearObservation>> {
    let readiness = readiness_panel(
        &data.patents,
        &data.firm_ids,
        data.config.years,
        &data.ai_codes,
        AiCodePolicy::ScoreOne,
    );
    let lexicons = default_lexicons();
    let mut cap = capability_components(&data.texts, &lexicons, data.config.years)?;
    composite_capability(&mut cap, Standardization::Panel)?;
    let (mut panel, _) = assemble_panel(&readiness, &cap, &data.firms, &BTreeMap::new())?;
    policy_instrument(&data.policies, &mut panel);
    Ok(panel)
}

fn write_file(path: &Path, content: &str) -> Result<()> {
    fs::write(path, content).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Writes the bundle in the exact formats the corpus loaders ingest, plus
/// the lexicon files and the serialized truth. Returns the written paths.
pub fn emit(data: &SyntheticData, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|source| Error::Io {
        path: dir.display().to_string(),
        source,
    })?;
    let mut written = Vec::new();
    let push = |written: &mut Vec<PathBuf>, name: &str, content: String| -> Result<()> {
        let path = dir.join(name);
        write_file(&path, &content)?;
        written.push(path);
        Ok(())
    };

    let mut patents = String::new();
    for p in &data.patents {
        let codes: Vec<&str> = p.ipc4_codes.iter().map(|c| c.as_str()).collect();
        let row = serde_json::json!({
            "id": p.patent_id,
            "year": p.year,
            "applicant_id": p.applicant_id,
            "applicant_type": p.applicant_type.as_str(),
            "ipc4": codes,
        });
        patents.push_str(&row.to_string());
        patents.push('\n');
    }
    push(&mut written, "patents.jsonl", patents)?;

    let mut firms = String::from(
        "firm_id,year,revenue,employees,total_assets,leverage,tobin_q,trademarks,province,ln_output,ln_labor,ln_capital,ln_materials\n",
    );
    for f in &data.firms {
        firms.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
            f.firm_id,
            f.year,
            opt(f.revenue),
            opt(f.employees),
            opt(f.total_assets),
            opt(f.leverage),
            opt(f.tobin_q),
            opt(f.trademarks),
            f.province.as_deref().unwrap_or(""),
            opt(f.ln_output),
            opt(f.ln_labor),
            opt(f.ln_capital),
            opt(f.ln_materials),
        ));
    }
    push(&mut written, "firms.csv", firms)?;

    let mut texts = String::new();
    for t in &data.texts {
        let kind = match t.kind {
            TextKind::Mdna => "mdna",
            TextKind::JobPosting => "job_posting",
            TextKind::AssetLine => "asset_line",
        };
        let mut row = serde_json::json!({
            "firm_id": t.firm_id,
            "year": t.year,
            "kind": kind,
            "text": t.text,
        });
        if let Some(v) = t.value {
            row["value"] = serde_json::json!(v);
        }
        if let Some(title) = &t.title {
            row["title"] = serde_json::json!(title);
        }
        texts.push_str(&row.to_string());
        texts.push('\n');
    }
    push(&mut written, "texts.jsonl", texts)?;

    let mut policies = String::from("province,effective_year,policy_id\n");
    for p in &data.policies {
        policies.push_str(&format!("{},{},{}\n", p.province, p.effective_year, p.policy_id));
    }
    push(&mut written, "policies.csv", policies)?;

    let mut ai_codes = String::from("# AI-designated IPC4 codes\n");
    for code in &data.ai_codes {
        ai_codes.push_str(code.as_str());
        ai_codes.push('\n');
    }
    push(&mut written, "ai_codes.txt", ai_codes)?;

    for (name, terms) in [
        ("lexicon_strategy.txt", STRATEGY_TERMS),
        ("lexicon_talent.txt", TALENT_TERMS),
        ("lexicon_asset_fixed.txt", ASSET_FIXED_TERMS),
        ("lexicon_asset_intangible.txt", ASSET_INTANGIBLE_TERMS),
    ] {
        let mut content = String::new();
        for t in terms {
            content.push_str(t);
            content.push('\n');
        }
        push(&mut written, name, content)?;
    }

    let truth = serde_json::to_string_pretty(&data.truth).expect("truth serializes");
    push(&mut written, "truth.json", truth + "\n")?;
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_config() -> SyntheticConfig {
        SyntheticConfig {
            n_firms: 50,
            years: (2016, 2019),
            market_patents_per_year: 150,
            seed: 7,
            ..SyntheticConfig::default()
        }
    }

    #[test]
    fn trend_counts_recover_planted_growth() {
        use crate::econ::{trend_poisson, TrendVariant};
        let config = SyntheticConfig::default();
        let (counts, bio) = generate_trend_counts(&config);
        for variant in [TrendVariant::TrendDummy, TrendVariant::TwoWayFe] {
            let res = trend_poisson(&counts, &bio, variant).unwrap();
            let c = res.coefficient("bio_x_trend").unwrap();
            assert!(
                (c.estimate - config.truth.bio_growth).abs() < 2.5 * c.se,
                "{variant:?}: estimate {} se {}",
                c.estimate,
                c.se
            );
        }
    }

    #[test]
    fn diffusion_counts_separate_source_from_placebo() {
        use crate::econ::{diffusion_poisson, DiffusionSource};
        let config = SyntheticConfig::default();
        let counts = generate_diffusion_counts(&config);
        let main = diffusion_poisson(&counts, DiffusionSource::Research).unwrap();
        let lag1 = main.coefficient("source_lag1").unwrap();
        assert!(lag1.estimate > 0.0, "lag-1 estimate {}", lag1.estimate);
        assert!(
            lag1.estimate / lag1.se > 2.0,
            "lag-1 t {}",
            lag1.estimate / lag1.se
        );
        let placebo = diffusion_poisson(&counts, DiffusionSource::Individual).unwrap();
        let p1 = placebo.coefficient("source_lag1").unwrap();
        assert!(
            (p1.estimate / p1.se).abs() < 2.0,
            "placebo lag-1 t {}",
            p1.estimate / p1.se
        );
    }

    #[test]
    fn generation_is_deterministic_byte_for_byte() {
        let config = small_config();
        let a = generate(&config).unwrap();
        let b = generate(&config).unwrap();
        let da = tempfile::tempdir().unwrap();
        let db = tempfile::tempdir().unwrap();
        let fa = emit(&a, da.path()).unwrap();
        let fb = emit(&b, db.path()).unwrap();
        assert_eq!(fa.len(), fb.len());
        for (pa, pb) in fa.iter().zip(&fb) {
            let ca = fs::read(pa).unwrap();
            let cb = fs::read(pb).unwrap();
            assert_eq!(ca, cb, "{} differs", pa.display());
        }
    }

    #[test]
    fn different_streams_differ() {
        let config = small_config();
        let mut other = config.clone();
        other.stream = 1;
        let a = generate(&config).unwrap();
        let b = generate(&other).unwrap();
        assert_ne!(a.patents, b.patents);
    }

    #[test]
    fn emitted_files_reload_cleanly() {
        use crate::corpus;
        let data = generate(&small_config()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        emit(&data, dir.path()).unwrap();
        let patents =
            corpus::load_patents(&dir.path().join("patents.jsonl"), corpus::PatentFormat::Jsonl, None)
                .unwrap();
        assert_eq!(patents.report.n_errors(), 0);
        assert_eq!(patents.records.len(), data.patents.len());
        let ai = corpus::load_code_list(&dir.path().join("ai_codes.txt")).unwrap();
        assert_eq!(ai, data.ai_codes);
        let (tagged, n_ai) = corpus::tag_ai(patents.records, &ai);
        assert_eq!(tagged, data.patents);
        assert!(n_ai > 0);
        let firms = corpus::load_firms(&dir.path().join("firms.csv")).unwrap();
        assert_eq!(firms.report.n_errors(), 0);
        assert_eq!(firms.records, data.firms);
        let texts = corpus::load_texts(&dir.path().join("texts.jsonl")).unwrap();
        assert_eq!(texts.report.n_errors(), 0);
        assert_eq!(texts.records.len(), data.texts.len());
        for (i, (a, b)) in texts.records.iter().zip(&data.texts).enumerate() {
            assert_eq!(a, b, "text row {i} differs");
        }
        let policies = corpus::load_policies(&dir.path().join("policies.csv")).unwrap();
        assert_eq!(policies.report.n_errors(), 0);
        assert_eq!(policies.records, data.policies);
    }

    #[test]
    fn freeze_external_holds_external_constant() {
        let mut config = small_config();
        config.freeze_external = true;
        let data = generate(&config).unwrap();
        let panel = pipeline_panel(&data).unwrap();
        let mut by_firm: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
        for row in &panel {
            if let Some(v) = row.readiness_external {
                by_firm.entry(&row.firm_id).or_default().push(v);
            }
        }
        assert!(!by_firm.is_empty());
        for (firm, values) in by_firm {
            assert!(
                values.windows(2).all(|w| w[0] == w[1]),
                "firm {firm} external series varies: {values:?}"
            );
        }
    }

    #[test]
    fn freeze_internal_holds_internal_constant() {
        let mut config = small_config();
        config.freeze_internal = true;
        let data = generate(&config).unwrap();
        let panel = pipeline_panel(&data).unwrap();
        let mut by_firm: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
        for row in &panel {
            if let Some(v) = row.readiness_internal {
                by_firm.entry(&row.firm_id).or_default().push(v);
            }
        }
        assert!(!by_firm.is_empty());
        for (firm, values) in by_firm {
            assert!(
                values.windows(2).all(|w| w[0] == w[1]),
                "firm {firm} internal series varies: {values:?}"
            );
        }
    }

    #[test]
    fn fully_frozen_collapses_variants() {
        let mut config = small_config();
        config.freeze_external = true;
        config.freeze_internal = true;
        let data = generate(&config).unwrap();
        let panel = pipeline_panel(&data).unwrap();
        let mut seen = 0;
        for row in &panel {
            if let (Some(b), Some(e), Some(i)) =
                (row.readiness_baseline, row.readiness_external, row.readiness_internal)
            {
                assert_eq!(b, e, "{} {}", row.firm_id, row.year);
                assert_eq!(b, i, "{} {}", row.firm_id, row.year);
                seen += 1;
            }
        }
        assert!(seen > 0);
    }

    #[test]
    fn readiness_spread_is_sane() {
        let data = generate(&small_config()).unwrap();
        let panel = pipeline_panel(&data).unwrap();
        let values: Vec<f64> = panel.iter().filter_map(|r| r.readiness_baseline).collect();
        assert!(values.len() > 100);
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        assert!((0.25..=0.65).contains(&mean), "readiness mean {mean}");
        let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
        let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        assert!(min < 0.1, "lower tail {min}");
        assert!(max > 0.9, "upper tail {max}");
    }

    #[test]
    fn zero_ai_subsample_is_nonempty_and_signals_zero() {
        let data = generate(&small_config()).unwrap();
        let panel = pipeline_panel(&data).unwrap();
        let zero = crate::panel::filter_zero_ai(&panel, false);
        assert!(!zero.is_empty());
        assert!(zero.len() < panel.len());
        for row in &zero {
            assert_eq!(row.ai_talent, Some(0.0));
            assert_eq!(row.ai_asset, Some(0.0));
            assert_eq!(row.ai_strategy, Some(0.0));
        }
    }

    #[test]
    fn invalid_configs_rejected() {
        let mut c = small_config();
        c.years = (2022, 2016);
        assert!(generate(&c).is_err());
        let mut c = small_config();
        c.ai_codes.clear();
        assert!(generate(&c).is_err());
        let mut c = small_config();
        c.truth.applicant_shares = [0.5, 0.5, 0.5, 0.5];
        assert!(generate(&c).is_err());
        let mut c = small_config();
        c.truth.noise_sd = f64::NAN;
        assert!(generate(&c).is_err());
    }
}
