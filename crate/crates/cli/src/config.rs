//! Flat key = value configuration file: input paths, the study year
//! window, and nothing else. Relative paths resolve against the config
//! file's directory.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use aiready_core::{Error, Result};

/// Resolved pipeline inputs.
#[derive(Debug, Clone)]
pub struct PipelineConfig {
    pub patents: PathBuf,
    pub firms: PathBuf,
    pub texts: PathBuf,
    pub policies: PathBuf,
    pub ai_codes: PathBuf,
    pub lexicon_strategy: PathBuf,
    pub lexicon_talent: PathBuf,
    pub lexicon_asset_fixed: PathBuf,
    pub lexicon_asset_intangible: PathBuf,
    pub years: (i32, i32),
}

const PATH_KEYS: [&str; 9] = [
    "patents",
    "firms",
    "texts",
    "policies",
    "ai_codes",
    "lexicon_strategy",
    "lexicon_talent",
    "lexicon_asset_fixed",
    "lexicon_asset_intangible",
];

impl PipelineConfig {
    /// All nine input paths with their config keys, in key order.
    pub fn inputs(&self) -> Vec<(&'static str, &Path)> {
        vec![
            ("patents", &self.patents),
            ("firms", &self.firms),
            ("texts", &self.texts),
            ("policies", &self.policies),
            ("ai_codes", &self.ai_codes),
            ("lexicon_strategy", &self.lexicon_strategy),
            ("lexicon_talent", &self.lexicon_talent),
            ("lexicon_asset_fixed", &self.lexicon_asset_fixed),
            ("lexicon_asset_intangible", &self.lexicon_asset_intangible),
        ]
    }

    /// A config pointing at the files [`aiready_core::synth::emit`] writes.
    pub fn for_synthetic_dir(dir: &Path, years: (i32, i32)) -> Self {
        PipelineConfig {
            patents: dir.join("patents.jsonl"),
            firms: dir.join("firms.csv"),
            texts: dir.join("texts.jsonl"),
            policies: dir.join("policies.csv"),
            ai_codes: dir.join("ai_codes.txt"),
            lexicon_strategy: dir.join("lexicon_strategy.txt"),
            lexicon_talent: dir.join("lexicon_talent.txt"),
            lexicon_asset_fixed: dir.join("lexicon_asset_fixed.txt"),
            lexicon_asset_intangible: dir.join("lexicon_asset_intangible.txt"),
            years,
        }
    }
}

fn parse_pairs(path: &Path) -> Result<BTreeMap<String, String>> {
    let content = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut pairs = BTreeMap::new();
    for (idx, raw) in content.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            Error::Config(format!(
                "{}:{}: expected `key = value`, got {raw:?}",
                path.display(),
                idx + 1
            ))
        })?;
        let key = key.trim().to_string();
        if pairs.insert(key.clone(), value.trim().to_string()).is_some() {
            return Err(Error::Config(format!(
                "{}:{}: duplicate key {key}",
                path.display(),
                idx + 1
            )));
        }
    }
    Ok(pairs)
}

/// Parses and validates a config file: schema (exact key set), year-range
/// order, path existence, and lexicon non-emptiness.
pub fn validate_config(path: &Path) -> Result<PipelineConfig> {
    let mut pairs = parse_pairs(path)?;
    let base = path.parent().unwrap_or(Path::new("."));
    let mut take = |key: &str| -> Result<String> {
        pairs
            .remove(key)
            .ok_or_else(|| Error::Config(format!("config is missing required key `{key}`")))
    };
    let mut paths = BTreeMap::new();
    for key in PATH_KEYS {
        paths.insert(key, base.join(take(key)?));
    }
    let year = |key: &str, raw: String| -> Result<i32> {
        raw.parse()
            .map_err(|_| Error::Config(format!("key `{key}`: expected a year, got {raw:?}")))
    };
    let y0 = year("year_start", take("year_start")?)?;
    let y1 = year("year_end", take("year_end")?)?;
    if let Some(key) = pairs.keys().next() {
        return Err(Error::Config(format!("unknown config key `{key}`")));
    }
    if y0 > y1 {
        return Err(Error::Config(format!(
            "year range ({y0}, {y1}) is reversed"
        )));
    }
    for (key, p) in &paths {
        if !p.is_file() {
            return Err(Error::Config(format!(
                "key `{key}`: input file {} does not exist",
                p.display()
            )));
        }
    }
    for key in PATH_KEYS.iter().filter(|k| k.starts_with("lexicon_")) {
        let p = &paths[key];
        let content = fs::read_to_string(p).map_err(|source| Error::Io {
            path: p.display().to_string(),
            source,
        })?;
        if content.lines().all(|l| l.trim().is_empty()) {
            return Err(Error::Config(format!(
                "key `{key}`: lexicon {} is empty",
                p.display()
            )));
        }
    }
    Ok(PipelineConfig {
        patents: paths.remove("patents").expect("present"),
        firms: paths.remove("firms").expect("present"),
        texts: paths.remove("texts").expect("present"),
        policies: paths.remove("policies").expect("present"),
        ai_codes: paths.remove("ai_codes").expect("present"),
        lexicon_strategy: paths.remove("lexicon_strategy").expect("present"),
        lexicon_talent: paths.remove("lexicon_talent").expect("present"),
        lexicon_asset_fixed: paths.remove("lexicon_asset_fixed").expect("present"),
        lexicon_asset_intangible: paths.remove("lexicon_asset_intangible").expect("present"),
        years: (y0, y1),
    })
}

/// Writes a config file pointing at a synthetic emission directory.
pub fn write_synthetic_config(dir: &Path, years: (i32, i32)) -> Result<PathBuf> {
    let path = dir.join("pipeline.conf");
    let mut content = String::new();
    let cfg = PipelineConfig::for_synthetic_dir(Path::new("."), years);
    for (key, p) in cfg.inputs() {
        content.push_str(&format!(
            "{key} = {}\n",
            p.file_name().expect("file name").to_string_lossy()
        ));
    }
    content.push_str(&format!("year_start = {}\nyear_end = {}\n", years.0, years.1));
    fs::write(&path, content).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(dir: &Path, name: &str, content: &str) -> PathBuf {
        let p = dir.join(name);
        fs::write(&p, content).unwrap();
        p
    }

    fn full_config(dir: &Path) -> String {
        for key in PATH_KEYS {
            write(dir, &format!("{key}.txt"), "content\n");
        }
        PATH_KEYS
            .iter()
            .map(|k| format!("{k} = {k}.txt\n"))
            .chain(["year_start = 2016\n".into(), "year_end = 2022\n".into()])
            .collect()
    }

    #[test]
    fn valid_config_parses() {
        let dir = tempfile::tempdir().unwrap();
        let conf = write(dir.path(), "p.conf", &full_config(dir.path()));
        let cfg = validate_config(&conf).unwrap();
        assert_eq!(cfg.years, (2016, 2022));
        assert_eq!(cfg.patents, dir.path().join("patents.txt"));
    }

    #[test]
    fn reversed_year_range_fails() {
        let dir = tempfile::tempdir().unwrap();
        let content = full_config(dir.path())
            .replace("year_start = 2016", "year_start = 2022")
            .replace("year_end = 2022", "year_end = 2016");
        let conf = write(dir.path(), "p.conf", &content);
        let err = validate_config(&conf).unwrap_err();
        assert!(err.to_string().contains("year range (2022, 2016) is reversed"));
    }

    #[test]
    fn missing_ai_codes_names_the_key() {
        let dir = tempfile::tempdir().unwrap();
        let content: String = full_config(dir.path())
            .lines()
            .filter(|l| !l.starts_with("ai_codes"))
            .map(|l| format!("{l}\n"))
            .collect();
        let conf = write(dir.path(), "p.conf", &content);
        let err = validate_config(&conf).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
        assert!(err.to_string().contains("`ai_codes`"));
    }

    #[test]
    fn nonexistent_path_fails() {
        let dir = tempfile::tempdir().unwrap();
        let content = full_config(dir.path()).replace("firms = firms.txt", "firms = missing.csv");
        let conf = write(dir.path(), "p.conf", &content);
        let err = validate_config(&conf).unwrap_err();
        assert!(err.to_string().contains("`firms`"));
        assert!(err.to_string().contains("does not exist"));
    }

    #[test]
    fn empty_lexicon_fails() {
        let dir = tempfile::tempdir().unwrap();
        let content = full_config(dir.path());
        write(dir.path(), "lexicon_talent.txt", "  \n\n");
        let conf = write(dir.path(), "p.conf", &content);
        let err = validate_config(&conf).unwrap_err();
        assert!(err.to_string().contains("`lexicon_talent`"));
        assert!(err.to_string().contains("is empty"));
    }

    #[test]
    fn unknown_and_duplicate_keys_fail() {
        let dir = tempfile::tempdir().unwrap();
        let conf = write(dir.path(), "a.conf", &(full_config(dir.path()) + "extra = 1\n"));
        assert!(validate_config(&conf).unwrap_err().to_string().contains("unknown config key `extra`"));
        let conf = write(dir.path(), "b.conf", &(full_config(dir.path()) + "patents = other.txt\n"));
        assert!(validate_config(&conf).unwrap_err().to_string().contains("duplicate key patents"));
    }

    #[test]
    fn synthetic_config_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = PipelineConfig::for_synthetic_dir(dir.path(), (2016, 2022));
        for (_, p) in cfg.inputs() {
            fs::write(p, "x\n").unwrap();
        }
        let path = write_synthetic_config(dir.path(), (2016, 2022)).unwrap();
        let parsed = validate_config(&path).unwrap();
        assert_eq!(parsed.years, (2016, 2022));
        assert_eq!(parsed.patents, dir.path().join("patents.jsonl"));
    }
}
