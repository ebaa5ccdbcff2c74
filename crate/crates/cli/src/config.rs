//! Flat `key = value` configuration with `model.`, `run.` and `output.`
//! sections, resolved in layers: defaults < preset < file < flags.
//!
//! ```text
//! # comment
//! preset = fig1
//! model.sigma = 12.5
//! run.sigma_grid = 10, 20, 30
//! ```

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use durdet::combinatorics::EntropyConvention;
use durdet::lrt::InitMode;
use durdet::{DurationPmf, ModelParams};
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};
use crate::presets::Preset;

/// Every accepted key with its default, if any.
pub const KEYS: &[(&str, Option<&str>)] = &[
    ("preset", None),
    ("model.delta", None),
    ("model.p1", None),
    ("model.p2", None),
    ("model.mu1", None),
    ("model.mu2", None),
    ("model.sigma", None),
    ("model.mu0", Some("0")),
    ("run.horizon", Some("100")),
    ("run.runs", Some("100000")),
    ("run.scale", Some("0.1")),
    ("run.alpha", Some("0.01")),
    ("run.seed", Some("0")),
    ("run.sigma_grid", None),
    ("run.budget", Some("1000000")),
    ("run.refine", Some("true")),
    ("run.convention", Some("normalized")),
    ("run.init_mode", Some("model")),
    ("run.tail_fraction", Some("0.8")),
    ("run.thresholds", Some("200")),
    ("output.dir", Some("results")),
];

const REQUIRED_MODEL_KEYS: [&str; 4] = ["model.delta", "model.mu1", "model.mu2", "model.sigma"];

/// Keys that never change data rows and are left out of the config hash.
const UNHASHED: [&str; 1] = ["output.dir"];

#[derive(Debug, Clone, PartialEq)]
enum Origin {
    Default,
    Preset(Preset),
    File { path: PathBuf, line: usize },
    Flag,
}

impl fmt::Display for Origin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Origin::Default => f.write_str("default"),
            Origin::Preset(p) => write!(f, "preset {p}"),
            Origin::File { path, line } => write!(f, "{} line {line}", path.display()),
            Origin::Flag => f.write_str("command line"),
        }
    }
}

#[derive(Debug, Clone)]
struct Entry {
    value: String,
    origin: Origin,
}

fn check_key(key: &str, origin: &Origin) -> CliResult<&'static str> {
    KEYS.iter().map(|(k, _)| *k).find(|k| *k == key).ok_or_else(|| {
        CliError::config(format!(
            "unknown key '{key}' ({origin}); valid keys: {}",
            KEYS.iter().map(|(k, _)| *k).collect::<Vec<_>>().join(", ")
        ))
    })
}

/// Parses config text into `(key, value, line)` triples.
fn parse_text(text: &str, path: &Path) -> CliResult<Vec<(&'static str, String, usize)>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let origin = Origin::File {
            path: path.to_path_buf(),
            line,
        };
        let Some((k, v)) = content.split_once('=') else {
            return Err(CliError::config(format!("{origin}: expected 'key = value', got '{content}'")));
        };
        let key = check_key(k.trim(), &origin)?;
        out.push((key, v.trim().to_string(), line));
    }
    Ok(out)
}

/// Fully resolved experiment configuration.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    entries: BTreeMap<&'static str, Entry>,
    pub preset: Option<Preset>,
    pub horizon: usize,
    pub runs: usize,
    pub scale: f64,
    pub alpha: f64,
    pub seed: u64,
    pub sigma_grid: Option<Vec<f64>>,
    pub budget: usize,
    pub refine: bool,
    pub convention: EntropyConvention,
    pub init_mode: InitMode,
    pub tail_fraction: f64,
    pub thresholds: usize,
    pub output_dir: PathBuf,
}

/// Layered config sources prior to resolution.
#[derive(Debug, Clone, Default)]
pub struct ConfigSources {
    file: Option<(PathBuf, String)>,
    flags: Vec<(String, String)>,
}

impl ConfigSources {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn file_text(mut self, path: impl Into<PathBuf>, text: impl Into<String>) -> Self {
        self.file = Some((path.into(), text.into()));
        self
    }

    pub fn read_file(self, path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::config(format!("cannot read config {}: {e}", path.display())))?;
        Ok(self.file_text(path, text))
    }

    /// A command-line override; later calls win.
    pub fn flag(mut self, key: impl Into<String>, value: impl Into<String>) -> Self {
        self.flags.push((key.into(), value.into()));
        self
    }

    /// Parses `key=value` as given to `--set`.
    pub fn flag_assignment(self, assignment: &str) -> CliResult<Self> {
        let (k, v) = assignment
            .split_once('=')
            .ok_or_else(|| CliError::config(format!("--set expects key=value, got '{assignment}'")))?;
        Ok(self.flag(k.trim(), v.trim()))
    }

    pub fn resolve(&self) -> CliResult<ExperimentConfig> {
        let file_entries = match &self.file {
            Some((path, text)) => parse_text(text, path)?
                .into_iter()
                .map(|(k, v, line)| {
                    (
                        k,
                        Entry {
                            value: v,
                            origin: Origin::File {
                                path: path.clone(),
                                line,
                            },
                        },
                    )
                })
                .collect(),
            None => Vec::new(),
        };
        let mut flag_entries = Vec::new();
        for (k, v) in &self.flags {
            let key = check_key(k, &Origin::Flag)?;
            flag_entries.push((
                key,
                Entry {
                    value: v.clone(),
                    origin: Origin::Flag,
                },
            ));
        }

        // the preset is chosen by the highest layer that names one
        let preset_entry = flag_entries
            .iter()
            .rev()
            .chain(file_entries.iter().rev())
            .find(|(k, _)| *k == "preset")
            .map(|(_, e)| e.clone());
        let preset = match &preset_entry {
            Some(e) if !e.value.is_empty() => Some(Preset::from_name(&e.value).ok_or_else(|| {
                CliError::config(format!(
                    "preset ({}): unknown preset '{}'; choose one of {}",
                    e.origin,
                    e.value,
                    crate::presets::ALL.map(|p| p.name()).join(", ")
                ))
            })?),
            _ => None,
        };

        let mut entries: BTreeMap<&'static str, Entry> = BTreeMap::new();
        for (k, d) in KEYS {
            if let Some(d) = d {
                entries.insert(
                    k,
                    Entry {
                        value: d.to_string(),
                        origin: Origin::Default,
                    },
                );
            }
        }
        if let Some(p) = preset {
            for (k, v) in p.entries() {
                let key = check_key(k, &Origin::Preset(p))?;
                entries.insert(
                    key,
                    Entry {
                        value: v.to_string(),
                        origin: Origin::Preset(p),
                    },
                );
            }
        }
        for (k, e) in file_entries.into_iter().chain(flag_entries) {
            entries.insert(k, e);
        }
        if let (Some(p), Some(e)) = (preset, preset_entry) {
            entries.insert(
                "preset",
                Entry {
                    value: p.name().to_string(),
                    origin: e.origin,
                },
            );
        }
        ExperimentConfig::from_entries(entries, preset)
    }
}

fn parse_value<T: std::str::FromStr>(key: &str, e: &Entry, what: &str) -> CliResult<T> {
    e.value
        .parse()
        .map_err(|_| CliError::config(format!("{key} ({}): expected {what}, got '{}'", e.origin, e.value)))
}

fn parse_list(key: &str, e: &Entry) -> CliResult<Vec<f64>> {
    e.value
        .split(',')
        .map(|s| {
            s.trim().parse::<f64>().map_err(|_| {
                CliError::config(format!(
                    "{key} ({}): expected a comma-separated list of numbers, got '{}'",
                    e.origin, e.value
                ))
            })
        })
        .collect()
}

impl ExperimentConfig {
    fn from_entries(entries: BTreeMap<&'static str, Entry>, preset: Option<Preset>) -> CliResult<Self> {
        let get = |k: &str| entries.get(k).expect("defaulted key");
        let invalid = |k: &str, msg: &str| {
            let e = get(k);
            CliError::config(format!("{k} ({}): {msg}, got '{}'", e.origin, e.value))
        };

        let horizon: usize = parse_value("run.horizon", get("run.horizon"), "a positive integer")?;
        if horizon == 0 {
            return Err(invalid("run.horizon", "must be at least 1"));
        }
        let runs: usize = parse_value("run.runs", get("run.runs"), "a positive integer")?;
        if runs == 0 {
            return Err(invalid("run.runs", "must be at least 1"));
        }
        let scale: f64 = parse_value("run.scale", get("run.scale"), "a number")?;
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(invalid("run.scale", "must be positive"));
        }
        let alpha: f64 = parse_value("run.alpha", get("run.alpha"), "a number")?;
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(invalid("run.alpha", "must lie strictly between 0 and 1"));
        }
        let seed: u64 = parse_value("run.seed", get("run.seed"), "an unsigned integer")?;
        let sigma_grid = match entries.get("run.sigma_grid") {
            Some(e) => {
                let g = parse_list("run.sigma_grid", e)?;
                if g.is_empty() || g.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
                    return Err(invalid("run.sigma_grid", "every noise level must be positive"));
                }
                Some(g)
            }
            None => None,
        };
        let budget: usize = parse_value("run.budget", get("run.budget"), "a positive integer")?;
        if budget == 0 {
            return Err(invalid("run.budget", "must be at least 1"));
        }
        let refine: bool = parse_value("run.refine", get("run.refine"), "true or false")?;
        let convention = match get("run.convention").value.as_str() {
            "normalized" => EntropyConvention::Normalized,
            "mass-weighted" => EntropyConvention::MassWeighted,
            _ => return Err(invalid("run.convention", "expected 'normalized' or 'mass-weighted'")),
        };
        let init_mode = match get("run.init_mode").value.as_str() {
            "model" => InitMode::ModelConsistent,
            "paper" => InitMode::PaperLiteral,
            _ => return Err(invalid("run.init_mode", "expected 'model' or 'paper'")),
        };
        let tail_fraction: f64 = parse_value("run.tail_fraction", get("run.tail_fraction"), "a number")?;
        if !(0.0..1.0).contains(&tail_fraction) {
            return Err(invalid("run.tail_fraction", "must lie in [0, 1)"));
        }
        let thresholds: usize = parse_value("run.thresholds", get("run.thresholds"), "an integer")?;
        if thresholds < 2 {
            return Err(invalid("run.thresholds", "must be at least 2"));
        }
        let output_dir = PathBuf::from(&get("output.dir").value);

        let cfg = ExperimentConfig {
            entries,
            preset,
            horizon,
            runs,
            scale,
            alpha,
            seed,
            sigma_grid,
            budget,
            refine,
            convention,
            init_mode,
            tail_fraction,
            thresholds,
            output_dir,
        };
        // model keys are optional overall but must be coherent when complete
        if REQUIRED_MODEL_KEYS.iter().all(|k| cfg.entries.contains_key(k)) {
            cfg.model_params()?;
        }
        Ok(cfg)
    }

    fn entry(&self, key: &str) -> Option<&Entry> {
        self.entries.get(key)
    }

    fn missing(&self, keys: &[&str]) -> CliResult<()> {
        let missing: Vec<&str> = keys.iter().copied().filter(|k| self.entry(k).is_none()).collect();
        if missing.is_empty() {
            Ok(())
        } else {
            Err(CliError::config(format!(
                "missing required keys: {} (set them in a config file, with --set, or pick a preset)",
                missing.join(", ")
            )))
        }
    }

    pub fn delta(&self) -> CliResult<usize> {
        self.missing(&["model.delta"])?;
        let e = self.entry("model.delta").expect("checked");
        let d: usize = parse_value("model.delta", e, "a positive integer")?;
        if d == 0 {
            return Err(CliError::config(format!("model.delta ({}): must be at least 1", e.origin)));
        }
        Ok(d)
    }

    fn number(&self, key: &str) -> CliResult<f64> {
        let e = self.entry(key).expect("checked");
        let v: f64 = parse_value(key, e, "a number")?;
        if !v.is_finite() {
            return Err(CliError::config(format!("{key} ({}): must be finite", e.origin)));
        }
        Ok(v)
    }

    fn pmf(&self, key: &str, delta: usize) -> CliResult<DurationPmf> {
        match self.entry(key) {
            None => Ok(DurationPmf::uniform(delta)),
            Some(e) => {
                let probs = parse_list(key, e)?;
                if probs.len() != delta {
                    return Err(CliError::config(format!(
                        "{key} ({}): expected {delta} probabilities (model.delta), got {}",
                        e.origin,
                        probs.len()
                    )));
                }
                DurationPmf::new(probs).map_err(|err| CliError::config(format!("{key} ({}): {err}", e.origin)))
            }
        }
    }

    /// The model, with uniform pmfs unless `model.p1` / `model.p2` are set.
    pub fn model_params(&self) -> CliResult<ModelParams> {
        self.missing(&REQUIRED_MODEL_KEYS)?;
        let delta = self.delta()?;
        let (mu1, mu2, sigma, mu0) = (
            self.number("model.mu1")?,
            self.number("model.mu2")?,
            self.number("model.sigma")?,
            self.number("model.mu0")?,
        );
        let at = |k: &str| self.entry(k).expect("checked").origin.to_string();
        if sigma <= 0.0 {
            return Err(CliError::config(format!("model.sigma ({}): must be positive, got {sigma}", at("model.sigma"))));
        }
        if mu1 < 0.0 {
            return Err(CliError::config(format!("model.mu1 ({}): must be nonnegative, got {mu1}", at("model.mu1"))));
        }
        if mu2 < mu1 {
            return Err(CliError::config(format!(
                "model.mu2 ({}): must be at least model.mu1 = {mu1}, got {mu2}",
                at("model.mu2")
            )));
        }
        let p1 = self.pmf("model.p1", delta)?;
        let p2 = self.pmf("model.p2", delta)?;
        ModelParams::new(p1, p2, mu1, mu2, sigma, mu0).map_err(|e| CliError::config(e.to_string()))
    }

    /// Monte Carlo runs actually simulated: `round(run.runs · run.scale)`.
    pub fn effective_runs(&self) -> usize {
        ((self.runs as f64 * self.scale).round() as usize).max(1)
    }

    /// Random-search samples actually drawn: `round(run.budget · run.scale)`.
    pub fn effective_budget(&self) -> usize {
        ((self.budget as f64 * self.scale).round() as usize).max(1)
    }

    /// Every set key in canonical `key=value` form, sorted by key.
    pub fn resolved(&self) -> Vec<(String, String)> {
        self.entries
            .iter()
            .map(|(k, e)| (k.to_string(), e.value.split(',').map(str::trim).collect::<Vec<_>>().join(",")))
            .collect()
    }

    /// SHA-256 over the canonical resolved config, output location excluded.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        for (k, v) in self.resolved() {
            if UNHASHED.contains(&k.as_str()) {
                continue;
            }
            h.update(k.as_bytes());
            h.update(b"=");
            h.update(v.as_bytes());
            h.update(b"\n");
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Single `#` line identifying the tool, config and seed of an output.
    pub fn metadata_line(&self, command: &str) -> String {
        let mut parts = vec![
            "# durdet".to_string(),
            format!("version={}", env!("CARGO_PKG_VERSION")),
            format!("command={command}"),
            format!("config_hash={}", &self.hash()[..16]),
            format!("seed={}", self.seed),
            format!("J={}", self.effective_runs()),
            format!("T={}", self.horizon),
        ];
        for (k, v) in self.resolved() {
            if UNHASHED.contains(&k.as_str()) || k == "run.seed" {
                continue;
            }
            parts.push(format!("{k}={v}"));
        }
        parts.join(" ")
    }

    /// Resolved config as a JSON object, for JSON outputs.
    pub fn metadata_json(&self, command: &str) -> serde_json::Value {
        let mut m = serde_json::Map::new();
        m.insert("tool".into(), "durdet".into());
        m.insert("version".into(), env!("CARGO_PKG_VERSION").into());
        m.insert("command".into(), command.into());
        m.insert("config_hash".into(), self.hash()[..16].into());
        m.insert("seed".into(), self.seed.into());
        m.insert("J".into(), self.effective_runs().into());
        m.insert("T".into(), self.horizon.into());
        let mut cfg = serde_json::Map::new();
        for (k, v) in self.resolved() {
            if !UNHASHED.contains(&k.as_str()) {
                cfg.insert(k, v.into());
            }
        }
        m.insert("config".into(), cfg.into());
        m.into()
    }

    /// Copy with one key replaced, as if given on the command line.
    pub fn with_override(&self, key: &str, value: &str) -> CliResult<Self> {
        let key = check_key(key, &Origin::Flag)?;
        let mut entries = self.entries.clone();
        entries.insert(
            key,
            Entry {
                value: value.to_string(),
                origin: Origin::Flag,
            },
        );
        Self::from_entries(entries, self.preset)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn preset_values() {
        let cfg = ConfigSources::new().flag("preset", "fig1").resolve().unwrap();
        let p = cfg.model_params().unwrap();
        assert_eq!((p.delta, p.mu1, p.mu2, p.sigma), (3, 2.0, 5.0, 10.0));
        assert_eq!(p.p1, DurationPmf::uniform(3));
        assert_eq!(cfg.alpha, 0.01);
        assert_eq!(cfg.horizon, 300);
        assert_eq!(cfg.effective_runs(), 10_000);

        let cfg = ConfigSources::new().flag("preset", "fig_mu1zero").resolve().unwrap();
        let grid = cfg.sigma_grid.clone().unwrap();
        assert_eq!((grid[0], grid[grid.len() - 1]), (0.2, 0.6));
        assert_eq!(cfg.model_params().unwrap().delta, 2);
        assert_eq!(cfg.effective_budget(), 100_000);
    }

    #[test]
    fn layering_order() {
        let text = "preset = fig1\nmodel.sigma = 12\nrun.seed = 5\n";
        let cfg = ConfigSources::new()
            .file_text("c.txt", text)
            .flag("run.seed", "9")
            .resolve()
            .unwrap();
        assert_eq!(cfg.model_params().unwrap().sigma, 12.0);
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.model_params().unwrap().mu2, 5.0);
        // a flag preset replaces the file's preset but not the file's keys
        let cfg = ConfigSources::new()
            .file_text("c.txt", text)
            .flag("preset", "fig_dishwasher")
            .resolve()
            .unwrap();
        let p = cfg.model_params().unwrap();
        assert_eq!((p.delta, p.sigma, p.mu0), (10, 12.0, 90.0));
    }

    #[test]
    fn empty_config_lists_required_keys() {
        let cfg = ConfigSources::new().resolve().unwrap();
        let err = cfg.model_params().unwrap_err().to_string();
        for k in REQUIRED_MODEL_KEYS {
            assert!(err.contains(k), "{err}");
        }
    }

    #[test]
    fn errors_name_key_and_line() {
        let err = ConfigSources::new()
            .file_text("c.txt", "model.delta = 2\n\nmodel.colour = red\n")
            .resolve()
            .unwrap_err()
            .to_string();
        assert!(err.contains("model.colour") && err.contains("line 3"), "{err}");

        let err = ConfigSources::new()
            .file_text("c.txt", "preset = fig1\n# x\nrun.alpha = 1.5\n")
            .resolve()
            .unwrap_err()
            .to_string();
        assert!(err.contains("run.alpha") && err.contains("line 3"), "{err}");

        let err = ConfigSources::new()
            .file_text("c.txt", "preset=fig1\nmodel.sigma = -1\n")
            .resolve()
            .unwrap_err()
            .to_string();
        assert!(err.contains("model.sigma") && err.contains("line 2"), "{err}");

        let err = ConfigSources::new()
            .file_text("c.txt", "model.delta=2\nmodel.p1 = 0.5\n")
            .flag("model.mu1", "0")
            .flag("model.mu2", "1")
            .flag("model.sigma", "1")
            .resolve()
            .unwrap_err()
            .to_string();
        assert!(err.contains("model.p1") && err.contains("line 2"), "{err}");

        assert!(ConfigSources::new().file_text("c", "just words\n").resolve().is_err());
        assert!(ConfigSources::new().flag("preset", "fig9").resolve().is_err());
    }

    #[test]
    fn hash_ignores_output_dir_and_formatting() {
        let a = ConfigSources::new()
            .file_text("a", "preset = fig1\nrun.sigma_grid = 1, 2\n")
            .resolve()
            .unwrap();
        let b = ConfigSources::new()
            .file_text("b", "preset=fig1\nrun.sigma_grid=1,2\noutput.dir=/tmp/x\n")
            .resolve()
            .unwrap();
        assert_eq!(a.hash(), b.hash());
        let c = a.with_override("run.seed", "1").unwrap();
        assert_ne!(a.hash(), c.hash());
        assert!(a.metadata_line("pmiss").starts_with("# durdet version="));
    }
}
