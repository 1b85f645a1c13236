//! Flat `key=value` experiment configuration with section prefixes.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use lfoeq::expert::ExpertConfig;
use lfoeq::imitation::{ImitationConfig, Mode};

/// Keys outside the `imitation.` / `expert.` network sections, with defaults.
const PLAIN_KEYS: &[(&str, &str)] = &[
    ("env", "pendulum"),
    ("seeds", "0,1,2,3,4"),
    ("modes", "gail,gaifo"),
    ("expert.n_trajectories", "20"),
    ("expert.dataset_seed", "1234"),
    ("expert.plateau_window", "20"),
    ("expert.plateau_tol", "0.01"),
    ("expert.min_cycles", "300"),
    ("imitate.dataset", ""),
    ("imitate.n_trajectories", "0"),
    ("imitate.subsample_seed", "0"),
    ("ablate.kind", "spectral_norm"),
    ("ablate.values", "true,false"),
    ("analyze.probe_candidates", "1000"),
    ("analyze.xi_states", "10000"),
    ("analyze.deltas", "0.2,0.1,0.05,0.025"),
    ("analyze.grid_points", "201"),
    ("analyze.sweep", "true"),
    ("analyze.epsilons", "0,0.01,0.02"),
    ("tabular.n_random", "50"),
    ("tabular.n_unique", "20"),
    ("tabular.pairs", "10"),
    ("tabular.seed", "0"),
];

/// Imitation fields owned by other keys (`modes`, `seeds`).
const DERIVED_FIELDS: &[&str] = &["mode", "seed"];

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    values: BTreeMap<String, String>,
}

fn network_defaults(prefix: &str, cfg: &ImitationConfig) -> Vec<(String, String)> {
    let keep_seed = prefix == "expert";
    cfg.metadata()
        .into_iter()
        .filter(|(k, _)| !DERIVED_FIELDS.contains(&k.as_str()) || (keep_seed && k == "seed"))
        .map(|(k, v)| (format!("{prefix}.{k}"), v))
        .collect()
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let mut values: BTreeMap<String, String> =
            PLAIN_KEYS.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect();
        values.extend(network_defaults("imitation", &ImitationConfig::default()));
        values.extend(network_defaults("expert", &ExpertConfig::default().rl));
        Self { values }
    }
}

impl ExperimentConfig {
    /// Parses config text; `#` starts a comment line, unknown keys are errors.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        let mut problems = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                problems.push(format!("line {}: expected key=value, got `{line}`", i + 1));
                continue;
            };
            if let Err(e) = cfg.set(k.trim(), v.trim()) {
                problems.push(format!("line {}: {e}", i + 1));
            }
        }
        if !problems.is_empty() {
            bail!(problems.join("\n"));
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("in {}", path.display()))
    }

    /// Overrides one key; the value is validated by building the typed
    /// configs it feeds.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let Some(slot) = self.values.get_mut(key) else {
            bail!("unknown key `{key}`");
        };
        let old = std::mem::replace(slot, value.to_string());
        if let Err(e) = self.check() {
            self.values.insert(key.to_string(), old);
            return Err(e.context(format!("invalid value `{value}` for `{key}`")));
        }
        Ok(())
    }

    /// Applies `key=value` overrides from the command line.
    pub fn apply_overrides(&mut self, overrides: &[String]) -> Result<()> {
        for o in overrides {
            let (k, v) = o.split_once('=').ok_or_else(|| anyhow!("override `{o}` is not key=value"))?;
            self.set(k.trim(), v.trim())?;
        }
        Ok(())
    }

    fn check(&self) -> Result<()> {
        self.imitation(Mode::Gail, 0)?;
        self.expert()?;
        self.seeds()?;
        self.modes()?;
        for key in ["analyze.deltas", "analyze.epsilons"] {
            self.floats(key)?;
        }
        for key in ["expert.n_trajectories", "imitate.n_trajectories", "analyze.probe_candidates", "analyze.xi_states", "analyze.grid_points", "tabular.n_random", "tabular.n_unique", "tabular.pairs"] {
            self.usize(key)?;
        }
        for key in ["expert.dataset_seed", "imitate.subsample_seed", "tabular.seed"] {
            self.u64(key)?;
        }
        self.bool("analyze.sweep")?;
        lfoeq::dynamics::ElModel::from_id(self.get("env"))?;
        Ok(())
    }

    pub fn get(&self, key: &str) -> &str {
        self.values.get(key).map(String::as_str).unwrap_or_else(|| panic!("unregistered key `{key}`"))
    }

    fn parse_as<T: std::str::FromStr>(&self, key: &str) -> Result<T> {
        self.get(key).parse().map_err(|_| anyhow!("`{key}` = `{}` does not parse", self.get(key)))
    }

    pub fn usize(&self, key: &str) -> Result<usize> {
        self.parse_as(key)
    }

    pub fn u64(&self, key: &str) -> Result<u64> {
        self.parse_as(key)
    }

    pub fn f64(&self, key: &str) -> Result<f64> {
        self.parse_as(key)
    }

    pub fn bool(&self, key: &str) -> Result<bool> {
        self.parse_as(key)
    }

    pub fn list(&self, key: &str) -> Vec<String> {
        self.get(key).split(',').map(str::trim).filter(|s| !s.is_empty()).map(String::from).collect()
    }

    pub fn floats(&self, key: &str) -> Result<Vec<f64>> {
        self.list(key)
            .iter()
            .map(|s| s.parse().map_err(|_| anyhow!("`{key}` entry `{s}` is not a number")))
            .collect()
    }

    pub fn seeds(&self) -> Result<Vec<u64>> {
        let seeds: Vec<u64> = self
            .list("seeds")
            .iter()
            .map(|s| s.parse().map_err(|_| anyhow!("seed `{s}` is not an integer")))
            .collect::<Result<_>>()?;
        if seeds.is_empty() {
            bail!("`seeds` is empty");
        }
        Ok(seeds)
    }

    pub fn modes(&self) -> Result<Vec<Mode>> {
        let modes: Vec<Mode> = self.list("modes").iter().map(|m| m.parse()).collect::<Result<_, _>>()?;
        if modes.is_empty() {
            bail!("`modes` is empty");
        }
        Ok(modes)
    }

    fn section(&self, prefix: &str, mut cfg: ImitationConfig) -> Result<ImitationConfig> {
        let dotted = format!("{prefix}.");
        for (k, v) in &self.values {
            if let Some(field) = k.strip_prefix(&dotted) {
                if cfg.metadata().iter().any(|(name, _)| name == field) {
                    cfg.set(field, v)?;
                }
            }
        }
        Ok(cfg)
    }

    /// Generator/discriminator settings for one run.
    pub fn imitation(&self, mode: Mode, seed: u64) -> Result<ImitationConfig> {
        let cfg = ImitationConfig {
            mode,
            seed,
            ..self.section("imitation", ImitationConfig::default())?
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn expert(&self) -> Result<ExpertConfig> {
        let rl = self.section("expert", ExpertConfig::default().rl)?;
        rl.validate()?;
        Ok(ExpertConfig {
            rl,
            plateau_window: self.usize("expert.plateau_window")?,
            plateau_tol: self.f64("expert.plateau_tol")?,
            min_cycles: self.usize("expert.min_cycles")?,
        })
    }

    /// Every key with its resolved value, sorted; parses back to `self`.
    pub fn resolved(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.values {
            out.push_str(k);
            out.push('=');
            out.push_str(v);
            out.push('\n');
        }
        out
    }
}
