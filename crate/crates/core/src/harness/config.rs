//! Experiment configuration files.
//!
//! The format is flat `key = value` text. Keys are dotted (`topology.kind`);
//! a `[section]` line prefixes the keys that follow it, so
//!
//! ```text
//! [topology]
//! kind = geometric
//! sensors = 15
//! ```
//!
//! is the same as `topology.kind = geometric` and `topology.sensors = 15`.
//! `#` starts a comment. Unknown or repeated keys are errors.
//!
//! | key | values | default |
//! |-----|--------|---------|
//! | `topology.kind` | `geometric`, `edge_list`, `complete`, `ring`, `path` | `geometric` |
//! | `topology.sensors` | J | 15 |
//! | `topology.range` | communication range | 0.3 |
//! | `topology.seed` | graph seed | 1 |
//! | `topology.path` | edge-list file, relative to the config file | none |
//! | `scenario.kind` | `reference`, `iid` | `reference` |
//! | `scenario.seed` | seed for the per-sensor profiles | 1 |
//! | `scenario.p` | dimension (iid only) | 4 |
//! | `scenario.regressor` | `identity`, `scaled:<v>`, `diag:<min>:<max>` (iid only) | `identity` |
//! | `scenario.sigma2_eps` | sensing-noise variance (iid only) | 1e-3 |
//! | `scenario.sigma2_eps_profile` | `constant`, `uniform` (iid only) | `constant` |
//! | `scenario.sigma2_eta` | link-noise variance (iid only) | 0.1 |
//! | `algorithm` | `drls_ama`, `drls_admom`, `local_rls`, `centralized` | `drls_ama` |
//! | `lambda`, `c`, `delta` | algorithm parameters | 0.95, 0.1, 100 |
//! | `horizon` | T | 2000 |
//! | `runs` | ensemble size | 200 |
//! | `burn_in` | steps excluded from steady-state statistics | T/2 |
//! | `window` | steady-state averaging window | T/10 |
//! | `link_noise` | `on`, `off` | `on` |
//! | `master_seed` | ensemble seed | 1 |

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::signalgen::{CovarianceSpec, VarianceProfile};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("{key}: {msg}")]
    Value { key: String, msg: String },
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, ConfigError>;

#[derive(Debug, Clone, PartialEq)]
pub enum TopologySpec {
    Geometric { sensors: usize, range: f64, seed: u64 },
    EdgeList(PathBuf),
    Complete(usize),
    Ring(usize),
    Path(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub enum ScenarioSpec {
    Reference {
        seed: u64,
    },
    Iid {
        p: usize,
        regressor: CovarianceSpec,
        sensing_noise: VarianceProfile,
        sigma2_eta: f64,
        seed: u64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algorithm {
    DrlsAma,
    DrlsAdmom,
    LocalRls,
    Centralized,
}

impl Algorithm {
    pub fn name(&self) -> &'static str {
        match self {
            Algorithm::DrlsAma => "drls_ama",
            Algorithm::DrlsAdmom => "drls_admom",
            Algorithm::LocalRls => "local_rls",
            Algorithm::Centralized => "centralized",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub topology: TopologySpec,
    pub scenario: ScenarioSpec,
    pub algorithm: Algorithm,
    pub lambda: f64,
    pub c: f64,
    pub delta: f64,
    pub horizon: usize,
    pub runs: usize,
    pub burn_in: usize,
    pub window: usize,
    pub link_noise: bool,
    pub master_seed: u64,
}

impl Default for ExperimentConfig {
    /// The reference network experiment: 15 sensors, range 0.3, AR data.
    fn default() -> Self {
        Self {
            topology: TopologySpec::Geometric { sensors: 15, range: 0.3, seed: 1 },
            scenario: ScenarioSpec::Reference { seed: 1 },
            algorithm: Algorithm::DrlsAma,
            lambda: 0.95,
            c: 0.1,
            delta: 100.0,
            horizon: 2000,
            runs: 200,
            burn_in: 1000,
            window: 200,
            link_noise: true,
            master_seed: 1,
        }
    }
}

const KEYS: &[&str] = &[
    "topology.kind",
    "topology.sensors",
    "topology.range",
    "topology.seed",
    "topology.path",
    "scenario.kind",
    "scenario.seed",
    "scenario.p",
    "scenario.regressor",
    "scenario.sigma2_eps",
    "scenario.sigma2_eps_profile",
    "scenario.sigma2_eta",
    "algorithm",
    "lambda",
    "c",
    "delta",
    "horizon",
    "runs",
    "burn_in",
    "window",
    "link_noise",
    "master_seed",
];

/// Splits the text into `key → (value, line)` pairs.
fn tokenize(text: &str) -> Result<BTreeMap<String, (String, usize)>> {
    let mut out = BTreeMap::new();
    let mut section = String::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        if let Some(rest) = body.strip_prefix('[') {
            let name = rest
                .strip_suffix(']')
                .ok_or_else(|| ConfigError::Syntax { line, msg: "unterminated section header".into() })?
                .trim();
            if name.is_empty() || !name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
                return Err(ConfigError::Syntax { line, msg: format!("bad section name '{name}'") });
            }
            section = format!("{name}.");
            continue;
        }
        let (key, value) = body
            .split_once('=')
            .ok_or_else(|| ConfigError::Syntax { line, msg: "expected 'key = value'".into() })?;
        let key = format!("{section}{}", key.trim());
        let value = value.trim().trim_matches('"').to_string();
        if !KEYS.contains(&key.as_str()) {
            return Err(ConfigError::Syntax { line, msg: format!("unknown key '{key}'") });
        }
        if value.is_empty() {
            return Err(ConfigError::Syntax { line, msg: format!("empty value for '{key}'") });
        }
        if out.insert(key.clone(), (value, line)).is_some() {
            return Err(ConfigError::Syntax { line, msg: format!("duplicate key '{key}'") });
        }
    }
    Ok(out)
}

struct Values {
    map: BTreeMap<String, (String, usize)>,
}

impl Values {
    fn raw(&self, key: &str) -> Option<&str> {
        self.map.get(key).map(|(v, _)| v.as_str())
    }

    fn parse<T: std::str::FromStr>(&self, key: &str, default: T) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        match self.raw(key) {
            None => Ok(default),
            Some(v) => v.parse().map_err(|e: T::Err| ConfigError::Value { key: key.into(), msg: format!("'{v}': {e}") }),
        }
    }

    fn parse_opt<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        match self.raw(key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|e: T::Err| ConfigError::Value { key: key.into(), msg: format!("'{v}': {e}") }),
        }
    }

    /// Rejects keys that were supplied but have no meaning for the chosen kind.
    fn forbid(&self, keys: &[&str], context: &str) -> Result<()> {
        for k in keys {
            if self.map.contains_key(*k) {
                return Err(ConfigError::Value { key: (*k).into(), msg: format!("not used with {context}") });
            }
        }
        Ok(())
    }
}

fn value_err(key: &str, msg: impl Into<String>) -> ConfigError {
    ConfigError::Value { key: key.into(), msg: msg.into() }
}

fn parse_regressor(v: &str) -> Result<CovarianceSpec> {
    let key = "scenario.regressor";
    let num = |s: &str| s.trim().parse::<f64>().map_err(|e| value_err(key, format!("'{s}': {e}")));
    let parts: Vec<&str> = v.split(':').collect();
    match parts.as_slice() {
        ["identity"] => Ok(CovarianceSpec::Identity),
        ["scaled", s] => {
            let s = num(s)?;
            if !(s > 0.0 && s.is_finite()) {
                return Err(value_err(key, "scale must be positive"));
            }
            Ok(CovarianceSpec::Scaled(s))
        }
        ["diag", lo, hi] => {
            let (min, max) = (num(lo)?, num(hi)?);
            if !(min > 0.0 && max >= min && max.is_finite()) {
                return Err(value_err(key, "need 0 < min <= max"));
            }
            Ok(CovarianceSpec::RandomDiagonal { min, max })
        }
        _ => Err(value_err(key, format!("'{v}' is not identity, scaled:<v> or diag:<min>:<max>"))),
    }
}

fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v {
        "on" | "true" | "yes" | "1" => Ok(true),
        "off" | "false" | "no" | "0" => Ok(false),
        _ => Err(value_err(key, format!("'{v}' is not on/off"))),
    }
}

impl ExperimentConfig {
    /// Parses configuration text. Relative edge-list paths are resolved
    /// against `base_dir`.
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self> {
        let vals = Values { map: tokenize(text)? };
        let d = Self::default();

        let topology = match vals.raw("topology.kind").unwrap_or("geometric") {
            "geometric" => {
                vals.forbid(&["topology.path"], "topology.kind = geometric")?;
                TopologySpec::Geometric {
                    sensors: vals.parse("topology.sensors", 15)?,
                    range: vals.parse("topology.range", 0.3)?,
                    seed: vals.parse("topology.seed", 1)?,
                }
            }
            "edge_list" => {
                vals.forbid(&["topology.sensors", "topology.range", "topology.seed"], "topology.kind = edge_list")?;
                let path = vals
                    .raw("topology.path")
                    .ok_or_else(|| value_err("topology.path", "required for topology.kind = edge_list"))?;
                TopologySpec::EdgeList(base_dir.join(path))
            }
            kind @ ("complete" | "ring" | "path") => {
                vals.forbid(&["topology.range", "topology.seed", "topology.path"], "deterministic topologies")?;
                let j = vals.parse("topology.sensors", 15)?;
                match kind {
                    "complete" => TopologySpec::Complete(j),
                    "ring" => TopologySpec::Ring(j),
                    _ => TopologySpec::Path(j),
                }
            }
            other => return Err(value_err("topology.kind", format!("unknown kind '{other}'"))),
        };

        let iid_keys = [
            "scenario.p",
            "scenario.regressor",
            "scenario.sigma2_eps",
            "scenario.sigma2_eps_profile",
            "scenario.sigma2_eta",
        ];
        let scenario_seed = vals.parse("scenario.seed", 1)?;
        let scenario = match vals.raw("scenario.kind").unwrap_or("reference") {
            "reference" => {
                vals.forbid(&iid_keys, "scenario.kind = reference")?;
                ScenarioSpec::Reference { seed: scenario_seed }
            }
            "iid" => {
                let sigma2_eps: f64 = vals.parse("scenario.sigma2_eps", 1e-3)?;
                if !(sigma2_eps >= 0.0 && sigma2_eps.is_finite()) {
                    return Err(value_err("scenario.sigma2_eps", "must be non-negative"));
                }
                let sensing_noise = match vals.raw("scenario.sigma2_eps_profile").unwrap_or("constant") {
                    "constant" => VarianceProfile::Constant(sigma2_eps),
                    "uniform" => VarianceProfile::ScaledUniform(sigma2_eps),
                    other => return Err(value_err("scenario.sigma2_eps_profile", format!("unknown profile '{other}'"))),
                };
                let sigma2_eta: f64 = vals.parse("scenario.sigma2_eta", 0.1)?;
                if !(sigma2_eta >= 0.0 && sigma2_eta.is_finite()) {
                    return Err(value_err("scenario.sigma2_eta", "must be non-negative"));
                }
                ScenarioSpec::Iid {
                    p: vals.parse("scenario.p", 4)?,
                    regressor: parse_regressor(vals.raw("scenario.regressor").unwrap_or("identity"))?,
                    sensing_noise,
                    sigma2_eta,
                    seed: scenario_seed,
                }
            }
            other => return Err(value_err("scenario.kind", format!("unknown kind '{other}'"))),
        };

        let algorithm = match vals.raw("algorithm").unwrap_or("drls_ama") {
            "drls_ama" => Algorithm::DrlsAma,
            "drls_admom" => Algorithm::DrlsAdmom,
            "local_rls" => Algorithm::LocalRls,
            "centralized" => Algorithm::Centralized,
            other => return Err(value_err("algorithm", format!("unknown algorithm '{other}'"))),
        };
        let horizon: usize = vals.parse("horizon", d.horizon)?;
        let burn_in = vals.parse_opt("burn_in")?.unwrap_or(horizon / 2);
        let window = vals.parse_opt("window")?.unwrap_or((horizon / 10).max(1));
        let cfg = Self {
            topology,
            scenario,
            algorithm,
            lambda: vals.parse("lambda", d.lambda)?,
            c: vals.parse("c", d.c)?,
            delta: vals.parse("delta", d.delta)?,
            horizon,
            runs: vals.parse("runs", d.runs)?,
            burn_in,
            window,
            link_noise: match vals.raw("link_noise") {
                None => true,
                Some(v) => parse_bool("link_noise", v)?,
            },
            master_seed: vals.parse("master_seed", d.master_seed)?,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads and parses a configuration file.
    pub fn from_file(path: &Path) -> std::result::Result<Self, ConfigFileError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigFileError::Io { path: path.to_path_buf(), msg: e.to_string() })?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        Self::parse(&text, base).map_err(|e| ConfigFileError::Parse { path: path.to_path_buf(), source: e })
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(ConfigError::Invalid(m));
        if !(self.lambda > 0.0 && self.lambda <= 1.0) {
            return bad(format!("lambda = {} outside (0, 1]", self.lambda));
        }
        let uses_c = matches!(self.algorithm, Algorithm::DrlsAma | Algorithm::DrlsAdmom);
        if uses_c && !(self.c > 0.0 && self.c.is_finite()) {
            return bad(format!("c = {} must be positive", self.c));
        }
        if !(self.delta > 0.0 && self.delta.is_finite()) {
            return bad(format!("delta = {} must be positive", self.delta));
        }
        if self.horizon == 0 {
            return bad("horizon must be at least 1".into());
        }
        if self.runs == 0 {
            return bad("runs must be at least 1".into());
        }
        if self.burn_in >= self.horizon {
            return bad(format!("burn_in = {} must be smaller than horizon = {}", self.burn_in, self.horizon));
        }
        if self.window == 0 || self.window > self.horizon - self.burn_in {
            return bad(format!(
                "window = {} must lie in 1..={} (horizon − burn_in)",
                self.window,
                self.horizon - self.burn_in
            ));
        }
        match &self.topology {
            TopologySpec::Geometric { sensors, range, .. } => {
                if *sensors == 0 || !(*range > 0.0 && range.is_finite()) {
                    return bad("geometric topology needs sensors >= 1 and range > 0".into());
                }
            }
            TopologySpec::Complete(j) | TopologySpec::Ring(j) | TopologySpec::Path(j) => {
                if *j == 0 {
                    return bad("topology needs at least one sensor".into());
                }
            }
            TopologySpec::EdgeList(_) => {}
        }
        if let ScenarioSpec::Iid { p, .. } = &self.scenario {
            if *p == 0 {
                return bad("scenario.p must be at least 1".into());
            }
        }
        Ok(())
    }

    /// Serializes back into the file format. `parse(to_text())` round-trips.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let mut kv = |k: &str, v: String| {
            out.push_str(k);
            out.push_str(" = ");
            out.push_str(&v);
            out.push('\n');
        };
        match &self.topology {
            TopologySpec::Geometric { sensors, range, seed } => {
                kv("topology.kind", "geometric".into());
                kv("topology.sensors", sensors.to_string());
                kv("topology.range", range.to_string());
                kv("topology.seed", seed.to_string());
            }
            TopologySpec::EdgeList(path) => {
                kv("topology.kind", "edge_list".into());
                kv("topology.path", path.display().to_string());
            }
            TopologySpec::Complete(j) => {
                kv("topology.kind", "complete".into());
                kv("topology.sensors", j.to_string());
            }
            TopologySpec::Ring(j) => {
                kv("topology.kind", "ring".into());
                kv("topology.sensors", j.to_string());
            }
            TopologySpec::Path(j) => {
                kv("topology.kind", "path".into());
                kv("topology.sensors", j.to_string());
            }
        }
        match &self.scenario {
            ScenarioSpec::Reference { seed } => {
                kv("scenario.kind", "reference".into());
                kv("scenario.seed", seed.to_string());
            }
            ScenarioSpec::Iid { p, regressor, sensing_noise, sigma2_eta, seed } => {
                kv("scenario.kind", "iid".into());
                kv("scenario.seed", seed.to_string());
                kv("scenario.p", p.to_string());
                let reg = match regressor {
                    CovarianceSpec::Identity => "identity".to_string(),
                    CovarianceSpec::Scaled(s) => format!("scaled:{s}"),
                    CovarianceSpec::RandomDiagonal { min, max } => format!("diag:{min}:{max}"),
                    CovarianceSpec::Explicit(_) => "identity".to_string(),
                };
                kv("scenario.regressor", reg);
                let (profile, v) = match sensing_noise {
                    VarianceProfile::Constant(v) => ("constant", v),
                    VarianceProfile::ScaledUniform(v) => ("uniform", v),
                };
                kv("scenario.sigma2_eps", v.to_string());
                kv("scenario.sigma2_eps_profile", profile.into());
                kv("scenario.sigma2_eta", sigma2_eta.to_string());
            }
        }
        kv("algorithm", self.algorithm.name().into());
        kv("lambda", self.lambda.to_string());
        kv("c", self.c.to_string());
        kv("delta", self.delta.to_string());
        kv("horizon", self.horizon.to_string());
        kv("runs", self.runs.to_string());
        kv("burn_in", self.burn_in.to_string());
        kv("window", self.window.to_string());
        kv("link_noise", if self.link_noise { "on" } else { "off" }.into());
        kv("master_seed", self.master_seed.to_string());
        out
    }
}

#[derive(Debug, Error)]
pub enum ConfigFileError {
    #[error("cannot read config file {}: {msg}", path.display())]
    Io { path: PathBuf, msg: String },
    #[error("config file {}: {source}", path.display())]
    Parse { path: PathBuf, source: ConfigError },
}
