//! Flat `key = value` configuration files. Lines starting with `#` are
//! comments; section structure is expressed with dotted key prefixes
//! (`dynamics.mode`, `sweep.l_values`, ...). Unknown keys are hard errors so
//! typos never silently fall back to defaults.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use econet_core::GrowthMode;

#[derive(Clone, Debug, PartialEq)]
pub enum ConfigError {
    Io(String),
    Syntax { line: usize, text: String },
    UnknownKey { line: usize, key: String },
    DuplicateKey { line: usize, key: String },
    BadValue { key: String, value: String, expected: &'static str },
    Range { key: String, constraint: &'static str },
    MissingKey { key: &'static str },
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfigError::Io(e) => write!(f, "cannot read config: {e}"),
            ConfigError::Syntax { line, text } => {
                write!(f, "line {line}: expected `key = value`, got `{text}`")
            }
            ConfigError::UnknownKey { line, key } => {
                write!(f, "line {line}: unknown key `{key}`")
            }
            ConfigError::DuplicateKey { line, key } => {
                write!(f, "line {line}: key `{key}` set twice")
            }
            ConfigError::BadValue { key, value, expected } => {
                write!(f, "key `{key}`: cannot parse `{value}` as {expected}")
            }
            ConfigError::Range { key, constraint } => {
                write!(f, "key `{key}`: {constraint}")
            }
            ConfigError::MissingKey { key } => write!(f, "required key `{key}` missing"),
        }
    }
}

impl std::error::Error for ConfigError {}

/// A fully validated single-run configuration with defaults applied.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub l: u32,
    pub c_th: f64,
    pub total_steps: u64,
    pub transient: u64,
    pub seed: u64,
    pub replicas: u32,
    pub smoothing: f64,
    pub mode: GrowthMode,
    pub t_s: u64,
    pub sample_every: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            l: 2000,
            c_th: -0.7,
            total_steps: 1_500_000,
            transient: 100_000,
            seed: 1,
            replicas: 8,
            smoothing: 1.0,
            mode: GrowthMode::Preferential,
            t_s: 10_000,
            sample_every: 100,
        }
    }
}

/// Grid axes for `sweep`.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepSpec {
    pub l_values: Vec<u32>,
    pub c_th_values: Vec<f64>,
}

/// Extra knobs for `scenario`.
#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioSpec {
    pub c_th_final: f64,
    pub l_min: u32,
    pub omega_tolerance: f64,
}

fn split_csv<T, E>(key: &str, raw: &str, parse: impl Fn(&str) -> Result<T, E>) -> Result<Vec<T>, ConfigError> {
    raw.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            parse(s).map_err(|_| ConfigError::BadValue {
                key: key.to_string(),
                value: s.to_string(),
                expected: "a number",
            })
        })
        .collect()
}

/// Raw key/value pairs with their line numbers, insertion-ordered per key.
pub struct RawConfig {
    pairs: BTreeMap<String, (usize, String)>,
}

impl RawConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut pairs = BTreeMap::new();
        for (i, raw_line) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw_line.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let Some((k, v)) = content.split_once('=') else {
                return Err(ConfigError::Syntax {
                    line,
                    text: content.to_string(),
                });
            };
            let key = k.trim().to_string();
            let value = v.trim().to_string();
            if pairs.insert(key.clone(), (line, value)).is_some() {
                return Err(ConfigError::DuplicateKey { line, key });
            }
        }
        Ok(RawConfig { pairs })
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::Io(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    fn take(&mut self, key: &str) -> Option<String> {
        self.pairs.remove(key).map(|(_, v)| v)
    }

    fn take_parse<T: std::str::FromStr>(
        &mut self,
        key: &str,
        expected: &'static str,
    ) -> Result<Option<T>, ConfigError> {
        match self.take(key) {
            None => Ok(None),
            Some(v) => v.parse::<T>().map(Some).map_err(|_| ConfigError::BadValue {
                key: key.to_string(),
                value: v,
                expected,
            }),
        }
    }

    /// Every remaining key is unknown; report the first by line number.
    fn finish(self) -> Result<(), ConfigError> {
        if let Some((key, (line, _))) = self.pairs.into_iter().min_by_key(|(_, (l, _))| *l) {
            return Err(ConfigError::UnknownKey { line, key });
        }
        Ok(())
    }
}

fn build_run(raw: &mut RawConfig) -> Result<RunConfig, ConfigError> {
    let d = RunConfig::default();
    let cfg = RunConfig {
        l: raw.take_parse("l", "a positive integer")?.unwrap_or(d.l),
        c_th: raw.take_parse("c_th", "a real number")?.unwrap_or(d.c_th),
        total_steps: raw
            .take_parse("total_steps", "a positive integer")?
            .unwrap_or(d.total_steps),
        transient: raw
            .take_parse("transient", "a non-negative integer")?
            .unwrap_or(d.transient),
        seed: raw.take_parse("seed", "a 64-bit integer")?.unwrap_or(d.seed),
        replicas: raw
            .take_parse("replicas", "a positive integer")?
            .unwrap_or(d.replicas),
        smoothing: raw
            .take_parse("dynamics.smoothing", "a real number")?
            .unwrap_or(d.smoothing),
        mode: match raw.take("dynamics.mode") {
            None => d.mode,
            Some(v) => match v.as_str() {
                "preferential" => GrowthMode::Preferential,
                "uniform" => GrowthMode::Uniform,
                _ => {
                    return Err(ConfigError::BadValue {
                        key: "dynamics.mode".into(),
                        value: v,
                        expected: "`preferential` or `uniform`",
                    })
                }
            },
        },
        t_s: raw
            .take_parse("measure.t_s", "a positive integer")?
            .unwrap_or(d.t_s),
        sample_every: raw
            .take_parse("measure.sample_every", "a positive integer")?
            .unwrap_or(d.sample_every),
    };
    validate_run(&cfg)?;
    Ok(cfg)
}

fn validate_run(cfg: &RunConfig) -> Result<(), ConfigError> {
    if cfg.l < 2 {
        return Err(ConfigError::Range { key: "l".into(), constraint: "neighbourhood size must be at least 2" });
    }
    if !(cfg.c_th > -1.0 && cfg.c_th < 0.0) {
        return Err(ConfigError::Range {
            key: "c_th".into(),
            constraint: "minimum capital level must lie in the open interval (-1, 0)",
        });
    }
    if cfg.transient >= cfg.total_steps {
        return Err(ConfigError::Range {
            key: "transient".into(),
            constraint: "transient must be smaller than total_steps",
        });
    }
    if cfg.replicas < 1 {
        return Err(ConfigError::Range { key: "replicas".into(), constraint: "at least one replica is required" });
    }
    if cfg.smoothing <= 0.0 || !cfg.smoothing.is_finite() {
        return Err(ConfigError::Range {
            key: "dynamics.smoothing".into(),
            constraint: "attachment smoothing must be a positive finite real",
        });
    }
    if cfg.t_s < 1 || cfg.sample_every < 1 {
        return Err(ConfigError::Range {
            key: "measure.t_s".into(),
            constraint: "averaging window and sampling stride must be at least 1",
        });
    }
    if cfg.t_s >= cfg.total_steps {
        return Err(ConfigError::Range {
            key: "measure.t_s".into(),
            constraint: "averaging window must be shorter than the run",
        });
    }
    Ok(())
}

/// Parse a single-run configuration; every key must be known.
pub fn parse_run(text: &str) -> Result<RunConfig, ConfigError> {
    let mut raw = RawConfig::parse(text)?;
    let cfg = build_run(&mut raw)?;
    raw.finish()?;
    Ok(cfg)
}

/// Parse a sweep configuration: a base run plus the two grid axes.
pub fn parse_sweep(text: &str) -> Result<(RunConfig, SweepSpec), ConfigError> {
    let mut raw = RawConfig::parse(text)?;
    let base = build_run(&mut raw)?;
    let l_raw = raw.take("sweep.l_values").ok_or(ConfigError::MissingKey { key: "sweep.l_values" })?;
    let c_raw = raw
        .take("sweep.c_th_values")
        .ok_or(ConfigError::MissingKey { key: "sweep.c_th_values" })?;
    raw.finish()?;
    let l_values = split_csv("sweep.l_values", &l_raw, str::parse::<u32>)?;
    let c_th_values = split_csv("sweep.c_th_values", &c_raw, str::parse::<f64>)?;
    if l_values.is_empty() || c_th_values.is_empty() {
        return Err(ConfigError::Range {
            key: "sweep.l_values".into(),
            constraint: "both sweep axes need at least one value",
        });
    }
    for &l in &l_values {
        if l < 2 {
            return Err(ConfigError::Range { key: "sweep.l_values".into(), constraint: "neighbourhood size must be at least 2" });
        }
    }
    for &c in &c_th_values {
        if !(c > -1.0 && c < 0.0) {
            return Err(ConfigError::Range {
                key: "sweep.c_th_values".into(),
                constraint: "minimum capital level must lie in the open interval (-1, 0)",
            });
        }
    }
    Ok((base, SweepSpec { l_values, c_th_values }))
}

/// Parse a scenario configuration: the reference state plus the final
/// threshold and the search bracket for the constant-business-level leg.
pub fn parse_scenario(text: &str) -> Result<(RunConfig, ScenarioSpec), ConfigError> {
    let mut raw = RawConfig::parse(text)?;
    let base = build_run(&mut raw)?;
    let c_th_final: f64 = raw
        .take_parse("scenario.c_th_final", "a real number")?
        .ok_or(ConfigError::MissingKey { key: "scenario.c_th_final" })?;
    let l_min: u32 = raw
        .take_parse("scenario.l_min", "a positive integer")?
        .unwrap_or(base.l / 4)
        .max(2);
    let omega_tolerance: f64 = raw
        .take_parse("scenario.omega_tolerance", "a real number")?
        .unwrap_or(0.02);
    raw.finish()?;
    if !(c_th_final > -1.0 && c_th_final < 0.0) {
        return Err(ConfigError::Range {
            key: "scenario.c_th_final".into(),
            constraint: "minimum capital level must lie in the open interval (-1, 0)",
        });
    }
    if c_th_final < base.c_th {
        return Err(ConfigError::Range {
            key: "scenario.c_th_final".into(),
            constraint: "the final capital level must not be below the initial one",
        });
    }
    if l_min > base.l {
        return Err(ConfigError::Range {
            key: "scenario.l_min".into(),
            constraint: "search bracket must start at or below the reference L",
        });
    }
    if !(omega_tolerance > 0.0 && omega_tolerance < 1.0) {
        return Err(ConfigError::Range {
            key: "scenario.omega_tolerance".into(),
            constraint: "relative tolerance must lie in (0, 1)",
        });
    }
    Ok((base, ScenarioSpec { c_th_final, l_min, omega_tolerance }))
}

fn mode_str(mode: GrowthMode) -> &'static str {
    match mode {
        GrowthMode::Preferential => "preferential",
        GrowthMode::Uniform => "uniform",
    }
}

/// The effective configuration as re-parseable text. Every knob appears
/// with its resolved value, so a run is reproducible from its output
/// directory alone.
pub fn emit_run(cfg: &RunConfig) -> String {
    let mut s = String::new();
    s.push_str(&format!("l = {}\n", cfg.l));
    s.push_str(&format!("c_th = {}\n", cfg.c_th));
    s.push_str(&format!("total_steps = {}\n", cfg.total_steps));
    s.push_str(&format!("transient = {}\n", cfg.transient));
    s.push_str(&format!("seed = {}\n", cfg.seed));
    s.push_str(&format!("replicas = {}\n", cfg.replicas));
    s.push_str(&format!("dynamics.smoothing = {}\n", cfg.smoothing));
    s.push_str(&format!("dynamics.mode = {}\n", mode_str(cfg.mode)));
    s.push_str(&format!("measure.t_s = {}\n", cfg.t_s));
    s.push_str(&format!("measure.sample_every = {}\n", cfg.sample_every));
    s
}

pub fn emit_sweep(cfg: &RunConfig, spec: &SweepSpec) -> String {
    let mut s = emit_run(cfg);
    let ls: Vec<String> = spec.l_values.iter().map(u32::to_string).collect();
    let cs: Vec<String> = spec.c_th_values.iter().map(f64::to_string).collect();
    s.push_str(&format!("sweep.l_values = {}\n", ls.join(", ")));
    s.push_str(&format!("sweep.c_th_values = {}\n", cs.join(", ")));
    s
}

pub fn emit_scenario(cfg: &RunConfig, spec: &ScenarioSpec) -> String {
    let mut s = emit_run(cfg);
    s.push_str(&format!("scenario.c_th_final = {}\n", spec.c_th_final));
    s.push_str(&format!("scenario.l_min = {}\n", spec.l_min));
    s.push_str(&format!("scenario.omega_tolerance = {}\n", spec.omega_tolerance));
    s
}

/// FNV-1a over the effective config text; the hash stamped into output
/// headers so files can be traced back to their exact configuration.
pub fn config_hash(text: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in text.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}
