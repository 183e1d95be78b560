//! Run configuration: a flat `key = value` file with dotted keys.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

fn invalid(msg: impl Into<String>) -> ConfigError {
    ConfigError::Invalid(msg.into())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Spacing {
    Uniform,
    Geometric,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitialKind {
    Bump,
    Indicator,
    Table,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunKindConfig {
    Model,
    Linear,
    Full,
    Remainder,
    Sweep,
}

impl fmt::Display for Spacing {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Spacing::Uniform => "uniform",
            Spacing::Geometric => "geometric",
        })
    }
}

impl fmt::Display for InitialKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            InitialKind::Bump => "bump",
            InitialKind::Indicator => "indicator",
            InitialKind::Table => "table",
        })
    }
}

impl fmt::Display for RunKindConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RunKindConfig::Model => "model",
            RunKindConfig::Linear => "linear",
            RunKindConfig::Full => "full",
            RunKindConfig::Remainder => "remainder",
            RunKindConfig::Sweep => "sweep",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridConfig {
    pub r_max: f64,
    pub n_r: usize,
    pub spacing: Spacing,
    pub n_theta: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimeConfig {
    /// Model step as a fraction of `α`.
    pub dt_factor: f64,
    /// Final time is `horizon_factor · α · |ln α|`.
    pub horizon_factor: f64,
    pub sample_count: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InitialConfig {
    pub kind: InitialKind,
    pub center: f64,
    /// Half-width of the support for bump and indicator data.
    pub width: f64,
    pub table_path: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub alpha: f64,
    pub delta: f64,
    pub grid: GridConfig,
    pub time: TimeConfig,
    pub initial: InitialConfig,
    pub kind: RunKindConfig,
    pub output_dir: PathBuf,
    pub sweep_alphas: Vec<f64>,
}

impl RunConfig {
    /// Defaults for everything except `alpha`.
    pub fn with_alpha(alpha: f64) -> Self {
        RunConfig {
            alpha,
            delta: 1.0,
            grid: GridConfig { r_max: 8.0, n_r: 512, spacing: Spacing::Geometric, n_theta: 256 },
            time: TimeConfig { dt_factor: 0.02, horizon_factor: 0.1, sample_count: 200 },
            initial: InitialConfig { kind: InitialKind::Bump, center: 2.0, width: 1.0, table_path: None },
            kind: RunKindConfig::Model,
            output_dir: PathBuf::from("output"),
            sweep_alphas: vec![0.4, 0.2, 0.1],
        }
    }

    pub fn r_min(&self) -> f64 {
        match self.grid.spacing {
            Spacing::Geometric => 1e-3 * self.grid.r_max,
            Spacing::Uniform => 0.0,
        }
    }

    /// Every setting as `key = value` text, in key order.
    pub fn resolved(&self) -> BTreeMap<&'static str, String> {
        let mut m = BTreeMap::new();
        m.insert("alpha", fmt_f64(self.alpha));
        m.insert("delta", fmt_f64(self.delta));
        m.insert("grid.r_max", fmt_f64(self.grid.r_max));
        m.insert("grid.n_r", self.grid.n_r.to_string());
        m.insert("grid.spacing", self.grid.spacing.to_string());
        m.insert("grid.n_theta", self.grid.n_theta.to_string());
        m.insert("time.dt_factor", fmt_f64(self.time.dt_factor));
        m.insert("time.horizon_factor", fmt_f64(self.time.horizon_factor));
        m.insert("time.sample_count", self.time.sample_count.to_string());
        m.insert("initial.kind", self.initial.kind.to_string());
        m.insert("initial.center", fmt_f64(self.initial.center));
        m.insert("initial.width", fmt_f64(self.initial.width));
        if let Some(p) = &self.initial.table_path {
            m.insert("initial.table_path", p.display().to_string());
        }
        m.insert("run.kind", self.kind.to_string());
        m.insert("output.dir", self.output_dir.display().to_string());
        m.insert("sweep.alphas", self.sweep_alphas.iter().map(|a| fmt_f64(*a)).collect::<Vec<_>>().join(","));
        m
    }
}

fn fmt_f64(v: f64) -> String {
    format!("{v}")
}

const KEYS: &[&str] = &[
    "alpha",
    "delta",
    "grid.r_max",
    "grid.n_r",
    "grid.spacing",
    "grid.n_theta",
    "time.dt_factor",
    "time.horizon_factor",
    "time.sample_count",
    "initial.kind",
    "initial.center",
    "initial.width",
    "initial.amplitude",
    "initial.table_path",
    "run.kind",
    "output.dir",
    "sweep.alphas",
];

struct Entry {
    line: usize,
    value: String,
}

/// Splits the text into `key -> (line, value)`.
fn tokenize(text: &str) -> Result<BTreeMap<String, Entry>, ConfigError> {
    let mut out = BTreeMap::new();
    for (k, raw) in text.lines().enumerate() {
        let line = k + 1;
        let body = match raw.find('#') {
            Some(p) => &raw[..p],
            None => raw,
        }
        .trim();
        if body.is_empty() {
            continue;
        }
        let (key, value) =
            body.split_once('=').ok_or_else(|| ConfigError::Parse { line, message: "expected `key = value`".into() })?;
        let key = key.trim();
        if key.is_empty() || key.contains(char::is_whitespace) {
            return Err(ConfigError::Parse { line, message: format!("malformed key `{key}`") });
        }
        if !KEYS.contains(&key) {
            return Err(ConfigError::Parse { line, message: format!("unknown key `{key}`") });
        }
        let mut value = value.trim();
        if value.len() >= 2 && value.starts_with('"') && value.ends_with('"') {
            value = &value[1..value.len() - 1];
        }
        if value.is_empty() {
            return Err(ConfigError::Parse { line, message: format!("missing value for `{key}`") });
        }
        if let Some(prev) = out.insert(key.to_string(), Entry { line, value: value.to_string() }) {
            return Err(ConfigError::Parse { line, message: format!("`{key}` already set on line {}", prev.line) });
        }
    }
    Ok(out)
}

fn number(e: &Entry, key: &str) -> Result<f64, ConfigError> {
    let v: f64 = e
        .value
        .parse()
        .map_err(|_| ConfigError::Parse { line: e.line, message: format!("`{key}` expects a number, got `{}`", e.value) })?;
    if !v.is_finite() {
        return Err(ConfigError::Parse { line: e.line, message: format!("`{key}` must be finite") });
    }
    Ok(v)
}

fn count(e: &Entry, key: &str) -> Result<usize, ConfigError> {
    e.value.parse().map_err(|_| ConfigError::Parse {
        line: e.line,
        message: format!("`{key}` expects a nonnegative integer, got `{}`", e.value),
    })
}

fn choice<T: Copy>(e: &Entry, key: &str, options: &[(&str, T)]) -> Result<T, ConfigError> {
    options.iter().find(|(name, _)| *name == e.value).map(|&(_, v)| v).ok_or_else(|| {
        let names: Vec<&str> = options.iter().map(|(n, _)| *n).collect();
        ConfigError::Parse { line: e.line, message: format!("`{key}` must be one of {}, got `{}`", names.join("|"), e.value) }
    })
}

/// Parses and validates configuration text. Relative table paths are taken
/// relative to `base`.
pub fn parse_str(text: &str, base: &Path) -> Result<RunConfig, ConfigError> {
    let t = tokenize(text)?;
    let alpha_entry = t.get("alpha").ok_or_else(|| invalid("`alpha` is required"))?;
    let mut c = RunConfig::with_alpha(number(alpha_entry, "alpha")?);

    match (t.get("delta"), t.get("initial.amplitude")) {
        (Some(d), Some(a)) if number(d, "delta")? != number(a, "initial.amplitude")? => {
            return Err(ConfigError::Parse {
                line: a.line,
                message: format!("`initial.amplitude` conflicts with `delta` on line {}", d.line),
            });
        }
        (Some(e), _) => c.delta = number(e, "delta")?,
        (None, Some(e)) => c.delta = number(e, "initial.amplitude")?,
        (None, None) => {}
    }
    if let Some(e) = t.get("grid.r_max") {
        c.grid.r_max = number(e, "grid.r_max")?;
    }
    if let Some(e) = t.get("grid.n_r") {
        c.grid.n_r = count(e, "grid.n_r")?;
    }
    if let Some(e) = t.get("grid.spacing") {
        c.grid.spacing = choice(e, "grid.spacing", &[("geometric", Spacing::Geometric), ("uniform", Spacing::Uniform)])?;
    }
    if let Some(e) = t.get("grid.n_theta") {
        c.grid.n_theta = count(e, "grid.n_theta")?;
    }
    if let Some(e) = t.get("time.dt_factor") {
        c.time.dt_factor = number(e, "time.dt_factor")?;
    }
    if let Some(e) = t.get("time.horizon_factor") {
        c.time.horizon_factor = number(e, "time.horizon_factor")?;
    }
    if let Some(e) = t.get("time.sample_count") {
        c.time.sample_count = count(e, "time.sample_count")?;
    }
    if let Some(e) = t.get("initial.kind") {
        c.initial.kind = choice(
            e,
            "initial.kind",
            &[("bump", InitialKind::Bump), ("indicator", InitialKind::Indicator), ("table", InitialKind::Table)],
        )?;
    }
    if let Some(e) = t.get("initial.center") {
        c.initial.center = number(e, "initial.center")?;
    }
    if let Some(e) = t.get("initial.width") {
        c.initial.width = number(e, "initial.width")?;
    }
    if let Some(e) = t.get("initial.table_path") {
        c.initial.table_path = Some(base.join(&e.value));
    }
    if let Some(e) = t.get("run.kind") {
        c.kind = choice(
            e,
            "run.kind",
            &[
                ("model", RunKindConfig::Model),
                ("linear", RunKindConfig::Linear),
                ("full", RunKindConfig::Full),
                ("remainder", RunKindConfig::Remainder),
                ("sweep", RunKindConfig::Sweep),
            ],
        )?;
    }
    if let Some(e) = t.get("output.dir") {
        c.output_dir = PathBuf::from(&e.value);
    }
    if let Some(e) = t.get("sweep.alphas") {
        c.sweep_alphas = e
            .value
            .split(',')
            .map(|s| {
                let v: f64 = s.trim().parse().map_err(|_| ConfigError::Parse {
                    line: e.line,
                    message: format!("`sweep.alphas` expects comma-separated numbers, got `{}`", s.trim()),
                })?;
                Ok(v)
            })
            .collect::<Result<_, ConfigError>>()?;
    }
    validate(&c)?;
    Ok(c)
}

pub fn parse_config(path: &Path) -> Result<RunConfig, ConfigError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigError::Io { path: path.display().to_string(), message: e.to_string() })?;
    parse_str(&text, path.parent().unwrap_or(Path::new(".")))
}

fn alpha_ok(a: f64) -> bool {
    a > 0.0 && a < 1.0
}

pub fn validate(c: &RunConfig) -> Result<(), ConfigError> {
    if !alpha_ok(c.alpha) {
        return Err(invalid(format!("alpha ∈ (0,1) required, got {}", c.alpha)));
    }
    if !(c.delta > 0.0) {
        return Err(invalid(format!("delta > 0 required, got {}", c.delta)));
    }
    if !(c.grid.r_max > 1.0) {
        return Err(invalid(format!("grid.r_max must exceed 1, got {}", c.grid.r_max)));
    }
    if c.grid.n_r < 8 {
        return Err(invalid(format!("grid.n_r must be at least 8, got {}", c.grid.n_r)));
    }
    if c.grid.n_theta < 8 || c.grid.n_theta % 4 != 0 {
        return Err(invalid(format!("grid.n_theta must be a multiple of 4 (at least 8), got {}", c.grid.n_theta)));
    }
    if !(c.time.dt_factor > 0.0) {
        return Err(invalid("time.dt_factor must be positive"));
    }
    if !(c.time.horizon_factor > 0.0) {
        return Err(invalid("time.horizon_factor must be positive"));
    }
    if c.time.sample_count == 0 {
        return Err(invalid("time.sample_count must be positive"));
    }
    if matches!(c.kind, RunKindConfig::Full | RunKindConfig::Remainder | RunKindConfig::Sweep)
        && c.grid.spacing != Spacing::Geometric
    {
        return Err(invalid(format!("run.kind = {} needs grid.spacing = geometric", c.kind)));
    }
    if c.kind == RunKindConfig::Sweep {
        if c.sweep_alphas.len() < 3 {
            return Err(invalid("sweep.alphas needs at least 3 values"));
        }
        if let Some(a) = c.sweep_alphas.iter().find(|a| !alpha_ok(**a)) {
            return Err(invalid(format!("alpha ∈ (0,1) required for every sweep member, got {a}")));
        }
    }
    match c.initial.kind {
        InitialKind::Bump | InitialKind::Indicator => {
            if !(c.initial.width > 0.0) {
                return Err(invalid("initial.width must be positive"));
            }
            check_support(c, c.initial.center - c.initial.width, c.initial.center + c.initial.width)?;
        }
        InitialKind::Table => {
            if c.initial.table_path.is_none() {
                return Err(invalid("initial.kind = table needs initial.table_path"));
            }
        }
    }
    Ok(())
}

/// The support `[lo, hi]` must sit inside `[1, 0.8 r_max]`.
pub fn check_support(c: &RunConfig, lo: f64, hi: f64) -> Result<(), ConfigError> {
    if lo < 1.0 {
        return Err(invalid(format!("support must avoid [0,1), starts at {lo}")));
    }
    let limit = 0.8 * c.grid.r_max;
    if hi > limit {
        return Err(invalid(format!("support must lie inside [1, 0.8·r_max] = [1, {limit}], ends at {hi}")));
    }
    Ok(())
}

/// Reads `(R, value)` pairs, one per line, separated by whitespace or a
/// comma; `#` starts a comment.
pub fn read_table(path: &Path) -> Result<Vec<(f64, f64)>, ConfigError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigError::Io { path: path.display().to_string(), message: e.to_string() })?;
    let mut out = Vec::new();
    for (k, raw) in text.lines().enumerate() {
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let cols: Vec<&str> = body.split(|c: char| c == ',' || c.is_whitespace()).filter(|s| !s.is_empty()).collect();
        let parsed: Option<(f64, f64)> = match cols.as_slice() {
            [r, v] => r.parse().ok().zip(v.parse().ok()),
            _ => None,
        };
        let (r, v) = parsed.ok_or_else(|| ConfigError::Parse {
            line: k + 1,
            message: format!("{}: expected two numbers", path.display()),
        })?;
        out.push((r, v));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<RunConfig, ConfigError> {
        parse_str(text, Path::new("."))
    }

    #[test]
    fn comments_quotes_and_blank_lines() {
        let c = parse("# header\n\nalpha = 0.2   # trailing\noutput.dir = \"runs/a\"\n").unwrap();
        assert_eq!(c.alpha, 0.2);
        assert_eq!(c.output_dir, PathBuf::from("runs/a"));
    }

    #[test]
    fn line_numbers_in_errors() {
        assert_eq!(
            parse("alpha = 0.2\n\ngrid.n_r = many\n").unwrap_err(),
            ConfigError::Parse { line: 3, message: "`grid.n_r` expects a nonnegative integer, got `many`".into() }
        );
        assert!(matches!(parse("alpha = 0.2\nalpha = 0.3\n"), Err(ConfigError::Parse { line: 2, .. })));
        assert!(matches!(parse("alpha 0.2\n"), Err(ConfigError::Parse { line: 1, .. })));
        assert!(matches!(parse("alpha = 0.2\ngrid.nr = 3\n"), Err(ConfigError::Parse { line: 2, .. })));
    }

    #[test]
    fn amplitude_is_an_alias_for_delta() {
        assert_eq!(parse("alpha = 0.2\ninitial.amplitude = 0.5\n").unwrap().delta, 0.5);
        assert_eq!(parse("alpha = 0.2\ninitial.amplitude = 0.5\ndelta = 0.5\n").unwrap().delta, 0.5);
        assert!(matches!(parse("alpha = 0.2\ndelta = 1\ninitial.amplitude = 0.5\n"), Err(ConfigError::Parse { line: 3, .. })));
    }
}
