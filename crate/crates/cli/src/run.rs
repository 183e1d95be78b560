//! Run orchestration, CSV output and the manifest.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};
use thiserror::Error;

use rieszlab_core::diagnostics::alpha_scaling_study;
use rieszlab_core::evolution::{
    FullOptions, FullState, RemainderConfig, RemainderSeries, linear_closed_form, run_remainder_study, step_linear,
    support_inf_index,
};
use rieszlab_core::kernel::{KernelKind, op_ls};
use rieszlab_core::model::{SandwichConstants, SandwichForm, check_sandwich, horizon, init_state, run_model};
use rieszlab_core::profiles::{bump, indicator, table};
use rieszlab_core::{AngularGrid, Field2D, RadialGrid, RadialProfile, SpacingKind, l2_norm, sup_norm};

use crate::config::{ConfigError, InitialKind, RunConfig, RunKindConfig, Spacing, check_support, read_table};

pub const GROWTH_HEADER: &str = "t,sup_norm,l2_norm,Ls_at_support_inf,A_max";
pub const REMAINDER_HEADER: &str = "t,rem_sup,rem_l2,full_sup,model_sup";
pub const SCALING_HEADER: &str = "alpha,max_rem_sup,fit_exponent_cumulative";

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{stage} failed: {message}")]
    Numerical { stage: String, message: String },
    #[error("writing {path}: {message}")]
    Output { path: String, message: String },
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => 2,
            RunError::Numerical { .. } | RunError::Output { .. } => 3,
        }
    }

    fn stage(&self) -> String {
        match self {
            RunError::Config(_) => "config".into(),
            RunError::Numerical { stage, .. } => stage.clone(),
            RunError::Output { .. } => "output".into(),
        }
    }
}

fn numerical(stage: impl Into<String>) -> impl FnOnce(String) -> RunError {
    let stage = stage.into();
    move |message| RunError::Numerical { stage, message }
}

trait Stage<T> {
    fn stage(self, name: &str) -> Result<T, RunError>;
}

impl<T, E: std::fmt::Display> Stage<T> for Result<T, E> {
    fn stage(self, name: &str) -> Result<T, RunError> {
        self.map_err(|e| numerical(name)(e.to_string()))
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckRecord {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct FileRecord {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct ErrorRecord {
    pub stage: String,
    pub message: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub version: &'static str,
    pub config: std::collections::BTreeMap<&'static str, String>,
    pub status: &'static str,
    pub wall_time_s: f64,
    pub checks: Vec<CheckRecord>,
    pub files: Vec<FileRecord>,
    pub error: Option<ErrorRecord>,
}

/// Files written by a run, relative to its output directory.
#[derive(Debug, Default)]
struct Outputs {
    files: Vec<FileRecord>,
    checks: Vec<CheckRecord>,
}

impl Outputs {
    fn write(&mut self, root: &Path, rel: &str, body: &str) -> Result<(), RunError> {
        let path = root.join(rel);
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir).map_err(|e| output_err(dir, e))?;
        }
        fs::write(&path, body).map_err(|e| output_err(&path, e))?;
        self.files.push(FileRecord { path: rel.to_string(), sha256: hex::encode(Sha256::digest(body.as_bytes())) });
        Ok(())
    }

    fn check(&mut self, name: impl Into<String>, passed: bool, detail: String) {
        self.checks.push(CheckRecord { name: name.into(), passed, detail });
    }

    fn absorb(&mut self, prefix: &str, other: Outputs) {
        for f in other.files {
            self.files.push(FileRecord { path: format!("{prefix}/{}", f.path), ..f });
        }
        for c in other.checks {
            self.checks.push(CheckRecord { name: format!("{prefix}: {}", c.name), ..c });
        }
    }
}

fn output_err(path: &Path, e: std::io::Error) -> RunError {
    RunError::Output { path: path.display().to_string(), message: e.to_string() }
}

/// Seventeen significant digits.
pub fn num(v: f64) -> String {
    format!("{v:.16e}")
}

fn csv(header: &str, rows: impl IntoIterator<Item = Vec<f64>>) -> String {
    let mut s = String::from(header);
    s.push('\n');
    for row in rows {
        s.push_str(&row.iter().map(|v| num(*v)).collect::<Vec<_>>().join(","));
        s.push('\n');
    }
    s
}

pub fn radial_grid(c: &RunConfig) -> Result<Arc<RadialGrid>, RunError> {
    let kind = match c.grid.spacing {
        Spacing::Geometric => SpacingKind::Geometric,
        Spacing::Uniform => SpacingKind::Uniform,
    };
    RadialGrid::new(c.r_min(), c.grid.r_max, c.grid.n_r, kind).map_err(|e| ConfigError::Invalid(e.to_string()).into())
}

/// The initial radial profile, with its support checked on the grid.
pub fn initial_profile(c: &RunConfig) -> Result<RadialProfile, RunError> {
    let grid = radial_grid(c)?;
    let (lo, hi) = (c.initial.center - c.initial.width, c.initial.center + c.initial.width);
    let bad = |e: rieszlab_core::profiles::ProfileError| RunError::Config(ConfigError::Invalid(e.to_string()));
    let f0 = match c.initial.kind {
        InitialKind::Bump => bump(grid, c.initial.center, c.initial.width, c.delta).map_err(bad)?,
        InitialKind::Indicator => indicator(grid, lo, hi, c.delta).map_err(bad)?,
        InitialKind::Table => {
            let path = c.initial.table_path.as_ref().expect("validated");
            let points = read_table(path)?;
            if points.iter().any(|p| p.1 < 0.0) {
                return Err(ConfigError::Invalid("table values must be nonnegative".into()).into());
            }
            if let Some((lo, hi)) = table_support(&points) {
                check_support(c, lo, hi)?;
            }
            table(grid, &points).map_err(bad)?
        }
    };
    Ok(f0)
}

// Closure of the set where the piecewise-linear table is nonzero.
fn table_support(points: &[(f64, f64)]) -> Option<(f64, f64)> {
    let first = points.iter().position(|p| p.1 != 0.0)?;
    let last = points.iter().rposition(|p| p.1 != 0.0)?;
    let lo = if first > 0 { points[first - 1].0 } else { points[0].0 };
    let hi = if last + 1 < points.len() { points[last + 1].0 } else { points[last].0 };
    Some((lo, hi))
}

pub fn run_horizon(c: &RunConfig, alpha: f64) -> f64 {
    horizon(alpha, c.time.horizon_factor)
}

fn run_model_kind(c: &RunConfig, f0: RadialProfile, out: &mut Outputs, root: &Path) -> Result<(), RunError> {
    let alpha = c.alpha;
    let angular = AngularGrid::new(c.grid.n_theta).stage("grid")?;
    let s0 = init_state(f0, alpha, KernelKind::Full).stage("model init")?;
    let states = run_model(&s0, run_horizon(c, alpha), alpha * c.time.dt_factor, c.time.sample_count).stage("model")?;
    let i_inf = support_inf_index(&s0.f0);
    let mut rows = Vec::with_capacity(states.len());
    let mut worst_range = 0.0f64;
    for s in &states {
        let ls = s.eval_ls().stage("model tail")?;
        rows.push(vec![s.t, s.omega2_sup(), l2_norm(&s.omega2(angular)), ls.values()[i_inf], s.a_max()]);
        for i in 0..s.a.len() {
            worst_range = worst_range.max((s.sup_f_theta(i).1 - s.f0.values()[i]).abs());
        }
    }
    out.write(root, "growth.csv", &csv(GROWTH_HEADER, rows))?;
    out.check("transport range", worst_range <= 1e-12 * c.delta, format!("max |sup_θ f - f0| = {worst_range:.3e}"));
    let last = states.last().expect("at least one sample");
    for (form, name) in [(SandwichForm::Stated, "sandwich (stated)"), (SandwichForm::Comparison, "sandwich (comparison)")] {
        let r = check_sandwich(last, SandwichConstants::default(), form).stage("sandwich")?;
        out.check(
            name,
            r.holds(),
            format!(
                "{} nodes; {} above, {} below; upper excess {:.3e}, lower deficit {:.3e}",
                r.checked, r.upper_violations, r.lower_violations, r.max_upper_excess, r.max_lower_deficit
            ),
        );
    }
    Ok(())
}

fn run_linear_kind(c: &RunConfig, f0: RadialProfile, out: &mut Outputs, root: &Path) -> Result<(), RunError> {
    let alpha = c.alpha;
    let angular = AngularGrid::new(c.grid.n_theta).stage("grid")?;
    let i_inf = support_inf_index(&f0);
    let omega0 = Field2D::separable(&f0, angular, |t| (2.0 * t).sin());
    let ls0 = op_ls(&omega0).stage("linear tail")?;
    let ls_max = ls0.values().iter().fold(0.0f64, |m, v| m.max(*v));
    let t_final = run_horizon(c, alpha);
    let n = c.time.sample_count;
    let mut state = FullState::new(alpha, omega0.clone()).stage("linear init")?;
    let mut rows = Vec::with_capacity(n + 1);
    let mut worst = 0.0f64;
    for k in 0..=n {
        let t = t_final * k as f64 / n as f64;
        if k > 0 {
            state = step_linear(&state, t - state.t).stage("linear")?;
            state.t = t;
        }
        let exact = linear_closed_form(&omega0, alpha, t).stage("linear closed form")?;
        let scale = sup_norm(&exact);
        if scale > 0.0 {
            worst = worst.max(sup_norm(&state.omega.lincomb(1.0, &exact, -1.0)) / scale);
        }
        let ls = op_ls(&state.omega).stage("linear tail")?;
        rows.push(vec![t, sup_norm(&state.omega), l2_norm(&state.omega), ls.values()[i_inf], t * ls_max / alpha]);
    }
    out.write(root, "growth.csv", &csv(GROWTH_HEADER, rows))?;
    out.check("closed form", worst <= 1e-10, format!("max relative deviation {worst:.3e}"));
    Ok(())
}

fn remainder_series(c: &RunConfig, alpha: f64, f0: RadialProfile) -> Result<RemainderSeries, RunError> {
    let angular = AngularGrid::new(c.grid.n_theta).stage("grid")?;
    let cfg = RemainderConfig {
        alpha,
        f0,
        angular,
        t_final: run_horizon(c, alpha),
        n_samples: c.time.sample_count,
        model_dt: alpha * c.time.dt_factor,
        kernel: KernelKind::Full,
        options: FullOptions::default(),
    };
    run_remainder_study(&cfg).stage("full solver")
}

fn write_full(series: &RemainderSeries, remainder: bool, out: &mut Outputs, root: &Path) -> Result<(), RunError> {
    let growth = series.rows.iter().map(|r| vec![r.t, r.full_sup, r.full_l2, r.full_ls_inf, r.full_a_max]);
    out.write(root, "growth.csv", &csv(GROWTH_HEADER, growth))?;
    if remainder {
        let rem = series.rows.iter().map(|r| vec![r.t, r.rem_sup, r.rem_l2, r.full_sup, r.model_sup]);
        out.write(root, "remainder.csv", &csv(REMAINDER_HEADER, rem))?;
    }
    let sups: Vec<f64> = series.rows.iter().map(|r| r.full_sup).collect();
    let monotone = sups.windows(2).all(|w| w[1] >= w[0]);
    out.check(
        "sup norm nondecreasing",
        monotone,
        format!("from {:.6e} to {:.6e}", sups[0], sups.last().copied().unwrap_or(f64::NAN)),
    );
    Ok(())
}

fn run_sweep(c: &RunConfig, f0: RadialProfile, out: &mut Outputs, root: &Path) -> Result<(), RunError> {
    let members: Vec<Result<(f64, RemainderSeries), RunError>> =
        c.sweep_alphas.par_iter().map(|&a| remainder_series(c, a, f0.clone()).map(|s| (a, s))).collect();
    let mut points = Vec::new();
    for m in members {
        let (alpha, series) = m?;
        let mut sub = Outputs::default();
        let name = member_dir(alpha);
        write_full(&series, true, &mut sub, &root.join(&name))?;
        out.absorb(&name, sub);
        points.push((alpha, series.max_rem_sup()));
    }
    let report = alpha_scaling_study(&points).stage("scaling study")?;
    let rows = report.alphas.iter().zip(&report.values).zip(&report.cumulative_exponents).map(|((a, v), e)| vec![*a, *v, *e]);
    out.write(root, "scaling_report.csv", &csv(SCALING_HEADER, rows))?;
    let ratios_ok = report.pair_ratios.iter().all(|r| (1.0..=2.0).contains(r));
    out.check(
        "remainder decreasing in alpha",
        report.strictly_decreasing() && ratios_ok,
        format!("ratios {:?}; exponent {:.4}", report.pair_ratios, report.exponent),
    );
    Ok(())
}

pub fn member_dir(alpha: f64) -> String {
    format!("alpha_{alpha}")
}

fn execute(c: &RunConfig, out: &mut Outputs) -> Result<(), RunError> {
    let root = c.output_dir.as_path();
    fs::create_dir_all(root).map_err(|e| output_err(root, e))?;
    let f0 = initial_profile(c)?;
    match c.kind {
        RunKindConfig::Model => run_model_kind(c, f0, out, root),
        RunKindConfig::Linear => run_linear_kind(c, f0, out, root),
        RunKindConfig::Full => write_full(&remainder_series(c, c.alpha, f0)?, false, out, root),
        RunKindConfig::Remainder => write_full(&remainder_series(c, c.alpha, f0)?, true, out, root),
        RunKindConfig::Sweep => run_sweep(c, f0, out, root),
    }
}

/// Runs `c` and writes `manifest.json` into its output directory whatever
/// the outcome.
pub fn run(c: &RunConfig) -> (RunManifest, Result<(), RunError>) {
    let start = Instant::now();
    let mut out = Outputs::default();
    let result = execute(c, &mut out);
    let manifest = RunManifest {
        version: env!("CARGO_PKG_VERSION"),
        config: c.resolved(),
        status: if result.is_ok() { "ok" } else { "error" },
        wall_time_s: start.elapsed().as_secs_f64(),
        checks: out.checks,
        files: out.files,
        error: result.as_ref().err().map(|e| ErrorRecord { stage: e.stage(), message: e.to_string() }),
    };
    let result = result.and(write_manifest(&c.output_dir, &manifest));
    (manifest, result)
}

pub fn manifest_path(dir: &Path) -> PathBuf {
    dir.join("manifest.json")
}

fn write_manifest(dir: &Path, m: &RunManifest) -> Result<(), RunError> {
    fs::create_dir_all(dir).map_err(|e| output_err(dir, e))?;
    let body = serde_json::to_string_pretty(m).expect("manifest serializes");
    let path = manifest_path(dir);
    fs::write(&path, body + "\n").map_err(|e| output_err(&path, e))
}
