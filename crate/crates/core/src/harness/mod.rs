//! Experiments that put the particle system, the PDE, the mass equation
//! and the exact oracle side by side.
//!
//! An [`ExperimentSpec`] plus a [`ToleranceTable`] goes in; a
//! [`ComparisonReport`] comes out. Reports are a function of the `ExperimentSpec`
//! and its seed alone, so two runs write identical files.

mod ensemble;
mod experiments;
mod tolerance;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;

pub use ensemble::{mean_se, run_ensemble, splitmix64, trajectory_seed};
pub use experiments::{
    run, run_ficks_law, run_hydrodynamic, run_hydrostatic_neumann_mass, run_hydrostatic_robin,
    run_operator_checks, run_oracle_certify, run_pde_checks,
};
pub use tolerance::{Rule, Tolerance, ToleranceEntry, ToleranceTable, DEFAULT_TOLERANCES};

use crate::boundary::stationary_profile;
use crate::config::Config;
use crate::dynamics::GENERATOR_NAME;
use crate::error::{Error, Result};
use crate::observables::GridFunction;
use crate::params::BoundaryParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ExperimentKind {
    Hydrodynamic,
    FicksLaw,
    HydrostaticRobin,
    HydrostaticNeumannMass,
    OracleCertify,
    OperatorChecks,
    PdeChecks,
}

impl ExperimentKind {
    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s.trim().to_ascii_lowercase().replace(['-', ' '], "_").as_str() {
            "hydrodynamic" => Self::Hydrodynamic,
            "ficks_law" | "fick" => Self::FicksLaw,
            "hydrostatic_robin" => Self::HydrostaticRobin,
            "hydrostatic_neumann_mass" | "neumann_mass" => Self::HydrostaticNeumannMass,
            "oracle_certify" | "oracle" => Self::OracleCertify,
            "operator_checks" => Self::OperatorChecks,
            "pde_checks" => Self::PdeChecks,
            other => return Err(Error::Config { line: 0, msg: format!("unknown experiment `{other}`") }),
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Hydrodynamic => "hydrodynamic",
            Self::FicksLaw => "ficks_law",
            Self::HydrostaticRobin => "hydrostatic_robin",
            Self::HydrostaticNeumannMass => "hydrostatic_neumann_mass",
            Self::OracleCertify => "oracle_certify",
            Self::OperatorChecks => "operator_checks",
            Self::PdeChecks => "pde_checks",
        }
    }
}

/// Initial macroscopic profile.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum ProfileSpec {
    /// `a + b u`
    Linear { a: f64, b: f64 },
    Constant(f64),
    /// The linear stationary profile of the parameters (`theta = 1`).
    Stationary,
}

impl ProfileSpec {
    /// `linear a b`, `constant c` or `stationary`.
    pub fn parse(s: &str) -> Result<Self> {
        let words: Vec<&str> = s.split_whitespace().collect();
        let num = |w: &str| {
            w.parse::<f64>()
                .map_err(|_| Error::Config { line: 0, msg: format!("bad number `{w}` in profile `{s}`") })
        };
        match words.as_slice() {
            ["linear", a, b] => Ok(Self::Linear { a: num(a)?, b: num(b)? }),
            ["constant", c] => Ok(Self::Constant(num(c)?)),
            ["stationary"] => Ok(Self::Stationary),
            _ => Err(Error::Config { line: 0, msg: format!("unknown profile `{s}`") }),
        }
    }

    pub fn grid(&self, params: &BoundaryParams, m: usize) -> Result<GridFunction> {
        let g = match *self {
            Self::Linear { a, b } => GridFunction::from_fn(m, 0.0, |u| a + b * u),
            Self::Constant(c) => GridFunction::constant(m, c),
            Self::Stationary => {
                let mut g = stationary_profile(&params.with_theta(1.0)?)?.grid(m);
                g.t = 0.0;
                g
            }
        };
        if !g.is_density() {
            return Err(Error::Invalid(format!("initial profile {self:?} leaves [0, 1]")));
        }
        Ok(g)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentSpec {
    pub kind: ExperimentKind,
    pub params: BoundaryParams,
    pub n_list: Vec<usize>,
    pub ensemble_size: usize,
    /// Sample times. Macroscopic, on the scale the experiment uses, except
    /// for oracle certification where they are microscopic.
    pub t_grid: Vec<f64>,
    pub seed_base: u64,
    pub output_dir: Option<PathBuf>,
    /// Cells of the empirical profile.
    pub cells: usize,
    /// Grid of the PDE solver.
    pub pde_m: usize,
    pub pde_dt: Option<f64>,
    pub initial: ProfileSpec,
    /// Polynomial coefficients of the current test function.
    pub test_function: Vec<f64>,
    pub m0_list: Vec<f64>,
    /// Extra values of `theta` to repeat the experiment with.
    pub theta_list: Vec<f64>,
    /// Macroscopic time discarded before long-run averages start.
    pub burn_in: f64,
    pub average_time: f64,
    pub sample_dt: f64,
    /// Random points for the operator identity battery.
    pub identity_draws: usize,
}

impl ExperimentSpec {
    pub fn new(kind: ExperimentKind, params: BoundaryParams) -> Self {
        Self {
            kind,
            params,
            n_list: vec![64],
            ensemble_size: 100,
            t_grid: vec![0.1],
            seed_base: 1,
            output_dir: None,
            cells: 32,
            pde_m: 128,
            pde_dt: None,
            initial: ProfileSpec::Linear { a: 0.0, b: 1.0 },
            test_function: vec![1.0],
            m0_list: vec![0.1],
            theta_list: Vec::new(),
            burn_in: 1.0,
            average_time: 1.0,
            sample_dt: 0.01,
            identity_draws: 100_000,
        }
    }

    /// Read a spec from config keys; `kind` wins over an `experiment` key.
    pub fn from_config(cfg: &Config, kind: Option<ExperimentKind>) -> Result<Self> {
        let kind = match kind {
            Some(k) => k,
            None => ExperimentKind::parse(&cfg.get_str("experiment").ok_or_else(|| Error::Config {
                line: 0,
                msg: "missing `experiment`".into(),
            })?)?,
        };
        let mut spec = Self::new(kind, BoundaryParams::from_config(cfg)?);
        if let Some(v) = cfg.get_list("N_list")? {
            spec.n_list = v;
        }
        if let Some(v) = cfg.get("ensemble_size")? {
            spec.ensemble_size = v;
        }
        if let Some(v) = cfg.get_list("t_grid")? {
            spec.t_grid = v;
        }
        if let Some(v) = cfg.get("seed_base")? {
            spec.seed_base = v;
        }
        if let Some(v) = cfg.get_str("output_dir") {
            spec.output_dir = Some(PathBuf::from(v));
        }
        if let Some(v) = cfg.get("cells")? {
            spec.cells = v;
        }
        if let Some(v) = cfg.get("pde_m")? {
            spec.pde_m = v;
        }
        spec.pde_dt = cfg.get("pde_dt")?;
        if let Some(v) = cfg.get_str("initial") {
            spec.initial = ProfileSpec::parse(&v)?;
        }
        if let Some(v) = cfg.get_list("test_function")? {
            spec.test_function = v;
        }
        if let Some(v) = cfg.get_list("m0_list")? {
            spec.m0_list = v;
        }
        if let Some(v) = cfg.get_list("theta_list")? {
            spec.theta_list = v;
        }
        if let Some(v) = cfg.get("burn_in")? {
            spec.burn_in = v;
        }
        if let Some(v) = cfg.get("average_time")? {
            spec.average_time = v;
        }
        if let Some(v) = cfg.get("sample_dt")? {
            spec.sample_dt = v;
        }
        if let Some(v) = cfg.get("identity_draws")? {
            spec.identity_draws = v;
        }
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.params.k();
        if let Some(&n) = self.n_list.iter().find(|&&n| n < 2 * k + 2) {
            return Err(Error::OverlappingWindows { n, k, min: 2 * k + 2 });
        }
        if self.ensemble_size == 0 {
            return Err(Error::Invalid("ensemble_size must be at least 1".into()));
        }
        if self.t_grid.iter().any(|t| !(*t >= 0.0 && t.is_finite())) || self.t_grid.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::Invalid("t_grid must be sorted, finite and non-negative".into()));
        }
        if self.cells == 0 || self.pde_m < 8 {
            return Err(Error::Invalid("need cells >= 1 and pde_m >= 8".into()));
        }
        if !(self.sample_dt > 0.0) || self.burn_in < 0.0 || self.average_time < 0.0 {
            return Err(Error::Invalid("need sample_dt > 0 and non-negative burn_in, average_time".into()));
        }
        Ok(())
    }

    /// Canonical `key = value` lines describing this experiment.
    pub fn provenance_lines(&self) -> Vec<String> {
        let list = |v: &[f64]| format!("[{}]", v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(", "));
        let mut out = vec![format!("experiment = {}", self.kind.name())];
        out.extend(self.params.provenance_lines());
        out.push(format!(
            "N_list = [{}]",
            self.n_list.iter().map(|n| n.to_string()).collect::<Vec<_>>().join(", ")
        ));
        out.push(format!("ensemble_size = {}", self.ensemble_size));
        out.push(format!("t_grid = {}", list(&self.t_grid)));
        out.push(format!("seed_base = {}", self.seed_base));
        out.push(format!("generator = {GENERATOR_NAME}"));
        out
    }
}

/// One compared quantity. `pass` is `None` for informational rows.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Metric {
    pub name: String,
    pub context: String,
    pub value: f64,
    pub tolerance_key: Option<String>,
    pub threshold: Option<f64>,
    pub pass: Option<bool>,
}

/// A CSV-shaped block of numbers.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(name: &str, columns: &[&str]) -> Self {
        Self { name: name.into(), columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.columns.join(",");
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonReport {
    pub experiment: String,
    pub spec: Vec<String>,
    pub metrics: Vec<Metric>,
    #[serde(skip)]
    pub tables: Vec<Table>,
    pub tolerances: ToleranceTable,
}

impl ComparisonReport {
    pub fn new(spec: &ExperimentSpec, tolerances: &ToleranceTable) -> Self {
        Self {
            experiment: spec.kind.name().into(),
            spec: spec.provenance_lines(),
            metrics: Vec::new(),
            tables: Vec::new(),
            tolerances: tolerances.clone(),
        }
    }

    /// Record `value` and judge it against tolerance `key`.
    pub fn check(&mut self, name: &str, context: impl Into<String>, value: f64, key: &str) -> bool {
        let pass = self.tolerances.passes(key, value);
        self.metrics.push(Metric {
            name: name.into(),
            context: context.into(),
            value,
            tolerance_key: Some(key.into()),
            threshold: Some(self.tolerances.get(key).value),
            pass: Some(pass),
        });
        pass
    }

    pub fn note(&mut self, name: &str, context: impl Into<String>, value: f64) {
        self.metrics.push(Metric {
            name: name.into(),
            context: context.into(),
            value,
            tolerance_key: None,
            threshold: None,
            pass: None,
        });
    }

    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|t| t.name == name)
    }

    pub fn all_pass(&self) -> bool {
        self.metrics.iter().all(|m| m.pass != Some(false))
    }

    pub fn failures(&self) -> impl Iterator<Item = &Metric> {
        self.metrics.iter().filter(|m| m.pass == Some(false))
    }

    pub fn metrics_csv(&self) -> String {
        let mut out = String::from("name,context,value,tolerance,threshold,pass\n");
        for m in &self.metrics {
            let _ = writeln!(
                out,
                "{},\"{}\",{},{},{},{}",
                m.name,
                m.context,
                m.value,
                m.tolerance_key.as_deref().unwrap_or(""),
                m.threshold.map_or(String::new(), |t| t.to_string()),
                m.pass.map_or("", |p| if p { "pass" } else { "FAIL" }),
            );
        }
        out
    }

    pub fn manifest_json(&self) -> Result<String> {
        #[derive(Serialize)]
        struct Manifest<'a> {
            report: &'a ComparisonReport,
            tables: Vec<String>,
            seed_rule: &'static str,
            all_pass: bool,
        }
        let tables = self.tables.iter().map(|t| format!("{}.csv", t.name)).collect();
        Ok(serde_json::to_string_pretty(&Manifest {
            report: self,
            tables,
            seed_rule: "trajectory i seeds with splitmix64(seed_base + i); the mass and oracle experiments add \
                        (combination index << 32) to seed_base for each (N, m0, theta) or (N, theta); operator \
                        checks draw from ChaCha8 seeded with seed_base",
            all_pass: self.all_pass(),
        })?)
    }

    /// `metrics.csv`, one CSV per table and `manifest.json` under `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("metrics.csv"), self.metrics_csv())?;
        for t in &self.tables {
            std::fs::write(dir.join(format!("{}.csv", t.name)), t.to_csv())?;
        }
        std::fs::write(dir.join("manifest.json"), self.manifest_json()?)?;
        Ok(())
    }

    /// Human-readable summary, one line per metric.
    pub fn summary(&self) -> String {
        let mut out = format!("{}\n", self.experiment);
        for m in &self.metrics {
            let verdict = match m.pass {
                Some(true) => "pass",
                Some(false) => "FAIL",
                None => "    ",
            };
            let bound = match (&m.tolerance_key, m.threshold) {
                (Some(k), Some(t)) => {
                    let op = if self.tolerances.get(k).rule == Rule::AtMost { "<=" } else { ">=" };
                    format!(" ({op} {t:e})")
                }
                _ => String::new(),
            };
            let _ = writeln!(out, "  [{verdict}] {} {}: {:.6e}{bound}", m.name, m.context, m.value);
        }
        out
    }
}
