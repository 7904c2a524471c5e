use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use ssep_window::boundary::{mass_fixed_point, ricatti_integrate, stationary_profile};
use ssep_window::config::Config;
use ssep_window::dynamics::{InitialCondition, LatticeState, ObservationLog, ProfileMode, Scale};
use ssep_window::error::{Error, Result};
use ssep_window::harness::{self, ComparisonReport, ExperimentKind, ExperimentSpec, ToleranceTable};
use ssep_window::params::{aggregates, validate, BoundaryParams};
use ssep_window::pde::{mild_solve_with, solve_with, PdeProblem, SolveOptions};

#[derive(Parser)]
#[command(name = "ssep", version, about = "Exclusion process with slow window reservoirs: simulation, PDE and checks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// key = value file; its entries override flags
    #[arg(long)]
    config: Option<PathBuf>,
    /// Extra `key=value` entries (repeatable)
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    #[arg(long)]
    theta: Option<f64>,
    /// Comma-separated rates, e.g. `1,0.5`
    #[arg(long)]
    alpha: Option<String>,
    #[arg(long)]
    beta: Option<String>,
    #[arg(long)]
    gamma: Option<String>,
    #[arg(long)]
    delta: Option<String>,
    /// Lattice sizes, comma-separated
    #[arg(long = "n")]
    n: Option<String>,
    #[arg(long)]
    ensemble: Option<usize>,
    /// Sample times, comma-separated
    #[arg(long = "t-grid")]
    t_grid: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Run an ensemble and write the observation log
    Simulate(Common),
    /// Solve the hydrodynamic equation (with --check, run the solver self-tests)
    Pde {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 128)]
        m: usize,
        #[arg(long)]
        dt: Option<f64>,
        /// Use the boundary-integral (mild) solver
        #[arg(long)]
        mild: bool,
        #[arg(long)]
        check: bool,
    },
    /// Stationary profile for theta = 1; with --n, compare long runs against it
    Stationary(Common),
    /// Mass equation for theta > 1; with --n, compare subdiffusive runs against it
    Mass(Common),
    /// Monte Carlo vs exact master equation (times are microscopic)
    Oracle(Common),
    /// Boundary-operator identity, fixed-point and mass-equation batteries
    CheckOperators(Common),
    /// Empirical profiles or currents against the PDE
    Compare {
        #[command(flatten)]
        common: Common,
        /// `hydrodynamic` or `ficks_law`
        #[arg(long, default_value = "hydrodynamic")]
        experiment: String,
    },
}

impl Common {
    /// Flags as config lines, followed by the config file so that it wins.
    fn config(&self) -> Result<Config> {
        let list = |s: &str| format!("[{s}]");
        let mut text = String::new();
        let mut put = |k: &str, v: String| text.push_str(&format!("{k} = {v}\n"));
        if let Some(t) = self.theta {
            put("theta", t.to_string());
        }
        for (k, v) in [("alpha", &self.alpha), ("beta", &self.beta), ("gamma", &self.gamma), ("delta", &self.delta)] {
            if let Some(v) = v {
                put(k, list(v));
            }
        }
        if let Some(n) = &self.n {
            put("N_list", list(n));
        }
        if let Some(e) = self.ensemble {
            put("ensemble_size", e.to_string());
        }
        if let Some(t) = &self.t_grid {
            put("t_grid", list(t));
        }
        if let Some(s) = self.seed {
            put("seed_base", s.to_string());
        }
        if let Some(o) = &self.out {
            put("output_dir", o.display().to_string());
        }
        for kv in &self.set {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| Error::Config { line: 0, msg: format!("--set expects KEY=VALUE, got `{kv}`") })?;
            put(k.trim(), v.trim().to_string());
        }
        if let Some(path) = &self.config {
            text.push_str(Config::load(path)?.raw());
            text.push('\n');
        }
        Config::parse(&text)
    }
}

fn write_report(report: &ComparisonReport, spec: &ExperimentSpec) -> Result<bool> {
    print!("{}", report.summary());
    if let Some(dir) = &spec.output_dir {
        report.write(dir)?;
        println!("wrote {}", dir.display());
    }
    Ok(report.all_pass())
}

fn experiment(cfg: &Config, kind: ExperimentKind) -> Result<bool> {
    let spec = ExperimentSpec::from_config(cfg, Some(kind))?;
    let tol = ToleranceTable::from_config(cfg)?;
    write_report(&harness::run(&spec, &tol)?, &spec)
}

fn write_or_print(dir: Option<&Path>, name: &str, body: &str) -> Result<()> {
    match dir {
        Some(d) => {
            std::fs::create_dir_all(d)?;
            std::fs::write(d.join(name), body)?;
            println!("wrote {}", d.join(name).display());
        }
        None => print!("{body}"),
    }
    Ok(())
}

fn simulate(cfg: &Config) -> Result<bool> {
    let spec = ExperimentSpec::from_config(cfg, Some(ExperimentKind::Hydrodynamic))?;
    let scale = if spec.params.theta() == 1.0 { Scale::Diffusive } else { Scale::Subdiffusive };
    let scale = match cfg.get_str("scale").as_deref() {
        Some("diffusive") => Scale::Diffusive,
        Some("subdiffusive") => Scale::Subdiffusive,
        Some(other) => return Err(Error::Config { line: 0, msg: format!("unknown scale `{other}`") }),
        None => scale,
    };
    let f0 = spec.initial.grid(&spec.params, spec.pde_m)?;
    let t_end = spec.t_grid.last().copied().unwrap_or(0.0);
    for &n in &spec.n_list {
        let initial = InitialCondition::BernoulliProfile(f0.clone());
        let logs = harness::run_ensemble(spec.ensemble_size, spec.seed_base, |_, seed| {
            let mut state = LatticeState::init(n, &spec.params, &initial, seed)?;
            let mut rng = state.dynamics_rng();
            let mut log = ObservationLog::new(n, ProfileMode::Cells(spec.cells));
            state.run_until(&mut rng, t_end, scale, &spec.t_grid, &mut [&mut log])?;
            Ok(log)
        })?;
        let mut merged = logs[0].clone();
        for l in &logs[1..] {
            merged.merge(l)?;
        }
        merged.header = cfg.entry_lines().map(str::to_string).collect();
        write_or_print(spec.output_dir.as_deref(), &format!("observations_N{n}.csv"), &merged.to_csv())?;
    }
    Ok(true)
}

fn pde(cfg: &Config, m: usize, dt: Option<f64>, mild: bool, check: bool) -> Result<bool> {
    if check {
        return experiment(cfg, ExperimentKind::PdeChecks);
    }
    let spec = ExperimentSpec::from_config(cfg, Some(ExperimentKind::PdeChecks))?;
    let problem = PdeProblem::for_params(spec.params.clone(), spec.initial.grid(&spec.params, m)?)?;
    let t_end = spec.t_grid.last().copied().unwrap_or(0.1);
    let sol = if mild {
        mild_solve_with(&problem, t_end, m, dt.unwrap_or(1e-4), 0)?
    } else {
        let opts = SolveOptions { dt, record_every: cfg.get("record_every")?.unwrap_or(100) };
        solve_with(&problem, t_end, m, opts)?
    };
    let dir = spec.output_dir.as_deref();
    write_or_print(dir, "pde.csv", &sol.to_csv())?;
    if dir.is_some() {
        write_or_print(dir, "pde_manifest.json", &sol.manifest_json()?)?;
    }
    Ok(true)
}

fn stationary(cfg: &Config) -> Result<bool> {
    let params = BoundaryParams::from_config(cfg)?;
    let report = validate(&params);
    for v in &report.violations {
        eprintln!("assumption: {v}");
    }
    let profile = stationary_profile(&params)?;
    println!("rho0 = {}\nrho1 = {}\nresidual = {:e}", profile.rho0, profile.rho1, profile.residual(&params));
    if cfg.contains("N_list") {
        return experiment(cfg, ExperimentKind::HydrostaticRobin);
    }
    Ok(true)
}

fn mass(cfg: &Config) -> Result<bool> {
    let params = BoundaryParams::from_config(cfg)?;
    let agg = aggregates(&params);
    let m_star = mass_fixed_point(&agg)?;
    println!("m* = {m_star}");
    if cfg.contains("N_list") {
        return experiment(cfg, ExperimentKind::HydrostaticNeumannMass);
    }
    let t_end = cfg.get_list::<f64>("t_grid")?.and_then(|t| t.last().copied()).unwrap_or(5.0);
    let mut out = String::from("m0,t,m\n");
    for m0 in cfg.get_list::<f64>("m0_list")?.unwrap_or_else(|| vec![0.0, 0.5, 1.0]) {
        let path = ricatti_integrate(&agg, m0, t_end, 1e-3)?;
        for (t, m) in path.times.iter().zip(&path.values).step_by(100) {
            out.push_str(&format!("{m0},{t},{m}\n"));
        }
    }
    write_or_print(cfg.get_str("output_dir").map(PathBuf::from).as_deref(), "mass.csv", &out)?;
    Ok(true)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = (|| -> Result<bool> {
        match &cli.command {
            Command::Simulate(c) => simulate(&c.config()?),
            Command::Pde { common, m, dt, mild, check } => pde(&common.config()?, *m, *dt, *mild, *check),
            Command::Stationary(c) => stationary(&c.config()?),
            Command::Mass(c) => mass(&c.config()?),
            Command::Oracle(c) => experiment(&c.config()?, ExperimentKind::OracleCertify),
            Command::CheckOperators(c) => experiment(&c.config()?, ExperimentKind::OperatorChecks),
            Command::Compare { common, experiment: kind } => {
                let cfg = common.config()?;
                let kind = cfg.get_str("experiment").unwrap_or_else(|| kind.clone());
                experiment(&cfg, ExperimentKind::parse(&kind)?)
            }
        }
    })();
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
