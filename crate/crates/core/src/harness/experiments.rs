use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::ensemble::{mean_se, run_ensemble};
use super::{ComparisonReport, ExperimentKind, ExperimentSpec, Table, ToleranceTable};
use crate::boundary::{
    d_op, mass_fixed_point, ricatti_integrate, ricatti_k2, stationary_profile, v_op, DPair,
};
use crate::dynamics::{InitialCondition, LatticeState, ObservationLog, ProfileMode, Scale};
use crate::error::{Error, Result};
use crate::observables::{cell_counts, cell_sites, current_pairing, GridFunction};
use crate::oracle::{self, Distribution, MAX_SITES};
use crate::params::{aggregates, AggregateRates};
use crate::pde::{
    kernel_cell_integral, mild_solve, solve, solve_with, weak_residual, KernelConfig, PdeProblem, Polynomial,
    SolveOptions, TestFunction,
};

/// Run whichever experiment `spec.kind` names.
pub fn run(spec: &ExperimentSpec, tol: &ToleranceTable) -> Result<ComparisonReport> {
    spec.validate()?;
    match spec.kind {
        ExperimentKind::Hydrodynamic => run_hydrodynamic(spec, tol),
        ExperimentKind::FicksLaw => run_ficks_law(spec, tol),
        ExperimentKind::HydrostaticRobin => run_hydrostatic_robin(spec, tol),
        ExperimentKind::HydrostaticNeumannMass => run_hydrostatic_neumann_mass(spec, tol),
        ExperimentKind::OracleCertify => run_oracle_certify(spec, tol),
        ExperimentKind::OperatorChecks => run_operator_checks(spec, tol),
        ExperimentKind::PdeChecks => run_pde_checks(spec, tol),
    }
}

fn ctx_nt(n: usize, t: f64) -> String {
    format!("N={n} t={t}")
}

fn t_max(spec: &ExperimentSpec) -> f64 {
    spec.t_grid.last().copied().unwrap_or(0.0)
}

/// Least-squares slope of `ln y` against `ln x`.
fn log_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / n, ly.iter().sum::<f64>() / n);
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

fn merge_all(mut logs: Vec<ObservationLog>) -> Result<ObservationLog> {
    let mut merged = logs.remove(0);
    for l in &logs {
        merged.merge(l)?;
    }
    Ok(merged)
}

/// Empirical density profile against the PDE solution at each `(N, t)`.
pub fn run_hydrodynamic(spec: &ExperimentSpec, tol: &ToleranceTable) -> Result<ComparisonReport> {
    let mut report = ComparisonReport::new(spec, tol);
    let params = &spec.params;
    let f0 = spec.initial.grid(params, spec.pde_m)?;
    let problem = PdeProblem::for_params(params.clone(), f0.clone())?;
    let t_end = t_max(spec);
    let sol = solve(&problem, t_end, spec.pde_m, spec.pde_dt)?;

    let mut profiles = Table::new("profiles", &["N", "t", "u", "empirical", "pde"]);
    let mut errors = Table::new("errors", &["N", "t", "l1", "sup", "ensemble"]);
    let mut l1_by_t: Vec<Vec<f64>> = vec![Vec::new(); spec.t_grid.len()];

    for &n in &spec.n_list {
        let initial = InitialCondition::BernoulliProfile(f0.clone());
        let logs = run_ensemble(spec.ensemble_size, spec.seed_base, |_, seed| {
            let mut state = LatticeState::init(n, params, &initial, seed)?;
            let mut rng = state.dynamics_rng();
            let mut log = ObservationLog::new(n, ProfileMode::Cells(spec.cells));
            state.run_until(&mut rng, t_end, Scale::Diffusive, &spec.t_grid, &mut [&mut log])?;
            Ok(log)
        })?;
        let merged = merge_all(logs)?;
        for (si, &t) in spec.t_grid.iter().enumerate() {
            let emp = merged.mean_profile(si).expect("cell profile recorded");
            let pde = sol.at_time(t);
            let l1 = emp.l1_distance(pde);
            let sup = emp.sup_distance(pde);
            for (u, v) in emp.nodes().zip(&emp.values) {
                profiles.push(vec![n as f64, t, u, *v, pde.at(u)]);
            }
            errors.push(vec![n as f64, t, l1, sup, spec.ensemble_size as f64]);
            l1_by_t[si].push(l1);
            if Some(&n) == spec.n_list.iter().max() {
                report.check("l1_profile", ctx_nt(n, t), l1, "hydro_l1");
            } else {
                report.note("l1_profile", ctx_nt(n, t), l1);
            }
        }
    }

    if spec.n_list.len() >= 2 {
        let ns: Vec<f64> = spec.n_list.iter().map(|&n| n as f64).collect();
        for (si, &t) in spec.t_grid.iter().enumerate() {
            if t == 0.0 {
                continue;
            }
            let errs = &l1_by_t[si];
            report.check("l1_log_slope", format!("t={t}"), log_slope(&ns, errs), "hydro_slope");
            let decreasing = errs.windows(2).all(|w| w[1] < w[0]);
            report.note("l1_decreasing", format!("t={t}"), decreasing as u8 as f64);
        }
    }
    report.tables.push(errors);
    report.tables.push(profiles);
    Ok(report)
}

/// Trapezoid `int_0^1 f(u) g(u) du` on the grid of `g`.
fn pair_grid(g: &GridFunction, f: impl Fn(f64) -> f64) -> f64 {
    let m = g.m();
    let h = 1.0 / m as f64;
    h * g
        .nodes()
        .zip(&g.values)
        .enumerate()
        .map(|(i, (u, v))| if i == 0 || i == m { 0.5 } else { 1.0 } * f(u) * v)
        .sum::<f64>()
}

/// Cumulative time integral of `rate(frame)` over the frames.
fn cumulative(frames: &[GridFunction], rate: impl Fn(&GridFunction) -> f64) -> Vec<(f64, f64)> {
    let mut out = vec![(frames[0].t, 0.0)];
    let mut acc = 0.0;
    let mut prev = rate(&frames[0]);
    for w in frames.windows(2) {
        let next = rate(&w[1]);
        acc += 0.5 * (w[1].t - w[0].t) * (prev + next);
        prev = next;
        out.push((w[1].t, acc));
    }
    out
}

fn interp(series: &[(f64, f64)], t: f64) -> f64 {
    let i = series.partition_point(|(s, _)| *s < t);
    if i == 0 {
        return series[0].1;
    }
    if i == series.len() {
        return series[i - 1].1;
    }
    let ((t0, v0), (t1, v1)) = (series[i - 1], series[i]);
    v0 + (v1 - v0) * (t - t0) / (t1 - t0)
}

/// Current pairings `<J_t, f>` and `<K_t, f>` against their PDE predictions.
///
/// The conservative part is compared with `-int_0^t int f d_u rho`. The
/// non-conservative part is compared with the boundary fluxes
/// `int_0^t f(0) D(rho_s(0)) + f(1) D(rho_s(1)) ds`, scaled by
/// `N^{1 - theta}`: its limit for `theta = 1`, and for `theta > 1` the
/// leading finite-`N` mean, which vanishes as `N` grows.
pub fn run_ficks_law(spec: &ExperimentSpec, tol: &ToleranceTable) -> Result<ComparisonReport> {
    let mut report = ComparisonReport::new(spec, tol);
    let params = &spec.params;
    let robin = params.theta() == 1.0;
    let f = Polynomial(spec.test_function.clone());
    let fv = |u: f64| f.value(0.0, u);
    let f0 = spec.initial.grid(params, spec.pde_m)?;
    let problem = PdeProblem::for_params(params.clone(), f0.clone())?;
    let t_end = t_max(spec);
    let sol = solve(&problem, t_end, spec.pde_m, spec.pde_dt)?;

    // int f d_u rho = f(1) rho(1) - f(0) rho(0) - int f' rho
    let j_rate = |g: &GridFunction| {
        let m = g.m();
        -(fv(1.0) * g.values[m] - fv(0.0) * g.values[0] - pair_grid(g, |u| f.du(0.0, u)))
    };
    let (left, right) = (DPair::left(params), DPair::right(params));
    let k_rate = |g: &GridFunction| {
        let m = g.m();
        fv(0.0) * d_op(&left, g.values[0]).unwrap_or(f64::NAN) + fv(1.0) * d_op(&right, g.values[m]).unwrap_or(f64::NAN)
    };
    let j_pred = cumulative(&sol.frames, j_rate);
    let k_pred = cumulative(&sol.frames, k_rate);

    let mut table = Table::new("currents", &["N", "t", "j_mean", "j_se", "j_pde", "k_mean", "k_se", "k_pde"]);
    let n_max = spec.n_list.iter().copied().max().unwrap_or(0);
    for &n in &spec.n_list {
        let initial = InitialCondition::BernoulliProfile(f0.clone());
        let runs = run_ensemble(spec.ensemble_size, spec.seed_base, |_, seed| {
            let mut state = LatticeState::init(n, params, &initial, seed)?;
            let mut rng = state.dynamics_rng();
            let mut seen = Vec::with_capacity(spec.t_grid.len());
            let mut obs = |_: f64, s: &LatticeState| seen.push(current_pairing(s, fv));
            state.run_until(&mut rng, t_end, Scale::Diffusive, &spec.t_grid, &mut [&mut obs])?;
            Ok(seen)
        })?;
        for (si, &t) in spec.t_grid.iter().enumerate() {
            if t == 0.0 {
                continue;
            }
            let js: Vec<f64> = runs.iter().map(|r| r[si].j_value).collect();
            let ks: Vec<f64> = runs.iter().map(|r| r[si].k_value).collect();
            let (jm, jse) = mean_se(&js);
            let (km, kse) = mean_se(&ks);
            let k_scale = (n as f64).powf(1.0 - params.theta());
            let (jp, kp) = (interp(&j_pred, t), k_scale * interp(&k_pred, t));
            table.push(vec![n as f64, t, jm, jse, jp, km, kse, kp]);
            let ctx = ctx_nt(n, t);
            let rel = (jm - jp).abs() / jp.abs();
            if robin && n == n_max {
                report.check("j_relative_gap", ctx.clone(), rel, "fick_rel");
            } else {
                report.note("j_relative_gap", ctx.clone(), rel);
            }
            let z = if kse > 0.0 { (km - kp).abs() / kse } else if km == kp { 0.0 } else { f64::INFINITY };
            if robin {
                report.note("k_gap_in_se", ctx, z);
            } else {
                report.note("k_mean_abs", ctx.clone(), km.abs());
                report.note("k_finite_n_term", ctx.clone(), kp);
                report.check("k_gap_in_se", ctx, z, "fick_noise_sigmas");
            }
        }
    }
    report.tables.push(table);
    Ok(report)
}

fn averaging_times(spec: &ExperimentSpec) -> Vec<f64> {
    let count = (spec.average_time / spec.sample_dt).floor() as usize;
    (0..=count).map(|i| spec.burn_in + i as f64 * spec.sample_dt).collect()
}

/// Long-run profile for `theta = 1`: against the exact stationary law when
/// the lattice is small enough, against the linear stationary profile
/// otherwise.
pub fn run_hydrostatic_robin(spec: &ExperimentSpec, tol: &ToleranceTable) -> Result<ComparisonReport> {
    let params = &spec.params;
    if params.theta() != 1.0 {
        return Err(Error::InvalidParams("hydrostatic Robin experiment needs theta = 1".into()));
    }
    let mut report = ComparisonReport::new(spec, tol);
    let profile = stationary_profile(params)?;
    report.note("rho0", "", profile.rho0);
    report.note("rho1", "", profile.rho1);
    report.note("profile_residual", "", profile.residual(params));
    let f0 = spec.initial.grid(params, spec.pde_m)?;
    let times = averaging_times(spec);
    let t_end = *times.last().expect("at least the burn-in time");
    let mut sites = Table::new("site_marginals", &["N", "x", "empirical", "se", "exact"]);
    let mut cells = Table::new("profile", &["N", "u", "empirical", "stationary"]);

    for &n in &spec.n_list {
        let initial = InitialCondition::BernoulliProfile(f0.clone());
        if n - 1 <= MAX_SITES.min(12) {
            let runs = run_ensemble(spec.ensemble_size, spec.seed_base, |_, seed| {
                let mut state = LatticeState::init(n, params, &initial, seed)?;
                let mut rng = state.dynamics_rng();
                let mut counts = vec![0u64; n - 1];
                let mut obs = |_: f64, s: &LatticeState| {
                    for (c, &e) in counts.iter_mut().zip(s.occupation()) {
                        *c += e as u64;
                    }
                };
                state.run_until(&mut rng, t_end, Scale::Diffusive, &times, &mut [&mut obs])?;
                Ok(counts.iter().map(|&c| c as f64 / times.len() as f64).collect::<Vec<f64>>())
            })?;
            let g = oracle::generator_matrix(n, params)?;
            let pi = oracle::stationary_with(&g)?;
            let exact = pi.marginals();
            let start = Distribution::product(&(1..n).map(|x| f0.at(x as f64 / n as f64)).collect::<Vec<_>>())?;
            let warm = oracle::evolve_with(&g, &start, spec.burn_in * (n * n) as f64)?;
            let burn_gap = warm.marginals().iter().zip(&exact).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            report.note("burn_in_marginal_gap", format!("N={n}"), burn_gap);
            let mut worst: f64 = 0.0;
            for x in 0..n - 1 {
                let col: Vec<f64> = runs.iter().map(|r| r[x]).collect();
                let (mean, se) = mean_se(&col);
                sites.push(vec![n as f64, (x + 1) as f64, mean, se, exact[x]]);
                worst = worst.max((mean - exact[x]).abs() / se);
            }
            report.check("max_marginal_gap_in_se", format!("N={n}"), worst, "robin_oracle_sigmas");
        } else {
            let runs = run_ensemble(spec.ensemble_size, spec.seed_base, |_, seed| {
                let mut state = LatticeState::init(n, params, &initial, seed)?;
                let mut rng = state.dynamics_rng();
                let mut counts = vec![0u64; spec.cells + 1];
                let mut obs = |_: f64, s: &LatticeState| {
                    for (c, k) in counts.iter_mut().zip(cell_counts(s, spec.cells)) {
                        *c += k as u64;
                    }
                };
                state.run_until(&mut rng, t_end, Scale::Diffusive, &times, &mut [&mut obs])?;
                Ok(counts)
            })?;
            let denom = (times.len() * spec.ensemble_size) as f64;
            let values = (0..=spec.cells)
                .map(|i| {
                    let r = cell_sites(n, spec.cells, i);
                    let width = (r.end() - r.start() + 1) as f64;
                    runs.iter().map(|c| c[i]).sum::<u64>() as f64 / (width * denom)
                })
                .collect();
            let emp = GridFunction { values, t: t_end };
            let target = profile.grid(spec.cells);
            for (u, v) in emp.nodes().zip(&emp.values) {
                cells.push(vec![n as f64, u, *v, profile.at(u)]);
            }
            report.note("sup_gap", format!("N={n}"), emp.sup_distance(&target));
            report.check("l1_gap", format!("N={n}"), emp.l1_distance(&target), "robin_l1");
        }
    }
    if !sites.rows.is_empty() {
        report.tables.push(sites);
    }
    if !cells.rows.is_empty() {
        report.tables.push(cells);
    }
    Ok(report)
}

/// `(i, o)` mass curve: the closed form when it applies, RK4 otherwise.
fn mass_curve(agg: &AggregateRates, m0: f64, times: &[f64]) -> Result<Vec<f64>> {
    if agg.k() == 2 && agg.monotone() {
        times.iter().map(|&t| ricatti_k2(agg, m0, t)).collect()
    } else {
        times
            .iter()
            .map(|&t| Ok(*ricatti_integrate(agg, m0, t, 1e-3)?.values.last().expect("initial value")))
            .collect()
    }
}

/// Mean mass on the `N^{1+theta}` scale against the mass equation.
pub fn run_hydrostatic_neumann_mass(spec: &ExperimentSpec, tol: &ToleranceTable) -> Result<ComparisonReport> {
    let mut report = ComparisonReport::new(spec, tol);
    let thetas = if spec.theta_list.is_empty() { vec![spec.params.theta()] } else { spec.theta_list.clone() };
    if let Some(t) = thetas.iter().find(|&&t| t <= 1.0) {
        return Err(Error::InvalidParams(format!("the mass equation needs theta > 1, got {t}")));
    }
    let agg = aggregates(&spec.params);
    let m_star = mass_fixed_point(&agg)?;
    report.note("m_star", "", m_star);
    let mut table = Table::new("mass", &["N", "theta", "m0", "t", "empirical", "predicted"]);
    let t_end = t_max(spec);
    let mut combo = 0u64;

    for &n in &spec.n_list {
        for &m0 in &spec.m0_list {
            let predicted = mass_curve(&agg, m0, &spec.t_grid)?;
            let mut curves: Vec<Vec<f64>> = Vec::new();
            for &theta in &thetas {
                let params = spec.params.with_theta(theta)?;
                let base = spec.seed_base.wrapping_add(combo << 32);
                combo += 1;
                let logs = run_ensemble(spec.ensemble_size, base, |_, seed| {
                    let mut state = LatticeState::init(n, &params, &InitialCondition::ConstantDensity(m0), seed)?;
                    let mut rng = state.dynamics_rng();
                    let mut log = ObservationLog::new(n, ProfileMode::None);
                    state.run_until(&mut rng, t_end, Scale::Subdiffusive, &spec.t_grid, &mut [&mut log])?;
                    Ok(log)
                })?;
                let mean = merge_all(logs)?.mean_mass();
                for ((&t, e), p) in spec.t_grid.iter().zip(&mean).zip(&predicted) {
                    table.push(vec![n as f64, theta, m0, t, *e, *p]);
                }
                let sup = mean.iter().zip(&predicted).map(|(e, p)| (e - p).abs()).fold(0.0, f64::max);
                let ctx = format!("N={n} theta={theta} m0={m0}");
                report.check("mass_sup_gap", ctx.clone(), sup, "mass_sup");
                report.check("terminal_gap_to_m_star", ctx, (mean.last().copied().unwrap_or(m0) - m_star).abs(), "mass_terminal");
                curves.push(mean);
            }
            for w in curves.windows(2) {
                let d = w[0].iter().zip(&w[1]).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
                report.note("theta_pair_sup_gap", format!("N={n} m0={m0}"), d);
            }
        }
    }
    report.tables.push(table);
    Ok(report)
}

/// Monte Carlo marginals against the exact forward equation, plus the
/// exact stationary law's residual. `t_grid` is in microscopic time here.
pub fn run_oracle_certify(spec: &ExperimentSpec, tol: &ToleranceTable) -> Result<ComparisonReport> {
    let mut report = ComparisonReport::new(spec, tol);
    let thetas = if spec.theta_list.is_empty() { vec![spec.params.theta()] } else { spec.theta_list.clone() };
    let mut table = Table::new("marginals", &["N", "theta", "t_micro", "x", "empirical", "exact"]);
    let mut combo = 0u64;

    for &n in &spec.n_list {
        if n - 1 > MAX_SITES {
            return Err(Error::StateSpaceTooLarge { sites: n - 1, cap: MAX_SITES });
        }
        let scale = (n * n) as f64;
        let macro_times: Vec<f64> = spec.t_grid.iter().map(|t| t / scale).collect();
        let t_end = macro_times.last().copied().unwrap_or(0.0);
        for &theta in &thetas {
            let params = spec.params.with_theta(theta)?;
            let f0 = spec.initial.grid(&params, spec.pde_m)?;
            let g = oracle::generator_matrix(n, &params)?;
            let start = Distribution::product(&(1..n).map(|x| f0.at(x as f64 / n as f64)).collect::<Vec<_>>())?;
            let initial = InitialCondition::BernoulliProfile(f0.clone());
            let base = spec.seed_base.wrapping_add(combo << 32);
            combo += 1;
            let runs = run_ensemble(spec.ensemble_size, base, |_, seed| {
                let mut state = LatticeState::init(n, &params, &initial, seed)?;
                let mut rng = state.dynamics_rng();
                let mut seen: Vec<Vec<u8>> = Vec::with_capacity(macro_times.len());
                let mut obs = |_: f64, s: &LatticeState| seen.push(s.occupation().to_vec());
                match state.run_until(&mut rng, t_end, Scale::Diffusive, &macro_times, &mut [&mut obs]) {
                    Ok(_) | Err(Error::Absorbed { .. }) => {}
                    Err(e) => return Err(e),
                }
                // an absorbed trajectory stays put
                while seen.len() < macro_times.len() {
                    seen.push(state.occupation().to_vec());
                }
                Ok(seen)
            })?;
            let e = spec.ensemble_size as f64;
            let mut worst: f64 = 0.0;
            for (si, &t) in spec.t_grid.iter().enumerate() {
                let exact = oracle::evolve_with(&g, &start, t)?.marginals();
                for x in 0..n - 1 {
                    let hits: u64 = runs.iter().map(|r| r[si][x] as u64).sum();
                    let p_hat = hits as f64 / e;
                    let p = exact[x];
                    let sd = (p * (1.0 - p) / e).sqrt();
                    let z = if sd > 0.0 { (p_hat - p).abs() / sd } else if p_hat == p { 0.0 } else { f64::INFINITY };
                    worst = worst.max(z);
                    table.push(vec![n as f64, theta, t, (x + 1) as f64, p_hat, p]);
                }
            }
            let ctx = format!("N={n} theta={theta}");
            report.check("max_marginal_gap_in_sd", ctx.clone(), worst, "oracle_sigmas");
            if aggregates(&params).irreducible() {
                let pi = oracle::stationary_with(&g)?;
                report.check("stationary_residual", ctx.clone(), g.residual(&pi.probs), "stationary_residual");
                report.note("detailed_balance_violation", ctx.clone(), g.detailed_balance_violation(&pi.probs));
                report.note("stationary_mean_mass", ctx, pi.mean_mass());
            }
        }
    }
    report.tables.push(table);
    Ok(report)
}

const RICATTI_HORIZON: f64 = 10.0;

fn random_rates<R: Rng>(rng: &mut R, k: usize, scale: f64, monotone: bool) -> Vec<f64> {
    let mut v: Vec<f64> = (0..k).map(|_| rng.random::<f64>() * scale).collect();
    if monotone {
        v.sort_by(|a, b| b.total_cmp(a));
    }
    v
}

/// Exponential-decay check: `|m_t - m*| <= |m0 - m*| exp(-v t)` with `v`
/// the smallest `V(m_s, m*)` along the RK4 path. Returns the largest excess.
fn decay_excess(agg: &AggregateRates, m0: f64, m_star: f64, t_end: f64, dt: f64) -> Result<f64> {
    let path = ricatti_integrate(agg, m0, t_end, dt)?;
    let p = DPair::aggregate(agg);
    let mut v_min = f64::INFINITY;
    for &m in &path.values {
        v_min = v_min.min(v_op(&p, m, m_star)?);
    }
    Ok(path
        .times
        .iter()
        .zip(&path.values)
        .map(|(&t, &m)| (m - m_star).abs() - (m0 - m_star).abs() * (-v_min * t).exp())
        .fold(f64::NEG_INFINITY, f64::max)
        .max(0.0))
}

/// Boundary-operator batteries: the difference identity, fixed points, and
/// the mass equation's closed form and decay bound.
pub fn run_operator_checks(spec: &ExperimentSpec, tol: &ToleranceTable) -> Result<ComparisonReport> {
    let mut report = ComparisonReport::new(spec, tol);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed_base);

    let mut pairs = vec![DPair::left(&spec.params), DPair::right(&spec.params)];
    let mut identity: f64 = 0.0;
    for draw in 0..spec.identity_draws {
        if draw % 100 == 0 {
            let k = rng.random_range(1..=5);
            let lambda = random_rates(&mut rng, k, 2.0, false);
            let sigma = random_rates(&mut rng, k, 2.0, false);
            pairs.push(DPair::new(lambda, sigma)?);
        }
        let p = &pairs[draw % pairs.len()];
        let (y, z): (f64, f64) = (rng.random(), rng.random());
        let lhs = d_op(p, y)? - d_op(p, z)?;
        identity = identity.max((lhs + (y - z) * v_op(p, y, z)?).abs());
    }
    report.check("difference_identity", format!("draws={}", spec.identity_draws), identity, "identity_abs");

    let mut half: f64 = 0.0;
    let mut constant: f64 = 0.0;
    for _ in 0..1000 {
        let k = rng.random_range(1..=5);
        let seq = random_rates(&mut rng, k, 2.0, true);
        if seq[0] > 0.0 {
            half = half.max((mass_fixed_point(&AggregateRates::new(seq.clone(), seq)?)? - 0.5).abs());
        }
        let (i, o) = (0.05 + 2.0 * rng.random::<f64>(), 0.05 + 2.0 * rng.random::<f64>());
        let m = mass_fixed_point(&AggregateRates::new(vec![i; k], vec![o; k])?)?;
        // (1 - m) sum m^(x-1) = 1 - m^K, so D(m) = 0 reads as a ratio
        let kk = k as i32;
        constant = constant.max(((1.0 - m.powi(kk)) / (1.0 - (1.0 - m).powi(kk)) - o / i).abs());
    }
    report.check("fixed_point_equal_rates", "draws=1000", half, "fixed_point_half");
    report.check("fixed_point_constant_rates", "draws=1000", constant, "fixed_point_const");

    let spec_agg = aggregates(&spec.params);
    let agg = if spec_agg.k() == 2 && spec_agg.monotone() && spec_agg.irreducible() {
        spec_agg
    } else {
        AggregateRates::new(vec![1.5, 0.5], vec![1.2, 0.7])?
    };
    let m_star = mass_fixed_point(&agg)?;
    let mut rk_gap: f64 = 0.0;
    let mut decay: f64 = 0.0;
    let mut curve = Table::new("ricatti", &["m0", "t", "rk4", "closed_form"]);
    for &m0 in &[0.0, 0.1, 0.5, 0.9, 1.0, m_star] {
        let path = ricatti_integrate(&agg, m0, RICATTI_HORIZON, 1e-3)?;
        for (idx, (&t, &m)) in path.times.iter().zip(&path.values).enumerate() {
            let exact = ricatti_k2(&agg, m0, t)?;
            rk_gap = rk_gap.max((m - exact).abs());
            if idx % 100 == 0 {
                curve.push(vec![m0, t, m, exact]);
            }
        }
        decay = decay.max(decay_excess(&agg, m0, m_star, RICATTI_HORIZON, 1e-3)?);
    }
    report.check("ricatti_rk4_vs_closed_form", format!("K=2 t<={RICATTI_HORIZON}"), rk_gap, "ricatti_rk4_sup");
    for _ in 0..20 {
        let k = rng.random_range(1..=5);
        let i_seq = random_rates(&mut rng, k, 2.0, true);
        let o_seq = random_rates(&mut rng, k, 2.0, true);
        let a = AggregateRates::new(i_seq, o_seq)?;
        if !a.irreducible() {
            continue;
        }
        let ms = mass_fixed_point(&a)?;
        for &m0 in &[0.0, 0.3, 1.0] {
            decay = decay.max(decay_excess(&a, m0, ms, RICATTI_HORIZON, 1e-3)?);
        }
    }
    report.check("decay_bound_excess", format!("t<={RICATTI_HORIZON}"), decay, "decay_slack");
    report.tables.push(curve);
    Ok(report)
}

/// PDE self-consistency: weak residual under refinement (at the first time
/// of `t_grid`), mild against finite differences (at the last), and kernel
/// normalisation.
pub fn run_pde_checks(spec: &ExperimentSpec, tol: &ToleranceTable) -> Result<ComparisonReport> {
    let mut report = ComparisonReport::new(spec, tol);
    let params = &spec.params;
    if params.theta() != 1.0 {
        return Err(Error::InvalidParams("PDE checks cover the Robin problem, theta = 1".into()));
    }
    let g = Polynomial(spec.test_function.clone());
    let t_weak = spec.t_grid.first().copied().unwrap_or(0.1);
    let residual = |m: usize, dt: f64| -> Result<f64> {
        let prob = PdeProblem::for_params(params.clone(), spec.initial.grid(params, m)?)?;
        let sol = solve(&prob, t_weak, m, Some(dt))?;
        Ok(weak_residual(&prob, &sol.frames, &g, t_weak)?.abs())
    };
    let coarse = residual(16, 2e-3)?;
    let fine = residual(32, 1e-3)?;
    report.note("weak_residual", "m=16 dt=2e-3", coarse);
    report.note("weak_residual", "m=32 dt=1e-3", fine);
    report.check("weak_residual_ratio", format!("t={t_weak}"), coarse / fine, "weak_ratio");

    let t_mild = t_max(spec);
    let dt = spec.pde_dt.unwrap_or(1e-4);
    let prob = PdeProblem::for_params(params.clone(), spec.initial.grid(params, spec.pde_m)?)?;
    let fd = solve_with(&prob, t_mild, spec.pde_m, SolveOptions { dt: Some(dt), record_every: usize::MAX })?;
    let mild = mild_solve(&prob, t_mild, spec.pde_m, dt)?;
    let gap = mild.last().sup_distance(fd.last());
    let mut table = Table::new("mild_vs_fd", &["u", "mild", "finite_difference"]);
    for (u, v) in mild.last().nodes().zip(&mild.last().values) {
        table.push(vec![u, *v, fd.last().at(u)]);
    }
    report.check("mild_vs_fd_sup", format!("m={} dt={dt} t={t_mild}", spec.pde_m), gap, "mild_sup");

    let cfg = KernelConfig::default();
    let mut norm: f64 = 0.0;
    for &t in &[1e-6, 1e-4, 1e-2, 0.1, 1.0, 10.0] {
        for &u in &[0.0, 0.1, 0.5, 0.9, 1.0] {
            norm = norm.max((kernel_cell_integral(&cfg, t, u, 0.0, 1.0) - 1.0).abs());
        }
    }
    report.check("kernel_normalisation", "t in [1e-6, 10]", norm, "kernel_norm");
    report.tables.push(table);
    Ok(report)
}
