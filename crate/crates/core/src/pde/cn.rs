//! Crank–Nicolson on the nodes `u_i = i/m` with ghost nodes at both ends.
//!
//! The boundary conditions enter only through the fluxes
//! `g0 = d_u rho(0)` and `g1 = d_u rho(1)`, which depend on the new boundary
//! values. Each step solves the linear system with frozen fluxes and
//! iterates on the two boundary values.

use super::{BcKind, PdeProblem, PdeSolution, SolveManifest};
use crate::boundary::{d_eval, DPair};
use crate::error::{Error, Result};
use crate::observables::GridFunction;

const PICARD_TOL: f64 = 1e-12;
const PICARD_CAP: usize = 50;
const MAX_HALVINGS: usize = 4;
const RANGE_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    /// `None` picks `min(1e-3, 0.5 / m^2)`.
    pub dt: Option<f64>,
    /// Keep every `record_every`-th step (the last step is always kept).
    pub record_every: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self { dt: None, record_every: 1 }
    }
}

pub fn solve(problem: &PdeProblem, t_end: f64, m: usize, dt: Option<f64>) -> Result<PdeSolution> {
    solve_with(problem, t_end, m, SolveOptions { dt, record_every: 1 })
}

pub fn solve_with(problem: &PdeProblem, t_end: f64, m: usize, opts: SolveOptions) -> Result<PdeSolution> {
    if m < 8 {
        return Err(Error::Invalid(format!("grid needs m >= 8, got {m}")));
    }
    if !(t_end >= 0.0 && t_end.is_finite()) {
        return Err(Error::Invalid(format!("t_end = {t_end}")));
    }
    let mut dt = opts.dt.unwrap_or_else(|| (1e-3f64).min(0.5 / (m * m) as f64));
    if !(dt > 0.0) {
        return Err(Error::Invalid(format!("dt = {dt}")));
    }
    let mut last_err = None;
    for halvings in 0..=MAX_HALVINGS {
        match attempt(problem, t_end, m, dt, opts.record_every.max(1)) {
            Ok(mut sol) => {
                sol.manifest.dt_halvings = halvings;
                return Ok(sol);
            }
            Err(e @ Error::NoConvergence { .. }) => {
                last_err = Some(e);
                dt *= 0.5;
            }
            Err(e) => return Err(e),
        }
    }
    Err(last_err.expect("loop ran at least once"))
}

/// `LU` factors of the constant tridiagonal matrix `I - (dt/2) L`.
struct Tridiag {
    lower: Vec<f64>,
    diag: Vec<f64>,
    upper: Vec<f64>,
}

impl Tridiag {
    fn new(m: usize, r: f64) -> Self {
        // r = dt / (2 h^2)
        let n = m + 1;
        let mut lower = vec![-r; n];
        let mut upper = vec![-r; n];
        let diag = vec![1.0 + 2.0 * r; n];
        lower[0] = 0.0;
        upper[m] = 0.0;
        // ghost nodes double the inward coupling at both ends
        upper[0] = -2.0 * r;
        lower[m] = -2.0 * r;
        // Thomas factorisation, stored as modified diagonal
        let mut t = Self { lower, diag, upper };
        for i in 1..n {
            let w = t.lower[i] / t.diag[i - 1];
            t.lower[i] = w;
            t.diag[i] -= w * t.upper[i - 1];
        }
        t
    }

    fn solve(&self, rhs: &mut [f64]) {
        let n = rhs.len();
        for i in 1..n {
            rhs[i] -= self.lower[i] * rhs[i - 1];
        }
        rhs[n - 1] /= self.diag[n - 1];
        for i in (0..n - 1).rev() {
            rhs[i] = (rhs[i] - self.upper[i] * rhs[i + 1]) / self.diag[i];
        }
    }
}

fn attempt(problem: &PdeProblem, t_end: f64, m: usize, dt: f64, record_every: usize) -> Result<PdeSolution> {
    let h = 1.0 / m as f64;
    let left = DPair::left(problem.params());
    let right = DPair::right(problem.params());
    let robin = problem.bc() == BcKind::NonlinearRobin;
    let fluxes = |u0: f64, um: f64| -> (f64, f64) {
        if robin {
            (-d_eval(&left, u0), d_eval(&right, um))
        } else {
            (0.0, 0.0)
        }
    };

    let steps = if t_end == 0.0 { 0 } else { (t_end / dt).ceil() as usize };
    let dt_eff = if steps == 0 { dt } else { t_end / steps as f64 };
    let r = dt_eff / (2.0 * h * h);
    let lu = Tridiag::new(m, r);

    let mut rho = problem.f0().resample(m).values;
    let mut frames = vec![GridFunction { values: rho.clone(), t: 0.0 }];
    let (mut picard_max, mut picard_total) = (0, 0);
    let mut rhs = vec![0.0; m + 1];
    let mut next = vec![0.0; m + 1];

    for step in 1..=steps {
        let (g0_old, g1_old) = fluxes(rho[0], rho[m]);
        // explicit half: rho + (dt/2) L rho, without the flux terms
        rhs[0] = rho[0] + r * (2.0 * rho[1] - 2.0 * rho[0]);
        for i in 1..m {
            rhs[i] = rho[i] + r * (rho[i - 1] - 2.0 * rho[i] + rho[i + 1]);
        }
        rhs[m] = rho[m] + r * (2.0 * rho[m - 1] - 2.0 * rho[m]);
        // flux contributions: node 0 gets -2h g0 / h^2, node m gets +2h g1 / h^2
        let flux_coef = r * 2.0 * h;
        let (mut g0, mut g1) = (g0_old, g1_old);
        let mut iters = 0;
        let mut change = f64::INFINITY;
        while iters < PICARD_CAP {
            iters += 1;
            next.copy_from_slice(&rhs);
            next[0] -= flux_coef * (g0_old + g0);
            next[m] += flux_coef * (g1_old + g1);
            lu.solve(&mut next);
            if !robin {
                change = 0.0;
                break;
            }
            let (n0, n1) = fluxes(next[0], next[m]);
            // boundary residual: how far the frozen fluxes are from the ones implied
            change = (n0 - g0).abs().max((n1 - g1).abs());
            g0 = n0;
            g1 = n1;
            if change <= PICARD_TOL {
                break;
            }
        }
        if change > PICARD_TOL {
            return Err(Error::NoConvergence {
                what: "boundary iteration",
                iterations: iters,
                last_change: change,
            });
        }
        if robin && iters > 1 {
            // final linear solve with the converged fluxes
            next.copy_from_slice(&rhs);
            next[0] -= flux_coef * (g0_old + g0);
            next[m] += flux_coef * (g1_old + g1);
            lu.solve(&mut next);
        }
        picard_max = picard_max.max(iters);
        picard_total += iters;
        std::mem::swap(&mut rho, &mut next);

        if let Some((i, v)) = rho
            .iter()
            .enumerate()
            .find(|(_, v)| !v.is_finite() || **v < -RANGE_SLACK || **v > 1.0 + RANGE_SLACK)
        {
            return Err(Error::Invalid(format!(
                "solution left [0, 1] at step {step}, node {i}: {v} (dt = {dt_eff}, m = {m})"
            )));
        }
        if step % record_every == 0 || step == steps {
            let t = if step == steps { t_end } else { step as f64 * dt_eff };
            frames.push(GridFunction { values: rho.clone(), t });
        }
    }

    Ok(PdeSolution {
        frames,
        manifest: SolveManifest {
            scheme: "crank-nicolson/ghost-node".into(),
            m,
            dt: dt_eff,
            steps,
            picard_max,
            picard_total,
            dt_halvings: 0,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boundary::stationary_profile;
    use crate::params::BoundaryParams;

    fn k2_params() -> BoundaryParams {
        BoundaryParams::new(vec![1.0, 0.5], vec![0.8, 0.4], vec![1.0, 0.5], vec![0.9, 0.45], 1.0).unwrap()
    }

    fn trapezoid(v: &[f64]) -> f64 {
        let h = 1.0 / (v.len() - 1) as f64;
        h * (v.iter().sum::<f64>() - 0.5 * (v[0] + v[v.len() - 1]))
    }

    #[test]
    fn neumann_keeps_constants() {
        let p = BoundaryParams::uniform(&[1.0, 0.5], 2.0).unwrap();
        let prob = PdeProblem::for_params(p, GridFunction::constant(32, 0.3)).unwrap();
        let sol = solve(&prob, 0.2, 32, None).unwrap();
        assert!(sol.frames.iter().all(|f| f.values.iter().all(|v| (v - 0.3).abs() < 1e-14)));
    }

    #[test]
    fn neumann_conserves_mass() {
        let p = BoundaryParams::uniform(&[1.0], 3.0).unwrap();
        let f0 = GridFunction::from_fn(40, 0.0, |u| 0.5 + 0.4 * (3.0 * u).sin() * u);
        let prob = PdeProblem::for_params(p, f0).unwrap();
        let sol = solve(&prob, 0.5, 40, None).unwrap();
        let m0 = trapezoid(&sol.frames[0].values);
        for f in &sol.frames {
            assert!((trapezoid(&f.values) - m0).abs() < 1e-10);
        }
    }

    #[test]
    fn stationary_profile_does_not_drift() {
        let p = k2_params();
        let s = stationary_profile(&p).unwrap();
        let prob = PdeProblem::for_params(p, s.grid(128)).unwrap();
        let sol = solve_with(&prob, 1.0, 128, SolveOptions { dt: None, record_every: 1000 }).unwrap();
        for f in &sol.frames {
            for (u, v) in f.nodes().zip(&f.values) {
                assert!((v - s.at(u)).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn mirror_symmetric_problem_stays_symmetric() {
        let p = BoundaryParams::uniform(&[0.7], 1.0).unwrap();
        let p = BoundaryParams::new(vec![0.7], vec![0.7], vec![0.2], vec![0.2], p.theta()).unwrap();
        let f0 = GridFunction::from_fn(64, 0.0, |u| 0.2 + 0.6 * (std::f64::consts::PI * u).sin());
        let prob = PdeProblem::for_params(p, f0).unwrap();
        let sol = solve(&prob, 0.3, 64, None).unwrap();
        for f in &sol.frames {
            let v = &f.values;
            for i in 0..=64 {
                assert!((v[i] - v[64 - i]).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn robin_mass_rate_matches_fluxes() {
        let p = k2_params();
        let prob = PdeProblem::for_params(p.clone(), GridFunction::from_fn(64, 0.0, |u| u)).unwrap();
        let sol = solve(&prob, 0.05, 64, None).unwrap();
        // d/dt mass = D_{b,d}(rho(1)) + D_{a,g}(rho(0)), integrated by the trapezoid rule in time
        let (l, r) = (DPair::left(&p), DPair::right(&p));
        let mut predicted = trapezoid(&sol.frames[0].values);
        for w in sol.frames.windows(2) {
            let q = |f: &GridFunction| d_eval(&l, f.values[0]) + d_eval(&r, f.values[64]);
            predicted += 0.5 * (w[1].t - w[0].t) * (q(&w[0]) + q(&w[1]));
        }
        assert!((trapezoid(&sol.last().values) - predicted).abs() < 1e-10);
    }

    #[test]
    fn rejects_mismatched_boundary_kind() {
        let p = BoundaryParams::uniform(&[1.0], 2.0).unwrap();
        assert!(PdeProblem::new(p, GridFunction::constant(8, 0.5), BcKind::NonlinearRobin).is_err());
        let q = BoundaryParams::uniform(&[1.0], 1.0).unwrap();
        assert!(PdeProblem::new(q.clone(), GridFunction::constant(8, 0.5), BcKind::Neumann).is_err());
        let prob = PdeProblem::for_params(q, GridFunction::constant(8, 0.5)).unwrap();
        assert!(solve(&prob, 0.1, 4, None).is_err());
    }
}
