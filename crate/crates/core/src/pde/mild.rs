//! Duhamel form of the Robin problem,
//!
//! ```text
//! rho_t(u) = int P_t(u, v) f0(v) dv
//!          + int_0^t P_{t-s}(u, 0) D_{a,g}(rho_s(0)) + P_{t-s}(u, 1) D_{b,d}(rho_s(1)) ds,
//! ```
//!
//! solved for the two boundary traces first. The fluxes are averaged over
//! each time step and integrated against the kernel exactly, which absorbs
//! the `(t - s)^{-1/2}` singularity. The interior is then reconstructed at
//! the recorded times.

use super::kernel::{kernel_time_integral, KernelConfig};
use super::{BcKind, PdeProblem, PdeSolution, SolveManifest};
use crate::boundary::{d_eval, DPair};
use crate::error::{Error, Result};
use crate::observables::GridFunction;

const SWEEP_TOL: f64 = 1e-10;
const SWEEP_CAP: usize = 200;
/// Cells farther than this many standard deviations from `u` are skipped.
const REACH_SIGMAS: f64 = 10.0;

/// `int_0^1 P_t(u, v) f0(v) dv` for piecewise-linear `f0`.
fn initial_term(f0: &GridFunction, cfg: &KernelConfig, t: f64, u: f64) -> f64 {
    if t <= 0.0 {
        return f0.at(u);
    }
    let s = (4.0 * t).sqrt();
    let reach = REACH_SIGMAS * (2.0 * t).sqrt();
    let phi = |d: f64| (-d * d / (4.0 * t)).exp() / (std::f64::consts::PI * 4.0 * t).sqrt();
    let n = cfg.images_for(t);
    let m = f0.m();
    let h = 1.0 / m as f64;
    let mut sum = 0.0;
    for k in -n..=n {
        let shift = 2.0 * k as f64;
        for sign in [1.0, -1.0] {
            // image of [0, 1] under v -> shift + sign v
            let (lo, hi) = if sign > 0.0 { (shift, shift + 1.0) } else { (shift - 1.0, shift) };
            if u < lo - reach || u > hi + reach {
                continue;
            }
            for i in 0..m {
                let (a, b) = (i as f64 * h, (i + 1) as f64 * h);
                let (w1, w2) = if sign > 0.0 { (shift + a, shift + b) } else { (shift - b, shift - a) };
                if w2 < u - reach || w1 > u + reach {
                    continue;
                }
                let (fa, fb) = (f0.values[i], f0.values[i + 1]);
                let c1 = (fb - fa) / h;
                let c0 = fa - c1 * a;
                let g0 = 0.5 * (libm::erf((w2 - u) / s) - libm::erf((w1 - u) / s));
                let g1 = 2.0 * t * (phi(w1 - u) - phi(w2 - u));
                sum += (c0 + c1 * sign * (u - shift)) * g0 + c1 * sign * g1;
            }
        }
    }
    sum
}

/// Kernel weights `W_l = int_{l dt}^{(l+1) dt} P_s(u, v) ds`, `l = 0..len`.
fn toeplitz_weights(cfg: &KernelConfig, dt: f64, len: usize, u: f64, v: f64) -> Vec<f64> {
    (0..len)
        .map(|l| kernel_time_integral(cfg, l as f64 * dt, (l + 1) as f64 * dt, u, v))
        .collect()
}

pub fn mild_solve(problem: &PdeProblem, t_end: f64, m: usize, dt: f64) -> Result<PdeSolution> {
    mild_solve_with(problem, t_end, m, dt, 0)
}

/// As [`mild_solve`], reconstructing the grid every `record_every` steps
/// (`0` keeps about ten evenly spaced frames).
pub fn mild_solve_with(
    problem: &PdeProblem,
    t_end: f64,
    m: usize,
    dt: f64,
    record_every: usize,
) -> Result<PdeSolution> {
    if problem.bc() != BcKind::NonlinearRobin {
        return Err(Error::Invalid("the mild form is implemented for Robin conditions".into()));
    }
    if m < 1 || !(dt > 0.0) || !(t_end > 0.0 && t_end.is_finite()) {
        return Err(Error::Invalid(format!("need m >= 1, dt > 0, t_end > 0; got {m}, {dt}, {t_end}")));
    }
    let cfg = KernelConfig::default();
    let steps = (t_end / dt).ceil() as usize;
    let dt = t_end / steps as f64;
    let f0 = problem.f0();
    let left = DPair::left(problem.params());
    let right = DPair::right(problem.params());

    let w00 = toeplitz_weights(&cfg, dt, steps, 0.0, 0.0);
    let w01 = toeplitz_weights(&cfg, dt, steps, 0.0, 1.0);
    let w11 = toeplitz_weights(&cfg, dt, steps, 1.0, 1.0);
    let i0: Vec<f64> = (0..=steps).map(|n| initial_term(f0, &cfg, n as f64 * dt, 0.0)).collect();
    let i1: Vec<f64> = (0..=steps).map(|n| initial_term(f0, &cfg, n as f64 * dt, 1.0)).collect();

    let mut a = i0.clone();
    let mut b = i1.clone();
    a[0] = f0.values[0];
    b[0] = f0.values[f0.m()];
    let mut q0: Vec<f64> = a.iter().map(|&x| d_eval(&left, x)).collect();
    let mut q1: Vec<f64> = b.iter().map(|&x| d_eval(&right, x)).collect();

    let mut sweeps = 0;
    loop {
        sweeps += 1;
        let mut change: f64 = 0.0;
        for n in 1..=steps {
            let (mut sa, mut sb) = (i0[n], i1[n]);
            for j in 0..n {
                let l = n - 1 - j;
                let qa = 0.5 * (q0[j] + q0[j + 1]);
                let qb = 0.5 * (q1[j] + q1[j + 1]);
                sa += qa * w00[l] + qb * w01[l];
                sb += qa * w01[l] + qb * w11[l];
            }
            change = change.max((sa - a[n]).abs()).max((sb - b[n]).abs());
            a[n] = sa;
            b[n] = sb;
            q0[n] = d_eval(&left, sa);
            q1[n] = d_eval(&right, sb);
        }
        if !change.is_finite() {
            return Err(Error::NonFinite("boundary traces of the mild form".into()));
        }
        if change <= SWEEP_TOL {
            break;
        }
        if sweeps >= SWEEP_CAP {
            return Err(Error::NoConvergence {
                what: "mild-form boundary traces",
                iterations: sweeps,
                last_change: change,
            });
        }
    }

    let stride = if record_every == 0 { (steps / 10).max(1) } else { record_every };
    let mut record: Vec<usize> = (0..=steps).step_by(stride).collect();
    if *record.last().expect("step 0 is recorded") != steps {
        record.push(steps);
    }
    let nodes: Vec<f64> = (0..=m).map(|i| i as f64 / m as f64).collect();
    let mut frames = Vec::with_capacity(record.len());
    for &n in &record {
        let t = if n == steps { t_end } else { n as f64 * dt };
        let values = if n == 0 {
            f0.resample(m).values
        } else {
            nodes
                .iter()
                .map(|&u| {
                    let mut v = initial_term(f0, &cfg, t, u);
                    for j in 0..n {
                        let l = n - 1 - j;
                        let (t0, t1) = (l as f64 * dt, (l + 1) as f64 * dt);
                        let qa = 0.5 * (q0[j] + q0[j + 1]);
                        let qb = 0.5 * (q1[j] + q1[j + 1]);
                        v += qa * kernel_time_integral(&cfg, t0, t1, u, 0.0)
                            + qb * kernel_time_integral(&cfg, t0, t1, u, 1.0);
                    }
                    v
                })
                .collect()
        };
        frames.push(GridFunction { values, t });
    }

    Ok(PdeSolution {
        frames,
        manifest: SolveManifest {
            scheme: "mild/product-integration".into(),
            m,
            dt,
            steps,
            picard_max: sweeps,
            picard_total: sweeps,
            dt_halvings: 0,
        },
    })
}
