//! The weak-formulation functional
//!
//! ```text
//! F(rho, G, t) = <rho_t, G_t> - <f0, G_0> - int_0^t <rho_s, (d_uu + d_s) G_s> ds
//!              + int_0^t rho_s(1) d_u G_s(1) - rho_s(0) d_u G_s(0) ds
//!              - int_0^t G_s(1) D_{b,d}(rho_s(1)) + G_s(0) D_{a,g}(rho_s(0)) ds
//! ```
//!
//! which vanishes on weak solutions. Neumann problems drop the last line.
//! Space and time integrals use the trapezoid rule on the stored frames.

use std::f64::consts::PI;

use super::{BcKind, PdeProblem};
use crate::boundary::{d_eval, DPair};
use crate::error::{Error, Result};
use crate::observables::GridFunction;

pub trait TestFunction {
    fn value(&self, t: f64, u: f64) -> f64;
    fn du(&self, t: f64, u: f64) -> f64;
    fn duu(&self, t: f64, u: f64) -> f64;
    fn dt(&self, t: f64, u: f64) -> f64;
}

/// Time-independent polynomial `sum_k c_k u^k`.
#[derive(Debug, Clone, PartialEq)]
pub struct Polynomial(pub Vec<f64>);

impl Polynomial {
    fn eval(c: &[f64], u: f64) -> f64 {
        c.iter().rev().fold(0.0, |acc, &ck| acc * u + ck)
    }
    fn derivative(c: &[f64]) -> Vec<f64> {
        c.iter().enumerate().skip(1).map(|(k, &ck)| k as f64 * ck).collect()
    }
}

impl TestFunction for Polynomial {
    fn value(&self, _: f64, u: f64) -> f64 {
        Self::eval(&self.0, u)
    }
    fn du(&self, _: f64, u: f64) -> f64 {
        Self::eval(&Self::derivative(&self.0), u)
    }
    fn duu(&self, _: f64, u: f64) -> f64 {
        Self::eval(&Self::derivative(&Self::derivative(&self.0)), u)
    }
    fn dt(&self, _: f64, _: f64) -> f64 {
        0.0
    }
}

/// `cos(k pi u)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cosine(pub f64);

impl TestFunction for Cosine {
    fn value(&self, _: f64, u: f64) -> f64 {
        (self.0 * PI * u).cos()
    }
    fn du(&self, _: f64, u: f64) -> f64 {
        -self.0 * PI * (self.0 * PI * u).sin()
    }
    fn duu(&self, _: f64, u: f64) -> f64 {
        -(self.0 * PI).powi(2) * (self.0 * PI * u).cos()
    }
    fn dt(&self, _: f64, _: f64) -> f64 {
        0.0
    }
}

fn pairing(f: &GridFunction, g: impl Fn(f64) -> f64) -> f64 {
    let m = f.m();
    let h = 1.0 / m as f64;
    let mut s = 0.0;
    for (i, v) in f.values.iter().enumerate() {
        let w = if i == 0 || i == m { 0.5 } else { 1.0 };
        s += w * v * g(i as f64 * h);
    }
    h * s
}

/// `F(rho, G, t)` over the frames with time at most `t`.
pub fn weak_residual(problem: &PdeProblem, frames: &[GridFunction], g: &dyn TestFunction, t: f64) -> Result<f64> {
    let first = frames.first().ok_or_else(|| Error::Invalid("no frames".into()))?;
    if first.t != 0.0 {
        return Err(Error::Invalid("first frame must be the initial datum".into()));
    }
    let used: Vec<&GridFunction> = frames.iter().take_while(|f| f.t <= t + 1e-12).collect();
    let last = used.last().expect("first frame has t = 0");
    let robin = problem.bc() == BcKind::NonlinearRobin;
    let (left, right) = (DPair::left(problem.params()), DPair::right(problem.params()));

    let integrand = |f: &GridFunction| -> f64 {
        let s = f.t;
        let m = f.m();
        let bulk = pairing(f, |u| g.duu(s, u) + g.dt(s, u));
        let edge = f.values[m] * g.du(s, 1.0) - f.values[0] * g.du(s, 0.0);
        let flux = if robin {
            g.value(s, 1.0) * d_eval(&right, f.values[m]) + g.value(s, 0.0) * d_eval(&left, f.values[0])
        } else {
            0.0
        };
        -bulk + edge - flux
    };

    let mut time_part = 0.0;
    for w in used.windows(2) {
        time_part += 0.5 * (w[1].t - w[0].t) * (integrand(w[0]) + integrand(w[1]));
    }
    let end = pairing(last, |u| g.value(last.t, u));
    let start = pairing(first, |u| g.value(0.0, u));
    Ok(end - start + time_part)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::BoundaryParams;
    use crate::pde::solve;

    #[test]
    fn constant_neumann_solution_has_no_residual() {
        let p = BoundaryParams::uniform(&[1.0], 2.0).unwrap();
        let prob = PdeProblem::for_params(p, GridFunction::constant(64, 0.4)).unwrap();
        let frames: Vec<GridFunction> = (0..=10)
            .map(|n| GridFunction { values: vec![0.4; 65], t: n as f64 * 0.1 })
            .collect();
        let r = weak_residual(&prob, &frames, &Cosine(1.0), 1.0).unwrap();
        assert!(r.abs() < 1e-8, "{r}");
    }

    #[test]
    fn residual_shrinks_with_resolution() {
        let p = BoundaryParams::new(vec![1.0, 0.5], vec![0.8, 0.4], vec![1.0, 0.5], vec![0.9, 0.45], 1.0)
            .unwrap();
        let g = Polynomial(vec![0.3, -1.0, 0.5, 0.7]);
        let res = |m: usize, dt: f64| {
            let prob = PdeProblem::for_params(p.clone(), GridFunction::from_fn(m, 0.0, |u| u)).unwrap();
            let sol = solve(&prob, 0.1, m, Some(dt)).unwrap();
            weak_residual(&prob, &sol.frames, &g, 0.1).unwrap().abs()
        };
        let coarse = res(16, 2e-3);
        let fine = res(32, 1e-3);
        assert!(coarse / fine >= 3.5, "{coarse} -> {fine}");
    }

    #[test]
    fn time_reversal_is_detected() {
        let p = BoundaryParams::new(vec![1.0, 0.5], vec![0.8, 0.4], vec![1.0, 0.5], vec![0.9, 0.45], 1.0)
            .unwrap();
        let prob = PdeProblem::for_params(p, GridFunction::from_fn(32, 0.0, |u| u * u)).unwrap();
        let sol = solve(&prob, 0.1, 32, None).unwrap();
        let g = Polynomial(vec![1.0, 0.0, 1.0]);
        let forward = weak_residual(&prob, &sol.frames, &g, 0.1).unwrap();
        let mut reversed = sol.frames.clone();
        let times: Vec<f64> = reversed.iter().map(|f| f.t).collect();
        reversed.reverse();
        for (f, t) in reversed.iter_mut().zip(times) {
            f.t = t;
        }
        let backward = weak_residual(&prob, &reversed, &g, 0.1).unwrap();
        assert!(backward.abs() > 1e3 * forward.abs().max(1e-9), "{forward} vs {backward}");
    }
}
