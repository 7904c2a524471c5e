//! Macroscopic boundary operators and the mass and stationary-profile
//! problems built on them.
//!
//! For non-negative sequences `lambda, sigma` of length `K`,
//!
//! ```text
//! D(f) = sum_x lambda_x (1 - f) f^(x-1) - sigma_x f (1 - f)^(x-1)
//! ```
//!
//! and `D(y) - D(z) = -(y - z) V(y, z)` with `V` a polynomial that is
//! positive under monotone rates.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::{validate, AggregateRates, BoundaryParams};

const DOMAIN_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DPair {
    pub lambda: Vec<f64>,
    pub sigma: Vec<f64>,
}

impl DPair {
    pub fn new(lambda: Vec<f64>, sigma: Vec<f64>) -> Result<Self> {
        if lambda.is_empty() || lambda.len() != sigma.len() {
            return Err(Error::InvalidParams("lambda and sigma need equal, positive length".into()));
        }
        if lambda.iter().chain(&sigma).any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::InvalidParams("boundary rates must be non-negative".into()));
        }
        Ok(Self { lambda, sigma })
    }

    /// `(alpha, gamma)`: the left reservoir.
    pub fn left(p: &BoundaryParams) -> Self {
        Self { lambda: p.alpha().to_vec(), sigma: p.gamma().to_vec() }
    }

    /// `(beta, delta)`: the right reservoir.
    pub fn right(p: &BoundaryParams) -> Self {
        Self { lambda: p.beta().to_vec(), sigma: p.delta().to_vec() }
    }

    pub fn aggregate(agg: &AggregateRates) -> Self {
        Self { lambda: agg.i_seq.clone(), sigma: agg.o_seq.clone() }
    }

    pub fn k(&self) -> usize {
        self.lambda.len()
    }

    /// Roles of creation and removal exchanged.
    pub fn swapped(&self) -> Self {
        Self { lambda: self.sigma.clone(), sigma: self.lambda.clone() }
    }
}

fn check_unit(f: f64) -> Result<f64> {
    if !f.is_finite() || f < -DOMAIN_SLACK || f > 1.0 + DOMAIN_SLACK {
        return Err(Error::Domain { value: f });
    }
    Ok(f.clamp(0.0, 1.0))
}

/// `D` without domain checks; the polynomial is defined on all of R.
pub(crate) fn d_eval(p: &DPair, f: f64) -> f64 {
    let g = 1.0 - f;
    let (mut fp, mut gp) = (1.0, 1.0);
    let mut sum = 0.0;
    for (l, s) in p.lambda.iter().zip(&p.sigma) {
        sum += l * g * fp - s * f * gp;
        fp *= f;
        gp *= g;
    }
    sum
}

pub fn d_op(p: &DPair, f: f64) -> Result<f64> {
    Ok(d_eval(p, check_unit(f)?))
}

/// `v_x(y, z) = sum_{i=0}^{x-1} y^(x-1-i) z^i` for `x = 1..=k`, evaluated
/// with the arguments in a fixed order so the result is bitwise symmetric.
fn v_terms(y: f64, z: f64, k: usize) -> Vec<f64> {
    let (hi, lo) = if y >= z { (y, z) } else { (z, y) };
    // v_{x+1} = hi * v_x + lo^x
    let mut out = Vec::with_capacity(k);
    let mut v = 1.0;
    let mut lo_pow = 1.0;
    for _ in 0..k {
        out.push(v);
        lo_pow *= lo;
        v = hi * v + lo_pow;
    }
    out
}

fn v_phi(phi: &[f64], y: f64, z: f64) -> f64 {
    let k = phi.len();
    let v = v_terms(y, z, k);
    (0..k)
        .map(|x| {
            let next = if x + 1 < k { phi[x + 1] } else { 0.0 };
            (phi[x] - next) * v[x]
        })
        .sum()
}

pub(crate) fn v_eval(p: &DPair, y: f64, z: f64) -> f64 {
    v_phi(&p.lambda, y, z) + v_phi(&p.sigma, 1.0 - y, 1.0 - z)
}

pub fn v_op(p: &DPair, y: f64, z: f64) -> Result<f64> {
    Ok(v_eval(p, check_unit(y)?, check_unit(z)?))
}

/// Bisection for the root of a function that is positive at `lo` and
/// negative at `hi`.
fn bisect_decreasing(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, width: f64) -> f64 {
    for _ in 0..200 {
        if hi - lo <= width {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let v = f(mid);
        if v == 0.0 {
            return mid;
        }
        if v > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// The mass `m*` with `D_{i,o}(m*) = 0`.
pub fn mass_fixed_point(agg: &AggregateRates) -> Result<f64> {
    if !agg.irreducible() {
        return Err(Error::Assumption(
            "i_1 and o_1 must both be positive for a unique fixed mass".into(),
        ));
    }
    let p = DPair::aggregate(agg);
    let (d0, d1) = (d_eval(&p, 0.0), d_eval(&p, 1.0));
    if !(d0 > 0.0 && d1 < 0.0) {
        return Err(Error::Assumption(format!("D(0) = {d0}, D(1) = {d1}: no sign change")));
    }
    Ok(bisect_decreasing(|m| d_eval(&p, m), 0.0, 1.0, 1e-15))
}

/// Closed-form data for the `K = 2` mass equation `dm/dt = a m^2 + b m + c`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RicattiSolution {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub delta_disc: f64,
    /// `(-b + sqrt(Delta)) / (2a)`; infinite when `a = 0`.
    pub kappa_plus: f64,
    /// `(-b - sqrt(Delta)) / (2a)`, the attracting root.
    pub kappa_minus: f64,
    pub m_star: f64,
}

impl RicattiSolution {
    pub fn new(agg: &AggregateRates) -> Result<Self> {
        if agg.k() != 2 {
            return Err(Error::InvalidParams(format!("closed form needs K = 2, got {}", agg.k())));
        }
        if !agg.irreducible() {
            return Err(Error::Assumption("i_1 + o_1 must be positive on both sides".into()));
        }
        let (i1, i2, o1, o2) = (agg.i_seq[0], agg.i_seq[1], agg.o_seq[0], agg.o_seq[1]);
        let a = -(i2 - o2);
        let b = i2 - o2 - (i1 + o1);
        let c = i1;
        let delta_disc = b * b - 4.0 * a * c;
        let sq = delta_disc.sqrt();
        // conjugate form: no cancellation for small a
        let kappa_minus = 2.0 * c / (sq - b);
        let kappa_plus = if a.abs() < 1e-14 { f64::INFINITY } else { (-b + sq) / (2.0 * a) };
        Ok(Self {
            a,
            b,
            c,
            delta_disc,
            kappa_plus,
            kappa_minus,
            m_star: kappa_minus.clamp(0.0, 1.0),
        })
    }

    /// `m_t` from `m_0`.
    ///
    /// Written for `e_t = m_t - kappa_minus`, which solves the Bernoulli
    /// equation `e' = a e^2 - sqrt(Delta) e`:
    /// `e_t = e_0 E / (1 - e_0 (a / sqrt(Delta)) (1 - E))`, `E = exp(-sqrt(Delta) t)`.
    /// This agrees with `(kappa_minus - eps_t kappa_plus) / (1 - eps_t)` and
    /// with the `a = 0` exponential, and stays accurate as `a -> 0`.
    pub fn mass_at(&self, m0: f64, t: f64) -> f64 {
        let sq = self.delta_disc.sqrt();
        let e0 = m0 - self.kappa_minus;
        if e0 == 0.0 {
            return m0;
        }
        let e = (-sq * t).exp();
        self.kappa_minus + e0 * e / (1.0 - e0 * (self.a / sq) * (1.0 - e))
    }
}

pub fn ricatti_k2(agg: &AggregateRates, m0: f64, t: f64) -> Result<f64> {
    let m0 = check_unit(m0)?;
    if t < 0.0 || !t.is_finite() {
        return Err(Error::Invalid(format!("time {t} must be finite and non-negative")));
    }
    if !agg.monotone() {
        return Err(Error::Assumption("aggregate rates must be non-increasing".into()));
    }
    Ok(RicattiSolution::new(agg)?.mass_at(m0, t))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MassTrajectory {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    /// Steps after which the state had to be clipped back into `[0, 1]`.
    pub clip_events: Vec<usize>,
}

/// Classical RK4 for `dm/dt = D_{i,o}(m)`.
pub fn ricatti_integrate(agg: &AggregateRates, m0: f64, t_end: f64, dt: f64) -> Result<MassTrajectory> {
    let m0 = check_unit(m0)?;
    if !(dt > 0.0 && dt.is_finite()) || !(t_end >= 0.0 && t_end.is_finite()) {
        return Err(Error::Invalid(format!("need dt > 0 and t_end >= 0, got {dt}, {t_end}")));
    }
    let p = DPair::aggregate(agg);
    let rhs = |m: f64| d_eval(&p, m);
    let steps = (t_end / dt).ceil() as usize;
    let mut times = Vec::with_capacity(steps + 1);
    let mut values = Vec::with_capacity(steps + 1);
    let mut clip_events = Vec::new();
    let mut m = m0;
    times.push(0.0);
    values.push(m);
    for s in 0..steps {
        let t0 = s as f64 * dt;
        let h = dt.min(t_end - t0);
        let k1 = rhs(m);
        let k2 = rhs(m + 0.5 * h * k1);
        let k3 = rhs(m + 0.5 * h * k2);
        let k4 = rhs(m + h * k3);
        let next = m + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        if !next.is_finite() {
            return Err(Error::NonFinite(format!("mass equation at t = {t0}, m = {m}")));
        }
        m = next;
        if !(0.0..=1.0).contains(&m) {
            m = m.clamp(0.0, 1.0);
            clip_events.push(s + 1);
        }
        times.push(if s + 1 == steps { t_end } else { (s + 1) as f64 * dt });
        values.push(m);
    }
    Ok(MassTrajectory { times, values, clip_events })
}

/// The linear stationary profile `(1 - u) rho0 + u rho1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StationaryProfile {
    pub rho0: f64,
    pub rho1: f64,
}

impl StationaryProfile {
    pub fn at(&self, u: f64) -> f64 {
        (1.0 - u) * self.rho0 + u * self.rho1
    }

    /// `|rho1 - rho0 + D_{a,g}(rho0)| + |rho1 - rho0 - D_{b,d}(rho1)|`.
    pub fn residual(&self, params: &BoundaryParams) -> f64 {
        let slope = self.rho1 - self.rho0;
        (slope + d_eval(&DPair::left(params), self.rho0)).abs()
            + (slope - d_eval(&DPair::right(params), self.rho1)).abs()
    }

    pub fn grid(&self, m: usize) -> crate::observables::GridFunction {
        crate::observables::GridFunction::from_fn(m, f64::INFINITY, |u| self.at(u))
    }
}

const PROFILE_WIDTH: f64 = 1e-15;

/// Boundary values of the stationary solution for `theta = 1`.
///
/// One boundary value is written as a function `phi` of the other through
/// `-D_{a,g}(rho0) = D_{b,d}(rho1)`; the remaining scalar equation is
/// monotone. Which side anchors `phi` depends on how the first rates are
/// ordered.
pub fn stationary_profile(params: &BoundaryParams) -> Result<StationaryProfile> {
    let report = validate(params);
    if !report.h0 || !report.h2 {
        return Err(Error::Assumption(report.violations.join("; ")));
    }
    let left = DPair::left(params);
    let right = DPair::right(params);
    let (a1, b1, g1, d1) = (params.alpha()[0], params.beta()[0], params.gamma()[0], params.delta()[0]);

    if d1 <= a1 && b1 <= g1 {
        // rho0 = phi(rho1)
        let phi = |u: f64| {
            let target = d_eval(&right, u);
            bisect_decreasing(|r0| d_eval(&left, r0) + target, 0.0, 1.0, PROFILE_WIDTH)
        };
        let rho1 = bisect_decreasing(|u| -(u - phi(u) - d_eval(&right, u)), 0.0, 1.0, PROFILE_WIDTH);
        Ok(StationaryProfile { rho0: phi(rho1), rho1 })
    } else {
        // rho1 = phi(rho0)
        let phi = |u: f64| {
            let target = d_eval(&left, u);
            bisect_decreasing(|r1| d_eval(&right, r1) + target, 0.0, 1.0, PROFILE_WIDTH)
        };
        let rho0 = bisect_decreasing(|u| -(u - phi(u) - d_eval(&left, u)), 0.0, 1.0, PROFILE_WIDTH);
        Ok(StationaryProfile { rho0, rho1: phi(rho0) })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pair(l: &[f64], s: &[f64]) -> DPair {
        DPair::new(l.to_vec(), s.to_vec()).unwrap()
    }

    #[test]
    fn endpoint_values() {
        let p = pair(&[1.5, 0.7, 0.2], &[0.9, 0.4, 0.1]);
        assert_eq!(d_op(&p, 0.0).unwrap(), 1.5);
        assert_eq!(d_op(&p, 1.0).unwrap(), -0.9);
        assert_eq!(d_op(&pair(&[1.0], &[1.0]), 0.5).unwrap(), 0.0);
    }

    #[test]
    fn window_two_is_linear_robin_plus_quadratic() {
        let (b1, b2, d1, d2) = (0.8, 0.3, 1.1, 0.6);
        let p = pair(&[b1, b2], &[d1, d2]);
        for i in 0..=20 {
            let f = i as f64 / 20.0;
            let expect = b1 - (b1 + d1) * f + (d2 - b2) * (f * f - f);
            assert!((d_op(&p, f).unwrap() - expect).abs() < 1e-15);
        }
    }

    #[test]
    fn domain_is_checked_with_slack() {
        let p = pair(&[1.0], &[1.0]);
        assert_eq!(d_op(&p, 1.0 + 5e-10).unwrap(), -1.0);
        assert!(d_op(&p, 1.0 + 1e-6).is_err());
        assert!(d_op(&p, f64::NAN).is_err());
        assert!(v_op(&p, -0.1, 0.5).is_err());
    }

    #[test]
    fn v_at_corners() {
        // v_x(1, 0) = 1 for every x, so the sum telescopes to the first rates
        let p = pair(&[2.0, 1.0, 0.25], &[1.0, 0.5, 0.125]);
        assert_eq!(v_op(&p, 1.0, 0.0).unwrap(), 3.0);
        assert_eq!(v_op(&p, 0.0, 1.0).unwrap(), 3.0);
        let d = d_op(&p, 1.0).unwrap() - d_op(&p, 0.0).unwrap();
        assert_eq!(d, -v_op(&p, 1.0, 0.0).unwrap());
        // for constant sequences first and last rates coincide
        let c = pair(&[0.6; 4], &[0.3; 4]);
        assert!((v_op(&c, 1.0, 0.0).unwrap() - 0.9).abs() < 1e-15);
        // V(0, 0) = lambda_1 - lambda_2 + sum_x x (sigma_x - sigma_{x+1})
        let v00 = 2.0 - 1.0 + (1.0 - 0.5) + 2.0 * (0.5 - 0.125) + 3.0 * 0.125;
        assert!((v_op(&p, 0.0, 0.0).unwrap() - v00).abs() < 1e-15);
        let q = pair(&[0.7], &[0.4]);
        assert_eq!(v_op(&q, 0.3, 0.9).unwrap(), 1.1);
    }

    #[test]
    fn v_terms_match_direct_sum() {
        let (y, z) = (0.37, 0.81);
        let v = v_terms(y, z, 6);
        for (x, vx) in v.iter().enumerate() {
            let direct: f64 = (0..=x).map(|i| y.powi((x - i) as i32) * z.powi(i as i32)).sum();
            assert!((vx - direct).abs() < 1e-14);
        }
    }

    #[test]
    fn fixed_point_special_cases() {
        let same = AggregateRates::new(vec![1.0, 0.6, 0.3], vec![1.0, 0.6, 0.3]).unwrap();
        assert!((mass_fixed_point(&same).unwrap() - 0.5).abs() < 1e-14);
        let one = AggregateRates::new(vec![0.3], vec![1.2]).unwrap();
        assert!((mass_fixed_point(&one).unwrap() - 0.3 / 1.5).abs() < 1e-14);
        for k in 1..=5 {
            let (i, o) = (1.3, 0.4);
            let agg = AggregateRates::new(vec![i; k], vec![o; k]).unwrap();
            let m = mass_fixed_point(&agg).unwrap();
            let lhs = (1.0 - m.powi(k as i32)) / (1.0 - (1.0 - m).powi(k as i32));
            assert!((lhs - o / i).abs() < 1e-10, "k={k}");
            assert!(d_eval(&DPair::aggregate(&agg), m).abs() < 1e-12);
        }
        let absorbing = AggregateRates::new(vec![0.0, 1.0], vec![1.0, 1.0]).unwrap();
        assert!(mass_fixed_point(&absorbing).is_err());
    }

    #[test]
    fn closed_form_agrees_with_textbook_expression() {
        let agg = AggregateRates::new(vec![1.5, 0.7], vec![1.2, 0.2]).unwrap();
        let r = RicattiSolution::new(&agg).unwrap();
        for k in [r.kappa_plus, r.kappa_minus] {
            assert!((r.a * k * k + r.b * k + r.c).abs() < 1e-10);
        }
        let sq = r.delta_disc.sqrt();
        for &m0 in &[0.0, 0.2, 0.9, 1.0] {
            for &t in &[0.0, 0.1, 0.7, 3.0] {
                let eps = (r.kappa_minus - m0) / (r.kappa_plus - m0) * (-sq * t).exp();
                let literal = r.kappa_plus + (r.kappa_minus - r.kappa_plus) / (1.0 - eps);
                assert!((r.mass_at(m0, t) - literal).abs() < 1e-12, "m0={m0} t={t}");
            }
        }
    }

    #[test]
    fn closed_form_without_quadratic_term() {
        // i_2 = o_2 makes a = 0
        let agg = AggregateRates::new(vec![1.0, 0.5], vec![0.8, 0.5]).unwrap();
        let r = RicattiSolution::new(&agg).unwrap();
        assert_eq!(r.a, 0.0);
        let (b, c) = (r.b, r.c);
        for &t in &[0.0, 0.3, 2.0] {
            let m0 = 0.1;
            let expect = (m0 + c / b) * (b * t).exp() - c / b;
            assert!((ricatti_k2(&agg, m0, t).unwrap() - expect).abs() < 1e-14);
        }
        // the fixed point here is i_1 / (i_1 + o_1)
        assert!((r.kappa_minus - 1.0 / 1.8).abs() < 1e-15);
    }

    #[test]
    fn closed_form_fixed_point_and_limit() {
        let agg = AggregateRates::new(vec![1.4, 0.9], vec![0.6, 0.1]).unwrap();
        let r = RicattiSolution::new(&agg).unwrap();
        assert_eq!(ricatti_k2(&agg, r.kappa_minus, 5.0).unwrap(), r.kappa_minus);
        let t = 50.0 / r.delta_disc.sqrt();
        let m_inf = ricatti_k2(&agg, 0.05, t).unwrap();
        assert!((m_inf - mass_fixed_point(&agg).unwrap()).abs() < 1e-9);
    }

    #[test]
    fn rk4_matches_closed_form() {
        let agg = AggregateRates::new(vec![1.4, 0.9], vec![0.6, 0.1]).unwrap();
        let traj = ricatti_integrate(&agg, 0.95, 10.0, 1e-3).unwrap();
        assert!(traj.clip_events.is_empty());
        for (t, m) in traj.times.iter().zip(&traj.values).step_by(97) {
            assert!((m - ricatti_k2(&agg, 0.95, *t).unwrap()).abs() < 1e-8);
        }
        assert_eq!(*traj.times.last().unwrap(), 10.0);
    }

    #[test]
    fn rk4_stays_at_fixed_point() {
        let agg = AggregateRates::new(vec![1.0, 0.8, 0.1], vec![0.5, 0.5, 0.5]).unwrap();
        let m = mass_fixed_point(&agg).unwrap();
        let traj = ricatti_integrate(&agg, m, 5.0, 1e-2).unwrap();
        assert!(traj.values.iter().all(|v| (v - m).abs() < 1e-13));
    }

    #[test]
    fn stationary_profile_robin_oracle() {
        // K = 1: solve the 2x2 linear system directly
        let (a, b, g, d) = (1.2, 0.3, 0.7, 0.4);
        let p = BoundaryParams::new(vec![a], vec![b], vec![g], vec![d], 1.0).unwrap();
        let s = stationary_profile(&p).unwrap();
        // rho1 - rho0 = -(a - (a + g) rho0);  rho1 - rho0 = b - (b + d) rho1
        // => [-(1 + a + g), 1; -1, 1 + b + d] [rho0; rho1] = [-a; b]
        let (m11, m12, m21, m22) = (-(1.0 + a + g), 1.0, -1.0, 1.0 + b + d);
        let det = m11 * m22 - m12 * m21;
        let r0 = (-a * m22 - m12 * b) / det;
        let r1 = (m11 * b - m21 * -a) / det;
        assert!((s.rho0 - r0).abs() < 1e-12, "{s:?} vs {r0}");
        assert!((s.rho1 - r1).abs() < 1e-12, "{s:?} vs {r1}");
    }

    #[test]
    fn symmetric_reservoirs_give_flat_half() {
        let p = BoundaryParams::uniform(&[1.0, 0.5, 0.25], 1.0).unwrap();
        let s = stationary_profile(&p).unwrap();
        assert!((s.rho0 - 0.5).abs() < 1e-12 && (s.rho1 - 0.5).abs() < 1e-12);
    }

    #[test]
    fn stationary_profile_both_orderings() {
        let a = BoundaryParams::new(vec![0.2, 0.1], vec![2.0, 1.0], vec![2.0, 1.0], vec![0.2, 0.1], 1.0).unwrap();
        let b = BoundaryParams::new(vec![2.0, 1.0], vec![0.2, 0.1], vec![0.2, 0.1], vec![2.0, 1.0], 1.0).unwrap();
        let sa = stationary_profile(&a).unwrap();
        let sb = stationary_profile(&b).unwrap();
        assert!(sa.residual(&a) < 1e-10 && sb.residual(&b) < 1e-10);
        assert!(sa.rho1 > sa.rho0 && sb.rho0 > sb.rho1);
        // mirror images of each other
        assert!((sa.rho0 - sb.rho1).abs() < 1e-12 && (sa.rho1 - sb.rho0).abs() < 1e-12);
    }

    #[test]
    fn refuses_without_ordering() {
        let p = BoundaryParams::new(vec![1.0], vec![0.5], vec![0.3], vec![0.2], 1.0).unwrap();
        assert!(matches!(stationary_profile(&p), Err(Error::Assumption(_))));
    }
}
