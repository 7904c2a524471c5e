//! Exact master-equation computations over the full configuration space of
//! a small lattice. State index bit `b` holds the occupation of site `b + 1`.
//!
//! Rates are evaluated here from scratch, without the simulator's caches, so
//! the two implementations can certify each other.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::params::{aggregates, BoundaryParams};

pub const MAX_SITES: usize = 14;
/// Largest state space solved by dense LU; bigger ones use Gauss–Seidel.
pub const DENSE_STATES: usize = 4096;

const NEG_TOL: f64 = 1e-10;
const STEP_TOL: f64 = 1e-10;
const STATIONARY_TOL: f64 = 1e-11;

#[derive(Debug, Clone, PartialEq)]
pub struct Distribution {
    pub n_sites: usize,
    pub probs: Vec<f64>,
}

impl Distribution {
    pub fn new(n_sites: usize, probs: Vec<f64>) -> Result<Self> {
        check_sites(n_sites)?;
        if probs.len() != 1 << n_sites {
            return Err(Error::Invalid(format!("{} probabilities for {n_sites} sites", probs.len())));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-12 || probs.iter().any(|p| *p < 0.0) {
            return Err(Error::Invalid(format!("not a distribution (sum {total})")));
        }
        Ok(Self { n_sites, probs })
    }

    /// Point mass at one configuration given as occupations of sites `1..`.
    pub fn point(bits: &[u8]) -> Result<Self> {
        let n_sites = bits.len();
        check_sites(n_sites)?;
        let index = bits.iter().enumerate().fold(0usize, |acc, (b, &e)| acc | ((e as usize & 1) << b));
        let mut probs = vec![0.0; 1 << n_sites];
        probs[index] = 1.0;
        Ok(Self { n_sites, probs })
    }

    /// Independent sites with `P(eta(x) = 1) = p[x - 1]`.
    pub fn product(p: &[f64]) -> Result<Self> {
        let n_sites = p.len();
        check_sites(n_sites)?;
        if p.iter().any(|q| !(0.0..=1.0).contains(q)) {
            return Err(Error::Invalid("marginals must lie in [0, 1]".into()));
        }
        let probs = (0..1usize << n_sites)
            .map(|s| {
                p.iter()
                    .enumerate()
                    .map(|(b, &q)| if s >> b & 1 == 1 { q } else { 1.0 - q })
                    .product()
            })
            .collect();
        Ok(Self { n_sites, probs })
    }

    /// `P(eta(x) = 1)` for `x = 1..=n_sites`.
    pub fn marginals(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.n_sites];
        for (s, &p) in self.probs.iter().enumerate() {
            for (b, o) in out.iter_mut().enumerate() {
                if s >> b & 1 == 1 {
                    *o += p;
                }
            }
        }
        out
    }

    /// `E[eta(x) eta(y)] - E[eta(x)] E[eta(y)]`, sites 1-based.
    pub fn covariance(&self, x: usize, y: usize) -> f64 {
        let (bx, by) = (x - 1, y - 1);
        let joint: f64 = self
            .probs
            .iter()
            .enumerate()
            .filter(|(s, _)| s >> bx & 1 == 1 && s >> by & 1 == 1)
            .map(|(_, p)| p)
            .sum();
        let m = self.marginals();
        joint - m[bx] * m[by]
    }

    /// Expected `(N - 1)^{-1} sum_x eta(x)`.
    pub fn mean_mass(&self) -> f64 {
        self.marginals().iter().sum::<f64>() / self.n_sites as f64
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("state,probability\n");
        for (s, p) in self.probs.iter().enumerate() {
            out.push_str(&format!("{s},{p:e}\n"));
        }
        out
    }

    pub fn marginals_csv(&self) -> String {
        let mut out = String::from("site,p_occupied\n");
        for (i, p) in self.marginals().iter().enumerate() {
            out.push_str(&format!("{},{p}\n", i + 1));
        }
        out
    }
}

fn check_sites(n_sites: usize) -> Result<()> {
    if n_sites > MAX_SITES {
        return Err(Error::StateSpaceTooLarge { sites: n_sites, cap: MAX_SITES });
    }
    if n_sites == 0 {
        return Err(Error::Invalid("no sites".into()));
    }
    Ok(())
}

/// Rate matrix stored by rows: off-diagonal `(target, rate)` pairs and the
/// diagonal, which is minus the sum of the row's off-diagonals.
#[derive(Debug, Clone, PartialEq)]
pub struct Generator {
    pub n_sites: usize,
    pub rows: Vec<Vec<(usize, f64)>>,
    pub diag: Vec<f64>,
}

impl Generator {
    pub fn n_states(&self) -> usize {
        self.rows.len()
    }

    /// `pi L` as a row vector.
    pub fn apply_left(&self, pi: &[f64], out: &mut [f64]) {
        for (o, (&p, &d)) in out.iter_mut().zip(pi.iter().zip(&self.diag)) {
            *o = p * d;
        }
        for (i, row) in self.rows.iter().enumerate() {
            let p = pi[i];
            if p == 0.0 {
                continue;
            }
            for &(j, r) in row {
                out[j] += p * r;
            }
        }
    }

    pub fn rate(&self, i: usize, j: usize) -> f64 {
        if i == j {
            return self.diag[i];
        }
        self.rows[i].iter().find(|(k, _)| *k == j).map_or(0.0, |(_, r)| *r)
    }

    /// `max |pi L|`.
    pub fn residual(&self, pi: &[f64]) -> f64 {
        let mut out = vec![0.0; pi.len()];
        self.apply_left(pi, &mut out);
        out.iter().fold(0.0, |a, v| a.max(v.abs()))
    }

    /// `max_{i,j} |pi_i L_ij - pi_j L_ji|`; zero iff `pi` is reversible.
    pub fn detailed_balance_violation(&self, pi: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, r) in row {
                worst = worst.max((pi[i] * r - pi[j] * self.rate(j, i)).abs());
            }
        }
        worst
    }

    fn max_exit_rate(&self) -> f64 {
        self.diag.iter().fold(0.0, |a, d| a.max(-d))
    }
}

pub fn generator_matrix(n: usize, params: &BoundaryParams) -> Result<Generator> {
    if n < 2 {
        return Err(Error::Invalid("need N >= 2".into()));
    }
    let n_sites = n - 1;
    check_sites(n_sites)?;
    let k = params.k();
    // the two windows only need to be disjoint here
    if n < 2 * k + 1 {
        return Err(Error::OverlappingWindows { n, k, min: 2 * k + 1 });
    }
    let scale = (n as f64).powf(-params.theta());
    let occ = |s: usize, site: usize| s >> (site - 1) & 1 == 1;
    let n_states = 1usize << n_sites;
    let mut rows = Vec::with_capacity(n_states);
    let mut diag = Vec::with_capacity(n_states);
    for s in 0..n_states {
        let mut row = Vec::new();
        for b in 1..n_sites {
            if occ(s, b) != occ(s, b + 1) {
                row.push((s ^ (0b11 << (b - 1)), 1.0));
            }
        }
        // boundary channel x: the window's first x - 1 sites all full (all
        // empty) and site x empty (full) allows a creation (removal) at x
        for (side_site, create, remove) in [
            (&(|x: usize| x) as &dyn Fn(usize) -> usize, params.alpha(), params.gamma()),
            (&(|x: usize| n - x) as &dyn Fn(usize) -> usize, params.beta(), params.delta()),
        ] {
            for x in 1..=k {
                let prefix_full = (1..x).all(|y| occ(s, side_site(y)));
                let prefix_empty = (1..x).all(|y| !occ(s, side_site(y)));
                let site = side_site(x);
                let rate = if occ(s, site) {
                    if prefix_empty { remove[x - 1] } else { 0.0 }
                } else if prefix_full {
                    create[x - 1]
                } else {
                    0.0
                };
                if rate > 0.0 {
                    row.push((s ^ (1 << (site - 1)), scale * rate));
                }
            }
        }
        let out: f64 = row.iter().map(|(_, r)| r).sum();
        diag.push(-out);
        rows.push(row);
    }
    Ok(Generator { n_sites, rows, diag })
}

/// Forward equation `d pi / dt = pi L` up to microscopic time `t_micro`.
pub fn evolve(dist: &Distribution, n: usize, params: &BoundaryParams, t_micro: f64) -> Result<Distribution> {
    let g = generator_matrix(n, params)?;
    evolve_with(&g, dist, t_micro)
}

/// RK4 with step doubling: a step is accepted when one full step and two
/// half steps agree to `1e-10`.
pub fn evolve_with(g: &Generator, dist: &Distribution, t_micro: f64) -> Result<Distribution> {
    if dist.n_sites != g.n_sites {
        return Err(Error::Invalid("distribution and generator sizes differ".into()));
    }
    if !(t_micro >= 0.0 && t_micro.is_finite()) {
        return Err(Error::Invalid(format!("t_micro = {t_micro}")));
    }
    let ns = g.n_states();
    let mut pi = dist.probs.clone();
    if t_micro == 0.0 {
        return Ok(dist.clone());
    }
    let mut ws = Rk4Work::new(ns);
    let mut h = (1.0 / g.max_exit_rate().max(1e-300)).min(t_micro);
    let mut t = 0.0;
    let mut full = vec![0.0; ns];
    let mut half = vec![0.0; ns];
    while t < t_micro {
        h = h.min(t_micro - t);
        ws.step(g, &pi, h, &mut full);
        ws.step(g, &pi, 0.5 * h, &mut half);
        let mid = half.clone();
        ws.step(g, &mid, 0.5 * h, &mut half);
        let err = full.iter().zip(&half).fold(0.0f64, |a, (x, y)| a.max((x - y).abs()));
        if err <= STEP_TOL || h < 1e-12 {
            // Richardson: the two half steps are the more accurate estimate
            std::mem::swap(&mut pi, &mut half);
            t += h;
            normalise(&mut pi)?;
            let grow = if err > 0.0 { 0.9 * (STEP_TOL / err).powf(0.2) } else { 2.0 };
            h *= grow.clamp(0.2, 2.0);
        } else {
            h *= (0.9 * (STEP_TOL / err).powf(0.2)).clamp(0.1, 0.5);
        }
    }
    Ok(Distribution { n_sites: dist.n_sites, probs: pi })
}

struct Rk4Work {
    k1: Vec<f64>,
    k2: Vec<f64>,
    k3: Vec<f64>,
    k4: Vec<f64>,
    tmp: Vec<f64>,
}

impl Rk4Work {
    fn new(n: usize) -> Self {
        Self { k1: vec![0.0; n], k2: vec![0.0; n], k3: vec![0.0; n], k4: vec![0.0; n], tmp: vec![0.0; n] }
    }

    fn step(&mut self, g: &Generator, y: &[f64], h: f64, out: &mut [f64]) {
        g.apply_left(y, &mut self.k1);
        for i in 0..y.len() {
            self.tmp[i] = y[i] + 0.5 * h * self.k1[i];
        }
        g.apply_left(&self.tmp, &mut self.k2);
        for i in 0..y.len() {
            self.tmp[i] = y[i] + 0.5 * h * self.k2[i];
        }
        g.apply_left(&self.tmp, &mut self.k3);
        for i in 0..y.len() {
            self.tmp[i] = y[i] + h * self.k3[i];
        }
        g.apply_left(&self.tmp, &mut self.k4);
        for i in 0..y.len() {
            out[i] = y[i] + h / 6.0 * (self.k1[i] + 2.0 * self.k2[i] + 2.0 * self.k3[i] + self.k4[i]);
        }
    }
}

fn normalise(pi: &mut [f64]) -> Result<()> {
    for (state, p) in pi.iter_mut().enumerate() {
        if *p < -NEG_TOL {
            return Err(Error::NegativeProbability { state, value: *p });
        }
        if *p < 0.0 {
            *p = 0.0;
        }
    }
    let total: f64 = pi.iter().sum();
    for p in pi.iter_mut() {
        *p /= total;
    }
    Ok(())
}

/// Solution of `pi L = 0`, `sum pi = 1`.
pub fn stationary(n: usize, params: &BoundaryParams) -> Result<Distribution> {
    if !aggregates(params).irreducible() {
        return Err(Error::Assumption(
            "alpha_1 + beta_1 and gamma_1 + delta_1 must be positive for a unique stationary law".into(),
        ));
    }
    let g = generator_matrix(n, params)?;
    stationary_with(&g)
}

pub fn stationary_with(g: &Generator) -> Result<Distribution> {
    let ns = g.n_states();
    let mut pi = if ns <= DENSE_STATES { dense_stationary(g)? } else { gauss_seidel_stationary(g)? };
    normalise(&mut pi)?;
    let res = g.residual(&pi);
    if res > STATIONARY_TOL {
        return Err(Error::NoConvergence { what: "stationary solve", iterations: 1, last_change: res });
    }
    Ok(Distribution { n_sites: g.n_sites, probs: pi })
}

/// `L^T pi = 0` with the last equation replaced by `sum pi = 1`, plus one
/// round of iterative refinement.
fn dense_stationary(g: &Generator) -> Result<Vec<f64>> {
    let ns = g.n_states();
    let mut a = DMatrix::<f64>::zeros(ns, ns);
    for (i, row) in g.rows.iter().enumerate() {
        a[(i, i)] = g.diag[i];
        for &(j, r) in row {
            a[(j, i)] += r;
        }
    }
    for j in 0..ns {
        a[(ns - 1, j)] = 1.0;
    }
    let mut rhs = DVector::<f64>::zeros(ns);
    rhs[ns - 1] = 1.0;
    let lu = a.clone().lu();
    let mut x = lu.solve(&rhs).ok_or_else(|| Error::Invalid("singular generator".into()))?;
    let r = &rhs - &a * &x;
    if let Some(dx) = lu.solve(&r) {
        x += dx;
    }
    Ok(x.iter().copied().collect())
}

fn gauss_seidel_stationary(g: &Generator) -> Result<Vec<f64>> {
    let ns = g.n_states();
    // incoming transitions per state
    let mut incoming: Vec<Vec<(usize, f64)>> = vec![Vec::new(); ns];
    for (i, row) in g.rows.iter().enumerate() {
        for &(j, r) in row {
            incoming[j].push((i, r));
        }
    }
    let mut pi = vec![1.0 / ns as f64; ns];
    let cap = 200_000;
    for it in 1..=cap {
        for j in 0..ns {
            let inflow: f64 = incoming[j].iter().map(|&(i, r)| pi[i] * r).sum();
            pi[j] = inflow / -g.diag[j];
        }
        let total: f64 = pi.iter().sum();
        pi.iter_mut().for_each(|p| *p /= total);
        if it % 50 == 0 && g.residual(&pi) <= 0.5 * STATIONARY_TOL {
            return Ok(pi);
        }
    }
    Err(Error::NoConvergence { what: "Gauss-Seidel stationary solve", iterations: cap, last_change: g.residual(&pi) })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rows_sum_to_zero() {
        let p = BoundaryParams::new(vec![1.3, 0.4], vec![0.7, 0.2], vec![0.5, 0.5], vec![0.9, 0.1], 1.5).unwrap();
        let g = generator_matrix(8, &p).unwrap();
        for (row, d) in g.rows.iter().zip(&g.diag) {
            let s: f64 = row.iter().map(|(_, r)| r).sum::<f64>() + d;
            assert_eq!(s, 0.0);
        }
    }

    #[test]
    fn three_site_hand_computation() {
        // N = 3, K = 1: sites 1 and 2, states 0b00, 0b01 (site 1), 0b10, 0b11
        let (a, b, c, d) = (0.3, 0.5, 0.7, 1.1);
        let p = BoundaryParams::new(vec![a], vec![b], vec![c], vec![d], 1.0).unwrap();
        let g = generator_matrix(3, &p).unwrap();
        let s = 1.0 / 3.0;
        let expect = [
            [-(a + b) * s, a * s, b * s, 0.0],
            [c * s, -(c * s + 1.0 + b * s), 1.0, b * s],
            [d * s, 1.0, -(d * s + 1.0 + a * s), a * s],
            [0.0, d * s, c * s, -(c + d) * s],
        ];
        for i in 0..4 {
            for j in 0..4 {
                assert!((g.rate(i, j) - expect[i][j]).abs() < 1e-15, "({i},{j})");
            }
        }
    }

    #[test]
    fn bulk_moves_are_symmetric_boundary_moves_are_not() {
        let p = BoundaryParams::new(vec![1.0, 0.5], vec![0.0, 0.0], vec![0.0, 0.0], vec![1.0, 0.5], 1.0).unwrap();
        let g = generator_matrix(7, &p).unwrap();
        let mut asym = 0;
        for (i, row) in g.rows.iter().enumerate() {
            for &(j, r) in row {
                let back = g.rate(j, i);
                if (i ^ j).count_ones() == 2 {
                    assert_eq!(r, back);
                } else if back == 0.0 {
                    asym += 1;
                }
            }
        }
        assert!(asym > 0);
    }

    #[test]
    fn evolve_zero_time_is_identity() {
        let p = BoundaryParams::uniform(&[1.0, 0.5], 1.0).unwrap();
        let d = Distribution::product(&[0.2, 0.4, 0.6, 0.8, 0.5]).unwrap();
        assert_eq!(evolve(&d, 6, &p, 0.0).unwrap(), d);
    }

    #[test]
    fn evolve_keeps_a_distribution_and_reaches_stationarity() {
        let p = BoundaryParams::new(vec![1.0, 0.5], vec![0.8, 0.4], vec![1.0, 0.5], vec![0.9, 0.45], 1.0).unwrap();
        let g = generator_matrix(6, &p).unwrap();
        let mut d = Distribution::point(&[1, 1, 0, 0, 1]).unwrap();
        for _ in 0..5 {
            d = evolve_with(&g, &d, 10.0).unwrap();
            assert!((d.probs.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert!(d.probs.iter().all(|&p| p >= 0.0));
        }
        let pi = stationary_with(&g).unwrap();
        let later = evolve_with(&g, &pi, 25.0).unwrap();
        let gap = pi.probs.iter().zip(&later.probs).fold(0.0f64, |a, (x, y)| a.max((x - y).abs()));
        assert!(gap < 1e-10, "{gap}");
    }

    #[test]
    fn balanced_single_site_reservoirs_give_product_measure() {
        // alpha/(alpha+gamma) = beta/(beta+delta) = 0.3
        let p = BoundaryParams::new(vec![0.3], vec![0.6], vec![0.7], vec![1.4], 1.0).unwrap();
        let g = generator_matrix(7, &p).unwrap();
        let candidate = Distribution::product(&[0.3; 6]).unwrap();
        assert!(g.residual(&candidate.probs) < 1e-12);
        let pi = stationary_with(&g).unwrap();
        for m in pi.marginals() {
            assert!((m - 0.3).abs() < 1e-10);
        }
        assert!(pi.covariance(2, 5).abs() < 1e-10);
    }

    #[test]
    fn stationary_is_not_reversible_in_general() {
        let p = BoundaryParams::new(vec![1.0, 0.5], vec![0.2, 0.1], vec![0.3, 0.2], vec![1.0, 0.4], 1.0).unwrap();
        let g = generator_matrix(6, &p).unwrap();
        let pi = stationary_with(&g).unwrap();
        assert!(g.residual(&pi.probs) <= 1e-11);
        assert!(g.detailed_balance_violation(&pi.probs) > 1e-6);
        let m = pi.mean_mass();
        assert!((0.0..=1.0).contains(&m));
    }

    #[test]
    fn gauss_seidel_agrees_with_lu() {
        let p = BoundaryParams::new(vec![1.0, 0.5], vec![0.8, 0.4], vec![1.0, 0.5], vec![0.9, 0.45], 1.0).unwrap();
        let g = generator_matrix(8, &p).unwrap();
        let a = dense_stationary(&g).unwrap();
        let b = gauss_seidel_stationary(&g).unwrap();
        let gap = a.iter().zip(&b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
        assert!(gap < 1e-9, "{gap}");
    }

    #[test]
    fn rejects_large_or_reducible_systems() {
        let p = BoundaryParams::uniform(&[1.0], 1.0).unwrap();
        assert!(matches!(generator_matrix(16, &p), Err(Error::StateSpaceTooLarge { .. })));
        let z = BoundaryParams::new(vec![0.0], vec![0.0], vec![1.0], vec![1.0], 1.0).unwrap();
        assert!(matches!(stationary(6, &z), Err(Error::Assumption(_))));
    }
}
