//! Empirical functionals of a configuration: pairings with test functions,
//! box averages, mass, cell-averaged density profiles and current fields.

use std::ops::RangeInclusive;

use serde::{Deserialize, Serialize};

use crate::dynamics::LatticeState;
use crate::error::{Error, Result};

/// Values of a profile at `u_i = i/m`, `i = 0..=m`, at macroscopic time `t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridFunction {
    pub values: Vec<f64>,
    pub t: f64,
}

impl GridFunction {
    pub fn new(values: Vec<f64>, t: f64) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::Invalid("a grid function needs at least two nodes".into()));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("grid function value {v}")));
        }
        Ok(Self { values, t })
    }

    pub fn from_fn(m: usize, t: f64, f: impl Fn(f64) -> f64) -> Self {
        let values = (0..=m).map(|i| f(i as f64 / m as f64)).collect();
        Self { values, t }
    }

    pub fn constant(m: usize, value: f64) -> Self {
        Self::from_fn(m, 0.0, |_| value)
    }

    /// Number of grid cells.
    pub fn m(&self) -> usize {
        self.values.len() - 1
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        let m = self.m() as f64;
        (0..self.values.len()).map(move |i| i as f64 / m)
    }

    /// Piecewise-linear interpolation, clamped to `[0, 1]`.
    pub fn at(&self, u: f64) -> f64 {
        let m = self.m();
        let s = (u.clamp(0.0, 1.0) * m as f64).min(m as f64);
        let i = (s.floor() as usize).min(m - 1);
        let w = s - i as f64;
        self.values[i] * (1.0 - w) + self.values[i + 1] * w
    }

    /// Resample onto a grid with `m` cells.
    pub fn resample(&self, m: usize) -> Self {
        if m == self.m() {
            return self.clone();
        }
        Self::from_fn(m, self.t, |u| self.at(u))
    }

    pub fn is_density(&self) -> bool {
        self.values.iter().all(|v| (-1e-9..=1.0 + 1e-9).contains(v))
    }

    /// Trapezoidal integral over `[0, 1]`.
    pub fn integral(&self) -> f64 {
        let h = 1.0 / self.m() as f64;
        let n = self.values.len();
        let inner: f64 = self.values[1..n - 1].iter().sum();
        h * (inner + 0.5 * (self.values[0] + self.values[n - 1]))
    }

    /// Mean absolute difference over the nodes (discrete L1 on `[0, 1]`).
    pub fn l1_distance(&self, other: &GridFunction) -> f64 {
        let other = other.resample(self.m());
        let h = 1.0 / self.m() as f64;
        let n = self.values.len();
        let d: Vec<f64> = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .collect();
        h * (d[1..n - 1].iter().sum::<f64>() + 0.5 * (d[0] + d[n - 1]))
    }

    pub fn sup_distance(&self, other: &GridFunction) -> f64 {
        let other = other.resample(self.m());
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("u,value\n");
        for (u, v) in self.nodes().zip(&self.values) {
            out.push_str(&format!("{u},{v}\n"));
        }
        out
    }

    /// Compact JSON record with caller-supplied metadata.
    pub fn to_json(&self, meta: serde_json::Value) -> Result<String> {
        let rec = serde_json::json!({
            "m": self.m(),
            "t": self.t,
            "values": self.values,
            "meta": meta,
        });
        Ok(serde_json::to_string(&rec)?)
    }
}

/// `<J_t, f>` and `<K_t, f>` for one configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurrentPairing {
    pub j_value: f64,
    pub k_value: f64,
}

/// `(N-1)^{-1} sum_x eta(x) G(x/N)`.
pub fn pair_empirical(state: &LatticeState, g: impl Fn(f64) -> f64) -> f64 {
    let n = state.n();
    let nf = n as f64;
    let sum: f64 = state
        .occupation()
        .iter()
        .enumerate()
        .filter(|(_, &e)| e == 1)
        .map(|(i, _)| g((i + 1) as f64 / nf))
        // an empty f64 sum is -0.0; start from +0.0 so the empty lattice pairs to 0
        .fold(0.0, |acc, v| acc + v);
    sum / (n - 1) as f64
}

pub fn mass(state: &LatticeState) -> f64 {
    state.particle_count() as f64 / (state.n() - 1) as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    Right,
    Left,
}

/// Mean occupation of the `floor(eps N)` sites strictly to one side of `x`.
pub fn box_average(state: &LatticeState, x: usize, eps: f64, direction: Direction) -> Result<f64> {
    let n = state.n();
    let width = (eps * n as f64).floor() as usize;
    if width == 0 {
        return Err(Error::Invalid(format!("window floor(eps N) = 0 for eps = {eps}, N = {n}")));
    }
    if !(1..n).contains(&x) {
        return Err(Error::Invalid(format!("site {x} outside 1..={}", n - 1)));
    }
    let sites = match direction {
        Direction::Right if x + width <= n - 1 => x + 1..=x + width,
        Direction::Left if x > width => x - width..=x - 1,
        _ => {
            return Err(Error::Invalid(format!(
                "window of {width} sites {direction:?} of {x} leaves 1..={}",
                n - 1
            )))
        }
    };
    let eta = state.occupation();
    let count: u32 = sites.map(|s| eta[s - 1] as u32).sum();
    Ok(count as f64 / width as f64)
}

/// Sites assigned to grid cell `i` of an `m`-cell profile on a lattice of
/// scale `n`: those with `(i - 1/2)/m < x/N <= (i + 1/2)/m`, clipped to the
/// bulk. A cell containing no site takes the nearest one.
pub fn cell_sites(n: usize, m: usize, i: usize) -> RangeInclusive<usize> {
    let (n64, m64, i64_) = (n as i64, m as i64, i as i64);
    let lo = ((2 * i64_ - 1) * n64).div_euclid(2 * m64) + 1;
    let hi = ((2 * i64_ + 1) * n64).div_euclid(2 * m64);
    let lo = lo.max(1);
    let hi = hi.min(n64 - 1);
    if lo <= hi {
        lo as usize..=hi as usize
    } else {
        let x = ((i64_ * n64 + m64 / 2) / m64).clamp(1, n64 - 1) as usize;
        x..=x
    }
}

/// Ensemble-and-cell mean occupation on `m + 1` nodes.
pub fn density_profile(states: &[&LatticeState], m: usize) -> Result<GridFunction> {
    let first = states
        .first()
        .ok_or_else(|| Error::Invalid("empty ensemble".into()))?;
    let (n, t) = (first.n(), first.t_micro());
    if states.iter().any(|s| s.n() != n || s.t_micro() != t) {
        return Err(Error::Invalid("ensemble mixes lattice sizes or times".into()));
    }
    if m == 0 {
        return Err(Error::Invalid("profile needs m >= 1".into()));
    }
    let mut values = Vec::with_capacity(m + 1);
    for i in 0..=m {
        let sites = cell_sites(n, m, i);
        let width = (sites.end() - sites.start() + 1) as f64;
        let mut count = 0u64;
        for s in states {
            let eta = s.occupation();
            count += sites.clone().map(|x| eta[x - 1] as u64).sum::<u64>();
        }
        values.push(count as f64 / (width * states.len() as f64));
    }
    let t_macro = first.t_micro() / (n as f64).powi(2);
    Ok(GridFunction { values, t: t_macro })
}

/// Per-cell occupation counts of a single configuration.
pub fn cell_counts(state: &LatticeState, m: usize) -> Vec<u32> {
    let eta = state.occupation();
    (0..=m)
        .map(|i| cell_sites(state.n(), m, i).map(|x| eta[x - 1] as u32).sum())
        .collect()
}

pub fn current_pairing(state: &LatticeState, f: impl Fn(f64) -> f64) -> CurrentPairing {
    let nf = state.n() as f64;
    let j_value: f64 = state
        .j_current()
        .iter()
        .enumerate()
        .filter(|(_, &j)| j != 0)
        .map(|(b, &j)| j as f64 * f((b + 1) as f64 / nf))
        .sum::<f64>()
        / (nf * nf);
    let k_value: f64 = state
        .boundary_sites()
        .zip(state.k_current())
        .filter(|(_, &k)| k != 0)
        .map(|(x, &k)| k as f64 * f(x as f64 / nf))
        .sum::<f64>()
        / nf;
    CurrentPairing { j_value, k_value }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::InitialCondition;
    use crate::params::BoundaryParams;

    fn state_from_bits(bits: Vec<u8>) -> LatticeState {
        let n = bits.len() + 1;
        let params = BoundaryParams::uniform(&[1.0, 0.5], 1.0).unwrap();
        LatticeState::init(n, &params, &InitialCondition::ExplicitBits(bits), 0).unwrap()
    }

    #[test]
    fn mass_matches_unit_pairing() {
        let s = state_from_bits(vec![1, 0, 1, 0, 1, 0, 1, 0, 1, 0]);
        assert_eq!(mass(&s), 0.5);
        assert_eq!(mass(&s).to_bits(), pair_empirical(&s, |_| 1.0).to_bits());
        assert_eq!(mass(&state_from_bits(vec![0; 9])), 0.0);
        assert_eq!(mass(&state_from_bits(vec![1; 9])), 1.0);
    }

    #[test]
    fn full_lattice_pairing_with_identity() {
        let n = 200;
        let s = state_from_bits(vec![1; n - 1]);
        // (N-1)^{-1} sum_{x=1}^{N-1} x/N = 1/2 exactly
        assert!((pair_empirical(&s, |u| u) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn box_average_definition() {
        let mut bits = vec![0u8; 12];
        bits[1] = 1; // site 2
        bits[3] = 1; // site 4
        let s = state_from_bits(bits);
        // N = 13, eps N = 3 -> sites 2, 3, 4
        let v = box_average(&s, 1, 3.0 / 13.0, Direction::Right).unwrap();
        assert!((v - 2.0 / 3.0).abs() < 1e-15);
        let full = state_from_bits(vec![1; 12]);
        assert_eq!(box_average(&full, 12, 0.2, Direction::Left).unwrap(), 1.0);
        assert!(box_average(&full, 12, 0.2, Direction::Right).is_err());
        assert!(box_average(&full, 1, 0.01, Direction::Right).is_err());
    }

    #[test]
    fn cells_partition_the_bulk() {
        for (n, m) in [(256, 32), (100, 7), (64, 64), (10, 3)] {
            let mut covered = vec![0; n];
            for i in 0..=m {
                let r = cell_sites(n, m, i);
                assert!(*r.start() >= 1 && *r.end() <= n - 1);
                for x in r {
                    covered[x] += 1;
                }
            }
            // every site lands in exactly one cell unless a cell was empty and borrowed
            assert!(covered[1..].iter().all(|&c| c >= 1), "n={n} m={m}");
        }
    }

    #[test]
    fn one_site_per_cell_reproduces_occupations() {
        let bits = vec![1, 0, 0, 1, 1, 0, 1];
        let s = state_from_bits(bits.clone());
        let p = density_profile(&[&s], s.n()).unwrap();
        let interior: Vec<f64> = p.values[1..s.n()].to_vec();
        let expect: Vec<f64> = bits.iter().map(|&b| b as f64).collect();
        assert_eq!(interior, expect);
        assert_eq!(p.values[0], 1.0);
        assert_eq!(p.values[s.n()], 1.0);
    }

    #[test]
    fn full_ensemble_profile_is_one() {
        let a = state_from_bits(vec![1; 31]);
        let b = state_from_bits(vec![1; 31]);
        let p = density_profile(&[&a, &b], 8).unwrap();
        assert!(p.values.iter().all(|&v| v == 1.0));
        let c = state_from_bits(vec![1; 15]);
        assert!(density_profile(&[&a, &c], 8).is_err());
        assert!(density_profile(&[], 8).is_err());
    }

    #[test]
    fn zero_currents_at_start() {
        let s = state_from_bits(vec![1, 0, 1, 1, 0, 0, 1, 0, 1]);
        let p = current_pairing(&s, |u| 1.0 + u);
        assert_eq!((p.j_value, p.k_value), (0.0, 0.0));
    }

    #[test]
    fn grid_function_basics() {
        let g = GridFunction::from_fn(4, 0.0, |u| u);
        assert_eq!(g.at(0.375), 0.375);
        assert!((g.integral() - 0.5).abs() < 1e-15);
        let h = GridFunction::constant(8, 0.25);
        assert!((g.l1_distance(&h) - 0.3125).abs() < 1e-12);
        assert!(g.to_csv().starts_with("u,value\n0,0\n"));
        assert!(GridFunction::new(vec![0.0, f64::NAN], 0.0).is_err());
        let js = g.to_json(serde_json::json!({"kind": "test"})).unwrap();
        assert!(js.contains("\"m\":4"));
    }
}
