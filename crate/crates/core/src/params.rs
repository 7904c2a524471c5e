//! Reservoir parameters and the standing assumptions on them.
//!
//! The left reservoir creates particles with rates `alpha` and removes them
//! with rates `gamma`; the right reservoir uses `beta` and `delta`. All four
//! sequences are indexed by distance from the nearest edge, so `beta[0]`
//! belongs to site `N - 1`.

use serde::{Deserialize, Serialize};

use crate::config::Config;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryParams {
    k: usize,
    alpha: Vec<f64>,
    beta: Vec<f64>,
    gamma: Vec<f64>,
    delta: Vec<f64>,
    theta: f64,
}

impl BoundaryParams {
    pub fn new(
        alpha: Vec<f64>,
        beta: Vec<f64>,
        gamma: Vec<f64>,
        delta: Vec<f64>,
        theta: f64,
    ) -> Result<Self> {
        let k = alpha.len();
        if k == 0 {
            return Err(Error::InvalidParams("window size K must be positive".into()));
        }
        for (name, seq) in [("alpha", &alpha), ("beta", &beta), ("gamma", &gamma), ("delta", &delta)] {
            if seq.len() != k {
                return Err(Error::InvalidParams(format!(
                    "{name} has length {}, expected K = {k}",
                    seq.len()
                )));
            }
            if let Some(v) = seq.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
                return Err(Error::InvalidParams(format!("{name} contains invalid rate {v}")));
            }
        }
        if !(theta.is_finite() && theta >= 1.0) {
            return Err(Error::InvalidParams(format!("theta = {theta}, expected theta >= 1")));
        }
        Ok(Self {
            k,
            alpha,
            beta,
            gamma,
            delta,
            theta,
        })
    }

    /// Same rates on every sequence: `alpha = beta = gamma = delta = rates`.
    pub fn uniform(rates: &[f64], theta: f64) -> Result<Self> {
        Self::new(rates.to_vec(), rates.to_vec(), rates.to_vec(), rates.to_vec(), theta)
    }

    pub fn from_config(cfg: &Config) -> Result<Self> {
        let list = |key: &str| -> Result<Vec<f64>> {
            cfg.get_list::<f64>(key)?
                .ok_or_else(|| Error::Config { line: 0, msg: format!("missing `{key}`") })
        };
        let params = Self::new(
            list("alpha")?,
            list("beta")?,
            list("gamma")?,
            list("delta")?,
            cfg.require::<f64>("theta")?,
        )?;
        if let Some(k) = cfg.get::<usize>("K")? {
            if k != params.k {
                return Err(Error::InvalidParams(format!(
                    "K = {k} but rate sequences have length {}",
                    params.k
                )));
            }
        }
        Ok(params)
    }

    pub fn with_theta(&self, theta: f64) -> Result<Self> {
        Self::new(
            self.alpha.clone(),
            self.beta.clone(),
            self.gamma.clone(),
            self.delta.clone(),
            theta,
        )
    }

    pub fn k(&self) -> usize {
        self.k
    }
    pub fn theta(&self) -> f64 {
        self.theta
    }
    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }
    pub fn beta(&self) -> &[f64] {
        &self.beta
    }
    pub fn gamma(&self) -> &[f64] {
        &self.gamma
    }
    pub fn delta(&self) -> &[f64] {
        &self.delta
    }

    /// Canonical `key = value` lines, in config-file grammar.
    pub fn provenance_lines(&self) -> Vec<String> {
        let fmt = |v: &[f64]| {
            let items: Vec<String> = v.iter().map(|x| format!("{x}")).collect();
            format!("[{}]", items.join(", "))
        };
        vec![
            format!("K = {}", self.k),
            format!("theta = {}", self.theta),
            format!("alpha = {}", fmt(&self.alpha)),
            format!("beta = {}", fmt(&self.beta)),
            format!("gamma = {}", fmt(&self.gamma)),
            format!("delta = {}", fmt(&self.delta)),
        ]
    }
}

/// Total injection `i_x = alpha_x + beta_x` and removal `o_x = gamma_x + delta_x`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRates {
    pub i_seq: Vec<f64>,
    pub o_seq: Vec<f64>,
}

impl AggregateRates {
    pub fn new(i_seq: Vec<f64>, o_seq: Vec<f64>) -> Result<Self> {
        if i_seq.is_empty() || i_seq.len() != o_seq.len() {
            return Err(Error::InvalidParams(
                "aggregate sequences must be non-empty with equal length".into(),
            ));
        }
        if i_seq.iter().chain(&o_seq).any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::InvalidParams("aggregate rates must be non-negative".into()));
        }
        Ok(Self { i_seq, o_seq })
    }

    pub fn k(&self) -> usize {
        self.i_seq.len()
    }

    /// `i_1 != 0` and `o_1 != 0`: the chain is irreducible.
    pub fn irreducible(&self) -> bool {
        self.i_seq[0] != 0.0 && self.o_seq[0] != 0.0
    }

    pub fn monotone(&self) -> bool {
        non_increasing(&self.i_seq) && non_increasing(&self.o_seq)
    }
}

pub fn aggregates(params: &BoundaryParams) -> AggregateRates {
    let sum = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x + y).collect::<Vec<_>>();
    AggregateRates {
        i_seq: sum(&params.alpha, &params.beta),
        o_seq: sum(&params.gamma, &params.delta),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssumptionReport {
    /// All four rate sequences are non-increasing.
    pub h0: bool,
    /// `alpha_1 + beta_1 != 0` and `gamma_1 + delta_1 != 0`.
    pub h1: bool,
    /// `h1` and the first rates are ordered on both sides the same way.
    pub h2: bool,
    /// `h1` and both aggregate sequences are non-increasing.
    pub h3: bool,
    pub violations: Vec<String>,
}

fn non_increasing(seq: &[f64]) -> bool {
    seq.windows(2).all(|w| w[1] <= w[0])
}

pub fn validate(params: &BoundaryParams) -> AssumptionReport {
    let mut violations = Vec::new();

    let mut h0 = true;
    for (name, seq) in [
        ("alpha", &params.alpha),
        ("gamma", &params.gamma),
        ("beta", &params.beta),
        ("delta", &params.delta),
    ] {
        if !non_increasing(seq) {
            h0 = false;
            violations.push(format!("H0: {name} = {seq:?} is not non-increasing"));
        }
    }

    let agg = aggregates(params);
    let h1 = agg.irreducible();
    if agg.i_seq[0] == 0.0 {
        violations.push("H1: alpha_1 + beta_1 = 0 (empty configuration is absorbing)".into());
    }
    if agg.o_seq[0] == 0.0 {
        violations.push("H1: gamma_1 + delta_1 = 0 (full configuration is absorbing)".into());
    }

    let (a1, b1, g1, d1) = (params.alpha[0], params.beta[0], params.gamma[0], params.delta[0]);
    let ordered = (d1 <= a1 && b1 <= g1) || (d1 >= a1 && b1 >= g1);
    if !ordered {
        violations.push(format!(
            "H2: first rates not ordered (delta_1 = {d1}, alpha_1 = {a1}, beta_1 = {b1}, gamma_1 = {g1})"
        ));
    }
    let h2 = h1 && ordered;

    let monotone = agg.monotone();
    if !non_increasing(&agg.i_seq) {
        violations.push(format!("H3: alpha + beta = {:?} is not non-increasing", agg.i_seq));
    }
    if !non_increasing(&agg.o_seq) {
        violations.push(format!("H3: gamma + delta = {:?} is not non-increasing", agg.o_seq));
    }
    let h3 = h1 && monotone;

    AssumptionReport {
        h0,
        h1,
        h2,
        h3,
        violations,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_sequences_satisfy_everything() {
        let p = BoundaryParams::uniform(&[1.0, 1.0], 1.0).unwrap();
        let r = validate(&p);
        assert!(r.h0 && r.h1 && r.h2 && r.h3, "{r:?}");
        assert!(r.violations.is_empty());
    }

    #[test]
    fn one_directional_current_reservoirs() {
        // injection only on the right, removal only on the left
        let j = 0.7;
        let p = BoundaryParams::new(vec![0.0; 2], vec![j; 2], vec![j; 2], vec![0.0; 2], 1.0).unwrap();
        let r = validate(&p);
        assert!(r.h0 && r.h1 && r.h3, "{r:?}");
        let agg = aggregates(&p);
        assert_eq!(agg.i_seq, agg.o_seq);
        assert_eq!(agg.i_seq, vec![j, j]);
    }

    #[test]
    fn increasing_alpha_breaks_h0() {
        let p = BoundaryParams::new(vec![0.0, 1.0], vec![1.0; 2], vec![1.0; 2], vec![1.0; 2], 1.0)
            .unwrap();
        let r = validate(&p);
        assert!(!r.h0);
        assert!(r.violations.iter().any(|v| v.contains("alpha")));
    }

    #[test]
    fn aggregates_are_elementwise_sums() {
        let p = BoundaryParams::new(vec![1.0, 0.0], vec![0.0, 1.0], vec![0.0; 2], vec![0.0; 2], 1.0)
            .unwrap();
        assert_eq!(aggregates(&p).i_seq, vec![1.0, 1.0]);
    }

    #[test]
    fn all_zero_rates_fail_h1() {
        let p = BoundaryParams::uniform(&[0.0, 0.0], 2.0).unwrap();
        let agg = aggregates(&p);
        assert_eq!(agg.i_seq, vec![0.0, 0.0]);
        assert_eq!(agg.o_seq, vec![0.0, 0.0]);
        let r = validate(&p);
        assert!(!r.h1 && !r.h2 && !r.h3);
    }

    #[test]
    fn h2_accepts_either_ordering() {
        let a = BoundaryParams::new(vec![1.0], vec![0.2], vec![0.5], vec![0.3], 1.0).unwrap();
        assert!(validate(&a).h2);
        let b = BoundaryParams::new(vec![0.2], vec![0.5], vec![0.3], vec![1.0], 1.0).unwrap();
        assert!(validate(&b).h2);
        let c = BoundaryParams::new(vec![1.0], vec![0.5], vec![0.3], vec![0.2], 1.0).unwrap();
        assert!(!validate(&c).h2);
    }

    #[test]
    fn rejects_structural_violations() {
        assert!(BoundaryParams::new(vec![1.0], vec![1.0, 1.0], vec![1.0], vec![1.0], 1.0).is_err());
        assert!(BoundaryParams::new(vec![-1.0], vec![1.0], vec![1.0], vec![1.0], 1.0).is_err());
        assert!(BoundaryParams::uniform(&[1.0], 0.5).is_err());
        assert!(BoundaryParams::uniform(&[], 1.0).is_err());
    }

    #[test]
    fn loads_from_config() {
        let cfg = Config::parse(
            "K = 2\ntheta = 1\nalpha = [1, 0.5]\nbeta = [0.8, 0.4]\ngamma = [1, 0.5]\ndelta = [0.9, 0.45]\n",
        )
        .unwrap();
        let p = BoundaryParams::from_config(&cfg).unwrap();
        assert_eq!(p.k(), 2);
        assert_eq!(p.delta(), &[0.9, 0.45]);
        let back = Config::parse(&p.provenance_lines().join("\n")).unwrap();
        assert_eq!(BoundaryParams::from_config(&back).unwrap(), p);

        let bad = Config::parse("K = 3\ntheta = 1\nalpha = [1]\nbeta = [1]\ngamma = [1]\ndelta = [1]\n")
            .unwrap();
        assert!(BoundaryParams::from_config(&bad).is_err());
    }
}
