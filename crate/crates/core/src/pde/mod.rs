//! Hydrodynamic equations: the heat equation on `[0, 1]` with either the
//! nonlinear Robin conditions
//!
//! ```text
//! d_u rho(0) = -D_{alpha,gamma}(rho(0)),   d_u rho(1) = D_{beta,delta}(rho(1))
//! ```
//!
//! (`theta = 1`) or Neumann conditions (`theta > 1`).

mod cn;
mod kernel;
mod mild;
mod weak;

pub use cn::{solve, solve_with, SolveOptions};
pub use kernel::{kernel_cell_integral, kernel_eval, kernel_time_integral, KernelConfig};
pub use mild::{mild_solve, mild_solve_with};
pub use weak::{weak_residual, Cosine, Polynomial, TestFunction};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::observables::GridFunction;
use crate::params::BoundaryParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BcKind {
    NonlinearRobin,
    Neumann,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PdeProblem {
    params: BoundaryParams,
    f0: GridFunction,
    bc: BcKind,
}

impl PdeProblem {
    pub fn new(params: BoundaryParams, f0: GridFunction, bc: BcKind) -> Result<Self> {
        match bc {
            BcKind::NonlinearRobin if params.theta() != 1.0 => {
                return Err(Error::InvalidParams(format!(
                    "Robin conditions belong to theta = 1, got {}",
                    params.theta()
                )))
            }
            BcKind::Neumann if params.theta() <= 1.0 => {
                return Err(Error::InvalidParams("Neumann conditions belong to theta > 1".into()))
            }
            _ => {}
        }
        if !f0.is_density() {
            return Err(Error::Invalid("initial profile leaves [0, 1]".into()));
        }
        Ok(Self { params, f0, bc })
    }

    /// Boundary kind implied by `theta`.
    pub fn for_params(params: BoundaryParams, f0: GridFunction) -> Result<Self> {
        let bc = if params.theta() == 1.0 { BcKind::NonlinearRobin } else { BcKind::Neumann };
        Self::new(params, f0, bc)
    }

    pub fn params(&self) -> &BoundaryParams {
        &self.params
    }
    pub fn f0(&self) -> &GridFunction {
        &self.f0
    }
    pub fn bc(&self) -> BcKind {
        self.bc
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveManifest {
    pub scheme: String,
    pub m: usize,
    pub dt: f64,
    pub steps: usize,
    /// Largest number of boundary iterations in a single step.
    pub picard_max: usize,
    pub picard_total: usize,
    pub dt_halvings: usize,
}

/// Frames `t_0 = 0 < t_1 < ...` of a solution, plus how it was computed.
#[derive(Debug, Clone, PartialEq)]
pub struct PdeSolution {
    pub frames: Vec<GridFunction>,
    pub manifest: SolveManifest,
}

impl PdeSolution {
    pub fn last(&self) -> &GridFunction {
        self.frames.last().expect("a solution has at least the initial frame")
    }

    /// Frame whose time is closest to `t`.
    pub fn at_time(&self, t: f64) -> &GridFunction {
        self.frames
            .iter()
            .min_by(|a, b| (a.t - t).abs().total_cmp(&(b.t - t).abs()))
            .expect("non-empty")
    }

    /// Long-format CSV: `t,u,value`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,u,value\n");
        for f in &self.frames {
            for (u, v) in f.nodes().zip(&f.values) {
                out.push_str(&format!("{},{},{}\n", f.t, u, v));
            }
        }
        out
    }

    pub fn manifest_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.manifest)?)
    }
}
