//! Boundary-integral (mild) solver against the finite-difference solver.

use ssep_window::error::Result;
use ssep_window::observables::GridFunction;
use ssep_window::params::BoundaryParams;
use ssep_window::pde::{mild_solve, solve, PdeProblem};

fn main() -> Result<()> {
    let params = BoundaryParams::new(vec![1.0, 0.5], vec![0.8, 0.4], vec![1.0, 0.5], vec![0.9, 0.45], 1.0)?;
    let m = 64;
    let f0 = GridFunction::from_fn(m, 0.0, |u| 0.5 + 0.4 * (std::f64::consts::PI * u).cos());
    let problem = PdeProblem::for_params(params, f0)?;

    for t in [0.02, 0.05, 0.1] {
        let fd = solve(&problem, t, m, Some(1e-4))?;
        let mild = mild_solve(&problem, t, m, 1e-3)?;
        let (a, b) = (fd.last(), mild.last());
        println!(
            "t = {t:<5} boundary values fd ({:.5}, {:.5}) mild ({:.5}, {:.5}), sup gap {:.2e}",
            a.at(0.0),
            a.at(1.0),
            b.at(0.0),
            b.at(1.0),
            a.sup_distance(b)
        );
    }
    Ok(())
}
