//! Crank-Nicolson solve with nonlinear Robin conditions, relaxing from a step
//! towards the stationary line.

use ssep_window::boundary::stationary_profile;
use ssep_window::error::Result;
use ssep_window::observables::GridFunction;
use ssep_window::params::BoundaryParams;
use ssep_window::pde::{solve_with, PdeProblem, SolveOptions};

fn main() -> Result<()> {
    let params = BoundaryParams::new(vec![0.2, 0.1], vec![2.0, 1.0], vec![2.0, 1.0], vec![0.2, 0.1], 1.0)?;
    let m = 128;
    let f0 = GridFunction::from_fn(m, 0.0, |u| if u < 0.5 { 0.9 } else { 0.1 });
    let problem = PdeProblem::for_params(params.clone(), f0)?;
    let sol = solve_with(&problem, 2.0, m, SolveOptions { dt: Some(1e-3), record_every: 250 })?;

    let line = stationary_profile(&params)?;
    println!("stationary line: rho(0) = {:.6}, rho(1) = {:.6}", line.rho0, line.rho1);
    let target = line.grid(m);
    println!("{:>6} {:>10} {:>10} {:>12}", "t", "rho(t,0)", "rho(t,1)", "L1 to line");
    for frame in &sol.frames {
        println!("{:>6.2} {:>10.6} {:>10.6} {:>12.3e}", frame.t, frame.at(0.0), frame.at(1.0), frame.l1_distance(&target));
    }
    println!("{}", sol.manifest_json()?);
    Ok(())
}
