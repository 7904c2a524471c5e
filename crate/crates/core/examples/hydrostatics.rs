//! Stationary line for theta = 1 and mass relaxation for theta = 2, each
//! checked against simulation.

use ssep_window::error::Result;
use ssep_window::harness::{
    run_hydrostatic_neumann_mass, run_hydrostatic_robin, ExperimentKind, ExperimentSpec, ToleranceTable,
};
use ssep_window::params::BoundaryParams;

fn main() -> Result<()> {
    let tol = ToleranceTable::default();

    let robin = BoundaryParams::new(vec![0.2, 0.1], vec![2.0, 1.0], vec![2.0, 1.0], vec![0.2, 0.1], 1.0)?;
    let mut spec = ExperimentSpec::new(ExperimentKind::HydrostaticRobin, robin);
    spec.n_list = vec![10];
    spec.ensemble_size = 200;
    spec.burn_in = 5.0;
    spec.average_time = 10.0;
    spec.sample_dt = 0.1;
    print!("{}", run_hydrostatic_robin(&spec, &tol)?.summary());

    let neumann = BoundaryParams::uniform(&[0.5, 0.5], 2.0)?;
    let mut spec = ExperimentSpec::new(ExperimentKind::HydrostaticNeumannMass, neumann);
    spec.n_list = vec![32];
    spec.ensemble_size = 16;
    spec.m0_list = vec![0.1, 0.9];
    spec.t_grid = (0..=10).map(|k| 0.2 * k as f64).collect();
    print!("{}", run_hydrostatic_neumann_mass(&spec, &tol)?.summary());
    Ok(())
}
