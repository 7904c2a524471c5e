//! Bulk and boundary currents against the PDE prediction, theta = 1 and 2.

use ssep_window::error::Result;
use ssep_window::harness::{run_ficks_law, ExperimentKind, ExperimentSpec, ProfileSpec, ToleranceTable};
use ssep_window::params::BoundaryParams;

fn main() -> Result<()> {
    for theta in [1.0, 2.0] {
        let params = BoundaryParams::new(vec![0.2, 0.1], vec![2.0, 1.0], vec![2.0, 1.0], vec![0.2, 0.1], theta)?;
        let mut spec = ExperimentSpec::new(ExperimentKind::FicksLaw, params);
        spec.n_list = vec![64];
        spec.ensemble_size = 32;
        spec.t_grid = vec![0.1];
        spec.initial = ProfileSpec::Stationary;
        spec.test_function = vec![1.0, 1.0];
        println!("theta = {theta}");
        let report = run_ficks_law(&spec, &ToleranceTable::default())?;
        print!("{}", report.summary());
    }
    Ok(())
}
