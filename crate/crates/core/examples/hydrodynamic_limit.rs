//! Empirical cell profiles against the PDE for a few lattice sizes.

use ssep_window::error::Result;
use ssep_window::harness::{run_hydrodynamic, ExperimentKind, ExperimentSpec, ProfileSpec, ToleranceTable};
use ssep_window::params::BoundaryParams;

fn main() -> Result<()> {
    let params = BoundaryParams::new(vec![1.0, 0.5], vec![0.8, 0.4], vec![1.0, 0.5], vec![0.9, 0.45], 1.0)?;
    let mut spec = ExperimentSpec::new(ExperimentKind::Hydrodynamic, params);
    spec.n_list = vec![32, 64, 128];
    spec.ensemble_size = 64;
    spec.t_grid = vec![0.0, 0.05, 0.1];
    spec.initial = ProfileSpec::Linear { a: 0.0, b: 1.0 };
    let report = run_hydrodynamic(&spec, &ToleranceTable::default())?;
    print!("{}", report.summary());
    if let Some(errors) = report.table("errors") {
        print!("{}", errors.to_csv());
    }
    Ok(())
}
