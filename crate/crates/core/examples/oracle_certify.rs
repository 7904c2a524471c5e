//! Exact master equation on N = 6 against a Monte Carlo ensemble.

use ssep_window::error::Result;
use ssep_window::harness::{run_oracle_certify, ExperimentKind, ExperimentSpec, ToleranceTable};
use ssep_window::oracle::stationary;
use ssep_window::params::BoundaryParams;

fn main() -> Result<()> {
    let params = BoundaryParams::new(vec![1.0, 0.5], vec![0.8, 0.4], vec![1.0, 0.5], vec![0.9, 0.45], 1.0)?;
    let pi = stationary(6, &params)?;
    println!("stationary marginals: {:?}", pi.marginals().iter().map(|p| format!("{p:.4}")).collect::<Vec<_>>());

    let mut spec = ExperimentSpec::new(ExperimentKind::OracleCertify, params);
    spec.n_list = vec![6];
    spec.ensemble_size = 20_000;
    spec.t_grid = vec![1.0, 4.0];
    let report = run_oracle_certify(&spec, &ToleranceTable::default())?;
    print!("{}", report.summary());
    Ok(())
}
