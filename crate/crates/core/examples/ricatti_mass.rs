//! Mass evolution for theta > 1 with K = 2: closed form against RK4.

use ssep_window::boundary::{mass_fixed_point, ricatti_integrate, ricatti_k2};
use ssep_window::error::Result;
use ssep_window::params::{aggregates, BoundaryParams};

fn main() -> Result<()> {
    let params = BoundaryParams::new(vec![1.0, 0.5], vec![0.8, 0.4], vec![1.0, 0.5], vec![0.9, 0.45], 2.0)?;
    let agg = aggregates(&params);
    println!("m* = {:.10}", mass_fixed_point(&agg)?);

    let dt = 1e-3;
    for m0 in [0.0, 0.3, 1.0] {
        let rk = ricatti_integrate(&agg, m0, 5.0, dt)?;
        println!("m0 = {m0}");
        println!("{:>6} {:>14} {:>14} {:>10}", "t", "closed form", "rk4", "gap");
        for (t, m) in rk.times.iter().zip(&rk.values).step_by(500) {
            let exact = ricatti_k2(&agg, m0, *t)?;
            println!("{t:>6.2} {exact:>14.10} {m:>14.10} {:>10.1e}", (exact - m).abs());
        }
    }
    Ok(())
}
