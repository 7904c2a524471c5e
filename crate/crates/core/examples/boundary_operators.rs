//! The boundary operators D and V for a K = 3 window: values, the difference
//! identity, and the mass fixed point with its duality.

use ssep_window::boundary::{d_op, mass_fixed_point, v_op, DPair};
use ssep_window::error::Result;
use ssep_window::params::{aggregates, BoundaryParams};

fn main() -> Result<()> {
    let params = BoundaryParams::new(
        vec![1.0, 0.6, 0.2],
        vec![0.5, 0.5, 0.1],
        vec![0.9, 0.3, 0.3],
        vec![1.2, 0.4, 0.0],
        2.0,
    )?;
    let left = DPair::left(&params);

    println!("{:>5} {:>12}", "f", "D_left(f)");
    for i in 0..=10 {
        let f = i as f64 / 10.0;
        println!("{f:>5.1} {:>12.6}", d_op(&left, f)?);
    }

    let mut worst: f64 = 0.0;
    for i in 0..=20 {
        for j in 0..=20 {
            let (y, z) = (i as f64 / 20.0, j as f64 / 20.0);
            let gap = d_op(&left, y)? - d_op(&left, z)? + (y - z) * v_op(&left, y, z)?;
            worst = worst.max(gap.abs());
        }
    }
    println!("max |D(y) - D(z) + (y - z) V(y, z)| on a 21x21 grid: {worst:.2e}");

    let agg = aggregates(&params);
    let m = mass_fixed_point(&agg)?;
    let swapped = ssep_window::params::AggregateRates::new(agg.o_seq.clone(), agg.i_seq.clone())?;
    let m_dual = mass_fixed_point(&swapped)?;
    println!("m* = {m:.12}, swapped rates give {m_dual:.12}, sum {:.12}", m + m_dual);
    Ok(())
}
