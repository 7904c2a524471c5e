//! One trajectory of the lattice dynamics on the diffusive scale, printing
//! mass and current pairings at a few macroscopic times.

use ssep_window::dynamics::{InitialCondition, LatticeState, Scale};
use ssep_window::error::Result;
use ssep_window::observables::{current_pairing, mass, GridFunction};
use ssep_window::params::BoundaryParams;

fn main() -> Result<()> {
    let params = BoundaryParams::new(vec![1.0, 0.5], vec![0.8, 0.4], vec![1.0, 0.5], vec![0.9, 0.45], 1.0)?;
    let n = 128;
    let f0 = GridFunction::from_fn(64, 0.0, |u| u);
    let mut state = LatticeState::init(n, &params, &InitialCondition::BernoulliProfile(f0), 7)?;
    let mut rng = state.dynamics_rng();

    println!("{:>6} {:>8} {:>10} {:>10} {:>10}", "t", "mass", "<J,1>", "<K,1>", "events");
    let mut events = 0;
    for k in 0..=8 {
        let t = 0.05 * k as f64;
        let mut seen = None;
        let mut record = |_: f64, s: &LatticeState| seen = Some((mass(s), current_pairing(s, |_| 1.0)));
        events += state.run_until(&mut rng, t, Scale::Diffusive, &[t], &mut [&mut record])?.events;
        if let Some((m, c)) = seen {
            println!("{t:>6.2} {m:>8.4} {:>10.4} {:>10.4} {events:>10}", c.j_value, c.k_value);
        }
    }
    Ok(())
}
