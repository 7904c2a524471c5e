//! Independent trajectories with reproducible seeds, run in parallel and
//! returned in index order.

use rayon::prelude::*;

use crate::error::Result;

/// SplitMix64 finaliser: well-spread seeds from consecutive integers.
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn trajectory_seed(seed_base: u64, index: usize) -> u64 {
    splitmix64(seed_base.wrapping_add(index as u64))
}

/// Run `job(index, seed)` for `0..size`; results come back in index order
/// whatever the scheduling.
pub fn run_ensemble<T, F>(size: usize, seed_base: u64, job: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize, u64) -> Result<T> + Sync,
{
    (0..size)
        .into_par_iter()
        .map(|i| job(i, trajectory_seed(seed_base, i)))
        .collect()
}

/// Mean and standard error of the mean.
pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seeds_are_distinct_and_results_ordered() {
        let out = run_ensemble(100, 7, |i, s| Ok((i, s))).unwrap();
        assert!(out.iter().enumerate().all(|(i, (j, _))| i == *j));
        let mut seeds: Vec<u64> = out.iter().map(|(_, s)| *s).collect();
        seeds.sort_unstable();
        seeds.dedup();
        assert_eq!(seeds.len(), 100);
        assert_eq!(trajectory_seed(7, 3), out[3].1);
    }

    #[test]
    fn mean_and_standard_error() {
        let (m, se) = mean_se(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        assert!((se - (5.0f64 / 3.0 / 4.0).sqrt()).abs() < 1e-15);
    }
}
