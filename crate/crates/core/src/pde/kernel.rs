//! Neumann heat kernel on `[0, 1]` by reflection:
//! `P_t(u, v) = sum_k Phi_t(u, 2k + v) + Phi_t(u, 2k - v)`,
//! `Phi_t(u, w) = (4 pi t)^{-1/2} exp(-(u - w)^2 / (4t))`.
//!
//! At `v = 0` and `v = 1` the two image families coincide and both are
//! counted, which keeps `P_t(u, .)` continuous up to the boundary.

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Images whose Gaussian factor is below `exp(-CUTOFF)` are dropped.
const CUTOFF: f64 = 46.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelConfig {
    /// Minimum number of image pairs; more are added when `t` is large.
    pub image_count: usize,
    pub t_floor: f64,
}

impl Default for KernelConfig {
    fn default() -> Self {
        Self { image_count: 8, t_floor: 1e-8 }
    }
}

impl KernelConfig {
    pub fn new(image_count: usize, t_floor: f64) -> Result<Self> {
        if image_count < 3 || !(t_floor > 0.0) {
            return Err(Error::Invalid(format!(
                "kernel needs image_count >= 3 and t_floor > 0, got {image_count}, {t_floor}"
            )));
        }
        Ok(Self { image_count, t_floor })
    }

    /// Image range large enough that dropped terms are below `exp(-CUTOFF)`.
    pub fn images_for(&self, t: f64) -> i64 {
        let reach = ((4.0 * t * CUTOFF).sqrt() + 2.0) / 2.0;
        (self.image_count as i64).max(reach.ceil() as i64)
    }
}

fn phi(t: f64, d: f64) -> f64 {
    (-d * d / (4.0 * t)).exp() / (4.0 * PI * t).sqrt()
}

pub fn kernel_eval(cfg: &KernelConfig, t: f64, u: f64, v: f64) -> Result<f64> {
    if !(t >= cfg.t_floor) {
        return Err(Error::Invalid(format!("kernel time {t} below floor {}", cfg.t_floor)));
    }
    for x in [u, v] {
        if !(0.0..=1.0).contains(&x) {
            return Err(Error::Domain { value: x });
        }
    }
    let n = cfg.images_for(t);
    // sum from the far images inwards so the small terms are not swamped
    let mut sum = 0.0;
    for j in (0..=n).rev() {
        let ks: &[i64] = if j == 0 { &[0] } else { &[j, -j] };
        for &k in ks {
            let w = 2.0 * k as f64;
            sum += phi(t, u - (w + v)) + phi(t, u - (w - v));
        }
    }
    Ok(sum)
}

/// `int_a^b P_t(u, v) dv` for `0 <= a <= b <= 1`, exact up to image truncation.
pub fn kernel_cell_integral(cfg: &KernelConfig, t: f64, u: f64, a: f64, b: f64) -> f64 {
    let s = (4.0 * t).sqrt();
    let n = cfg.images_for(t);
    let mut sum = 0.0;
    for k in -n..=n {
        let w = 2.0 * k as f64;
        // image 2k + v over [a, b] and 2k - v over [-b, -a]
        sum += 0.5 * (libm::erf((w + b - u) / s) - libm::erf((w + a - u) / s));
        sum += 0.5 * (libm::erf((w - a - u) / s) - libm::erf((w - b - u) / s));
    }
    sum
}

/// `int_0^tau (4 pi s)^{-1/2} exp(-d^2 / (4 s)) ds`.
pub(crate) fn gauss_time_antiderivative(tau: f64, d: f64) -> f64 {
    if tau <= 0.0 {
        return 0.0;
    }
    let d = d.abs();
    (tau / PI).sqrt() * (-d * d / (4.0 * tau)).exp() - 0.5 * d * libm::erfc(d / (2.0 * tau.sqrt()))
}

/// `int_{t0}^{t1} P_s(u, v) ds`, computed exactly per image.
pub fn kernel_time_integral(cfg: &KernelConfig, t0: f64, t1: f64, u: f64, v: f64) -> f64 {
    let n = cfg.images_for(t1);
    let reach = (4.0 * t1 * CUTOFF).sqrt();
    let mut sum = 0.0;
    for j in (0..=n).rev() {
        let ks: &[i64] = if j == 0 { &[0] } else { &[j, -j] };
        for &k in ks {
            let w = 2.0 * k as f64;
            for d in [u - (w + v), u - (w - v)] {
                if d.abs() > reach {
                    continue;
                }
                sum += gauss_time_antiderivative(t1, d) - gauss_time_antiderivative(t0, d);
            }
        }
    }
    sum
}
