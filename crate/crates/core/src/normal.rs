//! Standard normal CDF, density and quantile.

use libm::erfc;
use statrs::function::erf::erfc_inv;
use std::f64::consts::{FRAC_1_SQRT_2, SQRT_2};

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

pub fn pdf(x: f64) -> f64 {
    INV_SQRT_2PI * (-0.5 * x * x).exp()
}

/// Standard normal CDF, accurate in both tails.
pub fn cdf(x: f64) -> f64 {
    0.5 * erfc(-x * FRAC_1_SQRT_2)
}

/// Standard normal quantile on the open unit interval.
///
/// Returns `-inf`/`+inf` at 0 and 1 and NaN outside `[0, 1]`; callers that
/// need a domain error check the argument first.
pub fn quantile(p: f64) -> f64 {
    if p.is_nan() || !(0.0..=1.0).contains(&p) {
        return f64::NAN;
    }
    if p == 0.0 {
        return f64::NEG_INFINITY;
    }
    if p == 1.0 {
        return f64::INFINITY;
    }
    let mut x = -SQRT_2 * erfc_inv(2.0 * p);
    // One Newton polish; the tail branch of erfc_inv is only good to ~1e-14.
    let dens = pdf(x);
    if dens > 0.0 {
        let resid = if p < 0.5 {
            cdf(x) - p
        } else {
            // work with upper tail to keep relative precision
            (1.0 - p) - cdf(-x)
        };
        x -= resid / dens;
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_values() {
        assert_eq!(cdf(0.0), 0.5);
        assert!((cdf(1.959964) - 0.975).abs() < 1e-6);
        assert!((quantile(0.975) - 1.959_963_984_540_054).abs() < 1e-12);
        assert_eq!(quantile(0.5), 0.0);
        assert_eq!(cdf(f64::INFINITY), 1.0);
    }

    #[test]
    fn roundtrip_tails() {
        for &p in &[1e-300, 1e-12, 1e-6, 0.01, 0.3, 0.5, 0.7, 0.99, 1.0 - 1e-9] {
            let x = quantile(p);
            assert!(((cdf(x) - p) / p).abs() < 1e-12, "p={p}");
        }
        for i in -80..=80 {
            let x = i as f64 * 0.1;
            // above zero, cdf(x) is rounded near 1 and loses ~eps / pdf(x) in x
            let slack = if x > 0.0 { 2.0 * f64::EPSILON / pdf(x) } else { 0.0 };
            assert!((quantile(cdf(x)) - x).abs() < 1e-12 * (1.0 + x.abs()) + slack, "x={x}");
        }
    }
}
