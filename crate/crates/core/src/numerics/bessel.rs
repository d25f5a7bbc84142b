//! Modified Bessel functions of the second kind, orders 0, 1, 2.
//!
//! Below `x = 2` the ascending series in `x^2/4` is summed directly; above it
//! Steed's continued fraction gives `K_0` and `K_1` with the exponential
//! factored out. `K_2` follows from the upward recurrence, which is stable for
//! `K_n`.

use std::f64::consts::PI;

use crate::error::{Error, Result};

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;
const SERIES_CROSSOVER: f64 = 2.0;
const MAX_TERMS: usize = 10_000;

/// Largest argument whose `K_n` is still a normal double.
pub const BESSEL_K_MAX_ARG: f64 = 700.0;
/// Smallest argument for which `K_2 ~ 2/x^2` does not overflow.
pub const BESSEL_K_MIN_ARG: f64 = 1e-150;

/// `(K_0(x), K_1(x)) * e^x`, valid for any `x > 0`.
fn k01_scaled(x: f64) -> (f64, f64) {
    if x <= SERIES_CROSSOVER {
        let (k0, k1) = k01_series(x);
        let ex = x.exp();
        (k0 * ex, k1 * ex)
    } else {
        k01_continued_fraction(x)
    }
}

/// Ascending series for `x <= 2`.
fn k01_series(x: f64) -> (f64, f64) {
    let y = 0.25 * x * x;
    let ln_half = (0.5 * x).ln();

    // I_0, I_1 and the digamma-weighted sums
    let mut term0 = 1.0; // y^k / (k!)^2
    let mut term1 = 1.0; // y^k / (k! (k+1)!)
    let mut i0 = 0.0;
    let mut i1 = 0.0;
    let mut s0 = 0.0; // sum H_k y^k/(k!)^2
    let mut s1 = 0.0; // sum (psi(k+1)+psi(k+2)) y^k/(k!(k+1)!)
    let mut harmonic = 0.0;
    for k in 0..MAX_TERMS {
        let kf = k as f64;
        if k > 0 {
            term0 *= y / (kf * kf);
            term1 *= y / (kf * (kf + 1.0));
            harmonic += 1.0 / kf;
        }
        let psi_k1 = harmonic - EULER_GAMMA;
        let psi_k2 = psi_k1 + 1.0 / (kf + 1.0);
        i0 += term0;
        i1 += term1;
        s0 += harmonic * term0;
        s1 += (psi_k1 + psi_k2) * term1;
        if term0 < 1e-17 * i0 && term1 < 1e-17 * i1 {
            break;
        }
    }
    let i1 = 0.5 * x * i1;
    let k0 = -(ln_half + EULER_GAMMA) * i0 + s0;
    let k1 = 1.0 / x + ln_half * i1 - 0.25 * x * s1;
    (k0, k1)
}

/// Steed's continued fraction (order 0) for `x > 2`, scaled by `e^x`.
fn k01_continued_fraction(x: f64) -> (f64, f64) {
    let a1 = 0.25;
    let mut b = 2.0 * (1.0 + x);
    let mut d = 1.0 / b;
    let mut h = d;
    let mut delh = d;
    let mut q1 = 0.0;
    let mut q2 = 1.0;
    let mut q = a1;
    let mut c = a1;
    let mut a = -a1;
    let mut s = 1.0 + q * delh;
    for i in 1..MAX_TERMS {
        let fi = i as f64;
        a -= 2.0 * fi;
        c = -a * c / (fi + 1.0);
        let qnew = (q1 - b * q2) / a;
        q1 = q2;
        q2 = qnew;
        q += c * qnew;
        b += 2.0;
        d = 1.0 / (b + a * d);
        delh *= b * d - 1.0;
        h += delh;
        let dels = q * delh;
        s += dels;
        if (dels / s).abs() < 1e-17 {
            break;
        }
    }
    let h = a1 * h;
    let k0 = (PI / (2.0 * x)).sqrt() / s;
    let k1 = k0 * (x + 0.5 - h) / x;
    (k0, k1)
}

fn check_arg(order: u32, x: f64) -> Result<()> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::BesselRange {
            order,
            x,
            hint: "argument must be finite and positive",
        });
    }
    Ok(())
}

/// `e^x K_n(x)` for `n` in {0, 1, 2}; finite for every positive `x` above
/// [`BESSEL_K_MIN_ARG`].
pub fn bessel_k_scaled(n: u32, x: f64) -> Result<f64> {
    check_arg(n, x)?;
    if x < BESSEL_K_MIN_ARG {
        return Err(Error::BesselRange {
            order: n,
            x,
            hint: "argument too small, K_n overflows",
        });
    }
    let (k0, k1) = k01_scaled(x);
    match n {
        0 => Ok(k0),
        1 => Ok(k1),
        2 => Ok(k0 + 2.0 / x * k1),
        _ => Err(Error::BesselRange {
            order: n,
            x,
            hint: "only orders 0, 1 and 2 are implemented",
        }),
    }
}

/// `K_n(x)` for `n` in {0, 1, 2}.
///
/// Arguments above [`BESSEL_K_MAX_ARG`] are rejected rather than silently
/// underflowing; use [`bessel_k_scaled`] there.
pub fn bessel_k(n: u32, x: f64) -> Result<f64> {
    check_arg(n, x)?;
    if x > BESSEL_K_MAX_ARG {
        return Err(Error::BesselRange {
            order: n,
            x,
            hint: "argument too large, K_n underflows; use the exponentially scaled form",
        });
    }
    Ok(bessel_k_scaled(n, x)? * (-x).exp())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    // Reference values from a 30-digit evaluation.
    #[test]
    fn values_at_one() {
        assert_relative_eq!(bessel_k(0, 1.0).unwrap(), 0.421_024_438_240_708_3, max_relative = 1e-14);
        assert_relative_eq!(bessel_k(1, 1.0).unwrap(), 0.601_907_230_197_234_6, max_relative = 1e-14);
        assert_relative_eq!(bessel_k(2, 1.0).unwrap(), 1.624_838_898_635_177_5, max_relative = 1e-14);
    }

    #[test]
    fn continuity_at_crossover() {
        for n in [0u32, 1] {
            let below = k01_series(2.0);
            let above = k01_continued_fraction(2.0);
            let (b, a) = if n == 0 { (below.0, above.0) } else { (below.1, above.1) };
            assert_relative_eq!(b * 2f64.exp(), a, max_relative = 1e-13);
        }
    }

    #[test]
    fn small_argument_asymptote() {
        let x = 1e-3;
        assert!((bessel_k(1, x).unwrap() * x - 1.0).abs() < 1e-3);
    }

    #[test]
    fn range_errors() {
        assert!(bessel_k(1, 0.0).is_err());
        assert!(bessel_k(1, -1.0).is_err());
        assert!(bessel_k(2, 750.0).is_err());
        assert!(bessel_k_scaled(2, 750.0).is_ok());
        assert!(bessel_k(3, 1.0).is_err());
    }

    #[test]
    fn upper_range_is_normal() {
        let k = bessel_k(2, 700.0).unwrap();
        assert!(k.is_normal() && k > 0.0);
    }
}
