//! Second-order quantum friction.
//!
//! The force is nonzero only for `u = v / beta > 1`. In the reduced frequency
//! `w = Omega_s / omega_p` the resonance condition `k v > omega_b + Omega_s`
//! becomes `h(w) < 0` for the quadratic
//!
//! ```text
//! h(w) = 2 (1 - u) w^2 + (2 / omega_tilde) w + u
//! ```
//!
//! whose positive root `w0` is the lower limit of the friction integral. The
//! integrand carries an inverse square root at `w0`, which is handled by
//! factoring the radicand as `2 omega_tilde (u - 1) (w - w0) (w - w1) P(w)`.

use std::cell::Cell;
use std::f64::consts::{FRAC_1_SQRT_2, PI, SQRT_2};

use crate::dispersion::{
    omega_s_reduced, to_dimensionless, AtomParams, DimensionlessPoint, Kinematics,
    MaterialParams, HBAR, SPEED_OF_LIGHT,
};
use crate::error::{check_positive, Error, Result};
use crate::numerics::{
    bessel_k, integrate_semi_infinite, integrate_sqrt_endpoint_offset, QuadratureResult,
    QuadratureSpec,
};

/// Relative size below which a negative radicand is treated as round-off.
const RADICAND_CLAMP: f64 = 1e-12;

/// `h(w) = 2 (1 - u) w^2 + (2 / omega_tilde) w + u`; negative exactly where
/// a mode of reduced frequency `w` is Doppler-shifted into resonance.
pub fn h_poly(w: f64, u: f64, omega_tilde: f64) -> f64 {
    2.0 * (1.0 - u) * w * w + 2.0 * w / omega_tilde + u
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdReport {
    /// `u > 1`.
    pub supersonic: bool,
    /// Lower limit of the friction integral; present iff supersonic.
    pub w0: Option<f64>,
    /// Real roots of `h`, ascending; `None` when they are complex.
    pub h_roots: Option<(f64, f64)>,
}

impl ThresholdReport {
    /// Negative root of `h` when supersonic.
    fn lower_root(&self) -> Option<f64> {
        self.h_roots.map(|(lo, _)| lo)
    }
}

/// Roots of `h` and the integration threshold.
pub fn threshold_w0(u: f64, omega_tilde: f64) -> ThresholdReport {
    let wt = omega_tilde;
    if u == 1.0 {
        // h is linear
        let r = -0.5 * wt;
        return ThresholdReport {
            supersonic: false,
            w0: None,
            h_roots: Some((r, r)),
        };
    }
    let disc = 1.0 + 2.0 * wt * wt * u * (u - 1.0);
    if disc < 0.0 {
        return ThresholdReport {
            supersonic: false,
            w0: None,
            h_roots: None,
        };
    }
    let sq = disc.sqrt();
    // product of roots u / (2 (1 - u)) gives the second root without cancellation
    let product = u / (2.0 * (1.0 - u));
    if u > 1.0 {
        let w0 = (1.0 + sq) / (2.0 * wt * (u - 1.0));
        ThresholdReport {
            supersonic: true,
            w0: Some(w0),
            h_roots: Some((product / w0, w0)),
        }
    } else {
        // both roots negative: -(1 +- sq) / (2 wt (1 - u))
        let big = -(1.0 + sq) / (2.0 * wt * (1.0 - u));
        let other = if big != 0.0 { product / big } else { 0.0 };
        let (lo, hi) = if big < other { (big, other) } else { (other, big) };
        ThresholdReport {
            supersonic: false,
            w0: None,
            h_roots: Some((lo, hi)),
        }
    }
}

/// Second-order force, normalized by the static Casimir-Polder magnitude.
///
/// `normalized_value` is a friction magnitude (`>= 0`); the physical force
/// points against the motion. `raw_value` is the same magnitude in newtons.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForceResult {
    pub normalized_value: f64,
    pub raw_value: Option<f64>,
    /// `ln(normalized_value)`, kept finite when the value itself underflows
    /// (`-inf` when the force vanishes).
    pub ln_normalized: f64,
    /// `ln(raw_value / 1 N)`, set together with `raw_value`.
    pub ln_raw: Option<f64>,
    /// Diagnostics of the reduced integral, scaled to `normalized_value` units.
    pub quadrature: QuadratureResult,
    pub threshold: ThresholdReport,
    pub point: DimensionlessPoint,
}

/// The threshold integral `int_{w0}^inf dw e^{-(2w - 1/w) z_tilde} (2w^2-1)^2 g(w) / (w^4 sqrt(R(w)))`
/// in the form `(ln_scale, scaled)` with value `exp(ln_scale) * scaled.value`.
///
/// `R(w) = (2w^2-1)^2 u^2 omega_tilde^2 - 4 w^2 (1 + omega_tilde w)^2`. Shared by the
/// force (`g = 1 + omega_tilde w`) and the decay rate (`g = 1`).
pub(crate) fn threshold_integral<G: Fn(f64) -> f64>(
    p: &DimensionlessPoint,
    threshold: &ThresholdReport,
    g: G,
    spec: &QuadratureSpec,
) -> Result<(f64, QuadratureResult)> {
    let (Some(w0), Some(w1)) = (threshold.w0, threshold.lower_root()) else {
        return Ok((0.0, QuadratureResult::zero()));
    };
    let DimensionlessPoint {
        u,
        omega_tilde: wt,
        z_tilde: zt,
    } = *p;
    let ln_scale = -(2.0 * w0 - 1.0 / w0) * zt;

    let common = |w: f64, t: f64| {
        let e = (-zt * t * (2.0 + 1.0 / (w * w0))).exp();
        let m = 2.0 * w * w - 1.0;
        e * m * m * g(w) / (w * w * w * w)
    };
    let cofactor = |w: f64| {
        let big_p = wt * u * (2.0 * w * w - 1.0) + 2.0 * w * (1.0 + wt * w);
        2.0 * wt * (u - 1.0) * (w - w1) * big_p
    };

    let split = w0 + 1.0;
    let singular = integrate_sqrt_endpoint_offset(
        |w, t| common(w, t) / (cofactor(w) * t).sqrt(),
        w0,
        split,
        spec,
    );

    let failure: Cell<Option<Error>> = Cell::new(None);
    let tail = integrate_semi_infinite(
        |w| {
            let m = 2.0 * w * w - 1.0;
            let a = m * u * wt;
            let b = 2.0 * w * (1.0 + wt * w);
            let radicand = a * a - b * b;
            let radicand = if radicand > 0.0 {
                radicand
            } else if radicand > -RADICAND_CLAMP * (a * a + b * b) {
                0.0
            } else {
                failure.set(Some(Error::NegativeRadicand { w, radicand }));
                return 0.0;
            };
            common(w, w - w0) / radicand.sqrt()
        },
        split,
        1.0 / (2.0 * zt),
        spec,
    );
    if let Some(e) = failure.take() {
        return Err(e);
    }
    Ok((ln_scale, singular.combine(tail)))
}

/// Normalized second-order friction `f = F / |F_CP|` evaluated in the reduced
/// frequency variable. Returns exactly zero, without integrating, for `u <= 1`.
pub fn force2_normalized(
    m: &MaterialParams,
    a: &AtomParams,
    kin: &Kinematics,
    spec: &QuadratureSpec,
) -> Result<ForceResult> {
    let point = to_dimensionless(m, a, kin)?;
    force2_normalized_at(&point, m.beta, spec)
}

/// [`force2_normalized`] for a reduced point; only `beta / c` is needed beyond it.
pub fn force2_normalized_at(
    point: &DimensionlessPoint,
    beta: f64,
    spec: &QuadratureSpec,
) -> Result<ForceResult> {
    let threshold = threshold_w0(point.u, point.omega_tilde);
    if !threshold.supersonic {
        return Ok(ForceResult {
            normalized_value: 0.0,
            raw_value: None,
            ln_normalized: f64::NEG_INFINITY,
            ln_raw: None,
            quadrature: QuadratureResult::zero(),
            threshold,
            point: *point,
        });
    }
    let wt = point.omega_tilde;
    let (ln_scale, integral) = threshold_integral(point, &threshold, |w| 1.0 + wt * w, spec)?;
    let ln_prefactor = (PI / 6.0).ln() + 5.0 * point.z_tilde.ln()
        - (point.u * wt).ln()
        + (beta / SPEED_OF_LIGHT).ln()
        + ln_scale;
    let quadrature = integral.scaled(ln_prefactor.exp());
    if !quadrature.converged {
        return Err(Error::NotConverged {
            value: quadrature.value,
            error_estimate: quadrature.error_estimate,
        });
    }
    let ln_normalized = if integral.value > 0.0 {
        integral.value.ln() + ln_prefactor
    } else {
        f64::NEG_INFINITY
    };
    Ok(ForceResult {
        normalized_value: quadrature.value.max(0.0),
        raw_value: None,
        ln_normalized,
        ln_raw: None,
        quadrature,
        threshold,
        point: *point,
    })
}

/// Static Casimir-Polder force of a perfect conductor, `-3 hbar c alpha / (2 pi z^5)` [N].
pub fn casimir_polder(a: &AtomParams, z: f64) -> f64 {
    -3.0 * HBAR * SPEED_OF_LIGHT * a.alpha / (2.0 * PI * z.powi(5))
}

/// Second-order friction in newtons: the normalized value times `|F_CP|`.
pub fn force2_raw(
    m: &MaterialParams,
    a: &AtomParams,
    kin: &Kinematics,
    spec: &QuadratureSpec,
) -> Result<ForceResult> {
    let mut r = force2_normalized(m, a, kin, spec)?;
    let cp = casimir_polder(a, kin.z).abs();
    r.raw_value = Some(r.normalized_value * cp);
    r.ln_raw = Some(r.ln_normalized + cp.ln());
    Ok(r)
}

/// Onset of friction in `q = beta k / omega_p`: the larger root of
/// `(u - 1/2) q - 1/omega_tilde = sqrt(2 + q^2) / 2`. Independent of `w0`.
pub fn threshold_q0(u: f64, omega_tilde: f64) -> Option<f64> {
    if u <= 1.0 {
        return None;
    }
    let inv = 1.0 / omega_tilde;
    Some(((2.0 * u - 1.0) * inv + (inv * inv + 2.0 * u * (u - 1.0)).sqrt()) / (2.0 * u * (u - 1.0)))
}

/// Second-order friction [N] integrated directly over the wavenumber, without
/// the change of variables to `w`. Used as a consistency path.
pub fn force2_raw_kspace(
    m: &MaterialParams,
    a: &AtomParams,
    kin: &Kinematics,
    spec: &QuadratureSpec,
) -> Result<QuadratureResult> {
    let p = to_dimensionless(m, a, kin)?;
    let Some(q0) = threshold_q0(p.u, p.omega_tilde) else {
        return Ok(QuadratureResult::zero());
    };
    let (u, zt) = (p.u, p.z_tilde);
    let wb = 1.0 / p.omega_tilde;
    let s0 = (2.0 + q0 * q0).sqrt();

    // q^2 e^{-2 (q - q0) zt} W / (Omega (1 + 2 Omega^2) sqrt(q^2 u^2 - W^2)), W = wb + Omega
    let body = |q: f64, t: f64| {
        let om = omega_s_reduced(q);
        let w_res = wb + om;
        let s = (2.0 + q * q).sqrt();
        // q u - W = t (u - 1/2 - (q + q0) / (2 (s + s0)))
        let slope = u - 0.5 - (q + q0) / (2.0 * (s + s0));
        let radicand = t * slope * (q * u + w_res);
        q * q * (-2.0 * t * zt).exp() * w_res / (om * (1.0 + 2.0 * om * om) * radicand.sqrt())
    };

    let split = q0 + 1.0 / zt;
    let singular = integrate_sqrt_endpoint_offset(body, q0, split, spec);
    let tail = integrate_semi_infinite(|q| body(q, q - q0), split, 1.0 / (2.0 * zt), spec);
    let integral = singular.combine(tail);

    // F = 2 d^2 (omega_p/beta)^3 (omega_p/v) e^{-2 q0 zt} * integral, times hbar
    let ln_prefactor = (2.0 * a.dipole_sq() * HBAR).ln() + 3.0 * m.wavenumber_scale().ln()
        + (m.omega_p / kin.v).ln()
        - 2.0 * q0 * zt;
    Ok(integral.scaled(ln_prefactor.exp()))
}

/// Normalized friction in the non-dispersive limit `beta -> 0`, where the
/// surface band collapses to `omega_p / sqrt(2)`:
///
/// `f = sqrt(2) pi z^5 omega_p omega_b k0^3 / (3 v c) [K_2(2 z k0) - K_1(2 z k0) / (2 z k0)]`
/// with `v k0 = omega_b + omega_p / sqrt(2)`.
pub fn force2_nondispersive(m: &MaterialParams, a: &AtomParams, kin: &Kinematics) -> Result<f64> {
    check_positive("v", kin.v)?;
    let k0 = (a.omega_b + m.omega_p * FRAC_1_SQRT_2) / kin.v;
    let x = 2.0 * kin.z * k0;
    let bracket = bessel_k(2, x)? - bessel_k(1, x)? / x;
    let prefactor = SQRT_2 * PI * kin.z.powi(5) * m.omega_p * a.omega_b * k0.powi(3)
        / (3.0 * kin.v * SPEED_OF_LIGHT);
    Ok(prefactor * bracket)
}
