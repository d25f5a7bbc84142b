//! Surface plasmon dispersion of a hydrodynamic metal half-space, the
//! quantized mode amplitude, the Doppler shift seen by a moving atom, and the
//! reduced variables every integral is expressed in.
//!
//! Units: SI lengths and speeds, angular frequencies in rad/s, and energies
//! expressed as angular frequencies (hbar = 1). Conversion to newtons happens
//! only at the force-reporting boundary.
//!
//! Two reduced variables appear throughout the crate:
//!
//! * `w = Omega_s / omega_p`, the mode frequency in units of the plasma frequency;
//! * `q = beta k / omega_p`, the wavenumber in units of `omega_p / beta`.

use std::f64::consts::{FRAC_1_SQRT_2, PI, SQRT_2};

use crate::error::{check_non_negative, check_positive, Error, Result};

/// Speed of light in vacuum [m/s].
pub const SPEED_OF_LIGHT: f64 = 2.997_924_58e8;

/// Reduced Planck constant [J s]; converts frequency-unit forces to newtons.
pub const HBAR: f64 = 1.054_571_817e-34;

/// Surface-mode band bottom in units of the plasma frequency.
pub const BAND_BOTTOM_W: f64 = FRAC_1_SQRT_2;

/// Electron-fluid parameters of the metal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaterialParams {
    /// Plasma frequency [rad/s].
    pub omega_p: f64,
    /// Compressional (sound) speed of the electron fluid [m/s].
    pub beta: f64,
}

impl MaterialParams {
    pub fn new(omega_p: f64, beta: f64) -> Result<Self> {
        check_positive("omega_p", omega_p)?;
        check_non_negative("beta", beta)?;
        Ok(Self { omega_p, beta })
    }

    /// Errors with [`Error::NonDispersive`] when `beta == 0`.
    pub fn require_dispersive(&self) -> Result<()> {
        if self.beta > 0.0 {
            Ok(())
        } else {
            Err(Error::NonDispersive)
        }
    }

    /// `omega_p / beta` [1/m], the wavenumber unit of the reduced variable `q`.
    pub fn wavenumber_scale(&self) -> f64 {
        self.omega_p / self.beta
    }
}

/// Two-level atom with a threefold degenerate excited state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AtomParams {
    /// Transition frequency [rad/s].
    pub omega_b: f64,
    /// Static polarizability [m^3, Gaussian].
    pub alpha: f64,
}

impl AtomParams {
    pub fn new(omega_b: f64, alpha: f64) -> Result<Self> {
        check_positive("omega_b", omega_b)?;
        check_positive("alpha", alpha)?;
        Ok(Self { omega_b, alpha })
    }

    /// Builds the atom from its squared dipole coupling `d^2` [m^3 rad/s].
    pub fn from_dipole_sq(omega_b: f64, dipole_sq: f64) -> Result<Self> {
        check_positive("omega_b", omega_b)?;
        check_positive("dipole_sq", dipole_sq)?;
        Self::new(omega_b, 2.0 * dipole_sq / omega_b)
    }

    /// Squared dipole coupling `d^2 = alpha omega_b / 2` [m^3 rad/s].
    pub fn dipole_sq(&self) -> f64 {
        0.5 * self.alpha * self.omega_b
    }
}

/// Uniform motion parallel to the surface.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Kinematics {
    /// Speed [m/s].
    pub v: f64,
    /// Atom-surface gap [m].
    pub z: f64,
}

impl Kinematics {
    pub fn new(v: f64, z: f64) -> Result<Self> {
        check_non_negative("v", v)?;
        check_positive("z", z)?;
        Ok(Self { v, z })
    }

    /// True when the non-retarded treatment is questionable (`v >= 0.1 c`).
    pub fn is_relativistic(&self) -> bool {
        self.v >= 0.1 * SPEED_OF_LIGHT
    }
}

/// The reduced parameters `u = v/beta`, `omega_tilde = omega_p/omega_b`,
/// `z_tilde = z omega_p / beta`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DimensionlessPoint {
    pub u: f64,
    pub omega_tilde: f64,
    pub z_tilde: f64,
}

impl DimensionlessPoint {
    pub fn new(u: f64, omega_tilde: f64, z_tilde: f64) -> Result<Self> {
        check_non_negative("u", u)?;
        check_positive("omega_tilde", omega_tilde)?;
        check_positive("z_tilde", z_tilde)?;
        Ok(Self {
            u,
            omega_tilde,
            z_tilde,
        })
    }

    /// Physical atom and trajectory reproducing this point for the given metal.
    pub fn realize(&self, m: &MaterialParams, alpha: f64) -> Result<(AtomParams, Kinematics)> {
        m.require_dispersive()?;
        let atom = AtomParams::new(m.omega_p / self.omega_tilde, alpha)?;
        let kin = Kinematics::new(self.u * m.beta, self.z_tilde * m.beta / m.omega_p)?;
        Ok((atom, kin))
    }

    /// Atom transition frequency in units of the plasma frequency.
    pub fn atom_frequency(&self) -> f64 {
        1.0 / self.omega_tilde
    }
}

/// An in-plane surface mode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModePoint {
    /// Wavenumber [1/m].
    pub k: f64,
    /// Angle to the direction of motion [rad].
    pub theta: f64,
}

impl ModePoint {
    pub fn new(k: f64, theta: f64) -> Result<Self> {
        check_non_negative("k", k)?;
        if !theta.is_finite() {
            return Err(Error::InvalidParameter {
                name: "theta",
                value: theta,
                reason: "must be finite",
            });
        }
        Ok(Self {
            k,
            theta: theta.rem_euclid(2.0 * PI),
        })
    }

    pub fn doppler(&self, v: f64, m: &MaterialParams) -> Result<f64> {
        doppler(self.k, self.theta, v, m)
    }
}

fn check_wavenumber(k: f64) -> Result<()> {
    check_non_negative("k", k)
}

/// Surface-mode frequency `Omega_s(k) = (sqrt(2 omega_p^2 + beta^2 k^2) + beta k) / 2`.
pub fn omega_s(k: f64, m: &MaterialParams) -> Result<f64> {
    m.require_dispersive()?;
    check_wavenumber(k)?;
    Ok(m.omega_p * omega_s_reduced(k / m.wavenumber_scale()))
}

/// Inverse decay length of the mode inside the metal.
pub fn p_s(k: f64, m: &MaterialParams) -> Result<f64> {
    m.require_dispersive()?;
    check_wavenumber(k)?;
    let kp2 = 2.0 * (m.omega_p / m.beta).powi(2);
    // (-k + sqrt(k^2 + kp2)) / 2 without the cancellation at large k
    Ok(0.5 * kp2 / (k + (k * k + kp2).sqrt()))
}

/// Wavenumber of the surface mode with frequency `w omega_p`; inverse of [`omega_s`].
pub fn k_of_w(w: f64, m: &MaterialParams) -> Result<f64> {
    m.require_dispersive()?;
    Ok(m.wavenumber_scale() * q_of_w(w)?)
}

/// `dk/dw = omega_p (2 w^2 + 1) / (2 beta w^2)`.
pub fn dk_dw(w: f64, m: &MaterialParams) -> Result<f64> {
    m.require_dispersive()?;
    if !(w >= BAND_BOTTOM_W) {
        return Err(Error::BelowBandBottom(w));
    }
    Ok(m.wavenumber_scale() * (2.0 * w * w + 1.0) / (2.0 * w * w))
}

/// `w = Omega_s(k) / omega_p`.
pub fn w_of_k(k: f64, m: &MaterialParams) -> Result<f64> {
    Ok(omega_s(k, m)? / m.omega_p)
}

/// Squared mode amplitude `omega_p^4 / [4 pi k Omega_s (omega_p^2 + 2 Omega_s^2)]` [m/s].
pub fn phi_k_sq(k: f64, m: &MaterialParams) -> Result<f64> {
    m.require_dispersive()?;
    check_positive("k", k)?;
    let q = k / m.wavenumber_scale();
    Ok(m.beta * mode_weight_reduced(q) / (4.0 * PI * q))
}

/// Doppler-shifted mode frequency `Omega_s(k) - k v cos(theta)`.
pub fn doppler(k: f64, theta: f64, v: f64, m: &MaterialParams) -> Result<f64> {
    Ok(omega_s(k, m)? - k * v * theta.cos())
}

pub fn to_dimensionless(
    m: &MaterialParams,
    a: &AtomParams,
    kin: &Kinematics,
) -> Result<DimensionlessPoint> {
    m.require_dispersive()?;
    DimensionlessPoint::new(
        kin.v / m.beta,
        m.omega_p / a.omega_b,
        kin.z * m.omega_p / m.beta,
    )
}

/// `Omega_s / omega_p` as a function of `q = beta k / omega_p`.
#[inline]
pub fn omega_s_reduced(q: f64) -> f64 {
    0.5 * ((2.0 + q * q).sqrt() + q)
}

/// `d(Omega_s/omega_p)/dq`, which lies in `[1/2, 1)`.
#[inline]
pub fn omega_s_reduced_slope(q: f64) -> f64 {
    0.5 * (1.0 + q / (2.0 + q * q).sqrt())
}

/// `q` at which the reduced slope equals `slope`, for `slope` in `[1/2, 1)`.
pub fn q_of_slope(slope: f64) -> Option<f64> {
    if !(0.5..1.0).contains(&slope) {
        return None;
    }
    let r = 2.0 * slope - 1.0;
    Some(r * SQRT_2 / (1.0 - r * r).sqrt())
}

/// `omega_p^2 / (Omega_s (omega_p^2 + 2 Omega_s^2))` in units of `1/omega_p`.
#[inline]
pub fn mode_weight_reduced(q: f64) -> f64 {
    let w = omega_s_reduced(q);
    1.0 / (w * (1.0 + 2.0 * w * w))
}

/// `q = beta k / omega_p` for the mode of reduced frequency `w`.
pub fn q_of_w(w: f64) -> Result<f64> {
    if !(w >= BAND_BOTTOM_W) || !w.is_finite() {
        return Err(Error::BelowBandBottom(w));
    }
    // 2w^2 - 1 factored so the band bottom maps to exactly zero
    Ok(((w - BAND_BOTTOM_W) * (w + BAND_BOTTOM_W) / w).max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn metal() -> MaterialParams {
        MaterialParams::new(1e16, 1e6).unwrap()
    }

    #[test]
    fn band_bottom_at_zero_wavenumber() {
        let m = metal();
        assert_relative_eq!(omega_s(0.0, &m).unwrap(), 1e16 / SQRT_2, max_relative = 1e-15);
        assert_relative_eq!(p_s(0.0, &m).unwrap(), 1e16 / (SQRT_2 * 1e6), max_relative = 1e-15);
        assert_eq!(k_of_w(BAND_BOTTOM_W, &m).unwrap(), 0.0);
    }

    #[test]
    fn large_k_is_acoustic() {
        let m = metal();
        let k = 1e14;
        let ratio = omega_s(k, &m).unwrap() / (m.beta * k);
        assert!((ratio - 1.0).abs() < 1e-3, "{ratio}");
    }

    #[test]
    fn reference_point_round_trips() {
        let m = metal();
        let k = 1e10;
        let om = omega_s(k, &m).unwrap();
        // q = 1: Omega_s = omega_p (sqrt(3) + 1) / 2
        assert_relative_eq!(om, 1e16 * (3f64.sqrt() + 1.0) / 2.0, max_relative = 1e-14);
        assert_relative_eq!(k_of_w(om / m.omega_p, &m).unwrap(), k, max_relative = 1e-13);
    }

    #[test]
    fn rejects_zero_sound_speed() {
        let m = MaterialParams::new(1e16, 0.0).unwrap();
        assert_eq!(omega_s(1.0, &m), Err(Error::NonDispersive));
        assert_eq!(p_s(1.0, &m), Err(Error::NonDispersive));
        assert!(to_dimensionless(&m, &AtomParams::new(1e16, 1e-30).unwrap(), &Kinematics::new(1.0, 1e-8).unwrap()).is_err());
    }

    #[test]
    fn below_band_bottom_is_domain_error() {
        assert!(matches!(k_of_w(0.7, &metal()), Err(Error::BelowBandBottom(_))));
    }

    #[test]
    fn phi_limits() {
        let m = metal();
        assert!(phi_k_sq(0.0, &m).is_err());
        // k phi^2 -> omega_p^4 / (4 pi (omega_p/sqrt2) 2 omega_p^2) = sqrt(2) omega_p / (8 pi)
        let k = 1e-3;
        assert_relative_eq!(k * phi_k_sq(k, &m).unwrap(), SQRT_2 * m.omega_p / (8.0 * PI), max_relative = 1e-9);
        // large k: phi^2 ~ omega_p^4 / (8 pi beta^3 k^4)
        let k = 100.0 * m.omega_p / m.beta;
        let asym = m.omega_p.powi(4) / (8.0 * PI * m.beta.powi(3) * k.powi(4));
        assert!((phi_k_sq(k, &m).unwrap() / asym - 1.0).abs() < 0.01);
    }

    #[test]
    fn doppler_special_angles() {
        let m = metal();
        let k = 3e9;
        let om = omega_s(k, &m).unwrap();
        assert_eq!(doppler(k, 0.3, 0.0, &m).unwrap(), om);
        assert_relative_eq!(doppler(k, PI / 2.0, 5e6, &m).unwrap(), om, max_relative = 1e-15);
    }

    #[test]
    fn dimensionless_conversion() {
        let m = metal();
        let a = AtomParams::new(1e16, 1e-30).unwrap();
        let kin = Kinematics::new(2e6, 10e-9).unwrap();
        let p = to_dimensionless(&m, &a, &kin).unwrap();
        assert_relative_eq!(p.u, 2.0);
        assert_relative_eq!(p.omega_tilde, 1.0);
        assert_relative_eq!(p.z_tilde, 100.0, max_relative = 1e-14);
        let (a2, k2) = p.realize(&m, 1e-30).unwrap();
        assert_relative_eq!(a2.omega_b, a.omega_b);
        assert_relative_eq!(k2.z, kin.z, max_relative = 1e-14);
    }

    #[test]
    fn polarizability_round_trip() {
        let a = AtomParams::new(2e15, 7e-31).unwrap();
        let b = AtomParams::from_dipole_sq(2e15, a.dipole_sq()).unwrap();
        assert_relative_eq!(a.alpha, b.alpha, max_relative = 1e-15);
    }

    #[test]
    fn slope_inverse() {
        for q in [0.0, 0.1, 1.0, 7.0] {
            let s = omega_s_reduced_slope(q);
            assert_relative_eq!(q_of_slope(s).unwrap(), q, epsilon = 1e-12, max_relative = 1e-10);
        }
        assert!(q_of_slope(1.0).is_none());
    }
}
