//! Fourth-order observables: ground-state decay rate and level shift, the
//! two-photon resonance test, and the assembled fourth-order force
//!
//! ```text
//! F4 = -gamma_g t F2 - (d gamma_g / d v) delta_omega_g + F4_two_photon
//! ```
//!
//! All forces use the orientation of the second-order result: a positive
//! value points along the second-order friction.
//!
//! The two-photon term is not finite as the amplitude regulator goes to zero
//! once `u > 1`: on the two-photon energy shell the intermediate one-photon
//! state can be real, and the squared propagator grows like `1 / lambda`. It
//! is therefore evaluated at a finite regulator, reported alongside the value.

use std::f64::consts::PI;
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};

use rayon::prelude::*;

use crate::dispersion::{
    mode_weight_reduced, omega_s_reduced, to_dimensionless,
    AtomParams, DimensionlessPoint, Kinematics, MaterialParams, BAND_BOTTOM_W, HBAR,
};
use crate::error::{check_non_negative, Error, Result};
use crate::friction2::{force2_raw, threshold_integral, threshold_q0, threshold_w0};
use crate::numerics::{
    bisect, central_diff, integrate_adaptive, integrate_adaptive_panels, integrate_semi_infinite,
    integrate_sqrt_endpoint_offset, integrate_sqrt_endpoint_upper, principal_value_1d, QuadratureResult,
    QuadratureSpec,
};

/// `e^{-2 q z_tilde}` is below this beyond the wavenumber cutoff used by the
/// resonance scan and the two-photon quadrature.
const CUTOFF_WEIGHT: f64 = 1e-14;
/// Default two-photon amplitude regulator, in units of `omega_p`.
pub const DEFAULT_REGULATOR: f64 = 1e-2;
/// Shell points whose Jacobian `q2 u |sin theta2|` falls below this times
/// `z_tilde` are counted as near-stationary in the diagnostics.
const STATIONARY_JACOBIAN: f64 = 1e-10;

/// A rate or frequency together with its quadrature diagnostics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observable {
    pub value: f64,
    /// `ln|value|` in SI units, finite even where `value` underflows
    /// (`-inf` when it vanishes).
    pub ln_abs: f64,
    pub quadrature: QuadratureResult,
}

impl Observable {
    fn zero() -> Self {
        Self {
            value: 0.0,
            ln_abs: f64::NEG_INFINITY,
            quadrature: QuadratureResult::zero(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayShiftResult {
    /// Decay rate [1/s].
    pub gamma_g: Observable,
    /// Level shift [rad/s].
    pub delta_omega_g: Observable,
}

fn require_converged(q: &QuadratureResult) -> Result<()> {
    if q.converged {
        Ok(())
    } else {
        Err(Error::NotConverged {
            value: q.value,
            error_estimate: q.error_estimate,
        })
    }
}

/// Ground-state decay rate `gamma_g` [1/s] from the golden rule, reduced to a
/// one-dimensional integral in `w` with the same threshold as the
/// second-order force. Exactly zero for `u <= 1`.
pub fn gamma_g(
    m: &MaterialParams,
    a: &AtomParams,
    kin: &Kinematics,
    spec: &QuadratureSpec,
) -> Result<Observable> {
    let p = to_dimensionless(m, a, kin)?;
    let threshold = threshold_w0(p.u, p.omega_tilde);
    if !threshold.supersonic {
        return Ok(Observable::zero());
    }
    let (ln_scale, integral) = threshold_integral(&p, &threshold, |_| 1.0, spec)?;
    // d^2 omega_p^4 / (2 beta^3 omega_b)
    let ln_prefactor = a.dipole_sq().ln() + 4.0 * m.omega_p.ln()
        - 2f64.ln()
        - 3.0 * m.beta.ln()
        - a.omega_b.ln()
        + ln_scale;
    let quadrature = integral.scaled(ln_prefactor.exp());
    require_converged(&quadrature)?;
    let ln_abs = if integral.value > 0.0 {
        integral.value.ln() + ln_prefactor
    } else {
        f64::NEG_INFINITY
    };
    Ok(Observable {
        value: quadrature.value.max(0.0),
        ln_abs,
        quadrature,
    })
}

/// `int_0^{2 pi} dtheta / (W - q u cos theta)` in the principal-value sense.
fn shift_angular(q: f64, p: &DimensionlessPoint, spec: &QuadratureSpec) -> QuadratureResult {
    let w_res = 1.0 / p.omega_tilde + omega_s_reduced(q);
    let a = q * p.u;
    let f = |theta: f64| 1.0 / (w_res - a * theta.cos());
    let half = if a > w_res {
        principal_value_1d(f, (w_res / a).acos(), 0.0, PI, spec)
    } else {
        integrate_adaptive_panels(f, &[0.0, PI / 8.0, PI / 4.0, PI / 2.0, PI], spec)
    };
    half.scaled(2.0)
}

/// Ground-state level shift `delta_omega_g` [rad/s]: minus the principal value
/// of the second-order self-energy. Finite and negative for a static atom.
///
/// Above threshold the angular integral crosses a pole for `q > q0` and is
/// taken as a principal value; below `q0` it carries an inverse square root
/// at `q0`.
pub fn delta_omega_g(
    m: &MaterialParams,
    a: &AtomParams,
    kin: &Kinematics,
    spec: &QuadratureSpec,
) -> Result<Observable> {
    let p = to_dimensionless(m, a, kin)?;
    let zt = p.z_tilde;
    let radial = |q: f64| q * q * mode_weight_reduced(q) * (-2.0 * q * zt).exp();
    // skips the angular integral, which may be infinite at q0, where the weight underflows
    let integrand = |q: f64, s: &QuadratureSpec| {
        let r = radial(q);
        if r == 0.0 {
            0.0
        } else {
            r * shift_angular(q, &p, s).value
        }
    };
    let decay = 1.0 / (2.0 * zt);

    let integral = match threshold_q0(p.u, p.omega_tilde) {
        None => integrate_semi_infinite(
            |q| integrand(q, spec),
            0.0,
            decay,
            spec,
        ),
        Some(q0) => {
            // far below q0 the inverse square root is harmless; keep the
            // substitution to the last decay lengths so it cannot step over
            // the mass at small q
            let split = (q0 - 4.0 * decay).max(0.0);
            let mut breaks = vec![0.0];
            let mut edge = decay;
            while edge < split {
                breaks.push(edge);
                edge *= 2.0;
            }
            breaks.push(split);
            let body = integrate_adaptive_panels(
                |q| integrand(q, spec),
                &breaks,
                spec,
            );
            let below = body.combine(integrate_sqrt_endpoint_upper(
                |q, _| integrand(q, spec),
                split,
                q0,
                spec,
            ));
            // the principal value vanishes identically above q0; only noise of
            // the size of the inner tolerance is expected there
            let above_spec = spec.with_abs_tol(spec.rel_tol * below.value.abs());
            let above = integrate_semi_infinite(
                |q| integrand(q, &above_spec),
                q0,
                decay,
                &above_spec,
            );
            below.combine(above)
        }
    };
    // -(d^2 / 2 pi) (omega_p / beta)^3
    let prefactor = -a.dipole_sq() / (2.0 * PI) * m.wavenumber_scale().powi(3);
    let quadrature = integral.scaled(prefactor);
    require_converged(&quadrature)?;
    Ok(Observable {
        value: quadrature.value,
        ln_abs: quadrature.value.abs().ln(),
        quadrature,
    })
}

pub fn decay_and_shift(
    m: &MaterialParams,
    a: &AtomParams,
    kin: &Kinematics,
    spec: &QuadratureSpec,
) -> Result<DecayShiftResult> {
    Ok(DecayShiftResult {
        gamma_g: gamma_g(m, a, kin, spec)?,
        delta_omega_g: delta_omega_g(m, a, kin, spec)?,
    })
}

/// Result of minimizing `omega'_1 + omega'_2` over two surface modes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResonanceReport {
    /// `grid_min <= 0`: the two-photon energy shell is reachable.
    pub feasible: bool,
    /// Minimum of `omega'_1 + omega'_2` [rad/s].
    pub grid_min: f64,
    /// `(k1, theta1, k2, theta2)` at the minimum.
    pub argmin: (f64, f64, f64, f64),
    /// `sqrt(2) omega_p (1 - u)` for `u < 1`, a strict lower bound on `grid_min`.
    pub lower_bound: Option<f64>,
}

/// Largest reduced wavenumber with `e^{-2 q z_tilde}` above [`CUTOFF_WEIGHT`].
fn q_cutoff(z_tilde: f64) -> f64 {
    (1.0 / CUTOFF_WEIGHT).ln() / (2.0 * z_tilde)
}

/// Forward Doppler-shifted frequency `Omega_s - q u` at `theta = 0`, in units
/// of `omega_p`, as a function of the reduced mode frequency `w`.
fn forward_doppler(w: f64, u: f64) -> f64 {
    let q = ((w - BAND_BOTTOM_W) * (w + BAND_BOTTOM_W) / w).max(0.0);
    w - q * u
}

fn golden_section_min<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64) -> f64 {
    let ratio = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = hi - ratio * (hi - lo);
    let mut x2 = lo + ratio * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..200 {
        if hi - lo <= 1e-15 * hi.abs().max(1.0) {
            break;
        }
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - ratio * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + ratio * (hi - lo);
            f2 = f(x2);
        }
    }
    if f1 <= f2 {
        x1
    } else {
        x2
    }
}

/// Scans `omega'_1 + omega'_2` over a `grid_n x grid_n` grid of mode
/// frequencies `w_i in [1/sqrt(2), w_max]` with both modes co-moving
/// (`theta_i = 0`, where the Doppler shift is largest), then refines the best
/// cell by golden-section search. `w_max` is set by `e^{-2 k z} = 1e-14`.
pub fn resonance_min(m: &MaterialParams, kin: &Kinematics, grid_n: usize) -> Result<ResonanceReport> {
    m.require_dispersive()?;
    check_non_negative("v", kin.v)?;
    let u = kin.v / m.beta;
    let zt = kin.z * m.omega_p / m.beta;
    let n = grid_n.max(2);
    let w_max = omega_s_reduced(q_cutoff(zt));
    let step = (w_max - BAND_BOTTOM_W) / (n - 1) as f64;
    let ws: Vec<f64> = (0..n)
        .map(|i| if i == n - 1 { w_max } else { BAND_BOTTOM_W + step * i as f64 })
        .collect();
    let g: Vec<f64> = ws.iter().map(|&w| forward_doppler(w, u)).collect();

    let mut best = (f64::INFINITY, 0, 0);
    for (i, gi) in g.iter().enumerate() {
        for (j, gj) in g.iter().enumerate() {
            let s = gi + gj;
            if s < best.0 {
                best = (s, i, j);
            }
        }
    }

    let refine = |i: usize| {
        let lo = ws[i.saturating_sub(1)];
        let hi = ws[(i + 1).min(n - 1)];
        let w = golden_section_min(|w| forward_doppler(w, u), lo, hi);
        if forward_doppler(w, u) < g[i] {
            w
        } else {
            ws[i]
        }
    };
    let (w1, w2) = (refine(best.1), refine(best.2));
    let grid_min = (forward_doppler(w1, u) + forward_doppler(w2, u)) * m.omega_p;
    let k = |w: f64| ((w - BAND_BOTTOM_W) * (w + BAND_BOTTOM_W) / w).max(0.0) * m.wavenumber_scale();
    Ok(ResonanceReport {
        feasible: grid_min <= 0.0,
        grid_min,
        argmin: (k(w1), 0.0, k(w2), 0.0),
        lower_bound: (u < 1.0).then_some(std::f64::consts::SQRT_2 * m.omega_p * (1.0 - u)),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Force4Options {
    /// Relative tolerance of each level of the nested quadrature.
    pub rel_tol: f64,
    /// Two-photon amplitude regulator [rad/s]; `None` selects
    /// `DEFAULT_REGULATOR * omega_p`.
    pub regulator: Option<f64>,
    /// Independent outer panels, evaluated in parallel.
    pub panels: usize,
    /// Grid size of the resonance feasibility scan.
    pub resonance_grid: usize,
    pub shift_derivative: ShiftDerivative,
    /// Skip the two-photon term in [`force4_assemble`].
    pub include_two_photon: bool,
}

impl Default for Force4Options {
    fn default() -> Self {
        Self {
            rel_tol: 1e-6,
            regulator: None,
            panels: 32,
            resonance_grid: 400,
            shift_derivative: ShiftDerivative::RateOnly,
            include_two_photon: true,
        }
    }
}

/// Which product the velocity derivative of the shift term acts on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ShiftDerivative {
    /// `-(d gamma_g / d v) delta_omega_g`.
    #[default]
    RateOnly,
    /// `-d(gamma_g delta_omega_g) / d v`.
    Product,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoPhotonResult {
    /// Force [N].
    pub value: f64,
    /// Diagnostics of the reduced four-dimensional integral.
    pub quadrature: QuadratureResult,
    /// Regulator used [rad/s].
    pub regulator: f64,
    pub feasible: bool,
    /// Shell points where the delta-function Jacobian nearly vanished.
    pub near_stationary_roots: usize,
}

/// Two-photon integrand in reduced units, without the energy delta function:
///
/// ```text
/// q1^2 q2^2 (1 - cos(theta1 - theta2))^2 M(q1) M(q2) e^{-2 (q1 + q2) z_tilde}
///   (q1 cos theta1 + q2 cos theta2) |B|^2
/// ```
///
/// with `M(q) = 1 / (Omega (1 + 2 Omega^2))` and
/// `B = 1/(1/omega_tilde + w1 - i lambda) + 1/(1/omega_tilde + w2 - i lambda)`, where
/// `w_i` are the reduced Doppler-shifted frequencies.
pub fn two_photon_integrand(
    q1: f64,
    theta1: f64,
    q2: f64,
    theta2: f64,
    p: &DimensionlessPoint,
    lambda: f64,
) -> f64 {
    let (c1, c2) = (theta1.cos(), theta2.cos());
    let w1 = omega_s_reduced(q1) - q1 * p.u * c1;
    let w2 = omega_s_reduced(q2) - q2 * p.u * c2;
    let x = 1.0 - (theta1 - theta2).cos();
    let wb = 1.0 / p.omega_tilde;
    let (a, b) = (wb + w1, wb + w2);
    let l2 = lambda * lambda;
    let b_sq = ((a + b) * (a + b) + 4.0 * l2) / ((a * a + l2) * (b * b + l2));
    q1 * q1 * q2 * q2 * x * x
        * mode_weight_reduced(q1)
        * mode_weight_reduced(q2)
        * (-2.0 * (q1 + q2) * p.z_tilde).exp()
        * (q1 * c1 + q2 * c2)
        * b_sq
}

/// Smallest `q2` on the shell `Omega(q2) - q2 u cos(theta2) = target` for
/// `u > 1`. A solution exists exactly where
/// `Omega(q) - q u <= target <= Omega(q) + q u`; the lower edge decreases and
/// the upper edge increases in `q`, so the shell is the half-line above the
/// returned edge.
fn shell_edge(target: f64, u: f64, q_max: f64) -> Option<f64> {
    let tol = 1e-15 * q_max.max(1.0);
    if target >= BAND_BOTTOM_W {
        bisect(|q| omega_s_reduced(q) + q * u - target, 0.0, q_max, tol)
    } else {
        bisect(|q| omega_s_reduced(q) - q * u - target, 0.0, q_max, tol)
    }
}

/// `int dtheta2 int dq2 G delta(Omega(q2) - q2 u cos theta2 - target)` with
/// the delta function resolved in `theta2`: the two shell angles
/// `+-acos((Omega(q2) - target) / (q2 u))` each contribute
/// `G / (q2 u |sin theta2|)`. The Jacobian vanishes like a square root at the
/// shell edge and nowhere else.
fn shell_integral(
    q1: f64,
    theta1: f64,
    target: f64,
    p: &DimensionlessPoint,
    lambda: f64,
    q_max: f64,
    spec: &QuadratureSpec,
    near_stationary: &AtomicUsize,
) -> QuadratureResult {
    let u = p.u;
    let Some(edge) = shell_edge(target, u, q_max) else {
        return QuadratureResult::zero();
    };
    integrate_sqrt_endpoint_offset(
        |q2, _| {
            let qu = q2 * u;
            let d = omega_s_reduced(q2) - target;
            // 1 - |cos theta2| without cancellation against 1
            let gap = (qu - d.abs()) / qu;
            if !(gap > 0.0) {
                return 0.0;
            }
            let sin = (gap * (2.0 - gap)).sqrt();
            let jacobian = qu * sin;
            if jacobian < STATIONARY_JACOBIAN * p.z_tilde {
                near_stationary.fetch_add(1, Ordering::Relaxed);
            }
            let theta2 = (d / qu).clamp(-1.0, 1.0).acos();
            (two_photon_integrand(q1, theta1, q2, theta2, p, lambda)
                + two_photon_integrand(q1, theta1, q2, -theta2, p, lambda))
                / jacobian
        },
        edge,
        q_max,
        spec,
    )
}

/// Breaks in `theta1` on `[0, pi]`: uniform panels plus the two propagator
/// poles `w1 = -1/omega_tilde` and `w1 = 1/omega_tilde` (where the on-shell
/// `w2 = -w1` hits the other pole), each flanked at a few Lorentzian widths.
fn theta1_breaks(q1: f64, p: &DimensionlessPoint, lambda: f64) -> Vec<f64> {
    let mut breaks: Vec<f64> = (0..=16).map(|i| PI * i as f64 / 16.0).collect();
    let qu = q1 * p.u;
    if qu > 0.0 {
        let wb = 1.0 / p.omega_tilde;
        for pole in [-wb, wb] {
            let c = (omega_s_reduced(q1) - pole) / qu;
            if c.abs() < 1.0 {
                let theta = c.acos();
                let width = lambda / (qu * theta.sin());
                for k in [-4.0, -1.0, 0.0, 1.0, 4.0] {
                    let t = theta + k * width;
                    if t > 0.0 && t < PI {
                        breaks.push(t);
                    }
                }
            }
        }
    }
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();
    breaks
}

/// The reduced two-photon integral, with the energy delta function resolved on
/// the `(q2, theta2)` shell and nested adaptive quadrature over
/// `(q1, theta1, q2)`.
///
/// A coarse pilot pass fixes the overall magnitude, from which each level gets
/// an absolute tolerance; otherwise inner integrals that contribute nothing
/// would still be refined to full relative accuracy.
fn two_photon_reduced(p: &DimensionlessPoint, lambda: f64, opts: &Force4Options) -> (QuadratureResult, usize) {
    let pilot_tol = PILOT_REL_TOL.max(opts.rel_tol);
    let (pilot, near) = two_photon_pass(p, lambda, pilot_tol, opts.panels, None);
    if pilot_tol <= opts.rel_tol || pilot.value == 0.0 {
        return (pilot, near);
    }
    two_photon_pass(p, lambda, opts.rel_tol, opts.panels, Some(pilot.value.abs()))
}

/// Relative tolerance of the pilot pass.
const PILOT_REL_TOL: f64 = 1e-2;

fn two_photon_pass(
    p: &DimensionlessPoint,
    lambda: f64,
    rel_tol: f64,
    panels: usize,
    scale: Option<f64>,
) -> (QuadratureResult, usize) {
    let q_max = q_cutoff(p.z_tilde);
    let u = p.u;
    let panels = panels.max(1);
    let near_stationary = AtomicUsize::new(0);
    let inner_ok = AtomicBool::new(true);
    // the reduced integral is 2 int_0^q_max dq1 int_0^pi dtheta1 int dq2; split
    // a tenth of the error budget over each level's measure
    let budget = scale.map_or(0.0, |s| 0.1 * rel_tol * s);
    let level = |abs: f64| QuadratureSpec::default().with_rel_tol(rel_tol).with_abs_tol(abs);
    let spec_shell = level(budget / (2.0 * PI * q_max));
    let spec_theta1 = level(budget / (2.0 * q_max));
    let spec_q1 = level(budget / (2.0 * panels as f64));

    let over_theta1 = |q1: f64| {
        let r = integrate_adaptive_panels(
            |theta1: f64| {
                let target = -(omega_s_reduced(q1) - q1 * u * theta1.cos());
                let r = shell_integral(q1, theta1, target, p, lambda, q_max, &spec_shell, &near_stationary);
                if !r.converged {
                    inner_ok.store(false, Ordering::Relaxed);
                }
                r.value
            },
            &theta1_breaks(q1, p, lambda),
            &spec_theta1,
        );
        if !r.converged {
            inner_ok.store(false, Ordering::Relaxed);
        }
        r.value
    };

    let parts: Vec<QuadratureResult> = (0..panels)
        .into_par_iter()
        .map(|i| {
            let lo = q_max * i as f64 / panels as f64;
            let hi = q_max * (i + 1) as f64 / panels as f64;
            integrate_adaptive(over_theta1, lo, hi, &spec_q1)
        })
        .collect();
    let mut total = parts
        .into_iter()
        .fold(QuadratureResult::zero(), QuadratureResult::combine);
    // theta1 in [0, pi] covers half of the symmetric domain
    total = total.scaled(2.0);
    total.converged &= inner_ok.load(Ordering::Relaxed);
    (total, near_stationary.load(Ordering::Relaxed))
}

/// Two-photon contribution to the fourth-order force [N] at the regulator in
/// `opts`. Returns zero without integrating when no pair of modes can satisfy
/// `omega'_1 + omega'_2 = 0`.
pub fn force4_two_photon(
    m: &MaterialParams,
    a: &AtomParams,
    kin: &Kinematics,
    opts: &Force4Options,
) -> Result<TwoPhotonResult> {
    let p = to_dimensionless(m, a, kin)?;
    let regulator = opts.regulator.unwrap_or(DEFAULT_REGULATOR * m.omega_p);
    crate::error::check_positive("regulator", regulator)?;
    let gate = if p.u <= 1.0 {
        None
    } else {
        Some(resonance_min(m, kin, opts.resonance_grid)?)
    };
    if !gate.is_some_and(|g| g.feasible) {
        return Ok(TwoPhotonResult {
            value: 0.0,
            quadrature: QuadratureResult::zero(),
            regulator,
            feasible: false,
            near_stationary_roots: 0,
        });
    }
    let (reduced, near_stationary_roots) = two_photon_reduced(&p, regulator / m.omega_p, opts);
    // -d^4 omega_p^6 / (16 pi beta^7), times hbar for newtons
    let d2 = a.dipole_sq();
    let prefactor =
        -HBAR * d2 * d2 * m.omega_p.powi(6) / (16.0 * PI * m.beta.powi(7));
    let quadrature = reduced.scaled(prefactor);
    require_converged(&quadrature)?;
    Ok(TwoPhotonResult {
        value: quadrature.value,
        quadrature,
        regulator,
        feasible: true,
        near_stationary_roots,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Force4Result {
    pub gamma_g: f64,
    pub delta_omega_g: f64,
    /// `d gamma_g / d v` [1/m].
    pub dgamma_dv: f64,
    /// Second-order force [N].
    pub force2: f64,
    /// Coefficient of `t` in the secular term, `-gamma_g F2` [N/s].
    pub secular_rate: f64,
    /// Shift term [N].
    pub shift_term: f64,
    /// Two-photon term [N]; `None` when it was not requested.
    pub two_photon: Option<TwoPhotonResult>,
    /// Time [s] at which the secular term is evaluated.
    pub t: f64,
}

impl Force4Result {
    /// The secular term at `t`; grows without bound and is meaningful only
    /// while `gamma_g t << 1`.
    pub fn secular_term(&self) -> f64 {
        self.secular_rate * self.t
    }

    pub fn two_photon_term(&self) -> f64 {
        self.two_photon.map_or(0.0, |r| r.value)
    }

    pub fn total(&self) -> f64 {
        self.secular_term() + self.shift_term + self.two_photon_term()
    }
}

/// Assembles the fourth-order force at time `t`. Requires `gamma_g t < 1`.
pub fn force4_assemble(
    m: &MaterialParams,
    a: &AtomParams,
    kin: &Kinematics,
    t: f64,
    opts: &Force4Options,
) -> Result<Force4Result> {
    check_non_negative("t", t)?;
    let spec = QuadratureSpec::default();
    let f2 = force2_raw(m, a, kin, &spec)?.raw_value.unwrap_or(0.0);
    let gamma = gamma_g(m, a, kin, &spec)?.value;
    if gamma * t >= 1.0 {
        return Err(Error::SecularBreakdown(gamma * t));
    }
    let shift = delta_omega_g(m, a, kin, &spec)?.value;

    let u = kin.v / m.beta;
    let dgamma_dv = if u > 1.0 {
        // stay on the supersonic side and well above quadrature noise
        let h = (1e-3 * kin.v).min(0.5 * (kin.v - m.beta));
        let tight = QuadratureSpec::default().with_rel_tol(1e-12).with_abs_tol(0.0);
        let at = |v: f64| {
            Kinematics::new(v, kin.z)
                .and_then(|k| gamma_g(m, a, &k, &tight))
                .map_or(f64::NAN, |r| r.value)
        };
        let d = central_diff(at, kin.v, Some(h));
        if !d.is_finite() {
            return Err(Error::NotConverged {
                value: d,
                error_estimate: f64::INFINITY,
            });
        }
        d
    } else {
        0.0
    };
    let shift_term = match opts.shift_derivative {
        ShiftDerivative::RateOnly => -HBAR * dgamma_dv * shift,
        ShiftDerivative::Product => {
            if u > 1.0 {
                let h = (1e-3 * kin.v).min(0.5 * (kin.v - m.beta));
                let at = |v: f64| {
                    Kinematics::new(v, kin.z)
                        .and_then(|k| delta_omega_g(m, a, &k, &spec))
                        .map_or(f64::NAN, |r| r.value)
                };
                let dshift_dv = central_diff(at, kin.v, Some(h));
                -HBAR * (dgamma_dv * shift + gamma * dshift_dv)
            } else {
                0.0
            }
        }
    };
    let two_photon = if opts.include_two_photon {
        Some(force4_two_photon(m, a, kin, opts)?)
    } else {
        None
    };
    Ok(Force4Result {
        gamma_g: gamma,
        delta_omega_g: shift,
        dgamma_dv,
        force2: f2,
        secular_rate: -gamma * f2,
        shift_term,
        two_photon,
        t,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn setup(v: f64, z: f64) -> (MaterialParams, AtomParams, Kinematics) {
        (
            MaterialParams::new(1e16, 1e6).unwrap(),
            AtomParams::new(1e16, 1e-30).unwrap(),
            Kinematics::new(v, z).unwrap(),
        )
    }

    #[test]
    fn subsonic_decay_is_exactly_zero() {
        let (m, a, kin) = setup(0.9e6, 1e-9);
        let g = gamma_g(&m, &a, &kin, &QuadratureSpec::default()).unwrap();
        assert_eq!(g.value, 0.0);
        assert_eq!(g.quadrature.evaluations, 0);
    }

    #[test]
    fn decay_is_linear_in_polarizability() {
        let (m, a, kin) = setup(5e6, 1e-9);
        let b = AtomParams::new(a.omega_b, 2.0 * a.alpha).unwrap();
        let s = QuadratureSpec::default();
        let g1 = gamma_g(&m, &a, &kin, &s).unwrap().value;
        let g2 = gamma_g(&m, &b, &kin, &s).unwrap().value;
        assert!(g1 > 0.0);
        assert_relative_eq!(g2 / g1, 2.0, max_relative = 1e-12);
    }

    #[test]
    fn decay_matches_kspace_form() {
        // gamma = 2 d^2 (omega_p/beta)^3 int_{q0} q^2 M e^{-2 q zt} / sqrt(q^2 u^2 - W^2)
        let (m, a, kin) = setup(4e6, 2e-9);
        let s = QuadratureSpec::default();
        let g = gamma_g(&m, &a, &kin, &s).unwrap().value;
        let p = to_dimensionless(&m, &a, &kin).unwrap();
        let q0 = threshold_q0(p.u, p.omega_tilde).unwrap();
        let f = |q: f64| {
            let w = 1.0 / p.omega_tilde + omega_s_reduced(q);
            q * q * mode_weight_reduced(q) * (-2.0 * p.z_tilde * q).exp()
                / ((q * p.u - w) * (q * p.u + w)).sqrt()
        };
        let near = crate::numerics::integrate_sqrt_endpoint(f, q0, q0 + 0.5, &s);
        let far = integrate_semi_infinite(f, q0 + 0.5, 0.5 / p.z_tilde, &s);
        let expected = 2.0 * a.dipole_sq() * m.wavenumber_scale().powi(3) * (near.value + far.value);
        assert_relative_eq!(g, expected, max_relative = 1e-6);
    }

    #[test]
    fn angular_shift_integral_matches_closed_form() {
        // int_0^{2pi} dtheta/(W - a cos theta) = 2 pi / sqrt(W^2 - a^2) for a < W, 0 above
        let p = DimensionlessPoint::new(3.0, 1.0, 10.0).unwrap();
        let s = QuadratureSpec::default();
        for q in [0.05, 0.3, 0.5] {
            let w = 1.0 + omega_s_reduced(q);
            let a = q * p.u;
            let got = shift_angular(q, &p, &s).value;
            if a < w {
                assert_relative_eq!(got, 2.0 * PI / (w * w - a * a).sqrt(), max_relative = 1e-8);
            } else {
                assert!(got.abs() < 1e-6, "q = {q}: {got}");
            }
        }
    }

    #[test]
    fn static_shift_is_negative_and_decays_with_distance() {
        let s = QuadratureSpec::default();
        let (m, a, near) = setup(0.0, 1e-9);
        let far = Kinematics::new(0.0, 2e-9).unwrap();
        let d1 = delta_omega_g(&m, &a, &near, &s).unwrap().value;
        let d2 = delta_omega_g(&m, &a, &far, &s).unwrap().value;
        assert!(d1 < 0.0 && d2 < 0.0);
        assert!(d2.abs() < d1.abs());
    }

    #[test]
    fn shift_is_continuous_across_sound_speed() {
        let s = QuadratureSpec::default();
        let (m, a, below) = setup(0.9999e6, 1e-9);
        let above = Kinematics::new(1.0001e6, 1e-9).unwrap();
        let d1 = delta_omega_g(&m, &a, &below, &s).unwrap().value;
        let d2 = delta_omega_g(&m, &a, &above, &s).unwrap().value;
        assert_relative_eq!(d1, d2, max_relative = 1e-3);
    }

    #[test]
    fn resonance_bound_and_feasibility() {
        let m = MaterialParams::new(1e16, 1e6).unwrap();
        for u in [0.5, 0.9, 0.99] {
            let r = resonance_min(&m, &Kinematics::new(u * 1e6, 1e-9).unwrap(), 200).unwrap();
            assert!(!r.feasible);
            assert!(r.grid_min >= r.lower_bound.unwrap());
        }
        let r = resonance_min(&m, &Kinematics::new(0.0, 1e-9).unwrap(), 200).unwrap();
        assert_relative_eq!(r.grid_min, std::f64::consts::SQRT_2 * 1e16, max_relative = 1e-12);
        let r = resonance_min(&m, &Kinematics::new(3e6, 1e-9).unwrap(), 200).unwrap();
        assert!(r.feasible && r.grid_min < 0.0);
    }

    #[test]
    fn two_photon_integrand_exchange_symmetry() {
        let p = DimensionlessPoint::new(3.0, 1.3, 10.0).unwrap();
        for (q1, t1, q2, t2) in [(0.1, 0.3, 0.4, -1.2), (0.7, 2.9, 0.05, 0.1), (0.3, -0.4, 0.3, 0.4)] {
            let a = two_photon_integrand(q1, t1, q2, t2, &p, 0.01);
            let b = two_photon_integrand(q2, t2, q1, t1, &p, 0.01);
            assert_relative_eq!(a, b, max_relative = 1e-14);
        }
    }

    #[test]
    fn shell_edge_bounds_the_shell() {
        for (target, u) in [(0.8, 1.5), (0.3, 3.0), (-0.5, 2.0), (2.0, 1.2)] {
            let q = shell_edge(target, u, 50.0).unwrap();
            let d = omega_s_reduced(q) - target;
            assert!((d.abs() - q * u).abs() < 1e-12, "{target} {u}");
            // just above the edge an angle exists, just below none does
            let above = q + 1e-6;
            assert!((omega_s_reduced(above) - target).abs() <= above * u);
            if q > 1e-6 {
                let below = q - 1e-6;
                assert!((omega_s_reduced(below) - target).abs() > below * u);
            }
        }
        assert!(shell_edge(1e3, 1.5, 5.0).is_none());
    }

    #[test]
    fn subsonic_fourth_order_vanishes() {
        let (m, a, kin) = setup(0.95e6, 1e-9);
        let r = force4_assemble(&m, &a, &kin, 1e-12, &Force4Options::default()).unwrap();
        assert_eq!(r.gamma_g, 0.0);
        assert_eq!(r.secular_term(), 0.0);
        assert_eq!(r.shift_term, 0.0);
        assert_eq!(r.two_photon_term(), 0.0);
        assert!(r.delta_omega_g < 0.0);
    }

    #[test]
    fn secular_term_is_linear_in_time() {
        let (m, a, kin) = setup(5e6, 1e-9);
        let opts = Force4Options {
            include_two_photon: false,
            ..Default::default()
        };
        let r0 = force4_assemble(&m, &a, &kin, 0.0, &opts).unwrap();
        assert_eq!(r0.secular_term(), 0.0);
        let t = 0.1 / r0.gamma_g;
        let r1 = force4_assemble(&m, &a, &kin, t, &opts).unwrap();
        assert_relative_eq!(r1.secular_term(), r0.secular_rate * t, max_relative = 1e-14);
        assert_eq!(r1.shift_term, r0.shift_term);
        let err = force4_assemble(&m, &a, &kin, 2.0 / r0.gamma_g, &opts);
        assert!(matches!(err, Err(Error::SecularBreakdown(_))));
    }
}
