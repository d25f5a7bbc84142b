use std::f64::consts::FRAC_1_SQRT_2;

use hydrofriction::dispersion::*;
use hydrofriction::friction2::*;
use hydrofriction::friction4::{delta_omega_g, gamma_g};
use hydrofriction::numerics::{
    integrate_adaptive, integrate_semi_infinite, integrate_sqrt_endpoint_upper, QuadratureSpec,
};
use proptest::prelude::*;

const ALPHA_H: f64 = 6.67e-31;

fn material() -> MaterialParams {
    MaterialParams::new(1e16, 1e6).unwrap()
}

fn log_uniform(lo: f64, hi: f64) -> impl Strategy<Value = f64> {
    (lo.ln()..hi.ln()).prop_map(f64::exp)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn mode_and_penetration_satisfy_the_hydrodynamic_relation(
        omega_p in log_uniform(1e14, 1e17),
        beta in log_uniform(1e4, 1e7),
        q in log_uniform(1e-6, 1e6),
    ) {
        let m = MaterialParams::new(omega_p, beta).unwrap();
        let k = q * m.wavenumber_scale();
        let om = omega_s(k, &m).unwrap();
        let bp = beta * p_s(k, &m).unwrap();
        let lhs = om * om + bp * bp;
        let rhs = omega_p * omega_p + beta * beta * k * k;
        prop_assert!((lhs / rhs - 1.0).abs() <= 1e-12);
        let back = k_of_w(om / omega_p, &m).unwrap();
        prop_assert!((back / k - 1.0).abs() <= 1e-12 || (back - k).abs() <= 1e-12 * m.wavenumber_scale());
    }

    #[test]
    fn supersonic_threshold_sits_above_the_band_bottom(
        u in 1.0001f64..50.0,
        wt in log_uniform(0.05, 50.0),
    ) {
        let t = threshold_w0(u, wt);
        let w0 = t.w0.unwrap();
        prop_assert!(w0 > FRAC_1_SQRT_2);
        let scale = 2.0 * (u - 1.0) * w0 * w0 + 2.0 * w0 / wt + u;
        prop_assert!(h_poly(w0, u, wt).abs() <= 1e-10 * scale);
        prop_assert!(h_poly(w0 * (1.0 + 1e-6), u, wt) < 0.0);
    }

    #[test]
    fn sign_of_h_is_the_sign_of_the_forward_detuning(
        w in 0.7072f64..20.0,
        u in 0.0f64..10.0,
        wt in log_uniform(0.05, 50.0),
    ) {
        let m = material();
        let omega_b = m.omega_p / wt;
        let k = k_of_w(w, &m).unwrap();
        let v = u * m.beta;
        let detuning = omega_b + omega_s(k, &m).unwrap() - k * v;
        let h = h_poly(w, u, wt);
        // skip points within round-off of the sign change
        prop_assume!(detuning.abs() > 1e-9 * (omega_b + k * v));
        prop_assert_eq!(h < 0.0, detuning < 0.0);
    }

    #[test]
    fn subsonic_atom_feels_no_friction_and_does_not_decay(
        u in 0.0f64..=1.0,
        wt in log_uniform(0.5, 10.0),
        zt in log_uniform(1.0, 200.0),
    ) {
        let m = material();
        let u = u.max(1e-6);
        let (a, kin) = DimensionlessPoint::new(u, wt, zt).unwrap().realize(&m, ALPHA_H).unwrap();
        let spec = QuadratureSpec::default();
        prop_assert_eq!(force2_normalized(&m, &a, &kin, &spec).unwrap().normalized_value, 0.0);
        prop_assert_eq!(gamma_g(&m, &a, &kin, &spec).unwrap().value, 0.0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn friction_is_positive_and_falls_with_distance(
        u in 1.05f64..40.0,
        wt in log_uniform(0.5, 10.0),
        zt in log_uniform(10.0, 200.0),
    ) {
        // the normalized force carries z^5 from |F_CP| and need not fall with z;
        // the force itself must
        let m = material();
        let spec = QuadratureSpec::default();
        let raw = |zt: f64| {
            let (a, kin) = DimensionlessPoint::new(u, wt, zt).unwrap().realize(&m, ALPHA_H).unwrap();
            force2_raw(&m, &a, &kin, &spec).unwrap().ln_raw.unwrap()
        };
        let near = raw(zt);
        prop_assert!(near.is_finite());
        prop_assert!(raw(1.1 * zt) < near);
    }

    #[test]
    fn friction_grows_with_speed_near_threshold(
        u in 1.05f64..2.5,
        du in 0.01f64..0.5,
        wt in log_uniform(0.5, 10.0),
        zt in log_uniform(10.0, 200.0),
    ) {
        let spec = QuadratureSpec::default();
        let f = |u: f64| {
            let p = DimensionlessPoint::new(u, wt, zt).unwrap();
            force2_normalized_at(&p, 1e6, &spec).unwrap().ln_normalized
        };
        prop_assert!(f(u + du) > f(u));
    }
}

/// `delta_omega_g = -d^2 (omega_p/beta)^3 int_0^{q*} q^2 M e^{-2 q zt} / sqrt(W^2 - q^2 u^2)`,
/// with `q* = q0` above the sound speed (the principal value vanishes beyond)
/// and `q* = inf` below it.
fn shift_closed_form(m: &MaterialParams, a: &AtomParams, kin: &Kinematics) -> f64 {
    let p = to_dimensionless(m, a, kin).unwrap();
    let wb = 1.0 / p.omega_tilde;
    let spec = QuadratureSpec::default().with_rel_tol(1e-11).with_abs_tol(0.0);
    let radial = |q: f64| q * q * mode_weight_reduced(q) * (-2.0 * q * p.z_tilde).exp();
    let integral = match threshold_q0(p.u, p.omega_tilde) {
        Some(q0) => {
            integrate_sqrt_endpoint_upper(
                |q, _| {
                    // W - q u vanishes linearly at q0; round-off can push it below zero
                    let w = wb + omega_s_reduced(q);
                    let gap = w - q * p.u;
                    if gap <= 0.0 {
                        return 0.0;
                    }
                    radial(q) / (gap * (w + q * p.u)).sqrt()
                },
                0.0,
                q0,
                &spec,
            )
            .value
        }
        None => {
            integrate_semi_infinite(
                |q| {
                    let w = wb + omega_s_reduced(q);
                    radial(q) / (w * w - q * q * p.u * p.u).sqrt()
                },
                0.0,
                1.0 / (2.0 * p.z_tilde),
                &spec,
            )
            .value
        }
    };
    -a.dipole_sq() * m.wavenumber_scale().powi(3) * integral
}

#[test]
fn level_shift_matches_its_closed_angular_form() {
    let m = material();
    let spec = QuadratureSpec::default();
    for (u, wt, zt) in [(0.0f64, 1.0, 10.0), (0.7, 2.0, 30.0), (1.4, 1.0, 10.0), (4.0, 0.5, 20.0), (9.0, 5.0, 60.0)] {
        let (a, kin) = DimensionlessPoint::new(u.max(1e-9), wt, zt).unwrap().realize(&m, ALPHA_H).unwrap();
        let main = delta_omega_g(&m, &a, &kin, &spec).unwrap().value;
        let reference = shift_closed_form(&m, &a, &kin);
        assert!(main < 0.0);
        assert!((main / reference - 1.0).abs() < 1e-6, "u={u}: {main} vs {reference}");
    }
}

#[test]
fn nondispersive_limit_matches_direct_integration() {
    // With beta = 0 every mode sits at omega_p / sqrt(2) with weight
    // omega_p / sqrt(2), and the angular delta function leaves
    // F = hbar d^2 (omega_p / sqrt 2) (2 W / v^2) int_{k0}^inf k^2 e^{-2kz} / sqrt(k^2 - k0^2) dk,
    // W = omega_b + omega_p / sqrt(2), k0 = W / v.
    let m = MaterialParams::new(1e16, 0.0).unwrap();
    let spec = QuadratureSpec::default().with_rel_tol(1e-12).with_abs_tol(0.0);
    for (omega_b, v, z) in [(1e16, 5e6, 1e-8), (3e15, 2e6, 5e-9), (2e16, 1.5e7, 2e-8)] {
        let a = AtomParams::new(omega_b, ALPHA_H).unwrap();
        let kin = Kinematics::new(v, z).unwrap();
        let w = omega_b + m.omega_p * FRAC_1_SQRT_2;
        let k0 = w / v;
        // k = k0 cosh t removes the endpoint singularity
        let x = 2.0 * k0 * z;
        let t_max = ((x + 750.0) / x).acosh();
        let integral = k0 * k0
            * integrate_adaptive(|t: f64| t.cosh().powi(2) * (-x * (t.cosh() - 1.0)).exp(), 0.0, t_max, &spec).value;
        let ln_force = (HBAR * a.dipole_sq() * m.omega_p * FRAC_1_SQRT_2 * 2.0 * w / (v * v)).ln()
            + integral.ln()
            - x;
        let ln_expected = ln_force - casimir_polder(&a, z).abs().ln();
        let f = force2_nondispersive(&m, &a, &kin).unwrap();
        assert!((f.ln() - ln_expected).abs() < 1e-9, "{} vs {}", f.ln(), ln_expected);
        assert!(f > 0.0 && f.is_finite());
    }
}
