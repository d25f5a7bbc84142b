use hydrofriction::dispersion::{DimensionlessPoint, MaterialParams};
use hydrofriction::friction2::force2_raw;
use hydrofriction::friction4::gamma_g;
use hydrofriction::numerics::{bessel_k, QuadratureSpec};
use hydrofriction::oracle::*;

const ALPHA_H: f64 = 6.67e-31;

fn material() -> MaterialParams {
    MaterialParams::new(1e16, 1e6).unwrap()
}

#[test]
fn subsonic_smoothed_force_vanishes_against_supersonic() {
    let m = material();
    let at = |u: f64| {
        let (a, kin) = DimensionlessPoint::new(u, 1.0, 10.0).unwrap().realize(&m, ALPHA_H).unwrap();
        let s = SmoothingSchedule::adapted(&m, &kin);
        oracle_force2(&m, &a, &kin, &s, DEFAULT_GRID_N).unwrap().value
    };
    let slow = at(0.9);
    let fast = at(5.0);
    assert!(fast > 0.0);
    assert!(slow.abs() < 1e-6 * fast, "{slow} vs {fast}");
}

#[test]
fn smoothed_force_and_rate_match_reductions() {
    let m = material();
    let (a, kin) = DimensionlessPoint::new(5.0, 1.0, 10.0).unwrap().realize(&m, ALPHA_H).unwrap();
    let s = SmoothingSchedule::adapted(&m, &kin);
    let spec = QuadratureSpec::default();
    let f = oracle_force2(&m, &a, &kin, &s, DEFAULT_GRID_N).unwrap();
    let g = oracle_gamma_g(&m, &a, &kin, &s, DEFAULT_GRID_N).unwrap();
    assert!(f.converged && g.converged && f.warning.is_none());
    let f_main = force2_raw(&m, &a, &kin, &spec).unwrap().raw_value.unwrap();
    let g_main = gamma_g(&m, &a, &kin, &spec).unwrap().value;
    assert!((f.value / f_main - 1.0).abs() < 1e-3);
    assert!((g.value / g_main - 1.0).abs() < 1e-3);
}

#[test]
fn suppressed_tuple_compares_in_log_space() {
    // the force underflows in SI units, the logarithms do not
    let m = material();
    let (a, kin) = DimensionlessPoint::new(1.5, 0.5, 200.0).unwrap().realize(&m, ALPHA_H).unwrap();
    let s = SmoothingSchedule::adapted(&m, &kin);
    let f = oracle_force2(&m, &a, &kin, &s, DEFAULT_GRID_N).unwrap();
    let main = force2_raw(&m, &a, &kin, &QuadratureSpec::default()).unwrap();
    assert!(f.ln_abs.is_finite());
    assert!((f.ln_abs - main.ln_raw.unwrap()).abs() < 1e-3);
}

#[test]
fn half_and_full_angular_domains_agree() {
    let m = material();
    let (a, kin) = DimensionlessPoint::new(3.0, 2.0, 20.0).unwrap().realize(&m, ALPHA_H).unwrap();
    let s = SmoothingSchedule::adapted(&m, &kin);
    let half = oracle_force2_on(&m, &a, &kin, &s, DEFAULT_GRID_N, AngularDomain::Half).unwrap();
    let full = oracle_force2_on(&m, &a, &kin, &s, DEFAULT_GRID_N, AngularDomain::Full).unwrap();
    assert!((half.value / full.value - 1.0).abs() < 1e-7);
}

#[test]
fn lorentzian_schedule_converges_on_unsuppressed_tuple() {
    let m = material();
    let (a, kin) = DimensionlessPoint::new(20.0, 1.0, 10.0).unwrap().realize(&m, ALPHA_H).unwrap();
    let s = SmoothingSchedule::lorentzian_default(m.omega_p);
    let g = oracle_gamma_g(&m, &a, &kin, &s, DEFAULT_GRID_N).unwrap();
    let main = gamma_g(&m, &a, &kin, &QuadratureSpec::default()).unwrap().value;
    // the Lorentzian tails leave an O(lambda^3) remainder after extrapolation
    assert!((g.value / main - 1.0).abs() < 2e-2, "{}", g.value / main);
}

#[test]
fn mc_error_shrinks_like_inverse_root_of_samples() {
    let m = material();
    let (a, kin) = DimensionlessPoint::new(3.0, 1.0, 10.0).unwrap().realize(&m, ALPHA_H).unwrap();
    let run = |n| {
        oracle_force4_mc(&m, &a, &kin, DEFAULT_MC_DELTA_WIDTH * m.omega_p, 1e-2 * m.omega_p, n, 11).unwrap()
    };
    let small = run(1 << 20);
    let large = run(1 << 22);
    let ratio = small.std_error / large.std_error;
    // four times the samples halves the error, up to sampling noise in the error itself
    assert!((1.4..2.9).contains(&ratio), "{ratio}");
    assert!(large.value < 0.0);
}

#[test]
fn bessel_paths_agree() {
    for i in 0..50 {
        let x = 0.1 * 500f64.powf(i as f64 / 49.0);
        for n in 0..=2 {
            let main = bessel_k(n, x).unwrap();
            let reference = oracle_bessel_k(n, x).unwrap();
            assert!((main / reference - 1.0).abs() < 1e-10, "K_{n}({x})");
        }
    }
}
