use super::quadrature::{integrate_adaptive, QuadratureResult, QuadratureSpec};

/// Ratio between successive excision half-widths.
const EXCISION_RATIO: f64 = 0.25;
/// Largest excision half-width relative to the symmetric window.
const FIRST_EXCISION: f64 = 1e-2;

/// Cauchy principal value of `int_a^b f(x) dx` for a simple pole at `pole`.
///
/// The window `[pole - d, pole + d]` with `d = min(pole - a, b - pole)` is
/// folded onto `t in (0, d]` as `f(pole + t) + f(pole - t)`, where the pole
/// cancels. The folded integral is evaluated with three excisions
/// `eps, eps/4, eps/16` and extrapolated to `eps -> 0`; for a smooth residue the
/// excision error is odd in `eps`, so the first and third orders are removed.
/// A pole outside `(a, b)` falls back to ordinary quadrature.
pub fn principal_value_1d<F: Fn(f64) -> f64>(
    f: F,
    pole: f64,
    a: f64,
    b: f64,
    spec: &QuadratureSpec,
) -> QuadratureResult {
    if !(a < pole && pole < b) {
        return integrate_adaptive(f, a, b, spec);
    }
    let d = (pole - a).min(b - pole);
    let mut outer = QuadratureResult::zero();
    if pole - d > a {
        outer = outer.combine(integrate_adaptive(&f, a, pole - d, spec));
    }
    if pole + d < b {
        outer = outer.combine(integrate_adaptive(&f, pole + d, b, spec));
    }

    let folded = |t: f64| f(pole + t) + f(pole - t);
    let eps: [f64; 3] = [
        FIRST_EXCISION * d,
        FIRST_EXCISION * EXCISION_RATIO * d,
        FIRST_EXCISION * EXCISION_RATIO * EXCISION_RATIO * d,
    ];
    let bulk = integrate_adaptive(folded, eps[0], d, spec);
    let sliver1 = integrate_adaptive(folded, eps[1], eps[0], spec);
    let sliver2 = integrate_adaptive(folded, eps[2], eps[1], spec);
    let partial = [
        bulk.value,
        bulk.value + sliver1.value,
        bulk.value + sliver1.value + sliver2.value,
    ];

    // I(eps) = I0 - c1 eps - c3 eps^3 - ...
    let r = EXCISION_RATIO;
    let first = [
        (partial[1] - r * partial[0]) / (1.0 - r),
        (partial[2] - r * partial[1]) / (1.0 - r),
    ];
    let r3 = r * r * r;
    let extrapolated = (first[1] - r3 * first[0]) / (1.0 - r3);
    let extrapolation_error = (extrapolated - first[1]).abs();

    let inner = bulk.combine(sliver1).combine(sliver2);
    QuadratureResult {
        value: outer.value + extrapolated,
        error_estimate: outer.error_estimate + inner.error_estimate + extrapolation_error,
        evaluations: outer.evaluations + inner.evaluations,
        converged: outer.converged && inner.converged,
    }
}
