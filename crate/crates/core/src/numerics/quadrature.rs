//! Globally adaptive Gauss-Kronrod (7/15) quadrature plus the two change-of-variable
//! wrappers the force integrals need: an inverse-square-root endpoint and a
//! semi-infinite exponentially decaying tail.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

/// Kronrod abscissae on [-1, 1]; the odd-indexed ones are the Gauss nodes.
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_225,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];

const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureSpec {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_subdivisions: usize,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self {
            rel_tol: 1e-8,
            abs_tol: 1e-14,
            max_subdivisions: 2000,
        }
    }
}

impl QuadratureSpec {
    pub fn with_rel_tol(mut self, rel_tol: f64) -> Self {
        self.rel_tol = rel_tol;
        self
    }

    pub fn with_abs_tol(mut self, abs_tol: f64) -> Self {
        self.abs_tol = abs_tol;
        self
    }

    pub fn with_max_subdivisions(mut self, n: usize) -> Self {
        self.max_subdivisions = n.max(1);
        self
    }

    /// Error allowed for an integral of magnitude `value`.
    pub fn tolerance(&self, value: f64) -> f64 {
        (self.rel_tol * value.abs()).max(self.abs_tol)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureResult {
    pub value: f64,
    pub error_estimate: f64,
    pub evaluations: usize,
    pub converged: bool,
}

impl QuadratureResult {
    pub fn zero() -> Self {
        Self {
            value: 0.0,
            error_estimate: 0.0,
            evaluations: 0,
            converged: true,
        }
    }

    /// Sum of two independent pieces of one integral.
    pub fn combine(self, other: Self) -> Self {
        Self {
            value: self.value + other.value,
            error_estimate: self.error_estimate + other.error_estimate,
            evaluations: self.evaluations + other.evaluations,
            converged: self.converged && other.converged,
        }
    }

    /// Multiplies value and error by a constant prefactor.
    pub fn scaled(self, factor: f64) -> Self {
        Self {
            value: self.value * factor,
            error_estimate: self.error_estimate * factor.abs(),
            ..self
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Panel {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.error.total_cmp(&other.error) == Ordering::Equal
    }
}

impl Eq for Panel {}

impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn gauss_kronrod<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Panel {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for (j, (&x, &wk)) in XGK.iter().zip(WGK.iter()).take(7).enumerate() {
        let dx = half * x;
        let pair = f(center - dx) + f(center + dx);
        kronrod += wk * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    let value = kronrod * half;
    let error = ((kronrod - gauss) * half).abs();
    Panel {
        a,
        b,
        value,
        error: if error.is_nan() { f64::INFINITY } else { error },
    }
}

const EVALS_PER_PANEL: usize = 15;

/// Adaptive quadrature of `f` over `[a, b]`.
///
/// Non-convergence within `max_subdivisions` panels is reported through
/// `converged = false` together with the best available value.
pub fn integrate_adaptive<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    spec: &QuadratureSpec,
) -> QuadratureResult {
    integrate_adaptive_panels(f, &[a, b], spec)
}

/// Adaptive quadrature seeded with the panels delimited by `breaks`
/// (sorted ascending). Seeding guards against narrow features that a single
/// initial panel could step over.
pub fn integrate_adaptive_panels<F: Fn(f64) -> f64>(
    f: F,
    breaks: &[f64],
    spec: &QuadratureSpec,
) -> QuadratureResult {
    if breaks.len() < 2 {
        return QuadratureResult::zero();
    }
    let (lo, hi) = (breaks[0], breaks[breaks.len() - 1]);
    if lo == hi {
        return QuadratureResult::zero();
    }
    if lo > hi {
        let reversed: Vec<f64> = breaks.iter().rev().copied().collect();
        let r = integrate_adaptive_panels(f, &reversed, spec);
        return r.scaled(-1.0);
    }

    let mut heap = BinaryHeap::with_capacity(spec.max_subdivisions + breaks.len());
    let mut value = 0.0;
    let mut error = 0.0;
    let mut evaluations = 0;
    for w in breaks.windows(2) {
        if w[1] > w[0] {
            let p = gauss_kronrod(&f, w[0], w[1]);
            value += p.value;
            error += p.error;
            evaluations += EVALS_PER_PANEL;
            heap.push(p);
        }
    }

    let mut converged = error <= spec.tolerance(value);
    while !converged && heap.len() < spec.max_subdivisions.max(breaks.len()) {
        let Some(worst) = heap.pop() else { break };
        let mid = 0.5 * (worst.a + worst.b);
        if !(mid > worst.a && mid < worst.b) {
            // panel exhausted at floating resolution
            heap.push(worst);
            break;
        }
        let left = gauss_kronrod(&f, worst.a, mid);
        let right = gauss_kronrod(&f, mid, worst.b);
        evaluations += 2 * EVALS_PER_PANEL;
        value += left.value + right.value - worst.value;
        error += left.error + right.error - worst.error;
        heap.push(left);
        heap.push(right);
        converged = error <= spec.tolerance(value);
        if converged {
            // the running error can cancel to nothing when a dominant panel
            // is replaced; confirm against a fresh sum before stopping
            (value, error) = heap
                .iter()
                .fold((0.0, 0.0), |(v, e), p| (v + p.value, e + p.error));
            converged = error <= spec.tolerance(value);
        }
    }

    // re-sum to shed accumulated round-off from the running totals
    let (value, error) = heap
        .iter()
        .fold((0.0, 0.0), |(v, e), p| (v + p.value, e + p.error));
    QuadratureResult {
        value,
        error_estimate: error,
        evaluations,
        converged: error <= spec.tolerance(value) && value.is_finite(),
    }
}

/// Panels `0, s_max/2^7, ..., s_max/2, s_max`: integrands that decay fast away
/// from the singular endpoint keep their mass in the first few.
fn geometric_breaks(s_max: f64) -> Vec<f64> {
    let mut breaks: Vec<f64> = (0..8).rev().map(|k| s_max / f64::powi(2.0, k)).collect();
    breaks.insert(0, 0.0);
    breaks
}

/// Integrates `f` over `[w0, b]` where `f(w) ~ g(w) / sqrt(w - w0)` near `w0`.
///
/// Uses `w = w0 + s^2`, so the transformed integrand `2 s f(w0 + s^2)` is bounded.
pub fn integrate_sqrt_endpoint<F: Fn(f64) -> f64>(
    f: F,
    w0: f64,
    b: f64,
    spec: &QuadratureSpec,
) -> QuadratureResult {
    integrate_sqrt_endpoint_offset(|w, _| f(w), w0, b, spec)
}

/// As [`integrate_sqrt_endpoint`], but the integrand also receives the exact
/// offset `t = w - w0 = s^2`, so it can form `sqrt(t)` without cancellation.
pub fn integrate_sqrt_endpoint_offset<F: Fn(f64, f64) -> f64>(
    f: F,
    w0: f64,
    b: f64,
    spec: &QuadratureSpec,
) -> QuadratureResult {
    if b <= w0 {
        return QuadratureResult::zero();
    }
    let s_max = (b - w0).sqrt();
    integrate_adaptive_panels(
        |s| {
            if s == 0.0 {
                return 0.0;
            }
            let t = s * s;
            2.0 * s * f(w0 + t, t)
        },
        &geometric_breaks(s_max),
        spec,
    )
}

/// Mirror image of [`integrate_sqrt_endpoint_offset`]: the inverse-square-root
/// singularity sits at the upper limit `w1`, and the integrand receives
/// `t = w1 - w`.
pub fn integrate_sqrt_endpoint_upper<F: Fn(f64, f64) -> f64>(
    f: F,
    a: f64,
    w1: f64,
    spec: &QuadratureSpec,
) -> QuadratureResult {
    if w1 <= a {
        return QuadratureResult::zero();
    }
    let s_max = (w1 - a).sqrt();
    integrate_adaptive_panels(
        |s| {
            if s == 0.0 {
                return 0.0;
            }
            let t = s * s;
            2.0 * s * f(w1 - t, t)
        },
        &geometric_breaks(s_max),
        spec,
    )
}

const MAX_TAIL_DOUBLINGS: usize = 48;

/// Integrates `f` over `[a, inf)` for `|f(w)| <= C exp(-w / decay_scale)`.
///
/// The range is truncated at `a + decay_scale (ln(1/abs_tol) + 8)` and extended
/// by doubling until the estimated tail drops below tolerance. A tail that stops
/// shrinking is reported as non-convergence.
pub fn integrate_semi_infinite<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    decay_scale: f64,
    spec: &QuadratureSpec,
) -> QuadratureResult {
    let logs = (1.0 / spec.abs_tol.max(f64::MIN_POSITIVE)).ln().max(1.0);
    let mut b = a + decay_scale * (logs + 8.0);
    let mut result = integrate_adaptive(&f, a, b, spec);
    let tail_at = |b: f64| {
        (0..4)
            .map(|j| f(b + 0.5 * decay_scale * j as f64).abs())
            .fold(0.0, f64::max)
            * decay_scale
    };

    let mut tail = tail_at(b);
    result.evaluations += 4;
    let mut stalls = 0;
    for _ in 0..MAX_TAIL_DOUBLINGS {
        let target = spec.abs_tol.max(0.1 * spec.rel_tol * result.value.abs());
        if tail <= target || tail == 0.0 {
            return result;
        }
        let next_b = a + 2.0 * (b - a);
        let piece = integrate_adaptive(&f, b, next_b, spec);
        result = result.combine(piece);
        b = next_b;
        let next_tail = tail_at(b);
        result.evaluations += 4;
        if next_tail >= tail {
            stalls += 1;
            if stalls >= 3 {
                break;
            }
        } else {
            stalls = 0;
        }
        tail = next_tail;
    }
    result.converged = false;
    result.error_estimate += tail;
    result
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    #[test]
    fn polynomial_and_trig() {
        let s = QuadratureSpec::default();
        let r = integrate_adaptive(|x| x * x, 0.0, 1.0, &s);
        assert!(r.converged);
        assert_relative_eq!(r.value, 1.0 / 3.0, max_relative = 1e-14);
        let r = integrate_adaptive(f64::sin, 0.0, PI, &s);
        assert_relative_eq!(r.value, 2.0, max_relative = 1e-13);
        let r = integrate_adaptive(f64::exp, 0.0, 1.0, &s);
        assert_relative_eq!(r.value, std::f64::consts::E - 1.0, max_relative = 1e-10);
    }

    #[test]
    fn reversed_limits_flip_sign() {
        let s = QuadratureSpec::default();
        let r = integrate_adaptive(|x| x, 1.0, 0.0, &s);
        assert_relative_eq!(r.value, -0.5, max_relative = 1e-14);
    }

    #[test]
    fn declared_tolerance_holds() {
        let s = QuadratureSpec::default();
        let f = |x: f64| 1.0 / (1e-4 + (x - 0.3).powi(2));
        let r = integrate_adaptive(f, 0.0, 1.0, &s);
        let exact = (0.7 / 1e-2f64).atan() / 1e-2 + (0.3 / 1e-2f64).atan() / 1e-2;
        assert!(r.converged);
        assert!((r.value - exact).abs() <= 10.0 * s.tolerance(exact), "{} vs {exact}", r.value);
    }

    #[test]
    fn converged_result_meets_its_tolerance() {
        let s = QuadratureSpec::default().with_rel_tol(1e-10).with_abs_tol(0.0);
        let peaks: [(f64, f64, f64); 4] = [(1e12, 1e-7, 0.1), (1.0, 1e-4, 0.37), (1e-30, 3e-3, 2.0), (1e6, 1e-9, 3.0)];
        for &(height, width, center) in &peaks {
            let f = |x: f64| {
                let r = (x - center) / width;
                height * (-0.5 * r * r).exp() + 1e-3 * (-(x - center).abs()).exp()
            };
            let r = integrate_adaptive_panels(f, &[0.0, 1.0, 2.0, PI], &s);
            if r.converged {
                assert!(r.error_estimate <= s.tolerance(r.value), "{r:?}");
            }
        }
    }

    #[test]
    fn budget_exhaustion_is_reported() {
        let s = QuadratureSpec::default().with_max_subdivisions(3);
        let r = integrate_adaptive(|x: f64| x.abs().sqrt().recip(), -1.0, 1.0, &s);
        assert!(!r.converged);
    }

    #[test]
    fn sqrt_endpoint_cases() {
        let s = QuadratureSpec::default();
        let r = integrate_sqrt_endpoint(|w| 1.0 / w.sqrt(), 0.0, 1.0, &s);
        assert_relative_eq!(r.value, 2.0, max_relative = 1e-12);
        let w0 = 1.618;
        let r = integrate_sqrt_endpoint_offset(|_, t| 1.0 / t.sqrt(), w0, w0 + 1.0, &s);
        assert_relative_eq!(r.value, 2.0, max_relative = 1e-12);
        let r = integrate_sqrt_endpoint(|w| w.ln() / w.sqrt(), 0.0, 1.0, &s);
        assert_relative_eq!(r.value, -4.0, max_relative = s.rel_tol);
        let r = integrate_sqrt_endpoint_upper(|_, t| 1.0 / t.sqrt(), 0.0, 3.0, &s);
        assert_relative_eq!(r.value, 2.0 * 3f64.sqrt(), max_relative = 1e-12);
    }

    #[test]
    fn sqrt_endpoint_agrees_on_bounded_integrand() {
        let s = QuadratureSpec::default();
        let f = |w: f64| (3.0 * w).cos() + w * w;
        let a = integrate_adaptive(f, 0.5, 2.0, &s);
        let b = integrate_sqrt_endpoint(f, 0.5, 2.0, &s);
        assert!((a.value - b.value).abs() <= 2.0 * s.tolerance(a.value));
    }

    #[test]
    fn semi_infinite_cases() {
        let s = QuadratureSpec::default();
        let r = integrate_semi_infinite(|w: f64| (-w).exp(), 0.0, 1.0, &s);
        assert!(r.converged);
        assert_relative_eq!(r.value, 1.0, max_relative = 1e-12);
        let r = integrate_semi_infinite(|w: f64| w * (-2.0 * w).exp(), 0.0, 0.5, &s);
        assert_relative_eq!(r.value, 0.25, max_relative = 1e-12);
    }

    #[test]
    fn semi_infinite_against_reference() {
        // E_2(1)/e-type integral: int_1^inf e^{-w}/w^2 dw; reference from a
        // fixed 20000-panel Simpson rule on a substituted finite range.
        let s = QuadratureSpec::default();
        let r = integrate_semi_infinite(|w: f64| (-w).exp() / (w * w), 1.0, 1.0, &s);
        // w = 1/x, dw = -dx/x^2: int_0^1 e^{-1/x} dx
        let n = 20000;
        let h = 1.0 / n as f64;
        let g = |x: f64| if x == 0.0 { 0.0 } else { (-1.0 / x).exp() };
        let mut simpson = g(0.0) + g(1.0);
        for i in 1..n {
            simpson += g(i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        simpson *= h / 3.0;
        assert_relative_eq!(r.value, simpson, max_relative = 1e-8);
    }

    #[test]
    fn semi_infinite_flags_non_decaying_tail() {
        let s = QuadratureSpec::default();
        let r = integrate_semi_infinite(|_| 1.0, 0.0, 1.0, &s);
        assert!(!r.converged);
    }
}
