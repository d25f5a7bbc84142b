//! Brute-force reference evaluators.
//!
//! Each oracle integrates the unreduced expression over mode wavenumber and
//! angle, with the energy delta function replaced by a smooth kernel of width
//! `lambda` and the limit `lambda -> 0` taken by Richardson extrapolation.
//! Nothing here calls the reductions it is meant to check; only the
//! dispersion relation and the generic quadrature are shared.

use std::f64::consts::PI;
use std::sync::atomic::{AtomicBool, Ordering};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::dispersion::{
    mode_weight_reduced, omega_s_reduced, to_dimensionless, AtomParams, DimensionlessPoint,
    Kinematics, MaterialParams, HBAR,
};
use crate::error::{check_positive, Error, Result};
use crate::numerics::{bisect, integrate_adaptive_panels, QuadratureSpec};

/// Shape of the smoothed delta function.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SmoothingKernel {
    /// `(lambda / pi) / (x^2 + lambda^2)`, the imaginary part of `1/(x - i lambda)`.
    /// Its bias is odd and even in `lambda` and non-local.
    Lorentzian,
    /// `exp(-x^2 / (2 lambda^2)) / (lambda sqrt(2 pi))`. Its bias is even in
    /// `lambda` and local, so exponentially suppressed integrals survive.
    Gaussian,
}

impl SmoothingKernel {
    #[inline]
    fn eval(self, x: f64, lambda: f64) -> f64 {
        match self {
            SmoothingKernel::Lorentzian => lambda / (PI * (x * x + lambda * lambda)),
            SmoothingKernel::Gaussian => {
                let r = x / lambda;
                (-0.5 * r * r).exp() / (lambda * (2.0 * PI).sqrt())
            }
        }
    }

    /// Powers of `lambda` removed by extrapolation, lowest first.
    fn bias_order(self, i: usize) -> i32 {
        match self {
            SmoothingKernel::Lorentzian => i as i32 + 1,
            SmoothingKernel::Gaussian => 2 * (i as i32 + 1),
        }
    }
}

/// Kernel widths [rad/s], strictly decreasing, extrapolated to zero.
#[derive(Debug, Clone, PartialEq)]
pub struct SmoothingSchedule {
    pub lambdas: Vec<f64>,
    pub kernel: SmoothingKernel,
}

impl SmoothingSchedule {
    pub fn new(lambdas: Vec<f64>, kernel: SmoothingKernel) -> Result<Self> {
        if lambdas.is_empty() {
            return Err(Error::InvalidParameter {
                name: "lambdas",
                value: 0.0,
                reason: "at least one smoothing width is required",
            });
        }
        for (i, &l) in lambdas.iter().enumerate() {
            check_positive("lambda", l)?;
            if i > 0 && l >= lambdas[i - 1] {
                return Err(Error::InvalidParameter {
                    name: "lambdas",
                    value: l,
                    reason: "smoothing widths must be strictly decreasing",
                });
            }
        }
        Ok(Self { lambdas, kernel })
    }

    /// Lorentzian widths `{1e-2, 5e-3, 2.5e-3} omega_p`.
    pub fn lorentzian_default(omega_p: f64) -> Self {
        Self {
            lambdas: [1e-2, 5e-3, 2.5e-3].iter().map(|l| l * omega_p).collect(),
            kernel: SmoothingKernel::Lorentzian,
        }
    }

    /// Gaussian widths matched to the point: the resonant integrand varies on
    /// the scale `(u - 1) / (2 z_tilde)` (in units of `omega_p`) through
    /// `e^{-2 k z}`, so the widest kernel is a tenth of that, capped at
    /// `1e-2 omega_p`, followed by two halvings.
    pub fn adapted(m: &MaterialParams, kin: &Kinematics) -> Self {
        let u = kin.v / m.beta;
        let zt = kin.z * m.omega_p / m.beta;
        let widest = if u > 1.0 {
            (0.1 * (u - 1.0) / (2.0 * zt)).min(1e-2)
        } else {
            1e-2
        };
        Self {
            lambdas: [1.0, 0.5, 0.25].iter().map(|f| f * widest * m.omega_p).collect(),
            kernel: SmoothingKernel::Gaussian,
        }
    }

    /// Extrapolates `values[i]` measured at `lambdas[i]` to `lambda = 0`,
    /// removing the leading bias orders of the kernel.
    pub fn extrapolate(&self, values: &[f64]) -> f64 {
        let n = values.len().min(self.lambdas.len());
        if n == 0 {
            return 0.0;
        }
        let scale = self.lambdas[0];
        // rows: [1, l^p1, l^p2, ...] c = value
        let mut rows: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                let l = self.lambdas[i] / scale;
                let mut r = vec![1.0];
                r.extend((0..n - 1).map(|j| l.powi(self.kernel.bias_order(j))));
                r.push(values[i]);
                r
            })
            .collect();
        solve_in_place(&mut rows)[0]
    }
}

/// Gaussian elimination with partial pivoting on an augmented `n x (n+1)` system.
fn solve_in_place(rows: &mut [Vec<f64>]) -> Vec<f64> {
    let n = rows.len();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&a, &b| rows[a][col].abs().total_cmp(&rows[b][col].abs()))
            .unwrap_or(col);
        rows.swap(col, pivot);
        for r in col + 1..n {
            let factor = rows[r][col] / rows[col][col];
            for c in col..=n {
                rows[r][c] -= factor * rows[col][c];
            }
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|c| rows[r][c] * x[c]).sum();
        x[r] = (rows[r][n] - s) / rows[r][r];
    }
    x
}

/// Extrapolated oracle value with the per-width raw values.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult {
    pub value: f64,
    /// `ln|value|` in SI units, finite even where `value` underflows.
    pub ln_abs: f64,
    /// Raw value at each smoothing width, in SI units.
    pub per_lambda: Vec<f64>,
    /// Set when the raw values do not approach the limit monotonically; the
    /// widest-kernel value is then reported instead of the extrapolation.
    pub warning: Option<String>,
    /// All quadratures met their tolerance.
    pub converged: bool,
}

/// Angular range integrated by the smoothed-delta oracles.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AngularDomain {
    /// `[0, pi]`, doubled; the integrands are even in `theta`.
    Half,
    /// `[0, 2 pi]`.
    Full,
}

/// Initial panels per axis of the nested adaptive quadrature. Adaptivity
/// refines from there; the panels only have to be fine enough that no
/// smoothed peak falls between all the nodes of its panel.
pub const DEFAULT_GRID_N: usize = 64;

/// Default width of the Monte Carlo energy delta function, in units of `omega_p`.
pub const DEFAULT_MC_DELTA_WIDTH: f64 = 2.5e-3;

/// Relative tolerance of the outer oracle quadrature; the inner one runs a
/// hundred times tighter so its noise does not stall the outer refinement.
const ORACLE_REL_TOL: f64 = 1e-8;

/// Forward detuning `1/omega_tilde + Omega(q) - q u` below which a Gaussian
/// kernel is treated as supported, in kernel widths (`e^{-50}` at the edge).
const GAUSSIAN_SUPPORT: f64 = 10.0;

/// Where the smoothed integrand lives in `q`: the kernel needs
/// `min_theta D(q, theta) = 1/omega_tilde + Omega(q) - q u` to come within its
/// support. That minimum decreases monotonically for `u > 1`, so the first such
/// `q` is found by bisection. A Lorentzian has no finite support and starts at 0.
fn radial_window(p: &DimensionlessPoint, kernel: SmoothingKernel, lambda: f64) -> (f64, f64) {
    let tail = 40.0 / p.z_tilde;
    let d_min = |q: f64| 1.0 / p.omega_tilde + omega_s_reduced(q) - q * p.u;
    let reach = match kernel {
        SmoothingKernel::Gaussian => GAUSSIAN_SUPPORT * lambda,
        SmoothingKernel::Lorentzian => 0.0,
    };
    let mut hi = 1.0;
    let edge = if p.u > 1.0 {
        while d_min(hi) > reach && hi < 1e12 {
            hi *= 2.0;
        }
        bisect(|q| d_min(q) - reach, 0.0, hi, 1e-15 * hi).unwrap_or(0.0)
    } else {
        0.0
    };
    match kernel {
        SmoothingKernel::Gaussian => (edge, edge + tail),
        SmoothingKernel::Lorentzian => (0.0, edge + tail),
    }
}

/// `int dq q^n e^{-2 q zt} M(q) int dtheta h(theta) delta_lambda(W(q) - q u cos theta)`
/// in reduced units, returned as `(ln_scale, mantissa, converged)` with the
/// integral equal to `mantissa * exp(ln_scale)`.
fn smoothed_mode_integral(
    p: &DimensionlessPoint,
    power: i32,
    with_cos: bool,
    kernel: SmoothingKernel,
    lambda: f64,
    grid_n: usize,
    domain: AngularDomain,
) -> (f64, f64, bool) {
    let spec = QuadratureSpec::default()
        .with_rel_tol(ORACLE_REL_TOL)
        .with_abs_tol(0.0)
        .with_max_subdivisions(20_000);
    let inner_spec = spec.with_rel_tol(1e-2 * ORACLE_REL_TOL);
    let n = grid_n.max(1);
    let (theta_hi, factor) = match domain {
        AngularDomain::Half => (PI, 2.0),
        AngularDomain::Full => (2.0 * PI, 1.0),
    };
    // uniform panels, refined geometrically towards the forward direction
    // where the resonance first appears
    let mut theta_breaks: Vec<f64> = (0..=n).map(|i| theta_hi * i as f64 / n as f64).collect();
    theta_breaks.extend((1..=24).map(|j| theta_hi / n as f64 * 0.5f64.powi(j)));
    if domain == AngularDomain::Full {
        theta_breaks.extend((1..=24).map(|j| theta_hi - theta_hi / n as f64 * 0.5f64.powi(j)));
    }
    theta_breaks.sort_by(f64::total_cmp);
    let (q_lo, q_hi) = radial_window(p, kernel, lambda);
    let q_breaks: Vec<f64> = (0..=n).map(|i| q_lo + (q_hi - q_lo) * i as f64 / n as f64).collect();
    let wb = 1.0 / p.omega_tilde;
    let inner_ok = AtomicBool::new(true);

    let outer = integrate_adaptive_panels(
        |q| {
            let radial =
                q.powi(power) * (-2.0 * (q - q_lo) * p.z_tilde).exp() * mode_weight_reduced(q);
            if radial == 0.0 {
                return 0.0;
            }
            let w_res = wb + omega_s_reduced(q);
            let a = q * p.u;
            let inner = integrate_adaptive_panels(
                |theta: f64| {
                    let c = theta.cos();
                    let k = kernel.eval(w_res - a * c, lambda);
                    if with_cos {
                        c * k
                    } else {
                        k
                    }
                },
                &theta_breaks,
                &inner_spec,
            );
            if !inner.converged {
                inner_ok.store(false, Ordering::Relaxed);
            }
            radial * inner.value
        },
        &q_breaks,
        &spec,
    );
    let ok = outer.converged && inner_ok.load(Ordering::Relaxed);
    (-2.0 * q_lo * p.z_tilde, factor * outer.value, ok)
}

/// Evaluates at every width, checks monotonicity and extrapolates, with all
/// values carried as `mantissa * exp(ln_scale + ln_prefactor)`.
fn extrapolated(
    schedule: &SmoothingSchedule,
    omega_p: f64,
    ln_prefactor: f64,
    eval: impl Fn(f64) -> (f64, f64, bool) + Sync,
) -> OracleResult {
    let raw: Vec<(f64, f64, bool)> = schedule
        .lambdas
        .par_iter()
        .map(|&l| eval(l / omega_p))
        .collect();
    // bring every width to the common scale of the widest kernel
    let ln_ref = raw[0].0;
    let mantissas: Vec<f64> = raw.iter().map(|r| r.1 * (r.0 - ln_ref).exp()).collect();
    let converged = raw.iter().all(|r| r.2);
    let monotone = mantissas.windows(3).all(|w| {
        let (d1, d2) = (w[1] - w[0], w[2] - w[1]);
        let noise = 1e-12 * w.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        d1 * d2 >= 0.0 || d1.abs() <= noise || d2.abs() <= noise
    });
    let (mantissa, warning) = if monotone {
        (schedule.extrapolate(&mantissas), None)
    } else {
        (
            mantissas[0],
            Some("smoothing sequence is not monotone; widest-kernel value reported".to_string()),
        )
    };
    let ln_total = ln_ref + ln_prefactor;
    OracleResult {
        value: mantissa * ln_total.exp(),
        ln_abs: mantissa.abs().ln() + ln_total,
        per_lambda: mantissas.iter().map(|v| v * ln_total.exp()).collect(),
        warning,
        converged,
    }
}

/// Second-order force [N] from the angular delta-function form,
/// `d^2 int dk k^3 e^{-2kz} omega_p^4 / (Omega (omega_p^2 + 2 Omega^2)) int dtheta cos(theta) delta(...)`.
///
/// `grid_n` is the number of initial panels per axis of the nested adaptive
/// quadrature.
pub fn oracle_force2(
    m: &MaterialParams,
    a: &AtomParams,
    kin: &Kinematics,
    schedule: &SmoothingSchedule,
    grid_n: usize,
) -> Result<OracleResult> {
    oracle_force2_on(m, a, kin, schedule, grid_n, AngularDomain::Half)
}

pub fn oracle_force2_on(
    m: &MaterialParams,
    a: &AtomParams,
    kin: &Kinematics,
    schedule: &SmoothingSchedule,
    grid_n: usize,
    domain: AngularDomain,
) -> Result<OracleResult> {
    let p = to_dimensionless(m, a, kin)?;
    // hbar d^2 omega_p^4 / beta^4
    let ln_prefactor = (HBAR * a.dipole_sq()).ln() + 4.0 * m.wavenumber_scale().ln();
    Ok(extrapolated(schedule, m.omega_p, ln_prefactor, |l| {
        smoothed_mode_integral(&p, 3, true, schedule.kernel, l, grid_n, domain)
    }))
}

/// Decay rate [1/s] from the golden rule with the same smoothed delta and
/// the convention `gamma_g = 2 pi sum |V|^2 delta`.
pub fn oracle_gamma_g(
    m: &MaterialParams,
    a: &AtomParams,
    kin: &Kinematics,
    schedule: &SmoothingSchedule,
    grid_n: usize,
) -> Result<OracleResult> {
    let p = to_dimensionless(m, a, kin)?;
    // d^2 omega_p^3 / beta^3
    let ln_prefactor = a.dipole_sq().ln() + 3.0 * m.wavenumber_scale().ln();
    Ok(extrapolated(schedule, m.omega_p, ln_prefactor, |l| {
        smoothed_mode_integral(&p, 2, false, schedule.kernel, l, grid_n, AngularDomain::Half)
    }))
}

/// Monte Carlo estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McResult {
    pub value: f64,
    pub std_error: f64,
    pub samples: u64,
    /// Relative standard error above 20%.
    pub inconclusive: bool,
}

/// Samples per independently seeded stream.
const MC_CHUNK: u64 = 1 << 16;

/// Widest wrapped-Cauchy component; wider ones are indistinguishable from uniform.
const MAX_COMPONENT_WIDTH: f64 = 10.0;

/// Angular proposal: an even mixture of the uniform density on `[-pi, pi)`
/// and wrapped Cauchy components of equal weight. Unbiasedness does not depend
/// on where the components sit, only the variance does.
struct AngleMixture {
    comps: [(f64, f64); 4],
    n: usize,
}

impl AngleMixture {
    /// Components at `theta = +-acos(c)` with Cauchy width `lambda / (q u sin theta)`,
    /// matching a Lorentzian of width `lambda` in `Omega(q) - q u cos theta`.
    fn at_cosines(cosines: &[f64], qu: f64, lambda: f64) -> Self {
        let mut comps = [(0.0, 0.0); 4];
        let mut n = 0;
        for &c in cosines {
            if c.abs() < 1.0 && qu > 0.0 && n + 2 <= comps.len() {
                let mu = c.acos();
                // near theta = 0 the detuning is quadratic in the angle
                let width = (lambda / (qu * mu.sin()))
                    .max((2.0 * lambda / qu).sqrt())
                    .min(MAX_COMPONENT_WIDTH);
                comps[n] = (mu, width);
                comps[n + 1] = (-mu, width);
                n += 2;
            }
        }
        Self { comps, n }
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> f64 {
        let pick: f64 = rng.gen();
        let v: f64 = rng.gen();
        if self.n == 0 || pick < 0.5 {
            return PI * (2.0 * v - 1.0);
        }
        let i = (((pick - 0.5) * 2.0 * self.n as f64) as usize).min(self.n - 1);
        let (mu, width) = self.comps[i];
        wrap(mu + width * (PI * (v - 0.5)).tan())
    }

    fn density(&self, theta: f64) -> f64 {
        let uniform = 1.0 / (2.0 * PI);
        if self.n == 0 {
            return uniform;
        }
        let cauchy: f64 = self.comps[..self.n]
            .iter()
            .map(|&(mu, width)| wrapped_cauchy(theta - mu, width))
            .sum();
        0.5 * uniform + 0.5 * cauchy / self.n as f64
    }
}

/// Radial proposal: an even mixture over the threshold points `s` of
/// `rate e^{-rate (q - s)}` on `q >= s` and, for `s > 0`, a Cauchy density of
/// width `1 / rate` centred on `s` and truncated to `q >= 0`. The exponential
/// components decay like the integrand's `e^{-2 q z_tilde}`, which bounds the
/// weights; the Cauchy components cover the approach to each threshold from
/// below, where the propagators grow.
struct RadialMixture {
    shifts: Vec<f64>,
    rate: f64,
}

impl RadialMixture {
    fn components(&self) -> usize {
        2 * self.shifts.len() - 1
    }

    fn cauchy_mass(&self, s: f64) -> f64 {
        0.5 + (s * self.rate).atan() / PI
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> f64 {
        let n = self.components();
        let pick: f64 = rng.gen();
        let v: f64 = rng.gen();
        let i = ((pick * n as f64) as usize).min(n - 1);
        if i < self.shifts.len() {
            return self.shifts[i] - (1.0 - v).ln() / self.rate;
        }
        let s = self.shifts[i - self.shifts.len() + 1];
        // inverse CDF restricted to q >= 0
        let below = 1.0 - self.cauchy_mass(s);
        let v = below + v * (1.0 - below);
        (s + (PI * (v - 0.5)).tan() / self.rate).max(0.0)
    }

    /// Density divided by `e^{-rate q}`.
    fn scaled_density(&self, q: f64) -> f64 {
        let exponential: f64 = self
            .shifts
            .iter()
            .filter(|&&s| q >= s)
            .map(|&s| self.rate * (self.rate * s).exp())
            .sum();
        let cauchy: f64 = self.shifts[1..]
            .iter()
            .map(|&s| {
                let x = (q - s) * self.rate;
                self.rate / (PI * (1.0 + x * x) * self.cauchy_mass(s)) * (self.rate * q).exp()
            })
            .sum();
        (exponential + cauchy) / self.components() as f64
    }
}

fn wrap(theta: f64) -> f64 {
    let t = (theta + PI).rem_euclid(2.0 * PI) - PI;
    if t.is_finite() {
        t
    } else {
        0.0
    }
}

/// Wrapped Cauchy density `sinh(g) / (2 pi (cosh(g) - cos(x)))`, written without
/// the cancellation at small `g` and `x`.
fn wrapped_cauchy(x: f64, g: f64) -> f64 {
    let (sh, sx) = ((0.5 * g).sinh(), (0.5 * x).sin());
    g.sinh() / (4.0 * PI * (sh * sh + sx * sx))
}

/// Two-photon force [N] by importance-sampled Monte Carlo over
/// `(k1, theta1, k2, theta2)`, with the energy delta function replaced by a
/// Lorentzian of width `lambda_delta` [rad/s] and the same amplitude regulator
/// `regulator` [rad/s] as the main evaluation.
///
/// Wavenumbers are drawn from `e^{-2 k z}`. Each angle is drawn from a mixture
/// of the uniform density and Cauchy components: around the propagator poles
/// `w1 = -+1/omega_tilde` for `theta1`, and around the smoothed energy shell
/// `w2 = -w1` for `theta2`. The uniform half bounds the weights.
///
/// Chunk `i` of [`MC_CHUNK`] samples uses stream `i` of a ChaCha generator
/// seeded with `seed`, and chunk sums are combined in order, so the estimate
/// does not depend on the number of threads.
pub fn oracle_force4_mc(
    m: &MaterialParams,
    a: &AtomParams,
    kin: &Kinematics,
    lambda_delta: f64,
    regulator: f64,
    samples: u64,
    seed: u64,
) -> Result<McResult> {
    check_positive("lambda_delta", lambda_delta)?;
    check_positive("regulator", regulator)?;
    let p = to_dimensionless(m, a, kin)?;
    if p.u <= 1.0 || samples == 0 {
        return Ok(McResult {
            value: 0.0,
            std_error: 0.0,
            samples: 0,
            inconclusive: false,
        });
    }
    let u = p.u;
    let ld = lambda_delta / m.omega_p;
    let lr = regulator / m.omega_p;
    let wb = 1.0 / p.omega_tilde;
    let rate = 2.0 * p.z_tilde;
    // smallest q whose forward Doppler frequency reaches the propagator poles
    // and the negative frequencies the energy shell needs
    let forward = |q: f64| omega_s_reduced(q) - q * u;
    let mut shifts = vec![0.0];
    for level in [wb, 0.0, -wb] {
        let mut hi = 1.0;
        while forward(hi) > level && hi < 1e12 {
            hi *= 2.0;
        }
        if let Some(q) = bisect(|q| forward(q) - level, 0.0, hi, 1e-14 * hi) {
            shifts.push(q);
        }
    }
    let radial = RadialMixture { shifts, rate };

    let sample = |rng: &mut ChaCha8Rng| {
        let q1 = radial.sample(rng);
        let q2 = radial.sample(rng);
        let om1 = omega_s_reduced(q1);
        let om2 = omega_s_reduced(q2);
        let poles = AngleMixture::at_cosines(&[(om1 + wb) / (q1 * u), (om1 - wb) / (q1 * u)], q1 * u, lr);
        let t1 = poles.sample(rng);
        let w1 = om1 - q1 * u * t1.cos();
        let shell = AngleMixture::at_cosines(&[(om2 + w1) / (q2 * u)], q2 * u, ld);
        let t2 = shell.sample(rng);
        let w2 = om2 - q2 * u * t2.cos();

        let delta = ld / (PI * ((w1 + w2) * (w1 + w2) + ld * ld));
        // |1/(wb + w1 - i l) + 1/(wb + w2 - i l)|^2
        let (re1, re2) = (wb + w1, wb + w2);
        let d1 = re1 * re1 + lr * lr;
        let d2 = re2 * re2 + lr * lr;
        let re = re1 / d1 + re2 / d2;
        let im = lr / d1 + lr / d2;
        let propagator = re * re + im * im;
        let x = 1.0 - (t1 - t2).cos();
        let momentum = q1 * t1.cos() + q2 * t2.cos();
        // the e^{-2 (q1 + q2) zt} of the integrand is divided out of the q density
        let inv_density = 1.0
            / (radial.scaled_density(q1)
                * radial.scaled_density(q2)
                * poles.density(t1)
                * shell.density(t2));
        inv_density
            * q1
            * q1
            * q2
            * q2
            * x
            * x
            * mode_weight_reduced(q1)
            * mode_weight_reduced(q2)
            * momentum
            * delta
            * propagator
    };

    let chunks = samples.div_ceil(MC_CHUNK);
    let sums: Vec<(f64, f64, u64)> = (0..chunks)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i);
            let n = MC_CHUNK.min(samples - i * MC_CHUNK);
            let (mut s, mut s2) = (0.0, 0.0);
            for _ in 0..n {
                let f = sample(&mut rng);
                s += f;
                s2 += f * f;
            }
            (s, s2, n)
        })
        .collect();
    let (s, s2, n) = sums
        .iter()
        .fold((0.0, 0.0, 0u64), |(a, b, c), &(x, y, k)| (a + x, b + y, c + k));
    let nf = n as f64;
    let mean = s / nf;
    let var = ((s2 / nf - mean * mean) * nf / (nf - 1.0).max(1.0)).max(0.0);
    let err = (var / nf).sqrt();

    let d2 = a.dipole_sq();
    let prefactor = -HBAR * d2 * d2 * m.omega_p.powi(6) / (16.0 * PI * m.beta.powi(7));
    let value = prefactor * mean;
    let std_error = prefactor.abs() * err;
    Ok(McResult {
        value,
        std_error,
        samples: n,
        inconclusive: !(std_error <= 0.2 * value.abs()),
    })
}

/// Trapezoid step for the Bessel integral; the error falls like `e^{-pi^2 / h}`.
const BESSEL_STEP: f64 = 1.0 / 32.0;

/// `K_n(x)` from `int_0^inf e^{-x cosh t} cosh(n t) dt` by the trapezoid rule,
/// which converges geometrically for this analytic, doubly exponentially
/// decaying integrand. Independent of [`crate::numerics::bessel_k`].
pub fn oracle_bessel_k(n: u32, x: f64) -> Result<f64> {
    check_positive("x", x)?;
    if x > 700.0 {
        return Err(Error::BesselRange {
            order: n,
            x,
            hint: "K_n underflows above x = 700",
        });
    }
    let nf = n as f64;
    // e^{-x (cosh t - 1) + n t} < 1e-300 relative beyond t_max
    let mut t_max: f64 = 1.0;
    while x * (t_max.cosh() - 1.0) - nf * t_max < 700.0 {
        t_max += 1.0;
    }
    let steps = (t_max / BESSEL_STEP).ceil() as usize;
    let term = |t: f64| (-x * (t.cosh() - 1.0)).exp() * (nf * t).cosh();
    let mut sum = 0.5 * term(0.0);
    for i in 1..=steps {
        sum += term(i as f64 * BESSEL_STEP);
    }
    Ok(sum * BESSEL_STEP * (-x).exp())
}
