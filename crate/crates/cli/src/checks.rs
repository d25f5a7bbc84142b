//! The acceptance criteria as runnable checks. `validate` runs the oracle
//! comparisons and the cheap invariants; the acceptance test target runs
//! all eleven.

use std::f64::consts::{FRAC_1_SQRT_2, SQRT_2};
use std::path::Path;
use std::time::{Duration, Instant};

use hydrofriction::dispersion::*;
use hydrofriction::friction2::{force2_normalized, force2_nondispersive, force2_raw, h_poly, threshold_w0};
use hydrofriction::friction4::{force4_two_photon, gamma_g, resonance_min, Force4Options, DEFAULT_REGULATOR};
use hydrofriction::numerics::{bessel_k, bisect, principal_value_1d, QuadratureSpec};
use hydrofriction::oracle::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::commands::{cmd_fig2, fig2_file_name, FIG2_OMEGA_TILDE, FIG2_Z_TILDE};
use crate::config::{RunConfig, DEFAULT_ALPHA};
use crate::error::{CliError, Result};
use crate::sweep::cmd_sweep;

#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub id: u8,
    pub title: &'static str,
    pub passed: bool,
    pub detail: String,
    pub elapsed: Duration,
    pub budget: Duration,
}

impl CheckOutcome {
    pub fn line(&self) -> String {
        format!(
            "{} [{:>2}] {}: {} ({:.2} s of {} s)",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.title,
            self.detail,
            self.elapsed.as_secs_f64(),
            self.budget.as_secs()
        )
    }
}

/// Times `body`, which reports `(passed, detail)`; exceeding the budget fails
/// the check, and so does an error.
fn timed(id: u8, title: &'static str, budget_s: u64, body: impl FnOnce() -> Result<(bool, String)>) -> CheckOutcome {
    let start = Instant::now();
    let (mut passed, mut detail) = match body() {
        Ok(r) => r,
        Err(e) => (false, format!("error: {e}")),
    };
    let elapsed = start.elapsed();
    let budget = Duration::from_secs(budget_s);
    if elapsed > budget {
        passed = false;
        detail.push_str("; over the runtime budget");
    }
    CheckOutcome {
        id,
        title,
        passed,
        detail,
        elapsed,
        budget,
    }
}

fn material() -> MaterialParams {
    MaterialParams::new(1e16, 1e6).expect("valid material")
}

fn log_uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    rng.gen_range(lo.ln()..hi.ln()).exp()
}

/// Random supersonic tuples over the modelled ranges.
fn supersonic_tuples(seed: u64, n: usize) -> Vec<DimensionlessPoint> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let u = rng.gen_range(1.5..20.0);
            let wt = log_uniform(&mut rng, 0.5, 10.0);
            let zt = log_uniform(&mut rng, 10.0, 200.0);
            DimensionlessPoint::new(u, wt, zt).expect("valid point")
        })
        .collect()
}

/// Relative difference of two positive numbers given by their logarithms.
fn rel_from_ln(a: f64, b: f64) -> f64 {
    ((a - b).exp() - 1.0).abs()
}

/// Criterion 1: below the sound speed the second-order force and decay rate are exactly zero.
pub fn threshold_theorem(seed: u64) -> CheckOutcome {
    timed(1, "threshold theorem", 1, || {
        let m = material();
        let spec = QuadratureSpec::default();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut bad = Vec::new();
        for i in 0..100 {
            // (0, 1], with the end point itself included once
            let u = if i == 0 { 1.0 } else { 1.0 - rng.gen::<f64>() };
            let wt = log_uniform(&mut rng, 0.5, 10.0);
            let zt = log_uniform(&mut rng, 10.0, 1000.0);
            let (a, kin) = DimensionlessPoint::new(u, wt, zt)?.realize(&m, DEFAULT_ALPHA)?;
            let f = force2_normalized(&m, &a, &kin, &spec)?.normalized_value;
            let g = gamma_g(&m, &a, &kin, &spec)?.value;
            if f != 0.0 || g != 0.0 {
                bad.push(format!("u={u} f={f:e} gamma={g:e}"));
            }
        }
        Ok((bad.is_empty(), format!("100 tuples, {} nonzero {:?}", bad.len(), bad)))
    })
}

/// Criterion 2: dispersion identity and frequency/wavenumber round trip.
pub fn dispersion_identities(seed: u64) -> CheckOutcome {
    timed(2, "dispersion identities", 1, || {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (mut worst_id, mut worst_rt) = (0.0f64, 0.0f64);
        for _ in 0..10_000 {
            let omega_p = log_uniform(&mut rng, 1e14, 1e17);
            let beta = log_uniform(&mut rng, 1e4, 1e7);
            let m = MaterialParams::new(omega_p, beta)?;
            let k = log_uniform(&mut rng, 1e-6, 1e6) * m.wavenumber_scale();
            let om = omega_s(k, &m)?;
            let bp = beta * p_s(k, &m)?;
            let lhs = om * om + bp * bp;
            let rhs = omega_p * omega_p + beta * beta * k * k;
            worst_id = worst_id.max((lhs / rhs - 1.0).abs());
            // omega_s after k_of_w; the other order is ill-conditioned at the band bottom
            let w = om / omega_p;
            let back = omega_s(k_of_w(w, &m)?, &m)? / omega_p;
            worst_rt = worst_rt.max((back / w - 1.0).abs());
        }
        Ok((
            worst_id <= 1e-12 && worst_rt <= 1e-12,
            format!("10^4 points, identity {worst_id:.1e}, round trip {worst_rt:.1e} (limit 1e-12)"),
        ))
    })
}

/// Detuning `omega_b + Omega_s(k(w)) - k(w) v` of the forward mode, from the
/// dispersion relation alone.
fn forward_detuning(w: f64, u: f64, wt: f64, m: &MaterialParams) -> f64 {
    let k = k_of_w(w, m).expect("w above the band bottom");
    m.omega_p / wt + omega_s(k, m).expect("k >= 0") - k * u * m.beta
}

/// Criterion 3: the boundary polynomial's sign and threshold agree with the primitive
/// resonance condition.
pub fn threshold_consistency(seed: u64) -> CheckOutcome {
    timed(3, "threshold consistency", 5, || {
        let m = material();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (mut sign_bad, mut skipped) = (0, 0);
        for _ in 0..10_000 {
            let w = rng.gen_range(FRAC_1_SQRT_2..20.0);
            let u = rng.gen_range(0.0..10.0);
            let wt = log_uniform(&mut rng, 0.05, 50.0);
            let d = forward_detuning(w, u, wt, &m);
            let scale = m.omega_p * (1.0 / wt + w + u * w);
            if d.abs() <= 1e-9 * scale {
                skipped += 1;
                continue;
            }
            if (h_poly(w, u, wt) < 0.0) != (d < 0.0) {
                sign_bad += 1;
            }
        }
        let (mut worst_w0, mut below) = (0.0f64, 0);
        for _ in 0..10_000 {
            let u = rng.gen_range(1.0001..20.0);
            let wt = log_uniform(&mut rng, 0.05, 50.0);
            let w0 = threshold_w0(u, wt).w0.expect("supersonic");
            if w0 <= FRAC_1_SQRT_2 {
                below += 1;
            }
            let mut hi = 1.0;
            while forward_detuning(hi, u, wt, &m) > 0.0 {
                hi *= 2.0;
            }
            let root = bisect(|w| forward_detuning(w, u, wt, &m), FRAC_1_SQRT_2, hi, 1e-15)
                .expect("bracketed sign change");
            worst_w0 = worst_w0.max((w0 / root - 1.0).abs());
        }
        Ok((
            sign_bad == 0 && worst_w0 <= 1e-8 && below == 0,
            format!(
                "sign mismatches {sign_bad}/10^4 ({skipped} within round-off skipped), \
                 w0 vs sign change {worst_w0:.1e} (limit 1e-8), w0 <= 1/sqrt2: {below}"
            ),
        ))
    })
}

/// `ln F` [N] of the main second-order path; injectable for mutation tests.
pub type Force2Ln = dyn Fn(&MaterialParams, &AtomParams, &Kinematics) -> Result<f64> + Sync;

pub fn force2_main_ln(m: &MaterialParams, a: &AtomParams, kin: &Kinematics) -> Result<f64> {
    let r = force2_raw(m, a, kin, &QuadratureSpec::default())?;
    Ok(r.ln_raw.unwrap_or(f64::NEG_INFINITY))
}

/// Criterion 4: the reduced second-order force against the smoothed-delta oracle, on
/// `n` random tuples. The comparison is made on logarithms, since deeply
/// suppressed forces underflow in newtons.
pub fn force2_oracle(seed: u64, n: usize, main: &Force2Ln) -> CheckOutcome {
    timed(4, "second-order oracle equivalence", 300, || {
        let m = material();
        let mut worst = (0.0f64, None);
        let mut failures = Vec::new();
        for p in supersonic_tuples(seed, n) {
            let (a, kin) = p.realize(&m, DEFAULT_ALPHA)?;
            let o = oracle_force2(&m, &a, &kin, &SmoothingSchedule::adapted(&m, &kin), DEFAULT_GRID_N)?;
            let rel = rel_from_ln(main(&m, &a, &kin)?, o.ln_abs);
            if rel > worst.0 || rel.is_nan() {
                worst = (rel, Some(p));
            }
            if rel.is_nan() || rel > 1e-3 || !o.converged {
                failures.push(format!("(u={:.3}, wt={:.3}, zt={:.1}) rel {rel:.1e}", p.u, p.omega_tilde, p.z_tilde));
            }
        }
        let at = worst
            .1
            .map(|p| format!(" at (u={:.3}, wt={:.3}, zt={:.1})", p.u, p.omega_tilde, p.z_tilde))
            .unwrap_or_default();
        Ok((
            failures.is_empty(),
            format!("{n} tuples, worst rel {:.1e}{at} (limit 1e-3); failing {failures:?}", worst.0),
        ))
    })
}

/// Criterion 5: as the sound speed goes to zero the force approaches the
/// non-dispersive closed form.
pub fn nondispersive_convergence() -> CheckOutcome {
    timed(5, "non-dispersive convergence", 60, || {
        let a = AtomParams::new(1e16, DEFAULT_ALPHA)?;
        let kin = Kinematics::new(5e6, 10e-9)?;
        let reference = force2_nondispersive(&MaterialParams::new(1e16, 0.0)?, &a, &kin)?;
        let mut devs = Vec::new();
        for beta in [1e5, 3e4, 1e4] {
            let m = MaterialParams::new(1e16, beta)?;
            let f = force2_normalized(&m, &a, &kin, &QuadratureSpec::default())?;
            devs.push(rel_from_ln(f.ln_normalized, reference.ln()));
        }
        let monotone = devs.windows(2).all(|w| w[1] < w[0]);
        let last = devs[2];
        Ok((
            monotone && last <= 1e-2,
            format!(
                "deviations at beta = 1e5, 3e4, 1e4: {:.2e}, {:.2e}, {:.2e}; monotone {monotone}, \
                 last <= 1e-2 {}",
                devs[0],
                devs[1],
                devs[2],
                last <= 1e-2
            ),
        ))
    })
}

/// Criterion 6: shape of the figure curves. The data go through `out` as the CSV files
/// `fig2` writes, and are read back from there.
pub fn fig2_shape(out: &Path) -> CheckOutcome {
    timed(6, "figure shape", 120, || {
        let cfg = RunConfig {
            out: Some(out.to_path_buf()),
            ..RunConfig::default()
        };
        cmd_fig2(&cfg)?;
        let mut curves_read = Vec::new();
        let mut u = Vec::new();
        for wt in FIG2_OMEGA_TILDE {
            for zt in FIG2_Z_TILDE {
                let path = out.join(fig2_file_name(wt, zt));
                let text = std::fs::read_to_string(&path).map_err(CliError::io(&path))?;
                let cols: Vec<(f64, f64)> = text
                    .lines()
                    .skip(1)
                    .map(|l| {
                        let mut c = l.split(',').map(|x| x.parse().unwrap_or(f64::NAN));
                        (c.next().unwrap_or(f64::NAN), c.next().unwrap_or(f64::NAN))
                    })
                    .collect();
                u = cols.iter().map(|c| c.0).collect();
                curves_read.push((wt, zt, cols.iter().map(|c| c.1).collect::<Vec<f64>>()));
            }
        }
        let find = |wt: f64, zt: f64| {
            &curves_read
                .iter()
                .find(|(w, z, _)| *w == wt && *z == zt)
                .expect("default figure axes")
                .2
        };
        let mut notes = Vec::new();
        let mut ok = true;

        let rows_ok = curves_read.len() == 4 && curves_read.iter().all(|c| c.2.len() == 200);
        ok &= rows_ok;
        notes.push(format!("4 files x 200 rows {rows_ok}"));
        let nonneg = curves_read.iter().all(|c| c.2.iter().all(|&f| f >= 0.0));
        ok &= nonneg;
        notes.push(format!("nonnegative {nonneg}"));
        for (wt, zt, f) in &curves_read {
            // quadrature noise is far below this slack
            let drop = f.windows(2).position(|w| w[1] < w[0] * (1.0 - 1e-9));
            ok &= drop.is_none();
            let peak = f.iter().cloned().fold(0.0, f64::max);
            let ip = f.iter().position(|&x| x == peak).unwrap_or(0);
            notes.push(match drop {
                None => format!("(wt={wt}, zt={zt}) monotone"),
                Some(i) => format!(
                    "(wt={wt}, zt={zt}) decreases after u={:.2}, peak {peak:.3e} at u={:.2}, f(20)={:.3e}",
                    u[i],
                    u[ip],
                    f[f.len() - 1]
                ),
            });
        }
        for wt in [1.0, 5.0] {
            let (near, far) = (find(wt, 10.0), find(wt, 100.0));
            let first = far.iter().zip(near).position(|(a, b)| a > b);
            ok &= first.is_none();
            notes.push(match first {
                None => format!("wt={wt}: zt=100 <= zt=10 everywhere"),
                Some(i) => format!(
                    "wt={wt}: zt=100 above zt=10 from u={:.2} ({:.3e} vs {:.3e} at u=20)",
                    u[i],
                    far[far.len() - 1],
                    near[near.len() - 1]
                ),
            });
        }
        for zt in [10.0, 100.0] {
            let (one, five) = (find(1.0, zt), find(5.0, zt));
            let (a, b) = (five[five.len() - 1], one[one.len() - 1]);
            ok &= a > b;
            notes.push(format!("zt={zt}: wt=5 {} wt=1 at u=20 ({a:.3e} vs {b:.3e})", if a > b { ">" } else { "<=" }));
        }
        Ok((ok, notes.join("; ")))
    })
}

/// Criterion 7: below the sound speed no pair of surface modes reaches the two-photon
/// energy shell; well above it one does.
pub fn two_photon_infeasibility() -> CheckOutcome {
    timed(7, "two-photon infeasibility", 30, || {
        let m = material();
        let z = 10.0 * m.beta / m.omega_p;
        let mut ok = true;
        let mut notes = Vec::new();
        for u in [0.5, 0.9, 0.99] {
            let r = resonance_min(&m, &Kinematics::new(u * m.beta, z)?, 400)?;
            let bound = SQRT_2 * m.omega_p * (1.0 - u);
            let pass = r.grid_min >= bound && !r.feasible;
            ok &= pass;
            notes.push(format!("u={u}: min {:.4e} >= {bound:.4e} infeasible {pass}", r.grid_min));
        }
        let r = resonance_min(&m, &Kinematics::new(3.0 * m.beta, z)?, 400)?;
        ok &= r.feasible;
        notes.push(format!("u=3: feasible {}", r.feasible));
        Ok((ok, notes.join("; ")))
    })
}

/// Criterion 8: decay rate against its oracle, and linearity in the polarizability.
pub fn gamma_oracle(seed: u64) -> CheckOutcome {
    timed(8, "decay-rate oracle and alpha-linearity", 120, || {
        let m = material();
        let spec = QuadratureSpec::default();
        let (mut worst, mut worst_lin) = (0.0f64, 0.0f64);
        let mut all_converged = true;
        for p in supersonic_tuples(seed ^ 0x8, 5) {
            let (a, kin) = p.realize(&m, DEFAULT_ALPHA)?;
            let g = gamma_g(&m, &a, &kin, &spec)?;
            let o = oracle_gamma_g(&m, &a, &kin, &SmoothingSchedule::adapted(&m, &kin), DEFAULT_GRID_N)?;
            all_converged &= o.converged;
            worst = worst.max(rel_from_ln(g.ln_abs, o.ln_abs));
            let (a2, _) = p.realize(&m, 2.0 * DEFAULT_ALPHA)?;
            let g2 = gamma_g(&m, &a2, &kin, &spec)?;
            worst_lin = worst_lin.max(((g2.ln_abs - g.ln_abs).exp() / 2.0 - 1.0).abs());
        }
        Ok((
            worst <= 1e-3 && worst_lin <= 1e-12 && all_converged,
            format!("5 tuples, worst rel {worst:.1e} (limit 1e-3), ratio deviation {worst_lin:.1e} (limit 1e-12)"),
        ))
    })
}

/// Criterion 9: two-photon term against the Monte Carlo oracle at the same regulator.
pub fn force4_cross_check(seed: u64, samples: u64) -> CheckOutcome {
    timed(9, "fourth-order Monte Carlo cross-check", 600, || {
        let m = material();
        let (a, kin) = DimensionlessPoint::new(3.0, 1.0, 10.0)?.realize(&m, DEFAULT_ALPHA)?;
        let regulator = DEFAULT_REGULATOR * m.omega_p;
        let opts = Force4Options {
            regulator: Some(regulator),
            ..Force4Options::default()
        };
        let main = force4_two_photon(&m, &a, &kin, &opts)?;
        let mc = oracle_force4_mc(&m, &a, &kin, DEFAULT_MC_DELTA_WIDTH * m.omega_p, regulator, samples, seed)?;
        let sigma = (mc.std_error.powi(2) + main.quadrature.error_estimate.powi(2)).sqrt();
        let z = (main.value - mc.value).abs() / sigma;
        let rel_se = mc.std_error / mc.value.abs();
        Ok((
            z <= 3.0 && rel_se <= 0.1 && !mc.inconclusive,
            format!(
                "quadrature {:.5e} N, MC {:.5e} +- {:.2e} N ({} samples), {z:.2} sigma (limit 3), \
                 MC rel SE {rel_se:.3} (limit 0.1)",
                main.value, mc.value, mc.std_error, mc.samples
            ),
        ))
    })
}

/// Criterion 10: modified Bessel functions and the principal-value integrator.
pub fn special_functions() -> CheckOutcome {
    timed(10, "special functions", 5, || {
        let mut worst = 0.0f64;
        for n in 0..=2 {
            for i in 0..50 {
                let x = 0.1 * 500f64.powf(i as f64 / 49.0);
                let r = (bessel_k(n, x)? / oracle_bessel_k(n, x)? - 1.0).abs();
                worst = worst.max(r);
            }
        }
        let spec = QuadratureSpec::default().with_rel_tol(1e-13).with_abs_tol(1e-15);
        let pv0 = principal_value_1d(|x| 1.0 / (x - 1.0), 1.0, 0.0, 2.0, &spec).value;
        let pv1 = principal_value_1d(|x| x / (x - 1.0), 1.0, 0.0, 2.0, &spec).value;
        let (e0, e1) = (pv0.abs(), (pv1 - 2.0).abs());
        Ok((
            worst <= 1e-10 && e0 <= 1e-10 && e1 <= 1e-10,
            format!("K_0..K_2 on 50 points worst rel {worst:.1e} (limit 1e-10); PV errors {e0:.1e}, {e1:.1e} (limit 1e-10)"),
        ))
    })
}

/// Criterion 11: a sweep is reproducible byte for byte, also when resumed from a torn file.
pub fn sweep_determinism(dir: &Path, seed: u64) -> CheckOutcome {
    timed(11, "sweep determinism", 60, || {
        let cfg = |name: &str| RunConfig {
            u: Some(vec![0.5, 2.0, 5.0]),
            omega_tilde: Some(vec![1.0, 2.0, 5.0]),
            z_tilde: Some(vec![10.0, 20.0, 50.0]),
            format: crate::config::Format::Csv,
            seed,
            out: Some(dir.join(name)),
            ..RunConfig::default()
        };
        let read = |name: &str| std::fs::read(dir.join(name)).map_err(CliError::io(dir.join(name)));
        for name in ["first.csv", "second.csv", "resumed.csv"] {
            let _ = std::fs::remove_file(dir.join(name));
        }
        cmd_sweep(&cfg("first.csv"), false, false, |_| {})?;
        cmd_sweep(&cfg("second.csv"), false, false, |_| {})?;
        let (first, second) = (read("first.csv")?, read("second.csv")?);

        // cut the file inside its 14th row and resume
        let cut = first.iter().enumerate().filter(|(_, b)| **b == b'\n').nth(13).map_or(0, |(i, _)| i) + 7;
        std::fs::write(dir.join("resumed.csv"), &first[..cut]).map_err(CliError::io(dir))?;
        let summary = cmd_sweep(&cfg("resumed.csv"), false, false, |_| {})?;
        let resumed = read("resumed.csv")?;

        let text = String::from_utf8_lossy(&first);
        let rows: Vec<&str> = text.lines().skip(1).collect();
        let subsonic_zero = rows
            .iter()
            .filter(|r| r.starts_with("0.5,"))
            .all(|r| {
                let c: Vec<&str> = r.split(',').collect();
                c[3] == "0.0" && c[5] == "0.0"
            });
        let identical = first == second;
        let resumed_ok = resumed == first && summary.skipped == 13;
        Ok((
            identical && resumed_ok && rows.len() == 27 && subsonic_zero,
            format!(
                "{} rows, repeat identical {identical}, resumed identical {resumed_ok} \
                 (kept {}), subsonic rows zero {subsonic_zero}",
                rows.len(),
                summary.skipped
            ),
        ))
    })
}

/// The checks run by `validate`: every oracle comparison and the cheap
/// invariants, in criterion order.
pub fn validation_suite(seed: u64, skip_force4: bool, mc_samples: u64, mut report: impl FnMut(&CheckOutcome)) -> Vec<CheckOutcome> {
    let mut out = Vec::new();
    let mut push = |c: CheckOutcome| {
        report(&c);
        out.push(c);
    };
    push(threshold_theorem(seed));
    push(dispersion_identities(seed));
    push(threshold_consistency(seed));
    push(force2_oracle(seed, 20, &force2_main_ln));
    push(two_photon_infeasibility());
    push(gamma_oracle(seed));
    if !skip_force4 {
        push(force4_cross_check(seed, mc_samples));
    }
    push(special_functions());
    out
}
