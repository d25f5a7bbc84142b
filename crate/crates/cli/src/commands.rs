//! Single-point commands and the figure data. Each command returns its
//! record; `main` renders it.

use std::path::PathBuf;

use hydrofriction::dispersion::DimensionlessPoint;
use hydrofriction::friction2::{casimir_polder, force2_nondispersive, force2_normalized_at, force2_raw};
use hydrofriction::friction4::{delta_omega_g, force4_assemble, gamma_g, resonance_min};
use hydrofriction::numerics::QuadratureResult;
use rayon::prelude::*;
use serde_json::{json, Map, Value};

use crate::config::{soft_bound_warnings, Range, RunConfig};
use crate::error::{CliError, Result};
use crate::output::{finite_or_null, record};
use crate::worker_pool;

pub type Record = Map<String, Value>;

/// Axes of the friction-versus-velocity figure.
pub const FIG2_OMEGA_TILDE: [f64; 2] = [1.0, 5.0];
pub const FIG2_Z_TILDE: [f64; 2] = [10.0, 100.0];
pub const FIG2_U: Range = Range {
    lo: 1.0,
    hi: 20.0,
    n: 200,
};

fn start(command: &str, cfg: &RunConfig) -> Result<(Record, crate::config::Point)> {
    let p = cfg.point()?;
    let mut rec = record(command);
    let (m, a, kin) = (&p.material, &p.atom, &p.kinematics);
    rec.insert(
        "inputs".into(),
        json!({
            "omega_p_rad_per_s": m.omega_p,
            "beta_m_per_s": m.beta,
            "omega_b_rad_per_s": a.omega_b,
            "alpha_m3": a.alpha,
            "v_m_per_s": kin.v,
            "z_m": kin.z,
        }),
    );
    let (u, wt, zt) = p.reduced();
    rec.insert("u".into(), finite_or_null(u));
    rec.insert("omega_tilde".into(), finite_or_null(wt));
    rec.insert("z_tilde".into(), finite_or_null(zt));
    let mut warnings = Vec::new();
    if let Ok(dp) = DimensionlessPoint::new(u, wt, zt) {
        warnings = soft_bound_warnings(&dp);
    }
    if kin.is_relativistic() {
        warnings.push(format!("v = {} m/s is not small against c; the non-retarded model is questionable", kin.v));
    }
    rec.insert("warnings".into(), warnings.into());
    Ok((rec, p))
}

fn quadrature_fields(rec: &mut Record, q: &QuadratureResult) {
    rec.insert("quadrature_error".into(), q.error_estimate.into());
    rec.insert("evaluations".into(), q.evaluations.into());
    rec.insert("converged".into(), q.converged.into());
}

const SUBSONIC_NOTE: &str = "u <= 1: below the sound-speed threshold the friction vanishes exactly";

fn note(rec: &mut Record, supersonic: bool) {
    let note = if supersonic { Value::Null } else { SUBSONIC_NOTE.into() };
    rec.insert("note".into(), note);
}

pub fn cmd_force2(cfg: &RunConfig) -> Result<Record> {
    let (mut rec, p) = start("force2", cfg)?;
    let r = force2_raw(&p.material, &p.atom, &p.kinematics, &cfg.spec())?;
    rec.insert("supersonic".into(), r.threshold.supersonic.into());
    rec.insert("threshold_w0".into(), r.threshold.w0.into());
    rec.insert("f2_normalized".into(), r.normalized_value.into());
    rec.insert("f2_raw_N".into(), r.raw_value.unwrap_or(0.0).into());
    rec.insert("ln_f2_normalized".into(), finite_or_null(r.ln_normalized));
    rec.insert("casimir_polder_N".into(), casimir_polder(&p.atom, p.kinematics.z).into());
    quadrature_fields(&mut rec, &r.quadrature);
    note(&mut rec, r.threshold.supersonic);
    Ok(rec)
}

pub fn cmd_nondispersive(cfg: &RunConfig) -> Result<Record> {
    let (mut rec, p) = start("nondispersive", cfg)?;
    let f = force2_nondispersive(&p.material, &p.atom, &p.kinematics)?;
    rec.insert("f2_normalized".into(), f.into());
    rec.insert(
        "f2_raw_N".into(),
        (f * casimir_polder(&p.atom, p.kinematics.z).abs()).into(),
    );
    rec.insert("note".into(), "sound speed taken as zero; beta is ignored".into());
    Ok(rec)
}

pub fn cmd_gamma(cfg: &RunConfig) -> Result<Record> {
    let (mut rec, p) = start("gamma", cfg)?;
    let g = gamma_g(&p.material, &p.atom, &p.kinematics, &cfg.spec())?;
    rec.insert("gamma_g_per_s".into(), g.value.into());
    rec.insert("ln_gamma_g".into(), finite_or_null(g.ln_abs));
    quadrature_fields(&mut rec, &g.quadrature);
    note(&mut rec, p.reduced().0 > 1.0);
    Ok(rec)
}

pub fn cmd_shift(cfg: &RunConfig) -> Result<Record> {
    let (mut rec, p) = start("shift", cfg)?;
    let s = delta_omega_g(&p.material, &p.atom, &p.kinematics, &cfg.spec())?;
    rec.insert("delta_omega_g_rad_per_s".into(), s.value.into());
    quadrature_fields(&mut rec, &s.quadrature);
    Ok(rec)
}

pub fn cmd_resonance(cfg: &RunConfig) -> Result<Record> {
    let (mut rec, p) = start("resonance", cfg)?;
    let r = resonance_min(&p.material, &p.kinematics, cfg.resonance_grid)?;
    rec.insert("grid".into(), cfg.resonance_grid.into());
    rec.insert("feasible".into(), r.feasible.into());
    rec.insert("grid_min_rad_per_s".into(), r.grid_min.into());
    rec.insert("lower_bound_rad_per_s".into(), r.lower_bound.into());
    let (k1, t1, k2, t2) = r.argmin;
    rec.insert("k1_per_m".into(), k1.into());
    rec.insert("theta1_rad".into(), t1.into());
    rec.insert("k2_per_m".into(), k2.into());
    rec.insert("theta2_rad".into(), t2.into());
    Ok(rec)
}

pub fn cmd_force4(cfg: &RunConfig) -> Result<Record> {
    let (mut rec, p) = start("force4", cfg)?;
    let opts = cfg.force4_options();
    let r = force4_assemble(&p.material, &p.atom, &p.kinematics, cfg.t, &opts)?;
    rec.insert("t_s".into(), r.t.into());
    rec.insert("gamma_g_per_s".into(), r.gamma_g.into());
    rec.insert("delta_omega_g_rad_per_s".into(), r.delta_omega_g.into());
    rec.insert("dgamma_dv_per_m".into(), r.dgamma_dv.into());
    rec.insert("f2_raw_N".into(), r.force2.into());
    rec.insert("secular_rate_N_per_s".into(), r.secular_rate.into());
    rec.insert("secular_term_N".into(), r.secular_term().into());
    rec.insert("shift_term_N".into(), r.shift_term.into());
    let tp = r.two_photon.expect("two-photon term requested");
    rec.insert("two_photon_N".into(), tp.value.into());
    rec.insert("two_photon_feasible".into(), tp.feasible.into());
    rec.insert("regulator_rad_per_s".into(), tp.regulator.into());
    rec.insert("near_stationary_points".into(), tp.near_stationary_roots.into());
    rec.insert("total_N".into(), r.total().into());
    quadrature_fields(&mut rec, &tp.quadrature);
    Ok(rec)
}

/// One curve of normalized friction against reduced velocity.
#[derive(Debug, Clone, PartialEq)]
pub struct Fig2Curve {
    pub omega_tilde: f64,
    pub z_tilde: f64,
    pub u: Vec<f64>,
    pub f: Vec<f64>,
    pub threshold_w0: Vec<Option<f64>>,
}

impl Fig2Curve {
    pub fn file_name(&self) -> String {
        fig2_file_name(self.omega_tilde, self.z_tilde)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("u,f2_normalized,threshold_w0\n");
        for ((u, f), w0) in self.u.iter().zip(&self.f).zip(&self.threshold_w0) {
            let w0 = w0.map(|w| format!("{w:e}")).unwrap_or_default();
            s.push_str(&format!("{u},{f:e},{w0}\n"));
        }
        s
    }
}

pub fn fig2_file_name(omega_tilde: f64, z_tilde: f64) -> String {
    format!("fig2_omega_tilde_{omega_tilde}_z_tilde_{z_tilde}.csv")
}

/// Normalized friction on the `omega_tilde x z_tilde` grid (default
/// `{1, 5} x {10, 100}`) for `u` over `[1, 20]` at 200 points, at the
/// configured sound speed.
pub fn fig2_curves(cfg: &RunConfig) -> Result<Vec<Fig2Curve>> {
    let us = cfg.u_values(FIG2_U)?;
    let (wts, zts) = cfg.reduced_axes(&FIG2_OMEGA_TILDE, &FIG2_Z_TILDE)?;
    let spec = cfg.spec();
    let beta = cfg.beta;
    if beta <= 0.0 {
        return Err(CliError::Config("beta: fig2 needs a positive sound speed".into()));
    }
    let pool = worker_pool()?;
    let mut curves = Vec::new();
    for &wt in &wts {
        for &zt in &zts {
            let results: Vec<_> = pool.install(|| {
                us.par_iter()
                    .map(|&u| {
                        let p = DimensionlessPoint::new(u, wt, zt)?;
                        force2_normalized_at(&p, beta, &spec)
                    })
                    .collect()
            });
            let mut curve = Fig2Curve {
                omega_tilde: wt,
                z_tilde: zt,
                u: us.clone(),
                f: Vec::with_capacity(us.len()),
                threshold_w0: Vec::with_capacity(us.len()),
            };
            for r in results {
                let r = r?;
                curve.f.push(r.normalized_value);
                curve.threshold_w0.push(r.threshold.w0);
            }
            curves.push(curve);
        }
    }
    Ok(curves)
}

/// Writes one CSV per curve into the `out` directory (default `fig2`).
pub fn cmd_fig2(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let dir = cfg.out.clone().unwrap_or_else(|| PathBuf::from("fig2"));
    std::fs::create_dir_all(&dir).map_err(CliError::io(&dir))?;
    let mut paths = Vec::new();
    for curve in fig2_curves(cfg)? {
        let path = dir.join(curve.file_name());
        std::fs::write(&path, curve.to_csv()).map_err(CliError::io(&path))?;
        paths.push(path);
    }
    Ok(paths)
}
