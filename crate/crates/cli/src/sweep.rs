//! Parameter sweeps over `(u, omega_tilde, z_tilde)`.
//!
//! Rows are written in input order, batch by batch, so an interrupted sweep
//! leaves a valid prefix. Re-running with the same output file keeps the rows
//! already present (keyed by their exact reduced coordinates), drops a torn
//! last line, and appends the rest, which reproduces the uninterrupted file.

use std::collections::HashSet;
use std::fs::OpenOptions;
use std::io::Write;
use std::path::Path;

use hydrofriction::dispersion::{DimensionlessPoint, MaterialParams};
use hydrofriction::friction2::{force2_normalized, threshold_w0};
use hydrofriction::friction4::{delta_omega_g, force4_two_photon, gamma_g, Force4Options};
use hydrofriction::numerics::{QuadratureResult, QuadratureSpec};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{soft_bound_warnings, Format, Range, RunConfig};
use crate::error::{CliError, Result};
use crate::output::SCHEMA_VERSION;
use crate::worker_pool;

/// Default velocities of a sweep: the figure's range at twenty points.
pub const DEFAULT_U: Range = Range {
    lo: 1.0,
    hi: 20.0,
    n: 20,
};

/// One sweep point. Empty (`None`) fields do not apply: no threshold below
/// the sound speed, no two-photon term unless requested and supersonic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub u: f64,
    pub omega_tilde: f64,
    pub z_tilde: f64,
    pub f2_normalized: f64,
    #[serde(rename = "f2_raw_N")]
    pub f2_raw: f64,
    #[serde(rename = "gamma_g_per_s")]
    pub gamma_g: f64,
    #[serde(rename = "delta_omega_g_rad_per_s")]
    pub delta_omega_g: f64,
    #[serde(rename = "f4_two_photon_N")]
    pub f4_two_photon: Option<f64>,
    pub threshold_w0: Option<f64>,
    /// Largest relative error estimate among the quadratures of the row.
    pub quadrature_error: f64,
    pub converged: bool,
}

pub const CSV_HEADER: &str = "u,omega_tilde,z_tilde,f2_normalized,f2_raw_N,gamma_g_per_s,\
delta_omega_g_rad_per_s,f4_two_photon_N,threshold_w0,quadrature_error,converged";

#[derive(Serialize, Deserialize)]
struct JsonRow {
    schema_version: u32,
    #[serde(flatten)]
    row: SweepRow,
}

type Key = [u64; 3];

fn key(u: f64, wt: f64, zt: f64) -> Key {
    [u.to_bits(), wt.to_bits(), zt.to_bits()]
}

impl SweepRow {
    fn key(&self) -> Key {
        key(self.u, self.omega_tilde, self.z_tilde)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SweepSummary {
    pub written: usize,
    pub skipped: usize,
    pub unconverged: usize,
}

/// A quadrature that may have missed its tolerance; the estimate is kept.
struct Quantity {
    value: f64,
    rel_error: f64,
    converged: bool,
}

fn quantity(r: hydrofriction::Result<(f64, QuadratureResult)>) -> Result<Quantity> {
    let rel = |value: f64, err: f64| if value != 0.0 { err / value.abs() } else { 0.0 };
    match r {
        Ok((value, q)) => Ok(Quantity {
            value,
            rel_error: rel(value, q.error_estimate),
            converged: q.converged,
        }),
        Err(hydrofriction::Error::NotConverged { value, error_estimate }) => Ok(Quantity {
            value,
            rel_error: rel(value, error_estimate),
            converged: false,
        }),
        Err(e) => Err(e.into()),
    }
}

/// Evaluates every field of one row.
pub fn sweep_row(
    p: &DimensionlessPoint,
    m: &MaterialParams,
    alpha: f64,
    spec: &QuadratureSpec,
    force4: Option<&Force4Options>,
) -> Result<SweepRow> {
    let (a, kin) = p.realize(m, alpha)?;
    let f2 = quantity(force2_normalized(m, &a, &kin, spec).map(|r| (r.normalized_value, r.quadrature)))?;
    let cp = hydrofriction::friction2::casimir_polder(&a, kin.z).abs();
    let gamma = quantity(gamma_g(m, &a, &kin, spec).map(|r| (r.value, r.quadrature)))?;
    let shift = quantity(delta_omega_g(m, &a, &kin, spec).map(|r| (r.value, r.quadrature)))?;
    let f4 = match force4 {
        Some(opts) if p.u > 1.0 => {
            Some(quantity(force4_two_photon(m, &a, &kin, opts).map(|r| (r.value, r.quadrature)))?)
        }
        _ => None,
    };
    let all = [Some(&f2), Some(&gamma), Some(&shift), f4.as_ref()];
    let all = all.iter().flatten();
    Ok(SweepRow {
        u: p.u,
        omega_tilde: p.omega_tilde,
        z_tilde: p.z_tilde,
        f2_normalized: f2.value.max(0.0),
        f2_raw: f2.value.max(0.0) * cp,
        gamma_g: gamma.value,
        delta_omega_g: shift.value,
        f4_two_photon: f4.as_ref().map(|q| q.value),
        threshold_w0: threshold_w0(p.u, p.omega_tilde).w0,
        quadrature_error: all.clone().map(|q| q.rel_error).fold(0.0, f64::max),
        converged: all.clone().all(|q| q.converged),
    })
}

/// Sweep points in output order. Cartesian with `u` varying fastest, or,
/// with `zip`, the i-th entries of equally long lists (length-one lists
/// broadcast).
pub fn sweep_points(cfg: &RunConfig, zip: bool) -> Result<Vec<DimensionlessPoint>> {
    let us = cfg.u_values(DEFAULT_U)?;
    let (wts, zts) = cfg.reduced_axes(&[1.0], &[10.0])?;
    let mut points = Vec::new();
    if zip {
        let n = us.len().max(wts.len()).max(zts.len());
        for (name, len) in [("u", us.len()), ("omega_tilde", wts.len()), ("z_tilde", zts.len())] {
            if len != n && len != 1 {
                return Err(CliError::Config(format!(
                    "{name}: zipped sweeps need lists of equal length (or length one), got {len} and {n}"
                )));
            }
        }
        let at = |v: &[f64], i: usize| if v.len() == 1 { v[0] } else { v[i] };
        for i in 0..n {
            points.push(DimensionlessPoint::new(at(&us, i), at(&wts, i), at(&zts, i))?);
        }
    } else {
        for &wt in &wts {
            for &zt in &zts {
                for &u in &us {
                    points.push(DimensionlessPoint::new(u, wt, zt)?);
                }
            }
        }
    }
    Ok(points)
}

fn render_rows(rows: &[SweepRow], format: Format) -> String {
    let mut s = String::new();
    match format {
        Format::Csv => {
            let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
            for r in rows {
                w.serialize(r).expect("rows serialize");
            }
            s.push_str(std::str::from_utf8(&w.into_inner().expect("in-memory writer")).expect("utf-8"));
        }
        Format::Json => {
            for r in rows {
                let line = JsonRow {
                    schema_version: SCHEMA_VERSION,
                    row: r.clone(),
                };
                s.push_str(&serde_json::to_string(&line).expect("rows serialize"));
                s.push('\n');
            }
        }
    }
    s
}

/// Keys of the complete rows in an existing output file. A torn last line
/// is cut off; anything that is not a sweep table of this format is refused.
fn resume_keys(path: &Path, format: Format) -> Result<HashSet<Key>> {
    let mut keys = HashSet::new();
    let text = match std::fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(keys),
        Err(e) => return Err(CliError::io(path)(e)),
    };
    let complete = match text.rfind('\n') {
        Some(i) => &text[..=i],
        None => "",
    };
    if complete.len() != text.len() {
        let f = OpenOptions::new().write(true).open(path).map_err(CliError::io(path))?;
        f.set_len(complete.len() as u64).map_err(CliError::io(path))?;
    }
    let refuse = |why: String| {
        CliError::Config(format!("{}: cannot resume: {why}", path.display()))
    };
    match format {
        Format::Csv => {
            let mut lines = complete.lines();
            match lines.next() {
                None => {}
                Some(h) if h == CSV_HEADER => {}
                Some(h) => return Err(refuse(format!("unexpected header `{h}`"))),
            }
            let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(complete.as_bytes());
            for row in r.deserialize::<SweepRow>() {
                keys.insert(row.map_err(|e| refuse(e.to_string()))?.key());
            }
        }
        Format::Json => {
            for line in complete.lines() {
                let row: JsonRow = serde_json::from_str(line).map_err(|e| refuse(e.to_string()))?;
                if row.schema_version != SCHEMA_VERSION {
                    return Err(refuse(format!("schema_version {}", row.schema_version)));
                }
                keys.insert(row.row.key());
            }
        }
    }
    Ok(keys)
}

/// Runs the sweep, appending to `cfg.out` (resuming) or printing to stdout.
/// `warn` receives soft-bound warnings, once per distinct message.
pub fn cmd_sweep(
    cfg: &RunConfig,
    zip: bool,
    with_force4: bool,
    mut warn: impl FnMut(&str),
) -> Result<SweepSummary> {
    let points = sweep_points(cfg, zip)?;
    let m = cfg.material()?;
    m.require_dispersive().map_err(CliError::from)?;
    let spec = cfg.spec();
    let opts = cfg.force4_options();
    let force4 = with_force4.then_some(&opts);

    let mut warned = HashSet::new();
    for p in &points {
        for w in soft_bound_warnings(p) {
            if warned.insert(w.clone()) {
                warn(&w);
            }
        }
    }

    let total = points.len();
    let (todo, mut sink, label): (Vec<_>, Box<dyn Write>, &Path) = match &cfg.out {
        Some(path) => {
            let done = resume_keys(path, cfg.format)?;
            let f = OpenOptions::new()
                .create(true)
                .append(true)
                .open(path)
                .map_err(CliError::io(path))?;
            let todo = points
                .into_iter()
                .filter(|p| !done.contains(&key(p.u, p.omega_tilde, p.z_tilde)))
                .collect();
            (todo, Box::new(f), path.as_path())
        }
        None => (points, Box::new(std::io::stdout()), Path::new("<stdout>")),
    };
    let header_needed = match &cfg.out {
        Some(path) => std::fs::metadata(path).map_or(true, |md| md.len() == 0),
        None => true,
    };
    if header_needed && cfg.format == Format::Csv {
        writeln!(sink, "{CSV_HEADER}").map_err(CliError::io(label))?;
    }

    let pool = worker_pool()?;
    let batch = 4 * pool.current_num_threads();
    let mut summary = SweepSummary {
        written: 0,
        skipped: total - todo.len(),
        unconverged: 0,
    };
    for chunk in todo.chunks(batch) {
        let rows: Vec<SweepRow> = pool.install(|| {
            chunk
                .par_iter()
                .map(|p| sweep_row(p, &m, cfg.alpha, &spec, force4))
                .collect::<Result<_>>()
        })?;
        summary.unconverged += rows.iter().filter(|r| !r.converged).count();
        summary.written += rows.len();
        sink.write_all(render_rows(&rows, cfg.format).as_bytes())
            .and_then(|_| sink.flush())
            .map_err(CliError::io(label))?;
    }
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_header_matches_the_row_layout() {
        let row = SweepRow {
            u: 2.0,
            omega_tilde: 1.0,
            z_tilde: 10.0,
            f2_normalized: 0.0,
            f2_raw: 0.0,
            gamma_g: 0.0,
            delta_omega_g: 0.0,
            f4_two_photon: None,
            threshold_w0: None,
            quadrature_error: 0.0,
            converged: true,
        };
        let mut w = csv::Writer::from_writer(Vec::new());
        w.serialize(&row).unwrap();
        let text = String::from_utf8(w.into_inner().unwrap()).unwrap();
        assert_eq!(text.lines().next().unwrap(), CSV_HEADER);
        let back: SweepRow = csv::Reader::from_reader(text.as_bytes()).deserialize().next().unwrap().unwrap();
        assert_eq!(back, row);
    }

    #[test]
    fn zipped_lists_must_agree_in_length() {
        let cfg = RunConfig {
            u: Some(vec![1.0, 2.0, 3.0]),
            omega_tilde: Some(vec![1.0, 2.0]),
            ..RunConfig::default()
        };
        assert!(sweep_points(&cfg, true).is_err());
        assert_eq!(sweep_points(&cfg, false).unwrap().len(), 6);
    }
}
