//! Run configuration from flags and `key = value unit` files.
//!
//! Flags take SI values without units. The file format requires an explicit
//! unit on every physical quantity, e.g. `omega_p = 1e16 rad/s`; `#` starts a
//! comment. Unknown keys, missing units and repeated keys are errors.

use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use hydrofriction::dispersion::{AtomParams, DimensionlessPoint, Kinematics, MaterialParams};
use hydrofriction::friction4::Force4Options;
use hydrofriction::numerics::QuadratureSpec;

use crate::error::{CliError, Result};

/// Static polarizability of atomic hydrogen [m^3].
pub const DEFAULT_ALPHA: f64 = 6.67e-31;
pub const DEFAULT_OMEGA_P: f64 = 1e16;
pub const DEFAULT_BETA: f64 = 1e6;
pub const DEFAULT_SEED: u64 = 1;
/// Samples of the fourth-order Monte Carlo cross-check.
pub const DEFAULT_MC_SAMPLES: u64 = 1 << 23;
pub const DEFAULT_RESONANCE_GRID: usize = 400;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum)]
pub enum Format {
    #[default]
    Json,
    Csv,
}

/// Flags shared by all subcommands. Values are SI: rad/s, m/s, m^3, m, s.
#[derive(Debug, Clone, Default, Args)]
pub struct Flags {
    /// Plasma frequency [rad/s] (default 1e16)
    #[arg(long, global = true)]
    pub omega_p: Option<f64>,
    /// Sound speed of the electron fluid [m/s] (default 1e6)
    #[arg(long, global = true)]
    pub beta: Option<f64>,
    /// Atomic transition frequency [rad/s]
    #[arg(long, global = true)]
    pub omega_b: Option<f64>,
    /// Static polarizability [m^3] (default 6.67e-31, hydrogen)
    #[arg(long, global = true)]
    pub alpha: Option<f64>,
    /// Atom-surface distance [m]
    #[arg(long, global = true)]
    pub z: Option<f64>,
    /// Atom velocity [m/s]
    #[arg(long, global = true, conflicts_with_all = ["u", "u_range"])]
    pub v: Option<f64>,
    /// Reduced velocity v/beta; a comma-separated list for sweeps
    #[arg(long, global = true, conflicts_with = "u_range")]
    pub u: Option<String>,
    /// Reduced velocities lo:hi:n, n evenly spaced points including both ends
    #[arg(long, global = true)]
    pub u_range: Option<String>,
    /// omega_p/omega_b; a comma-separated list for sweeps
    #[arg(long, global = true)]
    pub omega_tilde: Option<String>,
    /// z omega_p/beta; a comma-separated list for sweeps
    #[arg(long, global = true)]
    pub z_tilde: Option<String>,
    /// Output file (a directory for fig2); stdout when absent
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// Relative quadrature tolerance (default 1e-8 for one-dimensional
    /// integrals, 1e-6 per level of the nested two-photon integral)
    #[arg(long, global = true)]
    pub rel_tol: Option<f64>,
    /// Seed of every random stream (default 1)
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Time at which the secular fourth-order term is evaluated [s] (default 0)
    #[arg(long, global = true)]
    pub t: Option<f64>,
    /// Two-photon amplitude regulator [rad/s] (default 1e-2 omega_p)
    #[arg(long, global = true)]
    pub regulator: Option<f64>,
    /// Grid size per axis of the two-photon resonance scan (default 400)
    #[arg(long, global = true)]
    pub resonance_grid: Option<usize>,
    /// Monte Carlo samples of the fourth-order cross-check (default 2^23)
    #[arg(long, global = true)]
    pub mc_samples: Option<u64>,
    /// Config file of `key = value unit` lines; flags override it
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
}

/// Inclusive, evenly spaced range `lo:hi:n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Range {
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
}

impl Range {
    pub fn parse(s: &str) -> Result<Self> {
        let bad = || CliError::Config(format!("u_range: expected lo:hi:n, got `{s}`"));
        let parts: Vec<&str> = s.split(':').map(str::trim).collect();
        let [lo, hi, n] = parts[..] else {
            return Err(bad());
        };
        let lo: f64 = lo.parse().map_err(|_| bad())?;
        let hi: f64 = hi.parse().map_err(|_| bad())?;
        let n: usize = n.parse().map_err(|_| bad())?;
        if n == 0 || !lo.is_finite() || !hi.is_finite() || hi < lo || (n == 1 && hi != lo) {
            return Err(bad());
        }
        Ok(Self { lo, hi, n })
    }

    pub fn values(&self) -> Vec<f64> {
        if self.n == 1 {
            return vec![self.lo];
        }
        let step = (self.hi - self.lo) / (self.n - 1) as f64;
        (0..self.n)
            .map(|i| if i == self.n - 1 { self.hi } else { self.lo + step * i as f64 })
            .collect()
    }
}

/// Settings from one source, before defaults.
#[derive(Debug, Clone, Default, PartialEq)]
struct Partial {
    omega_p: Option<f64>,
    beta: Option<f64>,
    omega_b: Option<f64>,
    alpha: Option<f64>,
    z: Option<f64>,
    v: Option<f64>,
    u: Option<Vec<f64>>,
    u_range: Option<Range>,
    omega_tilde: Option<Vec<f64>>,
    z_tilde: Option<Vec<f64>>,
    out: Option<PathBuf>,
    format: Option<Format>,
    rel_tol: Option<f64>,
    seed: Option<u64>,
    t: Option<f64>,
    regulator: Option<f64>,
    resonance_grid: Option<usize>,
    mc_samples: Option<u64>,
}

impl Partial {
    fn from_flags(f: &Flags) -> Result<Self> {
        Ok(Self {
            omega_p: f.omega_p,
            beta: f.beta,
            omega_b: f.omega_b,
            alpha: f.alpha,
            z: f.z,
            v: f.v,
            u: f.u.as_deref().map(|s| parse_list("u", s)).transpose()?,
            u_range: f.u_range.as_deref().map(Range::parse).transpose()?,
            omega_tilde: f.omega_tilde.as_deref().map(|s| parse_list("omega_tilde", s)).transpose()?,
            z_tilde: f.z_tilde.as_deref().map(|s| parse_list("z_tilde", s)).transpose()?,
            out: f.out.clone(),
            format: f.format,
            rel_tol: f.rel_tol,
            seed: f.seed,
            t: f.t,
            regulator: f.regulator,
            resonance_grid: f.resonance_grid,
            mc_samples: f.mc_samples,
        })
    }

    /// `over` wins field by field. Alternative spellings of one quantity
    /// (`v`/`u`/`u_range`, `omega_b`/`omega_tilde`, `z`/`z_tilde`) are
    /// replaced as a group, so a flag never combines with a file value
    /// into a contradiction.
    fn overlay(self, over: Partial) -> Partial {
        let mut out = Partial {
            omega_p: over.omega_p.or(self.omega_p),
            beta: over.beta.or(self.beta),
            alpha: over.alpha.or(self.alpha),
            out: over.out.clone().or(self.out.clone()),
            format: over.format.or(self.format),
            rel_tol: over.rel_tol.or(self.rel_tol),
            seed: over.seed.or(self.seed),
            t: over.t.or(self.t),
            regulator: over.regulator.or(self.regulator),
            resonance_grid: over.resonance_grid.or(self.resonance_grid),
            mc_samples: over.mc_samples.or(self.mc_samples),
            ..Partial::default()
        };
        let velocity = |p: &Partial| p.v.is_some() || p.u.is_some() || p.u_range.is_some();
        let src = if velocity(&over) { &over } else { &self };
        (out.v, out.u, out.u_range) = (src.v, src.u.clone(), src.u_range);
        let src = if over.omega_b.is_some() || over.omega_tilde.is_some() { &over } else { &self };
        (out.omega_b, out.omega_tilde) = (src.omega_b, src.omega_tilde.clone());
        let src = if over.z.is_some() || over.z_tilde.is_some() { &over } else { &self };
        (out.z, out.z_tilde) = (src.z, src.z_tilde.clone());
        out
    }
}

fn parse_list(name: &str, s: &str) -> Result<Vec<f64>> {
    let values: Vec<f64> = s
        .split(',')
        .map(|x| {
            x.trim()
                .parse::<f64>()
                .map_err(|_| CliError::Config(format!("{name}: `{}` is not a number", x.trim())))
        })
        .collect::<Result<_>>()?;
    if values.is_empty() {
        return Err(CliError::Config(format!("{name}: empty list")));
    }
    Ok(values)
}

/// Accepted units per physical key, with their factor to SI.
fn units_of(key: &str) -> Option<&'static [(&'static str, f64)]> {
    Some(match key {
        "omega_p" | "omega_b" | "regulator" => &[("rad/s", 1.0), ("1/s", 1.0), ("s^-1", 1.0)],
        "beta" | "v" => &[("m/s", 1.0), ("km/s", 1e3)],
        "alpha" => &[("m^3", 1.0), ("m3", 1.0)],
        "z" => &[("m", 1.0), ("nm", 1e-9)],
        "t" => &[("s", 1.0), ("fs", 1e-15)],
        _ => return None,
    })
}

fn parse_physical(key: &str, line: usize, value: &str) -> Result<f64> {
    let units = units_of(key).expect("physical key");
    let mut parts = value.split_whitespace();
    let number = parts.next().unwrap_or("");
    let unit: String = parts.collect::<Vec<_>>().join(" ");
    let x: f64 = number
        .parse()
        .map_err(|_| CliError::Config(format!("line {line}: {key}: `{number}` is not a number")))?;
    let expected = units.iter().map(|(u, _)| *u).collect::<Vec<_>>().join(", ");
    if unit.is_empty() {
        return Err(CliError::Config(format!("line {line}: {key}: missing unit (one of {expected})")));
    }
    let factor = units
        .iter()
        .find(|(u, _)| *u == unit)
        .map(|(_, f)| *f)
        .ok_or_else(|| CliError::Config(format!("line {line}: {key}: unknown unit `{unit}` (one of {expected})")))?;
    Ok(x * factor)
}

fn parse_unitless<T: std::str::FromStr>(key: &str, line: usize, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| CliError::Config(format!("line {line}: {key}: cannot parse `{value}`")))
}

fn parse_file_text(text: &str) -> Result<Partial> {
    let mut p = Partial::default();
    let mut seen = std::collections::HashSet::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let Some((key, value)) = content.split_once('=') else {
            return Err(CliError::Config(format!("line {line}: expected `key = value`, got `{content}`")));
        };
        let (key, value) = (key.trim(), value.trim());
        if !seen.insert(key.to_string()) {
            return Err(CliError::Config(format!("line {line}: duplicate key `{key}`")));
        }
        let phys = |v: &str| parse_physical(key, line, v).map(Some);
        match key {
            "omega_p" => p.omega_p = phys(value)?,
            "beta" => p.beta = phys(value)?,
            "omega_b" => p.omega_b = phys(value)?,
            "alpha" => p.alpha = phys(value)?,
            "z" => p.z = phys(value)?,
            "v" => p.v = phys(value)?,
            "t" => p.t = phys(value)?,
            "regulator" => p.regulator = phys(value)?,
            "u" => p.u = Some(parse_list(key, value)?),
            "u_range" => p.u_range = Some(Range::parse(value)?),
            "omega_tilde" => p.omega_tilde = Some(parse_list(key, value)?),
            "z_tilde" => p.z_tilde = Some(parse_list(key, value)?),
            "out" => p.out = Some(PathBuf::from(value)),
            "format" => {
                p.format = Some(Format::from_str(value, true).map_err(|_| {
                    CliError::Config(format!("line {line}: format: expected csv or json, got `{value}`"))
                })?)
            }
            "rel_tol" => p.rel_tol = Some(parse_unitless(key, line, value)?),
            "seed" => p.seed = Some(parse_unitless(key, line, value)?),
            "resonance_grid" => p.resonance_grid = Some(parse_unitless(key, line, value)?),
            "mc_samples" => p.mc_samples = Some(parse_unitless(key, line, value)?),
            _ => return Err(CliError::Config(format!("line {line}: unknown key `{key}`"))),
        }
    }
    if p.v.is_some() && (p.u.is_some() || p.u_range.is_some()) || p.u.is_some() && p.u_range.is_some() {
        return Err(CliError::Config("v, u and u_range are mutually exclusive".into()));
    }
    Ok(p)
}

/// Fully resolved settings with defaults applied. Quantities that have two
/// spellings keep whichever was given; the accessors convert.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub omega_p: f64,
    pub beta: f64,
    pub alpha: f64,
    pub omega_b: Option<f64>,
    pub z: Option<f64>,
    pub v: Option<f64>,
    pub u: Option<Vec<f64>>,
    pub u_range: Option<Range>,
    pub omega_tilde: Option<Vec<f64>>,
    pub z_tilde: Option<Vec<f64>>,
    pub out: Option<PathBuf>,
    pub format: Format,
    pub rel_tol: Option<f64>,
    pub seed: u64,
    pub t: f64,
    pub regulator: Option<f64>,
    pub resonance_grid: usize,
    pub mc_samples: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Partial::default().resolve().expect("defaults are valid")
    }
}

/// One physical evaluation point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub material: MaterialParams,
    pub atom: AtomParams,
    pub kinematics: Kinematics,
}

impl Point {
    pub fn reduced(&self) -> (f64, f64, f64) {
        let m = &self.material;
        (
            self.kinematics.v / m.beta,
            m.omega_p / self.atom.omega_b,
            self.kinematics.z * m.omega_p / m.beta,
        )
    }
}

fn require(name: &str, value: f64, ok: bool, reason: &str) -> Result<()> {
    if value.is_finite() && ok {
        Ok(())
    } else {
        Err(CliError::Config(format!("{name} = {value}: {reason}")))
    }
}

impl Partial {
    fn resolve(self) -> Result<RunConfig> {
        let cfg = RunConfig {
            omega_p: self.omega_p.unwrap_or(DEFAULT_OMEGA_P),
            beta: self.beta.unwrap_or(DEFAULT_BETA),
            alpha: self.alpha.unwrap_or(DEFAULT_ALPHA),
            omega_b: self.omega_b,
            z: self.z,
            v: self.v,
            u: self.u,
            u_range: self.u_range,
            omega_tilde: self.omega_tilde,
            z_tilde: self.z_tilde,
            out: self.out,
            format: self.format.unwrap_or_default(),
            rel_tol: self.rel_tol,
            seed: self.seed.unwrap_or(DEFAULT_SEED),
            t: self.t.unwrap_or(0.0),
            regulator: self.regulator,
            resonance_grid: self.resonance_grid.unwrap_or(DEFAULT_RESONANCE_GRID),
            mc_samples: self.mc_samples.unwrap_or(DEFAULT_MC_SAMPLES),
        };
        let positive = "must be finite and positive";
        require("omega_p", cfg.omega_p, cfg.omega_p > 0.0, positive)?;
        require("beta", cfg.beta, cfg.beta >= 0.0, "must be finite and non-negative")?;
        require("alpha", cfg.alpha, cfg.alpha > 0.0, positive)?;
        if let Some(x) = cfg.omega_b {
            require("omega_b", x, x > 0.0, positive)?;
        }
        if let Some(x) = cfg.z {
            require("z", x, x > 0.0, positive)?;
        }
        if let Some(x) = cfg.v {
            require("v", x, x >= 0.0, "must be finite and non-negative")?;
        }
        for x in cfg.u.iter().flatten() {
            require("u", *x, *x >= 0.0, "must be finite and non-negative")?;
        }
        if let Some(r) = cfg.u_range {
            require("u_range", r.lo, r.lo >= 0.0, "must start at a non-negative value")?;
        }
        for x in cfg.omega_tilde.iter().flatten() {
            require("omega_tilde", *x, *x > 0.0, positive)?;
        }
        for x in cfg.z_tilde.iter().flatten() {
            require("z_tilde", *x, *x > 0.0, positive)?;
        }
        if let Some(x) = cfg.rel_tol {
            require("rel_tol", x, x > 0.0 && x < 1.0, "must lie in (0, 1)")?;
        }
        require("t", cfg.t, cfg.t >= 0.0, "must be finite and non-negative")?;
        if let Some(x) = cfg.regulator {
            require("regulator", x, x > 0.0, positive)?;
        }
        if cfg.resonance_grid < 2 {
            return Err(CliError::Config("resonance_grid must be at least 2".into()));
        }
        if cfg.mc_samples == 0 {
            return Err(CliError::Config("mc_samples must be positive".into()));
        }
        Ok(cfg)
    }
}

impl RunConfig {
    /// Reads the config file named in `flags`, if any, and overlays the flags.
    pub fn from_flags(flags: &Flags) -> Result<Self> {
        let file = match &flags.config {
            Some(path) => Self::read_partial(path)?,
            None => Partial::default(),
        };
        file.overlay(Partial::from_flags(flags)?).resolve()
    }

    fn read_partial(path: &Path) -> Result<Partial> {
        let text = std::fs::read_to_string(path).map_err(CliError::io(path))?;
        parse_file_text(&text).map_err(|e| match e {
            CliError::Config(msg) => CliError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    /// Parses config-file text on its own, without flags.
    pub fn from_file_text(text: &str) -> Result<Self> {
        parse_file_text(text)?.resolve()
    }

    pub fn material(&self) -> Result<MaterialParams> {
        Ok(MaterialParams::new(self.omega_p, self.beta)?)
    }

    /// One-dimensional quadrature settings.
    pub fn spec(&self) -> QuadratureSpec {
        match self.rel_tol {
            Some(r) => QuadratureSpec::default().with_rel_tol(r),
            None => QuadratureSpec::default(),
        }
    }

    pub fn force4_options(&self) -> Force4Options {
        let d = Force4Options::default();
        Force4Options {
            rel_tol: self.rel_tol.unwrap_or(d.rel_tol),
            regulator: self.regulator,
            resonance_grid: self.resonance_grid,
            ..d
        }
    }

    fn single(name: &str, list: &Option<Vec<f64>>) -> Result<Option<f64>> {
        match list.as_deref() {
            None => Ok(None),
            Some([x]) => Ok(Some(*x)),
            Some(_) => Err(CliError::Config(format!("{name}: a single value is required here"))),
        }
    }

    /// The single physical point named by the configuration.
    pub fn point(&self) -> Result<Point> {
        if self.u_range.is_some() {
            return Err(CliError::Config("u_range: only valid for sweep and fig2".into()));
        }
        let omega_b = match (self.omega_b, Self::single("omega_tilde", &self.omega_tilde)?) {
            (Some(w), _) => w,
            (None, Some(wt)) => self.omega_p / wt,
            (None, None) => return Err(CliError::Config("omega_b: required (or omega_tilde)".into())),
        };
        let v = match (self.v, Self::single("u", &self.u)?) {
            (Some(v), _) => v,
            (None, Some(u)) => u * self.beta,
            (None, None) => return Err(CliError::Config("v: required (or u)".into())),
        };
        let z = match (self.z, Self::single("z_tilde", &self.z_tilde)?) {
            (Some(z), _) => z,
            (None, Some(zt)) if self.beta > 0.0 => zt * self.beta / self.omega_p,
            (None, Some(_)) => return Err(CliError::Config("z_tilde: needs a positive beta; give z".into())),
            (None, None) => return Err(CliError::Config("z: required (or z_tilde)".into())),
        };
        Ok(Point {
            material: self.material()?,
            atom: AtomParams::new(omega_b, self.alpha)?,
            kinematics: Kinematics::new(v, z)?,
        })
    }

    /// Reduced velocities of a sweep, from `u` or `u_range`, else `default`.
    pub fn u_values(&self, default: Range) -> Result<Vec<f64>> {
        if self.v.is_some() {
            return Err(CliError::Config("v: sweeps are parameterized by u or u_range".into()));
        }
        Ok(match (&self.u, self.u_range) {
            (Some(u), _) => u.clone(),
            (None, Some(r)) => r.values(),
            (None, None) => default.values(),
        })
    }

    /// Reduced grid axes of a sweep; physical `omega_b` and `z` are rejected
    /// because the grid is defined in reduced units.
    pub fn reduced_axes(&self, default_wt: &[f64], default_zt: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        if self.omega_b.is_some() {
            return Err(CliError::Config("omega_b: sweeps are parameterized by omega_tilde".into()));
        }
        if self.z.is_some() {
            return Err(CliError::Config("z: sweeps are parameterized by z_tilde".into()));
        }
        Ok((
            self.omega_tilde.clone().unwrap_or_else(|| default_wt.to_vec()),
            self.z_tilde.clone().unwrap_or_else(|| default_zt.to_vec()),
        ))
    }
}

/// Warnings for reduced parameters outside the ranges the model was set up
/// for (`u <= 20`, `omega_tilde in [0.5, 10]`, `z_tilde in [10, 1000]`).
pub fn soft_bound_warnings(p: &DimensionlessPoint) -> Vec<String> {
    let mut w = Vec::new();
    if p.u > 20.0 {
        w.push(format!("u = {} exceeds the modelled range u <= 20", p.u));
    }
    if !(0.5..=10.0).contains(&p.omega_tilde) {
        w.push(format!("omega_tilde = {} lies outside [0.5, 10]", p.omega_tilde));
    }
    if !(10.0..=1000.0).contains(&p.z_tilde) {
        w.push(format!("z_tilde = {} lies outside [10, 1000]", p.z_tilde));
    }
    w
}
