//! Plain-text `key = value` run configuration.

use crate::{CliError, CliResult};
use std::fmt::Write as _;
use std::path::PathBuf;
use vmb::expansion::{Registry, G2_KEYS};

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub gamma: f64,
    /// Total-degree truncation of the velocity basis.
    pub degree: usize,
    /// Gauss-Hermite points per velocity dimension.
    pub quad_order: usize,
    /// Grid points per axis; the third entry is 1 on T^2.
    pub grid: [usize; 3],
    pub dt: f64,
    pub t_end: f64,
    /// `None` means computed from the collision operator.
    pub mu: Option<f64>,
    pub kappa: Option<f64>,
    pub sigma: Option<f64>,
    pub g1_burnett: bool,
    pub registry: Vec<String>,
    /// Weight exponent l and derivative order N of the kinetic functionals.
    pub l: f64,
    pub n_order: u32,
    /// Amplitude and largest wavenumber of the random initial data.
    pub amplitude: f64,
    pub kmax: i64,
    pub out_dir: PathBuf,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            gamma: 0.0,
            degree: 6,
            quad_order: 10,
            grid: [32, 32, 1],
            dt: 1e-3,
            t_end: 0.1,
            mu: None,
            kappa: None,
            sigma: None,
            g1_burnett: true,
            registry: G2_KEYS.iter().map(|s| s.to_string()).collect(),
            l: 1.0,
            n_order: 4,
            amplitude: 0.05,
            kmax: 2,
            out_dir: PathBuf::from("out"),
            seed: 0,
        }
    }
}

const KEYS: [&str; 17] = [
    "gamma", "D", "quad_order", "grid", "dt", "t_end", "mu", "kappa", "sigma", "g1_burnett",
    "registry", "l", "N", "amplitude", "kmax", "out", "seed",
];

fn err(line: usize, msg: impl Into<String>) -> CliError {
    CliError::Config { line, msg: msg.into() }
}

fn num<T: std::str::FromStr>(line: usize, key: &str, v: &str) -> CliResult<T> {
    v.parse().map_err(|_| err(line, format!("{key}: cannot parse '{v}'")))
}

fn in_range(line: usize, key: &str, ok: bool, want: &str) -> CliResult<()> {
    if ok {
        Ok(())
    } else {
        Err(err(line, format!("{key} out of range: must be {want}")))
    }
}

fn coefficient(line: usize, key: &str, v: &str) -> CliResult<Option<f64>> {
    if v == "computed" {
        return Ok(None);
    }
    let x: f64 = num(line, key, v)?;
    in_range(line, key, x > 0.0 && x.is_finite(), "positive or 'computed'")?;
    Ok(Some(x))
}

fn grid_dims(line: usize, v: &str) -> CliResult<[usize; 3]> {
    let parts: Vec<&str> = v.split('x').map(str::trim).collect();
    if parts.len() < 2 || parts.len() > 3 {
        return Err(err(line, format!("grid: expected NxN or NxNxN, got '{v}'")));
    }
    let mut dims = [1; 3];
    for (i, p) in parts.iter().enumerate() {
        dims[i] = num(line, "grid", p)?;
    }
    let even = |n: usize| n >= 4 && n % 2 == 0;
    in_range(
        line,
        "grid",
        even(dims[0]) && even(dims[1]) && (dims[2] == 1 || even(dims[2])),
        "even sizes >= 4",
    )?;
    Ok(dims)
}

/// Parse a configuration. Blank lines and `#` comments are ignored; omitted
/// keys keep their defaults.
pub fn parse_config(text: &str) -> CliResult<RunConfig> {
    let mut c = RunConfig::default();
    let mut seen: Vec<(String, usize)> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let (key, value) = body
            .split_once('=')
            .ok_or_else(|| err(line, format!("expected 'key = value', got '{body}'")))?;
        let (key, v) = (key.trim(), value.trim());
        if !KEYS.contains(&key) {
            return Err(err(line, format!("unknown key '{key}'")));
        }
        if v.is_empty() {
            return Err(err(line, format!("{key}: missing value")));
        }
        match key {
            "gamma" => {
                c.gamma = num(line, key, v)?;
                in_range(line, key, (0.0..=1.0).contains(&c.gamma), "in [0, 1]")?;
            }
            "D" => {
                c.degree = num(line, key, v)?;
                in_range(line, key, (2..=12).contains(&c.degree), "in 2..=12")?;
            }
            "quad_order" => {
                c.quad_order = num(line, key, v)?;
                in_range(line, key, (2..=40).contains(&c.quad_order), "in 2..=40")?;
            }
            "grid" => c.grid = grid_dims(line, v)?,
            "dt" => {
                c.dt = num(line, key, v)?;
                in_range(line, key, c.dt > 0.0 && c.dt.is_finite(), "positive")?;
            }
            "t_end" => {
                c.t_end = num(line, key, v)?;
                in_range(line, key, c.t_end >= 0.0 && c.t_end.is_finite(), "nonnegative")?;
            }
            "mu" => c.mu = coefficient(line, key, v)?,
            "kappa" => c.kappa = coefficient(line, key, v)?,
            "sigma" => c.sigma = coefficient(line, key, v)?,
            "g1_burnett" => c.g1_burnett = num(line, key, v)?,
            "registry" => {
                c.registry = if v == "none" {
                    Vec::new()
                } else {
                    v.split(',').map(|s| s.trim().to_string()).collect()
                };
                for k in &c.registry {
                    if !G2_KEYS.contains(&k.as_str()) {
                        return Err(err(line, format!("registry: unknown term '{k}'")));
                    }
                }
            }
            "l" => {
                c.l = num(line, key, v)?;
                in_range(line, key, c.l >= 0.0 && c.l.is_finite(), "nonnegative")?;
            }
            "N" => c.n_order = num(line, key, v)?,
            "amplitude" => {
                c.amplitude = num(line, key, v)?;
                in_range(line, key, c.amplitude >= 0.0 && c.amplitude.is_finite(), "nonnegative")?;
            }
            "kmax" => {
                c.kmax = num(line, key, v)?;
                in_range(line, key, c.kmax >= 1, "at least 1")?;
            }
            "out" => c.out_dir = PathBuf::from(v),
            "seed" => c.seed = num(line, key, v)?,
            _ => unreachable!(),
        }
        seen.push((key.to_string(), line));
    }
    if c.quad_order < c.degree + 2 {
        let l = line_of("quad_order", &seen).max(line_of("D", &seen));
        return Err(err(l, format!("quad_order = {} must be >= D + 2 = {}", c.quad_order, c.degree + 2)));
    }
    let limit = vmb::fluid::cfl_limit(&vmb::torus::Grid::with_shape(c.grid).map_err(|e| {
        err(line_of("grid", &seen), e.to_string())
    })?);
    if c.dt > limit {
        let l = line_of("dt", &seen).max(line_of("grid", &seen));
        return Err(err(l, format!("dt = {} exceeds the step limit {limit} of the grid", c.dt)));
    }
    if let Err(e) = c.registry_struct().validate(c.degree) {
        let l = line_of("registry", &seen).max(line_of("D", &seen));
        return Err(err(l, e.to_string()));
    }
    Ok(c)
}

/// Line of the last assignment to `key`, 0 when it kept its default.
fn line_of(key: &str, seen: &[(String, usize)]) -> usize {
    seen.iter().rev().find(|(k, _)| k == key).map_or(0, |(_, l)| *l)
}

fn fmt_coeff(x: Option<f64>) -> String {
    x.map_or("computed".into(), |v| format!("{v:?}"))
}

impl RunConfig {
    pub fn registry_struct(&self) -> Registry {
        Registry { g1_burnett: self.g1_burnett, g2: self.registry.clone() }
    }

    /// Every key in canonical order; floats print in round-trip form.
    pub fn serialize(&self) -> String {
        let mut s = String::new();
        let grid = if self.grid[2] == 1 {
            format!("{}x{}", self.grid[0], self.grid[1])
        } else {
            format!("{}x{}x{}", self.grid[0], self.grid[1], self.grid[2])
        };
        let registry = if self.registry.is_empty() { "none".into() } else { self.registry.join(", ") };
        let _ = writeln!(s, "gamma = {:?}", self.gamma);
        let _ = writeln!(s, "D = {}", self.degree);
        let _ = writeln!(s, "quad_order = {}", self.quad_order);
        let _ = writeln!(s, "grid = {grid}");
        let _ = writeln!(s, "dt = {:?}", self.dt);
        let _ = writeln!(s, "t_end = {:?}", self.t_end);
        let _ = writeln!(s, "mu = {}", fmt_coeff(self.mu));
        let _ = writeln!(s, "kappa = {}", fmt_coeff(self.kappa));
        let _ = writeln!(s, "sigma = {}", fmt_coeff(self.sigma));
        let _ = writeln!(s, "g1_burnett = {}", self.g1_burnett);
        let _ = writeln!(s, "registry = {registry}");
        let _ = writeln!(s, "l = {:?}", self.l);
        let _ = writeln!(s, "N = {}", self.n_order);
        let _ = writeln!(s, "amplitude = {:?}", self.amplitude);
        let _ = writeln!(s, "kmax = {}", self.kmax);
        let _ = writeln!(s, "out = {}", self.out_dir.display());
        let _ = writeln!(s, "seed = {}", self.seed);
        s
    }
}
