//! Pseudo-spectral solver for the incompressible Navier-Stokes-Fourier-Maxwell
//! system with Ohm's law:
//!
//!   d_t u + u.grad u + grad p = mu Lap u + (n E + j x B) / 2,   div u = 0
//!   d_t theta + u.grad theta = kappa Lap theta
//!   d_t E - curl B = -j,   d_t B + curl E = 0,   div E = n,   div B = 0
//!   j = n u + sigma (-grad n / 2 + E + u x B)
//!
//! The linear Stokes-Maxwell-Ohm block is treated by Crank-Nicolson per mode,
//! the remaining products by an explicit midpoint predictor.

use crate::error::{Error, Result};
use crate::torus::{fadd, vadd, vscale, Field, Grid, VField};
use nalgebra::Matrix6;
use num_complex::Complex64;
use rand::Rng;

#[derive(Clone, Debug)]
pub struct FluidState {
    pub grid: Grid,
    pub u: VField,
    pub theta: Field,
    pub e: VField,
    pub b: VField,
    pub time: f64,
    /// L2 norm of d_t n + div j over the last step.
    pub charge_residual: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FluidParams {
    pub mu: f64,
    pub kappa: f64,
    pub sigma: f64,
    pub dt: f64,
    pub dealias: bool,
    pub t_end: f64,
}

impl FluidParams {
    pub fn validate(&self, grid: &Grid) -> Result<()> {
        for (name, x) in [("mu", self.mu), ("kappa", self.kappa), ("sigma", self.sigma)] {
            if !(x > 0.0 && x.is_finite()) {
                return Err(Error::Config(format!("{name} = {x} must be positive")));
            }
        }
        let limit = cfl_limit(grid);
        if !(self.dt > 0.0) || self.dt > limit {
            return Err(Error::StepSize { dt: self.dt, limit });
        }
        Ok(())
    }
}

/// Half the grid spacing: the step bound for unit-speed waves.
pub fn cfl_limit(grid: &Grid) -> f64 {
    let n = grid.shape.iter().copied().max().unwrap_or(1) as f64;
    0.5 * 2.0 * std::f64::consts::PI / n
}

impl FluidState {
    pub fn zeros(grid: &Grid) -> Self {
        FluidState {
            grid: grid.clone(),
            u: grid.vzeros(),
            theta: grid.zeros(),
            e: grid.vzeros(),
            b: grid.vzeros(),
            time: 0.0,
            charge_residual: 0.0,
        }
    }

    /// State from spectral fields; u and B are projected and everything is
    /// dealiased.
    pub fn new(grid: &Grid, u: VField, theta: Field, e: VField, b: VField) -> Result<Self> {
        for f in u.iter().chain(e.iter()).chain(b.iter()).chain(std::iter::once(&theta)) {
            crate::error::check_len(grid.len(), f.len())?;
        }
        let mut s = FluidState {
            grid: grid.clone(),
            u: leray_project(grid, &u),
            theta,
            e,
            b: leray_project(grid, &b),
            time: 0.0,
            charge_residual: 0.0,
        };
        for c in 0..3 {
            s.b[c][0] = Complex64::new(0.0, 0.0);
        }
        s.dealias();
        Ok(s)
    }

    fn dealias(&mut self) {
        let g = &self.grid;
        g.vdealias(&mut self.u);
        g.dealias(&mut self.theta);
        g.vdealias(&mut self.e);
        g.vdealias(&mut self.b);
    }

    /// Charge density n = div E.
    pub fn n(&self) -> Field {
        self.grid.div(&self.e)
    }

    /// Errors when a structural invariant is broken beyond tol.
    pub fn check_invariants(&self, tol: f64) -> Result<()> {
        let g = &self.grid;
        let mut worst: f64 = 0.0;
        for f in self.u.iter().chain(&self.e).chain(&self.b).chain(std::iter::once(&self.theta)) {
            worst = worst.max(g.conj_defect(f));
        }
        if worst > tol {
            return Err(Error::State(format!("conjugate symmetry defect {worst:e}")));
        }
        let du = max_abs(&g.div(&self.u));
        let db = max_abs(&g.div(&self.b));
        let mb = (0..3).fold(0.0f64, |m, c| m.max(self.b[c][0].norm()));
        if du > tol || db > tol || mb > tol {
            return Err(Error::State(format!(
                "constraint defects: div u {du:e}, div B {db:e}, mean B {mb:e}"
            )));
        }
        Ok(())
    }

    /// Taylor-Green vortex u = a (sin x1 cos x2, -cos x1 sin x2, 0).
    pub fn taylor_green(grid: &Grid, amplitude: f64) -> Self {
        let u = [
            grid.from_fn(|x| amplitude * x[0].sin() * x[1].cos()),
            grid.from_fn(|x| -amplitude * x[0].cos() * x[1].sin()),
            grid.zeros(),
        ];
        let mut s = FluidState::zeros(grid);
        s.u = u;
        s
    }

    /// Smooth random data: every field has modes |k_i| <= kmax with
    /// amplitudes amplitude * exp(-|k|^2 / 4).
    pub fn random<R: Rng>(grid: &Grid, amplitude: f64, kmax: i64, rng: &mut R) -> Self {
        let mut draw = |zero_mean: bool| -> Field {
            let mut f = grid.zeros();
            for (m, c) in f.iter_mut().enumerate() {
                let k = grid.k(m);
                if k.iter().any(|x| x.abs() > kmax as f64) || (zero_mean && m == 0) {
                    continue;
                }
                let a = amplitude * (-0.25 * grid.k2(m)).exp();
                *c = Complex64::new(a * rng.random_range(-1.0..1.0), a * rng.random_range(-1.0..1.0));
            }
            let phys = grid.inverse(&f);
            grid.forward(&phys).expect("grid length")
        };
        let u = [draw(true), draw(true), draw(true)];
        let theta = draw(true);
        let e = [draw(true), draw(true), draw(true)];
        let b = [draw(true), draw(true), draw(true)];
        FluidState::new(grid, u, theta, e, b).expect("grid-shaped fields")
    }
}

fn max_abs(f: &Field) -> f64 {
    f.iter().fold(0.0, |m, c| m.max(c.norm()))
}

pub fn leray_project(grid: &Grid, field: &VField) -> VField {
    grid.leray(field)
}

/// j = n u + sigma (-grad n / 2 + E + u x B), spectral and dealiased.
pub fn ohm_current(state: &FluidState, sigma: f64) -> VField {
    let g = &state.grid;
    let n = state.n();
    let nu = [0, 1, 2].map(|c| g.mul(&n, &state.u[c]));
    let uxb = g.cross(&state.u, &state.b);
    let gn = g.grad(&n);
    let mut inner = vadd(&state.e, &gn, -0.5);
    g.vdealias(&mut inner);
    vadd(&nu, &vadd(&inner, &uxb, 1.0), sigma)
}

struct Nonlinear {
    u: VField,
    theta: Field,
    e: VField,
}

fn nonlinear(state: &FluidState, sigma: f64) -> Nonlinear {
    let g = &state.grid;
    let n = state.n();
    let j = ohm_current(state, sigma);
    let jxb = g.cross(&j, &state.b);
    let ne = [0, 1, 2].map(|c| g.mul(&n, &state.e[c]));
    let adv = [0, 1, 2].map(|c| g.advect(&state.u, &state.u[c]));
    let force = vadd(&vscale(&vadd(&ne, &jxb, 1.0), 0.5), &adv, -1.0);
    let theta = g.advect(&state.u, &state.theta).iter().map(|x| -x).collect();
    let nu = [0, 1, 2].map(|c| g.mul(&n, &state.u[c]));
    let uxb = g.cross(&state.u, &state.b);
    Nonlinear {
        u: g.leray(&force),
        theta,
        e: vscale(&vadd(&nu, &uxb, sigma), -1.0),
    }
}

pub(crate) type M6 = Matrix6<Complex64>;

/// Linear (E, B) generator for mode k:
/// d_t E = i k x B - sigma E - (sigma/2) k (k.E),  d_t B = -i k x E.
pub(crate) fn maxwell_generator(k: [f64; 3], sigma: f64) -> M6 {
    let mut l = M6::zeros();
    let i = Complex64::new(0.0, 1.0);
    let cross = [
        [0.0, -k[2], k[1]],
        [k[2], 0.0, -k[0]],
        [-k[1], k[0], 0.0],
    ];
    for r in 0..3 {
        for c in 0..3 {
            let diag = if r == c { sigma } else { 0.0 };
            l[(r, c)] = Complex64::new(-diag - 0.5 * sigma * k[r] * k[c], 0.0);
            l[(r, 3 + c)] = i * cross[r][c];
            l[(3 + r, c)] = -i * cross[r][c];
        }
    }
    l
}

/// Crank-Nicolson propagators of the linear block for one step length.
pub(crate) struct Propagator {
    pub(crate) h: f64,
    /// (I - h L/2)^{-1} (I + h L/2) and h (I - h L/2)^{-1} per kept mode.
    pub(crate) eb: Vec<(M6, M6)>,
}

impl Propagator {
    pub(crate) fn new(grid: &Grid, sigma: f64, h: f64, kept: &[usize]) -> Result<Self> {
        let id = M6::identity();
        let mut eb = Vec::with_capacity(kept.len());
        for &m in kept {
            let l = maxwell_generator(grid.k(m), sigma) * Complex64::new(0.5 * h, 0.0);
            let inv = (id - l)
                .try_inverse()
                .ok_or_else(|| Error::Assembly(format!("singular Crank-Nicolson block at mode {m}")))?;
            eb.push((inv * (id + l), inv * Complex64::new(h, 0.0)));
        }
        Ok(Propagator { h, eb })
    }
}

/// Reusable time stepper; holds the per-mode propagators for one dt.
pub struct Stepper {
    params: FluidParams,
    kept: Vec<usize>,
    full: Propagator,
    half: Propagator,
}

impl Stepper {
    pub fn new(grid: &Grid, params: FluidParams) -> Result<Self> {
        params.validate(grid)?;
        let kept: Vec<usize> = (0..grid.len())
            .filter(|&m| !params.dealias || grid.is_kept(m))
            .collect();
        Ok(Stepper {
            params,
            full: Propagator::new(grid, params.sigma, params.dt, &kept)?,
            half: Propagator::new(grid, params.sigma, 0.5 * params.dt, &kept)?,
            kept,
        })
    }

    pub fn params(&self) -> &FluidParams {
        &self.params
    }

    fn advance(&self, x: &FluidState, nl: &Nonlinear, prop: &Propagator) -> FluidState {
        let g = &x.grid;
        let mut out = FluidState::zeros(g);
        out.time = x.time + prop.h;
        let h = prop.h;
        for (slot, &m) in self.kept.iter().enumerate() {
            let k2 = g.k2(m);
            let am = 0.5 * h * self.params.mu * k2;
            let ak = 0.5 * h * self.params.kappa * k2;
            for c in 0..3 {
                out.u[c][m] = ((1.0 - am) * x.u[c][m] + nl.u[c][m] * h) / (1.0 + am);
            }
            out.theta[m] = ((1.0 - ak) * x.theta[m] + nl.theta[m] * h) / (1.0 + ak);
            let mut y = nalgebra::Vector6::<Complex64>::zeros();
            let mut f = nalgebra::Vector6::<Complex64>::zeros();
            for c in 0..3 {
                y[c] = x.e[c][m];
                y[3 + c] = x.b[c][m];
                f[c] = nl.e[c][m];
            }
            let (a, r) = &prop.eb[slot];
            let z = a * y + r * f;
            for c in 0..3 {
                out.e[c][m] = z[c];
                out.b[c][m] = z[3 + c];
            }
        }
        out
    }

    pub fn step(&self, state: &FluidState) -> Result<FluidState> {
        let sigma = self.params.sigma;
        let n0 = nonlinear(state, sigma);
        let mid = self.advance(state, &n0, &self.half);
        let nm = nonlinear(&mid, sigma);
        let mut next = self.advance(state, &nm, &self.full);
        let g = &state.grid;
        next.u = g.leray(&next.u);
        next.b = g.leray(&next.b);
        let finite = next
            .u
            .iter()
            .chain(&next.e)
            .chain(&next.b)
            .chain(std::iter::once(&next.theta))
            .all(|f| f.iter().all(|c| c.re.is_finite() && c.im.is_finite()));
        if !finite {
            return Err(Error::Divergence(next.time));
        }
        // d_t n + div j with the current the scheme used: the linear Ohm
        // part at the two-level average, the products at the midpoint
        let e_avg = vscale(&vadd(&state.e, &next.e, 1.0), 0.5);
        let mut jl = vadd(&e_avg, &g.grad(&g.div(&e_avg)), -0.5);
        g.vdealias(&mut jl);
        let j = vadd(&vscale(&jl, sigma), &nm.e, -1.0);
        let dn = fadd(&next.n(), &state.n(), -1.0);
        let res: Field = dn
            .iter()
            .zip(g.div(&j))
            .map(|(a, b)| a / self.params.dt + b)
            .collect();
        next.charge_residual = g.hs2(&res, 0.0).sqrt();
        Ok(next)
    }
}

/// One step of the limiting system.
pub fn step_nsfm(state: &FluidState, params: &FluidParams) -> Result<FluidState> {
    Stepper::new(&state.grid, *params)?.step(state)
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct FluidDiagnostics {
    pub e0s: f64,
    pub d0s: f64,
    pub charge_residual: f64,
    /// max |div B| on the grid
    pub div_b: f64,
    /// max |mean of B|
    pub mean_b: f64,
}

/// delta = min(1, sigma) / 2.
pub fn energy_delta(sigma: f64) -> f64 {
    0.5 * sigma.min(1.0)
}

/// Energy and dissipation functionals of order s together with constraint
/// defects.
pub fn fluid_diagnostics(state: &FluidState, params: &FluidParams, s: u32) -> FluidDiagnostics {
    let g = &state.grid;
    let sf = s as f64;
    let sigma = params.sigma;
    let d = energy_delta(sigma);
    let n = state.n();
    let dtb = vscale(&g.curl(&state.e), -1.0);
    let dtb_b = vadd(&dtb, &state.b, 1.0);
    let e0s = g.vhs2(&state.u, sf)
        + g.hs2(&state.theta, sf)
        + 1.5 * g.vhs2(&state.e, sf)
        + 1.25 * g.hs2(&n, sf)
        + (1.5 - d + d * sigma) * g.vhs2(&state.b, sf)
        + (1.0 - d) * g.vhs2(&dtb, sf)
        + g.vgrad_hs2(&state.b, sf)
        + d * g.vhs2(&dtb_b, sf);
    let mut ohm_sum = 0.0;
    for alpha in g.multi_indices(s) {
        let dn = g.deriv(&n, alpha);
        let de = [0, 1, 2].map(|c| g.deriv(&state.e[c], alpha));
        let du = [0, 1, 2].map(|c| g.deriv(&state.u[c], alpha));
        let mut t = vadd(&de, &g.grad(&dn), -0.5);
        g.vdealias(&mut t);
        let t = vadd(&t, &g.cross(&du, &state.b), 1.0);
        ohm_sum += g.vhs2(&t, 0.0);
    }
    let d0s = params.mu * g.vgrad_hs2(&state.u, sf)
        + 0.5 * params.kappa * g.hs2(&state.theta, sf)
        + sigma * g.vhs2(&state.e, sf)
        + 1.5 * sigma * g.hs2(&n, sf)
        + 0.5 * sigma * g.grad_hs2(&n, sf)
        + (sigma - d) * g.vhs2(&dtb, sf)
        + d * g.vgrad_hs2(&state.b, sf)
        + 0.5 * sigma * ohm_sum;
    let div_b = g.max_abs_phys(&g.div(&state.b));
    let mean_b = (0..3).fold(0.0f64, |m, c| m.max(state.b[c][0].norm()));
    FluidDiagnostics {
        e0s,
        d0s,
        charge_residual: state.charge_residual,
        div_b,
        mean_b,
    }
}

/// Time derivatives (d_t u, d_t theta, d_t E, d_t B) from the equations.
pub fn time_derivative(state: &FluidState, params: &FluidParams) -> (VField, Field, VField, VField) {
    let g = &state.grid;
    let nl = nonlinear(state, params.sigma);
    let mut du = nl.u;
    let mut dth = nl.theta;
    let mut de = nl.e;
    let mut db = g.vzeros();
    let curl_b = g.curl(&state.b);
    let curl_e = g.curl(&state.e);
    let n = state.n();
    let gn = g.grad(&n);
    for m in 0..g.len() {
        let k2 = g.k2(m);
        for c in 0..3 {
            du[c][m] -= params.mu * k2 * state.u[c][m];
            de[c][m] += curl_b[c][m] - params.sigma * (state.e[c][m] - 0.5 * gn[c][m]);
            db[c][m] = -curl_e[c][m];
        }
        dth[m] -= params.kappa * k2 * state.theta[m];
    }
    (du, dth, de, db)
}
