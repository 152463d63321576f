//! First-order correctors: the Poisson-defined scalars (phi, u1, rho1 = theta1)
//! and the linear Maxwell system for (n1, E1, B1) driven by the fluid
//! trajectory,
//!
//!   d_t E1 - curl B1 = -j1,   d_t B1 + curl E1 = 0,   div E1 = n1,
//!   j1 = n1 (u0.M + theta0 V) + n0 u1 + sigma (-grad n1 / 2 + E1 + u0 x B1 + u1 x B0)
//!        + sum of background currents.
//!
//! sigma E1 and -sigma grad n1 / 2 are integrated by Crank-Nicolson per mode;
//! the remaining current is explicit with a midpoint predictor.

use crate::burnett::{OhmConstants, TransportCoefficients};
use crate::error::{check_len, Error, Result};
use crate::fluid::{energy_delta, ohm_current, FluidState, Propagator};
use crate::torus::{fadd, fscale, vadd, vscale, Field, Grid, VField};
use num_complex::Complex64;

/// Tolerance on the mean of the Poisson right-hand sides.
pub const SOLVABILITY_TOL: f64 = 1e-10;

#[derive(Clone, Debug)]
pub struct CorrectorState {
    pub grid: Grid,
    pub phi: Field,
    pub u1: VField,
    /// rho1 = theta1.
    pub rho1: Field,
    pub e1: VField,
    pub b1: VField,
    pub time: f64,
}

impl CorrectorState {
    pub fn zeros(grid: &Grid) -> Self {
        CorrectorState {
            grid: grid.clone(),
            phi: grid.zeros(),
            u1: grid.vzeros(),
            rho1: grid.zeros(),
            e1: grid.vzeros(),
            b1: grid.vzeros(),
            time: 0.0,
        }
    }

    /// Scalars from the fluid state, (E1, B1) as given; B1 is projected and
    /// its mean removed.
    pub fn new(
        fluid: &FluidState,
        coeffs: &TransportCoefficients,
        e1: VField,
        b1: VField,
    ) -> Result<Self> {
        let g = &fluid.grid;
        for f in e1.iter().chain(&b1) {
            check_len(g.len(), f.len())?;
        }
        let (phi, u1, rho1) = solve_corrector_scalars(fluid, coeffs)?;
        let mut b1 = g.leray(&b1);
        for c in b1.iter_mut() {
            c[0] = Complex64::new(0.0, 0.0);
        }
        let mut e1 = e1;
        g.vdealias(&mut e1);
        g.vdealias(&mut b1);
        Ok(CorrectorState {
            grid: g.clone(),
            phi,
            u1,
            rho1,
            e1,
            b1,
            time: fluid.time,
        })
    }

    /// n1 = div E1.
    pub fn n1(&self) -> Field {
        self.grid.div(&self.e1)
    }

    pub fn theta1(&self) -> &Field {
        &self.rho1
    }

    /// Largest defect of div B1 = 0, mean B1 = 0 and u1 = grad phi.
    pub fn constraint_defect(&self) -> f64 {
        let g = &self.grid;
        let db = g.div(&self.b1).iter().fold(0.0f64, |m, c| m.max(c.norm()));
        let mb = (0..3).fold(0.0f64, |m, c| m.max(self.b1[c][0].norm()));
        let gp = g.grad(&self.phi);
        let du = (0..3).fold(0.0f64, |m, c| {
            m.max(gp[c].iter().zip(&self.u1[c]).fold(0.0, |w, (a, b)| w.max((a - b).norm())))
        });
        db.max(mb).max(du)
    }
}

/// phi, u1 = grad phi and rho1 from
///   Lap phi = d_t theta0 = kappa Lap theta0 - u0.grad theta0,
///   Lap rho1 = Lap |u0|^2 / 6 - div(u0.grad u0 - n0 E0 / 2 - j0 x B0 / 2) / 2.
pub fn solve_corrector_scalars(
    fluid: &FluidState,
    coeffs: &TransportCoefficients,
) -> Result<(Field, VField, Field)> {
    let g = &fluid.grid;
    let dth = fadd(
        &fscale(&g.laplacian(&fluid.theta), coeffs.kappa),
        &g.advect(&fluid.u, &fluid.theta),
        -1.0,
    );
    let phi = g.poisson(&dth, SOLVABILITY_TOL)?;
    let u1 = g.grad(&phi);
    let n = fluid.n();
    let mut u2 = g.mul(&fluid.u[0], &fluid.u[0]);
    for c in 1..3 {
        u2 = fadd(&u2, &g.mul(&fluid.u[c], &fluid.u[c]), 1.0);
    }
    let j0 = ohm_current(fluid, coeffs.sigma);
    let jxb = g.cross(&j0, &fluid.b);
    let adv = [0, 1, 2].map(|c| g.advect(&fluid.u, &fluid.u[c]));
    let ne = [0, 1, 2].map(|c| g.mul(&n, &fluid.e[c]));
    let flux = vadd(&adv, &vadd(&ne, &jxb, 1.0), -0.5);
    let rhs = fadd(&fscale(&g.laplacian(&u2), 1.0 / 6.0), &g.div(&flux), -0.5);
    let rho1 = g.poisson(&rhs, SOLVABILITY_TOL)?;
    Ok((phi, u1, rho1))
}

fn add_into(acc: &mut VField, x: &VField, s: f64) {
    for c in 0..3 {
        for (a, b) in acc[c].iter_mut().zip(&x[c]) {
            *a += b * s;
        }
    }
}

/// Fluid-driven part of the corrector system at one time level.
#[derive(Clone, Debug)]
pub struct Background {
    pub fluid: FluidState,
    pub phi: Field,
    pub u1: VField,
    pub rho1: Field,
    /// Background currents by registry key.
    pub gamma_minus: Vec<(String, VField)>,
}

impl Background {
    pub fn new(
        fluid: &FluidState,
        coeffs: &TransportCoefficients,
        gamma_minus: Vec<(String, VField)>,
    ) -> Result<Self> {
        let (phi, u1, rho1) = solve_corrector_scalars(fluid, coeffs)?;
        Ok(Background {
            fluid: fluid.clone(),
            phi,
            u1,
            rho1,
            gamma_minus,
        })
    }

    /// Field-wise average of two levels.
    pub fn midpoint(a: &Background, b: &Background) -> Result<Background> {
        let avg_f = |x: &Field, y: &Field| fscale(&fadd(x, y, 1.0), 0.5);
        let avg_v = |x: &VField, y: &VField| vscale(&vadd(x, y, 1.0), 0.5);
        if a.gamma_minus.len() != b.gamma_minus.len() {
            return Err(Error::Input("background current keys differ between levels".into()));
        }
        let mut gm = Vec::with_capacity(a.gamma_minus.len());
        for ((ka, va), (kb, vb)) in a.gamma_minus.iter().zip(&b.gamma_minus) {
            if ka != kb {
                return Err(Error::Input(format!("background current keys {ka} and {kb}")));
            }
            gm.push((ka.clone(), avg_v(va, vb)));
        }
        let mut fluid = a.fluid.clone();
        fluid.u = avg_v(&a.fluid.u, &b.fluid.u);
        fluid.theta = avg_f(&a.fluid.theta, &b.fluid.theta);
        fluid.e = avg_v(&a.fluid.e, &b.fluid.e);
        fluid.b = avg_v(&a.fluid.b, &b.fluid.b);
        fluid.time = 0.5 * (a.fluid.time + b.fluid.time);
        Ok(Background {
            fluid,
            phi: avg_f(&a.phi, &b.phi),
            u1: avg_v(&a.u1, &b.u1),
            rho1: avg_f(&a.rho1, &b.rho1),
            gamma_minus: gm,
        })
    }
}

/// Sum of the background currents after checking every key against the Ohm
/// constants.
fn gamma_minus_sum(grid: &Grid, ohm: &OhmConstants, values: &[(String, VField)]) -> Result<VField> {
    let mut acc = grid.vzeros();
    for (key, f) in values {
        if !ohm.gamma_minus_keys.iter().any(|k| k == key) {
            return Err(Error::Config(format!(
                "background current '{key}' has no Ohm constants"
            )));
        }
        for c in f {
            check_len(grid.len(), c.len())?;
        }
        add_into(&mut acc, f, 1.0);
    }
    Ok(acc)
}

/// Explicit part of j1: everything except sigma E1 - sigma grad n1 / 2.
pub fn j1_tilde(
    corr: &CorrectorState,
    fluid: &FluidState,
    ohm: &OhmConstants,
    coeffs: &TransportCoefficients,
    gamma_minus_values: &[(String, VField)],
) -> Result<VField> {
    let g = &corr.grid;
    if *g != fluid.grid {
        return Err(Error::Input("corrector and fluid grids differ".into()));
    }
    let n1 = corr.n1();
    let n0 = fluid.n();
    let m = &ohm.m_matrix;
    let mut out = gamma_minus_sum(g, ohm, gamma_minus_values)?;
    // n1 (u0 . M + theta0 V)
    for l in 0..3 {
        let mut w = fscale(&fluid.theta, ohm.v[l]);
        for i in 0..3 {
            w = fadd(&w, &fluid.u[i], m[(i, l)]);
        }
        let t = g.mul(&n1, &w);
        for (a, b) in out[l].iter_mut().zip(&t) {
            *a += b;
        }
        let t = g.mul(&n0, &corr.u1[l]);
        for (a, b) in out[l].iter_mut().zip(&t) {
            *a += b;
        }
    }
    let lor = vadd(&g.cross(&fluid.u, &corr.b1), &g.cross(&corr.u1, &fluid.b), 1.0);
    add_into(&mut out, &lor, coeffs.sigma);
    g.vdealias(&mut out);
    Ok(out)
}

/// Full first-order current j1.
pub fn j1_current(
    corr: &CorrectorState,
    fluid: &FluidState,
    ohm: &OhmConstants,
    coeffs: &TransportCoefficients,
    gamma_minus_values: &[(String, VField)],
) -> Result<VField> {
    let g = &corr.grid;
    let mut out = j1_tilde(corr, fluid, ohm, coeffs, gamma_minus_values)?;
    let mut stiff = vadd(&corr.e1, &g.grad(&corr.n1()), -0.5);
    g.vdealias(&mut stiff);
    add_into(&mut out, &stiff, coeffs.sigma);
    Ok(out)
}

/// Crank-Nicolson stepper of the corrector Maxwell system.
pub struct CorrectorStepper {
    dt: f64,
    kept: Vec<usize>,
    full: Propagator,
    half: Propagator,
}

impl CorrectorStepper {
    pub fn new(grid: &Grid, sigma: f64, dt: f64) -> Result<Self> {
        let limit = crate::fluid::cfl_limit(grid);
        if !(dt > 0.0) || dt > limit {
            return Err(Error::StepSize { dt, limit });
        }
        let kept: Vec<usize> = (0..grid.len()).filter(|&m| grid.is_kept(m)).collect();
        Ok(CorrectorStepper {
            dt,
            full: Propagator::new(grid, sigma, dt, &kept)?,
            half: Propagator::new(grid, sigma, 0.5 * dt, &kept)?,
            kept,
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    fn advance(&self, x: &CorrectorState, jt: &VField, prop: &Propagator) -> (VField, VField) {
        let g = &x.grid;
        let mut e = g.vzeros();
        let mut b = g.vzeros();
        for (slot, &m) in self.kept.iter().enumerate() {
            let mut y = nalgebra::Vector6::<Complex64>::zeros();
            let mut f = nalgebra::Vector6::<Complex64>::zeros();
            for c in 0..3 {
                y[c] = x.e1[c][m];
                y[3 + c] = x.b1[c][m];
                f[c] = -jt[c][m];
            }
            let (a, r) = &prop.eb[slot];
            let z = a * y + r * f;
            for c in 0..3 {
                e[c][m] = z[c];
                b[c][m] = z[3 + c];
            }
        }
        (e, b)
    }

    /// Advance from level `a` to level `b` of the driving trajectory.
    pub fn step(
        &self,
        corr: &CorrectorState,
        a: &Background,
        b: &Background,
        ohm: &OhmConstants,
        coeffs: &TransportCoefficients,
    ) -> Result<CorrectorState> {
        let span = b.fluid.time - a.fluid.time;
        if (span - self.dt).abs() > 1e-9 * self.dt.max(1.0) {
            return Err(Error::Input(format!(
                "background levels are {span} apart, step is {}",
                self.dt
            )));
        }
        let g = &corr.grid;
        let mid = Background::midpoint(a, b)?;
        let j0 = j1_tilde(corr, &a.fluid, ohm, coeffs, &a.gamma_minus)?;
        let (e_half, b_half) = self.advance(corr, &j0, &self.half);
        let mut half = corr.clone();
        half.e1 = e_half;
        half.b1 = b_half;
        half.u1 = mid.u1.clone();
        let jm = j1_tilde(&half, &mid.fluid, ohm, coeffs, &mid.gamma_minus)?;
        let (e, bb) = self.advance(corr, &jm, &self.full);
        let next = CorrectorState {
            grid: g.clone(),
            phi: b.phi.clone(),
            u1: b.u1.clone(),
            rho1: b.rho1.clone(),
            e1: e,
            b1: g.leray(&bb),
            time: corr.time + self.dt,
        };
        let finite = next
            .e1
            .iter()
            .chain(&next.b1)
            .all(|f| f.iter().all(|c| c.re.is_finite() && c.im.is_finite()));
        if !finite {
            return Err(Error::Divergence(next.time));
        }
        Ok(next)
    }
}

/// One step of the corrector system between two background levels.
pub fn step_linear_maxwell(
    corr: &CorrectorState,
    dt: f64,
    a: &Background,
    b: &Background,
    ohm: &OhmConstants,
    coeffs: &TransportCoefficients,
) -> Result<CorrectorState> {
    CorrectorStepper::new(&corr.grid, coeffs.sigma, dt)?.step(corr, a, b, ohm, coeffs)
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct CorrectorDiagnostics {
    pub e1m: f64,
    pub d1m: f64,
    /// L2 norm of d_tt B1 - Lap B1 + sigma d_t B1 - curl j1_tilde; zero
    /// when no stencil is supplied.
    pub damped_wave_residual: f64,
    pub div_b1: f64,
    pub mean_b1: f64,
}

/// Three consecutive levels around `corr` for the damped-wave residual.
pub struct WaveStencil<'a> {
    pub prev: &'a CorrectorState,
    pub next: &'a CorrectorState,
    pub dt: f64,
    /// j1_tilde at the centre level.
    pub jtilde: &'a VField,
}

pub fn corrector_diagnostics(
    corr: &CorrectorState,
    sigma: f64,
    m: u32,
    stencil: Option<WaveStencil<'_>>,
) -> CorrectorDiagnostics {
    let g = &corr.grid;
    let s = m as f64;
    let d = energy_delta(sigma);
    let n1 = corr.n1();
    let dtb = vscale(&g.curl(&corr.e1), -1.0);
    let dtb_b = vadd(&dtb, &corr.b1, 1.0);
    let e1m = g.vhs2(&corr.e1, s)
        + g.hs2(&n1, s)
        + (1.0 - d + d * sigma) * g.vhs2(&corr.b1, s)
        + g.vgrad_hs2(&corr.b1, s)
        + (1.0 - d) * g.vhs2(&dtb, s)
        + d * g.vhs2(&dtb_b, s);
    let d1m = 0.5 * sigma * g.vhs2(&corr.e1, s)
        + 0.75 * sigma * g.hs2(&n1, s)
        + 0.25 * sigma * g.grad_hs2(&n1, s)
        + 0.5 * d * g.vgrad_hs2(&corr.b1, s)
        + 0.5 * (sigma - d) * g.vhs2(&dtb, s)
        + 0.5 * g.vgrad_hs2(&corr.u1, s);
    let damped_wave_residual = stencil.map_or(0.0, |w| {
        let h = w.dt;
        let curl_j = g.curl(w.jtilde);
        let mut r = g.vzeros();
        for c in 0..3 {
            for k in 0..g.len() {
                let bp = w.next.b1[c][k];
                let b0 = corr.b1[c][k];
                let bm = w.prev.b1[c][k];
                let btt = (bp - b0 * 2.0 + bm) / (h * h);
                let bt = (bp - bm) / (2.0 * h);
                r[c][k] = btt + b0 * g.k2(k) + bt * sigma - curl_j[c][k];
            }
        }
        g.vhs2(&r, 0.0).sqrt()
    });
    CorrectorDiagnostics {
        e1m,
        d1m,
        damped_wave_residual,
        div_b1: g.max_abs_phys(&g.div(&corr.b1)),
        mean_b1: (0..3).fold(0.0f64, |w, c| w.max(corr.b1[c][0].norm())),
    }
}
