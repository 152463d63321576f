//! Hilbert expansion g = g0 + eps g1 + eps^2 g2 as Hermite-coefficient fields.
//!
//! Every field is stored as a pair of n x Np matrices (one column of Hermite
//! coefficients per grid point, physical values in x) for the symmetric part
//! s = (g+ + g-)/2 and the antisymmetric part a = (g+ - g-)/2. In these
//! variables the two-species operators decouple:
//!
//!   L g -> (2 L s, (L + Lfrak) a),   Gamma(f, h) -> (2 Q(f_s, h_s), 2 Q(f_a, h_s)),
//!
//! and T = diag(1, -1) swaps s and a.
//!
//! The scaled kinetic equation is
//!   eps d_t g + v.grad g + (eps E + v x B).grad_v T g - E.v (T1 + eps T g)
//!     + L g / eps - Gamma(g, g) = 0,
//! and `coefficients` returns its eps^k coefficients for the ansatz.

use crate::burnett::{BurnettBundle, Inverter, OhmConstants, TransportCoefficients, Which};
use crate::collision::{OperatorSet, QTensor};
use crate::corrector::{j1_current, CorrectorDiagnostics, CorrectorState};
use crate::error::{check_len, Error, Result};
use crate::fluid::{time_derivative, FluidDiagnostics, FluidParams, FluidState};
use crate::torus::{Field, Grid, VField};
use crate::velocity::{multi_indices, weight_w, HermiteBasis};
use nalgebra::{DMatrix, DMatrixView, DVector};
use num_complex::Complex64;
use std::collections::HashMap;

/// Order-eps source families of g2, one per physical term.
pub const G2_KEYS: [&str; 7] = [
    "transport_g1",
    "E0_grad_g0",
    "B0_lorentz_g1",
    "B1_lorentz_g0",
    "E0_v_g0",
    "E1_v",
    "collision_g0_g1",
];

/// Smallest truncation degree that holds g1 (the C shape is quartic).
pub const MIN_DEGREE_G1: usize = 4;
/// Smallest truncation degree for any g2 term.
pub const MIN_DEGREE_G2: usize = 6;

/// Step of the directional time differences used inside the remainder terms.
pub const DIRECTIONAL_STEP: f64 = 1e-5;

pub type Phys = Vec<f64>;
pub type VPhys = [Vec<f64>; 3];

/// Which expansion terms are assembled.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Registry {
    /// Burnett-function terms of g1 (A_hat, B_hat and Phi_tilde shapes).
    pub g1_burnett: bool,
    /// Enabled g2 source families.
    pub g2: Vec<String>,
}

impl Registry {
    pub fn full() -> Self {
        Registry {
            g1_burnett: true,
            g2: G2_KEYS.iter().map(|s| s.to_string()).collect(),
        }
    }

    /// g0 and g1 only.
    pub fn without_g2() -> Self {
        Registry {
            g1_burnett: true,
            g2: Vec::new(),
        }
    }

    pub fn without(&self, key: &str) -> Self {
        let mut r = self.clone();
        r.g2.retain(|k| k != key);
        r
    }

    pub fn only(key: &str) -> Self {
        Registry {
            g1_burnett: true,
            g2: vec![key.to_string()],
        }
    }

    pub fn has(&self, key: &str) -> bool {
        self.g2.iter().any(|k| k == key)
    }

    pub fn validate(&self, degree: usize) -> Result<()> {
        if degree < MIN_DEGREE_G1 {
            return Err(Error::Config(format!(
                "term 'g1' needs D >= {MIN_DEGREE_G1}, got D = {degree}"
            )));
        }
        for (i, k) in self.g2.iter().enumerate() {
            if !G2_KEYS.contains(&k.as_str()) {
                return Err(Error::Config(format!("unknown expansion term '{k}'")));
            }
            if self.g2[..i].contains(k) {
                return Err(Error::Config(format!("expansion term '{k}' listed twice")));
            }
            if degree < MIN_DEGREE_G2 {
                return Err(Error::Config(format!(
                    "term '{k}' needs D >= {MIN_DEGREE_G2}, got D = {degree}"
                )));
            }
        }
        Ok(())
    }
}

/// Symmetric and antisymmetric parts of a two-species coefficient field.
#[derive(Clone, Debug, PartialEq)]
pub struct Pair {
    pub s: DMatrix<f64>,
    pub a: DMatrix<f64>,
}

impl Pair {
    pub fn zeros(n: usize, np: usize) -> Self {
        Pair {
            s: DMatrix::zeros(n, np),
            a: DMatrix::zeros(n, np),
        }
    }

    pub fn from_species(plus: &DMatrix<f64>, minus: &DMatrix<f64>) -> Result<Self> {
        check_len(plus.len(), minus.len())?;
        Ok(Pair {
            s: (plus + minus) * 0.5,
            a: (plus - minus) * 0.5,
        })
    }

    pub fn plus(&self) -> DMatrix<f64> {
        &self.s + &self.a
    }

    pub fn minus(&self) -> DMatrix<f64> {
        &self.s - &self.a
    }

    pub fn nrows(&self) -> usize {
        self.s.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.s.ncols()
    }

    /// T = diag(1, -1) applied to the pair.
    pub fn swapped(&self) -> Pair {
        Pair {
            s: self.a.clone(),
            a: self.s.clone(),
        }
    }

    pub fn axpy(&mut self, c: f64, x: &Pair) {
        self.s += &x.s * c;
        self.a += &x.a * c;
    }

    pub fn scaled(&self, c: f64) -> Pair {
        Pair {
            s: &self.s * c,
            a: &self.a * c,
        }
    }

    /// Galerkin L2(x, v) norm over both species.
    pub fn norm(&self, grid: &Grid) -> f64 {
        let w = grid.volume() / self.ncols().max(1) as f64;
        (2.0 * w * (self.s.norm_squared() + self.a.norm_squared())).sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.s.amax().max(self.a.amax())
    }
}

/// Physical values of a spectral field.
pub fn phys(grid: &Grid, f: &Field) -> Phys {
    grid.inverse(f)
}

pub fn vphys(grid: &Grid, f: &VField) -> VPhys {
    [0, 1, 2].map(|c| grid.inverse(&f[c]))
}

fn vspec(grid: &Grid, f: &VPhys) -> VField {
    [0, 1, 2].map(|c| grid.forward(&f[c]).expect("grid length"))
}

fn zeros_v(np: usize) -> VPhys {
    [vec![0.0; np], vec![0.0; np], vec![0.0; np]]
}

/// m += shape (x) w.
fn add_shape(m: &mut DMatrix<f64>, shape: &DVector<f64>, w: &[f64], c: f64) {
    let y = DVector::from_column_slice(w);
    m.ger(c, shape, &y, 1.0);
}

fn scale_cols(m: &DMatrix<f64>, w: &[f64]) -> DMatrix<f64> {
    let mut out = m.clone();
    for (j, mut col) in out.column_iter_mut().enumerate() {
        col *= w[j];
    }
    out
}

/// Columnwise spatial gradient of a coefficient field over the active axes.
fn grad_rows(grid: &Grid, m: &DMatrix<f64>) -> Vec<DMatrix<f64>> {
    let dim = grid.dim();
    let mut out = vec![DMatrix::zeros(m.nrows(), m.ncols()); dim];
    let mut row = vec![0.0; m.ncols()];
    for r in 0..m.nrows() {
        for (p, x) in row.iter_mut().enumerate() {
            *x = m[(r, p)];
        }
        let f = grid.forward(&row).expect("grid length");
        for (ax, o) in out.iter_mut().enumerate() {
            let d = grid.inverse(&grid.dx(&f, ax));
            for (p, x) in d.iter().enumerate() {
                o[(r, p)] = *x;
            }
        }
    }
    out
}

/// Per-row Fourier coefficients (real and imaginary parts).
fn spectral_rows(grid: &Grid, m: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    let mut re = DMatrix::zeros(m.nrows(), m.ncols());
    let mut im = DMatrix::zeros(m.nrows(), m.ncols());
    let mut row = vec![0.0; m.ncols()];
    for r in 0..m.nrows() {
        for (p, x) in row.iter_mut().enumerate() {
            *x = m[(r, p)];
        }
        let f = grid.forward(&row).expect("grid length");
        for (k, c) in f.iter().enumerate() {
            re[(r, k)] = c.re;
            im[(r, k)] = c.im;
        }
    }
    (re, im)
}

/// Coefficients of g0 on the shapes (1, v1, v2, v3, psi) and the charge.
#[derive(Clone, Debug)]
struct G0Shape {
    c: [Phys; 5],
    n0: Phys,
}

/// Physical values of everything the expansion terms depend on.
#[derive(Clone, Debug)]
struct Fields {
    u: VPhys,
    theta: Phys,
    n0: Phys,
    e0: VPhys,
    b0: VPhys,
    /// grad_u[i][j] = d_i u_j
    grad_u: [VPhys; 3],
    grad_theta: VPhys,
    grad_n0: VPhys,
    rho1: Phys,
    u1: VPhys,
    n1: Phys,
    e1: VPhys,
    b1: VPhys,
}

impl Fields {
    /// Corrector quantities are zero when `corr` is None.
    fn new(fluid: &FluidState, corr: Option<&CorrectorState>) -> Result<Self> {
        let g = &fluid.grid;
        let np = g.len();
        let n0s = fluid.n();
        let grad_u = [0, 1, 2].map(|i| [0, 1, 2].map(|j| phys(g, &g.dx(&fluid.u[j], i))));
        let (rho1, u1, n1, e1, b1) = match corr {
            Some(c) => {
                if c.grid != *g {
                    return Err(Error::Input("corrector and fluid grids differ".into()));
                }
                (
                    phys(g, &c.rho1),
                    vphys(g, &c.u1),
                    phys(g, &c.n1()),
                    vphys(g, &c.e1),
                    vphys(g, &c.b1),
                )
            }
            None => (vec![0.0; np], zeros_v(np), vec![0.0; np], zeros_v(np), zeros_v(np)),
        };
        Ok(Fields {
            u: vphys(g, &fluid.u),
            theta: phys(g, &fluid.theta),
            n0: phys(g, &n0s),
            e0: vphys(g, &fluid.e),
            b0: vphys(g, &fluid.b),
            grad_u,
            grad_theta: vphys(g, &g.grad(&fluid.theta)),
            grad_n0: vphys(g, &g.grad(&n0s)),
            rho1,
            u1,
            n1,
            e1,
            b1,
        })
    }

    fn g0_shape(&self) -> G0Shape {
        let mth: Phys = self.theta.iter().map(|x| -x).collect();
        G0Shape {
            c: [
                mth,
                self.u[0].clone(),
                self.u[1].clone(),
                self.u[2].clone(),
                self.theta.clone(),
            ],
            n0: self.n0.clone(),
        }
    }
}

/// Operators and constants shared by every expansion on one velocity basis.
pub struct ExpansionOps {
    pub ops: OperatorSet,
    pub bundle: BurnettBundle,
    pub coeffs: TransportCoefficients,
    pub ohm: OhmConstants,
    params: FluidParams,
    l2: DMatrix<f64>,
    la: DMatrix<f64>,
    linv: DMatrix<f64>,
    lainv: DMatrix<f64>,
    /// (v x B).grad_v = sum_j B_j lorentz[j].
    lorentz: [DMatrix<f64>; 3],
    /// h -> Q(shape_q, h) and h -> Q(h, shape_q) for the g0 shapes.
    q_left: [DMatrix<f64>; 5],
    q_right: [DMatrix<f64>; 5],
    raise: Raise,
}

/// Degree-(D+1) components created by multiplying with v_i.
struct Raise {
    entries: Vec<(usize, [Option<(usize, f64)>; 3])>,
    n_over: usize,
}

impl Raise {
    fn new(basis: &HermiteBasis) -> Self {
        let d = basis.degree;
        let top: Vec<[usize; 3]> = multi_indices(d + 1)
            .into_iter()
            .filter(|a| a[0] + a[1] + a[2] == d + 1)
            .collect();
        let pos: HashMap<[usize; 3], usize> = top.iter().enumerate().map(|(i, a)| (*a, i)).collect();
        let mut entries = Vec::new();
        for (src, a) in basis.index.iter().enumerate() {
            if a[0] + a[1] + a[2] != d {
                continue;
            }
            let dst = [0, 1, 2].map(|i| {
                let mut b = *a;
                b[i] += 1;
                pos.get(&b).map(|&j| (j, ((a[i] + 1) as f64).sqrt()))
            });
            entries.push((src, dst));
        }
        Raise {
            entries,
            n_over: top.len(),
        }
    }

    fn zeros(&self, np: usize) -> DMatrix<f64> {
        DMatrix::zeros(self.n_over, np)
    }

    /// over += c w (v_axis x) restricted to degree D + 1.
    fn add(&self, over: &mut DMatrix<f64>, x: &DMatrix<f64>, axis: usize, w: Option<&[f64]>, c: f64) {
        for (src, dst) in &self.entries {
            if let Some((j, f)) = dst[axis] {
                for p in 0..x.ncols() {
                    let wp = w.map_or(1.0, |w| w[p]);
                    over[(j, p)] += c * f * wp * x[(*src, p)];
                }
            }
        }
    }
}

impl ExpansionOps {
    pub fn new(
        ops: &OperatorSet,
        bundle: &BurnettBundle,
        coeffs: &TransportCoefficients,
        ohm: &OhmConstants,
    ) -> Result<Self> {
        let n = ops.n();
        check_len(n, bundle.shapes.one.len())?;
        let q = ops.q_tensor()?;
        let il = Inverter::new(ops, Which::L)?;
        let ia = Inverter::new(ops, Which::LplusLfrak)?;
        let mut linv = DMatrix::zeros(n, n);
        let mut lainv = DMatrix::zeros(n, n);
        for c in 0..n {
            let mut e = DVector::zeros(n);
            e[c] = 1.0;
            linv.set_column(c, &il.apply(&e));
            lainv.set_column(c, &ia.apply(&e));
        }
        let b = &ops.basis;
        let lorentz = [0, 1, 2].map(|j| {
            let mut m = DMatrix::zeros(n, n);
            for i in 0..3 {
                for k in 0..3 {
                    let eps = levi_civita(k, i, j);
                    if eps != 0.0 {
                        m += (&b.mult_ops[i] * &b.deriv_ops[k]) * eps;
                    }
                }
            }
            m
        });
        let sh = &bundle.shapes;
        let shapes = [&sh.one, &sh.v[0], &sh.v[1], &sh.v[2], &sh.psi];
        let mut q_left = Vec::with_capacity(5);
        let mut q_right = Vec::with_capacity(5);
        for s in shapes {
            q_left.push(q.first_fixed(s)?);
            q_right.push(q.second_fixed(s)?);
        }
        Ok(ExpansionOps {
            ops: ops.clone(),
            bundle: bundle.clone(),
            coeffs: *coeffs,
            ohm: ohm.clone(),
            params: FluidParams {
                mu: coeffs.mu,
                kappa: coeffs.kappa,
                sigma: coeffs.sigma,
                dt: 1e-3,
                dealias: true,
                t_end: 0.0,
            },
            l2: &ops.l_mat * 2.0,
            la: ops.lplus_lfrak_mat.clone(),
            linv,
            lainv,
            lorentz,
            q_left: q_left.try_into().expect("five shapes"),
            q_right: q_right.try_into().expect("five shapes"),
            raise: Raise::new(b),
        })
    }

    pub fn n(&self) -> usize {
        self.ops.n()
    }

    pub fn degree(&self) -> usize {
        self.ops.basis.degree
    }

    pub fn basis(&self) -> &HermiteBasis {
        &self.ops.basis
    }

    fn tensor(&self) -> &QTensor {
        self.ops.q_tensor().expect("checked at construction")
    }

    fn lin(&self, g: &Pair) -> Pair {
        Pair {
            s: &self.l2 * &g.s,
            a: &self.la * &g.a,
        }
    }

    /// Sum_i v_i d_i m with its degree-(D+1) overflow.
    fn transport(&self, grid: &Grid, m: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
        let b = self.basis();
        let mut out = DMatrix::zeros(m.nrows(), m.ncols());
        let mut over = self.raise.zeros(m.ncols());
        for (ax, d) in grad_rows(grid, m).iter().enumerate() {
            out += &b.mult_ops[ax] * d;
            self.raise.add(&mut over, d, ax, None, 1.0);
        }
        (out, over)
    }

    /// Sum_i e_i v_i m with overflow.
    fn vmul(&self, e: &VPhys, m: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
        let b = self.basis();
        let mut out = DMatrix::zeros(m.nrows(), m.ncols());
        let mut over = self.raise.zeros(m.ncols());
        for i in 0..3 {
            if e[i].iter().all(|x| *x == 0.0) {
                continue;
            }
            out += scale_cols(&(&b.mult_ops[i] * m), &e[i]);
            self.raise.add(&mut over, m, i, Some(&e[i]), 1.0);
        }
        (out, over)
    }

    /// Sum_i e_i d_{v_i} m.
    fn vgrad(&self, e: &VPhys, m: &DMatrix<f64>) -> DMatrix<f64> {
        let b = self.basis();
        let mut out = DMatrix::zeros(m.nrows(), m.ncols());
        for i in 0..3 {
            if e[i].iter().all(|x| *x == 0.0) {
                continue;
            }
            out += scale_cols(&(&b.deriv_ops[i] * m), &e[i]);
        }
        out
    }

    /// (v x B).grad_v m.
    fn lorentz(&self, bf: &VPhys, m: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(m.nrows(), m.ncols());
        for j in 0..3 {
            if bf[j].iter().all(|x| *x == 0.0) {
                continue;
            }
            out += scale_cols(&(&self.lorentz[j] * m), &bf[j]);
        }
        out
    }

    /// Q(f, h) columnwise with the full tensor.
    fn q_general(&self, f: &DMatrix<f64>, h: &DMatrix<f64>) -> DMatrix<f64> {
        let t = self.tensor();
        let n = t.n;
        let np = f.ncols();
        let mut out = DMatrix::zeros(n, np);
        const CHUNK: usize = 64;
        let mut p0 = 0;
        while p0 < np {
            let len = CHUNK.min(np - p0);
            let x = &t.data * f.columns(p0, len);
            for c in 0..len {
                let m = DMatrixView::from_slice(&x.as_slice()[c * n * n..(c + 1) * n * n], n, n);
                out.set_column(p0 + c, &(m * h.column(p0 + c)));
            }
            p0 += len;
        }
        out
    }

    /// Q(s0, h) for s0 given by its shape coefficients.
    fn q_g0_left(&self, g0: &G0Shape, h: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(h.nrows(), h.ncols());
        for (q, c) in g0.c.iter().enumerate() {
            out += scale_cols(&(&self.q_left[q] * h), c);
        }
        out
    }

    fn q_g0_right(&self, g0: &G0Shape, h: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(h.nrows(), h.ncols());
        for (q, c) in g0.c.iter().enumerate() {
            out += scale_cols(&(&self.q_right[q] * h), c);
        }
        out
    }

    /// Gamma(f, h); the g0 shape coefficients select the cheap paths.
    fn gamma(&self, f: &Pair, fc: Option<&G0Shape>, h: &Pair, hc: Option<&G0Shape>) -> Pair {
        if let Some(c) = fc {
            Pair {
                s: self.q_g0_left(c, &h.s) * 2.0,
                a: scale_cols(&(&self.q_left[0] * &h.s), &c.n0),
            }
        } else if let Some(c) = hc {
            Pair {
                s: self.q_g0_right(c, &f.s) * 2.0,
                a: self.q_g0_right(c, &f.a) * 2.0,
            }
        } else {
            Pair {
                s: self.q_general(&f.s, &h.s) * 2.0,
                a: self.q_general(&f.a, &h.s) * 2.0,
            }
        }
    }
}

fn levi_civita(i: usize, j: usize, k: usize) -> f64 {
    match (i, j, k) {
        (0, 1, 2) | (1, 2, 0) | (2, 0, 1) => 1.0,
        (0, 2, 1) | (2, 1, 0) | (1, 0, 2) => -1.0,
        _ => 0.0,
    }
}

fn g0_pair(ctx: &ExpansionOps, g0: &G0Shape) -> Pair {
    let sh = &ctx.bundle.shapes;
    let np = g0.n0.len();
    let mut out = Pair::zeros(ctx.n(), np);
    let shapes = [&sh.one, &sh.v[0], &sh.v[1], &sh.v[2], &sh.psi];
    for (s, c) in shapes.iter().zip(&g0.c) {
        add_shape(&mut out.s, s, c, 1.0);
    }
    add_shape(&mut out.a, &sh.one, &g0.n0, 0.5);
    out
}

fn g1_pair(ctx: &ExpansionOps, f: &Fields, burnett: bool) -> Pair {
    let sh = &ctx.bundle.shapes;
    let bu = &ctx.bundle;
    let np = f.theta.len();
    let mut g = Pair::zeros(ctx.n(), np);
    let s = &mut g.s;
    add_shape(s, &sh.one, &f.rho1, 1.0);
    add_shape(s, &sh.psi, &f.rho1, 1.0);
    for i in 0..3 {
        add_shape(s, &sh.v[i], &f.u1[i], 1.0);
        for j in 0..3 {
            let uu: Phys = (0..np).map(|p| f.u[i][p] * f.u[j][p]).collect();
            add_shape(s, &sh.a[i][j], &uu, 0.5);
        }
        let tu: Phys = (0..np).map(|p| f.theta[p] * f.u[i][p]).collect();
        add_shape(s, &sh.b[i], &tu, 1.0);
    }
    let t2: Phys = f.theta.iter().map(|t| t * t).collect();
    add_shape(s, &sh.c, &t2, 0.5);
    if burnett {
        for i in 0..3 {
            for j in 0..3 {
                add_shape(s, &bu.a_hat[i][j], &f.grad_u[i][j], -0.5);
            }
            add_shape(s, &bu.b_hat[i], &f.grad_theta[i], -0.5);
        }
    }
    let a = &mut g.a;
    add_shape(a, &sh.one, &f.n1, 0.5);
    for i in 0..3 {
        let nu: Phys = (0..np).map(|p| f.n0[p] * f.u[i][p]).collect();
        add_shape(a, &sh.v[i], &nu, 0.5);
    }
    let nt: Phys = (0..np).map(|p| f.n0[p] * f.theta[p]).collect();
    add_shape(a, &sh.psi, &nt, 0.5);
    if burnett {
        let w = ohm_force(f);
        for i in 0..3 {
            add_shape(a, &bu.phi_tilde[i], &w[i], 1.0);
        }
    }
    g
}

/// W = -grad n0 / 2 + E0 + u0 x B0.
fn ohm_force(f: &Fields) -> VPhys {
    let np = f.theta.len();
    let mut w = zeros_v(np);
    for p in 0..np {
        let u = [f.u[0][p], f.u[1][p], f.u[2][p]];
        let b = [f.b0[0][p], f.b0[1][p], f.b0[2][p]];
        let uxb = [
            u[1] * b[2] - u[2] * b[1],
            u[2] * b[0] - u[0] * b[2],
            u[0] * b[1] - u[1] * b[0],
        ];
        for i in 0..3 {
            w[i][p] = -0.5 * f.grad_n0[i][p] + f.e0[i][p] + uxb[i];
        }
    }
    w
}

/// Order-eps source of one g2 family, so that L g2 = -P_perp sum of sources.
fn g2_source(
    ctx: &ExpansionOps,
    grid: &Grid,
    key: &str,
    f: &Fields,
    g0c: &G0Shape,
    g0: &Pair,
    g1: &Pair,
) -> Result<(Pair, f64)> {
    let n = ctx.n();
    let np = grid.len();
    let mut out = Pair::zeros(n, np);
    let mut over = 0.0;
    match key {
        "transport_g1" => {
            let (s, os) = ctx.transport(grid, &g1.s);
            let (a, oa) = ctx.transport(grid, &g1.a);
            over = overflow_norm(grid, &os, &oa);
            out = Pair { s, a };
        }
        "E0_grad_g0" => out.a = ctx.vgrad(&f.e0, &g0.s),
        "B0_lorentz_g1" => {
            out.s = ctx.lorentz(&f.b0, &g1.a);
            out.a = ctx.lorentz(&f.b0, &g1.s);
        }
        "B1_lorentz_g0" => out.a = ctx.lorentz(&f.b1, &g0.s),
        "E0_v_g0" => {
            let (s, os) = ctx.vmul(&f.e0, &g0.a);
            let (a, oa) = ctx.vmul(&f.e0, &g0.s);
            over = overflow_norm(grid, &os, &oa);
            out = Pair { s: -s, a: -a };
        }
        "E1_v" => {
            for i in 0..3 {
                add_shape(&mut out.a, &ctx.bundle.shapes.v[i], &f.e1[i], -1.0);
            }
        }
        "collision_g0_g1" => {
            let x = ctx.gamma(g0, Some(g0c), g1, None);
            let y = ctx.gamma(g1, None, g0, Some(g0c));
            out.axpy(-1.0, &x);
            out.axpy(-1.0, &y);
        }
        other => return Err(Error::Config(format!("unknown expansion term '{other}'"))),
    }
    Ok((out, over))
}

fn overflow_norm(grid: &Grid, s: &DMatrix<f64>, a: &DMatrix<f64>) -> f64 {
    let w = grid.volume() / s.ncols().max(1) as f64;
    (2.0 * w * (s.norm_squared() + a.norm_squared())).sqrt()
}

/// The expansion terms at one time level.
#[derive(Clone, Debug)]
pub struct ExpansionField {
    pub fluid: FluidState,
    pub corr: CorrectorState,
    pub registry: Registry,
    pub g0: Pair,
    pub g1: Pair,
    pub g2: Pair,
    /// Contribution of each enabled family to g2.
    pub g2_terms: Vec<(String, Pair)>,
    /// Degree-(D+1) norm dropped while forming the g2 sources.
    pub source_overflow: f64,
    g0c: G0Shape,
    fields: Fields,
}

impl ExpansionField {
    pub fn grid(&self) -> &Grid {
        &self.fluid.grid
    }

    pub fn time(&self) -> f64 {
        self.fluid.time
    }

    /// E0 and E1 in physical values.
    pub fn electric(&self) -> (VPhys, VPhys) {
        (self.fields.e0.clone(), self.fields.e1.clone())
    }

    pub fn magnetic(&self) -> (VPhys, VPhys) {
        (self.fields.b0.clone(), self.fields.b1.clone())
    }
}

pub fn build_expansion(
    ctx: &ExpansionOps,
    fluid: &FluidState,
    corr: &CorrectorState,
    registry: &Registry,
) -> Result<ExpansionField> {
    registry.validate(ctx.degree())?;
    if (fluid.time - corr.time).abs() > 1e-9 * fluid.time.abs().max(1.0) {
        return Err(Error::Input(format!(
            "fluid time {} and corrector time {} differ",
            fluid.time, corr.time
        )));
    }
    let grid = &fluid.grid;
    let fields = Fields::new(fluid, Some(corr))?;
    let g0c = fields.g0_shape();
    let g0 = g0_pair(ctx, &g0c);
    let g1 = g1_pair(ctx, &fields, registry.g1_burnett);
    let mut g2 = Pair::zeros(ctx.n(), grid.len());
    let mut terms = Vec::new();
    let mut over2 = 0.0;
    for key in &registry.g2 {
        let (src, over) = g2_source(ctx, grid, key, &fields, &g0c, &g0, &g1)?;
        over2 += over * over;
        let t = Pair {
            s: &ctx.linv * &src.s * -0.5,
            a: &ctx.lainv * &src.a * -1.0,
        };
        g2.axpy(1.0, &t);
        terms.push((key.clone(), t));
    }
    Ok(ExpansionField {
        fluid: fluid.clone(),
        corr: corr.clone(),
        registry: registry.clone(),
        g0,
        g1,
        g2,
        g2_terms: terms,
        source_overflow: over2.sqrt(),
        g0c,
        fields,
    })
}

/// Background currents -2 <S_a, Phi_tilde> of the listed families with all
/// corrector fields set to zero, spectral and dealiased.
pub fn gamma_minus_currents(
    ctx: &ExpansionOps,
    fluid: &FluidState,
    keys: &[String],
) -> Result<Vec<(String, VField)>> {
    let grid = &fluid.grid;
    let f = Fields::new(fluid, None)?;
    let g0c = f.g0_shape();
    let g0 = g0_pair(ctx, &g0c);
    let g1 = g1_pair(ctx, &f, true);
    let mut out = Vec::with_capacity(keys.len());
    for key in keys {
        let (src, _) = g2_source(ctx, grid, key, &f, &g0c, &g0, &g1)?;
        let mut j = zeros_v(grid.len());
        for i in 0..3 {
            let row = ctx.bundle.phi_tilde[i].transpose() * &src.a;
            for (p, x) in row.iter().enumerate() {
                j[i][p] = -2.0 * x;
            }
        }
        let mut js = vspec(grid, &j);
        grid.vdealias(&mut js);
        out.push((key.clone(), js));
    }
    Ok(out)
}

/// One term of the ansatz g = g0 + eps g1 + eps^2 g2 with E, B likewise.
#[derive(Clone, Copy, Default)]
pub struct Ansatz<'a> {
    pub g: [Option<&'a Pair>; 3],
    pub dg: [Option<&'a Pair>; 3],
    pub e: [Option<&'a VPhys>; 2],
    pub b: [Option<&'a VPhys>; 2],
    g0c: Option<&'a G0Shape>,
}

impl<'a> Ansatz<'a> {
    /// The expansion's own terms, without time derivatives.
    pub fn of(exp: &'a ExpansionField) -> Self {
        Ansatz {
            g: [Some(&exp.g0), Some(&exp.g1), Some(&exp.g2)],
            dg: [None; 3],
            e: [Some(&exp.fields.e0), Some(&exp.fields.e1)],
            b: [Some(&exp.fields.b0), Some(&exp.fields.b1)],
            g0c: Some(&exp.g0c),
        }
    }

    /// Forget the g0 shape shortcut (needed once g0 is replaced).
    pub fn generic(mut self) -> Self {
        self.g0c = None;
        self
    }
}

/// Coefficient of eps^k in the kinetic equation and its degree overflow.
pub struct Coefficient {
    pub order: i32,
    pub residual: Pair,
    pub overflow: Pair,
}

/// eps^k coefficients of the kinetic operator for k = -1 ..= kmax.
pub fn coefficients(ctx: &ExpansionOps, grid: &Grid, an: &Ansatz<'_>, kmax: i32) -> Vec<Coefficient> {
    let n = ctx.n();
    let np = grid.len();
    let sh = &ctx.bundle.shapes;
    let at = |i: i32| -> Option<&Pair> {
        if (0..3).contains(&i) {
            an.g[i as usize]
        } else {
            None
        }
    };
    fn field<'b>(arr: &[Option<&'b VPhys>; 2], j: i32) -> Option<&'b VPhys> {
        if (0..2).contains(&j) {
            arr[j as usize]
        } else {
            None
        }
    }
    let shape_of = |i: i32| if i == 0 { an.g0c } else { None };
    let mut out = Vec::new();
    for k in -1..=kmax {
        let mut res = Pair::zeros(n, np);
        let mut over = Pair::zeros(ctx.raise.n_over, np);
        if (1..=3).contains(&k) {
            if let Some(d) = an.dg[(k - 1) as usize] {
                res.axpy(1.0, d);
            }
        }
        if let Some(g) = at(k) {
            let (s, os) = ctx.transport(grid, &g.s);
            let (a, oa) = ctx.transport(grid, &g.a);
            res.s += s;
            res.a += a;
            over.s += os;
            over.a += oa;
        }
        for j in 0..2 {
            // eps E_j . grad_v T g_i and -eps E_j . v T g_i with j + i = k - 1
            if let (Some(e), Some(g)) = (field(&an.e, j), at(k - 1 - j)) {
                res.s += ctx.vgrad(e, &g.a);
                res.a += ctx.vgrad(e, &g.s);
                let (s, os) = ctx.vmul(e, &g.a);
                let (a, oa) = ctx.vmul(e, &g.s);
                res.s -= s;
                res.a -= a;
                over.s -= os;
                over.a -= oa;
            }
            if let (Some(b), Some(g)) = (field(&an.b, j), at(k - j)) {
                res.s += ctx.lorentz(b, &g.a);
                res.a += ctx.lorentz(b, &g.s);
            }
        }
        if let Some(e) = field(&an.e, k) {
            for i in 0..3 {
                add_shape(&mut res.a, &sh.v[i], &e[i], -1.0);
            }
        }
        if let Some(g) = at(k + 1) {
            res.axpy(1.0, &ctx.lin(g));
        }
        for i in 0..3 {
            if let (Some(f), Some(h)) = (at(i), at(k - i)) {
                let gm = ctx.gamma(f, shape_of(i), h, shape_of(k - i));
                res.axpy(-1.0, &gm);
            }
        }
        out.push(Coefficient {
            order: k,
            residual: res,
            overflow: over,
        });
    }
    out
}

/// Analytic d_t g0 from the limiting system.
fn dt_g0(ctx: &ExpansionOps, fluid: &FluidState) -> Pair {
    let g = &fluid.grid;
    let (du, dth, de, _) = time_derivative(fluid, &ctx.params);
    let t = phys(g, &dth);
    let c = G0Shape {
        c: [
            t.iter().map(|x| -x).collect(),
            phys(g, &du[0]),
            phys(g, &du[1]),
            phys(g, &du[2]),
            t,
        ],
        n0: phys(g, &g.div(&de)),
    };
    g0_pair(ctx, &c)
}

/// Order-by-order identity residuals of the hierarchy.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct HierarchyReport {
    pub order_minus1: f64,
    pub order_0_kinetic: f64,
    pub order_0_maxwell: f64,
    pub order_1_kinetic: f64,
    pub order_1_maxwell: f64,
    pub constraints: f64,
    /// Degree-(D+1) norm dropped in the order 0 and 1 kinetic residuals.
    pub overflow: f64,
}

fn l2_phys(grid: &Grid, f: &[f64]) -> f64 {
    let w = grid.volume() / f.len().max(1) as f64;
    (w * f.iter().map(|x| x * x).sum::<f64>()).sqrt()
}

fn l2_vphys(grid: &Grid, f: &VPhys) -> f64 {
    (0..3).map(|c| l2_phys(grid, &f[c]).powi(2)).sum::<f64>().sqrt()
}

/// 2 <a v> pointwise.
fn current_of(a: &DMatrix<f64>) -> VPhys {
    [0, 1, 2].map(|i| (2.0 * a.row(1 + i)).iter().copied().collect())
}

pub fn check_hierarchy(ctx: &ExpansionOps, exp: &ExpansionField) -> Result<HierarchyReport> {
    let grid = exp.grid();
    let fluid = &exp.fluid;
    let dg0 = dt_g0(ctx, fluid);
    let mut an = Ansatz::of(exp);
    an.dg[0] = Some(&dg0);
    let c = coefficients(ctx, grid, &an, 1);
    let (du, dth, de, _) = time_derivative(fluid, &ctx.params);

    // order 0 Maxwell: d_t E0 - curl B0 + 2 <a1 v>, div E0 - 2 <a0>
    let curl_b0 = vphys(grid, &grid.curl(&fluid.b));
    let de0 = vphys(grid, &de);
    let j1 = current_of(&exp.g1.a);
    let mut amp0 = zeros_v(grid.len());
    for i in 0..3 {
        for p in 0..grid.len() {
            amp0[i][p] = de0[i][p] - curl_b0[i][p] + j1[i][p];
        }
    }
    let gauss0: Phys = (0..grid.len())
        .map(|p| exp.fields.n0[p] - 2.0 * exp.g0.a[(0, p)])
        .collect();
    let order_0_maxwell = (l2_vphys(grid, &amp0).powi(2) + l2_phys(grid, &gauss0).powi(2)).sqrt();

    // order 1 Maxwell: d_t E1 = curl B1 - j1, so the residual is 2 <a2 v> - j1
    let gm = gamma_minus_currents(ctx, fluid, &ctx.ohm.gamma_minus_keys)?;
    let j1c = vphys(grid, &j1_current(&exp.corr, fluid, &ctx.ohm, &ctx.coeffs, &gm)?);
    let j2 = current_of(&exp.g2.a);
    let mut amp1 = zeros_v(grid.len());
    for i in 0..3 {
        for p in 0..grid.len() {
            amp1[i][p] = j2[i][p] - j1c[i][p];
        }
    }
    let gauss1: Phys = (0..grid.len())
        .map(|p| exp.fields.n1[p] - 2.0 * exp.g1.a[(0, p)])
        .collect();
    let gauss2: Phys = (0..grid.len()).map(|p| 2.0 * exp.g2.a[(0, p)]).collect();
    let order_1_maxwell = (l2_vphys(grid, &amp1).powi(2)
        + l2_phys(grid, &gauss1).powi(2)
        + l2_phys(grid, &gauss2).powi(2))
    .sqrt();

    // div u0 = 0, rho0 + theta0 = 0, div u1 = d_t theta0 and the gradient law
    // grad(rho1 + theta1) = -d_t u0 - u0.grad u0 + mu Lap u0 + grad|u0|^2 / 3
    //                       + (n0 E0 + j0 x B0) / 2
    let f = &exp.fields;
    let np = grid.len();
    let div_u = phys(grid, &grid.div(&fluid.u));
    let rho_theta: Phys = (0..np).map(|p| exp.g0.s[(0, p)] + f.theta[p]).collect();
    let dth_p = phys(grid, &dth);
    let div_u1 = phys(grid, &grid.div(&exp.corr.u1));
    let mass1: Phys = (0..np).map(|p| div_u1[p] - dth_p[p]).collect();
    let grad_r = vphys(grid, &grid.grad(&crate::torus::fscale(&exp.corr.rho1, 2.0)));
    let mut u2 = grid.mul(&fluid.u[0], &fluid.u[0]);
    for c in 1..3 {
        u2 = crate::torus::fadd(&u2, &grid.mul(&fluid.u[c], &fluid.u[c]), 1.0);
    }
    let grad_u2 = vphys(grid, &grid.grad(&u2));
    let j0 = crate::fluid::ohm_current(fluid, ctx.coeffs.sigma);
    let jxb = vphys(grid, &grid.cross(&j0, &fluid.b));
    let n0 = fluid.n();
    let du_p = vphys(grid, &du);
    let mut mom = zeros_v(np);
    for c in 0..3 {
        let adv = phys(grid, &grid.advect(&fluid.u, &fluid.u[c]));
        let lap = phys(grid, &grid.laplacian(&fluid.u[c]));
        let ne = phys(grid, &grid.mul(&n0, &fluid.e[c]));
        for p in 0..np {
            let rhs = -du_p[c][p] - adv[p] + ctx.coeffs.mu * lap[p] + grad_u2[c][p] / 3.0
                + 0.5 * (ne[p] + jxb[c][p]);
            mom[c][p] = grad_r[c][p] - rhs;
        }
    }
    let constraints = (l2_phys(grid, &div_u).powi(2)
        + l2_phys(grid, &rho_theta).powi(2)
        + l2_phys(grid, &mass1).powi(2)
        + l2_vphys(grid, &mom).powi(2))
    .sqrt();

    let overflow = (c[1].overflow.norm(grid).powi(2) + c[2].overflow.norm(grid).powi(2)).sqrt();
    Ok(HierarchyReport {
        order_minus1: c[0].residual.norm(grid),
        order_0_kinetic: c[1].residual.norm(grid),
        order_0_maxwell,
        order_1_kinetic: c[2].residual.norm(grid),
        order_1_maxwell,
        constraints,
        overflow,
    })
}

/// Two-species remainder with its fields.
#[derive(Clone, Debug)]
pub struct RemainderSnapshot {
    pub g: Pair,
    pub e: VField,
    pub b: VField,
    pub epsilon: f64,
}

impl RemainderSnapshot {
    pub fn zeros(grid: &Grid, n: usize, epsilon: f64) -> Self {
        RemainderSnapshot {
            g: Pair::zeros(n, grid.len()),
            e: grid.vzeros(),
            b: grid.vzeros(),
            epsilon,
        }
    }

    /// Checks div B = 0 and div E = <G . T1> within 1e-8.
    pub fn new(grid: &Grid, g: Pair, e: VField, b: VField, epsilon: f64) -> Result<Self> {
        check_len(grid.len(), g.ncols())?;
        for f in e.iter().chain(&b) {
            check_len(grid.len(), f.len())?;
        }
        if !(epsilon > 0.0) {
            return Err(Error::Input(format!("epsilon = {epsilon} must be positive")));
        }
        let r = RemainderSnapshot { g, e, b, epsilon };
        let (db, de) = r.constraint_defects(grid);
        if db > 1e-8 || de > 1e-8 {
            return Err(Error::Input(format!(
                "remainder constraints violated: div B {db:e}, Gauss {de:e}"
            )));
        }
        Ok(r)
    }

    /// (max |div B|, max |div E - <G . T1>|).
    pub fn constraint_defects(&self, grid: &Grid) -> (f64, f64) {
        let db = grid.max_abs_phys(&grid.div(&self.b));
        let de = phys(grid, &grid.div(&self.e));
        let gauss = (0..grid.len()).fold(0.0f64, |m, p| m.max((de[p] - 2.0 * self.g.a[(0, p)]).abs()));
        (db, gauss)
    }
}

/// Residual norms of the scaled system at one eps.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct SweepPoint {
    pub epsilon: f64,
    pub kinetic_residual: f64,
    pub ampere_residual: f64,
    pub faraday_residual: f64,
    pub gauss_residual: f64,
}

fn avg_state(a: &FluidState, b: &FluidState) -> FluidState {
    let av = |x: &VField, y: &VField| crate::torus::vscale(&crate::torus::vadd(x, y, 1.0), 0.5);
    let mut m = a.clone();
    m.u = av(&a.u, &b.u);
    m.theta = crate::torus::fscale(&crate::torus::fadd(&a.theta, &b.theta, 1.0), 0.5);
    m.e = av(&a.e, &b.e);
    m.b = av(&a.b, &b.b);
    m.time = 0.5 * (a.time + b.time);
    m
}

/// Residuals of the scaled system for the ansatz between two snapshots.
///
/// The ansatz is evaluated at the midpoint state and d_t by the difference of
/// the snapshots. A remainder pair, when given, enters as eps (G_R, E_R, B_R).
pub fn vmb_residual(
    ctx: &ExpansionOps,
    a: &ExpansionField,
    b: &ExpansionField,
    rem: Option<(&RemainderSnapshot, &RemainderSnapshot)>,
    epsilons: &[f64],
) -> Result<Vec<SweepPoint>> {
    let grid = a.grid();
    if b.grid() != grid {
        return Err(Error::Input("snapshots live on different grids".into()));
    }
    if a.registry != b.registry {
        return Err(Error::Input("snapshots built with different registries".into()));
    }
    let dt = b.time() - a.time();
    if !(dt > 0.0) {
        return Err(Error::Input(format!(
            "snapshot times {} and {} are not increasing",
            a.time(),
            b.time()
        )));
    }
    for e in [a, b] {
        if (e.corr.time - e.fluid.time).abs() > 1e-9 * e.fluid.time.abs().max(1.0) {
            return Err(Error::Input("fluid and corrector snapshot times differ".into()));
        }
    }
    let fm = avg_state(&a.fluid, &b.fluid);
    let e1m = crate::torus::vscale(&crate::torus::vadd(&a.corr.e1, &b.corr.e1, 1.0), 0.5);
    let b1m = crate::torus::vscale(&crate::torus::vadd(&a.corr.b1, &b.corr.b1, 1.0), 0.5);
    let mut cm = CorrectorState::new(&fm, &ctx.coeffs, e1m, b1m)?;
    cm.time = fm.time;
    let mid = build_expansion(ctx, &fm, &cm, &a.registry)?;
    let diff = |x: &Pair, y: &Pair| {
        let mut d = y.clone();
        d.axpy(-1.0, x);
        d.scaled(1.0 / dt)
    };
    let dg0 = diff(&a.g0, &b.g0);
    let mut dg1 = diff(&a.g1, &b.g1);
    let dg2 = diff(&a.g2, &b.g2);
    let mut g1 = mid.g1.clone();
    let (mut e1, mut b1) = (mid.fields.e1.clone(), mid.fields.b1.clone());
    let (e1a, b1a) = (a.fields.e1.clone(), a.fields.b1.clone());
    let (e1b, b1b) = (b.fields.e1.clone(), b.fields.b1.clone());
    let mut e1s = [e1a, e1b];
    let mut b1s = [b1a, b1b];
    if let Some((ra, rb)) = rem {
        let mut gr = ra.g.clone();
        gr.axpy(1.0, &rb.g);
        g1.axpy(0.5, &gr);
        dg1.axpy(1.0, &diff(&ra.g, &rb.g));
        for (k, r) in [ra, rb].iter().enumerate() {
            let er = vphys(grid, &r.e);
            let br = vphys(grid, &r.b);
            for c in 0..3 {
                for p in 0..grid.len() {
                    e1s[k][c][p] += er[c][p];
                    b1s[k][c][p] += br[c][p];
                }
            }
        }
        for c in 0..3 {
            for p in 0..grid.len() {
                e1[c][p] = 0.5 * (e1s[0][c][p] + e1s[1][c][p]);
                b1[c][p] = 0.5 * (b1s[0][c][p] + b1s[1][c][p]);
            }
        }
    }
    let mut an = Ansatz::of(&mid);
    an.g[1] = Some(&g1);
    an.e[1] = Some(&e1);
    an.b[1] = Some(&b1);
    an.dg = [Some(&dg0), Some(&dg1), Some(&dg2)];
    let coeff = coefficients(ctx, grid, &an, 4);

    // Maxwell coefficients from physical values.
    let np = grid.len();
    let e0s = [&a.fields.e0, &b.fields.e0];
    let b0s = [&a.fields.b0, &b.fields.b0];
    let spec = |f: &VPhys| vspec(grid, f);
    let curl = |f: &VPhys| vphys(grid, &grid.curl(&spec(f)));
    let div = |f: &VPhys| phys(grid, &grid.div(&spec(f)));
    let gs = [&mid.g0, &g1, &mid.g2];
    // Ampere: order k: d_t E_k - curl B_k + 2 <a_{k+1} v>
    let mut amp: Vec<VPhys> = Vec::new();
    let mut far: Vec<VPhys> = Vec::new();
    let mut gau: Vec<Phys> = Vec::new();
    let mut divb: Vec<Phys> = Vec::new();
    let emid = [&mid.fields.e0, &e1];
    let bmid = [&mid.fields.b0, &b1];
    for k in 0..2 {
        let (ea, eb) = if k == 0 { (e0s[0], e0s[1]) } else { (&e1s[0], &e1s[1]) };
        let (ba, bb) = if k == 0 { (b0s[0], b0s[1]) } else { (&b1s[0], &b1s[1]) };
        let cb = curl(bmid[k]);
        let ce = curl(emid[k]);
        let j = current_of(&gs[k + 1].a);
        let mut am = zeros_v(np);
        let mut fa = zeros_v(np);
        for c in 0..3 {
            for p in 0..np {
                am[c][p] = (eb[c][p] - ea[c][p]) / dt - cb[c][p] + j[c][p];
                fa[c][p] = (bb[c][p] - ba[c][p]) / dt + ce[c][p];
            }
        }
        amp.push(am);
        far.push(fa);
    }
    let j0 = current_of(&mid.g0.a);
    // Gauss: div E_k - 2 <a_k>, k = 0, 1, 2, plus div B_k
    for k in 0..3 {
        let de = if k < 2 { div(emid[k]) } else { vec![0.0; np] };
        let db = if k < 2 { div(bmid[k]) } else { vec![0.0; np] };
        gau.push((0..np).map(|p| de[p] - 2.0 * gs[k].a[(0, p)]).collect());
        divb.push(db);
    }
    let mut out = Vec::with_capacity(epsilons.len());
    for &eps in epsilons {
        let mut r = Pair::zeros(ctx.n(), np);
        for c in &coeff {
            r.axpy(eps.powi(c.order), &c.residual);
        }
        let mut am = zeros_v(np);
        let mut fa = zeros_v(np);
        for c in 0..3 {
            for p in 0..np {
                am[c][p] = j0[c][p] / eps + amp[0][c][p] + eps * amp[1][c][p];
                fa[c][p] = far[0][c][p] + eps * far[1][c][p];
            }
        }
        let ga: Phys = (0..np)
            .map(|p| gau[0][p] + eps * gau[1][p] + eps * eps * gau[2][p])
            .collect();
        let gb: Phys = (0..np).map(|p| divb[0][p] + eps * divb[1][p]).collect();
        out.push(SweepPoint {
            epsilon: eps,
            kinetic_residual: r.norm(grid),
            ampere_residual: l2_vphys(grid, &am),
            faraday_residual: l2_vphys(grid, &fa),
            gauss_residual: l2_phys(grid, &ga).hypot(l2_phys(grid, &gb)),
        });
    }
    Ok(out)
}

/// Least-squares slope of log y against log x.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len().min(y.len()) as f64;
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    for (a, b) in lx.iter().zip(&ly) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
    }
    sxy / sxx
}

/// d_t of g0, g1 and g2 by central differences along the exact tangent of
/// the fluid and corrector dynamics.
pub fn expansion_time_derivative(ctx: &ExpansionOps, exp: &ExpansionField, h: f64) -> Result<[Pair; 3]> {
    let fluid = &exp.fluid;
    let grid = exp.grid();
    let (du, dth, de, db) = time_derivative(fluid, &ctx.params);
    let gm = gamma_minus_currents(ctx, fluid, &ctx.ohm.gamma_minus_keys)?;
    let j1 = j1_current(&exp.corr, fluid, &ctx.ohm, &ctx.coeffs, &gm)?;
    let de1 = crate::torus::vadd(&grid.curl(&exp.corr.b1), &j1, -1.0);
    let db1 = crate::torus::vscale(&grid.curl(&exp.corr.e1), -1.0);
    let shifted = |s: f64| -> Result<ExpansionField> {
        let mut f = fluid.clone();
        f.u = crate::torus::vadd(&f.u, &du, s);
        f.theta = crate::torus::fadd(&f.theta, &dth, s);
        f.e = crate::torus::vadd(&f.e, &de, s);
        f.b = crate::torus::vadd(&f.b, &db, s);
        let e1 = crate::torus::vadd(&exp.corr.e1, &de1, s);
        let b1 = crate::torus::vadd(&exp.corr.b1, &db1, s);
        let mut c = CorrectorState::new(&f, &ctx.coeffs, e1, b1)?;
        c.time = f.time;
        build_expansion(ctx, &f, &c, &exp.registry)
    };
    let p = shifted(h)?;
    let m = shifted(-h)?;
    let d = |x: &Pair, y: &Pair| {
        let mut r = x.clone();
        r.axpy(-1.0, y);
        r.scaled(0.5 / h)
    };
    Ok([d(&p.g0, &m.g0), d(&p.g1, &m.g1), d(&p.g2, &m.g2)])
}

/// Source terms of the remainder equation, exposed term by term:
/// H_R = Gamma0 G_R / eps + H1 + H2 + R.
#[derive(Clone, Debug)]
pub struct RemainderSources {
    pub gamma0_gr: Pair,
    /// Collision terms carrying G_R.
    pub h1: Pair,
    /// Field terms carrying G_R, E_R or B_R.
    pub h2: Pair,
    /// Known terms built from the expansion alone.
    pub r: Pair,
    pub h_r: Pair,
}

pub fn remainder_sources(
    ctx: &ExpansionOps,
    exp: &ExpansionField,
    rem: &RemainderSnapshot,
) -> Result<RemainderSources> {
    let grid = exp.grid();
    let eps = rem.epsilon;
    let np = grid.len();
    let n = ctx.n();
    check_len(np, rem.g.ncols())?;
    check_len(n, rem.g.nrows())?;
    let dg = expansion_time_derivative(ctx, exp, DIRECTIONAL_STEP)?;
    let mut an = Ansatz::of(exp);
    an.dg = [Some(&dg[0]), Some(&dg[1]), Some(&dg[2])];
    let coeff = coefficients(ctx, grid, &an, 4);
    let mut r = Pair::zeros(n, np);
    for c in &coeff[3..] {
        r.axpy(-eps.powi(c.order - 2), &c.residual);
    }

    let gr = &rem.g;
    let g0c = Some(&exp.g0c);
    let mut gamma0 = ctx.gamma(&exp.g0, g0c, gr, None);
    gamma0.axpy(1.0, &ctx.gamma(gr, None, &exp.g0, g0c));

    let mut h1 = ctx.gamma(gr, None, gr, None);
    h1.axpy(1.0, &ctx.gamma(&exp.g1, None, gr, None));
    h1.axpy(1.0, &ctx.gamma(gr, None, &exp.g1, None));
    h1.axpy(eps, &ctx.gamma(&exp.g2, None, gr, None));
    h1.axpy(eps, &ctx.gamma(gr, None, &exp.g2, None));

    let f = &exp.fields;
    let er = vphys(grid, &rem.e);
    let br = vphys(grid, &rem.b);
    let mut e = zeros_v(np);
    let mut b1r = zeros_v(np);
    for c in 0..3 {
        for p in 0..np {
            e[c][p] = f.e0[c][p] + eps * (f.e1[c][p] + er[c][p]);
            b1r[c][p] = f.b1[c][p] + br[c][p];
        }
    }
    let mut gexp = exp.g0.clone();
    gexp.axpy(eps, &exp.g1);
    gexp.axpy(eps * eps, &exp.g2);
    let mut g12 = exp.g1.clone();
    g12.axpy(eps, &exp.g2);
    let mut h2 = Pair::zeros(n, np);
    let mut field_terms = |e: &VPhys, g: &Pair, bf: Option<&VPhys>, c: f64| {
        let t = g.swapped();
        h2.s -= ctx.vgrad(e, &t.s) * c;
        h2.a -= ctx.vgrad(e, &t.a) * c;
        h2.s += ctx.vmul(e, &t.s).0 * c;
        h2.a += ctx.vmul(e, &t.a).0 * c;
        if let Some(bf) = bf {
            h2.s -= ctx.lorentz(bf, &t.s) * c;
            h2.a -= ctx.lorentz(bf, &t.a) * c;
        }
    };
    field_terms(&e, gr, Some(&b1r), 1.0);
    field_terms(&er, &gexp, None, 1.0);
    h2.s -= ctx.lorentz(&br, &g12.a);
    h2.a -= ctx.lorentz(&br, &g12.s);

    let mut h_r = gamma0.scaled(1.0 / eps);
    h_r.axpy(1.0, &h1);
    h_r.axpy(1.0, &h2);
    h_r.axpy(1.0, &r);
    Ok(RemainderSources {
        gamma0_gr: gamma0,
        h1,
        h2,
        r,
        h_r,
    })
}

/// Hydrodynamic part of a two-species field and its moments.
#[derive(Clone, Debug)]
pub struct MicroMacro {
    pub pg: Pair,
    pub pperp: Pair,
    pub rho_plus: Phys,
    pub rho_minus: Phys,
    pub u: VPhys,
    pub theta: Phys,
}

pub fn micro_macro_split(basis: &HermiteBasis, g: &Pair) -> Result<MicroMacro> {
    check_len(basis.len(), g.nrows())?;
    let np = g.ncols();
    let psi = basis.psi();
    let mut pg = Pair::zeros(g.nrows(), np);
    let mut rho_plus = vec![0.0; np];
    let mut rho_minus = vec![0.0; np];
    let mut u = zeros_v(np);
    let mut theta = vec![0.0; np];
    for p in 0..np {
        let s = g.s.column(p);
        rho_plus[p] = g.s[(0, p)] + g.a[(0, p)];
        rho_minus[p] = g.s[(0, p)] - g.a[(0, p)];
        theta[p] = 2.0 / 3.0 * psi.dot(&s);
        pg.s[(0, p)] = g.s[(0, p)];
        pg.a[(0, p)] = g.a[(0, p)];
        for i in 0..3 {
            u[i][p] = g.s[(1 + i, p)];
            pg.s[(1 + i, p)] = u[i][p];
        }
        let mut col = pg.s.column_mut(p);
        col.axpy(theta[p], &psi, 1.0);
    }
    let mut pperp = g.clone();
    pperp.axpy(-1.0, &pg);
    Ok(MicroMacro {
        pg,
        pperp,
        rho_plus,
        rho_minus,
        u,
        theta,
    })
}

/// Energy functional and dissipation rate of a remainder state.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct KineticFunctionals {
    pub e_nl: f64,
    pub d_nl: f64,
    /// Parts of e_nl and d_nl that depend on G.
    pub e_g: f64,
    pub d_g: f64,
    /// Set when N < 4 or l < 2 gamma + 1.
    pub outside_regime: bool,
}

/// Velocity Gram matrix of a nodal weight.
fn weighted_gram(basis: &HermiteBasis, w: &[f64]) -> DMatrix<f64> {
    let mut wt = basis.eval_table.clone();
    for (q, mut row) in wt.row_iter_mut().enumerate() {
        row *= basis.quad.weights[q] * w[q];
    }
    basis.eval_table.transpose() * wt
}

pub fn kinetic_energy_functionals(
    ops: &OperatorSet,
    grid: &Grid,
    rem: &RemainderSnapshot,
    fluid: &FluidDiagnostics,
    corr: &CorrectorDiagnostics,
    n_order: u32,
    l: f64,
) -> Result<KineticFunctionals> {
    let basis = &ops.basis;
    check_len(basis.len(), rem.g.nrows())?;
    check_len(grid.len(), rem.g.ncols())?;
    let eps = rem.epsilon;
    let big_n = n_order as i64;
    let split = micro_macro_split(basis, &rem.g)?;
    let vol = grid.volume();
    let np = grid.len();

    let wl: Vec<f64> = basis.quad.nodes.iter().map(|&v| weight_w(v).powf(2.0 * l)).collect();
    let wnu: Vec<f64> = wl.iter().zip(&ops.nu_values).map(|(a, b)| a * b).collect();
    let gw = weighted_gram(basis, &wl);
    let gnu = weighted_gram(basis, &wnu);

    // sum over |m| <= r of |k^m|^2 for every mode
    let mode_weight = |r: i64| -> Vec<f64> {
        if r < 0 {
            return vec![0.0; np];
        }
        let ms = grid.multi_indices(r as u32);
        (0..np)
            .map(|k| {
                let kk = grid.k(k);
                ms.iter()
                    .map(|m| (0..3).map(|i| kk[i].powi(2 * m[i] as i32)).product::<f64>())
                    .sum()
            })
            .collect()
    };
    let spec = |g: &Pair| [spectral_rows(grid, &g.s), spectral_rows(grid, &g.a)];
    let full = spec(&rem.g);
    let macro_ = spec(&split.pg);
    let micro = spec(&split.pperp);
    // 2 vol sum_k weight(k) f_k^H K f_k over both parts of the pair
    let quad = |parts: &[(DMatrix<f64>, DMatrix<f64>); 2], k: Option<&DMatrix<f64>>, wts: &[f64]| -> f64 {
        let mut t = 0.0;
        for (re, im) in parts {
            for x in [re, im] {
                let y = match k {
                    Some(k) => k * x,
                    None => x.clone(),
                };
                for p in 0..np {
                    if wts[p] == 0.0 {
                        continue;
                    }
                    t += wts[p] * x.column(p).dot(&y.column(p));
                }
            }
        }
        2.0 * vol * t
    };

    let w_top = mode_weight(big_n + 1);
    let a_full = quad(&full, None, &w_top);
    let p_full = quad(&macro_, None, &w_top);
    let nu_plain = quad(&micro, Some(&ops.nu_mat), &w_top);
    let mut e_b = 0.0;
    let mut e_c = 0.0;
    let mut d_1 = 0.0;
    let mut d_3 = 0.0;
    for beta in multi_indices((n_order + 1) as usize) {
        let nb = (beta[0] + beta[1] + beta[2]) as i64;
        let mut dm = DMatrix::<f64>::identity(basis.len(), basis.len());
        for (i, &bi) in beta.iter().enumerate() {
            for _ in 0..bi {
                dm = &basis.deriv_ops[i] * dm;
            }
        }
        let kw = dm.transpose() * &gw * &dm;
        let knu = dm.transpose() * &gnu * &dm;
        if nb <= big_n {
            let w = mode_weight(big_n - nb);
            e_b += quad(&micro, Some(&kw), &w);
            d_3 += quad(&micro, Some(&knu), &w);
        }
        if nb >= 1 {
            let w = mode_weight(big_n + 1 - nb);
            e_c += quad(&micro, Some(&kw), &w);
            d_1 += quad(&micro, Some(&knu), &w);
        }
    }
    let e_g = a_full + e_b + e_c;
    let d_g = p_full + (d_1 + nu_plain + d_3) / (eps * eps);
    let s = big_n as f64;
    let e_fields = grid.vhs2(&rem.e, s + 1.0) + grid.vhs2(&rem.b, s + 1.0);
    let dtb = grid.curl(&rem.e);
    let d_fields = grid.vhs2(&rem.e, s - 1.0) + grid.vgrad_hs2(&rem.b, s - 1.0) + grid.vhs2(&dtb, s - 1.0);
    Ok(KineticFunctionals {
        e_nl: e_fields + e_g + fluid.e0s + corr.e1m,
        d_nl: d_fields + d_g + fluid.d0s + corr.d1m,
        e_g,
        d_g,
        outside_regime: n_order < 4 || l < 2.0 * ops.cfg.gamma + 1.0,
    })
}

/// Defects of the remainder conservation identities.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ConservationReport {
    /// int (rho_R+ + theta1 + n1/2) and int (rho_R- + theta1 - n1/2)
    pub mass_plus: f64,
    pub mass_minus: f64,
    /// Largest component of int (u_R + u1) + int [E0 x (B1 + B_R)
    /// + (E1 + E_R) x B0 + eps (E1 + E_R) x (B1 + B_R)] / 2
    pub momentum: f64,
    /// int (theta_R + theta1) + int (|E|^2 + |B|^2) / 6
    pub energy: f64,
    /// Largest component of int B_R.
    pub magnetic: f64,
    /// Largest defect of the conservation laws of the assembled data,
    /// divided by eps.
    pub total: f64,
}

impl ConservationReport {
    pub fn worst(&self) -> f64 {
        [self.mass_plus, self.mass_minus, self.momentum, self.energy, self.magnetic, self.total]
            .into_iter()
            .fold(0.0, f64::max)
    }
}

/// Well-prepared data g = g0 + eps g1 + eps^2 g2 + eps g_R and the fields.
#[derive(Clone, Debug)]
pub struct InitialData {
    pub g: Pair,
    pub e: VField,
    pub b: VField,
    /// Remainder after the mean and Gauss adjustments.
    pub remainder: RemainderSnapshot,
    pub report: ConservationReport,
}

fn mean(f: &[f64]) -> f64 {
    f.iter().sum::<f64>() / f.len() as f64
}

fn cross_p(a: &VPhys, b: &VPhys, p: usize) -> [f64; 3] {
    [
        a[1][p] * b[2][p] - a[2][p] * b[1][p],
        a[2][p] * b[0][p] - a[0][p] * b[2][p],
        a[0][p] * b[1][p] - a[1][p] * b[0][p],
    ]
}

/// Total mass and momentum of the leading order: int theta0 and
/// int (2 u0 + E0 x B0).
pub fn leading_conservation_defect(fluid: &FluidState) -> f64 {
    let g = &fluid.grid;
    let u = vphys(g, &fluid.u);
    let e = vphys(g, &fluid.e);
    let b = vphys(g, &fluid.b);
    let th = phys(g, &fluid.theta);
    let vol = g.volume();
    let mut worst = (vol * mean(&th)).abs();
    for c in 0..3 {
        let m: f64 = (0..g.len()).map(|p| 2.0 * u[c][p] + cross_p(&e, &b, p)[c]).sum::<f64>();
        worst = worst.max((vol * m / g.len() as f64).abs());
    }
    worst
}

/// Shift the means of theta0 and u0 so that the leading-order conservation
/// laws hold.
pub fn make_well_prepared(fluid: &FluidState) -> FluidState {
    let g = &fluid.grid;
    let e = vphys(g, &fluid.e);
    let b = vphys(g, &fluid.b);
    let mut out = fluid.clone();
    out.theta[0] = Complex64::new(0.0, 0.0);
    for c in 0..3 {
        let m = (0..g.len()).map(|p| cross_p(&e, &b, p)[c]).sum::<f64>() / g.len() as f64;
        out.u[c][0] = Complex64::new(-0.5 * m, 0.0);
    }
    out
}

/// Assemble well-prepared initial data from an expansion at t = 0 and a
/// remainder proposal. The remainder's means of rho+-, u and theta are set
/// by the conservation laws and the longitudinal part of E_R by Gauss' law.
pub fn well_prepared_init(
    ctx: &ExpansionOps,
    exp: &ExpansionField,
    g_r: &Pair,
    e_r: &VField,
    b_r: &VField,
    epsilon: f64,
) -> Result<InitialData> {
    let grid = exp.grid();
    let np = grid.len();
    let n = ctx.n();
    check_len(np, g_r.ncols())?;
    check_len(n, g_r.nrows())?;
    if !(epsilon > 0.0) {
        return Err(Error::Input(format!("epsilon = {epsilon} must be positive")));
    }
    let scale = 1.0 + grid.vhs2(&exp.fluid.u, 0.0) + grid.vhs2(&exp.fluid.e, 0.0) + grid.vhs2(&exp.fluid.b, 0.0);
    let lead = leading_conservation_defect(&exp.fluid);
    if lead > 1e-10 * scale {
        return Err(Error::Input(format!(
            "leading-order data violate mass or momentum conservation by {lead:e}"
        )));
    }
    let db = grid.max_abs_phys(&grid.div(b_r));
    let mb = (0..3).fold(0.0f64, |m, c| m.max(b_r[c][0].norm()));
    if db > 1e-8 || mb > 1e-8 {
        return Err(Error::Input(format!(
            "remainder magnetic field must be solenoidal with zero mean (div {db:e}, mean {mb:e})"
        )));
    }
    let f = &exp.fields;
    let mut g = g_r.clone();
    // mass: mean rho_R+- = -mean(theta1 +- n1 / 2)
    let m_th = mean(&f.rho1);
    let m_n1 = mean(&f.n1);
    let cur_s0 = mean(&g.s.row(0).iter().copied().collect::<Vec<_>>());
    let cur_a0 = mean(&g.a.row(0).iter().copied().collect::<Vec<_>>());
    let ds0 = -m_th - cur_s0;
    let da0 = -0.5 * m_n1 - cur_a0;
    for p in 0..np {
        g.s[(0, p)] += ds0;
        g.a[(0, p)] += da0;
    }
    // Gauss: div E_R = 2 a_R[0]
    let a0: Vec<f64> = g.a.row(0).iter().map(|x| 2.0 * x).collect();
    let target = grid.forward(&a0)?;
    let defect = crate::torus::fadd(&grid.div(e_r), &target, -1.0);
    let pot = grid.poisson(&defect, 1e-8 * (1.0 + grid.hs2(&target, 0.0).sqrt()))?;
    let er = crate::torus::vadd(e_r, &grid.grad(&pot), -1.0);
    let br = b_r.clone();
    let erp = vphys(grid, &er);
    let brp = vphys(grid, &br);
    // field combinations
    let mut e_tot = zeros_v(np);
    let mut b_tot = zeros_v(np);
    let mut e1r = zeros_v(np);
    let mut b1r = zeros_v(np);
    for c in 0..3 {
        for p in 0..np {
            e1r[c][p] = f.e1[c][p] + erp[c][p];
            b1r[c][p] = f.b1[c][p] + brp[c][p];
            e_tot[c][p] = f.e0[c][p] + epsilon * e1r[c][p];
            b_tot[c][p] = f.b0[c][p] + epsilon * b1r[c][p];
        }
    }
    // momentum: mean u_R = -mean u1 - mean[cross terms] / 2
    for c in 0..3 {
        let mut m = 0.0;
        for p in 0..np {
            let x = cross_p(&f.e0, &b1r, p)[c] + cross_p(&e1r, &f.b0, p)[c] + epsilon * cross_p(&e1r, &b1r, p)[c];
            m += f.u1[c][p] + 0.5 * x;
        }
        m /= np as f64;
        let cur = mean(&g.s.row(1 + c).iter().copied().collect::<Vec<_>>());
        let d = -m - cur;
        for p in 0..np {
            g.s[(1 + c, p)] += d;
        }
    }
    // energy: mean theta_R = -mean theta1 - mean(|E|^2 + |B|^2) / 6
    let psi = ctx.basis().psi();
    let en: f64 = (0..np)
        .map(|p| (0..3).map(|c| e_tot[c][p].powi(2) + b_tot[c][p].powi(2)).sum::<f64>())
        .sum::<f64>()
        / np as f64;
    let cur_th = (0..np).map(|p| 2.0 / 3.0 * psi.dot(&g.s.column(p))).sum::<f64>() / np as f64;
    let dth = -m_th - en / 6.0 - cur_th;
    for p in 0..np {
        let mut col = g.s.column_mut(p);
        col.axpy(dth, &psi, 1.0);
    }

    let remainder = RemainderSnapshot::new(grid, g, er.clone(), br.clone(), epsilon)?;
    let report = conservation_report(ctx, exp, &remainder)?;
    let mut total = exp.g0.clone();
    total.axpy(epsilon, &exp.g1);
    total.axpy(epsilon * epsilon, &exp.g2);
    total.axpy(epsilon, &remainder.g);
    Ok(InitialData {
        g: total,
        e: vspec(grid, &e_tot),
        b: vspec(grid, &b_tot),
        remainder,
        report,
    })
}

/// Defects of the remainder identities and of the total conservation laws.
pub fn conservation_report(
    ctx: &ExpansionOps,
    exp: &ExpansionField,
    rem: &RemainderSnapshot,
) -> Result<ConservationReport> {
    let grid = exp.grid();
    let np = grid.len();
    let vol = grid.volume();
    let eps = rem.epsilon;
    let f = &exp.fields;
    let mm = micro_macro_split(ctx.basis(), &rem.g)?;
    let er = vphys(grid, &rem.e);
    let br = vphys(grid, &rem.b);
    let int = |x: &dyn Fn(usize) -> f64| vol * (0..np).map(x).sum::<f64>() / np as f64;
    let mass_plus = int(&|p| mm.rho_plus[p] + f.rho1[p] + 0.5 * f.n1[p]).abs();
    let mass_minus = int(&|p| mm.rho_minus[p] + f.rho1[p] - 0.5 * f.n1[p]).abs();
    let mut e1r = zeros_v(np);
    let mut b1r = zeros_v(np);
    let mut e_tot = zeros_v(np);
    let mut b_tot = zeros_v(np);
    for c in 0..3 {
        for p in 0..np {
            e1r[c][p] = f.e1[c][p] + er[c][p];
            b1r[c][p] = f.b1[c][p] + br[c][p];
            e_tot[c][p] = f.e0[c][p] + eps * e1r[c][p];
            b_tot[c][p] = f.b0[c][p] + eps * b1r[c][p];
        }
    }
    let mut momentum: f64 = 0.0;
    let mut magnetic: f64 = 0.0;
    for c in 0..3 {
        let m = int(&|p| {
            mm.u[c][p]
                + f.u1[c][p]
                + 0.5
                    * (cross_p(&f.e0, &b1r, p)[c]
                        + cross_p(&e1r, &f.b0, p)[c]
                        + eps * cross_p(&e1r, &b1r, p)[c])
        });
        momentum = momentum.max(m.abs());
        magnetic = magnetic.max(int(&|p| br[c][p]).abs());
    }
    let field_energy = |p: usize| (0..3).map(|c| e_tot[c][p].powi(2) + b_tot[c][p].powi(2)).sum::<f64>();
    let energy = int(&|p| mm.theta[p] + f.rho1[p] + field_energy(p) / 6.0).abs();

    // total laws of the assembled g = g0 + eps g1 + eps^2 g2 + eps g_R
    let mut g = exp.g0.clone();
    g.axpy(eps, &exp.g1);
    g.axpy(eps * eps, &exp.g2);
    g.axpy(eps, &rem.g);
    let tot = micro_macro_split(ctx.basis(), &g)?;
    let mut total: f64 = 0.0;
    total = total.max(int(&|p| tot.rho_plus[p]).abs() / eps);
    total = total.max(int(&|p| tot.rho_minus[p]).abs() / eps);
    for c in 0..3 {
        let m = int(&|p| 2.0 * tot.u[c][p] + cross_p(&e_tot, &b_tot, p)[c]);
        total = total.max(m.abs() / eps);
    }
    // <|v|^2 (g+ + g-)> = 6 (rho + theta) with rho = (rho+ + rho-) / 2
    let en = int(&|p| 3.0 * (tot.rho_plus[p] + tot.rho_minus[p]) + 6.0 * tot.theta[p] + eps * field_energy(p));
    total = total.max(en.abs() / eps);
    Ok(ConservationReport {
        mass_plus,
        mass_minus,
        momentum,
        energy,
        magnetic,
        total,
    })
}
