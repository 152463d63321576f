//! Hard-potential Boltzmann collision operator linearized about the global
//! Maxwellian, in the sigma-representation
//! v' = (v+v*)/2 + |v-v*| s/2, v*' = (v+v*)/2 - |v-v*| s/2
//! with constant angular density 1/(4pi).
//!
//! Matrix conventions: `m[(k, j)] = <op(e_j) e_k>`, so `m * c` maps
//! coefficients to coefficients.

use crate::error::{check_len, Error, Result};
use crate::kernels;
use crate::quad::{gauss_hermite, gauss_legendre_on, radial_gauss, SphereRule};
use crate::velocity::{HermiteBasis, VelocityQuadrature};
use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};
use std::f64::consts::PI;

#[derive(Clone, Debug, PartialEq)]
pub struct KernelConfig {
    pub gamma: f64,
    pub bhat: f64,
    pub sigma_polar: usize,
    pub sigma_azimuth: usize,
}

impl KernelConfig {
    pub fn new(gamma: f64) -> Result<Self> {
        let cfg = KernelConfig {
            gamma,
            bhat: 1.0 / (4.0 * PI),
            sigma_polar: 12,
            sigma_azimuth: 12,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(Error::Config(format!(
                "gamma = {} outside [0, 1]",
                self.gamma
            )));
        }
        if self.sigma_polar == 0 || self.sigma_azimuth == 0 {
            return Err(Error::Config("empty angular rule".into()));
        }
        let s = self.bhat_integral();
        if (s - 1.0).abs() > 1e-12 {
            return Err(Error::Config(format!("angular density integrates to {s}")));
        }
        Ok(())
    }

    pub fn angular_rule(&self) -> SphereRule {
        SphereRule::new(self.sigma_polar, self.sigma_azimuth)
    }

    /// Integral of bhat over the unit sphere under the angular rule.
    pub fn bhat_integral(&self) -> f64 {
        let rule = self.angular_rule();
        4.0 * PI * self.bhat * rule.weights.iter().sum::<f64>()
    }
}

/// nu as a function of lambda = |v|.
pub fn nu_radial(lambda: f64, gamma: f64) -> f64 {
    let lo = (lambda - 10.0).max(0.0);
    let hi = lambda + 10.0;
    let mut cuts = vec![lo];
    if lo == 0.0 {
        cuts.push(0.5);
    }
    let mut x = cuts[cuts.len() - 1];
    while x < hi {
        x = (x + 2.0).min(hi);
        cuts.push(x);
    }
    let mut sum = 0.0;
    for win in cuts.windows(2) {
        let (r, w) = gauss_legendre_on(20, win[0], win[1]);
        for (r, w) in r.iter().zip(&w) {
            let g = if lambda > 0.0 {
                -(-2.0 * r * lambda).exp_m1() / lambda
            } else {
                2.0 * r
            };
            sum += w * r.powf(1.0 + gamma) * (-0.5 * (r - lambda).powi(2)).exp() * g;
        }
    }
    sum / (2.0 * PI).sqrt()
}

/// nu(v) = int |v - v*|^gamma M(v*) dv*.
pub fn collision_frequency(v: [f64; 3], cfg: &KernelConfig) -> Result<f64> {
    cfg.validate()?;
    Ok(nu_radial(crate::quad::norm(v), cfg.gamma))
}

/// Exact spherical means of the basis functions via the mean-value series
/// sum_p rho^{2p} Lap^p e_k(c) / (2p+1)!.
#[derive(Clone, Debug)]
pub struct SphericalMean {
    lap_cols: Vec<Vec<(usize, f64)>>,
    pmax: usize,
}

impl SphericalMean {
    pub fn new(basis: &HermiteBasis) -> Self {
        let lap = basis.laplacian();
        let n = basis.len();
        let lap_cols = (0..n)
            .map(|k| {
                (0..n)
                    .filter(|&r| lap[(r, k)] != 0.0)
                    .map(|r| (r, lap[(r, k)]))
                    .collect()
            })
            .collect();
        SphericalMean {
            lap_cols,
            pmax: basis.degree / 2,
        }
    }

    /// out_k = mean of e_k over the sphere of radius rho about c.
    pub fn mean_into(
        &self,
        basis: &HermiteBasis,
        c: [f64; 3],
        rho: f64,
        out: &mut [f64],
        scratch: &mut [f64],
    ) {
        basis.eval_into(c, scratch);
        out.copy_from_slice(scratch);
        let r2 = rho * rho;
        let mut fac = 1.0;
        let mut next = vec![0.0; out.len()];
        for p in 1..=self.pmax {
            let pf = p as f64;
            fac *= r2 / ((2.0 * pf) * (2.0 * pf + 1.0));
            for (k, col) in self.lap_cols.iter().enumerate() {
                next[k] = col.iter().map(|&(r, a)| a * scratch[r]).sum();
            }
            for (o, x) in out.iter_mut().zip(&next) {
                *o += fac * x;
            }
            scratch.copy_from_slice(&next);
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Route {
    ViaQ,
    ViaKernels,
}

/// Galerkin matrix of multiplication by nu.
pub fn nu_matrix(basis: &HermiteBasis, gamma: f64) -> DMatrix<f64> {
    let d = basis.degree;
    let (s, ws) = radial_gauss(d + 1, |s| s * s * nu_radial(s, gamma));
    let sphere = SphereRule::new(d + 1, 2 * d + 1);
    let n = basis.len();
    let c = (2.0 * PI).powf(-1.5) * 4.0 * PI;
    let mut rows = DMatrix::zeros(n, s.len() * sphere.len());
    let mut wcol = Vec::with_capacity(s.len() * sphere.len());
    let mut e = vec![0.0; n];
    let mut col = 0;
    for (s, w) in s.iter().zip(&ws) {
        for (dir, wd) in sphere.dirs.iter().zip(&sphere.weights) {
            basis.eval_into([s * dir[0], s * dir[1], s * dir[2]], &mut e);
            let wt = c * w * wd;
            for k in 0..n {
                rows[(k, col)] = e[k];
            }
            wcol.push(wt);
            col += 1;
        }
    }
    weighted_gram(&rows, &wcol)
}

fn weighted_gram(rows: &DMatrix<f64>, w: &[f64]) -> DMatrix<f64> {
    let mut scaled = rows.clone();
    for (j, wj) in w.iter().enumerate() {
        scaled.column_mut(j).scale_mut(*wj);
    }
    let out = &scaled * rows.transpose();
    (&out + out.transpose()) * 0.5
}

/// Gain matrix G and cross-loss matrix N on the relative-velocity rule
/// h = (v+v*)/sqrt2, w = (v-v*)/sqrt2 = r omega.
pub fn gain_and_cross(basis: &HermiteBasis, gamma: f64) -> (DMatrix<f64>, DMatrix<f64>) {
    let d = basis.degree;
    let n = basis.len();
    let (hx, hw) = gauss_hermite(d + 1);
    let (r, wr) = radial_gauss(d + 1, |r| r.powf(2.0 + gamma));
    let rscale = (2.0 * PI).powf(-1.5) * 4.0 * PI * 2f64.powf(0.5 * gamma);
    let wr: Vec<f64> = wr.iter().map(|w| w * rscale).collect();
    let sm = SphericalMean::new(basis);
    let s2 = std::f64::consts::SQRT_2;

    let nh = hx.len();
    let mut hs = Vec::with_capacity(nh * nh * nh);
    for a in 0..nh {
        for b in 0..nh {
            for c in 0..nh {
                hs.push(([hx[a], hx[b], hx[c]], hw[a] * hw[b] * hw[c]));
            }
        }
    }

    let mut amat = DMatrix::zeros(n, hs.len() * r.len());
    let mut wa = Vec::with_capacity(hs.len() * r.len());
    let mut out = vec![0.0; n];
    let mut scratch = vec![0.0; n];
    let mut col = 0;
    for (h, wh) in &hs {
        let c = [h[0] / s2, h[1] / s2, h[2] / s2];
        for (ri, wri) in r.iter().zip(&wr) {
            sm.mean_into(basis, c, ri / s2, &mut out, &mut scratch);
            amat.column_mut(col).copy_from_slice(&out);
            wa.push(wh * wri);
            col += 1;
        }
    }
    let gain = weighted_gram(&amat, &wa);

    let cross = if gamma == 0.0 {
        let mut m = DMatrix::zeros(n, n);
        m[(0, 0)] = 1.0;
        m
    } else {
        let sphere = SphereRule::new(d + 1, 2 * d + 1);
        let p = r.len() * sphere.len();
        let mut m = DMatrix::zeros(n, n);
        let mut ev = DMatrix::zeros(n, p);
        let mut es = DMatrix::zeros(n, p);
        let mut e = vec![0.0; n];
        for (h, wh) in &hs {
            let mut col = 0;
            for (ri, wri) in r.iter().zip(&wr) {
                for (dir, wd) in sphere.dirs.iter().zip(&sphere.weights) {
                    let w = [ri * dir[0], ri * dir[1], ri * dir[2]];
                    let v = [(h[0] + w[0]) / s2, (h[1] + w[1]) / s2, (h[2] + w[2]) / s2];
                    let vs = [(h[0] - w[0]) / s2, (h[1] - w[1]) / s2, (h[2] - w[2]) / s2];
                    let wt = wh * wri * wd;
                    basis.eval_into(v, &mut e);
                    for k in 0..n {
                        ev[(k, col)] = wt * e[k];
                    }
                    basis.eval_into(vs, &mut e);
                    es.column_mut(col).copy_from_slice(&e);
                    col += 1;
                }
            }
            m += &ev * es.transpose();
        }
        (&m + m.transpose()) * 0.5
    };
    (gain, cross)
}

/// Collision tensor on the relative-velocity rule, exact for polynomial
/// test functions at every gamma. Gain part: angular Gram matrices
/// A_ij(h, r) contracted with spherical means S_k(h, r). Loss part:
/// <e_i e_k N_j> with N_j replaced by its degree-2D projection.
fn relative_tensor(basis: &HermiteBasis, gamma: f64) -> Result<DMatrix<f64>> {
    let d = basis.degree;
    let n = basis.len();
    let m = 3 * d / 2 + 1;
    let (hx, hw) = gauss_hermite(m);
    let (r, wr) = radial_gauss(m, |r| r.powf(2.0 + gamma));
    let rscale = (2.0 * PI).powf(-1.5) * 4.0 * PI * 2f64.powf(0.5 * gamma);
    let sphere = SphereRule::new(m, 3 * d + 1);
    let big = HermiteBasis::new(2 * d, &VelocityQuadrature::build(2 * d + 2)?)?;
    let nb = big.len();
    let sm = SphericalMean::new(basis);
    let s2 = std::f64::consts::SQRT_2;
    let ns = sphere.len();

    let chunk = 128;
    let mut smat = DMatrix::zeros(n, chunk);
    let mut amat = DMatrix::zeros(n * n, chunk);
    // gain[(k, i + j n)] = sum_p S_k A_ij
    let mut gain = DMatrix::zeros(n, n * n);
    let mut cross = DMatrix::zeros(nb, n);
    let mut ev = DMatrix::zeros(nb, ns);
    let mut es = DMatrix::zeros(n, ns);
    let mut e = vec![0.0; nb];
    let mut out = vec![0.0; n];
    let mut scratch = vec![0.0; n];
    let mut col = 0;
    for (a, wa) in hx.iter().zip(&hw) {
        for (b, wb) in hx.iter().zip(&hw) {
            for (c, wc) in hx.iter().zip(&hw) {
                let h = [*a, *b, *c];
                for (ri, wri) in r.iter().zip(&wr) {
                    let wt = wa * wb * wc * wri * rscale;
                    sm.mean_into(basis, [a / s2, b / s2, c / s2], ri / s2, &mut out, &mut scratch);
                    for k in 0..n {
                        smat[(k, col)] = wt * out[k];
                    }
                    for (p, (dir, wd)) in sphere.dirs.iter().zip(&sphere.weights).enumerate() {
                        let w = [ri * dir[0], ri * dir[1], ri * dir[2]];
                        let v = [(h[0] + w[0]) / s2, (h[1] + w[1]) / s2, (h[2] + w[2]) / s2];
                        let vs = [(h[0] - w[0]) / s2, (h[1] - w[1]) / s2, (h[2] - w[2]) / s2];
                        big.eval_into(v, &mut e);
                        for k in 0..nb {
                            ev[(k, p)] = wd * e[k];
                        }
                        basis.eval_into(vs, &mut e[..n]);
                        for k in 0..n {
                            es[(k, p)] = e[k];
                        }
                    }
                    // rows: degree-2D test function at v, columns: e_j at v*
                    let g = &ev * es.transpose();
                    cross += &g * wt;
                    let mut acol = amat.column_mut(col);
                    for j in 0..n {
                        for i in 0..n {
                            acol[i + j * n] = g[(i, j)];
                        }
                    }
                    col += 1;
                    if col == chunk {
                        gain.gemm(1.0, &smat, &amat.transpose(), 1.0);
                        col = 0;
                    }
                }
            }
        }
    }
    if col > 0 {
        gain.gemm(1.0, &smat.columns(0, col), &amat.columns(0, col).transpose(), 1.0);
    }
    drop(amat);

    let nq = big.quad.len();
    let ntilde = &big.eval_table * &cross;
    let mut y = DMatrix::zeros(n * n, nq);
    for q in 0..nq {
        let w = big.quad.weights[q];
        let eq = big.eval_table.row(q);
        let mut yc = y.column_mut(q);
        for i in 0..n {
            for k in 0..n {
                yc[k + i * n] = w * eq[i] * eq[k];
            }
        }
    }
    // loss[(k + i n), j] = <e_i e_k N_j>
    let loss = y * ntilde;

    let mut data = DMatrix::zeros(n * n, n);
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                data[(k + j * n, i)] = gain[(k, i + j * n)] - loss[(k + i * n, j)];
            }
        }
    }
    Ok(data)
}

/// Bilinear collision tensor: column i of `data` is the column-major n x n
/// matrix M_i with M_i[(k, j)] = <Q(e_i, e_j) e_k>.
#[derive(Clone, Debug)]
pub struct QTensor {
    pub n: usize,
    pub quad_order: usize,
    pub data: DMatrix<f64>,
}

impl QTensor {
    pub fn build(basis: &HermiteBasis, gamma: f64, quad_order: usize) -> Result<Self> {
        let quad = VelocityQuadrature::build(quad_order)?;
        if quad_order < basis.degree + 1 {
            return Err(Error::Config(format!(
                "tensor quadrature order {quad_order} < D + 1"
            )));
        }
        if gamma != 0.0 {
            return Ok(QTensor {
                n: basis.len(),
                quad_order,
                data: relative_tensor(basis, gamma)?,
            });
        }
        let n = basis.len();
        let nq = quad.len();
        let sm = SphericalMean::new(basis);
        let mut et = DMatrix::zeros(nq, n);
        let mut e = vec![0.0; n];
        for (q, v) in quad.nodes.iter().enumerate() {
            basis.eval_into(*v, &mut e);
            for k in 0..n {
                et[(q, k)] = e[k];
            }
        }
        let chunk = 32;
        let mut data = DMatrix::zeros(n * n, n);
        let mut zmat = DMatrix::zeros(n * n, chunk);
        let mut ew = DMatrix::zeros(chunk, n);
        let mut ab = DMatrix::zeros(n, nq);
        let mut out = vec![0.0; n];
        let mut scratch = vec![0.0; n];
        let mut wb = vec![0.0; nq];
        let mut filled = 0;
        for (a, va) in quad.nodes.iter().enumerate() {
            for (b, vb) in quad.nodes.iter().enumerate() {
                let c = [
                    0.5 * (va[0] + vb[0]),
                    0.5 * (va[1] + vb[1]),
                    0.5 * (va[2] + vb[2]),
                ];
                let u = [va[0] - vb[0], va[1] - vb[1], va[2] - vb[2]];
                let un = crate::quad::norm(u);
                wb[b] = quad.weights[b] * if gamma == 0.0 { 1.0 } else { un.powf(gamma) };
                sm.mean_into(basis, c, 0.5 * un, &mut out, &mut scratch);
                let mut col = ab.column_mut(b);
                for k in 0..n {
                    col[k] = wb[b] * out[k];
                }
            }
            // Yt[(k, j)] = sum_b wb A_k e_j(v_b)
            let yt = &ab * &et;
            let mut nv = vec![0.0; n];
            for (b, w) in wb.iter().enumerate() {
                for j in 0..n {
                    nv[j] += w * et[(b, j)];
                }
            }
            let mut zc = zmat.column_mut(filled);
            for j in 0..n {
                for k in 0..n {
                    zc[k + j * n] = yt[(k, j)] - et[(a, k)] * nv[j];
                }
            }
            for i in 0..n {
                ew[(filled, i)] = quad.weights[a] * et[(a, i)];
            }
            filled += 1;
            if filled == chunk || a + 1 == nq {
                let z = zmat.columns(0, filled);
                let w = ew.rows(0, filled);
                data += z * w;
                filled = 0;
            }
        }
        Ok(QTensor {
            n,
            quad_order,
            data,
        })
    }

    /// Q(f, h) in coefficients.
    pub fn apply(&self, f: &DVector<f64>, h: &DVector<f64>) -> Result<DVector<f64>> {
        check_len(self.n, f.len())?;
        check_len(self.n, h.len())?;
        let n = self.n;
        let mut out = DVector::zeros(n);
        for i in 0..n {
            let fi = f[i];
            if fi == 0.0 {
                continue;
            }
            let col = self.data.column(i);
            for j in 0..n {
                let s = fi * h[j];
                if s == 0.0 {
                    continue;
                }
                for k in 0..n {
                    out[k] += s * col[k + j * n];
                }
            }
        }
        Ok(out)
    }

    /// Matrix of h -> Q(f, h).
    pub fn first_fixed(&self, f: &DVector<f64>) -> Result<DMatrix<f64>> {
        check_len(self.n, f.len())?;
        let n = self.n;
        let flat = &self.data * f;
        Ok(DMatrix::from_column_slice(n, n, flat.as_slice()))
    }

    /// Matrix of f -> Q(f, h).
    pub fn second_fixed(&self, h: &DVector<f64>) -> Result<DMatrix<f64>> {
        check_len(self.n, h.len())?;
        let n = self.n;
        let mut m = DMatrix::zeros(n, n);
        for i in 0..n {
            let col = self.data.column(i);
            for j in 0..n {
                let hj = h[j];
                if hj == 0.0 {
                    continue;
                }
                for k in 0..n {
                    m[(k, i)] += hj * col[k + j * n];
                }
            }
        }
        Ok(m)
    }
}

#[derive(Clone, Debug)]
pub struct OperatorSet {
    pub cfg: KernelConfig,
    pub basis: HermiteBasis,
    pub route: Route,
    pub nu_values: Vec<f64>,
    /// <nu e_j e_k>
    pub nu_mat: DMatrix<f64>,
    /// Gain part: <Q+(e_j, 1) e_k> = <Q+(1, e_j) e_k>.
    pub k1_mat: DMatrix<f64>,
    /// Cross loss: <e_k(v) e_j(v*) |v-v*|^gamma>.
    pub k2_mat: DMatrix<f64>,
    pub l_mat: DMatrix<f64>,
    pub lfrak_mat: DMatrix<f64>,
    pub lplus_lfrak_mat: DMatrix<f64>,
    q_tensor: Option<QTensor>,
}

impl OperatorSet {
    pub fn from_parts(
        cfg: KernelConfig,
        basis: HermiteBasis,
        route: Route,
        nu_mat: DMatrix<f64>,
        k1_mat: DMatrix<f64>,
        k2_mat: DMatrix<f64>,
    ) -> Result<Self> {
        cfg.validate()?;
        let n = basis.len();
        for m in [&nu_mat, &k1_mat, &k2_mat] {
            if m.nrows() != n || m.ncols() != n {
                return Err(Error::Shape {
                    expected: n,
                    got: m.nrows(),
                });
            }
        }
        let nu_values = basis
            .quad
            .nodes
            .iter()
            .map(|&v| nu_radial(crate::quad::norm(v), cfg.gamma))
            .collect();
        let l_mat = &nu_mat + &k2_mat - &k1_mat * 2.0;
        let lfrak_mat = &nu_mat - &k2_mat;
        let lplus_lfrak_mat = (&nu_mat - &k1_mat) * 2.0;
        Ok(OperatorSet {
            cfg,
            basis,
            route,
            nu_values,
            nu_mat,
            k1_mat,
            k2_mat,
            l_mat,
            lfrak_mat,
            lplus_lfrak_mat,
            q_tensor: None,
        })
    }

    pub fn n(&self) -> usize {
        self.basis.len()
    }

    /// Two-species operator on stacked (g+, g-).
    pub fn big_l(&self) -> DMatrix<f64> {
        let n = self.n();
        let diag = &self.nu_mat * 2.0 - &self.k1_mat * 3.0 + &self.k2_mat;
        let off = &self.k2_mat - &self.k1_mat;
        let mut m = DMatrix::zeros(2 * n, 2 * n);
        m.view_mut((0, 0), (n, n)).copy_from(&diag);
        m.view_mut((n, n), (n, n)).copy_from(&diag);
        m.view_mut((0, n), (n, n)).copy_from(&off);
        m.view_mut((n, 0), (n, n)).copy_from(&off);
        m
    }

    /// Block-diagonal nu multiplication on stacked pairs.
    pub fn big_nu(&self) -> DMatrix<f64> {
        let n = self.n();
        let mut m = DMatrix::zeros(2 * n, 2 * n);
        m.view_mut((0, 0), (n, n)).copy_from(&self.nu_mat);
        m.view_mut((n, n), (n, n)).copy_from(&self.nu_mat);
        m
    }

    pub fn has_q_tensor(&self) -> bool {
        self.q_tensor.is_some()
    }

    pub fn q_tensor(&self) -> Result<&QTensor> {
        self.q_tensor
            .as_ref()
            .ok_or_else(|| Error::State("collision tensor not precomputed".into()))
    }

    pub fn set_q_tensor(&mut self, q: QTensor) -> Result<()> {
        check_len(self.n(), q.n)?;
        self.q_tensor = Some(q);
        Ok(())
    }

    pub fn build_q_tensor(&mut self, quad_order: usize) -> Result<()> {
        let q = QTensor::build(&self.basis, self.cfg.gamma, quad_order)?;
        self.q_tensor = Some(q);
        Ok(())
    }
}

/// Outer rule of the kernel route when the kernels are not polynomial.
pub const KERNEL_OUTER_ORDER: usize = 18;

pub fn assemble_l(basis: &HermiteBasis, cfg: &KernelConfig, route: Route) -> Result<OperatorSet> {
    cfg.validate()?;
    let nu_mat = nu_matrix(basis, cfg.gamma);
    let (k1, k2) = match route {
        Route::ViaQ => gain_and_cross(basis, cfg.gamma),
        Route::ViaKernels => {
            // the outer integrand is polynomial at gamma = 0
            let outer = if cfg.gamma == 0.0 {
                VelocityQuadrature::build((basis.degree + 1).max(4))?
            } else {
                VelocityQuadrature::build(basis.quad.order_per_dim.max(KERNEL_OUTER_ORDER))?
            };
            kernels::kernel_matrices(basis, cfg, &outer)
        }
    };
    OperatorSet::from_parts(cfg.clone(), basis.clone(), route, nu_mat, k1, k2)
}

/// Largest entrywise disagreement of the linearized operators, relative to
/// the largest entry. Errors above `tol`.
pub fn compare_routes(a: &OperatorSet, b: &OperatorSet, tol: f64) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for (x, y) in [
        (&a.l_mat, &b.l_mat),
        (&a.lfrak_mat, &b.lfrak_mat),
        (&a.lplus_lfrak_mat, &b.lplus_lfrak_mat),
    ] {
        let scale = x.amax().max(y.amax()).max(f64::MIN_POSITIVE);
        worst = worst.max((x - y).amax() / scale);
    }
    if worst > tol {
        return Err(Error::Assembly(format!(
            "route disagreement {worst:e} exceeds {tol:e}; refine the kernel quadrature"
        )));
    }
    Ok(worst)
}

/// Apply Q with the precomputed tensor.
pub fn apply_q(f: &DVector<f64>, h: &DVector<f64>, ops: &OperatorSet) -> Result<DVector<f64>> {
    ops.q_tensor()?.apply(f, h)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Projection {
    /// Two-species kernel of the full linearized operator.
    P,
    /// Single-species kernel span{1, v, psi}.
    PL,
    /// Constants.
    PLplusLfrak,
}

/// Stacked (g+, g-) coefficient vectors spanning the two-species kernel.
pub fn pair_kernel(basis: &HermiteBasis) -> Vec<DVector<f64>> {
    let n = basis.len();
    let inv = basis.invariants();
    let mut out = Vec::with_capacity(6);
    for s in 0..2 {
        let mut g = DVector::zeros(2 * n);
        g[s * n] = 1.0;
        out.push(g);
    }
    for e in inv.iter().skip(1) {
        let mut g = DVector::zeros(2 * n);
        g.rows_mut(0, n).copy_from(&(e * std::f64::consts::FRAC_1_SQRT_2));
        g.rows_mut(n, n).copy_from(&(e * std::f64::consts::FRAC_1_SQRT_2));
        out.push(g);
    }
    out
}

pub fn project(basis: &HermiteBasis, g: &DVector<f64>, which: Projection) -> Result<DVector<f64>> {
    let n = basis.len();
    match which {
        Projection::P => {
            check_len(2 * n, g.len())?;
            let mut out = DVector::zeros(2 * n);
            for k in pair_kernel(basis) {
                out.axpy(k.dot(g), &k, 1.0);
            }
            Ok(out)
        }
        Projection::PL => {
            check_len(n, g.len())?;
            let mut out = DVector::zeros(n);
            for k in basis.invariants() {
                out.axpy(k.dot(g), &k, 1.0);
            }
            Ok(out)
        }
        Projection::PLplusLfrak => {
            check_len(n, g.len())?;
            let mut out = DVector::zeros(n);
            out[0] = g[0];
            Ok(out)
        }
    }
}

#[derive(Clone, Debug)]
pub struct SpectralGap {
    pub lambda: f64,
    /// Stacked (g+, g-) minimizer, unit in the nu-weighted norm.
    pub eigenvector: DVector<f64>,
}

/// Smallest nu-weighted Rayleigh quotient of the two-species operator on the
/// complement of its kernel.
pub fn spectral_gap(ops: &OperatorSet) -> Result<SpectralGap> {
    let n2 = 2 * ops.n();
    let mut proj = DMatrix::<f64>::identity(n2, n2);
    for k in pair_kernel(&ops.basis) {
        proj -= &k * k.transpose();
    }
    let eig = SymmetricEigen::new(proj);
    let cols: Vec<usize> = (0..n2).filter(|&i| eig.eigenvalues[i] > 0.5).collect();
    let z = eig.eigenvectors.select_columns(&cols);
    let a = z.transpose() * ops.big_l() * &z;
    let b = z.transpose() * ops.big_nu() * &z;
    let a = (&a + a.transpose()) * 0.5;
    let b = (&b + b.transpose()) * 0.5;
    let chol = Cholesky::new(b)
        .ok_or_else(|| Error::Assembly("nu-weighted Gram matrix not positive".into()))?;
    let l = chol.l();
    let linv = l
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::Assembly("singular nu-weighted Gram matrix".into()))?;
    let c = &linv * a * linv.transpose();
    let c = (&c + c.transpose()) * 0.5;
    let e = SymmetricEigen::new(c);
    let (imin, lambda) = e
        .eigenvalues
        .iter()
        .copied()
        .enumerate()
        .min_by(|x, y| x.1.partial_cmp(&y.1).unwrap())
        .unwrap();
    if lambda <= 0.0 {
        return Err(Error::Assembly(format!("nonpositive spectral gap {lambda:e}")));
    }
    let y = e.eigenvectors.column(imin).into_owned();
    let eigenvector = z * linv.transpose() * y;
    Ok(SpectralGap {
        lambda,
        eigenvector,
    })
}
