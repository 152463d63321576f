//! Explicit integral kernels of the linearized operator.
//!
//! Gain kernel (Carleman form)
//!   k(v, y) = 4 bhat / |v-y| * int_{eta perp (y-v)} (|v-y|^2 + |eta|^2)^{(gamma-1)/2} M(y+eta) d eta
//! and cross-loss kernel |v-y|^gamma M(y). Both are integrated in spherical
//! coordinates y = v + s omega about each outer node.

use crate::collision::KernelConfig;
use crate::quad::{gauss_legendre, gauss_legendre_on, norm, orthonormal_frame};
use crate::special::bessel_i0e;
use crate::velocity::{HermiteBasis, VelocityQuadrature};
use nalgebra::DMatrix;
use std::f64::consts::PI;

#[derive(Clone, Debug)]
pub struct KernelRule {
    pub n_polar: usize,
    pub n_azimuth: usize,
    pub s_panel: f64,
    pub s_points: usize,
}

impl KernelRule {
    pub fn for_degree(d: usize) -> Self {
        KernelRule {
            n_polar: 40,
            n_azimuth: 2 * d + 2,
            s_panel: 3.0,
            s_points: 16,
        }
    }
}

fn panels(a: f64, b: f64, width: f64, per: usize) -> (Vec<f64>, Vec<f64>) {
    if a == 0.0 && b > 1.0 {
        // graded start for the s^{1+gamma} behaviour at the origin
        let mut xs = Vec::new();
        let mut ws = Vec::new();
        for win in [0.0, 0.01, 0.1, 1.0].windows(2) {
            let (x, w) = gauss_legendre_on(per, win[0], win[1]);
            xs.extend(x);
            ws.extend(w);
        }
        let (x, w) = panels(1.0, b, width, per);
        xs.extend(x);
        ws.extend(w);
        return (xs, ws);
    }
    let m = ((b - a) / width).ceil().max(1.0) as usize;
    let mut xs = Vec::with_capacity(m * per);
    let mut ws = Vec::with_capacity(m * per);
    for p in 0..m {
        let lo = a + (b - a) * p as f64 / m as f64;
        let hi = a + (b - a) * (p + 1) as f64 / m as f64;
        let (x, w) = gauss_legendre_on(per, lo, hi);
        xs.extend(x);
        ws.extend(w);
    }
    (xs, ws)
}

/// In-plane integral
/// J(s, zeta) = int_0^inf rho (s^2+rho^2)^{(gamma-1)/2} e^{-(rho-zeta)^2/2} I0e(rho zeta) d rho.
pub fn carleman_j(s: f64, zeta: f64, gamma: f64) -> f64 {
    if gamma == 1.0 {
        return 1.0;
    }
    let f = |rho: f64| (-0.5 * (rho - zeta).powi(2)).exp() * bessel_i0e(rho * zeta);
    let radial = |rho: f64| {
        let q = s * s + rho * rho;
        if gamma == 0.0 {
            1.0 / q.sqrt()
        } else {
            q.powf(0.5 * (gamma - 1.0))
        }
    };
    let mut sum = 0.0;
    let mut a: f64 = 0.0;
    if s < 1.0 && zeta < 10.0 {
        // rho = s sinh(tau) smooths the rho ~ s transition
        let tmax = (1.0 / s).asinh();
        let (t, w) = gauss_legendre_on(24, 0.0, tmax);
        let sg = s.powf(1.0 + gamma);
        for (t, w) in t.iter().zip(&w) {
            let (sh, ch) = (t.sinh(), t.cosh());
            sum += w * sg * sh * ch.powf(gamma) * f(s * sh);
        }
        a = 1.0;
    }
    a = a.max(zeta - 9.0);
    let b = zeta + 9.0;
    if b > a {
        let (x, w) = panels(a, b, 3.0, 12);
        for (x, w) in x.iter().zip(&w) {
            sum += w * x * radial(*x) * f(*x);
        }
    }
    sum
}

/// F1_j = int k(v, y) e_j(y) dy and F2_j = int |v-y|^gamma M(y) e_j(y) dy.
pub fn kernel_rows(
    basis: &HermiteBasis,
    cfg: &KernelConfig,
    rule: &KernelRule,
    v: [f64; 3],
    f1: &mut [f64],
    f2: &mut [f64],
) {
    let n = basis.len();
    f1.iter_mut().for_each(|x| *x = 0.0);
    f2.iter_mut().for_each(|x| *x = 0.0);
    let vn = norm(v);
    let axis = if vn > 1e-14 {
        [-v[0] / vn, -v[1] / vn, -v[2] / vn]
    } else {
        [0.0, 0.0, 1.0]
    };
    let (e1, e2) = orthonormal_frame(axis);
    let (ts, wts) = gauss_legendre(rule.n_polar);
    let na = rule.n_azimuth;
    let trig: Vec<(f64, f64)> = (0..na)
        .map(|j| (2.0 * PI * (j as f64 + 0.5) / na as f64).sin_cos())
        .collect();
    let c1 = 4.0 * PI * 4.0 * cfg.bhat / (2.0 * PI).sqrt();
    let c2 = 4.0 * PI * (2.0 * PI).powf(-1.5);
    let mut e = vec![0.0; n];
    for (t, wt) in ts.iter().zip(&wts) {
        let st = (1.0 - t * t).max(0.0).sqrt();
        let zeta = vn * st;
        let c = vn * t;
        let lo = (c - 9.0).max(0.0);
        let hi = c.max(0.0) + 9.0;
        let (ss, ws) = panels(lo, hi, rule.s_panel, rule.s_points);
        let wd = 0.5 * wt / na as f64;
        let perp = (-0.5 * zeta * zeta).exp();
        for (s, w) in ss.iter().zip(&ws) {
            let g = (-0.5 * (s - c).powi(2)).exp();
            let a1 = wd * c1 * w * s * g * carleman_j(*s, zeta, cfg.gamma);
            let a2 = wd * c2 * w * s * s * s.powf(cfg.gamma) * g * perp;
            for (sp, cp) in &trig {
                let mut y = [0.0; 3];
                for i in 0..3 {
                    let d = t * axis[i] + st * (cp * e1[i] + sp * e2[i]);
                    y[i] = v[i] + s * d;
                }
                basis.eval_into(y, &mut e);
                for k in 0..n {
                    f1[k] += a1 * e[k];
                    f2[k] += a2 * e[k];
                }
            }
        }
    }
}

/// Galerkin matrices of the gain and cross-loss kernels over the outer rule.
pub fn kernel_matrices(
    basis: &HermiteBasis,
    cfg: &KernelConfig,
    outer: &VelocityQuadrature,
) -> (DMatrix<f64>, DMatrix<f64>) {
    let rule = KernelRule::for_degree(basis.degree);
    let n = basis.len();
    let nv = outer.len();
    let mut ew = DMatrix::zeros(n, nv);
    let mut r1 = DMatrix::zeros(nv, n);
    let mut r2 = DMatrix::zeros(nv, n);
    let mut f1 = vec![0.0; n];
    let mut f2 = vec![0.0; n];
    let mut e = vec![0.0; n];
    for (q, (v, w)) in outer.nodes.iter().zip(&outer.weights).enumerate() {
        basis.eval_into(*v, &mut e);
        for k in 0..n {
            ew[(k, q)] = w * e[k];
        }
        kernel_rows(basis, cfg, &rule, *v, &mut f1, &mut f2);
        for j in 0..n {
            r1[(q, j)] = f1[j];
            r2[(q, j)] = f2[j];
        }
    }
    let k1 = &ew * r1;
    let k2 = &ew * r2;
    (
        (&k1 + k1.transpose()) * 0.5,
        (&k2 + k2.transpose()) * 0.5,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::collision::nu_radial;

    #[test]
    fn gain_kernel_mass_is_nu() {
        let q = VelocityQuadrature::build(4).unwrap();
        let b = HermiteBasis::new(2, &q).unwrap();
        let rule = KernelRule::for_degree(2);
        let mut f1 = vec![0.0; b.len()];
        let mut f2 = vec![0.0; b.len()];
        for &gamma in &[0.0, 0.5, 1.0] {
            let cfg = KernelConfig::new(gamma).unwrap();
            for v in [[0.0, 0.0, 0.0], [0.4, -1.0, 0.2], [3.0, 2.5, -4.0]] {
                kernel_rows(&b, &cfg, &rule, v, &mut f1, &mut f2);
                let nu = nu_radial(norm(v), gamma);
                assert!((f1[0] - nu).abs() < 1e-9 * nu, "gain {gamma} {v:?} {} {nu}", f1[0]);
                assert!((f2[0] - nu).abs() < 1e-9 * nu, "loss {gamma} {v:?} {} {nu}", f2[0]);
            }
        }
    }

    #[test]
    fn planar_integral_closed_form_at_gamma_one_limit() {
        // gamma -> 1 continuity of the general branch
        let a = carleman_j(0.7, 2.0, 1.0 - 1e-9);
        assert!((a - 1.0).abs() < 1e-7);
    }
}
