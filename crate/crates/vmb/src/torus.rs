//! Fourier grids on [0, 2pi)^d, d = 2 or 3. Fields always carry three
//! components; on T^2 they depend on (x1, x2) only.
//!
//! Coefficients satisfy f(x) = sum_k f_k e^{i k.x}, stored row-major in
//! (k1, k2, k3).

use crate::error::{check_len, Error, Result};
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use std::f64::consts::PI;
use std::sync::Arc;

pub type Field = Vec<Complex64>;
pub type VField = [Field; 3];

#[derive(Clone)]
pub struct Grid {
    /// Points per axis; the third is 1 on T^2.
    pub shape: [usize; 3],
    plans: [(Arc<dyn Fft<f64>>, Arc<dyn Fft<f64>>); 3],
    wave: [Vec<i64>; 3],
    keep: Vec<bool>,
}

impl std::fmt::Debug for Grid {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Grid({:?})", self.shape)
    }
}

impl PartialEq for Grid {
    fn eq(&self, other: &Self) -> bool {
        self.shape == other.shape
    }
}

impl Grid {
    /// Square grid on T^2 carrying 2.5-D fields.
    pub fn new(n: usize) -> Result<Self> {
        Self::with_shape([n, n, 1])
    }

    /// Cubic grid on T^3.
    pub fn new3(n: usize) -> Result<Self> {
        Self::with_shape([n, n, n])
    }

    pub fn with_shape(shape: [usize; 3]) -> Result<Self> {
        for (i, &n) in shape.iter().enumerate() {
            let ok = if i == 2 && n == 1 { true } else { n >= 4 && n % 2 == 0 };
            if !ok {
                return Err(Error::Config(format!(
                    "grid size {n} on axis {i} must be even and >= 4"
                )));
            }
        }
        let mut planner = FftPlanner::new();
        let plans = shape.map(|n| (planner.plan_fft_forward(n), planner.plan_fft_inverse(n)));
        let wave = shape.map(|n| {
            (0..n)
                .map(|i| if i < n.div_ceil(2) { i as i64 } else { i as i64 - n as i64 })
                .collect::<Vec<i64>>()
        });
        let total = shape[0] * shape[1] * shape[2];
        let mut grid = Grid {
            shape,
            plans,
            wave,
            keep: vec![false; total],
        };
        for m in 0..total {
            let idx = grid.unravel(m);
            grid.keep[m] = (0..3).all(|ax| {
                let n = shape[ax];
                n == 1 || ((grid.wave[ax][idx[ax]] as f64).abs() < n as f64 / 3.0)
            });
        }
        Ok(grid)
    }

    /// Spatial dimension (2 or 3).
    pub fn dim(&self) -> usize {
        if self.shape[2] == 1 {
            2
        } else {
            3
        }
    }

    fn unravel(&self, m: usize) -> [usize; 3] {
        let [_, n2, n3] = self.shape;
        [m / (n2 * n3), (m / n3) % n2, m % n3]
    }

    pub fn len(&self) -> usize {
        self.shape[0] * self.shape[1] * self.shape[2]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn zeros(&self) -> Field {
        vec![Complex64::new(0.0, 0.0); self.len()]
    }

    pub fn vzeros(&self) -> VField {
        [self.zeros(), self.zeros(), self.zeros()]
    }

    /// Wave vector of stored mode `m`.
    pub fn k(&self, m: usize) -> [f64; 3] {
        let idx = self.unravel(m);
        [0, 1, 2].map(|ax| self.wave[ax][idx[ax]] as f64)
    }

    pub fn k2(&self, m: usize) -> f64 {
        let k = self.k(m);
        k[0] * k[0] + k[1] * k[1] + k[2] * k[2]
    }

    /// Storage index of the mode -k.
    pub fn neg(&self, m: usize) -> usize {
        let idx = self.unravel(m);
        let [n1, n2, n3] = self.shape;
        (((n1 - idx[0]) % n1) * n2 + (n2 - idx[1]) % n2) * n3 + (n3 - idx[2]) % n3
    }

    pub fn is_kept(&self, m: usize) -> bool {
        self.keep[m]
    }

    /// Physical coordinates of grid point p.
    pub fn x(&self, p: usize) -> [f64; 3] {
        let idx = self.unravel(p);
        [0, 1, 2].map(|ax| idx[ax] as f64 * 2.0 * PI / self.shape[ax] as f64)
    }

    /// Volume of the torus.
    pub fn volume(&self) -> f64 {
        (2.0 * PI).powi(self.dim() as i32)
    }

    fn fft(&self, data: &mut [Complex64], forward: bool) {
        let [n1, n2, n3] = self.shape;
        let strides = [n2 * n3, n3, 1];
        for ax in 0..3 {
            let n = self.shape[ax];
            if n == 1 {
                continue;
            }
            let plan = if forward { &self.plans[ax].0 } else { &self.plans[ax].1 };
            if ax == 2 {
                for line in data.chunks_mut(n) {
                    plan.process(line);
                }
                continue;
            }
            let st = strides[ax];
            let mut line = vec![Complex64::new(0.0, 0.0); n];
            for m in 0..n1 * n2 * n3 {
                if self.unravel(m)[ax] != 0 {
                    continue;
                }
                for i in 0..n {
                    line[i] = data[m + i * st];
                }
                plan.process(&mut line);
                for i in 0..n {
                    data[m + i * st] = line[i];
                }
            }
        }
    }

    pub fn forward(&self, phys: &[f64]) -> Result<Field> {
        check_len(self.len(), phys.len())?;
        let mut d: Field = phys.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        self.fft(&mut d, true);
        let s = 1.0 / self.len() as f64;
        for x in d.iter_mut() {
            *x *= s;
        }
        Ok(d)
    }

    /// Real part of the synthesized field.
    pub fn inverse(&self, spec: &Field) -> Vec<f64> {
        let mut d = spec.clone();
        self.fft(&mut d, false);
        d.iter().map(|c| c.re).collect()
    }

    pub fn from_fn<F: Fn([f64; 3]) -> f64>(&self, f: F) -> Field {
        let phys: Vec<f64> = (0..self.len()).map(|p| f(self.x(p))).collect();
        self.forward(&phys).expect("grid length")
    }

    /// Zero modes outside the 2/3 band (this includes the Nyquist planes).
    pub fn dealias(&self, f: &mut Field) {
        for (m, c) in f.iter_mut().enumerate() {
            if !self.keep[m] {
                *c = Complex64::new(0.0, 0.0);
            }
        }
    }

    pub fn vdealias(&self, f: &mut VField) {
        for c in f.iter_mut() {
            self.dealias(c);
        }
    }

    /// Dealiased product of two fields.
    pub fn mul(&self, a: &Field, b: &Field) -> Field {
        let pa = self.inverse(a);
        let pb = self.inverse(b);
        let p: Vec<f64> = pa.iter().zip(&pb).map(|(x, y)| x * y).collect();
        let mut out = self.forward(&p).expect("grid length");
        self.dealias(&mut out);
        out
    }

    pub fn dx(&self, f: &Field, axis: usize) -> Field {
        f.iter()
            .enumerate()
            .map(|(m, c)| c * Complex64::new(0.0, self.k(m)[axis]))
            .collect()
    }

    pub fn grad(&self, f: &Field) -> VField {
        [self.dx(f, 0), self.dx(f, 1), self.dx(f, 2)]
    }

    pub fn div(&self, v: &VField) -> Field {
        let mut out = self.dx(&v[0], 0);
        for ax in 1..3 {
            for (o, x) in out.iter_mut().zip(self.dx(&v[ax], ax)) {
                *o += x;
            }
        }
        out
    }

    pub fn curl(&self, v: &VField) -> VField {
        let d = |i: usize, ax: usize| self.dx(&v[i], ax);
        [
            fadd(&d(2, 1), &d(1, 2), -1.0),
            fadd(&d(0, 2), &d(2, 0), -1.0),
            fadd(&d(1, 0), &d(0, 1), -1.0),
        ]
    }

    pub fn laplacian(&self, f: &Field) -> Field {
        f.iter()
            .enumerate()
            .map(|(m, c)| c * (-self.k2(m)))
            .collect()
    }

    /// Zero-mean solution of Lap u = f; errors when the mean of f exceeds tol.
    pub fn poisson(&self, f: &Field, tol: f64) -> Result<Field> {
        if f[0].norm() > tol {
            return Err(Error::Solvability(format!(
                "Poisson right-hand side has mean {:e}",
                f[0].norm()
            )));
        }
        Ok(f.iter()
            .enumerate()
            .map(|(m, c)| {
                if m == 0 {
                    Complex64::new(0.0, 0.0)
                } else {
                    -c / self.k2(m)
                }
            })
            .collect())
    }

    /// Divergence-free part of v.
    pub fn leray(&self, v: &VField) -> VField {
        let mut out = v.clone();
        for m in 1..self.len() {
            let k = self.k(m);
            let k2 = self.k2(m);
            let kv = (v[0][m] * k[0] + v[1][m] * k[1] + v[2][m] * k[2]) / k2;
            for i in 0..3 {
                out[i][m] -= kv * k[i];
            }
        }
        out
    }

    pub fn cross(&self, a: &VField, b: &VField) -> VField {
        let pa: Vec<Vec<f64>> = a.iter().map(|f| self.inverse(f)).collect();
        let pb: Vec<Vec<f64>> = b.iter().map(|f| self.inverse(f)).collect();
        let comp = |i: usize, j: usize| -> Field {
            let p: Vec<f64> = (0..self.len())
                .map(|q| pa[i][q] * pb[j][q] - pa[j][q] * pb[i][q])
                .collect();
            let mut f = self.forward(&p).expect("grid length");
            self.dealias(&mut f);
            f
        };
        [comp(1, 2), comp(2, 0), comp(0, 1)]
    }

    /// (a . grad) b, dealiased.
    pub fn advect(&self, a: &VField, b: &Field) -> Field {
        let mut p = vec![0.0; self.len()];
        for ax in 0..self.dim() {
            let pa = self.inverse(&a[ax]);
            let g = self.inverse(&self.dx(b, ax));
            for q in 0..self.len() {
                p[q] += pa[q] * g[q];
            }
        }
        let mut f = self.forward(&p).expect("grid length");
        self.dealias(&mut f);
        f
    }

    /// Squared H^s norm, |T| sum (1+|k|^2)^s |f_k|^2.
    pub fn hs2(&self, f: &Field, s: f64) -> f64 {
        let mut t = 0.0;
        for (m, c) in f.iter().enumerate() {
            t += (1.0 + self.k2(m)).powf(s) * c.norm_sqr();
        }
        self.volume() * t
    }

    pub fn vhs2(&self, f: &VField, s: f64) -> f64 {
        f.iter().map(|c| self.hs2(c, s)).sum()
    }

    /// Squared H^s norm of the gradient.
    pub fn grad_hs2(&self, f: &Field, s: f64) -> f64 {
        let mut t = 0.0;
        for (m, c) in f.iter().enumerate() {
            t += self.k2(m) * (1.0 + self.k2(m)).powf(s) * c.norm_sqr();
        }
        self.volume() * t
    }

    pub fn vgrad_hs2(&self, f: &VField, s: f64) -> f64 {
        f.iter().map(|c| self.grad_hs2(c, s)).sum()
    }

    /// L2 inner product (integral over the torus).
    pub fn inner(&self, a: &Field, b: &Field) -> f64 {
        self.volume() * a.iter().zip(b).map(|(x, y)| (x * y.conj()).re).sum::<f64>()
    }

    /// Integral over the torus.
    pub fn integral(&self, f: &Field) -> f64 {
        self.volume() * f[0].re
    }

    pub fn max_abs_phys(&self, f: &Field) -> f64 {
        self.inverse(f).iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    /// Largest deviation from conjugate symmetry f_{-k} = conj(f_k).
    pub fn conj_defect(&self, f: &Field) -> f64 {
        (0..self.len()).fold(0.0, |w: f64, m| w.max((f[m] - f[self.neg(m)].conj()).norm()))
    }

    /// Multi-index derivative d^alpha.
    pub fn deriv(&self, f: &Field, alpha: [u32; 3]) -> Field {
        let i = Complex64::new(0.0, 1.0);
        f.iter()
            .enumerate()
            .map(|(m, c)| {
                let k = self.k(m);
                c * (i * k[0]).powu(alpha[0]) * (i * k[1]).powu(alpha[1]) * (i * k[2]).powu(alpha[2])
            })
            .collect()
    }

    /// Multi-indices with |alpha| <= s over the active axes.
    pub fn multi_indices(&self, s: u32) -> Vec<[u32; 3]> {
        let top = if self.dim() == 3 { s } else { 0 };
        let mut out = Vec::new();
        for a in 0..=s {
            for b in 0..=s - a {
                for c in 0..=top.min(s - a - b) {
                    out.push([a, b, c]);
                }
            }
        }
        out
    }
}

pub fn vadd(a: &VField, b: &VField, s: f64) -> VField {
    [0, 1, 2].map(|i| a[i].iter().zip(&b[i]).map(|(x, y)| x + y * s).collect())
}

pub fn fadd(a: &Field, b: &Field, s: f64) -> Field {
    a.iter().zip(b).map(|(x, y)| x + y * s).collect()
}

pub fn fscale(a: &Field, s: f64) -> Field {
    a.iter().map(|x| x * s).collect()
}

pub fn vscale(a: &VField, s: f64) -> VField {
    [0, 1, 2].map(|i| fscale(&a[i], s))
}
