//! Velocity space: Maxwellian-weighted tensor quadrature and the orthonormal
//! Hermite basis of total degree at most D.

use crate::error::{check_len, Error, Result};
use crate::quad::gauss_hermite;
use nalgebra::{DMatrix, DVector};
use std::f64::consts::PI;

/// Global Maxwellian (2pi)^{-3/2} exp(-|v|^2/2).
pub fn maxwellian(v: [f64; 3]) -> f64 {
    let r2 = v[0] * v[0] + v[1] * v[1] + v[2] * v[2];
    (2.0 * PI).powf(-1.5) * (-0.5 * r2).exp()
}

/// Weight w(v) = sqrt(1 + |v|^2).
pub fn weight_w(v: [f64; 3]) -> f64 {
    (1.0 + v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

#[derive(Clone, Debug)]
pub struct VelocityQuadrature {
    pub nodes: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
    pub order_per_dim: usize,
}

impl VelocityQuadrature {
    pub fn build(order_per_dim: usize) -> Result<Self> {
        if order_per_dim < 4 {
            return Err(Error::Config(format!(
                "quadrature order {order_per_dim} < 4"
            )));
        }
        let (x, w) = gauss_hermite(order_per_dim);
        let n = order_per_dim;
        let mut nodes = Vec::with_capacity(n * n * n);
        let mut weights = Vec::with_capacity(n * n * n);
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    nodes.push([x[i], x[j], x[k]]);
                    weights.push(w[i] * w[j] * w[k]);
                }
            }
        }
        Ok(VelocityQuadrature {
            nodes,
            weights,
            order_per_dim,
        })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// <f> = sum of weights times samples.
    pub fn bracket(&self, f: &[f64]) -> Result<f64> {
        check_len(self.len(), f.len())?;
        Ok(self.weights.iter().zip(f).map(|(w, f)| w * f).sum())
    }

    pub fn sample<F: Fn([f64; 3]) -> f64>(&self, f: F) -> Vec<f64> {
        self.nodes.iter().map(|&v| f(v)).collect()
    }
}

/// Normalized probabilists' Hermite values h_0..h_d at x, h_n = He_n / sqrt(n!).
pub fn hermite_values(d: usize, x: f64, out: &mut [f64]) {
    out[0] = 1.0;
    if d == 0 {
        return;
    }
    out[1] = x;
    for n in 1..d {
        let nf = n as f64;
        out[n + 1] = (x * out[n] - nf.sqrt() * out[n - 1]) / (nf + 1.0).sqrt();
    }
}

#[derive(Clone, Debug)]
pub struct HermiteBasis {
    pub degree: usize,
    pub index: Vec<[usize; 3]>,
    lookup: Vec<usize>,
    pub deriv_ops: [DMatrix<f64>; 3],
    pub mult_ops: [DMatrix<f64>; 3],
    pub eval_table: DMatrix<f64>,
    pub quad: VelocityQuadrature,
}

/// Number of multi-indices of total degree at most d in three variables.
pub fn basis_size(d: usize) -> usize {
    (d + 1) * (d + 2) * (d + 3) / 6
}

pub fn multi_indices(d: usize) -> Vec<[usize; 3]> {
    let mut out = Vec::with_capacity(basis_size(d));
    for deg in 0..=d {
        for a in (0..=deg).rev() {
            for b in (0..=deg - a).rev() {
                out.push([a, b, deg - a - b]);
            }
        }
    }
    out
}

impl HermiteBasis {
    pub fn new(degree: usize, quad: &VelocityQuadrature) -> Result<Self> {
        if degree < 2 {
            return Err(Error::Config(format!(
                "basis degree {degree} < 2 cannot hold the collision invariants"
            )));
        }
        if quad.order_per_dim < degree + 2 {
            return Err(Error::Config(format!(
                "quadrature order {} < D + 2 = {}",
                quad.order_per_dim,
                degree + 2
            )));
        }
        let index = multi_indices(degree);
        let n_b = index.len();
        let side = degree + 1;
        let mut lookup = vec![usize::MAX; side * side * side];
        for (i, a) in index.iter().enumerate() {
            lookup[(a[0] * side + a[1]) * side + a[2]] = i;
        }
        let mut basis = HermiteBasis {
            degree,
            index,
            lookup,
            deriv_ops: [
                DMatrix::zeros(n_b, n_b),
                DMatrix::zeros(n_b, n_b),
                DMatrix::zeros(n_b, n_b),
            ],
            mult_ops: [
                DMatrix::zeros(n_b, n_b),
                DMatrix::zeros(n_b, n_b),
                DMatrix::zeros(n_b, n_b),
            ],
            eval_table: DMatrix::zeros(quad.len(), n_b),
            quad: quad.clone(),
        };
        for col in 0..n_b {
            let a = basis.index[col];
            for i in 0..3 {
                if a[i] > 0 {
                    let mut b = a;
                    b[i] -= 1;
                    let row = basis.index_of(b).unwrap();
                    basis.deriv_ops[i][(row, col)] = (a[i] as f64).sqrt();
                    basis.mult_ops[i][(row, col)] = (a[i] as f64).sqrt();
                }
                let mut b = a;
                b[i] += 1;
                if let Some(row) = basis.index_of(b) {
                    basis.mult_ops[i][(row, col)] = ((a[i] + 1) as f64).sqrt();
                }
            }
        }
        let mut row = vec![0.0; n_b];
        for (q, &v) in quad.nodes.iter().enumerate() {
            basis.eval_into(v, &mut row);
            for (b, x) in row.iter().enumerate() {
                basis.eval_table[(q, b)] = *x;
            }
        }
        Ok(basis)
    }

    pub fn len(&self) -> usize {
        self.index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index.is_empty()
    }

    pub fn index_of(&self, a: [usize; 3]) -> Option<usize> {
        if a[0] + a[1] + a[2] > self.degree {
            return None;
        }
        let side = self.degree + 1;
        Some(self.lookup[(a[0] * side + a[1]) * side + a[2]])
    }

    /// Values of all basis functions at v.
    pub fn eval_into(&self, v: [f64; 3], out: &mut [f64]) {
        let d = self.degree;
        let mut h = [[0.0; 32]; 3];
        for i in 0..3 {
            hermite_values(d, v[i], &mut h[i]);
        }
        for (o, a) in out.iter_mut().zip(&self.index) {
            *o = h[0][a[0]] * h[1][a[1]] * h[2][a[2]];
        }
    }

    pub fn eval(&self, v: [f64; 3]) -> Vec<f64> {
        let mut out = vec![0.0; self.len()];
        self.eval_into(v, &mut out);
        out
    }

    /// Coefficients c_a = <f e_a> from node samples.
    pub fn project(&self, f: &[f64]) -> Result<DVector<f64>> {
        check_len(self.quad.len(), f.len())?;
        let wf = DVector::from_iterator(
            f.len(),
            f.iter().zip(&self.quad.weights).map(|(f, w)| f * w),
        );
        Ok(self.eval_table.tr_mul(&wf))
    }

    pub fn project_fn<F: Fn([f64; 3]) -> f64>(&self, f: F) -> DVector<f64> {
        let s = self.quad.sample(f);
        self.project(&s).expect("sample length matches quadrature")
    }

    /// Node samples of the function with coefficients c.
    pub fn reconstruct(&self, c: &DVector<f64>) -> Result<Vec<f64>> {
        check_len(self.len(), c.len())?;
        Ok((&self.eval_table * c).iter().copied().collect())
    }

    pub fn gram(&self) -> DMatrix<f64> {
        let mut wt = self.eval_table.clone();
        for (q, w) in self.quad.weights.iter().enumerate() {
            for b in 0..self.len() {
                wt[(q, b)] *= w;
            }
        }
        self.eval_table.tr_mul(&wt)
    }

    /// Coefficient matrix of the Laplacian in v.
    pub fn laplacian(&self) -> DMatrix<f64> {
        let mut l = DMatrix::zeros(self.len(), self.len());
        for d in &self.deriv_ops {
            l += d * d;
        }
        l
    }

    /// Embed coefficients of `other` (any degree) into this basis, dropping
    /// components of degree above self.degree. Returns the dropped norm.
    pub fn embed_from(&self, other: &HermiteBasis, c: &DVector<f64>) -> (DVector<f64>, f64) {
        let mut out = DVector::zeros(self.len());
        let mut dropped = 0.0;
        for (i, a) in other.index.iter().enumerate() {
            match self.index_of(*a) {
                Some(j) => out[j] = c[i],
                None => dropped += c[i] * c[i],
            }
        }
        (out, dropped.sqrt())
    }

    pub fn unit(&self, a: [usize; 3]) -> DVector<f64> {
        let mut c = DVector::zeros(self.len());
        c[self.index_of(a).expect("index within degree")] = 1.0;
        c
    }

    /// Coefficients of |v|^2/2 - 3/2.
    pub fn psi(&self) -> DVector<f64> {
        let mut c = DVector::zeros(self.len());
        for i in 0..3 {
            let mut a = [0; 3];
            a[i] = 2;
            c[self.index_of(a).unwrap()] = std::f64::consts::FRAC_1_SQRT_2;
        }
        c
    }

    /// Orthonormal collision invariants 1, v1, v2, v3, sqrt(2/3) psi.
    pub fn invariants(&self) -> [DVector<f64>; 5] {
        [
            self.unit([0, 0, 0]),
            self.unit([1, 0, 0]),
            self.unit([0, 1, 0]),
            self.unit([0, 0, 1]),
            self.psi() * (2.0f64 / 3.0).sqrt(),
        ]
    }
}

/// The canonical velocity shapes in coefficient form.
#[derive(Clone, Debug)]
pub struct Shapes {
    pub one: DVector<f64>,
    pub v: [DVector<f64>; 3],
    /// |v|^2/2 - 3/2
    pub psi: DVector<f64>,
    /// A_ij = v_i v_j - |v|^2 delta_ij / 3
    pub a: [[DVector<f64>; 3]; 3],
    /// B_i = v_i (|v|^2/2 - 5/2)
    pub b: [DVector<f64>; 3],
    /// C = |v|^4/4 - 5|v|^2/2 + 15/4
    pub c: DVector<f64>,
}

impl Shapes {
    pub fn new(basis: &HermiteBasis) -> Self {
        let r2 = |v: [f64; 3]| v[0] * v[0] + v[1] * v[1] + v[2] * v[2];
        let one = basis.project_fn(|_| 1.0);
        let v = [0, 1, 2].map(|i| basis.project_fn(move |v| v[i]));
        let psi = basis.project_fn(|v| 0.5 * r2(v) - 1.5);
        let a = [0, 1, 2].map(|i| {
            [0, 1, 2].map(|j| {
                basis.project_fn(move |v| {
                    v[i] * v[j] - if i == j { r2(v) / 3.0 } else { 0.0 }
                })
            })
        });
        let b = [0, 1, 2].map(|i| basis.project_fn(move |v| v[i] * (0.5 * r2(v) - 2.5)));
        let c = basis.project_fn(|v| {
            let s = r2(v);
            0.25 * s * s - 2.5 * s + 3.75
        });
        Shapes {
            one,
            v,
            psi,
            a,
            b,
            c,
        }
    }

}
