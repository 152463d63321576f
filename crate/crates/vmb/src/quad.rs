//! One-dimensional Gauss rules and a product rule on the unit sphere.

use nalgebra::{DMatrix, SymmetricEigen};
use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

/// Three-term recurrence of an orthonormal polynomial family.
/// `beta[0]` is the total mass of the measure.
#[derive(Clone, Debug)]
pub struct Recurrence {
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
}

impl Recurrence {
    fn eval(&self, n: usize, x: f64) -> (f64, f64, f64) {
        // returns (p_n, p_n', sum_{k<n} p_k^2)
        let mut p_prev = 0.0;
        let mut dp_prev = 0.0;
        let mut p = 1.0 / self.beta[0].sqrt();
        let mut dp = 0.0;
        let mut sum = 0.0;
        for k in 0..n {
            sum += p * p;
            let sb_next = self.beta[k + 1].sqrt();
            let sb = if k == 0 { 0.0 } else { self.beta[k].sqrt() };
            let p_next = ((x - self.alpha[k]) * p - sb * p_prev) / sb_next;
            let dp_next = (p + (x - self.alpha[k]) * dp - sb * dp_prev) / sb_next;
            p_prev = p;
            dp_prev = dp;
            p = p_next;
            dp = dp_next;
        }
        (p, dp, sum)
    }

    /// n-point Gauss rule (Golub-Welsch, then Newton polish and Christoffel weights).
    pub fn gauss(&self, n: usize) -> (Vec<f64>, Vec<f64>) {
        assert!(self.alpha.len() >= n && self.beta.len() > n);
        let mut j = DMatrix::<f64>::zeros(n, n);
        for k in 0..n {
            j[(k, k)] = self.alpha[k];
            if k + 1 < n {
                let b = self.beta[k + 1].sqrt();
                j[(k, k + 1)] = b;
                j[(k + 1, k)] = b;
            }
        }
        let eig = SymmetricEigen::new(j);
        let mut nodes: Vec<f64> = eig.eigenvalues.iter().copied().collect();
        nodes.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut weights = Vec::with_capacity(n);
        for x in nodes.iter_mut() {
            for _ in 0..3 {
                let (p, dp, _) = self.eval(n, *x);
                if dp != 0.0 {
                    *x -= p / dp;
                }
            }
            let (_, _, s) = self.eval(n, *x);
            weights.push(1.0 / s);
        }
        (nodes, weights)
    }
}

pub fn hermite_recurrence(n: usize) -> Recurrence {
    Recurrence {
        alpha: vec![0.0; n],
        beta: (0..=n).map(|k| if k == 0 { 1.0 } else { k as f64 }).collect(),
    }
}

pub fn legendre_recurrence(n: usize) -> Recurrence {
    Recurrence {
        alpha: vec![0.0; n],
        beta: (0..=n)
            .map(|k| {
                if k == 0 {
                    2.0
                } else {
                    let k = k as f64;
                    k * k / (4.0 * k * k - 1.0)
                }
            })
            .collect(),
    }
}

/// Gauss-Hermite rule for the standard normal density (weights sum to 1).
pub fn gauss_hermite(n: usize) -> (Vec<f64>, Vec<f64>) {
    hermite_recurrence(n).gauss(n)
}

/// Gauss-Legendre rule on [-1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    legendre_recurrence(n).gauss(n)
}

fn gauss_legendre_shared(n: usize) -> Arc<(Vec<f64>, Vec<f64>)> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<(Vec<f64>, Vec<f64>)>>>> = OnceLock::new();
    let mut map = CACHE
        .get_or_init(|| Mutex::new(HashMap::new()))
        .lock()
        .unwrap_or_else(|e| e.into_inner());
    map.entry(n)
        .or_insert_with(|| Arc::new(gauss_legendre(n)))
        .clone()
}

/// Gauss-Legendre rule mapped to [a, b].
pub fn gauss_legendre_on(n: usize, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
    let rule = gauss_legendre_shared(n);
    let (x, w) = (&rule.0, &rule.1);
    let h = 0.5 * (b - a);
    let c = 0.5 * (b + a);
    (
        x.iter().map(|t| c + h * t).collect(),
        w.iter().map(|t| h * t).collect(),
    )
}

/// Recurrence coefficients of a discrete measure by the Stieltjes procedure.
pub fn stieltjes(x: &[f64], w: &[f64], n: usize) -> Recurrence {
    let m = x.len();
    let mu0: f64 = w.iter().sum();
    let mut alpha = Vec::with_capacity(n);
    let mut beta = vec![mu0];
    let mut p_prev = vec![0.0; m];
    let mut p = vec![1.0 / mu0.sqrt(); m];
    for k in 0..n {
        let a: f64 = (0..m).map(|i| w[i] * x[i] * p[i] * p[i]).sum();
        alpha.push(a);
        let sb = if k == 0 { 0.0 } else { beta[k].sqrt() };
        let mut q: Vec<f64> = (0..m).map(|i| (x[i] - a) * p[i] - sb * p_prev[i]).collect();
        let nrm2: f64 = (0..m).map(|i| w[i] * q[i] * q[i]).sum();
        beta.push(nrm2);
        let s = nrm2.sqrt();
        for qi in q.iter_mut() {
            *qi /= s;
        }
        p_prev = p;
        p = q;
    }
    Recurrence { alpha, beta }
}

/// Gauss rule on [0, inf) for the weight density(r) e^{-r^2/2}, built from a
/// fine Gauss-Legendre discretization of [0, r_max].
pub fn radial_gauss<F: Fn(f64) -> f64>(n: usize, density: F) -> (Vec<f64>, Vec<f64>) {
    let r_max = 16.0;
    let panels = 8;
    let per = 60;
    let mut xs = Vec::with_capacity(panels * per);
    let mut ws = Vec::with_capacity(panels * per);
    for p in 0..panels {
        let a = r_max * p as f64 / panels as f64;
        let b = r_max * (p + 1) as f64 / panels as f64;
        let (x, w) = gauss_legendre_on(per, a, b);
        for (xi, wi) in x.into_iter().zip(w) {
            xs.push(xi);
            ws.push(wi * density(xi) * (-0.5 * xi * xi).exp());
        }
    }
    stieltjes(&xs, &ws, n).gauss(n)
}

/// Product rule on the unit sphere: Gauss-Legendre in the polar cosine times
/// uniform azimuth. Weights sum to 1 (normalized surface measure).
#[derive(Clone, Debug)]
pub struct SphereRule {
    pub dirs: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
}

impl SphereRule {
    pub fn new(n_polar: usize, n_azimuth: usize) -> Self {
        Self::with_axis(n_polar, n_azimuth, [0.0, 0.0, 1.0])
    }

    /// Same rule with its polar axis along `axis` (unit vector).
    pub fn with_axis(n_polar: usize, n_azimuth: usize, axis: [f64; 3]) -> Self {
        let (t, wt) = gauss_legendre(n_polar);
        let (e1, e2) = orthonormal_frame(axis);
        let mut dirs = Vec::with_capacity(n_polar * n_azimuth);
        let mut weights = Vec::with_capacity(n_polar * n_azimuth);
        for (ct, w) in t.iter().zip(&wt) {
            let st = (1.0 - ct * ct).max(0.0).sqrt();
            for j in 0..n_azimuth {
                let phi = 2.0 * PI * (j as f64 + 0.5) / n_azimuth as f64;
                let (sp, cp) = phi.sin_cos();
                let mut d = [0.0; 3];
                for i in 0..3 {
                    d[i] = ct * axis[i] + st * (cp * e1[i] + sp * e2[i]);
                }
                dirs.push(d);
                weights.push(0.5 * w / n_azimuth as f64);
            }
        }
        SphereRule { dirs, weights }
    }

    pub fn len(&self) -> usize {
        self.dirs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dirs.is_empty()
    }
}

/// Two unit vectors completing `n` to a right-handed orthonormal frame.
pub fn orthonormal_frame(n: [f64; 3]) -> ([f64; 3], [f64; 3]) {
    let a = if n[0].abs() < 0.9 {
        [1.0, 0.0, 0.0]
    } else {
        [0.0, 1.0, 0.0]
    };
    let d = dot(a, n);
    let mut e1 = [a[0] - d * n[0], a[1] - d * n[1], a[2] - d * n[2]];
    let l = norm(e1);
    for x in e1.iter_mut() {
        *x /= l;
    }
    let e2 = cross(n, e1);
    (e1, e2)
}

#[inline]
pub fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
pub fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

#[inline]
pub fn norm(a: [f64; 3]) -> f64 {
    dot(a, a).sqrt()
}
