//! Inversion of the linearized operators on their kernel complements,
//! Burnett functions, transport coefficients and Ohm constants.

use crate::collision::OperatorSet;
use crate::error::{check_len, Error, Result};
use crate::velocity::{HermiteBasis, Shapes};
use nalgebra::{DMatrix, DVector, Matrix3, SymmetricEigen};
use std::collections::BTreeMap;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Which {
    L,
    LplusLfrak,
}

#[derive(Clone, Debug)]
pub struct Solved {
    pub x: DVector<f64>,
    /// Norm of the kernel component removed from the right-hand side.
    pub removed_norm: f64,
    /// True when the removed component exceeds 1e-6 of the rhs norm.
    pub warning: bool,
}

/// Pseudo-inverse by symmetric eigendecomposition with explicit deflation.
#[derive(Clone, Debug)]
pub struct Inverter {
    pub which: Which,
    values: DVector<f64>,
    vectors: DMatrix<f64>,
    kernel: Vec<DVector<f64>>,
    threshold: f64,
}

impl Inverter {
    pub fn new(ops: &OperatorSet, which: Which) -> Result<Self> {
        let (m, kernel) = match which {
            Which::L => (&ops.l_mat, ops.basis.invariants().to_vec()),
            Which::LplusLfrak => (&ops.lplus_lfrak_mat, vec![ops.basis.unit([0, 0, 0])]),
        };
        let sym = (m + m.transpose()) * 0.5;
        let eig = SymmetricEigen::new(sym);
        let threshold = 1e-9 * eig.eigenvalues.amax();
        let nk = eig.eigenvalues.iter().filter(|l| l.abs() <= threshold).count();
        if nk != kernel.len() {
            return Err(Error::Assembly(format!(
                "numerical kernel dimension {nk}, expected {}",
                kernel.len()
            )));
        }
        Ok(Inverter {
            which,
            values: eig.eigenvalues,
            vectors: eig.eigenvectors,
            kernel,
            threshold,
        })
    }

    pub fn kernel(&self) -> &[DVector<f64>] {
        &self.kernel
    }

    pub fn project_out(&self, x: &DVector<f64>, order: &[usize]) -> DVector<f64> {
        let mut r = x.clone();
        for &i in order {
            let k = &self.kernel[i];
            let c = k.dot(&r);
            r.axpy(-c, k, 1.0);
        }
        r
    }

    pub fn solve(&self, rhs: &DVector<f64>) -> Result<Solved> {
        let order: Vec<usize> = (0..self.kernel.len()).collect();
        self.solve_ordered(rhs, &order)
    }

    /// Same as `solve`, deflating the kernel vectors in the given order.
    pub fn solve_ordered(&self, rhs: &DVector<f64>, order: &[usize]) -> Result<Solved> {
        check_len(self.vectors.nrows(), rhs.len())?;
        let r = self.project_out(rhs, order);
        let removed_norm = (rhs - &r).norm();
        let mut x = DVector::zeros(rhs.len());
        for (i, l) in self.values.iter().enumerate() {
            if l.abs() > self.threshold {
                let u = self.vectors.column(i);
                x.axpy(u.dot(&r) / l, &u, 1.0);
            }
        }
        let x = self.project_out(&x, order);
        Ok(Solved {
            x,
            removed_norm,
            warning: removed_norm > 1e-6 * rhs.norm(),
        })
    }

    /// Solution only; kernel components of the rhs are dropped silently.
    pub fn apply(&self, rhs: &DVector<f64>) -> DVector<f64> {
        self.solve(rhs).expect("length checked by caller").x
    }
}

pub fn solve_in_orthogonal(ops: &OperatorSet, which: Which, rhs: &DVector<f64>) -> Result<Solved> {
    Inverter::new(ops, which)?.solve(rhs)
}

/// Sampled radial profile: (radius, value, relative spread on the shell).
pub type Profile = Vec<(f64, f64, f64)>;

#[derive(Clone, Debug)]
pub struct BurnettBundle {
    pub a_hat: [[DVector<f64>; 3]; 3],
    pub b_hat: [DVector<f64>; 3],
    pub phi_tilde: [DVector<f64>; 3],
    pub psi_tilde: DVector<f64>,
    pub shapes: Shapes,
    pub phi_profile: Profile,
    pub psi_profile: Profile,
    pub alpha_phi_profile: Profile,
    pub alpha_psi_profile: Profile,
    /// Largest relative spread of the four factorizations.
    pub factorization_spread: f64,
    /// Largest relative gap between the two alpha profiles.
    pub alpha_mismatch: f64,
    pub residual: f64,
}

/// Least-squares fit of value(v) = p(|v|) shape(v) shell by shell over the
/// quadrature nodes. `pairs` yields (value, shape) samples per node.
fn radial_profile<F>(basis: &HermiteBasis, pairs: F) -> Profile
where
    F: Fn(usize) -> Vec<(f64, f64)>,
{
    let mut shells: BTreeMap<i64, (f64, Vec<usize>)> = BTreeMap::new();
    for (q, v) in basis.quad.nodes.iter().enumerate() {
        let r = crate::quad::norm(*v);
        let key = (r * 1e8).round() as i64;
        shells.entry(key).or_insert((r, Vec::new())).1.push(q);
    }
    let mut out = Vec::new();
    for (_, (r, nodes)) in shells {
        let mut num = 0.0;
        let mut den = 0.0;
        let samples: Vec<(f64, f64)> = nodes.iter().flat_map(|&q| pairs(q)).collect();
        for (val, shp) in &samples {
            num += val * shp;
            den += shp * shp;
        }
        if den < 1e-20 {
            continue;
        }
        let p = num / den;
        let mut spread: f64 = 0.0;
        let scale = samples.iter().map(|(v, _)| v.abs()).fold(0.0, f64::max);
        for (val, shp) in &samples {
            spread = spread.max((val - p * shp).abs());
        }
        out.push((r, p, if scale > 0.0 { spread / scale } else { 0.0 }));
    }
    out
}

/// Relative residual of op x = P_perp rhs.
fn residual_of(m: &DMatrix<f64>, inv: &Inverter, x: &DVector<f64>, rhs: &DVector<f64>) -> f64 {
    let r = inv.project_out(rhs, &(0..inv.kernel().len()).collect::<Vec<_>>());
    (m * x - &r).norm() / r.norm().max(1e-300)
}

/// Profiles are compared on shells inside this radius, where the truncated
/// polynomials carry most of the Gaussian mass.
const PROFILE_RADIUS: f64 = 4.0;

pub fn compute_burnett_functions(ops: &OperatorSet) -> Result<BurnettBundle> {
    let basis = &ops.basis;
    let shapes = Shapes::new(basis);
    let il = Inverter::new(ops, Which::L)?;
    let ia = Inverter::new(ops, Which::LplusLfrak)?;
    let mut residual: f64 = 0.0;
    let a_hat = [0, 1, 2].map(|i| [0, 1, 2].map(|j| il.apply(&shapes.a[i][j])));
    let b_hat = [0, 1, 2].map(|i| il.apply(&shapes.b[i]));
    let phi_tilde = [0, 1, 2].map(|i| ia.apply(&shapes.v[i]));
    let psi_tilde = ia.apply(&shapes.psi);
    for i in 0..3 {
        for j in 0..3 {
            residual = residual.max(residual_of(&ops.l_mat, &il, &a_hat[i][j], &shapes.a[i][j]));
        }
        residual = residual.max(residual_of(&ops.l_mat, &il, &b_hat[i], &shapes.b[i]));
        residual = residual.max(residual_of(
            &ops.lplus_lfrak_mat,
            &ia,
            &phi_tilde[i],
            &shapes.v[i],
        ));
    }
    residual = residual.max(residual_of(&ops.lplus_lfrak_mat, &ia, &psi_tilde, &shapes.psi));

    let samples = |c: &DVector<f64>| basis.reconstruct(c).expect("basis length");
    let ah: Vec<Vec<Vec<f64>>> = a_hat
        .iter()
        .map(|row| row.iter().map(samples).collect())
        .collect();
    let aa: Vec<Vec<Vec<f64>>> = shapes
        .a
        .iter()
        .map(|row| row.iter().map(samples).collect())
        .collect();
    let bh: Vec<Vec<f64>> = b_hat.iter().map(samples).collect();
    let bb: Vec<Vec<f64>> = shapes.b.iter().map(samples).collect();
    let ph: Vec<Vec<f64>> = phi_tilde.iter().map(samples).collect();
    let pv: Vec<Vec<f64>> = shapes.v.iter().map(samples).collect();
    let sh = samples(&psi_tilde);
    let sp = samples(&shapes.psi);

    let phi_profile = radial_profile(basis, |q| {
        let mut s = Vec::with_capacity(9);
        for i in 0..3 {
            for j in 0..3 {
                s.push((ah[i][j][q], aa[i][j][q]));
            }
        }
        s
    });
    let psi_profile = radial_profile(basis, |q| (0..3).map(|i| (bh[i][q], bb[i][q])).collect());
    let alpha_phi_profile =
        radial_profile(basis, |q| (0..3).map(|i| (ph[i][q], pv[i][q])).collect());
    let alpha_psi_profile = radial_profile(basis, |q| vec![(sh[q], sp[q])]);

    let inner = |p: &Profile| {
        p.iter()
            .filter(|(r, _, _)| *r <= PROFILE_RADIUS)
            .map(|x| x.2)
            .fold(0.0, f64::max)
    };
    let factorization_spread = inner(&phi_profile)
        .max(inner(&psi_profile))
        .max(inner(&alpha_phi_profile))
        .max(inner(&alpha_psi_profile));
    let mut alpha_mismatch: f64 = 0.0;
    for (a, b) in alpha_phi_profile.iter().zip(&alpha_psi_profile) {
        if (a.0 - b.0).abs() < 1e-9 && a.0 <= PROFILE_RADIUS {
            alpha_mismatch = alpha_mismatch.max((a.1 - b.1).abs() / a.1.abs().max(1e-300));
        }
    }
    if factorization_spread > 0.02 {
        return Err(Error::Truncation(format!(
            "radial factorization spread {factorization_spread:.3e} exceeds 2%; increase D"
        )));
    }
    Ok(BurnettBundle {
        a_hat,
        b_hat,
        phi_tilde,
        psi_tilde,
        shapes,
        phi_profile,
        psi_profile,
        alpha_phi_profile,
        alpha_psi_profile,
        factorization_spread,
        alpha_mismatch,
        residual,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TransportCoefficients {
    pub mu: f64,
    pub kappa: f64,
    pub sigma: f64,
    pub lambda: f64,
}

impl TransportCoefficients {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("mu", self.mu),
            ("kappa", self.kappa),
            ("sigma", self.sigma),
            ("lambda", self.lambda),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Assembly(format!("{name} = {v} is not positive")));
            }
        }
        Ok(())
    }
}

/// mu from the viscous tensor contraction, (1/20) <A_hat : A>.
pub fn mu_from_tensor(bundle: &BurnettBundle) -> f64 {
    let mut s = 0.0;
    for i in 0..3 {
        for j in 0..3 {
            s += bundle.a_hat[i][j].dot(&bundle.shapes.a[i][j]);
        }
    }
    s / 20.0
}

/// mu from the radial profile, (1/30) <phi(|v|) |v|^4>.
pub fn mu_from_profile(bundle: &BurnettBundle, basis: &HermiteBasis) -> f64 {
    let mut s = 0.0;
    for (v, w) in basis.quad.nodes.iter().zip(&basis.quad.weights) {
        let r = crate::quad::norm(*v);
        let key = (r * 1e8).round();
        let phi = bundle
            .phi_profile
            .iter()
            .find(|p| (p.0 * 1e8).round() == key)
            .map(|p| p.1)
            .unwrap_or(0.0);
        s += w * phi * r.powi(4);
    }
    s / 30.0
}

pub fn compute_transport(bundle: &BurnettBundle) -> Result<TransportCoefficients> {
    let mu = mu_from_tensor(bundle);
    let kappa = (0..3)
        .map(|i| bundle.b_hat[i].dot(&bundle.shapes.b[i]))
        .sum::<f64>()
        / 15.0;
    let sigma = (0..3)
        .map(|i| bundle.phi_tilde[i].dot(&bundle.shapes.v[i]))
        .sum::<f64>()
        * 2.0
        / 3.0;
    let lambda = bundle.psi_tilde.dot(&bundle.shapes.psi);
    let t = TransportCoefficients {
        mu,
        kappa,
        sigma,
        lambda,
    };
    t.validate()?;
    Ok(t)
}

#[derive(Clone, Debug)]
pub struct OhmConstants {
    pub m_matrix: Matrix3<f64>,
    pub v: [f64; 3],
    pub v_bar: [f64; 3],
    pub c: f64,
    /// Registry keys of the background currents these constants cover.
    pub gamma_minus_keys: Vec<String>,
}

impl OhmConstants {
    pub fn covers(&self, key: &str) -> Result<()> {
        if self.gamma_minus_keys.iter().any(|k| k == key) {
            Ok(())
        } else {
            Err(Error::Config(format!("no Ohm constants for term '{key}'")))
        }
    }
}

/// U = 2 <Y v> and C = 2 <Y (|v|^2/3 - 1)> of an antisymmetric shape Y.
pub fn upsilon_moments(shapes: &Shapes, y: &DVector<f64>) -> ([f64; 3], f64) {
    let u = [0, 1, 2].map(|i| 2.0 * y.dot(&shapes.v[i]));
    let c = 2.0 * y.dot(&shapes.psi) * 2.0 / 3.0;
    (u, c)
}

/// Ohm constants from Q(1, .) in matrix form and the (L + Lfrak) inverse.
/// `keys` lists the enabled background-current terms.
pub fn compute_ohm_constants(
    ops: &OperatorSet,
    bundle: &BurnettBundle,
    keys: &[String],
) -> Result<OhmConstants> {
    let ia = Inverter::new(ops, Which::LplusLfrak)?;
    let q1 = &ops.k1_mat - &ops.k2_mat;
    let sh = &bundle.shapes;
    let r2 = &sh.psi * 2.0 + &sh.one * 3.0;
    let w_r2 = ia.apply(&(&q1 * &r2));
    let third = &sh.psi * (2.0 / 3.0);
    let mut m = Matrix3::zeros();
    let mut v_bar = [0.0; 3];
    for i in 0..3 {
        let wi = ia.apply(&(&q1 * &sh.v[i]));
        for j in 0..3 {
            m[(i, j)] = 2.0 * wi.dot(&sh.v[j]);
        }
        v_bar[i] = 2.0 * wi.dot(&third);
    }
    let v = [0, 1, 2].map(|i| w_r2.dot(&sh.v[i]));
    let c = w_r2.dot(&third);
    let out = OhmConstants {
        m_matrix: m,
        v,
        v_bar,
        c,
        gamma_minus_keys: keys.to_vec(),
    };
    if !out.m_matrix.iter().all(|x| x.is_finite()) || !out.c.is_finite() {
        return Err(Error::Assembly("non-finite Ohm constants".into()));
    }
    Ok(out)
}
