use nalgebra::{DVector, Matrix3, Rotation3, Vector3};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::sync::OnceLock;
use vmb::burnett::*;
use vmb::collision::*;
use vmb::error::Error;
use vmb::quad::gauss_legendre;
use vmb::velocity::*;

struct Case {
    ops: OperatorSet,
    bundle: BurnettBundle,
    transport: TransportCoefficients,
}

fn build(d: usize, q: usize, gamma: f64) -> Case {
    let b = HermiteBasis::new(d, &VelocityQuadrature::build(q).unwrap()).unwrap();
    let ops = assemble_l(&b, &KernelConfig::new(gamma).unwrap(), Route::ViaQ).unwrap();
    let bundle = compute_burnett_functions(&ops).unwrap();
    let transport = compute_transport(&bundle).unwrap();
    Case {
        ops,
        bundle,
        transport,
    }
}

/// Cases at D = 6 and D = 8 for gamma = 0 and gamma = 1.
fn case(d: usize, gamma_one: bool) -> &'static Case {
    static CASES: OnceLock<Vec<Case>> = OnceLock::new();
    let all = CASES.get_or_init(|| {
        let mut v = Vec::new();
        for g in [0.0, 1.0] {
            for d in [6, 8] {
                v.push(build(d, d + 4, g));
            }
        }
        v
    });
    &all[2 * gamma_one as usize + (d == 8) as usize]
}

/// Mean over the sphere of a function of cos(theta), constant angular density.
fn sphere_mean(f: impl Fn(f64) -> f64) -> f64 {
    let (x, w) = gauss_legendre(24);
    x.iter().zip(&w).map(|(x, w)| 0.5 * w * f(*x)).sum()
}

/// Eigenvalues of the linearized operator for gamma = 0 on the Sonine
/// polynomial of index (n, l):
/// 1 - <cos^{2n+l}(t/2) P_l(cos(t/2)) + sin^{2n+l}(t/2) P_l(sin(t/2))>.
fn maxwell_eigen(n: i32, l: usize) -> f64 {
    let p = |l: usize, y: f64| match l {
        0 => 1.0,
        1 => y,
        _ => 0.5 * (3.0 * y * y - 1.0),
    };
    1.0 - sphere_mean(|x| {
        let c = (0.5 * (1.0 + x)).sqrt();
        let s = (0.5 * (1.0 - x)).sqrt();
        c.powi(2 * n + l as i32) * p(l, c) + s.powi(2 * n + l as i32) * p(l, s)
    })
}

/// Gain factor of g -> Q+(g, 1) on the same polynomials.
fn maxwell_gain(n: i32, l: usize) -> f64 {
    sphere_mean(|x| {
        let c = (0.5 * (1.0 + x)).sqrt();
        c.powi(2 * n + l as i32) * if l == 1 { c } else { 1.0 }
    })
}

#[test]
fn gamma_zero_matches_sonine_eigenvalues() {
    // <A:A> = 10, <|B|^2> = 15/2, <v.v> = 3, <psi^2> = 3/2
    let mu = 10.0 / (20.0 * maxwell_eigen(0, 2));
    let kappa = 7.5 / (15.0 * maxwell_eigen(1, 1));
    let sigma = 2.0 / 3.0 * 3.0 / (2.0 * (1.0 - maxwell_gain(0, 1)));
    let lambda = 1.5 / (2.0 * (1.0 - maxwell_gain(1, 0)));
    for d in [6, 8] {
        let t = case(d, false).transport;
        assert!((t.mu - mu).abs() < 1e-10, "{} {mu}", t.mu);
        assert!((t.kappa - kappa).abs() < 1e-10, "{} {kappa}", t.kappa);
        assert!((t.sigma - sigma).abs() < 1e-10, "{} {sigma}", t.sigma);
        assert!((t.lambda - lambda).abs() < 1e-10, "{} {lambda}", t.lambda);
    }
    assert!((mu - 1.0).abs() < 1e-12 && (kappa - 1.5).abs() < 1e-12);
}

#[test]
fn gamma_one_anchor_values() {
    let t = case(6, true).transport;
    let want = [
        2.813435139409693e-1,
        4.248602092902055e-1,
        6.770927380451709e-1,
        5.170371483717431e-1,
    ];
    for (got, want) in [t.mu, t.kappa, t.sigma, t.lambda].iter().zip(want) {
        assert!((got - want).abs() < 1e-9 * want, "{got} {want}");
    }
}

#[test]
fn transport_refines() {
    for g in [false, true] {
        let a = case(6, g).transport;
        let b = case(8, g).transport;
        for (x, y) in [(a.mu, b.mu), (a.kappa, b.kappa), (a.sigma, b.sigma), (a.lambda, b.lambda)] {
            assert!(x > 0.0 && y > 0.0);
            assert!((x - y).abs() <= 0.01 * y, "{x} {y}");
        }
    }
}

#[test]
fn viscosity_two_ways() {
    for g in [false, true] {
        for d in [6, 8] {
            let c = case(d, g);
            let a = mu_from_tensor(&c.bundle);
            let b = mu_from_profile(&c.bundle, &c.ops.basis);
            assert!((a - b).abs() < 1e-6 * a, "{a} {b}");
        }
    }
}

#[test]
fn bundle_invariants() {
    for g in [false, true] {
        let c = case(6, g);
        let b = &c.bundle;
        let inv = c.ops.basis.invariants();
        assert!(b.residual <= 1e-8);
        for i in 0..3 {
            for j in 0..3 {
                for e in inv.iter() {
                    assert!(b.a_hat[i][j].dot(e).abs() < 1e-8);
                }
            }
            for e in inv.iter() {
                assert!(b.b_hat[i].dot(e).abs() < 1e-8);
            }
            assert!(b.phi_tilde[i][0].abs() < 1e-8);
        }
        assert!(b.psi_tilde[0].abs() < 1e-8);
        let sh = &b.shapes;
        let l = &c.ops.l_mat;
        let la = &c.ops.lplus_lfrak_mat;
        assert!((l * &b.a_hat[0][1] - &sh.a[0][1]).norm() < 1e-8);
        assert!((l * &b.b_hat[2] - &sh.b[2]).norm() < 1e-8);
        assert!((la * &b.phi_tilde[1] - &sh.v[1]).norm() < 1e-8);
        assert!((la * &b.psi_tilde - &sh.psi).norm() < 1e-8);
    }
}

#[test]
fn conductivity_identities() {
    for g in [false, true] {
        let c = case(6, g);
        let b = &c.bundle;
        let t = c.transport;
        for i in 0..3 {
            for j in 0..3 {
                let m = b.phi_tilde[i].dot(&b.shapes.v[j]);
                if i == j {
                    assert!((m - 0.5 * t.sigma).abs() <= 1e-8, "{m}");
                } else {
                    assert!(m.abs() <= 1e-8);
                }
            }
        }
        assert!((b.psi_tilde.dot(&b.shapes.psi) - t.lambda).abs() < 1e-12);
    }
}

#[test]
fn radial_factorization() {
    let c = case(8, true);
    assert!(c.bundle.factorization_spread <= 0.02);
    assert!(!c.bundle.phi_profile.is_empty() && !c.bundle.alpha_psi_profile.is_empty());
    for (r, p, _) in &c.bundle.phi_profile {
        assert!(r.is_finite() && p.is_finite());
    }
    // the two alpha profiles coincide for Maxwell molecules
    assert!(case(8, false).bundle.alpha_mismatch < 1e-8);
}

#[test]
fn anisotropic_operator_fails_factorization() {
    let c = case(6, false);
    let b = &c.ops.basis;
    let n = b.len();
    let mut p = nalgebra::DMatrix::<f64>::identity(n, n);
    for e in b.invariants() {
        p -= &e * e.transpose();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let s = nalgebra::DMatrix::from_fn(n, n, |_, _| rng.random::<f64>() - 0.5);
    let s = (&s + s.transpose()) * 0.05;
    let nu = &c.ops.nu_mat + &p * s * &p;
    let ops = OperatorSet::from_parts(
        c.ops.cfg.clone(),
        b.clone(),
        Route::ViaQ,
        nu,
        c.ops.k1_mat.clone(),
        c.ops.k2_mat.clone(),
    )
    .unwrap();
    assert!(matches!(compute_burnett_functions(&ops), Err(Error::Truncation(_))));
}

#[test]
fn solve_examples() {
    let c = case(6, true);
    let inv = c.ops.basis.invariants();
    let s = solve_in_orthogonal(&c.ops, Which::L, &inv[2]).unwrap();
    assert!(s.x.amax() < 1e-12);
    assert!((s.removed_norm - 1.0).abs() < 1e-12);
    assert!(s.warning);
    let s = solve_in_orthogonal(&c.ops, Which::L, &c.bundle.shapes.a[0][1]).unwrap();
    assert!((s.x - &c.bundle.a_hat[0][1]).amax() < 1e-8);
    assert!(!s.warning);
    let short = DVector::zeros(3);
    assert!(matches!(
        solve_in_orthogonal(&c.ops, Which::L, &short),
        Err(Error::Shape { .. })
    ));
}

#[test]
fn deflation_order_does_not_matter() {
    let c = case(6, true);
    let il = Inverter::new(&c.ops, Which::L).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let r = DVector::from_fn(c.ops.n(), |_, _| rng.random::<f64>() - 0.5);
    let a = il.solve_ordered(&r, &[0, 1, 2, 3, 4]).unwrap().x;
    let b = il.solve_ordered(&r, &[4, 2, 0, 3, 1]).unwrap().x;
    assert!((a - b).amax() <= 1e-10);
}

#[test]
fn ohm_constants_are_isotropic() {
    for g in [false, true] {
        let c = case(6, g);
        let oc = compute_ohm_constants(&c.ops, &c.bundle, &["transport_g1".to_string()]).unwrap();
        let m = oc.m_matrix;
        // brute-force average over random rotations
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let mut avg = Matrix3::zeros();
        let count = 2000;
        for _ in 0..count {
            let axis = Vector3::from_fn(|_, _| rng.random::<f64>() - 0.5).normalize();
            let r = Rotation3::from_axis_angle(&nalgebra::Unit::new_normalize(axis), 6.3 * rng.random::<f64>());
            avg += r.matrix() * m * r.matrix().transpose();
        }
        avg /= count as f64;
        // an isotropic matrix is its own rotation average
        assert!((m - avg).amax() <= 1e-6 * m.amax());
        // analytic values
        assert!((m - Matrix3::identity()).amax() < 1e-10);
        assert!((oc.c - 1.0).abs() < 1e-10);
        for i in 0..3 {
            assert!(oc.v[i].abs() < 1e-8 && oc.v_bar[i].abs() < 1e-8);
        }
        assert!(oc.covers("transport_g1").is_ok());
        assert!(matches!(oc.covers("lorentz_B0_g1"), Err(Error::Config(_))));
    }
}

#[test]
fn ohm_constant_refines_with_quadrature() {
    let a = build(6, 10, 1.0);
    let b = build(6, 12, 1.0);
    let ca = compute_ohm_constants(&a.ops, &a.bundle, &[]).unwrap().c;
    let cb = compute_ohm_constants(&b.ops, &b.bundle, &[]).unwrap().c;
    assert!((ca - cb).abs() <= 0.01 * cb.abs());
}

#[test]
fn nonpositive_coefficient_rejected() {
    let t = TransportCoefficients {
        mu: 1.0,
        kappa: -0.5,
        sigma: 2.0,
        lambda: 1.5,
    };
    match t.validate() {
        Err(Error::Assembly(m)) => assert!(m.contains("kappa")),
        other => panic!("{other:?}"),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn inverse_solves_projected_rhs(seed in 0u64..100_000, plus in any::<bool>()) {
        let c = case(6, true);
        let which = if plus { Which::LplusLfrak } else { Which::L };
        let m = if plus { &c.ops.lplus_lfrak_mat } else { &c.ops.l_mat };
        let inv = Inverter::new(&c.ops, which).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let r = DVector::from_fn(c.ops.n(), |_, _| rng.random::<f64>() - 0.5);
        let s = inv.solve(&r).unwrap();
        let pr = inv.project_out(&r, &(0..inv.kernel().len()).collect::<Vec<_>>());
        prop_assert!((m * &s.x - &pr).norm() <= 1e-8 * r.norm());
        for k in inv.kernel() {
            prop_assert!(k.dot(&s.x).abs() <= 1e-10);
        }
    }
}
