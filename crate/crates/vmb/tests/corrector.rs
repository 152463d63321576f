use nalgebra::Matrix3;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use vmb::burnett::{OhmConstants, TransportCoefficients};
use vmb::corrector::*;
use vmb::error::Error;
use vmb::fluid::*;
use vmb::torus::*;

fn coeffs(sigma: f64) -> TransportCoefficients {
    TransportCoefficients {
        mu: 1.0,
        kappa: 1.5,
        sigma,
        lambda: 1.5,
    }
}

fn ohm(keys: &[&str]) -> OhmConstants {
    OhmConstants {
        m_matrix: Matrix3::new(1.0, 0.2, 0.0, -0.1, 0.9, 0.3, 0.0, 0.1, 1.1),
        v: [0.3, -0.2, 0.5],
        v_bar: [0.0; 3],
        c: 1.0,
        gamma_minus_keys: keys.iter().map(|k| k.to_string()).collect(),
    }
}

fn max_diff(a: &Field, b: &Field) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).norm()))
}

fn random_vfield(g: &Grid, kmax: i64, rng: &mut ChaCha8Rng) -> VField {
    FluidState::random(g, 1.0, kmax, rng).e
}

#[test]
fn scalars_hand_values() {
    let g = Grid::new(16).unwrap();
    let c = coeffs(2.0);
    // u0 = 0: phi = kappa theta0
    let mut s = FluidState::zeros(&g);
    s.theta = g.from_fn(|x| x[0].cos() + 0.3 * (2.0 * x[1]).sin());
    let (phi, u1, rho1) = solve_corrector_scalars(&s, &c).unwrap();
    assert!(max_diff(&phi, &fscale(&s.theta, c.kappa)) < 1e-14);
    assert!(max_diff(&u1[0], &g.dx(&phi, 0)) < 1e-14);
    assert!(rho1.iter().all(|x| x.norm() < 1e-15));
    // theta0 = 0: phi = 0
    let tg = FluidState::taylor_green(&g, 1.0);
    let (phi, _, rho1) = solve_corrector_scalars(&tg, &c).unwrap();
    assert!(phi.iter().all(|x| x.norm() < 1e-15));
    // Taylor-Green: rho1 = -cos2x cos2y / 12 + (cos2x + cos2y) / 8
    let want = g.from_fn(|x| {
        let (a, b) = ((2.0 * x[0]).cos(), (2.0 * x[1]).cos());
        -a * b / 12.0 + (a + b) / 8.0
    });
    assert!(max_diff(&rho1, &want) < 1e-14);
    // Taylor-Green with theta0 = cos x: phi = kappa cos x - cos y / 2 + cos 2x cos y / 10
    let mut s = tg.clone();
    s.theta = g.from_fn(|x| x[0].cos());
    let (phi, _, _) = solve_corrector_scalars(&s, &c).unwrap();
    let want = g.from_fn(|x| c.kappa * x[0].cos() - 0.5 * x[1].cos() + (2.0 * x[0]).cos() * x[1].cos() / 10.0);
    assert!(max_diff(&phi, &want) < 1e-14);
}

#[test]
fn scalars_reject_compressible_data() {
    let g = Grid::new(16).unwrap();
    let mut s = FluidState::zeros(&g);
    // u = (sin x, 0, 0) is not divergence free; u.grad theta has a mean
    s.u[0] = g.from_fn(|x| x[0].sin());
    s.theta = g.from_fn(|x| x[0].cos());
    assert!(matches!(solve_corrector_scalars(&s, &coeffs(2.0)), Err(Error::Solvability(_))));
    // divergence-free data never trips the check
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let s = FluidState::random(&g, 1.0, 3, &mut rng);
    assert!(solve_corrector_scalars(&s, &coeffs(2.0)).is_ok());
}

#[test]
fn j1_with_zero_backgrounds() {
    let g = Grid::new(16).unwrap();
    let fluid = FluidState::zeros(&g);
    let e1 = [g.from_fn(|x| x[1].sin()), g.from_fn(|x| (2.0 * x[0]).cos()), g.zeros()];
    let corr = CorrectorState::new(&fluid, &coeffs(2.0), e1.clone(), g.vzeros()).unwrap();
    assert!(corr.u1.iter().all(|f| f.iter().all(|x| x.norm() == 0.0)));
    let j = j1_current(&corr, &fluid, &ohm(&[]), &coeffs(2.0), &[]).unwrap();
    for c in 0..3 {
        assert!(max_diff(&j[c], &fscale(&e1[c], 2.0)) < 1e-14);
    }
}

#[test]
fn j1_matches_pointwise_assembly() {
    // n1 = 0 and B0 = B1 = 0: j1 = n0 u1 + sigma E1 + sum of background currents
    let g = Grid::new(32).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(32);
    let mut fluid = FluidState::random(&g, 1.0, 2, &mut rng);
    fluid.b = g.vzeros();
    let c = coeffs(1.7);
    let e1 = g.leray(&FluidState::random(&g, 1.0, 2, &mut rng).e);
    let corr = CorrectorState::new(&fluid, &c, e1.clone(), g.vzeros()).unwrap();
    let gm = vec![
        ("transport_g1".to_string(), random_vfield(&g, 2, &mut rng)),
        ("lorentz_B0_g1".to_string(), random_vfield(&g, 2, &mut rng)),
    ];
    let j = j1_current(&corr, &fluid, &ohm(&["transport_g1", "lorentz_B0_g1"]), &c, &gm).unwrap();
    let n0 = g.inverse(&fluid.n());
    for comp in 0..3 {
        let u1 = g.inverse(&corr.u1[comp]);
        let e = g.inverse(&e1[comp]);
        let a = g.inverse(&gm[0].1[comp]);
        let b = g.inverse(&gm[1].1[comp]);
        let got = g.inverse(&j[comp]);
        for p in 0..g.len() {
            let want = n0[p] * u1[p] + c.sigma * e[p] + a[p] + b[p];
            assert!((got[p] - want).abs() < 1e-12, "{} {want}", got[p]);
        }
    }
    // a current without Ohm constants is rejected
    match j1_current(&corr, &fluid, &ohm(&["transport_g1"]), &c, &gm) {
        Err(Error::Config(m)) => assert!(m.contains("lorentz_B0_g1")),
        other => panic!("{other:?}"),
    }
}

fn linear_state(g: &Grid, rng: &mut ChaCha8Rng, fluid: &FluidState) -> (CorrectorState, Vec<(String, VField)>) {
    let mut corr = CorrectorState::new(
        fluid,
        &coeffs(2.0),
        FluidState::random(g, 1.0, 2, rng).e,
        FluidState::random(g, 1.0, 2, rng).b,
    )
    .unwrap();
    corr.u1 = g.grad(&FluidState::random(g, 1.0, 2, rng).theta);
    (corr, vec![("transport_g1".to_string(), random_vfield(g, 2, rng))])
}

#[test]
fn damped_wave_roots() {
    let g = Grid::new(16).unwrap();
    for (sigma, k) in [(2.0, 2.0), (3.0, 1.0)] {
        let c = coeffs(sigma);
        let zero = FluidState::zeros(&g);
        let b1 = [g.zeros(), g.zeros(), g.from_fn(|x| (k * x[0]).cos())];
        let mut corr = CorrectorState::new(&zero, &c, g.vzeros(), b1).unwrap();
        let dt = 1e-3;
        let stepper = CorrectorStepper::new(&g, sigma, dt).unwrap();
        let level = |t: f64| {
            let mut f = zero.clone();
            f.time = t;
            Background::new(&f, &c, vec![]).unwrap()
        };
        let m = (0..g.len()).find(|&m| g.k(m) == [k, 0.0, 0.0]).unwrap();
        let amp0 = corr.b1[2][m].re;
        // roots of s^2 + sigma s + k^2 = 0 with B(0) = 1, B'(0) = 0
        let disc = sigma * sigma / 4.0 - k * k;
        let exact = |t: f64| {
            let a = -sigma / 2.0;
            if disc < 0.0 {
                let w = (-disc).sqrt();
                (a * t).exp() * ((w * t).cos() - a / w * (w * t).sin())
            } else {
                let w = disc.sqrt();
                let (s1, s2) = (a + w, a - w);
                (s1 * (s2 * t).exp() - s2 * (s1 * t).exp()) / (s1 - s2)
            }
        };
        let envelope = |t: f64| (-sigma / 2.0 * t + disc.max(0.0).sqrt() * t).exp();
        for step in 0..1000 {
            let t = step as f64 * dt;
            corr = stepper.step(&corr, &level(t), &level(t + dt), &ohm(&[]), &c).unwrap();
            let t = t + dt;
            let got = corr.b1[2][m].re / amp0;
            assert!((got - exact(t)).abs() <= 1e-4 * envelope(t), "t={t}: {got} {}", exact(t));
        }
        let d = corrector_diagnostics(&corr, sigma, 1, None);
        assert!(d.mean_b1 == 0.0 && d.div_b1 < 1e-14);
    }
}

struct Run {
    fluid: Vec<FluidState>,
    corr: Vec<CorrectorState>,
    bg: Vec<Background>,
}

fn driven_run(dt: f64, steps: usize, amp: f64) -> Run {
    let g = Grid::new(16).unwrap();
    let c = coeffs(2.0);
    let p = FluidParams {
        mu: c.mu,
        kappa: c.kappa,
        sigma: c.sigma,
        dt,
        dealias: true,
        t_end: 1.0,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(33);
    let fs = Stepper::new(&g, p).unwrap();
    let mut fluid = vec![FluidState::random(&g, amp, 2, &mut rng)];
    for _ in 0..steps {
        let next = fs.step(fluid.last().unwrap()).unwrap();
        fluid.push(next);
    }
    let keys = ohm(&["transport_g1"]);
    let bg: Vec<Background> = fluid
        .iter()
        .map(|f| {
            let cur = vec![("transport_g1".to_string(), vscale(&g.curl(&f.b), 0.1))];
            Background::new(f, &c, cur).unwrap()
        })
        .collect();
    let init = FluidState::random(&g, amp, 2, &mut rng);
    let mut corr = vec![CorrectorState::new(&fluid[0], &c, init.e, init.b).unwrap()];
    let cs = CorrectorStepper::new(&g, c.sigma, dt).unwrap();
    for i in 0..steps {
        let next = cs.step(corr.last().unwrap(), &bg[i], &bg[i + 1], &keys, &c).unwrap();
        corr.push(next);
    }
    Run { fluid, corr, bg }
}

#[test]
fn constraints_and_energy_along_run() {
    let dt = 1e-2;
    let run = driven_run(dt, 200, 1e-2);
    let c = coeffs(2.0);
    let p = FluidParams {
        mu: c.mu,
        kappa: c.kappa,
        sigma: c.sigma,
        dt,
        dealias: true,
        t_end: 1.0,
    };
    let m = 1;
    // the combined monitor with a fixed fluid weight
    let weight = 10.0;
    let monitor = |i: usize| {
        corrector_diagnostics(&run.corr[i], c.sigma, m, None).e1m
            + weight * fluid_diagnostics(&run.fluid[i], &p, m + 2).e0s
    };
    let mut prev = monitor(0);
    let mut worst_u1: f64 = 0.0;
    for (i, corr) in run.corr.iter().enumerate() {
        let d = corrector_diagnostics(corr, c.sigma, m, None);
        assert!(d.mean_b1 == 0.0 && d.div_b1 < 1e-14);
        assert!(corr.constraint_defect() < 1e-14);
        if i > 0 {
            let now = monitor(i);
            assert!(now <= prev * (1.0 + 1e-12), "step {i}: {now} > {prev}");
            prev = now;
        }
        // measured constant of |u1|^2_{H^{M+1}} <= C (1 + E0) D0 at order M + 1
        let f = fluid_diagnostics(&run.fluid[i], &p, m + 1);
        let u1 = run.fluid[i].grid.vhs2(&corr.u1, (m + 1) as f64);
        worst_u1 = worst_u1.max(u1 / ((1.0 + f.e0s) * f.d0s));
    }
    assert!(worst_u1.is_finite() && worst_u1 > 0.0);
    eprintln!("measured u1 bound constant: {worst_u1:.3e}");
}

#[test]
fn damped_wave_residual_second_order() {
    let c = coeffs(2.0);
    let keys = ohm(&["transport_g1"]);
    let residual = |dt: f64| {
        let steps = (0.2 / dt).round() as usize;
        let run = driven_run(dt, steps, 0.5);
        let i = steps / 2;
        let jt = j1_tilde(&run.corr[i], &run.bg[i].fluid, &keys, &c, &run.bg[i].gamma_minus).unwrap();
        let st = WaveStencil {
            prev: &run.corr[i - 1],
            next: &run.corr[i + 1],
            dt,
            jtilde: &jt,
        };
        corrector_diagnostics(&run.corr[i], c.sigma, 1, Some(st)).damped_wave_residual
    };
    let (a, b) = (residual(2e-2), residual(1e-2));
    assert!(a / b >= 3.5, "{a:e} {b:e}");
}

#[test]
fn diagnostics_basics() {
    let g = Grid::new(16).unwrap();
    let d = corrector_diagnostics(&CorrectorState::zeros(&g), 2.0, 2, None);
    assert_eq!(d, CorrectorDiagnostics::default());
    let mut rng = ChaCha8Rng::seed_from_u64(34);
    for _ in 0..10 {
        let b = FluidState::random(&g, 1.0, 4, &mut rng).b;
        assert!(g.vhs2(&b, 0.0) <= g.vgrad_hs2(&b, 0.0));
    }
}

#[test]
fn stepper_errors() {
    let g = Grid::new(16).unwrap();
    let c = coeffs(2.0);
    assert!(matches!(CorrectorStepper::new(&g, 2.0, 1.0), Err(Error::StepSize { .. })));
    let zero = FluidState::zeros(&g);
    let a = Background::new(&zero, &c, vec![]).unwrap();
    let mut later = zero.clone();
    later.time = 0.5;
    let b = Background::new(&later, &c, vec![]).unwrap();
    let corr = CorrectorState::zeros(&g);
    assert!(matches!(
        step_linear_maxwell(&corr, 1e-2, &a, &b, &ohm(&[]), &c),
        Err(Error::Input(_))
    ));
    let mut huge = corr.clone();
    huge.e1 = [g.from_fn(|x| 1e308 * x[1].sin()), g.zeros(), g.zeros()];
    later.time = 1e-2;
    let b = Background::new(&later, &c, vec![]).unwrap();
    assert!(matches!(
        step_linear_maxwell(&huge, 1e-2, &a, &b, &ohm(&[]), &c),
        Err(Error::Divergence(_))
    ));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn j1_is_linear_in_corrector_fields(seed in 0u64..100_000, scale in -3.0f64..3.0) {
        let g = Grid::new(16).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let fluid = FluidState::random(&g, 1.0, 2, &mut rng);
        let (corr, gm) = linear_state(&g, &mut rng, &fluid);
        let mut scaled = corr.clone();
        scaled.e1 = vscale(&corr.e1, scale);
        scaled.b1 = vscale(&corr.b1, scale);
        scaled.u1 = vscale(&corr.u1, scale);
        let gs: Vec<(String, VField)> = gm.iter().map(|(k, v)| (k.clone(), vscale(v, scale))).collect();
        let o = ohm(&["transport_g1"]);
        let j = j1_current(&corr, &fluid, &o, &coeffs(2.0), &gm).unwrap();
        let js = j1_current(&scaled, &fluid, &o, &coeffs(2.0), &gs).unwrap();
        for c in 0..3 {
            prop_assert!(max_diff(&js[c], &fscale(&j[c], scale)) < 1e-12);
        }
    }
}
