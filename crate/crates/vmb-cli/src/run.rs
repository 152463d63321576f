//! Subcommand drivers.

use crate::cache::{attach_q_tensor, cache_dir, CacheKey};
use crate::config::RunConfig;
use crate::output::{write_csv, write_json, Table};
use crate::snapshot::{write_snapshot, Array};
use crate::{CliError, CliResult, Context};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::path::PathBuf;
use vmb::burnett::{
    compute_burnett_functions, compute_ohm_constants, compute_transport, BurnettBundle, OhmConstants,
    TransportCoefficients,
};
use vmb::collision::{assemble_l, collision_frequency, pair_kernel, spectral_gap, KernelConfig, OperatorSet, Route};
use vmb::corrector::{
    corrector_diagnostics, j1_tilde, Background, CorrectorState, CorrectorStepper, WaveStencil,
};
use vmb::expansion::{
    build_expansion, check_hierarchy, gamma_minus_currents, kinetic_energy_functionals, loglog_slope,
    make_well_prepared, vmb_residual, well_prepared_init, ExpansionField, ExpansionOps, Pair, Registry,
};
use vmb::fluid::{fluid_diagnostics, FluidParams, FluidState, Stepper};
use vmb::torus::{Field, Grid, VField};
use vmb::velocity::{HermiteBasis, VelocityQuadrature};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Coeffs,
    Fluid,
    Corrector,
    Expansion,
    ResidualSweep,
    Check,
}

/// Energy order of the fluid report and of the corrector report.
pub const FLUID_S: u32 = 2;
pub const CORRECTOR_M: u32 = 1;
pub const SWEEP_EPSILONS: [f64; 5] = [1e-1, 3e-2, 1e-2, 3e-3, 1e-3];
const NU_SAMPLES: usize = 1000;

#[derive(Debug, Default)]
pub struct Outcome {
    pub artifacts: Vec<PathBuf>,
    /// `name = value` lines for the terminal.
    pub summary: Vec<(String, f64)>,
    /// Names of failed checks; nonempty only for `check`.
    pub failures: Vec<String>,
}

impl Outcome {
    fn note(&mut self, name: &str, v: f64) {
        self.summary.push((name.to_string(), v));
    }
}

pub fn run(cfg: &RunConfig, cmd: Command) -> CliResult<Outcome> {
    match cmd {
        Command::Coeffs => coeffs(cfg),
        Command::Fluid => fluid(cfg),
        Command::Corrector => corrector(cfg),
        Command::Expansion => expansion(cfg),
        Command::ResidualSweep => residual_sweep(cfg),
        Command::Check => check(cfg),
    }
}

pub struct Operators {
    pub ops: OperatorSet,
    pub bundle: BurnettBundle,
    pub coeffs: TransportCoefficients,
    pub ohm: OhmConstants,
}

pub fn operators(cfg: &RunConfig) -> CliResult<Operators> {
    let quad = VelocityQuadrature::build(cfg.quad_order).ctx("velocity::quadrature")?;
    let basis = HermiteBasis::new(cfg.degree, &quad).ctx("velocity::basis")?;
    let kc = KernelConfig::new(cfg.gamma).ctx("collision::kernel_config")?;
    let ops = assemble_l(&basis, &kc, Route::ViaQ).ctx("collision::assemble_l")?;
    let bundle = compute_burnett_functions(&ops).ctx("burnett::compute_burnett_functions")?;
    let mut coeffs = compute_transport(&bundle).ctx("burnett::compute_transport")?;
    coeffs.mu = cfg.mu.unwrap_or(coeffs.mu);
    coeffs.kappa = cfg.kappa.unwrap_or(coeffs.kappa);
    coeffs.sigma = cfg.sigma.unwrap_or(coeffs.sigma);
    coeffs.validate().ctx("burnett::transport")?;
    let ohm = compute_ohm_constants(&ops, &bundle, &cfg.registry).ctx("burnett::compute_ohm_constants")?;
    Ok(Operators { ops, bundle, coeffs, ohm })
}

pub fn expansion_ops(cfg: &RunConfig) -> CliResult<ExpansionOps> {
    let mut o = operators(cfg)?;
    let key = CacheKey {
        gamma: cfg.gamma,
        degree: cfg.degree,
        quad_order: cfg.quad_order,
        tensor_order: cfg.degree + 2,
    };
    attach_q_tensor(&mut o.ops, &key, &cache_dir(&std::env::temp_dir().join("vmb-cache")))?;
    ExpansionOps::new(&o.ops, &o.bundle, &o.coeffs, &o.ohm).ctx("expansion::ops")
}

fn grid(cfg: &RunConfig) -> CliResult<Grid> {
    Grid::with_shape(cfg.grid).ctx("torus::grid")
}

fn initial_fluid(cfg: &RunConfig, g: &Grid) -> FluidState {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    FluidState::random(g, cfg.amplitude, cfg.kmax, &mut rng)
}

/// Divergence-free corrector fields proportional to the data amplitude.
fn corrector_fields(cfg: &RunConfig, g: &Grid) -> (VField, VField) {
    let a = cfg.amplitude;
    let e1 = [
        g.from_fn(|x| 0.4 * a * x[1].sin()),
        g.from_fn(|x| 0.3 * a * (x[0] - x[1]).cos()),
        g.from_fn(|x| 0.2 * a * x[0].cos()),
    ];
    let b1 = [g.zeros(), g.zeros(), g.from_fn(|x| 0.6 * a * (x[0] + 2.0 * x[1]).cos())];
    (e1, b1)
}

fn params(cfg: &RunConfig, c: &TransportCoefficients) -> FluidParams {
    FluidParams { mu: c.mu, kappa: c.kappa, sigma: c.sigma, dt: cfg.dt, dealias: true, t_end: cfg.t_end }
}

fn steps(cfg: &RunConfig) -> usize {
    (cfg.t_end / cfg.dt).round() as usize
}

fn field_array(name: &str, g: &Grid, f: &Field) -> Array {
    Array::new(name, g.shape.to_vec(), g.inverse(f))
}

fn vfield_array(name: &str, g: &Grid, f: &VField) -> Array {
    let mut dims = vec![3];
    dims.extend(g.shape);
    Array::new(name, dims, f.iter().flat_map(|c| g.inverse(c)).collect())
}

fn pair_arrays(prefix: &str, p: &Pair) -> [Array; 2] {
    let dims = vec![p.s.nrows(), p.s.ncols()];
    let rm = |m: &nalgebra::DMatrix<f64>| m.transpose().as_slice().to_vec();
    [
        Array::new(&format!("{prefix}_s"), dims.clone(), rm(&p.s)),
        Array::new(&format!("{prefix}_a"), dims, rm(&p.a)),
    ]
}

fn fluid_arrays(f: &FluidState) -> Vec<Array> {
    let g = &f.grid;
    vec![
        vfield_array("u", g, &f.u),
        field_array("theta", g, &f.theta),
        vfield_array("E", g, &f.e),
        vfield_array("B", g, &f.b),
    ]
}

#[derive(Serialize)]
struct CoeffsReport {
    gamma: f64,
    degree: usize,
    quad_order: usize,
    mu: f64,
    kappa: f64,
    sigma: f64,
    lambda: f64,
    spectral_gap: f64,
    ohm_m: [[f64; 3]; 3],
    ohm_v: [f64; 3],
    ohm_v_bar: [f64; 3],
    ohm_c: f64,
}

fn coeffs(cfg: &RunConfig) -> CliResult<Outcome> {
    let o = operators(cfg)?;
    let gap = spectral_gap(&o.ops).ctx("collision::spectral_gap")?.lambda;
    let c = o.coeffs;
    let m = o.ohm.m_matrix;
    let rep = CoeffsReport {
        gamma: cfg.gamma,
        degree: cfg.degree,
        quad_order: cfg.quad_order,
        mu: c.mu,
        kappa: c.kappa,
        sigma: c.sigma,
        lambda: c.lambda,
        spectral_gap: gap,
        ohm_m: [0, 1, 2].map(|i| [0, 1, 2].map(|j| m[(i, j)])),
        ohm_v: o.ohm.v,
        ohm_v_bar: o.ohm.v_bar,
        ohm_c: o.ohm.c,
    };
    let path = cfg.out_dir.join("coeffs.json");
    write_json(&path, &rep)?;
    let mut out = Outcome { artifacts: vec![path], ..Default::default() };
    for (k, v) in [("mu", c.mu), ("kappa", c.kappa), ("sigma", c.sigma), ("lambda", c.lambda), ("spectral_gap", gap)] {
        out.note(k, v);
    }
    Ok(out)
}

pub const FLUID_HEADER: [&str; 6] = ["t", "E0s", "D0s", "charge_residual", "divB_max", "meanB_max"];
pub const CORRECTOR_HEADER: [&str; 6] =
    ["t", "E1M", "D1M", "damped_wave_residual", "divB1_max", "meanB1_max"];
pub const SWEEP_HEADER: [&str; 5] =
    ["epsilon", "kinetic_residual", "ampere_residual", "faraday_residual", "gauss_residual"];

/// Fluid trajectory with its report table.
pub fn fluid_run(cfg: &RunConfig, c: &TransportCoefficients) -> CliResult<(Vec<FluidState>, Table)> {
    let g = grid(cfg)?;
    let p = params(cfg, c);
    let stepper = Stepper::new(&g, p).ctx("fluid::stepper")?;
    let mut traj = vec![initial_fluid(cfg, &g)];
    for _ in 0..steps(cfg) {
        let next = stepper.step(traj.last().unwrap()).ctx("fluid::step_nsfm")?;
        traj.push(next);
    }
    let mut t = Table::new(&FLUID_HEADER);
    for s in &traj {
        let d = fluid_diagnostics(s, &p, FLUID_S);
        t.push(vec![s.time, d.e0s, d.d0s, d.charge_residual, d.div_b, d.mean_b]);
    }
    Ok((traj, t))
}

fn fluid(cfg: &RunConfig) -> CliResult<Outcome> {
    let o = operators(cfg)?;
    let (traj, table) = fluid_run(cfg, &o.coeffs)?;
    let csv = cfg.out_dir.join("fluid.csv");
    let snap = cfg.out_dir.join("fluid.nsfm");
    write_csv(&csv, &table)?;
    write_snapshot(&fluid_arrays(traj.last().unwrap()), &snap)?;
    let mut out = Outcome { artifacts: vec![csv, snap], ..Default::default() };
    let last = table.rows.last().unwrap();
    out.note("E0s_final", last[1]);
    Ok(out)
}

pub struct CorrectorRun {
    pub fluid: Vec<FluidState>,
    pub corr: Vec<CorrectorState>,
    pub table: Table,
}

fn background(ctx: &ExpansionOps, f: &FluidState) -> CliResult<Background> {
    let keys = &ctx.ohm.gamma_minus_keys;
    let gm = gamma_minus_currents(ctx, f, keys).ctx("expansion::gamma_minus_currents")?;
    Background::new(f, &ctx.coeffs, gm).ctx("corrector::background")
}

/// Fluid and corrector trajectories; the damped-wave residual is reported
/// at interior levels and is NaN at the two ends.
pub fn corrector_run(cfg: &RunConfig, ctx: &ExpansionOps) -> CliResult<CorrectorRun> {
    let co = &ctx.coeffs;
    let (fluid, _) = fluid_run(cfg, co)?;
    let g = fluid[0].grid.clone();
    let (e1, b1) = corrector_fields(cfg, &g);
    let cs = CorrectorStepper::new(&g, co.sigma, cfg.dt).ctx("corrector::stepper")?;
    let bg: Vec<Background> = fluid.iter().map(|f| background(ctx, f)).collect::<CliResult<_>>()?;
    let mut corr = vec![CorrectorState::new(&fluid[0], co, e1, b1).ctx("corrector::state")?];
    for i in 0..fluid.len() - 1 {
        let next = cs.step(&corr[i], &bg[i], &bg[i + 1], &ctx.ohm, co).ctx("corrector::step")?;
        corr.push(next);
    }
    let mut table = Table::new(&CORRECTOR_HEADER);
    for i in 0..corr.len() {
        let mut wave = f64::NAN;
        if i > 0 && i + 1 < corr.len() {
            let jt = j1_tilde(&corr[i], &fluid[i], &ctx.ohm, co, &bg[i].gamma_minus).ctx("corrector::j1_tilde")?;
            let st = WaveStencil { prev: &corr[i - 1], next: &corr[i + 1], dt: cfg.dt, jtilde: &jt };
            wave = corrector_diagnostics(&corr[i], co.sigma, CORRECTOR_M, Some(st)).damped_wave_residual;
        }
        let d = corrector_diagnostics(&corr[i], co.sigma, CORRECTOR_M, None);
        table.push(vec![corr[i].time, d.e1m, d.d1m, wave, d.div_b1, d.mean_b1]);
    }
    Ok(CorrectorRun { fluid, corr, table })
}

fn corrector(cfg: &RunConfig) -> CliResult<Outcome> {
    let ctx = expansion_ops(cfg)?;
    let run = corrector_run(cfg, &ctx)?;
    let csv = cfg.out_dir.join("corrector.csv");
    let snap = cfg.out_dir.join("corrector.nsfm");
    write_csv(&csv, &run.table)?;
    let c = run.corr.last().unwrap();
    let g = &c.grid;
    let arrays = vec![
        field_array("phi", g, &c.phi),
        vfield_array("u1", g, &c.u1),
        field_array("rho1", g, &c.rho1),
        vfield_array("E1", g, &c.e1),
        vfield_array("B1", g, &c.b1),
    ];
    write_snapshot(&arrays, &snap)?;
    let mut out = Outcome { artifacts: vec![csv, snap], ..Default::default() };
    out.note("E1M_final", run.table.rows.last().unwrap()[1]);
    Ok(out)
}

/// Expansion at t = 0 of well-prepared random data.
pub fn initial_expansion(cfg: &RunConfig, ctx: &ExpansionOps, reg: &Registry) -> CliResult<ExpansionField> {
    let g = grid(cfg)?;
    let f = make_well_prepared(&initial_fluid(cfg, &g));
    let (e1, b1) = corrector_fields(cfg, &g);
    let c = CorrectorState::new(&f, &ctx.coeffs, e1, b1).ctx("corrector::state")?;
    build_expansion(ctx, &f, &c, reg).ctx("expansion::build_expansion")
}

/// Small smooth remainder proposal of low velocity degree.
pub fn remainder_proposal(cfg: &RunConfig, ctx: &ExpansionOps, g: &Grid) -> (Pair, VField, VField) {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(1));
    let n = ctx.n();
    let mut p = Pair::zeros(n, g.len());
    let low = n.min(10);
    for k in 0..low {
        let (cs, ca, ph) = (rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(0.0..6.0));
        for q in 0..g.len() {
            let x = g.x(q);
            p.s[(k, q)] = 0.01 * cs * (x[0] + ph).cos();
            p.a[(k, q)] = 0.01 * ca * (x[1] - ph).sin();
        }
    }
    let e = [g.from_fn(|x| 0.01 * x[1].cos()), g.zeros(), g.zeros()];
    let b = [g.zeros(), g.zeros(), g.from_fn(|x| 0.01 * (x[0] + x[1]).cos())];
    (p, e, b)
}

#[derive(Serialize)]
struct Ablation {
    term: String,
    order_1_kinetic: f64,
    ratio: f64,
}

#[derive(Serialize)]
struct ExpansionReport {
    order_minus1: f64,
    order_0_kinetic: f64,
    order_0_maxwell: f64,
    order_1_kinetic: f64,
    order_1_maxwell: f64,
    constraints: f64,
    overflow: f64,
    source_overflow: f64,
    ablations: Vec<Ablation>,
    conservation_worst: f64,
    e_nl: f64,
    d_nl: f64,
    outside_regime: bool,
}

fn expansion(cfg: &RunConfig) -> CliResult<Outcome> {
    let ctx = expansion_ops(cfg)?;
    let reg = cfg.registry_struct();
    let exp = initial_expansion(cfg, &ctx, &reg)?;
    let h = check_hierarchy(&ctx, &exp).ctx("expansion::check_hierarchy")?;
    let mut ablations = Vec::new();
    for key in &reg.g2 {
        let e = build_expansion(&ctx, &exp.fluid, &exp.corr, &reg.without(key)).ctx("expansion::build_expansion")?;
        let r = check_hierarchy(&ctx, &e).ctx("expansion::check_hierarchy")?;
        ablations.push(Ablation {
            term: key.clone(),
            order_1_kinetic: r.order_1_kinetic,
            ratio: r.order_1_kinetic / h.order_1_kinetic.max(1e-300),
        });
    }
    let g = exp.grid().clone();
    let (gr, er, br) = remainder_proposal(cfg, &ctx, &g);
    let eps = SWEEP_EPSILONS[0];
    let init = well_prepared_init(&ctx, &exp, &gr, &er, &br, eps).ctx("expansion::well_prepared_init")?;
    let p = params(cfg, &ctx.coeffs);
    let fd = fluid_diagnostics(&exp.fluid, &p, cfg.n_order + 5);
    let cd = corrector_diagnostics(&exp.corr, ctx.coeffs.sigma, cfg.n_order + 3, None);
    let k = kinetic_energy_functionals(&ctx.ops, &g, &init.remainder, &fd, &cd, cfg.n_order, cfg.l)
        .ctx("expansion::kinetic_energy_functionals")?;
    let rep = ExpansionReport {
        order_minus1: h.order_minus1,
        order_0_kinetic: h.order_0_kinetic,
        order_0_maxwell: h.order_0_maxwell,
        order_1_kinetic: h.order_1_kinetic,
        order_1_maxwell: h.order_1_maxwell,
        constraints: h.constraints,
        overflow: h.overflow,
        source_overflow: exp.source_overflow,
        ablations,
        conservation_worst: init.report.worst(),
        e_nl: k.e_nl,
        d_nl: k.d_nl,
        outside_regime: k.outside_regime,
    };
    let json = cfg.out_dir.join("expansion.json");
    let snap = cfg.out_dir.join("expansion.nsfm");
    write_json(&json, &rep)?;
    let mut arrays = Vec::new();
    for (name, p) in [("g0", &exp.g0), ("g1", &exp.g1), ("g2", &exp.g2)] {
        arrays.extend(pair_arrays(name, p));
    }
    write_snapshot(&arrays, &snap)?;
    let mut out = Outcome { artifacts: vec![json, snap], ..Default::default() };
    out.note("order_1_kinetic", h.order_1_kinetic);
    Ok(out)
}

/// Kinetic residuals over `SWEEP_EPSILONS` between t = 0 and t = dt.
pub fn sweep(cfg: &RunConfig, ctx: &ExpansionOps, reg: &Registry) -> CliResult<Table> {
    let a = initial_expansion(cfg, ctx, reg)?;
    let co = &ctx.coeffs;
    let p = FluidParams { t_end: cfg.dt, ..params(cfg, co) };
    let f2 = Stepper::new(a.grid(), p).ctx("fluid::stepper")?.step(&a.fluid).ctx("fluid::step_nsfm")?;
    let cs = CorrectorStepper::new(a.grid(), co.sigma, cfg.dt).ctx("corrector::stepper")?;
    let c2 = cs
        .step(&a.corr, &background(ctx, &a.fluid)?, &background(ctx, &f2)?, &ctx.ohm, co)
        .ctx("corrector::step")?;
    let b = build_expansion(ctx, &f2, &c2, reg).ctx("expansion::build_expansion")?;
    let pts = vmb_residual(ctx, &a, &b, None, &SWEEP_EPSILONS).ctx("expansion::vmb_residual")?;
    let mut t = Table::new(&SWEEP_HEADER);
    for q in pts {
        t.push(vec![q.epsilon, q.kinetic_residual, q.ampere_residual, q.faraday_residual, q.gauss_residual]);
    }
    Ok(t)
}

#[derive(Serialize)]
struct SweepReport {
    slope: f64,
    slope_without_g2: f64,
}

fn residual_sweep(cfg: &RunConfig) -> CliResult<Outcome> {
    let ctx = expansion_ops(cfg)?;
    let full = sweep(cfg, &ctx, &cfg.registry_struct())?;
    let bare = sweep(cfg, &ctx, &Registry { g2: Vec::new(), ..cfg.registry_struct() })?;
    let slope = |t: &Table| loglog_slope(&SWEEP_EPSILONS, &t.column("kinetic_residual").unwrap());
    let rep = SweepReport { slope: slope(&full), slope_without_g2: slope(&bare) };
    let csv = cfg.out_dir.join("residual_sweep.csv");
    let json = cfg.out_dir.join("residual_sweep.json");
    write_csv(&csv, &full)?;
    write_json(&json, &rep)?;
    let mut out = Outcome { artifacts: vec![csv, json], ..Default::default() };
    out.note("slope", rep.slope);
    out.note("slope_without_g2", rep.slope_without_g2);
    Ok(out)
}

#[derive(Clone, Debug, Serialize)]
pub struct CheckItem {
    pub name: String,
    pub value: f64,
    /// `<=` bound, or a strict lower bound when `lower` is set.
    pub bound: f64,
    pub lower: bool,
    pub pass: bool,
}

#[derive(Default)]
struct Suite {
    items: Vec<CheckItem>,
}

impl Suite {
    fn at_most(&mut self, name: &str, value: f64, bound: f64) {
        let pass = value <= bound;
        self.items.push(CheckItem { name: name.into(), value, bound, lower: false, pass });
    }

    fn above(&mut self, name: &str, value: f64, bound: f64) {
        let pass = value > bound;
        self.items.push(CheckItem { name: name.into(), value, bound, lower: true, pass });
    }
}

#[derive(Serialize)]
struct CheckReport {
    config: String,
    passed: bool,
    checks: Vec<CheckItem>,
}

fn check_velocity(s: &mut Suite, o: &Operators) {
    let b = &o.ops.basis;
    let q = &b.quad;
    let r2 = |v: [f64; 3]| v[0] * v[0] + v[1] * v[1] + v[2] * v[2];
    let m = |f: &dyn Fn([f64; 3]) -> f64| q.bracket(&q.sample(f)).unwrap_or(f64::NAN);
    s.at_most("quadrature_mass", (m(&|_| 1.0) - 1.0).abs(), 1e-12);
    s.at_most("quadrature_second_moment", (m(&r2) - 3.0).abs(), 1e-10);
    s.at_most("quadrature_fourth_moment", (m(&|v| r2(v) * r2(v)) - 15.0).abs(), 1e-8);
    let n = b.len();
    s.at_most("gram_orthonormality", (b.gram() - nalgebra::DMatrix::<f64>::identity(n, n)).amax(), 1e-10);
}

fn check_operator(s: &mut Suite, o: &Operators) -> CliResult<()> {
    let ops = &o.ops;
    let bl = ops.big_l();
    let ker = pair_kernel(&ops.basis).iter().map(|k| (&bl * k).amax()).fold(0.0, f64::max);
    s.at_most("operator_kernel", ker, 1e-8);
    s.at_most("operator_symmetry", (&bl - bl.transpose()).amax(), 1e-10);
    s.above("spectral_gap", spectral_gap(ops).ctx("collision::spectral_gap")?.lambda, 0.0);
    Ok(())
}

fn check_frequency(s: &mut Suite, cfg: &RunConfig) -> CliResult<()> {
    let kc = KernelConfig::new(cfg.gamma).ctx("collision::kernel_config")?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(2));
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for _ in 0..NU_SAMPLES {
        let r = 20.0 * rng.random::<f64>();
        let d = [0, 1, 2].map(|_| rng.random::<f64>() - 0.5);
        let len = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
        let nu = collision_frequency(d.map(|x| r * x / len), &kc).ctx("collision::collision_frequency")?;
        let ratio = nu / (1.0 + r).powf(cfg.gamma);
        lo = lo.min(ratio);
        hi = hi.max(ratio);
    }
    s.above("frequency_lower_constant", lo, 0.0);
    s.at_most("frequency_upper_constant", hi, f64::MAX);
    if cfg.gamma == 0.0 {
        let nu = collision_frequency([0.3, -1.2, 2.0], &kc).ctx("collision::collision_frequency")?;
        s.at_most("frequency_constant_at_gamma_zero", (nu - 1.0).abs(), 1e-12);
    }
    Ok(())
}

fn check_transport(s: &mut Suite, o: &Operators) {
    let c = o.coeffs;
    for (k, v) in [("mu", c.mu), ("kappa", c.kappa), ("sigma", c.sigma), ("lambda", c.lambda)] {
        s.above(&format!("{k}_positive"), v, 0.0);
    }
    let b = &o.bundle;
    let mut worst: f64 = 0.0;
    for i in 0..3 {
        for j in 0..3 {
            let want = if i == j { 0.5 * c.sigma } else { 0.0 };
            worst = worst.max((b.phi_tilde[i].dot(&b.shapes.v[j]) - want).abs());
        }
    }
    s.at_most("conductivity_orthogonality", worst, 1e-8);
}

fn check_fluid(s: &mut Suite, run: &CorrectorRun) {
    let g = &run.fluid[0].grid;
    let (mut div, mut mean, mut charge) = (0.0f64, 0.0f64, 0.0f64);
    for f in &run.fluid {
        div = div.max(g.max_abs_phys(&g.div(&f.b)));
        mean = (0..3).fold(mean, |m, c| m.max(f.b[c][0].norm()));
        charge = charge.max(f.charge_residual);
    }
    s.at_most("fluid_div_b", div, 1e-12);
    s.at_most("fluid_mean_b", mean, 1e-12);
    s.at_most("fluid_charge_residual", charge, 1e-6);
}

fn check(cfg: &RunConfig) -> CliResult<Outcome> {
    let mut s = Suite::default();
    let o = operators(cfg)?;
    check_velocity(&mut s, &o);
    check_operator(&mut s, &o)?;
    check_frequency(&mut s, cfg)?;
    check_transport(&mut s, &o);

    let ctx = expansion_ops(cfg)?;
    let p = params(cfg, &ctx.coeffs);
    let run = corrector_run(cfg, &ctx)?;
    check_fluid(&mut s, &run);
    let mut rise: f64 = 0.0;
    for w in run.fluid.windows(2) {
        let a = fluid_diagnostics(&w[0], &p, FLUID_S).e0s;
        let b = fluid_diagnostics(&w[1], &p, FLUID_S).e0s;
        rise = rise.max(b - a);
    }
    s.at_most("fluid_energy_increase", rise, 1e-6);
    let mut cdef: f64 = 0.0;
    for c in &run.corr {
        let d = corrector_diagnostics(c, ctx.coeffs.sigma, CORRECTOR_M, None);
        cdef = cdef.max(c.constraint_defect()).max(d.div_b1).max(d.mean_b1);
    }
    s.at_most("corrector_constraints", cdef, 1e-12);

    let reg = cfg.registry_struct();
    let exp = initial_expansion(cfg, &ctx, &reg)?;
    let h = check_hierarchy(&ctx, &exp).ctx("expansion::check_hierarchy")?;
    s.at_most("hierarchy_order_minus1", h.order_minus1, 1e-8);
    s.at_most("hierarchy_order_0_kinetic", h.order_0_kinetic, 1e-6);
    s.at_most("hierarchy_order_0_maxwell", h.order_0_maxwell, 1e-6);
    s.at_most("hierarchy_order_1_kinetic", h.order_1_kinetic, 1e-5);
    s.at_most("hierarchy_order_1_maxwell", h.order_1_maxwell, 1e-5);
    s.at_most("hierarchy_constraints", h.constraints, 1e-10);
    let g = exp.grid().clone();
    let (gr, er, br) = remainder_proposal(cfg, &ctx, &g);
    let init = well_prepared_init(&ctx, &exp, &gr, &er, &br, SWEEP_EPSILONS[0])
        .ctx("expansion::well_prepared_init")?;
    s.at_most("conservation_defect", init.report.worst(), 1e-8);

    let failures: Vec<String> = s.items.iter().filter(|c| !c.pass).map(|c| c.name.clone()).collect();
    let config = cfg.serialize().lines().filter(|l| !l.starts_with("out =")).collect::<Vec<_>>().join("\n");
    let rep = CheckReport { config, passed: failures.is_empty(), checks: s.items };
    let path = cfg.out_dir.join("check.json");
    write_json(&path, &rep)?;
    let mut out = Outcome { artifacts: vec![path], failures, ..Default::default() };
    for c in &rep.checks {
        out.note(&c.name, c.value);
    }
    Ok(out)
}

/// Nonzero exit for failed checks, as an error value.
pub fn into_status(out: &Outcome) -> CliResult<()> {
    if out.failures.is_empty() {
        Ok(())
    } else {
        Err(CliError::CheckFailed(out.failures.join(", ")))
    }
}
