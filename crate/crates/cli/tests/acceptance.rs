//! Acceptance suite: every release gate runs here at its stated tolerance,
//! one test (and one printed PASS line) per criterion. Run with
//! `cargo test -p cnslab-cli --test acceptance` (add `-- --nocapture` to see
//! the measured values).

use std::f64::consts::PI;
use std::time::Instant;

use cnslab_core::dense;
use cnslab_core::diagnostics::{energy_law_residual, momentum_identity_residual};
use cnslab_core::dynamics::{
    run, run_observed, step, RunConfig, RunObserver, SnapshotInfo, Trajectory, Verdict,
};
use cnslab_core::estimates::weighted_gradient_coefficient;
use cnslab_core::fields::{GridSpec, ScalarField, VectorField, Vorticity};
use cnslab_core::lagrangian::{advect, lattice_seeds, pressure_formula_check, FlowSample};
use cnslab_core::lame::{decompose_velocity, solve_lame};
use cnslab_core::state::{make_scenario, random_analytic_state, PhysParams, Scenario, State};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn max_diff(a: &ScalarField, b: &ScalarField) -> f64 {
    a.zip_with(b, |x, y| x - y).sup_norm()
}

fn max_diff_vec(a: &VectorField, b: &VectorField) -> f64 {
    (0..a.dim())
        .map(|i| max_diff(a.component(i), b.component(i)))
        .fold(0.0, f64::max)
}

fn random_field(grid: &GridSpec, seed: u64) -> ScalarField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values = (0..grid.node_count())
        .map(|_| rng.gen_range(-1.0..1.0))
        .collect();
    ScalarField::new(grid.clone(), values).unwrap()
}

fn random_vector(grid: &GridSpec, seed: u64) -> VectorField {
    VectorField::new(
        (0..grid.dim())
            .map(|a| random_field(grid, seed * 10 + a as u64))
            .collect(),
    )
    .unwrap()
}

/// The acceptance set of smooth non-vacuum states: full geometric Fourier
/// tails so refinement studies stay above round-off.
fn acceptance_state(grid: &GridSpec, seed: u64) -> State {
    let params = PhysParams::new(1.0, 0.1).unwrap();
    random_analytic_state(grid, params, seed, 0.1, 0.35, 12).unwrap()
}

#[test]
fn c01_spectral_operator_oracles() {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for dim in [2usize, 3] {
        let grid = GridSpec::new(dim, 8, 1.0).unwrap();
        for seed in [1u64, 2] {
            let f = random_field(&grid, seed);
            let u = random_vector(&grid, seed + 50);
            worst = worst.max(max_diff_vec(&f.gradient(), &dense::gradient(&f)));
            worst = worst.max(max_diff(&u.divergence(), &dense::divergence(&u)));
            worst = worst.max(max_diff(&f.laplacian(), &dense::laplacian(&f)));
            worst = worst.max(match (u.curl(), dense::curl(&u)) {
                (Vorticity::Scalar(a), Vorticity::Scalar(b)) => max_diff(&a, &b),
                (Vorticity::Vector(a), Vorticity::Vector(b)) => max_diff_vec(&a, &b),
                _ => f64::INFINITY,
            });
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    assert!(worst <= 1e-12, "dense DFT oracle mismatch {worst:.3e}");
    assert!(elapsed < 5.0, "oracle block took {elapsed:.1}s");
    println!(
        "ACCEPTANCE c01 spectral operator oracles: PASS (max |diff| {worst:.3e}, {elapsed:.2}s)"
    );
}

fn shear_conservation_run() -> Trajectory {
    let grid = GridSpec::new(2, 64, 1.0).unwrap();
    let params = PhysParams::new(0.01, 0.0).unwrap();
    let s = make_scenario(
        &Scenario::Shear {
            amplitude: 0.1,
            background_pressure: 1.0,
        },
        &grid,
        params,
    )
    .unwrap();
    let mut rc = RunConfig::new(0.5);
    rc.output_every = 100;
    run(s, &rc).unwrap()
}

#[test]
fn c02_mass_and_energy_conservation() {
    let start = Instant::now();
    let tr = shear_conservation_run();
    let elapsed = start.elapsed().as_secs_f64();
    assert_eq!(tr.verdict, Verdict::Completed);
    let first = &tr.records[0];
    let last = tr.records.last().unwrap();
    let mass_drift = ((last.mass - first.mass) / first.mass).abs();
    let energy_drift = ((last.total_energy - first.total_energy) / first.total_energy).abs();
    assert!(mass_drift <= 1e-10, "mass drift {mass_drift:.3e}");
    assert!(energy_drift <= 1e-6, "energy drift {energy_drift:.3e}");
    assert!(elapsed < 120.0, "conservation run took {elapsed:.1}s");
    // viscous decay routes kinetic energy monotonically into pressure while
    // the total stays fixed: the energy identity in action
    for w in tr.records.windows(2) {
        assert!(
            w[1].weighted_kinetic_q2 < w[0].weighted_kinetic_q2,
            "kinetic energy must decay monotonically"
        );
    }
    println!(
        "ACCEPTANCE c02 conservation (shear 2D N=64, t=0.5): PASS \
         (mass drift {mass_drift:.3e} <= 1e-10, energy drift {energy_drift:.3e} <= 1e-6, {elapsed:.1}s)"
    );
}

fn bump_collapse_run() -> Trajectory {
    let grid = GridSpec::new(2, 64, 1.0).unwrap();
    let params = PhysParams::new(0.005, 0.0)
        .unwrap()
        .with_floors(1e-2, 1e-8)
        .unwrap();
    let sc = Scenario::GaussianBumpVacuum {
        amplitude: 1.0,
        width: 0.1,
        cutoff_radius: 0.35,
        background: 1e-6,
        pressure_ratio: 1.0,
        velocity: -1.0,
    };
    let s = make_scenario(&sc, &grid, params).unwrap();
    let mut rc = RunConfig::new(0.5);
    rc.output_every = 2;
    run(s, &rc).unwrap()
}

#[test]
fn c03_positivity_throughout_runs() {
    // every run in this suite starts from theta0 >= 0; the gates apply to
    // each of them
    let mut worst_theta = f64::INFINITY;
    let mut worst_p_preclip = f64::INFINITY;
    let mut clip_ok = true;

    let mut check = |name: &str, tr: &Trajectory| {
        let min_theta = tr
            .records
            .iter()
            .map(|r| r.min_theta)
            .fold(f64::INFINITY, f64::min);
        worst_theta = worst_theta.min(min_theta);
        worst_p_preclip = worst_p_preclip.min(tr.min_p_preclip);
        assert!(
            min_theta >= -1e-10,
            "{name}: min theta {min_theta:.3e} below -1e-10"
        );
        assert!(
            tr.min_p_preclip >= -1e-10,
            "{name}: pre-clip min P {:.3e} below -1e-10",
            tr.min_p_preclip
        );
        // clip budget below 1e-12 of the initial pressure mass
        let p_mass0 = tr.records[0].total_energy - 0.5 * tr.records[0].weighted_kinetic_q2;
        let ok = tr.clip_p_mass < 1e-12 * p_mass0;
        clip_ok &= ok;
        assert!(
            ok,
            "{name}: clip budget {:.3e} vs pressure mass {:.3e}",
            tr.clip_p_mass, p_mass0
        );
    };

    check("shear", &shear_conservation_run());
    check("bump", &bump_collapse_run());
    let grid = GridSpec::new(2, 32, 1.0).unwrap();
    let acoustic = make_scenario(
        &Scenario::Acoustic {
            amplitude: 0.05,
            background_rho: 1.0,
            background_pressure: 1.0,
        },
        &grid,
        PhysParams::new(0.01, 0.0).unwrap(),
    )
    .unwrap();
    let mut rc = RunConfig::new(0.2);
    rc.output_every = 50;
    let acoustic_tr = run(acoustic, &rc).unwrap();
    // mass stays within the conservation gate on this completed run too
    let m0 = acoustic_tr.records[0].mass;
    let m1 = acoustic_tr.records.last().unwrap().mass;
    assert_eq!(acoustic_tr.verdict, Verdict::Completed);
    assert!(((m1 - m0) / m0).abs() <= 1e-10);
    check("acoustic", &acoustic_tr);

    assert!(clip_ok);
    println!(
        "ACCEPTANCE c03 positivity: PASS (min theta {worst_theta:.3e} >= -1e-10, \
         pre-clip min P {worst_p_preclip:.3e} >= -1e-10, clip budgets < 1e-12 of pressure mass)"
    );
}

#[test]
fn c04_momentum_identity_on_20_states() {
    let grid = GridSpec::new(2, 64, 1.0).unwrap();
    let mut worst: f64 = 0.0;
    for seed in 0..20u64 {
        let s = acceptance_state(&grid, seed);
        assert!(s.vacuum_fraction() == 0.0, "state must be non-vacuum");
        let r = momentum_identity_residual(&s).unwrap();
        assert!(r <= 1e-8, "seed {seed}: momentum identity residual {r:.3e}");
        worst = worst.max(r);
    }
    println!(
        "ACCEPTANCE c04 momentum identity (20 random smooth states, N=64): PASS \
         (worst relative residual {worst:.3e} <= 1e-8)"
    );
}

#[test]
fn c05_energy_law_identity_and_refinement() {
    let grid = GridSpec::new(2, 64, 1.0).unwrap();
    let mut worst: f64 = 0.0;
    for seed in 0..20u64 {
        let s = acceptance_state(&grid, seed);
        let r = energy_law_residual(&s).unwrap();
        assert!(r.reliable);
        assert!(
            r.value <= 1e-6,
            "seed {seed}: energy law residual {:.3e}",
            r.value
        );
        worst = worst.max(r.value);
    }
    // monotone decrease under refinement on the same continuum states
    for seed in 0..3u64 {
        let mut vals = Vec::new();
        for n in [32usize, 64, 128] {
            let g = GridSpec::new(2, n, 1.0).unwrap();
            let s = acceptance_state(&g, seed);
            vals.push(energy_law_residual(&s).unwrap().value);
        }
        assert!(
            vals[0] > vals[1] && vals[1] > vals[2],
            "seed {seed}: residuals not monotone under refinement: {vals:?}"
        );
    }
    println!(
        "ACCEPTANCE c05 energy law (20 states, N=64 + refinement 32/64/128): PASS \
         (worst relative residual {worst:.3e} <= 1e-6, monotone decrease confirmed)"
    );
}

#[test]
fn c06_coefficient_algebra_sweep() {
    let mut count = 0;
    for i in 1..=10 {
        for j in -5..5 {
            let mu = i as f64 * 0.25;
            let lam = j as f64 * 0.25;
            let c = weighted_gradient_coefficient(mu, lam, 6.0).unwrap();
            assert_eq!(c, 6.0 * (mu - 4.0 * lam), "mu={mu} lambda={lam}");
            assert_eq!(c > 0.0, mu > 4.0 * lam, "mu={mu} lambda={lam}");
            count += 1;
        }
    }
    assert_eq!(count, 100);
    assert_eq!(weighted_gradient_coefficient(5.0, 1.0, 6.0).unwrap(), 6.0);
    println!(
        "ACCEPTANCE c06 q=6 coefficient algebra: PASS \
         (100-point sweep exact, positivity iff mu > 4 lambda)"
    );
}

struct SampleCollector {
    samples: Vec<FlowSample>,
}

impl RunObserver for SampleCollector {
    fn on_snapshot(&mut self, state: &State, _info: &SnapshotInfo) {
        self.samples.push(FlowSample::from_state(state));
    }
}

fn tracer_study(n: usize) -> (f64, f64) {
    let grid = GridSpec::new(2, n, 1.0).unwrap();
    let params = PhysParams::new(0.002, 0.0).unwrap();
    let s = make_scenario(
        &Scenario::Shear {
            amplitude: 0.3,
            background_pressure: 1.0,
        },
        &grid,
        params,
    )
    .unwrap();
    let mut rc = RunConfig::new(0.25);
    rc.output_every = 1000;
    rc.snapshot_every = 2;
    let mut col = SampleCollector {
        samples: Vec::new(),
    };
    let tr = run_observed(s, &rc, &mut col).unwrap();
    assert_eq!(tr.verdict, Verdict::Completed);
    let seeds = lattice_seeds(&grid, 4); // 16 tracers
    assert_eq!(seeds.len(), 16);
    let ts = advect(&col.samples, &seeds, 1).unwrap();
    let rep = pressure_formula_check(&ts, params.vacuum_threshold);
    assert_eq!(rep.excluded, 0);
    (rep.max_rel_error, rep.min_rhs)
}

#[test]
fn c07_pressure_path_formula() {
    // the shear run advances on an advective CFL, so doubling N halves both
    // the grid spacing and the sample spacing: one simultaneous refinement
    let (e32, min32) = tracer_study(32);
    let (e64, min64) = tracer_study(64);
    assert!(e64 <= 1e-2, "formula error {e64:.3e} above 1e-2");
    assert!(min32 >= 0.0 && min64 >= 0.0, "formula value went negative");
    let order = (e32 / e64).log2();
    assert!(order >= 1.5, "observed order {order:.2} below 1.5");
    println!(
        "ACCEPTANCE c07 pressure path formula (16 tracers, shear N=64, t<=0.25): PASS \
         (max rel error {e64:.3e} <= 1e-2, order {order:.2} >= 1.5, formula nonnegative)"
    );
}

#[test]
fn c08_lame_solver_and_decomposition() {
    // closed-form inversion residual + dense LU oracle at N=8
    let mut worst_res: f64 = 0.0;
    let mut worst_dense: f64 = 0.0;
    for dim in [2usize, 3] {
        let grid = GridSpec::new(dim, 8, 1.0).unwrap();
        let f = random_vector(&grid, 70 + dim as u64);
        let sol = solve_lame(&f, 1.1, 0.2).unwrap();
        worst_res = worst_res.max(sol.residual);
        let dense_v = dense::lame_solve(&f, 1.1, 0.2).unwrap();
        worst_dense = worst_dense.max(max_diff_vec(&sol.v, &dense_v));
    }
    // residual on resolved larger grids too
    let grid = GridSpec::new(2, 64, 1.0).unwrap();
    let phi = ScalarField::from_fn(&grid, |x| {
        (2.0 * PI * x[0]).sin() * (4.0 * PI * x[1]).cos() + 0.3 * (2.0 * PI * x[1]).sin()
    });
    let sol = solve_lame(&phi.gradient(), 0.8, -0.2).unwrap();
    worst_res = worst_res.max(sol.residual);
    assert!(worst_res <= 1e-10, "solve residual {worst_res:.3e}");
    assert!(
        worst_dense <= 1e-10,
        "dense oracle mismatch {worst_dense:.3e}"
    );

    // w-equation residual on smooth non-vacuum states
    let mut worst_w: f64 = 0.0;
    for seed in 0..5u64 {
        let s = acceptance_state(&grid, seed);
        let dec = decompose_velocity(&s).unwrap();
        assert!(
            dec.w_equation_residual <= 1e-6,
            "seed {seed}: w-equation residual {:.3e}",
            dec.w_equation_residual
        );
        worst_w = worst_w.max(dec.w_equation_residual);
    }
    println!(
        "ACCEPTANCE c08 lame solver: PASS (residual {worst_res:.3e} <= 1e-10, \
         dense oracle {worst_dense:.3e} <= 1e-10, w-equation residual {worst_w:.3e} <= 1e-6)"
    );
}

#[test]
fn c09_temporal_self_convergence() {
    let grid = GridSpec::new(2, 32, 1.0).unwrap();
    let params = PhysParams::new(0.01, 0.0).unwrap();
    let s0 = make_scenario(
        &Scenario::Acoustic {
            amplitude: 0.05,
            background_rho: 1.0,
            background_pressure: 1.0,
        },
        &grid,
        params,
    )
    .unwrap();
    let advance = |dt: f64, n: usize| {
        let mut s = s0.clone();
        for _ in 0..n {
            s = step(&s, dt).unwrap().state;
        }
        s
    };
    let t_final = 0.02;
    let coarse = advance(t_final / 8.0, 8);
    let mid = advance(t_final / 16.0, 16);
    let fine = advance(t_final / 32.0, 32);
    let diff = |a: &State, b: &State| {
        a.rho.zip_with(&b.rho, |x, y| x - y).lp_norm(2.0).unwrap()
            + a.pressure
                .zip_with(&b.pressure, |x, y| x - y)
                .lp_norm(2.0)
                .unwrap()
    };
    let order = (diff(&coarse, &mid) / diff(&mid, &fine)).log2();
    assert!(
        (order - 3.0).abs() <= 0.3,
        "observed temporal order {order:.3} outside 3.0 +- 0.3"
    );
    println!(
        "ACCEPTANCE c09 temporal self-convergence (acoustic, dt halving): PASS \
         (observed order {order:.3} within 3.0 +- 0.3)"
    );
}

#[test]
fn c10_vacuum_bump_concentration_watch() {
    let tr = bump_collapse_run();
    assert!(
        tr.verdict == Verdict::SuspectedBlowup || tr.verdict == Verdict::DtCollapse,
        "expected a concentration or collapse verdict, got {:?}",
        tr.verdict
    );
    // a monotone-increasing indicator segment over consecutive records
    let ms: Vec<f64> = tr.records.iter().map(|r| r.blowup_indicator).collect();
    let mut best = 1;
    let mut cur = 1;
    for w in ms.windows(2) {
        if w[1] > w[0] {
            cur += 1;
            best = best.max(cur);
        } else {
            cur = 1;
        }
    }
    assert!(
        best >= 5,
        "longest increasing indicator segment {best} < 5 records"
    );
    let growth = ms.iter().cloned().fold(f64::MIN, f64::max) / ms[0];
    assert!(growth > 2.0, "indicator barely moved: factor {growth:.2}");
    println!(
        "ACCEPTANCE c10 vacuum bump concentration watch: PASS \
         (verdict {:?}, indicator grew x{growth:.1}, monotone segment of {best} records)",
        tr.verdict
    );
}

#[test]
fn c11_byte_identical_reruns() {
    use cnslab_cli::config::Config;
    use cnslab_cli::run::run_simulation;

    let toml = r#"
        seed = 11
        [grid]
        dim = 2
        n = 32
        [params]
        mu = 0.02
        lambda = 0.0
        [scenario]
        name = "random_smooth"
        amplitude = 0.1
        max_mode = 2
        [run]
        t_end = 0.02
        output_every = 5
        snapshot_every = 10
        [tracers]
        per_axis = 2
        sample_every = 5
    "#;
    let cfg = Config::from_str_with_overrides(toml, &[], None).unwrap();
    let dir_a = tempfile::tempdir().unwrap();
    let dir_b = tempfile::tempdir().unwrap();
    run_simulation(&cfg, dir_a.path()).unwrap();
    run_simulation(&cfg, dir_b.path()).unwrap();
    let a = std::fs::read(dir_a.path().join("diagnostics.ndjson")).unwrap();
    let b = std::fs::read(dir_b.path().join("diagnostics.ndjson")).unwrap();
    assert!(!a.is_empty());
    assert_eq!(a, b, "diagnostics.ndjson differs between identical runs");
    println!(
        "ACCEPTANCE c11 determinism: PASS (two runs, byte-identical diagnostics.ndjson, {} bytes)",
        a.len()
    );
}
