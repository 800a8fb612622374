//! The `verify` subcommand: the full oracle suite run at desk scale with one
//! pass/fail line per check. Any failure makes the process exit nonzero.

use std::f64::consts::PI;
use std::time::Instant;

use cnslab_core::dense;
use cnslab_core::dynamics::{rhs, step};
use cnslab_core::estimates::weighted_gradient_coefficient;
use cnslab_core::fields::{dealias_product, GridSpec, ScalarField, VectorField, Vorticity};
use cnslab_core::lagrangian::{advect, FlowSample};
use cnslab_core::lame::solve_lame;
use cnslab_core::state::{
    compatibility_residual, make_scenario, random_smooth_state, PhysParams, Scenario, State,
};

pub struct VerifyReport {
    pub passed: usize,
    pub failed: usize,
}

struct Harness {
    passed: usize,
    failed: usize,
}

impl Harness {
    fn new() -> Self {
        Harness {
            passed: 0,
            failed: 0,
        }
    }

    fn check(&mut self, name: &str, ok: bool, detail: String) {
        if ok {
            self.passed += 1;
            println!("PASS {name}: {detail}");
        } else {
            self.failed += 1;
            println!("FAIL {name}: {detail}");
        }
    }

    fn check_le(&mut self, name: &str, value: f64, bound: f64) {
        self.check(name, value <= bound, format!("{value:.3e} <= {bound:.1e}"));
    }
}

fn max_diff(a: &ScalarField, b: &ScalarField) -> f64 {
    a.zip_with(b, |x, y| x - y).sup_norm()
}

fn max_diff_vec(a: &VectorField, b: &VectorField) -> f64 {
    (0..a.dim())
        .map(|i| max_diff(a.component(i), b.component(i)))
        .fold(0.0, f64::max)
}

fn band_limited_field(grid: &GridSpec, seed: u64) -> ScalarField {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let dim = grid.dim();
    let coeffs: Vec<([i32; 3], f64, f64)> = (0..6)
        .map(|_| {
            (
                [
                    rng.gen_range(-2..=2),
                    rng.gen_range(-2..=2),
                    if dim == 3 { rng.gen_range(-2..=2) } else { 0 },
                ],
                rng.gen_range(-1.0..1.0),
                rng.gen_range(0.0..2.0 * PI),
            )
        })
        .collect();
    ScalarField::from_fn(grid, |x| {
        coeffs
            .iter()
            .map(|&(m, a, phi)| {
                let arg: f64 = (0..dim).map(|d| 2.0 * PI * m[d] as f64 * x[d]).sum();
                a * (arg + phi).cos()
            })
            .sum()
    })
}

pub fn verify() -> VerifyReport {
    let mut h = Harness::new();

    // spectral operators against dense DFT application
    let start = Instant::now();
    for dim in [2usize, 3] {
        let grid = GridSpec::new(dim, 8, 1.0).unwrap();
        let f = band_limited_field(&grid, 1);
        let u = VectorField::new(
            (0..dim)
                .map(|a| band_limited_field(&grid, 10 + a as u64))
                .collect(),
        )
        .unwrap();
        h.check_le(
            &format!("operator_oracle_gradient_{dim}d"),
            max_diff_vec(&f.gradient(), &dense::gradient(&f)),
            1e-12,
        );
        h.check_le(
            &format!("operator_oracle_divergence_{dim}d"),
            max_diff(&u.divergence(), &dense::divergence(&u)),
            1e-12,
        );
        let curl_err = match (u.curl(), dense::curl(&u)) {
            (Vorticity::Scalar(a), Vorticity::Scalar(b)) => max_diff(&a, &b),
            (Vorticity::Vector(a), Vorticity::Vector(b)) => max_diff_vec(&a, &b),
            _ => f64::INFINITY,
        };
        h.check_le(&format!("operator_oracle_curl_{dim}d"), curl_err, 1e-12);
        h.check_le(
            &format!("operator_oracle_laplacian_{dim}d"),
            max_diff(&f.laplacian(), &dense::laplacian(&f)),
            1e-12,
        );
    }
    h.check(
        "operator_oracle_runtime",
        start.elapsed().as_secs_f64() < 5.0,
        format!("{:.2}s < 5s", start.elapsed().as_secs_f64()),
    );

    // Parseval quadrature identity
    for dim in [2usize, 3] {
        let grid = GridSpec::new(dim, 8, 1.0).unwrap();
        let f = band_limited_field(&grid, 21);
        let direct = f.zip_with(&f, |a, b| a * b).integrate();
        let parseval = dense::parseval_l2_squared(&f);
        h.check_le(
            &format!("parseval_quadrature_{dim}d"),
            ((direct - parseval) / parseval).abs(),
            1e-12,
        );
    }

    // dealiased product against the true convolution
    {
        let grid = GridSpec::new(2, 8, 1.0).unwrap();
        let a = ScalarField::from_fn(&grid, |x| (2.0 * PI * 2.0 * x[0]).cos());
        let b = ScalarField::from_fn(&grid, |x| (2.0 * PI * 3.0 * x[0]).cos());
        h.check_le(
            "dealias_convolution_oracle",
            max_diff(
                &dealias_product(&a, &b),
                &dense::truncated_convolution(&a, &b),
            ),
            1e-12,
        );
    }

    // Lame solver: closed-form inversion vs dense LU, plus residual
    for dim in [2usize, 3] {
        let grid = GridSpec::new(dim, 8, 1.0).unwrap();
        let f = VectorField::new(
            (0..dim)
                .map(|a| band_limited_field(&grid, 30 + a as u64))
                .collect(),
        )
        .unwrap();
        let sol = solve_lame(&f, 1.1, 0.2).unwrap();
        h.check_le(&format!("lame_residual_{dim}d"), sol.residual, 1e-10);
        let dense_v = dense::lame_solve(&f, 1.1, 0.2).unwrap();
        h.check_le(
            &format!("lame_dense_oracle_{dim}d"),
            max_diff_vec(&sol.v, &dense_v),
            1e-10,
        );
    }

    // weighted-gradient coefficient algebra over a dyadic parameter sweep
    {
        let mut exact = true;
        let mut sign_ok = true;
        for i in 1..=10 {
            for j in -5..5 {
                let mu = i as f64 * 0.25;
                let lam = j as f64 * 0.25;
                let c = weighted_gradient_coefficient(mu, lam, 6.0).unwrap();
                exact &= c == 6.0 * (mu - 4.0 * lam);
                sign_ok &= (c > 0.0) == (mu > 4.0 * lam);
            }
        }
        h.check(
            "coefficient_sweep_q6",
            exact && sign_ok,
            "q=6 coefficient equals 6(mu - 4 lambda) with matching sign".into(),
        );
        let spot = weighted_gradient_coefficient(5.0, 1.0, 6.0).unwrap();
        h.check(
            "coefficient_spot_mu5_lambda1",
            spot == 6.0,
            format!("coefficient(5, 1, 6) = {spot}"),
        );
    }

    // right-hand side against the dense term-by-term reference
    {
        let grid = GridSpec::new(2, 8, 1.0).unwrap();
        let params = PhysParams::new(0.7, 0.1).unwrap();
        let s = random_smooth_state(&grid, params, 13, 0.2, 1).unwrap();
        let got = rhs(&s).unwrap();
        let (d_rho, d_m, d_p) = dense::rhs_reference(&s);
        let err = max_diff(&got.d_rho, &d_rho)
            .max(max_diff_vec(&got.d_momentum, &d_m))
            .max(max_diff(&got.d_pressure, &d_p));
        h.check_le("rhs_dense_oracle", err, 1e-10);

        // mutation sensitivity: a flipped viscous sign must be caught
        let u = s.velocity();
        let mutated = VectorField::new(
            (0..2)
                .map(|i| {
                    let lap = dense::laplacian(u.component(i));
                    d_m.component(i).zip_with(&lap, |v, l| v - 2.0 * 0.7 * l)
                })
                .collect(),
        )
        .unwrap();
        let detect = max_diff_vec(&got.d_momentum, &mutated);
        h.check(
            "rhs_oracle_mutation_sensitivity",
            detect > 1e-3,
            format!("viscous sign flip shifts the oracle by {detect:.3e}"),
        );
    }

    // temporal self-convergence of the integrator
    {
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
        h.check(
            "temporal_order",
            (order - 3.0).abs() <= 0.3,
            format!("observed order {order:.3} within 3.0 +- 0.3"),
        );
    }

    // primitive reconstruction against pointwise reference
    {
        let grid = GridSpec::new(2, 16, 1.0).unwrap();
        let params = PhysParams::new(1.0, 0.1).unwrap();
        let rho = ScalarField::from_fn(&grid, |x| 0.6 + 0.4 * (2.0 * PI * x[0]).cos().abs());
        let m = VectorField::from_fn(&grid, |x| {
            [(2.0 * PI * x[1]).cos(), 0.3 * (4.0 * PI * x[0]).sin(), 0.0]
        });
        let s = State::new(
            0.0,
            rho.clone(),
            m.clone(),
            ScalarField::constant(&grid, 1.0),
            params,
        )
        .unwrap();
        let u = s.velocity();
        let mut worst = 0.0_f64;
        for i in 0..grid.node_count() {
            for a in 0..2 {
                let expect = m.component(a).values()[i] / rho.values()[i];
                worst = worst.max((u.component(a).values()[i] - expect).abs());
            }
        }
        h.check_le("velocity_pointwise_reference", worst, 1e-15);
    }

    // compatibility condition on the analytic single-mode case
    {
        let grid = GridSpec::new(2, 32, 1.0).unwrap();
        let params = PhysParams::new(1.0, 0.1).unwrap();
        let a = 0.3;
        let p = ScalarField::from_fn(&grid, |x| 1.0 + a * (2.0 * PI * x[0]).sin());
        let s = State::new(
            0.0,
            ScalarField::constant(&grid, 1.0),
            VectorField::zeros(&grid),
            p,
            params,
        )
        .unwrap();
        let rep = compatibility_residual(&s);
        let expect = 2.0 * PI * a / 2.0_f64.sqrt();
        h.check_le("compatibility_analytic", (rep.norm_g - expect).abs(), 1e-10);
    }

    // scenario mass against refined quadrature
    {
        let params = PhysParams::new(1.0, 0.1).unwrap();
        let sc = Scenario::GaussianBumpVacuum {
            amplitude: 1.0,
            width: 0.08,
            cutoff_radius: 0.35,
            background: 0.0,
            pressure_ratio: 0.5,
            velocity: -0.5,
        };
        let coarse = make_scenario(&sc, &GridSpec::new(2, 64, 1.0).unwrap(), params).unwrap();
        let fine = make_scenario(&sc, &GridSpec::new(2, 256, 1.0).unwrap(), params).unwrap();
        h.check_le(
            "scenario_mass_quadrature",
            (coarse.rho.integrate() - fine.rho.integrate()).abs(),
            1e-8,
        );
        h.check(
            "scenario_reaches_vacuum",
            coarse.rho.min_value() >= 0.0 && coarse.rho.min_value() < 1e-15,
            format!("min rho {:.3e}", coarse.rho.min_value()),
        );
    }

    // tracer integration: translation and vortex period
    {
        let grid = GridSpec::new(2, 64, 1.0).unwrap();
        let params = PhysParams::new(1.0, 0.1).unwrap();
        let mk = |t: f64, u: VectorField| {
            let s = State::from_primitive(
                t,
                ScalarField::constant(&grid, 1.0),
                &u,
                ScalarField::constant(&grid, 1.0),
                params,
            )
            .unwrap();
            let mut fs = FlowSample::from_state(&s);
            fs.t = t;
            fs
        };
        let c = 0.3;
        let translation = VectorField::from_fn(&grid, |_| [c, 0.0, 0.0]);
        let samples = vec![mk(0.0, translation.clone()), mk(2.0, translation)];
        let tr = advect(&samples, &[[0.9, 0.25, 0.0]], 16).unwrap();
        let expect = (0.9 + c * 2.0).rem_euclid(1.0);
        h.check_le(
            "tracer_translation",
            (tr.tracers[0].positions[1][0] - expect).abs(),
            1e-12,
        );

        let omega = 2.0 * PI;
        let vortex = VectorField::from_fn(&grid, |x| {
            let dx = x[0] - 0.5;
            let dy = x[1] - 0.5;
            let r = (dx * dx + dy * dy).sqrt();
            let cut = if r <= 0.2 {
                1.0
            } else if r >= 0.3 {
                0.0
            } else {
                0.5 * (1.0 + (PI * (r - 0.2) / 0.1).cos())
            };
            [-omega * dy * cut, omega * dx * cut, 0.0]
        });
        let samples = vec![mk(0.0, vortex.clone()), mk(1.0, vortex)];
        let tr = advect(&samples, &[[0.6, 0.5, 0.0]], 1000).unwrap();
        let last = tr.tracers[0].positions[1];
        let err = ((last[0] - 0.6).powi(2) + (last[1] - 0.5).powi(2)).sqrt();
        h.check_le("tracer_vortex_period", err, 1e-4);
    }

    println!("verify: {} passed, {} failed", h.passed, h.failed);
    VerifyReport {
        passed: h.passed,
        failed: h.failed,
    }
}
