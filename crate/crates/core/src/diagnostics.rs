//! Functionals and algebraic identities evaluated on a state: conserved
//! energy, weighted kinetic energies, dissipation integral, effective viscous
//! flux, vorticity, material derivative, and the residuals of the rewritten
//! momentum equation and the specific-energy conservation law.

use serde::{Deserialize, Serialize};

use crate::dynamics::{rhs, Tendency};
use crate::error::CoreError;
use crate::fields::{divergence_dealiased, ScalarField, VectorField, Vorticity};
use crate::state::State;

/// Guard for residual normalizations on equilibria.
pub const RESIDUAL_EPS: f64 = 1e-14;

/// One time-stamp of every monitored functional. Serialized as one NDJSON
/// line (and one CSV row); field order is fixed by the struct declaration.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DiagnosticRecord {
    pub t: f64,
    pub step: u64,
    /// Time step that produced this state; absent at t = 0 and in offline
    /// recomputation.
    pub dt: Option<f64>,
    pub mass: f64,
    pub total_energy: f64,
    pub sup_rho: f64,
    pub sup_theta: f64,
    pub min_rho: f64,
    pub min_p: f64,
    pub min_theta: f64,
    pub vacuum_fraction: f64,
    /// Concentration indicator `sup rho + sup theta`.
    pub blowup_indicator: f64,
    pub weighted_kinetic_q2: f64,
    pub weighted_kinetic_q4: f64,
    pub weighted_kinetic_q6: f64,
    pub dissipation_functional: f64,
    pub grad_u_l2: f64,
    pub q_tilde: f64,
    pub grad_rho_lq: f64,
    pub grad_p_lq: f64,
    pub grad_udot_l2: f64,
    pub momentum_identity_relres: f64,
    pub energy_law_relres: f64,
    pub energy_law_reliable: bool,
    pub vacuum_momentum_sup: f64,
    /// Cumulative clipping budgets; absent in offline recomputation unless
    /// the snapshot manifest carried them.
    pub clip_rho_mass: Option<f64>,
    pub clip_p_mass: Option<f64>,
}

/// Conserved total energy `integral of (rho |u|^2 / 2 + P)`.
pub fn total_energy(s: &State) -> f64 {
    let u = s.velocity();
    let grid = s.grid();
    let mut sum = 0.0;
    for i in 0..grid.node_count() {
        let mdotu: f64 = (0..u.dim())
            .map(|a| s.momentum.component(a).values()[i] * u.component(a).values()[i])
            .sum();
        sum += 0.5 * mdotu + s.pressure.values()[i];
    }
    sum * grid.cell_volume()
}

/// `integral of rho |u|^q` for `q` in `{2, 4, 6}`.
pub fn weighted_kinetic(s: &State, q: u32) -> Result<f64, CoreError> {
    if q != 2 && q != 4 && q != 6 {
        return Err(CoreError::InvalidArgument(format!(
            "weighted kinetic moment requires q in {{2, 4, 6}}, got {q}"
        )));
    }
    let u = s.velocity();
    let grid = s.grid();
    let mut sum = 0.0;
    for i in 0..grid.node_count() {
        let u2: f64 = (0..u.dim())
            .map(|a| {
                let v = u.component(a).values()[i];
                v * v
            })
            .sum();
        sum += s.rho.values()[i] * u2.powi(q as i32 / 2);
    }
    Ok(sum * grid.cell_volume())
}

/// `integral of |grad u|^2 (1 + |u|^2 + |u|^4)`, the dissipation controlled
/// by the high-energy estimate.
pub fn dissipation_functional(s: &State) -> f64 {
    let u = s.velocity();
    let grid = s.grid();
    let grad = u.gradient_tensor();
    let mut sum = 0.0;
    for i in 0..grid.node_count() {
        let mut g2 = 0.0;
        for gi in &grad {
            for comp in gi.components() {
                let v = comp.values()[i];
                g2 += v * v;
            }
        }
        let u2: f64 = (0..u.dim())
            .map(|a| {
                let v = u.component(a).values()[i];
                v * v
            })
            .sum();
        sum += g2 * (1.0 + u2 + u2 * u2);
    }
    sum * grid.cell_volume()
}

/// Effective viscous flux `G = (2 mu + lambda) div u - P + mean(P)`.
/// The mean correction makes `G` exactly mean-free on the torus.
pub fn effective_viscous_flux(s: &State) -> ScalarField {
    let coeff = 2.0 * s.params.mu + s.params.lambda;
    let div_u = s.velocity().divergence();
    let p_bar = s.pressure.mean();
    div_u.zip_with(&s.pressure, move |d, p| coeff * d - p + p_bar)
}

/// Vorticity `curl u` (scalar in 2D).
pub fn vorticity(s: &State) -> Vorticity {
    s.velocity().curl()
}

/// Dealiased advective derivative `(u . grad) u`.
pub fn advective_term(u: &VectorField) -> VectorField {
    let grid = u.grid().clone();
    let dim = grid.dim();
    let grad = u.gradient_tensor();
    let comps = (0..dim)
        .map(|i| {
            let mut acc = vec![0.0; grid.node_count()];
            for j in 0..dim {
                let uj = u.component(j).values();
                let dj_ui = grad[i].component(j).values();
                for (n, a) in acc.iter_mut().enumerate() {
                    *a += uj[n] * dj_ui[n];
                }
            }
            ScalarField::from_values(&grid, acc).dealias()
        })
        .collect();
    VectorField::new(comps).expect("advective term components")
}

/// Material derivative recovered from conserved tendencies; contributions on
/// the vacuum set are masked to zero and their share is reported.
#[derive(Debug, Clone)]
pub struct MaterialDerivative {
    pub u_dot: VectorField,
    pub masked_fraction: f64,
}

/// `du/dt = u_t + (u . grad) u` with
/// `u_t = (d_m - u d_rho) / max(rho, floor)`.
pub fn material_derivative(s: &State, tend: &Tendency) -> MaterialDerivative {
    let grid = s.grid().clone();
    let dim = grid.dim();
    let u = s.velocity();
    let adv = advective_term(&u);
    let floor = s.params.rho_floor;
    let thresh = s.params.vacuum_threshold;
    let mut masked = 0usize;
    let mask: Vec<bool> = s
        .rho
        .values()
        .iter()
        .map(|&r| {
            let vac = r <= thresh;
            if vac {
                masked += 1;
            }
            vac
        })
        .collect();
    let comps = (0..dim)
        .map(|a| {
            let dm = tend.d_momentum.component(a).values();
            let drho = tend.d_rho.values();
            let ua = u.component(a).values();
            let adv_a = adv.component(a).values();
            let vals = (0..grid.node_count())
                .map(|n| {
                    if mask[n] {
                        0.0
                    } else {
                        let rho = s.rho.values()[n].max(floor);
                        (dm[n] - ua[n] * drho[n]) / rho + adv_a[n]
                    }
                })
                .collect();
            ScalarField::from_values(&grid, vals)
        })
        .collect();
    MaterialDerivative {
        u_dot: VectorField::new(comps).expect("material derivative components"),
        masked_fraction: masked as f64 / grid.node_count() as f64,
    }
}

/// Relative L2 residual of the rewritten momentum equation
/// `rho du/dt = grad G - mu curl omega`.
pub fn momentum_identity_residual(s: &State) -> Result<f64, CoreError> {
    let tend = rhs(s)?;
    Ok(momentum_identity_residual_with(s, &tend))
}

pub fn momentum_identity_residual_with(s: &State, tend: &Tendency) -> f64 {
    let md = material_derivative(s, tend);
    let grad_g = effective_viscous_flux(s).gradient();
    let curl_w = vorticity(s).curl_field();
    let mu = s.params.mu;
    let grid = s.grid();
    let dim = grid.dim();
    let mut res2 = 0.0;
    let mut lhs2 = 0.0;
    for n in 0..grid.node_count() {
        let rho = s.rho.values()[n];
        for a in 0..dim {
            let lhs = rho * md.u_dot.component(a).values()[n];
            let rhs_v = grad_g.component(a).values()[n] - mu * curl_w.component(a).values()[n];
            res2 += (lhs - rhs_v) * (lhs - rhs_v);
            lhs2 += lhs * lhs;
        }
    }
    let dv = grid.cell_volume();
    (res2 * dv).sqrt() / (lhs2 * dv).sqrt().max(RESIDUAL_EPS)
}

/// Residual of the specific-energy conservation law.
#[derive(Debug, Clone, Copy)]
pub struct EnergyLawResidual {
    pub value: f64,
    /// False once the vacuum set exceeds 10% of the domain; the law involves
    /// divisions by the density and loses meaning there.
    pub reliable: bool,
}

/// Relative L2 residual of `(rho E)_t + div(rho E u) = div F` with
/// `E = theta + |u|^2 / 2` and
/// `F = (mu/2) grad(|u|^2) + mu (u.grad)u + lambda u div u - P u`.
pub fn energy_law_residual(s: &State) -> Result<EnergyLawResidual, CoreError> {
    let tend = rhs(s)?;
    Ok(energy_law_residual_with(s, &tend))
}

pub fn energy_law_residual_with(s: &State, tend: &Tendency) -> EnergyLawResidual {
    let grid = s.grid().clone();
    let dim = grid.dim();
    let u = s.velocity();

    // (rho E)_t = d_P + u . d_m - |u|^2/2 d_rho  (rho E = P + |m.u|/2)
    let mut lhs_t = vec![0.0; grid.node_count()];
    for n in 0..grid.node_count() {
        let mut udm = 0.0;
        let mut u2 = 0.0;
        for a in 0..dim {
            let ua = u.component(a).values()[n];
            udm += ua * tend.d_momentum.component(a).values()[n];
            u2 += ua * ua;
        }
        lhs_t[n] = tend.d_pressure.values()[n] + udm - 0.5 * u2 * tend.d_rho.values()[n];
    }

    // div(rho E u): rho E = P + (m . u)/2 pointwise
    let rho_e = {
        let mut vals = vec![0.0; grid.node_count()];
        for n in 0..grid.node_count() {
            let mdotu: f64 = (0..dim)
                .map(|a| s.momentum.component(a).values()[n] * u.component(a).values()[n])
                .sum();
            vals[n] = s.pressure.values()[n] + 0.5 * mdotu;
        }
        ScalarField::from_values(&grid, vals)
    };
    let energy_flux: Vec<ScalarField> = (0..dim)
        .map(|a| rho_e.zip_with(u.component(a), |e, v| e * v))
        .collect();
    let div_rho_eu = divergence_dealiased(&energy_flux);

    // F = (mu/2) grad(|u|^2) + mu (u.grad)u + lambda u div u - P u
    let mu = s.params.mu;
    let lam = s.params.lambda;
    let u_sq = u.magnitude_squared();
    let grad_usq = u_sq.gradient();
    let adv = advective_term(&u);
    let div_u = u.divergence();
    let f_comps: Vec<ScalarField> = (0..dim)
        .map(|a| {
            let vals = (0..grid.node_count())
                .map(|n| {
                    0.5 * mu * grad_usq.component(a).values()[n]
                        + mu * adv.component(a).values()[n]
                        + lam * u.component(a).values()[n] * div_u.values()[n]
                        - s.pressure.values()[n] * u.component(a).values()[n]
                })
                .collect();
            ScalarField::from_values(&grid, vals)
        })
        .collect();
    let div_f = divergence_dealiased(&f_comps);

    let dv = grid.cell_volume();
    let mut res2 = 0.0;
    let mut denom2 = 0.0;
    for n in 0..grid.node_count() {
        let r = lhs_t[n] + div_rho_eu.values()[n] - div_f.values()[n];
        res2 += r * r;
        denom2 += div_f.values()[n] * div_f.values()[n];
    }
    let value = (res2 * dv).sqrt() / ((denom2 * dv).sqrt() + RESIDUAL_EPS);
    EnergyLawResidual {
        value,
        reliable: s.vacuum_fraction() <= 0.10,
    }
}

/// L2 norm of the full gradient tensor of a vector field.
fn grad_l2(u: &VectorField) -> f64 {
    let dv = u.grid().cell_volume();
    let mut sum = 0.0;
    for gi in u.gradient_tensor() {
        for comp in gi.components() {
            sum += comp.values().iter().map(|v| v * v).sum::<f64>();
        }
    }
    (sum * dv).sqrt()
}

/// Assemble the full record for one state. `dt` and the clip budgets are
/// loop-side context and may be absent. Fails only when the tendency of the
/// state is no longer finite.
pub fn collect_record(
    s: &State,
    step: u64,
    dt: Option<f64>,
    clip_rho_mass: Option<f64>,
    clip_p_mass: Option<f64>,
    q_tilde: f64,
) -> Result<DiagnosticRecord, CoreError> {
    let tend = rhs(s)?;
    let md = material_derivative(s, &tend);
    let theta = s.temperature();
    let u = s.velocity();
    let energy_law = energy_law_residual_with(s, &tend);
    Ok(DiagnosticRecord {
        t: s.t,
        step,
        dt,
        mass: s.rho.integrate(),
        total_energy: total_energy(s),
        sup_rho: s.rho.sup_norm(),
        sup_theta: s.sup_temperature(),
        min_rho: s.rho.min_value(),
        min_p: s.pressure.min_value(),
        min_theta: theta.min_value(),
        vacuum_fraction: s.vacuum_fraction(),
        blowup_indicator: crate::dynamics::blowup_monitor(s),
        weighted_kinetic_q2: weighted_kinetic(s, 2).expect("q=2 moment"),
        weighted_kinetic_q4: weighted_kinetic(s, 4).expect("q=4 moment"),
        weighted_kinetic_q6: weighted_kinetic(s, 6).expect("q=6 moment"),
        dissipation_functional: dissipation_functional(s),
        grad_u_l2: grad_l2(&u),
        q_tilde,
        grad_rho_lq: s.rho.gradient().lp_norm(q_tilde)?,
        grad_p_lq: s.pressure.gradient().lp_norm(q_tilde)?,
        grad_udot_l2: grad_l2(&md.u_dot),
        momentum_identity_relres: momentum_identity_residual_with(s, &tend),
        energy_law_relres: energy_law.value,
        energy_law_reliable: energy_law.reliable,
        vacuum_momentum_sup: s.vacuum_momentum(),
        clip_rho_mass,
        clip_p_mass,
    })
}
