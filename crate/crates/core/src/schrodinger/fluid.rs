//! Madelung-fluid form of the Schrodinger equation and its corrected flow.
//!
//! With `m u = d_x S - (q/c) A_x` the fluid equations are
//! `m (u_t + u u_x) = q E - d_x Q` and `rho_t + (rho u)_x = 0`. A hidden
//! phase obeying `Phi_t + u Phi_x + Phi_x^2 / 2m = Q` gives the velocity
//! `m v = m u + Phi_x`, which moves under the electric force alone,
//! `m (v_t + v v_x) = q E`, at the cost of a source term in the continuity
//! equation, `rho_t + (rho v)_x = (rho Phi_x)_x / m`.

use crate::calculus::ddt;
use crate::error::{LabError, Result};
use crate::field::ScalarField;
use crate::hidden_phase::{seed_entering, Branch, HiddenPhase, HiddenPhaseOptions, Stencil};
use crate::madelung::{quantum_potential, MadelungData};
use crate::params::PhysParams;
use crate::potentials::Potentials;

#[derive(Debug, Clone, PartialEq)]
pub struct FluidState {
    /// m u = d_x S - (q/c) A_x.
    pub u: ScalarField,
    /// Corrected velocity; equal to `u` until a hidden phase is applied.
    pub v: ScalarField,
    pub q: ScalarField,
    pub e_field: ScalarField,
    /// Always zero in one dimension; kept so the force terms read as in 3-D.
    pub h_field: ScalarField,
    pub node_mask: Vec<bool>,
    pub periodic: bool,
}

fn zero_nodes(mut f: ScalarField, mask: &[bool]) -> ScalarField {
    for (v, &node) in f.values_mut().iter_mut().zip(mask) {
        if node {
            *v = 0.0;
        }
    }
    f
}

/// u = (d_x S - (q/c) A_x) / m, zero on nodes.
pub fn u_field(md: &MadelungData, a: &Potentials, p: &PhysParams, periodic: bool) -> Result<ScalarField> {
    let sx = Stencil::for_phase(md, periodic).ddx(&md.s, &md.node_mask);
    let u = sx.zip_with(&a.ax, |s, ax| (s - p.q / p.c * ax) / p.m)?;
    Ok(zero_nodes(u, &md.node_mask))
}

pub fn fluid_state(md: &MadelungData, a: &Potentials, p: &PhysParams, periodic: bool) -> Result<FluidState> {
    let u = u_field(md, a, p, periodic)?;
    Ok(FluidState {
        v: u.clone(),
        u,
        q: quantum_potential(&md.rho, &md.node_mask, p)?,
        e_field: a.electric_field(p)?,
        h_field: a.magnetic_field(),
        node_mask: md.node_mask.clone(),
        periodic,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct FluidResiduals {
    /// m (u_t + u u_x) - q E - (q/c) u H + d_x Q.
    pub momentum: ScalarField,
    /// rho_t + d_x (rho u).
    pub continuity: ScalarField,
}

fn single(fluid: &FluidState, f: &ScalarField) -> ScalarField {
    Stencil {
        dx: f.grid().dx,
        periodic: fluid.periodic,
        cycle: 0.0,
    }
    .ddx(f, &fluid.node_mask)
}

/// x component of w x H for a velocity along x. A velocity along the only
/// axis has no component perpendicular to any field, so this is zero.
fn cross_x(_w: f64, _h: f64) -> f64 {
    0.0
}

/// m (w_t + w w_x) - q E - (q/c) w H for a velocity field w.
fn material_force(fluid: &FluidState, w: &ScalarField, p: &PhysParams) -> Result<ScalarField> {
    let wt = ddt(w)?;
    let wx = single(fluid, w);
    let g = *w.grid();
    let mut out = ScalarField::zeros(g);
    for k in 0..g.len() {
        let wk = w.values()[k];
        let lorentz = p.q * fluid.e_field.values()[k] + p.q / p.c * cross_x(wk, fluid.h_field.values()[k]);
        out.values_mut()[k] = p.m * (wt.values()[k] + wk * wx.values()[k]) - lorentz;
    }
    Ok(out)
}

pub fn fluid_residuals(md: &MadelungData, fluid: &FluidState, p: &PhysParams) -> Result<FluidResiduals> {
    let force = material_force(fluid, &fluid.u, p)?;
    let qx = single(fluid, &fluid.q);
    let momentum = force.add(&qx)?;
    let flux = md.rho.mul(&fluid.u)?;
    let continuity = ddt(&md.rho)?.add(&single(fluid, &flux))?;
    Ok(FluidResiduals {
        momentum: zero_nodes(momentum, &fluid.node_mask),
        continuity: zero_nodes(continuity, &fluid.node_mask),
    })
}

pub fn solve_lowspeed_phi(fluid: &FluidState, rho: &ScalarField, p: &PhysParams, phi0: &[f64]) -> Result<HiddenPhase> {
    solve_lowspeed_phi_with(
        fluid,
        rho,
        p,
        phi0,
        &HiddenPhaseOptions {
            periodic: fluid.periodic,
            ..Default::default()
        },
    )
}

/// March `Phi_t = Q - u Phi_x - Phi_x^2 / 2m` with Heun's method, using the
/// same node and seam policy as the relativistic solver.
pub fn solve_lowspeed_phi_with(
    fluid: &FluidState,
    rho: &ScalarField,
    p: &PhysParams,
    phi0: &[f64],
    opts: &HiddenPhaseOptions,
) -> Result<HiddenPhase> {
    let g = *fluid.u.grid();
    if phi0.len() != g.nx {
        return Err(LabError::ShapeMismatch(format!(
            "phi0 has {} points for nx = {}",
            phi0.len(),
            g.nx
        )));
    }
    let stencil = Stencil {
        dx: g.dx,
        periodic: opts.periodic,
        cycle: 0.0,
    };
    let excluded = opts.exclusion_mask(rho, &fluid.node_mask);
    let m = p.m;
    let mut valid = vec![false; g.nx];
    let mut grad = vec![0.0; g.nx];
    let mut rhs = |n: usize, phi: &[f64], out: &mut [f64]| {
        let row = g.index(n, 0);
        for i in 0..g.nx {
            valid[i] = !excluded[row + i];
        }
        stencil.apply(phi, &valid, &mut grad);
        let (q, u) = (fluid.q.slice(n), fluid.u.slice(n));
        for i in 0..g.nx {
            out[i] = if valid[i] {
                q[i] - u[i] * grad[i] - grad[i] * grad[i] / (2.0 * m)
            } else {
                0.0
            };
        }
    };

    let mut phi = ScalarField::zeros(g);
    let mut phi_t = ScalarField::zeros(g);
    phi.slice_mut(0).copy_from_slice(phi0);
    let (mut f0, mut f1, mut pred) = (vec![0.0; g.nx], vec![0.0; g.nx], vec![0.0; g.nx]);
    let h = g.dt;
    let valid_on = |n: usize| -> Vec<bool> {
        let row = g.index(n, 0);
        excluded[row..row + g.nx].iter().map(|&b| !b).collect()
    };
    for n in 0..g.nt - 1 {
        let mut cur = phi.slice(n).to_vec();
        seed_entering(&mut cur, &valid_on(n), &valid_on(n + 1));
        phi.slice_mut(n).copy_from_slice(&cur);
        rhs(n, &cur, &mut f0);
        phi_t.slice_mut(n).copy_from_slice(&f0);
        for i in 0..g.nx {
            pred[i] = cur[i] + h * f0[i];
        }
        rhs(n + 1, &pred, &mut f1);
        let next = phi.slice_mut(n + 1);
        for i in 0..g.nx {
            next[i] = cur[i] + 0.5 * h * (f0[i] + f1[i]);
        }
        if next.iter().any(|v| !v.is_finite()) {
            return Err(LabError::Divergence { step: n + 1 });
        }
    }
    let last = phi.slice(g.nt - 1).to_vec();
    rhs(g.nt - 1, &last, &mut f0);
    phi_t.slice_mut(g.nt - 1).copy_from_slice(&f0);
    Ok(HiddenPhase {
        phi,
        phi_t,
        branch: Branch::Positive,
        phi0: phi0.to_vec(),
        periodic: opts.periodic,
        excluded,
        residual_report: None,
    })
}

/// m v = m u + d_x Phi. The returned state is restricted to the points
/// where Phi was marched.
pub fn corrected_flow(fluid: &FluidState, hp: &HiddenPhase, p: &PhysParams) -> Result<FluidState> {
    let restricted = FluidState {
        node_mask: hp.excluded.clone(),
        ..fluid.clone()
    };
    let fx = single(&restricted, &hp.phi);
    let v = fluid.u.zip_with(&fx, |u, f| u + f / p.m)?;
    Ok(FluidState {
        v: zero_nodes(v, &hp.excluded),
        ..restricted
    })
}

/// m (v_t + v v_x) - q E - (q/c) v H.
pub fn newton_lorentz_residual(fluid: &FluidState, p: &PhysParams) -> Result<ScalarField> {
    Ok(zero_nodes(material_force(fluid, &fluid.v, p)?, &fluid.node_mask))
}

/// rho_t + d_x(rho v) - d_x(rho Phi_x) / m.
pub fn sourced_continuity_residual(
    fluid: &FluidState,
    md: &MadelungData,
    hp: &HiddenPhase,
    p: &PhysParams,
) -> Result<ScalarField> {
    let fx = single(fluid, &hp.phi);
    let flux = md.rho.mul(&fluid.v)?;
    let source_flux = md.rho.mul(&fx)?;
    let r = ddt(&md.rho)?
        .add(&single(fluid, &flux))?
        .sub(&single(fluid, &source_flux).scale(1.0 / p.m))?;
    Ok(zero_nodes(r, &fluid.node_mask))
}

/// Density-weighted mean of a velocity field on every slice.
pub fn mean_velocity(rho: &ScalarField, w: &ScalarField) -> Vec<f64> {
    let g = *rho.grid();
    (0..g.nt)
        .map(|n| {
            let (r, v) = (rho.slice(n), w.slice(n));
            let mass: f64 = r.iter().sum();
            r.iter().zip(v).map(|(a, b)| a * b).sum::<f64>() / mass
        })
        .collect()
}
