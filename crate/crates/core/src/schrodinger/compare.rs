use crate::calculus::{d2dt2, d2dx2, ddt, ddx};
use crate::error::{LabError, Result};
use crate::field::ScalarField;
use crate::hidden_phase::HiddenPhase;
use crate::kg::KGSolution;
use crate::madelung::{decompose, strip_carrier, MadelungData, NodeThreshold};
use crate::norms::{and_mask, interior_mask, max_abs_where};
use crate::params::PhysParams;

use super::SchrodingerSolution;

/// The Hamilton-Jacobi and dropped-term maxima are taken where the density
/// is at least this fraction of its peak; in the far tails the quantum
/// potential is dominated by truncation error.
pub const REPORT_DENSITY_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct LowSpeedReport {
    /// ||rho_KG - rho_S|| / ||rho_S|| (discrete L2) on every slice.
    pub density_distance: Vec<f64>,
    pub max_density_distance: f64,
    /// Density-weighted RMS of (S_KG + m c^2 t) - S_S after removing its
    /// weighted mean, per slice. The mean absorbs the free global phase.
    pub phase_distance: Vec<f64>,
    pub max_phase_distance: f64,
    /// d_t S + m c^2 + (d_x S - (q/c) A_x)^2 / 2m - (hbar^2/2m) d_x^2 sqrt(rho)/sqrt(rho) + qV
    /// on the Klein-Gordon side (zero on nodes).
    pub hj_residual: ScalarField,
    pub hj_residual_max: f64,
    /// max |hbar^2 d_t^2 sqrt(rho) / (c^2 sqrt(rho))| on the Klein-Gordon side,
    /// the term the low-speed reduction drops.
    pub dropped_time_term_max: f64,
    /// max |hbar^2 d_x^2 sqrt(rho) / sqrt(rho)| for scale.
    pub quantum_term_max: f64,
}

/// Compare a Klein-Gordon run against a Schrodinger run from matched
/// initial data. The Klein-Gordon field has its rest-energy phase
/// exp(-i m c^2 t / hbar) removed before the comparison.
pub fn low_speed_compare(kg: &KGSolution, s: &SchrodingerSolution, threshold: NodeThreshold) -> Result<LowSpeedReport> {
    let p = &kg.params;
    let g = *kg.grid();
    if !g.same_shape(s.grid()) || (g.dx - s.grid().dx).abs() > 1e-12 * g.dx || (g.dt - s.grid().dt).abs() > 1e-12 * g.dt
    {
        return Err(LabError::ShapeMismatch(
            "Klein-Gordon and Schrodinger grids differ".into(),
        ));
    }
    let chi = strip_carrier(&kg.psi, p.rest_frequency());
    let md_kg = decompose(&chi, p.hbar, threshold)?;
    let md_s = decompose(&s.psi, p.hbar, threshold)?;

    let mut density_distance = Vec::with_capacity(g.nt);
    let mut phase_distance = Vec::with_capacity(g.nt);
    for n in 0..g.nt {
        let (rk, rs) = (md_kg.rho.slice(n), md_s.rho.slice(n));
        let num: f64 = rk.iter().zip(rs).map(|(a, b)| (a - b).powi(2)).sum();
        let den: f64 = rs.iter().map(|b| b * b).sum();
        density_distance.push((num / den).sqrt());

        let (sk, ss) = (md_kg.s.slice(n), md_s.s.slice(n));
        let mass: f64 = rs.iter().sum();
        let diff: Vec<f64> = sk.iter().zip(ss).map(|(a, b)| a - b).collect();
        let mean: f64 = diff.iter().zip(rs).map(|(d, r)| d * r).sum::<f64>() / mass;
        let var: f64 = diff.iter().zip(rs).map(|(d, r)| (d - mean).powi(2) * r).sum::<f64>() / mass;
        phase_distance.push(var.sqrt());
    }

    let hj_residual = reduced_hj_residual(&md_kg, kg, p)?;
    let floor = REPORT_DENSITY_FLOOR * md_kg.rho.max_abs();
    let dense: Vec<bool> = md_kg.rho.values().iter().map(|&r| r >= floor).collect();
    let mask = and_mask(&and_mask(&interior_mask(&g, 2), &md_kg.valid_mask()), &dense);
    let amp = md_kg.sqrt_rho();
    let hb2 = p.hbar * p.hbar;
    let time_term = d2dt2(&amp)?.zip_with(&amp, |d, a| if a > 0.0 { hb2 * d / (p.c * p.c * a) } else { 0.0 })?;
    let space_term = d2dx2(&amp)?.zip_with(&amp, |d, a| if a > 0.0 { hb2 * d / a } else { 0.0 })?;

    Ok(LowSpeedReport {
        max_density_distance: density_distance.iter().cloned().fold(0.0, f64::max),
        density_distance,
        max_phase_distance: phase_distance.iter().cloned().fold(0.0, f64::max),
        phase_distance,
        hj_residual_max: max_abs_where(&hj_residual, &mask),
        hj_residual,
        dropped_time_term_max: max_abs_where(&time_term, &mask),
        quantum_term_max: max_abs_where(&space_term, &mask),
    })
}

/// Low-speed Hamilton-Jacobi residual on the slow phase s = S + m c^2 t.
fn reduced_hj_residual(md: &MadelungData, kg: &KGSolution, p: &PhysParams) -> Result<ScalarField> {
    let a = &kg.potentials;
    let st = ddt(&md.s)?;
    let sx = ddx(&md.s)?;
    let amp = md.sqrt_rho();
    let lap = d2dx2(&amp)?;
    let g = *md.grid();
    let mut out = ScalarField::zeros(g);
    for k in 0..g.len() {
        if md.node_mask[k] {
            continue;
        }
        let ps = sx.values()[k] - p.q / p.c * a.ax.values()[k];
        let quantum = -p.hbar * p.hbar / (2.0 * p.m) * lap.values()[k] / amp.values()[k];
        out.values_mut()[k] = st.values()[k] + ps * ps / (2.0 * p.m) + quantum + p.q * a.v.values()[k];
    }
    Ok(out)
}

/// (d_t Phi)^2 / c^2, the other term dropped in the low-speed reduction.
pub fn dropped_phi_term(hp: &HiddenPhase, p: &PhysParams) -> ScalarField {
    let c2 = p.c * p.c;
    hp.phi_t.map(|f| f * f / c2)
}
