//! The hidden phase Phi that moves the de Broglie-Bohm momentum onto the
//! mass shell, and the fluid quantities built from the corrected velocity.
//!
//! With `P_x = d_x(S + Phi) - (q/c) A_x` and `K = c sqrt(m^2 c^2 + P_x^2)`
//! the phase obeys `d_t Phi = -K - q V - d_t S`. It is marched slice by
//! slice with Heun's method. Spatial derivatives are taken separately on
//! each run of non-node points, so a node splits the line into regions that
//! evolve independently.

use crate::calculus::{ddt, diff1_line, four_divergence};
use crate::error::{LabError, Result};
use crate::field::{FourVectorField, ScalarField, SymmetricTensor};
use crate::madelung::{quantum_potential, quantum_term_rel, MadelungData};
use crate::norms::{and_mask, interior_mask, max_abs_where};
use crate::params::PhysParams;
use crate::potentials::{faraday, Potentials};

/// Sign of the kinetic energy K.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Branch {
    #[default]
    Positive,
    Negative,
}

impl Branch {
    pub fn sign(self) -> f64 {
        match self {
            Branch::Positive => 1.0,
            Branch::Negative => -1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HiddenPhaseOptions {
    pub branch: Branch,
    /// Pointwise bound on |v^mu v_mu - c^2| / c^2.
    pub mass_shell_tolerance: f64,
    /// Points this close to an edge of the lattice are left out of the
    /// reported residual norms.
    pub report_margin: usize,
    /// Treat x as periodic on slices free of nodes. The phase S may then
    /// jump by whole cycles of 2 pi hbar across the seam; that jump is
    /// removed before differencing.
    pub periodic: bool,
    /// Points with rho below this fraction of max(rho) are left out of the
    /// march in addition to the node points. Far in the tails the quantum
    /// term is dominated by round-off and Phi there would only feed noise
    /// into the resolved region.
    pub min_density: f64,
}

impl Default for HiddenPhaseOptions {
    fn default() -> Self {
        Self {
            branch: Branch::Positive,
            mass_shell_tolerance: 1e-8,
            report_margin: 2,
            periodic: false,
            min_density: 1e-6,
        }
    }
}

impl HiddenPhaseOptions {
    /// Node mask widened by the `min_density` floor.
    pub fn exclusion_mask(&self, rho: &ScalarField, node_mask: &[bool]) -> Vec<bool> {
        let floor = self.min_density * rho.max_abs();
        rho.values()
            .iter()
            .zip(node_mask)
            .map(|(&r, &node)| node || r < floor)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResidualReport {
    /// max |v^mu v_mu - c^2| over interior non-node points.
    pub mass_shell_max: f64,
    /// max |2m v.dPhi + dPhi.dPhi - hbar^2 box(sqrt rho)/sqrt rho| over the same points.
    pub phi_condition_max: f64,
    /// Largest number of separate non-node regions on any slice.
    pub max_regions: usize,
    /// Slices on which the non-node points form more than one region.
    pub split_slices: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HiddenPhase {
    pub phi: ScalarField,
    /// The marched right-hand side -K - qV - d_t S evaluated on each stored
    /// slice, used wherever d_t Phi is needed.
    pub phi_t: ScalarField,
    pub branch: Branch,
    pub phi0: Vec<f64>,
    pub periodic: bool,
    /// Points left out of the march (nodes and the low-density floor). All
    /// quantities derived from Phi are zero there.
    pub excluded: Vec<bool>,
    pub residual_report: Option<ResidualReport>,
}

impl HiddenPhase {
    /// Wrap a prescribed Phi, with the time derivative taken by finite
    /// differences. No mass-shell condition is imposed. Only the node
    /// points of `md` are excluded.
    pub fn forced(phi: ScalarField, md: &MadelungData) -> Result<Self> {
        let phi_t = ddt(&phi)?;
        let phi0 = phi.slice(0).to_vec();
        Ok(Self {
            phi,
            phi_t,
            branch: Branch::Positive,
            phi0,
            periodic: false,
            excluded: md.node_mask.clone(),
            residual_report: None,
        })
    }

    pub fn grid(&self) -> &crate::grid::SpacetimeGrid {
        self.phi.grid()
    }
}

/// Corrected four-velocity (covariant) and kinetic energy.
#[derive(Debug, Clone, PartialEq)]
pub struct KineticState {
    pub v: FourVectorField,
    pub k: ScalarField,
    /// Non-node points where the mass shell misses the tolerance.
    pub off_shell_points: usize,
}

/// Maximal runs of consecutive valid points, as half-open ranges.
fn valid_runs(valid: &[bool]) -> Vec<(usize, usize)> {
    let mut runs = Vec::new();
    let mut start = None;
    for (i, &ok) in valid.iter().enumerate() {
        match (ok, start) {
            (true, None) => start = Some(i),
            (false, Some(s)) => {
                runs.push((s, i));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        runs.push((s, valid.len()));
    }
    runs
}

/// d/dx within each run of valid points; zero on invalid points.
fn region_diff(f: &[f64], valid: &[bool], dx: f64, out: &mut [f64]) {
    out.iter_mut().for_each(|o| *o = 0.0);
    for (a, b) in valid_runs(valid) {
        match b - a {
            1 => {}
            2 => {
                let s = (f[a + 1] - f[a]) / dx;
                out[a] = s;
                out[a + 1] = s;
            }
            _ => diff1_line(&f[a..b], dx, &mut out[a..b]),
        }
    }
}

/// Give points that become valid on the next slice the value of the nearest
/// point valid on both slices, so a region growing into former node points
/// continues smoothly instead of starting from a stale value.
pub(crate) fn seed_entering(phi: &mut [f64], valid_now: &[bool], valid_next: &[bool]) {
    let n = phi.len();
    let anchor = |i: usize| valid_now[i] && valid_next[i];
    for i in 0..n {
        if !valid_next[i] || valid_now[i] {
            continue;
        }
        let mut best = None;
        for d in 1..n {
            let left = (i + n - d % n) % n;
            let right = (i + d) % n;
            if anchor(left) {
                best = Some(left);
                break;
            }
            if anchor(right) {
                best = Some(right);
                break;
            }
        }
        if let Some(j) = best {
            phi[i] = phi[j];
        }
    }
}

/// Centred d/dx on a periodic line whose values satisfy
/// f(x + L) = f(x) - jump, with `jump` a whole number of `cycle`s.
fn seam_diff(f: &[f64], dx: f64, cycle: f64, out: &mut [f64]) {
    let n = f.len();
    let jump = if cycle > 0.0 {
        cycle * ((f[0] - f[n - 1]) / cycle).round()
    } else {
        0.0
    };
    let c = 0.5 / dx;
    for i in 1..n - 1 {
        out[i] = (f[i + 1] - f[i - 1]) * c;
    }
    out[0] = (f[1] - (f[n - 1] + jump)) * c;
    out[n - 1] = ((f[0] - jump) - f[n - 2]) * c;
}

/// How spatial derivatives are taken: run by run between nodes, or around
/// the periodic seam on slices without nodes. `cycle` is the whole-cycle
/// jump allowed across the seam (2 pi hbar for a phase, 0 otherwise).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stencil {
    pub dx: f64,
    pub periodic: bool,
    pub cycle: f64,
}

impl Stencil {
    /// Stencil for the phase S (or S + Phi) of `md`.
    pub fn for_phase(md: &MadelungData, periodic: bool) -> Self {
        Self {
            dx: md.grid().dx,
            periodic,
            cycle: 2.0 * std::f64::consts::PI * md.hbar,
        }
    }

    /// Same stencil for a single-valued field.
    pub fn single_valued(self) -> Self {
        Self { cycle: 0.0, ..self }
    }

    pub fn apply(&self, f: &[f64], valid: &[bool], out: &mut [f64]) {
        if self.periodic && valid.iter().all(|&v| v) {
            seam_diff(f, self.dx, self.cycle, out);
        } else {
            region_diff(f, valid, self.dx, out);
        }
    }

    pub fn ddx(&self, f: &ScalarField, node_mask: &[bool]) -> ScalarField {
        let g = *f.grid();
        let mut out = ScalarField::zeros(g);
        let mut valid = vec![false; g.nx];
        for n in 0..g.nt {
            let row = g.index(n, 0);
            for i in 0..g.nx {
                valid[i] = !node_mask[row + i];
            }
            self.apply(f.slice(n), &valid, out.slice_mut(n));
        }
        out
    }
}

/// d/dx of a field, run by run between node points.
pub fn ddx_between_nodes(f: &ScalarField, node_mask: &[bool]) -> ScalarField {
    let st = Stencil {
        dx: f.grid().dx,
        periodic: false,
        cycle: 0.0,
    };
    st.ddx(f, node_mask)
}

/// d/dx of S + Phi with the stencil the solver used.
pub fn phase_gradient(md: &MadelungData, hp: &HiddenPhase) -> Result<ScalarField> {
    let sum = md.s.add(&hp.phi)?;
    Ok(Stencil::for_phase(md, hp.periodic).ddx(&sum, &hp.excluded))
}

/// d/dx of Phi alone with the solver's stencil choice.
pub fn phi_gradient(md: &MadelungData, hp: &HiddenPhase) -> ScalarField {
    Stencil::for_phase(md, hp.periodic)
        .single_valued()
        .ddx(&hp.phi, &hp.excluded)
}

struct Marcher<'a> {
    md: &'a MadelungData,
    a: &'a Potentials,
    p: &'a PhysParams,
    s_t: ScalarField,
    excluded: &'a [bool],
    sign: f64,
    stencil: Stencil,
    valid: Vec<bool>,
    sum: Vec<f64>,
    grad: Vec<f64>,
}

impl Marcher<'_> {
    /// -K - qV - d_t S on slice `n` for the given Phi.
    fn rhs(&mut self, n: usize, phi: &[f64], out: &mut [f64]) {
        let g = *self.md.grid();
        let row = g.index(n, 0);
        let s = self.md.s.slice(n);
        for i in 0..g.nx {
            self.valid[i] = !self.excluded[row + i];
            self.sum[i] = s[i] + phi[i];
        }
        self.stencil.apply(&self.sum, &self.valid, &mut self.grad);
        let (c, q, m) = (self.p.c, self.p.q, self.p.m);
        let m2c2 = (m * c).powi(2);
        let (v, ax, st) = (self.a.v.slice(n), self.a.ax.slice(n), self.s_t.slice(n));
        for i in 0..g.nx {
            out[i] = if self.valid[i] {
                let px = self.grad[i] - q / c * ax[i];
                let k = self.sign * c * (m2c2 + px * px).sqrt();
                -k - q * v[i] - st[i]
            } else {
                0.0
            };
        }
    }
}

pub fn solve_phi(md: &MadelungData, a: &Potentials, p: &PhysParams, phi0: &[f64]) -> Result<HiddenPhase> {
    solve_phi_with(md, a, p, phi0, &HiddenPhaseOptions::default())
}

pub fn solve_phi_with(
    md: &MadelungData,
    a: &Potentials,
    p: &PhysParams,
    phi0: &[f64],
    opts: &HiddenPhaseOptions,
) -> Result<HiddenPhase> {
    p.validate()?;
    let g = *md.grid();
    if phi0.len() != g.nx {
        return Err(LabError::ShapeMismatch(format!(
            "phi0 has {} points for nx = {}",
            phi0.len(),
            g.nx
        )));
    }
    if !a.grid().same_shape(&g) {
        return Err(LabError::ShapeMismatch("potentials live on a different grid".into()));
    }
    if phi0
        .iter()
        .zip(&md.node_mask[..g.nx])
        .any(|(v, &node)| !node && !v.is_finite())
    {
        return Err(LabError::InvalidParameter {
            name: "phi0",
            reason: "must be finite on non-node points".into(),
        });
    }

    let excluded = opts.exclusion_mask(&md.rho, &md.node_mask);
    let mut mk = Marcher {
        md,
        a,
        p,
        s_t: ddt(&md.s)?,
        excluded: &excluded,
        sign: opts.branch.sign(),
        stencil: Stencil::for_phase(md, opts.periodic),
        valid: vec![false; g.nx],
        sum: vec![0.0; g.nx],
        grad: vec![0.0; g.nx],
    };

    let mut phi = ScalarField::zeros(g);
    let mut phi_t = ScalarField::zeros(g);
    let start: Vec<f64> = phi0.iter().map(|v| if v.is_finite() { *v } else { 0.0 }).collect();
    phi.slice_mut(0).copy_from_slice(&start);

    let mut f0 = vec![0.0; g.nx];
    let mut f1 = vec![0.0; g.nx];
    let mut pred = vec![0.0; g.nx];
    let h = g.dt;
    let valid_on = |n: usize| -> Vec<bool> {
        let row = g.index(n, 0);
        excluded[row..row + g.nx].iter().map(|&b| !b).collect()
    };
    for n in 0..g.nt - 1 {
        let mut cur = phi.slice(n).to_vec();
        seed_entering(&mut cur, &valid_on(n), &valid_on(n + 1));
        phi.slice_mut(n).copy_from_slice(&cur);
        mk.rhs(n, &cur, &mut f0);
        phi_t.slice_mut(n).copy_from_slice(&f0);
        for i in 0..g.nx {
            pred[i] = cur[i] + h * f0[i];
        }
        mk.rhs(n + 1, &pred, &mut f1);
        let next = phi.slice_mut(n + 1);
        for i in 0..g.nx {
            next[i] = cur[i] + 0.5 * h * (f0[i] + f1[i]);
        }
        if next.iter().any(|v| !v.is_finite()) {
            return Err(LabError::Divergence { step: n + 1 });
        }
    }
    let last = phi.slice(g.nt - 1).to_vec();
    mk.rhs(g.nt - 1, &last, &mut f0);
    phi_t.slice_mut(g.nt - 1).copy_from_slice(&f0);

    let mut hp = HiddenPhase {
        phi,
        phi_t,
        branch: opts.branch,
        phi0: phi0.to_vec(),
        periodic: opts.periodic,
        excluded: excluded.clone(),
        residual_report: None,
    };

    let ks = velocity_field_with(md, &hp, a, p, opts.mass_shell_tolerance)?;
    let valid: Vec<bool> = excluded.iter().map(|&b| !b).collect();
    let mask = and_mask(&interior_mask(&g, opts.report_margin), &valid);
    let mass_shell_max = max_abs_where(&mass_shell_residual(&ks, p), &mask);
    let phi_condition_max = max_abs_where(&phi_condition_residual(md, &hp, &ks, p)?, &mask);
    let mut split_slices = Vec::new();
    let mut max_regions = 0;
    for n in 0..g.nt {
        let row = g.index(n, 0);
        let valid: Vec<bool> = excluded[row..row + g.nx].iter().map(|&b| !b).collect();
        let regions = valid_runs(&valid).len();
        max_regions = max_regions.max(regions);
        if regions > 1 {
            split_slices.push(n);
        }
    }
    hp.residual_report = Some(ResidualReport {
        mass_shell_max,
        phi_condition_max,
        max_regions,
        split_slices,
    });
    Ok(hp)
}

fn zero_nodes(mut f: ScalarField, mask: &[bool]) -> ScalarField {
    for (v, &node) in f.values_mut().iter_mut().zip(mask) {
        if node {
            *v = 0.0;
        }
    }
    f
}

/// m v_mu = -d_mu S - d_mu Phi - (q/c) A_mu and K = -d_t(S + Phi) - qV.
pub fn velocity_field(md: &MadelungData, hp: &HiddenPhase, a: &Potentials, p: &PhysParams) -> Result<KineticState> {
    velocity_field_with(md, hp, a, p, HiddenPhaseOptions::default().mass_shell_tolerance)
}

pub fn velocity_field_with(
    md: &MadelungData,
    hp: &HiddenPhase,
    a: &Potentials,
    p: &PhysParams,
    tolerance: f64,
) -> Result<KineticState> {
    let g = *md.grid();
    let s_t = ddt(&md.s)?;
    let grad = phase_gradient(md, hp)?;
    let (c, q, m) = (p.c, p.q, p.m);
    let mut k = ScalarField::zeros(g);
    let mut v0 = ScalarField::zeros(g);
    let mut v1 = ScalarField::zeros(g);
    for idx in 0..g.len() {
        if hp.excluded[idx] {
            continue;
        }
        let kin = -s_t.values()[idx] - hp.phi_t.values()[idx] - q * a.v.values()[idx];
        k.values_mut()[idx] = kin;
        v0.values_mut()[idx] = kin / (m * c);
        // A_1 = -A_x
        v1.values_mut()[idx] = (-grad.values()[idx] + q / c * a.ax.values()[idx]) / m;
    }
    let v = FourVectorField::covariant(v0, v1)?;
    let c2 = c * c;
    let off_shell_points = v
        .square()
        .values()
        .iter()
        .zip(&hp.excluded)
        .filter(|(s, &node)| !node && ((**s - c2) / c2).abs() > tolerance)
        .count();
    Ok(KineticState { v, k, off_shell_points })
}

/// v^mu v_mu - c^2 (zero on nodes, where v is not defined).
pub fn mass_shell_residual(ks: &KineticState, p: &PhysParams) -> ScalarField {
    let c2 = p.c * p.c;
    let mut out = ks.v.square().map(|s| s - c2);
    for (o, k) in out.values_mut().iter_mut().zip(ks.k.values()) {
        if *k == 0.0 {
            *o = 0.0;
        }
    }
    out
}

/// 2m v^mu d_mu Phi + d^mu Phi d_mu Phi - hbar^2 box(sqrt rho)/sqrt rho, with the
/// derivatives of Phi taken by finite differences.
pub fn phi_condition_residual(
    md: &MadelungData,
    hp: &HiddenPhase,
    ks: &KineticState,
    p: &PhysParams,
) -> Result<ScalarField> {
    ks.v.require(crate::field::Variance::Covariant)?;
    let d0 = ddt(&hp.phi)?.scale(1.0 / p.c);
    let d1 = phi_gradient(md, hp);
    let qt = quantum_term_rel(md, p)?;
    let g = *md.grid();
    let mut out = ScalarField::zeros(g);
    for idx in 0..g.len() {
        if hp.excluded[idx] {
            continue;
        }
        let (a0, a1) = (d0.values()[idx], d1.values()[idx]);
        let (v0, v1) = (ks.v.time.values()[idx], ks.v.space.values()[idx]);
        // v^mu d_mu Phi with v^1 = -v_1
        let v_dphi = v0 * a0 - v1 * a1;
        out.values_mut()[idx] = 2.0 * p.m * v_dphi + (a0 * a0 - a1 * a1) - qt.values()[idx];
    }
    Ok(out)
}

/// Covariant rho d_mu Phi, with d_t Phi taken from the stored `phi_t`.
fn rho_dphi(md: &MadelungData, hp: &HiddenPhase, p: &PhysParams) -> Result<FourVectorField> {
    let d1 = phi_gradient(md, hp);
    let t = md.rho.zip_with(&hp.phi_t, |r, f| r * f / p.c)?;
    let s = md.rho.mul(&d1)?;
    FourVectorField::covariant(t, s)
}

/// Both sides of d^mu(rho v_mu) = -d^mu(rho d_mu Phi) / m.
pub fn creation_rate(
    md: &MadelungData,
    hp: &HiddenPhase,
    ks: &KineticState,
    p: &PhysParams,
) -> Result<(ScalarField, ScalarField)> {
    let flux = FourVectorField::covariant(md.rho.mul(&ks.v.time)?, md.rho.mul(&ks.v.space)?)?;
    let lhs = four_divergence(&flux, p)?;
    let rhs = four_divergence(&rho_dphi(md, hp, p)?, p)?.scale(-1.0 / p.m);
    Ok((zero_nodes(lhs, &hp.excluded), zero_nodes(rhs, &hp.excluded)))
}

/// T_mu,nu = m rho v_mu v_nu (lower indices).
pub fn stress_tensor(md: &MadelungData, ks: &KineticState, p: &PhysParams) -> Result<SymmetricTensor> {
    let (v0, v1) = (&ks.v.time, &ks.v.space);
    let mr = md.rho.scale(p.m);
    Ok(SymmetricTensor {
        t00: mr.mul(&v0.mul(v0)?)?,
        t01: mr.mul(&v0.mul(v1)?)?,
        t11: mr.mul(&v1.mul(v1)?)?,
    })
}

/// d^nu(rho d_nu Phi), the local source strength.
fn source_divergence(md: &MadelungData, hp: &HiddenPhase, p: &PhysParams) -> Result<ScalarField> {
    four_divergence(&rho_dphi(md, hp, p)?, p)
}

/// K_mu = -v_mu d^nu(rho d_nu Phi).
pub fn quantum_force(
    md: &MadelungData,
    hp: &HiddenPhase,
    ks: &KineticState,
    p: &PhysParams,
) -> Result<FourVectorField> {
    let d = zero_nodes(source_divergence(md, hp, p)?, &hp.excluded);
    let t = ks.v.time.zip_with(&d, |v, s| -v * s)?;
    let s = ks.v.space.zip_with(&d, |v, s| -v * s)?;
    FourVectorField::covariant(t, s)
}

/// d^nu T_mu,nu - (q/c) rho v^nu F_mu,nu + v_mu d^nu(rho d_nu Phi), covariant.
pub fn euler_residual(
    md: &MadelungData,
    ks: &KineticState,
    a: &Potentials,
    hp: &HiddenPhase,
    p: &PhysParams,
) -> Result<FourVectorField> {
    let t = stress_tensor(md, ks, p)?;
    let f01 = faraday(a, p)?.f01;
    let src = source_divergence(md, hp, p)?;
    // d^nu T_mu,nu = (1/c) d_t T_mu0 - d_x T_mu1
    let div0 = four_divergence(&FourVectorField::covariant(t.t00.clone(), t.t01.clone())?, p)?;
    let div1 = four_divergence(&FourVectorField::covariant(t.t01.clone(), t.t11.clone())?, p)?;
    let g = *md.grid();
    let qc = p.q / p.c;
    let mut r0 = ScalarField::zeros(g);
    let mut r1 = ScalarField::zeros(g);
    for idx in 0..g.len() {
        if hp.excluded[idx] {
            continue;
        }
        let (v0, v1) = (ks.v.time.values()[idx], ks.v.space.values()[idx]);
        let (rho, e, s) = (md.rho.values()[idx], f01.values()[idx], src.values()[idx]);
        // v^nu F_0nu = v^1 F_01 = -v_1 F_01 ; v^nu F_1nu = v^0 F_10 = -v_0 F_01
        r0.values_mut()[idx] = div0.values()[idx] + qc * rho * v1 * e + v0 * s;
        r1.values_mut()[idx] = div1.values()[idx] + qc * rho * v0 * e + v1 * s;
    }
    FourVectorField::covariant(r0, r1)
}

/// Low-speed form of the phase condition,
/// `d_t Phi + (d_x S - (q/c) A_x) d_x Phi / m + (d_x Phi)^2 / 2m - Q`,
/// with Q the quantum potential. Vanishes up to O((v/c)^2) relative to Q.
pub fn lowspeed_phi_residual(
    md: &MadelungData,
    hp: &HiddenPhase,
    a: &Potentials,
    p: &PhysParams,
) -> Result<ScalarField> {
    let q_pot = quantum_potential(&md.rho, &hp.excluded, p)?;
    let sx = Stencil::for_phase(md, hp.periodic).ddx(&md.s, &hp.excluded);
    let fx = phi_gradient(md, hp);
    let g = *md.grid();
    let (c, q, m) = (p.c, p.q, p.m);
    let mut out = ScalarField::zeros(g);
    for idx in 0..g.len() {
        if hp.excluded[idx] {
            continue;
        }
        let ps = sx.values()[idx] - q / c * a.ax.values()[idx];
        let f = fx.values()[idx];
        out.values_mut()[idx] = hp.phi_t.values()[idx] + ps * f / m + f * f / (2.0 * m) - q_pot.values()[idx];
    }
    Ok(out)
}
