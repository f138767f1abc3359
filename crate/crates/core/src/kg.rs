//! Gauged Klein-Gordon evolution and its Noether current.
//!
//! The equation
//!
//! ```text
//! -hbar^2 d^mu d_mu Psi - (2 i hbar q / c) A^mu d_mu Psi + (q^2/c^2) A^mu A_mu Psi = m^2 c^2 Psi
//! ```
//!
//! is solved for the second time derivative,
//!
//! ```text
//! Psi_tt = c^2 Psi_xx - (2 i q V / hbar) Psi_t - (2 i q c A_x / hbar) Psi_x
//!          + (q^2 / hbar^2)(V^2 - A_x^2) Psi - (m c^2 / hbar)^2 Psi
//! ```
//!
//! and marched with a three-level leapfrog. The first-derivative term is
//! centred, `(Psi^{n+1} - Psi^{n-1}) / 2h`, which keeps the update local:
//! `(1 + i a) Psi^{n+1} = 2 Psi^n - (1 - i a) Psi^{n-1} + h^2 R^n` with
//! `a = q V h / hbar`.

use num_complex::Complex64;

use crate::calculus::{d2dt2, d2dx2, ddt, ddx, diff1_line, diff2_line, periodic_diff1, periodic_diff2};
use crate::error::{LabError, Result};
use crate::field::{ComplexField, FourVectorField, ScalarField};
use crate::grid::SpacetimeGrid;
use crate::params::PhysParams;
use crate::potentials::{lorentz_residual, Potentials};

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Boundary {
    /// Periodic in x; conserves the total charge.
    Periodic,
    /// Psi pinned to zero at both ends. Breaks charge conservation.
    Clamped,
}

impl Boundary {
    pub fn name(self) -> &'static str {
        match self {
            Boundary::Periodic => "periodic",
            Boundary::Clamped => "clamped",
        }
    }
}

pub const CFL_CEILING: f64 = 0.9;
/// Rest-phase advance per step above which a resolution warning is issued.
pub const REST_PHASE_WARNING: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KgOptions {
    pub boundary: Boundary,
    /// Internal leapfrog steps per stored time slice.
    pub substeps: usize,
    pub cfl_limit: f64,
    pub lorentz_tolerance: f64,
}

impl Default for KgOptions {
    fn default() -> Self {
        Self {
            boundary: Boundary::Periodic,
            substeps: 1,
            cfl_limit: CFL_CEILING,
            lorentz_tolerance: 1e-6,
        }
    }
}

/// Psi and its time derivative on the initial slice.
#[derive(Debug, Clone, PartialEq)]
pub struct KGInitialData {
    pub psi0: Vec<Complex64>,
    pub psi0_dot: Vec<Complex64>,
}

impl KGInitialData {
    pub fn new(psi0: Vec<Complex64>, psi0_dot: Vec<Complex64>) -> Result<Self> {
        if psi0.len() != psi0_dot.len() {
            return Err(LabError::ShapeMismatch(format!(
                "psi0 has {} points, psi0_dot has {}",
                psi0.len(),
                psi0_dot.len()
            )));
        }
        let finite = |z: &Complex64| z.re.is_finite() && z.im.is_finite();
        if !psi0.iter().all(finite) || !psi0_dot.iter().all(finite) {
            return Err(LabError::InvalidParameter {
                name: "psi0",
                reason: "initial data must be finite".into(),
            });
        }
        Ok(Self { psi0, psi0_dot })
    }

    /// Quasi-rest data: psi0_dot = -(i/hbar)(m c^2 + q V) psi0, with V taken
    /// from the first slice of `a`.
    pub fn quasi_rest(psi0: Vec<Complex64>, a: &Potentials, p: &PhysParams) -> Result<Self> {
        let v = a.v.slice(0);
        let rest = p.m * p.c * p.c;
        let dot = psi0
            .iter()
            .zip(v)
            .map(|(&z, &vi)| -I * (rest + p.q * vi) / p.hbar * z)
            .collect();
        Self::new(psi0, dot)
    }

    /// Data matched to a Schrodinger wave function under the rest-phase
    /// convention Psi = exp(-i m c^2 t / hbar) psi:
    /// psi0_dot = -i (m c^2/hbar) psi0 + dpsi/dt, with dpsi/dt taken from the
    /// Schrodinger equation on the same periodic lattice (A = 0 on slice 0).
    pub fn from_schrodinger(psi0: Vec<Complex64>, a: &Potentials, p: &PhysParams, dx: f64) -> Result<Self> {
        let n = psi0.len();
        let mut lap = vec![Complex64::default(); n];
        periodic_diff2(&psi0, dx, &mut lap);
        let v = a.v.slice(0);
        let rest = p.rest_frequency();
        let dot = (0..n)
            .map(|i| {
                let schr = I * (p.hbar / (2.0 * p.m)) * lap[i] - I * (p.q * v[i] / p.hbar) * psi0[i];
                -I * rest * psi0[i] + schr
            })
            .collect();
        Self::new(psi0, dot)
    }

    /// Exact positive-frequency data for a superposition of free plane waves.
    pub fn free_modes(xs: &[f64], modes: &[crate::packets::Mode], p: &PhysParams) -> Result<Self> {
        let psi0 = crate::packets::superposition(xs, modes);
        let dot = xs
            .iter()
            .map(|&x| {
                modes
                    .iter()
                    .map(|m| -I * p.kg_frequency(m.k) * Complex64::from_polar(m.amplitude, m.k * x))
                    .sum()
            })
            .collect();
        Self::new(psi0, dot)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SchemeMetadata {
    pub cfl: f64,
    pub boundary: Boundary,
    pub substeps: usize,
    pub internal_dt: f64,
    /// m c^2 dt / hbar for the internal step.
    pub rest_phase_per_step: f64,
    pub lorentz_residual_max: f64,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KGSolution {
    pub psi: ComplexField,
    /// Centred time derivative over the internal step at every stored slice.
    pub psi_dot: ComplexField,
    pub params: PhysParams,
    pub potentials: Potentials,
    pub scheme: SchemeMetadata,
}

impl KGSolution {
    pub fn grid(&self) -> &SpacetimeGrid {
        self.psi.grid()
    }
}

struct Stepper<'a> {
    p: &'a PhysParams,
    h: f64,
    dx: f64,
    boundary: Boundary,
    lap: Vec<Complex64>,
    grad: Vec<Complex64>,
}

impl Stepper<'_> {
    /// R = c^2 Psi_xx - (2iqcA/hbar) Psi_x + (q^2/hbar^2)(V^2 - A^2) Psi - Omega^2 Psi
    fn rhs(&mut self, psi: &[Complex64], v: &[f64], ax: &[f64], out: &mut [Complex64]) {
        match self.boundary {
            Boundary::Periodic => {
                periodic_diff2(psi, self.dx, &mut self.lap);
                periodic_diff1(psi, self.dx, &mut self.grad);
            }
            Boundary::Clamped => {
                diff2_line(psi, self.dx, &mut self.lap);
                diff1_line(psi, self.dx, &mut self.grad);
            }
        }
        let p = self.p;
        let c2 = p.c * p.c;
        let omega2 = p.rest_frequency().powi(2);
        let qh = p.q / p.hbar;
        for i in 0..psi.len() {
            out[i] = self.lap[i] * c2 - I * (2.0 * qh * p.c * ax[i]) * self.grad[i]
                + psi[i] * (qh * qh * (v[i] * v[i] - ax[i] * ax[i]) - omega2);
        }
    }

    fn pin(&self, psi: &mut [Complex64]) {
        if self.boundary == Boundary::Clamped {
            let n = psi.len();
            psi[0] = Complex64::default();
            psi[n - 1] = Complex64::default();
        }
    }

    /// Psi^{n+1} from Psi^n, Psi^{n-1}.
    fn step(&mut self, prev: &[Complex64], cur: &[Complex64], v: &[f64], ax: &[f64], next: &mut [Complex64]) {
        self.rhs(cur, v, ax, next);
        let h2 = self.h * self.h;
        let qh = self.p.q / self.p.hbar;
        for i in 0..cur.len() {
            let a = qh * v[i] * self.h;
            let r = next[i];
            next[i] = (cur[i] * 2.0 - prev[i] * Complex64::new(1.0, -a) + r * h2) / Complex64::new(1.0, a);
        }
        self.pin(next);
    }
}

fn finite(s: &[Complex64]) -> bool {
    s.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

/// Evolve initial data over `grid` with default options.
pub fn evolve_kg(init: &KGInitialData, a: &Potentials, p: &PhysParams, grid: &SpacetimeGrid) -> Result<KGSolution> {
    evolve_kg_with(init, a, p, grid, &KgOptions::default())
}

pub fn evolve_kg_with(
    init: &KGInitialData,
    a: &Potentials,
    p: &PhysParams,
    grid: &SpacetimeGrid,
    opts: &KgOptions,
) -> Result<KGSolution> {
    p.validate()?;
    grid.validate()?;
    if opts.substeps == 0 {
        return Err(LabError::InvalidParameter {
            name: "substeps",
            reason: "must be at least 1".into(),
        });
    }
    if init.psi0.len() != grid.nx {
        return Err(LabError::ShapeMismatch(format!(
            "initial data has {} points, grid has nx = {}",
            init.psi0.len(),
            grid.nx
        )));
    }
    if !a.grid().same_shape(grid) {
        return Err(LabError::ShapeMismatch("potentials live on a different grid".into()));
    }

    let h = grid.dt / opts.substeps as f64;
    let cfl = p.c * h / grid.dx;
    if cfl > opts.cfl_limit {
        return Err(LabError::CflViolation {
            ratio: cfl,
            limit: opts.cfl_limit,
        });
    }

    let mut warnings = Vec::new();
    let lorentz_max = if grid.nt >= 3 {
        lorentz_residual(a, p)?.max_abs()
    } else {
        0.0
    };
    if lorentz_max > opts.lorentz_tolerance {
        warnings.push(format!(
            "potentials violate the Lorentz condition: max |d^mu A_mu| = {lorentz_max:.3e}"
        ));
    }
    let rest_phase = p.rest_frequency() * h;
    if rest_phase > REST_PHASE_WARNING {
        warnings.push(format!(
            "rest-phase rotation under-resolved: m c^2 dt / hbar = {rest_phase:.3}"
        ));
    }
    if opts.boundary == Boundary::Clamped {
        warnings.push("clamped boundary: total charge is not conserved".into());
    }

    let nx = grid.nx;
    let mut stepper = Stepper {
        p,
        h,
        dx: grid.dx,
        boundary: opts.boundary,
        lap: vec![Complex64::default(); nx],
        grad: vec![Complex64::default(); nx],
    };

    let mut psi = ComplexField::zeros(*grid);
    let mut psi_dot = ComplexField::zeros(*grid);

    let mut v = vec![0.0; nx];
    let mut ax = vec![0.0; nx];
    let slice_pos = |k: usize| k as f64 / opts.substeps as f64;

    // Start: Psi^1 = Psi^0 + h psi0_dot + (h^2/2)(R^0 - (2 i q V / hbar) psi0_dot),
    // the unique choice whose centred derivative at step 0 equals psi0_dot.
    let mut cur = init.psi0.clone();
    stepper.pin(&mut cur);
    a.interpolate_slice(0.0, &mut v, &mut ax);
    let mut r0 = vec![Complex64::default(); nx];
    stepper.rhs(&cur, &v, &ax, &mut r0);
    let qh = p.q / p.hbar;
    let mut next: Vec<Complex64> = (0..nx)
        .map(|i| {
            let dot = init.psi0_dot[i];
            cur[i] + dot * h + (r0[i] - I * (2.0 * qh * v[i]) * dot) * (0.5 * h * h)
        })
        .collect();
    stepper.pin(&mut next);
    if !finite(&next) {
        return Err(LabError::Divergence { step: 1 });
    }
    let mut prev: Vec<Complex64> = (0..nx).map(|i| next[i] - init.psi0_dot[i] * (2.0 * h)).collect();

    psi.slice_mut(0).copy_from_slice(&cur);
    psi_dot.slice_mut(0).copy_from_slice(&init.psi0_dot);

    // Invariant at the top of the loop: prev = Psi^{k-1}, cur = Psi^k, next = Psi^{k+1}.
    let total = (grid.nt - 1) * opts.substeps;
    let mut scratch = vec![Complex64::default(); nx];
    for k in 1..=total {
        std::mem::swap(&mut prev, &mut cur);
        std::mem::swap(&mut cur, &mut next);
        a.interpolate_slice(slice_pos(k), &mut v, &mut ax);
        stepper.step(&prev, &cur, &v, &ax, &mut scratch);
        std::mem::swap(&mut next, &mut scratch);
        if !finite(&next) {
            return Err(LabError::Divergence { step: k + 1 });
        }
        if k % opts.substeps == 0 {
            let n = k / opts.substeps;
            psi.slice_mut(n).copy_from_slice(&cur);
            let dot = psi_dot.slice_mut(n);
            for i in 0..nx {
                dot[i] = (next[i] - prev[i]) / (2.0 * h);
            }
        }
    }

    Ok(KGSolution {
        psi,
        psi_dot,
        params: *p,
        potentials: a.clone(),
        scheme: SchemeMetadata {
            cfl,
            boundary: opts.boundary,
            substeps: opts.substeps,
            internal_dt: h,
            rest_phase_per_step: rest_phase,
            lorentz_residual_max: lorentz_max,
            warnings,
        },
    })
}

/// Pointwise magnitude of
/// `-hbar^2 box Psi - (2 i hbar q / c) A^mu d_mu Psi + (q^2/c^2) A^2 Psi - m^2 c^2 Psi`
/// evaluated with the lattice calculus on the stored slices. Edge rows use
/// one-sided stencils; compare on interior points.
pub fn kg_residual(sol: &KGSolution) -> Result<ScalarField> {
    let p = &sol.params;
    let psi = &sol.psi;
    let a = &sol.potentials;
    let ptt = d2dt2(psi)?;
    let pxx = d2dx2(psi)?;
    let pt = ddt(psi)?;
    let px = ddx(psi)?;
    let g = *psi.grid();
    let (hb2, c, q) = (p.hbar * p.hbar, p.c, p.q);
    let m2c2 = (p.m * c).powi(2);
    let mut out = ScalarField::zeros(g);
    for k in 0..g.len() {
        let (vv, aa) = (a.v.values()[k], a.ax.values()[k]);
        let z = psi.values()[k];
        let box_psi = ptt.values()[k] / (c * c) - pxx.values()[k];
        let a_dot_d = pt.values()[k] * (vv / c) + px.values()[k] * aa;
        let r = -box_psi * hb2 - I * (2.0 * p.hbar * q / c) * a_dot_d
            + z * ((q * q / (c * c)) * (vv * vv - aa * aa) - m2c2);
        out.values_mut()[k] = r.norm();
    }
    Ok(out)
}

/// Covariant Noether current
/// `J_mu = (i hbar/2)(Psi* d_mu Psi - Psi d_mu Psi*) - (q/c) A_mu |Psi|^2`.
///
/// The time component uses the solver's centred derivative; the space
/// component uses the lattice x-derivative.
pub fn noether_current(sol: &KGSolution) -> Result<FourVectorField> {
    noether_current_of(&sol.psi, &sol.psi_dot, &sol.potentials, &sol.params)
}

/// Noether current of an arbitrary field with supplied time derivative.
pub fn noether_current_of(
    psi: &ComplexField,
    psi_t: &ComplexField,
    a: &Potentials,
    p: &PhysParams,
) -> Result<FourVectorField> {
    let px = ddx(psi)?;
    let (hbar, c, q) = (p.hbar, p.c, p.q);
    let g = *psi.grid();
    let mut j0 = ScalarField::zeros(g);
    let mut j1 = ScalarField::zeros(g);
    for k in 0..g.len() {
        let z = psi.values()[k];
        let rho = z.norm_sqr();
        let im_t = (z.conj() * psi_t.values()[k]).im;
        let im_x = (z.conj() * px.values()[k]).im;
        j0.values_mut()[k] = -hbar * im_t / c - (q / c) * a.v.values()[k] * rho;
        // A_1 = -A_x
        j1.values_mut()[k] = -hbar * im_x + (q / c) * a.ax.values()[k] * rho;
    }
    FourVectorField::covariant(j0, j1)
}

/// Spatial integral of J^0 on each time slice. Periodic data use the
/// closed trapezoid (every point weighted dx); otherwise the open one.
pub fn total_charge(j: &FourVectorField, boundary: Boundary) -> Result<Vec<f64>> {
    let g = *j.grid();
    // J^0 = J_0 for either variance
    let j0 = &j.time;
    Ok((0..g.nt)
        .map(|n| {
            let s = j0.slice(n);
            let sum: f64 = s.iter().sum();
            match boundary {
                Boundary::Periodic => sum * g.dx,
                Boundary::Clamped => (sum - 0.5 * (s[0] + s[g.nx - 1])) * g.dx,
            }
        })
        .collect())
}

/// Largest relative deviation of a series from its first value.
pub fn relative_drift(series: &[f64]) -> f64 {
    let first = series[0];
    let scale = first.abs().max(f64::MIN_POSITIVE);
    series.iter().map(|q| (q - first).abs() / scale).fold(0.0, f64::max)
}
