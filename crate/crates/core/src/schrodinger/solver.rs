use num_complex::Complex64;

use crate::error::{LabError, Result};
use crate::field::ComplexField;
use crate::grid::SpacetimeGrid;
use crate::packets::norm_sqr;
use crate::params::PhysParams;
use crate::potentials::Potentials;

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// hbar dt / (m dx^2) above which a resolution warning is issued.
pub const KINETIC_RATIO_WARNING: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchrodingerOptions {
    /// Crank-Nicolson steps per stored slice.
    pub substeps: usize,
}

impl Default for SchrodingerOptions {
    fn default() -> Self {
        Self { substeps: 1 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SchrodingerSolution {
    pub psi: ComplexField,
    pub potentials: Potentials,
    pub params: PhysParams,
    pub substeps: usize,
    pub warnings: Vec<String>,
}

impl SchrodingerSolution {
    pub fn grid(&self) -> &SpacetimeGrid {
        self.psi.grid()
    }

    /// Sum |psi|^2 dx on every slice.
    pub fn norms(&self) -> Vec<f64> {
        let g = self.grid();
        (0..g.nt).map(|n| norm_sqr(self.psi.slice(n), g.dx)).collect()
    }
}

/// Solve a cyclic tridiagonal system
/// `lower[i] x[i-1] + diag[i] x[i] + upper[i] x[i+1] = rhs[i]`, indices mod n.
/// Uses the Sherman-Morrison reduction to two plain tridiagonal solves.
pub fn solve_cyclic_tridiagonal(
    lower: &[Complex64],
    diag: &[Complex64],
    upper: &[Complex64],
    rhs: &[Complex64],
) -> std::result::Result<Vec<Complex64>, String> {
    let n = diag.len();
    if n < 3 || lower.len() != n || upper.len() != n || rhs.len() != n {
        return Err(format!("cyclic system needs n >= 3 and equal lengths, got n = {n}"));
    }
    let alpha = upper[n - 1]; // row n-1, column 0
    let beta = lower[0]; // row 0, column n-1
    let gamma = -diag[0];
    let mut b = diag.to_vec();
    b[0] -= gamma;
    b[n - 1] -= alpha * beta / gamma;
    let x = thomas(lower, &b, upper, rhs)?;
    let mut u = vec![Complex64::default(); n];
    u[0] = gamma;
    u[n - 1] = alpha;
    let z = thomas(lower, &b, upper, &u)?;
    let num = x[0] + beta * x[n - 1] / gamma;
    let den = Complex64::new(1.0, 0.0) + z[0] + beta * z[n - 1] / gamma;
    if den.norm() < 1e-300 {
        return Err("Sherman-Morrison denominator vanished".into());
    }
    let fact = num / den;
    Ok(x.iter().zip(&z).map(|(xi, zi)| xi - fact * zi).collect())
}

fn thomas(
    a: &[Complex64],
    b: &[Complex64],
    c: &[Complex64],
    r: &[Complex64],
) -> std::result::Result<Vec<Complex64>, String> {
    let n = b.len();
    let mut cp = vec![Complex64::default(); n];
    let mut x = vec![Complex64::default(); n];
    let mut piv = b[0];
    if piv.norm() == 0.0 {
        return Err("zero pivot in row 0".into());
    }
    cp[0] = c[0] / piv;
    x[0] = r[0] / piv;
    for i in 1..n {
        piv = b[i] - a[i] * cp[i - 1];
        if piv.norm() == 0.0 || !piv.re.is_finite() {
            return Err(format!("zero pivot in row {i}"));
        }
        cp[i] = c[i] / piv;
        x[i] = (r[i] - a[i] * x[i - 1]) / piv;
    }
    for i in (0..n - 1).rev() {
        let next = x[i + 1];
        x[i] -= cp[i] * next;
    }
    Ok(x)
}

/// Periodic lattice Hamiltonian with Peierls phases on the links:
/// (H psi)_j = -K (U_j+ psi_{j+1} - 2 psi_j + U_j- psi_{j-1}) + q V_j psi_j,
/// K = hbar^2 / (2 m dx^2), U_j+ = exp(-i q A_{j+1/2} dx / (hbar c)).
struct Hamiltonian {
    lower: Vec<Complex64>,
    diag: Vec<Complex64>,
    upper: Vec<Complex64>,
}

impl Hamiltonian {
    fn new(v: &[f64], ax: &[f64], p: &PhysParams, dx: f64) -> Self {
        let n = v.len();
        let kin = p.hbar * p.hbar / (2.0 * p.m * dx * dx);
        let kappa = p.q * dx / (p.hbar * p.c);
        let mut lower = vec![Complex64::default(); n];
        let mut upper = vec![Complex64::default(); n];
        let mut diag = vec![Complex64::default(); n];
        for j in 0..n {
            let jp = (j + 1) % n;
            let link = 0.5 * (ax[j] + ax[jp]);
            let u = Complex64::from_polar(1.0, -kappa * link);
            upper[j] = -kin * u;
            // hermitian partner: H[jp][j] = conj(H[j][jp])
            lower[jp] = -kin * u.conj();
            diag[j] = Complex64::new(2.0 * kin + p.q * v[j], 0.0);
        }
        Self { lower, diag, upper }
    }

    fn apply(&self, psi: &[Complex64], out: &mut [Complex64]) {
        let n = psi.len();
        for j in 0..n {
            let jp = (j + 1) % n;
            let jm = (j + n - 1) % n;
            out[j] = self.lower[j] * psi[jm] + self.diag[j] * psi[j] + self.upper[j] * psi[jp];
        }
    }
}

pub fn evolve_schrodinger(
    psi0: &[Complex64],
    a: &Potentials,
    p: &PhysParams,
    grid: &SpacetimeGrid,
) -> Result<SchrodingerSolution> {
    evolve_schrodinger_with(psi0, a, p, grid, &SchrodingerOptions::default())
}

/// Crank-Nicolson evolution of i hbar psi_t = H psi on a periodic line, with
/// the Hamiltonian taken at the midpoint of every step.
pub fn evolve_schrodinger_with(
    psi0: &[Complex64],
    a: &Potentials,
    p: &PhysParams,
    grid: &SpacetimeGrid,
    opts: &SchrodingerOptions,
) -> Result<SchrodingerSolution> {
    p.validate()?;
    grid.validate()?;
    if opts.substeps == 0 {
        return Err(LabError::InvalidParameter {
            name: "substeps",
            reason: "must be at least 1".into(),
        });
    }
    if psi0.len() != grid.nx {
        return Err(LabError::ShapeMismatch(format!(
            "initial data has {} points, grid has nx = {}",
            psi0.len(),
            grid.nx
        )));
    }
    if !a.grid().same_shape(grid) {
        return Err(LabError::ShapeMismatch("potentials live on a different grid".into()));
    }
    let nx = grid.nx;
    let h = grid.dt / opts.substeps as f64;
    let mut warnings = Vec::new();
    let ratio = p.hbar * h / (p.m * grid.dx * grid.dx);
    if ratio > KINETIC_RATIO_WARNING {
        warnings.push(format!(
            "kinetic time scale under-resolved: hbar dt / (m dx^2) = {ratio:.3}"
        ));
    }

    let mut psi = ComplexField::zeros(*grid);
    psi.slice_mut(0).copy_from_slice(psi0);
    let mut cur = psi0.to_vec();
    let mut hpsi = vec![Complex64::default(); nx];
    let mut rhs = vec![Complex64::default(); nx];
    let mut v = vec![0.0; nx];
    let mut ax = vec![0.0; nx];
    let w = I * (0.5 * h / p.hbar);
    let total = (grid.nt - 1) * opts.substeps;
    for k in 1..=total {
        a.interpolate_slice((k as f64 - 0.5) / opts.substeps as f64, &mut v, &mut ax);
        let ham = Hamiltonian::new(&v, &ax, p, grid.dx);
        ham.apply(&cur, &mut hpsi);
        for j in 0..nx {
            rhs[j] = cur[j] - w * hpsi[j];
        }
        let lower: Vec<Complex64> = ham.lower.iter().map(|z| w * z).collect();
        let upper: Vec<Complex64> = ham.upper.iter().map(|z| w * z).collect();
        let diag: Vec<Complex64> = ham.diag.iter().map(|z| 1.0 + w * z).collect();
        cur = solve_cyclic_tridiagonal(&lower, &diag, &upper, &rhs)
            .map_err(|detail| LabError::LinearSolve { step: k, detail })?;
        if cur.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(LabError::Divergence { step: k });
        }
        if k % opts.substeps == 0 {
            psi.slice_mut(k / opts.substeps).copy_from_slice(&cur);
        }
    }
    Ok(SchrodingerSolution {
        psi,
        potentials: a.clone(),
        params: *p,
        substeps: opts.substeps,
        warnings,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundState {
    /// Real, positive, normalised so that sum |psi|^2 dx = 1.
    pub psi: Vec<Complex64>,
    pub energy: f64,
    pub iterations: usize,
}

/// Lowest eigenstate of the periodic lattice Hamiltonian with a static
/// scalar potential (A = 0), found by shifted inverse iteration.
pub fn ground_state(v: &[f64], p: &PhysParams, dx: f64, tol: f64, max_iter: usize) -> Result<GroundState> {
    p.validate()?;
    let n = v.len();
    let zeros = vec![0.0; n];
    let ham = Hamiltonian::new(v, &zeros, p, dx);
    let vmin = v.iter().map(|x| p.q * x).fold(f64::INFINITY, f64::min);
    // below the spectrum: H - shift is positive definite
    let shift = vmin - 1.0 - p.hbar * p.hbar / (p.m * dx * dx) * 1e-3;
    let diag: Vec<Complex64> = ham.diag.iter().map(|d| d - shift).collect();
    let mut x: Vec<Complex64> = vec![Complex64::new(1.0, 0.0); n];
    crate::packets::normalize(&mut x, dx);
    let mut hx = vec![Complex64::default(); n];
    let mut energy = f64::INFINITY;
    // size of the largest matrix entries; sets the round-off floor
    let scale = 4.0 * p.hbar * p.hbar / (2.0 * p.m * dx * dx) + v.iter().fold(0.0f64, |a, x| a.max((p.q * x).abs()));
    for it in 1..=max_iter {
        let mut y = solve_cyclic_tridiagonal(&ham.lower, &diag, &ham.upper, &x)
            .map_err(|detail| LabError::LinearSolve { step: it, detail })?;
        crate::packets::normalize(&mut y, dx);
        x = y;
        ham.apply(&x, &mut hx);
        let e: f64 = x.iter().zip(&hx).map(|(a, b)| (a.conj() * b).re).sum::<f64>() * dx;
        let resid: f64 = x
            .iter()
            .zip(&hx)
            .map(|(a, b)| (b - a * e).norm_sqr())
            .sum::<f64>()
            .sqrt()
            * dx.sqrt();
        let settled = resid <= tol * scale || (e - energy).abs() <= tol * tol * scale;
        energy = e;
        if settled {
            // fix the global phase so psi is real and positive
            let phase = x.iter().max_by(|a, b| a.norm().total_cmp(&b.norm())).unwrap().arg();
            let rot = Complex64::from_polar(1.0, -phase);
            let psi = x.iter().map(|z| Complex64::new((z * rot).re.abs(), 0.0)).collect();
            return Ok(GroundState {
                psi,
                energy,
                iterations: it,
            });
        }
    }
    Err(LabError::LinearSolve {
        step: max_iter,
        detail: "inverse iteration did not converge".into(),
    })
}
