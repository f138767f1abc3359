//! Electromagnetic four-potential A^mu = (V, A_x) sampled on the lattice.

use crate::calculus::{ddt, ddx};
use crate::error::Result;
use crate::field::{check_same_grid, AntisymmetricTensor, FourVectorField, ScalarField};
use crate::grid::SpacetimeGrid;
use crate::params::PhysParams;

#[derive(Debug, Clone, PartialEq)]
pub struct Potentials {
    /// Scalar potential V (energy per charge).
    pub v: ScalarField,
    /// Vector potential component A_x (contravariant A^1).
    pub ax: ScalarField,
}

impl Potentials {
    pub fn new(v: ScalarField, ax: ScalarField) -> Result<Self> {
        check_same_grid(v.grid(), ax.grid())?;
        Ok(Self { v, ax })
    }

    pub fn zero(grid: SpacetimeGrid) -> Self {
        Self {
            v: ScalarField::zeros(grid),
            ax: ScalarField::zeros(grid),
        }
    }

    pub fn from_fns(grid: SpacetimeGrid, v: impl Fn(f64, f64) -> f64, ax: impl Fn(f64, f64) -> f64) -> Self {
        Self {
            v: ScalarField::from_fn(grid, v),
            ax: ScalarField::from_fn(grid, ax),
        }
    }

    /// Uniform electric field `e0` in temporal gauge: V = 0, A_x = -c e0 t.
    /// Compatible with periodic boundaries.
    pub fn uniform_field(grid: SpacetimeGrid, e0: f64, p: &PhysParams) -> Self {
        let c = p.c;
        Self::from_fns(grid, |_, _| 0.0, move |t, _| -c * e0 * t)
    }

    /// Uniform electric field `e0` in scalar gauge: V = -e0 x, A_x = 0.
    /// Not periodic; intended for pointwise checks.
    pub fn linear_scalar(grid: SpacetimeGrid, e0: f64) -> Self {
        Self::from_fns(grid, move |_, x| -e0 * x, |_, _| 0.0)
    }

    /// Static scalar potential given by one value per spatial point.
    pub fn static_scalar(grid: SpacetimeGrid, table: &[f64]) -> Result<Self> {
        if table.len() != grid.nx {
            return Err(crate::error::LabError::ShapeMismatch(format!(
                "potential table has {} entries for nx = {}",
                table.len(),
                grid.nx
            )));
        }
        let mut values = Vec::with_capacity(grid.len());
        for _ in 0..grid.nt {
            values.extend_from_slice(table);
        }
        Ok(Self {
            v: ScalarField::from_values(grid, values)?,
            ax: ScalarField::zeros(grid),
        })
    }

    pub fn grid(&self) -> &SpacetimeGrid {
        self.v.grid()
    }

    pub fn is_zero(&self) -> bool {
        self.v.max_abs() == 0.0 && self.ax.max_abs() == 0.0
    }

    /// A_mu = (V, -A_x).
    pub fn covariant(&self) -> FourVectorField {
        FourVectorField::covariant(self.v.clone(), self.ax.map(|a| -a)).expect("potentials share one grid")
    }

    /// A^mu = (V, A_x).
    pub fn contravariant(&self) -> FourVectorField {
        FourVectorField::contravariant(self.v.clone(), self.ax.clone()).expect("potentials share one grid")
    }

    /// Potentials at fractional slice position `s` (linear in time between
    /// stored slices, clamped to the grid). Writes into `v` and `ax`.
    pub fn interpolate_slice(&self, s: f64, v: &mut [f64], ax: &mut [f64]) {
        let nt = self.grid().nt;
        let s = s.clamp(0.0, (nt - 1) as f64);
        let n0 = (s.floor() as usize).min(nt - 2);
        let w = s - n0 as f64;
        let (v0, v1) = (self.v.slice(n0), self.v.slice(n0 + 1));
        let (a0, a1) = (self.ax.slice(n0), self.ax.slice(n0 + 1));
        for i in 0..v.len() {
            v[i] = v0[i] + w * (v1[i] - v0[i]);
            ax[i] = a0[i] + w * (a1[i] - a0[i]);
        }
    }

    /// Electric field E = -dV/dx - (1/c) dA_x/dt (equal to F_01).
    pub fn electric_field(&self, p: &PhysParams) -> Result<ScalarField> {
        Ok(faraday(self, p)?.f01)
    }

    /// Magnetic field in 1-D. There is no curl of a single component along
    /// the only axis, so this is identically zero.
    pub fn magnetic_field(&self) -> ScalarField {
        ScalarField::zeros(*self.grid())
    }
}

/// Faraday tensor F_mu,nu = d_mu A_nu - d_nu A_mu, stored as F_01.
pub fn faraday(a: &Potentials, p: &PhysParams) -> Result<AntisymmetricTensor> {
    // F_01 = (1/c) d_t A_1 - d_x A_0 with A_1 = -A_x, A_0 = V
    let dt_ax = ddt(&a.ax)?;
    let dx_v = ddx(&a.v)?;
    let inv_c = 1.0 / p.c;
    let f01 = dt_ax.zip_with(&dx_v, |at, vx| -at * inv_c - vx)?;
    Ok(AntisymmetricTensor { f01 })
}

/// Lorentz-gauge residual d^mu A_mu = (1/c) dV/dt + dA_x/dx.
pub fn lorentz_residual(a: &Potentials, p: &PhysParams) -> Result<ScalarField> {
    crate::calculus::four_divergence(&a.covariant(), p)
}
