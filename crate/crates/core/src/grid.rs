use crate::error::{LabError, Result};

/// Uniform 1+1-D lattice: `nt` time slices of `nx` points each.
///
/// Spatial points sit at `x_min + i*dx` for `i in 0..nx`. When a solver
/// treats the domain as periodic the period is `nx*dx`, so the point
/// `x_min + nx*dx` is identified with `x_min`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpacetimeGrid {
    pub nx: usize,
    pub nt: usize,
    pub dx: f64,
    pub dt: f64,
    pub x_min: f64,
    pub t0: f64,
}

pub const MIN_NX: usize = 8;
pub const MIN_NT: usize = 2;

impl SpacetimeGrid {
    pub fn new(nx: usize, nt: usize, dx: f64, dt: f64, x_min: f64, t0: f64) -> Result<Self> {
        let g = Self {
            nx,
            nt,
            dx,
            dt,
            x_min,
            t0,
        };
        g.validate()?;
        Ok(g)
    }

    /// Periodic grid covering `[x_min, x_min + length)` with `nx` points.
    pub fn periodic(nx: usize, length: f64, x_min: f64, nt: usize, dt: f64) -> Result<Self> {
        Self::new(nx, nt, length / nx as f64, dt, x_min, 0.0)
    }

    pub fn validate(&self) -> Result<()> {
        if self.nx < MIN_NX {
            return Err(LabError::DegenerateGrid {
                axis: "x",
                len: self.nx,
                need: MIN_NX,
            });
        }
        if self.nt < MIN_NT {
            return Err(LabError::DegenerateGrid {
                axis: "t",
                len: self.nt,
                need: MIN_NT,
            });
        }
        for (name, value) in [("dx", self.dx), ("dt", self.dt)] {
            if !(value.is_finite() && value > 0.0) {
                return Err(LabError::InvalidParameter {
                    name,
                    reason: format!("must be finite and > 0, got {value}"),
                });
            }
        }
        for (name, value) in [("x_min", self.x_min), ("t0", self.t0)] {
            if !value.is_finite() {
                return Err(LabError::InvalidParameter {
                    name,
                    reason: format!("must be finite, got {value}"),
                });
            }
        }
        Ok(())
    }

    #[inline]
    pub fn x(&self, i: usize) -> f64 {
        self.x_min + i as f64 * self.dx
    }

    #[inline]
    pub fn t(&self, n: usize) -> f64 {
        self.t0 + n as f64 * self.dt
    }

    pub fn xs(&self) -> Vec<f64> {
        (0..self.nx).map(|i| self.x(i)).collect()
    }

    pub fn ts(&self) -> Vec<f64> {
        (0..self.nt).map(|n| self.t(n)).collect()
    }

    pub fn length(&self) -> f64 {
        self.nx as f64 * self.dx
    }

    pub fn t_end(&self) -> f64 {
        self.t(self.nt - 1)
    }

    pub fn len(&self) -> usize {
        self.nx * self.nt
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, n: usize, i: usize) -> usize {
        n * self.nx + i
    }

    /// Courant number c*dt/dx.
    pub fn cfl(&self, c: f64) -> f64 {
        c * self.dt / self.dx
    }

    /// The grid refined by `factor` in both directions over the same
    /// spacetime window: coarse point (n, i) coincides with fine point
    /// (factor*n, factor*i).
    pub fn refined(&self, factor: usize) -> Self {
        Self {
            nx: self.nx * factor,
            nt: (self.nt - 1) * factor + 1,
            dx: self.dx / factor as f64,
            dt: self.dt / factor as f64,
            x_min: self.x_min,
            t0: self.t0,
        }
    }

    /// Wrap `x` into the periodic window `[x_min, x_min + length)`.
    pub fn wrap_x(&self, x: f64) -> f64 {
        let l = self.length();
        let mut y = (x - self.x_min) % l;
        if y < 0.0 {
            y += l;
        }
        self.x_min + y
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.nx == other.nx
            && self.nt == other.nt
            && self.dx == other.dx
            && self.dt == other.dt
            && self.x_min == other.x_min
            && self.t0 == other.t0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_small_grids() {
        assert!(matches!(
            SpacetimeGrid::new(4, 10, 0.1, 0.1, 0.0, 0.0),
            Err(LabError::DegenerateGrid { axis: "x", .. })
        ));
        assert!(matches!(
            SpacetimeGrid::new(16, 1, 0.1, 0.1, 0.0, 0.0),
            Err(LabError::DegenerateGrid { axis: "t", .. })
        ));
        assert!(SpacetimeGrid::new(16, 2, 0.0, 0.1, 0.0, 0.0).is_err());
    }

    #[test]
    fn refinement_nests_points() {
        let g = SpacetimeGrid::new(16, 5, 0.25, 0.1, -2.0, 0.5).unwrap();
        let f = g.refined(2);
        assert_eq!(f.nx, 32);
        assert_eq!(f.nt, 9);
        assert!((f.x(6) - g.x(3)).abs() < 1e-14);
        assert!((f.t(8) - g.t_end()).abs() < 1e-14);
    }

    #[test]
    fn wrap_into_window() {
        let g = SpacetimeGrid::periodic(10, 2.0, -1.0, 3, 0.1).unwrap();
        assert!((g.wrap_x(1.5) - (-0.5)).abs() < 1e-14);
        assert!((g.wrap_x(-1.25) - 0.75).abs() < 1e-14);
    }
}
