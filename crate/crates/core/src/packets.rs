//! Closed-form wave functions used as initial data and as oracles.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::grid::SpacetimeGrid;

/// One plane-wave component a * exp(i k x).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mode {
    pub amplitude: f64,
    pub k: f64,
}

pub fn plane_wave(xs: &[f64], k: f64) -> Vec<Complex64> {
    xs.iter().map(|&x| Complex64::from_polar(1.0, k * x)).collect()
}

pub fn superposition(xs: &[f64], modes: &[Mode]) -> Vec<Complex64> {
    xs.iter()
        .map(|&x| modes.iter().map(|m| Complex64::from_polar(m.amplitude, m.k * x)).sum())
        .collect()
}

/// Normalised Gaussian with |psi|^2 of standard deviation `sigma`,
/// centred at `x0`, carrying momentum hbar*k.
pub fn gaussian(xs: &[f64], x0: f64, sigma: f64, k: f64) -> Vec<Complex64> {
    let norm = (2.0 * PI * sigma * sigma).powf(-0.25);
    xs.iter()
        .map(|&x| {
            let d = x - x0;
            Complex64::from_polar(norm * (-d * d / (4.0 * sigma * sigma)).exp(), k * x)
        })
        .collect()
}

/// Width (standard deviation of |psi|^2) of a free Gaussian at time `t`.
pub fn free_gaussian_width(sigma0: f64, t: f64, hbar: f64, m: f64) -> f64 {
    let tau = hbar * t / (2.0 * m * sigma0 * sigma0);
    sigma0 * (1.0 + tau * tau).sqrt()
}

/// Exact free Schrodinger evolution of [`gaussian`] (k = 0 centred at x0).
pub fn free_gaussian_at(x: f64, t: f64, x0: f64, sigma0: f64, hbar: f64, m: f64) -> Complex64 {
    let a = Complex64::new(sigma0 * sigma0, hbar * t / (2.0 * m));
    let pref = (2.0 * PI).powf(-0.25) * sigma0.sqrt() / a.sqrt();
    let d = x - x0;
    pref * (-(d * d) / (a * 4.0)).exp()
}

/// Discrete L2 norm squared of a slice, sum |psi|^2 dx.
pub fn norm_sqr(psi: &[Complex64], dx: f64) -> f64 {
    psi.iter().map(|z| z.norm_sqr()).sum::<f64>() * dx
}

pub fn normalize(psi: &mut [Complex64], dx: f64) {
    let s = norm_sqr(psi, dx).sqrt();
    if s > 0.0 {
        for z in psi.iter_mut() {
            *z /= s;
        }
    }
}

/// Spatial coordinates of a grid's points.
pub fn coordinates(grid: &SpacetimeGrid) -> Vec<f64> {
    grid.xs()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gaussian_is_normalised() {
        let g = SpacetimeGrid::periodic(512, 40.0, -20.0, 2, 0.1).unwrap();
        let psi = gaussian(&g.xs(), 0.5, 1.3, 2.0);
        assert!((norm_sqr(&psi, g.dx) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn free_gaussian_matches_initial_shape() {
        let xs: Vec<f64> = (0..50).map(|i| -5.0 + 0.2 * i as f64).collect();
        let a = gaussian(&xs, 0.0, 0.8, 0.0);
        for (x, z) in xs.iter().zip(a) {
            let b = free_gaussian_at(*x, 0.0, 0.0, 0.8, 1.0, 1.0);
            assert!((z - b).norm() < 1e-14);
        }
    }

    #[test]
    fn free_gaussian_width_law() {
        // |psi(t)|^2 variance from the closed form equals the width formula
        let (s0, t) = (0.7, 1.3);
        let dx = 0.005;
        let xs: Vec<f64> = (0..8000).map(|i| -20.0 + dx * i as f64).collect();
        let rho: Vec<f64> = xs
            .iter()
            .map(|&x| free_gaussian_at(x, t, 0.0, s0, 1.0, 1.0).norm_sqr())
            .collect();
        let mass: f64 = rho.iter().sum::<f64>() * dx;
        let var: f64 = xs.iter().zip(&rho).map(|(x, r)| x * x * r).sum::<f64>() * dx / mass;
        assert!((mass - 1.0).abs() < 1e-10);
        assert!((var.sqrt() - free_gaussian_width(s0, t, 1.0, 1.0)).abs() < 1e-9);
    }
}
