#![allow(dead_code)]

use std::f64::consts::PI;

use kglab_core::kg::{evolve_kg, KGInitialData, KGSolution};
use kglab_core::madelung::{decompose, MadelungData, NodeThreshold};
use kglab_core::packets::Mode;
use kglab_core::{PhysParams, Potentials, ScalarField, SpacetimeGrid};

pub const MODES: [Mode; 2] = [
    Mode { amplitude: 1.0, k: 1.0 },
    Mode {
        amplitude: 0.4,
        k: -0.5,
    },
];

/// Two free modes on a periodic line of length 4 pi, dt = dx / 2, run to
/// t = pi / 2 so that every resolution ends on the same slice.
pub fn superposition_grid(nx: usize) -> SpacetimeGrid {
    let length = 4.0 * PI;
    let dx = length / nx as f64;
    let dt = 0.5 * dx;
    let nt = nx / 4 + 1;
    SpacetimeGrid::periodic(nx, length, -2.0 * PI, nt, dt).unwrap()
}

pub fn superposition(nx: usize) -> (KGSolution, MadelungData, Potentials, PhysParams) {
    let p = PhysParams::default();
    let g = superposition_grid(nx);
    let a = Potentials::zero(g);
    let init = KGInitialData::free_modes(&g.xs(), &MODES, &p).unwrap();
    let sol = evolve_kg(&init, &a, &p, &g).unwrap();
    let md = decompose(&sol.psi, p.hbar, NodeThreshold::default()).unwrap();
    (sol, md, a, p)
}

/// Max |f| over a fixed physical window away from every lattice edge, so
/// that the same region is measured at each resolution.
pub fn window_max(f: &ScalarField) -> f64 {
    let g = *f.grid();
    let (x_lo, x_hi) = (g.x_min + 1.0, g.x_min + g.length() - 1.0);
    let (t_lo, t_hi) = (g.t0 + 0.25, g.t_end() - 0.25);
    kglab_core::norms::max_abs_in(f, |t, x| t >= t_lo && t <= t_hi && x >= x_lo && x <= x_hi)
}

pub fn orders(errors: &[f64]) -> Vec<f64> {
    kglab_core::norms::observed_orders(errors, 2.0)
}
