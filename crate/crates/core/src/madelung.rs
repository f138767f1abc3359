//! Polar decomposition Psi = sqrt(rho) exp(i S / hbar) and the quantities
//! built from it: the relativistic quantum term, the quantum potential, the
//! naive four-velocity w_mu and the modified Hamilton-Jacobi residual.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::calculus::{d2dx2, dalembertian, ddt, ddx};
use crate::error::{LabError, Result};
use crate::field::{ComplexField, FourVectorField, ScalarField};
use crate::params::PhysParams;
use crate::potentials::Potentials;

const TAU: f64 = 2.0 * PI;

/// Density below which a lattice point counts as a node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NodeThreshold {
    Absolute(f64),
    /// Fraction of the global maximum of rho.
    RelativeToMax(f64),
}

impl Default for NodeThreshold {
    fn default() -> Self {
        NodeThreshold::RelativeToMax(1e-8)
    }
}

impl NodeThreshold {
    pub fn resolve(self, max_rho: f64) -> f64 {
        match self {
            NodeThreshold::Absolute(e) => e,
            NodeThreshold::RelativeToMax(f) => f * max_rho,
        }
    }
}

/// A point where spatial unwrapping resumed after a masked gap, with the
/// whole number of 2*pi cycles applied to continue from the last unmasked
/// neighbour. The true offset across a node is undetermined.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Reanchor {
    pub slice: usize,
    pub index: usize,
    pub cycles: i64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MadelungData {
    pub rho: ScalarField,
    /// Phase in action units (hbar times the unwrapped argument).
    pub s: ScalarField,
    /// True where rho is below the node threshold.
    pub node_mask: Vec<bool>,
    pub eps_rho: f64,
    pub reanchors: Vec<Reanchor>,
    pub hbar: f64,
}

impl MadelungData {
    pub fn grid(&self) -> &crate::grid::SpacetimeGrid {
        self.rho.grid()
    }

    pub fn sqrt_rho(&self) -> ScalarField {
        self.rho.map(f64::sqrt)
    }

    pub fn valid_mask(&self) -> Vec<bool> {
        self.node_mask.iter().map(|&n| !n).collect()
    }

    /// Rebuild sqrt(rho) exp(i S / hbar).
    pub fn reconstruct(&self) -> ComplexField {
        let hbar = self.hbar;
        self.rho
            .zip_with(&self.s, |r, s| Complex64::from_polar(r.sqrt(), s / hbar))
            .expect("rho and S share one grid")
    }

    /// Same decomposition with a replaced density and phase (for
    /// constructing test inputs and low-speed transforms).
    pub fn with_fields(&self, rho: ScalarField, s: ScalarField) -> Self {
        Self { rho, s, ..self.clone() }
    }
}

#[inline]
fn cycles_to(reference: f64, value: f64) -> i64 {
    ((reference - value) / TAU).round() as i64
}

/// Split a wave function into density and unwrapped phase.
///
/// The argument is unwrapped along x within every slice, then aligned in t:
/// every run of unmasked points on a slice is shifted by the whole number of
/// cycles that keeps it within pi of the previous slice on average.
pub fn decompose(psi: &ComplexField, hbar: f64, threshold: NodeThreshold) -> Result<MadelungData> {
    let g = *psi.grid();
    let rho = psi.norm_sqr();
    let max_rho = rho.max_abs();
    let eps = threshold.resolve(max_rho);
    if eps.is_nan() || eps <= 0.0 {
        return Err(LabError::InvalidParameter {
            name: "eps_rho",
            reason: format!("node threshold must be > 0, got {eps}"),
        });
    }
    let node_mask: Vec<bool> = rho.values().iter().map(|&r| r < eps).collect();

    let mut theta = psi.map(|z| z.arg());
    let mut reanchors = Vec::new();

    for n in 0..g.nt {
        let row = g.index(n, 0);
        let first = (0..g.nx)
            .find(|&i| !node_mask[row + i])
            .ok_or(LabError::AllNodes { slice: n })?;
        let slice = theta.slice_mut(n);
        let mut last_valid = first;
        // points before the first valid one follow it backwards
        for i in (0..first).rev() {
            let k = cycles_to(slice[i + 1], slice[i]);
            slice[i] += TAU * k as f64;
        }
        for i in first + 1..g.nx {
            let reference = slice[i - 1];
            let k = cycles_to(reference, slice[i]);
            slice[i] += TAU * k as f64;
            if !node_mask[row + i] {
                if last_valid + 1 != i {
                    reanchors.push(Reanchor {
                        slice: n,
                        index: i,
                        cycles: k,
                    });
                }
                last_valid = i;
            }
        }
    }

    // Each run of unmasked points moves by one whole number of cycles, the
    // one closest to the density-weighted phase change since the previous
    // slice. Unwrapping every column on its own would carry cycles picked
    // up in the noisy tails into the packet once it arrives there.
    let rv = rho.values();
    for n in 1..g.nt {
        let (row, prev_row) = (g.index(n, 0), g.index(n - 1, 0));
        let mut shift = vec![0i64; g.nx];
        let mut i = 0;
        let mut first_run = true;
        while i < g.nx {
            if node_mask[row + i] {
                i += 1;
                continue;
            }
            let start = i;
            while i < g.nx && !node_mask[row + i] {
                i += 1;
            }
            let (mut num, mut den) = (0.0, 0.0);
            let mut peak = start;
            for j in start..i {
                if rv[row + j] > rv[row + peak] {
                    peak = j;
                }
                if !node_mask[prev_row + j] {
                    let w = rv[row + j].min(rv[prev_row + j]);
                    num += w * (theta.at(n - 1, j) - theta.at(n, j));
                    den += w;
                }
            }
            let k = if den > 0.0 {
                (num / den / TAU).round() as i64
            } else {
                cycles_to(theta.at(n - 1, peak), theta.at(n, peak))
            };
            // masked points before the first run follow it; later ones
            // follow the run to their left
            let from = if first_run { 0 } else { start };
            shift[from..].fill(k);
            first_run = false;
        }
        for (j, k) in shift.into_iter().enumerate() {
            if k != 0 {
                let v = theta.at(n, j);
                theta.set(n, j, v + TAU * k as f64);
            }
        }
    }

    Ok(MadelungData {
        rho,
        s: theta.scale(hbar),
        node_mask,
        eps_rho: eps,
        reanchors,
        hbar,
    })
}

/// Decompose after removing a known carrier exp(-i omega t). The returned
/// phase has the carrier added back, S = S_slow - hbar omega t, so it is the
/// phase of `psi` itself. Use when the rest-energy rotation between stored
/// slices exceeds pi and plain time unwrapping would alias.
pub fn decompose_with_carrier(
    psi: &ComplexField,
    hbar: f64,
    threshold: NodeThreshold,
    omega: f64,
) -> Result<MadelungData> {
    let slow = strip_carrier(psi, omega);
    let mut md = decompose(&slow, hbar, threshold)?;
    let g = *psi.grid();
    for n in 0..g.nt {
        let shift = hbar * omega * g.t(n);
        for s in md.s.slice_mut(n) {
            *s -= shift;
        }
    }
    Ok(md)
}

/// psi * exp(+i omega t).
pub fn strip_carrier(psi: &ComplexField, omega: f64) -> ComplexField {
    let g = *psi.grid();
    let mut out = psi.clone();
    for n in 0..g.nt {
        let phase = Complex64::from_polar(1.0, omega * g.t(n));
        for z in out.slice_mut(n) {
            *z *= phase;
        }
    }
    out
}

fn masked(values: ScalarField, mask: &[bool]) -> ScalarField {
    let mut out = values;
    for (v, &node) in out.values_mut().iter_mut().zip(mask) {
        if node {
            *v = 0.0;
        }
    }
    out
}

/// hbar^2 box(sqrt rho) / sqrt rho on unmasked points (zero on nodes).
pub fn quantum_term_rel(md: &MadelungData, p: &PhysParams) -> Result<ScalarField> {
    let amp = md.sqrt_rho();
    let boxed = dalembertian(&amp, p)?;
    let hb2 = p.hbar * p.hbar;
    let q = boxed.zip_with(&amp, |b, a| if a > 0.0 { hb2 * b / a } else { 0.0 })?;
    Ok(masked(q, &md.node_mask))
}

/// Quantum potential Q = -(hbar^2 / 2m) d_x^2 sqrt(rho) / sqrt(rho), slice by
/// slice, zero where `node_mask` is set.
pub fn quantum_potential(rho: &ScalarField, node_mask: &[bool], p: &PhysParams) -> Result<ScalarField> {
    let amp = rho.map(|r| r.max(0.0).sqrt());
    let lap = d2dx2(&amp)?;
    let c = -p.hbar * p.hbar / (2.0 * p.m);
    let q = lap.zip_with(&amp, |l, a| if a > 0.0 { c * l / a } else { 0.0 })?;
    Ok(masked(q, node_mask))
}

/// Kinetic four-momentum built from the phase alone,
/// P_mu = -d_mu S - (q/c) A_mu (covariant).
pub fn phase_momentum(md: &MadelungData, a: &Potentials, p: &PhysParams) -> Result<FourVectorField> {
    let st = ddt(&md.s)?;
    let sx = ddx(&md.s)?;
    let (c, q) = (p.c, p.q);
    let p0 = st.zip_with(&a.v, |s, v| -s / c - q / c * v)?;
    // A_1 = -A_x
    let p1 = sx.zip_with(&a.ax, |s, ax| -s + q / c * ax)?;
    FourVectorField::covariant(p0, p1)
}

/// w_mu = -d_mu S / m - (q / m c) A_mu (covariant).
pub fn w_field(md: &MadelungData, a: &Potentials, p: &PhysParams) -> Result<FourVectorField> {
    let pm = phase_momentum(md, a, p)?;
    let inv_m = 1.0 / p.m;
    FourVectorField::covariant(pm.time.scale(inv_m), pm.space.scale(inv_m))
}

/// (-d^mu S - (q/c)A^mu)(-d_mu S - (q/c)A_mu) - m^2 c^2 - hbar^2 box(sqrt rho)/sqrt rho.
/// Zero on masked points.
pub fn hj_quantum_residual(md: &MadelungData, a: &Potentials, p: &PhysParams) -> Result<ScalarField> {
    let pm = phase_momentum(md, a, p)?;
    let qt = quantum_term_rel(md, p)?;
    let m2c2 = (p.m * p.c).powi(2);
    let r = pm.square().zip_with(&qt, |sq, q| sq - m2c2 - q)?;
    Ok(masked(r, &md.node_mask))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::SpacetimeGrid;
    use crate::packets::{self, Mode};

    fn grid(nx: usize, nt: usize) -> SpacetimeGrid {
        SpacetimeGrid::periodic(nx, 4.0 * PI, -2.0 * PI, nt, 0.02).unwrap()
    }

    #[test]
    fn plane_wave_phase_is_linear() {
        let p = PhysParams::new(0.8, 1.0, 1.0, 0.0).unwrap();
        let (k, w) = (1.5, 2.0);
        let g = grid(128, 30);
        let psi = ComplexField::from_fn(g, |t, x| Complex64::from_polar(1.0, k * x - w * t));
        let md = decompose(&psi, p.hbar, NodeThreshold::default()).unwrap();
        let offset = md.s.at(0, 0) - p.hbar * (k * g.x(0));
        let cycles = offset / (TAU * p.hbar);
        assert!((cycles - cycles.round()).abs() < 1e-12);
        for n in 0..g.nt {
            for i in 0..g.nx {
                let exact = p.hbar * (k * g.x(i) - w * g.t(n)) + offset;
                assert!((md.s.at(n, i) - exact).abs() < 1e-11);
                assert!((md.rho.at(n, i) - 1.0).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn real_positive_has_zero_phase() {
        let g = grid(64, 5);
        let psi = ComplexField::from_fn(g, |t, x| Complex64::new(2.0 + (x + t).sin(), 0.0));
        let md = decompose(&psi, 1.0, NodeThreshold::default()).unwrap();
        assert_eq!(md.s.max_abs(), 0.0);
    }

    #[test]
    fn gaussian_round_trip() {
        let g = grid(256, 3);
        let xs = g.xs();
        let slice = packets::gaussian(&xs, 0.3, 0.9, 2.5);
        let mut values = Vec::new();
        for _ in 0..g.nt {
            values.extend_from_slice(&slice);
        }
        let psi = ComplexField::from_values(g, values).unwrap();
        let md = decompose(&psi, 1.0, NodeThreshold::default()).unwrap();
        let back = md.reconstruct();
        for k in 0..g.len() {
            if !md.node_mask[k] {
                assert!((back.values()[k] - psi.values()[k]).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn all_node_slice_is_an_error() {
        let g = grid(16, 3);
        let mut psi = ComplexField::constant(g, Complex64::new(1.0, 0.0));
        for z in psi.slice_mut(1) {
            *z = Complex64::default();
        }
        assert_eq!(
            decompose(&psi, 1.0, NodeThreshold::default()).unwrap_err(),
            LabError::AllNodes { slice: 1 }
        );
    }

    #[test]
    fn masked_gap_is_reanchored() {
        let g = grid(64, 2);
        let psi = ComplexField::from_fn(g, |_, x| {
            let amp = if x.abs() < 0.5 { 0.0 } else { 1.0 };
            Complex64::from_polar(amp, 3.0 * x)
        });
        let md = decompose(&psi, 1.0, NodeThreshold::default()).unwrap();
        assert_eq!(md.reanchors.len(), 2);
        assert!(md.reanchors.iter().all(|r| r.index > g.nx / 2 - 4));
    }

    #[test]
    fn unwrapped_neighbours_differ_by_less_than_pi() {
        let g = grid(128, 60);
        let modes = [
            Mode { amplitude: 1.0, k: 2.0 },
            Mode {
                amplitude: 0.6,
                k: -1.0,
            },
        ];
        let psi = ComplexField::from_fn(g, |t, x| {
            modes
                .iter()
                .map(|m| Complex64::from_polar(m.amplitude, m.k * x - (1.0 + m.k * m.k).sqrt() * t))
                .sum()
        });
        let md = decompose(&psi, 1.0, NodeThreshold::default()).unwrap();
        for n in 0..g.nt {
            for i in 1..g.nx {
                assert!((md.s.at(n, i) - md.s.at(n, i - 1)).abs() < PI);
            }
            if n > 0 {
                for i in 0..g.nx {
                    assert!((md.s.at(n, i) - md.s.at(n - 1, i)).abs() < PI);
                }
            }
        }
    }

    #[test]
    fn packet_entering_noisy_tail_stays_continuous() {
        // a moving packet over a floor of noise whose phase jumps at random
        // between slices; columns pass through the noise before the packet
        let g = grid(200, 120);
        let psi = ComplexField::from_fn(g, |t, x| {
            let noise = 1e-6 * Complex64::from_polar(1.0, 1e3 * (t * 97.0 + x * 13.0).sin());
            Complex64::from_polar((-(x + 2.0 - 2.0 * t).powi(2)).exp(), 2.0 * x - 3.0 * t) + noise
        });
        let md = decompose(&psi, 1.0, NodeThreshold::RelativeToMax(1e-8)).unwrap();
        for n in 0..g.nt {
            for i in 1..g.nx {
                let (a, b) = (g.index(n, i - 1), g.index(n, i));
                if !md.node_mask[a] && !md.node_mask[b] {
                    let jump = (md.s.values()[b] - md.s.values()[a]).abs();
                    assert!(jump < PI, "slice {n}, x index {i}: jump {jump}");
                }
            }
        }
    }

    #[test]
    fn constant_density_has_no_quantum_terms() {
        let p = PhysParams::default();
        let g = grid(64, 10);
        let psi = ComplexField::from_fn(g, |t, x| Complex64::from_polar(1.7, x - t));
        let md = decompose(&psi, 1.0, NodeThreshold::default()).unwrap();
        assert!(quantum_term_rel(&md, &p).unwrap().max_abs() < 1e-10);
        assert!(quantum_potential(&md.rho, &md.node_mask, &p).unwrap().max_abs() < 1e-10);
    }

    #[test]
    fn gaussian_quantum_terms_match_closed_form() {
        // static sqrt(rho) = exp(-x^2 / 4 s^2)
        let p = PhysParams::new(1.2, 1.0, 0.9, 0.0).unwrap();
        let s = 0.8;
        let g = SpacetimeGrid::new(801, 5, 0.01, 0.01, -4.0, 0.0).unwrap();
        let psi = ComplexField::from_fn(g, |_, x| Complex64::new((-x * x / (4.0 * s * s)).exp(), 0.0));
        let md = decompose(&psi, p.hbar, NodeThreshold::default()).unwrap();
        let rel = quantum_term_rel(&md, &p).unwrap();
        let qpot = quantum_potential(&md.rho, &md.node_mask, &p).unwrap();
        let hb2 = p.hbar * p.hbar;
        for i in (100..700).step_by(20) {
            let x = g.x(i);
            let curvature = x * x / (4.0 * s.powi(4)) - 1.0 / (2.0 * s * s);
            assert!((rel.at(2, i) + hb2 * curvature).abs() < 1e-4, "x = {x}");
            let q_exact = hb2 / (2.0 * p.m) * (1.0 / (2.0 * s * s) - x * x / (4.0 * s.powi(4)));
            assert!((qpot.at(2, i) - q_exact).abs() < 1e-4, "x = {x}");
        }
    }

    #[test]
    fn quantum_potential_is_scale_invariant() {
        let p = PhysParams::default();
        let g = grid(128, 3);
        let rho = ScalarField::from_fn(g, |_, x| 1.0 + 0.5 * x.cos());
        let mask = vec![false; g.len()];
        let q1 = quantum_potential(&rho, &mask, &p).unwrap();
        let q2 = quantum_potential(&rho.scale(7.3), &mask, &p).unwrap();
        assert!(q1.sub(&q2).unwrap().max_abs() < 1e-12);
    }

    #[test]
    fn plane_wave_w_is_on_shell() {
        let p = PhysParams::default();
        let k = 1.0;
        let w = p.kg_frequency(k);
        let g = grid(256, 40);
        let psi = ComplexField::from_fn(g, |t, x| Complex64::from_polar(1.0, k * x - w * t));
        let md = decompose(&psi, 1.0, NodeThreshold::default()).unwrap();
        let wf = w_field(&md, &Potentials::zero(g), &p).unwrap();
        // S is linear, so the stencils are exact
        for v in wf.square().values() {
            assert!((v - 1.0).abs() < 1e-10);
        }
        let r = hj_quantum_residual(&md, &Potentials::zero(g), &p).unwrap();
        assert!(r.max_abs() < 1e-9);
    }

    #[test]
    fn zero_phase_gives_zero_w() {
        let p = PhysParams::default();
        let g = grid(32, 4);
        let psi = ComplexField::from_fn(g, |_, x| Complex64::new(1.0 + 0.2 * x.sin(), 0.0));
        let md = decompose(&psi, 1.0, NodeThreshold::default()).unwrap();
        let w = w_field(&md, &Potentials::zero(g), &p).unwrap();
        assert_eq!(w.time.max_abs(), 0.0);
        assert_eq!(w.space.max_abs(), 0.0);
    }

    #[test]
    fn standing_wave_has_zero_velocity_at_antinode() {
        let p = PhysParams::default();
        let g = grid(128, 10);
        let i0 = g.nx / 2; // x = 0
        let k = 1.0;
        let w = p.kg_frequency(k);
        let psi = ComplexField::from_fn(g, |t, x| {
            Complex64::from_polar(1.0, k * x - w * t) + Complex64::from_polar(1.0, -k * x - w * t)
        });
        let md = decompose(&psi, 1.0, NodeThreshold::default()).unwrap();
        let wf = w_field(&md, &Potentials::zero(g), &p).unwrap();
        for n in 0..g.nt {
            assert!(wf.space.at(n, i0).abs() < 1e-12);
        }
    }

    #[test]
    fn constant_density_on_shell_phase() {
        // rho constant, S = -E t + P x solving the classical equation with a
        // constant potential: the quantum term is absent
        let p = PhysParams::new(1.0, 1.0, 1.0, 0.5).unwrap();
        let (v0, a0) = (0.3, 0.2);
        let pk = 0.7; // kinetic momentum
        let kinetic = (pk * pk + 1.0f64).sqrt();
        let energy = kinetic + p.q * v0;
        let canonical = pk + p.q / p.c * a0;
        let g = grid(64, 20);
        let psi = ComplexField::from_fn(g, |t, x| Complex64::from_polar(1.3, canonical * x - energy * t));
        let md = decompose(&psi, 1.0, NodeThreshold::default()).unwrap();
        let a = Potentials::from_fns(g, move |_, _| v0, move |_, _| a0);
        assert!(hj_quantum_residual(&md, &a, &p).unwrap().max_abs() < 1e-10);
    }

    #[test]
    fn carrier_is_restored_after_unwrapping() {
        // rotation of 40 rad per slice defeats plain time unwrapping
        let g = grid(64, 12);
        let omega = 2000.0;
        let k = 0.5;
        let psi = ComplexField::from_fn(g, |t, x| Complex64::from_polar(1.0, k * x - (omega + 0.3) * t));
        let md = decompose_with_carrier(&psi, 1.0, NodeThreshold::default(), omega).unwrap();
        let offset = md.s.at(0, 0) - k * g.x(0);
        for n in 0..g.nt {
            for i in 0..g.nx {
                let exact = k * g.x(i) - (omega + 0.3) * g.t(n) + offset;
                assert!((md.s.at(n, i) - exact).abs() < 1e-9);
            }
        }
    }
}
