//! Particle world-lines along a velocity field.
//!
//! Paths are integrated with classical RK4 on a bilinear (t, x) interpolant
//! of the lattice velocity, or directly on an analytic field. Seeds are
//! drawn from a density by inverse-CDF sampling of its piecewise-linear
//! interpolant, so bin probabilities and samples share one model.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{LabError, Result};
use crate::field::{FourVectorField, ScalarField, Variance};
use crate::grid::SpacetimeGrid;
use crate::hidden_phase::{HiddenPhase, KineticState};
use crate::params::PhysParams;
use crate::potentials::Potentials;
use crate::schrodinger::FluidState;

/// Slack on the time axis for stage times that round past the last slice.
const TIME_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Sample {
    Value(f64),
    /// A corner of the interpolation cell lies on a node or below the
    /// density floor.
    Masked,
    Outside,
}

/// Anything that can report dx/dt at an event.
pub trait Guidance: Sync {
    fn velocity(&self, t: f64, x: f64) -> Sample;

    /// Map a position back into the fundamental domain.
    fn wrap(&self, x: f64) -> f64 {
        x
    }
}

impl<F: Fn(f64, f64) -> f64 + Sync> Guidance for F {
    fn velocity(&self, t: f64, x: f64) -> Sample {
        Sample::Value(self(t, x))
    }
}

/// Lattice velocity dx/dt with the points where it is undefined.
#[derive(Debug, Clone, PartialEq)]
pub struct GuidanceField {
    pub velocity: ScalarField,
    pub mask: Vec<bool>,
    pub periodic: bool,
}

impl GuidanceField {
    pub fn new(velocity: ScalarField, mask: Vec<bool>, periodic: bool) -> Result<Self> {
        if mask.len() != velocity.grid().len() {
            return Err(LabError::ShapeMismatch(format!(
                "mask has {} entries for {} grid points",
                mask.len(),
                velocity.grid().len()
            )));
        }
        Ok(Self {
            velocity,
            mask,
            periodic,
        })
    }

    /// dx/dt = c^2 P_x / K from the corrected four-velocity.
    pub fn relativistic(ks: &KineticState, hp: &HiddenPhase, p: &PhysParams) -> Result<Self> {
        let up = ks.v.raise();
        let c = p.c;
        let mut velocity = up
            .space
            .zip_with(&up.time, |v1, v0| if v0 != 0.0 { c * v1 / v0 } else { 0.0 })?;
        for (v, &ex) in velocity.values_mut().iter_mut().zip(&hp.excluded) {
            if ex {
                *v = 0.0;
            }
        }
        Self::new(velocity, hp.excluded.clone(), hp.periodic)
    }

    /// The fluid velocity `v` (equal to `u` when no hidden phase was applied).
    pub fn low_speed(fluid: &FluidState) -> Result<Self> {
        Self::new(fluid.v.clone(), fluid.node_mask.clone(), fluid.periodic)
    }

    pub fn grid(&self) -> &SpacetimeGrid {
        self.velocity.grid()
    }
}

impl Guidance for GuidanceField {
    fn velocity(&self, t: f64, x: f64) -> Sample {
        let g = self.grid();
        let s = (t - g.t0) / g.dt;
        let last = (g.nt - 1) as f64;
        if !(-TIME_SLACK..=last + TIME_SLACK).contains(&s) {
            return Sample::Outside;
        }
        let s = s.clamp(0.0, last);
        let n = (s.floor() as usize).min(g.nt - 2);
        let a = s - n as f64;

        let r = if self.periodic {
            (g.wrap_x(x) - g.x_min) / g.dx
        } else {
            (x - g.x_min) / g.dx
        };
        let (i0, i1, b) = if self.periodic {
            let i = (r.floor() as usize).min(g.nx - 1);
            (i, (i + 1) % g.nx, r - i as f64)
        } else {
            if !(0.0..=(g.nx - 1) as f64).contains(&r) {
                return Sample::Outside;
            }
            let i = (r.floor() as usize).min(g.nx - 2);
            (i, i + 1, r - i as f64)
        };
        let corners = [g.index(n, i0), g.index(n, i1), g.index(n + 1, i0), g.index(n + 1, i1)];
        if corners.iter().any(|&k| self.mask[k]) {
            return Sample::Masked;
        }
        let f = |k: usize| self.velocity.values()[k];
        let lo = (1.0 - b) * f(corners[0]) + b * f(corners[1]);
        let hi = (1.0 - b) * f(corners[2]) + b * f(corners[3]);
        Sample::Value((1.0 - a) * lo + a * hi)
    }

    fn wrap(&self, x: f64) -> f64 {
        if self.periodic {
            self.grid().wrap_x(x)
        } else {
            x
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TruncationReason {
    Masked,
    LeftDomain,
    NonFinite,
}

/// Where a path stopped early: `step` is the first stored sample it lacks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Truncation {
    pub step: usize,
    pub reason: TruncationReason,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryEnsemble {
    pub seeds: Vec<f64>,
    pub times: Vec<f64>,
    /// One position per stored time slice, shorter when truncated.
    pub paths: Vec<Vec<f64>>,
    /// dx/dt sampled at every stored position.
    pub velocities: Vec<Vec<f64>>,
    pub truncated: Vec<Option<Truncation>>,
}

impl TrajectoryEnsemble {
    pub fn len(&self) -> usize {
        self.seeds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.seeds.is_empty()
    }

    pub fn truncated_count(&self) -> usize {
        self.truncated.iter().filter(|t| t.is_some()).count()
    }

    /// Pairs of neighbouring seeds whose order has flipped by slice `n`, a
    /// sign that the flow map stopped being invertible. Positions are
    /// compared as stored, so paths that wrapped a periodic seam count too.
    pub fn crossings(&self, n: usize) -> usize {
        let mut order: Vec<usize> = (0..self.len()).collect();
        order.sort_by(|&a, &b| self.seeds[a].total_cmp(&self.seeds[b]));
        order
            .windows(2)
            .filter(|w| match (self.paths[w[0]].get(n), self.paths[w[1]].get(n)) {
                (Some(a), Some(b)) => a > b,
                _ => false,
            })
            .count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryOptions {
    /// RK4 steps per stored time slice.
    pub substeps: usize,
    pub periodic: bool,
}

impl Default for TrajectoryOptions {
    fn default() -> Self {
        Self {
            substeps: 1,
            periodic: true,
        }
    }
}

fn inside(grid: &SpacetimeGrid, periodic: bool, x: f64) -> bool {
    let hi = if periodic {
        grid.x_min + grid.length()
    } else {
        grid.x(grid.nx - 1)
    };
    x.is_finite() && x >= grid.x_min && (x < hi || (!periodic && x == hi))
}

fn rk4_step(field: &impl Guidance, t: f64, x: f64, h: f64) -> std::result::Result<f64, TruncationReason> {
    let eval = |t: f64, x: f64| match field.velocity(t, x) {
        Sample::Value(v) => Ok(v),
        Sample::Masked => Err(TruncationReason::Masked),
        Sample::Outside => Err(TruncationReason::LeftDomain),
    };
    let k1 = eval(t, x)?;
    let k2 = eval(t + 0.5 * h, x + 0.5 * h * k1)?;
    let k3 = eval(t + 0.5 * h, x + 0.5 * h * k2)?;
    let k4 = eval(t + h, x + h * k3)?;
    let next = x + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    if next.is_finite() {
        Ok(next)
    } else {
        Err(TruncationReason::NonFinite)
    }
}

struct Path {
    xs: Vec<f64>,
    vs: Vec<f64>,
    truncated: Option<Truncation>,
}

fn integrate_one(field: &impl Guidance, x0: f64, grid: &SpacetimeGrid, substeps: usize) -> Path {
    let mut xs = Vec::with_capacity(grid.nt);
    let mut vs = Vec::with_capacity(grid.nt);
    let h = grid.dt / substeps as f64;
    let mut x = x0;
    for n in 0..grid.nt {
        let t = grid.t(n);
        let v = match field.velocity(t, x) {
            Sample::Value(v) => v,
            Sample::Masked => return stop(xs, vs, n, TruncationReason::Masked),
            Sample::Outside => return stop(xs, vs, n, TruncationReason::LeftDomain),
        };
        xs.push(x);
        vs.push(v);
        if n + 1 == grid.nt {
            break;
        }
        for j in 0..substeps {
            match rk4_step(field, t + j as f64 * h, x, h) {
                Ok(next) => x = field.wrap(next),
                Err(reason) => return stop(xs, vs, n + 1, reason),
            }
        }
    }
    Path {
        xs,
        vs,
        truncated: None,
    }
}

fn stop(xs: Vec<f64>, vs: Vec<f64>, step: usize, reason: TruncationReason) -> Path {
    Path {
        xs,
        vs,
        truncated: Some(Truncation { step, reason }),
    }
}

/// Integrate dx/dt = field(t, x) from every seed over the grid's time axis.
pub fn integrate(
    field: &impl Guidance,
    seeds: &[f64],
    grid: &SpacetimeGrid,
    opts: &TrajectoryOptions,
) -> Result<TrajectoryEnsemble> {
    if opts.substeps == 0 {
        return Err(LabError::InvalidParameter {
            name: "substeps",
            reason: "must be at least 1".into(),
        });
    }
    if let Some((index, &x)) = seeds.iter().enumerate().find(|(_, &x)| !inside(grid, opts.periodic, x)) {
        return Err(LabError::SeedOutsideDomain { index, x });
    }
    let paths: Vec<Path> = seeds
        .par_iter()
        .map(|&x0| integrate_one(field, x0, grid, opts.substeps))
        .collect();
    let mut ensemble = TrajectoryEnsemble {
        seeds: seeds.to_vec(),
        times: grid.ts(),
        paths: Vec::with_capacity(paths.len()),
        velocities: Vec::with_capacity(paths.len()),
        truncated: Vec::with_capacity(paths.len()),
    };
    for path in paths {
        ensemble.paths.push(path.xs);
        ensemble.velocities.push(path.vs);
        ensemble.truncated.push(path.truncated);
    }
    Ok(ensemble)
}

/// Cumulative distribution of the piecewise-linear interpolant of a
/// sampled density. On a periodic axis the last cell closes onto the first
/// point.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityCdf {
    values: Vec<f64>,
    cumulative: Vec<f64>,
    x_min: f64,
    dx: f64,
    periodic: bool,
}

impl DensityCdf {
    pub fn new(rho: &[f64], x_min: f64, dx: f64, periodic: bool) -> Result<Self> {
        if rho.len() < 2 || rho.iter().any(|r| !r.is_finite() || *r < 0.0) {
            return Err(LabError::InvalidParameter {
                name: "rho",
                reason: "need at least two finite, non-negative samples".into(),
            });
        }
        let mut values = rho.to_vec();
        if periodic {
            values.push(rho[0]);
        }
        let mut cumulative = vec![0.0; values.len()];
        for i in 1..values.len() {
            cumulative[i] = cumulative[i - 1] + 0.5 * dx * (values[i - 1] + values[i]);
        }
        if *cumulative.last().unwrap() <= 0.0 {
            return Err(LabError::InvalidParameter {
                name: "rho",
                reason: "total mass is zero".into(),
            });
        }
        Ok(Self {
            values,
            cumulative,
            x_min,
            dx,
            periodic,
        })
    }

    pub fn from_slice(rho: &ScalarField, n: usize, periodic: bool) -> Result<Self> {
        let g = rho.grid();
        Self::new(rho.slice(n), g.x_min, g.dx, periodic)
    }

    pub fn total(&self) -> f64 {
        *self.cumulative.last().unwrap()
    }

    fn cells(&self) -> usize {
        self.values.len() - 1
    }

    fn span(&self) -> f64 {
        self.cells() as f64 * self.dx
    }

    /// Unnormalized mass to the left of `x`, clamped to the domain.
    pub fn mass_below(&self, x: f64) -> f64 {
        let r = ((x - self.x_min) / self.dx).clamp(0.0, self.cells() as f64);
        let i = (r.floor() as usize).min(self.cells() - 1);
        let s = r - i as f64;
        let (f0, f1) = (self.values[i], self.values[i + 1]);
        self.cumulative[i] + self.dx * (f0 * s + 0.5 * (f1 - f0) * s * s)
    }

    /// Mass between `a` and `b`. On a periodic axis both are wrapped and an
    /// interval with `b` before `a` runs through the seam.
    pub fn mass_between(&self, a: f64, b: f64) -> f64 {
        if self.periodic {
            let wrap = |x: f64| self.x_min + (x - self.x_min).rem_euclid(self.span());
            let m = self.mass_below(wrap(b)) - self.mass_below(wrap(a));
            if m < 0.0 {
                m + self.total()
            } else {
                m
            }
        } else {
            self.mass_below(b) - self.mass_below(a)
        }
    }

    /// Position below which a fraction `u` of the mass lies.
    pub fn quantile(&self, u: f64) -> f64 {
        let target = u.clamp(0.0, 1.0) * self.total();
        let i = self.cumulative.partition_point(|&c| c <= target).clamp(1, self.cells()) - 1;
        let r = (target - self.cumulative[i]) / self.dx;
        let (f0, f1) = (self.values[i], self.values[i + 1]);
        // dx (f0 s + (f1 - f0) s^2 / 2) = r dx, solved in the cancellation-free form
        let half_slope = 0.5 * (f1 - f0);
        let disc = (f0 * f0 + 4.0 * half_slope * r).max(0.0);
        let den = f0 + disc.sqrt();
        let s = if den > 0.0 {
            (2.0 * r / den).clamp(0.0, 1.0)
        } else {
            0.0
        };
        let x = self.x_min + (i as f64 + s) * self.dx;
        if self.periodic && x >= self.x_min + self.span() {
            self.x_min
        } else {
            x
        }
    }

    /// Probability of each bin between consecutive `edges`.
    pub fn bin_probabilities(&self, edges: &[f64]) -> Vec<f64> {
        let total = self.total();
        edges
            .windows(2)
            .map(|w| self.mass_between(w[0], w[1]) / total)
            .collect()
    }
}

/// `count` positions drawn from the density by inverse-CDF sampling with a
/// ChaCha generator seeded by `rng_seed`.
pub fn sample_seeds(cdf: &DensityCdf, count: usize, rng_seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    (0..count).map(|_| cdf.quantile(rng.random::<f64>())).collect()
}

/// `count` positions at the mid-quantiles (j + 1/2) / count.
pub fn quantile_seeds(cdf: &DensityCdf, count: usize) -> Vec<f64> {
    (0..count)
        .map(|j| cdf.quantile((j as f64 + 0.5) / count as f64))
        .collect()
}

pub const MIN_ENSEMBLE: usize = 1000;

#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub edges: Vec<f64>,
    /// Fraction of all seeds in each bin, per time slice.
    pub fractions: Vec<Vec<f64>>,
    /// Seeds still integrated at each slice.
    pub active: Vec<usize>,
}

pub fn ensemble_density(te: &TrajectoryEnsemble, edges: &[f64]) -> Result<Histogram> {
    if te.len() < MIN_ENSEMBLE {
        return Err(LabError::InvalidParameter {
            name: "seeds",
            reason: format!("histograms need at least {MIN_ENSEMBLE} seeds, got {}", te.len()),
        });
    }
    if edges.len() < 2 || edges.windows(2).any(|w| w[1] <= w[0]) {
        return Err(LabError::InvalidParameter {
            name: "bins",
            reason: "edges must be strictly increasing with at least two entries".into(),
        });
    }
    let nbins = edges.len() - 1;
    let norm = 1.0 / te.len() as f64;
    let mut fractions = Vec::with_capacity(te.times.len());
    let mut active = Vec::with_capacity(te.times.len());
    for n in 0..te.times.len() {
        let mut counts = vec![0usize; nbins];
        let mut alive = 0;
        for path in &te.paths {
            let Some(&x) = path.get(n) else { continue };
            alive += 1;
            let b = edges.partition_point(|&e| e <= x);
            if b >= 1 && b <= nbins {
                counts[b - 1] += 1;
            }
        }
        fractions.push(counts.iter().map(|&c| c as f64 * norm).collect());
        active.push(alive);
    }
    Ok(Histogram {
        edges: edges.to_vec(),
        fractions,
        active,
    })
}

/// Mass of rho between two world-lines and what the source predicts for it.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceBalance {
    /// Mass between the paths at slice n minus the mass at slice 0.
    pub actual: Vec<f64>,
    /// Time integral (trapezoid) of the source flux difference
    /// `F(t, right) - F(t, left)`.
    pub predicted: Vec<f64>,
}

fn interpolate_slice(f: &[f64], g: &SpacetimeGrid, periodic: bool, x: f64) -> f64 {
    let r = if periodic {
        (g.wrap_x(x) - g.x_min) / g.dx
    } else {
        ((x - g.x_min) / g.dx).clamp(0.0, (g.nx - 1) as f64)
    };
    let i = if periodic {
        (r.floor() as usize).min(g.nx - 1)
    } else {
        (r.floor() as usize).min(g.nx - 2)
    };
    let j = if periodic { (i + 1) % g.nx } else { i + 1 };
    let s = r - i as f64;
    (1.0 - s) * f[i] + s * f[j]
}

/// Material paths carry no particle flux of their own, so the mass of rho
/// between two of them changes only through the flux `source_flux` (for
/// the corrected flow, rho Phi_x / m) evaluated on the paths.
pub fn source_balance(
    rho: &ScalarField,
    source_flux: &ScalarField,
    periodic: bool,
    left: &[f64],
    right: &[f64],
) -> Result<SourceBalance> {
    let g = *rho.grid();
    if !g.same_shape(source_flux.grid()) {
        return Err(LabError::ShapeMismatch("density and source flux grids differ".into()));
    }
    let steps = left.len().min(right.len()).min(g.nt);
    let initial = DensityCdf::from_slice(rho, 0, periodic)?.mass_between(left[0], right[0]);
    let mut actual = Vec::with_capacity(steps);
    let mut predicted = Vec::with_capacity(steps);
    let mut acc = 0.0;
    let mut prev = 0.0;
    for n in 0..steps {
        let cdf = DensityCdf::from_slice(rho, n, periodic)?;
        actual.push(cdf.mass_between(left[n], right[n]) - initial);
        let f = source_flux.slice(n);
        let now = interpolate_slice(f, &g, periodic, right[n]) - interpolate_slice(f, &g, periodic, left[n]);
        if n > 0 {
            acc += 0.5 * g.dt * (prev + now);
        }
        predicted.push(acc);
        prev = now;
    }
    Ok(SourceBalance { actual, predicted })
}

/// A spatial path on one time slice, as a run of consecutive lattice points.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpatialPath {
    pub slice: usize,
    pub start: usize,
    pub len: usize,
    pub periodic: bool,
}

impl SpatialPath {
    /// The whole periodic axis at slice `slice`, the only closed loop in 1-D.
    pub fn circle(grid: &SpacetimeGrid, slice: usize) -> Self {
        Self {
            slice,
            start: 0,
            len: grid.nx,
            periodic: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Circulation {
    /// Loop integral of m v^1 dx.
    pub lhs: f64,
    /// -(q/c) times the loop integral of A_x dx.
    pub rhs: f64,
    /// Whole 2 pi hbar cycles in lhs - rhs.
    pub winding: i64,
    /// lhs - rhs - 2 pi hbar winding.
    pub remainder: f64,
}

/// Circulation of the four-velocity's spatial part around a closed loop,
/// by the periodic rectangle rule. `lhs` and `rhs` agree up to whole
/// cycles of 2 pi hbar picked up by a phase that winds around the loop.
pub fn circulation_check(
    v: &FourVectorField,
    a: &Potentials,
    path: &SpatialPath,
    p: &PhysParams,
) -> Result<Circulation> {
    let g = *v.grid();
    if !path.periodic || path.len != g.nx {
        return Err(LabError::OpenPath {
            len: path.len,
            nx: g.nx,
        });
    }
    if path.slice >= g.nt {
        return Err(LabError::InvalidParameter {
            name: "slice",
            reason: format!("{} is past the last slice {}", path.slice, g.nt - 1),
        });
    }
    let up = match v.variance {
        Variance::Contravariant => v.space.clone(),
        Variance::Covariant => v.space.map(|x| -x),
    };
    let row = up.slice(path.slice);
    let ax = a.ax.slice(path.slice);
    let lhs: f64 = p.m * row.iter().sum::<f64>() * g.dx;
    let rhs: f64 = -p.q / p.c * ax.iter().sum::<f64>() * g.dx;
    let cycle = 2.0 * std::f64::consts::PI * p.hbar;
    let winding = ((lhs - rhs) / cycle).round();
    Ok(Circulation {
        lhs,
        rhs,
        winding: winding as i64,
        remainder: lhs - rhs - winding * cycle,
    })
}
