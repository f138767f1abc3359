//! Second-order finite differences on the spacetime lattice.
//!
//! Interior points use centered stencils. The two end points of each line
//! use second-order one-sided stencils, so every operator keeps global
//! order two and is exact on quadratics.

use crate::error::{LabError, Result};
use crate::field::{Field, FieldValue, FourVectorField, ScalarField, Variance};
use crate::params::PhysParams;

fn require_len(axis: &'static str, len: usize) -> Result<()> {
    if len < 3 {
        Err(LabError::DegenerateGrid { axis, len, need: 3 })
    } else {
        Ok(())
    }
}

/// First derivative along one line of samples.
pub fn diff1_line<T: FieldValue>(f: &[T], h: f64, out: &mut [T]) {
    let n = f.len();
    debug_assert!(n >= 3 && out.len() == n);
    let c = 0.5 / h;
    out[0] = (f[1] * 4.0 - f[0] * 3.0 - f[2]) * c;
    for i in 1..n - 1 {
        out[i] = (f[i + 1] - f[i - 1]) * c;
    }
    out[n - 1] = (f[n - 1] * 3.0 - f[n - 2] * 4.0 + f[n - 3]) * c;
}

/// Second derivative along one line of samples.
pub fn diff2_line<T: FieldValue>(f: &[T], h: f64, out: &mut [T]) {
    let n = f.len();
    debug_assert!(n >= 3 && out.len() == n);
    let c = 1.0 / (h * h);
    for i in 1..n - 1 {
        out[i] = (f[i + 1] - f[i] * 2.0 + f[i - 1]) * c;
    }
    if n >= 4 {
        out[0] = (f[0] * 2.0 - f[1] * 5.0 + f[2] * 4.0 - f[3]) * c;
        out[n - 1] = (f[n - 1] * 2.0 - f[n - 2] * 5.0 + f[n - 3] * 4.0 - f[n - 4]) * c;
    } else {
        out[0] = out[1];
        out[n - 1] = out[n - 2];
    }
}

/// Centered first derivative on a periodic line.
pub fn periodic_diff1<T: FieldValue>(f: &[T], h: f64, out: &mut [T]) {
    let n = f.len();
    let c = 0.5 / h;
    for i in 0..n {
        let ip = if i + 1 == n { 0 } else { i + 1 };
        let im = if i == 0 { n - 1 } else { i - 1 };
        out[i] = (f[ip] - f[im]) * c;
    }
}

/// Centered second derivative on a periodic line.
pub fn periodic_diff2<T: FieldValue>(f: &[T], h: f64, out: &mut [T]) {
    let n = f.len();
    let c = 1.0 / (h * h);
    for i in 0..n {
        let ip = if i + 1 == n { 0 } else { i + 1 };
        let im = if i == 0 { n - 1 } else { i - 1 };
        out[i] = (f[ip] - f[i] * 2.0 + f[im]) * c;
    }
}

fn along_x<T: FieldValue>(f: &Field<T>, op: fn(&[T], f64, &mut [T])) -> Result<Field<T>> {
    let g = *f.grid();
    require_len("x", g.nx)?;
    let mut out = Field::zeros(g);
    for n in 0..g.nt {
        op(f.slice(n), g.dx, out.slice_mut(n));
    }
    Ok(out)
}

fn along_t<T: FieldValue>(f: &Field<T>, op: fn(&[T], f64, &mut [T])) -> Result<Field<T>> {
    let g = *f.grid();
    require_len("t", g.nt)?;
    let mut out = Field::zeros(g);
    let mut column = vec![T::default(); g.nt];
    let mut result = vec![T::default(); g.nt];
    for i in 0..g.nx {
        for (n, c) in column.iter_mut().enumerate() {
            *c = f.at(n, i);
        }
        op(&column, g.dt, &mut result);
        for (n, &r) in result.iter().enumerate() {
            out.set(n, i, r);
        }
    }
    Ok(out)
}

pub fn ddx<T: FieldValue>(f: &Field<T>) -> Result<Field<T>> {
    along_x(f, diff1_line)
}

pub fn ddt<T: FieldValue>(f: &Field<T>) -> Result<Field<T>> {
    along_t(f, diff1_line)
}

pub fn d2dx2<T: FieldValue>(f: &Field<T>) -> Result<Field<T>> {
    along_x(f, diff2_line)
}

pub fn d2dt2<T: FieldValue>(f: &Field<T>) -> Result<Field<T>> {
    along_t(f, diff2_line)
}

/// The wave operator (1/c^2) d_t^2 f - d_x^2 f.
pub fn dalembertian<T: FieldValue>(f: &Field<T>, p: &PhysParams) -> Result<Field<T>> {
    let ftt = d2dt2(f)?;
    let fxx = d2dx2(f)?;
    let inv_c2 = 1.0 / (p.c * p.c);
    ftt.zip_with(&fxx, |a, b| a * inv_c2 - b)
}

/// Partial derivative d_mu with respect to x^0 = ct (mu = 0) or x (mu = 1).
pub fn partial(f: &ScalarField, mu: usize, p: &PhysParams) -> Result<ScalarField> {
    match mu {
        0 => Ok(ddt(f)?.scale(1.0 / p.c)),
        1 => ddx(f),
        _ => panic!("index {mu} out of range in 1+1 dimensions"),
    }
}

/// Contracted divergence d^mu j_mu = (1/c) d_t j_0 - d_x j_1 of a covariant field.
pub fn four_divergence(j: &FourVectorField, p: &PhysParams) -> Result<ScalarField> {
    j.require(Variance::Covariant)?;
    let dt0 = ddt(&j.time)?;
    let dx1 = ddx(&j.space)?;
    let inv_c = 1.0 / p.c;
    dt0.zip_with(&dx1, |a, b| a * inv_c - b)
}
