//! Sampled fields on a [`SpacetimeGrid`].
//!
//! Values are stored as one contiguous row-major block, time slice by time
//! slice (`values[n * nx + i]`).

use std::ops::{Add, Mul, Neg, Sub};

use num_complex::Complex64;

use crate::error::{LabError, Result};
use crate::grid::SpacetimeGrid;

/// Element types the finite-difference calculus can operate on.
pub trait FieldValue:
    Copy + Default + Add<Output = Self> + Sub<Output = Self> + Neg<Output = Self> + Mul<f64, Output = Self> + Send + Sync
{
    fn is_finite_value(&self) -> bool;
}

impl FieldValue for f64 {
    fn is_finite_value(&self) -> bool {
        self.is_finite()
    }
}

impl FieldValue for Complex64 {
    fn is_finite_value(&self) -> bool {
        self.re.is_finite() && self.im.is_finite()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Field<T> {
    grid: SpacetimeGrid,
    values: Vec<T>,
}

pub type ScalarField = Field<f64>;
pub type ComplexField = Field<Complex64>;

impl<T: FieldValue> Field<T> {
    pub fn zeros(grid: SpacetimeGrid) -> Self {
        Self {
            grid,
            values: vec![T::default(); grid.len()],
        }
    }

    pub fn constant(grid: SpacetimeGrid, value: T) -> Self {
        Self {
            grid,
            values: vec![value; grid.len()],
        }
    }

    pub fn from_values(grid: SpacetimeGrid, values: Vec<T>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(LabError::ShapeMismatch(format!(
                "{} values for a {}x{} grid",
                values.len(),
                grid.nt,
                grid.nx
            )));
        }
        Ok(Self { grid, values })
    }

    /// Sample `f(t, x)` at every lattice point.
    pub fn from_fn(grid: SpacetimeGrid, f: impl Fn(f64, f64) -> T) -> Self {
        let mut values = Vec::with_capacity(grid.len());
        for n in 0..grid.nt {
            let t = grid.t(n);
            for i in 0..grid.nx {
                values.push(f(t, grid.x(i)));
            }
        }
        Self { grid, values }
    }

    pub fn grid(&self) -> &SpacetimeGrid {
        &self.grid
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [T] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    #[inline]
    pub fn at(&self, n: usize, i: usize) -> T {
        self.values[self.grid.index(n, i)]
    }

    #[inline]
    pub fn set(&mut self, n: usize, i: usize, v: T) {
        let k = self.grid.index(n, i);
        self.values[k] = v;
    }

    pub fn slice(&self, n: usize) -> &[T] {
        let nx = self.grid.nx;
        &self.values[n * nx..(n + 1) * nx]
    }

    pub fn slice_mut(&mut self, n: usize) -> &mut [T] {
        let nx = self.grid.nx;
        &mut self.values[n * nx..(n + 1) * nx]
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(FieldValue::is_finite_value)
    }

    pub fn map<U: FieldValue>(&self, f: impl Fn(T) -> U) -> Field<U> {
        Field {
            grid: self.grid,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Pointwise combination of two fields on the same grid.
    pub fn zip_with<U: FieldValue, V: FieldValue>(&self, other: &Field<U>, f: impl Fn(T, U) -> V) -> Result<Field<V>> {
        check_same_grid(&self.grid, &other.grid)?;
        Ok(Field {
            grid: self.grid,
            values: self
                .values
                .iter()
                .zip(other.values.iter())
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn scale(&self, s: f64) -> Self {
        self.map(|v| v * s)
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a - b)
    }
}

impl ScalarField {
    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a * b)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

impl ComplexField {
    pub fn re(&self) -> ScalarField {
        self.map(|z| z.re)
    }

    pub fn im(&self) -> ScalarField {
        self.map(|z| z.im)
    }

    pub fn norm_sqr(&self) -> ScalarField {
        self.map(|z| z.norm_sqr())
    }

    pub fn abs(&self) -> ScalarField {
        self.map(|z| z.norm())
    }
}

pub(crate) fn check_same_grid(a: &SpacetimeGrid, b: &SpacetimeGrid) -> Result<()> {
    if a.same_shape(b) {
        Ok(())
    } else {
        Err(LabError::ShapeMismatch(format!(
            "grids differ: {}x{} vs {}x{}",
            a.nt, a.nx, b.nt, b.nx
        )))
    }
}

/// Index position of a four-vector's components.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variance {
    Covariant,
    Contravariant,
}

impl Variance {
    pub fn name(self) -> &'static str {
        match self {
            Variance::Covariant => "covariant",
            Variance::Contravariant => "contravariant",
        }
    }
}

/// Two-component four-vector field in 1+1 dimensions, metric (+,-).
#[derive(Debug, Clone, PartialEq)]
pub struct FourVectorField {
    pub time: ScalarField,
    pub space: ScalarField,
    pub variance: Variance,
}

impl FourVectorField {
    pub fn new(time: ScalarField, space: ScalarField, variance: Variance) -> Result<Self> {
        check_same_grid(time.grid(), space.grid())?;
        Ok(Self { time, space, variance })
    }

    pub fn covariant(time: ScalarField, space: ScalarField) -> Result<Self> {
        Self::new(time, space, Variance::Covariant)
    }

    pub fn contravariant(time: ScalarField, space: ScalarField) -> Result<Self> {
        Self::new(time, space, Variance::Contravariant)
    }

    pub fn grid(&self) -> &SpacetimeGrid {
        self.time.grid()
    }

    /// Lower the index: (v^0, v^1) -> (v^0, -v^1). No-op when already covariant.
    pub fn lower(&self) -> Self {
        match self.variance {
            Variance::Covariant => self.clone(),
            Variance::Contravariant => Self {
                time: self.time.clone(),
                space: self.space.map(|v| -v),
                variance: Variance::Covariant,
            },
        }
    }

    /// Raise the index: (v_0, v_1) -> (v_0, -v_1). No-op when already contravariant.
    pub fn raise(&self) -> Self {
        match self.variance {
            Variance::Contravariant => self.clone(),
            Variance::Covariant => Self {
                time: self.time.clone(),
                space: self.space.map(|v| -v),
                variance: Variance::Contravariant,
            },
        }
    }

    pub fn require(&self, variance: Variance) -> Result<()> {
        if self.variance == variance {
            Ok(())
        } else {
            Err(LabError::VarianceMismatch {
                expected: variance.name(),
                found: self.variance.name(),
            })
        }
    }

    /// Pointwise Minkowski square v^mu v_mu = v_0^2 - v_1^2 (either variance).
    pub fn square(&self) -> ScalarField {
        self.time
            .zip_with(&self.space, |a, b| a * a - b * b)
            .expect("components share one grid")
    }
}

/// Antisymmetric rank-2 tensor in 1+1 dimensions: a single independent
/// component F_01, with F_10 = -F_01 and vanishing diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct AntisymmetricTensor {
    pub f01: ScalarField,
}

impl AntisymmetricTensor {
    pub fn component(&self, mu: usize, nu: usize) -> ScalarField {
        match (mu, nu) {
            (0, 1) => self.f01.clone(),
            (1, 0) => self.f01.map(|v| -v),
            (0, 0) | (1, 1) => ScalarField::zeros(*self.f01.grid()),
            _ => panic!("index ({mu}, {nu}) out of range for a 2x2 tensor"),
        }
    }
}

/// Symmetric rank-2 tensor with lower indices.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricTensor {
    pub t00: ScalarField,
    pub t01: ScalarField,
    pub t11: ScalarField,
}

impl SymmetricTensor {
    pub fn component(&self, mu: usize, nu: usize) -> &ScalarField {
        match (mu, nu) {
            (0, 0) => &self.t00,
            (0, 1) | (1, 0) => &self.t01,
            (1, 1) => &self.t11,
            _ => panic!("index ({mu}, {nu}) out of range for a 2x2 tensor"),
        }
    }
}
