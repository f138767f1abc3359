//! Norms over selected lattice points and convergence-order estimates.

use crate::field::{Field, FieldValue, ScalarField};
use crate::grid::SpacetimeGrid;

/// Points at least `margin` away from every edge of the lattice.
pub fn interior_mask(grid: &SpacetimeGrid, margin: usize) -> Vec<bool> {
    let mut mask = vec![false; grid.len()];
    if grid.nt <= 2 * margin || grid.nx <= 2 * margin {
        return mask;
    }
    for n in margin..grid.nt - margin {
        for i in margin..grid.nx - margin {
            mask[grid.index(n, i)] = true;
        }
    }
    mask
}

/// Pointwise AND of two masks.
pub fn and_mask(a: &[bool], b: &[bool]) -> Vec<bool> {
    a.iter().zip(b).map(|(&x, &y)| x && y).collect()
}

/// Invert a node mask (true = node) into a validity mask.
pub fn valid_from_nodes(nodes: &[bool]) -> Vec<bool> {
    nodes.iter().map(|&n| !n).collect()
}

pub fn max_abs_where(f: &ScalarField, mask: &[bool]) -> f64 {
    f.values()
        .iter()
        .zip(mask)
        .filter(|(_, &m)| m)
        .fold(0.0, |acc, (v, _)| acc.max(v.abs()))
}

/// Maximum of |f| over points selected by a predicate on (t, x).
pub fn max_abs_in(f: &ScalarField, pred: impl Fn(f64, f64) -> bool) -> f64 {
    let g = f.grid();
    let mut m: f64 = 0.0;
    for n in 0..g.nt {
        let t = g.t(n);
        for i in 0..g.nx {
            if pred(t, g.x(i)) {
                m = m.max(f.at(n, i).abs());
            }
        }
    }
    m
}

/// Sample a refined field back onto the coarse lattice (coincident points).
pub fn restrict<T: FieldValue>(fine: &Field<T>, factor: usize) -> Field<T> {
    let g = fine.grid();
    let coarse = SpacetimeGrid {
        nx: g.nx / factor,
        nt: (g.nt - 1) / factor + 1,
        dx: g.dx * factor as f64,
        dt: g.dt * factor as f64,
        x_min: g.x_min,
        t0: g.t0,
    };
    let mut values = Vec::with_capacity(coarse.len());
    for n in 0..coarse.nt {
        for i in 0..coarse.nx {
            values.push(fine.at(n * factor, i * factor));
        }
    }
    Field::from_values(coarse, values).expect("restricted shape is consistent")
}

/// Observed order p from errors on grids with spacing ratio `ratio`.
pub fn observed_order(coarse_err: f64, fine_err: f64, ratio: f64) -> f64 {
    (coarse_err / fine_err).ln() / ratio.ln()
}

/// Orders between each consecutive pair in a refinement sequence.
pub fn observed_orders(errors: &[f64], ratio: f64) -> Vec<f64> {
    errors.windows(2).map(|w| observed_order(w[0], w[1], ratio)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interior_excludes_edges() {
        let g = SpacetimeGrid::new(8, 5, 0.1, 0.1, 0.0, 0.0).unwrap();
        let m = interior_mask(&g, 1);
        assert_eq!(m.iter().filter(|&&b| b).count(), 6 * 3);
        assert!(!m[g.index(0, 3)]);
        assert!(m[g.index(2, 3)]);
    }

    #[test]
    fn restrict_picks_coincident_points() {
        let g = SpacetimeGrid::new(8, 5, 0.1, 0.1, 0.0, 0.0).unwrap();
        let f = ScalarField::from_fn(g.refined(2), |t, x| t + 10.0 * x);
        let r = restrict(&f, 2);
        assert_eq!(r.grid().nx, 8);
        assert_eq!(r.grid().nt, 5);
        assert!((r.at(2, 3) - (g.t(2) + 10.0 * g.x(3))).abs() < 1e-12);
    }

    #[test]
    fn second_order_sequence() {
        let orders = observed_orders(&[1.0, 0.25, 0.0625], 2.0);
        assert!(orders.iter().all(|o| (o - 2.0).abs() < 1e-12));
    }
}
