//! World-lines on Schrodinger flows and analytic fields.

use kglab_core::madelung::{decompose, MadelungData, NodeThreshold};
use kglab_core::norms::observed_orders;
use kglab_core::packets;
use kglab_core::schrodinger::{
    corrected_flow, evolve_schrodinger, fluid_state, ground_state, solve_lowspeed_phi, FluidState,
};
use kglab_core::trajectories::{
    ensemble_density, integrate, quantile_seeds, sample_seeds, source_balance, DensityCdf, GuidanceField,
    TrajectoryOptions,
};
use kglab_core::{PhysParams, Potentials, ScalarField, SpacetimeGrid};

fn free_packet(x0: f64, k0: f64, t_end: f64) -> (MadelungData, FluidState) {
    let p = PhysParams::default();
    let dt = 0.005;
    let g = SpacetimeGrid::periodic(800, 40.0, -20.0, (t_end / dt).round() as usize + 1, dt).unwrap();
    let a = Potentials::zero(g);
    let sol = evolve_schrodinger(&packets::gaussian(&g.xs(), x0, 1.0, k0), &a, &p, &g).unwrap();
    let md = decompose(&sol.psi, p.hbar, NodeThreshold::default()).unwrap();
    let fluid = fluid_state(&md, &a, &p, true).unwrap();
    (md, fluid)
}

#[test]
fn bohm_paths_scale_with_the_packet_width() {
    let p = PhysParams::default();
    let sigma0 = 1.0;
    let (md, fluid) = free_packet(0.0, 0.0, 2.0 * p.m * sigma0 * sigma0 / p.hbar);
    let g = *md.grid();
    let field = GuidanceField::low_speed(&fluid).unwrap();
    let seeds = [-2.5, -1.0, 0.3, 0.5, 1.0, 1.7, 2.5];
    let te = integrate(&field, &seeds, &g, &TrajectoryOptions::default()).unwrap();
    assert_eq!(te.truncated_count(), 0);
    let mut worst: f64 = 0.0;
    for (path, &x0) in te.paths.iter().zip(&seeds) {
        assert_eq!(path.len(), g.nt);
        for (n, x) in path.iter().enumerate() {
            let exact = x0 * packets::free_gaussian_width(sigma0, g.t(n), p.hbar, p.m) / sigma0;
            worst = worst.max((x - exact).abs() / exact.abs());
        }
    }
    println!("worst relative deviation {worst:.3e}");
    assert!(worst <= 1e-3);
}

#[test]
fn mirror_seeds_give_mirror_paths() {
    let (md, fluid) = free_packet(0.0, 0.0, 1.0);
    let field = GuidanceField::low_speed(&fluid).unwrap();
    let seeds = [-1.3, 1.3, -0.4, 0.4];
    let te = integrate(&field, &seeds, md.grid(), &TrajectoryOptions::default()).unwrap();
    for pair in te.paths.chunks(2) {
        for (a, b) in pair[0].iter().zip(&pair[1]) {
            assert!((a + b).abs() < 1e-10, "{a} vs {b}");
        }
    }
}

#[test]
fn ensemble_follows_the_density_without_hidden_phase() {
    let (md, fluid) = free_packet(-2.0, 1.0, 2.0);
    let g = *md.grid();
    let field = GuidanceField::low_speed(&fluid).unwrap();
    let n_seeds = 10_000;
    let seeds = sample_seeds(&DensityCdf::from_slice(&md.rho, 0, true).unwrap(), n_seeds, 20240917);
    let te = integrate(&field, &seeds, &g, &TrajectoryOptions::default()).unwrap();
    assert_eq!(te.truncated_count(), 0);
    let edges: Vec<f64> = (0..=24).map(|k| -8.0 + 0.5 * k as f64).collect();
    let hist = ensemble_density(&te, &edges).unwrap();
    let tol = 3.0 / (n_seeds as f64).sqrt();
    let mut worst: f64 = 0.0;
    for n in (0..g.nt).step_by(50) {
        let probs = DensityCdf::from_slice(&md.rho, n, true)
            .unwrap()
            .bin_probabilities(&edges);
        for (h, q) in hist.fractions[n].iter().zip(&probs) {
            worst = worst.max((h - q).abs());
        }
    }
    println!("worst bin deviation {worst:.3e} against {tol:.3e}");
    assert!(worst <= tol);
}

#[test]
fn stationary_state_ensemble_stays_put() {
    let p = PhysParams::default();
    let g = SpacetimeGrid::periodic(256, 25.6, -12.8, 101, 0.02).unwrap();
    let v: Vec<f64> = g.xs().iter().map(|x| 0.5 * x * x).collect();
    let gs = ground_state(&v, &p, g.dx, 1e-14, 1000).unwrap();
    let a = Potentials::static_scalar(g, &v).unwrap();
    let sol = evolve_schrodinger(&gs.psi, &a, &p, &g).unwrap();
    let md = decompose(&sol.psi, p.hbar, NodeThreshold::default()).unwrap();
    let fluid = fluid_state(&md, &a, &p, true).unwrap();
    let field = GuidanceField::low_speed(&fluid).unwrap();
    let n_seeds = 2000;
    let seeds = sample_seeds(&DensityCdf::from_slice(&md.rho, 0, true).unwrap(), n_seeds, 5);
    let te = integrate(&field, &seeds, &g, &TrajectoryOptions::default()).unwrap();
    let edges: Vec<f64> = (0..=12).map(|k| -3.0 + 0.5 * k as f64).collect();
    let hist = ensemble_density(&te, &edges).unwrap();
    let tol = 3.0 / (n_seeds as f64).sqrt();
    for n in [0, g.nt / 2, g.nt - 1] {
        let probs = DensityCdf::from_slice(&md.rho, n, true)
            .unwrap()
            .bin_probabilities(&edges);
        for (h, q) in hist.fractions[n].iter().zip(&probs) {
            assert!((h - q).abs() <= tol);
        }
    }
    let drift = te
        .paths
        .iter()
        .map(|path| (path.last().unwrap() - path[0]).abs())
        .fold(0.0, f64::max);
    assert!(drift < 1e-6, "drift {drift}");
}

#[test]
fn hidden_phase_source_accounts_for_the_mismatch() {
    let p = PhysParams::default();
    let (md, fluid) = free_packet(-1.0, 1.0, 1.0);
    let g = *md.grid();
    let hp = solve_lowspeed_phi(&fluid, &md.rho, &p, &vec![0.0; g.nx]).unwrap();
    let flow = corrected_flow(&fluid, &hp, &p).unwrap();
    let field = GuidanceField::low_speed(&flow).unwrap();
    let seeds = quantile_seeds(&DensityCdf::from_slice(&md.rho, 0, true).unwrap(), 9);
    let te = integrate(&field, &seeds, &g, &TrajectoryOptions::default()).unwrap();
    assert_eq!(te.truncated_count(), 0);

    // free classical particles: straight lines at the initial velocity
    for (path, vel) in te.paths.iter().zip(&te.velocities) {
        let bend = path
            .iter()
            .enumerate()
            .map(|(n, x)| (x - path[0] - vel[0] * g.t(n)).abs())
            .fold(0.0, f64::max);
        assert!(bend < 1e-3, "bend {bend}");
    }

    // the particle count between neighbouring paths is fixed, the density
    // mass between them is not; the source flux rho Phi_x / m explains it
    let phi_x = ScalarField::from_values(g, {
        let mut out = vec![0.0; g.len()];
        for n in 0..g.nt {
            for i in 0..g.nx {
                let (l, r) = ((i + g.nx - 1) % g.nx, (i + 1) % g.nx);
                let k = g.index(n, i);
                if !hp.excluded[k] && !hp.excluded[g.index(n, l)] && !hp.excluded[g.index(n, r)] {
                    out[k] = (hp.phi.at(n, r) - hp.phi.at(n, l)) / (2.0 * g.dx);
                }
            }
        }
        out
    })
    .unwrap();
    let flux = md.rho.mul(&phi_x).unwrap().scale(1.0 / p.m);
    let mut checked = 0;
    for pair in te.paths.windows(2) {
        let b = source_balance(&md.rho, &flux, true, &pair[0], &pair[1]).unwrap();
        let scale = b.predicted.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let gap = b
            .actual
            .iter()
            .zip(&b.predicted)
            .fold(0.0f64, |m, (a, q)| m.max((a - q).abs()));
        println!(
            "predicted {:+.4e} actual {:+.4e} gap {gap:.2e}",
            b.predicted.last().unwrap(),
            b.actual.last().unwrap()
        );
        if scale > 1e-3 {
            assert!(gap <= 0.05 * scale, "gap {gap} scale {scale}");
            assert_eq!(b.actual.last().unwrap().signum(), b.predicted.last().unwrap().signum());
            checked += 1;
        }
    }
    assert!(checked >= 4);
}

#[test]
fn rk4_is_fourth_order_on_an_analytic_field() {
    // dx/dt = cos t sin x, so tan(x/2) = tan(x0/2) exp(sin t)
    let field = |t: f64, x: f64| t.cos() * x.sin();
    let exact = |t: f64, x0: f64| 2.0 * ((x0 / 2.0).tan() * t.sin().exp()).atan();
    let seeds = [0.3, 1.0, 2.0, -1.5];
    let g = SpacetimeGrid::periodic(16, 8.0, -4.0, 11, 0.3).unwrap();
    let opts = TrajectoryOptions {
        periodic: false,
        ..Default::default()
    };
    let errors: Vec<f64> = [2, 4, 8, 16]
        .iter()
        .map(|&substeps| {
            let te = integrate(&field, &seeds, &g, &TrajectoryOptions { substeps, ..opts }).unwrap();
            te.paths
                .iter()
                .zip(&seeds)
                .map(|(path, &x0)| (path.last().unwrap() - exact(g.t_end(), x0)).abs())
                .fold(0.0, f64::max)
        })
        .collect();
    let orders = observed_orders(&errors, 2.0);
    println!("errors {errors:?} orders {orders:?}");
    assert!(orders.iter().all(|o| (o - 4.0).abs() <= 0.5));
}

#[test]
fn paths_are_bit_identical_across_runs() {
    let (md, fluid) = free_packet(-2.0, 1.0, 0.5);
    let field = GuidanceField::low_speed(&fluid).unwrap();
    let seeds = sample_seeds(&DensityCdf::from_slice(&md.rho, 0, true).unwrap(), 500, 11);
    let a = integrate(&field, &seeds, md.grid(), &TrajectoryOptions::default()).unwrap();
    let b = integrate(&field, &seeds, md.grid(), &TrajectoryOptions::default()).unwrap();
    let bits = |te: &kglab_core::trajectories::TrajectoryEnsemble| -> Vec<u64> {
        te.paths.iter().flatten().map(|x| x.to_bits()).collect()
    };
    assert_eq!(bits(&a), bits(&b));
}
