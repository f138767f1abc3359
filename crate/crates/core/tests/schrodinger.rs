//! Schrodinger reference solver and its Madelung-fluid identities.

use kglab_core::madelung::{decompose, NodeThreshold};
use kglab_core::norms::{max_abs_in, observed_orders};
use kglab_core::packets;
use kglab_core::schrodinger::{
    corrected_flow, evolve_schrodinger, evolve_schrodinger_with, fluid_residuals, fluid_state, ground_state,
    mean_velocity, newton_lorentz_residual, solve_lowspeed_phi, sourced_continuity_residual, SchrodingerOptions,
};
use kglab_core::{PhysParams, Potentials, ScalarField, SpacetimeGrid};

fn width(rho: &[f64], xs: &[f64]) -> f64 {
    let mass: f64 = rho.iter().sum();
    let mean: f64 = rho.iter().zip(xs).map(|(r, x)| r * x).sum::<f64>() / mass;
    (rho.iter().zip(xs).map(|(r, x)| r * (x - mean).powi(2)).sum::<f64>() / mass).sqrt()
}

#[test]
fn free_gaussian_spreads_by_the_closed_form() {
    let p = PhysParams::default();
    let g = SpacetimeGrid::periodic(1200, 60.0, -30.0, 201, 0.01).unwrap();
    let sigma0 = 1.0;
    let psi0 = packets::gaussian(&g.xs(), 0.0, sigma0, 0.0);
    let sol = evolve_schrodinger(&psi0, &Potentials::zero(g), &p, &g).unwrap();
    let xs = g.xs();
    let mut worst: f64 = 0.0;
    for n in (0..g.nt).step_by(20) {
        let rho: Vec<f64> = sol.psi.slice(n).iter().map(|z| z.norm_sqr()).collect();
        let exact = packets::free_gaussian_width(sigma0, g.t(n), p.hbar, p.m);
        worst = worst.max((width(&rho, &xs) - exact).abs() / exact);
    }
    println!("worst relative width error {worst:.3e}");
    assert!(worst < 1e-3);
}

#[test]
fn norm_is_constant_over_a_thousand_steps() {
    let p = PhysParams::default();
    let g = SpacetimeGrid::periodic(512, 40.0, -20.0, 1001, 0.005).unwrap();
    let a = Potentials::uniform_field(g, 0.2, &p);
    let psi0 = packets::gaussian(&g.xs(), -3.0, 1.2, 2.0);
    let sol = evolve_schrodinger(&psi0, &a, &p, &g).unwrap();
    let norms = sol.norms();
    for n in &norms {
        assert!((n - 1.0).abs() < 1e-10, "norm {n}");
    }
}

fn well(xs: &[f64]) -> Vec<f64> {
    xs.iter().map(|x| -2.0 / (x * x).mul_add(0.5, 1.0).powi(2)).collect()
}

#[test]
fn eigenstate_is_static() {
    let p = PhysParams::default();
    let g = SpacetimeGrid::periodic(256, 25.6, -12.8, 201, 0.02).unwrap();
    let v = well(&g.xs());
    let gs = ground_state(&v, &p, g.dx, 1e-14, 1000).unwrap();
    let a = Potentials::static_scalar(g, &v).unwrap();
    let sol = evolve_schrodinger(&gs.psi, &a, &p, &g).unwrap();
    let rho0: Vec<f64> = gs.psi.iter().map(|z| z.norm_sqr()).collect();
    let mut worst: f64 = 0.0;
    for n in 0..g.nt {
        for (z, r) in sol.psi.slice(n).iter().zip(&rho0) {
            worst = worst.max((z.norm_sqr() - r).abs());
        }
    }
    println!(
        "ground energy {} after {} iterations; density drift {worst:.3e}",
        gs.energy, gs.iterations
    );
    assert!(worst < 1e-8);

    // stationary fluid: both residuals vanish up to round-off
    let md = decompose(&sol.psi, p.hbar, NodeThreshold::default()).unwrap();
    let fluid = fluid_state(&md, &a, &p, true).unwrap();
    let r = fluid_residuals(&md, &fluid, &p).unwrap();
    let inner = |f: &ScalarField| max_abs_in(f, |t, x| t > 0.05 && t < g.t_end() - 0.05 && x.abs() < 5.0);
    println!(
        "stationary residuals {:.3e} {:.3e}",
        inner(&r.momentum),
        inner(&r.continuity)
    );
    assert!(inner(&r.momentum) <= 1e-6 && inner(&r.continuity) <= 1e-6);
}

#[test]
fn ehrenfest_acceleration_in_uniform_field() {
    let p = PhysParams::default();
    let e0 = 0.5;
    let g = SpacetimeGrid::periodic(800, 40.0, -20.0, 101, 0.01).unwrap();
    let a = Potentials::uniform_field(g, e0, &p);
    let psi0 = packets::gaussian(&g.xs(), -2.0, 1.0, 0.5);
    let sol = evolve_schrodinger_with(&psi0, &a, &p, &g, &SchrodingerOptions { substeps: 2 }).unwrap();
    let md = decompose(&sol.psi, p.hbar, NodeThreshold::default()).unwrap();
    let fluid = fluid_state(&md, &a, &p, true).unwrap();
    let hp = solve_lowspeed_phi(&fluid, &md.rho, &p, &vec![0.0; g.nx]).unwrap();
    let flow = corrected_flow(&fluid, &hp, &p).unwrap();
    let mean_u = mean_velocity(&md.rho, &fluid.u);
    let accel = (mean_u[g.nt - 1] - mean_u[0]) / g.t_end();
    println!("mean acceleration {accel} expected {}", p.q * e0 / p.m);
    assert!((accel - p.q * e0 / p.m).abs() <= 1e-3 * (p.q * e0 / p.m));
    let nl = newton_lorentz_residual(&flow, &p).unwrap();
    let inner = max_abs_in(&nl, |t, x| {
        t > 0.05 && t < 0.95 && (x + 2.0 - 0.25 * e0 * t * t - 0.5 * t).abs() < 3.0
    });
    println!("newton-lorentz residual {inner:.3e}");
    assert!(inner < 1e-2);
}

fn fluid_errors(nx: usize) -> [f64; 4] {
    let p = PhysParams::default();
    let length = 24.0;
    let dx = length / nx as f64;
    let dt = dx / 2.0;
    let t_end = 1.0;
    let nt = (t_end / dt).round() as usize + 1;
    let g = SpacetimeGrid::periodic(nx, length, -12.0, nt, dt).unwrap();
    let a = Potentials::zero(g);
    let psi0 = packets::gaussian(&g.xs(), -1.0, 1.0, 1.0);
    let sol = evolve_schrodinger(&psi0, &a, &p, &g).unwrap();
    let md = decompose(&sol.psi, p.hbar, NodeThreshold::default()).unwrap();
    let fluid = fluid_state(&md, &a, &p, true).unwrap();
    let r = fluid_residuals(&md, &fluid, &p).unwrap();
    let hp = match solve_lowspeed_phi(&fluid, &md.rho, &p, &vec![0.0; nx]) {
        Ok(h) => h,
        Err(e) => panic!("nx {nx}: {e:?}"),
    };
    let flow = corrected_flow(&fluid, &hp, &p).unwrap();
    let nl = newton_lorentz_residual(&flow, &p).unwrap();
    let sc = sourced_continuity_residual(&flow, &md, &hp, &p).unwrap();
    let window = |f: &ScalarField| max_abs_in(f, |t, x| (0.1..=0.9).contains(&t) && (x + 1.0 - t).abs() <= 3.0);
    [window(&r.momentum), window(&r.continuity), window(&nl), window(&sc)]
}

#[test]
fn fluid_suite_converges_for_free_gaussian() {
    let levels: Vec<[f64; 4]> = [240, 480, 960].iter().map(|&n| fluid_errors(n)).collect();
    for (k, name) in ["momentum", "continuity", "newton-lorentz", "sourced continuity"]
        .iter()
        .enumerate()
    {
        let e: Vec<f64> = levels.iter().map(|l| l[k]).collect();
        let o = observed_orders(&e, 2.0);
        println!("{name}: {e:?} orders {o:?}");
        assert!(o.iter().all(|x| *x >= 1.8), "{name}");
    }
}
