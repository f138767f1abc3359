//! Slow packets: the Klein-Gordon run against the Schrodinger run, and the
//! relativistic hidden phase against its low-speed equation.

use kglab_core::hidden_phase::{lowspeed_phi_residual, solve_phi_with, velocity_field, HiddenPhaseOptions};
use kglab_core::kg::{evolve_kg_with, KGInitialData, KGSolution, KgOptions};
use kglab_core::madelung::{decompose_with_carrier, quantum_potential, NodeThreshold};
use kglab_core::packets;
use kglab_core::schrodinger::{evolve_schrodinger_with, low_speed_compare, SchrodingerOptions};
use kglab_core::{PhysParams, Potentials, SpacetimeGrid};

struct Packet {
    sigma: f64,
    k0: f64,
    length: f64,
    dx: f64,
    t_end: f64,
    store_dt: f64,
    /// Rest-frequency phase advanced per leapfrog step.
    omega_h: f64,
}

impl Packet {
    /// RMS speed hbar sqrt(<k^2>) / m of a Gaussian with hbar = m = 1.
    fn speed(&self) -> f64 {
        (self.k0 * self.k0 + 1.0 / (4.0 * self.sigma * self.sigma)).sqrt()
    }

    fn grid(&self) -> SpacetimeGrid {
        let nx = (self.length / self.dx).round() as usize;
        let nt = (self.t_end / self.store_dt).round() as usize + 1;
        SpacetimeGrid::periodic(nx, self.length, -self.length / 2.0, nt, self.store_dt).unwrap()
    }

    fn params(&self, speed_ratio: f64) -> PhysParams {
        PhysParams::new(1.0, self.speed() / speed_ratio, 1.0, 1.0).unwrap()
    }

    fn initial(&self, g: &SpacetimeGrid) -> Vec<num_complex::Complex64> {
        packets::gaussian(&g.xs(), -self.k0 * self.t_end / 2.0, self.sigma, self.k0)
    }

    fn kg(&self, p: &PhysParams) -> KGSolution {
        let g = self.grid();
        let a = Potentials::zero(g);
        let substeps = (p.rest_frequency() * self.store_dt / self.omega_h).ceil() as usize;
        let init = KGInitialData::from_schrodinger(self.initial(&g), &a, p, g.dx).unwrap();
        let opts = KgOptions {
            substeps,
            ..Default::default()
        };
        evolve_kg_with(&init, &a, p, &g, &opts).unwrap()
    }
}

#[test]
fn schrodinger_limit_discrepancy_scales_with_speed_squared() {
    let packet = Packet {
        sigma: 1.0,
        k0: 1.0,
        length: 24.0,
        dx: 0.2,
        t_end: 2.0,
        store_dt: 0.01,
        omega_h: 0.005,
    };
    let g = packet.grid();
    let mut distances = Vec::new();
    for ratio in [0.04, 0.02, 0.01] {
        let p = packet.params(ratio);
        let kg = packet.kg(&p);
        let s = evolve_schrodinger_with(
            &packet.initial(&g),
            &Potentials::zero(g),
            &p,
            &g,
            &SchrodingerOptions { substeps: 20 },
        )
        .unwrap();
        let report = low_speed_compare(&kg, &s, NodeThreshold::default()).unwrap();
        println!(
            "v/c {ratio}: density {:.3e} phase {:.3e} dropped {:.3e} quantum {:.3e}",
            report.max_density_distance,
            report.max_phase_distance,
            report.dropped_time_term_max,
            report.quantum_term_max
        );
        assert!(report.dropped_time_term_max < 0.05 * report.quantum_term_max);
        distances.push(report.max_density_distance);
    }
    assert!(distances.windows(2).all(|w| w[1] < w[0]));
    assert!(distances[2] <= 0.01);
    let ratio = distances[1] / distances[2];
    assert!((2.0..=8.0).contains(&ratio), "ratio {ratio}");
}

fn lowspeed_condition(packet: &Packet, speed_ratio: f64) -> (f64, f64) {
    let p = packet.params(speed_ratio);
    let kg = packet.kg(&p);
    let g = *kg.grid();
    let a = Potentials::zero(g);
    let md = decompose_with_carrier(&kg.psi, p.hbar, NodeThreshold::default(), p.rest_frequency()).unwrap();
    let opts = HiddenPhaseOptions {
        periodic: true,
        ..Default::default()
    };
    let hp = solve_phi_with(&md, &a, &p, &vec![0.0; g.nx], &opts).unwrap();
    let ks = velocity_field(&md, &hp, &a, &p).unwrap();
    let r = lowspeed_phi_residual(&md, &hp, &a, &p).unwrap();
    let q = quantum_potential(&md.rho, &hp.excluded, &p).unwrap();

    let floor = 1e-3 * md.rho.max_abs();
    let (mut worst, mut q_max, mut v_max) = (0.0f64, 0.0f64, 0.0f64);
    for n in 2..g.nt - 2 {
        for i in 0..g.nx {
            let k = g.index(n, i);
            if md.rho.values()[k] < floor {
                continue;
            }
            worst = worst.max(r.values()[k].abs());
            q_max = q_max.max(q.values()[k].abs());
            let speed = p.c * ks.v.space.values()[k] / ks.v.time.values()[k];
            v_max = v_max.max(speed.abs());
        }
    }
    (worst / q_max, v_max / p.c)
}

#[test]
fn relativistic_hidden_phase_obeys_low_speed_equation() {
    let packet = Packet {
        sigma: 2.0,
        k0: 0.25,
        length: 32.0,
        dx: 0.1,
        t_end: 1.0,
        store_dt: 0.01,
        omega_h: 0.0005,
    };
    let (fast, fast_speed) = lowspeed_condition(&packet, 0.04);
    let (slow, slow_speed) = lowspeed_condition(&packet, 0.02);
    println!("relative residual {fast:.3e} at max|v|/c {fast_speed:.4}, {slow:.3e} at {slow_speed:.4}");
    assert!(slow_speed <= 0.02);
    for (resid, beta) in [(fast, fast_speed), (slow, slow_speed)] {
        assert!(resid <= 6.0 * beta * beta, "{resid} vs (v/c)^2 = {}", beta * beta);
    }
    assert!(fast / slow > 2.0);
}
