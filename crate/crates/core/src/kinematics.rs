//! Pointwise kinematics of analytic 3-D flows.
//!
//! A flow supplies its velocity together with analytic first and second
//! derivatives. From them come the analog potentials `a0 = -c^2 - v^2/2`,
//! `a = -c v`, the fields `e = -(1/c) a_t - grad a0` and `h = curl a`, and
//! the residuals of the homogeneous Maxwell pair. Actions are checked
//! against the relativistic and low-speed Hamilton-Jacobi equations.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::params::PhysParams;

pub type Vec3 = [f64; 3];
pub type Mat3 = [[f64; 3]; 3];

fn dot(a: &Vec3, b: &Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn cross(a: &Vec3, b: &Vec3) -> Vec3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn norm(a: &Vec3) -> f64 {
    dot(a, a).sqrt()
}

/// Curl from a gradient matrix `d[i][j] = d_j f_i`.
fn curl(d: &Mat3) -> Vec3 {
    [d[2][1] - d[1][2], d[0][2] - d[2][0], d[1][0] - d[0][1]]
}

/// Velocity and its derivatives at one event.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FlowJet {
    pub v: Vec3,
    pub v_t: Vec3,
    /// `dv[i][j] = d_j v_i`.
    pub dv: Mat3,
    /// `dv_t[i][j] = d_t d_j v_i`.
    pub dv_t: Mat3,
    /// `d2v[i][j][k] = d_j d_k v_i`.
    pub d2v: [Mat3; 3],
}

pub trait AnalyticFlow: Sync {
    fn name(&self) -> &str;
    fn jet(&self, t: f64, r: Vec3) -> FlowJet;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalogFields {
    pub a0: f64,
    pub a: Vec3,
    pub e: Vec3,
    pub h: Vec3,
}

pub fn analog_fields(jet: &FlowJet, p: &PhysParams) -> AnalogFields {
    let c = p.c;
    let v = jet.v;
    let a0 = -c * c - dot(&v, &v) / 2.0;
    let a = v.map(|x| -c * x);
    // -(1/c) d_t(-c v) - grad(-v^2/2)
    let mut e = jet.v_t;
    for (j, ej) in e.iter_mut().enumerate() {
        *ej += (0..3).map(|k| v[k] * jet.dv[k][j]).sum::<f64>();
    }
    let h = curl(&jet.dv).map(|x| -c * x);
    AnalogFields { a0, a, e, h }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaxwellResiduals {
    pub div_h: f64,
    /// `curl e + (1/c) d_t h`.
    pub faraday: Vec3,
}

impl MaxwellResiduals {
    pub fn max_abs(&self) -> f64 {
        self.faraday.iter().fold(self.div_h.abs(), |m, x| m.max(x.abs()))
    }
}

pub fn maxwell_analog_residuals(jet: &FlowJet, p: &PhysParams) -> MaxwellResiduals {
    let c = p.c;
    // h_i = -c eps_ijk d_j v_k
    let div_h = -c
        * ((jet.d2v[2][0][1] - jet.d2v[1][0][2])
            + (jet.d2v[0][1][2] - jet.d2v[2][1][0])
            + (jet.d2v[1][2][0] - jet.d2v[0][2][1]));
    // de[k][j] = d_j e_k = d_t d_j v_k + sum_l (d_j v_l d_k v_l + v_l d_j d_k v_l)
    let mut de = [[0.0; 3]; 3];
    for (k, row) in de.iter_mut().enumerate() {
        for (j, entry) in row.iter_mut().enumerate() {
            *entry = jet.dv_t[k][j]
                + (0..3)
                    .map(|l| jet.dv[l][j] * jet.dv[l][k] + jet.v[l] * jet.d2v[l][j][k])
                    .sum::<f64>();
        }
    }
    let curl_e = curl(&de);
    let h_t = curl(&jet.dv_t).map(|x| -c * x);
    let faraday = [0, 1, 2].map(|i| curl_e[i] + h_t[i] / c);
    MaxwellResiduals { div_h, faraday }
}

/// `m (e + v x h / c)`, the force the analog fields exert.
pub fn analog_force(jet: &FlowJet, p: &PhysParams) -> Vec3 {
    let f = analog_fields(jet, p);
    let vxh = cross(&jet.v, &f.h);
    [0, 1, 2].map(|i| p.m * (f.e[i] + vxh[i] / p.c))
}

/// `m (d_t v + (v . grad) v)`.
pub fn convective_force(jet: &FlowJet, p: &PhysParams) -> Vec3 {
    [0, 1, 2].map(|i| p.m * (jet.v_t[i] + (0..3).map(|j| jet.v[j] * jet.dv[i][j]).sum::<f64>()))
}

/// Largest gap between the supplied derivatives and central differences of
/// the lower-order entries with step `step`, scaled by `1 + |supplied|`.
pub fn derivative_self_check(flow: &dyn AnalyticFlow, t: f64, r: Vec3, step: f64) -> f64 {
    let jet = flow.jet(t, r);
    let mut worst: f64 = 0.0;
    let mut note = |supplied: f64, probe: f64| {
        worst = worst.max((supplied - probe).abs() / (1.0 + supplied.abs()));
    };
    let tp = flow.jet(t + step, r);
    let tm = flow.jet(t - step, r);
    for i in 0..3 {
        note(jet.v_t[i], (tp.v[i] - tm.v[i]) / (2.0 * step));
        for j in 0..3 {
            note(jet.dv_t[i][j], (tp.dv[i][j] - tm.dv[i][j]) / (2.0 * step));
        }
    }
    for j in 0..3 {
        let mut rp = r;
        let mut rm = r;
        rp[j] += step;
        rm[j] -= step;
        let (jp, jm) = (flow.jet(t, rp), flow.jet(t, rm));
        for i in 0..3 {
            note(jet.dv[i][j], (jp.v[i] - jm.v[i]) / (2.0 * step));
            for k in 0..3 {
                note(jet.d2v[i][k][j], (jp.dv[i][k] - jm.dv[i][k]) / (2.0 * step));
            }
        }
    }
    worst
}

/// Deterministic probe events in `[-extent, extent]^3 x [0, t_max]`.
pub fn probe_events(count: usize, extent: f64, t_max: f64, rng_seed: u64) -> Vec<(f64, Vec3)> {
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    (0..count)
        .map(|_| {
            let t = t_max * rng.random::<f64>();
            let r = [0; 3].map(|_| extent * (2.0 * rng.random::<f64>() - 1.0));
            (t, r)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Uniform {
    pub u: Vec3,
}

impl AnalyticFlow for Uniform {
    fn name(&self) -> &str {
        "uniform"
    }

    fn jet(&self, _t: f64, _r: Vec3) -> FlowJet {
        FlowJet {
            v: self.u,
            ..Default::default()
        }
    }
}

/// v = omega x r.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidRotation {
    pub omega: Vec3,
}

/// Matrix of `r -> w x r`.
fn cross_matrix(w: &Vec3) -> Mat3 {
    [[0.0, -w[2], w[1]], [w[2], 0.0, -w[0]], [-w[1], w[0], 0.0]]
}

impl AnalyticFlow for RigidRotation {
    fn name(&self) -> &str {
        "rigid rotation"
    }

    fn jet(&self, _t: f64, r: Vec3) -> FlowJet {
        FlowJet {
            v: cross(&self.omega, &r),
            dv: cross_matrix(&self.omega),
            ..Default::default()
        }
    }
}

/// v = (k y, 0, 0).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Shear {
    pub k: f64,
}

impl AnalyticFlow for Shear {
    fn name(&self) -> &str {
        "shear"
    }

    fn jet(&self, _t: f64, r: Vec3) -> FlowJet {
        let mut dv = [[0.0; 3]; 3];
        dv[0][1] = self.k;
        FlowJet {
            v: [self.k * r[1], 0.0, 0.0],
            dv,
            ..Default::default()
        }
    }
}

/// Rotation about a fixed axis with angular speed `omega0 cos(nu t)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OscillatingRotation {
    pub axis: Vec3,
    pub omega0: f64,
    pub nu: f64,
}

impl AnalyticFlow for OscillatingRotation {
    fn name(&self) -> &str {
        "oscillating rotation"
    }

    fn jet(&self, t: f64, r: Vec3) -> FlowJet {
        let n = norm(&self.axis);
        let w = self.axis.map(|a| a / n * self.omega0 * (self.nu * t).cos());
        let w_t = self.axis.map(|a| -a / n * self.omega0 * self.nu * (self.nu * t).sin());
        FlowJet {
            v: cross(&w, &r),
            v_t: cross(&w_t, &r),
            dv: cross_matrix(&w),
            dv_t: cross_matrix(&w_t),
            ..Default::default()
        }
    }
}

/// v = grad chi with the harmonic chi = s (x^3 - 3 x y^2) + s z.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HarmonicPotentialFlow {
    pub strength: f64,
}

impl AnalyticFlow for HarmonicPotentialFlow {
    fn name(&self) -> &str {
        "harmonic potential flow"
    }

    fn jet(&self, _t: f64, r: Vec3) -> FlowJet {
        let s = self.strength;
        let [x, y, _] = r;
        let v = [3.0 * s * (x * x - y * y), -6.0 * s * x * y, s];
        let dv = [
            [6.0 * s * x, -6.0 * s * y, 0.0],
            [-6.0 * s * y, -6.0 * s * x, 0.0],
            [0.0; 3],
        ];
        let mut d2v = [[[0.0; 3]; 3]; 3];
        d2v[0][0][0] = 6.0 * s;
        d2v[0][1][1] = -6.0 * s;
        d2v[1][0][1] = -6.0 * s;
        d2v[1][1][0] = -6.0 * s;
        FlowJet {
            v,
            dv,
            d2v,
            ..Default::default()
        }
    }
}

/// Arnold-Beltrami-Childress flow with amplitudes pulsing as `1 + eps sin(nu t)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PulsingAbc {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub eps: f64,
    pub nu: f64,
}

impl AnalyticFlow for PulsingAbc {
    fn name(&self) -> &str {
        "pulsing ABC"
    }

    fn jet(&self, t: f64, r: Vec3) -> FlowJet {
        let [x, y, z] = r;
        let g = 1.0 + self.eps * (self.nu * t).sin();
        let g_t = self.eps * self.nu * (self.nu * t).cos();
        let (a, b, c) = (self.a, self.b, self.c);
        // base field w: (a sin z + c cos y, b sin x + a cos z, c sin y + b cos x)
        let w = [
            a * z.sin() + c * y.cos(),
            b * x.sin() + a * z.cos(),
            c * y.sin() + b * x.cos(),
        ];
        let dw = [
            [0.0, -c * y.sin(), a * z.cos()],
            [b * x.cos(), 0.0, -a * z.sin()],
            [-b * x.sin(), c * y.cos(), 0.0],
        ];
        let mut d2w = [[[0.0; 3]; 3]; 3];
        d2w[0][1][1] = -c * y.cos();
        d2w[0][2][2] = -a * z.sin();
        d2w[1][0][0] = -b * x.sin();
        d2w[1][2][2] = -a * z.cos();
        d2w[2][0][0] = -b * x.cos();
        d2w[2][1][1] = -c * y.sin();
        let scale = |m: &Mat3, s: f64| m.map(|row| row.map(|x| s * x));
        FlowJet {
            v: w.map(|x| g * x),
            v_t: w.map(|x| g_t * x),
            dv: scale(&dw, g),
            dv_t: scale(&dw, g_t),
            d2v: [scale(&d2w[0], g), scale(&d2w[1], g), scale(&d2w[2], g)],
        }
    }
}

/// Particles released from rest in an isotropic oscillator:
/// v = -omega tan(omega t) r, valid for omega t < pi/2.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OscillatorRelease {
    pub omega: f64,
}

impl AnalyticFlow for OscillatorRelease {
    fn name(&self) -> &str {
        "oscillator release"
    }

    fn jet(&self, t: f64, r: Vec3) -> FlowJet {
        let w = self.omega;
        let k = -w * (w * t).tan();
        let k_t = -w * w / (w * t).cos().powi(2);
        let diag = |s: f64| [[s, 0.0, 0.0], [0.0, s, 0.0], [0.0, 0.0, s]];
        FlowJet {
            v: r.map(|x| k * x),
            v_t: r.map(|x| k_t * x),
            dv: diag(k),
            dv_t: diag(k_t),
            ..Default::default()
        }
    }
}

/// The built-in flows, each smooth on the probe box used by the tests.
pub fn catalog() -> Vec<Box<dyn AnalyticFlow>> {
    vec![
        Box::new(Uniform { u: [0.3, -0.1, 0.2] }),
        Box::new(RigidRotation {
            omega: [0.2, -0.5, 1.1],
        }),
        Box::new(Shear { k: 0.7 }),
        Box::new(OscillatingRotation {
            axis: [1.0, 2.0, -0.5],
            omega0: 0.8,
            nu: 1.3,
        }),
        Box::new(HarmonicPotentialFlow { strength: 0.4 }),
        Box::new(PulsingAbc {
            a: 1.0,
            b: 0.7,
            c: 0.4,
            eps: 0.3,
            nu: 2.0,
        }),
        Box::new(OscillatorRelease { omega: 0.9 }),
    ]
}

/// A classical action with its first derivatives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActionJet {
    pub phi: f64,
    pub phi_t: f64,
    pub grad: Vec3,
}

pub trait ActionField: Sync {
    fn name(&self) -> &str;
    fn eval(&self, t: f64, r: Vec3) -> ActionJet;
}

/// Analytic four-potential: scalar potential V and vector potential A.
pub trait FourPotential: Sync {
    fn eval(&self, t: f64, r: Vec3) -> (f64, Vec3);
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct NoField;

impl FourPotential for NoField {
    fn eval(&self, _t: f64, _r: Vec3) -> (f64, Vec3) {
        (0.0, [0.0; 3])
    }
}

/// q V = m omega^2 r^2 / 2.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OscillatorWell {
    pub omega: f64,
    pub params: PhysParams,
}

impl FourPotential for OscillatorWell {
    fn eval(&self, _t: f64, r: Vec3) -> (f64, Vec3) {
        let p = &self.params;
        (0.5 * p.m * self.omega * self.omega * dot(&r, &r) / p.q, [0.0; 3])
    }
}

/// Uniform magnetic field along z in the symmetric gauge, A = B (-y, x, 0) / 2.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UniformMagnetic {
    pub b: f64,
}

impl FourPotential for UniformMagnetic {
    fn eval(&self, _t: f64, r: Vec3) -> (f64, Vec3) {
        (0.0, [-0.5 * self.b * r[1], 0.5 * self.b * r[0], 0.0])
    }
}

/// phi = -E t + p . r (+ offset).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlaneAction {
    pub energy: f64,
    pub momentum: Vec3,
    pub offset: f64,
}

impl PlaneAction {
    /// E = sqrt(p^2 c^2 + m^2 c^4).
    pub fn relativistic(momentum: Vec3, p: &PhysParams) -> Self {
        let c = p.c;
        Self {
            energy: (dot(&momentum, &momentum) * c * c + p.m * p.m * c.powi(4)).sqrt(),
            momentum,
            offset: 0.0,
        }
    }

    /// E = m c^2 + p^2 / 2m.
    pub fn low_speed(momentum: Vec3, p: &PhysParams) -> Self {
        Self {
            energy: p.m * p.c * p.c + dot(&momentum, &momentum) / (2.0 * p.m),
            momentum,
            offset: 0.0,
        }
    }
}

impl ActionField for PlaneAction {
    fn name(&self) -> &str {
        "plane action"
    }

    fn eval(&self, t: f64, r: Vec3) -> ActionJet {
        ActionJet {
            phi: -self.energy * t + dot(&self.momentum, &r) + self.offset,
            phi_t: -self.energy,
            grad: self.momentum,
        }
    }
}

/// phi = -m c^2 t - (m omega / 2) r^2 tan(omega t): particles at rest at
/// t = 0 in the well [`OscillatorWell`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OscillatorAction {
    pub omega: f64,
    pub params: PhysParams,
}

impl ActionField for OscillatorAction {
    fn name(&self) -> &str {
        "oscillator action"
    }

    fn eval(&self, t: f64, r: Vec3) -> ActionJet {
        let (m, c, w) = (self.params.m, self.params.c, self.omega);
        let r2 = dot(&r, &r);
        let tan = (w * t).tan();
        let sec2 = 1.0 / (w * t).cos().powi(2);
        ActionJet {
            phi: -m * c * c * t - 0.5 * m * w * r2 * tan,
            phi_t: -m * c * c - 0.5 * m * w * w * r2 * sec2,
            grad: r.map(|x| -m * w * tan * x),
        }
    }
}

/// (d^mu phi + (q/c) A^mu)(d_mu phi + (q/c) A_mu) - m^2 c^2 with x^0 = c t.
pub fn rel_hj_residual(act: &dyn ActionField, a: &dyn FourPotential, t: f64, r: Vec3, p: &PhysParams) -> f64 {
    let j = act.eval(t, r);
    let (v, av) = a.eval(t, r);
    let (c, q) = (p.c, p.q);
    let w0 = (j.phi_t + q * v) / c;
    let w = [0, 1, 2].map(|i| j.grad[i] - q / c * av[i]);
    w0 * w0 - dot(&w, &w) - p.m * p.m * c * c
}

/// d_t phi + (grad phi - (q/c) A)^2 / 2m + q V + m c^2.
pub fn nonrel_hj_residual(act: &dyn ActionField, a: &dyn FourPotential, t: f64, r: Vec3, p: &PhysParams) -> f64 {
    let j = act.eval(t, r);
    let (v, av) = a.eval(t, r);
    let (c, q) = (p.c, p.q);
    let w = [0, 1, 2].map(|i| j.grad[i] - q / c * av[i]);
    j.phi_t + dot(&w, &w) / (2.0 * p.m) + q * v + p.m * c * c
}
