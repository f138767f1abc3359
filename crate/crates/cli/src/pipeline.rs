//! Stage execution. Every stage reads what earlier stages left in `Run`
//! and records its summary numbers in the manifest.

use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use num_complex::Complex64;

use kglab_core::hidden_phase::{
    creation_rate, euler_residual, mass_shell_residual, phi_condition_residual, solve_phi_with, velocity_field, Branch,
    HiddenPhase, HiddenPhaseOptions, KineticState,
};
use kglab_core::kg::{
    evolve_kg_with, noether_current, relative_drift, total_charge, Boundary, KGInitialData, KGSolution, KgOptions,
};
use kglab_core::kinematics::{
    analog_force, catalog, convective_force, derivative_self_check, maxwell_analog_residuals, nonrel_hj_residual,
    probe_events, rel_hj_residual, NoField, OscillatorAction, OscillatorWell, PlaneAction,
};
use kglab_core::madelung::{decompose, decompose_with_carrier, hj_quantum_residual, MadelungData, NodeThreshold};
use kglab_core::norms::{and_mask, interior_mask};
use kglab_core::packets::{self, Mode};
use kglab_core::schrodinger::{
    corrected_flow, evolve_schrodinger_with, fluid_residuals, fluid_state, low_speed_compare, newton_lorentz_residual,
    solve_lowspeed_phi_with, sourced_continuity_residual, FluidState, SchrodingerOptions, SchrodingerSolution,
};
use kglab_core::trajectories::{
    integrate, sample_seeds, DensityCdf, GuidanceField, TrajectoryEnsemble, TrajectoryOptions,
};
use kglab_core::{LabError, PhysParams, Potentials, ScalarField, SpacetimeGrid};

use crate::error::CliError;
use crate::output::{field_csv, sha256_hex, table_csv, trajectories_csv, Cell, Manifest};
use crate::scenario::{Artifact, BoundarySpec, BranchSpec, InitialSpec, PotentialSpec, Scenario, Stage};

pub const MANIFEST_FILE: &str = "manifest.toml";
/// Environment variable naming the default output root.
pub const OUT_DIR_ENV: &str = "KGLAB_OUT_DIR";
pub const DEFAULT_OUT_DIR: &str = "kglab-out";
/// Residual maxima in the manifest are taken where rho is at least this
/// fraction of its peak. Further out the quantum potential grows like
/// x^2 and its truncation error swamps the table.
pub const SUMMARY_DENSITY_FLOOR: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ToleranceProfile {
    #[default]
    Default,
    Strict,
}

impl FromStr for ToleranceProfile {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "default" => Ok(Self::Default),
            "strict" => Ok(Self::Strict),
            other => Err(format!("unknown tolerance profile `{other}` (default|strict)")),
        }
    }
}

/// Bounds on the quantities that are exact up to round-off; truncation
/// errors are reported but not checked.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    pub charge_drift: f64,
    pub norm_drift: f64,
    /// Relative, |v^mu v_mu - c^2| / c^2.
    pub mass_shell: f64,
    pub maxwell: f64,
}

impl ToleranceProfile {
    pub fn name(self) -> &'static str {
        match self {
            Self::Default => "default",
            Self::Strict => "strict",
        }
    }

    pub fn tolerances(self) -> Tolerances {
        match self {
            Self::Default => Tolerances {
                charge_drift: 1e-6,
                norm_drift: 1e-6,
                mass_shell: 1e-8,
                maxwell: 1e-10,
            },
            Self::Strict => Tolerances {
                charge_drift: 1e-9,
                norm_drift: 1e-9,
                mass_shell: 1e-12,
                maxwell: 1e-12,
            },
        }
    }
}

/// Output root: the explicit flag, else the environment, else `kglab-out`.
pub fn resolve_out_root(flag: Option<PathBuf>) -> PathBuf {
    flag.or_else(|| {
        std::env::var_os(OUT_DIR_ENV)
            .filter(|v| !v.is_empty())
            .map(PathBuf::from)
    })
    .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Source {
    Kg,
    Schrodinger,
}

/// What a finished run leaves behind.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub dir: PathBuf,
    pub manifest: Manifest,
    pub failed_checks: Vec<String>,
}

struct Run<'a> {
    sc: &'a Scenario,
    p: PhysParams,
    g: SpacetimeGrid,
    a: Potentials,
    psi0: Vec<Complex64>,
    kg: Option<KGSolution>,
    schr: Option<SchrodingerSolution>,
    md: Option<(MadelungData, Source)>,
    hp: Option<(HiddenPhase, Option<KineticState>)>,
    fluid: Option<FluidState>,
    te: Option<TrajectoryEnsemble>,
    residual_table: Option<String>,
    lowspeed_table: Option<String>,
    kinematics_table: Option<String>,
    manifest: Manifest,
    warnings: Vec<String>,
    checks: Vec<(String, f64, f64)>,
    tolerances: Tolerances,
}

fn stage_err(stage: Stage) -> impl Fn(LabError) -> CliError {
    move |e| CliError::from_stage(stage, e)
}

fn load_psi_file(path: &Path, g: &SpacetimeGrid) -> Result<Vec<Complex64>, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Invalid(format!("initial: cannot read {}: {e}", path.display())))?;
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines.next().unwrap_or_default();
    if header.replace(' ', "") != "x,re,im" {
        return Err(CliError::Parse(format!(
            "{}: line 1: expected header `x,re,im`",
            path.display()
        )));
    }
    let mut psi = Vec::with_capacity(g.nx);
    for (i, line) in lines.enumerate() {
        let cols: Vec<&str> = line.split(',').map(str::trim).collect();
        let parse = |s: &str| s.parse::<f64>().ok();
        match cols.as_slice() {
            [_, re, im] => match (parse(re), parse(im)) {
                (Some(re), Some(im)) => psi.push(Complex64::new(re, im)),
                _ => {
                    return Err(CliError::Parse(format!(
                        "{}: line {}: bad number",
                        path.display(),
                        i + 2
                    )))
                }
            },
            _ => {
                return Err(CliError::Parse(format!(
                    "{}: line {}: expected 3 columns",
                    path.display(),
                    i + 2
                )))
            }
        }
    }
    if psi.len() != g.nx {
        return Err(CliError::Invalid(format!(
            "initial: {} has {} rows for nx = {}",
            path.display(),
            psi.len(),
            g.nx
        )));
    }
    Ok(psi)
}

fn initial_psi(spec: &InitialSpec, g: &SpacetimeGrid) -> Result<Vec<Complex64>, CliError> {
    let xs = g.xs();
    Ok(match spec {
        InitialSpec::PlaneWave { k } => packets::plane_wave(&xs, *k),
        InitialSpec::Gaussian { x0, sigma, k } => packets::gaussian(&xs, *x0, *sigma, *k),
        InitialSpec::Superposition { modes } => packets::superposition(&xs, &modes_of(modes)),
        InitialSpec::File { path } => load_psi_file(path, g)?,
    })
}

fn modes_of(modes: &[crate::scenario::ModeSpec]) -> Vec<Mode> {
    modes
        .iter()
        .map(|m| Mode {
            amplitude: m.amplitude,
            k: m.k,
        })
        .collect()
}

fn potentials(spec: &PotentialSpec, g: SpacetimeGrid, p: &PhysParams) -> Result<Potentials, CliError> {
    Ok(match spec {
        PotentialSpec::Zero => Potentials::zero(g),
        PotentialSpec::UniformE { e0 } => Potentials::uniform_field(g, *e0, p),
        PotentialSpec::Table { values } => {
            Potentials::static_scalar(g, values).map_err(|e| CliError::Invalid(format!("potential: {e}")))?
        }
    })
}

/// RMS speed hbar sqrt(<k^2>) / m of a lattice wave function, with <k^2>
/// the discrete kinetic energy of the 3-point Laplacian.
pub fn rms_speed(psi: &[Complex64], dx: f64, p: &PhysParams) -> f64 {
    let n = psi.len();
    let grad: f64 = (0..n).map(|i| (psi[(i + 1) % n] - psi[i]).norm_sqr()).sum::<f64>() / (dx * dx);
    let norm: f64 = psi.iter().map(|z| z.norm_sqr()).sum();
    p.hbar / p.m * (grad / norm).sqrt()
}

fn max_where(f: &ScalarField, mask: &[bool]) -> f64 {
    f.values()
        .iter()
        .zip(mask)
        .filter(|(_, &m)| m)
        .map(|(v, _)| v.abs())
        .fold(0.0, f64::max)
}

fn slice_max(f: &ScalarField, mask: &[bool], n: usize) -> f64 {
    let g = f.grid();
    let row = g.index(n, 0);
    max_where_slice(f.slice(n), &mask[row..row + g.nx])
}

fn max_where_slice(v: &[f64], mask: &[bool]) -> f64 {
    v.iter()
        .zip(mask)
        .filter(|(_, &m)| m)
        .map(|(v, _)| v.abs())
        .fold(0.0, f64::max)
}

fn indicator(g: &SpacetimeGrid, mask: &[bool]) -> ScalarField {
    let mut f = ScalarField::zeros(*g);
    for (v, &b) in f.values_mut().iter_mut().zip(mask) {
        *v = f64::from(u8::from(b));
    }
    f
}

fn dense_mask(rho: &ScalarField, excluded: &[bool]) -> Vec<bool> {
    let g = *rho.grid();
    let floor = SUMMARY_DENSITY_FLOOR * rho.max_abs();
    let keep: Vec<bool> = rho
        .values()
        .iter()
        .zip(excluded)
        .map(|(&r, &x)| !x && r >= floor)
        .collect();
    and_mask(&interior_mask(&g, 2), &keep)
}

impl<'a> Run<'a> {
    fn new(sc: &'a Scenario, tolerances: Tolerances) -> Result<Self, CliError> {
        let p = sc.physics.params()?;
        let g = sc.grid.build(&p)?;
        let a = potentials(&sc.potential, g, &p)?;
        let psi0 = initial_psi(&sc.initial, &g)?;
        Ok(Self {
            sc,
            p,
            g,
            a,
            psi0,
            kg: None,
            schr: None,
            md: None,
            hp: None,
            fluid: None,
            te: None,
            residual_table: None,
            lowspeed_table: None,
            kinematics_table: None,
            manifest: Manifest::default(),
            warnings: Vec::new(),
            checks: Vec::new(),
            tolerances,
        })
    }

    fn check(&mut self, name: &str, value: f64, bound: f64) {
        self.checks.push((name.to_string(), value, bound));
    }

    fn kg_init(&self, p: &PhysParams, a: &Potentials) -> Result<KGInitialData, LabError> {
        let xs = self.g.xs();
        match &self.sc.initial {
            InitialSpec::PlaneWave { k } => KGInitialData::free_modes(&xs, &[Mode { amplitude: 1.0, k: *k }], p),
            InitialSpec::Superposition { modes } => KGInitialData::free_modes(&xs, &modes_of(modes), p),
            _ => KGInitialData::from_schrodinger(self.psi0.clone(), a, p, self.g.dx),
        }
    }

    fn stage(&mut self, stage: Stage) -> Result<(), CliError> {
        match stage {
            Stage::Kg => self.run_kg(),
            Stage::Schrodinger => self.run_schrodinger(),
            Stage::Madelung => self.run_madelung(),
            Stage::HiddenPhase => self.run_hidden_phase(),
            Stage::Trajectories => self.run_trajectories(),
            Stage::ResidualSuite => self.run_residuals(),
            Stage::LowSpeedCompare => self.run_lowspeed(),
            Stage::KinematicsSuite => self.run_kinematics(),
        }
    }

    fn run_kg(&mut self) -> Result<(), CliError> {
        let err = stage_err(Stage::Kg);
        let opts = KgOptions {
            boundary: match self.sc.kg.boundary {
                BoundarySpec::Periodic => Boundary::Periodic,
                BoundarySpec::Clamped => Boundary::Clamped,
            },
            substeps: self.sc.kg.substeps_for(&self.p, self.g.dt),
            ..KgOptions::default()
        };
        let init = self.kg_init(&self.p, &self.a).map_err(&err)?;
        let sol = evolve_kg_with(&init, &self.a, &self.p, &self.g, &opts).map_err(&err)?;
        let m = &mut self.manifest;
        m.set("parameters", "kg_boundary", sol.scheme.boundary.name());
        m.set("parameters", "kg_substeps", sol.scheme.substeps);
        m.set("parameters", "kg_cfl", sol.scheme.cfl);
        m.set("parameters", "kg_rest_phase_per_step", sol.scheme.rest_phase_per_step);
        m.set("residuals", "lorentz_condition_max", sol.scheme.lorentz_residual_max);
        self.warnings
            .extend(sol.scheme.warnings.iter().map(|w| format!("kg: {w}")));
        self.kg = Some(sol);
        Ok(())
    }

    fn run_schrodinger(&mut self) -> Result<(), CliError> {
        let opts = SchrodingerOptions {
            substeps: self.sc.schrodinger.substeps,
        };
        let sol = evolve_schrodinger_with(&self.psi0, &self.a, &self.p, &self.g, &opts)
            .map_err(stage_err(Stage::Schrodinger))?;
        self.manifest.set("parameters", "schrodinger_substeps", sol.substeps);
        self.warnings
            .extend(sol.warnings.iter().map(|w| format!("schrodinger: {w}")));
        self.schr = Some(sol);
        Ok(())
    }

    /// Decomposes the Klein-Gordon field when there is one, else the
    /// Schrodinger field.
    fn run_madelung(&mut self) -> Result<(), CliError> {
        let err = stage_err(Stage::Madelung);
        let threshold = NodeThreshold::default();
        let (md, source) = match (&self.kg, &self.schr) {
            (Some(kg), _) => {
                let md =
                    decompose_with_carrier(&kg.psi, self.p.hbar, threshold, self.p.rest_frequency()).map_err(&err)?;
                (md, Source::Kg)
            }
            (None, Some(s)) => (
                decompose(&s.psi, self.p.hbar, threshold).map_err(&err)?,
                Source::Schrodinger,
            ),
            (None, None) => unreachable!("validated pipeline"),
        };
        let m = &mut self.manifest;
        m.set(
            "parameters",
            "madelung_source",
            if source == Source::Kg { "kg" } else { "schrodinger" },
        );
        m.set("parameters", "node_threshold", md.eps_rho);
        m.set("residuals", "node_points", md.node_mask.iter().filter(|&&n| n).count());
        m.set("residuals", "phase_reanchors", md.reanchors.len());
        if source == Source::Schrodinger {
            self.fluid = Some(fluid_state(&md, &self.a, &self.p, true).map_err(&err)?);
        }
        self.md = Some((md, source));
        Ok(())
    }

    fn run_hidden_phase(&mut self) -> Result<(), CliError> {
        let err = stage_err(Stage::HiddenPhase);
        let (md, source) = self.md.as_ref().expect("validated pipeline");
        let opts = HiddenPhaseOptions {
            branch: match self.sc.hidden_phase.branch {
                BranchSpec::Positive => Branch::Positive,
                BranchSpec::Negative => Branch::Negative,
            },
            periodic: true,
            min_density: self.sc.hidden_phase.min_density,
            ..HiddenPhaseOptions::default()
        };
        let phi0 = vec![0.0; self.g.nx];
        let m = &mut self.manifest;
        m.set("parameters", "hidden_phase_min_density", opts.min_density);
        match source {
            Source::Kg => {
                let hp = solve_phi_with(md, &self.a, &self.p, &phi0, &opts).map_err(&err)?;
                let ks = velocity_field(md, &hp, &self.a, &self.p).map_err(&err)?;
                if let Some(r) = &hp.residual_report {
                    m.set("residuals", "phi_regions_max", r.max_regions);
                    m.set("residuals", "phi_split_slices", r.split_slices.len());
                }
                m.set("residuals", "off_shell_points", ks.off_shell_points);
                self.hp = Some((hp, Some(ks)));
            }
            Source::Schrodinger => {
                let fluid = self.fluid.as_ref().expect("set with the madelung stage");
                let hp = solve_lowspeed_phi_with(fluid, &md.rho, &self.p, &phi0, &opts).map_err(&err)?;
                self.fluid = Some(corrected_flow(fluid, &hp, &self.p).map_err(&err)?);
                self.hp = Some((hp, None));
            }
        }
        Ok(())
    }

    fn run_trajectories(&mut self) -> Result<(), CliError> {
        let err = stage_err(Stage::Trajectories);
        let (md, source) = self.md.as_ref().expect("validated pipeline");
        let field = match (source, &self.hp) {
            (Source::Kg, Some((hp, Some(ks)))) => GuidanceField::relativistic(ks, hp, &self.p),
            (Source::Kg, _) => {
                let hp = HiddenPhase::forced(ScalarField::zeros(self.g), md).map_err(&err)?;
                let ks = velocity_field(md, &hp, &self.a, &self.p).map_err(&err)?;
                GuidanceField::relativistic(&ks, &hp, &self.p)
            }
            (Source::Schrodinger, _) => GuidanceField::low_speed(self.fluid.as_ref().expect("set with madelung")),
        }
        .map_err(&err)?;
        let cdf = DensityCdf::from_slice(&md.rho, 0, true).map_err(&err)?;
        let seeds = sample_seeds(&cdf, self.sc.trajectories.count, self.sc.rng_seed);
        let opts = TrajectoryOptions {
            substeps: self.sc.trajectories.substeps,
            periodic: true,
        };
        let te = integrate(&field, &seeds, &self.g, &opts).map_err(&err)?;
        let m = &mut self.manifest;
        m.set("parameters", "trajectory_count", te.len());
        m.set("parameters", "trajectory_substeps", opts.substeps);
        m.set("residuals", "trajectories_truncated", te.truncated_count());
        m.set("residuals", "trajectory_crossings_final", te.crossings(self.g.nt - 1));
        self.te = Some(te);
        Ok(())
    }

    fn run_residuals(&mut self) -> Result<(), CliError> {
        let err = stage_err(Stage::ResidualSuite);
        let tol = self.tolerances;
        let g = self.g;
        let mut cols: Vec<(&'static str, Vec<f64>)> = vec![("t", g.ts())];

        if let Some(kg) = &self.kg {
            let q = total_charge(&noether_current(kg).map_err(&err)?, kg.scheme.boundary).map_err(&err)?;
            let drift = relative_drift(&q);
            self.manifest.set("residuals", "charge_drift", drift);
            if kg.scheme.boundary == Boundary::Periodic {
                self.checks.push(("charge_drift".into(), drift, tol.charge_drift));
            }
            cols.push(("charge", q));
        }
        if let Some(s) = &self.schr {
            let norms = s.norms();
            let drift = relative_drift(&norms);
            self.manifest.set("residuals", "norm_drift", drift);
            self.checks.push(("norm_drift".into(), drift, tol.norm_drift));
            cols.push(("norm", norms));
        }

        if let Some((md, source)) = &self.md {
            let excluded = match &self.hp {
                Some((hp, _)) => hp.excluded.clone(),
                None => md.node_mask.clone(),
            };
            let mask = dense_mask(&md.rho, &excluded);
            let per_slice = |f: &ScalarField| (0..g.nt).map(|n| slice_max(f, &mask, n)).collect::<Vec<f64>>();
            let mut fields: Vec<(&'static str, ScalarField)> = Vec::new();
            match source {
                Source::Kg => {
                    fields.push(("hj_quantum", hj_quantum_residual(md, &self.a, &self.p).map_err(&err)?));
                    if let Some((hp, Some(ks))) = &self.hp {
                        let shell = mass_shell_residual(ks, &self.p).scale(1.0 / (self.p.c * self.p.c));
                        let (lhs, rhs) = creation_rate(md, hp, ks, &self.p).map_err(&err)?;
                        let euler = euler_residual(md, ks, &self.a, hp, &self.p).map_err(&err)?;
                        fields.push(("mass_shell", shell));
                        fields.push((
                            "phi_condition",
                            phi_condition_residual(md, hp, ks, &self.p).map_err(&err)?,
                        ));
                        fields.push(("creation_gap", lhs.sub(&rhs).map_err(&err)?));
                        fields.push(("euler_time", euler.time));
                        fields.push(("euler_space", euler.space));
                    }
                }
                Source::Schrodinger => {
                    let fluid = self.fluid.as_ref().expect("set with madelung");
                    let fr = fluid_residuals(md, fluid, &self.p).map_err(&err)?;
                    fields.push(("fluid_momentum", fr.momentum));
                    fields.push(("fluid_continuity", fr.continuity));
                    if let Some((hp, _)) = &self.hp {
                        fields.push(("newton_lorentz", newton_lorentz_residual(fluid, &self.p).map_err(&err)?));
                        fields.push((
                            "sourced_continuity",
                            sourced_continuity_residual(fluid, md, hp, &self.p).map_err(&err)?,
                        ));
                    }
                }
            }
            for (name, f) in &fields {
                let max = max_where(f, &mask);
                self.manifest.set("residuals", &format!("{name}_max"), max);
                if *name == "mass_shell" {
                    self.checks.push(("mass_shell".into(), max, tol.mass_shell));
                }
                cols.push((name, per_slice(f)));
            }
        }

        let header: Vec<&str> = cols.iter().map(|(n, _)| *n).collect();
        let rows: Vec<Vec<Cell>> = (0..g.nt)
            .map(|n| cols.iter().map(|(_, c)| Cell::Float(c[n])).collect())
            .collect();
        self.residual_table = Some(table_csv(&header, &rows));
        Ok(())
    }

    /// Without a `[lowspeed]` section this compares the two solutions already
    /// in hand; with one it reruns both at `c = v / ratio` for every ratio.
    fn run_lowspeed(&mut self) -> Result<(), CliError> {
        let err = stage_err(Stage::LowSpeedCompare);
        let v = rms_speed(&self.psi0, self.g.dx, &self.p);
        self.manifest.set("parameters", "rms_speed", v);
        let mut cases: Vec<(f64, KGSolution, SchrodingerSolution)> = Vec::new();
        match &self.sc.lowspeed {
            None => {
                let (kg, s) = (
                    self.kg.clone().expect("validated"),
                    self.schr.clone().expect("validated"),
                );
                cases.push((v / self.p.c, kg, s));
            }
            Some(ls) => {
                let mut ratios = ls.speed_ratios.clone();
                ratios.sort_by(|a, b| b.total_cmp(a));
                for ratio in ratios {
                    let p = PhysParams::new(self.p.hbar, v / ratio, self.p.m, self.p.q).map_err(&err)?;
                    let a = potentials(&self.sc.potential, self.g, &p)?;
                    let substeps = ((p.rest_frequency() * self.g.dt / ls.omega_h).ceil() as usize).max(1);
                    let init = self.kg_init(&p, &a).map_err(&err)?;
                    let kg = evolve_kg_with(
                        &init,
                        &a,
                        &p,
                        &self.g,
                        &KgOptions {
                            substeps,
                            ..KgOptions::default()
                        },
                    )
                    .map_err(&err)?;
                    let opts = SchrodingerOptions {
                        substeps: ls.schrodinger_substeps,
                    };
                    let s = evolve_schrodinger_with(&self.psi0, &a, &p, &self.g, &opts).map_err(&err)?;
                    cases.push((ratio, kg, s));
                }
            }
        }
        let header = [
            "v_over_c",
            "c",
            "density_discrepancy",
            "phase_discrepancy",
            "hj_residual",
            "dropped_time_term",
            "quantum_term",
        ];
        let mut rows = Vec::new();
        for (ratio, kg, s) in &cases {
            let r = low_speed_compare(kg, s, NodeThreshold::default()).map_err(&err)?;
            let key = format!("v_over_c_{ratio}");
            self.manifest
                .set("lowspeed", &format!("{key}_density"), r.max_density_distance);
            self.manifest
                .set("lowspeed", &format!("{key}_phase"), r.max_phase_distance);
            rows.push(vec![
                Cell::Float(*ratio),
                Cell::Float(kg.params.c),
                Cell::Float(r.max_density_distance),
                Cell::Float(r.max_phase_distance),
                Cell::Float(r.hj_residual_max),
                Cell::Float(r.dropped_time_term_max),
                Cell::Float(r.quantum_term_max),
            ]);
        }
        self.lowspeed_table = Some(table_csv(&header, &rows));
        Ok(())
    }

    fn run_kinematics(&mut self) -> Result<(), CliError> {
        let p = self.p;
        let probes = probe_events(200, 1.5, 1.2, self.sc.rng_seed);
        let mut rows = Vec::new();
        let mut worst_maxwell: f64 = 0.0;
        for flow in catalog() {
            let (mut self_check, mut maxwell, mut force): (f64, f64, f64) = (0.0, 0.0, 0.0);
            for &(t, r) in &probes {
                let jet = flow.jet(t, r);
                self_check = self_check.max(derivative_self_check(flow.as_ref(), t, r, 1e-4));
                maxwell = maxwell.max(maxwell_analog_residuals(&jet, &p).max_abs());
                let (f, c) = (analog_force(&jet, &p), convective_force(&jet, &p));
                for i in 0..3 {
                    force = force.max((f[i] - c[i]).abs() / (1.0 + c[i].abs()));
                }
            }
            worst_maxwell = worst_maxwell.max(maxwell);
            rows.push(vec![
                Cell::Text(flow.name().to_string()),
                Cell::Float(self_check),
                Cell::Float(maxwell),
                Cell::Float(force),
            ]);
        }
        // on-shell fixtures and one deliberately off-shell plane action
        let omega = 0.9;
        let (osc, well) = (
            OscillatorAction { omega, params: p },
            OscillatorWell { omega, params: p },
        );
        let plane = PlaneAction::relativistic([0.4, -1.1, 0.25], &p);
        let off = PlaneAction {
            energy: 1.1 * plane.energy,
            ..plane
        };
        let (mut on_rel, mut on_nonrel, mut off_rel): (f64, f64, f64) = (0.0, 0.0, f64::INFINITY);
        let scale = p.m * p.m * p.c * p.c;
        for &(t, r) in &probes {
            on_rel = on_rel.max(rel_hj_residual(&plane, &NoField, t, r, &p).abs() / scale);
            on_nonrel = on_nonrel.max(nonrel_hj_residual(&osc, &well, t, r, &p).abs() / (p.m * p.c * p.c));
            off_rel = off_rel.min(rel_hj_residual(&off, &NoField, t, r, &p).abs() / scale);
        }
        let m = &mut self.manifest;
        m.set("residuals", "kinematics_maxwell_max", worst_maxwell);
        m.set("residuals", "hj_on_shell_rel_max", on_rel);
        m.set("residuals", "hj_on_shell_nonrel_max", on_nonrel);
        m.set("residuals", "hj_off_shell_rel_min", off_rel);
        self.check("kinematics_maxwell", worst_maxwell, self.tolerances.maxwell);
        self.kinematics_table = Some(table_csv(&["flow", "derivative_check", "maxwell", "force_gap"], &rows));
        Ok(())
    }

    fn artifact(&self, art: Artifact) -> Option<String> {
        let g = &self.g;
        match art {
            Artifact::Fields => {
                let mut named: Vec<(String, ScalarField)> = Vec::new();
                for (tag, psi) in [
                    ("kg", self.kg.as_ref().map(|s| &s.psi)),
                    ("schr", self.schr.as_ref().map(|s| &s.psi)),
                ] {
                    if let Some(psi) = psi {
                        named.push((format!("{tag}_re"), psi.re()));
                        named.push((format!("{tag}_im"), psi.im()));
                    }
                }
                let cols: Vec<(&str, &ScalarField)> = named.iter().map(|(n, f)| (n.as_str(), f)).collect();
                Some(field_csv(g, &cols))
            }
            Artifact::Madelung => {
                let (md, _) = self.md.as_ref()?;
                let node = indicator(g, &md.node_mask);
                Some(field_csv(g, &[("rho", &md.rho), ("s", &md.s), ("node", &node)]))
            }
            Artifact::HiddenPhase => {
                let (hp, ks) = self.hp.as_ref()?;
                let velocity = match ks {
                    Some(ks) => {
                        let up = ks.v.raise();
                        up.space
                            .zip_with(&up.time, |v1, v0| if v0 != 0.0 { self.p.c * v1 / v0 } else { 0.0 })
                            .ok()?
                    }
                    None => self.fluid.as_ref()?.v.clone(),
                };
                let excluded = indicator(g, &hp.excluded);
                Some(field_csv(
                    g,
                    &[
                        ("phi", &hp.phi),
                        ("phi_t", &hp.phi_t),
                        ("vx", &velocity),
                        ("excluded", &excluded),
                    ],
                ))
            }
            Artifact::Trajectories => self.te.as_ref().map(trajectories_csv),
            Artifact::Residuals => self.residual_table.clone(),
            Artifact::Lowspeed => self.lowspeed_table.clone(),
            Artifact::Kinematics => self.kinematics_table.clone(),
        }
    }
}

/// Execute a parsed scenario and write its artifacts and manifest to
/// `out_root/<name>/`. Failed tolerance checks still write everything and
/// are returned in the outcome.
pub fn run(
    sc: &Scenario,
    source_text: &str,
    out_root: &Path,
    profile: ToleranceProfile,
) -> Result<RunOutcome, CliError> {
    let mut run = Run::new(sc, profile.tolerances())?;
    for &stage in &sc.pipeline {
        run.stage(stage)?;
    }

    let g = run.g;
    let m = &mut run.manifest;
    m.set("inputs", "name", sc.name.as_str());
    m.set("inputs", "rng_seed", sc.rng_seed);
    m.set("inputs", "scenario_sha256", sha256_hex(source_text.as_bytes()));
    m.set("inputs", "tolerance_profile", profile.name());
    let stages: Vec<String> = sc.pipeline.iter().map(|s| s.to_string()).collect();
    m.set("inputs", "pipeline", stages.join(","));
    m.set("parameters", "hbar", run.p.hbar);
    m.set("parameters", "c", run.p.c);
    m.set("parameters", "m", run.p.m);
    m.set("parameters", "q", run.p.q);
    m.set("parameters", "nx", g.nx);
    m.set("parameters", "nt", g.nt);
    m.set("parameters", "dx", g.dx);
    m.set("parameters", "dt", g.dt);
    m.set("parameters", "x_min", g.x_min);
    if sc.has(Stage::ResidualSuite) {
        m.set("parameters", "summary_density_floor", SUMMARY_DENSITY_FLOOR);
    }

    let dir = out_root.join(&sc.name);
    fs::create_dir_all(&dir)?;
    let mut outputs = sc.outputs.clone();
    outputs.dedup();
    for art in outputs {
        let text = run
            .artifact(art)
            .ok_or_else(|| CliError::Invalid(format!("outputs: `{}` has no data", art.file_name())))?;
        fs::write(dir.join(art.file_name()), &text)?;
        run.manifest
            .set("artifacts", art.file_name(), sha256_hex(text.as_bytes()));
    }

    let mut failed = Vec::new();
    for (name, value, bound) in &run.checks {
        let pass = *value <= *bound;
        run.manifest.set("checks", &format!("{name}_bound"), *bound);
        run.manifest.set("checks", &format!("{name}_pass"), pass);
        if !pass {
            failed.push(format!("{name} = {value:e} > {bound:e}"));
        }
    }
    for (i, w) in run.warnings.iter().enumerate() {
        run.manifest.set("warnings", &format!("w{i:03}"), w.as_str());
    }
    fs::write(dir.join(MANIFEST_FILE), run.manifest.render())?;
    Ok(RunOutcome {
        dir,
        manifest: run.manifest,
        failed_checks: failed,
    })
}
