//! Scenario files: sectioned TOML describing physics, grid, initial data,
//! potentials and an ordered pipeline of stages.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use kglab_core::kg::CFL_CEILING;
use kglab_core::{PhysParams, SpacetimeGrid};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    #[serde(default)]
    pub description: String,
    #[serde(default)]
    pub rng_seed: u64,
    pub physics: Physics,
    pub grid: GridSpec,
    pub initial: InitialSpec,
    #[serde(default)]
    pub potential: PotentialSpec,
    pub pipeline: Vec<Stage>,
    #[serde(default)]
    pub outputs: Vec<Artifact>,
    #[serde(default)]
    pub kg: KgSection,
    #[serde(default)]
    pub schrodinger: SchrodingerSection,
    #[serde(default)]
    pub hidden_phase: HiddenPhaseSection,
    #[serde(default)]
    pub trajectories: TrajectorySection,
    pub lowspeed: Option<LowSpeedSection>,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Physics {
    #[serde(default = "one")]
    pub hbar: f64,
    #[serde(default = "one")]
    pub c: f64,
    #[serde(default = "one")]
    pub m: f64,
    #[serde(default = "one")]
    pub q: f64,
}

impl Physics {
    pub fn params(&self) -> Result<PhysParams, CliError> {
        PhysParams::new(self.hbar, self.c, self.m, self.q).map_err(|e| CliError::Invalid(format!("physics: {e}")))
    }
}

/// Periodic lattice of `nx` points over `length`, starting at `x_min`
/// (default `-length / 2`). The stored time step is `dt`, or `cfl * dx / c`.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub nx: usize,
    pub length: f64,
    pub x_min: Option<f64>,
    pub nt: usize,
    pub dt: Option<f64>,
    pub cfl: Option<f64>,
}

impl GridSpec {
    pub fn build(&self, p: &PhysParams) -> Result<SpacetimeGrid, CliError> {
        if self.nx == 0 || !(self.length.is_finite() && self.length > 0.0) {
            return Err(CliError::Invalid("grid: nx and length must be positive".into()));
        }
        let dx = self.length / self.nx as f64;
        let dt = match (self.dt, self.cfl) {
            (Some(dt), None) => dt,
            (None, Some(cfl)) => cfl * dx / p.c,
            (Some(_), Some(_)) => return Err(CliError::Invalid("grid: give either dt or cfl, not both".into())),
            (None, None) => return Err(CliError::Invalid("grid: missing dt (or cfl)".into())),
        };
        let x_min = self.x_min.unwrap_or(-self.length / 2.0);
        SpacetimeGrid::periodic(self.nx, self.length, x_min, self.nt, dt)
            .map_err(|e| CliError::Invalid(format!("grid: {e}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModeSpec {
    pub amplitude: f64,
    pub k: f64,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum InitialSpec {
    PlaneWave {
        k: f64,
    },
    Gaussian {
        x0: f64,
        sigma: f64,
        k: f64,
    },
    Superposition {
        modes: Vec<ModeSpec>,
    },
    /// CSV with header `x,re,im`, one row per grid point.
    File {
        path: PathBuf,
    },
}

#[derive(Debug, Clone, PartialEq, Default, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum PotentialSpec {
    #[default]
    Zero,
    /// Uniform electric field in temporal gauge.
    UniformE { e0: f64 },
    /// Static scalar potential, one value per grid point.
    Table { values: Vec<f64> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Deserialize)]
pub enum Stage {
    #[serde(rename = "kg")]
    Kg,
    #[serde(rename = "schrodinger")]
    Schrodinger,
    #[serde(rename = "madelung")]
    Madelung,
    #[serde(rename = "hidden_phase", alias = "hidden-phase")]
    HiddenPhase,
    #[serde(rename = "trajectories")]
    Trajectories,
    #[serde(rename = "residual-suite")]
    ResidualSuite,
    #[serde(rename = "low-speed-compare")]
    LowSpeedCompare,
    #[serde(rename = "kinematics-suite")]
    KinematicsSuite,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Stage::Kg => "kg",
            Stage::Schrodinger => "schrodinger",
            Stage::Madelung => "madelung",
            Stage::HiddenPhase => "hidden_phase",
            Stage::Trajectories => "trajectories",
            Stage::ResidualSuite => "residual-suite",
            Stage::LowSpeedCompare => "low-speed-compare",
            Stage::KinematicsSuite => "kinematics-suite",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Artifact {
    Fields,
    Madelung,
    HiddenPhase,
    Trajectories,
    Residuals,
    Lowspeed,
    Kinematics,
}

impl Artifact {
    pub fn file_name(self) -> &'static str {
        match self {
            Artifact::Fields => "fields.csv",
            Artifact::Madelung => "madelung.csv",
            Artifact::HiddenPhase => "hidden_phase.csv",
            Artifact::Trajectories => "trajectories.csv",
            Artifact::Residuals => "residuals.csv",
            Artifact::Lowspeed => "lowspeed.csv",
            Artifact::Kinematics => "kinematics.csv",
        }
    }

    fn producer(self) -> &'static [Stage] {
        match self {
            Artifact::Fields => &[Stage::Kg, Stage::Schrodinger],
            Artifact::Madelung => &[Stage::Madelung],
            Artifact::HiddenPhase => &[Stage::HiddenPhase],
            Artifact::Trajectories => &[Stage::Trajectories],
            Artifact::Residuals => &[Stage::ResidualSuite],
            Artifact::Lowspeed => &[Stage::LowSpeedCompare],
            Artifact::Kinematics => &[Stage::KinematicsSuite],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundarySpec {
    #[default]
    Periodic,
    Clamped,
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KgSection {
    /// Internal steps per stored slice; overridden by `omega_h`.
    #[serde(default = "one_usize")]
    pub substeps: usize,
    /// Target rest-phase advance per internal step.
    pub omega_h: Option<f64>,
    #[serde(default)]
    pub boundary: BoundarySpec,
}

fn one_usize() -> usize {
    1
}

impl Default for KgSection {
    fn default() -> Self {
        Self {
            substeps: 1,
            omega_h: None,
            boundary: BoundarySpec::Periodic,
        }
    }
}

impl KgSection {
    pub fn substeps_for(&self, p: &PhysParams, dt: f64) -> usize {
        match self.omega_h {
            Some(w) => ((p.rest_frequency() * dt / w).ceil() as usize).max(1),
            None => self.substeps.max(1),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchrodingerSection {
    #[serde(default = "one_usize")]
    pub substeps: usize,
}

impl Default for SchrodingerSection {
    fn default() -> Self {
        Self { substeps: 1 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BranchSpec {
    #[default]
    Positive,
    Negative,
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HiddenPhaseSection {
    #[serde(default)]
    pub branch: BranchSpec,
    #[serde(default = "default_min_density")]
    pub min_density: f64,
}

fn default_min_density() -> f64 {
    1e-6
}

impl Default for HiddenPhaseSection {
    fn default() -> Self {
        Self {
            branch: BranchSpec::Positive,
            min_density: default_min_density(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrajectorySection {
    #[serde(default = "default_count")]
    pub count: usize,
    #[serde(default = "one_usize")]
    pub substeps: usize,
}

fn default_count() -> usize {
    1000
}

impl Default for TrajectorySection {
    fn default() -> Self {
        Self {
            count: default_count(),
            substeps: 1,
        }
    }
}

/// Sweep of the speed of light at fixed initial data: each entry sets
/// `c = v / ratio` with `v` the RMS speed of the initial wave function.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LowSpeedSection {
    pub speed_ratios: Vec<f64>,
    #[serde(default = "default_omega_h")]
    pub omega_h: f64,
    #[serde(default = "default_cn_substeps")]
    pub schrodinger_substeps: usize,
}

fn default_omega_h() -> f64 {
    0.005
}

fn default_cn_substeps() -> usize {
    20
}

impl Scenario {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let s: Scenario = toml::from_str(text).map_err(|e| CliError::Parse(e.to_string()))?;
        s.validate()?;
        Ok(s)
    }

    pub fn has(&self, stage: Stage) -> bool {
        self.pipeline.contains(&stage)
    }

    /// Stage ordering and output requirements.
    pub fn validate(&self) -> Result<(), CliError> {
        if self.name.is_empty() || self.name.contains(['/', '\\']) || self.name.starts_with('.') {
            return Err(CliError::Invalid("name: must be a plain, non-empty file name".into()));
        }
        let mut seen: Vec<Stage> = Vec::new();
        for &stage in &self.pipeline {
            if seen.contains(&stage) {
                return Err(CliError::Invalid(format!("pipeline: stage `{stage}` appears twice")));
            }
            let before = |s: Stage| seen.contains(&s);
            let missing = match stage {
                Stage::Madelung => (!before(Stage::Kg) && !before(Stage::Schrodinger)).then_some("kg or schrodinger"),
                Stage::HiddenPhase | Stage::Trajectories => (!before(Stage::Madelung)).then_some("madelung"),
                Stage::ResidualSuite => {
                    (!before(Stage::Kg) && !before(Stage::Schrodinger)).then_some("kg or schrodinger")
                }
                Stage::LowSpeedCompare => (self.lowspeed.is_none()
                    && !(before(Stage::Kg) && before(Stage::Schrodinger)))
                .then_some("kg and schrodinger (or a [lowspeed] sweep)"),
                _ => None,
            };
            if let Some(need) = missing {
                return Err(CliError::Invalid(format!(
                    "pipeline: stage `{stage}` needs {need} earlier"
                )));
            }
            seen.push(stage);
        }
        for &out in &self.outputs {
            if !out.producer().iter().any(|s| self.has(*s)) {
                return Err(CliError::Invalid(format!(
                    "outputs: `{}` is not produced by any stage in the pipeline",
                    out.file_name()
                )));
            }
        }
        if let Some(ls) = &self.lowspeed {
            if ls.speed_ratios.is_empty() || ls.speed_ratios.iter().any(|r| !(*r > 0.0 && *r < 1.0)) {
                return Err(CliError::Invalid("lowspeed: speed_ratios must lie in (0, 1)".into()));
            }
            if !matches!(self.initial, InitialSpec::Gaussian { .. } | InitialSpec::File { .. }) {
                return Err(CliError::Invalid(
                    "lowspeed: the sweep needs localized initial data".into(),
                ));
            }
        }
        if let PotentialSpec::Table { values } = &self.potential {
            if values.len() != self.grid.nx {
                return Err(CliError::Invalid(format!(
                    "potential: table has {} values for nx = {}",
                    values.len(),
                    self.grid.nx
                )));
            }
        }
        let p = self.physics.params()?;
        let g = self.grid.build(&p)?;
        if self.has(Stage::Kg) {
            let substeps = self.kg.substeps_for(&p, g.dt);
            let cfl = p.c * g.dt / substeps as f64 / g.dx;
            if cfl > CFL_CEILING {
                return Err(CliError::Stability(format!(
                    "kg: c*dt/dx = {cfl:.6} exceeds the CFL bound {CFL_CEILING}"
                )));
            }
        }
        Ok(())
    }

    /// Resolve relative file paths against the scenario's directory.
    pub fn resolve_paths(&mut self, base: &Path) {
        if let InitialSpec::File { path } = &mut self.initial {
            if path.is_relative() {
                *path = base.join(&*path);
            }
        }
    }
}
