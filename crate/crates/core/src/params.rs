use crate::error::{LabError, Result};

/// Physical constants. Natural units (all four equal to one, unit charge)
/// are the default; every constant is configurable.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysParams {
    pub hbar: f64,
    pub c: f64,
    pub m: f64,
    pub q: f64,
}

impl Default for PhysParams {
    fn default() -> Self {
        Self {
            hbar: 1.0,
            c: 1.0,
            m: 1.0,
            q: 1.0,
        }
    }
}

impl PhysParams {
    pub fn new(hbar: f64, c: f64, m: f64, q: f64) -> Result<Self> {
        let p = Self { hbar, c, m, q };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, value) in [("hbar", self.hbar), ("c", self.c), ("m", self.m)] {
            if !(value.is_finite() && value > 0.0) {
                return Err(LabError::InvalidParameter {
                    name,
                    reason: format!("must be finite and > 0, got {value}"),
                });
            }
        }
        if !self.q.is_finite() {
            return Err(LabError::InvalidParameter {
                name: "q",
                reason: format!("must be finite, got {}", self.q),
            });
        }
        Ok(())
    }

    /// Rest-energy angular frequency m c^2 / hbar.
    pub fn rest_frequency(&self) -> f64 {
        self.m * self.c * self.c / self.hbar
    }

    /// Free dispersion relation omega(k) = sqrt(k^2 c^2 + m^2 c^4 / hbar^2).
    pub fn kg_frequency(&self, k: f64) -> f64 {
        let rest = self.rest_frequency();
        (k * k * self.c * self.c + rest * rest).sqrt()
    }
}
