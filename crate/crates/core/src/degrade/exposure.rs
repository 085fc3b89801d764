use crate::error::{NebiError, Result};

/// Per-frame exposure times and the brightness-matching gains
/// `gain[i] = max(exposures) / exposures[i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExposureSchedule {
    exposures: Vec<f64>,
    gains: Vec<f64>,
}

impl ExposureSchedule {
    pub fn new(exposures: Vec<f64>) -> Result<Self> {
        if exposures.is_empty() {
            return Err(NebiError::Empty("exposure schedule".into()));
        }
        if let Some(e) = exposures.iter().find(|e| !(e.is_finite() && **e > 0.0)) {
            return Err(NebiError::Config(format!("exposure {e} must be positive")));
        }
        let max = exposures.iter().cloned().fold(f64::MIN, f64::max);
        let gains = exposures.iter().map(|e| max / e).collect();
        Ok(ExposureSchedule { exposures, gains })
    }

    /// `n` exposures evenly spaced from `shortest` to `longest` seconds.
    pub fn linear(n: usize, shortest: f64, longest: f64) -> Result<Self> {
        if n < 2 {
            return Err(NebiError::Config("a burst needs at least two frames".into()));
        }
        let step = (longest - shortest) / (n - 1) as f64;
        Self::new((0..n).map(|i| shortest + step * i as f64).collect())
    }

    /// 14 frames from 0.01 s to 0.14 s.
    pub fn nebi_default() -> Self {
        Self::linear(14, 0.01, 0.14).expect("default schedule")
    }

    pub fn len(&self) -> usize {
        self.exposures.len()
    }
    pub fn is_empty(&self) -> bool {
        self.exposures.is_empty()
    }
    pub fn exposures(&self) -> &[f64] {
        &self.exposures
    }
    pub fn gains(&self) -> &[f64] {
        &self.gains
    }
}
