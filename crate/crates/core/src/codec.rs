//! Threshold <-> wake-up frame length mapping.
//!
//! A wake-up receiver only measures frame length, so the threshold is sent as
//! `T_wu = t_min + I(V_th) * t_step` where the interval index `I` shrinks as
//! the threshold grows.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ScenarioParams;

/// Largest number of distinguishable frame lengths (9 bits).
pub const MAX_LEVELS: u32 = 512;

// Keeps the floor stable for thresholds produced by `decode`.
const INDEX_GUARD: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrameCodec {
    pub t_min_seconds: f64,
    pub t_step_seconds: f64,
    pub levels: u32,
}

impl FrameCodec {
    pub fn new(t_min_seconds: f64, t_step_seconds: f64, levels: u32) -> Result<Self> {
        let codec = FrameCodec { t_min_seconds, t_step_seconds, levels };
        codec.validate()?;
        Ok(codec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t_min_seconds > 0.0 && self.t_step_seconds > 0.0) {
            return Err(Error::Codec("t_min and t_step must be positive".into()));
        }
        if !(2..=MAX_LEVELS).contains(&self.levels) {
            return Err(Error::Codec(format!("levels must be in 2..={MAX_LEVELS}, got {}", self.levels)));
        }
        Ok(())
    }

    /// Quantisation interval of a threshold; 0 for `value_max`, `levels - 1` for `value_min`.
    pub fn interval_index(&self, params: &ScenarioParams, threshold: f64) -> Result<u32> {
        let frac = params.wake_probability(threshold)?;
        let top = f64::from(self.levels - 1);
        Ok(((frac * top + INDEX_GUARD).floor()).clamp(0.0, top) as u32)
    }

    pub fn encode(&self, params: &ScenarioParams, threshold: f64) -> Result<f64> {
        let index = self.interval_index(params, threshold)?;
        Ok(self.frame_for_index(index))
    }

    pub fn frame_for_index(&self, index: u32) -> f64 {
        self.t_min_seconds + f64::from(index) * self.t_step_seconds
    }

    /// Interval index of a received frame length; errors if it is off the grid.
    pub fn index_of_frame(&self, frame_seconds: f64) -> Result<u32> {
        let pos = (frame_seconds - self.t_min_seconds) / self.t_step_seconds;
        let index = pos.round();
        if !(index >= 0.0 && index < f64::from(self.levels)) || (pos - index).abs() > 1e-6 {
            return Err(Error::Codec(format!("frame length {frame_seconds} s is not an encodable length")));
        }
        Ok(index as u32)
    }

    /// Boundary threshold of the received interval: the value whose fraction
    /// of the range above it is exactly `index / (levels - 1)`.
    pub fn decode(&self, params: &ScenarioParams, frame_seconds: f64) -> Result<f64> {
        let index = self.index_of_frame(frame_seconds)?;
        let frac = f64::from(index) / f64::from(self.levels - 1);
        let th = params.value_max - frac * (params.value_max - params.value_min);
        Ok(th.clamp(params.value_min, params.value_max))
    }
}
