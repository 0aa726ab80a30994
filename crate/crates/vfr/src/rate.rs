//! Frame-rate classes used throughout the decision pipeline.

use serde::{Deserialize, Serialize};
use std::fmt;

use crate::error::{Error, Result};

/// A candidate display rate for a chunk of 120 fps source video.
///
/// Ordering follows the numeric rate: `F30 < F60 < F120`.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, Default,
)]
#[serde(into = "u32", try_from = "u32")]
pub enum FrameRate {
    F30,
    F60,
    #[default]
    F120,
}

impl FrameRate {
    pub const ALL: [FrameRate; 3] = [FrameRate::F30, FrameRate::F60, FrameRate::F120];

    /// Frames per second.
    pub fn fps(self) -> u32 {
        match self {
            FrameRate::F30 => 30,
            FrameRate::F60 => 60,
            FrameRate::F120 => 120,
        }
    }

    /// Keep-every-Nth period relative to the 120 fps source.
    pub fn period(self) -> usize {
        match self {
            FrameRate::F30 => 4,
            FrameRate::F60 => 2,
            FrameRate::F120 => 1,
        }
    }

    pub fn from_fps(fps: u32) -> Result<FrameRate> {
        match fps {
            30 => Ok(FrameRate::F30),
            60 => Ok(FrameRate::F60),
            120 => Ok(FrameRate::F120),
            other => Err(Error::DataFormat(format!(
                "unsupported frame rate {other}, expected 30, 60 or 120"
            ))),
        }
    }
}

impl From<FrameRate> for u32 {
    fn from(r: FrameRate) -> u32 {
        r.fps()
    }
}

impl TryFrom<u32> for FrameRate {
    type Error = Error;

    fn try_from(fps: u32) -> Result<FrameRate> {
        FrameRate::from_fps(fps)
    }
}

impl fmt::Display for FrameRate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.fps())
    }
}
