//! Driving signals and the synthetic (emg, torque, angle) plant.
//!
//! Three periodic bases are spliced into two schedules: one guides the
//! on-screen contraction target, the other drives the ankle pedal. The
//! schedules are then pushed through a linear plant to produce label tracks.

mod labels;
mod schedule;

use std::fmt;
use std::str::FromStr;

pub use labels::{make_label_track, LabelTrack, PlantConfig, LABEL_HEADER};
pub use schedule::{compose_schedule, eval_basis, BasisId, Role, Schedule, Segment};

use crate::Error;

/// Experimental task: which drives are active.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Condition {
    /// Contraction against fixed pedals (screen drive only).
    Isometric,
    /// Pedal rotation with relaxed muscle (pedal drive only).
    Passive,
    /// Both drives at once.
    Combined,
}

impl Condition {
    pub const ALL: [Condition; 3] = [Condition::Isometric, Condition::Passive, Condition::Combined];

    pub fn drives_screen(self) -> bool {
        matches!(self, Condition::Isometric | Condition::Combined)
    }

    pub fn drives_pedal(self) -> bool {
        matches!(self, Condition::Passive | Condition::Combined)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Condition::Isometric => "isometric",
            Condition::Passive => "passive",
            Condition::Combined => "combined",
        }
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Condition {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s.trim() {
            "isometric" => Ok(Condition::Isometric),
            "passive" => Ok(Condition::Passive),
            "combined" => Ok(Condition::Combined),
            other => Err(Error::InvalidConfig(format!("unknown condition {other:?}"))),
        }
    }
}
