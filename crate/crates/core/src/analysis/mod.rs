//! Probabilistic worst-case response-time analysis.
//!
//! The improved analysis walks the level-`i` busy window once from the
//! critical instant, splitting the window PMF at every release into a stable
//! part (the window already closed) and a pending part (still busy), and only
//! convolves new work into the pending part. The backlog seen by each
//! instance of the frame under analysis is read straight off the recorded
//! window, and its queuing delay is grown from there.
//!
//! The legacy baseline rebuilds every window state from the critical instant
//! and lets instances released exactly when the bus frees join the round.

mod busy_window;
mod legacy;
mod releases;
mod response;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exceedance::{ExceedanceCurve, Method};
use crate::model::BlockingRule;
use crate::pmf::{BitTime, Boundary, Pmf};

pub use busy_window::{backlog, busy_window_sequence, BusyWindowSequence};
pub use legacy::legacy_pwcrt;
pub use releases::{InstanceRelease, ReleaseQueue};
pub use response::{analyze_frame, queuing_delay, response_pmf};

/// Stopping threshold used unless the caller picks one.
pub const DEFAULT_EPSILON: f64 = 1e-12;

/// Iteration horizon in bit-times.
pub const DEFAULT_HORIZON: BitTime = 1 << 24;

/// Who owns a release that coincides with the end of the current busy
/// period.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArrivalBoundary {
    /// The release misses the round, except at offset 0 where simultaneous
    /// releases always arbitrate together.
    Strict,
    /// The release always joins the round.
    Inclusive,
}

impl ArrivalBoundary {
    pub(crate) fn at(self, offset: BitTime) -> Boundary {
        match self {
            ArrivalBoundary::Strict if offset > 0 => Boundary::ToStable,
            _ => Boundary::ToPending,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnalysisOptions {
    /// Stop once the probability that the next release still falls inside
    /// the window drops below this.
    pub epsilon: f64,
    pub blocking: BlockingRule,
    pub horizon: BitTime,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        Self {
            epsilon: DEFAULT_EPSILON,
            blocking: BlockingRule::LowerPriority,
            horizon: DEFAULT_HORIZON,
        }
    }
}

impl AnalysisOptions {
    pub fn with_epsilon(epsilon: f64) -> Self {
        Self {
            epsilon,
            ..Self::default()
        }
    }

    pub(crate) fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "epsilon must lie in (0, 1), got {}",
                self.epsilon
            )));
        }
        Ok(())
    }
}

/// Distributions for one instance of the frame under analysis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceResponse {
    pub ordinal: u64,
    pub release: BitTime,
    /// Pending work of the frame and its higher-priority frames at release.
    pub backlog: Pmf,
    /// Time from release until the final, error-free attempt starts.
    pub queuing: Pmf,
    pub response: Pmf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameAnalysis {
    pub frame_id: String,
    pub method: Method,
    pub epsilon: f64,
    pub blocking: BitTime,
    /// Release time at which the busy-window iteration stopped.
    pub stop_time: BitTime,
    /// Window mass still pending at the stop time (below epsilon).
    pub stop_tail: f64,
    pub instances: Vec<InstanceResponse>,
    pub curve: ExceedanceCurve,
    pub deadline: BitTime,
    pub deadline_miss_probability: f64,
    /// Number of PMF convolutions performed.
    pub convolutions: usize,
}

impl FrameAnalysis {
    #[allow(clippy::too_many_arguments)]
    pub(crate) fn assemble(
        set: &crate::model::MessageSet,
        i: usize,
        method: Method,
        opts: &AnalysisOptions,
        blocking: BitTime,
        (stop_time, stop_tail): (BitTime, f64),
        instances: Vec<InstanceResponse>,
        convolutions: usize,
    ) -> Self {
        let frame = set.frame(i);
        let responses: Vec<Pmf> = instances.iter().map(|r| r.response.clone()).collect();
        let curve = ExceedanceCurve::from_pmfs(&responses, method, &frame.id, set.bits_per_ms());
        let deadline_miss_probability = curve.eval(frame.deadline);
        Self {
            frame_id: frame.id.clone(),
            method,
            epsilon: opts.epsilon,
            blocking,
            stop_time,
            stop_tail,
            instances,
            curve,
            deadline: frame.deadline,
            deadline_miss_probability,
            convolutions,
        }
    }
}
