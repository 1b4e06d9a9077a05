use serde::{Deserialize, Serialize};

use super::{AnalysisOptions, ArrivalBoundary, ReleaseQueue};
use crate::error::{Error, Result};
use crate::model::{blocking_time, MessageSet};
use crate::pmf::{BitTime, Boundary, Pmf};

/// Window states recorded just before the first instance released at each
/// distinct release time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BusyWindowSequence {
    pub blocking: BitTime,
    pub records: Vec<(BitTime, Pmf)>,
    pub stop_time: BitTime,
    pub stop_tail: f64,
    pub convolutions: usize,
}

impl BusyWindowSequence {
    pub fn at(&self, release: BitTime) -> Option<&Pmf> {
        self.records
            .binary_search_by_key(&release, |(t, _)| *t)
            .ok()
            .map(|idx| &self.records[idx].1)
    }

    pub fn last(&self) -> &Pmf {
        &self.records.last().expect("sequence is never empty").1
    }
}

/// Outcome of offering one released instance to a window-like PMF.
pub(crate) enum Step {
    /// Less than epsilon of the mass is still busy at the release.
    Stop { pending_mass: f64 },
    Absorbed(Pmf),
}

/// `stable ⊕ (pending ⊗ work)` after splitting `state` at `at`.
pub(crate) fn absorb(
    state: &Pmf,
    at: BitTime,
    boundary: Boundary,
    work: &Pmf,
    epsilon: f64,
) -> Result<Step> {
    let (stable, pending) = state.split(at, boundary);
    let pending_mass = pending.total();
    if pending_mass < epsilon {
        return Ok(Step::Stop { pending_mass });
    }
    Ok(Step::Absorbed(stable.coalesce(&pending.convolve(work))?))
}

pub(crate) fn horizon_error(horizon: BitTime) -> Error {
    Error::NonConvergence {
        what: "stochastic busy window",
        horizon,
    }
}

/// Level-`i` busy window from the critical instant, walked once.
pub fn busy_window_sequence(
    set: &MessageSet,
    i: usize,
    opts: &AnalysisOptions,
) -> Result<BusyWindowSequence> {
    let pmfs = set.transmission_pmfs()?;
    busy_window_with(set, i, opts, &pmfs)
}

pub(crate) fn busy_window_with(
    set: &MessageSet,
    i: usize,
    opts: &AnalysisOptions,
    pmfs: &[Pmf],
) -> Result<BusyWindowSequence> {
    set.check_index(i)?;
    opts.validate()?;
    let blocking = blocking_time(set, i, opts.blocking);
    let mut window = Pmf::point(blocking, 1.0)?;
    let mut records: Vec<(BitTime, Pmf)> = Vec::new();
    let mut convolutions = 0;
    let mut queue = ReleaseQueue::new(set.frames(), i + 1, 0);
    loop {
        let next = *queue.peek().expect("periodic releases never run out");
        if next.release > opts.horizon {
            return Err(horizon_error(opts.horizon));
        }
        if records.last().map(|(t, _)| *t) != Some(next.release) {
            records.push((next.release, window.clone()));
        }
        let boundary = ArrivalBoundary::Strict.at(next.release);
        match absorb(&window, next.release, boundary, &pmfs[next.frame], opts.epsilon)? {
            Step::Stop { pending_mass } => {
                return Ok(BusyWindowSequence {
                    blocking,
                    records,
                    stop_time: next.release,
                    stop_tail: pending_mass,
                    convolutions,
                })
            }
            Step::Absorbed(w) => {
                window = w;
                convolutions += 1;
                queue.next();
            }
        }
    }
}

/// Pending work at `release`: the window mass that already closed collapses
/// onto 0, the rest is shifted left by `release`.
pub fn backlog(seq: &BusyWindowSequence, release: BitTime) -> Result<Pmf> {
    let window = seq.at(release).ok_or_else(|| {
        Error::InvalidParameter(format!("release time {release} is not in the busy-window sequence"))
    })?;
    backlog_from_window(window, release)
}

pub(crate) fn backlog_from_window(window: &Pmf, release: BitTime) -> Result<Pmf> {
    let (closed, busy) = window.split(release, Boundary::ToStable);
    let idle_mass = closed.total();
    let shifted = busy.shift(-(release as i64))?;
    if idle_mass > 0.0 {
        Ok(Pmf::point(0, idle_mass.min(1.0))?.coalesce(&shifted)?)
    } else {
        Ok(shifted)
    }
}
