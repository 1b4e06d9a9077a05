//! Classical worst-case response time for non-preemptive fixed-priority
//! scheduling on CAN: the error-free baseline of the stochastic analysis.
//!
//! Release semantics match the stochastic analysis: an instance released at
//! the exact moment the bus frees does not join that arbitration round, but
//! every higher-priority instance released together with the instance under
//! analysis does.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{blocking_time, retry_distribution, BlockingRule, MessageSet};
use crate::pmf::BitTime;

/// Default iteration horizon, in bit-times.
pub const DEFAULT_HORIZON: BitTime = (1 << 20) * 16;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetOptions {
    pub blocking: BlockingRule,
    /// Charge every frame `C + k(C + E)` instead of `C`.
    pub with_errors: bool,
    pub horizon: BitTime,
}

impl Default for DetOptions {
    fn default() -> Self {
        Self {
            blocking: BlockingRule::LowerPriority,
            with_errors: false,
            horizon: DEFAULT_HORIZON,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetResult {
    pub frame_id: String,
    pub blocking: BitTime,
    pub wcrt: BitTime,
    pub busy_period: BitTime,
    /// Number of instances of the frame inside the busy period.
    pub instances: usize,
    pub schedulable: bool,
}

/// Releases of a periodic stream at `0, T, 2T, ...` strictly before `w`,
/// counting the release at 0 even when `w == 0`.
fn releases_before(w: BitTime, period: BitTime) -> u64 {
    w.div_ceil(period).max(1)
}

fn fixed_point(
    mut w: BitTime,
    horizon: BitTime,
    f: impl Fn(BitTime) -> BitTime,
) -> Result<BitTime> {
    loop {
        let next = f(w);
        if next == w {
            return Ok(w);
        }
        if next > horizon {
            return Err(Error::NonConvergence {
                what: "deterministic busy window",
                horizon,
            });
        }
        w = next;
    }
}

pub fn det_wcrt(set: &MessageSet, i: usize, opts: &DetOptions) -> Result<DetResult> {
    set.check_index(i)?;
    let frames = set.frames();
    let costs: Vec<(BitTime, BitTime)> = frames
        .iter()
        .map(|f| {
            if opts.with_errors {
                let (masses, _) = retry_distribution(f, &set.error_model)?;
                let retrans = (masses.len() as BitTime - 1) * f.attempt_with_error();
                Ok((f.transmission + retrans, retrans))
            } else {
                Ok((f.transmission, 0))
            }
        })
        .collect::<Result<_>>()?;
    let blocking = blocking_time(set, i, opts.blocking);
    let own = &frames[i];
    let hp_demand = |w: BitTime| -> BitTime {
        (0..i)
            .map(|k| releases_before(w, frames[k].period) * costs[k].0)
            .sum()
    };

    let seed: BitTime = blocking + costs[..=i].iter().map(|c| c.0).sum::<BitTime>();
    let busy_period = fixed_point(seed, opts.horizon, |w| {
        blocking + hp_demand(w) + releases_before(w, own.period) * costs[i].0
    })?;

    let instances = releases_before(busy_period, own.period) as usize;
    let mut wcrt = 0;
    for q in 0..instances as BitTime {
        let base = blocking + q * costs[i].0 + costs[i].1;
        let start = fixed_point(base + hp_demand(0), opts.horizon, |s| base + hp_demand(s))?;
        let release = q * own.period;
        debug_assert!(start >= release);
        wcrt = wcrt.max(start + own.transmission - release);
    }
    Ok(DetResult {
        frame_id: own.id.clone(),
        blocking,
        wcrt,
        busy_period,
        instances,
        schedulable: wcrt <= own.deadline,
    })
}

/// [`det_wcrt`] for every frame of the set.
pub fn det_analysis(set: &MessageSet, opts: &DetOptions) -> Result<Vec<DetResult>> {
    (0..set.len()).map(|i| det_wcrt(set, i, opts)).collect()
}
