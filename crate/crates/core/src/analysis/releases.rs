use std::cmp::Reverse;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::model::Frame;
use crate::pmf::BitTime;

/// One released instance. Instances are ordered by release time, then by
/// priority.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct InstanceRelease {
    pub release: BitTime,
    /// Frame index in priority order; doubles as the tie-break key.
    pub frame: usize,
    /// Zero-based instance ordinal within the frame.
    pub ordinal: u64,
}

/// Strictly periodic releases of a prefix of frames, from the critical
/// instant at `0`, yielded from `from` onwards.
pub struct ReleaseQueue {
    periods: Vec<BitTime>,
    heap: BinaryHeap<Reverse<InstanceRelease>>,
}

impl ReleaseQueue {
    /// Releases of `frames[..count]` at or after `from`.
    pub fn new(frames: &[Frame], count: usize, from: BitTime) -> Self {
        let periods: Vec<BitTime> = frames[..count].iter().map(|f| f.period).collect();
        let heap = periods
            .iter()
            .enumerate()
            .map(|(frame, &period)| {
                let ordinal = from.div_ceil(period);
                Reverse(InstanceRelease {
                    release: ordinal * period,
                    frame,
                    ordinal,
                })
            })
            .collect();
        Self { periods, heap }
    }

    pub fn peek(&self) -> Option<&InstanceRelease> {
        self.heap.peek().map(|r| &r.0)
    }
}

impl Iterator for ReleaseQueue {
    type Item = InstanceRelease;

    fn next(&mut self) -> Option<InstanceRelease> {
        let Reverse(next) = self.heap.pop()?;
        let period = self.periods[next.frame];
        self.heap.push(Reverse(InstanceRelease {
            release: next.release + period,
            frame: next.frame,
            ordinal: next.ordinal + 1,
        }));
        Some(next)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn worked_example_instance_queue() {
        let set = crate::datasets::example3();
        let order: Vec<(BitTime, usize)> = ReleaseQueue::new(set.frames(), 2, 0)
            .take(5)
            .map(|r| (r.release, r.frame))
            .collect();
        assert_eq!(order, vec![(0, 0), (0, 1), (6, 0), (12, 0), (12, 1)]);
    }

    #[test]
    fn starts_at_offset() {
        let set = crate::datasets::example3();
        let first: Vec<_> = ReleaseQueue::new(set.frames(), 1, 7).take(2).collect();
        assert_eq!(first[0].release, 12);
        assert_eq!(first[0].ordinal, 2);
        assert_eq!(first[1].release, 18);
    }
}
