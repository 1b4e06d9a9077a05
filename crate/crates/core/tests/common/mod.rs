//! Reference implementations that share no code with the analyses they
//! check: an error-free timeline simulation and an exhaustive enumeration of
//! retry-count combinations.

#![allow(dead_code)]

use std::collections::{BTreeMap, VecDeque};

use pwcrt_core::analysis::busy_window_sequence;
use pwcrt_core::{AnalysisOptions, BitTime, ErrorModel, Frame, MessageSet, RetryLimit};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Frame parameters as seen by the oracles.
#[derive(Debug, Clone)]
pub struct Stream {
    pub c: BitTime,
    pub e: BitTime,
    pub t: BitTime,
    /// Probability of `n` failed attempts before the successful one.
    pub retries: Vec<f64>,
}

pub fn streams(set: &MessageSet) -> Vec<Stream> {
    set.frames()
        .iter()
        .map(|f| Stream {
            c: f.transmission,
            e: f.error_overhead,
            t: f.period,
            retries: f.retry_probabilities.clone().unwrap_or_else(|| vec![1.0]),
        })
        .collect()
}

/// Largest C + E among frames below `i`.
pub fn blocking(streams: &[Stream], i: usize) -> BitTime {
    streams[i + 1..].iter().map(|s| s.c + s.e).max().unwrap_or(0)
}

/// Error-free worst-case response of frame `i`: bus held for the blocking
/// time, every frame up to `i` released at 0 and periodically after, the
/// highest-priority instance released strictly before the bus frees wins.
/// Runs until the level-`i` busy period ends.
pub fn timeline_wcrt(streams: &[Stream], i: usize) -> BitTime {
    let mut next: Vec<BitTime> = vec![0; i + 1];
    let mut queues: Vec<VecDeque<BitTime>> = vec![VecDeque::new(); i + 1];
    let mut now = blocking(streams, i);
    if now == 0 {
        // Idle bus: the critical-instant releases arbitrate together.
        for k in 0..=i {
            queues[k].push_back(0);
            next[k] = streams[k].t;
        }
    }
    let mut worst = 0;
    loop {
        for k in 0..=i {
            while next[k] < now {
                queues[k].push_back(next[k]);
                next[k] += streams[k].t;
            }
        }
        let Some(k) = (0..=i).find(|&k| !queues[k].is_empty()) else {
            return worst;
        };
        let release = queues[k].pop_front().unwrap();
        now += streams[k].c;
        if k == i {
            worst = worst.max(now - release);
        }
    }
}

/// Draws made so far along one branch of the enumeration.
struct Choices<'a> {
    prefix: &'a [usize],
    used: usize,
}

/// Signals that the branch needs one more draw from the given frame.
struct NeedDraw(usize);

impl Choices<'_> {
    fn draw(&mut self, frame: usize) -> Result<usize, NeedDraw> {
        let c = *self.prefix.get(self.used).ok_or(NeedDraw(frame))?;
        self.used += 1;
        Ok(c)
    }
}

struct Pending {
    release: BitTime,
    failures: Option<usize>,
}

/// One deterministic timeline for instance `r` of frame `i`; returns the
/// queuing delay (release to start of the successful attempt).
fn queuing_delay(streams: &[Stream], i: usize, r: BitTime, choices: &mut Choices) -> Result<BitTime, NeedDraw> {
    // Busy period from the critical instant, counting releases before r,
    // up to its first idle point.
    let mut queues: Vec<VecDeque<Pending>> = (0..=i).map(|_| VecDeque::new()).collect();
    let mut next: Vec<BitTime> = vec![0; i + 1];
    let mut now = blocking(streams, i);
    let admit = |queues: &mut Vec<VecDeque<Pending>>, next: &mut Vec<BitTime>, before: BitTime, limit: BitTime| {
        for k in 0..=i {
            while next[k] < before && next[k] < limit {
                queues[k].push_back(Pending { release: next[k], failures: None });
                next[k] += streams[k].t;
            }
        }
    };
    if now == 0 {
        admit(&mut queues, &mut next, 1, r);
    }
    loop {
        admit(&mut queues, &mut next, now, r);
        let Some(k) = (0..=i).find(|&k| !queues[k].is_empty()) else {
            break;
        };
        let head = queues[k].front_mut().unwrap();
        let left = match head.failures {
            Some(n) => n,
            None => choices.draw(k)?,
        };
        if left > 0 {
            head.failures = Some(left - 1);
            now += streams[k].c + streams[k].e;
        } else {
            queues[k].pop_front();
            now += streams[k].c;
        }
    }
    let window_end = now;

    // From r: the instance itself plus higher-priority releases at or after r.
    let mut queues: Vec<VecDeque<Pending>> = (0..i).map(|_| VecDeque::new()).collect();
    let mut next: Vec<BitTime> = (0..i).map(|k| r.div_ceil(streams[k].t) * streams[k].t).collect();
    let mut own = Pending { release: r, failures: None };
    let admit_hp = |queues: &mut Vec<VecDeque<Pending>>, next: &mut Vec<BitTime>, upto: BitTime, inclusive: bool| {
        for k in 0..i {
            while next[k] < upto || (inclusive && next[k] == upto) {
                queues[k].push_back(Pending { release: next[k], failures: None });
                next[k] += streams[k].t;
            }
        }
    };
    let mut now = if window_end <= r {
        admit_hp(&mut queues, &mut next, r, true);
        r
    } else {
        window_end
    };
    loop {
        admit_hp(&mut queues, &mut next, now, false);
        if let Some(k) = (0..i).find(|&k| !queues[k].is_empty()) {
            let head = queues[k].front_mut().unwrap();
            let left = match head.failures {
                Some(n) => n,
                None => choices.draw(k)?,
            };
            if left > 0 {
                head.failures = Some(left - 1);
                now += streams[k].c + streams[k].e;
            } else {
                queues[k].pop_front();
                now += streams[k].c;
            }
            continue;
        }
        let left = match own.failures {
            Some(n) => n,
            None => choices.draw(i)?,
        };
        if left == 0 {
            return Ok(now - own.release);
        }
        own.failures = Some(left - 1);
        now += streams[i].c + streams[i].e;
    }
}

/// Response-time distribution of the instance of frame `i` released at `r`,
/// by enumerating every combination of retry counts.
pub fn brute_force_response(streams: &[Stream], i: usize, r: BitTime) -> BTreeMap<BitTime, f64> {
    let mut out = BTreeMap::new();
    let mut stack: Vec<(Vec<usize>, Vec<usize>)> = vec![(Vec::new(), Vec::new())];
    while let Some((prefix, frames)) = stack.pop() {
        let mut choices = Choices { prefix: &prefix, used: 0 };
        match queuing_delay(streams, i, r, &mut choices) {
            Ok(s) => {
                let p: f64 = prefix
                    .iter()
                    .zip(&frames)
                    .map(|(&n, &k)| streams[k].retries[n])
                    .product();
                *out.entry(s + streams[i].c).or_insert(0.0) += p;
            }
            Err(NeedDraw(k)) => {
                for n in 0..streams[k].retries.len() {
                    if streams[k].retries[n] == 0.0 {
                        continue;
                    }
                    let mut p = prefix.clone();
                    p.push(n);
                    let mut f = frames.clone();
                    f.push(k);
                    stack.push((p, f));
                }
            }
        }
    }
    out
}

/// Random sets of at most three frames with at most two retries each,
/// whose level-`i` busy window (for the lowest frame) holds at most six
/// releases before it closes with certainty.
pub fn micro_sets(seed: u64, count: usize) -> Vec<MessageSet> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let n = rng.random_range(2..=3);
        let frames: Vec<Frame> = (0..n)
            .map(|p| {
                let c = rng.random_range(1..=4);
                let e = rng.random_range(0..=2);
                let t = rng.random_range(6..=40);
                let k = rng.random_range(0..=2usize);
                let weights: Vec<f64> = (0..=k).map(|_| rng.random_range(1..=20) as f64).collect();
                let sum: f64 = weights.iter().sum();
                Frame::new(format!("f{p}"), p as u32, c, t, t, e)
                    .with_retry_probabilities(weights.iter().map(|w| w / sum).collect())
            })
            .collect();
        let worst: f64 = frames
            .iter()
            .map(|f| {
                let k = f.retry_probabilities.as_ref().unwrap().len() as f64 - 1.0;
                (f.transmission as f64 + k * f.attempt_with_error() as f64) / f.period as f64
            })
            .sum();
        if worst >= 0.9 {
            continue;
        }
        let Ok(set) = MessageSet::new(frames, 1000, ErrorModel::new(0.0, RetryLimit::Fixed(2))) else {
            continue;
        };
        let i = set.len() - 1;
        let Ok(seq) = busy_window_sequence(&set, i, &exact_options()) else {
            continue;
        };
        let releases: u64 = set.frames()[..=i]
            .iter()
            .map(|f| seq.stop_time.div_ceil(f.period))
            .sum();
        if releases <= 6 {
            out.push(set);
        }
    }
    out
}

/// A stopping threshold so small that the analyses only stop once the
/// remaining mass is exactly zero.
pub fn exact_options() -> AnalysisOptions {
    AnalysisOptions::with_epsilon(1e-200)
}

/// Largest per-point difference between a PMF and an enumerated
/// distribution.
pub fn max_point_diff(pmf: &pwcrt_core::Pmf, reference: &BTreeMap<BitTime, f64>) -> f64 {
    let mut diff = 0.0f64;
    for &(v, m) in pmf.entries() {
        diff = diff.max((m - reference.get(&v).copied().unwrap_or(0.0)).abs());
    }
    for (&v, &m) in reference {
        diff = diff.max((m - pmf.mass_at(v)).abs());
    }
    diff.max(pmf.residual())
}
