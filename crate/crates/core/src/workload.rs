//! Random message sets at a target utilization.
//!
//! Per-frame utilizations come from UUniFast. Each period is drawn
//! log-uniformly from the part of the period range where `U_i · T` lands in
//! the transmission-time range, so `C = round(U_i · T)` needs no clamping in
//! the common case. Utilization vectors with no such period are redrawn, as
//! are sets whose rounded utilization drifts more than 5% from the target.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::datasets::{SAE_BUS_SPEED, SAE_EPSILON, SAE_LAMBDA};
use crate::error::{Error, Result};
use crate::model::{ErrorModel, Frame, MessageSet, RetryLimit};
use crate::pmf::BitTime;

/// Allowed relative deviation of the realized utilization from the target.
pub const UTILIZATION_TOLERANCE: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenSpec {
    pub n_messages: usize,
    pub utilization: f64,
    pub n_sets: usize,
    pub seed: u64,
    pub period_ms: (f64, f64),
    pub transmission_bits: (BitTime, BitTime),
    /// Jitter as a fraction of the period, drawn uniformly from this range.
    pub jitter_fraction: (f64, f64),
    /// `D = round(deadline_fraction · T)`; 1 gives implicit deadlines.
    pub deadline_fraction: f64,
    pub error_overhead: BitTime,
    pub lambda: f64,
    pub retry_threshold: f64,
    pub bus_speed: u64,
    /// Attempts per set before giving up.
    pub retry_budget: usize,
}

impl Default for GenSpec {
    fn default() -> Self {
        Self {
            n_messages: 10,
            utilization: 0.5,
            n_sets: 50,
            seed: 0,
            period_ms: (10.0, 1000.0),
            transmission_bits: (55, 135),
            jitter_fraction: (0.0, 0.1),
            deadline_fraction: 1.0,
            error_overhead: 13,
            lambda: SAE_LAMBDA,
            retry_threshold: SAE_EPSILON,
            bus_speed: SAE_BUS_SPEED,
            retry_budget: 10_000,
        }
    }
}

impl GenSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InfeasibleSpec(msg));
        if self.n_messages == 0 {
            return bad("need at least one message".into());
        }
        if !(self.utilization > 0.0 && self.utilization < 1.0) {
            return bad(format!("utilization must lie in (0, 1), got {}", self.utilization));
        }
        let (t_lo, t_hi) = self.period_ms;
        if !(t_lo > 0.0 && t_lo <= t_hi) {
            return bad(format!("empty period range [{t_lo}, {t_hi}] ms"));
        }
        let (c_lo, c_hi) = self.transmission_bits;
        if !(c_lo > 0 && c_lo <= c_hi) {
            return bad(format!("empty transmission range [{c_lo}, {c_hi}] bits"));
        }
        let (j_lo, j_hi) = self.jitter_fraction;
        if !(0.0 <= j_lo && j_lo <= j_hi && j_hi < 1.0) {
            return bad(format!("jitter fraction range [{j_lo}, {j_hi}] must lie in [0, 1)"));
        }
        if !(self.deadline_fraction > 0.0 && self.deadline_fraction <= 1.0) {
            return bad(format!("deadline fraction must lie in (0, 1], got {}", self.deadline_fraction));
        }
        if self.bus_speed == 0 {
            return bad("bus speed must be positive".into());
        }
        if self.retry_budget == 0 {
            return bad("retry budget must be positive".into());
        }
        self.error_model().validate()
    }

    fn error_model(&self) -> ErrorModel {
        ErrorModel::new(self.lambda, RetryLimit::Threshold(self.retry_threshold))
    }

    fn period_bits(&self) -> (f64, f64) {
        let per_ms = self.bus_speed as f64 / 1000.0;
        (self.period_ms.0 * per_ms, self.period_ms.1 * per_ms)
    }
}

pub(crate) fn uunifast_with(n: usize, utilization: f64, rng: &mut impl Rng) -> Vec<f64> {
    let mut out = Vec::with_capacity(n);
    let mut remaining = utilization;
    for k in 1..n {
        let u: f64 = rng.random();
        let next = remaining * u.powf(1.0 / (n - k) as f64);
        out.push(remaining - next);
        remaining = next;
    }
    out.push(remaining);
    out
}

/// `n` positive per-frame utilizations summing to `utilization`.
pub fn uunifast(n: usize, utilization: f64, seed: u64) -> Vec<f64> {
    uunifast_with(n, utilization, &mut ChaCha8Rng::seed_from_u64(seed))
}

fn log_uniform(lo: f64, hi: f64, rng: &mut impl Rng) -> f64 {
    if lo == hi {
        return lo;
    }
    (lo.ln() + rng.random::<f64>() * (hi.ln() - lo.ln())).exp()
}

/// One attempt; `None` when the drawn utilizations cannot be realized.
fn try_generate(spec: &GenSpec, rng: &mut impl Rng) -> Option<MessageSet> {
    let (t_lo, t_hi) = spec.period_bits();
    let (c_lo, c_hi) = spec.transmission_bits;
    let mut drafts = Vec::with_capacity(spec.n_messages);
    for (order, u) in uunifast_with(spec.n_messages, spec.utilization, rng)
        .into_iter()
        .enumerate()
    {
        let lo = t_lo.max(c_lo as f64 / u).ceil();
        let hi = t_hi.min(c_hi as f64 / u).floor();
        if lo > hi {
            return None;
        }
        let period = (log_uniform(lo, hi, rng).round() as BitTime).clamp(lo as BitTime, hi as BitTime);
        let transmission = ((u * period as f64).round() as BitTime).clamp(c_lo, c_hi);
        drafts.push((period, order, transmission));
    }
    let realized: f64 = drafts.iter().map(|&(t, _, c)| c as f64 / t as f64).sum();
    if (realized - spec.utilization).abs() > UTILIZATION_TOLERANCE * spec.utilization {
        return None;
    }
    // Rate-monotonic priorities, ties by generation order.
    drafts.sort_unstable_by_key(|&(t, order, _)| (t, order));
    let (j_lo, j_hi) = spec.jitter_fraction;
    let frames = drafts
        .into_iter()
        .enumerate()
        .map(|(prio, (period, _, transmission))| {
            let fraction = if j_lo < j_hi { rng.random_range(j_lo..j_hi) } else { j_lo };
            let jitter = (fraction * period as f64).floor() as BitTime;
            let deadline = ((spec.deadline_fraction * period as f64).round() as BitTime).max(transmission);
            Frame::new(format!("m{prio}"), prio as u32, transmission, period, deadline, spec.error_overhead)
                .with_jitter(jitter)
        })
        .collect();
    MessageSet::new(frames, spec.bus_speed, spec.error_model()).ok()
}

fn generate_indexed(spec: &GenSpec, index: usize) -> Result<MessageSet> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(index as u64);
    (0..spec.retry_budget)
        .find_map(|_| try_generate(spec, &mut rng))
        .ok_or_else(|| {
            Error::InfeasibleSpec(format!(
                "no set with {} messages at utilization {} after {} attempts",
                spec.n_messages, spec.utilization, spec.retry_budget
            ))
        })
}

/// The first set of the spec's sequence.
pub fn generate_set(spec: &GenSpec) -> Result<MessageSet> {
    spec.validate()?;
    generate_indexed(spec, 0)
}

/// `spec.n_sets` sets; set `k` depends only on the seed and `k`.
pub fn generate_sets(spec: &GenSpec) -> Result<Vec<MessageSet>> {
    spec.validate()?;
    (0..spec.n_sets)
        .into_par_iter()
        .map(|k| generate_indexed(spec, k))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uunifast_single() {
        assert_eq!(uunifast(1, 0.5, 99), vec![0.5]);
    }

    #[test]
    fn uunifast_conserves_and_repeats() {
        let u = uunifast(10, 0.5, 3);
        assert_eq!(u.len(), 10);
        assert!(u.iter().all(|&x| x > 0.0));
        assert!((u.iter().sum::<f64>() - 0.5).abs() < 1e-12);
        assert_eq!(u, uunifast(10, 0.5, 3));
        assert_ne!(u, uunifast(10, 0.5, 4));
    }

    #[test]
    fn fifty_sets_hit_target() {
        let spec = GenSpec {
            seed: 7,
            ..GenSpec::default()
        };
        let sets = generate_sets(&spec).unwrap();
        assert_eq!(sets.len(), 50);
        for set in &sets {
            assert_eq!(set.len(), 10);
            let u = set.utilization();
            assert!((0.475..=0.525).contains(&u), "utilization {u}");
            for (k, f) in set.frames().iter().enumerate() {
                assert!((55..=135).contains(&f.transmission));
                assert!((1250..=125_000).contains(&f.period));
                assert_eq!(f.deadline, f.period);
                assert!(f.jitter * 10 < f.period);
                if k > 0 {
                    assert!(set.frame(k - 1).period <= f.period);
                }
            }
        }
        assert_eq!(sets, generate_sets(&spec).unwrap());
    }

    #[test]
    fn single_message() {
        let spec = GenSpec {
            n_messages: 1,
            utilization: 0.02,
            n_sets: 1,
            ..GenSpec::default()
        };
        let set = generate_set(&spec).unwrap();
        assert_eq!(set.len(), 1);
        assert!((set.utilization() - 0.02).abs() <= 0.001);
    }

    #[test]
    fn infeasible_spec() {
        // Ten frames of at most 135 bits every 10 ms cannot reach 95%.
        let spec = GenSpec {
            utilization: 0.95,
            period_ms: (10.0, 10.0),
            retry_budget: 50,
            ..GenSpec::default()
        };
        assert!(matches!(generate_set(&spec), Err(Error::InfeasibleSpec(_))));
        let spec = GenSpec {
            utilization: 1.5,
            ..GenSpec::default()
        };
        assert!(matches!(generate_set(&spec), Err(Error::InfeasibleSpec(_))));
    }

    #[test]
    fn constrained_deadlines() {
        let spec = GenSpec {
            deadline_fraction: 0.5,
            n_sets: 3,
            ..GenSpec::default()
        };
        for set in generate_sets(&spec).unwrap() {
            assert!(set.frames().iter().all(|f| f.deadline < f.period));
        }
    }
}
