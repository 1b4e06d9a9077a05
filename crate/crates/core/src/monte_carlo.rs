//! Discrete-event simulation of the critical instant with random
//! retransmissions, used as ground truth for the analytic curves.
//!
//! Each sample starts with the bus held by a lower-priority frame, releases
//! the frame under analysis together with every higher-priority frame at 0
//! and periodically after, and arbitrates by priority whenever the bus
//! frees. Each instance draws its number of failed attempts from the same
//! retry distribution the analysis convolves; every failed attempt occupies
//! `C + E` and is followed by a fresh arbitration round. An instance
//! released exactly when the bus frees misses that round.
//!
//! Samples are split over a fixed number of shards. Shard `s` draws from the
//! ChaCha8 stream `s` of the seed, so reports do not depend on the number of
//! worker threads.

use std::collections::{BTreeMap, VecDeque};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::deterministic::{det_wcrt, DetOptions};
use crate::error::{Error, Result};
use crate::exceedance::{ExceedanceCurve, Method};
use crate::model::{blocking_time, retry_distribution, BlockingRule, MessageSet};
use crate::pmf::{BitTime, Pmf};

pub use crate::exceedance::mse;

/// Name and version of the generator, recorded in every report.
pub const RNG_ALGORITHM: &str = "ChaCha8 (rand_chacha 0.9, stream per shard)";

pub const SHARDS: u64 = 64;

pub const DEFAULT_SIM_HORIZON: BitTime = 1 << 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlockingMode {
    /// The bus is held for exactly the worst-case blocking time.
    #[default]
    WorstCaseDeterministic,
    /// A uniformly chosen lower-priority frame holds the bus for a uniformly
    /// drawn remainder of its `C + E`.
    Sampled,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JitterMode {
    #[default]
    Off,
    /// Each release is delayed by a uniform integer in `[0, J]`.
    Uniform,
}

#[derive(Debug, Clone)]
pub struct SimConfig {
    pub set: MessageSet,
    pub frame: usize,
    pub samples: u64,
    pub seed: u64,
    /// Number of leading instances of the frame whose responses are recorded.
    pub instances: usize,
    pub blocking: BlockingMode,
    /// Which frames may hold the bus at the critical instant.
    pub blocking_rule: BlockingRule,
    pub jitter: JitterMode,
    pub horizon: BitTime,
}

impl SimConfig {
    /// Records as many instances as the error-free busy period holds.
    pub fn new(set: MessageSet, frame: usize, samples: u64, seed: u64) -> Result<Self> {
        set.check_index(frame)?;
        let instances = det_wcrt(&set, frame, &DetOptions::default())
            .map(|r| r.instances)
            .unwrap_or(1);
        Ok(Self {
            set,
            frame,
            samples,
            seed,
            instances,
            blocking: BlockingMode::default(),
            blocking_rule: BlockingRule::default(),
            jitter: JitterMode::default(),
            horizon: DEFAULT_SIM_HORIZON,
        })
    }

    fn validate(&self) -> Result<()> {
        self.set.check_index(self.frame)?;
        if self.samples == 0 {
            return Err(Error::InvalidParameter("samples must be at least 1".into()));
        }
        if self.instances == 0 {
            return Err(Error::InvalidParameter("instances must be at least 1".into()));
        }
        Ok(())
    }
}

pub type Histogram = BTreeMap<BitTime, u64>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub frame_id: String,
    pub seed: u64,
    pub samples: u64,
    pub rng: String,
    pub shards: u64,
    pub bits_per_ms: f64,
    pub blocking: BlockingMode,
    pub jitter: JitterMode,
    /// Response-time counts of each recorded instance.
    pub instance_histograms: Vec<Histogram>,
    /// Counts of the largest recorded response of each sample.
    pub worst_histogram: Histogram,
}

struct Stream {
    period: BitTime,
    jitter: BitTime,
    transmission: BitTime,
    failed_attempt: BitTime,
    cdf: Vec<f64>,
    next_ordinal: u64,
    next_release: BitTime,
    pending: VecDeque<(BitTime, u64)>,
    failures_left: Option<usize>,
}

impl Stream {
    fn draw_failures(&self, rng: &mut ChaCha8Rng) -> usize {
        let u: f64 = rng.random();
        // Mass truncated by the retry limit lands on the limit itself.
        self.cdf
            .iter()
            .position(|&c| u < c)
            .unwrap_or(self.cdf.len() - 1)
    }

    fn release_time(&self, ordinal: u64, jitter: JitterMode, rng: &mut ChaCha8Rng) -> BitTime {
        let base = ordinal * self.period;
        match jitter {
            JitterMode::Uniform if self.jitter > 0 => base + rng.random_range(0..=self.jitter),
            _ => base,
        }
    }
}

struct Simulator<'a> {
    config: &'a SimConfig,
    streams: Vec<Stream>,
    lower: Vec<BitTime>,
    blocking: BitTime,
}

impl<'a> Simulator<'a> {
    fn new(config: &'a SimConfig) -> Result<Self> {
        let set = &config.set;
        let frames = set.frames();
        let streams = frames[..=config.frame]
            .iter()
            .map(|f| {
                let (masses, _) = retry_distribution(f, &set.error_model)?;
                let cdf = masses
                    .iter()
                    .scan(0.0, |acc, m| {
                        *acc += m;
                        Some(*acc)
                    })
                    .collect();
                Ok(Stream {
                    period: f.period,
                    jitter: f.jitter,
                    transmission: f.transmission,
                    failed_attempt: f.attempt_with_error(),
                    cdf,
                    next_ordinal: 0,
                    next_release: 0,
                    pending: VecDeque::new(),
                    failures_left: None,
                })
            })
            .collect::<Result<_>>()?;
        let first_blocker = match config.blocking_rule {
            BlockingRule::LowerPriority => config.frame + 1,
            BlockingRule::IncludingSelf => config.frame,
        };
        let lower = frames[first_blocker..]
            .iter()
            .map(|f| f.attempt_with_error())
            .collect();
        Ok(Self {
            config,
            streams,
            lower,
            blocking: blocking_time(set, config.frame, config.blocking_rule),
        })
    }

    fn initial_blocking(&self, rng: &mut ChaCha8Rng) -> BitTime {
        match self.config.blocking {
            BlockingMode::WorstCaseDeterministic => self.blocking,
            BlockingMode::Sampled if self.lower.is_empty() => 0,
            BlockingMode::Sampled => {
                let held = self.lower[rng.random_range(0..self.lower.len())];
                rng.random_range(0..=held)
            }
        }
    }

    /// Moves every release `< until` (or `<= until` when `inclusive`) into
    /// the pending queues.
    fn admit(&mut self, until: BitTime, inclusive: bool, rng: &mut ChaCha8Rng) {
        let jitter = self.config.jitter;
        for s in &mut self.streams {
            while s.next_release < until || (inclusive && s.next_release == until) {
                s.pending.push_back((s.next_release, s.next_ordinal));
                s.next_ordinal += 1;
                s.next_release = s.release_time(s.next_ordinal, jitter, rng);
            }
        }
    }

    /// One critical-instant run; writes each recorded response into
    /// `responses`.
    fn run(&mut self, rng: &mut ChaCha8Rng, responses: &mut [BitTime]) -> Result<()> {
        let jitter = self.config.jitter;
        for s in &mut self.streams {
            s.next_ordinal = 0;
            s.pending.clear();
            s.failures_left = None;
            s.next_release = s.release_time(0, jitter, rng);
        }
        let target = self.config.frame;
        let wanted = self.config.instances as u64;
        let mut now = self.initial_blocking(rng);
        let mut idle = now == 0;
        loop {
            if now > self.config.horizon {
                return Err(Error::NonConvergence {
                    what: "simulated busy period",
                    horizon: self.config.horizon,
                });
            }
            if idle {
                now = self
                    .streams
                    .iter()
                    .map(|s| s.next_release)
                    .min()
                    .expect("at least one stream");
                self.admit(now, true, rng);
            } else {
                self.admit(now, false, rng);
            }
            let Some(winner) = self.streams.iter().position(|s| !s.pending.is_empty()) else {
                idle = true;
                continue;
            };
            idle = false;
            let s = &mut self.streams[winner];
            let left = match s.failures_left {
                Some(n) => n,
                None => s.draw_failures(rng),
            };
            if left > 0 {
                now += s.failed_attempt;
                s.failures_left = Some(left - 1);
                continue;
            }
            now += s.transmission;
            s.failures_left = None;
            let (release, ordinal) = s.pending.pop_front().expect("winner has a pending instance");
            if winner == target && ordinal < wanted {
                responses[ordinal as usize] = now - release;
                if ordinal + 1 == wanted {
                    return Ok(());
                }
            }
        }
    }
}

struct Tally {
    instances: Vec<Histogram>,
    worst: Histogram,
}

impl Tally {
    fn new(instances: usize) -> Self {
        Self {
            instances: vec![Histogram::new(); instances],
            worst: Histogram::new(),
        }
    }

    fn merge(mut self, other: Tally) -> Tally {
        for (mine, theirs) in self.instances.iter_mut().zip(other.instances) {
            for (v, c) in theirs {
                *mine.entry(v).or_default() += c;
            }
        }
        for (v, c) in other.worst {
            *self.worst.entry(v).or_default() += c;
        }
        self
    }
}

fn shard_samples(total: u64, shard: u64) -> u64 {
    total / SHARDS + u64::from(shard < total % SHARDS)
}

pub fn simulate(config: &SimConfig) -> Result<SimReport> {
    config.validate()?;
    // Fail early on a bad error model rather than inside a worker.
    Simulator::new(config)?;
    let tally = (0..SHARDS)
        .into_par_iter()
        .map(|shard| -> Result<Tally> {
            let mut sim = Simulator::new(config)?;
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            rng.set_stream(shard);
            let mut tally = Tally::new(config.instances);
            let mut responses = vec![0; config.instances];
            for _ in 0..shard_samples(config.samples, shard) {
                sim.run(&mut rng, &mut responses)?;
                for (hist, &r) in tally.instances.iter_mut().zip(&responses) {
                    *hist.entry(r).or_default() += 1;
                }
                let worst = *responses.iter().max().expect("at least one instance");
                *tally.worst.entry(worst).or_default() += 1;
            }
            Ok(tally)
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold(Tally::new(config.instances), Tally::merge);
    Ok(SimReport {
        frame_id: config.set.frame(config.frame).id.clone(),
        seed: config.seed,
        samples: config.samples,
        rng: RNG_ALGORITHM.to_string(),
        shards: SHARDS,
        bits_per_ms: config.set.bits_per_ms(),
        blocking: config.blocking,
        jitter: config.jitter,
        instance_histograms: tally.instances,
        worst_histogram: tally.worst,
    })
}

fn histogram_pmf(hist: &Histogram, samples: u64) -> Pmf {
    let n = samples as f64;
    Pmf::from_pairs(hist.iter().map(|(&v, &c)| (v, c as f64 / n)))
        .expect("histogram counts sum to the sample count")
}

/// `F̂(t)`: the largest fraction of samples, over recorded instances, whose
/// response exceeds `t`.
pub fn empirical_exceedance(report: &SimReport) -> ExceedanceCurve {
    let pmfs: Vec<Pmf> = report
        .instance_histograms
        .iter()
        .map(|h| histogram_pmf(h, report.samples))
        .collect();
    ExceedanceCurve::from_pmfs(&pmfs, Method::MonteCarlo, &report.frame_id, report.bits_per_ms)
}

impl SimReport {
    /// Empirical distribution of the per-sample worst response.
    pub fn worst_pmf(&self) -> Pmf {
        histogram_pmf(&self.worst_histogram, self.samples)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datasets;
    use crate::model::{ErrorModel, Frame, RetryLimit};

    fn error_free(set: MessageSet) -> MessageSet {
        set.with_error_model(ErrorModel::new(0.0, RetryLimit::Fixed(0)))
            .unwrap()
            .without_retry_overrides()
    }

    #[test]
    fn error_free_matches_deterministic() {
        let set = error_free(datasets::sae());
        for i in [0, 6, 16] {
            let det = det_wcrt(&set, i, &DetOptions::default()).unwrap();
            let report = simulate(&SimConfig::new(set.clone(), i, 10, 3).unwrap()).unwrap();
            assert_eq!(report.worst_histogram.len(), 1);
            assert_eq!(report.worst_histogram.keys().next(), Some(&det.wcrt), "frame {i}");
        }
    }

    #[test]
    fn blocking_rule_matches_deterministic() {
        let set = error_free(datasets::sae());
        let opts = DetOptions {
            blocking: BlockingRule::IncludingSelf,
            ..DetOptions::default()
        };
        for i in [3, 16] {
            let det = det_wcrt(&set, i, &opts).unwrap();
            let config = SimConfig {
                blocking_rule: BlockingRule::IncludingSelf,
                ..SimConfig::new(set.clone(), i, 10, 3).unwrap()
            };
            let report = simulate(&config).unwrap();
            assert_eq!(report.worst_histogram.keys().next_back(), Some(&det.wcrt), "frame {i}");
        }
    }

    #[test]
    fn reproducible_for_fixed_seed() {
        let config = SimConfig::new(datasets::example3(), 1, 5000, 11).unwrap();
        assert_eq!(simulate(&config).unwrap(), simulate(&config).unwrap());
        let other = SimConfig { seed: 12, ..config.clone() };
        assert_ne!(simulate(&config).unwrap(), simulate(&other).unwrap());
    }

    #[test]
    fn histograms_count_every_sample() {
        let config = SimConfig {
            instances: 2,
            ..SimConfig::new(datasets::example3(), 1, 777, 5).unwrap()
        };
        let report = simulate(&config).unwrap();
        assert_eq!(report.instance_histograms.len(), 2);
        for h in report.instance_histograms.iter().chain([&report.worst_histogram]) {
            assert_eq!(h.values().sum::<u64>(), 777);
        }
    }

    #[test]
    fn constant_responses_give_a_step() {
        let report = SimReport {
            frame_id: "f".into(),
            seed: 0,
            samples: 4,
            rng: RNG_ALGORITHM.into(),
            shards: SHARDS,
            bits_per_ms: 1.0,
            blocking: BlockingMode::default(),
            jitter: JitterMode::default(),
            instance_histograms: vec![Histogram::from([(5, 4)])],
            worst_histogram: Histogram::from([(5, 4)]),
        };
        let curve = empirical_exceedance(&report);
        assert_eq!(curve.eval(4), 1.0);
        assert_eq!(curve.eval(5), 0.0);
    }

    #[test]
    fn sampled_blocking_never_exceeds_worst_case() {
        let set = error_free(datasets::sae());
        let i = 8;
        let det = det_wcrt(&set, i, &DetOptions::default()).unwrap();
        let config = SimConfig {
            blocking: BlockingMode::Sampled,
            ..SimConfig::new(set, i, 2000, 1).unwrap()
        };
        let report = simulate(&config).unwrap();
        assert!(*report.worst_histogram.keys().last().unwrap() <= det.wcrt);
    }

    #[test]
    fn jitter_only_delays_releases() {
        let set = MessageSet::new(
            vec![
                Frame::new("a", 0, 10, 100, 100, 0).with_jitter(10),
                Frame::new("b", 1, 10, 100, 100, 0),
            ],
            1000,
            ErrorModel::error_free(),
        )
        .unwrap();
        let config = SimConfig {
            jitter: JitterMode::Uniform,
            ..SimConfig::new(set, 1, 2000, 4).unwrap()
        };
        let report = simulate(&config).unwrap();
        // b either waits for a (released at 0) or goes first (a delayed).
        let seen: Vec<_> = report.worst_histogram.keys().copied().collect();
        assert_eq!(seen, vec![10, 20]);
    }

    #[test]
    fn zero_samples_rejected() {
        let config = SimConfig::new(datasets::example3(), 1, 0, 0);
        assert!(simulate(&config.unwrap()).is_err());
    }
}
