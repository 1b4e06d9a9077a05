//! Static CAN message-set model and the Poisson error-retransmission model.
//!
//! All temporal quantities are integer bit-times. A frame that suffers `n`
//! errors occupies the bus for `C + n(C + E)` bit-times: every failed attempt
//! costs the full frame plus the error-signaling overhead `E`, and the final
//! attempt succeeds after `C`.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pmf::{BitTime, Pmf};

/// Upper bound on retry limits derived from a residual threshold.
pub const RETRY_LIMIT_CAP: u32 = 256;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Frame {
    pub id: String,
    /// Lower value wins arbitration.
    pub priority: u32,
    /// Worst-case error-free transmission time `C`.
    pub transmission: BitTime,
    /// Minimum inter-arrival time `T`.
    pub period: BitTime,
    /// Relative deadline `D`.
    pub deadline: BitTime,
    /// Error-signaling overhead `E` added to every failed attempt.
    pub error_overhead: BitTime,
    /// Release jitter; only the simulator and the generator use it.
    #[serde(default)]
    pub jitter: BitTime,
    /// Explicit distribution of the retry count, overriding the Poisson model.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub retry_probabilities: Option<Vec<f64>>,
}

impl Frame {
    pub fn new(
        id: impl Into<String>,
        priority: u32,
        transmission: BitTime,
        period: BitTime,
        deadline: BitTime,
        error_overhead: BitTime,
    ) -> Self {
        Self {
            id: id.into(),
            priority,
            transmission,
            period,
            deadline,
            error_overhead,
            jitter: 0,
            retry_probabilities: None,
        }
    }

    pub fn with_retry_probabilities(mut self, masses: Vec<f64>) -> Self {
        self.retry_probabilities = Some(masses);
        self
    }

    pub fn with_jitter(mut self, jitter: BitTime) -> Self {
        self.jitter = jitter;
        self
    }

    /// Bus time of one failed attempt, `C + E`.
    pub fn attempt_with_error(&self) -> BitTime {
        self.transmission + self.error_overhead
    }

    pub fn utilization(&self) -> f64 {
        self.transmission as f64 / self.period as f64
    }

    fn validate(&self) -> Result<()> {
        let invalid = |reason: &str| Error::InvalidFrame {
            frame: self.id.clone(),
            reason: reason.to_string(),
        };
        if self.transmission == 0 {
            return Err(invalid("transmission time must be at least one bit"));
        }
        if self.period == 0 {
            return Err(invalid("period must be at least one bit"));
        }
        if self.deadline > self.period {
            return Err(Error::ConstrainedDeadline {
                frame: self.id.clone(),
                deadline: self.deadline,
                period: self.period,
            });
        }
        if let Some(masses) = &self.retry_probabilities {
            if masses.is_empty() {
                return Err(invalid("retry_probabilities must not be empty"));
            }
            if masses.iter().any(|&m| !(0.0..=1.0).contains(&m)) {
                return Err(invalid("retry probabilities must lie in [0, 1]"));
            }
            if masses.iter().sum::<f64>() > 1.0 + 1e-9 {
                return Err(invalid("retry probabilities sum to more than 1"));
            }
        }
        Ok(())
    }
}

/// How the retry cap `k` is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RetryLimit {
    Fixed(u32),
    /// Smallest `k` whose neglected probability is below the threshold.
    Threshold(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorModel {
    /// Poisson error rate per bit-time.
    pub lambda: f64,
    pub retry: RetryLimit,
    /// Put the truncated tail on the largest retry count instead of keeping
    /// it as residual. Only meant for reproducing hand-worked tables.
    #[serde(default)]
    pub fold_truncation: bool,
}

impl ErrorModel {
    pub fn new(lambda: f64, retry: RetryLimit) -> Self {
        Self {
            lambda,
            retry,
            fold_truncation: false,
        }
    }

    pub fn error_free() -> Self {
        Self::new(0.0, RetryLimit::Fixed(0))
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::InvalidErrorModel(format!(
                "lambda must be a finite non-negative rate, got {}",
                self.lambda
            )));
        }
        if let RetryLimit::Threshold(p) = self.retry {
            if !(p > 0.0 && p < 1.0) {
                return Err(Error::InvalidErrorModel(format!(
                    "residual threshold must lie in (0, 1), got {p}"
                )));
            }
        }
        Ok(())
    }
}

/// Frames sorted by priority, the bus speed used for ms conversions, and the
/// error model shared by every frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MessageSet {
    frames: Vec<Frame>,
    pub bus_speed: u64,
    pub error_model: ErrorModel,
}

impl MessageSet {
    pub fn new(mut frames: Vec<Frame>, bus_speed: u64, error_model: ErrorModel) -> Result<Self> {
        if bus_speed == 0 {
            return Err(Error::InvalidParameter("bus speed must be positive".into()));
        }
        error_model.validate()?;
        let mut priorities = HashSet::new();
        let mut ids = HashSet::new();
        for frame in &frames {
            frame.validate()?;
            if !priorities.insert(frame.priority) {
                return Err(Error::DuplicatePriority(frame.priority));
            }
            if !ids.insert(frame.id.clone()) {
                return Err(Error::DuplicateId(frame.id.clone()));
            }
        }
        frames.sort_by_key(|f| f.priority);
        Ok(Self {
            frames,
            bus_speed,
            error_model,
        })
    }

    pub fn frames(&self) -> &[Frame] {
        &self.frames
    }

    pub fn frame(&self, index: usize) -> &Frame {
        &self.frames[index]
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn index_of(&self, id: &str) -> Result<usize> {
        self.frames
            .iter()
            .position(|f| f.id == id)
            .ok_or_else(|| Error::UnknownFrame(id.to_string()))
    }

    pub fn lowest_priority_index(&self) -> Result<usize> {
        self.frames
            .len()
            .checked_sub(1)
            .ok_or_else(|| Error::UnknownFrame("<lowest priority of an empty set>".into()))
    }

    pub fn check_index(&self, index: usize) -> Result<()> {
        if index < self.frames.len() {
            Ok(())
        } else {
            Err(Error::UnknownFrame(format!("#{index}")))
        }
    }

    pub fn bits_per_ms(&self) -> f64 {
        self.bus_speed as f64 / 1000.0
    }

    pub fn bits_to_ms(&self, bits: f64) -> f64 {
        bits / self.bits_per_ms()
    }

    pub fn utilization(&self) -> f64 {
        self.frames.iter().map(Frame::utilization).sum()
    }

    /// Same frames under a different error model.
    pub fn with_error_model(&self, error_model: ErrorModel) -> Result<Self> {
        error_model.validate()?;
        Ok(Self {
            error_model,
            ..self.clone()
        })
    }

    /// Drops every explicit retry distribution so the Poisson model applies.
    pub fn without_retry_overrides(&self) -> Self {
        let mut out = self.clone();
        for frame in &mut out.frames {
            frame.retry_probabilities = None;
        }
        out
    }

    /// Transmission-time PMF of every frame, indexed like `frames()`.
    pub fn transmission_pmfs(&self) -> Result<Vec<Pmf>> {
        self.frames
            .iter()
            .map(|f| transmission_time_pmf(f, &self.error_model))
            .collect()
    }
}

/// `P_ok(delta) = exp(-lambda * delta)`.
pub fn poisson_ok(lambda: f64, delta: BitTime) -> f64 {
    (-lambda * delta as f64).exp()
}

/// `1 - P_ok(delta)`, evaluated without cancellation.
pub fn poisson_errors(lambda: f64, delta: BitTime) -> f64 {
    -(-lambda * delta as f64).exp_m1()
}

/// Probability of exactly `n` retries.
pub fn retry_probability(n: u32, lambda: f64, transmission: BitTime, overhead: BitTime) -> f64 {
    if n == 0 {
        return poisson_ok(lambda, transmission);
    }
    let retry = transmission + overhead;
    poisson_errors(lambda, transmission)
        * poisson_errors(lambda, retry).powi(n as i32 - 1)
        * poisson_ok(lambda, retry)
}

/// Probability that more than `k` retries are needed. The retry sequence is
/// geometric after the first attempt, so this is
/// `P_err(C) * P_err(C + E)^k`.
pub fn retry_residual(k: u32, lambda: f64, transmission: BitTime, overhead: BitTime) -> f64 {
    poisson_errors(lambda, transmission)
        * poisson_errors(lambda, transmission + overhead).powi(k as i32)
}

pub fn choose_retry_limit(
    lambda: f64,
    transmission: BitTime,
    overhead: BitTime,
    residual_threshold: f64,
) -> Result<u32> {
    if !(residual_threshold > 0.0 && residual_threshold < 1.0) {
        return Err(Error::InvalidErrorModel(format!(
            "residual threshold must lie in (0, 1), got {residual_threshold}"
        )));
    }
    (0..=RETRY_LIMIT_CAP)
        .find(|&k| retry_residual(k, lambda, transmission, overhead) < residual_threshold)
        .ok_or(Error::RetryLimitUnbounded {
            threshold: residual_threshold,
            cap: RETRY_LIMIT_CAP,
        })
}

/// Retry-count masses `P_0..=P_k` and the neglected probability.
pub fn retry_distribution(frame: &Frame, model: &ErrorModel) -> Result<(Vec<f64>, f64)> {
    if let Some(masses) = &frame.retry_probabilities {
        let residual = (1.0 - masses.iter().sum::<f64>()).max(0.0);
        return Ok((masses.clone(), residual));
    }
    let (c, e) = (frame.transmission, frame.error_overhead);
    let k = match model.retry {
        RetryLimit::Fixed(k) => k,
        RetryLimit::Threshold(p) => choose_retry_limit(model.lambda, c, e, p)?,
    };
    let masses = (0..=k)
        .map(|n| retry_probability(n, model.lambda, c, e))
        .collect();
    Ok((masses, retry_residual(k, model.lambda, c, e)))
}

/// Variable transmission time: `C + n(C + E)` with probability `P_n`.
pub fn transmission_time_pmf(frame: &Frame, model: &ErrorModel) -> Result<Pmf> {
    let retrans = retrans_pmf(frame, model)?;
    Ok(retrans.shift(frame.transmission as i64)?)
}

/// Time lost to retransmissions only: `n(C + E)` with probability `P_n`.
pub fn retrans_pmf(frame: &Frame, model: &ErrorModel) -> Result<Pmf> {
    let (masses, residual) = retry_distribution(frame, model)?;
    let step = frame.attempt_with_error();
    let pmf = Pmf::from_pairs(
        masses
            .iter()
            .enumerate()
            .map(|(n, &m)| (n as BitTime * step, m)),
    )?;
    let residual = residual.min(1.0 - f64::EPSILON);
    let pmf = if residual > 0.0 {
        pmf.with_residual(residual)?
    } else {
        pmf
    };
    Ok(if model.fold_truncation {
        pmf.fold_residual()
    } else {
        pmf
    })
}

/// Which frames can block frame `i` at the critical instant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlockingRule {
    /// Strictly lower-priority frames.
    #[default]
    LowerPriority,
    /// Frame `i` itself and every lower-priority frame.
    IncludingSelf,
}

/// Longest single transmission, with error overhead, of a frame that can
/// block `i`.
pub fn blocking_time(set: &MessageSet, i: usize, rule: BlockingRule) -> BitTime {
    let from = match rule {
        BlockingRule::LowerPriority => i + 1,
        BlockingRule::IncludingSelf => i,
    };
    set.frames()
        .iter()
        .skip(from)
        .map(Frame::attempt_with_error)
        .max()
        .unwrap_or(0)
}
