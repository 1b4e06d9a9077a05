//! Exceedance functions `F(t) = max_j P(R_j > t)` as right-continuous step
//! functions over bit-times.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pmf::{BitTime, Pmf};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Improved,
    Legacy,
    Deterministic,
    MonteCarlo,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Improved => "improved",
            Method::Legacy => "legacy",
            Method::Deterministic => "deterministic",
            Method::MonteCarlo => "monte_carlo",
        })
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "improved" => Ok(Method::Improved),
            "legacy" => Ok(Method::Legacy),
            "deterministic" => Ok(Method::Deterministic),
            "monte_carlo" | "empirical" => Ok(Method::MonteCarlo),
            other => Err(format!("unknown method {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExceedanceCurve {
    pub method: Method,
    pub frame_id: String,
    /// Bit-times per millisecond, for ms-denominated queries.
    pub bits_per_ms: f64,
    /// Value below the first breakpoint.
    head: f64,
    /// `(t_k, F)`: `F(t) = F` on `[t_k, t_{k+1})`.
    steps: Vec<(BitTime, f64)>,
}

impl ExceedanceCurve {
    /// Upper envelope of the tails of per-instance response distributions.
    pub fn from_pmfs(
        pmfs: &[Pmf],
        method: Method,
        frame_id: impl Into<String>,
        bits_per_ms: f64,
    ) -> Self {
        let breakpoints: BTreeSet<BitTime> = pmfs
            .iter()
            .flat_map(|p| p.entries().iter().map(|&(v, _)| v))
            .collect();
        let head = pmfs
            .iter()
            .map(Pmf::total_with_residual)
            .fold(0.0, f64::max);
        // Tails as suffix sums from the top, so small exceedance values do
        // not drown in cancellation error.
        let suffixes: Vec<Vec<f64>> = pmfs
            .iter()
            .map(|p| {
                let mut acc = p.residual();
                let mut out = vec![acc];
                for &(_, m) in p.entries().iter().rev() {
                    acc += m;
                    out.push(acc);
                }
                out.reverse();
                out
            })
            .collect();
        let mut cursors = vec![0usize; pmfs.len()];
        let mut steps = Vec::with_capacity(breakpoints.len());
        for t in breakpoints {
            let mut value: f64 = 0.0;
            for (k, pmf) in pmfs.iter().enumerate() {
                let entries = pmf.entries();
                while cursors[k] < entries.len() && entries[cursors[k]].0 <= t {
                    cursors[k] += 1;
                }
                value = value.max(suffixes[k][cursors[k]]);
            }
            steps.push((t, value.clamp(0.0, 1.0)));
        }
        let mut curve = Self {
            method,
            frame_id: frame_id.into(),
            bits_per_ms,
            head: head.clamp(0.0, 1.0),
            steps,
        };
        curve.enforce_monotone();
        curve
    }

    /// Rebuilds a curve from `(t, F(t))` rows sorted by `t`.
    pub fn from_rows(
        rows: Vec<(BitTime, f64)>,
        method: Method,
        frame_id: impl Into<String>,
        bits_per_ms: f64,
    ) -> Result<Self> {
        if rows.windows(2).any(|w| w[0].0 >= w[1].0) {
            return Err(Error::InvalidParameter(
                "exceedance rows must have strictly increasing t".into(),
            ));
        }
        if rows.iter().any(|&(_, p)| !(0.0..=1.0).contains(&p)) {
            return Err(Error::InvalidParameter(
                "exceedance probabilities must lie in [0, 1]".into(),
            ));
        }
        let head = rows.first().map_or(0.0, |&(_, p)| p);
        Ok(Self {
            method,
            frame_id: frame_id.into(),
            bits_per_ms,
            head,
            steps: rows,
        })
    }

    /// A step from 1 to 0 at `value`: the curve of a deterministic response.
    pub fn step_at(value: BitTime, method: Method, frame_id: impl Into<String>, bits_per_ms: f64) -> Self {
        let pmf = Pmf::point(value, 1.0).expect("unit mass");
        Self::from_pmfs(&[pmf], method, frame_id, bits_per_ms)
    }

    fn enforce_monotone(&mut self) {
        let mut running = self.head;
        for step in &mut self.steps {
            step.1 = step.1.min(running);
            running = step.1;
        }
    }

    /// `F(t)` at an integer bit-time.
    pub fn eval(&self, t: BitTime) -> f64 {
        let idx = self.steps.partition_point(|&(v, _)| v <= t);
        if idx == 0 {
            self.head
        } else {
            self.steps[idx - 1].1
        }
    }

    /// `F(t)` at a real-valued bit-time.
    pub fn eval_bits(&self, t: f64) -> f64 {
        if t < 0.0 {
            self.head
        } else {
            self.eval(t.floor() as BitTime)
        }
    }

    pub fn eval_ms(&self, t_ms: f64) -> f64 {
        self.eval_bits(t_ms * self.bits_per_ms)
    }

    pub fn steps(&self) -> &[(BitTime, f64)] {
        &self.steps
    }

    /// Rows for tabular output: the value at `t = 0` followed by every
    /// breakpoint.
    pub fn rows(&self) -> Vec<(BitTime, f64)> {
        let mut rows = Vec::with_capacity(self.steps.len() + 1);
        if self.steps.first().is_none_or(|&(t, _)| t > 0) {
            rows.push((0, self.eval(0)));
        }
        rows.extend_from_slice(&self.steps);
        rows
    }
}

fn grid(points: usize, lo: f64, hi: f64) -> Result<impl Iterator<Item = f64>> {
    if points < 2 {
        return Err(Error::InvalidParameter("need at least two grid points".into()));
    }
    if lo.is_nan() || hi.is_nan() || hi <= lo {
        return Err(Error::InvalidParameter(format!("empty range [{lo}, {hi}]")));
    }
    let step = (hi - lo) / (points - 1) as f64;
    Ok((0..points).map(move |k| lo + k as f64 * step))
}

/// Mean squared difference on `points` evenly spaced bit-times in `[lo, hi]`.
pub fn mse(a: &ExceedanceCurve, b: &ExceedanceCurve, points: usize, lo: f64, hi: f64) -> Result<f64> {
    let sum: f64 = grid(points, lo, hi)?
        .map(|t| (a.eval_bits(t) - b.eval_bits(t)).powi(2))
        .sum();
    Ok(sum / points as f64)
}

/// Largest absolute difference on the same grid as [`mse`].
pub fn max_abs_diff(a: &ExceedanceCurve, b: &ExceedanceCurve, points: usize, lo: f64, hi: f64) -> Result<f64> {
    Ok(grid(points, lo, hi)?
        .map(|t| (a.eval_bits(t) - b.eval_bits(t)).abs())
        .fold(0.0, f64::max))
}

fn check_units(a: &ExceedanceCurve, b: &ExceedanceCurve) -> Result<()> {
    if (a.bits_per_ms - b.bits_per_ms).abs() > 1e-9 * a.bits_per_ms {
        return Err(Error::InvalidParameter(format!(
            "incompatible units: {} vs {} bit-times per ms",
            a.bits_per_ms, b.bits_per_ms
        )));
    }
    Ok(())
}

/// [`mse`] over a millisecond range. Both curves must share a bus speed.
pub fn mse_ms(a: &ExceedanceCurve, b: &ExceedanceCurve, points: usize, lo_ms: f64, hi_ms: f64) -> Result<f64> {
    check_units(a, b)?;
    mse(a, b, points, lo_ms * a.bits_per_ms, hi_ms * a.bits_per_ms)
}

pub fn max_abs_diff_ms(
    a: &ExceedanceCurve,
    b: &ExceedanceCurve,
    points: usize,
    lo_ms: f64,
    hi_ms: f64,
) -> Result<f64> {
    check_units(a, b)?;
    max_abs_diff(a, b, points, lo_ms * a.bits_per_ms, hi_ms * a.bits_per_ms)
}
