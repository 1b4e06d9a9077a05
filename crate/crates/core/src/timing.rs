//! Wall-clock comparison of the improved and legacy analyses.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::analysis::{analyze_frame, legacy_pwcrt, AnalysisOptions};
use crate::error::Result;
use crate::model::MessageSet;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SetTiming {
    pub name: String,
    pub frame_id: String,
    pub utilization: f64,
    pub improved_seconds: f64,
    pub legacy_seconds: f64,
    pub improved_convolutions: usize,
    pub legacy_convolutions: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub max: f64,
}

impl Summary {
    pub fn of(values: impl IntoIterator<Item = f64>) -> Self {
        let (mut n, mut sum, mut max) = (0usize, 0.0, 0.0f64);
        for v in values {
            n += 1;
            sum += v;
            max = max.max(v);
        }
        Self {
            mean: if n == 0 { 0.0 } else { sum / n as f64 },
            max,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub repeats: usize,
    pub sets: Vec<SetTiming>,
    pub improved: Summary,
    pub legacy: Summary,
}

fn best_of<T>(repeats: usize, mut f: impl FnMut() -> Result<T>) -> Result<(f64, T)> {
    let mut best = f64::INFINITY;
    let mut last = None;
    for _ in 0..repeats.max(1) {
        let start = Instant::now();
        let out = f()?;
        best = best.min(start.elapsed().as_secs_f64());
        last = Some(out);
    }
    Ok((best, last.expect("at least one repeat")))
}

/// Times both analyses of the lowest-priority frame of each set, keeping the
/// fastest of `repeats` runs. Runs sequentially so timings do not compete
/// for cores.
pub fn bench_sets(
    sets: &[(String, MessageSet)],
    opts: &AnalysisOptions,
    repeats: usize,
) -> Result<BenchReport> {
    let mut timings = Vec::with_capacity(sets.len());
    for (name, set) in sets {
        let i = set.lowest_priority_index()?;
        let (improved_seconds, improved) = best_of(repeats, || analyze_frame(set, i, opts))?;
        let (legacy_seconds, legacy) = best_of(repeats, || legacy_pwcrt(set, i, opts))?;
        timings.push(SetTiming {
            name: name.clone(),
            frame_id: improved.frame_id,
            utilization: set.utilization(),
            improved_seconds,
            legacy_seconds,
            improved_convolutions: improved.convolutions,
            legacy_convolutions: legacy.convolutions,
        });
    }
    Ok(BenchReport {
        repeats: repeats.max(1),
        improved: Summary::of(timings.iter().map(|t| t.improved_seconds)),
        legacy: Summary::of(timings.iter().map(|t| t.legacy_seconds)),
        sets: timings,
    })
}
