//! Sparse discrete probability mass functions over integer bit-times.
//!
//! A [`Pmf`] stores its support as strictly increasing `(value, mass)` pairs
//! plus a `residual`: probability mass that has been truncated away and is
//! always interpreted as lying beyond the largest represented value. Keeping
//! the residual explicit lets truncation (retry caps, pruning of vanishing
//! masses) stay conservative for every exceedance query.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// One bit-time is the indivisible unit of time on the bus.
pub type BitTime = u64;

/// Slack allowed when checking that a distribution does not exceed unit mass.
pub const MASS_TOLERANCE: f64 = 1e-9;

/// Entries with less mass than this are moved into the residual.
pub const MASS_FLOOR: f64 = 1e-300;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PmfError {
    #[error("probability mass {0} is outside (0, 1]")]
    InvalidMass(f64),
    #[error("combined mass {0} exceeds 1")]
    MassOverflow(f64),
    #[error("shifting value {value} by {delta} would produce a negative bit-time")]
    NegativeValue { value: BitTime, delta: i64 },
}

/// Which side of a split point owns the point itself.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Boundary {
    /// Stable part is the closed interval `[0, t]`.
    ToStable,
    /// Stable part is `[0, t)`; the point `t` is pending.
    ToPending,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Pmf {
    entries: Vec<(BitTime, f64)>,
    residual: f64,
}

impl Pmf {
    /// The zero sub-distribution.
    pub fn empty() -> Self {
        Self::default()
    }

    /// A single value carrying `mass`.
    pub fn point(value: BitTime, mass: f64) -> Result<Self, PmfError> {
        check_mass(mass)?;
        Ok(Self {
            entries: vec![(value, mass)],
            residual: 0.0,
        })
    }

    /// Builds a PMF from arbitrary `(value, mass)` pairs. Duplicate values
    /// are summed; zero masses are dropped.
    pub fn from_pairs<I>(pairs: I) -> Result<Self, PmfError>
    where
        I: IntoIterator<Item = (BitTime, f64)>,
    {
        let mut entries: Vec<(BitTime, f64)> = Vec::new();
        for (value, mass) in pairs {
            if mass == 0.0 {
                continue;
            }
            check_mass(mass)?;
            entries.push((value, mass));
        }
        entries.sort_by_key(|&(v, _)| v);
        let entries = merge_sorted_duplicates(entries);
        let pmf = Self {
            entries,
            residual: 0.0,
        };
        pmf.check_total()?;
        Ok(pmf)
    }

    /// Attaches truncated mass beyond the support.
    pub fn with_residual(mut self, residual: f64) -> Result<Self, PmfError> {
        if !(0.0..1.0).contains(&residual) {
            return Err(PmfError::InvalidMass(residual));
        }
        self.residual = residual;
        self.check_total()?;
        Ok(self)
    }

    pub fn entries(&self) -> &[(BitTime, f64)] {
        &self.entries
    }

    pub fn residual(&self) -> f64 {
        self.residual
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    /// Sum of the represented masses (residual excluded).
    pub fn total(&self) -> f64 {
        self.entries.iter().map(|&(_, m)| m).sum()
    }

    /// Represented mass plus residual.
    pub fn total_with_residual(&self) -> f64 {
        self.total() + self.residual
    }

    pub fn min_value(&self) -> Option<BitTime> {
        self.entries.first().map(|&(v, _)| v)
    }

    pub fn max_value(&self) -> Option<BitTime> {
        self.entries.last().map(|&(v, _)| v)
    }

    /// Mass at exactly `value`.
    pub fn mass_at(&self, value: BitTime) -> f64 {
        match self.entries.binary_search_by_key(&value, |&(v, _)| v) {
            Ok(idx) => self.entries[idx].1,
            Err(_) => 0.0,
        }
    }

    /// Pointwise sum of two partial distributions. Residuals add.
    pub fn coalesce(&self, other: &Pmf) -> Result<Pmf, PmfError> {
        let out = Pmf {
            entries: merge_add(&self.entries, &other.entries, 0, 1.0),
            residual: self.residual + other.residual,
        };
        out.check_total()?;
        Ok(out)
    }

    /// Distribution of the sum of two independent variables.
    ///
    /// Represented mass multiplies; the residual picks up every product term
    /// that involves either operand's residual.
    pub fn convolve(&self, other: &Pmf) -> Pmf {
        // Iterate over the shorter operand and merge shifted copies of the
        // longer one; retransmission PMFs are tiny so this stays linear in
        // the support of the window.
        let (long, short) = if self.entries.len() >= other.entries.len() {
            (self, other)
        } else {
            (other, self)
        };
        let mut acc: Vec<(BitTime, f64)> = Vec::new();
        for &(value, mass) in &short.entries {
            acc = merge_add(&acc, &long.entries, value, mass);
        }
        let (ta, tb) = (self.total(), other.total());
        let residual = self.residual * (tb + other.residual) + ta * other.residual;
        let mut out = Pmf {
            entries: acc,
            residual,
        };
        out.prune();
        out
    }

    /// Splits at `t` into `(stable, pending)`. The residual always travels
    /// with the pending part.
    pub fn split(&self, t: BitTime, boundary: Boundary) -> (Pmf, Pmf) {
        let cut = self.entries.partition_point(|&(v, _)| match boundary {
            Boundary::ToStable => v <= t,
            Boundary::ToPending => v < t,
        });
        let stable = Pmf {
            entries: self.entries[..cut].to_vec(),
            residual: 0.0,
        };
        let pending = Pmf {
            entries: self.entries[cut..].to_vec(),
            residual: self.residual,
        };
        (stable, pending)
    }

    /// Translates every value by `delta`.
    pub fn shift(&self, delta: i64) -> Result<Pmf, PmfError> {
        let entries = self
            .entries
            .iter()
            .map(|&(v, m)| {
                v.checked_add_signed(delta)
                    .map(|nv| (nv, m))
                    .ok_or(PmfError::NegativeValue { value: v, delta })
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Pmf {
            entries,
            residual: self.residual,
        })
    }

    /// `P(X > t)`, counting the residual as exceedance.
    pub fn tail_mass(&self, t: BitTime) -> f64 {
        let cut = self.entries.partition_point(|&(v, _)| v <= t);
        let tail: f64 = self.entries[cut..].iter().map(|&(_, m)| m).sum();
        tail + self.residual
    }

    /// Represented mass strictly above `t`, residual excluded.
    pub fn support_mass_above(&self, t: BitTime) -> f64 {
        let cut = self.entries.partition_point(|&(v, _)| v <= t);
        self.entries[cut..].iter().map(|&(_, m)| m).sum()
    }

    /// Represented mass at or below `t`.
    pub fn mass_at_most(&self, t: BitTime) -> f64 {
        let cut = self.entries.partition_point(|&(v, _)| v <= t);
        self.entries[..cut].iter().map(|&(_, m)| m).sum()
    }

    /// Moves the residual onto the largest represented value. Only used to
    /// reproduce hand-worked examples whose tables drop the truncated tail.
    pub fn fold_residual(mut self) -> Pmf {
        if let Some(last) = self.entries.last_mut() {
            last.1 += self.residual;
            self.residual = 0.0;
        }
        self
    }

    /// Moves vanishing entries into the residual.
    fn prune(&mut self) {
        let mut dropped = 0.0;
        self.entries.retain(|&(_, m)| {
            if m < MASS_FLOOR {
                dropped += m;
                false
            } else {
                true
            }
        });
        self.residual += dropped;
    }

    fn check_total(&self) -> Result<(), PmfError> {
        let total = self.total_with_residual();
        if total > 1.0 + MASS_TOLERANCE {
            Err(PmfError::MassOverflow(total))
        } else {
            Ok(())
        }
    }
}

fn check_mass(mass: f64) -> Result<(), PmfError> {
    if mass > 0.0 && mass <= 1.0 + MASS_TOLERANCE {
        Ok(())
    } else {
        Err(PmfError::InvalidMass(mass))
    }
}

fn merge_sorted_duplicates(entries: Vec<(BitTime, f64)>) -> Vec<(BitTime, f64)> {
    let mut out: Vec<(BitTime, f64)> = Vec::with_capacity(entries.len());
    for (v, m) in entries {
        match out.last_mut() {
            Some(last) if last.0 == v => last.1 += m,
            _ => out.push((v, m)),
        }
    }
    out
}

/// Merges `a` with `b` translated by `offset` and scaled by `scale`.
fn merge_add(
    a: &[(BitTime, f64)],
    b: &[(BitTime, f64)],
    offset: BitTime,
    scale: f64,
) -> Vec<(BitTime, f64)> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        let (va, ma) = a[i];
        let vb = b[j].0 + offset;
        match va.cmp(&vb) {
            Ordering::Less => {
                out.push((va, ma));
                i += 1;
            }
            Ordering::Greater => {
                out.push((vb, b[j].1 * scale));
                j += 1;
            }
            Ordering::Equal => {
                out.push((va, ma + b[j].1 * scale));
                i += 1;
                j += 1;
            }
        }
    }
    out.extend_from_slice(&a[i..]);
    out.extend(b[j..].iter().map(|&(v, m)| (v + offset, m * scale)));
    out
}
