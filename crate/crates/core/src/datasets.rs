//! Built-in message sets.

use crate::error::{Error, Result};
use crate::model::{ErrorModel, Frame, MessageSet, RetryLimit};

/// SAE benchmark bus speed.
pub const SAE_BUS_SPEED: u64 = 125_000;

/// Error rate used with the SAE benchmark, per bit-time.
pub const SAE_LAMBDA: f64 = 1e-5;

/// Stopping threshold used with the SAE benchmark.
pub const SAE_EPSILON: f64 = 2.7e-15;

/// `(priority, C bits, E bits, T ms, D ms)`.
const SAE_ROWS: [(u32, u64, u64, u64, u64); 17] = [
    (1, 62, 13, 1000, 5),
    (2, 72, 13, 5, 5),
    (3, 62, 13, 5, 5),
    (4, 72, 13, 5, 5),
    (5, 62, 13, 5, 5),
    (6, 72, 13, 5, 5),
    (7, 112, 13, 10, 10),
    (8, 62, 13, 10, 10),
    (9, 72, 13, 10, 10),
    (10, 72, 13, 10, 10),
    (11, 62, 13, 100, 100),
    (12, 92, 13, 100, 100),
    (13, 62, 13, 100, 100),
    (14, 62, 13, 100, 100),
    (15, 82, 13, 1000, 1000),
    (16, 62, 13, 1000, 1000),
    (17, 62, 13, 1000, 1000),
];

/// The 17-frame SAE benchmark at 125 kbit/s with `lambda = 1e-5` per bit and
/// the retry cap chosen against `SAE_EPSILON`.
pub fn sae() -> MessageSet {
    let bits_per_ms = SAE_BUS_SPEED / 1000;
    let frames = SAE_ROWS
        .iter()
        .map(|&(prio, c, e, t_ms, d_ms)| {
            Frame::new(
                format!("p{prio}"),
                prio,
                c,
                t_ms * bits_per_ms,
                d_ms * bits_per_ms,
                e,
            )
        })
        .collect();
    MessageSet::new(
        frames,
        SAE_BUS_SPEED,
        ErrorModel::new(SAE_LAMBDA, RetryLimit::Threshold(SAE_EPSILON)),
    )
    .expect("SAE table is a valid message set")
}

/// Three-frame hand-worked example. Times are abstract units, encoded as one
/// bit per millisecond. `tau0` and `tau1` carry the tabulated retry
/// distributions `(0.9, 0.09, 0.01)`; `tau2` only ever blocks.
pub fn example3() -> MessageSet {
    let retry = vec![0.9, 0.09, 0.01];
    let frames = vec![
        Frame::new("tau0", 0, 1, 6, 6, 1).with_retry_probabilities(retry.clone()),
        Frame::new("tau1", 1, 1, 12, 12, 0).with_retry_probabilities(retry),
        Frame::new("tau2", 2, 2, 20, 20, 0),
    ];
    MessageSet::new(frames, 1000, ErrorModel::new(0.0, RetryLimit::Fixed(2)))
        .expect("example set is valid")
}

/// Epsilon that stops the hand-worked example at release time 12.
pub const EXAMPLE3_EPSILON: f64 = 0.00015;

pub const NAMES: [&str; 2] = ["sae", "example3"];

pub fn by_name(name: &str) -> Result<MessageSet> {
    match name {
        "sae" => Ok(sae()),
        "example3" => Ok(example3()),
        other => Err(Error::InvalidParameter(format!(
            "unknown dataset {other:?} (known: {})",
            NAMES.join(", ")
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sae_shape() {
        let set = sae();
        assert_eq!(set.len(), 17);
        assert_eq!(set.frame(1).period, 625);
        assert_eq!(set.frame(16).id, "p17");
        assert_eq!(set.frame(16).deadline, 125_000);
        // Error-free utilization of the table at 125 kbit/s.
        assert!((set.utilization() - 0.822784).abs() < 1e-9);
    }
}
