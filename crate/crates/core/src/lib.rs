//! Probabilistic worst-case response-time analysis for frames on a CAN bus
//! subject to transmission errors and automatic retransmission.
//!
//! Timing quantities are integer bit-times. Response-time distributions are
//! sparse PMFs ([`Pmf`]); the per-frame result is an exceedance curve
//! ([`ExceedanceCurve`]) giving `P(R > t)`.

pub mod analysis;
pub mod datasets;
pub mod deterministic;
pub mod error;
pub mod exceedance;
pub mod format;
pub mod model;
pub mod monte_carlo;
pub mod pmf;
pub mod timing;
pub mod workload;

pub use analysis::{analyze_frame, legacy_pwcrt, AnalysisOptions, ArrivalBoundary, FrameAnalysis};
pub use deterministic::{det_analysis, det_wcrt, DetOptions, DetResult};
pub use error::{Error, Result};
pub use exceedance::{max_abs_diff, max_abs_diff_ms, mse, mse_ms, ExceedanceCurve, Method};
pub use format::{parse_message_set, message_set_to_json};
pub use monte_carlo::{empirical_exceedance, simulate, SimConfig, SimReport};
pub use model::{BlockingRule, ErrorModel, Frame, MessageSet, RetryLimit};
pub use pmf::{BitTime, Boundary, Pmf, PmfError};
pub use workload::{generate_set, generate_sets, uunifast, GenSpec};
