//! On-disk formats: message-set JSON and exceedance-curve CSV.
//!
//! Message sets accept times either in milliseconds (`T_ms`) or directly in
//! bit-times (`T_bits`); written sets always use bit-times so that a reload
//! is exact.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exceedance::{ExceedanceCurve, Method};
use crate::model::{ErrorModel, Frame, MessageSet, RetryLimit};
use crate::pmf::BitTime;

/// Retry-cap threshold used when a set file names neither a limit nor a
/// threshold.
pub const DEFAULT_RETRY_THRESHOLD: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawMessageSet {
    pub bus_speed_bps: u64,
    #[serde(default)]
    pub lambda_per_bit: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub retry_limit: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub retry_threshold: Option<f64>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub fold_truncation: bool,
    pub frames: Vec<RawFrame>,
}

#[allow(non_snake_case)]
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawFrame {
    pub id: String,
    pub priority: u32,
    pub C_bits: BitTime,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub T_ms: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub T_bits: Option<BitTime>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub D_ms: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub D_bits: Option<BitTime>,
    pub E_bits: BitTime,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub J_ms: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub J_bits: Option<BitTime>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub retry_probabilities: Option<Vec<f64>>,
}

/// Converts one millisecond value to bit-times, rejecting anything that does
/// not land on the bit grid.
pub fn ms_to_bits(
    frame: &str,
    field: &'static str,
    ms: f64,
    bus_speed: u64,
) -> Result<BitTime> {
    let bits = ms * bus_speed as f64 / 1000.0;
    let rounded = bits.round();
    let integral = (bits - rounded).abs() <= 1e-9 * bits.abs().max(1.0);
    if !ms.is_finite() || ms < 0.0 || !integral {
        return Err(Error::NonIntegralBitTime {
            frame: frame.to_string(),
            field,
            value: ms,
            bus_speed,
        });
    }
    Ok(rounded as BitTime)
}

fn pick_time(
    frame: &str,
    field: &'static str,
    ms: Option<f64>,
    bits: Option<BitTime>,
    bus_speed: u64,
    default: Option<BitTime>,
) -> Result<BitTime> {
    match (ms, bits) {
        (Some(_), Some(_)) => Err(Error::AmbiguousField {
            frame: frame.to_string(),
            field,
        }),
        (Some(ms), None) => ms_to_bits(frame, field, ms, bus_speed),
        (None, Some(bits)) => Ok(bits),
        (None, None) => default.ok_or(Error::MissingField {
            frame: frame.to_string(),
            field,
        }),
    }
}

impl RawMessageSet {
    /// Converts every time to bit-times and checks all set invariants.
    pub fn validate_and_convert(&self) -> Result<MessageSet> {
        if self.bus_speed_bps == 0 {
            return Err(Error::InvalidParameter("bus_speed_bps must be positive".into()));
        }
        let retry = match (self.retry_limit, self.retry_threshold) {
            (Some(_), Some(_)) => {
                return Err(Error::InvalidErrorModel(
                    "give either retry_limit or retry_threshold, not both".into(),
                ))
            }
            (Some(k), None) => RetryLimit::Fixed(k),
            (None, Some(p)) => RetryLimit::Threshold(p),
            (None, None) => RetryLimit::Threshold(DEFAULT_RETRY_THRESHOLD),
        };
        let mut model = ErrorModel::new(self.lambda_per_bit, retry);
        model.fold_truncation = self.fold_truncation;

        let speed = self.bus_speed_bps;
        let frames = self
            .frames
            .iter()
            .map(|raw| {
                let id = raw.id.as_str();
                let period = pick_time(id, "T", raw.T_ms, raw.T_bits, speed, None)?;
                let deadline = pick_time(id, "D", raw.D_ms, raw.D_bits, speed, Some(period))?;
                let jitter = pick_time(id, "J", raw.J_ms, raw.J_bits, speed, Some(0))?;
                let mut frame = Frame::new(id, raw.priority, raw.C_bits, period, deadline, raw.E_bits)
                    .with_jitter(jitter);
                frame.retry_probabilities = raw.retry_probabilities.clone();
                Ok(frame)
            })
            .collect::<Result<Vec<_>>>()?;
        MessageSet::new(frames, speed, model)
    }

    pub fn from_set(set: &MessageSet) -> Self {
        let model = set.error_model;
        let (retry_limit, retry_threshold) = match model.retry {
            RetryLimit::Fixed(k) => (Some(k), None),
            RetryLimit::Threshold(p) => (None, Some(p)),
        };
        Self {
            bus_speed_bps: set.bus_speed,
            lambda_per_bit: model.lambda,
            retry_limit,
            retry_threshold,
            fold_truncation: model.fold_truncation,
            frames: set
                .frames()
                .iter()
                .map(|f| RawFrame {
                    id: f.id.clone(),
                    priority: f.priority,
                    C_bits: f.transmission,
                    T_ms: None,
                    T_bits: Some(f.period),
                    D_ms: None,
                    D_bits: Some(f.deadline),
                    E_bits: f.error_overhead,
                    J_ms: None,
                    J_bits: Some(f.jitter),
                    retry_probabilities: f.retry_probabilities.clone(),
                })
                .collect(),
        }
    }
}

pub fn parse_message_set(json: &str) -> Result<MessageSet> {
    let raw: RawMessageSet = serde_json::from_str(json)
        .map_err(|e| Error::InvalidParameter(format!("malformed message-set JSON: {e}")))?;
    raw.validate_and_convert()
}

pub fn message_set_to_json(set: &MessageSet) -> String {
    serde_json::to_string_pretty(&RawMessageSet::from_set(set))
        .expect("message sets always serialize")
}

pub const CSV_HEADER: [&str; 5] = ["t_bits", "t_ms", "probability", "method", "frame_id"];

#[derive(Debug, Deserialize)]
struct CsvRow {
    t_bits: BitTime,
    t_ms: f64,
    probability: f64,
    method: String,
    frame_id: String,
}

/// One CSV row per breakpoint of the step function, preceded by a row at
/// `t = 0`.
pub fn exceedance_to_csv(curve: &ExceedanceCurve) -> String {
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer.write_record(CSV_HEADER).expect("in-memory write");
    let method = curve.method.to_string();
    for (t, p) in curve.rows() {
        writer
            .write_record([
                t.to_string(),
                (t as f64 / curve.bits_per_ms).to_string(),
                format!("{p:e}"),
                method.clone(),
                curve.frame_id.clone(),
            ])
            .expect("in-memory write");
    }
    String::from_utf8(writer.into_inner().expect("in-memory flush")).expect("ascii output")
}

/// Parses the CSV written by [`exceedance_to_csv`].
pub fn exceedance_from_csv(text: &str) -> Result<ExceedanceCurve> {
    let bad = |msg: String| Error::InvalidParameter(format!("exceedance CSV: {msg}"));
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let headers = reader.headers().map_err(|e| bad(e.to_string()))?;
    if headers.iter().ne(CSV_HEADER) {
        return Err(bad(format!("unexpected header {headers:?}")));
    }
    let mut rows: Vec<(BitTime, f64)> = Vec::new();
    let mut method: Option<Method> = None;
    let mut frame_id: Option<String> = None;
    let mut bits_per_ms: Option<f64> = None;
    for (n, row) in reader.deserialize::<CsvRow>().enumerate() {
        let row = row.map_err(|e| bad(format!("row {n}: {e}")))?;
        let m: Method = row.method.parse().map_err(bad)?;
        if row.t_bits > 0 {
            let ratio = row.t_bits as f64 / row.t_ms;
            match bits_per_ms {
                None => bits_per_ms = Some(ratio),
                Some(r) if (r - ratio).abs() > 1e-6 * r => {
                    return Err(bad(format!("row {n}: inconsistent bit-time/ms ratio")))
                }
                _ => {}
            }
        }
        if *method.get_or_insert(m) != m {
            return Err(bad(format!("row {n}: mixed methods")));
        }
        frame_id.get_or_insert(row.frame_id);
        rows.push((row.t_bits, row.probability));
    }
    let method = method.ok_or_else(|| bad("no data rows".into()))?;
    ExceedanceCurve::from_rows(
        rows,
        method,
        frame_id.unwrap_or_default(),
        bits_per_ms.unwrap_or(1.0),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sae_period_converts_to_bits() {
        assert_eq!(ms_to_bits("p2", "T", 5.0, 125_000).unwrap(), 625);
        assert!(matches!(
            ms_to_bits("p2", "T", 0.0041, 125_000),
            Err(Error::NonIntegralBitTime { .. })
        ));
    }

    #[test]
    fn raw_set_validation_errors() {
        let json = r#"{
            "bus_speed_bps": 125000, "lambda_per_bit": 1e-5,
            "frames": [
                {"id": "a", "priority": 3, "C_bits": 62, "T_ms": 5, "D_ms": 5, "E_bits": 13},
                {"id": "b", "priority": 3, "C_bits": 62, "T_ms": 5, "D_ms": 5, "E_bits": 13}
            ]}"#;
        assert_eq!(parse_message_set(json).unwrap_err(), Error::DuplicatePriority(3));

        let json = r#"{
            "bus_speed_bps": 125000,
            "frames": [{"id": "late", "priority": 1, "C_bits": 62, "T_ms": 5, "D_ms": 10, "E_bits": 13}]}"#;
        let err = parse_message_set(json).unwrap_err();
        assert!(err.to_string().contains("late"));
        assert!(err.to_string().contains("constrained deadline"));

        let json = r#"{
            "bus_speed_bps": 125000,
            "frames": [{"id": "x", "priority": 1, "C_bits": 62, "T_ms": 5, "T_bits": 625, "E_bits": 13}]}"#;
        assert!(matches!(parse_message_set(json), Err(Error::AmbiguousField { .. })));
    }

    #[test]
    fn deadline_defaults_to_period_and_bits_are_accepted() {
        let json = r#"{
            "bus_speed_bps": 1000, "retry_limit": 2,
            "frames": [{"id": "x", "priority": 1, "C_bits": 3, "T_bits": 40, "E_bits": 1, "J_ms": 2}]}"#;
        let set = parse_message_set(json).unwrap();
        assert_eq!(set.frame(0).deadline, 40);
        assert_eq!(set.frame(0).jitter, 2);
        assert_eq!(set.error_model.retry, RetryLimit::Fixed(2));
    }

    #[test]
    fn csv_round_trip() {
        let curve = ExceedanceCurve::from_pmfs(
            &[crate::pmf::Pmf::from_pairs([(125, 0.75), (250, 0.25)]).unwrap()],
            Method::Improved,
            "p17",
            125.0,
        );
        let text = exceedance_to_csv(&curve);
        assert!(text.starts_with("t_bits,t_ms,probability,method,frame_id\n0,0,1e0,improved,p17\n"));
        let back = exceedance_from_csv(&text).unwrap();
        assert_eq!(back.steps(), &[(0, 1.0), (125, 0.25), (250, 0.0)]);
        assert_eq!(back.bits_per_ms, 125.0);
        assert!(exceedance_from_csv("a,b\n1,2\n").is_err());
    }

    #[test]
    fn written_sets_reload_identically() {
        for set in [crate::datasets::sae(), crate::datasets::example3()] {
            let json = message_set_to_json(&set);
            assert_eq!(parse_message_set(&json).unwrap(), set);
        }
    }
}
