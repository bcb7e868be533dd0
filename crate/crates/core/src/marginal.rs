use serde::{Deserialize, Serialize};

use crate::model::format_value;

/// A finalised marginal smoothing estimate.
///
/// `stop_time` is the first time the variance criterion fell below the
/// tolerance, or the horizon when the stream ended first; in the latter case
/// `truncated_by_horizon` is set and `variance_at_stop` may exceed the
/// tolerance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmoothedMarginal {
    pub s: usize,
    pub estimate: f64,
    pub stop_time: usize,
    pub lag: usize,
    pub variance_at_stop: f64,
    pub truncated_by_horizon: bool,
}

impl SmoothedMarginal {
    pub const CSV_HEADER: &'static str = "s,stop_time,lag,estimate,variance_at_stop,truncated";
    pub const EXACT_CSV_HEADER: &'static str = "s,stop_time,lag,estimate,variance_at_stop";

    pub fn new(s: usize, estimate: f64, stop_time: usize, variance_at_stop: f64, truncated: bool) -> Self {
        debug_assert!(stop_time >= s);
        Self {
            s,
            estimate,
            stop_time,
            lag: stop_time - s,
            variance_at_stop,
            truncated_by_horizon: truncated,
        }
    }

    /// Emission-stream record, `s,stop_time,lag,estimate,variance_at_stop,truncated`.
    pub fn csv_record(&self) -> String {
        format!("{},{}", self.exact_csv_record(), u8::from(self.truncated_by_horizon))
    }

    /// Record without the truncation flag, as written for the exact algorithm.
    pub fn exact_csv_record(&self) -> String {
        format!(
            "{},{},{},{},{}",
            self.s,
            self.stop_time,
            self.lag,
            format_value(self.estimate),
            format_value(self.variance_at_stop)
        )
    }
}
