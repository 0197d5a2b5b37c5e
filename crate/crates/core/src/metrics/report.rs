use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// One operating point of a link study.
///
/// CSV column order is the field order below; `osnr_required_db` and
/// `osnr_margin_db` are empty when no required-OSNR search was run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinkReport {
    pub distance_km: f64,
    pub span_km: f64,
    pub launch_power_dbm: f64,
    pub sps_bit: f64,
    /// Reported BER: the measured ratio, or `1/n` when `ber_upper_bound`.
    pub ber: f64,
    pub ber_upper_bound: bool,
    pub ber_ci_low: Option<f64>,
    pub ber_ci_high: Option<f64>,
    pub compared_bits: usize,
    pub evm_db: f64,
    pub q_factor_db: Option<f64>,
    pub osnr_measured_db: Option<f64>,
    pub osnr_required_db: Option<f64>,
    pub osnr_max_achievable_db: Option<f64>,
    pub osnr_margin_db: Option<f64>,
    pub seed: u64,
}

impl LinkReport {
    /// Fills the margin from its components when both are known.
    pub fn with_margin(mut self) -> Self {
        self.osnr_margin_db = match (self.osnr_max_achievable_db, self.osnr_required_db) {
            (Some(m), Some(r)) => Some(super::osnr_margin(m, r)),
            _ => None,
        };
        self
    }

    /// Re-checks the margin identity and the BER range.
    pub fn verify(&self) -> Result<()> {
        if !(0.0..=0.5).contains(&self.ber) {
            return Err(invalid(
                "report.ber",
                format!("{} outside [0, 0.5]", self.ber),
            ));
        }
        match (
            self.osnr_max_achievable_db,
            self.osnr_required_db,
            self.osnr_margin_db,
        ) {
            (Some(m), Some(r), Some(g)) if (m - r - g).abs() > 1e-9 => {
                Err(invalid("report.osnr_margin_db", format!("{g} ≠ {m} − {r}")))
            }
            (Some(_), Some(_), None) => Err(invalid("report.osnr_margin_db", "missing")),
            _ => Ok(()),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Writes reports as CSV with a header row.
pub fn write_csv<W: Write>(reports: &[LinkReport], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    if reports.is_empty() {
        w.write_record(column_names())
            .map_err(|e| Error::Format(e.to_string()))?;
    }
    for r in reports {
        w.serialize(r).map_err(|e| Error::Format(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

pub fn column_names() -> [&'static str; 16] {
    [
        "distance_km",
        "span_km",
        "launch_power_dbm",
        "sps_bit",
        "ber",
        "ber_upper_bound",
        "ber_ci_low",
        "ber_ci_high",
        "compared_bits",
        "evm_db",
        "q_factor_db",
        "osnr_measured_db",
        "osnr_required_db",
        "osnr_max_achievable_db",
        "osnr_margin_db",
        "seed",
    ]
}
