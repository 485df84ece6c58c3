//! CSV benchmark reports.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use aeos_core::metrics::MetricsReport;

/// One `(scenario, scheduler)` result. Metric fields are empty on error rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub split: String,
    pub scenario_id: String,
    pub scheduler: String,
    #[serde(rename = "CS")]
    pub cs: Option<f64>,
    #[serde(rename = "CR")]
    pub cr: Option<f64>,
    #[serde(rename = "PCR")]
    pub pcr: Option<f64>,
    #[serde(rename = "WCR")]
    pub wcr: Option<f64>,
    #[serde(rename = "TAT_h")]
    pub tat_h: Option<f64>,
    #[serde(rename = "PC_Wh")]
    pub pc_wh: Option<f64>,
    pub wall_time_s: f64,
    pub seed: u64,
    /// `ok`, or `error: <reason>`.
    pub status: String,
}

pub const COLUMNS: [&str; 12] = [
    "split",
    "scenario_id",
    "scheduler",
    "CS",
    "CR",
    "PCR",
    "WCR",
    "TAT_h",
    "PC_Wh",
    "wall_time_s",
    "seed",
    "status",
];

impl ReportRow {
    pub fn ok(split: &str, scenario_id: &str, scheduler: &str, m: &MetricsReport, wall_time_s: f64, seed: u64) -> Self {
        Self {
            split: split.into(),
            scenario_id: scenario_id.into(),
            scheduler: scheduler.into(),
            cs: m.cs,
            cr: Some(m.cr),
            pcr: Some(m.pcr),
            wcr: Some(m.wcr),
            tat_h: Some(m.tat),
            pc_wh: Some(m.pc),
            wall_time_s,
            seed,
            status: "ok".into(),
        }
    }

    pub fn error(split: &str, scenario_id: &str, scheduler: &str, seed: u64, reason: &str) -> Self {
        Self {
            split: split.into(),
            scenario_id: scenario_id.into(),
            scheduler: scheduler.into(),
            cs: None,
            cr: None,
            pcr: None,
            wcr: None,
            tat_h: None,
            pc_wh: None,
            wall_time_s: 0.0,
            seed,
            status: format!("error: {reason}"),
        }
    }

    pub fn is_ok(&self) -> bool {
        self.status == "ok"
    }

    pub fn metrics(&self) -> Option<MetricsReport> {
        Some(MetricsReport {
            cr: self.cr?,
            pcr: self.pcr?,
            wcr: self.wcr?,
            tat: self.tat_h?,
            pc: self.pc_wh?,
            cs: self.cs,
        })
    }
}

pub fn write_report<W: Write>(rows: &[ReportRow], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    if rows.is_empty() {
        w.write_record(COLUMNS)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_report<R: Read>(input: R) -> csv::Result<Vec<ReportRow>> {
    csv::Reader::from_reader(input).deserialize().collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_order_and_roundtrip() {
        let m = MetricsReport {
            cr: 0.5,
            pcr: 0.25,
            wcr: 0.125,
            tat: 1.5,
            pc: 12.0,
            cs: Some(3.0),
        };
        let rows = vec![
            ReportRow::ok("test", "test-00000", "greedy", &m, 0.0, 9),
            ReportRow::error("test", "test-00001", "greedy", 10, "bad, \"orbit\""),
        ];
        let mut buf = Vec::new();
        write_report(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert_eq!(text.lines().next().unwrap(), COLUMNS.join(","));
        assert_eq!(read_report(buf.as_slice()).unwrap(), rows);
        assert_eq!(rows[0].metrics(), Some(m));
        assert_eq!(rows[1].metrics(), None);

        let mut empty = Vec::new();
        write_report(&[], &mut empty).unwrap();
        assert_eq!(String::from_utf8(empty).unwrap().trim(), COLUMNS.join(","));
    }
}
