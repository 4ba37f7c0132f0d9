//! CSV and trace output.

use std::io::Write;

use super::metrics::MetricsReport;
use crate::protocol::TraceRecord;

pub const CSV_HEADER: [&str; 8] = ["scenario", "sweep_value", "manager", "bytes", "cycles", "mean_lat", "max_lat", "frac_isolated"];

/// One row per manager per report. `cycles` is the measured runtime where
/// the workload defines one, else the run length; an undefined fraction is
/// left empty.
pub fn write_csv<W: Write>(out: W, reports: &[MetricsReport]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for r in reports {
        for m in &r.managers {
            let cycles = m.runtime_cycles.map_or(r.cycles.to_string(), |c| format!("{c:.2}"));
            w.write_record([
                r.scenario.clone(),
                r.sweep_label.clone(),
                m.name.clone(),
                m.bytes.to_string(),
                cycles,
                format!("{:.3}", m.mean_lat),
                m.max_lat.to_string(),
                m.frac_isolated.map(|f| format!("{f:.4}")).unwrap_or_default(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_trace<W: Write>(mut out: W, trace: &[TraceRecord]) -> std::io::Result<()> {
    writeln!(out, "{}", TraceRecord::HEADER)?;
    for r in trace {
        writeln!(out, "{}", r.to_line())?;
    }
    Ok(())
}
