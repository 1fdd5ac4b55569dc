//! CSV views of a report.

use std::path::{Path, PathBuf};

use super::report::StabilityReport;
use super::StabilityError;

pub const CSV_RD_POINTS: &str = "rd_points.csv";
pub const CSV_DEPENDENCE: &str = "dependence.csv";
pub const CSV_STABILITY: &str = "stability.csv";

fn num(x: f64) -> String {
    format!("{x}")
}

fn amplitude(a: Option<f64>) -> String {
    a.map(num).unwrap_or_default()
}

/// Write the three CSV files into `dir`; returns their paths.
///
/// Unattacked rows leave the amplitude column empty.
pub fn write_csv_exports(report: &StabilityReport, dir: &Path) -> Result<Vec<PathBuf>, StabilityError> {
    std::fs::create_dir_all(dir)?;

    let rd_path = dir.join(CSV_RD_POINTS);
    let mut rd = csv::Writer::from_path(&rd_path)?;
    rd.write_record(["metric", "video", "amplitude", "bitrate", "target_score", "proxy_score"])?;
    for m in &report.metrics {
        for run in &m.runs {
            for s in &run.samples {
                rd.write_record([
                    m.id.clone(),
                    run.video.clone(),
                    amplitude(run.amplitude),
                    num(s.bitrate),
                    num(s.target_score),
                    num(s.proxy_score),
                ])?;
            }
        }
    }
    rd.flush()?;

    let dep_path = dir.join(CSV_DEPENDENCE);
    let mut dep = csv::Writer::from_path(&dep_path)?;
    dep.write_record(["metric", "amplitude", "proxy_loss", "target_gain"])?;
    for m in &report.metrics {
        for p in &m.dependence {
            dep.write_record([m.id.clone(), num(p.amplitude), num(p.proxy_loss), num(p.target_gain)])?;
        }
    }
    dep.flush()?;

    let st_path = dir.join(CSV_STABILITY);
    let mut st = csv::Writer::from_path(&st_path)?;
    st.write_record(["metric", "name", "stability_score", "interval_lo", "interval_hi"])?;
    for (id, score) in report.ranking() {
        let name = report.metric(id).map(|m| m.name.clone()).unwrap_or_default();
        st.write_record([
            id.to_string(),
            name,
            num(score),
            num(report.common_interval[0]),
            num(report.common_interval[1]),
        ])?;
    }
    st.flush()?;

    Ok(vec![rd_path, dep_path, st_path])
}
