use std::fs;
use std::path::Path;

use super::run::{ChainDiagnostics, RunOutput};
use crate::error::Result;

pub const REPORT_FILE: &str = "report.json";
pub const TIMING_FILE: &str = "timing.json";
pub const SAMPLES_FILE: &str = "samples.csv";
pub const DIAGNOSTICS_FILE: &str = "diagnostics.csv";

/// Writes the report, timings, samples and (for MCMC engines) per-iteration diagnostics.
pub fn write_outputs(out: &RunOutput, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut report = serde_json::to_string_pretty(&out.report)?;
    report.push('\n');
    fs::write(dir.join(REPORT_FILE), report)?;
    let mut timing = serde_json::to_string_pretty(&out.timing)?;
    timing.push('\n');
    fs::write(dir.join(TIMING_FILE), timing)?;

    let mut w = csv::Writer::from_path(dir.join(SAMPLES_FILE))?;
    w.write_record((1..=out.samples.dim()).map(|j| format!("x{j}")))?;
    for r in out.samples.rows() {
        w.write_record(r.iter().map(|v| v.to_string()))?;
    }
    w.flush()?;

    match &out.diagnostics {
        ChainDiagnostics::Mc => {}
        ChainDiagnostics::Hmc(d) => {
            let mut w = csv::Writer::from_path(dir.join(DIAGNOSTICS_FILE))?;
            w.write_record(["iteration", "delta_H", "accepted", "reflections"])?;
            for (i, ((dh, acc), refl)) in d
                .hamiltonian_errors
                .iter()
                .zip(&d.accepted)
                .zip(&d.reflections_per_proposal)
                .enumerate()
            {
                w.write_record([
                    (i + 1).to_string(),
                    dh.to_string(),
                    u8::from(*acc).to_string(),
                    refl.to_string(),
                ])?;
            }
            w.flush()?;
        }
        ChainDiagnostics::Gibbs { last_coordinate, .. } => {
            let mut w = csv::Writer::from_path(dir.join(DIAGNOSTICS_FILE))?;
            w.write_record(["iteration", "coordinate_updated", "accepted"])?;
            for (i, j) in last_coordinate.iter().enumerate() {
                w.write_record([(i + 1).to_string(), (j + 1).to_string(), "1".to_string()])?;
            }
            w.flush()?;
        }
    }
    Ok(())
}
