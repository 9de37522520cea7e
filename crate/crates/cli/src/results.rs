//! Versioned CSV output.
//!
//! Every file starts with `#` comment lines carrying the schema version, the
//! resolved configuration and its hash, followed by one header row.

use std::io::Write;

use serde::Serialize;

pub const SCHEMA_VERSION: &str = "qst-results/1";

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ResultRow {
    pub trial: usize,
    pub step: usize,
    pub copies: u64,
    pub cumulative_copies: u64,
    pub bures_sq: f64,
    pub hs_distance: f64,
    pub wall_seconds: f64,
    pub confidence: f64,
    pub angles: Vec<f64>,
    pub config_hash: String,
}

pub const RESULT_HEADER: &str =
    "trial,step,copies,cumulative_copies,bures_sq,hs_distance,wall_seconds,confidence,angles,config_hash";

impl ResultRow {
    pub fn csv_line(&self) -> String {
        let angles: Vec<String> = self.angles.iter().map(|a| a.to_string()).collect();
        format!(
            "{},{},{},{},{},{},{},{},{},{}",
            self.trial,
            self.step,
            self.copies,
            self.cumulative_copies,
            self.bures_sq,
            self.hs_distance,
            self.wall_seconds,
            self.confidence,
            angles.join(";"),
            self.config_hash
        )
    }
}

/// Mean and standard error of final-step accuracy for one grid cell.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SummaryRow {
    pub algorithm: String,
    pub family: String,
    pub adaptive: bool,
    pub n_bank: usize,
    pub copies: u64,
    pub trials: usize,
    pub mean_bures_sq: f64,
    pub se_bures_sq: f64,
    pub min_bures_sq: f64,
    pub max_bures_sq: f64,
    pub config_hash: String,
}

pub const SUMMARY_HEADER: &str =
    "algorithm,family,adaptive,n_bank,copies,trials,mean_bures_sq,se_bures_sq,min_bures_sq,max_bures_sq,config_hash";

impl SummaryRow {
    pub fn csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{}",
            self.algorithm,
            self.family,
            self.adaptive,
            self.n_bank,
            self.copies,
            self.trials,
            self.mean_bures_sq,
            self.se_bures_sq,
            self.min_bures_sq,
            self.max_bures_sq,
            self.config_hash
        )
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TimingRow {
    pub algorithm: String,
    pub copies: u64,
    pub steps: usize,
    pub repetitions: usize,
    pub median_seconds: f64,
    pub hardware: String,
}

pub const TIMING_HEADER: &str = "algorithm,copies,steps,repetitions,median_seconds,hardware";

impl TimingRow {
    pub fn csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},\"{}\"",
            self.algorithm, self.copies, self.steps, self.repetitions, self.median_seconds, self.hardware
        )
    }
}

/// Writes the comment preamble, `header`, then `lines`.
pub fn write_csv<W: Write>(
    mut out: W,
    config_json: &str,
    config_hash: &str,
    header: &str,
    lines: impl IntoIterator<Item = String>,
) -> std::io::Result<()> {
    writeln!(out, "# schema: {SCHEMA_VERSION}")?;
    writeln!(out, "# config: {config_json}")?;
    writeln!(out, "# config_hash: {config_hash}")?;
    writeln!(out, "{header}")?;
    for l in lines {
        writeln!(out, "{l}")?;
    }
    Ok(())
}

/// A short description of the machine for timing rows.
pub fn hardware_descriptor() -> String {
    let cpu = std::fs::read_to_string("/proc/cpuinfo")
        .ok()
        .and_then(|s| {
            s.lines()
                .find(|l| l.starts_with("model name"))
                .and_then(|l| l.split(':').nth(1))
                .map(|m| m.trim().to_string())
        })
        .unwrap_or_else(|| "unknown cpu".into());
    let threads = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1);
    format!("{}-{} {} x{}", std::env::consts::OS, std::env::consts::ARCH, cpu.replace('"', "'"), threads)
}
