//! Per-class mean graph summaries as JSON.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::atomic::write_atomic;
use crate::actgraph::MeanGraphSummary;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryFile {
    /// Layer index as requested (negative counts from the output).
    pub requested_layer: i64,
    /// Resolved zero-based dense layer index.
    pub layer: usize,
    pub subset_size: usize,
    pub seed: u64,
    pub summaries: Vec<MeanGraphSummary>,
}

impl SummaryFile {
    pub fn validate(&self) -> Result<()> {
        for (k, s) in self.summaries.iter().enumerate() {
            if s.class != k || s.layer != self.layer {
                return Err(Error::input(format!(
                    "summary {k} is for class {} layer {}, expected class {k} layer {}",
                    s.class, s.layer, self.layer
                )));
            }
        }
        Ok(())
    }
}

pub fn write_summaries(path: &Path, file: &SummaryFile) -> Result<()> {
    let json = serde_json::to_string_pretty(file)
        .map_err(|e| Error::input(format!("serialising summaries: {e}")))?;
    write_atomic(path, format!("{json}\n").as_bytes())
}

pub fn read_summaries(path: &Path) -> Result<SummaryFile> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let file: SummaryFile =
        serde_json::from_str(&text).map_err(|e| Error::parse(path, e.to_string()))?;
    file.validate()?;
    Ok(file)
}
