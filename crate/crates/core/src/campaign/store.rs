//! Append-only JSONL experiment record store.

use std::collections::BTreeSet;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::CampaignError;
use crate::assay::{FractionRecord, ResponseVector};
use crate::plant::ExperimentSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecordStatus {
    Pending,
    Running,
    Done,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRecord {
    pub experiment_id: u64,
    /// 1-based design row, `None` for validation runs.
    pub design_run: Option<usize>,
    pub spec: ExperimentSpec,
    /// Simulated seconds.
    pub start: f64,
    pub end: f64,
    pub fraction: Option<FractionRecord>,
    pub responses: Option<ResponseVector>,
    pub status: RecordStatus,
    pub error: Option<String>,
}

pub struct RecordStore {
    path: PathBuf,
    ids: BTreeSet<u64>,
}

impl RecordStore {
    /// Opens (creating if needed) a store, indexing existing ids.
    pub fn open(path: impl AsRef<Path>) -> Result<Self, CampaignError> {
        let path = path.as_ref().to_path_buf();
        let mut ids = BTreeSet::new();
        if path.exists() {
            for r in read_records(&path)? {
                ids.insert(r.experiment_id);
            }
        } else {
            File::create(&path).map_err(storage(&path))?;
        }
        Ok(Self { path, ids })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// All records in insertion order.
    pub fn records(&self) -> Result<Vec<ExperimentRecord>, CampaignError> {
        read_records(&self.path)
    }
}

fn storage(path: &Path) -> impl Fn(std::io::Error) -> CampaignError + '_ {
    move |e| CampaignError::StorageFailure(format!("{}: {e}", path.display()))
}

fn read_records(path: &Path) -> Result<Vec<ExperimentRecord>, CampaignError> {
    let file = File::open(path).map_err(storage(path))?;
    let mut out = Vec::new();
    for (n, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(storage(path))?;
        if line.trim().is_empty() {
            continue;
        }
        let record = serde_json::from_str(&line)
            .map_err(|e| CampaignError::StorageFailure(format!("{} line {}: {e}", path.display(), n + 1)))?;
        out.push(record);
    }
    Ok(out)
}

/// Appends one record and syncs it to disk.
pub fn append_record(store: &mut RecordStore, record: &ExperimentRecord) -> Result<(), CampaignError> {
    if store.ids.contains(&record.experiment_id) {
        return Err(CampaignError::DuplicateId(record.experiment_id));
    }
    let mut line = serde_json::to_string(record).map_err(|e| CampaignError::StorageFailure(e.to_string()))?;
    line.push('\n');
    let path = store.path.clone();
    let mut file = OpenOptions::new().append(true).open(&path).map_err(storage(&path))?;
    file.write_all(line.as_bytes()).map_err(storage(&path))?;
    file.sync_data().map_err(storage(&path))?;
    store.ids.insert(record.experiment_id);
    Ok(())
}
