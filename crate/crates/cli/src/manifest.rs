use std::collections::BTreeMap;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use unlearnkit::unlearn::Method;

use crate::artifacts::{read_json, write_json};

pub const MANIFEST_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pending,
    Done,
    Failed,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Entry {
    pub config_hash: String,
    pub method: Method,
    pub del_ratio: u32,
    pub seed: u64,
    pub status: Status,
    /// Run directory relative to the artifact root.
    pub run_dir: String,
    /// Files inside `run_dir` written by the run.
    pub artifacts: Vec<String>,
    /// Unix seconds.
    pub created_at: u64,
    pub started_at: Option<u64>,
    pub finished_at: Option<u64>,
    pub error: Option<String>,
}

/// Every run ever scheduled under one artifact root, keyed by config hash.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format_version: u32,
    pub entries: BTreeMap<String, Entry>,
}

impl Default for Manifest {
    fn default() -> Self {
        Manifest { format_version: MANIFEST_VERSION, entries: BTreeMap::new() }
    }
}

pub fn now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

impl Manifest {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        if path.is_file() {
            read_json(path)
        } else {
            Ok(Manifest::default())
        }
    }

    pub fn save(&self, path: &Path) -> anyhow::Result<()> {
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        write_json(path, self)
    }

    /// Inserts a pending entry unless one already exists; returns whether it was new.
    pub fn schedule(&mut self, entry: Entry) -> bool {
        if self.entries.contains_key(&entry.config_hash) {
            return false;
        }
        self.entries.insert(entry.config_hash.clone(), entry);
        true
    }

    pub fn mark_started(&mut self, hash: &str) {
        if let Some(e) = self.entries.get_mut(hash) {
            e.status = Status::Pending;
            e.started_at = Some(now());
            e.finished_at = None;
            e.error = None;
        }
    }

    pub fn mark_done(&mut self, hash: &str, artifacts: Vec<String>) {
        if let Some(e) = self.entries.get_mut(hash) {
            e.status = Status::Done;
            e.artifacts = artifacts;
            e.finished_at = Some(now());
            e.error = None;
        }
    }

    pub fn mark_failed(&mut self, hash: &str, error: String) {
        if let Some(e) = self.entries.get_mut(hash) {
            e.status = Status::Failed;
            e.finished_at = Some(now());
            e.error = Some(error);
        }
    }

    pub fn count(&self, status: Status) -> usize {
        self.entries.values().filter(|e| e.status == status).count()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn entry(hash: &str) -> Entry {
        Entry {
            config_hash: hash.into(),
            method: Method::NegGrad,
            del_ratio: 1,
            seed: 0,
            status: Status::Pending,
            run_dir: format!("runs/{hash}"),
            artifacts: vec![],
            created_at: 0,
            started_at: None,
            finished_at: None,
            error: None,
        }
    }

    #[test]
    fn schedule_is_idempotent_and_order_free() {
        let mut a = Manifest::default();
        let mut b = Manifest::default();
        for h in ["x", "y", "z"] {
            assert!(a.schedule(entry(h)));
        }
        for h in ["z", "x", "y", "x"] {
            b.schedule(entry(h));
        }
        assert_eq!(a, b);
        assert!(!a.schedule(entry("x")));
    }

    #[test]
    fn status_transitions() {
        let mut m = Manifest::default();
        m.schedule(entry("a"));
        m.schedule(entry("b"));
        m.mark_started("a");
        m.mark_done("a", vec!["report.json".into()]);
        m.mark_failed("b", "boom".into());
        assert_eq!(m.count(Status::Done), 1);
        assert_eq!(m.count(Status::Failed), 1);
        assert_eq!(m.entries["b"].error.as_deref(), Some("boom"));
    }
}
