use std::fs::{File, OpenOptions};
use std::io::{self, BufWriter, Write};
use std::path::Path;
use std::sync::Mutex;

use serde::Serialize;

/// One line of the audit log.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct AuditRecord {
    pub timestamp: String,
    pub endpoint: &'static str,
    pub subject_id: Option<String>,
    pub object_id: Option<String>,
    pub action: Option<String>,
    pub purpose: Option<String>,
    pub decision: Option<String>,
    pub masked: bool,
    /// Always null for masked decisions.
    pub matched_rule: Option<String>,
    pub store_version: u64,
    pub status: u16,
    pub latency_us: u64,
    pub notes: Vec<String>,
}

impl AuditRecord {
    pub fn new(endpoint: &'static str) -> Self {
        AuditRecord {
            timestamp: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Micros, true),
            endpoint,
            ..Default::default()
        }
    }
}

/// Append-only JSON-lines writer. Every record is flushed before
/// `append` returns.
#[derive(Debug)]
pub struct AuditLog {
    out: Mutex<BufWriter<File>>,
}

impl AuditLog {
    pub fn open(path: &Path) -> io::Result<Self> {
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        Ok(AuditLog {
            out: Mutex::new(BufWriter::new(file)),
        })
    }

    pub fn append(&self, record: &AuditRecord) {
        let mut line = serde_json::to_string(record).expect("audit records serialize");
        line.push('\n');
        let mut out = self.out.lock().unwrap_or_else(|p| p.into_inner());
        if let Err(e) = out.write_all(line.as_bytes()).and_then(|_| out.flush()) {
            tracing::error!("audit write failed: {e}");
        }
    }

    pub fn flush(&self) -> io::Result<()> {
        self.out.lock().unwrap_or_else(|p| p.into_inner()).flush()
    }
}
