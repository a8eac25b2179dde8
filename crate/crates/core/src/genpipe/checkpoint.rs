//! Append-only checkpoint log.
//!
//! Line 1 is a header `{"config_digest": .., "created_at": ..}`; every later
//! line records one terminal task. Each append is a single `write` of a full
//! line followed by `fsync`, so a crash can at worst leave a truncated final
//! line, which loading discards. Loading compacts the log (last entry per task
//! wins) into a temp file that is renamed over the original.

use std::collections::BTreeMap;
use std::fs::{self, File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use log::warn;
use serde::{Deserialize, Serialize};

use super::{GenPipeError, TaskStatus};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct Header {
    config_digest: String,
    created_at: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckpointEntry {
    pub task_id: String,
    pub status: TaskStatus,
    pub attempts: u32,
    pub image_path: String,
    pub error: String,
    pub updated_at: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Checkpoint {
    pub config_digest: String,
    pub completed: BTreeMap<String, CheckpointEntry>,
    pub created_at: u64,
    pub updated_at: u64,
}

pub(crate) fn now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> GenPipeError + '_ {
    move |source| GenPipeError::CheckpointIo {
        path: path.to_path_buf(),
        source,
    }
}

fn tmp_path(path: &Path) -> PathBuf {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(".tmp");
    path.with_file_name(name)
}

impl Checkpoint {
    /// Parse a checkpoint file without modifying it.
    pub fn load(path: &Path) -> Result<Checkpoint, GenPipeError> {
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        let complete_tail = text.ends_with('\n');
        let lines: Vec<&str> = text.lines().collect();
        let corrupt = |line: usize, message: String| GenPipeError::CorruptCheckpoint {
            path: path.to_path_buf(),
            line,
            message,
        };
        let header: Header = match lines.first() {
            Some(l) => serde_json::from_str(l).map_err(|e| corrupt(1, e.to_string()))?,
            None => return Err(corrupt(1, "empty file".into())),
        };
        let mut completed = BTreeMap::new();
        let mut updated_at = header.created_at;
        for (i, line) in lines.iter().enumerate().skip(1) {
            if line.trim().is_empty() {
                continue;
            }
            match serde_json::from_str::<CheckpointEntry>(line) {
                Ok(entry) => {
                    if entry.status.is_terminal() {
                        updated_at = updated_at.max(entry.updated_at);
                        completed.insert(entry.task_id.clone(), entry);
                    }
                }
                Err(_) if i + 1 == lines.len() && !complete_tail => {
                    warn!("{}: dropping truncated final line", path.display());
                }
                Err(e) => return Err(corrupt(i + 1, e.to_string())),
            }
        }
        Ok(Checkpoint {
            config_digest: header.config_digest,
            completed,
            created_at: header.created_at,
            updated_at,
        })
    }

    /// Load and compact an existing checkpoint, or create an empty one.
    /// Fails if an existing checkpoint was written under another config.
    pub fn open(path: &Path, config_digest: &str) -> Result<(Checkpoint, CheckpointWriter), GenPipeError> {
        let checkpoint = if path.exists() {
            let cp = Checkpoint::load(path)?;
            if cp.config_digest != config_digest {
                return Err(GenPipeError::ConfigMismatch {
                    path: path.to_path_buf(),
                    found: cp.config_digest,
                    expected: config_digest.to_string(),
                });
            }
            cp
        } else {
            let t = now();
            Checkpoint {
                config_digest: config_digest.to_string(),
                completed: BTreeMap::new(),
                created_at: t,
                updated_at: t,
            }
        };
        checkpoint.write_atomic(path)?;
        let file = OpenOptions::new().append(true).open(path).map_err(io_err(path))?;
        Ok((
            checkpoint,
            CheckpointWriter {
                path: path.to_path_buf(),
                file,
            },
        ))
    }

    fn write_atomic(&self, path: &Path) -> Result<(), GenPipeError> {
        let mut body = serde_json::to_string(&Header {
            config_digest: self.config_digest.clone(),
            created_at: self.created_at,
        })
        .expect("header serializes");
        body.push('\n');
        for entry in self.completed.values() {
            body.push_str(&serde_json::to_string(entry).expect("entry serializes"));
            body.push('\n');
        }
        let tmp = tmp_path(path);
        let mut f = File::create(&tmp).map_err(io_err(&tmp))?;
        f.write_all(body.as_bytes()).map_err(io_err(&tmp))?;
        f.sync_all().map_err(io_err(&tmp))?;
        drop(f);
        fs::rename(&tmp, path).map_err(io_err(path))
    }
}

/// Single writer appending terminal task records.
#[derive(Debug)]
pub struct CheckpointWriter {
    path: PathBuf,
    file: File,
}

impl CheckpointWriter {
    pub fn append(&mut self, entry: &CheckpointEntry) -> Result<(), GenPipeError> {
        let mut line = serde_json::to_string(entry).expect("entry serializes");
        line.push('\n');
        self.file.write_all(line.as_bytes()).map_err(io_err(&self.path))?;
        self.file.sync_data().map_err(io_err(&self.path))
    }
}
