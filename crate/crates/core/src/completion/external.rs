//! Client side of the file-exchange completion protocol.
//!
//! For request `<id>` the client writes `<id>.req.json` ({id, normalization})
//! and then `<id>.req.ply` (the unit-sphere partial). Each file is written to a
//! temporary name and renamed into place, so a watcher never sees a partial
//! file. The responder answers with `<id>.resp.ply` (exactly
//! [`OUTPUT_POINTS`] unit-sphere points) or `<id>.err.json` ({id, message}).
//! The client polls for either, consumes it, and removes the exchange files.

use std::fs;
use std::path::{Path, PathBuf};
use std::thread;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::{Completer, CompletionRequest, OUTPUT_POINTS};
use crate::error::{Error, Result};
use crate::geometry::{OrientedPointCloud, RigidScale};
use crate::io::{read_cloud_ply, write_cloud_ply, write_json};

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(120);
pub const POLL_INTERVAL: Duration = Duration::from_millis(100);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExchangeRequest {
    pub id: String,
    pub normalization: RigidScale,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExchangeErrorRecord {
    pub id: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExchangeConfig {
    pub dir: PathBuf,
    pub timeout: Duration,
    pub poll_interval: Duration,
}

impl ExchangeConfig {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self {
            dir: dir.into(),
            timeout: DEFAULT_TIMEOUT,
            poll_interval: POLL_INTERVAL,
        }
    }
}

/// Paths of the four exchange files for a request id.
pub struct ExchangePaths {
    pub request_ply: PathBuf,
    pub request_json: PathBuf,
    pub response_ply: PathBuf,
    pub error_json: PathBuf,
}

impl ExchangePaths {
    pub fn new(dir: &Path, id: &str) -> Self {
        Self {
            request_ply: dir.join(format!("{id}.req.ply")),
            request_json: dir.join(format!("{id}.req.json")),
            response_ply: dir.join(format!("{id}.resp.ply")),
            error_json: dir.join(format!("{id}.err.json")),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExternalCompleter {
    config: ExchangeConfig,
}

impl ExternalCompleter {
    pub fn new(config: ExchangeConfig) -> Result<Self> {
        fs::create_dir_all(&config.dir)?;
        Ok(Self { config })
    }

    pub fn config(&self) -> &ExchangeConfig {
        &self.config
    }

    /// Sends one request and waits for its unit-sphere answer.
    pub fn exchange(&self, request: &CompletionRequest) -> Result<OrientedPointCloud> {
        validate_id(&request.id)?;
        let paths = ExchangePaths::new(&self.config.dir, &request.id);
        let sidecar = ExchangeRequest {
            id: request.id.clone(),
            normalization: request.normalization,
        };
        write_atomically(&paths.request_json, |tmp| write_json(tmp, &sidecar))?;
        write_atomically(&paths.request_ply, |tmp| write_cloud_ply(tmp, &request.partial))?;

        let result = self.await_response(&request.id, &paths);
        for p in [
            &paths.request_ply,
            &paths.request_json,
            &paths.response_ply,
            &paths.error_json,
        ] {
            let _ = fs::remove_file(p);
        }
        result
    }

    fn await_response(&self, id: &str, paths: &ExchangePaths) -> Result<OrientedPointCloud> {
        let deadline = Instant::now() + self.config.timeout;
        let mut last_failure: Option<(u64, String)> = None;
        loop {
            if paths.error_json.exists() {
                return Err(read_error_record(id, &paths.error_json));
            }
            if paths.response_ply.exists() {
                let size = fs::metadata(&paths.response_ply).map(|m| m.len()).unwrap_or(0);
                match read_response(&paths.response_ply) {
                    Ok(cloud) => return Ok(cloud),
                    // A responder that writes in place may be mid-write; only a
                    // file that stays malformed across two polls is rejected.
                    Err(message) => match &last_failure {
                        Some((previous, _)) if *previous == size => {
                            return Err(Error::Protocol(format!("response for {id}: {message}")))
                        }
                        _ => last_failure = Some((size, message)),
                    },
                }
            }
            if Instant::now() >= deadline {
                return Err(match last_failure {
                    Some((_, message)) => Error::Protocol(format!("response for {id}: {message}")),
                    None => Error::Timeout { id: id.to_string() },
                });
            }
            thread::sleep(self.config.poll_interval);
        }
    }
}

impl Completer for ExternalCompleter {
    fn tag(&self) -> &str {
        "external"
    }

    fn complete(&self, request: &CompletionRequest) -> Result<OrientedPointCloud> {
        self.exchange(request)
    }
}

fn validate_id(id: &str) -> Result<()> {
    let ok = !id.is_empty()
        && id
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'))
        && !id.starts_with('.');
    if ok {
        Ok(())
    } else {
        Err(Error::Protocol(format!("invalid request id {id:?}")))
    }
}

fn write_atomically(path: &Path, write: impl FnOnce(&Path) -> Result<()>) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    write(&tmp)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

fn read_response(path: &Path) -> std::result::Result<OrientedPointCloud, String> {
    let cloud = read_cloud_ply(path).map_err(|e| e.to_string())?;
    if cloud.len() != OUTPUT_POINTS {
        return Err(format!("expected {OUTPUT_POINTS} points, got {}", cloud.len()));
    }
    Ok(cloud)
}

fn read_error_record(id: &str, path: &Path) -> Error {
    let text = match fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) => return Error::Protocol(format!("unreadable error record for {id}: {e}")),
    };
    match serde_json::from_str::<ExchangeErrorRecord>(&text) {
        Ok(r) if r.id == id => Error::RemoteFailure {
            id: r.id,
            message: r.message,
        },
        Ok(r) => Error::Protocol(format!("error record for {id} names {:?}", r.id)),
        Err(e) => Error::Protocol(format!("malformed error record for {id}: {e}")),
    }
}
