//! Pluggable producers of status and queue text.
//!
//! Command and file sources emit one listing mixing `S`, `M` and `Q` lines;
//! status requests keep the `S`/`M` lines and queue requests the `Q` lines.

use std::fmt;
use std::path::PathBuf;
use std::process::Command;
use std::str::FromStr;
use std::sync::{Arc, Mutex};

use thiserror::Error;

use crate::model::Timestamp;
use crate::sim::{status_at, GroundTruth};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("status source unavailable: {0}")]
pub struct SourceError(pub String);

/// Capability to fetch the current pool status and job queue. The two
/// requests are independent and may fail independently.
pub trait StatusSource: Send + Sync {
    /// `S` and `M` lines describing the pool at `now`.
    fn fetch_status(&self, now: Timestamp) -> Result<String, SourceError>;
    /// `Q` lines describing the queue at `now`.
    fn fetch_queue(&self, now: Timestamp) -> Result<String, SourceError>;
}

fn status_lines(text: &str) -> String {
    select_lines(text, |l| !l.starts_with("Q|"))
}

fn queue_lines(text: &str) -> String {
    select_lines(text, |l| l.starts_with("Q|"))
}

fn select_lines(text: &str, keep: impl Fn(&str) -> bool) -> String {
    let mut out = String::new();
    for line in text.lines().filter(|l| keep(l)) {
        out.push_str(line);
        out.push('\n');
    }
    out
}

/// Runs a shell command (`sh -c`) and reads its standard output.
#[derive(Debug, Clone)]
pub struct CommandSource {
    command: String,
}

impl CommandSource {
    pub fn new(command: impl Into<String>) -> Self {
        CommandSource {
            command: command.into(),
        }
    }

    fn run(&self) -> Result<String, SourceError> {
        let out = Command::new("sh")
            .arg("-c")
            .arg(&self.command)
            .output()
            .map_err(|e| SourceError(format!("cannot run {:?}: {e}", self.command)))?;
        if !out.status.success() {
            let stderr = String::from_utf8_lossy(&out.stderr);
            return Err(SourceError(format!(
                "{:?} exited with {}: {}",
                self.command,
                out.status,
                stderr.trim()
            )));
        }
        String::from_utf8(out.stdout).map_err(|_| SourceError(format!("{:?} printed non-UTF-8 output", self.command)))
    }
}

impl StatusSource for CommandSource {
    fn fetch_status(&self, _now: Timestamp) -> Result<String, SourceError> {
        self.run().map(|t| status_lines(&t))
    }

    fn fetch_queue(&self, _now: Timestamp) -> Result<String, SourceError> {
        self.run().map(|t| queue_lines(&t))
    }
}

/// Reads a snapshot file on every request.
#[derive(Debug, Clone)]
pub struct FileSource {
    path: PathBuf,
}

impl FileSource {
    pub fn new(path: impl Into<PathBuf>) -> Self {
        FileSource { path: path.into() }
    }

    fn read(&self) -> Result<String, SourceError> {
        std::fs::read_to_string(&self.path).map_err(|e| SourceError(format!("{}: {e}", self.path.display())))
    }
}

impl StatusSource for FileSource {
    fn fetch_status(&self, _now: Timestamp) -> Result<String, SourceError> {
        self.read().map(|t| status_lines(&t))
    }

    fn fetch_queue(&self, _now: Timestamp) -> Result<String, SourceError> {
        self.read().map(|t| queue_lines(&t))
    }
}

/// In-memory listing that can be swapped or taken down at runtime.
#[derive(Debug, Default)]
pub struct StaticSource {
    text: Mutex<Option<String>>,
    fetches: Mutex<u64>,
}

impl StaticSource {
    pub fn new(text: impl Into<String>) -> Self {
        StaticSource {
            text: Mutex::new(Some(text.into())),
            fetches: Mutex::new(0),
        }
    }

    /// A source that is down until [`StaticSource::set_text`] is called.
    pub fn down() -> Self {
        Self::default()
    }

    pub fn set_text(&self, text: impl Into<String>) {
        *self.text.lock().expect("source poisoned") = Some(text.into());
    }

    pub fn set_down(&self) {
        *self.text.lock().expect("source poisoned") = None;
    }

    /// Number of fetch requests served or refused so far.
    pub fn fetch_count(&self) -> u64 {
        *self.fetches.lock().expect("source poisoned")
    }

    fn read(&self) -> Result<String, SourceError> {
        *self.fetches.lock().expect("source poisoned") += 1;
        self.text
            .lock()
            .expect("source poisoned")
            .clone()
            .ok_or_else(|| SourceError("static source is down".into()))
    }
}

impl StatusSource for StaticSource {
    fn fetch_status(&self, _now: Timestamp) -> Result<String, SourceError> {
        self.read().map(|t| status_lines(&t))
    }

    fn fetch_queue(&self, _now: Timestamp) -> Result<String, SourceError> {
        self.read().map(|t| queue_lines(&t))
    }
}

/// Serves a simulated pool. Instants outside the simulated span are
/// refused, unless the source wraps, in which case they are folded into the
/// span so that a wall-clock deployment replays the scenario forever.
#[derive(Debug, Clone)]
pub struct SimSource {
    truth: Arc<GroundTruth>,
    wrap: bool,
}

impl SimSource {
    pub fn new(truth: Arc<GroundTruth>) -> Self {
        SimSource { truth, wrap: false }
    }

    pub fn wrapping(truth: Arc<GroundTruth>) -> Self {
        SimSource { truth, wrap: true }
    }

    pub fn truth(&self) -> &GroundTruth {
        &self.truth
    }

    fn instant(&self, now: Timestamp) -> Result<Timestamp, SourceError> {
        let (start, end) = (self.truth.start(), self.truth.end());
        if now >= start && now <= end {
            return Ok(now);
        }
        if !self.wrap {
            return Err(SourceError(format!("{now} is outside the simulated span {start}..{end}")));
        }
        let span = (end - start).num_seconds();
        let offset = (now - start).num_seconds().rem_euclid(span);
        Ok(start + chrono::TimeDelta::seconds(offset))
    }
}

impl StatusSource for SimSource {
    fn fetch_status(&self, now: Timestamp) -> Result<String, SourceError> {
        Ok(status_at(&self.truth, self.instant(now)?).0)
    }

    fn fetch_queue(&self, now: Timestamp) -> Result<String, SourceError> {
        Ok(status_at(&self.truth, self.instant(now)?).1)
    }
}

/// Textual source selector: `cmd:<shell command>`, `file:<path>` or
/// `sim:<scenario file>`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SourceSpec {
    Command(String),
    File(PathBuf),
    Sim(PathBuf),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid source {0:?}: expected cmd:<command>, file:<path> or sim:<scenario>")]
pub struct SourceSpecError(pub String);

impl FromStr for SourceSpec {
    type Err = SourceSpecError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (kind, rest) = s.split_once(':').ok_or_else(|| SourceSpecError(s.to_string()))?;
        if rest.is_empty() {
            return Err(SourceSpecError(s.to_string()));
        }
        match kind {
            "cmd" => Ok(SourceSpec::Command(rest.to_string())),
            "file" => Ok(SourceSpec::File(rest.into())),
            "sim" => Ok(SourceSpec::Sim(rest.into())),
            _ => Err(SourceSpecError(s.to_string())),
        }
    }
}

impl fmt::Display for SourceSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SourceSpec::Command(c) => write!(f, "cmd:{c}"),
            SourceSpec::File(p) => write!(f, "file:{}", p.display()),
            SourceSpec::Sim(p) => write!(f, "sim:{}", p.display()),
        }
    }
}

#[derive(Debug, Error)]
pub enum OpenSourceError {
    #[error("cannot read scenario {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error(transparent)]
    Scenario(#[from] crate::sim::InvalidScenario),
}

impl SourceSpec {
    /// Builds the source. Simulated pools wrap around their span when `wrap`
    /// is set.
    pub fn open(&self, wrap: bool) -> Result<Arc<dyn StatusSource>, OpenSourceError> {
        Ok(match self {
            SourceSpec::Command(c) => Arc::new(CommandSource::new(c.clone())),
            SourceSpec::File(p) => Arc::new(FileSource::new(p.clone())),
            SourceSpec::Sim(p) => {
                let text = std::fs::read_to_string(p).map_err(|source| OpenSourceError::Io {
                    path: p.clone(),
                    source,
                })?;
                let scenario: crate::sim::Scenario = text.parse()?;
                let truth = Arc::new(crate::sim::simulate(&scenario)?);
                if wrap {
                    Arc::new(SimSource::wrapping(truth))
                } else {
                    Arc::new(SimSource::new(truth))
                }
            }
        })
    }
}
