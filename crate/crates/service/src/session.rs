//! One live session: the engine, its anytime p-values and its persisted log.

use std::fs::{self, File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use gnt_core::anytime::AnytimeTracker;
use gnt_core::engine::{ImtSession, Policy, SmallestMasked, Status};
use gnt_core::structure::{EmConfig, EmPolicy, GridPolicy, RefitSchedule, TreeDirection, TreePolicy};
use gnt_core::MaskScheme;
use serde::{Deserialize, Serialize};
use tokio::sync::broadcast;

use crate::config::{Layout, SessionConfig};
use crate::{Error, Result};

pub const CONFIG_FILE: &str = "config.json";
pub const LOG_FILE: &str = "events.jsonl";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LogAction {
    Pick,
    Reject,
    Stop,
    Suggest,
}

/// One line of a session's JSON-lines log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogLine {
    pub seq: u64,
    pub action: LogAction,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<usize>,
    /// Revealed p-value of a picked hypothesis.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    pub k: u64,
    pub statistic: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
    pub p_anytime: f64,
    pub status: Status,
    pub timestamp_ms: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub policy: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub suggested: Option<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViewEntry {
    pub id: usize,
    pub covariates: Vec<f64>,
    pub masked: f64,
    pub included: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
}

/// Everything an analyst may see at the current step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct View {
    pub session_id: String,
    pub scheme: MaskScheme,
    pub layout: String,
    pub alpha: f64,
    pub status: Status,
    pub k: u64,
    pub statistic: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
    pub p_anytime: f64,
    pub entries: Vec<ViewEntry>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PickResult {
    pub id: usize,
    pub p: f64,
    pub k: u64,
    pub statistic: f64,
    pub threshold: f64,
    pub p_anytime: f64,
    pub status: Status,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRow {
    pub k: u64,
    pub statistic: f64,
    pub threshold: f64,
    pub p_anytime: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub id: usize,
    /// Posterior non-null probability, or the masked value for `smallest-masked`.
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Suggestion {
    pub policy: String,
    pub k: u64,
    pub candidates: Vec<Candidate>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PolicyKind {
    Grid,
    Tree(TreeDirection),
    Em,
    SmallestMasked,
}

impl PolicyKind {
    pub fn parse(name: &str, direction: Option<&str>) -> Result<Self> {
        let direction = match direction.unwrap_or("decreasing") {
            "decreasing" => TreeDirection::Decreasing,
            "increasing" => TreeDirection::Increasing,
            other => return Err(Error::Malformed(format!("unknown tree direction `{other}`"))),
        };
        Ok(match name {
            "grid" => PolicyKind::Grid,
            "tree" => PolicyKind::Tree(direction),
            "em" => PolicyKind::Em,
            "smallest-masked" | "smallest_masked" => PolicyKind::SmallestMasked,
            other => return Err(Error::UnknownPolicy(other.into())),
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            PolicyKind::Grid => "grid",
            PolicyKind::Tree(_) => "tree",
            PolicyKind::Em => "em",
            PolicyKind::SmallestMasked => "smallest-masked",
        }
    }
}

/// An immutable copy for read-only suggestion jobs.
#[derive(Debug, Clone)]
pub struct Snapshot {
    engine: ImtSession,
    layout: Layout,
}

impl Snapshot {
    pub fn suggest(&self, kind: PolicyKind, limit: usize) -> Result<Suggestion> {
        if self.engine.state().stopped() {
            return Err(Error::Stopped);
        }
        let incompatible = |needs| Error::IncompatiblePolicy { policy: kind.name(), needs, layout: self.layout.name() };
        let mut policy: Box<dyn Policy> = match (kind, &self.layout) {
            (PolicyKind::Grid, Layout::Grid) => {
                Box::new(GridPolicy::new(5, RefitSchedule::default(), EmConfig::interactive()))
            }
            (PolicyKind::Grid, _) => return Err(incompatible("grid")),
            (PolicyKind::Tree(d), Layout::Tree { parent }) => {
                Box::new(TreePolicy::modeled(parent.clone(), d, RefitSchedule::default(), EmConfig::interactive()))
            }
            (PolicyKind::Tree(_), _) => return Err(incompatible("tree")),
            (PolicyKind::Em, _) => Box::new(EmPolicy::default()),
            (PolicyKind::SmallestMasked, _) => Box::new(SmallestMasked::default()),
        };
        let view = self.engine.view();
        let candidates = policy
            .rank(&view)
            .into_iter()
            .take(limit)
            .map(|(id, score)| Candidate { id, score })
            .collect();
        Ok(Suggestion { policy: kind.name().into(), k: view.k, candidates })
    }
}

pub(crate) fn now_ms() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_millis() as u64)
}

fn parse_log(text: &str) -> (Vec<LogLine>, usize) {
    let mut lines = Vec::new();
    let mut good = 0;
    for raw in text.split_inclusive('\n') {
        if !raw.ends_with('\n') {
            break;
        }
        match serde_json::from_str::<LogLine>(raw.trim_end()) {
            Ok(l) => lines.push(l),
            Err(_) if raw.trim().is_empty() => {}
            Err(_) => break,
        }
        good += raw.len();
    }
    (lines, good)
}

pub struct LiveSession {
    id: String,
    dir: PathBuf,
    config: SessionConfig,
    engine: ImtSession,
    layout: Layout,
    alpha: f64,
    anytime: AnytimeTracker,
    p_path: Vec<f64>,
    log: Vec<LogLine>,
    file: File,
    events: broadcast::Sender<LogLine>,
}

impl std::fmt::Debug for LiveSession {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LiveSession").field("id", &self.id).field("k", &self.engine.state().k).finish()
    }
}

impl LiveSession {
    fn start(id: String, dir: PathBuf, config: SessionConfig, default_alpha: f64, file: File) -> Result<Self> {
        let r = config.resolve(default_alpha)?;
        let anytime = AnytimeTracker::new(r.rule.description())?;
        let engine = ImtSession::new(&r.hyps, r.scheme, r.rule)?;
        Ok(Self {
            id,
            dir,
            config,
            engine,
            layout: r.layout,
            alpha: r.alpha,
            anytime,
            p_path: Vec::new(),
            log: Vec::new(),
            file,
            events: broadcast::channel(256).0,
        })
    }

    /// Validate `config`, then persist it under `root/<id>`.
    pub fn create(root: &Path, id: String, config: SessionConfig, default_alpha: f64) -> Result<Self> {
        config.resolve(default_alpha)?;
        let dir = root.join(&id);
        fs::create_dir_all(&dir)?;
        let tmp = dir.join("config.json.tmp");
        fs::write(&tmp, serde_json::to_vec(&config).map_err(|e| Error::Internal(e.to_string()))?)?;
        fs::rename(&tmp, dir.join(CONFIG_FILE))?;
        let file = OpenOptions::new().create(true).append(true).open(dir.join(LOG_FILE))?;
        Self::start(id, dir, config, default_alpha, file)
    }

    /// Rebuild from disk, checking every recorded statistic bit for bit. A
    /// torn final line is cut off.
    pub fn restore(dir: &Path, default_alpha: f64) -> Result<Self> {
        let id = dir.file_name().and_then(|s| s.to_str()).unwrap_or_default().to_string();
        let config: SessionConfig = serde_json::from_slice(&fs::read(dir.join(CONFIG_FILE))?)
            .map_err(|e| Error::Corrupt(format!("{id}: config: {e}")))?;
        let path = dir.join(LOG_FILE);
        let text = fs::read_to_string(&path).unwrap_or_default();
        let (lines, good) = parse_log(&text);
        if good < text.len() {
            if text[good..].trim_end().contains('\n') {
                return Err(Error::Corrupt(format!("{id}: unreadable event in the middle of the log")));
            }
            OpenOptions::new().write(true).open(&path)?.set_len(good as u64)?;
        }
        let file = OpenOptions::new().create(true).append(true).open(&path)?;
        let mut s = Self::start(id, dir.to_path_buf(), config, default_alpha, file)?;
        for line in lines {
            s.apply(&line)?;
            s.log.push(line);
        }
        Ok(s)
    }

    fn apply(&mut self, line: &LogLine) -> Result<()> {
        let tag = format!("{}: replay diverged at seq {}", self.id, line.seq);
        let diverged = move || Error::Corrupt(tag);
        match line.action {
            LogAction::Pick => {
                let id = line.id.ok_or_else(diverged.clone())?;
                self.engine.pick(id)?;
                self.track()?;
            }
            LogAction::Stop => self.engine.stop()?,
            LogAction::Reject | LogAction::Suggest => {}
        }
        let st = self.engine.state();
        let same = st.statistic.to_bits() == line.statistic.to_bits()
            && st.status == line.status
            && st.k == line.k
            && self.current_p().to_bits() == line.p_anytime.to_bits();
        if same && line.seq == self.log.len() as u64 {
            Ok(())
        } else {
            Err(diverged())
        }
    }

    fn track(&mut self) -> Result<()> {
        let st = self.engine.state();
        let p = self.anytime.push(st.k, st.statistic)?;
        self.p_path.push(p);
        Ok(())
    }

    fn current_p(&self) -> f64 {
        self.p_path.last().copied().unwrap_or(1.0)
    }

    fn append(&mut self, action: LogAction, id: Option<usize>, p: Option<f64>) -> Result<LogLine> {
        let line = LogLine { id, p, ..self.line(action) };
        self.write(line)
    }

    fn write(&mut self, line: LogLine) -> Result<LogLine> {
        let mut text = serde_json::to_string(&line).map_err(|e| Error::Internal(e.to_string()))?;
        text.push('\n');
        self.file.write_all(text.as_bytes())?;
        self.file.sync_data()?;
        self.log.push(line.clone());
        let _ = self.events.send(line.clone());
        Ok(line)
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn config(&self) -> &SessionConfig {
        &self.config
    }

    pub fn status(&self) -> Status {
        self.engine.state().status
    }

    pub fn subscribe(&self) -> broadcast::Receiver<LogLine> {
        self.events.subscribe()
    }

    pub fn pick(&mut self, id: usize) -> Result<PickResult> {
        let out = self.engine.pick(id)?;
        self.track()?;
        self.append(LogAction::Pick, Some(id), Some(out.p))?;
        if out.status == Status::Rejected {
            self.append(LogAction::Reject, None, None)?;
        }
        Ok(PickResult {
            id,
            p: out.p,
            k: out.k,
            statistic: out.statistic,
            threshold: out.threshold,
            p_anytime: self.current_p(),
            status: self.engine.state().status,
        })
    }

    pub fn stop(&mut self) -> Result<Status> {
        self.engine.stop()?;
        self.append(LogAction::Stop, None, None)?;
        Ok(self.status())
    }

    /// Record that a suggestion was served; the engine is untouched.
    pub fn note_suggestion(&mut self, s: &Suggestion) -> Result<()> {
        let line = LogLine {
            policy: Some(s.policy.clone()),
            suggested: Some(s.candidates.iter().map(|c| c.id).collect()),
            ..self.line(LogAction::Suggest)
        };
        self.write(line).map(|_| ())
    }

    fn line(&self, action: LogAction) -> LogLine {
        let st = self.engine.state();
        LogLine {
            seq: self.log.len() as u64,
            action,
            id: None,
            p: None,
            k: st.k,
            statistic: st.statistic,
            threshold: st.trajectory.last().map(|t| t.threshold),
            p_anytime: self.current_p(),
            status: st.status,
            timestamp_ms: now_ms(),
            policy: None,
            suggested: None,
        }
    }

    pub fn snapshot(&self) -> Snapshot {
        Snapshot { engine: self.engine.clone(), layout: self.layout.clone() }
    }

    pub fn view(&self) -> View {
        let st = self.engine.state();
        let revealed = self.engine.filtration();
        let entries = self
            .engine
            .entries()
            .iter()
            .map(|e| ViewEntry {
                id: e.id,
                covariates: e.covariates.clone(),
                masked: e.masked,
                included: revealed.is_revealed(e.id),
                p: revealed.p(e.id),
            })
            .collect();
        View {
            session_id: self.id.clone(),
            scheme: self.engine.scheme(),
            layout: self.layout.name().into(),
            alpha: self.alpha,
            status: st.status,
            k: st.k,
            statistic: st.statistic,
            threshold: st.trajectory.last().map(|t| t.threshold),
            p_anytime: self.current_p(),
            entries,
        }
    }

    pub fn trajectory(&self) -> Vec<TrajectoryRow> {
        self.engine
            .state()
            .trajectory
            .iter()
            .zip(&self.p_path)
            .map(|(t, &p)| TrajectoryRow { k: t.k, statistic: t.statistic, threshold: t.threshold, p_anytime: p })
            .collect()
    }

    pub fn log(&self) -> &[LogLine] {
        &self.log
    }

    pub fn log_text(&self) -> String {
        self.log.iter().map(|l| serde_json::to_string(l).expect("log lines serialize") + "\n").collect()
    }
}
