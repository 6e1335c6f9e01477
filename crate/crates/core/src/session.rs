//! Episode sessions driven by newline-delimited JSON requests.
//!
//! Every request is one JSON object with a `cmd` field; every response is one
//! JSON object, either `{"ok": true, ...}` or `{"error": CODE, "detail": ...}`.
//! The speaker view (concept, instruction) and the listener view (grid or
//! image, received messages) are separate payloads and never share fields.

use std::collections::BTreeMap;
use std::io::{self, BufRead, Write};
use std::path::Path;
use std::sync::{Arc, Mutex};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::channel::{
    apply_signalling_cost, baseline_speak, message_symbols, oracle_listener_view, validate_messages, BaselineKind,
    MessageMode, MessageSet,
};
use crate::config::FileConfig;
use crate::encoding::grid_encoding;
use crate::episode::{sample_episode_with, Episode, GridInputType};
use crate::language::{ConceptVector, Lexicon};
use crate::metrics::{evaluate_trace, SymbolView, TraceMetrics};
use crate::render::{apply_lights_out, render_grid, sample_illumination, Frame};
use crate::trace::{write_trace, TraceRecord};
use crate::world::{apply_action, ActionId, GridState};

/// Shared append-only destination for finished session traces.
pub type TraceSink = Arc<Mutex<dyn Write + Send>>;

// Independent random streams derived from one episode seed.
const SPEAKER_STREAM: u64 = 1;
const ILLUMINATION_STREAM: u64 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ErrorCode {
    BadCmd,
    BadState,
    Validation,
    Config,
}

#[derive(Debug, Clone, PartialEq, Error, Serialize)]
#[error("{code:?}: {detail}")]
pub struct ProtocolError {
    #[serde(rename = "error")]
    pub code: ErrorCode,
    pub detail: String,
}

impl ProtocolError {
    fn new(code: ErrorCode, detail: impl Into<String>) -> Self {
        Self { code, detail: detail.into() }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum ActionRef {
    Index(usize),
    Name(String),
}

impl ActionRef {
    fn resolve(&self) -> Result<ActionId, ProtocolError> {
        match self {
            ActionRef::Index(i) => ActionId::try_from(*i),
            ActionRef::Name(n) => n.parse(),
        }
        .map_err(|e| ProtocolError::new(ErrorCode::BadCmd, e.to_string()))
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "cmd", rename_all = "snake_case")]
pub enum Request {
    Reset {
        config: Option<Box<FileConfig>>,
        seed: Option<u64>,
    },
    Speak {
        messages: MessageSet,
    },
    Step {
        action: ActionRef,
    },
    /// `kind: null` removes every installed baseline.
    Baseline {
        kind: Option<BaselineKind>,
    },
    Render {
        cell_px: Option<usize>,
        path: Option<String>,
    },
    Metrics {
        alpha: Option<f64>,
        view: Option<SymbolView>,
    },
    Close,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpeakerView {
    pub concept: ConceptVector,
    pub instruction: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ImagePayload {
    pub width: usize,
    pub height: usize,
    /// Row-major 8-bit RGB, base-16.
    pub pixels_hex: String,
}

impl ImagePayload {
    fn from_frame(frame: &Frame) -> Self {
        Self { width: frame.width, height: frame.height, pixels_hex: hex::encode(frame.to_rgb8()) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ListenerView {
    /// `grid[row][col]`: 17 bits per cell, 18 with the oracle-listener baseline.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid: Option<Vec<Vec<Vec<u8>>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub image: Option<ImagePayload>,
    pub messages: Option<MessageSet>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResetReply {
    pub seed: u64,
    pub episode_len: u32,
    pub speaker: SpeakerView,
    pub listener: ListenerView,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepReply {
    pub listener: ListenerView,
    pub reward: f64,
    pub adjusted_reward: f64,
    pub done: bool,
    pub info: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RenderReply {
    pub width: usize,
    pub height: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub path: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pixels_hex: Option<String>,
}

struct ActiveEpisode {
    id: u64,
    seed: u64,
    episode: Episode,
    state: GridState,
    messages: Option<MessageSet>,
    actions: Vec<ActionId>,
    reward: f64,
    done: bool,
    illumination: f64,
    speaker_rng: ChaCha8Rng,
    recorded: bool,
}

pub struct Session {
    config: FileConfig,
    lexicon: Lexicon,
    episodes_started: u64,
    active: Option<ActiveEpisode>,
    speaker: Option<BaselineKind>,
    oracle_view: bool,
    trace: Vec<TraceRecord>,
    sink: Option<TraceSink>,
    closed: bool,
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

impl Session {
    pub fn new(config: FileConfig) -> Result<Self, ProtocolError> {
        config.validate().map_err(|e| ProtocolError::new(ErrorCode::Config, e.to_string()))?;
        let lexicon = config.lexicon().map_err(|e| ProtocolError::new(ErrorCode::Config, e.to_string()))?;
        Ok(Self {
            config,
            lexicon,
            episodes_started: 0,
            active: None,
            speaker: None,
            oracle_view: false,
            trace: Vec::new(),
            sink: None,
            closed: false,
        })
    }

    pub fn with_sink(mut self, sink: TraceSink) -> Self {
        self.sink = Some(sink);
        self
    }

    pub fn config(&self) -> &FileConfig {
        &self.config
    }

    pub fn is_closed(&self) -> bool {
        self.closed
    }

    /// Finished (or abandoned) episodes recorded so far.
    pub fn trace(&self) -> &[TraceRecord] {
        &self.trace
    }

    /// Full state of the running episode, for in-process scripted agents.
    pub fn current_episode(&self) -> Option<(&Episode, &GridState)> {
        self.active.as_ref().map(|a| (&a.episode, &a.state))
    }

    fn ensure_open(&self) -> Result<(), ProtocolError> {
        if self.closed {
            return Err(ProtocolError::new(ErrorCode::BadState, "session closed"));
        }
        Ok(())
    }

    fn running(&mut self) -> Result<&mut ActiveEpisode, ProtocolError> {
        match self.active.as_mut() {
            None => Err(ProtocolError::new(ErrorCode::BadState, "no episode; send reset first")),
            Some(a) if a.done => Err(ProtocolError::new(ErrorCode::BadState, "episode is done; send reset")),
            Some(a) => Ok(a),
        }
    }

    fn record(&mut self) {
        let Some(active) = self.active.as_mut() else { return };
        if active.recorded {
            return;
        }
        active.recorded = true;
        let mode = self.config.channel.mode;
        let (messages, continuous) = match &active.messages {
            None => (Vec::new(), None),
            Some(m) => (
                vec![message_symbols(mode, m).unwrap_or_default()],
                (mode == MessageMode::Continuous).then(|| vec![m.messages.clone()]),
            ),
        };
        self.trace.push(TraceRecord {
            episode_id: active.id,
            seed: active.seed,
            config_digest: self.config.digest(),
            concept: active.episode.concept,
            messages,
            continuous,
            actions: active.actions.clone(),
            reward: active.reward,
        });
    }

    fn listener_view(&self) -> ListenerView {
        let active = self.active.as_ref().expect("listener view needs an episode");
        let mut view = ListenerView { grid: None, image: None, messages: active.messages.clone() };
        match self.config.environment.grid_input_type {
            GridInputType::Vector => {
                let encoding = grid_encoding(&active.state);
                let target = active.episode.target_position();
                view.grid = Some(match (self.oracle_view, target) {
                    (true, Some(pos)) => oracle_listener_view(&encoding, pos)
                        .expect("target inside grid")
                        .into_iter()
                        .map(|row| row.into_iter().map(|c| c.to_vec()).collect())
                        .collect(),
                    // a carried target has no cell to mark
                    (true, None) => encoding
                        .cells
                        .iter()
                        .map(|row| row.iter().map(|c| c.iter().copied().chain([0]).collect()).collect())
                        .collect(),
                    (false, _) => encoding
                        .cells
                        .iter()
                        .map(|row| row.iter().map(|c| c.to_vec()).collect())
                        .collect(),
                });
            }
            GridInputType::Image => {
                let frame = self.frame(self.config.render.cell_px).expect("validated cell size");
                view.image = Some(ImagePayload::from_frame(&frame));
            }
        }
        view
    }

    fn frame(&self, cell_px: usize) -> Result<Frame, ProtocolError> {
        let active = self
            .active
            .as_ref()
            .ok_or_else(|| ProtocolError::new(ErrorCode::BadState, "no episode; send reset first"))?;
        let frame = render_grid(&active.state, cell_px)
            .map_err(|e| ProtocolError::new(ErrorCode::Validation, e.to_string()))?;
        apply_lights_out(&frame, active.illumination).map_err(|e| ProtocolError::new(ErrorCode::Validation, e.to_string()))
    }

    fn speak_baseline(&mut self) -> Result<(), ProtocolError> {
        let Some(kind) = self.speaker else { return Ok(()) };
        let channel = self.config.channel.clone();
        let active = self.running()?;
        if active.messages.is_some() || !active.actions.is_empty() {
            return Ok(());
        }
        let msgs = baseline_speak(kind, &channel, &active.episode.concept, &mut active.speaker_rng)
            .map_err(|e| ProtocolError::new(ErrorCode::Config, e.to_string()))?;
        active.messages = Some(msgs);
        Ok(())
    }

    pub fn reset(&mut self, config: Option<FileConfig>, seed: Option<u64>) -> Result<ResetReply, ProtocolError> {
        self.ensure_open()?;
        if let Some(cfg) = config {
            cfg.validate().map_err(|e| ProtocolError::new(ErrorCode::Config, e.to_string()))?;
            self.lexicon = cfg.lexicon().map_err(|e| ProtocolError::new(ErrorCode::Config, e.to_string()))?;
            self.config = cfg;
        }
        self.record();
        let id = self.episodes_started;
        let seed = seed.unwrap_or_else(|| self.config.environment.seed.wrapping_add(id));
        let episode = sample_episode_with(&self.config.environment, &self.lexicon, &mut ChaCha8Rng::seed_from_u64(seed))
            .map_err(|e| ProtocolError::new(ErrorCode::Config, e.to_string()))?;
        self.episodes_started += 1;
        let illumination = sample_illumination(episode.lights_out_active, &mut stream_rng(seed, ILLUMINATION_STREAM));
        self.active = Some(ActiveEpisode {
            id,
            seed,
            state: episode.state.clone(),
            episode,
            messages: None,
            actions: Vec::new(),
            reward: 0.0,
            done: false,
            illumination,
            speaker_rng: stream_rng(seed, SPEAKER_STREAM),
            recorded: false,
        });
        self.speak_baseline()?;
        let active = self.active.as_ref().expect("just created");
        Ok(ResetReply {
            seed,
            episode_len: self.config.environment.episode_len,
            speaker: SpeakerView { concept: active.episode.concept, instruction: active.episode.instruction.to_string() },
            listener: self.listener_view(),
        })
    }

    pub fn speak(&mut self, messages: MessageSet) -> Result<(), ProtocolError> {
        self.ensure_open()?;
        let channel = self.config.channel.clone();
        let scripted = self.speaker.is_some();
        let active = self.running()?;
        if active.messages.is_some() || scripted {
            return Err(ProtocolError::new(ErrorCode::BadState, "messages already sent this round"));
        }
        if !active.actions.is_empty() {
            return Err(ProtocolError::new(ErrorCode::BadState, "the listener has already acted this round"));
        }
        validate_messages(&channel, &messages).map_err(|v| ProtocolError::new(ErrorCode::Validation, v.to_string()))?;
        active.messages = Some(messages);
        Ok(())
    }

    pub fn step(&mut self, action: ActionId) -> Result<StepReply, ProtocolError> {
        self.ensure_open()?;
        let channel = self.config.channel.clone();
        let max_steps = self.config.environment.episode_len;
        let active = self.running()?;
        let (next, outcome) = apply_action(&active.state, &active.episode.task, action, max_steps)
            .map_err(|e| ProtocolError::new(ErrorCode::BadState, e.to_string()))?;
        active.state = next;
        active.actions.push(action);
        let adjusted = if outcome.done {
            let rounds = u32::from(active.messages.is_some());
            apply_signalling_cost(outcome.reward, &channel, rounds)
        } else {
            outcome.reward
        };
        active.reward += adjusted;
        active.done = outcome.done;
        if outcome.done {
            self.record();
        }
        Ok(StepReply {
            listener: self.listener_view(),
            reward: outcome.reward,
            adjusted_reward: adjusted,
            done: outcome.done,
            info: outcome.info,
        })
    }

    pub fn baseline(&mut self, kind: Option<BaselineKind>) -> Result<Option<ListenerView>, ProtocolError> {
        self.ensure_open()?;
        match kind {
            None => {
                self.speaker = None;
                self.oracle_view = false;
            }
            Some(BaselineKind::OracleListener) => self.oracle_view = true,
            Some(speaker) => {
                let probe = ConceptVector::from_parts(crate::language::ConceptParts {
                    size: 1,
                    shape: crate::world::Shape::Square,
                    color: crate::world::Color::Red,
                    weight: crate::world::Weight::Light,
                    verb: crate::world::Verb::Walk,
                })
                .expect("valid probe concept");
                baseline_speak(speaker, &self.config.channel, &probe, &mut ChaCha8Rng::seed_from_u64(0))
                    .map_err(|e| ProtocolError::new(ErrorCode::Config, e.to_string()))?;
                if self.active.as_ref().is_some_and(|a| a.messages.is_some() && !a.done) {
                    return Err(ProtocolError::new(
                        ErrorCode::BadState,
                        "messages already sent this round; install the speaker before reset",
                    ));
                }
                self.speaker = Some(speaker);
                if self.active.as_ref().is_some_and(|a| !a.done) {
                    self.speak_baseline()?;
                }
            }
        }
        Ok(self.active.as_ref().filter(|a| !a.done).map(|_| self.listener_view()))
    }

    pub fn render(&self, cell_px: Option<usize>, path: Option<&Path>) -> Result<RenderReply, ProtocolError> {
        self.ensure_open()?;
        let frame = self.frame(cell_px.unwrap_or(self.config.render.cell_px))?;
        match path {
            Some(p) => {
                let file = std::fs::File::create(p)
                    .map_err(|e| ProtocolError::new(ErrorCode::Validation, format!("{}: {e}", p.display())))?;
                frame
                    .write_ppm(io::BufWriter::new(file))
                    .map_err(|e| ProtocolError::new(ErrorCode::Validation, e.to_string()))?;
                Ok(RenderReply {
                    width: frame.width,
                    height: frame.height,
                    path: Some(p.display().to_string()),
                    pixels_hex: None,
                })
            }
            None => Ok(RenderReply {
                width: frame.width,
                height: frame.height,
                path: None,
                pixels_hex: Some(hex::encode(frame.to_rgb8())),
            }),
        }
    }

    pub fn metrics(&self, alpha: Option<f64>, view: Option<SymbolView>) -> Result<TraceMetrics, ProtocolError> {
        self.ensure_open()?;
        let alpha = alpha.unwrap_or(0.0);
        if !(alpha >= 0.0 && alpha.is_finite()) {
            return Err(ProtocolError::new(ErrorCode::Validation, "alpha must be non-negative"));
        }
        Ok(evaluate_trace(&self.trace, alpha, view.unwrap_or_default()))
    }

    /// Records any running episode and flushes the trace to the sink.
    pub fn close(&mut self) -> Result<usize, ProtocolError> {
        self.ensure_open()?;
        self.record();
        self.closed = true;
        if let Some(sink) = &self.sink {
            let mut out = sink.lock().unwrap_or_else(|poisoned| poisoned.into_inner());
            write_trace(&mut *out, &self.trace).map_err(|e| ProtocolError::new(ErrorCode::BadState, e.to_string()))?;
        }
        Ok(self.trace.len())
    }

    pub fn handle_request(&mut self, request: Request) -> Result<Value, ProtocolError> {
        match request {
            Request::Reset { config, seed } => ok(self.reset(config.map(|c| *c), seed)?),
            Request::Speak { messages } => {
                self.speak(messages)?;
                Ok(json!({ "ok": true }))
            }
            Request::Step { action } => ok(self.step(action.resolve()?)?),
            Request::Baseline { kind } => {
                let listener = self.baseline(kind)?;
                let mut v = json!({ "ok": true, "kind": kind });
                if let Some(l) = listener {
                    v["listener"] = serde_json::to_value(l).expect("view serializes");
                }
                Ok(v)
            }
            Request::Render { cell_px, path } => ok(self.render(cell_px, path.as_deref().map(Path::new))?),
            Request::Metrics { alpha, view } => ok(self.metrics(alpha, view)?),
            Request::Close => {
                let n = self.close()?;
                Ok(json!({ "ok": true, "records": n }))
            }
        }
    }

    /// Handles one request line and returns one response line (without newline).
    pub fn handle_line(&mut self, line: &str) -> String {
        let response = match serde_json::from_str::<Request>(line) {
            Ok(req) => self.handle_request(req),
            Err(e) => Err(ProtocolError::new(ErrorCode::BadCmd, e.to_string())),
        };
        let value = response.unwrap_or_else(|e| serde_json::to_value(e).expect("error serializes"));
        serde_json::to_string(&value).expect("json values serialize")
    }
}

fn ok<T: Serialize>(reply: T) -> Result<Value, ProtocolError> {
    let mut v = serde_json::to_value(reply).expect("replies serialize");
    if let Value::Object(map) = &mut v {
        map.insert("ok".into(), Value::Bool(true));
    }
    Ok(v)
}

/// Runs a session over a line-oriented stream until `close` or end of input.
/// A session left open at end of input is closed implicitly.
pub fn serve<R: BufRead, W: Write>(session: &mut Session, input: R, mut output: W) -> io::Result<()> {
    for line in input.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let response = session.handle_line(&line);
        writeln!(output, "{response}")?;
        output.flush()?;
        if session.is_closed() {
            return Ok(());
        }
    }
    if !session.is_closed() {
        let _ = session.close();
    }
    Ok(())
}
