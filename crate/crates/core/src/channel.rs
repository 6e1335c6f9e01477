//! The speaker → listener channel: message validation, capacity, signalling
//! cost, baseline speakers and the oracle-listener view.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::encoding::{GridEncoding, CELL_BITS};
use crate::language::{ConceptVector, CONCEPT_BITS, CONCEPT_GROUPS};
use crate::world::Pos;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MessageMode {
    Binary,
    #[serde(alias = "categorical")]
    OneHot,
    Continuous,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChannelConfig {
    #[serde(rename = "comm_type")]
    pub mode: MessageMode,
    /// Length of each message vector.
    pub msg_len: usize,
    /// Messages per round.
    pub num_msgs: usize,
    /// Sampling temperature for learners; the environment only carries it.
    pub temperature: f64,
    pub cost_per_message: f64,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        Self { mode: MessageMode::OneHot, msg_len: 4, num_msgs: 3, temperature: 1.0, cost_per_message: 0.0 }
    }
}

impl ChannelConfig {
    /// Communication only flows from speaker to listener.
    pub const DIRECTION: &'static str = "unidirectional";

    pub fn validate(&self) -> Result<(), ChannelError> {
        if self.msg_len == 0 || self.num_msgs == 0 {
            return Err(ChannelError::Config("msg_len and num_msgs must be at least 1".into()));
        }
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return Err(ChannelError::Config("temperature must be positive".into()));
        }
        if !(self.cost_per_message >= 0.0 && self.cost_per_message.is_finite()) {
            return Err(ChannelError::Config("cost_per_message must be non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MessageSet {
    pub messages: Vec<Vec<f64>>,
}

impl MessageSet {
    pub fn new(messages: Vec<Vec<f64>>) -> Self {
        Self { messages }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineKind {
    RandomSpeaker,
    FixedSpeaker,
    PerfectSpeaker,
    OracleListener,
}

/// First offending location of an invalid message set.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("message {message}{}: {reason}", entry.map(|e| format!(" entry {e}")).unwrap_or_default())]
pub struct Violation {
    pub message: usize,
    pub entry: Option<usize>,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ChannelError {
    #[error("invalid channel config: {0}")]
    Config(String),
    #[error("capacity unbounded for continuous messages")]
    Unbounded,
    #[error("capacity overflows 128 bits")]
    Overflow,
    #[error("{0:?} is not a speaker")]
    NotASpeaker(BaselineKind),
    #[error("channel too small for the concept: {0}")]
    InsufficientCapacity(String),
    #[error("target position {0} outside the grid")]
    OutOfBounds(Pos),
    #[error(transparent)]
    Invalid(#[from] Violation),
}

pub fn validate_messages(config: &ChannelConfig, msgs: &MessageSet) -> Result<(), Violation> {
    if msgs.messages.len() != config.num_msgs {
        return Err(Violation {
            message: msgs.messages.len().min(config.num_msgs),
            entry: None,
            reason: format!("expected {} messages, got {}", config.num_msgs, msgs.messages.len()),
        });
    }
    for (i, m) in msgs.messages.iter().enumerate() {
        if m.len() != config.msg_len {
            return Err(Violation {
                message: i,
                entry: None,
                reason: format!("expected length {}, got {}", config.msg_len, m.len()),
            });
        }
        if let Some(j) = m.iter().position(|v| !v.is_finite()) {
            return Err(Violation { message: i, entry: Some(j), reason: "non-finite value".into() });
        }
        match config.mode {
            MessageMode::Continuous => {}
            MessageMode::Binary => {
                if let Some(j) = m.iter().position(|&v| v != 0.0 && v != 1.0) {
                    return Err(Violation { message: i, entry: Some(j), reason: format!("{} is not binary", m[j]) });
                }
            }
            MessageMode::OneHot => {
                if let Some(j) = m.iter().position(|&v| v != 0.0 && v != 1.0) {
                    return Err(Violation { message: i, entry: Some(j), reason: format!("{} is not 0 or 1", m[j]) });
                }
                let ones: Vec<usize> = (0..m.len()).filter(|&j| m[j] == 1.0).collect();
                match ones.as_slice() {
                    [_] => {}
                    [] => return Err(Violation { message: i, entry: None, reason: "no set entry".into() }),
                    [_, second, ..] => {
                        return Err(Violation {
                            message: i,
                            entry: Some(*second),
                            reason: "more than one set entry".into(),
                        })
                    }
                }
            }
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Capacity {
    /// Distinct symbols a single message can take.
    pub per_message: u128,
    /// Distinct message rounds, `per_message ^ num_msgs`.
    pub per_round: u128,
}

pub fn channel_capacity(config: &ChannelConfig) -> Result<Capacity, ChannelError> {
    let per_message = match config.mode {
        MessageMode::Continuous => return Err(ChannelError::Unbounded),
        MessageMode::Binary => {
            let bits = u32::try_from(config.msg_len).map_err(|_| ChannelError::Overflow)?;
            2u128.checked_pow(bits).ok_or(ChannelError::Overflow)?
        }
        MessageMode::OneHot => config.msg_len as u128,
    };
    let rounds = u32::try_from(config.num_msgs).map_err(|_| ChannelError::Overflow)?;
    let per_round = per_message.checked_pow(rounds).ok_or(ChannelError::Overflow)?;
    Ok(Capacity { per_message, per_round })
}

/// Messages produced by one of the scripted speakers.
pub fn baseline_speak<R: Rng + ?Sized>(
    kind: BaselineKind,
    config: &ChannelConfig,
    concept: &ConceptVector,
    rng: &mut R,
) -> Result<MessageSet, ChannelError> {
    config.validate()?;
    let (n, d) = (config.num_msgs, config.msg_len);
    let messages = match kind {
        BaselineKind::OracleListener => return Err(ChannelError::NotASpeaker(kind)),
        BaselineKind::RandomSpeaker => (0..n)
            .map(|_| match config.mode {
                MessageMode::Binary => (0..d).map(|_| f64::from(u8::from(rng.gen_bool(0.5)))).collect(),
                MessageMode::OneHot => one_hot(d, rng.gen_range(0..d)),
                MessageMode::Continuous => (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect(),
            })
            .collect(),
        BaselineKind::FixedSpeaker => (0..n)
            .map(|_| match config.mode {
                MessageMode::OneHot => one_hot(d, 0),
                _ => vec![1.0; d],
            })
            .collect(),
        BaselineKind::PerfectSpeaker => perfect_messages(config, concept)?,
    };
    Ok(MessageSet { messages })
}

fn one_hot(len: usize, index: usize) -> Vec<f64> {
    let mut v = vec![0.0; len];
    v[index] = 1.0;
    v
}

fn perfect_messages(config: &ChannelConfig, concept: &ConceptVector) -> Result<Vec<Vec<f64>>, ChannelError> {
    let (n, d) = (config.num_msgs, config.msg_len);
    match config.mode {
        MessageMode::Binary | MessageMode::Continuous => {
            if n * d < CONCEPT_BITS {
                return Err(ChannelError::InsufficientCapacity(format!(
                    "{n}x{d} entries cannot hold {CONCEPT_BITS} concept bits"
                )));
            }
            let mut flat: Vec<f64> = concept.bits().iter().map(|&b| f64::from(b)).collect();
            flat.resize(n * d, 0.0);
            Ok(flat.chunks(d).map(<[f64]>::to_vec).collect())
        }
        MessageMode::OneHot => {
            if n < CONCEPT_GROUPS.len() || d < 4 {
                return Err(ChannelError::InsufficientCapacity(format!(
                    "one-hot packing needs at least 5 messages of length 4, got {n}x{d}"
                )));
            }
            let groups = concept.group_indices();
            let mut out = Vec::with_capacity(n);
            for (g, idx) in groups.iter().enumerate() {
                let idx = idx.ok_or_else(|| {
                    ChannelError::InsufficientCapacity(format!("concept group {g} is not one-hot"))
                })?;
                out.push(one_hot(d, idx));
            }
            out.resize_with(n, || one_hot(d, 0));
            Ok(out)
        }
    }
}

/// Inverse of the perfect speaker: recovers the concept from its messages.
pub fn decode_perfect(config: &ChannelConfig, msgs: &MessageSet) -> Result<ConceptVector, ChannelError> {
    validate_messages(config, msgs)?;
    let mut bits = [0u8; CONCEPT_BITS];
    match config.mode {
        MessageMode::Binary | MessageMode::Continuous => {
            let flat: Vec<f64> = msgs.messages.iter().flatten().copied().collect();
            if flat.len() < CONCEPT_BITS {
                return Err(ChannelError::InsufficientCapacity("too few entries".into()));
            }
            for (b, v) in bits.iter_mut().zip(flat) {
                *b = u8::from(v >= 0.5);
            }
        }
        MessageMode::OneHot => {
            for (g, &(start, width)) in CONCEPT_GROUPS.iter().enumerate() {
                let m = msgs
                    .messages
                    .get(g)
                    .ok_or_else(|| ChannelError::InsufficientCapacity("too few messages".into()))?;
                let idx = m.iter().position(|&v| v == 1.0).expect("validated one-hot");
                if idx >= width {
                    return Err(ChannelError::InsufficientCapacity(format!("group {g} index {idx} out of range")));
                }
                bits[start + idx] = 1;
            }
        }
    }
    Ok(ConceptVector(bits))
}

/// Listener view for the oracle-listener baseline: every cell gains an 18th
/// bit, set only at the target cell.
pub fn oracle_listener_view(grid: &GridEncoding, target: Pos) -> Result<Vec<Vec<[u8; CELL_BITS + 1]>>, ChannelError> {
    if target.row >= grid.height || target.col >= grid.width {
        return Err(ChannelError::OutOfBounds(target));
    }
    Ok(grid
        .cells
        .iter()
        .enumerate()
        .map(|(r, row)| {
            row.iter()
                .enumerate()
                .map(|(c, cell)| {
                    let mut out = [0u8; CELL_BITS + 1];
                    out[..CELL_BITS].copy_from_slice(cell);
                    out[CELL_BITS] = u8::from(r == target.row && c == target.col);
                    out
                })
                .collect()
        })
        .collect())
}

/// Reward after subtracting the per-message signalling penalty.
pub fn apply_signalling_cost(reward: f64, config: &ChannelConfig, rounds_of_communication: u32) -> f64 {
    reward - config.cost_per_message * config.num_msgs as f64 * f64::from(rounds_of_communication)
}

/// Alphabet index of a single valid discrete message (binary: bits read
/// most-significant first; one-hot: position of the set entry).
pub fn message_symbol(mode: MessageMode, message: &[f64]) -> Option<u64> {
    match mode {
        MessageMode::Binary => {
            if message.len() > 64 {
                return None;
            }
            Some(message.iter().fold(0u64, |acc, &v| (acc << 1) | u64::from(v >= 0.5)))
        }
        MessageMode::OneHot => message.iter().position(|&v| v == 1.0).map(|i| i as u64),
        MessageMode::Continuous => None,
    }
}

/// Uniform binning of a continuous message over `[lo, hi]`, mixed-radix
/// packed into one symbol.
pub fn bin_continuous(message: &[f64], bins: u32, lo: f64, hi: f64) -> Option<u64> {
    let mut symbol: u64 = 0;
    for &v in message {
        let t = ((v - lo) / (hi - lo)).clamp(0.0, 1.0);
        let b = ((t * f64::from(bins)) as u64).min(u64::from(bins) - 1);
        symbol = symbol.checked_mul(u64::from(bins))?.checked_add(b)?;
    }
    Some(symbol)
}

/// Default number of bins per dimension when discretizing continuous messages.
pub const DEFAULT_BINS: u32 = 8;

/// Discretizes every message of a round into alphabet symbols.
pub fn message_symbols(mode: MessageMode, msgs: &MessageSet) -> Option<Vec<u64>> {
    msgs.messages
        .iter()
        .map(|m| match mode {
            MessageMode::Continuous => bin_continuous(m, DEFAULT_BINS, -1.0, 1.0),
            _ => message_symbol(mode, m),
        })
        .collect()
}
