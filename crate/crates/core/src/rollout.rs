//! Scripted rollouts: a baseline speaker paired with a random or oracle listener.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::channel::BaselineKind;
use crate::config::FileConfig;
use crate::session::{ErrorCode, ProtocolError, Session};
use crate::solver::oracle_solve;
use crate::trace::TraceRecord;
use crate::world::{ActionId, Verb};

const LISTENER_STREAM: u64 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ListenerPolicy {
    Random,
    /// Replays a shortest solution computed from the full state.
    Oracle,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RolloutSummary {
    pub mean_reward: f64,
    pub mean_length: f64,
    pub records: Vec<TraceRecord>,
}

/// Actions a random listener chooses among for the configured verbs.
pub fn listener_actions(verbs: &[Verb]) -> Vec<ActionId> {
    let mut actions = vec![ActionId::Left, ActionId::Right, ActionId::Forward, ActionId::Backward];
    if verbs.iter().any(|v| matches!(v, Verb::Push | Verb::Pull | Verb::Pickup)) {
        actions.extend([ActionId::Push, ActionId::Pull]);
    }
    if verbs.contains(&Verb::Pickup) {
        actions.push(ActionId::Pickup);
    }
    actions
}

pub fn run_rollout(
    config: &FileConfig,
    speaker: BaselineKind,
    listener: ListenerPolicy,
    episodes: usize,
) -> Result<RolloutSummary, ProtocolError> {
    let mut session = Session::new(config.clone())?;
    session.baseline(Some(speaker))?;
    let actions = listener_actions(&config.environment.task_verbs());
    let mut rng = ChaCha8Rng::seed_from_u64(config.environment.seed);
    rng.set_stream(LISTENER_STREAM);
    let max_steps = config.environment.episode_len;
    let mut total_steps = 0usize;
    for _ in 0..episodes {
        session.reset(None, None)?;
        let mut plan = match listener {
            ListenerPolicy::Random => Vec::new(),
            ListenerPolicy::Oracle => {
                let (episode, state) = session.current_episode().expect("episode after reset");
                let mut p = oracle_solve(state, &episode.task, max_steps)
                    .map_err(|e| ProtocolError { code: ErrorCode::BadState, detail: e.to_string() })?;
                p.reverse();
                p
            }
        };
        loop {
            let action = match listener {
                ListenerPolicy::Random => *actions.choose(&mut rng).expect("non-empty action set"),
                // an exhausted plan only happens if the episode was already solved
                ListenerPolicy::Oracle => plan.pop().unwrap_or(ActionId::Left),
            };
            total_steps += 1;
            if session.step(action)?.done {
                break;
            }
        }
    }
    session.close()?;
    let records = session.trace().to_vec();
    let n = records.len().max(1) as f64;
    Ok(RolloutSummary {
        mean_reward: records.iter().map(|r| r.reward).sum::<f64>() / n,
        mean_length: total_steps as f64 / n,
        records,
    })
}
