//! Breadth-first search over the deterministic transition graph.

use std::collections::{HashSet, VecDeque};

use thiserror::Error;

use crate::world::{apply_action, task_success, ActionId, GridState, TaskSpec, Verb, WorldError};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SolveError {
    #[error("task cannot be completed within {0} steps")]
    Unsolvable(u32),
    #[error(transparent)]
    World(#[from] WorldError),
}

/// Canonical search node: drops everything the future of `task` cannot depend
/// on, so physically identical states merge.
fn key(state: &GridState, task: &TaskSpec) -> GridState {
    let mut k = state.clone();
    k.step_count = 0;
    match task.verb {
        Verb::Push | Verb::Pull => k.displacements.retain(|id, _| *id == task.target_id),
        _ => k.displacements.clear(),
    }
    k.picked_up.retain(|id| *id == task.target_id);
    k
}

/// A push/pull target whose displacement log already breaks the straight-line
/// requirement can never succeed again.
fn dead(state: &GridState, task: &TaskSpec) -> bool {
    let action = match task.verb {
        Verb::Push => ActionId::Push,
        Verb::Pull => ActionId::Pull,
        _ => return false,
    };
    let moves = state.displacements.get(&task.target_id).map(Vec::as_slice).unwrap_or(&[]);
    moves.len() > task.count as usize || moves.iter().any(|d| d.action != action || d.direction != moves[0].direction)
}

/// Shortest action sequence from `state` that completes `task` without
/// exceeding `max_steps` total steps. Ties between equally short sequences
/// resolve to the one that is lexicographically first in action order.
pub fn oracle_solve(state: &GridState, task: &TaskSpec, max_steps: u32) -> Result<Vec<ActionId>, SolveError> {
    if task_success(state, task)? {
        return Ok(Vec::new());
    }
    let budget = max_steps.saturating_sub(state.step_count);
    // node index -> (parent index, action taken)
    let mut parents: Vec<Option<(usize, ActionId)>> = vec![None];
    let mut seen: HashSet<GridState> = HashSet::new();
    let root = key(state, task);
    seen.insert(root.clone());
    let mut queue = VecDeque::from([(root, 0usize, 0u32)]);

    while let Some((node, idx, depth)) = queue.pop_front() {
        if depth >= budget {
            continue;
        }
        for action in ActionId::ALL {
            let (next, outcome) = apply_action(&node, task, action, u32::MAX)?;
            let next = key(&next, task);
            if seen.contains(&next) || (outcome.reward <= 0.0 && dead(&next, task)) {
                continue;
            }
            parents.push(Some((idx, action)));
            let child = parents.len() - 1;
            if outcome.reward > 0.0 {
                return Ok(backtrack(&parents, child));
            }
            seen.insert(next.clone());
            queue.push_back((next, child, depth + 1));
        }
    }
    Err(SolveError::Unsolvable(budget))
}

fn backtrack(parents: &[Option<(usize, ActionId)>], mut idx: usize) -> Vec<ActionId> {
    let mut path = Vec::new();
    while let Some((parent, action)) = parents[idx] {
        path.push(action);
        idx = parent;
    }
    path.reverse();
    path
}

/// Whether some action sequence of at most `max_steps - step_count` actions
/// completes the task.
pub fn is_solvable(state: &GridState, task: &TaskSpec, max_steps: u32) -> bool {
    oracle_solve(state, task, max_steps).is_ok()
}
