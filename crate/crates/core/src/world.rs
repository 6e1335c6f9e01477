//! Grid world state machine: objects, agent pose, action semantics and the
//! sparse task-success predicate.
//!
//! Coordinates are `(col, row)` with `(0, 0)` in the top-left corner. East is
//! `+col`, south is `+row`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type ObjectId = u32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Shape {
    Square,
    Cylinder,
    Circle,
    Diamond,
}

impl Shape {
    /// Ordered as in the observation bit layout.
    pub const ALL: [Shape; 4] = [Shape::Square, Shape::Cylinder, Shape::Circle, Shape::Diamond];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Shape::Square => "square",
            Shape::Cylinder => "cylinder",
            Shape::Circle => "circle",
            Shape::Diamond => "diamond",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Color {
    Red,
    Blue,
    Yellow,
    Green,
}

impl Color {
    pub const ALL: [Color; 4] = [Color::Red, Color::Blue, Color::Yellow, Color::Green];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Color::Red => "red",
            Color::Blue => "blue",
            Color::Yellow => "yellow",
            Color::Green => "green",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Weight {
    Light,
    Heavy,
}

impl Weight {
    pub const ALL: [Weight; 2] = [Weight::Light, Weight::Heavy];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Weight::Light => "light",
            Weight::Heavy => "heavy",
        }
    }
}

pub const MIN_SIZE: u8 = 1;
pub const MAX_SIZE: u8 = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ObjectSpec {
    pub id: ObjectId,
    pub shape: Shape,
    pub color: Color,
    pub size: u8,
    pub weight: Weight,
}

impl ObjectSpec {
    pub fn new(id: ObjectId, shape: Shape, color: Color, size: u8, weight: Weight) -> Result<Self, WorldError> {
        if !(MIN_SIZE..=MAX_SIZE).contains(&size) {
            return Err(WorldError::InvalidSize(size));
        }
        Ok(Self { id, shape, color, size, weight })
    }

    /// The attributes visible to the listener.
    pub fn visible(&self) -> (Shape, Color, u8) {
        (self.shape, self.color, self.size)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CellContent {
    Empty,
    Object(ObjectSpec),
    Obstacle,
    Wall,
}

impl CellContent {
    pub fn is_blocking(&self) -> bool {
        matches!(self, CellContent::Obstacle | CellContent::Wall)
    }

    pub fn object(&self) -> Option<&ObjectSpec> {
        match self {
            CellContent::Object(o) => Some(o),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Heading {
    E,
    S,
    W,
    N,
}

impl Heading {
    pub const ALL: [Heading; 4] = [Heading::E, Heading::S, Heading::W, Heading::N];

    pub fn index(self) -> usize {
        self as usize
    }

    /// 90° clockwise.
    pub fn right(self) -> Heading {
        Heading::ALL[(self.index() + 1) % 4]
    }

    /// 90° counter-clockwise.
    pub fn left(self) -> Heading {
        Heading::ALL[(self.index() + 3) % 4]
    }

    pub fn reverse(self) -> Heading {
        Heading::ALL[(self.index() + 2) % 4]
    }

    pub fn delta(self) -> (i64, i64) {
        match self {
            Heading::E => (1, 0),
            Heading::S => (0, 1),
            Heading::W => (-1, 0),
            Heading::N => (0, -1),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Pos {
    pub col: usize,
    pub row: usize,
}

impl Pos {
    pub fn new(col: usize, row: usize) -> Self {
        Self { col, row }
    }

    /// Neighbour one cell along `heading`, if it lies inside a `width × height` grid.
    pub fn offset(self, heading: Heading, width: usize, height: usize) -> Option<Pos> {
        let (dc, dr) = heading.delta();
        let col = self.col as i64 + dc;
        let row = self.row as i64 + dr;
        if col < 0 || row < 0 || col >= width as i64 || row >= height as i64 {
            None
        } else {
            Some(Pos::new(col as usize, row as usize))
        }
    }
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.col, self.row)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AgentPose {
    pub position: Pos,
    pub heading: Heading,
    pub carried: Option<ObjectSpec>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verb {
    Walk,
    Push,
    Pull,
    Pickup,
    Drop,
}

impl Verb {
    pub const ALL: [Verb; 5] = [Verb::Walk, Verb::Push, Verb::Pull, Verb::Pickup, Verb::Drop];

    pub fn name(self) -> &'static str {
        match self {
            Verb::Walk => "walk",
            Verb::Push => "push",
            Verb::Pull => "pull",
            Verb::Pickup => "pickup",
            Verb::Drop => "drop",
        }
    }
}

impl FromStr for Verb {
    type Err = WorldError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Verb::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| WorldError::UnknownVerb(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TaskSpec {
    pub verb: Verb,
    /// Numeral-adverb multiplier ("twice" = 2).
    pub count: u32,
    pub target_id: ObjectId,
}

impl TaskSpec {
    pub fn new(verb: Verb, count: u32, target_id: ObjectId) -> Self {
        Self { verb, count, target_id }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionId {
    Left,
    Right,
    Forward,
    Backward,
    Push,
    Pull,
    Pickup,
    Drop,
}

impl ActionId {
    pub const ALL: [ActionId; 8] = [
        ActionId::Left,
        ActionId::Right,
        ActionId::Forward,
        ActionId::Backward,
        ActionId::Push,
        ActionId::Pull,
        ActionId::Pickup,
        ActionId::Drop,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            ActionId::Left => "left",
            ActionId::Right => "right",
            ActionId::Forward => "forward",
            ActionId::Backward => "backward",
            ActionId::Push => "push",
            ActionId::Pull => "pull",
            ActionId::Pickup => "pickup",
            ActionId::Drop => "drop",
        }
    }
}

impl TryFrom<usize> for ActionId {
    type Error = WorldError;

    fn try_from(value: usize) -> Result<Self, Self::Error> {
        ActionId::ALL
            .get(value)
            .copied()
            .ok_or(WorldError::UnknownAction(value.to_string()))
    }
}

impl FromStr for ActionId {
    type Err = WorldError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ActionId::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| WorldError::UnknownAction(s.to_string()))
    }
}

impl fmt::Display for ActionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One successful push/pull displacement of an object.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Displacement {
    pub action: ActionId,
    pub direction: Heading,
}

/// A heavy object that has received the first of two consecutive push/pull actions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct HeavyProgress {
    pub object: ObjectId,
    pub action: ActionId,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepOutcome {
    pub reward: f64,
    pub done: bool,
    pub info: BTreeMap<String, String>,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum WorldError {
    #[error("object size {0} outside 1..=4")]
    InvalidSize(u8),
    #[error("unknown action id `{0}`")]
    UnknownAction(String),
    #[error("unknown verb `{0}`")]
    UnknownVerb(String),
    #[error("episode already finished: step {step_count} of {max_steps}")]
    EpisodeOver { step_count: u32, max_steps: u32 },
    #[error("task target {0} does not exist in the world")]
    MissingTarget(ObjectId),
    #[error("task count must be positive")]
    ZeroCount,
    #[error("coordinates {0} outside the grid")]
    OutOfBounds(Pos),
    #[error("invalid state: {0}")]
    InvalidState(String),
}

/// Where an object currently lives.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ObjectLocation {
    Cell(Pos),
    Carried,
}

/// Full world state.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GridState {
    pub width: usize,
    pub height: usize,
    /// Row-major, `height × width`.
    pub cells: Vec<CellContent>,
    pub agent: AgentPose,
    /// Pending first half of a heavy-object push/pull.
    pub push_progress: Option<HeavyProgress>,
    pub step_count: u32,
    /// Episode-start position of every object, for displacement-based success.
    pub origins: BTreeMap<ObjectId, Pos>,
    /// Successful displacements applied to each object, in order.
    pub displacements: BTreeMap<ObjectId, Vec<Displacement>>,
    /// Objects that have been picked up at least once this episode.
    pub picked_up: BTreeSet<ObjectId>,
}

impl GridState {
    /// Empty grid with the agent at `position`.
    pub fn new(width: usize, height: usize, position: Pos, heading: Heading) -> Result<Self, WorldError> {
        if width == 0 || height == 0 {
            return Err(WorldError::InvalidState("grid dimensions must be positive".into()));
        }
        if position.col >= width || position.row >= height {
            return Err(WorldError::OutOfBounds(position));
        }
        Ok(Self {
            width,
            height,
            cells: vec![CellContent::Empty; width * height],
            agent: AgentPose { position, heading, carried: None },
            push_progress: None,
            step_count: 0,
            origins: BTreeMap::new(),
            displacements: BTreeMap::new(),
            picked_up: BTreeSet::new(),
        })
    }

    pub fn in_bounds(&self, pos: Pos) -> bool {
        pos.col < self.width && pos.row < self.height
    }

    fn index(&self, pos: Pos) -> usize {
        pos.row * self.width + pos.col
    }

    pub fn cell(&self, pos: Pos) -> Result<&CellContent, WorldError> {
        if !self.in_bounds(pos) {
            return Err(WorldError::OutOfBounds(pos));
        }
        Ok(&self.cells[self.index(pos)])
    }

    fn cell_mut(&mut self, pos: Pos) -> &mut CellContent {
        let idx = self.index(pos);
        &mut self.cells[idx]
    }

    /// Places an object at episode setup time; records its origin.
    pub fn place_object(&mut self, pos: Pos, object: ObjectSpec) -> Result<(), WorldError> {
        if self.locate(object.id).is_some() {
            return Err(WorldError::InvalidState(format!("duplicate object id {}", object.id)));
        }
        match self.cell(pos)? {
            CellContent::Empty => {}
            other => {
                return Err(WorldError::InvalidState(format!("cell {pos} is not empty: {other:?}")));
            }
        }
        *self.cell_mut(pos) = CellContent::Object(object);
        self.origins.insert(object.id, pos);
        Ok(())
    }

    pub fn place_obstacle(&mut self, pos: Pos) -> Result<(), WorldError> {
        match self.cell(pos)? {
            CellContent::Empty => {
                *self.cell_mut(pos) = CellContent::Obstacle;
                Ok(())
            }
            other => Err(WorldError::InvalidState(format!("cell {pos} is not empty: {other:?}"))),
        }
    }

    pub fn positions(&self) -> impl Iterator<Item = Pos> + '_ {
        (0..self.height).flat_map(move |row| (0..self.width).map(move |col| Pos::new(col, row)))
    }

    /// Objects currently on the grid, with their positions, in raster order.
    pub fn objects(&self) -> impl Iterator<Item = (Pos, &ObjectSpec)> + '_ {
        self.positions()
            .zip(self.cells.iter())
            .filter_map(|(p, c)| c.object().map(|o| (p, o)))
    }

    pub fn object_count(&self) -> usize {
        self.objects().count() + usize::from(self.agent.carried.is_some())
    }

    pub fn locate(&self, id: ObjectId) -> Option<ObjectLocation> {
        if self.agent.carried.is_some_and(|o| o.id == id) {
            return Some(ObjectLocation::Carried);
        }
        self.objects().find(|(_, o)| o.id == id).map(|(p, _)| ObjectLocation::Cell(p))
    }

    pub fn object(&self, id: ObjectId) -> Option<&ObjectSpec> {
        if let Some(o) = self.agent.carried.as_ref().filter(|o| o.id == id) {
            return Some(o);
        }
        self.objects().find(|(_, o)| o.id == id).map(|(_, o)| o)
    }

    /// Current push/pull counter for `id`: 1 after the first half of a heavy move, else 0.
    pub fn push_progress_of(&self, id: ObjectId) -> u8 {
        u8::from(self.push_progress.is_some_and(|p| p.object == id))
    }

    /// Checks every structural invariant of the state.
    pub fn validate(&self) -> Result<(), WorldError> {
        if self.cells.len() != self.width * self.height {
            return Err(WorldError::InvalidState("cell array has wrong length".into()));
        }
        if !self.in_bounds(self.agent.position) {
            return Err(WorldError::OutOfBounds(self.agent.position));
        }
        if self.cell(self.agent.position)?.is_blocking() {
            return Err(WorldError::InvalidState("agent stands on a blocking cell".into()));
        }
        let mut ids = BTreeSet::new();
        for (_, o) in self.objects() {
            if !ids.insert(o.id) {
                return Err(WorldError::InvalidState(format!("object {} appears twice", o.id)));
            }
        }
        if let Some(c) = self.agent.carried {
            if !ids.insert(c.id) {
                return Err(WorldError::InvalidState(format!("carried object {} also in a cell", c.id)));
            }
        }
        if ids.len() != self.origins.len() || !ids.iter().all(|id| self.origins.contains_key(id)) {
            return Err(WorldError::InvalidState("object set differs from episode start".into()));
        }
        Ok(())
    }
}

fn check_task(state: &GridState, task: &TaskSpec) -> Result<(), WorldError> {
    if task.count == 0 {
        return Err(WorldError::ZeroCount);
    }
    if state.locate(task.target_id).is_none() {
        return Err(WorldError::MissingTarget(task.target_id));
    }
    Ok(())
}

/// Whether `task` is accomplished in `state`.
pub fn task_success(state: &GridState, task: &TaskSpec) -> Result<bool, WorldError> {
    check_task(state, task)?;
    let location = state.locate(task.target_id).expect("checked above");
    Ok(match task.verb {
        Verb::Walk => location == ObjectLocation::Cell(state.agent.position),
        Verb::Push | Verb::Pull => {
            let action = if task.verb == Verb::Push { ActionId::Push } else { ActionId::Pull };
            let moves = state.displacements.get(&task.target_id).map(Vec::as_slice).unwrap_or(&[]);
            let straight = moves.len() == task.count as usize
                && moves.iter().all(|d| d.action == action && d.direction == moves[0].direction);
            match (straight, location) {
                (true, ObjectLocation::Cell(pos)) => {
                    let origin = state.origins[&task.target_id];
                    let (dc, dr) = moves[0].direction.delta();
                    let n = task.count as i64;
                    pos.col as i64 == origin.col as i64 + dc * n && pos.row as i64 == origin.row as i64 + dr * n
                }
                _ => false,
            }
        }
        Verb::Pickup => location == ObjectLocation::Carried,
        Verb::Drop => state.picked_up.contains(&task.target_id) && matches!(location, ObjectLocation::Cell(_)),
    })
}

/// Applies one listener action. Invalid or blocked actions are no-ops reported
/// through `info["blocked"]`.
pub fn apply_action(
    state: &GridState,
    task: &TaskSpec,
    action: ActionId,
    max_steps: u32,
) -> Result<(GridState, StepOutcome), WorldError> {
    if state.step_count >= max_steps {
        return Err(WorldError::EpisodeOver { step_count: state.step_count, max_steps });
    }
    check_task(state, task)?;

    let mut next = state.clone();
    let mut info = BTreeMap::new();
    let progress = next.push_progress.take();
    let agent_pos = next.agent.position;
    let heading = next.agent.heading;

    match action {
        ActionId::Left => next.agent.heading = heading.left(),
        ActionId::Right => next.agent.heading = heading.right(),
        ActionId::Forward | ActionId::Backward => {
            let dir = if action == ActionId::Forward { heading } else { heading.reverse() };
            match agent_pos.offset(dir, next.width, next.height) {
                None => {
                    info.insert("blocked".into(), "bounds".into());
                }
                Some(dest) if next.cell(dest)?.is_blocking() => {
                    info.insert("blocked".into(), "obstacle".into());
                }
                Some(dest) => next.agent.position = dest,
            }
        }
        ActionId::Push | ActionId::Pull => {
            let dir = if action == ActionId::Push { heading } else { heading.reverse() };
            shove(&mut next, agent_pos, dir, action, progress, &mut info)?;
        }
        ActionId::Pickup => match *next.cell(agent_pos)? {
            CellContent::Object(obj) if next.agent.carried.is_none() => {
                *next.cell_mut(agent_pos) = CellContent::Empty;
                next.agent.carried = Some(obj);
                next.picked_up.insert(obj.id);
                info.insert("picked_up".into(), obj.id.to_string());
            }
            CellContent::Object(_) => {
                info.insert("blocked".into(), "hands_full".into());
            }
            _ => {
                info.insert("blocked".into(), "nothing_here".into());
            }
        },
        ActionId::Drop => match (next.agent.carried, *next.cell(agent_pos)?) {
            (Some(obj), CellContent::Empty) => {
                *next.cell_mut(agent_pos) = CellContent::Object(obj);
                next.agent.carried = None;
                info.insert("dropped".into(), obj.id.to_string());
            }
            (Some(_), _) => {
                info.insert("blocked".into(), "occupied".into());
            }
            (None, _) => {
                info.insert("blocked".into(), "empty_hands".into());
            }
        },
    }

    next.step_count += 1;
    let success = task_success(&next, task)?;
    let done = success || next.step_count >= max_steps;
    if !success && done {
        info.insert("timeout".into(), next.step_count.to_string());
    }
    Ok((next, StepOutcome { reward: if success { 1.0 } else { 0.0 }, done, info }))
}

/// Push/pull: moves the co-located object one cell along `dir`; the agent
/// follows so that consecutive pushes keep acting on the same object.
fn shove(
    state: &mut GridState,
    agent_pos: Pos,
    dir: Heading,
    action: ActionId,
    progress: Option<HeavyProgress>,
    info: &mut BTreeMap<String, String>,
) -> Result<(), WorldError> {
    let obj = match *state.cell(agent_pos)? {
        CellContent::Object(o) => o,
        _ => {
            info.insert("blocked".into(), "nothing_here".into());
            return Ok(());
        }
    };
    let dest = match agent_pos.offset(dir, state.width, state.height) {
        Some(d) if *state.cell(d)? == CellContent::Empty => d,
        Some(_) => {
            info.insert("blocked".into(), "occupied".into());
            return Ok(());
        }
        None => {
            info.insert("blocked".into(), "bounds".into());
            return Ok(());
        }
    };
    if obj.weight == Weight::Heavy {
        let armed = progress.is_some_and(|p| p.object == obj.id && p.action == action);
        if !armed {
            state.push_progress = Some(HeavyProgress { object: obj.id, action });
            info.insert("straining".into(), obj.id.to_string());
            return Ok(());
        }
    }
    *state.cell_mut(agent_pos) = CellContent::Empty;
    *state.cell_mut(dest) = CellContent::Object(obj);
    state.agent.position = dest;
    state
        .displacements
        .entry(obj.id)
        .or_default()
        .push(Displacement { action, direction: dir });
    info.insert("moved".into(), obj.id.to_string());
    Ok(())
}
