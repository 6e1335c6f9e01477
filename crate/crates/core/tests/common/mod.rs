#![allow(dead_code)]

use std::collections::BTreeMap;

use gridcomm::world::{
    ActionId, CellContent, GridState, Heading, HeavyProgress, ObjectId, ObjectLocation, ObjectSpec, StepOutcome, Weight,
};

/// Every object in the world, by id, whether in a cell or carried.
pub fn inventory(s: &GridState) -> BTreeMap<ObjectId, ObjectSpec> {
    let mut out = BTreeMap::new();
    for c in &s.cells {
        if let CellContent::Object(o) = c {
            assert!(out.insert(o.id, *o).is_none(), "object {} in two cells", o.id);
        }
    }
    if let Some(o) = s.agent.carried {
        assert!(out.insert(o.id, o).is_none(), "carried object {} also in a cell", o.id);
    }
    out
}

/// Checks one transition against the world's invariants; returns the first
/// violation.
pub fn check_step(prev: &GridState, action: ActionId, next: &GridState, out: &StepOutcome) -> Result<(), String> {
    next.validate().map_err(|e| format!("invalid state: {e}"))?;
    if inventory(prev) != inventory(next) {
        return Err("object set changed".into());
    }
    if next.step_count != prev.step_count + 1 {
        return Err("step count did not advance by one".into());
    }
    if next.cell(next.agent.position).map_err(|e| e.to_string())?.is_blocking() {
        return Err("agent inside an obstacle".into());
    }
    let walls = |s: &GridState| s.cells.iter().map(CellContent::is_blocking).collect::<Vec<_>>();
    if walls(prev) != walls(next) {
        return Err("obstacles moved".into());
    }

    let mut frozen = prev.clone();
    frozen.step_count = next.step_count;
    frozen.push_progress = None;
    if out.info.contains_key("blocked") {
        if *next != frozen {
            return Err(format!("blocked {action} changed the state"));
        }
        return Ok(());
    }
    if let Some(id) = out.info.get("straining") {
        let id: ObjectId = id.parse().unwrap();
        frozen.push_progress = Some(HeavyProgress { object: id, action });
        if *next != frozen {
            return Err("straining changed more than the pending progress".into());
        }
        if prev.object(id).unwrap().weight != Weight::Heavy {
            return Err("light object strained".into());
        }
        return Ok(());
    }
    if next.push_progress.is_some() {
        return Err("progress survived a non-straining step".into());
    }

    let (p, h) = (prev.agent.position, prev.agent.heading);
    match action {
        ActionId::Left | ActionId::Right => {
            let want = if action == ActionId::Left { h.left() } else { h.right() };
            frozen.agent.heading = want;
            if *next != frozen {
                return Err("rotation changed more than the heading".into());
            }
        }
        ActionId::Forward | ActionId::Backward => {
            let dir = if action == ActionId::Forward { h } else { h.reverse() };
            frozen.agent.position = p.offset(dir, prev.width, prev.height).ok_or("moved off grid")?;
            if *next != frozen {
                return Err("move was not a single step".into());
            }
        }
        ActionId::Push | ActionId::Pull => {
            let dir = if action == ActionId::Push { h } else { h.reverse() };
            let id: ObjectId = out.info.get("moved").ok_or("push neither blocked nor moved")?.parse().unwrap();
            let obj = prev.object(id).unwrap();
            if prev.locate(id) != Some(ObjectLocation::Cell(p)) {
                return Err("moved an object the agent was not on".into());
            }
            if obj.weight == Weight::Heavy && prev.push_progress != Some(HeavyProgress { object: id, action }) {
                return Err("heavy object moved on a single action".into());
            }
            let dest = p.offset(dir, prev.width, prev.height).ok_or("object pushed off grid")?;
            if next.locate(id) != Some(ObjectLocation::Cell(dest)) || next.agent.position != dest {
                return Err("object and agent did not move one cell together".into());
            }
            let moves = &next.displacements[&id];
            if moves.len() != prev.displacements.get(&id).map_or(0, Vec::len) + 1 {
                return Err("displacement log not extended by one".into());
            }
        }
        ActionId::Pickup => {
            if next.agent.carried.is_none() || next.cell(p).unwrap() != &CellContent::Empty {
                return Err("pickup left the object in place".into());
            }
        }
        ActionId::Drop => {
            if prev.agent.carried.map(CellContent::Object).as_ref() != Some(next.cell(p).unwrap()) {
                return Err("drop did not place the carried object".into());
            }
        }
    }
    Ok(())
}

pub fn heading_after(h: Heading, actions: &[ActionId]) -> Heading {
    actions.iter().fold(h, |h, a| match a {
        ActionId::Left => h.left(),
        ActionId::Right => h.right(),
        _ => h,
    })
}
