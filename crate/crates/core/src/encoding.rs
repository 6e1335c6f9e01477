//! Listener-side observation: a 17-bit vector per grid cell.
//!
//! Layout: `[1, 2, 3, 4, square, cylinder, circle, diamond, r, b, y, g, agent, E, S, W, N]`.
//! Obstacles and walls set every bit. Object weight is deliberately absent.

use serde::{Deserialize, Serialize};

use crate::world::{CellContent, Color, GridState, Pos, Shape, WorldError, MAX_SIZE, MIN_SIZE};

pub const CELL_BITS: usize = 17;
pub const SIZE_OFFSET: usize = 0;
pub const SHAPE_OFFSET: usize = 4;
pub const COLOR_OFFSET: usize = 8;
pub const AGENT_BIT: usize = 12;
pub const HEADING_OFFSET: usize = 13;

pub type CellVector = [u8; CELL_BITS];

/// `grid[row][col]` cell vectors.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridEncoding {
    pub width: usize,
    pub height: usize,
    pub cells: Vec<Vec<CellVector>>,
}

impl GridEncoding {
    pub fn get(&self, pos: Pos) -> Option<&CellVector> {
        self.cells.get(pos.row).and_then(|r| r.get(pos.col))
    }
}

pub fn cell_encoding(state: &GridState, col: usize, row: usize) -> Result<CellVector, WorldError> {
    let pos = Pos::new(col, row);
    let mut bits = [0u8; CELL_BITS];
    match state.cell(pos)? {
        CellContent::Obstacle | CellContent::Wall => return Ok([1; CELL_BITS]),
        CellContent::Object(o) => {
            bits[SIZE_OFFSET + (o.size - MIN_SIZE) as usize] = 1;
            bits[SHAPE_OFFSET + o.shape.index()] = 1;
            bits[COLOR_OFFSET + o.color.index()] = 1;
        }
        CellContent::Empty => {}
    }
    if state.agent.position == pos {
        bits[AGENT_BIT] = 1;
        bits[HEADING_OFFSET + state.agent.heading.index()] = 1;
    }
    Ok(bits)
}

pub fn grid_encoding(state: &GridState) -> GridEncoding {
    let cells = (0..state.height)
        .map(|row| {
            (0..state.width)
                .map(|col| cell_encoding(state, col, row).expect("coordinates in bounds"))
                .collect()
        })
        .collect();
    GridEncoding { width: state.width, height: state.height, cells }
}

/// Recovers `(size, shape, color)` from an object cell vector. `None` for
/// empty cells, blocking cells or malformed vectors.
pub fn decode_object(bits: &CellVector) -> Option<(u8, Shape, Color)> {
    if bits.iter().all(|&b| b == 1) {
        return None;
    }
    let one_hot = |offset: usize, n: usize| -> Option<usize> {
        let set: Vec<usize> = (0..n).filter(|i| bits[offset + i] == 1).collect();
        (set.len() == 1).then(|| set[0])
    };
    let size = one_hot(SIZE_OFFSET, (MAX_SIZE - MIN_SIZE + 1) as usize)?;
    let shape = one_hot(SHAPE_OFFSET, 4)?;
    let color = one_hot(COLOR_OFFSET, 4)?;
    Some((size as u8 + MIN_SIZE, Shape::ALL[shape], Color::ALL[color]))
}
