//! Raster frames of the grid and the lights-out dimming effect.

use std::io::{self, Write};

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::world::{CellContent, Color, GridState, Heading, ObjectSpec, Pos, Shape, MAX_SIZE};

pub const MIN_CELL_PX: usize = 8;
pub const LIGHTS_OUT_RANGE: (f64, f64) = (0.05, 0.35);

const BACKGROUND: [f64; 3] = [1.0, 1.0, 1.0];
const GRID_LINE: [f64; 3] = [0.8, 0.8, 0.8];
const OBSTACLE: [f64; 3] = [0.2, 0.2, 0.2];
const AGENT: [f64; 3] = [0.45, 0.1, 0.6];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Frame {
    pub width: usize,
    pub height: usize,
    /// Row-major RGB, channels in `[0, 1]`.
    pub pixels: Vec<[f64; 3]>,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RenderError {
    #[error("cell size {0} below minimum of {MIN_CELL_PX} pixels")]
    CellTooSmall(usize),
    #[error("illumination factor {0} outside [0, 1]")]
    BadFactor(f64),
}

impl Frame {
    fn blank(width: usize, height: usize) -> Self {
        Self { width, height, pixels: vec![BACKGROUND; width * height] }
    }

    pub fn pixel(&self, x: usize, y: usize) -> [f64; 3] {
        self.pixels[y * self.width + x]
    }

    fn set(&mut self, x: usize, y: usize, rgb: [f64; 3]) {
        self.pixels[y * self.width + x] = rgb;
    }

    /// 8-bit RGB bytes, row-major.
    pub fn to_rgb8(&self) -> Vec<u8> {
        self.pixels
            .iter()
            .flat_map(|px| px.map(|c| (c.clamp(0.0, 1.0) * 255.0).round() as u8))
            .collect()
    }

    /// Binary PPM: header `P6 <w> <h> 255` and a newline, then RGB bytes.
    pub fn write_ppm<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "P6 {} {} 255", self.width, self.height)?;
        out.write_all(&self.to_rgb8())?;
        out.flush()
    }
}

fn rgb(color: Color) -> [f64; 3] {
    match color {
        Color::Red => [0.85, 0.1, 0.1],
        Color::Blue => [0.1, 0.25, 0.85],
        Color::Yellow => [0.95, 0.8, 0.1],
        Color::Green => [0.1, 0.65, 0.2],
    }
}

/// Whether the point `(u, v)`, relative to the cell centre and normalized so
/// that the object's half-extent is 1, lies inside the shape silhouette.
fn inside(shape: Shape, u: f64, v: f64) -> bool {
    match shape {
        Shape::Square => u.abs() <= 1.0 && v.abs() <= 1.0,
        Shape::Circle => u * u + v * v <= 1.0,
        Shape::Diamond => u.abs() + v.abs() <= 1.0,
        // upright body with elliptical caps
        Shape::Cylinder => {
            let body = u.abs() <= 0.6 && v.abs() <= 0.75;
            let cap = |cy: f64| (u / 0.6).powi(2) + ((v - cy) / 0.25).powi(2) <= 1.0;
            body || cap(0.75) || cap(-0.75)
        }
    }
}

fn in_agent(heading: Heading, u: f64, v: f64) -> bool {
    // triangle pointing east, rotated into place
    let (x, y) = match heading {
        Heading::E => (u, v),
        Heading::W => (-u, -v),
        Heading::S => (v, -u),
        Heading::N => (-v, u),
    };
    (-0.5..=0.6).contains(&x) && y.abs() <= (0.6 - x) * 0.5
}

fn draw_cell(frame: &mut Frame, pos: Pos, px: usize, content: &CellContent, agent: Option<Heading>) {
    let (x0, y0) = (pos.col * px, pos.row * px);
    let half = px as f64 / 2.0;
    for dy in 0..px {
        for dx in 0..px {
            let (x, y) = (x0 + dx, y0 + dy);
            let u = (dx as f64 + 0.5 - half) / half;
            let v = (dy as f64 + 0.5 - half) / half;
            let mut color = if dx == 0 || dy == 0 || dx == px - 1 || dy == px - 1 { GRID_LINE } else { BACKGROUND };
            match content {
                CellContent::Obstacle | CellContent::Wall => color = OBSTACLE,
                CellContent::Object(ObjectSpec { shape, color: c, size, .. }) => {
                    let scale = 0.9 * f64::from(*size) / f64::from(MAX_SIZE);
                    if inside(*shape, u / scale, v / scale) {
                        color = rgb(*c);
                    }
                }
                CellContent::Empty => {}
            }
            if let Some(h) = agent {
                if in_agent(h, u, v) {
                    color = AGENT;
                }
            }
            frame.set(x, y, color);
        }
    }
}

/// Deterministic raster of the grid, `cell_px` pixels per cell.
pub fn render_grid(state: &GridState, cell_px: usize) -> Result<Frame, RenderError> {
    if cell_px < MIN_CELL_PX {
        return Err(RenderError::CellTooSmall(cell_px));
    }
    let mut frame = Frame::blank(state.width * cell_px, state.height * cell_px);
    for (pos, content) in state.positions().zip(state.cells.iter()) {
        let agent = (state.agent.position == pos).then_some(state.agent.heading);
        draw_cell(&mut frame, pos, cell_px, content, agent);
    }
    Ok(frame)
}

/// Per-episode illumination factor: 1 when lights-out is inactive, else a
/// uniform draw from [`LIGHTS_OUT_RANGE`].
pub fn sample_illumination<R: Rng + ?Sized>(lights_out_active: bool, rng: &mut R) -> f64 {
    if lights_out_active {
        rng.gen_range(LIGHTS_OUT_RANGE.0..=LIGHTS_OUT_RANGE.1)
    } else {
        1.0
    }
}

pub fn apply_lights_out(frame: &Frame, factor: f64) -> Result<Frame, RenderError> {
    if !(0.0..=1.0).contains(&factor) {
        return Err(RenderError::BadFactor(factor));
    }
    Ok(Frame {
        width: frame.width,
        height: frame.height,
        pixels: frame.pixels.iter().map(|px| px.map(|c| (c * factor).clamp(0.0, 1.0))).collect(),
    })
}
