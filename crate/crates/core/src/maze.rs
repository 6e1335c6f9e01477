//! Obstacle layouts: uniformly scattered blocks, or maze walls grown from an
//! even-coordinate lattice.
//!
//! Maze walls start at random lattice points and extend two cells at a time
//! towards random lattice neighbours. `maze_density` sets how many segments
//! are seeded (fraction of lattice points) and `maze_complexity` sets how many
//! growth attempts each segment gets (up to `10 · grid_size`).

use std::collections::BTreeSet;

use rand::seq::index;
use rand::Rng;

use crate::episode::{EpisodeConfig, EpisodeError};
use crate::world::{Heading, Pos};

/// Minimum number of cells a layout must leave free.
pub const MIN_FREE_CELLS: usize = 2;

pub fn generate_maze<R: Rng + ?Sized>(config: &EpisodeConfig, rng: &mut R) -> Result<BTreeSet<Pos>, EpisodeError> {
    let n = config.grid_size;
    let walls = if config.enable_maze {
        grow_walls(n, config.maze_density, config.maze_complexity, rng)
    } else {
        scatter(n, config.num_obstacles, rng)?
    };
    if n * n - walls.len() < MIN_FREE_CELLS {
        return Err(EpisodeError::Maze(format!(
            "layout leaves {} free cells, need at least {MIN_FREE_CELLS}",
            n * n - walls.len()
        )));
    }
    Ok(walls)
}

fn scatter<R: Rng + ?Sized>(n: usize, count: usize, rng: &mut R) -> Result<BTreeSet<Pos>, EpisodeError> {
    let cells = n * n;
    if count + MIN_FREE_CELLS > cells {
        return Err(EpisodeError::Maze(format!("{count} obstacles do not fit a {n}x{n} grid")));
    }
    Ok(index::sample(rng, cells, count)
        .into_iter()
        .map(|i| Pos::new(i % n, i / n))
        .collect())
}

fn grow_walls<R: Rng + ?Sized>(n: usize, density: f64, complexity: f64, rng: &mut R) -> BTreeSet<Pos> {
    let lattice: Vec<usize> = (0..n).step_by(2).collect();
    let segments = (density * (lattice.len() * lattice.len()) as f64).round() as usize;
    let growth = (complexity * 10.0 * n as f64).round() as usize;
    let mut walls = BTreeSet::new();
    for _ in 0..segments {
        let mut cur = Pos::new(lattice[rng.gen_range(0..lattice.len())], lattice[rng.gen_range(0..lattice.len())]);
        walls.insert(cur);
        for _ in 0..growth {
            let neighbours: Vec<(Pos, Pos)> = Heading::ALL
                .iter()
                .filter_map(|&h| {
                    let mid = cur.offset(h, n, n)?;
                    let far = mid.offset(h, n, n)?;
                    Some((mid, far))
                })
                .collect();
            if neighbours.is_empty() {
                break;
            }
            let (mid, far) = neighbours[rng.gen_range(0..neighbours.len())];
            if !walls.contains(&far) {
                walls.insert(mid);
                walls.insert(far);
                cur = far;
            }
        }
    }
    walls
}
