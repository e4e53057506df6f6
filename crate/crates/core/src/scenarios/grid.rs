use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::map::{gaussian_kernel, CellRect, GridMap};
use crate::ccmdp::{Mdp, Stage, StageBuilder};
use crate::error::{Error, Result};

/// Single-integrator navigation `x_{k+1} = x_k + u_k + w_k` on a grid with
/// integer displacements `‖u‖₂ ≤ step_radius` and isotropic discretized
/// Gaussian noise. Blocked cells fail the run.
///
/// Cells within `goal_radius` of the goal absorb at no cost. A run that is
/// still outside the goal region after `horizon` steps pays `miss_penalty`
/// plus its straight-line distance to the goal.
#[derive(Debug, Clone, PartialEq)]
pub struct GridScenario {
    pub map: GridMap,
    pub horizon: usize,
    pub start: (usize, usize),
    pub goal: (usize, usize),
    pub goal_radius: f64,
    pub step_radius: f64,
    pub sigma: f64,
    pub miss_penalty: f64,
    pub v: f64,
}

/// Everything of a [`GridScenario`] except the map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridParams {
    pub horizon: usize,
    pub start: (usize, usize),
    pub goal: (usize, usize),
    pub goal_radius: f64,
    pub step_radius: f64,
    pub sigma: f64,
    pub miss_penalty: f64,
    pub v: f64,
}

impl Default for GridParams {
    fn default() -> Self {
        Self {
            horizon: 15,
            start: (3, 15),
            goal: (26, 15),
            goal_radius: 1.5,
            step_radius: 3.0,
            sigma: 0.6,
            miss_penalty: 1000.0,
            v: 0.02,
        }
    }
}

impl GridParams {
    pub fn on(self, map: GridMap) -> GridScenario {
        GridScenario {
            map,
            horizon: self.horizon,
            start: self.start,
            goal: self.goal,
            goal_radius: self.goal_radius,
            step_radius: self.step_radius,
            sigma: self.sigma,
            miss_penalty: self.miss_penalty,
            v: self.v,
        }
    }
}

/// Two blocks on a 30×30 grid with a narrow passage between them.
pub fn desk_grid_map() -> GridMap {
    GridMap::with_rects(
        30,
        30,
        &[
            CellRect { x0: 12, y0: 17, x1: 17, y1: 24 },
            CellRect { x0: 12, y0: 6, x1: 17, y1: 13 },
        ],
    )
    .expect("valid desk map")
}

impl GridScenario {
    /// 30×30 grid, 15 steps, risk bound 0.02.
    pub fn desk() -> Self {
        GridParams::default().on(desk_grid_map())
    }

    /// 100×100 grid, 50 steps, `d = 6`, `σ = 1`, risk bound 0.02, with two
    /// walls leaving a narrow gap on the direct line.
    pub fn full_scale() -> Self {
        let map = GridMap::with_rects(
            100,
            100,
            &[
                CellRect { x0: 40, y0: 52, x1: 59, y1: 79 },
                CellRect { x0: 40, y0: 20, x1: 59, y1: 47 },
            ],
        )
        .expect("valid full-scale map");
        GridParams {
            horizon: 50,
            start: (10, 50),
            goal: (90, 50),
            goal_radius: 2.5,
            step_radius: 6.0,
            sigma: 1.0,
            miss_penalty: 1000.0,
            v: 0.02,
        }
        .on(map)
    }

    fn validate(&self) -> Result<()> {
        let in_grid = |(x, y): (usize, usize)| x < self.map.width() && y < self.map.height();
        for (name, c) in [("start", self.start), ("goal", self.goal)] {
            if !in_grid(c) {
                return Err(Error::InvalidInput(format!("{name} {c:?} lies outside the grid")));
            }
            if self.map.is_blocked(c.0, c.1) {
                return Err(Error::InvalidInput(format!("{name} {c:?} lies inside an obstacle")));
            }
        }
        if self.horizon == 0 {
            return Err(Error::InvalidInput("horizon must be positive".into()));
        }
        if !(self.step_radius >= 1.0 && self.step_radius.is_finite()) {
            return Err(Error::InvalidInput(format!("step radius {} must be >= 1", self.step_radius)));
        }
        if !(self.goal_radius >= 0.0 && self.goal_radius.is_finite()) {
            return Err(Error::InvalidInput("goal radius must be finite and >= 0".into()));
        }
        if !(self.miss_penalty >= 0.0 && self.miss_penalty.is_finite()) {
            return Err(Error::InvalidInput("miss penalty must be finite and >= 0".into()));
        }
        if !(self.v > 0.0 && self.v < 1.0) {
            return Err(Error::InvalidInput(format!("risk bound {} must lie in (0, 1)", self.v)));
        }
        Ok(())
    }

    pub fn in_goal(&self, x: usize, y: usize) -> bool {
        let dx = x as f64 - self.goal.0 as f64;
        let dy = y as f64 - self.goal.1 as f64;
        (dx * dx + dy * dy).sqrt() <= self.goal_radius
    }

    /// Integer displacements with `‖u‖₂ ≤ step_radius`, ordered by `dy`
    /// then `dx`.
    pub fn displacements(&self) -> Vec<(i64, i64)> {
        let r = self.step_radius.floor() as i64;
        let r2 = self.step_radius * self.step_radius;
        let mut out = Vec::new();
        for dy in -r..=r {
            for dx in -r..=r {
                if (dx * dx + dy * dy) as f64 <= r2 {
                    out.push((dx, dy));
                }
            }
        }
        out
    }

    /// Action list of an alive cell outside the goal region: the
    /// displacements that stay on the grid, in [`Self::displacements`] order.
    pub fn actions(&self, x: usize, y: usize) -> Vec<(i64, i64)> {
        self.displacements()
            .into_iter()
            .filter(|&(dx, dy)| self.map.contains(x as i64 + dx, y as i64 + dy))
            .collect()
    }
}

/// Builds the time-invariant MDP of a grid scenario. Every layer holds all
/// cells; the start cell carries the initial mass.
pub fn grid_scenario(s: &GridScenario) -> Result<Mdp> {
    s.validate()?;
    let map = &s.map;
    let n = map.n_cells();
    let var = s.sigma * s.sigma;
    if !var.is_finite() {
        return Err(Error::InvalidInput(format!("noise sigma {} is invalid", s.sigma)));
    }
    let kernel = gaussian_kernel([[var, 0.0], [0.0, var]])?;
    let mut b = StageBuilder::new(n);
    // Outcomes 0..n are "aim at cell c"; goal cells get a deterministic stay
    // outcome appended on demand.
    for cell in 0..n {
        b.add_outcome(&map.spread(map.coords(cell), &kernel));
    }
    let mut terminal = vec![0.0; n];
    let gx = s.goal.0 as f64;
    let gy = s.goal.1 as f64;
    for cell in 0..n {
        let (x, y) = map.coords(cell);
        if map.is_blocked(x, y) {
            b.add_state(&[]);
        } else if s.in_goal(x, y) {
            let stay = b.add_outcome(&[(cell, 1.0)]);
            b.add_state(&[(0.0, stay)]);
        } else {
            let actions: Vec<(f64, usize)> = s
                .actions(x, y)
                .into_iter()
                .map(|(dx, dy)| {
                    let to = map.index((x as i64 + dx) as usize, (y as i64 + dy) as usize);
                    (((dx * dx + dy * dy) as f64).sqrt(), to)
                })
                .collect();
            b.add_state(&actions);
            terminal[cell] = s.miss_penalty + (x as f64 - gx).hypot(y as f64 - gy);
        }
    }
    let stage: Arc<Stage> = Arc::new(b.finish()?);
    let failure = vec![map.blocked().to_vec(); s.horizon + 1];
    let mut initial = vec![0.0; n];
    initial[map.index(s.start.0, s.start.1)] = 1.0;
    Mdp::new(failure, vec![stage; s.horizon], initial, Some(terminal))
}
