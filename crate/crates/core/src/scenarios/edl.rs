use std::collections::VecDeque;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::map::{gaussian_kernel, GridMap};
use crate::ccmdp::{Mdp, StageBuilder};
use crate::error::{Error, Result};

/// One correction stage: the new aim point `u` must satisfy
/// `(u − x)ᵀ D (u − x) ≤ d²` in cell units, and the projected landing point
/// then moves by Gaussian noise of covariance `noise`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdlStage {
    pub shape: [[f64; 2]; 2],
    pub radius: f64,
    pub noise: [[f64; 2]; 2],
}

impl EdlStage {
    pub fn circular(radius: f64, sigma: f64) -> Self {
        let var = sigma * sigma;
        Self { shape: [[1.0, 0.0], [0.0, 1.0]], radius, noise: [[var, 0.0], [0.0, var]] }
    }

    /// Integer offsets inside the correction ellipse, ordered by `dy` then
    /// `dx`.
    pub fn offsets(&self) -> Result<Vec<(i64, i64)>> {
        let [[a, b], [c, d]] = self.shape;
        let det = a * d - b * c;
        if !(a > 0.0 && det > 0.0 && (b - c).abs() <= 1e-12 * a.max(d)) {
            return Err(Error::InvalidInput(format!(
                "correction shape {:?} must be symmetric positive definite",
                self.shape
            )));
        }
        if !(self.radius >= 0.0 && self.radius.is_finite()) {
            return Err(Error::InvalidInput(format!("correction radius {} is invalid", self.radius)));
        }
        let r2 = self.radius * self.radius;
        // Extent of the ellipse along each axis is d·sqrt((D⁻¹)_ii).
        let rx = (self.radius * (d / det).sqrt()).floor() as i64;
        let ry = (self.radius * (a / det).sqrt()).floor() as i64;
        let mut out = Vec::new();
        for dy in -ry..=ry {
            for dx in -rx..=rx {
                let (x, y) = (dx as f64, dy as f64);
                if a * x * x + 2.0 * b * x * y + d * y * y <= r2 * (1.0 + 1e-12) {
                    out.push((dx, dy));
                }
            }
        }
        Ok(out)
    }
}

/// Multi-stage landing-point targeting over a hazard map.
///
/// Layer 0 holds the single initial projected landing cell; layers
/// `1..=T` hold every cell. Only the final layer can fail: hazardous cells
/// and safe cells cut off from the science targets. The landing cost is the
/// surface traverse from the landing cell through both targets in the
/// cheaper order, measured by 4-connected breadth-first search over safe
/// cells and scaled by `cell_size`.
#[derive(Debug, Clone, PartialEq)]
pub struct EdlScenario {
    pub map: GridMap,
    pub entry: (usize, usize),
    pub stages: Vec<EdlStage>,
    pub targets: [(usize, usize); 2],
    pub cell_size: f64,
    pub v: f64,
}

/// Everything of an [`EdlScenario`] except the map, plus the settings of
/// the synthetic hazard generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EdlParams {
    pub width: usize,
    pub height: usize,
    pub cell_size: f64,
    pub entry: (usize, usize),
    pub stages: Vec<EdlStage>,
    pub targets: [(usize, usize); 2],
    pub blobs: usize,
    pub blob_radius: (f64, f64),
    pub seed: u64,
    pub v: f64,
}

impl Default for EdlParams {
    fn default() -> Self {
        Self {
            width: 100,
            height: 100,
            cell_size: 20.0,
            entry: (50, 50),
            stages: vec![
                EdlStage::circular(25.0, 4.0),
                EdlStage::circular(6.0, 1.5),
                EdlStage::circular(1.5, 0.5),
            ],
            targets: [(35, 60), (45, 72)],
            blobs: 30,
            blob_radius: (3.0, 8.0),
            seed: 2015,
            v: 0.001,
        }
    }
}

impl EdlParams {
    /// Generates the seeded hazard map, keeping the targets and the entry
    /// point clear.
    pub fn hazard_map(&self) -> Result<GridMap> {
        GridMap::random_blobs(
            self.width,
            self.height,
            self.blobs,
            self.blob_radius,
            self.seed,
            &[self.targets[0], self.targets[1], self.entry],
        )
    }

    pub fn on(self, map: GridMap) -> EdlScenario {
        EdlScenario {
            map,
            entry: self.entry,
            stages: self.stages,
            targets: self.targets,
            cell_size: self.cell_size,
            v: self.v,
        }
    }

    pub fn scenario(self) -> Result<EdlScenario> {
        let map = self.hazard_map()?;
        Ok(self.on(map))
    }
}

fn bfs(map: &GridMap, from: (usize, usize)) -> Vec<Option<u32>> {
    let mut dist = vec![None; map.n_cells()];
    let mut queue = VecDeque::new();
    dist[map.index(from.0, from.1)] = Some(0);
    queue.push_back(from);
    while let Some((x, y)) = queue.pop_front() {
        let d = dist[map.index(x, y)].expect("queued cells are labeled");
        for (dx, dy) in [(1i64, 0i64), (-1, 0), (0, 1), (0, -1)] {
            let (nx, ny) = (x as i64 + dx, y as i64 + dy);
            if !map.contains(nx, ny) {
                continue;
            }
            let (nx, ny) = (nx as usize, ny as usize);
            let c = map.index(nx, ny);
            if dist[c].is_none() && !map.is_blocked(nx, ny) {
                dist[c] = Some(d + 1);
                queue.push_back((nx, ny));
            }
        }
    }
    dist
}

impl EdlScenario {
    pub fn horizon(&self) -> usize {
        self.stages.len()
    }

    /// Traverse cost of landing in each cell, or `None` where landing fails.
    pub fn traverse_costs(&self) -> Result<Vec<Option<f64>>> {
        let map = &self.map;
        for (i, &(x, y)) in self.targets.iter().enumerate() {
            if x >= map.width() || y >= map.height() || map.is_blocked(x, y) {
                return Err(Error::InvalidInput(format!("science target {i} is not a safe cell")));
            }
        }
        let da = bfs(map, self.targets[0]);
        let db = bfs(map, self.targets[1]);
        let (bx, by) = self.targets[1];
        let Some(ab) = da[map.index(bx, by)] else {
            return Err(Error::InvalidInput("science targets are not connected".into()));
        };
        Ok(da
            .iter()
            .zip(&db)
            .map(|(a, b)| {
                let first = (*a)?.min((*b)?);
                Some(self.cell_size * f64::from(first + ab))
            })
            .collect())
    }

    fn validate(&self) -> Result<()> {
        if self.stages.len() < 2 {
            return Err(Error::InvalidInput("landing needs at least two stages".into()));
        }
        if self.map.blocked().iter().all(|&b| b) {
            return Err(Error::InvalidInput("hazard map has no safe cell".into()));
        }
        let (x, y) = self.entry;
        if x >= self.map.width() || y >= self.map.height() {
            return Err(Error::InvalidInput(format!("entry point {:?} is off the map", self.entry)));
        }
        if !(self.cell_size > 0.0 && self.cell_size.is_finite()) {
            return Err(Error::InvalidInput("cell size must be positive".into()));
        }
        if !(self.v > 0.0 && self.v < 1.0) {
            return Err(Error::InvalidInput(format!("risk bound {} must lie in (0, 1)", self.v)));
        }
        Ok(())
    }
}

/// Builds the landing MDP. Stage costs are zero; the traverse cost is paid
/// at the final layer.
pub fn edl_scenario(s: &EdlScenario) -> Result<Mdp> {
    s.validate()?;
    let map = &s.map;
    let n = map.n_cells();
    let t = s.horizon();
    let costs = s.traverse_costs()?;
    if costs.iter().all(Option::is_none) {
        return Err(Error::InvalidInput("no safe landing cell reaches the targets".into()));
    }
    let mut stages = Vec::with_capacity(t);
    for (k, stage) in s.stages.iter().enumerate() {
        let offsets = stage.offsets()?;
        let kernel = gaussian_kernel(stage.noise)?;
        let mut b = StageBuilder::new(n);
        let mut outcome_of_aim: Vec<Option<usize>> = vec![None; n];
        let mut add_cell = |b: &mut StageBuilder, x: usize, y: usize| {
            let mut actions = Vec::with_capacity(offsets.len());
            for &(dx, dy) in &offsets {
                let (ax, ay) = (x as i64 + dx, y as i64 + dy);
                if !map.contains(ax, ay) {
                    continue;
                }
                let aim = map.index(ax as usize, ay as usize);
                let o = *outcome_of_aim[aim].get_or_insert_with(|| {
                    b.add_outcome(&map.spread((ax as usize, ay as usize), &kernel))
                });
                actions.push((0.0, o));
            }
            b.add_state(&actions);
        };
        if k == 0 {
            add_cell(&mut b, s.entry.0, s.entry.1);
        } else {
            for cell in 0..n {
                let (x, y) = map.coords(cell);
                add_cell(&mut b, x, y);
            }
        }
        stages.push(Arc::new(b.finish()?));
    }
    let mut failure = vec![vec![false]];
    failure.extend(std::iter::repeat_n(vec![false; n], t - 1));
    failure.push(costs.iter().map(Option::is_none).collect());
    let terminal = costs.iter().map(|c| c.unwrap_or(0.0)).collect();
    Mdp::new(failure, stages, vec![1.0], Some(terminal))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ccmdp::solve_penalized;
    use crate::scenarios::CellRect;

    #[test]
    fn ellipse_offsets() {
        let s = EdlStage::circular(1.0, 0.0);
        assert_eq!(s.offsets().unwrap().len(), 5);
        let s = EdlStage { shape: [[4.0, 0.0], [0.0, 1.0]], radius: 2.0, noise: [[0.0; 2]; 2] };
        let o = s.offsets().unwrap();
        assert!(o.contains(&(1, 0)) && o.contains(&(0, 2)) && !o.contains(&(2, 0)));
        let bad = EdlStage { shape: [[1.0, 2.0], [2.0, 1.0]], radius: 2.0, noise: [[0.0; 2]; 2] };
        assert!(bad.offsets().is_err());
    }

    #[test]
    fn traverse_goes_through_the_nearer_target_first() {
        let map = GridMap::with_rects(10, 3, &[CellRect { x0: 5, y0: 0, x1: 5, y1: 1 }]).unwrap();
        let s = EdlParams {
            entry: (0, 0),
            targets: [(2, 0), (8, 0)],
            cell_size: 1.0,
            stages: vec![EdlStage::circular(1.0, 0.0); 2],
            ..Default::default()
        }
        .on(map);
        let c = s.traverse_costs().unwrap();
        // Targets are 6 + 4 detour steps apart around the wall.
        let ab = 10.0;
        assert_eq!(c[s.map.index(2, 0)], Some(ab));
        assert_eq!(c[s.map.index(0, 0)], Some(ab + 2.0));
        assert_eq!(c[s.map.index(9, 2)], Some(ab + 3.0));
        assert_eq!(c[s.map.index(5, 0)], None);
    }

    #[test]
    fn noiseless_open_map_lands_on_the_best_cell() {
        let s = EdlParams {
            width: 30,
            height: 30,
            entry: (12, 12),
            stages: vec![EdlStage::circular(10.0, 0.0), EdlStage::circular(10.0, 0.0)],
            targets: [(20, 20), (25, 22)],
            blobs: 0,
            ..Default::default()
        }
        .scenario()
        .unwrap();
        let mdp = edl_scenario(&s).unwrap();
        let sol = solve_penalized(&mdp, 0.0).unwrap();
        assert_eq!(sol.eval.failure_prob, 0.0);
        assert!((sol.eval.expected_cost - 20.0 * 7.0).abs() < 1e-9);
    }

    #[test]
    fn all_hazard_map_is_rejected() {
        let map = GridMap::with_rects(4, 4, &[CellRect { x0: 0, y0: 0, x1: 3, y1: 3 }]).unwrap();
        let s = EdlParams { entry: (0, 0), targets: [(0, 0), (1, 1)], ..Default::default() }.on(map);
        assert!(matches!(edl_scenario(&s), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn only_the_landing_layer_fails() {
        let s = EdlParams { width: 40, height: 40, entry: (20, 20), targets: [(10, 10), (30, 30)], blobs: 8, ..Default::default() }
            .scenario()
            .unwrap();
        let mdp = edl_scenario(&s).unwrap();
        assert_eq!(mdp.layer_size(0), 1);
        assert_eq!(mdp.horizon(), 3);
        for k in 0..3 {
            assert!(mdp.failure_layer(k).iter().all(|f| !f));
        }
        let hazards = s.map.blocked().iter().filter(|&&b| b).count();
        assert!(mdp.failure_layer(3).iter().filter(|&&f| f).count() >= hazards);
    }
}
