use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::smpc::phi;

/// Noise kernels are truncated at this many standard deviations per axis and
/// renormalized.
pub const TRUNC_SIGMAS: f64 = 4.0;

/// Inclusive cell rectangle `[x0, x1] × [y0, y1]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CellRect {
    pub x0: usize,
    pub y0: usize,
    pub x1: usize,
    pub y1: usize,
}

/// Occupancy grid. Cell `(x, y)` is column `x` of row `y`; row 0 is the
/// first line of a map file. Cells are numbered `y * width + x`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridMap {
    width: usize,
    height: usize,
    blocked: Vec<bool>,
}

impl GridMap {
    pub fn open(width: usize, height: usize) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidInput(format!("grid {width}x{height} is empty")));
        }
        Ok(Self { width, height, blocked: vec![false; width * height] })
    }

    pub fn with_rects(width: usize, height: usize, rects: &[CellRect]) -> Result<Self> {
        let mut map = Self::open(width, height)?;
        for r in rects {
            if r.x0 > r.x1 || r.y0 > r.y1 || r.x1 >= width || r.y1 >= height {
                return Err(Error::InvalidInput(format!("rectangle {r:?} leaves the grid")));
            }
            for y in r.y0..=r.y1 {
                for x in r.x0..=r.x1 {
                    map.blocked[y * width + x] = true;
                }
            }
        }
        Ok(map)
    }

    /// Parses one character per cell, `.` free and `#` blocked. Blank lines
    /// are ignored; all other lines must have the same length.
    pub fn parse(text: &str) -> Result<Self> {
        let rows: Vec<&str> = text.lines().map(str::trim_end).filter(|l| !l.is_empty()).collect();
        let width = rows.first().map_or(0, |r| r.chars().count());
        let mut blocked = Vec::with_capacity(width * rows.len());
        for (y, row) in rows.iter().enumerate() {
            if row.chars().count() != width {
                return Err(Error::InvalidInput(format!(
                    "map row {y} has {} cells, expected {width}",
                    row.chars().count()
                )));
            }
            for (x, c) in row.chars().enumerate() {
                blocked.push(match c {
                    '.' => false,
                    '#' => true,
                    _ => {
                        return Err(Error::InvalidInput(format!(
                            "map cell ({x}, {y}) has unknown symbol {c:?}"
                        )))
                    }
                });
            }
        }
        let mut map = Self::open(width, rows.len())?;
        map.blocked = blocked;
        Ok(map)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::InvalidInput(format!("cannot read map {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::with_capacity((self.width + 1) * self.height);
        for row in self.blocked.chunks(self.width) {
            out.extend(row.iter().map(|&b| if b { '#' } else { '.' }));
            out.push('\n');
        }
        out
    }

    /// Disc-shaped hazards with uniformly drawn centers and radii. Blobs that
    /// would cover a cell of `keep_clear` are redrawn, up to a fixed number of
    /// attempts.
    pub fn random_blobs(
        width: usize,
        height: usize,
        blobs: usize,
        radius: (f64, f64),
        seed: u64,
        keep_clear: &[(usize, usize)],
    ) -> Result<Self> {
        if !(radius.0 > 0.0 && radius.0 <= radius.1 && radius.1.is_finite()) {
            return Err(Error::InvalidInput(format!("blob radii {radius:?} are invalid")));
        }
        let mut map = Self::open(width, height)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut placed = 0;
        for _ in 0..blobs * 20 {
            if placed == blobs {
                break;
            }
            let cx = rng.random_range(0.0..width as f64);
            let cy = rng.random_range(0.0..height as f64);
            let r = rng.random_range(radius.0..=radius.1);
            let inside = |x: usize, y: usize| {
                let dx = x as f64 + 0.5 - cx;
                let dy = y as f64 + 0.5 - cy;
                dx * dx + dy * dy <= r * r
            };
            if keep_clear.iter().any(|&(x, y)| inside(x, y)) {
                continue;
            }
            for y in 0..height {
                for x in 0..width {
                    if inside(x, y) {
                        map.blocked[y * width + x] = true;
                    }
                }
            }
            placed += 1;
        }
        Ok(map)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn n_cells(&self) -> usize {
        self.blocked.len()
    }

    pub fn contains(&self, x: i64, y: i64) -> bool {
        x >= 0 && y >= 0 && (x as usize) < self.width && (y as usize) < self.height
    }

    pub fn index(&self, x: usize, y: usize) -> usize {
        y * self.width + x
    }

    pub fn coords(&self, cell: usize) -> (usize, usize) {
        (cell % self.width, cell / self.width)
    }

    pub fn is_blocked(&self, x: usize, y: usize) -> bool {
        self.blocked[self.index(x, y)]
    }

    pub fn blocked(&self) -> &[bool] {
        &self.blocked
    }

    /// Distribution of the cell reached from `aim` under `kernel`, with
    /// offsets that leave the grid clamped onto its border.
    pub(crate) fn spread(&self, aim: (usize, usize), kernel: &[(i64, i64, f64)]) -> Vec<(usize, f64)> {
        let clamp = |v: i64, n: usize| v.clamp(0, n as i64 - 1) as usize;
        let mut out: Vec<(usize, f64)> = kernel
            .iter()
            .map(|&(dx, dy, p)| {
                let x = clamp(aim.0 as i64 + dx, self.width);
                let y = clamp(aim.1 as i64 + dy, self.height);
                (self.index(x, y), p)
            })
            .collect();
        out.sort_by_key(|e| e.0);
        out.dedup_by(|b, a| {
            if a.0 == b.0 {
                a.1 += b.1;
                true
            } else {
                false
            }
        });
        out
    }
}

/// Discretized zero-mean Gaussian on integer offsets, truncated at
/// [`TRUNC_SIGMAS`] and renormalized.
///
/// Diagonal covariances integrate the density over each cell; correlated
/// ones use the density at cell centers. A zero variance puts all mass on
/// offset zero along that axis.
pub fn gaussian_kernel(cov: [[f64; 2]; 2]) -> Result<Vec<(i64, i64, f64)>> {
    let [[sxx, sxy], [syx, syy]] = cov;
    if ![sxx, sxy, syx, syy].iter().all(|v| v.is_finite()) || sxx < 0.0 || syy < 0.0 {
        return Err(Error::InvalidInput(format!("noise covariance {cov:?} is invalid")));
    }
    if (sxy - syx).abs() > 1e-12 * sxx.max(syy).max(1.0) {
        return Err(Error::InvalidInput("noise covariance must be symmetric".into()));
    }
    let axis = |var: f64| -> Vec<(i64, f64)> {
        if var == 0.0 {
            return vec![(0, 1.0)];
        }
        let s = var.sqrt();
        let r = (TRUNC_SIGMAS * s).ceil() as i64;
        (-r..=r)
            .map(|j| (j, phi((j as f64 + 0.5) / s) - phi((j as f64 - 0.5) / s)))
            .collect()
    };
    let mut out = Vec::new();
    if sxy == 0.0 {
        for (j, py) in axis(syy) {
            for &(i, px) in &axis(sxx) {
                out.push((i, j, px * py));
            }
        }
    } else {
        let det = sxx * syy - sxy * sxy;
        if det <= 0.0 {
            return Err(Error::InvalidInput("correlated noise covariance must be definite".into()));
        }
        let rx = (TRUNC_SIGMAS * sxx.sqrt()).ceil() as i64;
        let ry = (TRUNC_SIGMAS * syy.sqrt()).ceil() as i64;
        for j in -ry..=ry {
            for i in -rx..=rx {
                let (x, y) = (i as f64, j as f64);
                let q = (syy * x * x - 2.0 * sxy * x * y + sxx * y * y) / det;
                out.push((i, j, (-0.5 * q).exp()));
            }
        }
    }
    out.retain(|e| e.2 > 0.0);
    let total: f64 = out.iter().map(|e| e.2).sum();
    for e in &mut out {
        e.2 /= total;
    }
    Ok(out)
}
