//! Run configuration: a versioned JSON document naming the problem kind,
//! its scenario parameters and the solver and Monte Carlo settings.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use mixedctrl::dual::ScalarDualConfig;
use mixedctrl::scenarios::{
    desk_grid_map, CellRect, CorridorParams, EdlParams, EdlScenario, FiniteSetOracle, GridMap,
    GridParams, GridScenario,
};
use mixedctrl::smpc::{PwlCdf, SmpcConfig, SmpcModel};
use mixedctrl::{Bounds, CostVector};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    Toy,
    Grid,
    Edl,
    Smpc,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSettings {
    pub tol_lambda: f64,
    pub tol_risk: f64,
    pub lambda_max: f64,
    pub max_iter: usize,
    /// Tolerance handed to the optimality check and the output sanity gate.
    pub optimality_tol: f64,
}

impl Default for SolverSettings {
    fn default() -> Self {
        let d = ScalarDualConfig::default();
        Self {
            tol_lambda: d.tol_lambda,
            tol_risk: d.tol_risk,
            lambda_max: d.lambda_max,
            max_iter: d.max_iter,
            optimality_tol: 1e-7,
        }
    }
}

impl SolverSettings {
    pub fn dual(&self) -> ScalarDualConfig {
        ScalarDualConfig {
            lambda_max: self.lambda_max,
            tol_lambda: self.tol_lambda,
            tol_risk: self.tol_risk,
            max_iter: self.max_iter,
            ..ScalarDualConfig::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MonteCarloSettings {
    pub seed: u64,
    /// Rollouts or samples per run; zero skips the Monte Carlo check.
    pub n: usize,
}

impl Default for MonteCarloSettings {
    fn default() -> Self {
        Self { seed: 0, n: 100_000 }
    }
}

/// Multipliers visited by `sweep`: zero, then `points` log-spaced values
/// from `lambda_min` to `lambda_max`, unless `lambdas` lists them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSettings {
    pub lambdas: Option<Vec<f64>>,
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub points: usize,
}

impl Default for SweepSettings {
    fn default() -> Self {
        Self { lambdas: None, lambda_min: 1e-2, lambda_max: 1e5, points: 29 }
    }
}

impl SweepSettings {
    pub fn grid(&self) -> Result<Vec<f64>> {
        if let Some(l) = &self.lambdas {
            if l.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
                bail!("sweep multipliers must be finite and >= 0");
            }
            return Ok(l.clone());
        }
        if !(self.lambda_min > 0.0 && self.lambda_min < self.lambda_max && self.lambda_max.is_finite())
            || self.points < 2
        {
            bail!("sweep needs 0 < lambda_min < lambda_max and at least two points");
        }
        let (a, b) = (self.lambda_min.ln(), self.lambda_max.ln());
        let step = (b - a) / (self.points - 1) as f64;
        let mut out = vec![0.0];
        out.extend((0..self.points).map(|i| (a + step * i as f64).exp()));
        Ok(out)
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    schema: u32,
    kind: Kind,
    #[serde(default)]
    scenario: Map<String, Value>,
    #[serde(default)]
    solver: SolverSettings,
    #[serde(default)]
    monte_carlo: MonteCarloSettings,
    #[serde(default)]
    sweep: SweepSettings,
    out: Option<PathBuf>,
}

/// Problem instance described by a config.
#[derive(Debug, Clone)]
pub enum Scenario {
    Toy(FiniteSetOracle),
    Grid(GridScenario),
    Edl(EdlScenario),
    Smpc { model: SmpcModel, pwl: PwlCdf, config: SmpcConfig },
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub kind: Kind,
    pub scenario: Scenario,
    pub solver: SolverSettings,
    pub monte_carlo: MonteCarloSettings,
    pub sweep: SweepSettings,
    /// Output directory, resolved against the config file's directory.
    pub out: PathBuf,
}

fn take<T: for<'de> Deserialize<'de>>(map: &mut Map<String, Value>, key: &str) -> Result<Option<T>> {
    map.remove(key)
        .map(|v| serde_json::from_value(v).with_context(|| format!("scenario field `{key}`")))
        .transpose()
}

fn rest<T: for<'de> Deserialize<'de>>(map: Map<String, Value>) -> Result<T> {
    serde_json::from_value(Value::Object(map)).context("scenario parameters")
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ToyScenario {
    points: Vec<(f64, f64)>,
    v: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct PwlSettings {
    lo: f64,
    segments: usize,
}

fn toy(map: Map<String, Value>) -> Result<Scenario> {
    if map.is_empty() {
        return Ok(Scenario::Toy(mixedctrl::scenarios::toy_oracle()));
    }
    let t: ToyScenario = rest(map)?;
    if t.points.iter().any(|p| !(p.0.is_finite() && p.1.is_finite())) {
        bail!("toy points must be finite");
    }
    let points = t.points.iter().map(|&(c0, c1)| CostVector::scalar(c0, c1)).collect();
    Ok(Scenario::Toy(FiniteSetOracle::new(points, Bounds::new(vec![t.v])?)?))
}

fn grid(mut map: Map<String, Value>, base: &Path) -> Result<Scenario> {
    let file: Option<PathBuf> = take(&mut map, "map")?;
    let size: Option<(usize, usize)> = take(&mut map, "size")?;
    let obstacles: Option<Vec<CellRect>> = take(&mut map, "obstacles")?;
    let params: GridParams = rest(map)?;
    let grid = match (file, size, obstacles) {
        (Some(f), None, None) => GridMap::load(&base.join(f))?,
        (None, Some((w, h)), obs) => GridMap::with_rects(w, h, &obs.unwrap_or_default())?,
        (None, None, None) => desk_grid_map(),
        _ => bail!("grid scenarios take either `map` or `size` with optional `obstacles`"),
    };
    Ok(Scenario::Grid(params.on(grid)))
}

fn edl(mut map: Map<String, Value>, base: &Path) -> Result<Scenario> {
    let file: Option<PathBuf> = take(&mut map, "map")?;
    let params: EdlParams = rest(map)?;
    let scenario = match file {
        Some(f) => params.on(GridMap::load(&base.join(f))?),
        None => params.scenario()?,
    };
    Ok(Scenario::Edl(scenario))
}

fn smpc(mut map: Map<String, Value>) -> Result<Scenario> {
    let pwl = match take::<PwlSettings>(&mut map, "pwl")? {
        Some(p) => PwlCdf::uniform(p.lo, p.segments)?,
        None => PwlCdf::default(),
    };
    let mut config = SmpcConfig::default();
    if let Some(p) = take(&mut map, "presolve")? {
        config.presolve = p;
    }
    if let Some(n) = take(&mut map, "max_nodes")? {
        config.milp.max_nodes = n;
    }
    let params: CorridorParams = rest(map)?;
    let model = mixedctrl::scenarios::corridor_model(&params)?;
    Ok(Scenario::Smpc { model, pwl, config })
}

impl RunConfig {
    pub fn parse(text: &str, base: &Path) -> Result<Self> {
        let raw: RawConfig = serde_json::from_str(text).context("config is not valid")?;
        if raw.schema != SCHEMA_VERSION {
            bail!("unsupported schema version {} (expected {SCHEMA_VERSION})", raw.schema);
        }
        let scenario = match raw.kind {
            Kind::Toy => toy(raw.scenario)?,
            Kind::Grid => grid(raw.scenario, base)?,
            Kind::Edl => edl(raw.scenario, base)?,
            Kind::Smpc => smpc(raw.scenario)?,
        };
        let s = &raw.solver;
        if !(s.tol_lambda > 0.0 && s.tol_risk >= 0.0 && s.lambda_max > 0.0 && s.optimality_tol > 0.0) {
            bail!("solver tolerances must be positive");
        }
        Ok(Self {
            kind: raw.kind,
            scenario,
            solver: raw.solver,
            monte_carlo: raw.monte_carlo,
            sweep: raw.sweep,
            out: base.join(raw.out.unwrap_or_else(|| PathBuf::from("out"))),
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, base).with_context(|| format!("in {}", path.display()))
    }
}
