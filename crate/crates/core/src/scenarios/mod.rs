//! Problem instances: the finite-set oracle plus grid navigation, landing
//! targeting and obstacle-avoidance families at configurable scale.
mod corridor;
mod edl;
mod finite;
mod grid;
mod map;

pub use corridor::{corridor_model, CorridorParams};
pub use edl::{edl_scenario, EdlParams, EdlScenario, EdlStage};
pub use finite::{toy_oracle, FiniteSetOracle};
pub use grid::{desk_grid_map, grid_scenario, GridParams, GridScenario};
pub use map::{gaussian_kernel, CellRect, GridMap, TRUNC_SIGMAS};
