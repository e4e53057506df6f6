use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::smpc::{Obstacle, SmpcModel};

/// Planar double integrator that must cross from the origin to
/// `(length, 0)` at rest past two blocks separated by a narrow horizontal
/// gap. Going through the gap is short but risky; going around either block
/// is safe but needs more control effort.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorridorParams {
    pub horizon: usize,
    pub length: f64,
    /// Blocks occupy `x ∈ [block_x.0, block_x.1]`.
    pub block_x: (f64, f64),
    /// Half-width of the gap around `y = 0`.
    pub gap: f64,
    pub upper_height: f64,
    pub lower_height: f64,
    pub sigma: f64,
    pub u_max: f64,
    pub v: f64,
}

impl Default for CorridorParams {
    fn default() -> Self {
        Self {
            horizon: 6,
            length: 6.0,
            block_x: (2.0, 4.0),
            gap: 0.15,
            upper_height: 0.5,
            lower_height: 0.85,
            sigma: 0.1,
            u_max: 1.0,
            v: 0.01,
        }
    }
}

pub fn corridor_model(params: &CorridorParams) -> Result<SmpcModel> {
    let p = params;
    let positive = [p.length, p.gap, p.upper_height, p.lower_height, p.u_max];
    if positive.iter().any(|x| !(x.is_finite() && *x > 0.0)) || !(p.sigma >= 0.0) {
        return Err(Error::InvalidInput("corridor dimensions must be positive".into()));
    }
    if !(p.block_x.0 > 0.0 && p.block_x.0 < p.block_x.1 && p.block_x.1 < p.length) {
        return Err(Error::InvalidInput(format!(
            "blocks {:?} must lie strictly between start and goal",
            p.block_x
        )));
    }
    let (a, b, sigma_w, pu, q) = SmpcModel::double_integrator(1.0, p.sigma, p.u_max);
    let model = SmpcModel {
        a,
        b,
        sigma_w,
        sigma_x0: DMatrix::zeros(4, 4),
        p: pu,
        q,
        obstacles: vec![
            Obstacle::rectangle(4, p.block_x, (p.gap, p.gap + p.upper_height)),
            Obstacle::rectangle(4, p.block_x, (-p.gap - p.lower_height, -p.gap)),
        ],
        horizon: p.horizon,
        x0: DVector::zeros(4),
        terminal: Some(DVector::from_vec(vec![p.length, 0.0, 0.0, 0.0])),
        v: p.v,
    };
    model.validate()?;
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_blocks_leave_the_axis_free() {
        let m = corridor_model(&CorridorParams::default()).unwrap();
        assert_eq!(m.obstacles.len(), 2);
        assert!(m.obstacles.iter().all(|o| !o.contains(&[3.0, 0.0, 0.0, 0.0])));
        assert!(m.obstacles[0].contains(&[3.0, 0.3, 0.0, 0.0]));
        assert!(m.obstacles[1].contains(&[3.0, -0.9, 0.0, 0.0]));
    }

    #[test]
    fn rejects_blocks_over_the_goal() {
        let p = CorridorParams { block_x: (2.0, 7.0), ..Default::default() };
        assert!(corridor_model(&p).is_err());
        let p = CorridorParams { gap: 0.0, ..Default::default() };
        assert!(corridor_model(&p).is_err());
    }
}
