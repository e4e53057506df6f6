use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Polytopic obstacle whose interior is `H x ≥ g` (componentwise).
#[derive(Debug, Clone, PartialEq)]
pub struct Obstacle {
    pub h: DMatrix<f64>,
    pub g: DVector<f64>,
}

impl Obstacle {
    /// Axis-aligned box `[x0, x1] × [y0, y1]` in the first two state
    /// coordinates of an `n`-dimensional state.
    pub fn rectangle(n: usize, x: (f64, f64), y: (f64, f64)) -> Self {
        let mut h = DMatrix::zeros(4, n);
        h[(0, 0)] = 1.0;
        h[(1, 0)] = -1.0;
        h[(2, 1)] = 1.0;
        h[(3, 1)] = -1.0;
        Self { h, g: DVector::from_vec(vec![x.0, -x.1, y.0, -y.1]) }
    }

    pub fn rows(&self) -> usize {
        self.h.nrows()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        (0..self.rows()).all(|j| {
            (0..x.len()).map(|d| self.h[(j, d)] * x[d]).sum::<f64>() >= self.g[j]
        })
    }
}

/// Linear-Gaussian system `x_{k+1} = A x_k + B u_k + w_k` with open-loop
/// controls `u_1..u_N` in the polytope `P u ≤ q`.
///
/// States are indexed `x_1..x_{N+1}`; `x_1` has mean `x0` and covariance
/// `sigma_x0`. Obstacle avoidance is required of `x_2..x_{N+1}`, the states
/// the controls influence.
#[derive(Debug, Clone, PartialEq)]
pub struct SmpcModel {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub sigma_w: DMatrix<f64>,
    pub sigma_x0: DMatrix<f64>,
    pub p: DMatrix<f64>,
    pub q: DVector<f64>,
    pub obstacles: Vec<Obstacle>,
    pub horizon: usize,
    pub x0: DVector<f64>,
    /// Required mean of `x_{N+1}`.
    pub terminal: Option<DVector<f64>>,
    pub v: f64,
}

fn check_psd(name: &str, m: &DMatrix<f64>) -> Result<()> {
    let n = m.nrows();
    if m.ncols() != n {
        return Err(Error::InvalidInput(format!("{name} must be square")));
    }
    let scale = m.amax().max(1.0);
    if (m - m.transpose()).amax() > 1e-12 * scale {
        return Err(Error::InvalidInput(format!("{name} must be symmetric")));
    }
    let min_eig = m.clone().symmetric_eigen().eigenvalues.min();
    if min_eig < -1e-10 * scale {
        return Err(Error::InvalidInput(format!(
            "{name} must be positive semidefinite (eigenvalue {min_eig})"
        )));
    }
    Ok(())
}

impl SmpcModel {
    /// Checks dimensions, covariances and the risk bound.
    pub fn validate(&self) -> Result<()> {
        let n = self.a.nrows();
        let m = self.b.ncols();
        let dim = |what: &str, ok: bool| {
            if ok {
                Ok(())
            } else {
                Err(Error::InvalidInput(format!("{what} has inconsistent dimensions")))
            }
        };
        dim("A", self.a.ncols() == n)?;
        dim("B", self.b.nrows() == n)?;
        dim("sigma_w", self.sigma_w.shape() == (n, n))?;
        dim("sigma_x0", self.sigma_x0.shape() == (n, n))?;
        dim("P", self.p.ncols() == m && self.p.nrows() == self.q.len())?;
        dim("x0", self.x0.len() == n)?;
        if let Some(t) = &self.terminal {
            dim("terminal", t.len() == n)?;
        }
        for (i, o) in self.obstacles.iter().enumerate() {
            dim(&format!("obstacle {i}"), o.h.ncols() == n && o.h.nrows() == o.g.len())?;
            if o.rows() == 0 {
                return Err(Error::InvalidInput(format!("obstacle {i} has no rows")));
            }
        }
        if self.horizon == 0 {
            return Err(Error::InvalidInput("horizon must be positive".into()));
        }
        if !(self.v > 0.0 && self.v < 0.5) {
            return Err(Error::InvalidInput(format!("risk bound {} must lie in (0, 0.5)", self.v)));
        }
        let finite = |m: &DMatrix<f64>| m.iter().all(|x| x.is_finite());
        if ![&self.a, &self.b, &self.sigma_w, &self.sigma_x0, &self.p].into_iter().all(finite)
            || !self.q.iter().chain(self.x0.iter()).all(|x| x.is_finite())
        {
            return Err(Error::InvalidInput("model entries must be finite".into()));
        }
        check_psd("sigma_w", &self.sigma_w)?;
        check_psd("sigma_x0", &self.sigma_x0)
    }

    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    pub fn m(&self) -> usize {
        self.b.ncols()
    }

    /// Planar double integrator with unit mass: state `(px, py, vx, vy)`,
    /// control `(ax, ay)`, position-only noise of standard deviation `sigma`
    /// and the control box `|u_d| ≤ u_max`.
    pub fn double_integrator(dt: f64, sigma: f64, u_max: f64) -> (DMatrix<f64>, DMatrix<f64>, DMatrix<f64>, DMatrix<f64>, DVector<f64>) {
        #[rustfmt::skip]
        let a = DMatrix::from_row_slice(4, 4, &[
            1.0, 0.0, dt, 0.0,
            0.0, 1.0, 0.0, dt,
            0.0, 0.0, 1.0, 0.0,
            0.0, 0.0, 0.0, 1.0,
        ]);
        #[rustfmt::skip]
        let b = DMatrix::from_row_slice(4, 2, &[
            0.5 * dt * dt, 0.0,
            0.0, 0.5 * dt * dt,
            dt, 0.0,
            0.0, dt,
        ]);
        let mut sigma_w = DMatrix::zeros(4, 4);
        sigma_w[(0, 0)] = sigma * sigma;
        sigma_w[(1, 1)] = sigma * sigma;
        #[rustfmt::skip]
        let p = DMatrix::from_row_slice(4, 2, &[
            1.0, 0.0,
            -1.0, 0.0,
            0.0, 1.0,
            0.0, -1.0,
        ]);
        let q = DVector::from_element(4, u_max);
        (a, b, sigma_w, p, q)
    }
}

/// Covariance of `x_k` for `k ≥ 1`.
pub fn propagate_covariance(model: &SmpcModel, k: usize) -> DMatrix<f64> {
    let mut s = model.sigma_x0.clone();
    for _ in 1..k.max(1) {
        s = &model.a * s * model.a.transpose() + &model.sigma_w;
        s = 0.5 * (&s + s.transpose());
    }
    s
}

/// Covariances of `x_1..x_{N+1}`; entry `k − 1` belongs to `x_k`.
pub fn covariances(model: &SmpcModel) -> Vec<DMatrix<f64>> {
    let mut out = Vec::with_capacity(model.horizon + 1);
    let mut s = model.sigma_x0.clone();
    out.push(s.clone());
    for _ in 0..model.horizon {
        s = &model.a * s * model.a.transpose() + &model.sigma_w;
        s = 0.5 * (&s + s.transpose());
        out.push(s.clone());
    }
    out
}

/// Mean trajectory `x̄_1..x̄_{N+1}` of an open-loop control sequence.
pub fn mean_trajectory(model: &SmpcModel, u: &[Vec<f64>]) -> Vec<DVector<f64>> {
    let mut x = model.x0.clone();
    let mut out = vec![x.clone()];
    for uk in u {
        x = &model.a * x + &model.b * DVector::from_column_slice(uk);
        out.push(x.clone());
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn free_model(horizon: usize) -> SmpcModel {
        let (a, b, sigma_w, p, q) = SmpcModel::double_integrator(1.0, 0.1, 1.0);
        SmpcModel {
            a,
            b,
            sigma_w,
            sigma_x0: DMatrix::zeros(4, 4),
            p,
            q,
            obstacles: vec![],
            horizon,
            x0: DVector::zeros(4),
            terminal: None,
            v: 0.01,
        }
    }

    #[test]
    fn zero_covariance_at_first_state() {
        assert_eq!(propagate_covariance(&free_model(5), 1), DMatrix::zeros(4, 4));
    }

    #[test]
    fn position_variance_grows_linearly() {
        let m = free_model(10);
        for k in 1..=11 {
            let s = propagate_covariance(&m, k);
            assert!((s[(0, 0)] - 0.01 * (k - 1) as f64).abs() < 1e-15);
            assert!((s[(1, 1)] - 0.01 * (k - 1) as f64).abs() < 1e-15);
            assert_eq!(s[(2, 2)], 0.0);
        }
        assert_eq!(covariances(&m)[4], propagate_covariance(&m, 5));
    }

    #[test]
    fn validation_catches_bad_models() {
        let mut m = free_model(3);
        assert!(m.validate().is_ok());
        m.v = 0.6;
        assert!(m.validate().is_err());
        let mut m = free_model(3);
        m.sigma_w[(0, 1)] = 0.5;
        assert!(m.validate().is_err());
        let mut m = free_model(3);
        m.sigma_w[(0, 0)] = -1.0;
        assert!(m.validate().is_err());
        let mut m = free_model(3);
        m.obstacles.push(Obstacle { h: DMatrix::zeros(0, 4), g: DVector::zeros(0) });
        assert!(m.validate().is_err());
    }

    #[test]
    fn rectangle_membership() {
        let o = Obstacle::rectangle(4, (1.0, 2.0), (3.0, 4.0));
        assert!(o.contains(&[1.5, 3.5, 0.0, 0.0]));
        assert!(!o.contains(&[2.5, 3.5, 0.0, 0.0]));
        assert!(!o.contains(&[1.5, 4.5, 9.0, 9.0]));
    }
}
