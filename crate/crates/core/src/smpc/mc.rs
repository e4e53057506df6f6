use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::model::SmpcModel;
use super::oracle::ControlPlan;
use crate::ccmdp::wilson_interval;
use crate::error::{Error, Result};

/// Samples per random stream; chunk `c` uses stream `c`.
const CHUNK: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub n: usize,
    pub violations: usize,
    pub rate: f64,
    /// Wilson interval at [`crate::ccmdp::CI_LEVEL`].
    pub ci: (f64, f64),
}

/// Factor `L` with `L Lᵀ = Σ` for a symmetric PSD matrix.
fn psd_factor(sigma: &DMatrix<f64>) -> DMatrix<f64> {
    let e = sigma.clone().symmetric_eigen();
    let sqrt = e.eigenvalues.map(|l| l.max(0.0).sqrt());
    &e.eigenvectors * DMatrix::from_diagonal(&sqrt)
}

/// Dense row-major copy, skipped entirely when zero.
fn dense(m: &DMatrix<f64>) -> Option<Vec<f64>> {
    if m.iter().all(|x| *x == 0.0) {
        return None;
    }
    let (r, c) = m.shape();
    Some((0..r).flat_map(|i| (0..c).map(move |j| m[(i, j)])).collect())
}

fn mat_vec(m: &[f64], x: &[f64], out: &mut [f64]) {
    let n = x.len();
    for (i, o) in out.iter_mut().enumerate() {
        *o = m[i * n..(i + 1) * n].iter().zip(x).map(|(a, b)| a * b).sum();
    }
}

/// Fraction of sampled trajectories that enter any obstacle at any of
/// `x_2..x_{N+1}` when the plan's controls are applied open loop.
pub fn estimate_risk_mc(model: &SmpcModel, plan: &ControlPlan, seed: u64, n: usize) -> Result<McEstimate> {
    if n == 0 {
        return Err(Error::InvalidInput("need at least one sample".into()));
    }
    if plan.mean.len() != model.horizon + 1 {
        return Err(Error::InvalidPolicy("plan does not match the model horizon".into()));
    }
    let dim = model.n();
    let a: Vec<f64> = dense(&model.a).unwrap_or_else(|| vec![0.0; dim * dim]);
    let lw = dense(&psd_factor(&model.sigma_w));
    let l0 = dense(&psd_factor(&model.sigma_x0));
    let obstacles: Vec<(Vec<f64>, Vec<f64>)> = model
        .obstacles
        .iter()
        .map(|o| (dense(&o.h).unwrap_or_else(|| vec![0.0; o.rows() * dim]), o.g.iter().copied().collect()))
        .collect();

    let chunks = n.div_ceil(CHUNK);
    let violations: usize = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(c as u64);
            let count = CHUNK.min(n - c * CHUNK);
            let mut e = vec![0.0; dim];
            let mut tmp = vec![0.0; dim];
            let mut z = vec![0.0; dim];
            let mut x = vec![0.0; dim];
            let mut hits = 0;
            for _ in 0..count {
                // Deviation from the mean: e_1 ~ N(0, Σ_x1), e_{k+1} = A e_k + w_k.
                match &l0 {
                    Some(l) => {
                        z.iter_mut().for_each(|v| *v = StandardNormal.sample(&mut rng));
                        mat_vec(l, &z, &mut e);
                    }
                    None => e.iter_mut().for_each(|v| *v = 0.0),
                }
                'steps: for k in 1..=model.horizon {
                    mat_vec(&a, &e, &mut tmp);
                    if let Some(l) = &lw {
                        z.iter_mut().for_each(|v| *v = StandardNormal.sample(&mut rng));
                        mat_vec(l, &z, &mut e);
                        for (ei, ti) in e.iter_mut().zip(&tmp) {
                            *ei += ti;
                        }
                    } else {
                        e.copy_from_slice(&tmp);
                    }
                    for d in 0..dim {
                        x[d] = plan.mean[k][d] + e[d];
                    }
                    for (h, g) in &obstacles {
                        let inside = g.iter().enumerate().all(|(j, gj)| {
                            h[j * dim..(j + 1) * dim].iter().zip(&x).map(|(p, q)| p * q).sum::<f64>() >= *gj
                        });
                        if inside {
                            hits += 1;
                            break 'steps;
                        }
                    }
                }
            }
            hits
        })
        .sum();
    Ok(McEstimate {
        n,
        violations,
        rate: violations as f64 / n as f64,
        ci: wilson_interval(violations, n),
    })
}
