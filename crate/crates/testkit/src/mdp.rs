//! Tiny random MDPs held in a dense layout of their own, with exhaustive
//! enumeration of deterministic policies.

use std::sync::Arc;

use mixedctrl::ccmdp::{Mdp, Policy, Stage, NO_ACTION};
use rand::Rng;

#[derive(Debug, Clone)]
pub struct TinyMdp {
    pub failure: Vec<Vec<bool>>,
    /// `actions[k][x]` lists `(cost, dense next-layer distribution)`.
    pub actions: Vec<Vec<Vec<(f64, Vec<f64>)>>>,
    pub initial: Vec<f64>,
}

fn random_dist(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    let mut w: Vec<f64> = (0..n)
        .map(|_| if rng.random_bool(0.6) { rng.random_range(0.0..1.0) } else { 0.0 })
        .collect();
    if w.iter().all(|&x| x == 0.0) {
        w[rng.random_range(0..n)] = 1.0;
    }
    let s: f64 = w.iter().sum();
    w.iter_mut().for_each(|x| *x /= s);
    // Absorb rounding into the largest entry so rows sum to one closely.
    let err = 1.0 - w.iter().sum::<f64>();
    let i = (0..n).max_by(|&i, &j| w[i].total_cmp(&w[j])).unwrap();
    w[i] += err;
    w
}

impl TinyMdp {
    /// At most `max_states` per layer, `max_actions` per state and horizon
    /// `max_t`. Instances with more than `max_policies` policies are redrawn.
    pub fn random(
        rng: &mut impl Rng,
        max_states: usize,
        max_actions: usize,
        max_t: usize,
        max_policies: usize,
    ) -> Self {
        loop {
            let t = rng.random_range(1..=max_t);
            let sizes: Vec<usize> = (0..=t).map(|_| rng.random_range(2..=max_states)).collect();
            let failure: Vec<Vec<bool>> = sizes
                .iter()
                .enumerate()
                .map(|(k, &n)| (0..n).map(|x| k > 0 && x > 0 && rng.random_bool(0.4)).collect())
                .collect();
            let actions: Vec<Vec<Vec<(f64, Vec<f64>)>>> = (0..t)
                .map(|k| {
                    (0..sizes[k])
                        .map(|x| {
                            if failure[k][x] {
                                return Vec::new();
                            }
                            (0..rng.random_range(1..=max_actions))
                                .map(|_| (rng.random_range(0.0..10.0), random_dist(rng, sizes[k + 1])))
                                .collect()
                        })
                        .collect()
                })
                .collect();
            let initial = (0..sizes[0]).map(|x| if x == 0 { 1.0 } else { 0.0 }).collect();
            let m = TinyMdp { failure, actions, initial };
            if m.policy_count() <= max_policies as f64 {
                return m;
            }
        }
    }

    pub fn horizon(&self) -> usize {
        self.actions.len()
    }

    fn policy_count(&self) -> f64 {
        self.actions.iter().flatten().filter(|a| !a.is_empty()).map(|a| a.len() as f64).product()
    }

    pub fn to_mdp(&self) -> Mdp {
        let stages = self
            .actions
            .iter()
            .enumerate()
            .map(|(k, layer)| {
                let n_next = self.failure[k + 1].len();
                let states = layer
                    .iter()
                    .map(|acts| {
                        acts.iter()
                            .map(|(c, d)| (*c, d.iter().copied().enumerate().collect()))
                            .collect()
                    })
                    .collect();
                Arc::new(Stage::from_actions(n_next, states).expect("valid tiny stage"))
            })
            .collect();
        Mdp::new(self.failure.clone(), stages, self.initial.clone(), None).expect("valid tiny mdp")
    }

    /// `(c0, c1)` of a policy given as `choice[k][x]`, by dense forward
    /// propagation.
    pub fn evaluate(&self, choice: &[Vec<usize>]) -> (f64, f64) {
        let mut failed = 0.0;
        let mut mass: Vec<f64> = self
            .initial
            .iter()
            .zip(&self.failure[0])
            .map(|(&p, &f)| {
                if f {
                    failed += p;
                    0.0
                } else {
                    p
                }
            })
            .collect();
        let mut cost = 0.0;
        for k in 0..self.horizon() {
            let mut next = vec![0.0; self.failure[k + 1].len()];
            for (x, &m) in mass.iter().enumerate() {
                if m == 0.0 {
                    continue;
                }
                let (c, dist) = &self.actions[k][x][choice[k][x]];
                cost += m * c;
                for (y, &p) in dist.iter().enumerate() {
                    if self.failure[k + 1][y] {
                        failed += m * p;
                    } else {
                        next[y] += m * p;
                    }
                }
            }
            mass = next;
        }
        (cost, failed)
    }

    /// Every deterministic policy with its `(c0, c1)`.
    pub fn all_policies(&self) -> Vec<(Vec<Vec<usize>>, (f64, f64))> {
        let slots: Vec<(usize, usize, usize)> = self
            .actions
            .iter()
            .enumerate()
            .flat_map(|(k, layer)| {
                layer.iter().enumerate().filter(|(_, a)| !a.is_empty()).map(move |(x, a)| (k, x, a.len()))
            })
            .collect();
        let mut choice: Vec<Vec<usize>> = self.actions.iter().map(|l| vec![0; l.len()]).collect();
        let mut out = Vec::new();
        loop {
            out.push((choice.clone(), self.evaluate(&choice)));
            // Odometer increment over the slots.
            let mut i = 0;
            loop {
                if i == slots.len() {
                    return out;
                }
                let (k, x, n) = slots[i];
                choice[k][x] += 1;
                if choice[k][x] < n {
                    break;
                }
                choice[k][x] = 0;
                i += 1;
            }
        }
    }

    pub fn to_policy(&self, choice: &[Vec<usize>]) -> Policy {
        Policy {
            actions: choice
                .iter()
                .enumerate()
                .map(|(k, layer)| {
                    layer
                        .iter()
                        .enumerate()
                        .map(|(x, &a)| if self.failure[k][x] { NO_ACTION } else { a as u32 })
                        .collect()
                })
                .collect(),
        }
    }
}
