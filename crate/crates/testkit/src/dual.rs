//! Brute-force dual and primal optima over explicit finite cost sets with a
//! single constraint, given as `(c0, c1)` pairs.

/// `min_j c0_j + λ (c1_j − v)`.
pub fn dual_value(points: &[(f64, f64)], v: f64, lambda: f64) -> f64 {
    points.iter().map(|&(a, b)| a + lambda * (b - v)).fold(f64::INFINITY, f64::min)
}

/// Exact maximizer of the dual. The dual is piecewise linear and concave,
/// so its maximum sits at zero or at a crossing of two lines. Returns `None`
/// when every point violates the bound (the dual is unbounded).
pub fn exact_dual(points: &[(f64, f64)], v: f64) -> Option<(f64, f64)> {
    if points.iter().all(|&(_, b)| b > v) {
        return None;
    }
    let mut candidates = vec![0.0];
    for (i, &(a1, b1)) in points.iter().enumerate() {
        for &(a2, b2) in &points[i + 1..] {
            if b1 != b2 {
                let l = (a2 - a1) / (b1 - b2);
                if l > 0.0 {
                    candidates.push(l);
                }
            }
        }
    }
    candidates
        .into_iter()
        .map(|l| (l, dual_value(points, v, l)))
        .max_by(|x, y| x.1.total_cmp(&y.1).then(y.0.total_cmp(&x.0)))
}

/// Dual maximum over `n + 1` evenly spaced multipliers in `[0, lambda_max]`.
pub fn grid_dual(points: &[(f64, f64)], v: f64, lambda_max: f64, n: usize) -> (f64, f64) {
    (0..=n)
        .map(|i| lambda_max * i as f64 / n as f64)
        .map(|l| (l, dual_value(points, v, l)))
        .fold((0.0, f64::NEG_INFINITY), |best, x| if x.1 > best.1 { x } else { best })
}

/// Cheapest single point meeting the bound.
pub fn pure_optimum(points: &[(f64, f64)], v: f64) -> Option<f64> {
    points.iter().filter(|p| p.1 <= v).map(|p| p.0).fold(None, |m, c| {
        Some(m.map_or(c, |m: f64| m.min(c)))
    })
}

/// Cheapest mixture meeting the bound. With one constraint an optimal
/// mixture needs at most two points, so pairs suffice.
pub fn mixed_optimum(points: &[(f64, f64)], v: f64) -> Option<f64> {
    let mut best = pure_optimum(points, v);
    for &(a1, b1) in points {
        for &(a2, b2) in points {
            if b1 > v && b2 < v {
                let p = (v - b2) / (b1 - b2);
                let c = p * a1 + (1.0 - p) * a2;
                best = Some(best.map_or(c, |m| m.min(c)));
            }
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toy_and_three_point() {
        let toy = [(20.0, 0.005), (10.0, 0.015)];
        let (l, q) = exact_dual(&toy, 0.01).unwrap();
        assert!((l - 1000.0).abs() < 1e-9 && (q - 15.0).abs() < 1e-12);
        assert_eq!(mixed_optimum(&toy, 0.01), Some(15.0));
        assert_eq!(pure_optimum(&toy, 0.01), Some(20.0));

        let three = [(3.0, 0.04), (6.0, 0.02), (12.0, 0.0)];
        let (l, q) = exact_dual(&three, 0.01).unwrap();
        assert!((l - 300.0).abs() < 1e-9 && (q - 9.0).abs() < 1e-12);
        let (gl, gq) = grid_dual(&three, 0.01, 2000.0, 200_000);
        assert!((gl - 300.0).abs() < 0.02 && (gq - 9.0).abs() < 1e-4);
    }
}
