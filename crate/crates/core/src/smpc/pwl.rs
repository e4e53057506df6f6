use crate::error::{Error, Result};

/// Standard normal CDF.
pub fn phi(y: f64) -> f64 {
    0.5 * libm::erfc(-y * std::f64::consts::FRAC_1_SQRT_2)
}

/// Convex piecewise-linear over-approximation of the standard normal CDF on
/// `y ≤ 0`, built from chords between breakpoints.
///
/// Evaluation is `max(0, max_l a_l y + b_l)`. Inside the breakpoint range this
/// never underestimates the CDF. Below the first breakpoint it may, by at
/// most the CDF value at that breakpoint.
#[derive(Debug, Clone, PartialEq)]
pub struct PwlCdf {
    breakpoints: Vec<f64>,
    lines: Vec<(f64, f64)>,
}

impl PwlCdf {
    pub fn new(breakpoints: Vec<f64>) -> Result<Self> {
        if breakpoints.len() < 2 {
            return Err(Error::InvalidInput("need at least two breakpoints".into()));
        }
        if breakpoints.iter().any(|y| !y.is_finite() || *y > 0.0) {
            return Err(Error::InvalidInput("breakpoints must be finite and <= 0".into()));
        }
        if breakpoints.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidInput("breakpoints must be strictly increasing".into()));
        }
        let lines = breakpoints
            .windows(2)
            .map(|w| {
                let (f0, f1) = (phi(w[0]), phi(w[1]));
                let a = (f1 - f0) / (w[1] - w[0]);
                (a, f0 - a * w[0])
            })
            .collect();
        Ok(Self { breakpoints, lines })
    }

    /// `segments` uniform pieces on `[lo, 0]`.
    pub fn uniform(lo: f64, segments: usize) -> Result<Self> {
        if segments == 0 || !(lo < 0.0) {
            return Err(Error::InvalidInput("need lo < 0 and at least one segment".into()));
        }
        let h = -lo / segments as f64;
        let mut ys: Vec<f64> = (0..segments).map(|i| lo + i as f64 * h).collect();
        ys.push(0.0);
        Self::new(ys)
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    /// `(a_l, b_l)` for each chord.
    pub fn lines(&self) -> &[(f64, f64)] {
        &self.lines
    }

    pub fn eval(&self, y: f64) -> f64 {
        self.lines.iter().map(|(a, b)| a * y + b).fold(0.0, f64::max)
    }

    /// Largest relative overestimate `(pwl − Φ)/Φ` over `samples` uniform
    /// points of the breakpoint range.
    pub fn max_relative_error(&self, samples: usize) -> f64 {
        let lo = self.breakpoints[0];
        let hi = *self.breakpoints.last().unwrap();
        (0..samples)
            .map(|i| {
                let y = lo + (hi - lo) * i as f64 / (samples.max(2) - 1) as f64;
                (self.eval(y) - phi(y)) / phi(y)
            })
            .fold(0.0, f64::max)
    }
}

impl Default for PwlCdf {
    /// 24 uniform segments on `[−6, 0]`.
    fn default() -> Self {
        Self::uniform(-6.0, 24).expect("valid default grid")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    // Reference values from a 40-digit evaluation of the normal CDF.
    const REF: [(f64, f64); 9] = [
        (-6.0, 9.865876450376981407e-10),
        (-5.0, 2.8665157187919391167e-7),
        (-4.0, 3.1671241833119921254e-5),
        (-3.0, 1.3498980316300945267e-3),
        (-2.5, 6.209665325776135167e-3),
        (-2.0, 2.27501319481792072e-2),
        (-1.0, 1.5865525393145705141e-1),
        (-0.5, 3.0853753872598689636e-1),
        (0.0, 0.5),
    ];

    #[test]
    fn phi_matches_reference() {
        for (y, p) in REF {
            assert!(((phi(y) - p) / p).abs() < 1e-12, "{y}: {} vs {p}", phi(y));
        }
    }

    #[test]
    fn two_point_chord() {
        let c = PwlCdf::new(vec![-3.0, -2.0]).unwrap();
        let (a, _) = c.lines()[0];
        assert!((a - 0.021400233916549112674).abs() < 1e-14);
        let v = c.eval(-2.5);
        assert!((v - 0.012050014989904650863).abs() < 1e-14);
        assert!(v >= phi(-2.5));
    }

    #[test]
    fn exact_at_breakpoints() {
        let c = PwlCdf::default();
        assert_eq!(c.lines().len(), 24);
        for &y in c.breakpoints() {
            assert!((c.eval(y) - phi(y)).abs() < 1e-12, "{y}");
        }
        assert!(c.lines().iter().all(|(a, _)| *a > 0.0));
    }

    #[test]
    fn default_grid_is_conservative_on_dense_sweep() {
        let c = PwlCdf::default();
        for i in 0..10_000 {
            let y = -6.0 + 6.0 * i as f64 / 9_999.0;
            assert!(c.eval(y) >= phi(y) - 1e-15, "{y}");
        }
        let rel = c.max_relative_error(10_000);
        assert!(rel > 0.0 && rel < 1.0, "{rel}");
    }

    #[test]
    fn floor_below_range_is_small() {
        let c = PwlCdf::default();
        for y in [-6.5, -8.0, -50.0] {
            assert!(c.eval(y) >= 0.0);
            assert!(phi(y) - c.eval(y) <= phi(-6.0));
        }
    }

    #[test]
    fn rejects_bad_breakpoints() {
        assert!(PwlCdf::new(vec![-1.0, -2.0]).is_err());
        assert!(PwlCdf::new(vec![-1.0, 0.5]).is_err());
        assert!(PwlCdf::new(vec![-1.0]).is_err());
        assert!(PwlCdf::new(vec![-1.0, -1.0]).is_err());
    }
}
