use crate::cost::{lagrangian_value, Bounds, CostVector, DualVector, LagrangianOracle, PureCandidate};
use crate::error::{Error, Result};

/// Oracle over an explicit list of achievable cost vectors. Policies are
/// indices into the list.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteSetOracle {
    pub points: Vec<CostVector>,
    pub bounds: Bounds,
}

impl FiniteSetOracle {
    pub fn new(points: Vec<CostVector>, bounds: Bounds) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidInput("finite set must be nonempty".into()));
        }
        for p in &points {
            if p.k() != bounds.k() {
                return Err(Error::DimensionMismatch { expected: bounds.k(), found: p.k() });
            }
        }
        Ok(Self { points, bounds })
    }
}

impl LagrangianOracle for FiniteSetOracle {
    type Policy = usize;

    fn k_constraints(&self) -> usize {
        self.bounds.k()
    }

    /// Lowest index wins ties.
    fn query(&self, lambda: &DualVector) -> Result<PureCandidate<usize>> {
        let mut best = (0, f64::INFINITY);
        for (i, p) in self.points.iter().enumerate() {
            let l = lagrangian_value(p, lambda, &self.bounds)?;
            if l < best.1 {
                best = (i, l);
            }
        }
        Ok(PureCandidate::new(best.0, self.points[best.0].clone()))
    }

    fn evaluate(&self, policy: &usize) -> Result<CostVector> {
        self.points
            .get(*policy)
            .cloned()
            .ok_or_else(|| Error::InvalidPolicy(format!("index {policy} out of range")))
    }
}

/// Two-point example: a safe expensive option and a cheap risky one.
pub fn toy_oracle() -> FiniteSetOracle {
    FiniteSetOracle::new(
        vec![CostVector::scalar(20.0, 0.005), CostVector::scalar(10.0, 0.015)],
        Bounds::scalar(0.01),
    )
    .expect("valid toy set")
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn toy_queries() {
        let o = toy_oracle();
        assert_eq!(o.query(&DualVector::scalar(0.0)).unwrap().cost, CostVector::scalar(10.0, 0.015));
        assert_eq!(o.query(&DualVector::scalar(2000.0)).unwrap().cost, CostVector::scalar(20.0, 0.005));
        // Exact tie at λ = 1000 goes to the lower index.
        assert_eq!(o.query(&DualVector::scalar(1000.0)).unwrap().policy, 0);
    }

    #[test]
    fn rejects_bad_sets() {
        assert!(FiniteSetOracle::new(vec![], Bounds::scalar(0.1)).is_err());
        let two = CostVector::new(1.0, vec![0.0, 0.0]).unwrap();
        assert!(matches!(
            FiniteSetOracle::new(vec![two], Bounds::scalar(0.1)),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(toy_oracle().evaluate(&5).is_err());
    }

    proptest! {
        #[test]
        fn query_is_exhaustive_minimum(
            pts in prop::collection::vec((0.0f64..100.0, 0.0f64..1.0), 1..10),
            lambda in 0.0f64..1e4,
        ) {
            let o = FiniteSetOracle::new(
                pts.iter().map(|&(a, b)| CostVector::scalar(a, b)).collect(),
                Bounds::scalar(0.1),
            ).unwrap();
            let got = o.query(&DualVector::scalar(lambda)).unwrap();
            let values: Vec<f64> = pts.iter().map(|&(a, b)| a + lambda * (b - 0.1)).collect();
            let min = values.iter().copied().fold(f64::INFINITY, f64::min);
            let first = values.iter().position(|&x| x == min).unwrap();
            prop_assert_eq!(got.policy, first);
        }
    }
}
