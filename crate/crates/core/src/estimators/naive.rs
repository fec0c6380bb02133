use serde::{Deserialize, Serialize};

use crate::isotonic::{gcm_left_slopes, CumSumDiagram};
use crate::model::{Dataset, StepFn, SubDistSystem};
use crate::Scalar;

/// K separate current status estimates, one per reduced indicator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct NaiveResult<T> {
    pub components: Vec<StepFn<T>>,
    /// Distinct times where the summed estimate exceeds one.
    pub sum_violations: Vec<(T, T)>,
}

impl<T: Scalar> NaiveResult<T> {
    /// The components as an element of the cone (the sum may exceed one).
    pub fn as_system(&self) -> SubDistSystem<T> {
        SubDistSystem::cone(self.components.clone()).expect("at least one cause")
    }
}

/// Naive estimator: for each cause, the slopes of the greatest convex minorant
/// of the diagram with weights = counts and responses = fraction of cause `k`.
pub fn naive_estimate<T: Scalar>(d: &Dataset<T>) -> NaiveResult<T> {
    let times = d.times();
    let weights: Vec<T> = d.distinct().iter().map(|g| T::of_usize(g.total())).collect();
    let mut values = Vec::with_capacity(d.k());
    for k in 1..=d.k() {
        let responses: Vec<T> = d
            .distinct()
            .iter()
            .map(|g| T::of_usize(g.counts[k]) / T::of_usize(g.total()))
            .collect();
        let diagram = CumSumDiagram::from_weighted(&responses, &weights).expect("positive counts");
        let v: Vec<T> = gcm_left_slopes(&diagram)
            .into_iter()
            .map(|s| s.max(T::zero()).min(T::one()))
            .collect();
        values.push(v);
    }
    let slack = T::epsilon() * T::of_usize(4 * d.k());
    let sum_violations = times
        .iter()
        .enumerate()
        .filter_map(|(j, &t)| {
            let s: T = values.iter().map(|v| v[j]).sum();
            (s > T::one() + slack).then_some((t, s))
        })
        .collect();
    let components = values
        .iter()
        .map(|v| StepFn::from_values(&times, v, T::zero()).expect("isotonic output"))
        .collect();
    NaiveResult {
        components,
        sum_violations,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::validate_dataset;

    #[test]
    fn all_survivals_give_zero() {
        let d = validate_dataset(&[(1.0, 0), (2.0, 0), (3.0, 0)], 2).unwrap();
        let r = naive_estimate(&d);
        for c in &r.components {
            assert_eq!(c.eval(f64::INFINITY), 0.0);
        }
        assert!(r.sum_violations.is_empty());
    }

    #[test]
    fn two_causes_violate_the_sum() {
        let d = validate_dataset(&[(1.0, 1), (2.0, 2)], 2).unwrap();
        let r = naive_estimate(&d);
        let f1 = &r.components[0];
        let f2 = &r.components[1];
        assert_eq!(f1.eval(1.0), 0.5);
        assert_eq!(f1.eval(2.0), 0.5);
        assert_eq!(f2.eval(1.0), 0.0);
        assert_eq!(f2.eval(2.0), 1.0);
        assert_eq!(r.sum_violations, vec![(2.0, 1.5)]);
    }

    #[test]
    fn single_cause_pools_middle_block() {
        let d = validate_dataset(&[(1.0f64, 1), (2.0, 0), (3.0, 0), (4.0, 1)], 1).unwrap();
        let r = naive_estimate(&d);
        let third = 1.0 / 3.0;
        for (t, want) in [(1.0, third), (2.0, third), (3.0, third), (4.0, 1.0)] {
            assert!((r.components[0].eval(t) - want).abs() < 1e-15);
        }
    }
}
