use serde::{Deserialize, Serialize};

use crate::model::Dataset;
use crate::{Error, MleResult, Result, Scalar};

/// An interval `(left, right]` that can carry mass of a cause-`k` estimate;
/// `None` stands for minus or plus infinity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MassInterval<T> {
    pub left: Option<T>,
    pub right: Option<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupportSets<T> {
    /// `uniqueness_sets[k - 1]`: times where cause `k` is uniquely determined.
    pub uniqueness_sets: Vec<Vec<T>>,
    /// The survival set (index `K + 1`): survival times plus `T_(n)`.
    pub survival_set: Vec<T>,
    /// Candidate mass intervals per cause.
    pub intervals: Vec<Vec<MassInterval<T>>>,
}

/// Uniqueness sets and candidate mass intervals.
///
/// A cause-`k` observation at `T_j` closes an interval whose left end is the
/// nearest earlier time carrying a cause-`k` or survival observation, provided
/// that time has a survival. With no such earlier time the interval is
/// `(-inf, T_j]`. Mass beyond `T_(n)` is possible only when `T_(n)` carries a
/// survival.
pub fn support_sets<T: Scalar>(d: &Dataset<T>) -> SupportSets<T> {
    let groups = d.distinct();
    let t_max = d.t_max();
    let mut uniqueness_sets = Vec::with_capacity(d.k());
    let mut intervals = Vec::with_capacity(d.k());
    for k in 1..=d.k() {
        let mut set: Vec<T> = groups
            .iter()
            .filter(|g| g.counts[k] + g.counts[0] > 0)
            .map(|g| g.time)
            .collect();
        if set.last() != Some(&t_max) {
            set.push(t_max);
        }
        uniqueness_sets.push(set);

        let mut iv = Vec::new();
        let mut prev: Option<(T, bool)> = None; // (time, has survival)
        for g in groups {
            if g.counts[k] > 0 {
                match prev {
                    None => iv.push(MassInterval {
                        left: None,
                        right: Some(g.time),
                    }),
                    Some((t, true)) => iv.push(MassInterval {
                        left: Some(t),
                        right: Some(g.time),
                    }),
                    Some((_, false)) => {}
                }
            }
            if g.counts[k] + g.counts[0] > 0 {
                prev = Some((g.time, g.counts[0] > 0));
            }
        }
        if d.survival_at_max() {
            iv.push(MassInterval {
                left: Some(t_max),
                right: None,
            });
        }
        intervals.push(iv);
    }
    let mut survival_set: Vec<T> = groups
        .iter()
        .filter(|g| g.counts[0] > 0)
        .map(|g| g.time)
        .collect();
    if survival_set.last() != Some(&t_max) {
        survival_set.push(t_max);
    }
    SupportSets {
        uniqueness_sets,
        survival_set,
        intervals,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UniquenessReport<T> {
    pub unique_at: Vec<Vec<T>>,
    pub infinity_unique: bool,
}

/// Where the joint MLE is unique, and whether its mass beyond `T_(n)` is.
pub fn uniqueness_report<T: Scalar>(d: &Dataset<T>, m: &MleResult<T>) -> Result<UniquenessReport<T>> {
    if m.system.k() != d.k() {
        return Err(Error::ComponentCount {
            got: m.system.k(),
            expected: d.k(),
        });
    }
    Ok(UniquenessReport {
        unique_at: support_sets(d).uniqueness_sets,
        infinity_unique: !d.survival_at_max(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::validate_dataset;

    #[test]
    fn survival_then_failure() {
        let d = validate_dataset(&[(1.0, 0), (2.0, 1)], 2).unwrap();
        let s = support_sets(&d);
        assert_eq!(s.uniqueness_sets[0], vec![1.0, 2.0]);
        assert_eq!(
            s.intervals[0],
            vec![MassInterval {
                left: Some(1.0),
                right: Some(2.0)
            }]
        );
    }

    #[test]
    fn other_cause_only() {
        let d = validate_dataset(&[(1.0, 2)], 2).unwrap();
        let s = support_sets(&d);
        assert_eq!(s.uniqueness_sets[0], vec![1.0]);
        assert!(s.intervals[0].is_empty());
    }

    #[test]
    fn survival_at_the_end_opens_the_tail() {
        let d = validate_dataset(&[(1.0, 0)], 1).unwrap();
        let s = support_sets(&d);
        assert_eq!(
            s.intervals[0],
            vec![MassInterval {
                left: Some(1.0),
                right: None
            }]
        );
    }

    #[test]
    fn failure_without_earlier_survival_is_left_open() {
        let d = validate_dataset(&[(1.0, 1), (2.0, 0), (3.0, 1), (4.0, 1)], 1).unwrap();
        let s = support_sets(&d);
        assert_eq!(
            s.intervals[0],
            vec![
                MassInterval { left: None, right: Some(1.0) },
                MassInterval { left: Some(2.0), right: Some(3.0) },
            ]
        );
    }
}
