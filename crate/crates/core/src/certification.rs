//! Likelihoods and the Fenchel optimality certificate of the joint MLE.
//!
//! For a system `F` and cause `k` let
//!
//! ```text
//! H_k(t) = sum_{T_i >= t} [ D_k^i / F_k(T_i) - D_{K+1}^i / F_{K+1}(T_i) ] / n
//! beta   = 1 - sum_i D_{K+1}^i / F_{K+1}(T_i) / n
//! ```
//!
//! `F` maximizes the likelihood iff `H_k(t) <= beta` everywhere, with
//! equality at every point of increase of `F_k`. `H_k` is left-continuous and
//! only changes at observation times, so checking the distinct times plus one
//! point beyond `T_(n)` (where `H_k = 0`) is exhaustive.

use serde::{Deserialize, Serialize};

use crate::model::{Dataset, Jump, StepFn, SubDistSystem};
use crate::{Error, Result, Scalar};

/// Cumulative process `V_{nk}`; `k = K + 1` selects survivals.
pub fn vnk<T: Scalar>(d: &Dataset<T>, k: usize) -> Result<StepFn<T>> {
    if k == 0 || k > d.k() + 1 {
        return Err(Error::CauseOutOfRange { k, max: d.k() + 1 });
    }
    let status = if k == d.k() + 1 { 0 } else { k };
    let n = T::of_usize(d.n());
    let mut acc = 0usize;
    let mut jumps = Vec::new();
    for g in d.distinct() {
        if g.counts[status] > 0 {
            acc += g.counts[status];
            jumps.push(Jump {
                t: g.time,
                v: T::of_usize(acc) / n,
            });
        }
    }
    StepFn::new(T::zero(), jumps, T::zero())
}

/// Log likelihood `l_n(F)`, averaged over observations. Returns `-inf` when a
/// term with positive count has a nonpositive argument.
pub fn loglik<T: Scalar>(d: &Dataset<T>, f: &SubDistSystem<T>) -> T {
    let tab = Tabulated::from_system(d, f);
    loglik_values(d, &tab.values, T::one())
}

/// Cone criterion `sum_k int log F_k dV_nk - F_+(inf)` with
/// `F_{K+1} = F_+(inf) - F_+`.
pub fn cone_loglik<T: Scalar>(d: &Dataset<T>, f: &SubDistSystem<T>) -> T {
    let tab = Tabulated::from_system(d, f);
    loglik_values(d, &tab.values, tab.total) - tab.total
}

/// `sum_j [ sum_k c_kj log F_k(t_j) + c_0j log(total - F_+(t_j)) ] / n`.
pub(crate) fn loglik_values<T: Scalar>(d: &Dataset<T>, values: &[Vec<T>], total: T) -> T {
    let n = T::of_usize(d.n());
    let mut acc = T::zero();
    for (j, g) in d.distinct().iter().enumerate() {
        let mut plus = T::zero();
        for (k, vals) in values.iter().enumerate() {
            let c = g.counts[k + 1];
            plus += vals[j];
            if c > 0 {
                if !(vals[j] > T::zero()) {
                    return T::neg_infinity();
                }
                acc += T::of_usize(c) * vals[j].ln();
            }
        }
        let c0 = g.counts[0];
        if c0 > 0 {
            let s = total - plus;
            if !(s > T::zero()) {
                return T::neg_infinity();
            }
            acc += T::of_usize(c0) * s.ln();
        }
    }
    acc / n
}

/// `beta_{nF} = 1 - int dV_{n,K+1} / F_{K+1}`.
pub fn beta_stat<T: Scalar>(d: &Dataset<T>, f: &SubDistSystem<T>) -> Result<T> {
    let tab = Tabulated::from_system(d, f);
    beta_values(d, &tab)
}

pub(crate) fn beta_values<T: Scalar>(d: &Dataset<T>, tab: &Tabulated<T>) -> Result<T> {
    let n = T::of_usize(d.n());
    let mut s = T::zero();
    for (j, g) in d.distinct().iter().enumerate() {
        let c0 = g.counts[0];
        if c0 > 0 {
            let surv = tab.survival(j);
            if !(surv > T::zero()) {
                return Err(Error::ZeroDenominator {
                    process: "F_{K+1}".into(),
                    t: g.time.as_f64(),
                });
            }
            s += T::of_usize(c0) / surv;
        }
    }
    Ok(T::one() - s / n)
}

/// Per-cause summary of the optimality conditions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CauseReport<T> {
    /// `max_t (H_k(t) - beta)_+`.
    pub max_inequality_violation: T,
    /// `max |H_k(tau) - beta|` over points of increase `tau` of `F_k`.
    pub max_equality_gap: T,
    /// Location of the larger of the two; `None` means beyond `T_(n)`.
    pub worst_t: Option<T>,
    /// Largest value of the first characterization's inequality form
    /// `int_{u>=t} dV_nk/F_k + int_{u<t} dV_{n,K+1}/F_{K+1} - 1`.
    pub integral_form_max: T,
    /// `int (same expression) dF_k`, zero at the optimum.
    pub integral_form_mass: T,
}

/// Machine-checkable optimality certificate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FenchelReport<T> {
    pub beta: T,
    pub per_cause: Vec<CauseReport<T>>,
    pub passed: bool,
    pub tol: T,
}

impl<T: Scalar> FenchelReport<T> {
    /// Largest inequality violation or equality gap over all causes.
    pub fn violation(&self) -> T {
        self.per_cause
            .iter()
            .map(|c| c.max_inequality_violation.max(c.max_equality_gap))
            .fold(T::zero(), T::max)
    }

    /// Whether the integrated (first) characterization holds at `tol`.
    pub fn integral_form_passed(&self) -> bool {
        self.per_cause
            .iter()
            .all(|c| c.integral_form_max <= self.tol && c.integral_form_mass.abs() <= self.tol)
    }
}

/// Check the optimality conditions of `f` on `d` at tolerance `tol`.
pub fn fenchel_check<T: Scalar>(d: &Dataset<T>, f: &SubDistSystem<T>, tol: T) -> Result<FenchelReport<T>> {
    if f.k() != d.k() {
        return Err(Error::ComponentCount {
            got: f.k(),
            expected: d.k(),
        });
    }
    let tab = Tabulated::from_system(d, f);
    fenchel_tabulated(d, &tab, tol)
}

/// Position of a point of increase relative to the distinct times.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum IncreaseAt {
    /// Index of the first distinct time `>= tau`.
    Before(usize),
    /// Beyond `T_(n)`.
    Beyond,
}

/// A system tabulated at the distinct observation times.
#[derive(Debug, Clone)]
pub(crate) struct Tabulated<T> {
    /// `values[k][j] = F_{k+1}(t_j)`.
    pub values: Vec<Vec<T>>,
    /// `F_+(inf)`.
    pub total: T,
    pub increases: Vec<Vec<(IncreaseAt, T)>>,
    plus: Vec<T>,
}

impl<T: Scalar> Tabulated<T> {
    pub fn new(values: Vec<Vec<T>>, total: T, increases: Vec<Vec<(IncreaseAt, T)>>) -> Self {
        let m = values.first().map_or(0, |v| v.len());
        let plus = (0..m).map(|j| values.iter().map(|v| v[j]).sum()).collect();
        Self {
            values,
            total,
            increases,
            plus,
        }
    }

    pub fn from_system(d: &Dataset<T>, f: &SubDistSystem<T>) -> Self {
        let times = d.times();
        let values: Vec<Vec<T>> = f
            .components()
            .iter()
            .map(|c| times.iter().map(|&t| c.eval(t)).collect())
            .collect();
        let increases = f
            .components()
            .iter()
            .map(|c| {
                let mut inc = Vec::new();
                if c.baseline() > T::zero() {
                    inc.push((IncreaseAt::Before(0), c.baseline()));
                }
                for (t, dv) in c.increments() {
                    if dv > T::zero() {
                        let idx = times.partition_point(|&s| s < t);
                        let at = if idx == times.len() {
                            IncreaseAt::Beyond
                        } else {
                            IncreaseAt::Before(idx)
                        };
                        inc.push((at, dv));
                    }
                }
                if c.tail_mass() > T::zero() {
                    inc.push((IncreaseAt::Beyond, c.tail_mass()));
                }
                inc
            })
            .collect();
        Self::new(values, f.total_mass(), increases)
    }

    pub fn survival(&self, j: usize) -> T {
        self.total - self.plus[j]
    }
}

pub(crate) fn fenchel_tabulated<T: Scalar>(d: &Dataset<T>, tab: &Tabulated<T>, tol: T) -> Result<FenchelReport<T>> {
    let groups = d.distinct();
    let m = groups.len();
    let n = T::of_usize(d.n());
    let beta = beta_values(d, tab)?;

    // survival contributions dV_{K+1}/F_{K+1} at each distinct time
    let surv_terms: Vec<T> = groups
        .iter()
        .enumerate()
        .map(|(j, g)| {
            if g.counts[0] > 0 {
                T::of_usize(g.counts[0]) / tab.survival(j) / n
            } else {
                T::zero()
            }
        })
        .collect();

    let mut per_cause = Vec::with_capacity(d.k());
    for (k, vals) in tab.values.iter().enumerate() {
        let mut cause_terms = vec![T::zero(); m];
        for (j, g) in groups.iter().enumerate() {
            let c = g.counts[k + 1];
            if c > 0 {
                if !(vals[j] > T::zero()) {
                    return Err(Error::ZeroDenominator {
                        process: format!("F_{}", k + 1),
                        t: g.time.as_f64(),
                    });
                }
                cause_terms[j] = T::of_usize(c) / vals[j] / n;
            }
        }
        // h[j] = H_k(t_j); h[m] = H_k(T_(n)+) = 0
        let mut h = vec![T::zero(); m + 1];
        for j in (0..m).rev() {
            h[j] = h[j + 1] + cause_terms[j] - surv_terms[j];
        }
        // first characterization: suffix of cause terms plus prefix of survival terms
        let mut integral_form = vec![T::zero(); m + 1];
        let mut suffix = vec![T::zero(); m + 1];
        for j in (0..m).rev() {
            suffix[j] = suffix[j + 1] + cause_terms[j];
        }
        let mut prefix = T::zero();
        for j in 0..=m {
            integral_form[j] = suffix[j] + prefix - T::one();
            if j < m {
                prefix += surv_terms[j];
            }
        }

        let mut worst = (T::zero(), None);
        let mut max_ineq = T::zero();
        for (j, &hj) in h.iter().enumerate() {
            let v = (hj - beta).max(T::zero());
            if v > max_ineq {
                max_ineq = v;
                if v > worst.0 {
                    worst = (v, (j < m).then(|| groups[j].time));
                }
            }
        }
        let mut max_gap = T::zero();
        let mut mass = T::zero();
        for &(at, dv) in &tab.increases[k] {
            let idx = match at {
                IncreaseAt::Before(j) => j,
                IncreaseAt::Beyond => m,
            };
            let gap = (h[idx] - beta).abs();
            if gap > max_gap {
                max_gap = gap;
                if gap > worst.0 {
                    worst = (gap, (idx < m).then(|| groups[idx].time));
                }
            }
            mass += integral_form[idx] * dv;
        }
        let integral_form_max = integral_form.iter().copied().fold(T::neg_infinity(), T::max);
        per_cause.push(CauseReport {
            max_inequality_violation: max_ineq,
            max_equality_gap: max_gap,
            worst_t: worst.1,
            integral_form_max,
            integral_form_mass: mass,
        });
    }
    let passed = per_cause
        .iter()
        .all(|c| c.max_inequality_violation <= tol && c.max_equality_gap <= tol);
    Ok(FenchelReport {
        beta,
        per_cause,
        passed,
        tol,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::validate_dataset;

    fn step(points: &[(f64, f64)], tail: f64) -> StepFn<f64> {
        StepFn::new(
            0.0,
            points.iter().map(|&(t, v)| Jump { t, v }).collect(),
            tail,
        )
        .unwrap()
    }

    #[test]
    fn counting_processes() {
        let d = validate_dataset(&[(1.0, 1), (2.0, 0)], 1).unwrap();
        let v1 = vnk(&d, 1).unwrap();
        assert_eq!(v1.eval(1.5), 0.5);
        let v2 = vnk(&d, 2).unwrap();
        assert_eq!(v2.eval(1.5), 0.0);
        assert_eq!(v2.eval(2.0), 0.5);
        assert_eq!(v1.eval(f64::NEG_INFINITY), 0.0);
        assert_eq!(v2.eval(f64::NEG_INFINITY), 0.0);
        assert!(matches!(vnk(&d, 3), Err(Error::CauseOutOfRange { k: 3, max: 2 })));
        assert!(vnk(&d, 0).is_err());
    }

    #[test]
    fn loglik_edge_values() {
        let d = validate_dataset(&[(1.0, 1)], 1).unwrap();
        let one = SubDistSystem::new(vec![step(&[(1.0, 1.0)], 0.0)]).unwrap();
        assert_eq!(loglik(&d, &one), 0.0);
        let zero = SubDistSystem::new(vec![StepFn::zero()]).unwrap();
        assert_eq!(loglik(&d, &zero), f64::NEG_INFINITY);
    }

    #[test]
    fn cone_criterion_offsets_by_total_mass() {
        let d = validate_dataset(&[(1.0, 1), (2.0, 0), (3.0, 2)], 2).unwrap();
        let f = SubDistSystem::new(vec![step(&[(1.0, 0.3)], 0.2), step(&[(3.0, 0.4)], 0.1)]).unwrap();
        assert!((f.total_mass() - 1.0).abs() < 1e-15);
        assert!((cone_loglik(&d, &f) - (loglik(&d, &f) - 1.0)).abs() < 1e-14);
    }

    #[test]
    fn beta_without_survivals_is_one() {
        let d = validate_dataset(&[(1.0, 1), (2.0, 1)], 1).unwrap();
        let f = SubDistSystem::new(vec![step(&[(1.0, 1.0)], 0.0)]).unwrap();
        assert_eq!(beta_stat(&d, &f).unwrap(), 1.0);
    }

    #[test]
    fn beta_for_survival_then_failure() {
        // optimum: F_+(1) = 0 and F_1(2) = 1
        let d = validate_dataset(&[(1.0, 0), (2.0, 1)], 1).unwrap();
        let f = SubDistSystem::new(vec![step(&[(2.0, 1.0)], 0.0)]).unwrap();
        assert!((beta_stat(&d, &f).unwrap() - 0.5).abs() < 1e-15);
        let r = fenchel_check(&d, &f, 1e-8).unwrap();
        assert!(r.passed, "{r:?}");
    }

    #[test]
    fn zero_denominator_is_an_error() {
        let d = validate_dataset(&[(1.0, 0)], 1).unwrap();
        let f = SubDistSystem::new(vec![step(&[(0.5, 1.0)], 0.0)]).unwrap();
        assert!(matches!(beta_stat(&d, &f), Err(Error::ZeroDenominator { .. })));
        assert!(fenchel_check(&d, &f, 1e-8).is_err());
    }

    #[test]
    fn single_failure_certificate() {
        let d = validate_dataset(&[(1.0, 1)], 1).unwrap();
        let f = SubDistSystem::new(vec![step(&[(1.0, 1.0)], 0.0)]).unwrap();
        let r = fenchel_check(&d, &f, 1e-8).unwrap();
        assert_eq!(r.beta, 1.0);
        assert_eq!(r.per_cause[0].max_equality_gap, 0.0);
        assert!(r.passed);
        assert!(r.integral_form_passed());
    }

    #[test]
    fn tail_mass_needs_zero_beta() {
        // survival at T_(n): optimum F_1(1) = 1/2 with the other half beyond 2
        let d = validate_dataset(&[(1.0, 1), (2.0, 0)], 1).unwrap();
        let f = SubDistSystem::new(vec![step(&[(1.0, 0.5)], 0.5)]).unwrap();
        let r = fenchel_check(&d, &f, 1e-12).unwrap();
        assert!(r.beta.abs() < 1e-15);
        assert!(r.passed, "{r:?}");
        let g = SubDistSystem::new(vec![step(&[(1.0, 0.6)], 0.4)]).unwrap();
        assert!(!fenchel_check(&d, &g, 1e-8).unwrap().passed);
    }

    #[test]
    fn wrong_component_count() {
        let d = validate_dataset(&[(1.0, 1)], 2).unwrap();
        let f = SubDistSystem::new(vec![step(&[(1.0, 1.0)], 0.0)]).unwrap();
        assert!(matches!(fenchel_check(&d, &f, 1e-8), Err(Error::ComponentCount { .. })));
    }
}
