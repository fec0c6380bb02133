//! Joint nonparametric MLE.
//!
//! Both solvers maximize the cone criterion
//! `sum_k int log F_k dV_nk + int log F_{K+1} dV_{n,K+1} - F_+(inf)` over
//! nonnegative nondecreasing tuples, whose maximizer is the constrained MLE
//! with `F_+(inf) = 1`. Only values at the distinct observation times and the
//! total mass enter the criterion.
//!
//! * [`MleAlgorithm::BlockIcm`] cycles over causes; for cause `k` it takes an
//!   iterative-convex-minorant step on the values at the uniqueness set plus
//!   the value at infinity (a diagonal quadratic model solved by weighted
//!   isotonic regression with lower bound 0), followed by an Armijo line
//!   search with an interior guard.
//! * [`MleAlgorithm::ActiveSet`] parametrizes each `F_k` by point masses at the
//!   cause-`k` observation times plus one common mass beyond `T_(n)`, and runs
//!   support reduction: Newton steps on the active masses, dropping masses that
//!   hit zero and adding the time with the largest positive directional
//!   derivative. The directional derivative of the criterion in the direction
//!   `1[t, inf)` for cause `k` is exactly `H_k(t) - beta`, so the stopping rule
//!   is the Fenchel certificate itself.
//!
//! The default runs the active-set solver from the rescaled naive estimator
//! and falls back to block ICM (retrying the active-set solver from the ICM
//! iterate) if it stalls.

use serde::{Deserialize, Serialize};

use crate::certification::{fenchel_check, fenchel_tabulated, loglik_values, FenchelReport, IncreaseAt, Tabulated};
use crate::error::BestIterate;
use crate::estimators::naive::naive_estimate;
use crate::isotonic::weighted_isotonic;
use crate::model::{Dataset, StepFn, SubDistSystem};
use crate::{Error, Result, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum MleAlgorithm {
    /// Active-set Newton with block ICM as fallback.
    #[default]
    ActiveSet,
    /// Block-coordinate ICM only.
    BlockIcm,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MleOptions<T> {
    pub fenchel_tol: T,
    pub max_iters: usize,
    pub interior_guard: T,
    pub algorithm: MleAlgorithm,
}

impl<T: Scalar> Default for MleOptions<T> {
    fn default() -> Self {
        Self {
            fenchel_tol: T::of(1e-8),
            max_iters: 10_000,
            interior_guard: T::of(1e-10),
            algorithm: MleAlgorithm::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct MleResult<T> {
    pub system: SubDistSystem<T>,
    /// `1 - F_+(T_(n))`.
    pub tail_mass_total: T,
    /// False when a survival sits at `T_(n)`: the split of the tail mass over
    /// causes is then arbitrary and the reported split is a convention.
    pub tail_unique: bool,
    pub loglik: T,
    pub certificate: FenchelReport<T>,
    pub iterations: usize,
}

/// Compute the joint MLE and certify it.
pub fn mle_estimate<T: Scalar>(d: &Dataset<T>, opts: &MleOptions<T>) -> Result<MleResult<T>> {
    let p = Problem::new(d);
    let mut iterations = 0usize;
    let mut best: Option<BestIterate> = None;
    let remember = |values: &[Vec<T>], tail: T, violation: T, best: &mut Option<BestIterate>| {
        let v = violation.as_f64();
        if best.as_ref().is_none_or(|b| v < b.fenchel_violation) {
            let total: T = values.iter().map(|x| x[p.m - 1]).sum::<T>() + tail;
            *best = Some(BestIterate {
                values: values
                    .iter()
                    .map(|x| x.iter().map(|v| v.as_f64()).collect())
                    .collect(),
                total_mass: total.as_f64(),
                fenchel_violation: v,
            });
        }
    };

    if opts.algorithm == MleAlgorithm::ActiveSet {
        let start = p.naive_masses();
        let out = p.support_reduction(start, opts.max_iters);
        iterations += out.iterations;
        let (values, tail) = p.values_from_masses(&out.masses);
        if out.converged {
            let res = p.finish(values.clone(), tail, iterations, opts.fenchel_tol)?;
            if res.certificate.passed {
                return Ok(res);
            }
            remember(&values, tail, res.certificate.violation(), &mut best);
        }
    }

    let mut st = p.initial_state(opts.interior_guard);
    let mut next_polish = 5usize;
    let mut sweeps = 0usize;
    loop {
        if iterations >= opts.max_iters {
            return Err(Error::NonConvergence {
                iterations,
                best: Box::new(best.unwrap_or_else(|| BestIterate {
                    values: Vec::new(),
                    total_mass: f64::NAN,
                    fenchel_violation: f64::INFINITY,
                })),
            });
        }
        for k in 0..p.k {
            p.icm_block(&mut st, k, opts.interior_guard);
        }
        sweeps += 1;
        iterations += 1;
        let report = fenchel_tabulated(d, &p.tabulate_state(&st), opts.fenchel_tol)?;
        remember(&st.x, st.tail, report.violation(), &mut best);
        let certified = report.passed;
        let polish = opts.algorithm == MleAlgorithm::ActiveSet && (certified || sweeps >= next_polish);
        if polish {
            next_polish = sweeps * 2;
            let out = p.support_reduction(p.masses_from_state(&st), opts.max_iters.saturating_sub(iterations));
            iterations += out.iterations;
            if out.converged {
                let (values, tail) = p.values_from_masses(&out.masses);
                let res = p.finish(values, tail, iterations, opts.fenchel_tol)?;
                if res.certificate.passed {
                    return Ok(res);
                }
            }
        }
        if certified {
            let res = p.finish(st.x.clone(), st.tail, iterations, opts.fenchel_tol)?;
            if res.certificate.passed {
                return Ok(res);
            }
        }
    }
}

/// ICM iterate: `x[k][j] = F_{k+1}(t_j)` and the mass beyond `T_(n)`.
#[derive(Debug, Clone)]
struct State<T> {
    x: Vec<Vec<T>>,
    tail: T,
}

/// Point masses at cause-`k` observation times (aligned with `cause_pts[k]`)
/// and the common mass beyond `T_(n)`.
#[derive(Debug, Clone)]
struct Masses<T> {
    alpha: Vec<Vec<T>>,
    tau: T,
}

struct SrOutcome<T> {
    masses: Masses<T>,
    iterations: usize,
    converged: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Var {
    Cause(usize, usize),
    Tail,
}

/// Derivative tables at a given iterate.
struct Derivs<T> {
    /// `grad_suffix[k][j] = sum_{u >= j} v_k(u) / F_k(u)`.
    grad_suffix: Vec<Vec<T>>,
    /// `curv_suffix[k][j] = sum_{u >= j} v_k(u) / F_k(u)^2`.
    curv_suffix: Vec<Vec<T>>,
    /// `grad_prefix[j] = sum_{u < j} v_0(u) / F_{K+1}(u)`, `j = 0..=m`.
    grad_prefix: Vec<T>,
    curv_prefix: Vec<T>,
}

struct Problem<'a, T> {
    d: &'a Dataset<T>,
    m: usize,
    k: usize,
    /// `vk[k][j]`: cause-`k+1` count at `t_j` over `n`.
    vk: Vec<Vec<T>>,
    v0: Vec<T>,
    cause_pts: Vec<Vec<usize>>,
    /// Uniqueness sets as indices into the distinct times.
    tk: Vec<Vec<usize>>,
    has_survival: bool,
}

const SR_MAX_NEWTON: usize = 200;

impl<'a, T: Scalar> Problem<'a, T> {
    fn new(d: &'a Dataset<T>) -> Self {
        let groups = d.distinct();
        let m = groups.len();
        let k = d.k();
        let n = T::of_usize(d.n());
        let vk = (1..=k)
            .map(|c| groups.iter().map(|g| T::of_usize(g.counts[c]) / n).collect())
            .collect();
        let v0: Vec<T> = groups.iter().map(|g| T::of_usize(g.counts[0]) / n).collect();
        let cause_pts = (1..=k)
            .map(|c| (0..m).filter(|&j| groups[j].counts[c] > 0).collect())
            .collect();
        let tk = (1..=k)
            .map(|c| {
                (0..m)
                    .filter(|&j| groups[j].counts[c] + groups[j].counts[0] > 0 || j == m - 1)
                    .collect()
            })
            .collect();
        let has_survival = v0.iter().any(|&v| v > T::zero());
        Self {
            d,
            m,
            k,
            vk,
            v0,
            cause_pts,
            tk,
            has_survival,
        }
    }

    fn criterion(&self, x: &[Vec<T>], total: T) -> T {
        loglik_values(self.d, x, total) - total
    }

    // ---------------------------------------------------------------- ICM

    /// Rescaled naive estimator floored at the guard on the uniqueness sets,
    /// with the remaining mass placed beyond `T_(n)`.
    fn initial_state(&self, guard: T) -> State<T> {
        let naive = naive_estimate(self.d);
        let times = self.d.times();
        let max_plus = times
            .iter()
            .map(|&t| naive.components.iter().map(|c| c.eval(t)).sum::<T>())
            .fold(T::one(), T::max);
        let scale = (T::one() - T::of(1e-6)) / max_plus;
        let mut x = vec![vec![T::zero(); self.m]; self.k];
        for k in 0..self.k {
            if self.cause_pts[k].is_empty() {
                continue;
            }
            let comp = &naive.components[k];
            for &j in &self.tk[k] {
                x[k][j] = (comp.eval(times[j]) * scale).max(guard);
            }
            self.fill_between(&mut x[k], k);
        }
        let tail = if self.has_survival {
            (T::one() - x.iter().map(|r| r[self.m - 1]).sum::<T>()).max(T::zero())
        } else {
            T::zero()
        };
        State { x, tail }
    }

    /// Piecewise-constant fill: values off the uniqueness set copy the
    /// previous value on it (zero before the first point).
    fn fill_between(&self, row: &mut [T], k: usize) {
        let mut cur = T::zero();
        let mut it = self.tk[k].iter().peekable();
        for (j, v) in row.iter_mut().enumerate() {
            if it.peek() == Some(&&j) {
                cur = *v;
                it.next();
            } else {
                *v = cur;
            }
        }
    }

    fn state_total(&self, st: &State<T>) -> T {
        st.x.iter().map(|r| r[self.m - 1]).sum::<T>() + st.tail
    }

    /// One ICM step with line search on the block of cause `k`.
    fn icm_block(&self, st: &mut State<T>, k: usize, guard: T) {
        let pts = &self.tk[k];
        if self.cause_pts[k].is_empty() {
            return;
        }
        let p = pts.len();
        let m = self.m;
        let has_z = self.has_survival;
        let nv = p + usize::from(has_z);
        let mut y: Vec<T> = pts.iter().map(|&j| st.x[k][j]).collect();
        if has_z {
            y.push(st.x[k][m - 1] + st.tail);
        }
        let others_total: T = (0..self.k).filter(|&l| l != k).map(|l| st.x[l][m - 1]).sum();
        let rest: Vec<T> = pts
            .iter()
            .map(|&j| {
                others_total
                    - (0..self.k)
                        .filter(|&l| l != k)
                        .map(|l| st.x[l][j])
                        .sum::<T>()
            })
            .collect();

        let mut g = vec![T::zero(); nv];
        let mut w = vec![T::zero(); nv];
        for (i, &j) in pts.iter().enumerate() {
            let c = self.vk[k][j];
            if c > T::zero() {
                g[i] += c / y[i];
                w[i] += c / (y[i] * y[i]);
            }
            let c0 = self.v0[j];
            if c0 > T::zero() {
                let s = rest[i] + y[p] - y[i];
                g[i] -= c0 / s;
                w[i] += c0 / (s * s);
                g[p] += c0 / s;
                w[p] += c0 / (s * s);
            }
        }
        // derivative of -F_+(inf)
        g[nv - 1] -= T::one();
        let w_max = w.iter().copied().fold(T::zero(), T::max);
        let floor = if w_max > T::zero() { w_max * T::of(1e-8) } else { T::one() };
        for wi in w.iter_mut() {
            *wi = wi.max(floor);
        }
        let target: Vec<T> = (0..nv).map(|i| y[i] + g[i] / w[i]).collect();
        let lower = vec![T::zero(); nv];
        let proposal = weighted_isotonic(&target, &w, Some(&lower), None).expect("feasible lower bound");
        let dir: Vec<T> = proposal.iter().zip(&y).map(|(a, b)| *a - *b).collect();
        let slope: T = g.iter().zip(&dir).map(|(a, b)| *a * *b).sum();
        if !(slope > T::zero()) {
            return;
        }

        let base = self.criterion(&st.x, self.state_total(st));
        let mut lambda = T::one();
        let mut trial_row = st.x[k].clone();
        for _ in 0..60 {
            let cand: Vec<T> = (0..nv).map(|i| y[i] + lambda * dir[i]).collect();
            let guarded = pts.iter().enumerate().all(|(i, &j)| {
                (self.vk[k][j] == T::zero() || cand[i] >= guard)
                    && (self.v0[j] == T::zero() || rest[i] + cand[p] - cand[i] >= guard)
            });
            if guarded {
                for (i, &j) in pts.iter().enumerate() {
                    trial_row[j] = cand[i];
                }
                self.fill_between(&mut trial_row, k);
                let trial_tail = if has_z {
                    (cand[p] - trial_row[m - 1]).max(T::zero())
                } else {
                    T::zero()
                };
                let old_row = std::mem::replace(&mut st.x[k], trial_row.clone());
                let old_tail = st.tail;
                st.tail = trial_tail;
                let val = self.criterion(&st.x, self.state_total(st));
                if val >= base + T::of(0.1) * lambda * slope {
                    return;
                }
                st.x[k] = old_row;
                st.tail = old_tail;
            }
            lambda = lambda * T::of(0.5);
        }
    }

    fn tabulate_state(&self, st: &State<T>) -> Tabulated<T> {
        let increases = (0..self.k)
            .map(|k| {
                let mut inc = Vec::new();
                let mut prev = T::zero();
                for (j, &v) in st.x[k].iter().enumerate() {
                    if v > prev {
                        inc.push((IncreaseAt::Before(j), v - prev));
                        prev = v;
                    }
                }
                if st.tail > T::zero() {
                    inc.push((IncreaseAt::Beyond, st.tail));
                }
                inc
            })
            .collect();
        Tabulated::new(st.x.clone(), self.state_total(st), increases)
    }

    // ------------------------------------------------------ support reduction

    /// Sparse feasible start: the naive estimator's jumps (which sit at
    /// cause-`k` times), rescaled so that `F_+ < 1`, plus the remaining mass
    /// beyond `T_(n)`.
    fn naive_masses(&self) -> Masses<T> {
        let naive = naive_estimate(self.d);
        let times = self.d.times();
        let max_plus = times
            .iter()
            .map(|&t| naive.components.iter().map(|c| c.eval(t)).sum::<T>())
            .fold(T::one(), T::max);
        let scale = (T::one() - T::of(1e-6)) / max_plus;
        let mut state = State {
            x: naive
                .components
                .iter()
                .map(|c| times.iter().map(|&t| c.eval(t) * scale).collect())
                .collect(),
            tail: T::zero(),
        };
        if self.has_survival {
            state.tail = (T::one() - state.x.iter().map(|r| r[self.m - 1]).sum::<T>()).max(T::zero());
        }
        self.masses_from_state(&state)
    }

    /// Collapse an iterate onto cause-`k` times: mass between two cause-`k`
    /// times moves to the later one, mass after the last one goes beyond
    /// `T_(n)`.
    fn masses_from_state(&self, st: &State<T>) -> Masses<T> {
        let mut tau = st.tail;
        let mut alpha = Vec::with_capacity(self.k);
        for k in 0..self.k {
            let mut prev = T::zero();
            let mut a = Vec::with_capacity(self.cause_pts[k].len());
            for &j in &self.cause_pts[k] {
                let v = st.x[k][j].max(prev);
                a.push(v - prev);
                prev = v;
            }
            if self.has_survival {
                tau += (st.x[k][self.m - 1] - prev).max(T::zero());
            }
            alpha.push(a);
        }
        if !self.has_survival {
            tau = T::zero();
        }
        Masses { alpha, tau }
    }

    fn values_from_masses(&self, ms: &Masses<T>) -> (Vec<Vec<T>>, T) {
        let mut x = vec![vec![T::zero(); self.m]; self.k];
        for k in 0..self.k {
            for (c, &j) in self.cause_pts[k].iter().enumerate() {
                x[k][j] += ms.alpha[k][c];
            }
            let mut acc = T::zero();
            for v in x[k].iter_mut() {
                acc += *v;
                *v = acc;
            }
        }
        (x, ms.tau)
    }

    fn masses_total(&self, ms: &Masses<T>) -> T {
        ms.alpha.iter().flatten().copied().sum::<T>() + ms.tau
    }

    /// Criterion at the masses, `-inf` outside the domain.
    fn mass_criterion(&self, ms: &Masses<T>) -> T {
        let (x, _) = self.values_from_masses(ms);
        self.criterion(&x, self.masses_total(ms))
    }

    fn derivs(&self, ms: &Masses<T>) -> Derivs<T> {
        let (x, _) = self.values_from_masses(ms);
        let total = self.masses_total(ms);
        let m = self.m;
        let mut grad_suffix = vec![vec![T::zero(); m + 1]; self.k];
        let mut curv_suffix = vec![vec![T::zero(); m + 1]; self.k];
        for k in 0..self.k {
            for j in (0..m).rev() {
                let c = self.vk[k][j];
                let (mut g, mut h) = (T::zero(), T::zero());
                if c > T::zero() {
                    g = c / x[k][j];
                    h = g / x[k][j];
                }
                grad_suffix[k][j] = grad_suffix[k][j + 1] + g;
                curv_suffix[k][j] = curv_suffix[k][j + 1] + h;
            }
        }
        let mut grad_prefix = vec![T::zero(); m + 1];
        let mut curv_prefix = vec![T::zero(); m + 1];
        for j in 0..m {
            let c0 = self.v0[j];
            let (mut g, mut h) = (T::zero(), T::zero());
            if c0 > T::zero() {
                let s = total - x.iter().map(|r| r[j]).sum::<T>();
                g = c0 / s;
                h = g / s;
            }
            grad_prefix[j + 1] = grad_prefix[j] + g;
            curv_prefix[j + 1] = curv_prefix[j] + h;
        }
        Derivs {
            grad_suffix,
            curv_suffix,
            grad_prefix,
            curv_prefix,
        }
    }

    fn position(&self, v: Var) -> usize {
        match v {
            Var::Cause(k, c) => self.cause_pts[k][c],
            Var::Tail => self.m,
        }
    }

    fn gradient(&self, dv: &Derivs<T>, v: Var) -> T {
        match v {
            Var::Cause(k, _) => {
                let j = self.position(v);
                dv.grad_suffix[k][j] + dv.grad_prefix[j] - T::one()
            }
            Var::Tail => dv.grad_prefix[self.m] - T::one(),
        }
    }

    /// Entry of the negative Hessian.
    fn curvature(&self, dv: &Derivs<T>, a: Var, b: Var) -> T {
        let (ja, jb) = (self.position(a), self.position(b));
        let mut h = dv.curv_prefix[ja.min(jb)];
        if let (Var::Cause(ka, _), Var::Cause(kb, _)) = (a, b) {
            if ka == kb {
                h += dv.curv_suffix[ka][ja.max(jb)];
            }
        }
        h
    }

    fn get(ms: &Masses<T>, v: Var) -> T {
        match v {
            Var::Cause(k, c) => ms.alpha[k][c],
            Var::Tail => ms.tau,
        }
    }

    fn set(ms: &mut Masses<T>, v: Var, val: T) {
        match v {
            Var::Cause(k, c) => ms.alpha[k][c] = val,
            Var::Tail => ms.tau = val,
        }
    }

    /// Newton's method on the active masses, the others held at zero. Masses
    /// may turn negative; only the domain of the logarithms is enforced.
    fn restricted_newton(&self, ms: &Masses<T>, active: &[Var]) -> (Masses<T>, usize) {
        let mut cur = ms.clone();
        let na = active.len();
        let mut f_cur = self.mass_criterion(&cur);
        let mut steps = 0;
        if na == 0 {
            return (cur, 0);
        }
        let mut hess = vec![T::zero(); na * na];
        let mut tiny_steps = 0;
        for _ in 0..SR_MAX_NEWTON {
            steps += 1;
            let dv = self.derivs(&cur);
            let mut g: Vec<T> = active.iter().map(|&v| self.gradient(&dv, v)).collect();
            for a in 0..na {
                for b in 0..=a {
                    let h = self.curvature(&dv, active[a], active[b]);
                    hess[a * na + b] = h;
                    hess[b * na + a] = h;
                }
            }
            let g_orig = g.clone();
            if !cholesky_solve(&mut hess, na, &mut g) {
                // fall back to a scaled gradient step
                g = g_orig
                    .iter()
                    .enumerate()
                    .map(|(a, &gi)| gi / self.curvature(&dv, active[a], active[a]).max(T::epsilon()))
                    .collect();
            }
            let decrement: T = g.iter().zip(&g_orig).map(|(a, b)| *a * *b).sum();
            if !(decrement > T::zero()) {
                break;
            }
            // Near the optimum changes in f drown in rounding; the full Newton
            // step is then taken on the strength of the decrement alone.
            let scale = T::one() + f_cur.abs();
            let tiny = decrement <= T::of(1e-12) * scale;
            let mut lambda = T::one();
            let mut accepted = false;
            for _ in 0..60 {
                let mut trial = cur.clone();
                for (a, &v) in active.iter().enumerate() {
                    Self::set(&mut trial, v, Self::get(&cur, v) + lambda * g[a]);
                }
                let f_trial = self.mass_criterion(&trial);
                let ok = if tiny {
                    f_trial >= f_cur - T::of(64.0) * T::epsilon() * scale
                } else {
                    f_trial >= f_cur + T::of(1e-4) * lambda * decrement
                };
                if f_trial.is_finite() && ok {
                    accepted = true;
                    cur = trial;
                    f_cur = f_trial;
                    break;
                }
                lambda = lambda * T::of(0.5);
            }
            let converged = decrement <= T::of(1e-26) * scale || (tiny && tiny_steps >= 3);
            if tiny {
                tiny_steps += 1;
            }
            let left_cone = active.iter().any(|&v| Self::get(&cur, v) <= T::zero());
            if !accepted || converged || left_cone {
                break;
            }
        }
        (cur, steps)
    }

    fn support_reduction(&self, start: Masses<T>, budget: usize) -> SrOutcome<T> {
        let kkt_tol = T::of(1e-10);
        let mut ms = start;
        let mut iterations = 0usize;
        let mut active: Vec<Var> = Vec::new();
        for k in 0..self.k {
            for c in 0..self.cause_pts[k].len() {
                if ms.alpha[k][c] > T::zero() {
                    active.push(Var::Cause(k, c));
                } else {
                    ms.alpha[k][c] = T::zero();
                }
            }
        }
        if ms.tau > T::zero() {
            active.push(Var::Tail);
        }
        let max_outer = 4 * (self.m + 10) * self.k;
        for _ in 0..max_outer {
            // solve on the current support, shrinking it until all masses are positive
            loop {
                let (trial, steps) = self.restricted_newton(&ms, &active);
                iterations += steps;
                if iterations >= budget {
                    return SrOutcome {
                        masses: ms,
                        iterations,
                        converged: false,
                    };
                }
                let mut step = T::one();
                let mut hit: Vec<usize> = Vec::new();
                for (a, &v) in active.iter().enumerate() {
                    let (from, to) = (Self::get(&ms, v), Self::get(&trial, v));
                    if to <= T::zero() {
                        let s = if from > to { from / (from - to) } else { T::zero() };
                        if s < step {
                            step = s;
                            hit.clear();
                            hit.push(a);
                        } else if s == step {
                            hit.push(a);
                        }
                    }
                }
                if hit.is_empty() {
                    ms = trial;
                    break;
                }
                for &v in &active {
                    let (from, to) = (Self::get(&ms, v), Self::get(&trial, v));
                    Self::set(&mut ms, v, from + step * (to - from));
                }
                for &a in hit.iter().rev() {
                    Self::set(&mut ms, active[a], T::zero());
                    active.remove(a);
                }
            }

            let dv = self.derivs(&ms);
            let mut additions = Vec::new();
            for k in 0..self.k {
                // one candidate per run of inactive times with positive derivative
                let mut run_best: Option<(T, usize)> = None;
                for c in 0..self.cause_pts[k].len() {
                    let gr = if ms.alpha[k][c] > T::zero() {
                        None
                    } else {
                        let gr = self.gradient(&dv, Var::Cause(k, c));
                        (gr > kkt_tol).then_some(gr)
                    };
                    match gr {
                        Some(gr) => {
                            if run_best.is_none_or(|(b, _)| gr > b) {
                                run_best = Some((gr, c));
                            }
                        }
                        None => {
                            if let Some((_, b)) = run_best.take() {
                                additions.push(Var::Cause(k, b));
                            }
                        }
                    }
                }
                if let Some((_, b)) = run_best {
                    additions.push(Var::Cause(k, b));
                }
            }
            if self.has_survival && ms.tau == T::zero() {
                let gr = self.gradient(&dv, Var::Tail);
                if gr > kkt_tol {
                    additions.push(Var::Tail);
                }
            }
            if additions.is_empty() {
                return SrOutcome {
                    masses: ms,
                    iterations,
                    converged: true,
                };
            }
            active.extend(additions);
            active.sort_by_key(|&v| match v {
                Var::Cause(k, c) => (k, c),
                Var::Tail => (self.k, 0),
            });
        }
        SrOutcome {
            masses: ms,
            iterations,
            converged: false,
        }
    }

    // ------------------------------------------------------------- output

    /// Normalize to `F_+(inf) = 1`, split the tail mass and certify.
    fn finish(&self, mut x: Vec<Vec<T>>, tail: T, iterations: usize, tol: T) -> Result<MleResult<T>> {
        let m = self.m;
        let total = x.iter().map(|r| r[m - 1]).sum::<T>() + tail;
        for row in x.iter_mut() {
            for v in row.iter_mut() {
                *v /= total;
            }
        }
        let tail_total = (T::one() - x.iter().map(|r| r[m - 1]).sum::<T>()).max(T::zero());
        let tail_total = if tail > T::zero() { tail_total } else { T::zero() };

        // split the mass beyond T_(n) in proportion to F_k(T_(n))
        let weights: Vec<T> = x.iter().map(|r| r[m - 1]).collect();
        let wsum: T = weights.iter().copied().sum();
        let times = self.d.times();
        let mut components = Vec::with_capacity(self.k);
        for (k, row) in x.iter().enumerate() {
            let share = if wsum > T::zero() {
                weights[k] / wsum
            } else {
                T::one() / T::of_usize(self.k)
            };
            components.push(StepFn::from_values(&times, row, tail_total * share)?);
        }
        let system = SubDistSystem::new(components)?;
        let loglik = loglik_values(self.d, &x, T::one());
        let certificate = fenchel_check(self.d, &system, tol)?;
        Ok(MleResult {
            system,
            tail_mass_total: tail_total,
            tail_unique: !self.d.survival_at_max(),
            loglik,
            certificate,
            iterations,
        })
    }
}

/// In-place Cholesky factorization of a symmetric positive definite matrix
/// followed by the solve; `false` if the matrix is not numerically PD.
fn cholesky_solve<T: Scalar>(a: &mut [T], n: usize, b: &mut [T]) -> bool {
    for j in 0..n {
        let mut s = a[j * n + j];
        for p in 0..j {
            s -= a[j * n + p] * a[j * n + p];
        }
        if !(s > T::zero()) {
            return false;
        }
        let l = s.sqrt();
        a[j * n + j] = l;
        for i in j + 1..n {
            let mut s = a[i * n + j];
            for p in 0..j {
                s -= a[i * n + p] * a[j * n + p];
            }
            a[i * n + j] = s / l;
        }
    }
    for i in 0..n {
        let mut s = b[i];
        for p in 0..i {
            s -= a[i * n + p] * b[p];
        }
        b[i] = s / a[i * n + i];
    }
    for i in (0..n).rev() {
        let mut s = b[i];
        for p in i + 1..n {
            s -= a[p * n + i] * b[p];
        }
        b[i] = s / a[i * n + i];
    }
    true
}
