//! Cumulative sum diagrams, greatest convex minorants and weighted isotonic
//! regression with optional pointwise bounds.

use crate::{Error, Result, Scalar};

/// Points `(W_j, Y_j)` of a cumulative sum diagram, starting at the origin.
#[derive(Debug, Clone, PartialEq)]
pub struct CumSumDiagram<T> {
    points: Vec<(T, T)>,
}

impl<T: Scalar> CumSumDiagram<T> {
    /// Diagram of cumulative weights and cumulative weighted responses.
    pub fn from_weighted(responses: &[T], weights: &[T]) -> Result<Self> {
        if responses.len() != weights.len() {
            return Err(Error::LengthMismatch(format!(
                "{} responses, {} weights",
                responses.len(),
                weights.len()
            )));
        }
        let mut points = Vec::with_capacity(responses.len() + 1);
        points.push((T::zero(), T::zero()));
        let (mut x, mut y) = (T::zero(), T::zero());
        for (i, (&r, &w)) in responses.iter().zip(weights).enumerate() {
            if !(w > T::zero()) {
                return Err(Error::NonPositiveWeight { index: i });
            }
            x += w;
            y += w * r;
            points.push((x, y));
        }
        Ok(Self { points })
    }

    /// Diagram from explicit points; the first must be the origin and `x`
    /// must increase strictly.
    pub fn from_points(points: Vec<(T, T)>) -> Result<Self> {
        match points.first() {
            Some(&(x, y)) if x == T::zero() && y == T::zero() => {}
            _ => return Err(Error::LengthMismatch("diagram must start at (0, 0)".into())),
        }
        for (i, w) in points.windows(2).enumerate() {
            if !(w[1].0 > w[0].0) {
                return Err(Error::NonPositiveWeight { index: i });
            }
        }
        Ok(Self { points })
    }

    pub fn points(&self) -> &[(T, T)] {
        &self.points
    }
}

/// Left derivatives of the greatest convex minorant at `x_1, ..., x_m`.
pub fn gcm_left_slopes<T: Scalar>(d: &CumSumDiagram<T>) -> Vec<T> {
    let pts = &d.points;
    // lower hull by monotone chain; collinear points are dropped
    let mut hull: Vec<usize> = Vec::with_capacity(pts.len());
    for i in 0..pts.len() {
        while hull.len() >= 2 {
            let a = pts[hull[hull.len() - 2]];
            let b = pts[hull[hull.len() - 1]];
            let c = pts[i];
            let cross = (b.0 - a.0) * (c.1 - a.1) - (b.1 - a.1) * (c.0 - a.0);
            if cross <= T::zero() {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(i);
    }
    let mut slopes = Vec::with_capacity(pts.len().saturating_sub(1));
    for seg in hull.windows(2) {
        let (a, b) = (pts[seg[0]], pts[seg[1]]);
        let s = (b.1 - a.1) / (b.0 - a.0);
        slopes.extend(std::iter::repeat_n(s, seg[1] - seg[0]));
    }
    slopes
}

/// Weighted pool-adjacent-violators. Adjacent blocks with equal means are
/// pooled, so the block structure is maximal.
pub(crate) fn pava<T: Scalar>(y: &[T], w: &[T]) -> Vec<T> {
    // (weighted mean, weight, length)
    let mut blocks: Vec<(T, T, usize)> = Vec::with_capacity(y.len());
    for (&yi, &wi) in y.iter().zip(w) {
        let mut cur = (yi, wi, 1usize);
        while let Some(&(m, bw, len)) = blocks.last() {
            if m >= cur.0 {
                let tw = bw + cur.1;
                cur = ((m * bw + cur.0 * cur.1) / tw, tw, len + cur.2);
                blocks.pop();
            } else {
                break;
            }
        }
        blocks.push(cur);
    }
    let mut out = Vec::with_capacity(y.len());
    for (m, _, len) in blocks {
        out.extend(std::iter::repeat_n(m, len));
    }
    out
}

fn weighted_objective<T: Scalar>(x: &[T], y: &[T], w: &[T]) -> T {
    x.iter()
        .zip(y)
        .zip(w)
        .map(|((&a, &b), &c)| c * (a - b) * (a - b))
        .sum()
}

fn is_constant<T: Scalar>(v: &[T]) -> bool {
    v.windows(2).all(|p| p[0] == p[1])
}

const DYKSTRA_MAX_ITERS: usize = 100_000;

/// Minimize `sum w_i (x_i - y_i)^2` over nondecreasing `x` with
/// `lower <= x <= upper`.
pub fn weighted_isotonic<T: Scalar>(
    y: &[T],
    w: &[T],
    lower: Option<&[T]>,
    upper: Option<&[T]>,
) -> Result<Vec<T>> {
    let n = y.len();
    if w.len() != n {
        return Err(Error::LengthMismatch(format!("{} values, {} weights", n, w.len())));
    }
    for (name, b) in [("lower", lower), ("upper", upper)] {
        if let Some(b) = b {
            if b.len() != n {
                return Err(Error::LengthMismatch(format!(
                    "{} values, {} {name} bounds",
                    n,
                    b.len()
                )));
            }
        }
    }
    if let Some(i) = w.iter().position(|&wi| !(wi > T::zero())) {
        return Err(Error::NonPositiveWeight { index: i });
    }
    if n == 0 {
        return Ok(Vec::new());
    }
    check_feasible(n, lower, upper)?;

    let clip = |x: T, i: usize| -> T {
        let mut v = x;
        if let Some(l) = lower {
            v = v.max(l[i]);
        }
        if let Some(u) = upper {
            v = v.min(u[i]);
        }
        v
    };
    if n == 1 {
        return Ok(vec![clip(y[0], 0)]);
    }
    let fit = pava(y, w);
    if lower.is_none() && upper.is_none() {
        return Ok(fit);
    }
    // constant bounds: clipping the unconstrained fit is the exact projection
    if lower.is_none_or(is_constant) && upper.is_none_or(is_constant) {
        return Ok(fit.iter().enumerate().map(|(i, &v)| clip(v, i)).collect());
    }
    Ok(dykstra(y, w, clip))
}

/// Feasible iff `max_{i <= j} lower_i <= upper_j` for every `j`.
fn check_feasible<T: Scalar>(n: usize, lower: Option<&[T]>, upper: Option<&[T]>) -> Result<()> {
    let mut arg_max = None::<usize>;
    for j in 0..n {
        if let Some(l) = lower {
            if arg_max.is_none_or(|a| l[j] > l[a]) {
                arg_max = Some(j);
            }
        }
        if let (Some(l), Some(u), Some(a)) = (lower, upper, arg_max) {
            if l[a] > u[j] {
                return Err(Error::InfeasibleBounds {
                    lower_index: a,
                    upper_index: j,
                });
            }
        }
    }
    Ok(())
}

/// Alternating projections onto the monotone cone (weighted PAVA) and the box
/// with Dykstra's correction terms.
fn dykstra<T: Scalar>(y: &[T], w: &[T], clip: impl Fn(T, usize) -> T) -> Vec<T> {
    let n = y.len();
    let tol = T::of(1e-12);
    let mut x = y.to_vec();
    let mut p = vec![T::zero(); n];
    let mut q = vec![T::zero(); n];
    let mut prev_obj = T::infinity();
    let mut buf = vec![T::zero(); n];
    for _ in 0..DYKSTRA_MAX_ITERS {
        for i in 0..n {
            buf[i] = x[i] + p[i];
        }
        let a = pava(&buf, w);
        for i in 0..n {
            p[i] = buf[i] - a[i];
            buf[i] = a[i] + q[i];
        }
        let mut gap = T::zero();
        for i in 0..n {
            let b = clip(buf[i], i);
            q[i] = buf[i] - b;
            gap = gap.max((a[i] - b).abs());
            x[i] = b;
        }
        let obj = weighted_objective(&x, y, w);
        if (prev_obj - obj).abs() < tol && gap < tol {
            break;
        }
        prev_obj = obj;
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Exhaustive search over partitions of `0..n` into consecutive blocks;
    /// each block takes its weighted mean and the best monotone candidate wins.
    fn block_partition_oracle(y: &[f64], w: &[f64]) -> Vec<f64> {
        let n = y.len();
        let mut best: Option<(f64, Vec<f64>)> = None;
        for mask in 0u32..(1 << (n - 1)) {
            let mut x = vec![0.0; n];
            let mut start = 0;
            for i in 0..n {
                let cut = i == n - 1 || mask & (1 << i) != 0;
                if cut {
                    let sw: f64 = w[start..=i].iter().sum();
                    let m = (start..=i).map(|j| w[j] * y[j]).sum::<f64>() / sw;
                    x[start..=i].iter_mut().for_each(|v| *v = m);
                    start = i + 1;
                }
            }
            if x.windows(2).any(|p| p[0] > p[1] + 1e-15) {
                continue;
            }
            let obj = weighted_objective(&x, y, w);
            if best.as_ref().is_none_or(|(o, _)| obj < *o) {
                best = Some((obj, x));
            }
        }
        best.unwrap().1
    }

    #[test]
    fn collinear_diagram() {
        let d = CumSumDiagram::from_points(vec![(0.0, 0.0), (1.0, 1.0), (2.0, 2.0)]).unwrap();
        assert_eq!(gcm_left_slopes(&d), vec![1.0, 1.0]);
    }

    #[test]
    fn bernoulli_responses_pool_the_middle() {
        let y = [1.0, 0.0, 0.0, 1.0];
        let w = [1.0; 4];
        let oracle = block_partition_oracle(&y, &w);
        let d = CumSumDiagram::from_weighted(&y, &w).unwrap();
        let s = gcm_left_slopes(&d);
        for (a, b) in s.iter().zip(&oracle) {
            assert!((a - b).abs() < 1e-15);
        }
        let third = 1.0 / 3.0;
        for (a, b) in s.iter().zip([third, third, third, 1.0]) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn single_point_slope() {
        let d = CumSumDiagram::from_points(vec![(0.0, 0.0), (1.0, 0.7)]).unwrap();
        assert_eq!(gcm_left_slopes(&d), vec![0.7]);
    }

    #[test]
    fn monotone_input_is_fixed() {
        let y = [0.1, 0.2, 0.2, 0.9];
        assert_eq!(weighted_isotonic(&y, &[1.0; 4], None, None).unwrap(), y.to_vec());
    }

    #[test]
    fn two_point_violation() {
        let oracle = block_partition_oracle(&[1.0, 0.0], &[1.0, 1.0]);
        assert_eq!(oracle, vec![0.5, 0.5]);
        assert_eq!(
            weighted_isotonic(&[1.0, 0.0], &[1.0, 1.0], None, None).unwrap(),
            vec![0.5, 0.5]
        );
    }

    /// Grid search over the feasible set at pitch 1e-4, then a finer local grid.
    fn grid_oracle_2d(y: [f64; 2], w: [f64; 2], lo: [f64; 2], hi: [f64; 2]) -> [f64; 2] {
        let obj = |a: f64, b: f64| w[0] * (a - y[0]).powi(2) + w[1] * (b - y[1]).powi(2);
        let mut best = (f64::INFINITY, [0.0, 0.0]);
        let steps = |l: f64, h: f64, pitch: f64| ((h - l) / pitch).round() as i64;
        let pitch = 1e-4;
        for i in 0..=steps(lo[0], hi[0], pitch) {
            let a = lo[0] + i as f64 * pitch;
            for j in 0..=steps(lo[1], hi[1], pitch) {
                let b = lo[1] + j as f64 * pitch;
                if a <= b && obj(a, b) < best.0 {
                    best = (obj(a, b), [a, b]);
                }
            }
        }
        let c = best.1;
        let fine = 1e-6;
        for i in -100..=100 {
            let a = (c[0] + i as f64 * fine).clamp(lo[0], hi[0]);
            for j in -100..=100 {
                let b = (c[1] + j as f64 * fine).clamp(lo[1], hi[1]);
                if a <= b && obj(a, b) < best.0 {
                    best = (obj(a, b), [a, b]);
                }
            }
        }
        best.1
    }

    #[test]
    fn upper_bound_active() {
        let oracle = grid_oracle_2d([0.9, 0.9], [1.0, 1.0], [0.0, 0.0], [0.5, 1.0]);
        assert!((oracle[0] - 0.5).abs() < 1e-6 && (oracle[1] - 0.9).abs() < 1e-6);
        let x = weighted_isotonic(&[0.9f64, 0.9], &[1.0, 1.0], None, Some(&[0.5, 1.0])).unwrap();
        assert!((x[0] - 0.5).abs() < 1e-12 && (x[1] - 0.9).abs() < 1e-12, "{x:?}");
    }

    #[test]
    fn degenerate_lengths() {
        assert!(weighted_isotonic::<f64>(&[], &[], None, None).unwrap().is_empty());
        assert_eq!(
            weighted_isotonic(&[2.0], &[1.0], Some(&[0.0]), Some(&[1.0])).unwrap(),
            vec![1.0]
        );
    }

    #[test]
    fn infeasible_bounds_report_witness() {
        match weighted_isotonic(&[0.0, 0.0, 0.0], &[1.0; 3], Some(&[0.0, 0.7, 0.0]), Some(&[1.0, 1.0, 0.5])) {
            Err(Error::InfeasibleBounds { lower_index: 1, upper_index: 2 }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn rejects_bad_weights() {
        assert!(matches!(
            weighted_isotonic(&[0.0, 1.0], &[1.0, 0.0], None, None),
            Err(Error::NonPositiveWeight { index: 1 })
        ));
    }

    #[test]
    fn f32_instantiation() {
        let x = weighted_isotonic(&[1.0f32, 0.0], &[1.0, 1.0], None, None).unwrap();
        assert_eq!(x, vec![0.5f32, 0.5]);
    }

    fn arb_problem(max: usize) -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
        (1..=max).prop_flat_map(|n| {
            (
                prop::collection::vec(-2.0..2.0f64, n),
                prop::collection::vec(0.1..3.0f64, n),
            )
        })
    }

    fn arb_bounded(max: usize) -> impl Strategy<Value = (Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>)> {
        (1..=max).prop_flat_map(|n| {
            (
                prop::collection::vec(-2.0..2.0f64, n),
                prop::collection::vec(0.1..3.0f64, n),
                prop::collection::vec(-1.5..0.0f64, n),
                prop::collection::vec(0.0..1.5f64, n),
            )
        })
    }

    proptest! {
        #[test]
        fn pava_equals_gcm((y, w) in arb_problem(50)) {
            let x = weighted_isotonic(&y, &w, None, None).unwrap();
            let s = gcm_left_slopes(&CumSumDiagram::from_weighted(&y, &w).unwrap());
            for (a, b) in x.iter().zip(&s) {
                prop_assert!((a - b).abs() < 1e-10);
            }
        }

        #[test]
        fn pava_matches_partition_oracle((y, w) in arb_problem(9)) {
            let x = weighted_isotonic(&y, &w, None, None).unwrap();
            let o = block_partition_oracle(&y, &w);
            for (a, b) in x.iter().zip(&o) {
                prop_assert!((a - b).abs() < 1e-10);
            }
        }

        #[test]
        fn projection_beats_feasible_points(
            (y, w, lo, hi) in arb_bounded(12),
            z in prop::collection::vec(0.0..1.0f64, 12),
        ) {
            let n = y.len();
            let x = weighted_isotonic(&y, &w, Some(&lo), Some(&hi)).unwrap();
            prop_assert!(x.windows(2).all(|p| p[0] <= p[1] + 1e-9));
            for i in 0..n {
                prop_assert!(x[i] >= lo[i] - 1e-9 && x[i] <= hi[i] + 1e-9);
            }
            // a feasible competitor: monotone, then clipped to a common band
            let mut cand: Vec<f64> = z[..n].to_vec();
            cand.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let band_lo = lo.iter().cloned().fold(f64::MIN, f64::max);
            let band_hi = hi.iter().cloned().fold(f64::MAX, f64::min);
            if band_lo <= band_hi {
                let cand: Vec<f64> = cand.iter().map(|v| band_lo + v * (band_hi - band_lo)).collect();
                prop_assert!(weighted_objective(&x, &y, &w) <= weighted_objective(&cand, &y, &w) + 1e-9);
            }
        }

        #[test]
        fn pooled_blocks_are_weighted_means((y, w) in arb_problem(40)) {
            let x = weighted_isotonic(&y, &w, None, None).unwrap();
            let mut start = 0;
            for i in 0..x.len() {
                if i + 1 == x.len() || x[i + 1] != x[i] {
                    let sw: f64 = w[start..=i].iter().sum();
                    let m = (start..=i).map(|j| w[j] * y[j]).sum::<f64>() / sw;
                    prop_assert!((m - x[i]).abs() < 1e-10);
                    start = i + 1;
                }
            }
        }

        #[test]
        fn idempotent((y, w, lo, hi) in arb_bounded(20)) {
            let x = weighted_isotonic(&y, &w, Some(&lo), Some(&hi)).unwrap();
            let x2 = weighted_isotonic(&x, &w, Some(&lo), Some(&hi)).unwrap();
            for (a, b) in x.iter().zip(&x2) {
                prop_assert!((a - b).abs() < 1e-9);
            }
        }
    }
}
