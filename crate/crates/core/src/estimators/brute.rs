use crate::certification::loglik_values;
use crate::model::{Dataset, StepFn, SubDistSystem};
use crate::{Error, Result, Scalar};

const MAX_DIMS: usize = 8;
const COARSE_BUDGET: f64 = 2e5;

/// Exhaustive search for the MLE of tiny instances, used as an oracle.
///
/// The free values are `F_k(t_j)` for every cause and distinct time. A coarse
/// lattice of monotone sequences is enumerated exhaustively, then refined by a
/// pattern search over all `3^d` lattice neighbours with halving pitch down to
/// `resolution * 1e-3`, then by coordinatewise golden-section sweeps.
pub fn brute_force_mle<T: Scalar>(d: &Dataset<T>, resolution: T) -> Result<SubDistSystem<T>> {
    let m = d.distinct().len();
    let k = d.k();
    let dims = k * m;
    if dims > MAX_DIMS {
        return Err(Error::InstanceTooLarge { dims });
    }
    let eval = |x: &[T]| -> T {
        let rows: Vec<Vec<T>> = x.chunks(m).map(<[T]>::to_vec).collect();
        loglik_values(d, &rows, T::one())
    };
    let feasible = |x: &[T]| -> bool {
        let mut top = T::zero();
        for row in x.chunks(m) {
            if row[0] < T::zero() || row.windows(2).any(|w| w[1] < w[0]) {
                return false;
            }
            top += row[m - 1];
        }
        top <= T::one()
    };

    // coarse lattice
    let mut levels = 1usize;
    let max_levels = (T::one() / resolution).to_usize().unwrap_or(usize::MAX).max(1);
    while levels < max_levels && binom(levels + 1 + m, m).powi(k as i32) <= COARSE_BUDGET {
        levels += 1;
    }
    let seqs = monotone_sequences(m, levels);
    let unit = T::one() / T::of_usize(levels);
    let mut best_x = vec![T::zero(); dims];
    let mut best_f = T::neg_infinity();
    let mut idx = vec![0usize; k];
    let mut x = vec![T::zero(); dims];
    'outer: loop {
        let top: usize = idx.iter().map(|&i| seqs[i][m - 1]).sum();
        if top <= levels {
            for (c, &i) in idx.iter().enumerate() {
                for j in 0..m {
                    x[c * m + j] = T::of_usize(seqs[i][j]) * unit;
                }
            }
            let f = eval(&x);
            if f > best_f {
                best_f = f;
                best_x.copy_from_slice(&x);
            }
        }
        for c in 0..k {
            idx[c] += 1;
            if idx[c] < seqs.len() {
                continue 'outer;
            }
            idx[c] = 0;
        }
        break;
    }

    // pattern search with halving pitch
    let fine = resolution * T::of(1e-3);
    let mut h = unit;
    let n_dirs = 3usize.pow(dims as u32);
    let mut trial = vec![T::zero(); dims];
    while h >= fine {
        for _ in 0..1000 {
            let mut improved = false;
            let mut cand_f = best_f;
            let mut cand_x = best_x.clone();
            for code in 0..n_dirs {
                let mut c = code;
                for i in 0..dims {
                    let step = T::of_usize(c % 3) - T::one();
                    c /= 3;
                    trial[i] = best_x[i] + step * h;
                }
                if !feasible(&trial) {
                    continue;
                }
                let f = eval(&trial);
                if f > cand_f {
                    cand_f = f;
                    cand_x.copy_from_slice(&trial);
                    improved = true;
                }
            }
            if !improved {
                break;
            }
            best_f = cand_f;
            best_x = cand_x;
        }
        h = h * T::of(0.5);
    }

    // coordinatewise golden section
    for _ in 0..20 {
        for i in 0..dims {
            let (c, j) = (i / m, i % m);
            let lo = if j == 0 { T::zero() } else { best_x[i - 1] };
            let mut hi = if j + 1 < m { best_x[i + 1] } else { T::one() };
            if j + 1 == m {
                let others: T = (0..k).filter(|&o| o != c).map(|o| best_x[o * m + m - 1]).sum();
                hi = hi.min(T::one() - others);
            }
            if hi <= lo {
                continue;
            }
            let mut probe = best_x.clone();
            let mut f_at = |v: T| {
                probe[i] = v;
                eval(&probe)
            };
            let v = golden_max(&mut f_at, lo, hi);
            let f = f_at(v);
            if f > best_f {
                best_f = f;
                best_x[i] = v;
            }
        }
    }

    let times = d.times();
    let components = best_x
        .chunks(m)
        .map(|row| StepFn::from_values(&times, row, T::zero()))
        .collect::<Result<Vec<_>>>()?;
    SubDistSystem::new(components)
}

fn golden_max<T: Scalar>(f: &mut impl FnMut(T) -> T, mut a: T, mut b: T) -> T {
    let r = T::of(0.618_033_988_749_894_8);
    let mut c = b - r * (b - a);
    let mut e = a + r * (b - a);
    let mut fc = f(c);
    let mut fe = f(e);
    for _ in 0..80 {
        if fc >= fe {
            b = e;
            e = c;
            fe = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = e;
            fc = fe;
            e = a + r * (b - a);
            fe = f(e);
        }
    }
    if fc >= fe {
        c
    } else {
        e
    }
}

fn binom(n: usize, r: usize) -> f64 {
    (0..r).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// All nondecreasing sequences of length `m` with entries in `0..=levels`.
fn monotone_sequences(m: usize, levels: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(m);
    fn rec(m: usize, levels: usize, from: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == m {
            out.push(cur.clone());
            return;
        }
        for v in from..=levels {
            cur.push(v);
            rec(m, levels, v, cur, out);
            cur.pop();
        }
    }
    rec(m, levels, 0, &mut cur, &mut out);
    out
}
