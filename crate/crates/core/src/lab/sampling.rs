use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{ObsDistribution, TruthModel};
use crate::metrics::SubDistribution;
use crate::model::{validate_dataset, Dataset};
use crate::{Error, Result};

/// Seed of replication `rep` in an experiment with seed `base` (SplitMix64
/// finalizer over the pair).
pub fn replication_seed(base: u64, rep: u64) -> u64 {
    let mut z = base ^ rep.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Generator for observation `i`: stream `i` of the ChaCha8 keyed by `seed`.
fn observation_rng(base: &ChaCha8Rng, i: usize) -> ChaCha8Rng {
    let mut rng = base.clone();
    rng.set_stream(i as u64);
    rng
}

/// Draw `n` observations: `T ~ G`, the cause `Y` with `P(Y = k) = p_k` (no
/// failure with the remaining probability), `X | Y = k` from the cause shape,
/// and report `Y` if `X <= T`, otherwise survival.
pub fn sample_dataset(tm: &TruthModel, n: usize, seed: u64) -> Result<Dataset<f64>> {
    tm.validate()?;
    if n == 0 {
        return Err(Error::EmptyDataset);
    }
    let base = ChaCha8Rng::seed_from_u64(seed);
    let raw: Vec<(f64, i64)> = (0..n)
        .map(|i| {
            let mut rng = observation_rng(&base, i);
            let t = tm.obs.quantile(rng.gen::<f64>());
            let u: f64 = rng.gen();
            let v: f64 = rng.gen();
            let mut acc = 0.0;
            let mut status = 0;
            for (k, (&p, shape)) in tm.cause_probs.iter().zip(&tm.cause_shapes).enumerate() {
                acc += p;
                if u < acc {
                    if shape.quantile(v) <= t {
                        status = k as i64 + 1;
                    }
                    break;
                }
            }
            (t, status)
        })
        .collect();
    validate_dataset(&raw, tm.k)
}

/// Draw `n` observations from an arbitrary system: `T ~ G`, then the status
/// from the multinomial with cell probabilities `F_1(T), ..., F_K(T)` and
/// `1 - F_+(T)`.
pub fn sample_from_system(sys: &impl SubDistribution, g: &ObsDistribution, n: usize, seed: u64) -> Result<Dataset<f64>> {
    if n == 0 {
        return Err(Error::EmptyDataset);
    }
    let base = ChaCha8Rng::seed_from_u64(seed);
    let k = sys.k();
    let raw: Vec<(f64, i64)> = (0..n)
        .map(|i| {
            let mut rng = observation_rng(&base, i);
            let t = g.quantile(rng.gen::<f64>());
            let u: f64 = rng.gen();
            let mut acc = 0.0;
            let mut status = 0;
            for c in 1..=k {
                acc += sys.eval(c, t);
                if u < acc {
                    status = c as i64;
                    break;
                }
            }
            (t, status)
        })
        .collect();
    validate_dataset(&raw, k)
}
