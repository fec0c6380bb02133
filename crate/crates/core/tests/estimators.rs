use crcs_core::lab::{sample_dataset, TruthModel};
use crcs_core::*;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Random dataset with at most `max_times` distinct times.
fn tiny_dataset(rng: &mut ChaCha8Rng, k: usize, max_times: usize) -> Dataset<f64> {
    let m = rng.gen_range(1..=max_times);
    let mut raw = Vec::new();
    for j in 0..m {
        for _ in 0..rng.gen_range(1..=3) {
            raw.push(((j + 1) as f64, rng.gen_range(0..=k as i64)));
        }
    }
    validate_dataset(&raw, k).unwrap()
}

fn random_dataset(rng: &mut ChaCha8Rng, k: usize, n: usize) -> Dataset<f64> {
    let raw: Vec<(f64, i64)> = (0..n)
        .map(|_| {
            let t: f64 = rng.gen_range(0.0..3.0);
            // failures more likely at later times
            let status = if rng.gen::<f64>() < t / 3.0 { rng.gen_range(1..=k as i64) } else { 0 };
            ((t * 100.0).round() / 100.0, status)
        })
        .collect();
    validate_dataset(&raw, k).unwrap()
}

fn uniqueness_values(d: &Dataset<f64>, s: &SubDistSystem<f64>) -> Vec<f64> {
    let sets = support_sets(d);
    let mut out = Vec::new();
    for (k, set) in sets.uniqueness_sets.iter().enumerate() {
        for &t in set {
            out.push(s.component(k + 1).eval(t));
        }
    }
    out
}

#[test]
fn matches_brute_force_on_tiny_instances() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..60 {
        let k = rng.gen_range(1..=2);
        let d = tiny_dataset(&mut rng, k, 8 / k / 2 + 1);
        if d.k() * d.distinct().len() > 8 {
            continue;
        }
        let mle = mle_estimate(&d, &MleOptions::default()).unwrap();
        let brute = brute_force_mle(&d, 1e-3).unwrap();
        let lb = loglik(&d, &brute);
        assert!(mle.loglik >= lb - 1e-6, "mle {} < brute {}", mle.loglik, lb);
        for (a, b) in uniqueness_values(&d, &mle.system).iter().zip(uniqueness_values(&d, &brute.clone())) {
            assert!((a - b).abs() < 1e-2, "value {a} vs {b} for {:?}", d.observations());
        }
    }
}

#[test]
fn worked_examples() {
    let d = validate_dataset(&[(1.0f64, 1), (2.0, 2)], 2).unwrap();
    let r = mle_estimate(&d, &MleOptions::default()).unwrap();
    assert!((r.system.component(1).eval(1.0) - 0.5).abs() < 1e-10);
    assert!((r.system.component(2).eval(2.0) - 0.5).abs() < 1e-10);
    assert!((r.system.eval_plus(2.0) - 1.0).abs() < 1e-10);
    // averaged over the two observations
    assert!((r.loglik - 0.5f64.ln()).abs() < 1e-10);

    let d = validate_dataset(&[(1.0f64, 1), (2.0, 0)], 2).unwrap();
    let r = mle_estimate(&d, &MleOptions::default()).unwrap();
    assert!((r.system.component(1).eval(1.0) - 0.5).abs() < 1e-10);
    assert!((r.tail_mass_total - 0.5).abs() < 1e-10);
    assert!(!r.tail_unique);
    let u = uniqueness_report(&d, &r).unwrap();
    assert!(!u.infinity_unique);
}

#[test]
fn single_cause_mle_is_the_naive_estimator() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..100 {
        let n = rng.gen_range(1..=200);
        let d = random_dataset(&mut rng, 1, n);
        let mle = mle_estimate(&d, &MleOptions::default()).unwrap();
        let naive = naive_estimate(&d);
        for t in d.times() {
            let (a, b) = (mle.system.component(1).eval(t), naive.components[0].eval(t));
            assert!((a - b).abs() < 1e-8, "t = {t}: {a} vs {b}");
        }
    }
}

#[test]
fn random_feasible_perturbations_do_not_improve() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..20 {
        let k = rng.gen_range(2..=3);
        let d = random_dataset(&mut rng, k, 150);
        let mle = mle_estimate(&d, &MleOptions::default()).unwrap();
        let times = d.times();
        for _ in 0..20 {
            // mix with a random feasible system
            let other = random_system(&mut rng, &times, k);
            let eps = rng.gen_range(1e-4..0.2);
            let mixed = mix(&mle.system, &other, eps, &times);
            assert!(loglik(&d, &mixed) <= mle.loglik + 1e-10);
        }
    }
}

#[test]
fn beats_random_systems() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let d = random_dataset(&mut rng, 2, 300);
    let mle = mle_estimate(&d, &MleOptions::default()).unwrap();
    let times = d.times();
    for _ in 0..200 {
        let s = random_system(&mut rng, &times, 2);
        assert!(loglik(&d, &s) <= mle.loglik);
    }
}

fn random_system(rng: &mut ChaCha8Rng, times: &[f64], k: usize) -> SubDistSystem<f64> {
    let mut inc: Vec<Vec<f64>> = (0..k).map(|_| times.iter().map(|_| rng.gen::<f64>()).collect()).collect();
    let total: f64 = inc.iter().flatten().sum::<f64>() / rng.gen_range(0.5..1.0);
    let comps = inc
        .iter_mut()
        .map(|row| {
            let mut acc = 0.0;
            let vals: Vec<f64> = row
                .iter()
                .map(|x| {
                    acc += x / total;
                    acc
                })
                .collect();
            StepFn::from_values(times, &vals, 0.0).unwrap()
        })
        .collect();
    SubDistSystem::new(comps).unwrap()
}

fn mix(a: &SubDistSystem<f64>, b: &SubDistSystem<f64>, eps: f64, times: &[f64]) -> SubDistSystem<f64> {
    let comps = (1..=a.k())
        .map(|k| {
            let vals: Vec<f64> = times
                .iter()
                .map(|&t| (1.0 - eps) * a.component(k).eval(t) + eps * b.component(k).eval(t))
                .collect();
            StepFn::from_values(times, &vals, 0.0).unwrap()
        })
        .collect();
    SubDistSystem::new(comps).unwrap()
}

#[test]
fn f32_instantiation_runs() {
    let raw: Vec<(f32, i64)> = vec![(0.5, 0), (1.0, 1), (1.5, 2), (2.0, 0), (2.5, 1)];
    let d = validate_dataset(&raw, 2).unwrap();
    let r = mle_estimate(&d, &MleOptions { fenchel_tol: 1e-4, ..MleOptions::default() }).unwrap();
    assert!(r.certificate.passed);
    assert!((r.system.total_mass() - 1.0).abs() < 1e-5);
}

#[test]
fn simulated_data_certifies() {
    let tm = TruthModel::default();
    for seed in 0..5 {
        let d = sample_dataset(&tm, 1000, seed).unwrap();
        let r = mle_estimate(&d, &MleOptions::default()).unwrap();
        assert!(r.certificate.passed && r.certificate.violation() < 1e-8);
        assert!(r.certificate.beta >= 0.0);
    }
}

#[test]
fn block_icm_reaches_a_loose_tolerance() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let d = random_dataset(&mut rng, 2, 60);
    let opts = MleOptions {
        algorithm: MleAlgorithm::BlockIcm,
        fenchel_tol: 1e-5,
        ..MleOptions::default()
    };
    let icm = mle_estimate(&d, &opts).unwrap();
    let best = mle_estimate(&d, &MleOptions::default()).unwrap();
    assert!(icm.certificate.passed);
    assert!((icm.loglik - best.loglik).abs() < 1e-6);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn mle_is_certified_and_dominates_naive(seed in any::<u64>(), k in 1usize..=3, n in 1usize..120) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = random_dataset(&mut rng, k, n);
        let r = mle_estimate(&d, &MleOptions::default()).unwrap();
        prop_assert!(r.certificate.passed);
        prop_assert!((r.system.total_mass() - 1.0).abs() < 1e-12);
        prop_assert!(r.certificate.beta >= -1e-12);
        // the naive estimator rescaled into the constraint set is feasible
        let naive = naive_estimate(&d);
        let top = d.times().iter().map(|&t| naive.components.iter().map(|c| c.eval(t)).sum::<f64>()).fold(1.0, f64::max);
        let comps = naive.components.iter().map(|c| {
            let vals: Vec<f64> = d.times().iter().map(|&t| c.eval(t) / top).collect();
            StepFn::from_values(&d.times(), &vals, 0.0).unwrap()
        }).collect();
        let scaled = SubDistSystem::new(comps).unwrap();
        prop_assert!(loglik(&d, &scaled) <= r.loglik + 1e-10);
    }
}
