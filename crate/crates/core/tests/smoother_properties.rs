use adalag::kalman::{disturbance_smoother, kalman_filter};
use adalag::model::{make_lgssm, simulate, LgssmParams, ModelSpec};
use adalag::objective::{Objective, Probe};
use adalag::particle::WeightedSample;
use adalag::rng::{derive_seed, stream};
use adalag::smoothers::{
    ffbsm_update, paris_update, run_adaptive_lag, variance_criterion, EstimatorBank, SmootherConfig,
};
use proptest::prelude::*;

fn benchmark_model() -> ModelSpec {
    make_lgssm(LgssmParams::benchmark()).unwrap().with_observations(vec![0.0; 2]).unwrap()
}

fn pair(xs: &[f64], ws: &[f64], xs_new: &[f64]) -> (WeightedSample, WeightedSample) {
    let n = xs.len();
    let prev = WeightedSample::new(0, 1, xs.to_vec(), ws.to_vec(), None).unwrap();
    let new = WeightedSample::new(1, 1, xs_new.to_vec(), vec![1.0; n], Some(vec![0; n])).unwrap();
    (prev, new)
}

fn bank_with(stats: &[f64], precision: usize) -> EstimatorBank {
    let mut bank = EstimatorBank::new(&SmootherConfig::new(stats.len(), precision, 0.0)).unwrap();
    bank.insert(0, 0, stats.to_vec());
    bank
}

fn population() -> impl Strategy<Value = (Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>)> {
    (1usize..12).prop_flat_map(|n| {
        (
            prop::collection::vec(-4.0..4.0f64, n),
            prop::collection::vec(0.01..5.0f64, n),
            prop::collection::vec(-4.0..4.0f64, n),
            prop::collection::vec(-1e3..1e3f64, n),
        )
    })
}

proptest! {
    #[test]
    fn paris_update_stays_in_hull((xs, ws, xs_new, stats) in population(), k in 1usize..4, seed in any::<u64>()) {
        let model = benchmark_model();
        let (prev, new) = pair(&xs, &ws, &xs_new);
        let mut bank = bank_with(&stats, k);
        paris_update(&mut bank, &prev, &new, &model, &mut stream(seed)).unwrap();
        let lo = stats.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = stats.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        for &v in bank.stats(0).unwrap() {
            prop_assert!(lo <= v && v <= hi);
        }
    }

    #[test]
    fn constant_statistics_stay_exact((xs, ws, xs_new, stats) in population(), seed in any::<u64>()) {
        let model = benchmark_model();
        let (prev, new) = pair(&xs, &ws, &xs_new);
        let c = stats[0];
        let mut bank = bank_with(&vec![c; xs.len()], 2);
        paris_update(&mut bank, &prev, &new, &model, &mut stream(seed)).unwrap();
        prop_assert!(bank.stats(0).unwrap().iter().all(|&v| v == c));
        prop_assert_eq!(variance_criterion(&new, bank.stats(0).unwrap()), 0.0);
        let exact = ffbsm_update(&vec![c; xs.len()], &prev, &new, &model).unwrap();
        prop_assert!(exact.iter().all(|&v| v == c));
    }

    #[test]
    fn ffbsm_stays_in_hull((xs, ws, xs_new, stats) in population()) {
        let model = benchmark_model();
        let (prev, new) = pair(&xs, &ws, &xs_new);
        let out = ffbsm_update(&stats, &prev, &new, &model).unwrap();
        let lo = stats.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = stats.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(out.iter().all(|&v| lo <= v && v <= hi));
    }

    #[test]
    fn criterion_is_nonnegative((xs, ws, _n, stats) in population()) {
        let (prev, _) = pair(&xs, &ws, &xs);
        prop_assert!(variance_criterion(&prev, &stats) >= 0.0);
    }

    #[test]
    fn smoother_variance_below_filter(a in -0.99..0.99f64, b in 0.1..2.0f64, su in 0.1..2.0f64, sv in 0.1..3.0f64, seed in 0u64..1000) {
        let params = LgssmParams::scalar(a, b, su, sv);
        let obs = simulate(&make_lgssm(params.clone()).unwrap(), 30, seed).observations;
        let filt = kalman_filter(&params, &obs).unwrap();
        let smooth = disturbance_smoother(&params, &obs).unwrap();
        for (f, s) in filt.iter().zip(&smooth) {
            prop_assert!(s.cov[(0, 0)] <= f.cov[(0, 0)] * (1.0 + 1e-10));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn stop_times_monotone_in_tolerance(data_seed in 0u64..1000, seed in any::<u64>(), e1 in 1e-4..0.3f64, ratio in 1.01..50.0f64) {
        let model = make_lgssm(LgssmParams::benchmark()).unwrap();
        let obs = simulate(&model, 60, data_seed).observations;
        let model = model.with_observations(obs).unwrap();
        let stops = |eps: f64| {
            let mut m = run_adaptive_lag(&model, &SmootherConfig::new(50, 2, eps), &Objective::Identity, stream(seed)).unwrap().marginals;
            m.sort_by_key(|m| m.s);
            m
        };
        let (tight, loose) = (stops(e1), stops(e1 * ratio));
        for (t, l) in tight.iter().zip(&loose) {
            prop_assert_eq!(t.s, l.s);
            prop_assert!(t.stop_time >= l.stop_time);
            prop_assert_eq!(t.lag, t.stop_time - t.s);
            prop_assert!(t.truncated_by_horizon || t.variance_at_stop < e1);
        }
    }
}

/// Mean of many backward-sampled updates against the exact update.
#[test]
fn paris_update_is_unbiased_for_ffbsm() {
    let model = benchmark_model();
    let (prev, new) = pair(&[-1.2, -0.3, 0.4, 0.9, 2.0], &[0.4, 1.0, 2.5, 0.7, 1.3], &[0.1, -0.8, 1.5, 0.6, -0.2]);
    let stats = [0.7, -1.1, 2.3, 0.2, -0.4];
    let exact = ffbsm_update(&stats, &prev, &new, &model).unwrap();
    let reps = 10_000;
    let mut sum = [0.0; 5];
    let mut sum_sq = [0.0; 5];
    for r in 0..reps {
        let mut bank = bank_with(&stats, 2);
        paris_update(&mut bank, &prev, &new, &model, &mut stream(derive_seed(99, r))).unwrap();
        for (i, &v) in bank.stats(0).unwrap().iter().enumerate() {
            sum[i] += v;
            sum_sq[i] += v * v;
        }
    }
    let n = reps as f64;
    for i in 0..5 {
        let mean = sum[i] / n;
        let se = ((sum_sq[i] / n - mean * mean) * n / (n - 1.0) / n).sqrt();
        assert!((mean - exact[i]).abs() < 3.0 * se, "entry {i}: {mean} vs {} (se {se})", exact[i]);
    }
}

#[test]
fn initial_criterion_decays_on_mixing_model() {
    let model = make_lgssm(LgssmParams::benchmark()).unwrap();
    let obs = simulate(&model, 200, 11).observations;
    let model = model.with_observations(obs).unwrap();
    let mut config = SmootherConfig::new(400, 2, 0.0);
    config.trace_marginal = Some(0);
    let probe = Probe { index: 0, objective: Objective::Identity };
    let mut first_below: Vec<usize> = (0..20)
        .map(|r| {
            let run = run_adaptive_lag(&model, &config, &probe, stream(derive_seed(5, r))).unwrap();
            run.criterion_trace.iter().position(|&v| v < 1e-3).unwrap_or(usize::MAX)
        })
        .collect();
    first_below.sort_unstable();
    assert!(first_below[10] <= 200, "{first_below:?}");
}
