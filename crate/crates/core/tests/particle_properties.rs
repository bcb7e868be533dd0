use adalag::kalman::kalman_filter;
use adalag::model::{make_lgssm, simulate, LgssmParams};
use adalag::particle::{filter_estimate, run_filter, WeightedSample};
use adalag::rng::{derive_seed, stream};
use proptest::prelude::*;

fn sample_from(triples: &[(f64, f64, usize)]) -> WeightedSample {
    let n = triples.len();
    WeightedSample::new(
        3,
        1,
        triples.iter().map(|t| t.0).collect(),
        triples.iter().map(|t| t.1).collect(),
        Some(triples.iter().map(|t| t.2 % n).collect()),
    )
    .unwrap()
}

fn canonical(mut triples: Vec<(f64, f64, usize)>) -> Vec<(f64, f64, usize)> {
    triples.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)).then(a.2.cmp(&b.2)));
    triples
}

fn triples() -> impl Strategy<Value = Vec<(f64, f64, usize)>> {
    prop::collection::vec((-50.0..50.0f64, 0.001..10.0f64, 0..1000usize), 1..40)
}

proptest! {
    #[test]
    fn estimate_of_one_is_one(t in triples()) {
        prop_assert_eq!(filter_estimate(&sample_from(&t), |_| 1.0), 1.0);
    }

    #[test]
    fn estimate_is_exchangeable(t in triples(), seed in any::<u64>()) {
        use rand::seq::SliceRandom;
        let mut shuffled = t.clone();
        shuffled.shuffle(&mut stream(seed));
        let f = |x: &[f64]| x[0] * x[0] - x[0];
        let base = filter_estimate(&sample_from(&t), f);
        let permuted = filter_estimate(&sample_from(&shuffled), f);
        prop_assert!((base - permuted).abs() <= 1e-12 * base.abs().max(1.0));
        let a = filter_estimate(&sample_from(&canonical(t)), f);
        let b = filter_estimate(&sample_from(&canonical(shuffled)), f);
        prop_assert_eq!(a.to_bits(), b.to_bits());
    }

    #[test]
    fn estimate_lies_in_hull(t in triples()) {
        let s = sample_from(&t);
        let e = filter_estimate(&s, |x| x[0]);
        let lo = t.iter().map(|v| v.0).fold(f64::INFINITY, f64::min);
        let hi = t.iter().map(|v| v.0).fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(lo <= e && e <= hi);
    }
}

#[test]
fn filter_error_shrinks_with_particle_count() {
    let params = LgssmParams::benchmark();
    let model = make_lgssm(params.clone()).unwrap();
    let obs = simulate(&model, 10, 5).observations;
    let exact = kalman_filter(&params, &obs).unwrap()[10].mean[0];
    let model = model.with_observations(obs).unwrap();
    let median_error = |n: usize| {
        let mut errs: Vec<f64> = (0..20)
            .map(|r| {
                let samples = run_filter(&model, n, &mut stream(derive_seed(n as u64, r))).unwrap();
                (filter_estimate(&samples[10], |x| x[0]) - exact).abs()
            })
            .collect();
        errs.sort_by(f64::total_cmp);
        (errs[9] + errs[10]) / 2.0
    };
    let errs: Vec<f64> = [100, 1_000, 10_000].into_iter().map(median_error).collect();
    assert!(errs[0] > errs[1] && errs[1] > errs[2], "{errs:?}");
}
