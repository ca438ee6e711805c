//! Sampler laws checked against exact laws and against each other.

use rtt_core::exact::{descents_moments, expected_fixed_points, return_probability};
use rtt_core::harness::{
    gof_test, run_experiment, run_trials, summarize, two_sample_test, EmpiricalDistribution,
    GofKind, Sampler, Statistic,
};
use rtt_core::limits::LimitLaw;
use rtt_core::occupancy::{occupied_clt_params, occupied_moments, occupied_pmf, sample_occupied};
use rtt_core::shuffle::{sample_random_to_top, sample_top_to_random};

#[test]
fn occupancy_sampler_matches_exact_pmf() {
    let (n, r) = (40, 55);
    let draws = run_trials(40_000, 21, None, |rng| Ok(sample_occupied(n, r, rng)? as u64)).unwrap();
    let e = EmpiricalDistribution::from_integers(&draws, Some(21)).unwrap();
    let law = LimitLaw::discrete(occupied_pmf(n, r).unwrap()).unwrap();
    let report = gof_test(&e, &law, GofKind::Chi2).unwrap();
    assert!(report.pass, "{report}");
}

#[test]
fn occupancy_clt() {
    let (n, c) = (4000usize, 1.0);
    let r = n;
    let draws = run_trials(5000, 22, None, |rng| Ok(sample_occupied(n, r, rng)? as f64)).unwrap();
    let (m, v) = occupied_clt_params(c).unwrap();
    let z: Vec<f64> = draws
        .iter()
        .map(|k| (k - m * n as f64) / (v * n as f64).sqrt())
        .collect();
    let e = EmpiricalDistribution::from_reals(z, None).unwrap();
    let report = gof_test(&e, &LimitLaw::standard_normal(), GofKind::Ks).unwrap();
    assert!(report.pass, "{report}");
    let (em, ev) = occupied_moments(n, r).unwrap();
    assert!((em / n as f64 - m).abs() < 1e-4 && (ev / n as f64 - v).abs() < 1e-4);
}

#[test]
fn top_to_random_shares_inverse_invariant_laws() {
    let (n, r, trials) = (30, 40, 20_000);
    let fwd = run_trials(trials, 31, None, |rng| {
        let d = sample_random_to_top(n, r, rng)?.deck;
        Ok((d.count_fixed_points() as u64, d.count_inversions()))
    })
    .unwrap();
    let back = run_trials(trials, 32, None, |rng| {
        let d = sample_top_to_random(n, r, rng)?;
        Ok((d.count_fixed_points() as u64, d.count_inversions()))
    })
    .unwrap();
    let pick = |v: &[(u64, u64)], f: fn(&(u64, u64)) -> u64| {
        EmpiricalDistribution::from_integers(&v.iter().map(f).collect::<Vec<_>>(), None).unwrap()
    };
    let fixed = two_sample_test(&pick(&fwd, |x| x.0), &pick(&back, |x| x.0), GofKind::Chi2).unwrap();
    let inv = two_sample_test(&pick(&fwd, |x| x.1), &pick(&back, |x| x.1), GofKind::Ks).unwrap();
    assert!(fixed.pass, "{fixed}");
    assert!(inv.pass, "{inv}");
}

#[test]
fn return_probability_by_simulation() {
    let (n, r, trials) = (12, 9, 60_000);
    let hits = run_trials(trials, 41, None, |rng| {
        let d = sample_random_to_top(n, r, rng)?.deck;
        Ok(d.entries().iter().enumerate().map(|(i, c)| (*c as usize == i + 1) as u8).collect::<Vec<_>>())
    })
    .unwrap();
    for k in 1..=n {
        let p = return_probability(n, r, k).unwrap();
        let freq = hits.iter().filter(|h| h[k - 1] == 1).count() as f64 / trials as f64;
        let se = (p * (1.0 - p) / trials as f64).sqrt();
        assert!((freq - p).abs() < 4.0 * se, "k={k}: {freq} vs {p}");
    }
}

#[test]
fn fixed_point_mean_all_samplers() {
    let (n, r) = (25, 30);
    let target = expected_fixed_points(n, r).unwrap();
    for sampler in Sampler::ALL {
        let e = run_experiment(n, r, 30_000, Statistic::FixedPoints, *sampler, 51, None).unwrap();
        let s = summarize(&e).unwrap();
        assert!((s.mean - target).abs() < 4.0 * s.se_mean, "{sampler}: {} vs {target}", s.mean);
    }
}

#[test]
fn descent_moments_all_samplers() {
    let (n, r) = (200, 150);
    let (mean, var) = descents_moments(n, r).unwrap();
    for sampler in Sampler::ALL {
        let e = run_experiment(n, r, 30_000, Statistic::Descents, *sampler, 61, None).unwrap();
        let s = summarize(&e).unwrap();
        assert!((s.mean - mean).abs() < 4.0 * s.se_mean, "{sampler}");
        assert!((s.variance - var).abs() < 4.0 * s.se_variance, "{sampler}");
    }
}

#[test]
fn decomposition_channels_agree_at_small_n() {
    for (n, r) in [(5usize, 3usize), (8, 20), (30, 10)] {
        for statistic in Statistic::ALL {
            let engine = run_experiment(n, r, 20_000, *statistic, Sampler::ShuffleEngine, 71, None).unwrap();
            for sampler in [Sampler::Resampled, Sampler::FormulaDirect] {
                let other = run_experiment(n, r, 20_000, *statistic, sampler, 72, None).unwrap();
                let report = two_sample_test(&engine, &other, GofKind::Chi2).unwrap();
                assert!(report.pass, "n={n} r={r} {statistic} {sampler}: {report}");
            }
        }
    }
}
