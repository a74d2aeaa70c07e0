use std::collections::HashMap;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use steinkit::exactnum::{int, ratio, to_f64};
use steinkit::jack_model::{self, JackParams, Partition};
use steinkit::normal;
use steinkit::rng::SeedStream;

#[test]
fn kerov_sampler_frequencies_match_jack_law() {
    let (n, alpha) = (5u32, 2.0);
    let parts = jack_model::enumerate_partitions(n).unwrap();
    let expected: Vec<f64> = parts
        .iter()
        .map(|p| to_f64(&jack_model::jack_probability(p, &int(2))))
        .collect();
    let mut counts: HashMap<Partition, u64> = HashMap::new();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let draws = 100_000;
    for _ in 0..draws {
        *counts
            .entry(
                jack_model::kerov_sample(n, alpha, &mut rng)
                    .unwrap()
                    .partition,
            )
            .or_default() += 1;
    }
    let stat: f64 = parts
        .iter()
        .zip(&expected)
        .map(|(p, q)| {
            let e = q * draws as f64;
            (counts.get(p).copied().unwrap_or(0) as f64 - e).powi(2) / e
        })
        .sum();
    // 0.999 quantile of chi-square with 6 degrees of freedom.
    assert!(stat < 22.46, "chi-square {stat}");
}

#[test]
fn sampled_path_contents_add_up() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..200 {
        let path = jack_model::kerov_sample(25, 0.7, &mut rng).unwrap();
        let total = path
            .contents()
            .fold(jack_model::Content::default(), |a, c| a + c);
        assert_eq!(total, path.partition.content_sum());
        assert_eq!(path.added.len(), 25);
    }
}

#[test]
fn zero_bias_coupling_by_simulation() {
    // E[W^3] = 2 E[W*] and E[W^2] = 1.
    let (n, alpha) = (20u32, 3.0);
    let seed = SeedStream::new(3);
    let draws = steinkit::rng::par_samples(seed, 200_000, |rng| {
        jack_model::zero_bias_sample(n, alpha, rng).unwrap()
    });
    let k = draws.len() as f64;
    let mean =
        |f: &dyn Fn(&jack_model::JackCouplingSample) -> f64| draws.iter().map(f).sum::<f64>() / k;
    let sd = |f: &dyn Fn(&jack_model::JackCouplingSample) -> f64| {
        let m = mean(f);
        (draws.iter().map(|s| (f(s) - m).powi(2)).sum::<f64>() / k).sqrt() / k.sqrt()
    };
    let w2 = mean(&|s| s.w * s.w);
    assert!((w2 - 1.0).abs() < 5.0 * sd(&|s| s.w * s.w), "E W^2 = {w2}");
    let lhs = mean(&|s| s.w.powi(3));
    let rhs = 2.0 * mean(&|s| s.w_star);
    let tol = 5.0 * (sd(&|s| s.w.powi(3)) + 2.0 * sd(&|s| s.w_star));
    assert!((lhs - rhs).abs() < tol, "{lhs} vs {rhs}");
}

#[test]
fn two_box_distance_closed_form() {
    for (a, b) in [(1i64, 1i64), (3, 1), (1, 4), (9, 2)] {
        let alpha = ratio(a, b);
        let af = a as f64 / b as f64;
        let (hi, lo) = (af.sqrt(), -1.0 / af.sqrt());
        let p_lo = af / (1.0 + af);
        let by_hand = [
            normal::cdf(lo),
            (p_lo - normal::cdf(lo)).abs(),
            (p_lo - normal::cdf(hi)).abs(),
            1.0 - normal::cdf(hi),
        ]
        .into_iter()
        .fold(0.0, f64::max);
        let exact = jack_model::exact_kolmogorov(&JackParams::new(2, alpha).unwrap()).unwrap();
        assert!(
            (exact - by_hand).abs() < 1e-15,
            "alpha {a}/{b}: {exact} vs {by_hand}"
        );
    }
}

#[test]
fn truncation_diagnostics_in_region() {
    let (n, eps) = (40u32, 0.4);
    let alpha = f64::from(n).powf(1.5);
    let r = jack_model::truncation_diagnostics(n, alpha, eps, SeedStream::new(4), 20_000).unwrap();
    assert!(r.d_bounded_on_f, "{r:?}");
    let se = (r.f_complement_bound * (1.0 - r.f_complement_bound.min(1.0)) / 20_000.0).sqrt();
    assert!(
        r.f_complement_freq <= r.f_complement_bound + 5.0 * se,
        "{r:?}"
    );
}

#[test]
fn monte_carlo_distance_within_band_of_exact() {
    let params = JackParams::new(8, ratio(3, 2)).unwrap();
    let exact = jack_model::exact_kolmogorov(&params).unwrap();
    let est = jack_model::kolmogorov_estimate(8, 1.5, SeedStream::new(5), 50_000, 0.01).unwrap();
    assert!((est.estimate.delta_hat - exact).abs() <= est.estimate.dkw_band);
}

fn partition_strategy() -> impl Strategy<Value = Partition> {
    prop::collection::vec(1u32..12, 1..10).prop_map(|mut v| {
        v.sort_unstable_by(|a, b| b.cmp(a));
        Partition::new(v).unwrap()
    })
}

proptest! {
    #[test]
    fn display_parse_round_trip(p in partition_strategy()) {
        prop_assert_eq!(p.to_string().parse::<Partition>().unwrap(), p);
    }

    #[test]
    fn conjugation_is_an_involution(p in partition_strategy()) {
        let q = p.conjugate();
        prop_assert_eq!(q.size(), p.size());
        prop_assert_eq!(q.first_row(), p.first_column());
        prop_assert_eq!(q.conjugate(), p);
    }

    #[test]
    fn transition_law_sums_to_one(p in partition_strategy(), a in 1i64..20, b in 1i64..20) {
        let alpha = ratio(a, b);
        prop_assert_eq!(jack_model::kerov_transition_probs_local(&p, &alpha).total(), int(1));
    }

    #[test]
    fn arms_and_legs_count_boxes(p in partition_strategy()) {
        let conj = p.conjugate();
        for (r, c) in p.boxes() {
            let (a, l) = jack_model::arm_leg(&p, (r, c)).unwrap();
            prop_assert_eq!(a + 1 + c as u32, p.parts()[r]);
            prop_assert_eq!(l + 1 + r as u32, conj.parts()[c]);
        }
    }
}
