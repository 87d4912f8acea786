use proptest::prelude::*;
use rand::SeedableRng;
use rand_xoshiro::Xoshiro256PlusPlus;

use rgl_core::game::{Game, MemoryBudget, ReportConfig};
use rgl_core::ldp::RateFunction;
use rgl_core::{Continuous, PayoffDistribution};

fn discrete_law() -> impl Strategy<Value = PayoffDistribution> {
    prop::collection::vec((0.05f64..1.0, 0.1f64..2.0), 1..5).prop_map(|parts| {
        let total: f64 = parts.iter().map(|p| p.0).sum();
        let mut v = 0.0;
        let mut values = Vec::new();
        let mut masses = Vec::new();
        for (m, gap) in &parts {
            v += gap;
            values.push(v);
            masses.push(m / total);
        }
        let drift: f64 = 1.0 - masses.iter().sum::<f64>();
        *masses.last_mut().unwrap() += drift;
        PayoffDistribution::discrete(values, masses).unwrap()
    })
}

fn any_law() -> impl Strategy<Value = PayoffDistribution> {
    prop_oneof![
        (0.01f64..0.99).prop_map(|p| PayoffDistribution::bernoulli(p).unwrap()),
        discrete_law(),
        (-2.0f64..2.0, 0.1f64..3.0).prop_map(|(a, w)| PayoffDistribution::uniform(a, a + w).unwrap()),
        (-2.0f64..2.0, 0.2f64..2.0).prop_map(|(mu, s)| PayoffDistribution::gaussian(mu, s).unwrap()),
        (0.1f64..0.9).prop_map(|w| {
            let rest = (1.0 - w) / 2.0;
            format!("mixed:cont=uniform(0,1);w={w};atoms=0.25:{rest},0.75:{}", 1.0 - w - rest).parse().unwrap()
        }),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn tie_and_win_probabilities_partition(d in any_law()) {
        let (alpha, beta) = d.alpha_beta();
        prop_assert!((alpha + 2.0 * beta - 1.0).abs() < 1e-12);
        prop_assert!((0.0..=1.0).contains(&alpha));
    }

    #[test]
    fn conditioned_mgf_is_at_most_twice_the_base(d in any_law(), t in -3.0f64..3.0) {
        let base = d.mgf(t).unwrap();
        let cond = d.condition_on_max().mgf(t).unwrap();
        prop_assert!(cond <= 2.0 * base * (1.0 + 1e-9), "{cond} vs {base}");
    }

    #[test]
    fn conditioned_law_is_stochastically_larger(d in any_law(), u in 0.0f64..1.0) {
        let (lo, hi) = d.hull();
        let lo = if lo.is_finite() { lo } else { -6.0 };
        let hi = if hi.is_finite() { hi } else { 6.0 };
        let y = lo + (hi - lo) * u;
        prop_assert!(d.condition_on_max().cdf(y) <= d.cdf(y) + 1e-12);
    }

    #[test]
    fn rate_is_nonnegative_and_convex(d in discrete_law()) {
        let rate = RateFunction::of(&d).unwrap();
        let (lo, hi) = (rate.essential_infimum(), rate.essential_supremum());
        prop_assume!(hi > lo);
        let xs: Vec<f64> = (0..=40).map(|k| lo + (hi - lo) * k as f64 / 40.0).collect();
        let vals: Vec<f64> = xs.iter().map(|&x| rate.rate(x).unwrap()).collect();
        for v in &vals {
            prop_assert!(*v >= 0.0);
        }
        for w in vals.windows(3) {
            prop_assert!(w[0] + w[2] - 2.0 * w[1] >= -1e-9, "{w:?}");
        }
        prop_assert!(rate.rate(rate.mean_value()).unwrap().abs() < 1e-12);
    }

    #[test]
    fn fast_enumeration_matches_definition(d in any_law(), n in 1usize..9, seed in any::<u64>()) {
        let g = Game::generate(n, &d, seed, &MemoryBudget::default()).unwrap();
        let naive: Vec<u32> = (0..1usize << n).filter(|&s| g.is_pne(s)).map(|s| s as u32).collect();
        prop_assert_eq!(g.enumerate_pne(), naive);
    }

    #[test]
    fn counters_are_monotone(d in any_law(), n in 1usize..9, seed in any::<u64>()) {
        let g = Game::generate(n, &d, seed, &MemoryBudget::default()).unwrap();
        let xs: Vec<f64> = (-20..=20).map(|k| k as f64 / 4.0).collect();
        let r = g.report(&ReportConfig::new(xs, vec![0.1, 0.5], 0.0)).unwrap();
        let profiles = 1u64 << n;
        for t in &r.thresholds {
            prop_assert!(t.z_plus <= t.w_plus && t.z_minus <= t.w_minus);
            prop_assert!(t.w_plus + t.w_minus >= profiles);
            prop_assert!(t.z_plus + t.z_minus >= r.ne_count);
        }
        for w in r.thresholds.windows(2) {
            prop_assert!(w[1].w_plus <= w[0].w_plus && w[1].z_plus <= w[0].z_plus);
            prop_assert!(w[1].w_minus >= w[0].w_minus && w[1].z_minus >= w[0].z_minus);
        }
        prop_assert!(r.typ_counts[0].count <= r.typ_counts[1].count);
        prop_assert!(r.typ_counts[1].count <= r.ne_count);
        if let (Some(b), Some(w)) = (r.beq, r.weq) {
            prop_assert!(w <= b && b <= r.so);
        }
    }

    #[test]
    fn text_form_round_trips(d in any_law()) {
        let back: PayoffDistribution = d.to_string().parse().unwrap();
        prop_assert_eq!(back, d);
    }
}

#[test]
fn continuous_draws_have_no_ties() {
    let d = PayoffDistribution::uniform(0.0, 1.0).unwrap();
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(2024);
    let mut buf = vec![0.0; 2_000_000];
    d.sample_into(&mut rng, &mut buf);
    assert!(buf.chunks(2).all(|p| p[0] != p[1]));
}

#[test]
fn bulk_sampling_matches_single_draws() {
    for d in ["uniform:a=-1,b=2", "gaussian:mu=0,sigma=1", "mixed:cont=uniform(0,1);w=0.5;atoms=2:0.5"] {
        let d: PayoffDistribution = d.parse().unwrap();
        let mut a = Xoshiro256PlusPlus::seed_from_u64(5);
        let mut b = a.clone();
        let mut bulk = vec![0.0; 100];
        d.sample_into(&mut a, &mut bulk);
        let single: Vec<f64> = (0..100).map(|_| d.sample(&mut b)).collect();
        assert_eq!(bulk, single);
    }
}

/// Dvoretzky–Kiefer–Wolfowitz band at confidence 1 − 1e-6.
fn dkw_band(samples: usize) -> f64 {
    ((2.0f64 / 1e-6).ln() / (2.0 * samples as f64)).sqrt()
}

#[test]
fn conditioned_cdf_matches_rejection_sampling() {
    let laws = [
        "uniform:a=0,b=1",
        "gaussian:mu=1,sigma=2",
        "discrete:values=0,1,2;masses=0.2,0.5,0.3",
        "mixed:cont=gaussian(0,1);w=0.6;atoms=-0.5:0.1,1:0.3",
    ];
    let draws = 200_000;
    for spec in laws {
        let d: PayoffDistribution = spec.parse().unwrap();
        let cond = d.condition_on_max();
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(77);
        let mut kept = Vec::with_capacity(draws);
        while kept.len() < draws {
            let (x, y) = (d.sample(&mut rng), d.sample(&mut rng));
            if x >= y {
                kept.push(x);
            }
        }
        kept.sort_by(f64::total_cmp);
        let mut worst: f64 = 0.0;
        let mut i = 0;
        while i < kept.len() {
            let v = kept[i];
            let mut j = i;
            while j < kept.len() && kept[j] == v {
                j += 1;
            }
            let below = i as f64 / draws as f64;
            let upto = j as f64 / draws as f64;
            worst = worst.max((cond.cdf_left(v) - below).abs()).max((cond.cdf(v) - upto).abs());
            i = j;
        }
        assert!(worst < dkw_band(draws), "{spec}: sup distance {worst}");
    }
}

#[test]
fn conditioned_uniform_has_squared_cdf() {
    let cond = PayoffDistribution::uniform(0.0, 1.0).unwrap().condition_on_max();
    for k in 0..=10 {
        let y = k as f64 / 10.0;
        assert!((cond.cdf(y) - y * y).abs() < 1e-12);
    }
    let mixed = PayoffDistribution::mixed(Continuous::Uniform { a: 0.0, b: 1.0 }, 0.5, vec![]);
    assert!(mixed.is_err());
}
