use rgl_core::experiment::{self, ExperimentConfig};
use rgl_core::PayoffDistribution;

fn bern(p: f64) -> PayoffDistribution {
    PayoffDistribution::bernoulli(p).unwrap()
}

fn choose(n: u64, k: u64) -> f64 {
    (0..k).fold(1.0, |acc, j| acc * (n - j) as f64 / (j + 1) as f64)
}

fn binomial_mean_tail(n: usize, q: f64, x: f64) -> f64 {
    (0..=n)
        .filter(|&k| k as f64 / n as f64 >= x)
        .map(|k| choose(n as u64, k as u64) * q.powi(k as i32) * (1.0 - q).powi((n - k) as i32))
        .sum()
}

#[test]
fn mean_equilibrium_count_uniform() {
    let res =
        experiment::run(&ExperimentConfig::new("uniform:a=0,b=1".parse().unwrap(), vec![12], 10_000, 12)).unwrap();
    let s = res.cells[0].ne_count.unwrap();
    assert!((s.mean - 1.0).abs() <= 3.0 * s.se.unwrap(), "{s:?}");
}

#[test]
fn mean_equilibrium_count_bernoulli() {
    let res = experiment::run(&ExperimentConfig::new(bern(0.5), vec![10], 10_000, 10)).unwrap();
    let s = res.cells[0].ne_count.unwrap();
    assert!((s.mean - 1.5f64.powi(10)).abs() <= 3.0 * s.se.unwrap(), "{s:?}");
}

#[test]
fn first_moment_z_scores() {
    for p in [0.3, 0.5] {
        let x_typ = p / (1.0 - p + p * p);
        for n in [8, 12] {
            for x in [x_typ - 0.1, x_typ + 0.1] {
                let r = experiment::first_moment_check(&bern(p), n, x, 10_000, 44, 1).unwrap();
                let z = r.upper.z_score.unwrap();
                assert!(z.abs() <= 4.0, "p={p} n={n} x={x}: z={z}");
                let zl = r.lower.z_score.unwrap();
                assert!(zl.abs() <= 4.0, "p={p} n={n} x={x}: lower z={zl}");
                let alpha = p * p + (1.0 - p) * (1.0 - p);
                let oracle = (1.0 + alpha).powi(n as i32) * binomial_mean_tail(n, x_typ, x);
                assert!((r.upper.exact.unwrap() - oracle).abs() < 1e-9 * oracle.max(1.0));
            }
        }
    }
}

#[test]
fn exhaustive_three_players_match_closed_form() {
    for p in [0.5, 0.3] {
        let xs = [0.0, 1.0 / 3.0, 0.5, 2.0 / 3.0, 1.0];
        let b = experiment::brute_force_expectations(3, p, &xs).unwrap();
        let alpha = p * p + (1.0 - p) * (1.0 - p);
        let growth = (1.0 + alpha).powi(3);
        assert!((b.ne.mean - growth).abs() < 1e-12);
        let pt = p / (1.0 - p + p * p);
        for t in &b.thresholds {
            let exact = growth * binomial_mean_tail(3, pt, t.x);
            assert!((t.z_plus.mean - exact).abs() < 1e-12, "p={p} x={}", t.x);
            if let Some(ratio) = t.z_plus.ratio {
                assert!(ratio.is_finite() && ratio >= 1.0);
            }
        }
    }
}

#[test]
fn second_moment_ratio_at_typical_utility() {
    let mut cfg = ExperimentConfig::new(bern(0.5), vec![16], 400, 16);
    cfg.thresholds = vec![2.0 / 3.0];
    let res = experiment::run(&cfg).unwrap();
    let z = res.cells[0].thresholds[0].z_plus;
    let m = z.count as f64;
    let second = z.variance.unwrap() * (m - 1.0) / m + z.mean * z.mean;
    let ratio = second / (z.mean * z.mean);
    assert!((1.0..=1.5).contains(&ratio), "{ratio}");
}

#[test]
fn poisson_distance_for_gaussian_payoffs() {
    let res =
        experiment::run(&ExperimentConfig::new("gaussian:mu=0,sigma=1".parse().unwrap(), vec![10], 20_000, 3)).unwrap();
    let r = experiment::poisson_check(&res.cells[0], res.theory.alpha).unwrap();
    assert!(r.warning.is_none());
    assert!(r.total_variation <= 0.02, "{r:?}");
}

#[test]
fn growth_target_for_skewed_bernoulli() {
    let res = experiment::run(&ExperimentConfig::new(bern(0.3), vec![16], 100, 8)).unwrap();
    let g = experiment::growth_check(&res.cells[0], res.theory.alpha).unwrap();
    assert!((g.target - 1.58f64.ln()).abs() < 1e-15);
    assert!(g.deviation.abs() <= 0.05, "{g:?}");
}
