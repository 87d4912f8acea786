//! Monte Carlo and exhaustive-enumeration harness: replicated games per
//! player count, aggregate statistics, limit checks, figure data and the
//! result-file writers.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dist::PayoffDistribution;
use crate::error::{Error, Result};
use crate::game::{EquilibriumReport, Game, MemoryBudget, ReportConfig};
use crate::ldp::{self, entropy};

/// Largest player count accepted by the exact first-moment check.
pub const FIRST_MOMENT_MAX_PLAYERS: usize = 20;
/// Exhaustive enumeration covers at most `2^24` payoff tables.
pub const BRUTE_FORCE_MAX_BITS: usize = 24;
/// Equilibrium counts above this are lumped in the Poisson comparison.
pub const POISSON_SUPPORT: u64 = 10;
/// Below this many replications the Poisson distance is flagged.
pub const POISSON_MIN_REPLICATIONS: usize = 10_000;

/// SplitMix64 finalizer.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of replication `rep` at player count `n`:
/// `splitmix64(splitmix64(splitmix64(master) ^ n) ^ rep)`.
pub fn replication_seed(master: u64, n: usize, rep: usize) -> u64 {
    splitmix64(splitmix64(splitmix64(master) ^ n as u64) ^ rep as u64)
}

mod dist_text {
    use super::PayoffDistribution;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(d: &PayoffDistribution, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(d)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(de: D) -> Result<PayoffDistribution, D::Error> {
        String::deserialize(de)?.parse().map_err(serde::de::Error::custom)
    }
}

fn default_workers() -> usize {
    1
}

/// Everything that determines a run. Worker count and memory budget do not
/// affect results and are left out of the serialized form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(with = "dist_text")]
    pub dist: PayoffDistribution,
    pub n: Vec<usize>,
    pub replications: usize,
    pub seed: u64,
    #[serde(default)]
    pub thresholds: Vec<f64>,
    #[serde(default)]
    pub epsilons: Vec<f64>,
    #[serde(default = "default_workers", skip_serializing)]
    pub workers: usize,
    #[serde(default, skip_serializing)]
    pub mem_cap_bytes: Option<u64>,
}

impl ExperimentConfig {
    pub fn new(dist: PayoffDistribution, n: Vec<usize>, replications: usize, seed: u64) -> Self {
        ExperimentConfig {
            dist,
            n,
            replications,
            seed,
            thresholds: Vec::new(),
            epsilons: Vec::new(),
            workers: 1,
            mem_cap_bytes: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.replications == 0 {
            return Err(Error::invalid_arg("replications must be at least 1"));
        }
        if self.n.is_empty() {
            return Err(Error::invalid_arg("at least one player count is required"));
        }
        if let Some(&n) = self.n.iter().find(|&&n| !(1..=crate::game::MAX_PLAYERS).contains(&n)) {
            return Err(Error::invalid_arg(format!("player count {n} must lie in 1..={}", crate::game::MAX_PLAYERS)));
        }
        if self.workers == 0 {
            return Err(Error::invalid_arg("workers must be at least 1"));
        }
        if self.thresholds.iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid_arg("thresholds must be finite"));
        }
        if self.epsilons.iter().any(|e| !(e.is_finite() && *e > 0.0)) {
            return Err(Error::invalid_arg("epsilons must be positive and finite"));
        }
        Ok(())
    }

    pub fn budget(&self) -> Result<MemoryBudget> {
        match self.mem_cap_bytes {
            Some(b) => Ok(MemoryBudget::bytes(b)),
            None => MemoryBudget::from_env(),
        }
    }
}

/// Limit values the empirical aggregates are compared against.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TheoryTargets {
    pub alpha: f64,
    pub x_typ: f64,
    pub growth_rate: f64,
    pub x_opt: Option<f64>,
    pub x_beq: Option<f64>,
    pub x_weq: Option<f64>,
}

impl TheoryTargets {
    pub fn of(d: &PayoffDistribution) -> Result<Self> {
        let alpha = d.alpha();
        let x_typ = d.condition_on_max().mean()?;
        let lim = ldp::limits(d).ok();
        Ok(TheoryTargets {
            alpha,
            x_typ,
            growth_rate: alpha.ln_1p(),
            x_opt: lim.map(|l| l.x_opt),
            x_beq: lim.map(|l| l.x_beq),
            x_weq: lim.map(|l| l.x_weq),
        })
    }
}

/// One row of `results.csv`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Replication {
    pub n: usize,
    pub rep: usize,
    pub seed: u64,
    pub ne_count: u64,
    pub so: f64,
    pub beq: Option<f64>,
    pub weq: Option<f64>,
    pub typ_counts: Vec<u64>,
    /// `(w_plus, w_minus, z_plus, z_minus)` per threshold.
    pub counters: Vec<[u64; 4]>,
}

impl Replication {
    fn from_report(rep: usize, r: EquilibriumReport) -> Self {
        Replication {
            n: r.n,
            rep,
            seed: r.seed,
            ne_count: r.ne_count,
            so: r.so,
            beq: r.beq,
            weq: r.weq,
            typ_counts: r.typ_counts.iter().map(|t| t.count).collect(),
            counters: r.thresholds.iter().map(|t| [t.w_plus, t.w_minus, t.z_plus, t.z_minus]).collect(),
        }
    }
}

/// Sample mean with its spread; `variance` and `se` need two observations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeanStat {
    pub count: usize,
    pub mean: f64,
    pub variance: Option<f64>,
    pub se: Option<f64>,
}

impl MeanStat {
    pub fn of(values: &[f64]) -> Option<MeanStat> {
        if values.is_empty() {
            return None;
        }
        let count = values.len();
        let mean = values.iter().sum::<f64>() / count as f64;
        let (variance, se) = if count > 1 {
            let v = values.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (count - 1) as f64;
            (Some(v), Some((v / count as f64).sqrt()))
        } else {
            (None, None)
        };
        Some(MeanStat { count, mean, variance, se })
    }
}

/// Statistic defined only on games with at least one equilibrium.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConditionalStat {
    /// Fraction of replications where the conditioning event held.
    pub frequency: f64,
    pub stat: Option<MeanStat>,
}

impl ConditionalStat {
    fn of(values: &[f64], total: usize) -> Self {
        ConditionalStat { frequency: values.len() as f64 / total as f64, stat: MeanStat::of(values) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PmfEntry {
    pub k: u64,
    pub probability: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThresholdSummary {
    pub x: f64,
    pub w_plus: MeanStat,
    pub w_minus: MeanStat,
    pub z_plus: MeanStat,
    pub z_minus: MeanStat,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TypSummary {
    pub epsilon: f64,
    /// Conditional mean of `|NE_typ,ε| / |NE|`.
    pub fraction: ConditionalStat,
}

/// Aggregates for one player count.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellSummary {
    pub n: usize,
    pub replications: usize,
    pub completed: usize,
    /// Set when the cell could not run; the cell is then partial.
    pub error: Option<String>,
    pub expected_ne_count: f64,
    pub ne_pmf: Vec<PmfEntry>,
    pub ne_count: Option<MeanStat>,
    pub so: Option<MeanStat>,
    pub so_at_max_frequency: Option<f64>,
    pub beq: ConditionalStat,
    pub weq: ConditionalStat,
    pub log_ne_rate: ConditionalStat,
    pub thresholds: Vec<ThresholdSummary>,
    pub typ_fraction: Vec<TypSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Calibration {
    pub claim: &'static str,
    pub tolerance: &'static str,
}

/// Finite-n tolerances used by the checks; only the limits are theorems.
pub const CALIBRATIONS: [Calibration; 4] = [
    Calibration {
        claim: "equilibrium count converges to Poisson(1) for atomless payoffs",
        tolerance: "TV <= 0.02 at n = 14, M = 1e5",
    },
    Calibration { claim: "(1/n) log |NE| converges to log(1 + alpha)", tolerance: "within 0.05 at n = 20" },
    Calibration { claim: "|NE_typ,eps| / |NE| converges to 1", tolerance: ">= 0.9 at n = 20, eps = 0.1" },
    Calibration { claim: "first-moment identity for |Z+_x|", tolerance: "|z-score| <= 4" },
];

/// Limit comparison attached to each completed cell: the Poisson distance
/// for atomless laws, the growth rate otherwise.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "check", rename_all = "lowercase")]
pub enum LimitCheck {
    Poisson(PoissonReport),
    Growth(GrowthReport),
}

impl LimitCheck {
    fn of(cell: &CellSummary, alpha: f64) -> Option<LimitCheck> {
        if alpha > 0.0 {
            growth_check(cell, alpha).ok().map(LimitCheck::Growth)
        } else {
            poisson_check(cell, alpha).ok().map(LimitCheck::Poisson)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentResult {
    pub config: ExperimentConfig,
    pub theory: TheoryTargets,
    pub cells: Vec<CellSummary>,
    pub checks: Vec<LimitCheck>,
    pub calibrations: Vec<Calibration>,
    #[serde(skip)]
    pub replications: Vec<Replication>,
}

impl ExperimentResult {
    pub fn cell(&self, n: usize) -> Option<&CellSummary> {
        self.cells.iter().find(|c| c.n == n)
    }

    pub fn is_partial(&self) -> bool {
        self.cells.iter().any(|c| c.error.is_some())
    }
}

fn pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::invalid_arg(format!("cannot start {workers} workers: {e}")))
}

/// Runs `replications` independent games per player count. Results are
/// collected in replication order, so they do not depend on `workers`.
pub fn run(config: &ExperimentConfig) -> Result<ExperimentResult> {
    config.validate()?;
    let budget = config.budget()?;
    let theory = TheoryTargets::of(&config.dist)?;
    let report_cfg = ReportConfig {
        thresholds: config.thresholds.clone(),
        epsilons: config.epsilons.clone(),
        x_typ: theory.x_typ,
        profile_cap: 0,
    };
    let pool = pool(config.workers)?;
    let mut cells = Vec::with_capacity(config.n.len());
    let mut rows = Vec::new();
    for &n in &config.n {
        let bits = config.dist.bernoulli_p().is_some();
        if let Err(e) = budget.check(n, bits) {
            if !e.is_capacity() {
                return Err(e);
            }
            cells.push(empty_cell(n, config, &theory, e.to_string()));
            continue;
        }
        let reps: Vec<Result<Replication>> = pool.install(|| {
            (0..config.replications)
                .into_par_iter()
                .map(|rep| {
                    let seed = replication_seed(config.seed, n, rep);
                    let game = Game::generate(n, &config.dist, seed, &budget)?;
                    Ok(Replication::from_report(rep, game.report(&report_cfg)?))
                })
                .collect()
        });
        let reps: Vec<Replication> = reps.into_iter().collect::<Result<_>>()?;
        cells.push(summarize_cell(n, config, &theory, &reps));
        rows.extend(reps);
    }
    let checks = cells.iter().filter_map(|c| LimitCheck::of(c, theory.alpha)).collect();
    Ok(ExperimentResult {
        config: config.clone(),
        theory,
        cells,
        checks,
        calibrations: CALIBRATIONS.to_vec(),
        replications: rows,
    })
}

fn empty_cell(n: usize, config: &ExperimentConfig, theory: &TheoryTargets, error: String) -> CellSummary {
    let none = ConditionalStat { frequency: 0.0, stat: None };
    CellSummary {
        n,
        replications: config.replications,
        completed: 0,
        error: Some(error),
        expected_ne_count: (1.0 + theory.alpha).powi(n as i32),
        ne_pmf: Vec::new(),
        ne_count: None,
        so: None,
        so_at_max_frequency: None,
        beq: none,
        weq: none,
        log_ne_rate: none,
        thresholds: Vec::new(),
        typ_fraction: Vec::new(),
    }
}

fn summarize_cell(n: usize, config: &ExperimentConfig, theory: &TheoryTargets, reps: &[Replication]) -> CellSummary {
    let m = reps.len();
    let col = |f: &dyn Fn(&Replication) -> f64| -> Vec<f64> { reps.iter().map(f).collect() };
    let with_ne: Vec<&Replication> = reps.iter().filter(|r| r.ne_count > 0).collect();
    let mut pmf: BTreeMap<u64, usize> = BTreeMap::new();
    for r in reps {
        *pmf.entry(r.ne_count).or_default() += 1;
    }
    let top = config.dist.hull().1;
    let thresholds = config
        .thresholds
        .iter()
        .enumerate()
        .map(|(j, &x)| {
            let stat = |k: usize| MeanStat::of(&col(&|r| r.counters[j][k] as f64)).expect("m >= 1");
            ThresholdSummary { x, w_plus: stat(0), w_minus: stat(1), z_plus: stat(2), z_minus: stat(3) }
        })
        .collect();
    let typ_fraction = config
        .epsilons
        .iter()
        .enumerate()
        .map(|(j, &epsilon)| {
            let v: Vec<f64> = with_ne.iter().map(|r| r.typ_counts[j] as f64 / r.ne_count as f64).collect();
            TypSummary { epsilon, fraction: ConditionalStat::of(&v, m) }
        })
        .collect();
    CellSummary {
        n,
        replications: config.replications,
        completed: m,
        error: None,
        expected_ne_count: (1.0 + theory.alpha).powi(n as i32),
        ne_pmf: pmf.into_iter().map(|(k, c)| PmfEntry { k, probability: c as f64 / m as f64 }).collect(),
        ne_count: MeanStat::of(&col(&|r| r.ne_count as f64)),
        so: MeanStat::of(&col(&|r| r.so)),
        so_at_max_frequency: top.is_finite().then(|| reps.iter().filter(|r| r.so == top).count() as f64 / m as f64),
        beq: ConditionalStat::of(&with_ne.iter().map(|r| r.beq.expect("has ne")).collect::<Vec<_>>(), m),
        weq: ConditionalStat::of(&with_ne.iter().map(|r| r.weq.expect("has ne")).collect::<Vec<_>>(), m),
        log_ne_rate: ConditionalStat::of(
            &with_ne.iter().map(|r| (r.ne_count as f64).ln() / n as f64).collect::<Vec<_>>(),
            m,
        ),
        thresholds,
        typ_fraction,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PoissonReport {
    pub n: usize,
    pub replications: usize,
    pub total_variation: f64,
    /// Empirical and Poisson mass above the truncation point.
    pub residual_empirical: f64,
    pub residual_poisson: f64,
    pub warning: Option<String>,
}

/// Total-variation distance between the equilibrium-count pmf and Poisson(1)
/// over `k = 0..=10` plus the lumped tail.
pub fn poisson_check(cell: &CellSummary, alpha: f64) -> Result<PoissonReport> {
    if alpha > 0.0 {
        return Err(Error::Refused(format!("Poisson limit needs an atomless law, alpha = {alpha}")));
    }
    if cell.completed == 0 {
        return Err(Error::Refused(format!("cell n = {} has no replications", cell.n)));
    }
    let mut poisson = Vec::with_capacity(POISSON_SUPPORT as usize + 1);
    let mut term = (-1.0f64).exp();
    for k in 0..=POISSON_SUPPORT {
        if k > 0 {
            term /= k as f64;
        }
        poisson.push(term);
    }
    let mut empirical = vec![0.0; poisson.len()];
    let mut residual_empirical = 0.0;
    for e in &cell.ne_pmf {
        match empirical.get_mut(e.k as usize) {
            Some(slot) => *slot += e.probability,
            None => residual_empirical += e.probability,
        }
    }
    let residual_poisson = 1.0 - poisson.iter().sum::<f64>();
    let body: f64 = empirical.iter().zip(&poisson).map(|(a, b)| (a - b).abs()).sum();
    let warning = (cell.completed < POISSON_MIN_REPLICATIONS)
        .then(|| format!("only {} replications; the distance is dominated by sampling noise", cell.completed));
    Ok(PoissonReport {
        n: cell.n,
        replications: cell.completed,
        total_variation: 0.5 * (body + (residual_empirical - residual_poisson).abs()),
        residual_empirical,
        residual_poisson,
        warning,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GrowthReport {
    pub n: usize,
    pub mean: f64,
    pub se: Option<f64>,
    pub target: f64,
    pub deviation: f64,
    pub conditioning_frequency: f64,
}

/// Mean of `(1/n) ln |NE|` over games with an equilibrium against `ln(1+α)`.
pub fn growth_check(cell: &CellSummary, alpha: f64) -> Result<GrowthReport> {
    if alpha <= 0.0 {
        return Err(Error::Refused("exponential growth needs a law with atoms (alpha > 0)".into()));
    }
    let stat = cell
        .log_ne_rate
        .stat
        .ok_or_else(|| Error::Refused(format!("cell n = {} has no game with an equilibrium", cell.n)))?;
    let target = alpha.ln_1p();
    Ok(GrowthReport {
        n: cell.n,
        mean: stat.mean,
        se: stat.se,
        target,
        deviation: stat.mean - target,
        conditioning_frequency: cell.log_ne_rate.frequency,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MomentComparison {
    /// Exact expectation; absent for laws with a continuous part.
    pub exact: Option<f64>,
    pub mc_mean: f64,
    pub mc_se: Option<f64>,
    pub z_score: Option<f64>,
}

impl MomentComparison {
    fn new(exact: Option<f64>, stat: &MeanStat) -> Self {
        let z_score = match (exact, stat.se) {
            (Some(e), Some(se)) if se > 0.0 => Some((stat.mean - e) / se),
            (Some(e), _) if stat.mean == e => Some(0.0),
            _ => None,
        };
        MomentComparison { exact, mc_mean: stat.mean, mc_se: stat.se, z_score }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FirstMomentReport {
    pub n: usize,
    pub x: f64,
    pub replications: usize,
    /// `E|Z⁺_x|`: equilibria with average utility at least `x`.
    pub upper: MomentComparison,
    /// `E|Z⁻_x|`: equilibria with average utility at most `x`.
    pub lower: MomentComparison,
}

/// Distribution of the mean of `n` i.i.d. draws from the atoms, as
/// `(mean, probability)` over all compositions.
fn mean_of_atoms(values: &[f64], masses: &[f64], n: usize) -> Vec<(f64, f64)> {
    let Some((last, init)) = values.split_last() else {
        return Vec::new();
    };
    // (draws left, running sum, probability so far)
    let mut partial = vec![(n, 0.0f64, 1.0f64)];
    for (v, m) in init.iter().zip(masses) {
        let mut next = Vec::new();
        for &(left, sum, coef) in &partial {
            let mut binom = 1.0;
            for c in 0..=left {
                if c > 0 {
                    binom = binom * (left - c + 1) as f64 / c as f64;
                }
                next.push((left - c, sum + c as f64 * v, coef * binom * m.powi(c as i32)));
            }
        }
        partial = next;
    }
    let m_last = masses[init.len()];
    partial
        .into_iter()
        .map(|(left, sum, coef)| ((sum + left as f64 * last) / n as f64, coef * m_last.powi(left as i32)))
        .collect()
}

/// Exact `(E|Z⁺_x|, E|Z⁻_x|) = (1+α)^n · (P(Ȳ ≥ x), P(Ȳ ≤ x))` with `Y ~ F̃`,
/// for purely atomic laws.
pub fn exact_first_moments(d: &PayoffDistribution, n: usize, x: f64) -> Result<(f64, f64)> {
    if d.continuous_part().is_some() {
        return Err(Error::Refused("exact first moments need a purely atomic law".into()));
    }
    if !(1..=FIRST_MOMENT_MAX_PLAYERS).contains(&n) {
        return Err(Error::invalid_arg(format!("exact first moments need n in 1..={FIRST_MOMENT_MAX_PLAYERS}")));
    }
    let cond = d.condition_on_max();
    let atoms: Vec<_> = cond.atoms().iter().filter(|a| a.mass > 0.0).collect();
    let values: Vec<f64> = atoms.iter().map(|a| a.value).collect();
    let masses: Vec<f64> = atoms.iter().map(|a| a.mass).collect();
    let scale = (1.0 + d.alpha()).powi(n as i32);
    let (mut up, mut down) = (0.0, 0.0);
    for (mean, p) in mean_of_atoms(&values, &masses, n) {
        if mean >= x {
            up += p;
        }
        if mean <= x {
            down += p;
        }
    }
    Ok((scale * up, scale * down))
}

/// Compares the exact first moments of `|Z±_x|` with a Monte Carlo run.
/// The Monte Carlo side also works for continuous laws.
pub fn first_moment_check(
    d: &PayoffDistribution,
    n: usize,
    x: f64,
    replications: usize,
    seed: u64,
    workers: usize,
) -> Result<FirstMomentReport> {
    if n > FIRST_MOMENT_MAX_PLAYERS {
        return Err(Error::invalid_arg(format!("first-moment check needs n <= {FIRST_MOMENT_MAX_PLAYERS}")));
    }
    let exact = exact_first_moments(d, n, x).ok();
    let mut cfg = ExperimentConfig::new(d.clone(), vec![n], replications, seed);
    cfg.thresholds = vec![x];
    cfg.workers = workers;
    let res = run(&cfg)?;
    let cell = res.cell(n).expect("single cell");
    if let Some(e) = &cell.error {
        return Err(Error::Refused(e.clone()));
    }
    let t = &cell.thresholds[0];
    Ok(FirstMomentReport {
        n,
        x,
        replications,
        upper: MomentComparison::new(exact.map(|e| e.0), &t.z_plus),
        lower: MomentComparison::new(exact.map(|e| e.1), &t.z_minus),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExactMoments {
    pub mean: f64,
    pub second: f64,
    pub variance: f64,
    /// `E[Z²] / E[Z]²`; absent when the mean vanishes.
    pub ratio: Option<f64>,
}

impl ExactMoments {
    fn new(mean: f64, second: f64) -> Self {
        ExactMoments {
            mean,
            second,
            variance: second - mean * mean,
            ratio: (mean > 0.0).then(|| second / (mean * mean)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThresholdMoments {
    pub x: f64,
    pub z_plus: ExactMoments,
    pub z_minus: ExactMoments,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BruteForce {
    pub n: usize,
    pub p: f64,
    pub tables: u64,
    pub ne: ExactMoments,
    pub thresholds: Vec<ThresholdMoments>,
}

/// Exact moments for Bernoulli(p) games by enumerating every payoff table,
/// each weighted by `p^ones (1−p)^zeros`.
pub fn brute_force_expectations(n: usize, p: f64, thresholds: &[f64]) -> Result<BruteForce> {
    if n == 0 || n << n > BRUTE_FORCE_MAX_BITS {
        return Err(Error::invalid_arg(format!(
            "exhaustive enumeration needs n * 2^n <= {BRUTE_FORCE_MAX_BITS}, i.e. n <= 3; got n = {n}"
        )));
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::invalid_arg(format!("p must lie in [0, 1], got {p}")));
    }
    if thresholds.iter().any(|x| !x.is_finite()) {
        return Err(Error::invalid_arg("thresholds must be finite"));
    }
    let profiles = 1usize << n;
    let bits = n * profiles;
    // Integer sums grouped by the number of one-payoffs in the table.
    let mut ne = vec![[0u64; 2]; bits + 1];
    let mut zp = vec![vec![[0u64; 2]; bits + 1]; thresholds.len()];
    let mut zm = zp.clone();
    for code in 0u64..1 << bits {
        let ones = code.count_ones() as usize;
        let u = |i: usize, s: usize| (code >> (i * profiles + s)) & 1;
        let mut count = 0u64;
        let mut above = vec![0u64; thresholds.len()];
        let mut below = vec![0u64; thresholds.len()];
        for s in 0..profiles {
            if (0..n).all(|i| u(i, s) >= u(i, s ^ (1 << i))) {
                count += 1;
                let asu = (0..n).map(|i| u(i, s)).sum::<u64>() as f64 / n as f64;
                for (j, &x) in thresholds.iter().enumerate() {
                    above[j] += (asu >= x) as u64;
                    below[j] += (asu <= x) as u64;
                }
            }
        }
        ne[ones][0] += count;
        ne[ones][1] += count * count;
        for j in 0..thresholds.len() {
            zp[j][ones][0] += above[j];
            zp[j][ones][1] += above[j] * above[j];
            zm[j][ones][0] += below[j];
            zm[j][ones][1] += below[j] * below[j];
        }
    }
    let weight: Vec<f64> = (0..=bits).map(|k| p.powi(k as i32) * (1.0 - p).powi((bits - k) as i32)).collect();
    let moments = |sums: &[[u64; 2]]| {
        let (m1, m2) =
            sums.iter().zip(&weight).fold((0.0, 0.0), |(a, b), (s, w)| (a + w * s[0] as f64, b + w * s[1] as f64));
        ExactMoments::new(m1, m2)
    };
    Ok(BruteForce {
        n,
        p,
        tables: 1 << bits,
        ne: moments(&ne),
        thresholds: thresholds
            .iter()
            .enumerate()
            .map(|(j, &x)| ThresholdMoments { x, z_plus: moments(&zp[j]), z_minus: moments(&zm[j]) })
            .collect(),
    })
}

fn check_open_unit(p: f64, what: &str) -> Result<()> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::invalid_arg(format!("{what} must lie strictly inside (0, 1), got {p}")));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Figure1Row {
    pub p: f64,
    pub x_opt: f64,
    pub x_beq: f64,
    pub x_weq: f64,
    pub x_typ: f64,
}

/// Bernoulli limit curves over a grid of `p`.
pub fn figure1_data(p_grid: &[f64]) -> Result<Vec<Figure1Row>> {
    p_grid
        .iter()
        .map(|&p| {
            check_open_unit(p, "p")?;
            let b = ldp::bernoulli_limits(p)?;
            Ok(Figure1Row { p, x_opt: b.x_opt, x_beq: b.x_beq, x_weq: b.x_weq, x_typ: b.x_typ })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Figure2Row {
    pub x: f64,
    pub h_p: f64,
    pub h_p_tilde: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Figure2 {
    pub p: f64,
    pub p_tilde: f64,
    /// `ln 2`, crossed by `H_p` at the optimum limit.
    pub level_opt: f64,
    /// `ln(1+α)`, crossed by `H_p̃` at the equilibrium limits.
    pub level_eq: f64,
    pub rows: Vec<Figure2Row>,
}

/// Entropy curves `H_p` and `H_p̃` over `x ∈ [0, 1]`.
pub fn figure2_data(p: f64, x_grid: &[f64]) -> Result<Figure2> {
    check_open_unit(p, "p")?;
    if let Some(x) = x_grid.iter().find(|x| !(0.0..=1.0).contains(*x)) {
        return Err(Error::invalid_arg(format!("x grid must lie in [0, 1], got {x}")));
    }
    let pt = crate::dist::p_tilde(p);
    let alpha = p * p + (1.0 - p) * (1.0 - p);
    let rows = x_grid
        .iter()
        .map(|&x| Ok(Figure2Row { x, h_p: entropy(p, x)?, h_p_tilde: entropy(pt, x)? }))
        .collect::<Result<_>>()?;
    Ok(Figure2 { p, p_tilde: pt, level_opt: std::f64::consts::LN_2, level_eq: alpha.ln_1p(), rows })
}

/// `count` evenly spaced points strictly inside `(0, 1)`: `k / (count + 1)`.
pub fn interior_grid(count: usize) -> Vec<f64> {
    (1..=count).map(|k| k as f64 / (count + 1) as f64).collect()
}

/// `count` evenly spaced points covering `[0, 1]`.
pub fn closed_grid(count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![0.0],
        _ => (0..count).map(|k| k as f64 / (count - 1) as f64).collect(),
    }
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| x.to_string())
}

/// `# config: {json}` header line embedded in every CSV artifact.
pub fn config_line<T: Serialize>(config: &T) -> Result<String> {
    Ok(format!("# config: {}\n", serde_json::to_string(config)?))
}

/// Per-replication rows; deterministic given the config.
pub fn results_csv(result: &ExperimentResult) -> Result<String> {
    let cfg = &result.config;
    let mut out = config_line(cfg)?;
    out.push_str("n,rep,seed,ne_count,so,beq,weq");
    for e in &cfg.epsilons {
        write!(out, ",typ_count_eps_{e}").unwrap();
    }
    for x in &cfg.thresholds {
        write!(out, ",w_plus_{x},w_minus_{x},z_plus_{x},z_minus_{x}").unwrap();
    }
    out.push('\n');
    for r in &result.replications {
        write!(out, "{},{},{},{},{},{},{}", r.n, r.rep, r.seed, r.ne_count, r.so, opt(r.beq), opt(r.weq)).unwrap();
        for c in &r.typ_counts {
            write!(out, ",{c}").unwrap();
        }
        for c in &r.counters {
            write!(out, ",{},{},{},{}", c[0], c[1], c[2], c[3]).unwrap();
        }
        out.push('\n');
    }
    Ok(out)
}

pub fn summary_json(result: &ExperimentResult) -> Result<String> {
    let mut s = serde_json::to_string_pretty(result)?;
    s.push('\n');
    Ok(s)
}

pub fn figure1_csv(rows: &[Figure1Row], config: &impl Serialize) -> Result<String> {
    let mut out = config_line(config)?;
    out.push_str("p,x_opt,x_beq,x_weq,x_typ\n");
    for r in rows {
        writeln!(out, "{},{},{},{},{}", r.p, r.x_opt, r.x_beq, r.x_weq, r.x_typ).unwrap();
    }
    Ok(out)
}

pub fn figure2_csv(fig: &Figure2, config: &impl Serialize) -> Result<String> {
    let mut out = config_line(config)?;
    writeln!(out, "# p_tilde: {}", fig.p_tilde).unwrap();
    writeln!(out, "# level_opt: {}", fig.level_opt).unwrap();
    writeln!(out, "# level_eq: {}", fig.level_eq).unwrap();
    out.push_str("x,h_p,h_p_tilde\n");
    for r in &fig.rows {
        writeln!(out, "{},{},{}", r.x, r.h_p, r.h_p_tilde).unwrap();
    }
    Ok(out)
}

pub fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    let mut f = std::fs::File::create(path)?;
    f.write_all(contents.as_bytes())?;
    Ok(())
}

/// Writes `results.csv` and `summary.json` into `dir`.
pub fn write_outputs(result: &ExperimentResult, dir: &Path) -> Result<()> {
    write_file(&dir.join("results.csv"), &results_csv(result)?)?;
    write_file(&dir.join("summary.json"), &summary_json(result)?)
}
