//! Random n-player binary-action games, pure Nash equilibrium enumeration,
//! and the per-game equilibrium report.
//!
//! Profile `s` is an `n`-bit integer; player `i` plays bit `i`, so the
//! unilateral deviation of player `i` is `s ^ (1 << i)`. Payoffs are stored
//! player-major: entry `(i, s)` lives at `i * 2^n + s`. Bernoulli games keep
//! one bit per payoff in 64-bit words and are enumerated word-parallel.

use std::io::Write;

use rand::distr::{Bernoulli, Distribution};
use rand::{RngCore, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;
use serde::Serialize;

use crate::dist::{Kind, PayoffDistribution};
use crate::error::{Error, Result};

pub const MAX_PLAYERS: usize = 30;
/// Largest game the CSV dump accepts.
pub const MAX_DUMP_PLAYERS: usize = 12;
/// Default cap on explicitly listed equilibrium profiles.
pub const DEFAULT_PROFILE_CAP: usize = 1_000_000;
pub const MEM_CAP_ENV: &str = "RGL_MEM_CAP_BYTES";

/// Upper bound on payoff-table bytes for one game.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct MemoryBudget {
    pub max_bytes: u64,
}

impl Default for MemoryBudget {
    /// Room for a 24-player float table (24 · 2^24 · 8 bytes = 3 GiB).
    fn default() -> Self {
        MemoryBudget { max_bytes: 24 * (1 << 24) * 8 }
    }
}

impl MemoryBudget {
    pub fn bytes(max_bytes: u64) -> Self {
        MemoryBudget { max_bytes }
    }

    /// Default budget, overridden by `RGL_MEM_CAP_BYTES` when set.
    pub fn from_env() -> Result<Self> {
        match std::env::var(MEM_CAP_ENV) {
            Ok(v) => v
                .trim()
                .parse()
                .map(MemoryBudget::bytes)
                .map_err(|_| Error::invalid_arg(format!("{MEM_CAP_ENV}=`{v}` is not a byte count"))),
            Err(_) => Ok(MemoryBudget::default()),
        }
    }

    pub fn check(&self, n: usize, bit_packed: bool) -> Result<()> {
        let required = table_bytes(n, bit_packed);
        if required > self.max_bytes {
            return Err(Error::Capacity { n, required_bytes: required, budget_bytes: self.max_bytes });
        }
        Ok(())
    }
}

fn words_for(n: usize) -> usize {
    (1usize << n).div_ceil(64)
}

/// Bytes of payoff storage for an `n`-player game.
pub fn table_bytes(n: usize, bit_packed: bool) -> u64 {
    if bit_packed {
        (n * words_for(n) * 8) as u64
    } else {
        ((n as u64) << n) * 8
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Payoffs {
    /// `planes[i * words + w]`, bit `j` is the payoff of profile `64 w + j`.
    Bits(Vec<u64>),
    Real(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Game {
    n: usize,
    seed: u64,
    payoffs: Payoffs,
}

fn check_players(n: usize) -> Result<()> {
    if !(1..=MAX_PLAYERS).contains(&n) {
        return Err(Error::invalid_arg(format!("player count {n} must lie in 1..={MAX_PLAYERS}")));
    }
    Ok(())
}

/// Bits of `w` with bit `i` of the in-word profile index clear, `i < 6`.
const LOW_MASKS: [u64; 6] = [
    0x5555_5555_5555_5555,
    0x3333_3333_3333_3333,
    0x0F0F_0F0F_0F0F_0F0F,
    0x00FF_00FF_00FF_00FF,
    0x0000_FFFF_0000_FFFF,
    0x0000_0000_FFFF_FFFF,
];

/// Word whose bit `j` is the bit of `word` at `j ^ (1 << i)`, for `i < 6`.
fn swap_partner(word: u64, i: usize) -> u64 {
    let shift = 1u32 << i;
    let m = LOW_MASKS[i];
    ((word >> shift) & m) | ((word & m) << shift)
}

impl Game {
    /// Draws `n · 2^n` i.i.d. payoffs from `d`, player-major and
    /// profile-minor, from a xoshiro256++ stream seeded with `seed`.
    pub fn generate(n: usize, d: &PayoffDistribution, seed: u64, budget: &MemoryBudget) -> Result<Game> {
        check_players(n)?;
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
        let profiles = 1usize << n;
        let payoffs = if let Kind::Bernoulli { p } = *d.kind() {
            budget.check(n, true)?;
            let words = words_for(n);
            let tail = if profiles < 64 { (1u64 << profiles) - 1 } else { u64::MAX };
            let mut planes = vec![0u64; n * words];
            if p == 0.5 {
                for w in planes.iter_mut() {
                    *w = rng.next_u64() & tail;
                }
            } else {
                let coin = Bernoulli::new(p).map_err(|e| Error::invalid_dist(e.to_string()))?;
                for w in planes.iter_mut() {
                    let mut word = 0u64;
                    for j in 0..profiles.min(64) {
                        word |= (coin.sample(&mut rng) as u64) << j;
                    }
                    *w = word;
                }
            }
            Payoffs::Bits(planes)
        } else {
            budget.check(n, false)?;
            let mut table = vec![0.0; n * profiles];
            d.sample_into(&mut rng, &mut table);
            Payoffs::Real(table)
        };
        Ok(Game { n, seed, payoffs })
    }

    /// Game from an explicit player-major table `u[i * 2^n + s]`.
    pub fn from_table(n: usize, table: Vec<f64>) -> Result<Game> {
        check_players(n)?;
        if table.len() != n << n {
            return Err(Error::invalid_arg(format!("table has {} entries, expected {}", table.len(), n << n)));
        }
        if table.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid_arg("payoffs must be finite"));
        }
        Ok(Game { n, seed: 0, payoffs: Payoffs::Real(table) })
    }

    /// Bit-packed game from a player-major 0/1 table.
    pub fn from_bits(n: usize, table: &[bool]) -> Result<Game> {
        check_players(n)?;
        if table.len() != n << n {
            return Err(Error::invalid_arg(format!("table has {} entries, expected {}", table.len(), n << n)));
        }
        let words = words_for(n);
        let mut planes = vec![0u64; n * words];
        for i in 0..n {
            for s in 0..1usize << n {
                if table[(i << n) + s] {
                    planes[i * words + s / 64] |= 1 << (s % 64);
                }
            }
        }
        Ok(Game { n, seed: 0, payoffs: Payoffs::Bits(planes) })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn profiles(&self) -> usize {
        1 << self.n
    }

    pub fn is_bit_packed(&self) -> bool {
        matches!(self.payoffs, Payoffs::Bits(_))
    }

    /// `u_i(s)`.
    pub fn payoff(&self, player: usize, profile: usize) -> f64 {
        match &self.payoffs {
            Payoffs::Bits(planes) => {
                let word = planes[player * words_for(self.n) + profile / 64];
                ((word >> (profile % 64)) & 1) as f64
            }
            Payoffs::Real(t) => t[(player << self.n) + profile],
        }
    }

    /// Weak-inequality equilibrium test: no player strictly gains by flipping.
    pub fn is_pne(&self, profile: usize) -> bool {
        (0..self.n).all(|i| self.payoff(i, profile) >= self.payoff(i, profile ^ (1 << i)))
    }

    /// Bitset over profiles marking pure Nash equilibria.
    pub fn ne_mask(&self) -> Vec<u64> {
        let n = self.n;
        let profiles = 1usize << n;
        let words = words_for(n);
        let tail = if profiles < 64 { (1u64 << profiles) - 1 } else { u64::MAX };
        let mut mask = vec![tail; words];
        match &self.payoffs {
            Payoffs::Bits(planes) => {
                for i in 0..n {
                    let plane = &planes[i * words..(i + 1) * words];
                    for (w, m) in mask.iter_mut().enumerate() {
                        let own = plane[w];
                        let partner = if i < 6 { swap_partner(own, i) } else { plane[w ^ (1 << (i - 6))] };
                        // fails only where own payoff is 0 and the deviation pays 1
                        *m &= own | !partner;
                    }
                }
            }
            Payoffs::Real(t) => {
                for i in 0..n {
                    let row = &t[i << n..(i + 1) << n];
                    let bit = 1usize << i;
                    for (w, m) in mask.iter_mut().enumerate() {
                        let base = w * 64;
                        let mut ok = 0u64;
                        for j in 0..profiles.min(64) {
                            let s = base + j;
                            ok |= ((row[s] >= row[s ^ bit]) as u64) << j;
                        }
                        *m &= ok;
                    }
                }
            }
        }
        mask
    }

    /// Equilibrium profiles in ascending order.
    pub fn enumerate_pne(&self) -> Vec<u32> {
        mask_profiles(&self.ne_mask(), usize::MAX).expect("uncapped")
    }

    /// Writes `profile,player,payoff` rows; only for small games.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        if self.n > MAX_DUMP_PLAYERS {
            return Err(Error::invalid_arg(format!(
                "game dumps are limited to n <= {MAX_DUMP_PLAYERS}, got n = {}",
                self.n
            )));
        }
        writeln!(out, "profile,player,payoff")?;
        for s in 0..self.profiles() {
            for i in 0..self.n {
                writeln!(out, "{s},{i},{}", self.payoff(i, s))?;
            }
        }
        Ok(())
    }

    /// Single pass over all profiles accumulating ASU statistics, the
    /// equilibrium set and all threshold counters.
    pub fn report(&self, cfg: &ReportConfig) -> Result<EquilibriumReport> {
        cfg.validate()?;
        let mask = self.ne_mask();
        let ne_count: u64 = mask.iter().map(|w| w.count_ones() as u64).sum();
        let ne_profiles = if cfg.profile_cap > 0 { mask_profiles(&mask, cfg.profile_cap) } else { None };
        let mut acc = match &self.payoffs {
            Payoffs::Bits(planes) => self.accumulate_bits(planes, &mask, cfg),
            Payoffs::Real(table) => self.accumulate_real(table, &mask, cfg),
        };
        debug_assert_eq!(acc.ne_count, ne_count);
        acc.ne_profiles = ne_profiles;
        Ok(acc)
    }

    fn accumulate_bits(&self, planes: &[u64], mask: &[u64], cfg: &ReportConfig) -> EquilibriumReport {
        let n = self.n;
        let words = words_for(n);
        let per_word = self.profiles().min(64);
        let mut all = vec![0u64; n + 1];
        let mut ne = vec![0u64; n + 1];
        for w in 0..words {
            // bit-sliced counters: slice k holds bit k of each profile's payoff sum
            let mut slices = [0u64; 5];
            for i in 0..n {
                let mut carry = planes[i * words + w];
                for slice in slices.iter_mut() {
                    if carry == 0 {
                        break;
                    }
                    let next = *slice & carry;
                    *slice ^= carry;
                    carry = next;
                }
            }
            let m = mask[w];
            for j in 0..per_word {
                let c = slices.iter().enumerate().fold(0usize, |c, (k, s)| c | ((((s >> j) & 1) as usize) << k));
                all[c] += 1;
                ne[c] += (m >> j) & 1;
            }
        }
        let asu = |c: usize| c as f64 / n as f64;
        let so = asu(all.iter().rposition(|&k| k > 0).expect("at least one profile"));
        let ne_count: u64 = ne.iter().sum();
        let lowest = ne.iter().position(|&k| k > 0);
        let highest = ne.iter().rposition(|&k| k > 0);
        let asu_of_ne = lowest.zip(highest).map(|(lo, hi)| {
            let total: u64 = ne.iter().enumerate().map(|(c, &k)| c as u64 * k).sum();
            AsuSummary {
                min: asu(lo),
                max: asu(hi),
                mean: total as f64 / (n as u64 * ne_count) as f64,
                histogram: ne
                    .iter()
                    .enumerate()
                    .filter(|(_, &k)| k > 0)
                    .map(|(c, &k)| AsuBin { lo: asu(c), hi: asu(c), count: k })
                    .collect(),
            }
        });
        let counters = cfg
            .thresholds
            .iter()
            .map(|&x| {
                let mut t = ThresholdCounts { x, ..Default::default() };
                for c in 0..=n {
                    let v = asu(c);
                    if v >= x {
                        t.w_plus += all[c];
                        t.z_plus += ne[c];
                    }
                    if v <= x {
                        t.w_minus += all[c];
                        t.z_minus += ne[c];
                    }
                }
                t
            })
            .collect();
        let typ_counts = cfg
            .epsilons
            .iter()
            .map(|&eps| TypCount {
                epsilon: eps,
                count: (0..=n).filter(|&c| (asu(c) - cfg.x_typ).abs() < eps).map(|c| ne[c]).sum(),
            })
            .collect();
        EquilibriumReport {
            n,
            seed: self.seed,
            ne_count,
            ne_profiles: None,
            so,
            beq: asu_of_ne.as_ref().map(|a| a.max),
            weq: asu_of_ne.as_ref().map(|a| a.min),
            asu_of_ne,
            typ_counts,
            thresholds: counters,
        }
    }

    fn accumulate_real(&self, table: &[f64], mask: &[u64], cfg: &ReportConfig) -> EquilibriumReport {
        let n = self.n;
        let profiles = self.profiles();
        // Neumaier-compensated per-profile sums across players.
        let mut sum = vec![0.0f64; profiles];
        let mut comp = vec![0.0f64; profiles];
        for i in 0..n {
            let row = &table[i << n..(i + 1) << n];
            for ((s, c), &v) in sum.iter_mut().zip(comp.iter_mut()).zip(row) {
                let t = *s + v;
                if s.abs() >= v.abs() {
                    *c += (*s - t) + v;
                } else {
                    *c += (v - t) + *s;
                }
                *s = t;
            }
        }
        let mut so = f64::NEG_INFINITY;
        let mut counters: Vec<ThresholdCounts> =
            cfg.thresholds.iter().map(|&x| ThresholdCounts { x, ..Default::default() }).collect();
        let mut typ_counts: Vec<TypCount> = cfg.epsilons.iter().map(|&e| TypCount { epsilon: e, count: 0 }).collect();
        let mut ne_asu = Vec::new();
        for s in 0..profiles {
            let asu = (sum[s] + comp[s]) / n as f64;
            so = so.max(asu);
            let is_ne = (mask[s / 64] >> (s % 64)) & 1 == 1;
            if is_ne {
                ne_asu.push(asu);
            }
            for t in counters.iter_mut() {
                if asu >= t.x {
                    t.w_plus += 1;
                    t.z_plus += is_ne as u64;
                }
                if asu <= t.x {
                    t.w_minus += 1;
                    t.z_minus += is_ne as u64;
                }
            }
            if is_ne {
                for tc in typ_counts.iter_mut() {
                    if (asu - cfg.x_typ).abs() < tc.epsilon {
                        tc.count += 1;
                    }
                }
            }
        }
        let asu_of_ne = summarize(&ne_asu);
        EquilibriumReport {
            n,
            seed: self.seed,
            ne_count: ne_asu.len() as u64,
            ne_profiles: None,
            so,
            beq: asu_of_ne.as_ref().map(|a| a.max),
            weq: asu_of_ne.as_ref().map(|a| a.min),
            asu_of_ne,
            typ_counts,
            thresholds: counters,
        }
    }
}

const REAL_HISTOGRAM_BINS: usize = 10;

fn summarize(values: &[f64]) -> Option<AsuSummary> {
    if values.is_empty() {
        return None;
    }
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let bins = if min == max { 1 } else { REAL_HISTOGRAM_BINS };
    let width = (max - min) / bins as f64;
    let mut counts = vec![0u64; bins];
    for &v in values {
        let k = if width > 0.0 { (((v - min) / width) as usize).min(bins - 1) } else { 0 };
        counts[k] += 1;
    }
    let histogram = counts
        .into_iter()
        .enumerate()
        .map(|(k, count)| AsuBin {
            lo: min + width * k as f64,
            hi: if k + 1 == bins { max } else { min + width * (k + 1) as f64 },
            count,
        })
        .collect();
    Some(AsuSummary { min, max, mean, histogram })
}

fn mask_profiles(mask: &[u64], cap: usize) -> Option<Vec<u32>> {
    let count: u64 = mask.iter().map(|w| w.count_ones() as u64).sum();
    if count > cap as u64 {
        return None;
    }
    let mut out = Vec::with_capacity(count as usize);
    for (w, &word) in mask.iter().enumerate() {
        let mut bits = word;
        while bits != 0 {
            let j = bits.trailing_zeros();
            out.push((w * 64) as u32 + j);
            bits &= bits - 1;
        }
    }
    Some(out)
}

/// Thresholds and tolerances a report counts against.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportConfig {
    pub thresholds: Vec<f64>,
    pub epsilons: Vec<f64>,
    pub x_typ: f64,
    /// Equilibrium profiles are listed only when there are at most this
    /// many; zero disables the list.
    pub profile_cap: usize,
}

impl ReportConfig {
    pub fn new(thresholds: Vec<f64>, epsilons: Vec<f64>, x_typ: f64) -> Self {
        ReportConfig { thresholds, epsilons, x_typ, profile_cap: DEFAULT_PROFILE_CAP }
    }

    fn validate(&self) -> Result<()> {
        if self.thresholds.iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid_arg("thresholds must be finite"));
        }
        if self.epsilons.iter().any(|e| !(e.is_finite() && *e > 0.0)) {
            return Err(Error::invalid_arg("epsilons must be positive and finite"));
        }
        if !self.x_typ.is_finite() {
            return Err(Error::invalid_arg("x_typ must be finite"));
        }
        Ok(())
    }
}

/// `|W±_x|` over all profiles and `|Z±_x|` over equilibria, weak inequalities.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct ThresholdCounts {
    pub x: f64,
    pub w_plus: u64,
    pub w_minus: u64,
    pub z_plus: u64,
    pub z_minus: u64,
}

/// Equilibria with `|ASU − x_typ| < ε`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TypCount {
    pub epsilon: f64,
    pub count: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AsuBin {
    pub lo: f64,
    pub hi: f64,
    pub count: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AsuSummary {
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    pub histogram: Vec<AsuBin>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquilibriumReport {
    pub n: usize,
    pub seed: u64,
    pub ne_count: u64,
    pub ne_profiles: Option<Vec<u32>>,
    pub so: f64,
    /// Absent when the game has no pure equilibrium.
    pub beq: Option<f64>,
    pub weq: Option<f64>,
    pub asu_of_ne: Option<AsuSummary>,
    pub typ_counts: Vec<TypCount>,
    pub thresholds: Vec<ThresholdCounts>,
}
