//! Payoff distributions with everywhere-finite moment generating function,
//! their atom structure, and the law of a payoff conditioned on weakly
//! beating an independent copy.
//!
//! Every admitted law decomposes as a finite atom set plus at most one
//! weighted continuous component (uniform or Gaussian). The conditioned law
//! keeps the same shape: atom `ℓ` gets mass `P(X=ℓ)·F(ℓ)/(1−β)` and the
//! continuous density `w·g` becomes `w·g(x)·F(x)/(1−β)`. Both are handled by
//! [`Law`], which is what the rate-function machinery tilts.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quad::{self, QuadOptions};
use crate::special::{inverse_mills, log_norm_cdf, log_sum_exp, norm_cdf};

/// Masses must sum to one within this tolerance.
pub const MASS_TOL: f64 = 1e-12;

/// Gaussian integrals are truncated this many standard deviations from the
/// (tilted) center.
const GAUSS_WINDOW: f64 = 40.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub value: f64,
    pub mass: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Continuous {
    Uniform { a: f64, b: f64 },
    Gaussian { mu: f64, sigma: f64 },
}

impl Continuous {
    fn validate(&self) -> Result<()> {
        match *self {
            Continuous::Uniform { a, b } => {
                if !(a.is_finite() && b.is_finite() && a < b) {
                    return Err(Error::invalid_dist(format!("uniform needs finite a < b, got a={a}, b={b}")));
                }
            }
            Continuous::Gaussian { mu, sigma } => {
                if !(mu.is_finite() && sigma.is_finite() && sigma > 0.0) {
                    return Err(Error::invalid_dist(format!(
                        "gaussian needs finite mu and sigma > 0, got mu={mu}, sigma={sigma}"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn cdf(&self, x: f64) -> f64 {
        match *self {
            Continuous::Uniform { a, b } => ((x - a) / (b - a)).clamp(0.0, 1.0),
            Continuous::Gaussian { mu, sigma } => norm_cdf((x - mu) / sigma),
        }
    }

    pub fn pdf(&self, x: f64) -> f64 {
        match *self {
            Continuous::Uniform { a, b } => {
                if (a..=b).contains(&x) {
                    1.0 / (b - a)
                } else {
                    0.0
                }
            }
            Continuous::Gaussian { mu, sigma } => crate::special::norm_pdf((x - mu) / sigma) / sigma,
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            Continuous::Uniform { a, b } => 0.5 * (a + b),
            Continuous::Gaussian { mu, .. } => mu,
        }
    }

    pub fn hull(&self) -> (f64, f64) {
        match *self {
            Continuous::Uniform { a, b } => (a, b),
            Continuous::Gaussian { .. } => (f64::NEG_INFINITY, f64::INFINITY),
        }
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            Continuous::Uniform { a, b } => {
                let u: f64 = rng.random();
                a + (b - a) * u
            }
            Continuous::Gaussian { mu, sigma } => {
                let z: f64 = rng.sample(StandardNormal);
                mu + sigma * z
            }
        }
    }

    /// `(ln ∫ e^{tx} dG, tilted mean)` in closed form.
    fn tilt(&self, t: f64) -> (f64, f64) {
        match *self {
            Continuous::Uniform { a, b } => {
                let len = b - a;
                let s = t * len;
                let edge = if t >= 0.0 { b } else { a };
                let log_mass = if s == 0.0 { 0.0 } else { t * edge + (-(-s.abs()).exp_m1() / s.abs()).ln() };
                (log_mass, a + len * unit_tilted_mean(s))
            }
            Continuous::Gaussian { mu, sigma } => (mu * t + 0.5 * sigma * sigma * t * t, mu + sigma * sigma * t),
        }
    }

    fn fmt_spec(&self) -> String {
        match *self {
            Continuous::Uniform { a, b } => format!("uniform({a},{b})"),
            Continuous::Gaussian { mu, sigma } => format!("gaussian({mu},{sigma})"),
        }
    }
}

/// Mean of the uniform law on `[0, 1]` tilted by `e^{s x}`.
fn unit_tilted_mean(s: f64) -> f64 {
    if s.abs() < 1e-3 {
        0.5 + s / 12.0 - s * s * s / 720.0
    } else if s > 0.0 {
        1.0 / (-(-s).exp_m1()) - 1.0 / s
    } else {
        // 1/(1 - e^{-s}) rewritten to avoid overflow for very negative s
        s.exp() / s.exp_m1() - 1.0 / s
    }
}

/// Serialized and parsed description of a payoff law.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Kind {
    Bernoulli { p: f64 },
    Discrete { values: Vec<f64>, masses: Vec<f64> },
    Uniform { a: f64, b: f64 },
    Gaussian { mu: f64, sigma: f64 },
    Mixed { continuous: Continuous, weight: f64, atoms: Vec<Atom> },
}

/// The payoff law `F`. Immutable once built; construction validates it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Kind", into = "Kind")]
pub struct PayoffDistribution {
    kind: Kind,
    atoms: Vec<Atom>,
    continuous: Option<(Continuous, f64)>,
}

impl From<PayoffDistribution> for Kind {
    fn from(d: PayoffDistribution) -> Kind {
        d.kind
    }
}

impl TryFrom<Kind> for PayoffDistribution {
    type Error = Error;

    fn try_from(kind: Kind) -> Result<Self> {
        PayoffDistribution::new(kind)
    }
}

fn check_atoms(atoms: &[Atom]) -> Result<()> {
    for a in atoms {
        if !a.value.is_finite() {
            return Err(Error::invalid_dist(format!("atom value {} is not finite", a.value)));
        }
        if !(a.mass.is_finite() && a.mass > 0.0 && a.mass <= 1.0) {
            return Err(Error::invalid_dist(format!("atom mass {} must lie in (0, 1]", a.mass)));
        }
    }
    if atoms.windows(2).any(|w| w[0].value >= w[1].value) {
        return Err(Error::invalid_dist("support values must be strictly increasing"));
    }
    Ok(())
}

impl PayoffDistribution {
    pub fn new(kind: Kind) -> Result<Self> {
        let (atoms, continuous) = match &kind {
            Kind::Bernoulli { p } => {
                let p = *p;
                if !(p.is_finite() && (0.0..=1.0).contains(&p)) {
                    return Err(Error::invalid_dist(format!("bernoulli p={p} must lie in [0, 1]")));
                }
                let mut atoms = Vec::with_capacity(2);
                if p < 1.0 {
                    atoms.push(Atom { value: 0.0, mass: 1.0 - p });
                }
                if p > 0.0 {
                    atoms.push(Atom { value: 1.0, mass: p });
                }
                (atoms, None)
            }
            Kind::Discrete { values, masses } => {
                if values.is_empty() || values.len() != masses.len() {
                    return Err(Error::invalid_dist("discrete needs equally many (non-zero) values and masses"));
                }
                let atoms: Vec<Atom> = values.iter().zip(masses).map(|(&value, &mass)| Atom { value, mass }).collect();
                check_atoms(&atoms)?;
                let total: f64 = masses.iter().sum();
                if (total - 1.0).abs() > MASS_TOL {
                    return Err(Error::invalid_dist(format!("discrete masses sum to {total}, not 1")));
                }
                (atoms, None)
            }
            Kind::Uniform { a, b } => {
                let c = Continuous::Uniform { a: *a, b: *b };
                c.validate()?;
                (Vec::new(), Some((c, 1.0)))
            }
            Kind::Gaussian { mu, sigma } => {
                let c = Continuous::Gaussian { mu: *mu, sigma: *sigma };
                c.validate()?;
                (Vec::new(), Some((c, 1.0)))
            }
            Kind::Mixed { continuous, weight, atoms } => {
                continuous.validate()?;
                if !(weight.is_finite() && (0.0..=1.0).contains(weight)) {
                    return Err(Error::invalid_dist(format!("mixed weight {weight} must lie in [0, 1]")));
                }
                check_atoms(atoms)?;
                let total = weight + atoms.iter().map(|a| a.mass).sum::<f64>();
                if (total - 1.0).abs() > MASS_TOL {
                    return Err(Error::invalid_dist(format!("mixed weight plus atom masses sum to {total}, not 1")));
                }
                let cont = (*weight > 0.0).then_some((*continuous, *weight));
                (atoms.clone(), cont)
            }
        };
        Ok(PayoffDistribution { kind, atoms, continuous })
    }

    pub fn bernoulli(p: f64) -> Result<Self> {
        Self::new(Kind::Bernoulli { p })
    }

    pub fn discrete(values: Vec<f64>, masses: Vec<f64>) -> Result<Self> {
        Self::new(Kind::Discrete { values, masses })
    }

    pub fn uniform(a: f64, b: f64) -> Result<Self> {
        Self::new(Kind::Uniform { a, b })
    }

    pub fn gaussian(mu: f64, sigma: f64) -> Result<Self> {
        Self::new(Kind::Gaussian { mu, sigma })
    }

    pub fn mixed(continuous: Continuous, weight: f64, atoms: Vec<Atom>) -> Result<Self> {
        Self::new(Kind::Mixed { continuous, weight, atoms })
    }

    pub fn kind(&self) -> &Kind {
        &self.kind
    }

    /// The atom set `L` with masses `P(X = ℓ)`, ascending by value.
    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    /// Continuous component and its weight, if any.
    pub fn continuous_part(&self) -> Option<(Continuous, f64)> {
        self.continuous
    }

    pub fn is_atomless(&self) -> bool {
        self.atoms.is_empty()
    }

    /// `Some(p)` for Bernoulli laws.
    pub fn bernoulli_p(&self) -> Option<f64> {
        match self.kind {
            Kind::Bernoulli { p } => Some(p),
            _ => None,
        }
    }

    /// `α = P(X = X')` and `β = (1 − α)/2 = P(X > X')`.
    pub fn alpha_beta(&self) -> (f64, f64) {
        let alpha = match self.kind {
            Kind::Bernoulli { p } => p * p + (1.0 - p) * (1.0 - p),
            _ => self.atoms.iter().fold(0.0, |acc, a| acc + a.mass * a.mass),
        };
        (alpha, (1.0 - alpha) / 2.0)
    }

    pub fn alpha(&self) -> f64 {
        self.alpha_beta().0
    }

    fn atom_cdf(&self, x: f64, inclusive: bool) -> f64 {
        self.atoms.iter().take_while(|a| if inclusive { a.value <= x } else { a.value < x }).map(|a| a.mass).sum()
    }

    /// `F(x)`, right-continuous.
    pub fn cdf(&self, x: f64) -> f64 {
        match self.kind {
            Kind::Bernoulli { p } => {
                if x < 0.0 {
                    0.0
                } else if x < 1.0 {
                    1.0 - p
                } else {
                    1.0
                }
            }
            _ => {
                let cont = self.continuous.map_or(0.0, |(c, w)| w * c.cdf(x));
                (cont + self.atom_cdf(x, true)).min(1.0)
            }
        }
    }

    /// Left limit `F(x⁻)`.
    pub fn cdf_left(&self, x: f64) -> f64 {
        match self.kind {
            Kind::Bernoulli { p } => {
                if x <= 0.0 {
                    0.0
                } else if x <= 1.0 {
                    1.0 - p
                } else {
                    1.0
                }
            }
            _ => {
                let cont = self.continuous.map_or(0.0, |(c, w)| w * c.cdf(x));
                (cont + self.atom_cdf(x, false)).min(1.0)
            }
        }
    }

    /// Essential infimum and supremum of the support.
    pub fn hull(&self) -> (f64, f64) {
        let mut lo = self.atoms.first().map_or(f64::INFINITY, |a| a.value);
        let mut hi = self.atoms.last().map_or(f64::NEG_INFINITY, |a| a.value);
        if let Some((c, _)) = self.continuous {
            let (cl, ch) = c.hull();
            lo = lo.min(cl);
            hi = hi.max(ch);
        }
        (lo, hi)
    }

    /// `φ(t) = E[e^{tX}]`.
    pub fn mgf(&self, t: f64) -> Result<f64> {
        if !t.is_finite() {
            return Err(Error::invalid_arg(format!("mgf argument t={t} must be finite")));
        }
        Ok(self.law().cumulant(t)?.0.exp())
    }

    pub fn mean(&self) -> f64 {
        let atoms: f64 = self.atoms.iter().map(|a| a.value * a.mass).sum();
        atoms + self.continuous.map_or(0.0, |(c, w)| w * c.mean())
    }

    /// One draw from `F`. Atoms come out as their stored values, so ties
    /// between discrete payoffs compare exactly.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self.kind {
            Kind::Bernoulli { p } => {
                if rng.random_bool(p) {
                    1.0
                } else {
                    0.0
                }
            }
            _ if self.atoms.is_empty() => self.continuous.expect("law has mass").0.sample(rng),
            _ => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                if let Some((c, w)) = self.continuous {
                    if u < w {
                        return c.sample(rng);
                    }
                    acc = w;
                }
                for a in &self.atoms {
                    acc += a.mass;
                    if u < acc {
                        return a.value;
                    }
                }
                match self.atoms.last() {
                    Some(a) => a.value,
                    None => self.continuous.expect("law has mass").0.sample(rng),
                }
            }
        }
    }

    /// Fills `out` with draws; the same stream as repeated [`sample`](Self::sample).
    pub fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        match (self.atoms.is_empty(), self.continuous) {
            (true, Some((Continuous::Uniform { a, b }, _))) => {
                let len = b - a;
                for x in out.iter_mut() {
                    let u: f64 = rng.random();
                    *x = a + len * u;
                }
            }
            _ => out.iter_mut().for_each(|x| *x = self.sample(rng)),
        }
    }

    /// Atom/continuous decomposition used for tilting.
    pub fn law(&self) -> Law {
        Law {
            atoms: self.atoms.clone(),
            component: self.continuous.map(|(law, weight)| Component { law, weight, base: None }),
        }
    }

    /// The law `F̃` of `X` given `X ≥ X'`.
    pub fn condition_on_max(&self) -> ConditionedDistribution {
        let (alpha, beta) = self.alpha_beta();
        let norm = 1.0 - beta;
        let mut atoms: Vec<Atom> =
            self.atoms.iter().map(|a| Atom { value: a.value, mass: a.mass * self.cdf(a.value) }).collect();
        if self.continuous.is_none() {
            // Purely atomic: normalize by the realized total so masses sum to 1.
            let total: f64 = atoms.iter().map(|a| a.mass).sum();
            atoms.iter_mut().for_each(|a| a.mass /= total);
        } else {
            atoms.iter_mut().for_each(|a| a.mass /= norm);
        }
        let component = self.continuous.map(|(law, weight)| Component {
            law,
            weight: weight / norm,
            base: Some(BaseCdf { weight, atoms: self.atoms.clone() }),
        });
        ConditionedDistribution { base: self.clone(), alpha, law: Law { atoms, component } }
    }
}

/// `F(x) = w·G(x) + Σ_{ℓ ≤ x} m_ℓ` of the base law, used as a density
/// weight in the conditioned continuous component.
#[derive(Debug, Clone, PartialEq)]
struct BaseCdf {
    weight: f64,
    atoms: Vec<Atom>,
}

impl BaseCdf {
    fn eval(&self, law: &Continuous, x: f64) -> f64 {
        let atoms: f64 = self.atoms.iter().take_while(|a| a.value <= x).map(|a| a.mass).sum();
        self.weight * law.cdf(x) + atoms
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Component {
    law: Continuous,
    weight: f64,
    base: Option<BaseCdf>,
}

impl Component {
    /// `(ln ∫ e^{tx} ρ(x) dx, tilted mean)` for the component density `ρ`.
    fn tilt(&self, t: f64) -> Result<(f64, f64)> {
        let Some(base) = &self.base else {
            let (lm, mean) = self.law.tilt(t);
            return Ok((lm + self.weight.ln(), mean));
        };
        if let (Continuous::Gaussian { mu, sigma }, true) = (self.law, base.atoms.is_empty()) {
            // ∫ e^{tx} 2 g(x) G(x) dx = 2 e^{μt + σ²t²/2} Φ(σt/√2)
            let z = sigma * t / std::f64::consts::SQRT_2;
            let lm = mu * t + 0.5 * sigma * sigma * t * t + log_norm_cdf(z) + (self.weight * base.weight).ln();
            let mean = mu + sigma * sigma * t + sigma / std::f64::consts::SQRT_2 * inverse_mills(z);
            return Ok((lm, mean));
        }
        let (scale, lo, hi, density): (f64, f64, f64, Box<dyn Fn(f64) -> f64 + '_>) = match self.law {
            Continuous::Uniform { a, b } => {
                let edge = if t >= 0.0 { b } else { a };
                let len = b - a;
                (t * edge, a, b, Box::new(move |x: f64| (t * (x - edge)).exp() / len))
            }
            Continuous::Gaussian { mu, sigma } => {
                let center = mu + sigma * sigma * t;
                let g = Continuous::Gaussian { mu: center, sigma };
                (
                    mu * t + 0.5 * sigma * sigma * t * t,
                    center - GAUSS_WINDOW * sigma,
                    center + GAUSS_WINDOW * sigma,
                    Box::new(move |x: f64| g.pdf(x)),
                )
            }
        };
        let mut cuts = vec![lo];
        cuts.extend(base.atoms.iter().map(|a| a.value).filter(|&v| v > lo && v < hi));
        cuts.push(hi);
        let opts = QuadOptions { abs_tol: 0.0, rel_tol: 1e-13, ..QuadOptions::default() };
        let (mut m0, mut m1) = (0.0, 0.0);
        for w in cuts.windows(2) {
            let f0 = |x: f64| density(x) * base.eval(&self.law, x);
            m0 += quad::integrate(f0, w[0], w[1], opts)?.value;
            let f1 = |x: f64| x * density(x) * base.eval(&self.law, x);
            m1 += quad::integrate(f1, w[0], w[1], opts)?.value;
        }
        if m0.is_nan() || m0 <= 0.0 {
            return Err(Error::DomainOverflow { x: f64::NAN, limit: t.abs() });
        }
        Ok((scale + (m0 * self.weight).ln(), m1 / m0))
    }
}

/// A law written as finite atoms plus at most one weighted continuous
/// component. Provides the cumulant `ψ(t) = ln E[e^{tX}]` and its slope.
#[derive(Debug, Clone, PartialEq)]
pub struct Law {
    atoms: Vec<Atom>,
    component: Option<Component>,
}

impl Law {
    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn hull(&self) -> (f64, f64) {
        let mut lo = self.atoms.first().map_or(f64::INFINITY, |a| a.value);
        let mut hi = self.atoms.last().map_or(f64::NEG_INFINITY, |a| a.value);
        if let Some(c) = &self.component {
            let (cl, ch) = c.law.hull();
            lo = lo.min(cl);
            hi = hi.max(ch);
        }
        (lo, hi)
    }

    /// Atom mass sitting exactly at `x` (zero if none).
    pub fn mass_at(&self, x: f64) -> f64 {
        self.atoms.iter().find(|a| a.value == x).map_or(0.0, |a| a.mass)
    }

    /// `(ψ(t), ψ'(t))`.
    pub fn cumulant(&self, t: f64) -> Result<(f64, f64)> {
        let mut parts: Vec<(f64, f64)> = self.atoms.iter().map(|a| (a.mass.ln() + t * a.value, a.value)).collect();
        if let Some(c) = &self.component {
            parts.push(c.tilt(t)?);
        }
        let logs: Vec<f64> = parts.iter().map(|p| p.0).collect();
        let psi = log_sum_exp(&logs);
        let slope = parts.iter().map(|&(lm, m)| (lm - psi).exp() * m).sum();
        Ok((psi, slope))
    }

    pub fn mean(&self) -> Result<f64> {
        Ok(self.cumulant(0.0)?.1)
    }
}

/// The law `F̃(y) = P(X ≤ y | X ≥ X')` of an equilibrium payoff.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionedDistribution {
    base: PayoffDistribution,
    alpha: f64,
    law: Law,
}

impl ConditionedDistribution {
    pub fn base(&self) -> &PayoffDistribution {
        &self.base
    }

    pub fn law(&self) -> &Law {
        &self.law
    }

    /// Atoms of `F̃` with masses `P(X=ℓ)·F(ℓ)/(1−β)`.
    pub fn atoms(&self) -> &[Atom] {
        &self.law.atoms
    }

    /// For purely atomic bases, `F̃` as an ordinary distribution
    /// (Bernoulli(p̃) for a Bernoulli base).
    pub fn as_distribution(&self) -> Option<PayoffDistribution> {
        if let Some(p) = self.base.bernoulli_p() {
            return PayoffDistribution::bernoulli(p_tilde(p)).ok();
        }
        if self.law.component.is_some() {
            return None;
        }
        let values = self.law.atoms.iter().map(|a| a.value).collect();
        let masses = self.law.atoms.iter().map(|a| a.mass).collect();
        PayoffDistribution::discrete(values, masses).ok()
    }

    fn cdf_impl(&self, y: f64, inclusive: bool) -> f64 {
        let Some((g, w)) = self.base.continuous else {
            return self
                .law
                .atoms
                .iter()
                .take_while(|a| if inclusive { a.value <= y } else { a.value < y })
                .map(|a| a.mass)
                .sum::<f64>()
                .min(1.0);
        };
        let gy = g.cdf(y);
        if self.base.atoms.is_empty() {
            return gy * gy;
        }
        let norm = (1.0 + self.alpha) / 2.0;
        let mut cont = w * gy * gy / 2.0;
        let mut atoms = 0.0;
        for (a, ca) in self.base.atoms.iter().zip(&self.law.atoms) {
            let below = if inclusive { a.value <= y } else { a.value < y };
            if !below {
                break;
            }
            cont += a.mass * (gy - g.cdf(a.value));
            atoms += ca.mass;
        }
        (w * cont / norm + atoms).clamp(0.0, 1.0)
    }

    pub fn cdf(&self, y: f64) -> f64 {
        self.cdf_impl(y, true)
    }

    pub fn cdf_left(&self, y: f64) -> f64 {
        self.cdf_impl(y, false)
    }

    pub fn hull(&self) -> (f64, f64) {
        self.law.hull()
    }

    /// `E[Y]`, which is the typical equilibrium ASU `x_typ`.
    pub fn mean(&self) -> Result<f64> {
        if let Some(p) = self.base.bernoulli_p() {
            return Ok(p_tilde(p));
        }
        if self.law.component.is_none() {
            return Ok(self.law.atoms.iter().map(|a| a.value * a.mass).sum());
        }
        self.law.mean()
    }

    pub fn mgf(&self, t: f64) -> Result<f64> {
        if !t.is_finite() {
            return Err(Error::invalid_arg(format!("mgf argument t={t} must be finite")));
        }
        Ok(self.law.cumulant(t)?.0.exp())
    }
}

/// `p̃ = p / (1 − p + p²)`, the Bernoulli parameter of `F̃`.
pub fn p_tilde(p: f64) -> f64 {
    p / (1.0 - p + p * p)
}

// ---------------------------------------------------------------------------
// Text form: `bernoulli:p=0.5`, `uniform:a=0,b=1`, `gaussian:mu=0,sigma=1`,
// `discrete:values=0,1,2;masses=0.3,0.3,0.4`,
// `mixed:cont=uniform(0,1);w=0.5;atoms=0:0.25,1:0.25`.

fn parse_err(spec: &str, reason: impl Into<String>) -> Error {
    Error::Parse { spec: spec.to_string(), reason: reason.into() }
}

fn parse_num(spec: &str, s: &str) -> Result<f64> {
    let v: f64 = s.trim().parse().map_err(|_| parse_err(spec, format!("`{s}` is not a number")))?;
    if !v.is_finite() {
        return Err(parse_err(spec, format!("`{s}` is not finite")));
    }
    Ok(v)
}

fn parse_list(spec: &str, s: &str) -> Result<Vec<f64>> {
    s.split(',').map(|x| parse_num(spec, x)).collect()
}

fn key_values<'a>(spec: &str, body: &'a str, sep: char, expected: &[&str]) -> Result<Vec<&'a str>> {
    let mut out = vec![None; expected.len()];
    for field in body.split(sep).filter(|f| !f.trim().is_empty()) {
        let (k, v) =
            field.split_once('=').ok_or_else(|| parse_err(spec, format!("expected key=value, got `{field}`")))?;
        let idx = expected
            .iter()
            .position(|e| *e == k.trim())
            .ok_or_else(|| parse_err(spec, format!("unknown key `{}` (expected {})", k.trim(), expected.join(", "))))?;
        if out[idx].replace(v.trim()).is_some() {
            return Err(parse_err(spec, format!("duplicate key `{}`", k.trim())));
        }
    }
    out.into_iter().zip(expected).map(|(v, k)| v.ok_or_else(|| parse_err(spec, format!("missing key `{k}`")))).collect()
}

fn parse_continuous(spec: &str, s: &str) -> Result<Continuous> {
    let (name, rest) =
        s.split_once('(').ok_or_else(|| parse_err(spec, "cont must look like uniform(a,b) or gaussian(mu,sigma)"))?;
    let args = rest.strip_suffix(')').ok_or_else(|| parse_err(spec, "missing `)` in cont"))?;
    let args = parse_list(spec, args)?;
    if args.len() != 2 {
        return Err(parse_err(spec, "cont takes exactly two parameters"));
    }
    let c = match name.trim() {
        "uniform" => Continuous::Uniform { a: args[0], b: args[1] },
        "gaussian" => Continuous::Gaussian { mu: args[0], sigma: args[1] },
        other => return Err(Error::UnsupportedKind(other.to_string())),
    };
    Ok(c)
}

impl FromStr for PayoffDistribution {
    type Err = Error;

    fn from_str(spec: &str) -> Result<Self> {
        let (name, body) = spec.split_once(':').unwrap_or((spec, ""));
        let kind = match name.trim() {
            "bernoulli" => {
                let v = key_values(spec, body, ',', &["p"])?;
                Kind::Bernoulli { p: parse_num(spec, v[0])? }
            }
            "uniform" => {
                let v = key_values(spec, body, ',', &["a", "b"])?;
                Kind::Uniform { a: parse_num(spec, v[0])?, b: parse_num(spec, v[1])? }
            }
            "gaussian" => {
                let v = key_values(spec, body, ',', &["mu", "sigma"])?;
                Kind::Gaussian { mu: parse_num(spec, v[0])?, sigma: parse_num(spec, v[1])? }
            }
            "discrete" => {
                let v = key_values(spec, body, ';', &["values", "masses"])?;
                Kind::Discrete { values: parse_list(spec, v[0])?, masses: parse_list(spec, v[1])? }
            }
            "mixed" => {
                let v = key_values(spec, body, ';', &["cont", "w", "atoms"])?;
                let atoms = v[2]
                    .split(',')
                    .filter(|s| !s.trim().is_empty())
                    .map(|pair| {
                        let (value, mass) = pair
                            .split_once(':')
                            .ok_or_else(|| parse_err(spec, format!("atom `{pair}` must be value:mass")))?;
                        Ok(Atom { value: parse_num(spec, value)?, mass: parse_num(spec, mass)? })
                    })
                    .collect::<Result<Vec<_>>>()?;
                Kind::Mixed { continuous: parse_continuous(spec, v[0])?, weight: parse_num(spec, v[1])?, atoms }
            }
            other => return Err(Error::UnsupportedKind(other.to_string())),
        };
        PayoffDistribution::new(kind)
    }
}

fn join(xs: &[f64]) -> String {
    xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

impl fmt::Display for PayoffDistribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            Kind::Bernoulli { p } => write!(f, "bernoulli:p={p}"),
            Kind::Uniform { a, b } => write!(f, "uniform:a={a},b={b}"),
            Kind::Gaussian { mu, sigma } => write!(f, "gaussian:mu={mu},sigma={sigma}"),
            Kind::Discrete { values, masses } => write!(f, "discrete:values={};masses={}", join(values), join(masses)),
            Kind::Mixed { continuous, weight, atoms } => {
                let atoms: Vec<String> = atoms.iter().map(|a| format!("{}:{}", a.value, a.mass)).collect();
                write!(f, "mixed:cont={};w={weight};atoms={}", continuous.fmt_spec(), atoms.join(","))
            }
        }
    }
}
