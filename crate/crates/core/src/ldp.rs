//! Cramér rate functions by numerical Legendre–Fenchel transform, and the
//! level-crossing thresholds that give the limits of SO, BEq and WEq.
//!
//! `I(x) = sup_t [x t − ψ(t)]` with `ψ = ln E[e^{tX}]`. Inside the support
//! hull the supremum is attained where `ψ'(t) = x`; `ψ'` is increasing, so the
//! tilt is found by bracketing and a bracket-preserving secant iteration. At
//! a finite hull edge carrying an atom of mass `m` the rate is `−ln m`.

use serde::Serialize;

use crate::dist::{p_tilde, ConditionedDistribution, Law, PayoffDistribution};
use crate::error::{Error, Result};

/// Largest tilt tried before giving up; `e^{±700}` spans the f64 range.
pub const TILT_LIMIT: f64 = 700.0;
/// Target accuracy on `ψ'(t) = x`.
pub const SLOPE_TOL: f64 = 1e-12;
/// Width at which level-crossing bisection stops (well under the 1e-9 contract).
pub const CROSSING_TOL: f64 = 1e-13;
/// A hull edge whose rate is within this of the level counts as not exceeding it.
pub const EDGE_TOL: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct RateFunction {
    law: Law,
    inf: f64,
    sup: f64,
    mean: f64,
}

impl RateFunction {
    pub fn from_law(law: Law) -> Result<Self> {
        let (inf, sup) = law.hull();
        let mean = law.mean()?.clamp(inf, sup);
        Ok(RateFunction { law, inf, sup, mean })
    }

    /// `I` for the payoff law `F`.
    pub fn of(d: &PayoffDistribution) -> Result<Self> {
        let mut r = Self::from_law(d.law())?;
        r.mean = d.mean();
        Ok(r)
    }

    /// `Ĩ` for the conditioned law `F̃`.
    pub fn of_conditioned(c: &ConditionedDistribution) -> Result<Self> {
        let mut r = Self::from_law(c.law().clone())?;
        r.mean = c.mean()?;
        Ok(r)
    }

    pub fn essential_infimum(&self) -> f64 {
        self.inf
    }

    pub fn essential_supremum(&self) -> f64 {
        self.sup
    }

    pub fn mean_value(&self) -> f64 {
        self.mean
    }

    /// `I(x)`; `+∞` outside the support hull.
    pub fn rate(&self, x: f64) -> Result<f64> {
        if x.is_nan() {
            return Err(Error::invalid_arg("rate evaluated at NaN"));
        }
        if x < self.inf || x > self.sup {
            return Ok(f64::INFINITY);
        }
        if x == self.mean {
            return Ok(0.0);
        }
        if x == self.inf || x == self.sup {
            let m = self.law.mass_at(x);
            return Ok(if m > 0.0 { -m.ln() } else { f64::INFINITY });
        }
        let t = self.tilt_for(x)?;
        let (psi, _) = self.law.cumulant(t)?;
        Ok((x * t - psi).max(0.0))
    }

    /// Lower bound `x·t − ψ(t)` at the largest admissible tilt towards `x`.
    fn rate_floor(&self, x: f64) -> Result<f64> {
        let t = if x > self.mean { TILT_LIMIT } else { -TILT_LIMIT };
        let (psi, _) = self.law.cumulant(t)?;
        Ok(x * t - psi)
    }

    fn slope(&self, t: f64) -> Result<f64> {
        Ok(self.law.cumulant(t)?.1)
    }

    /// Solves `ψ'(t) = x` for `x` strictly inside the hull.
    fn tilt_for(&self, x: f64) -> Result<f64> {
        let overflow = || Error::DomainOverflow { x, limit: TILT_LIMIT };
        let sign = if x > self.mean { 1.0 } else { -1.0 };
        // Bracket [near, far] along the direction of x.
        let mut near = 0.0_f64;
        let mut far = sign;
        let mut f_near = self.mean - x;
        let mut f_far = self.slope(far)? - x;
        while f_far * sign < 0.0 {
            if far.abs() >= TILT_LIMIT {
                return Err(overflow());
            }
            near = far;
            f_near = f_far;
            far = (far * 2.0).clamp(-TILT_LIMIT, TILT_LIMIT);
            f_far = self.slope(far)? - x;
        }
        if f_far == 0.0 {
            return Ok(far);
        }
        // Illinois variant of regula falsi, with bisection when it stalls.
        let (mut a, mut fa, mut b, mut fb) = (near, f_near, far, f_far);
        let mut side = 0i8;
        for iter in 0..400 {
            let mut c = (a * fb - b * fa) / (fb - fa);
            if !c.is_finite() || c <= a.min(b) || c >= a.max(b) || iter % 8 == 7 {
                c = 0.5 * (a + b);
            }
            let fc = self.slope(c)? - x;
            if fc.abs() <= SLOPE_TOL || (b - a).abs() <= 4.0 * f64::EPSILON * c.abs().max(1.0) {
                return Ok(c);
            }
            if (fc > 0.0) == (fb > 0.0) {
                b = c;
                fb = fc;
                if side == -1 {
                    fa *= 0.5;
                }
                side = -1;
            } else {
                a = c;
                fa = fc;
                if side == 1 {
                    fb *= 0.5;
                }
                side = 1;
            }
        }
        Ok(0.5 * (a + b))
    }

    /// `I(x) > level`, treating tilts beyond the limit via the rate floor.
    fn exceeds(&self, x: f64, level: f64) -> Result<bool> {
        match self.rate(x) {
            Ok(v) => Ok(v > level),
            Err(Error::DomainOverflow { .. }) => {
                if self.rate_floor(x)? > level {
                    Ok(true)
                } else {
                    Err(Error::DomainOverflow { x, limit: TILT_LIMIT })
                }
            }
            Err(e) => Err(e),
        }
    }

    /// `inf { x > mean : I(x) > level }`.
    pub fn upper_crossing(&self, level: f64) -> Result<f64> {
        self.crossing(level, 1.0)
    }

    /// `sup { x < mean : I(x) > level }`, i.e. the lower root of `I = level`.
    pub fn lower_crossing(&self, level: f64) -> Result<f64> {
        self.crossing(level, -1.0)
    }

    fn crossing(&self, level: f64, dir: f64) -> Result<f64> {
        if level.is_nan() || level <= 0.0 {
            return Err(Error::invalid_arg(format!("crossing level {level} must be positive")));
        }
        let edge = if dir > 0.0 { self.sup } else { self.inf };
        if edge == self.mean {
            return Ok(edge);
        }
        let mut inside = self.mean;
        let mut outside;
        if edge.is_finite() {
            if self.rate(edge)? <= level + EDGE_TOL {
                return Ok(edge);
            }
            outside = edge;
        } else {
            let mut step = 1.0;
            loop {
                let x = self.mean + dir * step;
                if self.exceeds(x, level)? {
                    outside = x;
                    break;
                }
                inside = x;
                step *= 2.0;
                if step > 1e300 {
                    return Err(Error::Bracketing { level, reason: "rate stays below the level".into() });
                }
            }
        }
        for _ in 0..400 {
            if (outside - inside).abs() <= CROSSING_TOL {
                break;
            }
            let mid = 0.5 * (inside + outside);
            if mid == inside || mid == outside {
                break;
            }
            if self.exceeds(mid, level)? {
                outside = mid;
            } else {
                inside = mid;
            }
        }
        Ok(0.5 * (inside + outside))
    }
}

/// `H_q(x) = x ln(x/q) + (1−x) ln((1−x)/(1−q))`, with `0 ln 0 = 0`.
pub fn entropy(q: f64, x: f64) -> Result<f64> {
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::invalid_arg(format!("entropy parameter q={q} must lie in (0, 1)")));
    }
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::invalid_arg(format!("entropy argument x={x} must lie in [0, 1]")));
    }
    let term = |a: f64, b: f64| if a == 0.0 { 0.0 } else { a * (a / b).ln() };
    Ok(term(x, q) + term(1.0 - x, 1.0 - q))
}

/// Which asymptotic regime a law falls in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    /// `α = 0`: all equilibria share `x_typ`.
    Atomless,
    /// `α > 0`: exponentially many equilibria.
    Atoms,
}

impl Regime {
    pub fn of(alpha: f64) -> Regime {
        if alpha > 0.0 {
            Regime::Atoms
        } else {
            Regime::Atomless
        }
    }
}

/// An equilibrium threshold plus the regime it was computed in. In the
/// atomless regime the value is `x_typ` by definition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EqThreshold {
    pub value: f64,
    pub regime: Regime,
}

impl EqThreshold {
    pub fn is_degenerate(&self) -> bool {
        self.regime == Regime::Atomless
    }
}

/// Limit of the social optimum: `inf { x > E[X] : I(x) > ln 2 }`.
pub fn solve_x_opt(d: &PayoffDistribution) -> Result<f64> {
    RateFunction::of(d)?.upper_crossing(std::f64::consts::LN_2)
}

fn eq_threshold(d: &PayoffDistribution, upper: bool) -> Result<EqThreshold> {
    let c = d.condition_on_max();
    let alpha = d.alpha();
    let regime = Regime::of(alpha);
    let value = match regime {
        Regime::Atomless => c.mean()?,
        Regime::Atoms => {
            let r = RateFunction::of_conditioned(&c)?;
            let level = alpha.ln_1p();
            if upper {
                r.upper_crossing(level)?
            } else {
                r.lower_crossing(level)?
            }
        }
    };
    Ok(EqThreshold { value, regime })
}

/// Limit of the best equilibrium: `inf { x > x_typ : Ĩ(x) > ln(1+α) }`.
pub fn solve_x_beq(d: &PayoffDistribution) -> Result<EqThreshold> {
    eq_threshold(d, true)
}

/// Limit of the worst equilibrium: the lower root of `Ĩ(x) = ln(1+α)`.
pub fn solve_x_weq(d: &PayoffDistribution) -> Result<EqThreshold> {
    eq_threshold(d, false)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BernoulliLimits {
    pub alpha: f64,
    pub p_tilde: f64,
    pub x_typ: f64,
    pub x_opt: f64,
    pub x_beq: f64,
    pub x_weq: f64,
}

fn entropy_crossing(q: f64, level: f64, upper: bool) -> f64 {
    let h = |x: f64| entropy(q, x).expect("q in (0,1) and x in [0,1]");
    let edge = if upper { 1.0 } else { 0.0 };
    if h(edge) <= level + EDGE_TOL {
        return edge;
    }
    let (mut inside, mut outside) = (q, edge);
    while (outside - inside).abs() > CROSSING_TOL {
        let mid = 0.5 * (inside + outside);
        if mid == inside || mid == outside {
            break;
        }
        if h(mid) > level {
            outside = mid;
        } else {
            inside = mid;
        }
    }
    0.5 * (inside + outside)
}

/// Closed-form limits for Bernoulli(p) payoffs via the entropy function.
pub fn bernoulli_limits(p: f64) -> Result<BernoulliLimits> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::invalid_arg(format!("bernoulli limits need p in (0, 1), got {p}")));
    }
    let alpha = p * p + (1.0 - p) * (1.0 - p);
    let pt = p_tilde(p);
    let eq_level = alpha.ln_1p();
    Ok(BernoulliLimits {
        alpha,
        p_tilde: pt,
        x_typ: pt,
        x_opt: entropy_crossing(p, std::f64::consts::LN_2, true),
        x_beq: entropy_crossing(pt, eq_level, true),
        x_weq: entropy_crossing(pt, eq_level, false),
    })
}

/// All limit quantities for a payoff law.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Limits {
    pub alpha: f64,
    pub beta: f64,
    pub x_typ: f64,
    pub x_opt: f64,
    pub x_beq: f64,
    pub x_weq: f64,
    pub regime: Regime,
}

impl Limits {
    /// Limiting price of anarchy `x_opt / x_weq`; `None` when `x_weq ≤ 0`.
    pub fn price_of_anarchy(&self) -> Option<f64> {
        efficiency_ratio(self.x_opt, self.x_weq)
    }

    /// Limiting price of stability `x_opt / x_beq`; `None` when `x_beq ≤ 0`.
    pub fn price_of_stability(&self) -> Option<f64> {
        efficiency_ratio(self.x_opt, self.x_beq)
    }
}

/// `num / den` when `den > 0`; the ratios only make sense for positive payoffs.
pub fn efficiency_ratio(num: f64, den: f64) -> Option<f64> {
    (den > 0.0).then(|| num / den)
}

/// Bernoulli laws with `p ∈ (0,1)` use the entropy closed forms; everything
/// else goes through the numerical transform.
pub fn limits(d: &PayoffDistribution) -> Result<Limits> {
    let (alpha, beta) = d.alpha_beta();
    if let Some(p) = d.bernoulli_p().filter(|p| *p > 0.0 && *p < 1.0) {
        let b = bernoulli_limits(p)?;
        return Ok(Limits {
            alpha,
            beta,
            x_typ: b.x_typ,
            x_opt: b.x_opt,
            x_beq: b.x_beq,
            x_weq: b.x_weq,
            regime: Regime::Atoms,
        });
    }
    let x_typ = d.condition_on_max().mean()?;
    Ok(Limits {
        alpha,
        beta,
        x_typ,
        x_opt: solve_x_opt(d)?,
        x_beq: solve_x_beq(d)?.value,
        x_weq: solve_x_weq(d)?.value,
        regime: Regime::of(alpha),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bern(p: f64) -> PayoffDistribution {
        PayoffDistribution::bernoulli(p).unwrap()
    }

    #[test]
    fn rate_examples() {
        let r = RateFunction::of(&bern(0.5)).unwrap();
        assert_eq!(r.rate(0.5).unwrap(), 0.0);
        // H_0.3(0.5), closed form
        let r = RateFunction::of(&bern(0.3)).unwrap();
        assert!((r.rate(0.5).unwrap() - 0.087_176_693_572_388_91).abs() < 1e-12);
        for p in [0.2, 0.5, 0.9] {
            let r = RateFunction::of(&bern(p)).unwrap();
            assert!((r.rate(1.0).unwrap() - (1.0 / p).ln()).abs() < 1e-15);
            assert_eq!(r.rate(1.0 + 1e-9).unwrap(), f64::INFINITY);
            assert_eq!(r.rate(-1e-9).unwrap(), f64::INFINITY);
        }
    }

    #[test]
    fn uniform_rate_edges_are_infinite() {
        let r = RateFunction::of(&PayoffDistribution::uniform(0.0, 1.0).unwrap()).unwrap();
        assert_eq!(r.rate(1.0).unwrap(), f64::INFINITY);
        assert_eq!(r.rate(0.0).unwrap(), f64::INFINITY);
        assert!(r.rate(0.9).unwrap() > r.rate(0.8).unwrap());
    }

    #[test]
    fn gaussian_rate_is_parabola() {
        let r = RateFunction::of(&PayoffDistribution::gaussian(1.0, 2.0).unwrap()).unwrap();
        for x in [-5.0_f64, -1.0, 0.5, 2.0, 7.0] {
            let exact = (x - 1.0).powi(2) / 8.0;
            assert!((r.rate(x).unwrap() - exact).abs() < 1e-10, "x={x}");
        }
    }

    #[test]
    fn entropy_examples() {
        assert_eq!(entropy(0.5, 0.5).unwrap(), 0.0);
        assert!((entropy(0.5, 1.0).unwrap() - std::f64::consts::LN_2).abs() < 1e-15);
        assert!((entropy(2.0 / 3.0, 0.0).unwrap() - 3.0_f64.ln()).abs() < 1e-15);
        assert!(entropy(0.0, 0.5).is_err());
        assert!(entropy(1.0, 0.5).is_err());
        assert!(entropy(0.5, 1.1).is_err());
    }

    #[test]
    fn x_opt_examples() {
        assert_eq!(solve_x_opt(&bern(0.7)).unwrap(), 1.0);
        let g = solve_x_opt(&PayoffDistribution::gaussian(0.0, 1.0).unwrap()).unwrap();
        assert!((g - (2.0 * std::f64::consts::LN_2).sqrt()).abs() < 1e-9);
        // Oracle: root of H_0.2(x) = ln 2 on (0.2, 1) from an independent scan-and-refine.
        assert!((solve_x_opt(&bern(0.2)).unwrap() - 0.747_019_759_452_295_6).abs() < 1e-9);
    }

    #[test]
    fn equilibrium_thresholds() {
        let d = bern(0.5);
        let w = solve_x_weq(&d).unwrap();
        assert_eq!(w.regime, Regime::Atoms);
        assert!((w.value - 0.227_092_195_219_348_2).abs() < 1e-9);
        assert_eq!(solve_x_beq(&d).unwrap().value, 1.0);
        assert_eq!(solve_x_weq(&bern(0.2)).unwrap().value, 0.0);

        let u = PayoffDistribution::uniform(0.0, 1.0).unwrap();
        let b = solve_x_beq(&u).unwrap();
        assert!(b.is_degenerate());
        assert!((b.value - 2.0 / 3.0).abs() < 1e-10);
        assert_eq!(solve_x_weq(&u).unwrap().value, b.value);
    }

    #[test]
    fn bernoulli_limits_examples() {
        let b = bernoulli_limits(0.5).unwrap();
        assert_eq!(b.alpha, 0.5);
        assert!((b.p_tilde - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!((b.x_opt, b.x_beq), (1.0, 1.0));
        assert!((b.x_weq - 0.227_092_195_219_348_2).abs() < 1e-9);

        let edge = bernoulli_limits(1.0 - std::f64::consts::SQRT_2 / 2.0).unwrap();
        assert!(edge.x_weq.abs() < 1e-9);

        // root of H_0.4(x) = ln 2 on (0.4, 1), frozen from an independent root finder
        let b = bernoulli_limits(0.4).unwrap();
        assert!((b.x_opt - 0.948_694_636_308_410_2).abs() < 1e-9);
        assert!(bernoulli_limits(0.0).is_err());
        assert!(bernoulli_limits(1.0).is_err());
    }

    #[test]
    fn generic_path_matches_closed_form() {
        for p in [0.1, 0.25, 0.4, 0.5, 0.6, 0.85] {
            let d = bern(p);
            let b = bernoulli_limits(p).unwrap();
            assert!((solve_x_opt(&d).unwrap() - b.x_opt).abs() < 1e-9, "p={p}");
            assert!((solve_x_beq(&d).unwrap().value - b.x_beq).abs() < 1e-9, "p={p}");
            assert!((solve_x_weq(&d).unwrap().value - b.x_weq).abs() < 1e-9, "p={p}");
        }
    }

    #[test]
    fn discrete_rate_at_atomic_edge() {
        let d = PayoffDistribution::discrete(vec![0.0, 1.0, 2.0], vec![0.2, 0.3, 0.5]).unwrap();
        let r = RateFunction::of(&d).unwrap();
        assert!((r.rate(2.0).unwrap() + 0.5_f64.ln()).abs() < 1e-15);
        assert!((r.rate(0.0).unwrap() + 0.2_f64.ln()).abs() < 1e-15);
        // continuity towards the edge
        assert!((r.rate(2.0 - 1e-9).unwrap() + 0.5_f64.ln()).abs() < 1e-6);
    }

    #[test]
    fn poa_ratio() {
        let l = limits(&bern(0.5)).unwrap();
        let poa = l.price_of_anarchy().unwrap();
        assert!((poa - 1.0 / 0.227_092_195_219_348_2).abs() < 1e-7);
        assert_eq!(l.price_of_stability(), Some(1.0));
        let l = limits(&bern(0.2)).unwrap();
        assert_eq!(l.price_of_anarchy(), None);
    }
}
