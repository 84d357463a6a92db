//! Exact arithmetic on Lebesgue exponent pairs.
//!
//! Exponent pairs live in the Riesz diagram coordinates `(1/p, 1/q)`, so
//! `p = ∞` and `q = ∞` are just zeros and every relation below is linear or
//! bilinear in rationals.

use std::fmt;

use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rational::{rat, Rat};
use crate::surface::Sidelengths;

/// A point `(1/p, 1/q)` of the unit square.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ExponentPair {
    #[serde(with = "crate::rational::serde_rat")]
    pub inv_p: Rat,
    #[serde(with = "crate::rational::serde_rat")]
    pub inv_q: Rat,
}

/// Hölder conjugate in reciprocal form: `1/p' = 1 - 1/p`.
pub fn dual_exponent(inv_p: Rat) -> Rat {
    Rat::one() - inv_p
}

impl ExponentPair {
    pub fn new(inv_p: Rat, inv_q: Rat) -> Result<Self> {
        let unit = |v: Rat| v >= Rat::zero() && v <= Rat::one();
        if !unit(inv_p) || !unit(inv_q) {
            return Err(Error::InvalidExponent(format!("({inv_p}, {inv_q}) outside [0,1]^2")));
        }
        Ok(Self { inv_p, inv_q })
    }

    /// Build from `p` and `q` directly; `None` stands for `∞`.
    pub fn from_pq(p: Option<Rat>, q: Option<Rat>) -> Result<Self> {
        let inv = |v: Option<Rat>| -> Result<Rat> {
            match v {
                None => Ok(Rat::zero()),
                Some(v) if v >= Rat::one() => Ok(v.recip()),
                Some(v) => Err(Error::InvalidExponent(format!("exponent {v} < 1"))),
            }
        };
        Self::new(inv(p)?, inv(q)?)
    }

    /// Shorthand for integer exponents, used heavily in tests.
    pub fn from_ints(p: i64, q: i64) -> Result<Self> {
        Self::from_pq(Some(rat(p, 1)), Some(rat(q, 1)))
    }

    pub fn inv_p_dual(&self) -> Rat {
        dual_exponent(self.inv_p)
    }

    /// `1/p' - 1/q`, the exponent that appears in every `q > p` bound.
    pub fn gap(&self) -> Rat {
        self.inv_p_dual() - self.inv_q
    }

    pub fn p(&self) -> Option<Rat> {
        (!self.inv_p.is_zero()).then(|| self.inv_p.recip())
    }

    pub fn q(&self) -> Option<Rat> {
        (!self.inv_q.is_zero()).then(|| self.inv_q.recip())
    }

    pub fn p_f64(&self) -> f64 {
        self.p().map_or(f64::INFINITY, crate::rational::to_f64)
    }

    pub fn q_f64(&self) -> f64 {
        self.q().map_or(f64::INFINITY, crate::rational::to_f64)
    }

    /// `q > p`.
    pub fn q_gt_p(&self) -> bool {
        self.inv_q < self.inv_p
    }

    /// Convex combination `(1-t)·self + t·other` in reciprocal coordinates.
    pub fn lerp(&self, other: &Self, t: Rat) -> Self {
        let s = Rat::one() - t;
        Self {
            inv_p: s * self.inv_p + t * other.inv_p,
            inv_q: s * self.inv_q + t * other.inv_q,
        }
    }
}

impl fmt::Display for ExponentPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let show = |v: Option<Rat>| v.map_or("inf".to_string(), |v| v.to_string());
        write!(f, "(p={}, q={})", show(self.p()), show(self.q()))
    }
}

/// Membership in the conjectured local boundedness region:
/// `q > 2(d+1)/d` and `q >= (d+2)/d · p'`.
pub fn in_td(d: usize, pq: &ExponentPair) -> bool {
    let d = Rat::from_integer(d as i128);
    let two = Rat::from_integer(2);
    let strict = pq.inv_q * two * (d + Rat::one()) < d;
    let scaling = pq.inv_q * (d + two) <= d * pq.inv_p_dual();
    strict && scaling
}

/// Closure of the region: both inequalities non-strict.
pub fn in_td_closure(d: usize, pq: &ExponentPair) -> bool {
    let d = Rat::from_integer(d as i128);
    let two = Rat::from_integer(2);
    pq.inv_q * two * (d + Rat::one()) <= d && pq.inv_q * (d + two) <= d * pq.inv_p_dual()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    /// `q = (d-j-θ+2)/(d-j-θ) · p'` with `q > p`.
    QGtP,
    /// `q = 2(d-j-θ+1)/(d-j-θ) <= min(p, 4)`, `θ > 0`.
    QLeP,
    /// `q > 4`, `q <= p`.
    QGt4,
}

/// The `(j, θ)` parametrisation of an exponent pair.
///
/// For the `QGt4` branch `(j, θ)` still solve the `q = 2(m+1)/m` equation
/// (with `j = d-1`), which is what the dyadic block bounds consume.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScalingRegime {
    pub j: usize,
    #[serde(with = "crate::rational::serde_rat")]
    pub theta: Rat,
    pub branch: Branch,
}

impl ScalingRegime {
    /// `d - j - θ`.
    pub fn codim(&self, d: usize) -> Rat {
        Rat::from_integer((d - self.j) as i128) - self.theta
    }

    /// `j + θ`.
    pub fn level(&self) -> Rat {
        Rat::from_integer(self.j as i128) + self.theta
    }
}

/// Split `s = j + θ ∈ [0, d]` into `j ∈ [0, d)` and `θ ∈ (0, 1]`, except `s = 0`.
fn split_level(s: Rat) -> (usize, Rat) {
    if s.is_zero() {
        return (0, Rat::zero());
    }
    let c = s.ceil();
    let j = c.to_integer() - 1;
    (j as usize, s - Rat::from_integer(j))
}

/// Solve `q = 2(m+1)/m` for `m`, i.e. `m = 2/(q-2)`.
fn solve_q_le_p(inv_q: Rat) -> Option<Rat> {
    let two = Rat::from_integer(2);
    let denom = Rat::one() - two * inv_q;
    (denom.is_positive()).then(|| two * inv_q / denom)
}

pub fn scaling_regime(d: usize, pq: &ExponentPair) -> Result<ScalingRegime> {
    if d == 0 {
        return Err(Error::InvalidDimension(d));
    }
    let no_regime = || Error::NoRegime { d, pair: pq.to_string() };
    if !in_td_closure(d, pq) {
        return Err(no_regime());
    }
    let dd = Rat::from_integer(d as i128);
    if pq.q_gt_p() {
        let gap = pq.gap();
        // p = 1, q = ∞: every level gives the same (vanishing) exponents.
        let m = if gap.is_zero() { Rat::zero() } else { Rat::from_integer(2) * pq.inv_q / gap };
        if m.is_negative() || m > dd {
            return Err(no_regime());
        }
        let (j, theta) = split_level(dd - m);
        return Ok(ScalingRegime { j, theta, branch: Branch::QGtP });
    }
    let m = solve_q_le_p(pq.inv_q).ok_or_else(no_regime)?;
    if m > dd {
        return Err(no_regime());
    }
    let s = dd - m;
    if s.is_zero() {
        // θ > 0 is required on this branch.
        return Err(no_regime());
    }
    let (j, theta) = split_level(s);
    let branch = if pq.inv_q * Rat::from_integer(4) < Rat::one() { Branch::QGt4 } else { Branch::QLeP };
    if branch == Branch::QLeP && j + 2 > d {
        return Err(no_regime());
    }
    Ok(ScalingRegime { j, theta, branch })
}

/// Reconstruct `1/q` from a regime (and `1/p` for the `q > p` branch).
pub fn regime_inv_q(d: usize, regime: &ScalingRegime, inv_p: Rat) -> Rat {
    let m = regime.codim(d);
    let two = Rat::from_integer(2);
    match regime.branch {
        Branch::QGtP => m * dual_exponent(inv_p) / (m + two),
        Branch::QLeP | Branch::QGt4 => m / (two * (m + Rat::one())),
    }
}

/// The ε-loss factor `(l_a / l_b)^ε` carried next to the exponents.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EpsilonSlack {
    /// Index (0-based) of the sidelength in the numerator, always `d-1`.
    pub numerator_axis: usize,
    /// Index (0-based) of the sidelength in the denominator, `j`.
    pub denominator_axis: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredictedExponents {
    #[serde(with = "crate::rational::serde_rat_vec")]
    pub per_sidelength: Vec<Rat>,
    #[serde(with = "crate::rational::serde_rat")]
    pub epsilon_slack: Rat,
    pub slack: Option<EpsilonSlack>,
    pub regime: ScalingRegime,
}

impl PredictedExponents {
    /// Same prediction with the ε-loss set to `eps`.
    pub fn with_epsilon(mut self, eps: Rat) -> Self {
        if self.slack.is_some() {
            self.epsilon_slack = eps;
        }
        self
    }

    /// Exponents with the slack folded in: `e_d += ε`, `e_{j+1} -= ε`.
    pub fn folded(&self) -> Vec<Rat> {
        let mut e = self.per_sidelength.clone();
        if let Some(s) = self.slack {
            e[s.numerator_axis] += self.epsilon_slack;
            e[s.denominator_axis] -= self.epsilon_slack;
        }
        e
    }

    /// `log2 ∏ l_i^{e_i}`, slack excluded.
    pub fn log2_norm(&self, ell: &Sidelengths) -> f64 {
        self.per_sidelength
            .iter()
            .zip(ell.lengths())
            .map(|(e, l)| crate::rational::to_f64(*e) * l.log2())
            .sum()
    }
}

pub fn conjectured_exponents(d: usize, pq: &ExponentPair, ell: &Sidelengths) -> Result<PredictedExponents> {
    if ell.dim() != d {
        return Err(Error::DimensionMismatch { expected: d, found: ell.dim() });
    }
    if !ell.is_sorted() {
        return Err(Error::UnsortedSidelengths);
    }
    let regime = scaling_regime(d, pq)?;
    let (j, theta) = (regime.j, regime.theta);
    let gap = pq.gap();
    let two = Rat::from_integer(2);
    let mut e = vec![Rat::zero(); d];
    let mut slack = None;
    match regime.branch {
        Branch::QGtP => {
            for ei in e.iter_mut().take(j) {
                *ei = gap;
            }
            e[j] = theta * gap;
        }
        Branch::QLeP => {
            let base = pq.inv_q - pq.inv_p;
            let curv = Rat::one() - two * pq.inv_q;
            for (i, ei) in e.iter_mut().enumerate() {
                *ei = base
                    + match i.cmp(&j) {
                        std::cmp::Ordering::Less => curv,
                        std::cmp::Ordering::Equal => theta * curv,
                        std::cmp::Ordering::Greater => Rat::zero(),
                    };
            }
            slack = Some(EpsilonSlack { numerator_axis: d - 1, denominator_axis: j });
        }
        Branch::QGt4 => {
            for ei in e.iter_mut().take(d - 1) {
                *ei = gap;
            }
            e[d - 1] = Rat::one() - Rat::from_integer(3) * pq.inv_q - pq.inv_p;
        }
    }
    Ok(PredictedExponents { per_sidelength: e, epsilon_slack: Rat::zero(), slack, regime })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct InterpolationCheck {
    pub nu: Rat,
    pub lhs: Rat,
    pub rhs: Rat,
}

/// Interpolate between a pair on the `θ = 0` scaling line and one on the
/// `θ = 1` line (same `j`), solve for the level `ν` of the interpolated pair
/// and return both sides of `ν(1/p_t' - 1/q_t) = t(1/p_1' - 1/q_1)`.
pub fn interpolation_identity(
    d: usize,
    j: usize,
    pq0: &ExponentPair,
    pq1: &ExponentPair,
    t: Rat,
) -> Result<InterpolationCheck> {
    if j >= d {
        return Err(Error::InvalidDimension(d));
    }
    if t.is_negative() || t > Rat::one() {
        return Err(Error::InvalidExponent(format!("interpolation parameter {t} outside [0,1]")));
    }
    let two = Rat::from_integer(2);
    let on_line = |pq: &ExponentPair, i: i128| {
        let m = Rat::from_integer(d as i128 - j as i128 - i);
        pq.inv_q * (m + two) == m * pq.inv_p_dual()
    };
    if !on_line(pq0, 0) || !on_line(pq1, 1) {
        return Err(Error::NotOnScalingLine);
    }
    let pt = pq0.lerp(pq1, t);
    let gap = pt.gap();
    if gap.is_zero() {
        return Err(Error::DegenerateLine);
    }
    let m = two * pt.inv_q / gap;
    if m.is_zero() {
        return Err(Error::DegenerateLine);
    }
    let nu = Rat::from_integer((d - j) as i128) - m;
    Ok(InterpolationCheck { nu, lhs: nu * gap, rhs: t * pq1.gap() })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pair(p: i64, q: i64) -> ExponentPair {
        ExponentPair::from_ints(p, q).unwrap()
    }

    #[test]
    fn dual_examples() {
        assert_eq!(dual_exponent(rat(1, 2)), rat(1, 2));
        assert_eq!(dual_exponent(rat(1, 4)), rat(3, 4));
        assert_eq!(dual_exponent(Rat::one()), Rat::zero());
    }

    #[test]
    fn td_membership() {
        assert!(in_td(2, &pair(2, 4)));
        assert!(!in_td(2, &pair(2, 3)));
        assert!(in_td(1, &pair(2, 6)));
        assert!(in_td_closure(2, &pair(3, 3)));
    }

    #[test]
    fn regimes_from_examples() {
        let r = scaling_regime(1, &pair(2, 6)).unwrap();
        assert_eq!((r.j, r.theta, r.branch), (0, Rat::zero(), Branch::QGtP));
        let r = scaling_regime(2, &pair(4, 4)).unwrap();
        assert_eq!((r.j, r.theta, r.branch), (0, Rat::one(), Branch::QLeP));
        let r = scaling_regime(2, &pair(2, 4)).unwrap();
        assert_eq!((r.j, r.theta, r.branch), (0, Rat::zero(), Branch::QGtP));
    }

    #[test]
    fn tie_break_prefers_theta_one() {
        // d=2, (2,6): j+θ = 1 solves as (0,1) rather than (1,0).
        let r = scaling_regime(2, &pair(2, 6)).unwrap();
        assert_eq!((r.j, r.theta), (0, Rat::one()));
    }

    #[test]
    fn outside_closure_has_no_regime() {
        assert!(matches!(scaling_regime(2, &pair(2, 2)), Err(Error::NoRegime { .. })));
        // d=1 has no q <= p branch below q = 4.
        assert!(scaling_regime(1, &pair(4, 4)).is_err());
    }

    #[test]
    fn conjectured_examples() {
        let ell = Sidelengths::new(vec![1.0, 64.0]).unwrap();
        let e = conjectured_exponents(2, &pair(2, 6), &ell).unwrap();
        assert_eq!(e.per_sidelength, vec![rat(1, 3), Rat::zero()]);

        let ell1 = Sidelengths::new(vec![3.0]).unwrap();
        let e = conjectured_exponents(1, &pair(2, 8), &ell1).unwrap();
        assert_eq!(e.regime.branch, Branch::QGtP);
        assert_eq!(e.per_sidelength, vec![rat(1, 8)]);
        // The q > 4 formula agrees wherever both branches apply.
        let e = conjectured_exponents(1, &pair(8, 8), &ell1).unwrap();
        assert_eq!(e.regime.branch, Branch::QGt4);
        assert_eq!(e.per_sidelength, vec![Rat::one() - rat(3, 8) - rat(1, 8)]);
    }

    #[test]
    fn unit_sidelengths_predict_unit_norm() {
        let ell = Sidelengths::ones(3);
        for pq in [pair(2, 4), pair(5, 5), pair(6, 6), pair(9, 9), pair(2, 10)] {
            if let Ok(e) = conjectured_exponents(3, &pq, &ell) {
                assert_eq!(e.log2_norm(&ell), 0.0);
            }
        }
    }

    #[test]
    fn q_gt_4_matches_q_le_p_formula_with_top_j() {
        // For q > 4, q <= p the (j = d-1) q <= p exponents coincide with the q > 4 ones.
        let d = 3;
        let pq = pair(7, 6);
        let ell = Sidelengths::ones(d);
        let e = conjectured_exponents(d, &pq, &ell).unwrap();
        assert_eq!(e.regime.branch, Branch::QGt4);
        assert_eq!(e.regime.j, d - 1);
        let theta = e.regime.theta;
        let base = pq.inv_q - pq.inv_p;
        let curv = Rat::one() - rat(2, 1) * pq.inv_q;
        let mut alt = vec![base + curv; d];
        alt[d - 1] = base + theta * curv;
        assert_eq!(e.per_sidelength, alt);
    }

    #[test]
    fn slack_is_kept_apart() {
        let ell = Sidelengths::new(vec![1.0, 2.0, 4.0]).unwrap();
        let e = conjectured_exponents(3, &pair(4, 4), &ell).unwrap().with_epsilon(rat(1, 100));
        assert_eq!(e.regime.branch, Branch::QLeP);
        let f = e.folded();
        assert_eq!(f[2] - e.per_sidelength[2], rat(1, 100));
        assert_eq!(f[e.regime.j] - e.per_sidelength[e.regime.j], rat(-1, 100));
    }

    #[test]
    fn interpolation_examples() {
        let pq0 = pair(2, 4);
        let pq1 = ExponentPair::from_pq(Some(rat(3, 2)), Some(rat(9, 1))).unwrap();
        let c = interpolation_identity(2, 0, &pq0, &pq1, Rat::zero()).unwrap();
        assert_eq!((c.nu, c.lhs, c.rhs), (Rat::zero(), Rat::zero(), Rat::zero()));
        let c = interpolation_identity(2, 0, &pq0, &pq1, Rat::one()).unwrap();
        assert_eq!(c.nu, Rat::one());
        assert_eq!(c.lhs, pq1.gap());
        let c = interpolation_identity(2, 0, &pq0, &pq1, rat(1, 2)).unwrap();
        assert_eq!(c.lhs, c.rhs);
        assert!(matches!(
            interpolation_identity(2, 0, &pq1, &pq0, rat(1, 2)),
            Err(Error::NotOnScalingLine)
        ));
    }

    use proptest::prelude::*;

    fn on_line(d: usize, j: usize, theta: Rat, inv_p: Rat) -> ExponentPair {
        let regime = ScalingRegime { j, theta, branch: Branch::QGtP };
        ExponentPair::new(inv_p, regime_inv_q(d, &regime, inv_p)).unwrap()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1024))]

        #[test]
        fn knapp_exponent_identity(d in 1usize..7, jj in 0usize..6, tn in 0i64..=12, pn in 0i64..=60) {
            let j = jj % d;
            let theta = rat(tn, 12);
            prop_assume!(Rat::from_integer((d - j) as i128) - theta > Rat::zero());
            let pq = on_line(d, j, theta, rat(pn, 120) + rat(1, 2));
            let g = pq.gap();
            let lhs = Rat::from_integer((d - j) as i128) * g - Rat::from_integer(2) * pq.inv_q;
            prop_assert_eq!(lhs, theta * g);
        }

        #[test]
        fn interpolation_identity_holds(d in 1usize..7, jj in 0usize..6, a in 0i64..40, b in 0i64..40, t in 0i64..=16) {
            let j = jj % d;
            prop_assume!(d - j >= 2);
            let pq0 = on_line(d, j, Rat::zero(), rat(a, 80) + rat(1, 2));
            let pq1 = on_line(d, j, Rat::one(), rat(b, 80) + rat(1, 2));
            let c = interpolation_identity(d, j, &pq0, &pq1, rat(t, 16)).unwrap();
            prop_assert_eq!(c.lhs, c.rhs);
        }
    }
}
