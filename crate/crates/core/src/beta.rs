//! The `g_β(ξ) = Σ |ξ_i|^{β_i}` family: boundedness conditions, the
//! Riesz-diagram region they carve out, dyadic block bounds and the
//! counterexample family that certifies sharpness.
//!
//! Upper verdicts are conditional on the rectangle conjecture; nothing here
//! proves anything, it only evaluates the bound sequences.

use num_traits::{One, Signed, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exponents::{regime_inv_q, scaling_regime, Branch, ExponentPair, ScalingRegime};
use crate::rational::{to_f64, Rat};

fn r(n: i128) -> Rat {
    Rat::from_integer(n)
}

/// `β_1 ≥ … ≥ β_d > 1` with the derived heights.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BetaProfile {
    #[serde(with = "crate::rational::serde_rat_vec")]
    beta: Vec<Rat>,
    /// `J_0, …, J_d`.
    #[serde(with = "crate::rational::serde_rat_vec")]
    j: Vec<Rat>,
    #[serde(with = "crate::rational::serde_rat")]
    height: Rat,
    n0: usize,
}

impl BetaProfile {
    pub fn new(beta: Vec<Rat>) -> Result<Self> {
        if beta.is_empty() {
            return Err(Error::InvalidDimension(0));
        }
        if let Some(b) = beta.iter().find(|b| **b <= Rat::one()) {
            return Err(Error::InvalidBeta(format!("β = {b} must exceed 1")));
        }
        if beta.windows(2).any(|w| w[0] < w[1]) {
            return Err(Error::InvalidBeta("β must be sorted nonincreasing".into()));
        }
        let mut j = vec![Rat::zero()];
        for b in &beta {
            let last = *j.last().unwrap();
            j.push(last + b.recip());
        }
        let height = j.last().unwrap().recip();
        let n0 = beta.iter().filter(|b| **b >= r(2)).count();
        Ok(Self { beta, j, height, n0 })
    }

    pub fn from_ints(beta: &[i64]) -> Result<Self> {
        Self::new(beta.iter().map(|b| r(*b as i128)).collect())
    }

    pub fn dim(&self) -> usize {
        self.beta.len()
    }

    pub fn beta(&self) -> &[Rat] {
        &self.beta
    }

    /// `J_n = Σ_{i ≤ n} 1/β_i`.
    pub fn j(&self, n: usize) -> Rat {
        self.j[n]
    }

    pub fn j_all(&self) -> &[Rat] {
        &self.j
    }

    /// `h = 1/J_d`.
    pub fn height(&self) -> Rat {
        self.height
    }

    /// Number of `β_i ≥ 2`: the last index after which every `β_i < 2`.
    pub fn n0(&self) -> usize {
        self.n0
    }

    /// `c_n = J_n + (d-n)/2`.
    pub fn c(&self, n: usize) -> Rat {
        self.j[n] + r((self.dim() - n) as i128) / r(2)
    }

    /// `1/p = 1/q` on the diagonal where the `n`-th lines of (i) and (ii)
    /// meet: `q = p = 2 + 1/c_n`.
    pub fn diagonal_vertex(&self, n: usize) -> Rat {
        (r(2) + self.c(n).recip()).recip()
    }
}

/// Dyadic block index `k` with ordering permutation `σ` (0-based).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockIndex {
    k: Vec<u64>,
    sigma: Vec<usize>,
}

impl BlockIndex {
    pub fn new(k: Vec<u64>, sigma: Vec<usize>) -> Result<Self> {
        if k.len() != sigma.len() {
            return Err(Error::DimensionMismatch { expected: k.len(), found: sigma.len() });
        }
        if k.iter().any(|k| *k == 0) {
            return Err(Error::RegimeMismatch("block indices are positive".into()));
        }
        let mut seen = vec![false; sigma.len()];
        for &s in &sigma {
            if s >= seen.len() || std::mem::replace(&mut seen[s], true) {
                return Err(Error::RegimeMismatch(format!("{sigma:?} is not a permutation")));
            }
        }
        Ok(Self { k, sigma })
    }

    pub fn identity(k: Vec<u64>) -> Result<Self> {
        let d = k.len();
        Self::new(k, (0..d).collect())
    }

    pub fn k(&self) -> &[u64] {
        &self.k
    }

    pub fn sigma(&self) -> &[usize] {
        &self.sigma
    }

    /// `K_m = k_{σ(m)} β_{σ(m)}` in σ order.
    pub fn weights(&self, beta: &BetaProfile) -> Vec<Rat> {
        self.sigma.iter().map(|&a| r(self.k[a] as i128) * beta.beta[a]).collect()
    }

    /// `k ∈ K_β^σ`.
    pub fn check_cone(&self, beta: &BetaProfile) -> Result<()> {
        if self.k.len() != beta.dim() {
            return Err(Error::DimensionMismatch { expected: beta.dim(), found: self.k.len() });
        }
        let w = self.weights(beta);
        if let Some(m) = (1..w.len()).find(|&m| w[m - 1] < w[m]) {
            return Err(Error::RegimeMismatch(format!(
                "k ∉ K_β^σ: k_σ({m})β_σ({m}) = {} < {}",
                w[m - 1],
                w[m]
            )));
        }
        Ok(())
    }

    /// `R^k = {ξ : ξ_i ∈ (4^{-k_i}, 4^{-k_i+1}]}`.
    pub fn rectangle(&self) -> Vec<(f64, f64)> {
        self.k.iter().map(|&k| ((-2.0 * k as f64).exp2(), (2.0 - 2.0 * k as f64).exp2())).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Condition {
    I,
    II,
    III,
    IV,
}

impl std::fmt::Display for Condition {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Condition::I => "i",
            Condition::II => "ii",
            Condition::III => "iii",
            Condition::IV => "iv",
        })
    }
}

/// Outcome of one condition with its witness index.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub condition: Condition,
    pub holds: bool,
    /// First failing `n` when the condition fails, else the binding `n`
    /// (smallest slack). `None` when a non-`n` clause decides.
    pub witness_n: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConditionVerdict {
    /// First condition in the order (i)–(iv) that holds.
    pub verdict: Option<Condition>,
    pub reports: Vec<ConditionReport>,
}

impl ConditionVerdict {
    pub fn holds(&self, c: Condition) -> bool {
        self.reports.iter().any(|rep| rep.condition == c && rep.holds)
    }

    /// Some of (i)–(iii): strong type.
    pub fn strong(&self) -> bool {
        self.holds(Condition::I) || self.holds(Condition::II) || self.holds(Condition::III)
    }

    pub fn any(&self) -> bool {
        self.verdict.is_some()
    }
}

/// Slack of the `n`-th (ii) inequality: `J_n/p' + (d-n)/2 - (1+J_n+d-n)/q`.
fn slack_ii(beta: &BetaProfile, pq: &ExponentPair, n: usize) -> Rat {
    let d = beta.dim();
    let jn = beta.j[n];
    let dn = r((d - n) as i128);
    jn * pq.inv_p_dual() + dn / r(2) - (Rat::one() + jn + dn) * pq.inv_q
}

/// Slack of the `n`-th (i) inequality in linear form: `c_n/p' - (c_n+1)/q`.
fn slack_i(beta: &BetaProfile, pq: &ExponentPair, n: usize) -> Rat {
    let c = beta.c(n);
    c * pq.inv_p_dual() - (c + Rat::one()) * pq.inv_q
}

fn argmin_by<F: Fn(usize) -> Rat>(range: std::ops::Range<usize>, f: F) -> usize {
    let mut best = range.start;
    for n in range {
        if f(n) < f(best) {
            best = n;
        }
    }
    best
}

/// Evaluate conditions (i)–(iv) exactly as stated.
pub fn condition_check(beta: &BetaProfile, pq: &ExponentPair) -> ConditionVerdict {
    let d = beta.dim();
    let q_gt_p = pq.inv_q < pq.inv_p;
    let q_le_p = !q_gt_p;
    let diag = pq.inv_q == pq.inv_p;

    let fail_i = (0..=d).find(|&n| slack_i(beta, pq, n).is_negative());
    let i = ConditionReport {
        condition: Condition::I,
        holds: q_gt_p && fail_i.is_none(),
        witness_n: Some(fail_i.unwrap_or_else(|| argmin_by(0..d + 1, |n| beta.c(n)))),
    };

    let fail_ii = |upto: usize| (0..upto).find(|&n| !slack_ii(beta, pq, n).is_positive());
    let strict_all = fail_ii(d + 1);
    let ii = ConditionReport {
        condition: Condition::II,
        holds: q_le_p && strict_all.is_none(),
        witness_n: Some(strict_all.unwrap_or_else(|| argmin_by(0..d + 1, |n| slack_ii(beta, pq, n)))),
    };

    let strict_lower = fail_ii(d);
    let eq_d = slack_ii(beta, pq, d).is_zero();
    let lower_witness = || match strict_lower {
        Some(n) => Some(n),
        None if !eq_d => Some(d),
        None if d > 0 => Some(argmin_by(0..d, |n| slack_ii(beta, pq, n))),
        None => None,
    };
    let iii = ConditionReport {
        condition: Condition::III,
        holds: diag && eq_d && strict_lower.is_none(),
        witness_n: lower_witness(),
    };
    let iv = ConditionReport {
        condition: Condition::IV,
        holds: q_le_p && eq_d && strict_lower.is_none(),
        witness_n: lower_witness(),
    };
    let reports = vec![i, ii, iii, iv];
    let verdict = reports.iter().find(|rep| rep.holds).map(|rep| rep.condition);
    ConditionVerdict { verdict, reports }
}

/// `(1 - 2/q) - (2/β_i)(1/p' - 1/q)`.
fn gain(beta_i: Rat, pq: &ExponentPair) -> Rat {
    Rat::one() - r(2) * pq.inv_q - r(2) / beta_i * pq.gap()
}

/// `d(1 - 2/q) - 2/q`.
fn reform_rhs(d: usize, pq: &ExponentPair) -> Rat {
    r(d as i128) * (Rat::one() - r(2) * pq.inv_q) - r(2) * pq.inv_q
}

/// `max_{0 ≤ n ≤ N} [n(1-2/q) - 2J_n(1/p' - 1/q)]`.
pub fn prefix_max(beta: &BetaProfile, pq: &ExponentPair, upto: usize) -> Rat {
    (0..=upto)
        .map(|n| r(n as i128) * (Rat::one() - r(2) * pq.inv_q) - r(2) * beta.j[n] * pq.gap())
        .max()
        .unwrap()
}

/// `Σ_{i ≤ N} [(1-2/q) - (2/β_i)(1/p' - 1/q)]_+`.
pub fn positive_part_sum(beta: &BetaProfile, pq: &ExponentPair, upto: usize) -> Rat {
    beta.beta[..upto].iter().map(|b| gain(*b, pq).max(Rat::zero())).sum()
}

/// Rewritten form of "(ii) and p < ∞".
pub fn condition_ii_prime(beta: &BetaProfile, pq: &ExponentPair) -> bool {
    let d = beta.dim();
    pq.inv_q >= pq.inv_p && pq.inv_p.is_positive() && positive_part_sum(beta, pq, d) < reform_rhs(d, pq)
}

/// Rewritten form of (iv).
pub fn condition_iv_prime(beta: &BetaProfile, pq: &ExponentPair) -> bool {
    let jd = beta.j[beta.dim()];
    pq.inv_q >= pq.inv_p
        && beta.beta.iter().all(|b| gain(*b, pq).is_positive())
        && (Rat::one() + jd) * pq.inv_q == jd * pq.inv_p_dual()
}

// ---------------------------------------------------------------------------
// Region boundary

/// A line `a·(1/p) + b·(1/q) = c`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct Line {
    a: Rat,
    b: Rat,
    c: Rat,
}

impl Line {
    fn y_at(&self, x: Rat) -> Rat {
        (self.c - self.a * x) / self.b
    }

    fn slope(&self) -> Rat {
        -self.a / self.b
    }

    fn same(&self, o: &Line) -> bool {
        self.a * o.b == o.a * self.b && self.c * o.b == o.c * self.b
    }

    fn intersect(&self, o: &Line) -> Option<(Rat, Rat)> {
        let det = self.a * o.b - o.a * self.b;
        if det.is_zero() {
            return None;
        }
        Some(((self.c * o.b - o.c * self.b) / det, (self.a * o.c - o.a * self.c) / det))
    }
}

fn line_i(beta: &BetaProfile, n: usize) -> Line {
    let c = beta.c(n);
    Line { a: c, b: c + Rat::one(), c }
}

fn line_ii(beta: &BetaProfile, n: usize) -> Line {
    let d = beta.dim();
    let jn = beta.j[n];
    let dn = r((d - n) as i128);
    Line { a: jn, b: Rat::one() + jn + dn, c: jn + dn / r(2) }
}

/// Which line of which condition carries the boundary.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Binding {
    pub condition: Condition,
    pub n: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Vertex {
    #[serde(with = "crate::rational::serde_rat")]
    pub inv_p: Rat,
    #[serde(with = "crate::rational::serde_rat")]
    pub inv_q: Rat,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub from: usize,
    pub to: usize,
    pub binding_condition: Binding,
}

/// Slope of the `n`-th (ii)-line computed from its equation, against the
/// closed form quoted alongside the theorem.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlopeCheck {
    pub n: usize,
    #[serde(with = "crate::rational::serde_rat")]
    pub derived: Rat,
    #[serde(with = "crate::rational::serde_rat")]
    pub printed: Rat,
    pub agree: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegionBoundary {
    /// Sampled upper boundary `(1/p, sup 1/q)`.
    pub polyline: Vec<(f64, f64)>,
    pub vertices: Vec<Vertex>,
    pub edges: Vec<Edge>,
    pub slope_checks: Vec<SlopeCheck>,
}

impl RegionBoundary {
    pub fn has_vertex(&self, inv_p: Rat, inv_q: Rat) -> bool {
        self.vertices.iter().any(|v| v.inv_p == inv_p && v.inv_q == inv_q)
    }

    /// `sup 1/q` at `1/p = x`, interpolated along the vertex chain.
    pub fn upper_at(&self, x: f64) -> f64 {
        for w in self.vertices.windows(2) {
            let (x0, x1) = (to_f64(w[0].inv_p), to_f64(w[1].inv_p));
            if x >= x0 && x <= x1 {
                let (y0, y1) = (to_f64(w[0].inv_q), to_f64(w[1].inv_q));
                return if x1 == x0 { y0.max(y1) } else { y0 + (y1 - y0) * (x - x0) / (x1 - x0) };
            }
        }
        f64::NAN
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("inv_p,inv_q\n");
        for (x, y) in &self.polyline {
            s.push_str(&format!("{x},{y}\n"));
        }
        s
    }
}

pub const MIN_BOUNDARY_RESOLUTION: usize = 64;
const BISECTION_STEPS: u32 = 40;

/// Largest `1/q` for which some of (i)–(iii) holds at `1/p = x`.
fn sup_inv_q(beta: &BetaProfile, x: Rat) -> Rat {
    let strong = |y: Rat| {
        ExponentPair::new(x, y).map(|pq| condition_check(beta, &pq).strong()).unwrap_or(false)
    };
    let (mut lo, mut hi) = (Rat::zero(), Rat::one());
    if !strong(lo) {
        return Rat::zero();
    }
    if strong(hi) {
        return hi;
    }
    for _ in 0..BISECTION_STEPS {
        let mid = (lo + hi) / r(2);
        if strong(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

/// The active line at `x`: lines of (ii) above the diagonal, of (i) below;
/// ties go to the line that stays lowest to the right.
fn binding_at(beta: &BetaProfile, x: Rat, y: Rat) -> (Binding, Line) {
    let d = beta.dim();
    let (cond, line_of): (Condition, fn(&BetaProfile, usize) -> Line) =
        if y > x { (Condition::II, line_ii) } else { (Condition::I, line_i) };
    let mut best = 0;
    for n in 1..=d {
        let (l, b) = (line_of(beta, n), line_of(beta, best));
        let (yl, yb) = (l.y_at(x), b.y_at(x));
        if yl < yb || (yl == yb && l.slope() < b.slope()) {
            best = n;
        }
    }
    (Binding { condition: cond, n: best }, line_of(beta, best))
}

fn push_vertex(vertices: &mut Vec<Vertex>, edges: &mut Vec<Edge>, v: Vertex, binding: Binding) {
    if vertices.last() == Some(&v) {
        return;
    }
    vertices.push(v);
    edges.push(Edge { from: vertices.len() - 2, to: vertices.len() - 1, binding_condition: binding });
}

/// Upper boundary of the closed region where some of (i)–(iii) holds.
pub fn region_boundary(beta: &BetaProfile, resolution: usize) -> Result<RegionBoundary> {
    if resolution < MIN_BOUNDARY_RESOLUTION {
        return Err(Error::InvalidGrid(format!(
            "resolution {resolution} < {MIN_BOUNDARY_RESOLUTION}"
        )));
    }
    let xs: Vec<Rat> = (0..=resolution).map(|i| Rat::new(i as i128, resolution as i128)).collect();
    let ys: Vec<Rat> = xs.par_iter().map(|&x| sup_inv_q(beta, x)).collect();
    let labels: Vec<(Binding, Line)> = xs.iter().zip(&ys).map(|(&x, &y)| binding_at(beta, x, y)).collect();

    let mut vertices = vec![Vertex { inv_p: Rat::zero(), inv_q: labels[0].1.y_at(Rat::zero()) }];
    let mut edges = Vec::new();
    let mut current = labels[0];
    for (i, lab) in labels.iter().enumerate().skip(1) {
        if lab.0 == current.0 {
            continue;
        }
        let (x, y) = match current.1.intersect(&lab.1) {
            Some(p) => p,
            None if current.1.same(&lab.1) => {
                // Same line under two labels: the switch happens on the diagonal.
                let l = current.1;
                let x = l.c / (l.a + l.b);
                (x, x)
            }
            None => (xs[i], ys[i]),
        };
        push_vertex(&mut vertices, &mut edges, Vertex { inv_p: x, inv_q: y }, current.0);
        current = *lab;
    }
    let end = Vertex { inv_p: Rat::one(), inv_q: current.1.y_at(Rat::one()) };
    push_vertex(&mut vertices, &mut edges, end, current.0);

    let slope_checks = (0..=beta.dim())
        .map(|n| {
            let l = line_ii(beta, n);
            let jn = beta.j[n];
            let printed = if jn.is_zero() {
                Rat::zero()
            } else {
                -jn / (Rat::one() + r((1 + beta.dim() - n) as i128) / jn)
            };
            SlopeCheck { n, derived: l.slope(), printed, agree: l.slope() == printed }
        })
        .collect();
    let polyline = xs.iter().zip(&ys).map(|(x, y)| (to_f64(*x), to_f64(*y))).collect();
    Ok(RegionBoundary { polyline, vertices, edges, slope_checks })
}

// ---------------------------------------------------------------------------
// Dyadic block bounds

fn check_regime(d: usize, pq: &ExponentPair, regime: &ScalingRegime) -> Result<()> {
    let mismatch = |why: &str| Err(Error::RegimeMismatch(format!("{why} at {pq}")));
    if regime.j >= d || regime.theta.is_negative() || regime.theta > Rat::one() {
        return mismatch("(j, θ) out of range");
    }
    let q_gt_p = pq.q_gt_p();
    match regime.branch {
        Branch::QGtP if !q_gt_p => return mismatch("q > p regime"),
        Branch::QLeP | Branch::QGt4 if q_gt_p => return mismatch("q ≤ p regime"),
        Branch::QLeP | Branch::QGt4 if regime.theta.is_zero() => return mismatch("θ = 0 on the q ≤ p branch"),
        _ => {}
    }
    if regime_inv_q(d, regime, pq.inv_p) != pq.inv_q {
        return mismatch("(j, θ) does not reproduce q");
    }
    Ok(())
}

/// Per-position `log₂` coefficients of `K_m = k_{σ(m)} β_{σ(m)}`.
fn upper_coefficients(beta_sorted: &[Rat], pq: &ExponentPair, regime: &ScalingRegime, eps: f64) -> Vec<f64> {
    let d = beta_sorted.len();
    let a = pq.gap();
    let one = Rat::one();
    let theta = regime.theta;
    let mut out: Vec<f64> = (0..d)
        .map(|m| {
            let b = beta_sorted[m];
            let per_k = if regime.branch == Branch::QGtP {
                if m < regime.j {
                    -r(2) / b * a
                } else if m == regime.j {
                    ((one - theta) - r(2) / b) * a
                } else {
                    (one - r(2) / b) * a
                }
            } else {
                let t = one - r(2) * pq.inv_q;
                if m < regime.j {
                    -r(2) / b * a
                } else if m == regime.j {
                    (one - theta) * t - r(2) / b * a
                } else {
                    t - r(2) / b * a
                }
            };
            to_f64(per_k)
        })
        .collect();
    if regime.branch != Branch::QGtP {
        out[regime.j] += eps;
        out[d - 1] -= eps;
    }
    out
}

fn sorted_beta(beta: &BetaProfile, sigma: &[usize]) -> Vec<Rat> {
    sigma.iter().map(|&a| beta.beta[a]).collect()
}

fn dot(coef: &[f64], w: &[Rat]) -> f64 {
    coef.iter().zip(w).map(|(c, w)| c * to_f64(*w)).sum()
}

/// `log₂` of the conditional block upper bound for `‖E^k_β‖_{p→q}`,
/// including the `ε`-losses on the `q ≤ p` branch.
pub fn block_upper_exponent(
    beta: &BetaProfile,
    k: &BlockIndex,
    pq: &ExponentPair,
    regime: &ScalingRegime,
    eps: f64,
) -> Result<f64> {
    k.check_cone(beta)?;
    check_regime(beta.dim(), pq, regime)?;
    let coef = upper_coefficients(&sorted_beta(beta, k.sigma()), pq, regime, eps);
    Ok(dot(&coef, &k.weights(beta)))
}

/// The increasing factor `α̃` of the `q ≤ p` lower bound is taken as 1.
pub const ALPHA_TILDE: f64 = 1.0;

/// `log₂` of the block lower bound for the restricted weak type norm
/// (without `α̃`, see [`ALPHA_TILDE`]).
pub fn block_lower_exponent(
    beta: &BetaProfile,
    k: &BlockIndex,
    pq: &ExponentPair,
    regime: &ScalingRegime,
) -> Result<f64> {
    k.check_cone(beta)?;
    check_regime(beta.dim(), pq, regime)?;
    Ok(lower_unchecked(beta, k, pq, regime))
}

fn lower_unchecked(beta: &BetaProfile, k: &BlockIndex, pq: &ExponentPair, regime: &ScalingRegime) -> f64 {
    let coef = upper_coefficients(&sorted_beta(beta, k.sigma()), pq, regime, 0.0);
    dot(&coef, &k.weights(beta))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SumVerdict {
    Converged,
    Diverged,
    Inconclusive,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DyadicSum {
    /// `(k_{σ(1)} β_{σ(1)}, partial sum over all blocks up to that weight)`.
    pub partial_sums: Vec<(f64, f64)>,
    pub verdict: SumVerdict,
    /// Every upper verdict rests on the rectangle conjecture.
    pub conditional: bool,
}

pub const MAX_K: u32 = 4096;
pub const TAIL_TOLERANCE: f64 = 1e-6;
pub const DIVERGENCE_RATIO: f64 = 2.0;

/// `Σ_{k=1}^{u} 2^{c k}`.
fn geometric(c: f64, u: u64) -> f64 {
    if u == 0 {
        return 0.0;
    }
    if c == 0.0 {
        return u as f64;
    }
    let q = c.exp2();
    q * ((c * u as f64).exp2() - 1.0) / (q - 1.0)
}

struct Nested<'a> {
    beta: &'a [Rat],
    coef: &'a [f64],
    pinned: &'a [bool],
}

impl Nested<'_> {
    /// Sum over positions `m..` given `k` at position `m-1`.
    fn sum(&self, m: usize, prev_k: u64) -> f64 {
        let d = self.beta.len();
        if m == d {
            return 1.0;
        }
        let bound = (r(prev_k as i128) * self.beta[m - 1] / self.beta[m]).floor().to_integer();
        let upper = bound.max(0) as u64;
        if self.pinned[m] {
            return if upper >= 1 { self.coef[m].exp2() * self.sum(m + 1, 1) } else { 0.0 };
        }
        if m == d - 1 {
            return geometric(self.coef[m], upper);
        }
        (1..=upper).map(|k| (self.coef[m] * k as f64).exp2() * self.sum(m + 1, k)).sum()
    }
}

/// Partial sums of the block upper bounds over `K_β^σ`, nested in σ order,
/// with blocks in `β_i = 2` directions pinned to `k_i = 1`.
pub fn dyadic_sum(beta: &BetaProfile, pq: &ExponentPair, sigma: &[usize], eps: f64, k_max: u32) -> Result<DyadicSum> {
    let d = beta.dim();
    if k_max == 0 || k_max > MAX_K {
        return Err(Error::InvalidGrid(format!("K_max = {k_max} outside 1..={MAX_K}")));
    }
    BlockIndex::new(vec![1; d], sigma.to_vec())?;
    let regime = scaling_regime(d, pq)?;
    let sb = sorted_beta(beta, sigma);
    let coef: Vec<f64> = upper_coefficients(&sb, pq, &regime, eps)
        .iter()
        .zip(&sb)
        .map(|(c, b)| c * to_f64(*b))
        .collect();
    let pinned: Vec<bool> = sb.iter().map(|b| *b == r(2)).collect();
    let nested = Nested { beta: &sb, coef: &coef, pinned: &pinned };
    let b0 = sb[0];
    let k1_max = (r(k_max as i128) / b0).floor().to_integer().max(0) as u64;
    let mut partial_sums = Vec::new();
    let mut total = 0.0;
    let k1_range: Vec<u64> = if pinned[0] { vec![1.min(k1_max)].into_iter().filter(|k| *k > 0).collect() } else { (1..=k1_max).collect() };
    for k1 in k1_range {
        total += (coef[0] * k1 as f64).exp2() * nested.sum(1, k1);
        partial_sums.push((k1 as f64 * to_f64(b0), total));
    }
    let verdict = verdict_from(&partial_sums, k_max as f64);
    Ok(DyadicSum { partial_sums, verdict, conditional: true })
}

fn verdict_from(partial: &[(f64, f64)], k_max: f64) -> SumVerdict {
    let Some(&(_, full)) = partial.last() else {
        return SumVerdict::Inconclusive;
    };
    let at = |kk: f64| partial.iter().take_while(|(w, _)| *w <= kk).last().map(|p| p.1).unwrap_or(0.0);
    let half = at(k_max / 2.0);
    if !full.is_finite() {
        return SumVerdict::Diverged;
    }
    // An empty cone sums to exactly zero: converged.
    if full - half <= TAIL_TOLERANCE * full {
        SumVerdict::Converged
    } else if full > DIVERGENCE_RATIO * half {
        SumVerdict::Diverged
    } else {
        SumVerdict::Inconclusive
    }
}

fn permutations(d: usize) -> Vec<Vec<usize>> {
    let mut out = vec![];
    let mut cur: Vec<usize> = (0..d).collect();
    fn heap(k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if k <= 1 {
            out.push(cur.clone());
            return;
        }
        for i in 0..k {
            heap(k - 1, cur, out);
            let swap = if k % 2 == 0 { i } else { 0 };
            cur.swap(swap, k - 1);
        }
    }
    heap(d, &mut cur, &mut out);
    out.sort();
    out.dedup();
    out
}

pub const MAX_EXHAUSTIVE_DIM: usize = 4;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DyadicSumAll {
    pub per_sigma: Vec<(Vec<usize>, DyadicSum)>,
    pub verdict: SumVerdict,
    /// Only σ = identity was run (`d > 4`).
    pub identity_only: bool,
}

/// [`dyadic_sum`] over every σ (identity only above four dimensions).
pub fn dyadic_sum_all(beta: &BetaProfile, pq: &ExponentPair, eps: f64, k_max: u32) -> Result<DyadicSumAll> {
    let d = beta.dim();
    let identity_only = d > MAX_EXHAUSTIVE_DIM;
    let sigmas = if identity_only { vec![(0..d).collect()] } else { permutations(d) };
    let per_sigma = sigmas
        .into_par_iter()
        .map(|s| dyadic_sum(beta, pq, &s, eps, k_max).map(|r| (s, r)))
        .collect::<Result<Vec<_>>>()?;
    let verdicts: Vec<SumVerdict> = per_sigma.iter().map(|(_, s)| s.verdict).collect();
    let verdict = if verdicts.contains(&SumVerdict::Diverged) {
        SumVerdict::Diverged
    } else if verdicts.iter().all(|v| *v == SumVerdict::Converged) {
        SumVerdict::Converged
    } else {
        SumVerdict::Inconclusive
    };
    Ok(DyadicSumAll { per_sigma, verdict, identity_only })
}

// ---------------------------------------------------------------------------
// Counterexample family

/// `k̃(N) = (⌊N/β_1⌋, …, ⌊N/β_n⌋, 1, …, 1)`.
pub fn k_tilde(beta: &BetaProfile, n: usize, big_n: u64) -> Vec<u64> {
    (0..beta.dim())
        .map(|i| if i < n { (r(big_n as i128) / beta.beta[i]).floor().to_integer().max(1) as u64 } else { 1 })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FailureWitness {
    pub n: usize,
    pub regime: ScalingRegime,
    /// Closed-form growth of `log₂` of the lower bound per unit `N`.
    pub slope: f64,
}

fn closed_slope(beta: &BetaProfile, pq: &ExponentPair, regime: &ScalingRegime, n: usize) -> Rat {
    let level = r(n as i128) - regime.level();
    let a = pq.gap();
    if pq.q_gt_p() {
        -(r(2) * beta.j[n] - level) * a
    } else {
        -(r(2) * beta.j[n] * a - level * (Rat::one() - r(2) * pq.inv_q))
    }
}

/// Choose the failing index `n ≥ 1` and the closed-form slope.
pub fn failure_witness(beta: &BetaProfile, pq: &ExponentPair) -> Result<FailureWitness> {
    let d = beta.dim();
    let verdict = condition_check(beta, pq);
    if let Some(c) = verdict.verdict {
        return Err(Error::NoFailureWitness(format!("condition ({c}) holds at {pq}")));
    }
    let regime = scaling_regime(d, pq)?;
    let candidates: Vec<usize> = if pq.q_gt_p() {
        (1..=d).filter(|&n| slack_i(beta, pq, n).is_negative()).collect()
    } else if slack_ii(beta, pq, d).is_negative() {
        vec![d]
    } else {
        (1..d).filter(|&n| !slack_ii(beta, pq, n).is_positive()).collect()
    };
    let n = candidates
        .into_iter()
        .max_by(|&a, &b| closed_slope(beta, pq, &regime, a).cmp(&closed_slope(beta, pq, &regime, b)).then(b.cmp(&a)))
        .ok_or_else(|| Error::NoFailureWitness(format!("no failing index at {pq}")))?;
    Ok(FailureWitness { n, regime, slope: to_f64(closed_slope(beta, pq, &regime, n)) })
}

/// `log₂` of the block lower bound at `k̃(N)` for the witness `n`.
pub fn counterexample_growth(beta: &BetaProfile, pq: &ExponentPair, big_n: u64) -> Result<f64> {
    let w = failure_witness(beta, pq)?;
    let k = BlockIndex::identity(k_tilde(beta, w.n, big_n))?;
    Ok(lower_unchecked(beta, &k, pq, &w.regime))
}
