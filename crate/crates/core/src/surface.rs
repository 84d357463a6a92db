//! Surfaces `ξ ↦ g(ξ)` over rectangles `Q^ℓ = ∏ (-l_i, l_i)`.
//!
//! A surface is a [`Phase`] (a base function composed with an affine change
//! of variables) together with its domain. Base functions carry closed-form
//! derivatives of every order; user supplied closures fall back on central
//! differences.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::beta::{BetaProfile, BlockIndex};
use crate::error::{Error, Result};
use crate::rational::to_f64;

/// Half-sidelengths `ℓ` of a centered rectangle. Entries may be `+∞`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sidelengths(Vec<f64>);

impl Sidelengths {
    pub fn new(lengths: Vec<f64>) -> Result<Self> {
        if lengths.is_empty() {
            return Err(Error::InvalidDimension(0));
        }
        if let Some(&bad) = lengths.iter().find(|l| l.is_nan() || **l <= 0.0) {
            return Err(Error::InvalidSidelength(bad));
        }
        Ok(Self(lengths))
    }

    /// `𝟙 = (1, …, 1)`.
    pub fn ones(d: usize) -> Self {
        Self(vec![1.0; d])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn lengths(&self) -> &[f64] {
        &self.0
    }

    pub fn is_sorted(&self) -> bool {
        self.0.windows(2).all(|w| w[0] <= w[1])
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|l| l.is_finite())
    }

    /// Replace infinite entries by `cap`.
    pub fn truncated(&self, cap: f64) -> Self {
        Self(self.0.iter().map(|&l| l.min(cap)).collect())
    }

    pub fn scaled(&self, lambda: f64) -> Self {
        Self(self.0.iter().map(|l| l * lambda).collect())
    }

    /// Lebesgue measure of `Q^ℓ`.
    pub fn volume(&self) -> f64 {
        self.0.iter().map(|l| 2.0 * l).product()
    }

    /// Whether `x` lies in the open rectangle.
    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter().zip(&self.0).all(|(x, l)| x.abs() < *l)
    }

    /// `A^ℓ(v) = (l_1 v_1, …, l_d v_d)`.
    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        v.iter().zip(&self.0).map(|(v, l)| v * l).collect()
    }
}

/// A monomial `coeff · ξ^powers`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Monomial {
    pub coeff: f64,
    pub powers: Vec<u32>,
}

type ScalarFn = dyn Fn(&[f64]) -> f64 + Send + Sync;

#[derive(Clone)]
enum Base {
    /// `Σ c_i |ξ_i|^{b_i}`.
    PowerSum { coeffs: Vec<f64>, powers: Vec<f64> },
    Polynomial { dim: usize, terms: Vec<Monomial> },
    /// Central differences with per-axis steps.
    Custom { dim: usize, f: Arc<ScalarFn>, steps: Vec<f64> },
}

fn falling(b: f64, n: usize) -> f64 {
    (0..n).map(|i| b - i as f64).product()
}

/// `d^n/dx^n |x|^b`.
fn abs_power_derivative(x: f64, b: f64, n: usize) -> f64 {
    let ff = falling(b, n);
    if ff == 0.0 {
        return 0.0;
    }
    let rest = b - n as f64;
    if x == 0.0 {
        return if rest > 0.0 {
            0.0
        } else if rest == 0.0 {
            if n % 2 == 0 { ff } else { 0.0 }
        } else {
            f64::INFINITY
        };
    }
    let sign = if x < 0.0 && n % 2 == 1 { -1.0 } else { 1.0 };
    sign * ff * x.abs().powf(rest)
}

impl Base {
    fn dim(&self) -> usize {
        match self {
            Base::PowerSum { coeffs, .. } => coeffs.len(),
            Base::Polynomial { dim, .. } | Base::Custom { dim, .. } => *dim,
        }
    }

    fn separable(&self) -> bool {
        matches!(self, Base::PowerSum { .. })
    }

    fn analytic(&self) -> bool {
        !matches!(self, Base::Custom { .. })
    }

    /// Partial derivative along the axis sequence `seq` (order irrelevant).
    fn partial(&self, y: &[f64], seq: &[usize]) -> f64 {
        match self {
            Base::PowerSum { coeffs, powers } => match seq.first() {
                None => coeffs.iter().zip(powers).zip(y).map(|((c, b), y)| c * y.abs().powf(*b)).sum(),
                Some(&i) if seq.iter().all(|&s| s == i) => {
                    coeffs[i] * abs_power_derivative(y[i], powers[i], seq.len())
                }
                Some(_) => 0.0,
            },
            Base::Polynomial { dim, terms } => {
                let mut counts = vec![0u32; *dim];
                for &s in seq {
                    counts[s] += 1;
                }
                terms
                    .iter()
                    .map(|t| {
                        let mut v = t.coeff;
                        for ((&p, &c), &yi) in t.powers.iter().zip(&counts).zip(y) {
                            if c > p {
                                return 0.0;
                            }
                            v *= falling(p as f64, c as usize) * yi.powi((p - c) as i32);
                        }
                        v
                    })
                    .sum()
            }
            Base::Custom { f, steps, .. } => finite_difference(f.as_ref(), y, seq, steps),
        }
    }
}

fn finite_difference(f: &ScalarFn, y: &[f64], seq: &[usize], steps: &[f64]) -> f64 {
    match seq.split_first() {
        None => f(y),
        Some((&k, rest)) => {
            let h = steps[k];
            let mut plus = y.to_vec();
            let mut minus = y.to_vec();
            plus[k] += h;
            minus[k] -= h;
            (finite_difference(f, &plus, rest, steps) - finite_difference(f, &minus, rest, steps)) / (2.0 * h)
        }
    }
}

/// `G(ζ) = scale · F(offset + Mζ) + c0 + lin·ζ` for a base function `F`.
#[derive(Clone)]
pub struct Phase {
    base: Base,
    offset: Vec<f64>,
    /// `n × k`, row-major; `None` is the identity.
    matrix: Option<Vec<f64>>,
    scale: f64,
    c0: f64,
    lin: Vec<f64>,
}

impl fmt::Debug for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match &self.base {
            Base::PowerSum { .. } => "power-sum",
            Base::Polynomial { .. } => "polynomial",
            Base::Custom { .. } => "custom",
        };
        f.debug_struct("Phase")
            .field("base", &kind)
            .field("dim", &self.dim())
            .field("offset", &self.offset)
            .field("scale", &self.scale)
            .finish()
    }
}

impl Phase {
    fn from_base(base: Base) -> Self {
        let n = base.dim();
        Self { base, offset: vec![0.0; n], matrix: None, scale: 1.0, c0: 0.0, lin: vec![0.0; n] }
    }

    pub fn dim(&self) -> usize {
        self.lin.len()
    }

    fn inner_dim(&self) -> usize {
        self.offset.len()
    }

    fn m(&self, i: usize, a: usize) -> f64 {
        match &self.matrix {
            None => (i == a) as u8 as f64,
            Some(m) => m[i * self.dim() + a],
        }
    }

    fn inner_point(&self, zeta: &[f64]) -> Vec<f64> {
        match &self.matrix {
            None => self.offset.iter().zip(zeta).map(|(o, z)| o + z).collect(),
            Some(m) => {
                let k = self.dim();
                (0..self.inner_dim())
                    .map(|i| self.offset[i] + (0..k).map(|a| m[i * k + a] * zeta[a]).sum::<f64>())
                    .collect()
            }
        }
    }

    /// Derivative along the outer axis sequence `seq`.
    pub fn partial(&self, zeta: &[f64], seq: &[usize]) -> f64 {
        let y = self.inner_point(zeta);
        let r = seq.len();
        let core = if r == 0 {
            self.base.partial(&y, &[])
        } else if self.matrix.is_none() {
            self.base.partial(&y, seq)
        } else if self.base.separable() {
            (0..self.inner_dim())
                .map(|i| {
                    let w: f64 = seq.iter().map(|&a| self.m(i, a)).product();
                    if w == 0.0 {
                        0.0
                    } else {
                        w * self.base.partial(&y, &vec![i; r])
                    }
                })
                .sum()
        } else {
            let n = self.inner_dim();
            let mut inner = vec![0usize; r];
            let mut total = 0.0;
            loop {
                let w: f64 = inner.iter().zip(seq).map(|(&i, &a)| self.m(i, a)).product();
                if w != 0.0 {
                    total += w * self.base.partial(&y, &inner);
                }
                let mut pos = 0;
                loop {
                    if pos == r {
                        return self.scale * total + if r == 1 { self.lin[seq[0]] } else { 0.0 };
                    }
                    inner[pos] += 1;
                    if inner[pos] < n {
                        break;
                    }
                    inner[pos] = 0;
                    pos += 1;
                }
            }
        };
        let affine = match r {
            0 => self.c0 + self.lin.iter().zip(zeta).map(|(l, z)| l * z).sum::<f64>(),
            1 => self.lin[seq[0]],
            _ => 0.0,
        };
        self.scale * core + affine
    }

    /// `H(η) = scale · G(offset + Mη) + c0 + lin·η`, merged into one affine layer.
    /// `matrix` is `k × m` row-major in terms of this phase's `k` outer axes.
    fn compose(&self, offset: &[f64], matrix: Option<&[f64]>, m_out: usize, scale: f64, c0: f64, lin: &[f64]) -> Self {
        let k = self.dim();
        let n = self.inner_dim();
        let sub = |a: usize, b: usize| match matrix {
            None => (a == b) as u8 as f64,
            Some(mm) => mm[a * m_out + b],
        };
        // New inner offset: old offset + M_old · offset.
        let new_offset = self.inner_point(offset);
        let new_matrix = if self.matrix.is_none() && matrix.is_none() {
            None
        } else {
            let mut out = vec![0.0; n * m_out];
            for i in 0..n {
                for b in 0..m_out {
                    out[i * m_out + b] = (0..k).map(|a| self.m(i, a) * sub(a, b)).sum();
                }
            }
            Some(out)
        };
        let old_affine_at_offset = self.c0 + self.lin.iter().zip(offset).map(|(l, o)| l * o).sum::<f64>();
        let new_lin: Vec<f64> = (0..m_out)
            .map(|b| scale * (0..k).map(|a| self.lin[a] * sub(a, b)).sum::<f64>() + lin[b])
            .collect();
        Self {
            base: self.base.clone(),
            offset: new_offset,
            matrix: new_matrix,
            scale: self.scale * scale,
            c0: scale * old_affine_at_offset + c0,
            lin: new_lin,
        }
    }
}

/// A candidate elliptic surface `Σ_g = {(g(ξ), ξ) : ξ ∈ Q^ℓ}`.
#[derive(Clone, Debug)]
pub struct Surface {
    phase: Phase,
    domain: Sidelengths,
    smoothness_order: usize,
}

/// Default central-difference step relative to the sidelength.
pub const FD_RELATIVE_STEP: f64 = 1e-4;

impl Surface {
    /// `g(ξ) = |ξ|²` over `Q^𝟙`.
    pub fn paraboloid(d: usize) -> Self {
        let terms = (0..d)
            .map(|i| {
                let mut powers = vec![0; d];
                powers[i] = 2;
                Monomial { coeff: 1.0, powers }
            })
            .collect();
        Self::polynomial(d, terms, Sidelengths::ones(d))
    }

    /// `|ξ|² + Σ terms` over `domain`.
    pub fn perturbed_paraboloid(d: usize, perturbation: Vec<Monomial>, domain: Sidelengths) -> Self {
        let mut s = Self::paraboloid(d);
        if let Base::Polynomial { terms, .. } = &mut s.phase.base {
            terms.extend(perturbation);
        }
        s.domain = domain;
        s
    }

    pub fn polynomial(d: usize, terms: Vec<Monomial>, domain: Sidelengths) -> Self {
        Self { phase: Phase::from_base(Base::Polynomial { dim: d, terms }), domain, smoothness_order: usize::MAX }
    }

    /// `g_β(ξ) = Σ |ξ_j|^{β_j}` over `Q^𝟙`.
    pub fn gbeta(beta: &BetaProfile) -> Self {
        let powers: Vec<f64> = beta.beta().iter().map(|b| to_f64(*b)).collect();
        let d = powers.len();
        Self {
            phase: Phase::from_base(Base::PowerSum { coeffs: vec![1.0; d], powers }),
            domain: Sidelengths::ones(d),
            smoothness_order: usize::MAX,
        }
    }

    /// The rescaled dyadic block surface in the coordinates
    /// `η_i = 2^{(2-β_{σ(i)}) k_{σ(i)}} ξ_{σ(i)}`:
    /// `g^k(η) = Σ 2^{k_{σ(i)}(β_{σ(i)}-2)β_{σ(i)}} |η_i|^{β_{σ(i)}}`,
    /// recentred at `η_c = 2ℓ` so that `Q^ℓ` (with `ℓ_i = 2^{-k_{σ(i)}β_{σ(i)}}`)
    /// sits inside the block `{η_i ∼ 2^{-k_{σ(i)}β_{σ(i)}}}`.
    pub fn block(beta: &BetaProfile, k: &BlockIndex) -> Result<(Self, Sidelengths)> {
        k.check_cone(beta)?;
        let d = beta.dim();
        let mut coeffs = Vec::with_capacity(d);
        let mut powers = Vec::with_capacity(d);
        let mut ell = Vec::with_capacity(d);
        for i in 0..d {
            let axis = k.sigma()[i];
            let b = to_f64(beta.beta()[axis]);
            let kk = k.k()[axis] as f64;
            coeffs.push((kk * (b - 2.0) * b).exp2());
            powers.push(b);
            ell.push((-kk * b).exp2());
        }
        let ell = Sidelengths::new(ell)?;
        let raw = Phase::from_base(Base::PowerSum { coeffs, powers });
        let center: Vec<f64> = ell.lengths().iter().map(|l| 2.0 * l).collect();
        let phase = raw.compose(&center, None, d, 1.0, 0.0, &vec![0.0; d]);
        Ok((Self { phase, domain: ell.clone(), smoothness_order: usize::MAX }, ell))
    }

    /// A user supplied `g`; derivatives by central differences with steps
    /// `l_i · 1e-4`. Orders above two are not trusted.
    pub fn custom<F>(d: usize, f: F, domain: Sidelengths) -> Result<Self>
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        if !domain.is_finite() {
            return Err(Error::UnboundedDomain);
        }
        if domain.dim() != d {
            return Err(Error::DimensionMismatch { expected: d, found: domain.dim() });
        }
        let steps = domain.lengths().iter().map(|l| l * FD_RELATIVE_STEP).collect();
        Ok(Self {
            phase: Phase::from_base(Base::Custom { dim: d, f: Arc::new(f), steps }),
            domain,
            smoothness_order: 0,
        })
    }

    pub fn with_domain(mut self, domain: Sidelengths) -> Result<Self> {
        if domain.dim() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: domain.dim() });
        }
        self.domain = domain;
        Ok(self)
    }

    /// `ζ ↦ g(ξ₀ + ζ)` over `domain` (no tangent-plane subtraction).
    pub fn recentered(&self, xi0: &[f64], domain: Sidelengths) -> Result<Self> {
        let d = self.dim();
        if xi0.len() != d || domain.dim() != d {
            return Err(Error::DimensionMismatch { expected: d, found: xi0.len().min(domain.dim()) });
        }
        Ok(Self {
            phase: self.phase.compose(xi0, None, d, 1.0, 0.0, &vec![0.0; d]),
            domain,
            smoothness_order: self.smoothness_order,
        })
    }

    pub fn with_smoothness_order(mut self, n: usize) -> Self {
        self.smoothness_order = n;
        self
    }

    pub fn dim(&self) -> usize {
        self.phase.dim()
    }

    pub fn domain(&self) -> &Sidelengths {
        &self.domain
    }

    pub fn smoothness_order(&self) -> usize {
        self.smoothness_order
    }

    pub fn is_analytic(&self) -> bool {
        self.phase.base.analytic()
    }

    pub fn eval(&self, xi: &[f64]) -> f64 {
        self.phase.partial(xi, &[])
    }

    /// Perturbation `h(ξ) = g(ξ) - |ξ|²`.
    pub fn h(&self, xi: &[f64]) -> f64 {
        self.eval(xi) - xi.iter().map(|x| x * x).sum::<f64>()
    }

    pub fn grad(&self, xi: &[f64]) -> Vec<f64> {
        (0..self.dim()).map(|i| self.phase.partial(xi, &[i])).collect()
    }

    pub fn hess(&self, xi: &[f64]) -> Vec<Vec<f64>> {
        let d = self.dim();
        (0..d).map(|a| (0..d).map(|b| self.phase.partial(xi, &[a, b])).collect()).collect()
    }

    /// `∂^α g` for a multi-index `α`.
    pub fn derivative(&self, xi: &[f64], alpha: &[usize]) -> f64 {
        self.phase.partial(xi, &multi_index_to_seq(alpha))
    }

    /// Derivative along an explicit axis sequence.
    pub fn partial_seq(&self, xi: &[f64], seq: &[usize]) -> f64 {
        self.phase.partial(xi, seq)
    }

    /// Definition-2.1 normalization at `ξ = 0`:
    /// `g̃(ζ) = g(Mζ) - g(0) - Mζ·∇g(0)` with `M = √2 D²g(0)^{-1/2} U`, so that
    /// `D²g̃(0) = 2I`. The new domain is an axis-parallel box inscribed in
    /// `M^{-1} Q^ℓ`.
    pub fn normalized(&self) -> Result<Self> {
        if !self.domain.is_finite() {
            return Err(Error::UnboundedDomain);
        }
        let d = self.dim();
        let zero = vec![0.0; d];
        let h = self.hess(&zero);
        let diagonal = (0..d).all(|a| (0..d).all(|b| a == b || h[a][b] == 0.0));
        // Columns of M.
        let m: DMatrix<f64> = if diagonal {
            if h.iter().enumerate().any(|(i, row)| !(row[i] > 0.0) || !row[i].is_finite()) {
                return Err(Error::NotPositiveDefinite);
            }
            DMatrix::from_fn(d, d, |i, j| if i == j { (2.0 / h[i][i]).sqrt() } else { 0.0 })
        } else {
            let hm = DMatrix::from_fn(d, d, |i, j| h[i][j]);
            let eig = SymmetricEigen::new(hm);
            if eig.eigenvalues.iter().any(|&l| !(l > 0.0)) {
                return Err(Error::NotPositiveDefinite);
            }
            let scale = DMatrix::from_fn(d, d, |i, j| if i == j { (2.0 / eig.eigenvalues[i]).sqrt() } else { 0.0 });
            &eig.eigenvectors * scale
        };
        let g0 = self.eval(&zero);
        let grad0 = self.grad(&zero);
        // lin = -Mᵀ∇g(0).
        let lin: Vec<f64> = (0..d).map(|b| -(0..d).map(|i| m[(i, b)] * grad0[i]).sum::<f64>()).collect();
        let flat: Vec<f64> = (0..d).flat_map(|i| (0..d).map(move |b| (i, b))).map(|(i, b)| m[(i, b)]).collect();
        let identity = diagonal && flat.iter().enumerate().all(|(idx, v)| *v == ((idx / d == idx % d) as u8 as f64));
        let phase = if identity && g0 == 0.0 && lin.iter().all(|l| *l == 0.0) {
            self.phase.clone()
        } else {
            self.phase.compose(&zero, if identity { None } else { Some(&flat) }, d, 1.0, -g0, &lin)
        };
        let minv = m.clone().try_inverse().ok_or(Error::NotPositiveDefinite)?;
        let ell = self.domain.lengths();
        // Bounding box of M^{-1}Q^ℓ, then shrink until the box maps into Q^ℓ.
        let reach: Vec<f64> = (0..d).map(|a| (0..d).map(|i| minv[(a, i)].abs() * ell[i]).sum()).collect();
        let shrink = (0..d)
            .map(|i| ell[i] / (0..d).map(|a| m[(i, a)].abs() * reach[a]).sum::<f64>())
            .fold(1.0_f64, f64::min);
        let domain = Sidelengths::new(reach.iter().map(|r| r * shrink).collect())?;
        Ok(Self { phase, domain, smoothness_order: self.smoothness_order })
    }
}

fn multi_index_to_seq(alpha: &[usize]) -> Vec<usize> {
    alpha.iter().enumerate().flat_map(|(i, &n)| std::iter::repeat(i).take(n)).collect()
}

/// All multi-indices in `k` variables with `|α| <= n`.
pub fn multi_indices(k: usize, n: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = vec![0; k];
    fn rec(pos: usize, left: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if pos == cur.len() {
            out.push(cur.clone());
            return;
        }
        for v in 0..=left {
            cur[pos] = v;
            rec(pos + 1, left - v, cur, out);
        }
        cur[pos] = 0;
    }
    rec(0, n, &mut cur, &mut out);
    out
}

/// Sampling plan for ellipticity deficits.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeficitGrid {
    /// Points per axis on `[-1, 1]` (endpoints included).
    pub points_per_axis: usize,
    /// Sub-rectangles `2^{-m} ℓ`, `m = 0..=dyadic_levels`.
    pub dyadic_levels: u32,
}

impl Default for DeficitGrid {
    fn default() -> Self {
        Self { points_per_axis: 9, dyadic_levels: 6 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EllipticityCertificate {
    /// Estimated `ε₀`.
    pub deficit: f64,
    pub order: usize,
    pub sample_resolution: DeficitGrid,
}

/// Sampled `max_{ℓ̃, v, |α| <= N} |ℓ̃^α ∂^α (D²h̃)(ℓ̃ v)|` (max-entry norm) over
/// the dyadic sub-rectangles `ℓ̃ = 2^{-m} ℓ` of the normalized surface.
pub fn ellipticity_deficit(s: &Surface, order: usize, grid: DeficitGrid) -> Result<EllipticityCertificate> {
    if !s.domain.is_finite() {
        return Err(Error::UnboundedDomain);
    }
    if order > s.smoothness_order {
        return Err(Error::OrderTooHigh { requested: order, available: s.smoothness_order });
    }
    if grid.points_per_axis < 2 {
        return Err(Error::InvalidGrid("need at least two points per axis".into()));
    }
    let norm = s.normalized()?;
    let k = norm.dim();
    let alphas = multi_indices(k, order);
    let seqs: Vec<(Vec<usize>, f64)> = alphas
        .iter()
        .flat_map(|alpha| {
            let base = multi_index_to_seq(alpha);
            let is_zero = base.is_empty();
            (0..k).flat_map(move |a| {
                let base = base.clone();
                (a..k).map(move |b| {
                    let mut seq = base.clone();
                    seq.push(a);
                    seq.push(b);
                    (seq, if is_zero && a == b { 2.0 } else { 0.0 })
                })
            })
        })
        .collect();
    let pts = grid.points_per_axis;
    let node = |i: usize| -1.0 + 2.0 * i as f64 / (pts - 1) as f64;
    let total = pts.pow(k as u32);
    let mut deficit: f64 = 0.0;
    for m in 0..=grid.dyadic_levels {
        let ell = norm.domain.scaled((-(m as f64)).exp2());
        for flat in 0..total {
            let mut rem = flat;
            let v: Vec<f64> = (0..k)
                .map(|_| {
                    let i = rem % pts;
                    rem /= pts;
                    node(i)
                })
                .collect();
            let x = ell.apply(&v);
            for (seq, shift) in &seqs {
                let weight: f64 = seq[..seq.len() - 2].iter().map(|&a| ell.lengths()[a]).product();
                let val = weight * (norm.phase.partial(&x, seq) - shift);
                deficit = deficit.max(val.abs());
            }
        }
    }
    Ok(EllipticityCertificate { deficit, order, sample_resolution: grid })
}

/// `ξ ↦ λ² g(ξ/λ)` over `Q^{λℓ}`.
pub fn parabolic_rescale(s: &Surface, lambda: f64) -> Result<Surface> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::InvalidSidelength(lambda));
    }
    if lambda == 1.0 {
        return Ok(s.clone());
    }
    let d = s.dim();
    let m: Vec<f64> = (0..d * d).map(|idx| if idx / d == idx % d { 1.0 / lambda } else { 0.0 }).collect();
    let phase = s.phase.compose(&vec![0.0; d], Some(&m), d, lambda * lambda, 0.0, &vec![0.0; d]);
    Ok(Surface { phase, domain: s.domain.scaled(lambda), smoothness_order: s.smoothness_order })
}

/// `g♭(η) = g(ξ₀ + Σ η_j u_j)` on a box inscribed in the slice.
pub fn slice_surface(s: &Surface, basepoint: &[f64], basis: &[Vec<f64>]) -> Result<Surface> {
    let d = s.dim();
    let k = basis.len();
    if basepoint.len() != d {
        return Err(Error::DimensionMismatch { expected: d, found: basepoint.len() });
    }
    if k == 0 || k > d || basis.iter().any(|u| u.len() != d) {
        return Err(Error::InvalidDimension(k));
    }
    let mut dev: f64 = 0.0;
    for a in 0..k {
        for b in 0..k {
            let dot: f64 = basis[a].iter().zip(&basis[b]).map(|(x, y)| x * y).sum();
            dev = dev.max((dot - (a == b) as u8 as f64).abs());
        }
    }
    if dev > 1e-12 {
        return Err(Error::NonOrthonormalBasis(dev));
    }
    if !s.domain.contains(basepoint) {
        return Err(Error::EmptySlice);
    }
    let ell = s.domain.lengths();
    let room: Vec<f64> = basepoint.iter().zip(ell).map(|(b, l)| l - b.abs()).collect();
    let reach: Vec<f64> = basis
        .iter()
        .map(|u| {
            u.iter()
                .zip(&room)
                .filter(|(c, _)| **c != 0.0)
                .map(|(c, r)| r / c.abs())
                .fold(f64::INFINITY, f64::min)
        })
        .collect();
    let shrink = (0..d)
        .map(|i| {
            let load: f64 = (0..k).map(|a| reach[a] * basis[a][i].abs()).sum();
            if load == 0.0 { f64::INFINITY } else { room[i] / load }
        })
        .fold(1.0_f64, f64::min);
    let half: Vec<f64> = reach.iter().map(|r| r * shrink).collect();
    if half.iter().any(|h| !(*h > 0.0) || !h.is_finite()) {
        return Err(Error::EmptySlice);
    }
    let m: Vec<f64> = (0..d).flat_map(|i| (0..k).map(move |a| (i, a))).map(|(i, a)| basis[a][i]).collect();
    let phase = s.phase.compose(basepoint, Some(&m), k, 1.0, 0.0, &vec![0.0; k]);
    Ok(Surface { phase, domain: Sidelengths::new(half)?, smoothness_order: s.smoothness_order })
}

/// A box `center + Q^{half}` in the coordinates of a surface.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubRectangle {
    pub center: Vec<f64>,
    pub half: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DicingReport {
    pub deficit_sub: f64,
    pub deficit_full: f64,
    pub bound: f64,
    /// `deficit_sub / (ε · deficit_full)`; the unknown dicing constant is at least this.
    pub measured_ratio: f64,
}

pub const DEFAULT_DICING_CONSTANT: f64 = 10.0;

/// Compare the deficit of `s` on `sub` (normalized at `ξ₀`) against
/// `C · ε · ε₀`. The restriction lives on the largest box centred at `ξ₀`
/// inside `sub`.
pub fn verify_dicing(
    s: &Surface,
    sub: &SubRectangle,
    xi0: &[f64],
    eps: f64,
    constant: f64,
    order: usize,
    grid: DeficitGrid,
) -> Result<DicingReport> {
    let d = s.dim();
    if sub.center.len() != d || sub.half.len() != d || xi0.len() != d {
        return Err(Error::InvalidDimension(d));
    }
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(Error::InvalidSidelength(eps));
    }
    let ell = s.domain.lengths();
    let tol = 1e-12;
    for i in 0..d {
        let (lo, hi) = (sub.center[i] - sub.half[i], sub.center[i] + sub.half[i]);
        if xi0[i] < lo - tol || xi0[i] > hi + tol {
            return Err(Error::NotContained);
        }
        if ((lo - xi0[i]) / eps).abs() > ell[i] * (1.0 + tol) || ((hi - xi0[i]) / eps).abs() > ell[i] * (1.0 + tol) {
            return Err(Error::NotContained);
        }
    }
    let half: Vec<f64> = (0..d)
        .map(|i| (xi0[i] - (sub.center[i] - sub.half[i])).min(sub.center[i] + sub.half[i] - xi0[i]))
        .collect();
    let restricted = Surface {
        phase: s.phase.compose(xi0, None, d, 1.0, 0.0, &vec![0.0; d]),
        domain: Sidelengths::new(half)?,
        smoothness_order: s.smoothness_order,
    };
    let deficit_full = ellipticity_deficit(s, order, grid)?.deficit;
    let deficit_sub = ellipticity_deficit(&restricted, order, grid)?.deficit;
    let bound = constant * eps * deficit_full;
    let measured_ratio = if deficit_full > 0.0 { deficit_sub / (eps * deficit_full) } else { 0.0 };
    Ok(DicingReport { deficit_sub, deficit_full, bound, measured_ratio })
}
