//! Direct midpoint quadrature of `ℰ^ℓ_g f(t,x) = ∫ e^{i(t g(ξ) + x·ξ)} f(ξ) dξ`
//! on truncated space-time boxes, plus the norms and quotients built on it.

use std::f64::consts::PI;
use std::io::Write;
use std::path::Path;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::surface::{Sidelengths, Surface};

/// Row-major index ↔ multi-index over per-axis counts (first axis slowest).
fn unravel(mut flat: usize, dims: &[usize], out: &mut [usize]) {
    for a in (0..dims.len()).rev() {
        out[a] = flat % dims[a];
        flat /= dims[a];
    }
}

fn cell_center(center: f64, half: f64, n: usize, i: usize) -> f64 {
    center - half + (i as f64 + 0.5) * 2.0 * half / n as f64
}

/// Samples of `f` at cell centres of a uniform grid on `Q^ℓ`.
#[derive(Clone, Debug, PartialEq)]
pub struct GridFunction {
    domain: Sidelengths,
    resolution: Vec<usize>,
    samples: Vec<Complex64>,
}

impl GridFunction {
    pub fn new(domain: Sidelengths, resolution: Vec<usize>, samples: Vec<Complex64>) -> Result<Self> {
        if !domain.is_finite() {
            return Err(Error::UnboundedDomain);
        }
        if resolution.len() != domain.dim() {
            return Err(Error::DimensionMismatch { expected: domain.dim(), found: resolution.len() });
        }
        if resolution.iter().any(|n| *n < 2) {
            return Err(Error::InvalidGrid("resolution must be at least 2 per axis".into()));
        }
        let total: usize = resolution.iter().product();
        if samples.len() != total {
            return Err(Error::InvalidGrid(format!("{} samples for {total} cells", samples.len())));
        }
        if samples.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::InvalidGrid("non-finite sample".into()));
        }
        Ok(Self { domain, resolution, samples })
    }

    pub fn from_fn<F>(domain: Sidelengths, resolution: Vec<usize>, f: F) -> Result<Self>
    where
        F: Fn(&[f64]) -> Complex64 + Sync,
    {
        if resolution.len() != domain.dim() {
            return Err(Error::DimensionMismatch { expected: domain.dim(), found: resolution.len() });
        }
        let total: usize = resolution.iter().product();
        let probe = Self { domain: domain.clone(), resolution: resolution.clone(), samples: vec![] };
        let samples = (0..total).into_par_iter().map(|k| f(&probe.node(k))).collect();
        Self::new(domain, resolution, samples)
    }

    /// `χ_{Q^ℓ}`.
    pub fn indicator(domain: Sidelengths, resolution: Vec<usize>) -> Result<Self> {
        Self::from_fn(domain, resolution, |_| Complex64::new(1.0, 0.0))
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    pub fn domain(&self) -> &Sidelengths {
        &self.domain
    }

    pub fn resolution(&self) -> &[usize] {
        &self.resolution
    }

    pub fn samples(&self) -> &[Complex64] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn cell_widths(&self) -> Vec<f64> {
        self.domain.lengths().iter().zip(&self.resolution).map(|(l, n)| 2.0 * l / *n as f64).collect()
    }

    pub fn cell_volume(&self) -> f64 {
        self.cell_widths().iter().product()
    }

    /// Centre of cell `k`.
    pub fn node(&self, k: usize) -> Vec<f64> {
        let mut idx = vec![0; self.dim()];
        unravel(k, &self.resolution, &mut idx);
        idx.iter()
            .zip(self.domain.lengths())
            .zip(&self.resolution)
            .map(|((&i, &l), &n)| cell_center(0.0, l, n, i))
            .collect()
    }

    pub fn scaled(&self, alpha: Complex64) -> Self {
        Self { samples: self.samples.iter().map(|z| z * alpha).collect(), ..self.clone() }
    }

    /// Pointwise `f(ξ) · m(ξ)`.
    pub fn modulated<M: Fn(&[f64]) -> Complex64 + Sync>(&self, m: M) -> Self {
        let samples = self.samples.par_iter().enumerate().map(|(k, z)| z * m(&self.node(k))).collect();
        Self { samples, ..self.clone() }
    }

    /// Midpoint rule for `∫ f`.
    pub fn integral(&self) -> Complex64 {
        self.samples.iter().sum::<Complex64>() * self.cell_volume()
    }

    /// `‖f‖_p` by the midpoint rule (`p = ∞` allowed).
    pub fn lp_norm(&self, p: f64) -> f64 {
        if p.is_infinite() {
            return self.max_abs();
        }
        (self.samples.iter().map(|z| z.norm().powf(p)).sum::<f64>() * self.cell_volume()).powf(1.0 / p)
    }

    pub fn max_abs(&self) -> f64 {
        self.samples.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Measure of `supp f` (cells with non-zero samples).
    pub fn support_measure(&self) -> f64 {
        self.samples.iter().filter(|z| z.norm() > 0.0).count() as f64 * self.cell_volume()
    }
}

/// Evaluation window `center + [-T, T] × ∏[-X_i, X_i]`, sampled at cell centres.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpaceTimeBox {
    pub t_halfwidth: f64,
    pub x_halfwidths: Vec<f64>,
    /// Counts for `(t, x_1, …, x_d)`.
    pub resolution: Vec<usize>,
    /// Centre `(t_0, x_0)`; zero by default.
    #[serde(default)]
    pub center: Vec<f64>,
}

impl SpaceTimeBox {
    pub fn new(t_halfwidth: f64, x_halfwidths: Vec<f64>, resolution: Vec<usize>) -> Result<Self> {
        let d = x_halfwidths.len();
        Self::centered_at(t_halfwidth, x_halfwidths, resolution, vec![0.0; d + 1])
    }

    pub fn centered_at(t_halfwidth: f64, x_halfwidths: Vec<f64>, resolution: Vec<usize>, center: Vec<f64>) -> Result<Self> {
        let d = x_halfwidths.len();
        if resolution.len() != d + 1 || center.len() != d + 1 {
            return Err(Error::DimensionMismatch { expected: d + 1, found: resolution.len().min(center.len()) });
        }
        if let Some(&w) = std::iter::once(&t_halfwidth).chain(&x_halfwidths).find(|w| !(**w > 0.0 && w.is_finite())) {
            return Err(Error::InvalidSidelength(w));
        }
        if resolution.iter().any(|n| *n == 0) {
            return Err(Error::InvalidGrid("empty box axis".into()));
        }
        Ok(Self { t_halfwidth, x_halfwidths, resolution, center })
    }

    pub fn dim(&self) -> usize {
        self.x_halfwidths.len()
    }

    fn halfwidths(&self) -> Vec<f64> {
        std::iter::once(self.t_halfwidth).chain(self.x_halfwidths.iter().copied()).collect()
    }

    pub fn len(&self) -> usize {
        self.resolution.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn volume(&self) -> f64 {
        self.halfwidths().iter().map(|w| 2.0 * w).product()
    }

    pub fn cell_volume(&self) -> f64 {
        self.volume() / self.len() as f64
    }

    /// `(t, x)` of sample `k`.
    pub fn point(&self, k: usize) -> Vec<f64> {
        let mut idx = vec![0; self.dim() + 1];
        unravel(k, &self.resolution, &mut idx);
        let half = self.halfwidths();
        (0..=self.dim()).map(|a| cell_center(self.center[a], half[a], self.resolution[a], idx[a])).collect()
    }

    /// Largest `|t|` and `|x_i|` reached.
    fn extremes(&self) -> Vec<f64> {
        self.halfwidths().iter().zip(&self.center).map(|(h, c)| h + c.abs()).collect()
    }

    /// The same box scaled by `factor` about its centre, keeping sample density.
    pub fn dilated(&self, factor: f64) -> Result<Self> {
        let res = self.resolution.iter().map(|n| ((*n as f64) * factor).round().max(1.0) as usize).collect();
        Self::centered_at(
            self.t_halfwidth * factor,
            self.x_halfwidths.iter().map(|x| x * factor).collect(),
            res,
            self.center.clone(),
        )
    }
}

/// `ℰf` sampled on a box.
#[derive(Clone, Debug, PartialEq)]
pub struct FieldSamples {
    pub bx: SpaceTimeBox,
    pub values: Vec<Complex64>,
}

#[derive(Serialize)]
struct BinaryDescriptor<'a> {
    dtype: &'static str,
    order: &'static str,
    shape: &'a [usize],
    axes: Vec<String>,
    #[serde(rename = "box")]
    bx: &'a SpaceTimeBox,
}

impl FieldSamples {
    pub fn magnitudes(&self) -> Vec<f64> {
        self.values.iter().map(|z| z.norm()).collect()
    }

    /// `t, x1, …, xd, re, im` rows.
    pub fn to_csv(&self) -> String {
        let d = self.bx.dim();
        let mut s = String::from("t");
        for i in 1..=d {
            s.push_str(&format!(",x{i}"));
        }
        s.push_str(",re,im\n");
        for (k, z) in self.values.iter().enumerate() {
            for c in self.bx.point(k) {
                s.push_str(&format!("{c},"));
            }
            s.push_str(&format!("{},{}\n", z.re, z.im));
        }
        s
    }

    /// Interleaved little-endian `(re, im)` pairs in row-major order at
    /// `<stem>.bin`, with a JSON descriptor at `<stem>.json`.
    pub fn write_binary(&self, stem: &Path) -> Result<()> {
        let mut bytes = Vec::with_capacity(16 * self.values.len());
        for z in &self.values {
            bytes.extend_from_slice(&z.re.to_le_bytes());
            bytes.extend_from_slice(&z.im.to_le_bytes());
        }
        std::fs::File::create(stem.with_extension("bin"))?.write_all(&bytes)?;
        let axes = std::iter::once("t".to_string()).chain((1..=self.bx.dim()).map(|i| format!("x{i}"))).collect();
        let desc = BinaryDescriptor {
            dtype: "complex128-le",
            order: "row-major",
            shape: &self.bx.resolution,
            axes,
            bx: &self.bx,
        };
        std::fs::write(stem.with_extension("json"), serde_json::to_string_pretty(&desc)?)?;
        Ok(())
    }

    /// Read back a dump written by [`FieldSamples::write_binary`].
    pub fn read_binary(stem: &Path) -> Result<Self> {
        let desc: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(stem.with_extension("json"))?)?;
        let bx: SpaceTimeBox = serde_json::from_value(desc["box"].clone())?;
        let bytes = std::fs::read(stem.with_extension("bin"))?;
        let values: Vec<Complex64> = bytes
            .chunks_exact(16)
            .map(|c| {
                let re = f64::from_le_bytes(c[..8].try_into().unwrap());
                let im = f64::from_le_bytes(c[8..].try_into().unwrap());
                Complex64::new(re, im)
            })
            .collect();
        if values.len() != bx.len() {
            return Err(Error::InvalidGrid("binary dump does not match its descriptor".into()));
        }
        Ok(Self { bx, values })
    }
}

/// Phase data shared by every target point.
struct Nodes {
    g: Vec<f64>,
    xi: Vec<f64>,
    weight: Vec<Complex64>,
    d: usize,
}

fn prepare(s: &Surface, f: &GridFunction) -> Result<Nodes> {
    let d = f.dim();
    if s.dim() != d {
        return Err(Error::DimensionMismatch { expected: s.dim(), found: d });
    }
    let sl = s.domain().lengths();
    if f.domain.lengths().iter().zip(sl).any(|(a, b)| a > b) {
        return Err(Error::NotContained);
    }
    let cv = f.cell_volume();
    let live: Vec<usize> = (0..f.len()).filter(|&k| f.samples[k] != Complex64::new(0.0, 0.0)).collect();
    let pts: Vec<(f64, Vec<f64>)> = live
        .par_iter()
        .map(|&k| {
            let xi = f.node(k);
            (s.eval(&xi), xi)
        })
        .collect();
    let mut nodes = Nodes { g: Vec::with_capacity(live.len()), xi: Vec::with_capacity(live.len() * d), weight: Vec::with_capacity(live.len()), d };
    for (&k, (g, xi)) in live.iter().zip(pts) {
        nodes.g.push(g);
        nodes.xi.extend(xi);
        nodes.weight.push(f.samples[k] * cv);
    }
    Ok(nodes)
}

/// Phase change `Σ_i (T|∂_i g| + X_i) h_i` across one quadrature cell,
/// maximised over the live cells, for the extreme box corner.
pub fn cell_phase_variation(s: &Surface, f: &GridFunction, extremes: &[f64]) -> f64 {
    let h = f.cell_widths();
    (0..f.len())
        .into_par_iter()
        .filter(|&k| f.samples[k] != Complex64::new(0.0, 0.0))
        .map(|k| {
            let grad = s.grad(&f.node(k));
            (0..f.dim()).map(|i| (extremes[0] * grad[i].abs() + extremes[i + 1]) * h[i]).sum::<f64>()
        })
        .reduce(|| 0.0, f64::max)
}

fn guard(s: &Surface, f: &GridFunction, extremes: &[f64]) -> Result<()> {
    let phase = cell_phase_variation(s, f, extremes);
    if phase > PI {
        return Err(Error::ResolutionTooCoarse { phase });
    }
    Ok(())
}

fn evaluate(nodes: &Nodes, tx: &[f64]) -> Complex64 {
    let d = nodes.d;
    let (t, x) = (tx[0], &tx[1..]);
    let mut acc = Complex64::new(0.0, 0.0);
    for (k, w) in nodes.weight.iter().enumerate() {
        let xi = &nodes.xi[k * d..(k + 1) * d];
        let phase = t * nodes.g[k] + x.iter().zip(xi).map(|(a, b)| a * b).sum::<f64>();
        let (sn, cs) = phase.sin_cos();
        acc += w * Complex64::new(cs, sn);
    }
    acc
}

/// Midpoint quadrature of `ℰf` at every sample of `bx`.
pub fn extend(s: &Surface, f: &GridFunction, bx: &SpaceTimeBox) -> Result<FieldSamples> {
    if bx.dim() != f.dim() {
        return Err(Error::DimensionMismatch { expected: f.dim(), found: bx.dim() });
    }
    guard(s, f, &bx.extremes())?;
    let nodes = prepare(s, f)?;
    let values = (0..bx.len()).into_par_iter().map(|k| evaluate(&nodes, &bx.point(k))).collect();
    Ok(FieldSamples { bx: bx.clone(), values })
}

/// `ℰf` at explicit `(t, x)` points.
pub fn extend_at(s: &Surface, f: &GridFunction, points: &[Vec<f64>]) -> Result<Vec<Complex64>> {
    let d = f.dim();
    if points.iter().any(|p| p.len() != d + 1) {
        return Err(Error::DimensionMismatch { expected: d + 1, found: points.iter().map(Vec::len).find(|l| *l != d + 1).unwrap_or(0) });
    }
    let mut extremes = vec![0.0; d + 1];
    for p in points {
        for (e, c) in extremes.iter_mut().zip(p) {
            *e = f64::max(*e, c.abs());
        }
    }
    guard(s, f, &extremes)?;
    let nodes = prepare(s, f)?;
    Ok(points.par_iter().map(|p| evaluate(&nodes, p)).collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NormMode {
    Strong,
    Weak,
}

/// Strong: `(Σ|u|^q · cellvol)^{1/q}`. Weak: `sup_λ λ |{|u| ≥ λ}|^{1/q}`
/// with levels at the sample magnitudes. `q = ∞` gives the sup in both.
pub fn lq_norm(u: &FieldSamples, q: f64, mode: NormMode) -> f64 {
    let cv = u.bx.cell_volume();
    if q.is_infinite() {
        return u.values.iter().map(|z| z.norm()).fold(0.0, f64::max);
    }
    match mode {
        NormMode::Strong => (u.values.iter().map(|z| z.norm().powf(q)).sum::<f64>() * cv).powf(1.0 / q),
        NormMode::Weak => {
            let mut mags = u.magnitudes();
            mags.sort_by(|a, b| b.total_cmp(a));
            mags.iter()
                .enumerate()
                .map(|(k, m)| m * ((k + 1) as f64 * cv).powf(1.0 / q))
                .fold(0.0, f64::max)
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuotientMode {
    /// `‖ℰf‖_q / ‖f‖_p`.
    Strong,
    /// `|⟨ℰf, g_F⟩| / (|E|^{1/p} |F|^{1/q'})` with `E = supp f`.
    RestrictedWeak(Receiver),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Receiver {
    /// `g_F = χ_F` for the given box samples.
    Set(Vec<bool>),
    /// `g_F = χ_F · sgn(conj ℰf)`, the best choice for a given `F`.
    AlignedSet(Vec<bool>),
    /// Best phase-aligned superlevel set `F = {|ℰf| ≥ λ}` over sampled `λ`.
    BestSuperlevel,
}

/// `|f| ≤ 1` up to rounding.
const SUB_INDICATOR_TOL: f64 = 1e-12;

/// The sampled quotient; a lower bound for the corresponding operator norm
/// up to quadrature and truncation error.
pub fn quotient(s: &Surface, f: &GridFunction, bx: &SpaceTimeBox, p: f64, q: f64, mode: &QuotientMode) -> Result<f64> {
    let u = extend(s, f, bx)?;
    quotient_from_field(f, &u, p, q, mode)
}

/// As [`quotient`] but reusing an already computed field.
pub fn quotient_from_field(f: &GridFunction, u: &FieldSamples, p: f64, q: f64, mode: &QuotientMode) -> Result<f64> {
    if !(p >= 1.0) || !(q >= 1.0) {
        return Err(Error::InvalidExponent(format!("p = {p}, q = {q}")));
    }
    match mode {
        QuotientMode::Strong => Ok(lq_norm(u, q, NormMode::Strong) / f.lp_norm(p)),
        QuotientMode::RestrictedWeak(receiver) => {
            let m = f.max_abs();
            if m > 1.0 + SUB_INDICATOR_TOL {
                return Err(Error::NotSubIndicator(m));
            }
            let e = f.support_measure();
            let cv = u.bx.cell_volume();
            let inv_q_dual = 1.0 - 1.0 / q;
            let denom = |f_measure: f64| e.powf(1.0 / p) * f_measure.powf(inv_q_dual);
            let check = |mask: &Vec<bool>| {
                if mask.len() != u.values.len() {
                    Err(Error::InvalidGrid(format!("receiver has {} entries for {} samples", mask.len(), u.values.len())))
                } else {
                    Ok(mask.iter().filter(|b| **b).count() as f64 * cv)
                }
            };
            match receiver {
                Receiver::Set(mask) => {
                    let fm = check(mask)?;
                    let pairing: Complex64 = u.values.iter().zip(mask).filter(|(_, b)| **b).map(|(z, _)| z).sum::<Complex64>() * cv;
                    Ok(if fm > 0.0 { pairing.norm() / denom(fm) } else { 0.0 })
                }
                Receiver::AlignedSet(mask) => {
                    let fm = check(mask)?;
                    let pairing: f64 = u.values.iter().zip(mask).filter(|(_, b)| **b).map(|(z, _)| z.norm()).sum::<f64>() * cv;
                    Ok(if fm > 0.0 { pairing / denom(fm) } else { 0.0 })
                }
                Receiver::BestSuperlevel => {
                    let mut mags = u.magnitudes();
                    mags.sort_by(|a, b| b.total_cmp(a));
                    let mut acc = 0.0;
                    let mut best: f64 = 0.0;
                    for (k, m) in mags.iter().enumerate() {
                        acc += m * cv;
                        best = best.max(acc / denom((k + 1) as f64 * cv));
                    }
                    Ok(best)
                }
            }
        }
    }
}

/// The superlevel mask `{|u| ≥ λ}` achieving [`Receiver::BestSuperlevel`].
pub fn best_superlevel_mask(f: &GridFunction, u: &FieldSamples, p: f64, q: f64) -> Vec<bool> {
    let cv = u.bx.cell_volume();
    let e = f.support_measure();
    let mut order: Vec<usize> = (0..u.values.len()).collect();
    let mags = u.magnitudes();
    order.sort_by(|a, b| mags[*b].total_cmp(&mags[*a]));
    let (mut acc, mut best, mut best_k) = (0.0, 0.0, 0);
    for (k, &i) in order.iter().enumerate() {
        acc += mags[i] * cv;
        let val = acc / (e.powf(1.0 / p) * ((k + 1) as f64 * cv).powf(1.0 - 1.0 / q));
        if val > best {
            best = val;
            best_k = k + 1;
        }
    }
    let mut mask = vec![false; u.values.len()];
    for &i in &order[..best_k] {
        mask[i] = true;
    }
    mask
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn unit(d: usize, n: usize) -> GridFunction {
        GridFunction::indicator(Sidelengths::ones(d), vec![n; d]).unwrap()
    }

    #[test]
    fn origin_is_the_integral() {
        let s = Surface::paraboloid(2);
        let f = unit(2, 16).scaled(c(0.25));
        let v = extend_at(&s, &f, &[vec![0.0, 0.0, 0.0]]).unwrap()[0];
        assert!((v - c(1.0)).norm() < 1e-14);
        assert_eq!(v, f.integral());
    }

    #[test]
    fn linear_in_f() {
        let s = Surface::paraboloid(1);
        let f = GridFunction::from_fn(Sidelengths::ones(1), vec![64], |x| Complex64::new(x[0], 1.0 - x[0] * x[0])).unwrap();
        let bx = SpaceTimeBox::new(2.0, vec![3.0], vec![5, 7]).unwrap();
        let alpha = Complex64::new(0.3, -1.7);
        let a = extend(&s, &f.scaled(alpha), &bx).unwrap();
        let b = extend(&s, &f, &bx).unwrap();
        for (x, y) in a.values.iter().zip(&b.values) {
            assert!((x - alpha * y).norm() < 1e-12);
        }
    }

    /// Composite Simpson on `[-1, 1]`, independent of the midpoint code.
    fn simpson<F: Fn(f64) -> Complex64>(f: F, n: usize) -> Complex64 {
        let h = 2.0 / n as f64;
        let mut acc = f(-1.0) + f(1.0);
        for k in 1..n {
            acc += f(-1.0 + k as f64 * h) * if k % 2 == 1 { 4.0 } else { 2.0 };
        }
        acc * h / 3.0
    }

    #[test]
    fn fresnel_point_matches_refinement_and_simpson() {
        let s = Surface::paraboloid(1);
        let at = |n: usize| extend_at(&s, &unit(1, n), &[vec![1.0, 0.0]]).unwrap()[0];
        let coarse = at(400);
        let fine = at(4000);
        assert!((coarse - fine).norm() / fine.norm() < 1e-4);
        let oracle = simpson(|x| Complex64::new(0.0, x * x).exp(), 20_000);
        assert!((fine - oracle).norm() / oracle.norm() < 1e-6);
    }

    #[test]
    fn nyquist_guard() {
        let s = Surface::paraboloid(1);
        let f = unit(1, 8);
        let bx = SpaceTimeBox::new(50.0, vec![1.0], vec![3, 3]).unwrap();
        assert!(matches!(extend(&s, &f, &bx), Err(Error::ResolutionTooCoarse { .. })));
    }

    #[test]
    fn norms_of_constants_and_indicators() {
        let bx = SpaceTimeBox::new(1.0, vec![2.0], vec![10, 20]).unwrap();
        let ones = FieldSamples { bx: bx.clone(), values: vec![c(1.0); 200] };
        let v = bx.volume();
        assert!((lq_norm(&ones, 3.0, NormMode::Strong) - v.powf(1.0 / 3.0)).abs() < 1e-12);
        let mut vals = vec![c(0.0); 200];
        for z in vals.iter_mut().take(37) {
            *z = Complex64::new(0.0, 1.0);
        }
        let ind = FieldSamples { bx: bx.clone(), values: vals };
        let a = 37.0 * bx.cell_volume();
        assert!((lq_norm(&ind, 4.0, NormMode::Weak) - a.powf(0.25)).abs() < 1e-12);
        assert_eq!(lq_norm(&ind, f64::INFINITY, NormMode::Weak), 1.0);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(50))]
        #[test]
        fn weak_below_strong(vals in prop::collection::vec((-3.0f64..3.0, -3.0f64..3.0), 60), q in 1.0f64..12.0) {
            let bx = SpaceTimeBox::new(0.7, vec![1.3], vec![6, 10]).unwrap();
            let u = FieldSamples { bx, values: vals.into_iter().map(|(a, b)| Complex64::new(a, b)).collect() };
            prop_assert!(lq_norm(&u, q, NormMode::Weak) <= lq_norm(&u, q, NormMode::Strong) * (1.0 + 1e-12));
        }
    }

    #[test]
    fn unimodular_invariance() {
        let s = Surface::paraboloid(1);
        let f = unit(1, 64);
        let bx = SpaceTimeBox::new(4.0, vec![8.0], vec![16, 32]).unwrap();
        let rot = Complex64::from_polar(1.0, 1.234);
        for mode in [QuotientMode::Strong, QuotientMode::RestrictedWeak(Receiver::BestSuperlevel)] {
            let a = quotient(&s, &f, &bx, 2.0, 6.0, &mode).unwrap();
            let b = quotient(&s, &f.scaled(rot), &bx, 2.0, 6.0, &mode).unwrap();
            assert!((a - b).abs() < 1e-12 * a);
        }
    }

    #[test]
    fn zero_extension_keeps_quotient() {
        // Same cells, bigger domain, f supported on the smaller one.
        let s = Surface::paraboloid(1).with_domain(Sidelengths::new(vec![2.0]).unwrap()).unwrap();
        let small = GridFunction::indicator(Sidelengths::new(vec![1.0]).unwrap(), vec![50]).unwrap();
        let big = GridFunction::from_fn(Sidelengths::new(vec![2.0]).unwrap(), vec![100], |x| {
            c(if x[0].abs() < 1.0 { 1.0 } else { 0.0 })
        })
        .unwrap();
        let bx = SpaceTimeBox::new(3.0, vec![6.0], vec![12, 24]).unwrap();
        let mode = QuotientMode::RestrictedWeak(Receiver::BestSuperlevel);
        let a = quotient(&s, &small, &bx, 2.0, 6.0, &mode).unwrap();
        let b = quotient(&s, &big, &bx, 2.0, 6.0, &mode).unwrap();
        assert!((a - b).abs() < 1e-10 * a, "{a} {b}");
    }

    #[test]
    fn modulation_translates() {
        let s = Surface::paraboloid(1);
        let f = GridFunction::from_fn(Sidelengths::ones(1), vec![200], |x| c((1.0 - x[0] * x[0]).powi(2))).unwrap();
        let (t0, x0) = (0.5, -1.0);
        let fm = f.modulated(|xi| Complex64::from_polar(1.0, -(t0 * xi[0] * xi[0] + x0 * xi[0])));
        let bx = SpaceTimeBox::new(1.0, vec![2.0], vec![8, 16]).unwrap();
        let shifted = SpaceTimeBox::centered_at(1.0, vec![2.0], vec![8, 16], vec![t0, x0]).unwrap();
        let a = extend(&s, &f, &bx).unwrap();
        let b = extend(&s, &fm, &shifted).unwrap();
        for (u, v) in a.values.iter().zip(&b.values) {
            assert!((u.norm() - v.norm()).abs() < 1e-6);
        }
    }

    #[test]
    fn l2_mass_grows_with_time_window() {
        let s = Surface::paraboloid(1);
        let f = unit(1, 256);
        let base = SpaceTimeBox::new(4.0, vec![8.0], vec![16, 32]).unwrap();
        let mut last = 0.0;
        for k in 0..3 {
            let bx = base.dilated((k as f64).exp2()).unwrap();
            let n = lq_norm(&extend(&s, &f, &bx).unwrap(), 2.0, NormMode::Strong);
            assert!(n > last);
            last = n;
        }
    }

    #[test]
    fn receiver_variants_are_ordered() {
        let s = Surface::paraboloid(1);
        let f = unit(1, 64);
        let bx = SpaceTimeBox::new(2.0, vec![4.0], vec![8, 16]).unwrap();
        let u = extend(&s, &f, &bx).unwrap();
        let mask = best_superlevel_mask(&f, &u, 2.0, 6.0);
        let plain = quotient_from_field(&f, &u, 2.0, 6.0, &QuotientMode::RestrictedWeak(Receiver::Set(mask.clone()))).unwrap();
        let aligned = quotient_from_field(&f, &u, 2.0, 6.0, &QuotientMode::RestrictedWeak(Receiver::AlignedSet(mask))).unwrap();
        let best = quotient_from_field(&f, &u, 2.0, 6.0, &QuotientMode::RestrictedWeak(Receiver::BestSuperlevel)).unwrap();
        assert!(plain <= aligned + 1e-15);
        assert!((aligned - best).abs() < 1e-12 * best);
        assert!(matches!(
            quotient_from_field(&f.scaled(c(2.0)), &u, 2.0, 6.0, &QuotientMode::RestrictedWeak(Receiver::BestSuperlevel)),
            Err(Error::NotSubIndicator(_))
        ));
    }

    #[test]
    fn binary_roundtrip() {
        let s = Surface::paraboloid(1);
        let u = extend(&s, &unit(1, 32), &SpaceTimeBox::new(1.0, vec![1.0], vec![3, 4]).unwrap()).unwrap();
        let dir = std::env::temp_dir().join(format!("rrect-bin-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let stem = dir.join("field");
        u.write_binary(&stem).unwrap();
        assert_eq!(FieldSamples::read_binary(&stem).unwrap(), u);
        let csv = u.to_csv();
        assert!(csv.starts_with("t,x1,re,im\n"));
        assert_eq!(csv.lines().count(), 13);
        std::fs::remove_dir_all(dir).ok();
    }
}
