//! Lower-bound test functions: Knapp caps, the Besicovitch-translated
//! random field over a block of tubes, and the Schwartz train on dyadic
//! `g_β` blocks.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::beta::BetaProfile;
use crate::error::{Error, Result};
use crate::exponents::ExponentPair;
use crate::extension::{extend, lq_norm, quotient_from_field, GridFunction, NormMode, QuotientMode, Receiver, SpaceTimeBox};
use crate::rational::{to_f64, Rat};
use crate::surface::{parabolic_rescale, Sidelengths, Surface};

// ---------------------------------------------------------------------------
// Bump

/// `(1 - u²)^4` on `[-1, 1]`; its integral is `256/315`.
pub const BUMP_POWER: i32 = 4;
pub const BUMP_NORMALIZER: f64 = 315.0 / 256.0;

/// Unit-integral one-dimensional bump.
pub fn bump_1d(u: f64) -> f64 {
    if u.abs() >= 1.0 {
        0.0
    } else {
        BUMP_NORMALIZER * (1.0 - u * u).powi(BUMP_POWER)
    }
}

/// `∫_{-1}^{1} (1 - v²)^n dv`, via `I_n = I_{n-1} · 2n/(2n+1)`.
pub fn bump_power_integral(n: u32) -> f64 {
    (1..=n).fold(2.0, |acc, k| acc * (2 * k) as f64 / (2 * k + 1) as f64)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BumpProfile {
    /// Tensor product of `(315/256)(1 - u²)^4`.
    Poly4,
}

// ---------------------------------------------------------------------------
// Knapp caps

/// Dual-box constant `c`.
pub const DUAL_BOX_CONSTANT: f64 = 0.125;
/// The default evaluation box is this multiple of the dual box.
pub const EVALUATION_BOX_FACTOR: f64 = 4.0;
pub const DUAL_BOX_SAMPLES: usize = 9;

#[derive(Clone, Debug)]
pub struct KnappCap {
    pub j: usize,
    pub ell: Sidelengths,
    pub bump: BumpProfile,
    /// `φ^{j,ℓ}` sampled on its own support box.
    pub gridfn: GridFunction,
}

impl KnappCap {
    /// Per-axis dilations `(l_1, …, l_j, l_{j+1}, …, l_{j+1})`.
    pub fn scales(&self) -> Vec<f64> {
        cap_scales(&self.ell, self.j)
    }

    /// `φ^{j,ℓ} / sup φ`, so that `|f| ≤ χ_{supp f}`.
    pub fn sub_indicator(&self) -> GridFunction {
        let peak = BUMP_NORMALIZER.powi(self.ell.dim() as i32);
        self.gridfn.scaled(Complex64::new(1.0 / peak, 0.0))
    }
}

fn cap_scales(ell: &Sidelengths, j: usize) -> Vec<f64> {
    let l = ell.lengths();
    (0..l.len()).map(|i| if i < j { l[i] } else { l[j] }).collect()
}

#[derive(Clone, Debug)]
pub struct Knapp {
    pub cap: KnappCap,
    pub dual_box: SpaceTimeBox,
    /// `ℰφ^{j,ℓ}(0, 0) = l_1⋯l_j l_{j+1}^{d-j}`.
    pub predicted_peak: f64,
}

impl Knapp {
    /// The dual box dilated by `factor`, sampled with `samples` points per axis.
    pub fn evaluation_box(&self, factor: f64, samples: usize) -> Result<SpaceTimeBox> {
        SpaceTimeBox::new(
            self.dual_box.t_halfwidth * factor,
            self.dual_box.x_halfwidths.iter().map(|x| x * factor).collect(),
            vec![samples; self.dual_box.dim() + 1],
        )
    }
}

/// The cap `φ^{j,ℓ}(ξ) = φ(ξ_1/l_1, …, ξ_j/l_j, ξ_{j+1}/l_{j+1}, …, ξ_d/l_{j+1})`
/// and its dual box with halfwidths `c/l_i` (`i ≤ j`), `c/l_{j+1}` (`i > j`)
/// and `c/l_{j+1}²` in `t`.
pub fn knapp(d: usize, ell: &Sidelengths, j: usize, resolution: usize) -> Result<Knapp> {
    if ell.dim() != d {
        return Err(Error::DimensionMismatch { expected: d, found: ell.dim() });
    }
    if j >= d {
        return Err(Error::InvalidDimension(j));
    }
    if !ell.is_finite() {
        return Err(Error::InfiniteSidelength);
    }
    if !ell.is_sorted() {
        return Err(Error::UnsortedSidelengths);
    }
    let scales = cap_scales(ell, j);
    let support = Sidelengths::new(scales.clone())?;
    let sc = scales.clone();
    let gridfn = GridFunction::from_fn(support, vec![resolution; d], move |xi| {
        Complex64::new(xi.iter().zip(&sc).map(|(x, s)| bump_1d(x / s)).product(), 0.0)
    })?;
    let c = DUAL_BOX_CONSTANT;
    let lj = scales[j];
    let dual_box = SpaceTimeBox::new(c / (lj * lj), scales.iter().map(|s| c / s).collect(), vec![DUAL_BOX_SAMPLES; d + 1])?;
    let predicted_peak = scales.iter().product();
    Ok(Knapp { cap: KnappCap { j, ell: ell.clone(), bump: BumpProfile::Poly4, gridfn }, dual_box, predicted_peak })
}

// ---------------------------------------------------------------------------
// Besicovitch / Perron tree

pub const RASTER: usize = 2048;

/// Normalised tubes `|τ| < 1`, `|σ - s_n - (n/N)τ| < 1/N`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Besicovitch {
    pub n: u32,
    pub slopes: Vec<i64>,
    /// `(τ-shift, σ-shift)` per tube; `τ`-shifts vanish in this scheme.
    pub shifts: Vec<(f64, f64)>,
    /// `|⋃ tubes| / Σ |tube|`, rasterised.
    pub overlap_ratio: f64,
}

/// Bisection shifts: the `k`-th binary digit of the tube index contributes
/// slope `2^{M-k}/N` pivoting about `τ_k = -1 + (2k-1)/M`, so tubes that
/// differ only in that digit coincide near `τ_k`.
fn perron_shift(index: u64, big_n: u64) -> f64 {
    let m = (2 * big_n).trailing_zeros() as i32;
    (1..=m)
        .map(|k| {
            let bit = (index >> (m - k)) & 1;
            let pivot = -1.0 + (2.0 * k as f64 - 1.0) / m as f64;
            -(bit as f64) * (2f64.powi(m - k) / big_n as f64) * pivot
        })
        .sum()
}

/// Rasterised `|⋃| / Σ|·|` of `|τ|<1, |σ - s - (n/N)τ| < 1/N` tubes.
pub fn tube_overlap_ratio(tubes: &[(i64, f64)], big_n: u64, raster: usize) -> f64 {
    let w = 1.0 / big_n as f64;
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for &(n, s) in tubes {
        let slope = n as f64 / big_n as f64;
        lo = lo.min(s - slope.abs() - w);
        hi = hi.max(s + slope.abs() + w);
    }
    let dsig = (hi - lo) / raster as f64;
    let (union, total) = (0..raster)
        .into_par_iter()
        .map(|col| {
            let tau = -1.0 + (col as f64 + 0.5) * 2.0 / raster as f64;
            let mut ranges: Vec<(i64, i64)> = tubes
                .iter()
                .map(|&(n, s)| {
                    let c = s + n as f64 / big_n as f64 * tau;
                    // Pixel centres lo + (i + ½)dσ strictly inside (c - w, c + w).
                    let a = ((c - w - lo) / dsig - 0.5).floor() as i64 + 1;
                    let b = ((c + w - lo) / dsig - 0.5).ceil() as i64 - 1;
                    (a.max(0), b.min(raster as i64 - 1))
                })
                .filter(|(a, b)| a <= b)
                .collect();
            let total: i64 = ranges.iter().map(|(a, b)| b - a + 1).sum();
            ranges.sort();
            let mut union = 0;
            let mut cur: Option<(i64, i64)> = None;
            for (a, b) in ranges {
                cur = match cur {
                    Some((ca, cb)) if a <= cb + 1 => Some((ca, cb.max(b))),
                    Some((ca, cb)) => {
                        union += cb - ca + 1;
                        Some((a, b))
                    }
                    None => Some((a, b)),
                };
            }
            if let Some((ca, cb)) = cur {
                union += cb - ca + 1;
            }
            (union, total)
        })
        .reduce(|| (0, 0), |x, y| (x.0 + y.0, x.1 + y.1));
    union as f64 / total as f64
}

/// Perron-tree translations for slopes `n/N`, `n = -(N-1), …, N-1`.
pub fn besicovitch_translations(big_n: u32) -> Result<Besicovitch> {
    if big_n == 0 || !big_n.is_power_of_two() {
        return Err(Error::InvalidGrid(format!("N = {big_n} is not a power of two")));
    }
    let nn = big_n as u64;
    let slopes: Vec<i64> = (-(big_n as i64 - 1)..=(big_n as i64 - 1)).collect();
    let shifts: Vec<(f64, f64)> = slopes
        .iter()
        .map(|&n| (0.0, perron_shift((n + big_n as i64 - 1) as u64, nn)))
        .collect();
    let tubes: Vec<(i64, f64)> = slopes.iter().zip(&shifts).map(|(&n, &(_, s))| (n, s)).collect();
    let overlap_ratio = tube_overlap_ratio(&tubes, nn, RASTER);
    Ok(Besicovitch { n: big_n, slopes, shifts, overlap_ratio })
}

// ---------------------------------------------------------------------------
// Kakeya / Khintchine field

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tube {
    /// Slope index `n_κ`; the cap sits at `ξ_R + (n_κ/N) e_d`.
    pub n: i64,
    pub cap_center: Vec<f64>,
    /// `(t_κ, s_κ)` in the sheared coordinates.
    pub t_shift: f64,
    pub s_shift: f64,
    /// `x_κ = -t_κ∇g(ξ_R) - s_κ ∂_d∇g(ξ_R)`.
    pub x_shift: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TubeFamily {
    pub n: u32,
    pub c: f64,
    /// Centre `ξ_R` and halfwidths of the block `R`.
    pub block_center: Vec<f64>,
    pub block_half: Vec<f64>,
    /// Halfwidths of each cap `κ`.
    pub cap_half: Vec<f64>,
    pub tubes: Vec<Tube>,
    /// Rasterised overlap ratio of the normalised tubes actually used.
    pub overlap_ratio: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KakeyaOptions {
    pub c: f64,
    /// Best-of-K sign draws.
    pub trial_count: usize,
    pub cells_per_cap: usize,
    /// Space-time samples per `c·N` (tube width).
    pub samples_per_width: f64,
    /// Shifts zero, signs `+1`: `F = χ_R`.
    pub degenerate: bool,
}

impl Default for KakeyaOptions {
    fn default() -> Self {
        Self { c: DUAL_BOX_CONSTANT, trial_count: 8, cells_per_cap: 8, samples_per_width: 3.0, degenerate: false }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct RandomField {
    pub seed: u64,
    pub signs: Vec<i8>,
    /// Rescaling `λ` with `λ l_{j+1} = 1/N`; the field lives in rescaled coordinates.
    pub lambda: f64,
    pub rescaled_ell: Sidelengths,
    /// Spacing of block translations `(t_R, x_R)` (100× the block field's extent).
    pub block_translations: Vec<Vec<f64>>,
    pub tubes: TubeFamily,
    /// `q = 2(d-j-θ+1)/(d-j-θ)` used to pick the best draw.
    pub q: f64,
    /// The sampled block `F_R` on `R`.
    #[serde(skip)]
    pub gridfn: GridFunction,
    #[serde(skip)]
    pub surface: Surface,
    pub evaluation_box: SpaceTimeBox,
    /// `sup_F |⟨ℰF_R, g_F⟩| / |F|^{1/q'}` per draw.
    pub draw_scores: Vec<f64>,
}

fn kakeya_q(d: usize, j: usize, theta: Rat) -> Result<f64> {
    let m = Rat::from_integer((d - j) as i128) - theta;
    if !(m > Rat::from_integer(0)) || theta <= Rat::from_integer(0) || theta > Rat::from_integer(1) {
        return Err(Error::InvalidExponent(format!("θ = {theta} with j = {j}")));
    }
    Ok(to_f64(Rat::from_integer(2) * (m + Rat::from_integer(1)) / m))
}

/// Build `F_R = Σ_κ ω_κ e^{-i(t_κ,x_κ)·(g(ξ),ξ)} χ_κ` on the central block
/// `R ≅ Q^{(l_1,…,l_j,1/N,…,1/N,1)}` after rescaling to `l_{j+1} = 1/N`, with
/// the best of `trial_count` seeded sign draws.
pub fn kakeya_field(
    s: &Surface,
    ell: &Sidelengths,
    j: usize,
    theta: Rat,
    big_n: u32,
    seed: u64,
    opts: &KakeyaOptions,
) -> Result<RandomField> {
    let d = ell.dim();
    if d < 2 || s.dim() != d {
        return Err(Error::InvalidDimension(d));
    }
    if j + 2 > d {
        return Err(Error::InvalidDimension(j));
    }
    if !ell.is_finite() {
        return Err(Error::InfiniteSidelength);
    }
    if !ell.is_sorted() {
        return Err(Error::UnsortedSidelengths);
    }
    let q = kakeya_q(d, j, theta)?;
    let l = ell.lengths();
    let nf = big_n as f64;
    let ratio = l[d - 1] / l[j];
    if ratio <= nf.powi(3) {
        return Err(Error::AspectTooSmall { ratio, bound: nf.powi(3) });
    }
    let lambda = 1.0 / (nf * l[j]);
    let rescaled_ell = ell.scaled(lambda);
    let surface = parabolic_rescale(s, lambda)?;
    let bes = besicovitch_translations(big_n)?;

    let mut block_half: Vec<f64> = rescaled_ell.lengths()[..j].to_vec();
    block_half.extend(std::iter::repeat(1.0 / nf).take(d - 1 - j));
    block_half.push(1.0);
    let mut cap_half = block_half.clone();
    cap_half[d - 1] = 1.0 / nf;
    let block_center = vec![0.0; d];

    let grad = surface.grad(&block_center);
    let dgrad: Vec<f64> = (0..d).map(|i| surface.partial_seq(&block_center, &[d - 1, i])).collect();
    let c = opts.c;
    // Caps at n/N with n ≡ N-1 (mod 2) tile (-1, 1) in the last axis.
    let used: Vec<(i64, f64)> = bes
        .slopes
        .iter()
        .zip(&bes.shifts)
        .filter(|(n, _)| (**n - (big_n as i64 - 1)).rem_euclid(2) == 0)
        .map(|(&n, &(_, sig))| (n, if opts.degenerate { 0.0 } else { sig }))
        .collect();
    let overlap_ratio = tube_overlap_ratio(&used, big_n as u64, RASTER);
    let tubes: Vec<Tube> = used
        .iter()
        .map(|&(n, sig)| {
            let s_shift = c * nf * nf * sig;
            let t_shift = 0.0;
            let x_shift = (0..d).map(|i| -t_shift * grad[i] - s_shift * dgrad[i]).collect();
            let mut cap_center = block_center.clone();
            cap_center[d - 1] += n as f64 / nf;
            Tube { n, cap_center, t_shift, s_shift, x_shift }
        })
        .collect();
    let family = TubeFamily { n: big_n, c, block_center: block_center.clone(), block_half: block_half.clone(), cap_half: cap_half.clone(), tubes, overlap_ratio };

    // Evaluation box: bounding box of the shifted tubes T_κ + (t_κ, x_κ).
    let t_half = c * nf * nf;
    let widths: Vec<f64> = (0..d).map(|i| c * if i < j { 1.0 / rescaled_ell.lengths()[i] } else { nf }).collect();
    let mut x_half = vec![0.0f64; d];
    for tube in &family.tubes {
        let slope = tube.n as f64 / nf;
        for i in 0..d {
            let drift = t_half * (grad[i] + slope * dgrad[i]).abs();
            x_half[i] = x_half[i].max(tube.x_shift[i].abs() + drift + widths[i]);
        }
    }
    let x_half: Vec<f64> = x_half.iter().map(|x| 1.25 * x).collect();
    let step = c * nf / opts.samples_per_width;
    let res: Vec<usize> = std::iter::once(t_half)
        .chain(x_half.iter().copied())
        .map(|h| ((2.0 * h / step).ceil() as usize).max(4))
        .collect();
    let evaluation_box = SpaceTimeBox::new(t_half, x_half, res)?;

    let block = Sidelengths::new(block_half.clone())?;
    let mut grid_res: Vec<usize> = (0..d).map(|_| opts.cells_per_cap).collect();
    grid_res[d - 1] = opts.cells_per_cap * big_n as usize;
    let caps = &family.tubes;
    let assemble = |signs: &[i8]| {
        GridFunction::from_fn(block.clone(), grid_res.clone(), |xi| {
            let k = (((xi[d - 1] + 1.0) * nf / 2.0).floor() as usize).min(big_n as usize - 1);
            let tube = &caps[k];
            let phase = -(tube.t_shift * surface.eval(xi) + tube.x_shift.iter().zip(xi).map(|(a, b)| a * b).sum::<f64>());
            Complex64::from_polar(signs[k] as f64, phase)
        })
    };

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draws = if opts.degenerate { 1 } else { opts.trial_count.max(1) };
    let mut best: Option<(f64, Vec<i8>, GridFunction)> = None;
    let mut draw_scores = Vec::with_capacity(draws);
    for _ in 0..draws {
        let signs: Vec<i8> = (0..caps.len())
            .map(|_| if opts.degenerate || rng.gen::<bool>() { 1 } else { -1 })
            .collect();
        let f = assemble(&signs)?;
        let u = extend(&surface, &f, &evaluation_box)?;
        // The |E|^{1/p} factor is common to all draws; use p = ∞.
        let score = quotient_from_field(&f, &u, f64::INFINITY, q, &QuotientMode::RestrictedWeak(Receiver::BestSuperlevel))?;
        draw_scores.push(score);
        if best.as_ref().map_or(true, |b| score > b.0) {
            best = Some((score, signs, f));
        }
    }
    let (_, signs, gridfn) = best.expect("at least one draw");
    let spread = 100.0 * std::iter::once(t_half).chain(evaluation_box.x_halfwidths.iter().copied()).fold(0.0, f64::max);
    let n_blocks = (rescaled_ell.lengths()[d - 1] / 1.0).floor().max(1.0) as usize;
    let block_translations = (0..n_blocks).map(|b| {
        let mut v = vec![0.0; d + 1];
        v[d] = spread * b as f64;
        v
    }).collect();
    Ok(RandomField {
        seed,
        signs,
        lambda,
        rescaled_ell,
        block_translations,
        tubes: family,
        q,
        gridfn,
        surface,
        evaluation_box,
        draw_scores,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KakeyaReport {
    pub n: u32,
    pub p: f64,
    pub q: f64,
    pub seed: u64,
    pub field_quotient: f64,
    pub knapp_quotient: f64,
    /// Empirical `α` gain: field over Knapp quotient.
    pub gain: f64,
    pub overlap_ratio: f64,
}

/// RWT quotients of the best field and of the Knapp cap `φ^{j,ℓ}` (rescaled
/// frame, same evaluation box).
pub fn kakeya_gain(
    s: &Surface,
    ell: &Sidelengths,
    j: usize,
    theta: Rat,
    big_n: u32,
    seed: u64,
    p: f64,
    opts: &KakeyaOptions,
) -> Result<(RandomField, KakeyaReport)> {
    let field = kakeya_field(s, ell, j, theta, big_n, seed, opts)?;
    let mode = QuotientMode::RestrictedWeak(Receiver::BestSuperlevel);
    let u = extend(&field.surface, &field.gridfn, &field.evaluation_box)?;
    let field_quotient = quotient_from_field(&field.gridfn, &u, p, field.q, &mode)?;
    let d = ell.dim();
    let cap = knapp(d, &field.rescaled_ell, j, opts.cells_per_cap * 2)?.cap.sub_indicator();
    let uk = extend(&field.surface, &cap, &field.evaluation_box)?;
    let knapp_quotient = quotient_from_field(&cap, &uk, p, field.q, &mode)?;
    let report = KakeyaReport {
        n: big_n,
        p,
        q: field.q,
        seed,
        field_quotient,
        knapp_quotient,
        gain: field_quotient / knapp_quotient,
        overlap_ratio: field.tubes.overlap_ratio,
    };
    Ok((field, report))
}

// ---------------------------------------------------------------------------
// Schwartz train

pub const MIN_TRAIN_RESOLUTION: usize = 8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainBlock {
    pub m: u32,
    /// `k⃗_m = (Mm/β_1, …, Mm/β_d)`.
    pub k: Vec<u64>,
    /// `log₂` of the coefficient `2^{2MmJ_d/p}`.
    pub coefficient_log2: f64,
    /// `log₂ |x⃗_m|_i`: modulations spaced 10× the dual rectangles.
    pub modulation_log2: Vec<f64>,
    /// `log₂` of the dual rectangle sides `(t, x_1, …, x_d)`.
    pub dual_log2: Vec<f64>,
}

/// `f = Σ_m e^{i x⃗_m·ξ} 2^{2MmJ_d/p} φ_{R^{k⃗_m}}` with each block an affine
/// image of one reference bump `Π(1 - v_i²)^4`, `u_i = ξ_i 4^{k_i} ∈ (1, 4]`.
#[derive(Clone, Debug)]
pub struct SchwartzTrain {
    pub beta: BetaProfile,
    pub big_m: u64,
    pub n: u32,
    pub p: Rat,
    pub blocks: Vec<TrainBlock>,
    /// Reference bump on `u - 5/2 ∈ (-3/2, 3/2)^d`.
    pub reference: GridFunction,
    /// `g_β(5/2 + v)` on the reference box.
    pub reference_surface: Surface,
}

pub const TRAIN_CENTER: f64 = 2.5;
pub const TRAIN_HALF: f64 = 1.5;

pub fn schwartz_train(beta: &BetaProfile, big_m: u64, n: u32, p: Rat, resolution: usize) -> Result<SchwartzTrain> {
    let d = beta.dim();
    let bmax = beta.beta().iter().copied().max().unwrap();
    if Rat::from_integer(big_m as i128) <= Rat::from_integer(100) * bmax {
        return Err(Error::InvalidGrid(format!("M = {big_m} must exceed 100·max β")));
    }
    if n == 0 {
        return Err(Error::InvalidGrid("empty train".into()));
    }
    if resolution < MIN_TRAIN_RESOLUTION {
        return Err(Error::GridTooCoarse(format!("reference resolution {resolution} < {MIN_TRAIN_RESOLUTION}")));
    }
    if p < Rat::from_integer(1) {
        return Err(Error::InvalidExponent(format!("p = {p}")));
    }
    let jd = to_f64(beta.j(d));
    let pf = to_f64(p);
    let mut blocks = Vec::new();
    let mut offset = vec![0.0f64; d];
    for m in 1..=n {
        let mm = Rat::from_integer(big_m as i128 * m as i128);
        let mut k = Vec::with_capacity(d);
        for b in beta.beta() {
            let km = mm / b;
            if !km.is_integer() {
                return Err(Error::InvalidGrid(format!("Mm/β = {km} is not an integer")));
            }
            k.push(km.to_integer() as u64);
        }
        let mmf = (big_m * m as u64) as f64;
        let dual_x: Vec<f64> = beta.beta().iter().map(|b| 2.0 * mmf / to_f64(*b)).collect();
        let mut dual_log2 = vec![2.0 * mmf];
        dual_log2.extend(dual_x.iter().copied());
        // Next modulation 10× past the previous one plus this block's dual side.
        let modulation_log2: Vec<f64> = (0..d)
            .map(|i| {
                let prev = offset[i];
                let next = log2_add(prev, dual_x[i]) + 10f64.log2();
                offset[i] = next;
                next
            })
            .collect();
        blocks.push(TrainBlock { m, k, coefficient_log2: 2.0 * mmf * jd / pf, modulation_log2, dual_log2 });
    }
    let half = Sidelengths::new(vec![TRAIN_HALF; d])?;
    let reference = GridFunction::from_fn(half.clone(), vec![resolution; d], |v| {
        Complex64::new(v.iter().map(|x| (1.0 - (x / TRAIN_HALF).powi(2)).powi(BUMP_POWER)).product(), 0.0)
    })?;
    let reference_surface = Surface::gbeta(beta).with_domain(Sidelengths::new(vec![4.0; d])?)?.recentered(&vec![TRAIN_CENTER; d], half)?;
    Ok(SchwartzTrain { beta: beta.clone(), big_m, n, p, blocks, reference, reference_surface })
}

/// `log₂(2^a + 2^b)`.
fn log2_add(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    if lo == f64::NEG_INFINITY {
        return hi;
    }
    hi + (1.0 + (lo - hi).exp2()).log2()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainQuotient {
    pub n: u32,
    /// `‖ℰ_β φ_ref‖_q` on the reference box.
    pub reference_extension_norm: f64,
    /// `‖φ_ref‖_p` by quadrature.
    pub reference_lp: f64,
    /// Closed form `((3/2)^d I_{4p}^d)^{1/p}` for `‖φ_ref‖_p`.
    pub reference_lp_closed: Option<f64>,
    /// `log₂` of each block's `‖c_m ℰφ_m‖_q`, relative to the reference.
    pub block_norm_log2: Vec<f64>,
    /// `‖f‖_p = N^{1/p} ‖φ_ref‖_p`.
    pub f_lp: f64,
    pub extension_lq: f64,
    pub quotient: f64,
}

impl SchwartzTrain {
    /// `log₂ ‖c_m ℰφ_m‖_q - log₂ ‖ℰφ_ref‖_q`: `ℰφ_m(t,x) = |R_m| ℰφ_ref(4^{-Mm}t, 4^{-k}x)` up to
    /// modulation, so the `L^q` norm picks up `2^{-2MmJ_d(1-1/q)} 2^{2Mm/q}`.
    pub fn block_norm_log2(&self, block: &TrainBlock, q: Rat) -> f64 {
        let jd = to_f64(self.beta.j(self.beta.dim()));
        let mm = (self.big_m * block.m as u64) as f64;
        let qf = to_f64(q);
        block.coefficient_log2 - 2.0 * mm * jd * (1.0 - 1.0 / qf) + 2.0 * mm / qf
    }

    /// `log₂ ‖c_m φ_m‖_p - log₂ ‖φ_ref‖_p`.
    pub fn block_lp_log2(&self, block: &TrainBlock) -> f64 {
        let jd = to_f64(self.beta.j(self.beta.dim()));
        let mm = (self.big_m * block.m as u64) as f64;
        block.coefficient_log2 - 2.0 * mm * jd / to_f64(self.p)
    }

    /// `‖ℰ_β f‖_q / ‖f‖_p` with blocks decoupled by their separated
    /// modulations; the reference field is evaluated on `bx`.
    pub fn quotient(&self, q: Rat, bx: &SpaceTimeBox) -> Result<TrainQuotient> {
        let qf = to_f64(q);
        let pf = to_f64(self.p);
        let u = extend(&self.reference_surface, &self.reference, bx)?;
        let reference_extension_norm = lq_norm(&u, qf, NormMode::Strong);
        let reference_lp = self.reference.lp_norm(pf);
        let reference_lp_closed = (self.p * Rat::from_integer(4)).is_integer().then(|| {
            let n = (self.p * Rat::from_integer(4)).to_integer() as u32;
            (2.0 * TRAIN_HALF / 2.0 * bump_power_integral(n)).powi(self.beta.dim() as i32).powf(1.0 / pf)
        });
        let block_norm_log2: Vec<f64> = self.blocks.iter().map(|b| self.block_norm_log2(b, q)).collect();
        let extension_lq = block_norm_log2
            .iter()
            .map(|l| ((qf * l).exp2()) * reference_extension_norm.powf(qf))
            .sum::<f64>()
            .powf(1.0 / qf);
        let f_lp = self
            .blocks
            .iter()
            .map(|b| (pf * self.block_lp_log2(b)).exp2() * reference_lp.powf(pf))
            .sum::<f64>()
            .powf(1.0 / pf);
        Ok(TrainQuotient {
            n: self.n,
            reference_extension_norm,
            reference_lp,
            reference_lp_closed,
            block_norm_log2,
            f_lp,
            extension_lq,
            quotient: extension_lq / f_lp,
        })
    }
}

/// `(p, q)` on `(1+J_d)/q = J_d/p'` for a given `p`.
pub fn train_exponent(beta: &BetaProfile, p: Rat) -> Result<ExponentPair> {
    let jd = beta.j(beta.dim());
    let one = Rat::from_integer(1);
    let inv_p = p.recip();
    let inv_q = jd * (one - inv_p) / (one + jd);
    ExponentPair::new(inv_p, inv_q)
}
