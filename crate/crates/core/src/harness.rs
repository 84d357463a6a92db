//! Sweep plans, batch evaluation and log-log exponent fits.
//!
//! A [`SweepPlan`] is a versioned TOML document. Every artifact written from
//! a sweep embeds the plan inline together with its SHA-256 hash.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::beta::BetaProfile;
use crate::error::{Error, Result};
use crate::exponents::{conjectured_exponents, ExponentPair, PredictedExponents};
use crate::extension::{quotient, GridFunction, QuotientMode, Receiver, SpaceTimeBox};
use crate::extremizers::{kakeya_gain, knapp, KakeyaOptions};
use crate::rational::{parse_rat, to_f64, Rat};
use crate::surface::{Monomial, Sidelengths, Surface};

pub const SCHEMA_VERSION: u32 = 1;
pub const DEFAULT_SLOPE_TOL: f64 = 0.05;
pub const MIN_FIT_POINTS: usize = 4;
pub const MIN_FIT_OCTAVES: f64 = 2.0;
/// Worker-count override for sweeps.
pub const WORKERS_ENV: &str = "RRECT_WORKERS";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SurfaceSpec {
    Paraboloid { d: usize },
    PerturbedParaboloid { d: usize, terms: Vec<Monomial> },
    /// Entries are rationals written as strings, e.g. `"3/2"`.
    Gbeta { beta: Vec<String> },
}

impl SurfaceSpec {
    pub fn dim(&self) -> usize {
        match self {
            Self::Paraboloid { d } | Self::PerturbedParaboloid { d, .. } => *d,
            Self::Gbeta { beta } => beta.len(),
        }
    }

    /// The surface with domain `ell`.
    pub fn build(&self, ell: &Sidelengths) -> Result<Surface> {
        match self {
            Self::Paraboloid { d } => Surface::paraboloid(*d).with_domain(ell.clone()),
            Self::PerturbedParaboloid { d, terms } => Ok(Surface::perturbed_paraboloid(*d, terms.clone(), ell.clone())),
            Self::Gbeta { beta } => {
                let b: Option<Vec<Rat>> = beta.iter().map(|s| parse_rat(s)).collect();
                let b = b.ok_or_else(|| Error::InvalidPlan(format!("bad β entries {beta:?}")))?;
                Surface::gbeta(&BetaProfile::new(b)?).with_domain(ell.clone())
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TestFunctionSpec {
    /// `φ^{j,ℓ}`; made sub-indicator in restricted-weak mode.
    Knapp { j: usize },
    /// `χ_{Q^ℓ}`.
    Indicator,
    /// Best-of-K random field over one block; `theta` is a rational string.
    Kakeya { j: usize, theta: String, n: u32 },
}

/// Geometric or explicit ladder on a single axis; other axes stay at `base`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LadderSpec {
    pub base: Vec<f64>,
    pub axis: usize,
    /// Explicit values for the varied axis; overrides the geometric form.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<f64>>,
    #[serde(default = "one")]
    pub start: f64,
    #[serde(default = "two")]
    pub ratio: f64,
    #[serde(default)]
    pub count: usize,
}

fn one() -> f64 {
    1.0
}
fn two() -> f64 {
    2.0
}

impl LadderSpec {
    pub fn explicit(base: Vec<f64>, axis: usize, values: Vec<f64>) -> Self {
        Self { base, axis, values: Some(values), start: 1.0, ratio: 2.0, count: 0 }
    }

    pub fn geometric(base: Vec<f64>, axis: usize, start: f64, ratio: f64, count: usize) -> Self {
        Self { base, axis, values: None, start, ratio, count }
    }

    pub fn values(&self) -> Vec<f64> {
        match &self.values {
            Some(v) => v.clone(),
            None => (0..self.count).map(|k| self.start * self.ratio.powi(k as i32)).collect(),
        }
    }

    pub fn points(&self) -> Vec<Vec<f64>> {
        self.values()
            .into_iter()
            .map(|v| {
                let mut l = self.base.clone();
                l[self.axis] = v;
                l
            })
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "snake_case")]
pub enum BoxPolicy {
    /// Knapp dual box times `factor`, `samples` per axis.
    Dual { factor: f64, samples: usize },
    Fixed { t: f64, x: f64, samples: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResolutionPolicy {
    /// Quadrature nodes per axis on the test function's support.
    pub nodes_per_axis: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepMode {
    Strong,
    /// Restricted weak type with the best phase-aligned superlevel receiver.
    Rwt,
}

impl SweepMode {
    fn label(&self) -> &'static str {
        match self {
            Self::Strong => "strong",
            Self::Rwt => "rwt",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepPlan {
    pub schema_version: u32,
    #[serde(default)]
    pub name: String,
    #[serde(default)]
    pub seed: u64,
    pub mode: SweepMode,
    /// `[p, q]` as strings; `"inf"` allowed.
    pub pairs: Vec<[String; 2]>,
    pub surface: SurfaceSpec,
    pub test_function: TestFunctionSpec,
    pub ladder: LadderSpec,
    #[serde(rename = "box")]
    pub box_policy: BoxPolicy,
    pub resolution: ResolutionPolicy,
}

pub fn parse_exponent(s: &str) -> Result<Option<Rat>> {
    let t = s.trim();
    if t.eq_ignore_ascii_case("inf") || t == "∞" {
        return Ok(None);
    }
    parse_rat(t).map(Some).ok_or_else(|| Error::InvalidPlan(format!("bad exponent {s:?}")))
}

impl SweepPlan {
    pub fn from_toml(src: &str) -> Result<Self> {
        let plan: Self = toml::from_str(src).map_err(|e| Error::Config(e.to_string()))?;
        plan.validate()?;
        Ok(plan)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("plan serialises")
    }

    /// SHA-256 of the canonical TOML form.
    pub fn hash(&self) -> String {
        format!("{:x}", Sha256::digest(self.to_toml().as_bytes()))
    }

    pub fn dim(&self) -> usize {
        self.surface.dim()
    }

    pub fn exponent_pairs(&self) -> Result<Vec<ExponentPair>> {
        self.pairs.iter().map(|[p, q]| ExponentPair::from_pq(parse_exponent(p)?, parse_exponent(q)?)).collect()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidPlan(m));
        if self.schema_version != SCHEMA_VERSION {
            return bad(format!("schema version {} (expected {SCHEMA_VERSION})", self.schema_version));
        }
        let d = self.dim();
        if d == 0 {
            return bad("zero-dimensional surface".into());
        }
        if self.ladder.base.len() != d || self.ladder.axis >= d {
            return bad(format!("ladder does not match dimension {d}"));
        }
        if self.ladder.values().is_empty() {
            return bad("empty ladder".into());
        }
        if self.pairs.is_empty() {
            return bad("no exponent pairs".into());
        }
        self.exponent_pairs()?;
        match &self.test_function {
            TestFunctionSpec::Knapp { j } if *j >= d => return bad(format!("Knapp level j = {j} ≥ d")),
            TestFunctionSpec::Kakeya { theta, .. } if parse_rat(theta).is_none() => return bad(format!("bad θ {theta:?}")),
            _ => {}
        }
        if self.resolution.nodes_per_axis == 0 {
            return bad("zero resolution".into());
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub index: usize,
    pub ell: Vec<f64>,
    pub p: String,
    pub q: String,
    pub mode: SweepMode,
    pub quotient: Option<f64>,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub plan_hash: String,
    pub plan: SweepPlan,
    pub rows: Vec<SweepRow>,
}

fn error_flag(e: &Error) -> String {
    let s = format!("{e:?}");
    s.split(|c: char| !c.is_alphanumeric()).next().unwrap_or("Error").to_string()
}

fn finite(v: Option<Rat>) -> f64 {
    v.map_or(f64::INFINITY, to_f64)
}

fn run_row(plan: &SweepPlan, ell: &[f64], pq: &ExponentPair) -> Result<f64> {
    let d = plan.dim();
    let ell = Sidelengths::new(ell.to_vec())?;
    let s = plan.surface.build(&ell)?;
    let (p, q) = (finite(pq.p()), finite(pq.q()));
    let n = plan.resolution.nodes_per_axis;
    let mode = match plan.mode {
        SweepMode::Strong => QuotientMode::Strong,
        SweepMode::Rwt => QuotientMode::RestrictedWeak(Receiver::BestSuperlevel),
    };
    let dual_j = match &plan.test_function {
        TestFunctionSpec::Knapp { j } => *j,
        _ => 0,
    };
    let make_box = || -> Result<SpaceTimeBox> {
        match plan.box_policy {
            BoxPolicy::Dual { factor, samples } => knapp(d, &ell, dual_j, 2)?.evaluation_box(factor, samples),
            BoxPolicy::Fixed { t, x, samples } => SpaceTimeBox::new(t, vec![x; d], vec![samples; d + 1]),
        }
    };
    match &plan.test_function {
        TestFunctionSpec::Knapp { j } => {
            let k = knapp(d, &ell, *j, n)?;
            let f = match plan.mode {
                SweepMode::Strong => k.cap.gridfn.clone(),
                SweepMode::Rwt => k.cap.sub_indicator(),
            };
            quotient(&s, &f, &make_box()?, p, q, &mode)
        }
        TestFunctionSpec::Indicator => {
            let f = GridFunction::indicator(ell.clone(), vec![n; d])?;
            quotient(&s, &f, &make_box()?, p, q, &mode)
        }
        TestFunctionSpec::Kakeya { j, theta, n: big_n } => {
            let theta = parse_rat(theta).ok_or_else(|| Error::InvalidPlan(format!("bad θ {theta:?}")))?;
            let opts = KakeyaOptions::default();
            Ok(kakeya_gain(&s, &ell, *j, theta, *big_n, plan.seed, p, &opts)?.1.field_quotient)
        }
    }
}

fn worker_pool() -> Result<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(n) = std::env::var(WORKERS_ENV).ok().and_then(|v| v.trim().parse::<usize>().ok()) {
        b = b.num_threads(n);
    }
    b.build().map_err(|e| Error::Config(e.to_string()))
}

/// Evaluate every `(ℓ, (p, q))` row. Row failures are recorded, not raised;
/// rows come back in plan order whatever the completion order.
pub fn run_sweep(plan: &SweepPlan) -> Result<SweepTable> {
    plan.validate()?;
    let pairs = plan.exponent_pairs()?;
    let jobs: Vec<(Vec<f64>, usize)> = plan
        .ladder
        .points()
        .into_iter()
        .flat_map(|ell| (0..pairs.len()).map(move |k| (ell.clone(), k)))
        .collect();
    let rows = worker_pool()?.install(|| {
        jobs.par_iter()
            .enumerate()
            .map(|(index, (ell, k))| {
                let r = run_row(plan, ell, &pairs[*k]);
                SweepRow {
                    index,
                    ell: ell.clone(),
                    p: plan.pairs[*k][0].clone(),
                    q: plan.pairs[*k][1].clone(),
                    mode: plan.mode,
                    quotient: r.as_ref().ok().copied(),
                    error: r.err().map(|e| error_flag(&e)),
                }
            })
            .collect()
    });
    Ok(SweepTable { plan_hash: plan.hash(), plan: plan.clone(), rows })
}

impl SweepTable {
    /// CSV with columns `l1..ld, p, q, mode, quotient, error_flag`, preceded by
    /// `#` lines holding the plan hash and the plan itself.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        writeln!(out, "# plan_sha256 = {}", self.plan_hash).unwrap();
        for line in self.plan.to_toml().lines() {
            writeln!(out, "# {line}").unwrap();
        }
        let d = self.plan.dim();
        let mut header: Vec<String> = (1..=d).map(|i| format!("l{i}")).collect();
        header.extend(["p", "q", "mode", "quotient", "error_flag"].map(String::from));
        writeln!(out, "{}", header.join(",")).unwrap();
        for r in &self.rows {
            let mut cols: Vec<String> = r.ell.iter().map(|v| format!("{v}")).collect();
            cols.push(r.p.clone());
            cols.push(r.q.clone());
            cols.push(r.mode.label().into());
            cols.push(r.quotient.map_or(String::new(), |v| format!("{v:.12e}")));
            cols.push(r.error.clone().unwrap_or_default());
            writeln!(out, "{}", cols.join(",")).unwrap();
        }
        out
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Rows for one exponent pair.
    pub fn rows_for(&self, p: &str, q: &str) -> Vec<&SweepRow> {
        self.rows.iter().filter(|r| r.p == p && r.q == q).collect()
    }
}

// ---------------------------------------------------------------------------
// Fitting

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
    /// No prediction available.
    Unchecked,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AxisFit {
    pub axis: usize,
    pub slope: f64,
    pub intercept: f64,
    /// `max |log₂ quotient - fit|`.
    pub residual: f64,
    pub predicted: Option<f64>,
    pub verdict: Verdict,
    pub points: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub p: String,
    pub q: String,
    pub tolerance: f64,
    pub axes: Vec<AxisFit>,
    pub skipped_rows: usize,
}

impl FitReport {
    pub fn passed(&self) -> bool {
        self.axes.iter().all(|a| a.verdict != Verdict::Fail)
    }
}

/// Least-squares line through `(x, y)`; returns `(slope, intercept, max residual)`.
pub fn least_squares(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residual = xs.iter().zip(ys).map(|(x, y)| (y - slope * x - intercept).abs()).fold(0.0, f64::max);
    (slope, intercept, residual)
}

/// Fit `log₂ quotient` against `log₂ l_axis` for every axis that varies in
/// `rows` (which should share one `(p, q)`), comparing with `predicted`.
pub fn fit_exponents(rows: &[&SweepRow], predicted: Option<&PredictedExponents>, tol: f64) -> Result<FitReport> {
    let first = rows.first().ok_or_else(|| Error::IllConditioned("empty table".into()))?;
    let good: Vec<&&SweepRow> = rows.iter().filter(|r| r.quotient.is_some_and(|q| q > 0.0 && q.is_finite())).collect();
    let skipped_rows = rows.len() - good.len();
    let d = first.ell.len();
    let mut axes = Vec::new();
    for axis in 0..d {
        let xs: Vec<f64> = good.iter().map(|r| r.ell[axis].log2()).collect();
        let lo = xs.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !(hi > lo) {
            continue;
        }
        if hi - lo < MIN_FIT_OCTAVES || xs.len() < MIN_FIT_POINTS {
            return Err(Error::IllConditioned(format!(
                "axis {axis}: {} points over {:.2} octaves",
                xs.len(),
                hi - lo
            )));
        }
        let ys: Vec<f64> = good.iter().map(|r| r.quotient.unwrap().log2()).collect();
        let (slope, intercept, residual) = least_squares(&xs, &ys);
        let predicted = predicted.map(|p| to_f64(p.per_sidelength[axis]));
        let verdict = match predicted {
            Some(e) if (slope - e).abs() <= tol => Verdict::Pass,
            Some(_) => Verdict::Fail,
            None => Verdict::Unchecked,
        };
        axes.push(AxisFit { axis, slope, intercept, residual, predicted, verdict, points: xs.len() });
    }
    if axes.is_empty() {
        return Err(Error::IllConditioned("no axis varies".into()));
    }
    Ok(FitReport { p: first.p.clone(), q: first.q.clone(), tolerance: tol, axes, skipped_rows })
}

/// Predicted exponents of the plan's dimension at `(p, q)`, if the pair lies in a regime.
pub fn predicted_for(d: usize, p: &str, q: &str) -> Option<PredictedExponents> {
    let pq = ExponentPair::from_pq(parse_exponent(p).ok()?, parse_exponent(q).ok()?).ok()?;
    conjectured_exponents(d, &pq, &Sidelengths::ones(d)).ok()
}

/// One [`FitReport`] per exponent pair of the table.
pub fn fit_table(table: &SweepTable, tol: f64) -> Result<Vec<FitReport>> {
    let d = table.plan.dim();
    table
        .plan
        .pairs
        .iter()
        .map(|[p, q]| fit_exponents(&table.rows_for(p, q), predicted_for(d, p, q).as_ref(), tol))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    pub(crate) fn knapp_plan(d: usize, base: Vec<f64>, axis: usize, values: Vec<f64>, j: usize, pairs: &[(&str, &str)]) -> SweepPlan {
        SweepPlan {
            schema_version: SCHEMA_VERSION,
            name: "knapp".into(),
            seed: 0,
            mode: SweepMode::Strong,
            pairs: pairs.iter().map(|(p, q)| [p.to_string(), q.to_string()]).collect(),
            surface: SurfaceSpec::Paraboloid { d },
            test_function: TestFunctionSpec::Knapp { j },
            ladder: LadderSpec::explicit(base, axis, values),
            box_policy: BoxPolicy::Dual { factor: 4.0, samples: 9 },
            resolution: ResolutionPolicy { nodes_per_axis: 24 },
        }
    }

    fn rows(ls: &[f64], f: impl Fn(f64) -> f64) -> Vec<SweepRow> {
        ls.iter()
            .enumerate()
            .map(|(index, &l)| SweepRow {
                index,
                ell: vec![1.0, l],
                p: "2".into(),
                q: "6".into(),
                mode: SweepMode::Strong,
                quotient: Some(f(l)),
                error: None,
            })
            .collect()
    }

    #[test]
    fn exact_power_law() {
        let t = rows(&[1.0, 2.0, 4.0, 8.0, 16.0], |l| 7.0 * l.powf(1.0 / 3.0));
        let r: Vec<&SweepRow> = t.iter().collect();
        let f = fit_exponents(&r, None, 0.05).unwrap();
        assert_eq!(f.axes.len(), 1);
        assert_eq!(f.axes[0].axis, 1);
        assert!((f.axes[0].slope - 1.0 / 3.0).abs() < 1e-12);
        assert!(f.axes[0].residual < 1e-12);
        assert_eq!(f.axes[0].verdict, Verdict::Unchecked);
    }

    #[test]
    fn constant_table() {
        let t = rows(&[1.0, 2.0, 4.0, 8.0], |_| 3.0);
        let r: Vec<&SweepRow> = t.iter().collect();
        assert!(fit_exponents(&r, None, 0.05).unwrap().axes[0].slope.abs() < 1e-14);
    }

    #[test]
    fn short_ladder_is_ill_conditioned() {
        let t = rows(&[1.0, 1.5, 2.0, 3.0], |l| l);
        let r: Vec<&SweepRow> = t.iter().collect();
        assert!(matches!(fit_exponents(&r, None, 0.05), Err(Error::IllConditioned(_))));
    }

    #[test]
    fn plan_round_trip_and_hash() {
        let plan = knapp_plan(1, vec![1.0], 0, vec![1.0, 2.0], 0, &[("2", "6")]);
        let text = plan.to_toml();
        let back = SweepPlan::from_toml(&text).unwrap();
        assert_eq!(back, plan);
        assert_eq!(back.hash(), plan.hash());
        assert_eq!(plan.hash().len(), 64);
        let mut other = plan.clone();
        other.seed = 1;
        assert_ne!(other.hash(), plan.hash());
    }

    #[test]
    fn plan_validation() {
        let mut plan = knapp_plan(1, vec![1.0], 0, vec![1.0], 0, &[("2", "6")]);
        plan.schema_version = 99;
        assert!(matches!(plan.validate(), Err(Error::InvalidPlan(_))));
        let plan = knapp_plan(1, vec![1.0], 0, vec![1.0], 1, &[("2", "6")]);
        assert!(plan.validate().is_err());
        let plan = knapp_plan(1, vec![1.0], 0, vec![1.0], 0, &[("1/2", "6")]);
        assert!(plan.validate().is_err());
        assert!(matches!(SweepPlan::from_toml("schema_version = 1"), Err(Error::Config(_))));
    }

    #[test]
    fn single_point_ladder() {
        let plan = knapp_plan(1, vec![1.0], 0, vec![1.0], 0, &[("2", "6")]);
        let t = run_sweep(&plan).unwrap();
        assert_eq!(t.rows.len(), 1);
        assert!(t.rows[0].quotient.unwrap() > 0.0);
    }

    #[test]
    fn row_errors_are_recorded() {
        // Unsorted sidelengths fail the Knapp construction for that row only.
        let plan = knapp_plan(2, vec![1.0, 2.0], 0, vec![1.0, 4.0], 0, &[("2", "6")]);
        let t = run_sweep(&plan).unwrap();
        assert!(t.rows[0].quotient.is_some());
        assert_eq!(t.rows[1].error.as_deref(), Some("UnsortedSidelengths"));
        let csv = t.to_csv();
        assert!(csv.contains(&t.plan_hash));
        assert!(csv.lines().any(|l| l == "l1,l2,p,q,mode,quotient,error_flag"));
        assert!(csv.trim_end().ends_with(",UnsortedSidelengths"));
    }

    #[test]
    fn deterministic_rerun() {
        let plan = knapp_plan(1, vec![1.0], 0, vec![1.0, 2.0, 3.0], 0, &[("2", "6"), ("2", "8")]);
        assert_eq!(run_sweep(&plan).unwrap(), run_sweep(&plan).unwrap());
    }

    #[test]
    fn d1_constant_within_five_percent() {
        let plan = knapp_plan(1, vec![1.0], 0, (1..=64).map(|l| l as f64).collect(), 0, &[("2", "6")]);
        let t = run_sweep(&plan).unwrap();
        let qs: Vec<f64> = t.rows.iter().map(|r| r.quotient.unwrap()).collect();
        let (lo, hi) = qs.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &q| (a.min(q), b.max(q)));
        assert!(hi / lo < 1.05, "{lo} {hi}");
    }

    proptest! {
        // With convex log-log data the consecutive secant slopes increase,
        // and the least-squares slope is a positive mix of them.
        #[test]
        fn fit_between_end_secants(a in -2.0f64..2.0, b in 0.0f64..0.3, c in -3.0f64..3.0, n in 4usize..10) {
            let xs: Vec<f64> = (0..n).map(|k| k as f64).collect();
            let ys: Vec<f64> = xs.iter().map(|x| c + a * x + b * x * x).collect();
            let (slope, _, _) = least_squares(&xs, &ys);
            let first = ys[1] - ys[0];
            let last = ys[n - 1] - ys[n - 2];
            prop_assert!(slope >= first - 1e-9 && slope <= last + 1e-9);
        }
    }
}
