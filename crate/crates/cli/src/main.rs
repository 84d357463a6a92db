//! `rrect`: command-line front end for the extension-operator toolkit.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use serde_json::{json, Value};

use rrect::beta::{condition_check, dyadic_sum_all, region_boundary, BetaProfile, SumVerdict};
use rrect::exponents::{conjectured_exponents, ExponentPair};
use rrect::extension::{quotient, QuotientMode, Receiver, SpaceTimeBox};
use rrect::extremizers::{besicovitch_translations, kakeya_gain, knapp, schwartz_train, train_exponent, KakeyaOptions};
use rrect::harness::{fit_table, parse_exponent, run_sweep, SweepPlan, SweepTable, DEFAULT_SLOPE_TOL};
use rrect::rational::{parse_rat, Rat};
use rrect::surface::{ellipticity_deficit, DeficitGrid, Monomial, Sidelengths, Surface};

#[derive(Parser)]
#[command(name = "rrect", version, about = "Extension operators over rectangles: exponents, test functions, β-regions")]
struct Cli {
    /// Seed for randomized constructions (overrides the config).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output path (stem for sweeps); stdout when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Sweep plan (TOML).
    #[arg(long, global = true, env = "RRECT_CONFIG")]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Boundedness region of `g_β`: boundary, vertices and binding conditions.
    Region {
        /// Comma-separated β, e.g. `4,3` or `3/2,4/3`.
        #[arg(long)]
        beta: String,
        #[arg(long, default_value_t = 256)]
        resolution: usize,
        /// Emit the polyline as CSV instead of JSON.
        #[arg(long)]
        csv: bool,
        /// Also check conditions (i)–(iv) at this `p,q`.
        #[arg(long)]
        at: Option<String>,
    },
    /// Run a sweep plan; writes `<out>.csv` and `<out>.json`.
    Sweep,
    /// Run a sweep plan (or read a sweep JSON) and fit log-log slopes.
    Fit {
        /// Existing sweep JSON instead of running the plan.
        #[arg(long)]
        table: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_SLOPE_TOL)]
        tol: f64,
    },
    /// Knapp cap quotient on its dual box.
    Knapp {
        /// Comma-separated sidelengths.
        #[arg(long)]
        ell: String,
        #[arg(long, default_value_t = 0)]
        j: usize,
        #[arg(long)]
        p: String,
        #[arg(long)]
        q: String,
        #[arg(long, default_value_t = 32)]
        resolution: usize,
        #[arg(long, default_value_t = 4.0)]
        factor: f64,
        #[arg(long, default_value_t = 9)]
        samples: usize,
    },
    /// Randomized Kakeya field against the Knapp cap (d = 2 paraboloid).
    Kakeya {
        #[arg(long)]
        n: u32,
        #[arg(long, default_value_t = 0)]
        j: usize,
        #[arg(long, default_value = "1")]
        theta: String,
        #[arg(long, default_value = "8")]
        p: String,
        #[arg(long, default_value_t = 8)]
        trials: usize,
    },
    /// Perron-tree translations and their overlap ratio.
    Besicovitch {
        #[arg(long)]
        n: u32,
    },
    /// Ellipticity deficit of a paraboloid, optionally perturbed by `c·ξ_i^k` terms.
    Ellipticity {
        #[arg(long)]
        ell: String,
        /// Perturbation terms `coeff:power,power;…`.
        #[arg(long)]
        terms: Option<String>,
        #[arg(long, default_value_t = 2)]
        order: usize,
        #[arg(long, default_value_t = 9)]
        points: usize,
    },
    /// Dyadic block sums over every ordering σ.
    DyadicSum {
        #[arg(long)]
        beta: String,
        #[arg(long)]
        p: String,
        #[arg(long)]
        q: String,
        #[arg(long, default_value_t = 0.0)]
        eps: f64,
        #[arg(long, default_value_t = 64)]
        k_max: u32,
    },
    /// Schwartz train quotient on the condition-(iv) line.
    Train {
        #[arg(long, default_value = "4,4")]
        beta: String,
        #[arg(long = "big-m", default_value_t = 404)]
        big_m: u64,
        #[arg(long)]
        n: u32,
        #[arg(long, default_value = "8")]
        p: String,
        #[arg(long, default_value_t = 24)]
        resolution: usize,
    },
}

fn parse_list<T>(s: &str, f: impl Fn(&str) -> Option<T>) -> Result<Vec<T>> {
    s.split(',').map(|t| f(t.trim()).with_context(|| format!("bad entry {t:?}"))).collect()
}

fn parse_beta(s: &str) -> Result<BetaProfile> {
    Ok(BetaProfile::new(parse_list(s, parse_rat)?)?)
}

fn parse_ell(s: &str) -> Result<Sidelengths> {
    Ok(Sidelengths::new(parse_list(s, |t| t.parse::<f64>().ok())?)?)
}

fn parse_pair(p: &str, q: &str) -> Result<ExponentPair> {
    Ok(ExponentPair::from_pq(parse_exponent(p)?, parse_exponent(q)?)?)
}

fn finite(v: Option<Rat>) -> f64 {
    v.map_or(f64::INFINITY, rrect::rational::to_f64)
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => std::fs::write(path, text).with_context(|| format!("writing {}", path.display())),
        None => {
            use std::io::Write;
            match writeln!(std::io::stdout().lock(), "{text}") {
                // A closed downstream pipe (`| head`) is not an error.
                Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
                r => r.context("writing stdout"),
            }
        }
    }
}

fn emit_json(out: Option<&Path>, v: &Value) -> Result<()> {
    emit(out, &serde_json::to_string_pretty(v)?)
}

fn load_plan(cli: &Cli) -> Result<SweepPlan> {
    let path = cli.config.as_ref().context("--config <plan.toml> is required")?;
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut plan = SweepPlan::from_toml(&text)?;
    if let Some(seed) = cli.seed {
        plan.seed = seed;
    }
    Ok(plan)
}

fn write_table(stem: &Path, table: &SweepTable) -> Result<()> {
    std::fs::write(stem.with_extension("csv"), table.to_csv())?;
    std::fs::write(stem.with_extension("json"), table.to_json()?)?;
    Ok(())
}

/// Returns whether every verdict passed.
fn run(cli: &Cli) -> Result<bool> {
    let out = cli.out.as_deref();
    match &cli.command {
        Command::Region { beta, resolution, csv, at } => {
            let b = parse_beta(beta)?;
            let r = region_boundary(&b, *resolution)?;
            if *csv {
                emit(out, &r.to_csv())?;
                return Ok(true);
            }
            let mut v = json!({ "beta": beta, "height": b.height().to_string(), "n0": b.n0(), "boundary": r });
            if let Some(at) = at {
                let (p, q) = at.split_once(',').context("--at expects p,q")?;
                v["conditions"] = serde_json::to_value(condition_check(&b, &parse_pair(p, q)?))?;
            }
            emit_json(out, &v)?;
            Ok(true)
        }
        Command::Sweep => {
            let plan = load_plan(cli)?;
            let table = run_sweep(&plan)?;
            match out {
                Some(stem) => {
                    write_table(stem, &table)?;
                    let failed = table.rows.iter().filter(|r| r.error.is_some()).count();
                    eprintln!("{} rows ({} failed), plan {}", table.rows.len(), failed, table.plan_hash);
                }
                None => print!("{}", table.to_csv()),
            }
            Ok(true)
        }
        Command::Fit { table, tol } => {
            let table: SweepTable = match table {
                Some(path) => serde_json::from_str(&std::fs::read_to_string(path)?)?,
                None => run_sweep(&load_plan(cli)?)?,
            };
            let reports = fit_table(&table, *tol)?;
            let pass = reports.iter().all(|r| r.passed());
            emit_json(out, &json!({ "plan_hash": table.plan_hash, "plan": table.plan, "fits": reports, "pass": pass }))?;
            Ok(pass)
        }
        Command::Knapp { ell, j, p, q, resolution, factor, samples } => {
            let ell = parse_ell(ell)?;
            let d = ell.dim();
            let pq = parse_pair(p, q)?;
            let k = knapp(d, &ell, *j, *resolution)?;
            let s = Surface::paraboloid(d).with_domain(ell.clone())?;
            let bx: SpaceTimeBox = k.evaluation_box(*factor, *samples)?;
            let (pf, qf) = (finite(pq.p()), finite(pq.q()));
            let strong = quotient(&s, &k.cap.gridfn, &bx, pf, qf, &QuotientMode::Strong)?;
            let rwt = quotient(&s, &k.cap.sub_indicator(), &bx, pf, qf, &QuotientMode::RestrictedWeak(Receiver::BestSuperlevel))?;
            let predicted = conjectured_exponents(d, &pq, &ell).ok();
            emit_json(out, &json!({
                "ell": ell, "j": j, "p": p, "q": q,
                "predicted_peak": k.predicted_peak,
                "dual_box": k.dual_box,
                "strong_quotient": strong,
                "rwt_quotient": rwt,
                "predicted_exponents": predicted,
            }))?;
            Ok(true)
        }
        Command::Kakeya { n, j, theta, p, trials } => {
            let theta = parse_rat(theta).context("bad θ")?;
            let nf = *n as f64;
            let ell = Sidelengths::new(vec![1.0 / nf, nf * nf + 1.0])?;
            let s = Surface::paraboloid(2).with_domain(ell.clone())?;
            let opts = KakeyaOptions { trial_count: *trials, ..Default::default() };
            let pf = finite(parse_exponent(p)?);
            let (field, report) = kakeya_gain(&s, &ell, *j, theta, *n, cli.seed.unwrap_or(0), pf, &opts)?;
            emit_json(out, &json!({ "report": report, "field": field }))?;
            Ok(report.gain > 1.0)
        }
        Command::Besicovitch { n } => {
            emit_json(out, &serde_json::to_value(besicovitch_translations(*n)?)?)?;
            Ok(true)
        }
        Command::Ellipticity { ell, terms, order, points } => {
            let ell = parse_ell(ell)?;
            let d = ell.dim();
            let s = match terms {
                None => Surface::paraboloid(d).with_domain(ell)?,
                Some(t) => Surface::perturbed_paraboloid(d, parse_terms(t, d)?, ell),
            };
            let grid = DeficitGrid { points_per_axis: *points, ..Default::default() };
            emit_json(out, &serde_json::to_value(ellipticity_deficit(&s, *order, grid)?)?)?;
            Ok(true)
        }
        Command::DyadicSum { beta, p, q, eps, k_max } => {
            let b = parse_beta(beta)?;
            let pq = parse_pair(p, q)?;
            let sums = dyadic_sum_all(&b, &pq, *eps, *k_max)?;
            let conditions = condition_check(&b, &pq);
            let v = json!({ "beta": beta, "p": p, "q": q, "conditions": conditions, "sums": sums });
            emit_json(out, &v)?;
            // A diverging sum where all conditions hold is a contradiction.
            Ok(!(conditions.strong() && sums.verdict == SumVerdict::Diverged))
        }
        Command::Train { beta, big_m, n, p, resolution } => {
            let b = parse_beta(beta)?;
            let p = parse_rat(p).context("bad p")?;
            let pq = train_exponent(&b, p)?;
            let q = pq.q().context("q = ∞ on the train line")?;
            let t = schwartz_train(&b, *big_m, *n, p, *resolution)?;
            let bx = SpaceTimeBox::new(0.02, vec![4.0; b.dim()], vec![5; b.dim() + 1])?;
            let r = t.quotient(q, &bx)?;
            emit_json(out, &json!({ "p": p.to_string(), "q": q.to_string(), "blocks": t.blocks, "quotient": r }))?;
            Ok(true)
        }
    }
}

/// `coeff:p1,p2;coeff:…`
fn parse_terms(s: &str, d: usize) -> Result<Vec<Monomial>> {
    s.split(';')
        .map(|term| {
            let (c, pw) = term.split_once(':').context("term needs coeff:powers")?;
            let powers = parse_list(pw, |t| t.parse::<u32>().ok())?;
            if powers.len() != d {
                bail!("term {term:?} has {} powers for d = {d}", powers.len());
            }
            Ok(Monomial { coeff: c.trim().parse()?, powers })
        })
        .collect()
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
