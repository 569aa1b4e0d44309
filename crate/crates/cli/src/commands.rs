//! Subcommand implementations.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::str::FromStr;

use frfkit_core::baselines::separate_se_fit;
use frfkit_core::bench::{
    circuit_median_study, convergence_study, equidistant, f_rat, f_rat_beta, sample_random_circuit,
    CircuitSpec, ConvergenceRow, Grid, Method, Target, CIRCUIT_OMEGA_MAX, CIRCUIT_OMEGA_MIN,
};
use frfkit_core::hybrid::{fit_hybrid, fit_kernel_tuned, HybridConfig, SelectionReport};
use frfkit_core::interpolate::TrainingSet;
use frfkit_core::kernels::{KernelKind, Pseudo};
use frfkit_core::Complex64;

use crate::io::{format_num, read_samples, samples_csv};
use crate::model_file::{Model, ModelFile};
use crate::CliError;

/// Branch count of the `circuit:` targets.
pub const CIRCUIT_BRANCHES: usize = 1000;

fn input(msg: impl Into<String>) -> CliError {
    CliError::Input(msg.into())
}

fn parse_f64(s: &str, what: &str) -> Result<f64, CliError> {
    match s.trim().parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(input(format!(
            "{what}: cannot parse {s:?} as a finite number"
        ))),
    }
}

/// `min:max` with `min < max`.
pub fn parse_range(s: &str) -> Result<(f64, f64), CliError> {
    let parts: Vec<&str> = s.split(':').collect();
    let [a, b] = parts[..] else {
        return Err(input(format!("range {s:?}: expected min:max")));
    };
    let (a, b) = (parse_f64(a, "range")?, parse_f64(b, "range")?);
    if a >= b {
        return Err(input(format!("range {s:?}: min must be below max")));
    }
    Ok((a, b))
}

/// `min:max:count`.
pub fn parse_grid(s: &str) -> Result<Grid, CliError> {
    let Some((range, count)) = s.rsplit_once(':') else {
        return Err(input(format!("grid {s:?}: expected min:max:count")));
    };
    let (a, b) = parse_range(range)?;
    let count = count
        .parse::<usize>()
        .map_err(|_| input(format!("grid {s:?}: bad count {count:?}")))?;
    Grid::new(a, b, count).map_err(|e| input(e.to_string()))
}

/// `a..b` (inclusive), `a..b:step` or a comma-separated list.
pub fn parse_n_list(s: &str) -> Result<Vec<usize>, CliError> {
    let num = |t: &str| {
        t.trim()
            .parse::<usize>()
            .map_err(|_| input(format!("--n {s:?}: bad count {t:?}")))
    };
    let list = if let Some((a, rest)) = s.split_once("..") {
        let (b, step) = match rest.split_once(':') {
            Some((b, step)) => (num(b)?, num(step)?),
            None => (num(rest)?, 1),
        };
        let a = num(a)?;
        if step == 0 || a > b {
            return Err(input(format!("--n {s:?}: empty or invalid range")));
        }
        (a..=b).step_by(step).collect()
    } else {
        s.split(',').map(num).collect::<Result<Vec<_>, _>>()?
    };
    if list.is_empty() || list.contains(&0) {
        return Err(input(format!("--n {s:?}: counts must be positive")));
    }
    Ok(list)
}

#[derive(Debug, Clone, PartialEq)]
pub enum TargetSpec {
    Frat,
    FratBeta(f64),
    Circuit { seed: u64, dominant: bool },
    File(PathBuf),
}

impl FromStr for TargetSpec {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        if s == "frat" {
            return Ok(TargetSpec::Frat);
        }
        if let Some(b) = s.strip_prefix("frat-beta:") {
            let beta = parse_f64(b, "frat-beta")?;
            if beta <= 0.0 {
                return Err(input("frat-beta: beta must be positive"));
            }
            return Ok(TargetSpec::FratBeta(beta));
        }
        if let Some(rest) = s.strip_prefix("circuit:") {
            let (seed, dominant) = match rest.split_once(':') {
                Some((seed, "dominant")) => (seed, true),
                Some((_, flag)) => {
                    return Err(input(format!("circuit target: unknown flag {flag:?}")))
                }
                None => (rest, false),
            };
            let seed = seed
                .parse::<u64>()
                .map_err(|_| input(format!("circuit target: bad seed {seed:?}")))?;
            return Ok(TargetSpec::Circuit { seed, dominant });
        }
        if s.ends_with(".csv") {
            return Ok(TargetSpec::File(PathBuf::from(s)));
        }
        Err(input(format!("unknown target {s:?}")))
    }
}

/// An analytic target, ready for sampling.
pub struct AnalyticTarget {
    f: Box<dyn Fn(f64) -> Complex64 + Sync>,
    pub default_range: (f64, f64),
}

impl AnalyticTarget {
    pub fn eval(&self, omega: f64) -> Complex64 {
        (self.f)(omega)
    }
}

impl TargetSpec {
    /// `None` for file targets.
    pub fn analytic(&self) -> Option<AnalyticTarget> {
        match *self {
            TargetSpec::Frat => Some(AnalyticTarget {
                f: Box::new(f_rat),
                default_range: (0.0, 1.0),
            }),
            TargetSpec::FratBeta(beta) => Some(AnalyticTarget {
                f: Box::new(move |w| f_rat_beta(w, beta).expect("beta validated at parse time")),
                default_range: (0.0, 1.0),
            }),
            TargetSpec::Circuit { seed, dominant } => {
                let spec = sample_random_circuit(CIRCUIT_BRANCHES, seed, dominant);
                Some(AnalyticTarget {
                    f: Box::new(move |w| spec.admittance_omega(w)),
                    default_range: (CIRCUIT_OMEGA_MIN, CIRCUIT_OMEGA_MAX),
                })
            }
            TargetSpec::File(_) => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelChoice {
    Szego,
    StableSpline,
    SeSeparate,
}

impl FromStr for KernelChoice {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        match s {
            "szego" => Ok(Self::Szego),
            "stable-spline" => Ok(Self::StableSpline),
            "se-separate" => Ok(Self::SeSeparate),
            _ => Err(input(format!("unknown kernel {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MethodChoice {
    Szego,
    SzegoRat,
    Aaa,
    SeSeparate,
    Chebyshev,
}

impl FromStr for MethodChoice {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        match s {
            "szego" => Ok(Self::Szego),
            "szego-rat" => Ok(Self::SzegoRat),
            "aaa" => Ok(Self::Aaa),
            "se-separate" => Ok(Self::SeSeparate),
            "chebyshev" => Ok(Self::Chebyshev),
            _ => Err(input(format!("unknown method {s:?}"))),
        }
    }
}

impl MethodChoice {
    pub fn method(self, symmetric: bool) -> Method {
        let pseudo = if symmetric {
            Pseudo::Symmetric
        } else {
            Pseudo::Circular
        };
        match self {
            Self::Szego => Method::Szego { pseudo },
            Self::SzegoRat => Method::SzegoRat { pseudo },
            Self::Aaa => Method::Aaa,
            Self::SeSeparate => Method::SeSeparate,
            Self::Chebyshev => Method::Chebyshev,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FitArgs {
    pub kernel: KernelChoice,
    pub symmetric: bool,
    pub hybrid: bool,
    pub seed: u64,
}

pub struct FitOutput {
    pub file: ModelFile,
    /// Human-readable summary for stdout.
    pub summary: String,
}

pub fn fit(ts: &TrainingSet, args: &FitArgs) -> Result<FitOutput, CliError> {
    let mut summary = String::new();
    if args.kernel == KernelChoice::SeSeparate {
        if args.symmetric {
            return Err(input(
                "--kernel se-separate has no pseudo-kernel; drop --symmetric",
            ));
        }
        if args.hybrid {
            return Err(input(
                "--hybrid requires a complex kernel (szego or stable-spline)",
            ));
        }
        let model = separate_se_fit(ts, args.seed)?;
        let scale = ts.max_abs();
        let resid = ts
            .samples()
            .iter()
            .map(|s| (model.predict_omega(s.omega) - s.y).norm())
            .fold(0.0, f64::max);
        let resid = if scale > 0.0 { resid / scale } else { resid };
        let _ = writeln!(summary, "kernel: se-separate");
        let _ = writeln!(
            summary,
            "lengthscale: re {} im {}",
            format_num(model.re.lengthscale),
            format_num(model.im.lengthscale)
        );
        let _ = writeln!(
            summary,
            "sigma2: re {} im {}",
            format_num(model.re.sigma2),
            format_num(model.im.sigma2)
        );
        let _ = writeln!(
            summary,
            "training residual (max, relative): {}",
            format_num(resid)
        );
        return Ok(FitOutput {
            file: ModelFile::from_se_model(&model, ts, args.seed),
            summary,
        });
    }
    let cfg = HybridConfig {
        kernel: if args.kernel == KernelChoice::Szego {
            KernelKind::Szego
        } else {
            KernelKind::StableSpline
        },
        pseudo: if args.symmetric {
            Pseudo::Symmetric
        } else {
            Pseudo::Circular
        },
        seed: args.seed,
        ..Default::default()
    };
    let (model, k, selection) = if args.hybrid {
        let (model, report) = fit_hybrid(ts, &cfg)?;
        (model, report.chosen_k, Some(report))
    } else {
        let (model, hp) = fit_kernel_tuned(ts, &cfg)?;
        (model, hp.k(), None)
    };
    let resid = model.training_residual()?;
    let params = model.pair().params;
    let _ = writeln!(
        summary,
        "kernel: {} ({})",
        cfg.kernel.name(),
        if args.symmetric {
            "symmetric"
        } else {
            "circular"
        }
    );
    let _ = writeln!(summary, "K: {k}");
    let _ = writeln!(summary, "alpha: {}", format_num(params.alpha()));
    let _ = writeln!(summary, "sigma2: {}", format_num(params.sigma2()));
    let _ = writeln!(
        summary,
        "training residual (max, relative): {}",
        format_num(resid)
    );
    if model.is_ill_conditioned() {
        let _ = writeln!(
            summary,
            "warning: condition estimate {:.3e}",
            model.condition()
        );
    }
    Ok(FitOutput {
        file: ModelFile::from_kernel_model(&model, args.seed, selection),
        summary,
    })
}

pub enum Points {
    Grid(Grid),
    At(Vec<f64>),
}

impl Points {
    pub fn values(&self) -> Vec<f64> {
        match self {
            Points::Grid(g) => g.points(),
            Points::At(v) => v.clone(),
        }
    }
}

pub fn predict(model: &Model, points: &Points) -> Result<String, CliError> {
    let rows = points
        .values()
        .into_iter()
        .map(|w| model.predict_omega(w).map(|y| (w, y)))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(samples_csv(rows))
}

#[derive(Debug, Clone)]
pub struct ConvergenceArgs {
    pub method: MethodChoice,
    pub target: TargetSpec,
    pub n_list: Vec<usize>,
    pub range: Option<(f64, f64)>,
    pub seed: u64,
    pub symmetric: bool,
    /// Median over this many circuit realizations (circuit targets only).
    pub realizations: Option<usize>,
}

pub struct ConvergenceOutput {
    /// `N,RMSE` table; failed rows carry `NaN`.
    pub csv: String,
    /// One note per failed row.
    pub notes: Vec<String>,
}

pub fn convergence(args: &ConvergenceArgs) -> Result<ConvergenceOutput, CliError> {
    let method = args.method.method(args.symmetric);
    let rows: Vec<ConvergenceRow> = match (&args.target, args.realizations) {
        (&TargetSpec::Circuit { seed, dominant }, Some(r)) => {
            if r == 0 {
                return Err(input("--realizations must be positive"));
            }
            let (a, b) = args.range.unwrap_or((CIRCUIT_OMEGA_MIN, CIRCUIT_OMEGA_MAX));
            let grid = Grid::standard(a, b).map_err(|e| input(e.to_string()))?;
            circuit_median_study(
                method,
                CIRCUIT_BRANCHES,
                dominant,
                seed,
                r,
                &args.n_list,
                &grid,
            )
        }
        (_, Some(_)) => return Err(input("--realizations needs a circuit target")),
        (TargetSpec::File(path), None) => {
            let table = read_samples(path)?;
            let table = match args.range {
                Some((a, b)) => {
                    let kept = table
                        .samples()
                        .iter()
                        .filter(|s| s.omega >= a && s.omega <= b)
                        .copied()
                        .collect();
                    TrainingSet::new(kept)
                        .map_err(|e| input(format!("{}: {e} within --range", path.display())))?
                }
                None => table,
            };
            let grid = Grid::new(
                table.omega_min(),
                table.omega_max().max(table.omega_min() + 1.0),
                2,
            )
            .map_err(|e| input(e.to_string()))?;
            convergence_study(
                method,
                Target::Table(&table),
                &args.n_list,
                &grid,
                args.seed,
            )
        }
        (spec, None) => {
            let target = spec.analytic().expect("analytic target");
            let (a, b) = args.range.unwrap_or(target.default_range);
            let grid = Grid::standard(a, b).map_err(|e| input(e.to_string()))?;
            let f = |w: f64| target.eval(w);
            convergence_study(method, Target::Function(&f), &args.n_list, &grid, args.seed)
        }
    };
    let mut csv = String::from("N,RMSE\n");
    let mut notes = Vec::new();
    for row in rows {
        let _ = writeln!(
            csv,
            "{},{}",
            row.n,
            format_num(row.rmse.unwrap_or(f64::NAN))
        );
        if let Some(note) = row.note {
            notes.push(format!("N = {}: {note}", row.n));
        }
    }
    Ok(ConvergenceOutput { csv, notes })
}

pub fn generate_circuit(n: usize, seed: u64, dominant: bool) -> Result<String, CliError> {
    if n == 0 {
        return Err(input("--circuit needs at least one branch"));
    }
    let spec: CircuitSpec = sample_random_circuit(n, seed, dominant);
    let mut s = serde_json::to_string_pretty(&spec).expect("circuit spec serializes");
    s.push('\n');
    Ok(s)
}

pub fn generate_samples(
    target: &TargetSpec,
    n: usize,
    range: Option<(f64, f64)>,
) -> Result<String, CliError> {
    let Some(t) = target.analytic() else {
        return Err(input("--samples needs an analytic target"));
    };
    if n == 0 {
        return Err(input("--n must be positive"));
    }
    let (a, b) = range.unwrap_or(t.default_range);
    Ok(samples_csv(
        equidistant(a, b, n).into_iter().map(|w| (w, t.eval(w))),
    ))
}

fn opt_num(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |x| format!("{x:.9e}"))
}

pub fn report(file: &ModelFile) -> Result<String, CliError> {
    let Some(sel) = &file.selection else {
        return Err(input("model has no selection report (fit with --hybrid)"));
    };
    Ok(format_report(sel))
}

pub fn format_report(sel: &SelectionReport) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:>3}  {:>16}  {:>16}  {:>16}  {:>16}  {:>16}",
        "K", "loglik", "eps_LOO", "instability", "eps_LOO,stab", "alpha"
    );
    for r in &sel.per_k {
        let flag = if r.k == sel.chosen_k {
            "  <- chosen"
        } else {
            ""
        };
        let _ = writeln!(
            s,
            "{:>3}  {:>16}  {:>16}  {:>16}  {:>16}  {:>16}{flag}",
            r.k,
            opt_num(r.loglik),
            opt_num(r.eps_loo),
            opt_num(r.instability),
            opt_num(r.eps_loo_stab),
            opt_num(r.hyperparams.as_ref().map(|h| h.alpha())),
        );
    }
    let _ = writeln!(s, "lambda: {:.9e}", sel.lambda);
    let _ = writeln!(s, "chosen K: {}", sel.chosen_k);
    if sel.elimination_trace.is_empty() {
        let _ = writeln!(s, "eliminated poles: none");
    } else {
        let _ = writeln!(s, "eliminated poles (in order):");
        for p in &sel.elimination_trace {
            let _ = writeln!(s, "  {:.9e} {:+.9e}i", p.re, p.im);
        }
    }
    for w in &sel.warnings {
        let _ = writeln!(s, "warning: {w}");
    }
    s
}
