use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Parser, Subcommand, ValueEnum};
use nalgebra::DVector;
use sqlift::kl_lab::{
    estimate_exponent, run_first_order, sample_scatter, strict_complementarity, ExponentInputs, Rate, ScatterConfig,
    SolverConfig, StepRule, Variant,
};
use sqlift::polyfunc::phi_residual;
use sqlift::reparam::{classify_first_order, square};
use sqlift::second_order::{correspondence_check, CorrespondenceConfig, CorrespondenceReport};
use sqlift_cli::csv_out::{emit_csv, Field};
use sqlift_cli::{parse_problem_file, CliError, ProblemFile};

#[derive(Parser)]
#[command(name = "sqlift", version, about = "Stationarity certificates and KL experiments for square-lifted polyhedral problems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// First- and second-order report plus the stationarity correspondence check at y.
    Certify {
        file: PathBuf,
        #[arg(long, allow_hyphen_values = true)]
        y: Vector,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
        /// Random directions for the second-order sampling cross-check.
        #[arg(long, default_value_t = 32)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Whether 0 lies in the relative interior of the subdifferential of phi at x.
    StrictComp {
        file: PathBuf,
        #[arg(long, allow_hyphen_values = true)]
        x: Vector,
    },
    /// Empirical KL exponent of the lifted objective at y.
    KlFit {
        file: PathBuf,
        #[arg(long, allow_hyphen_values = true)]
        y: Vector,
        /// KL exponent of phi at y² (falls back to meta.known_alpha).
        #[arg(long)]
        alpha: Option<f64>,
        /// Error-bound exponent of phi (falls back to meta.known_gamma, then 1).
        #[arg(long)]
        gamma: Option<f64>,
        /// Assert strict complementarity instead of testing it.
        #[arg(long)]
        strict: bool,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1e-6)]
        dmin: f64,
        #[arg(long, default_value_t = 1e-2)]
        dmax: f64,
        /// Write the (gap, residual) scatter here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a first-order method and report the observed rate.
    Solve {
        file: PathBuf,
        #[arg(long, value_enum)]
        variant: VariantArg,
        /// Starting point of the lifted variant.
        #[arg(long, allow_hyphen_values = true)]
        y0: Option<Vector>,
        /// Starting point of the original variant.
        #[arg(long, allow_hyphen_values = true)]
        x0: Option<Vector>,
        #[arg(long, default_value_t = 10_000)]
        steps: usize,
        /// Fixed step size instead of the default rule.
        #[arg(long)]
        step: Option<f64>,
        /// Write the per-iteration trace here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the oracle-agreement suite.
    Selftest {
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum VariantArg {
    Original,
    Lifted,
}

/// Comma-separated floats, e.g. `1,-0.5,2e-3`.
#[derive(Clone, Debug)]
struct Vector(Vec<f64>);

impl FromStr for Vector {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        s.split(',')
            .map(|t| t.trim().parse::<f64>().map_err(|e| format!("{t:?}: {e}")))
            .collect::<Result<_, _>>()
            .map(Vector)
    }
}

fn fmt_vec(v: &DVector<f64>) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.6e}")).collect();
    format!("[{}]", parts.join(", "))
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map_or_else(|| "n/a".into(), |x| format!("{x:.6e}"))
}

fn load(file: &Path) -> Result<ProblemFile, CliError> {
    let pf = parse_problem_file(file)?;
    println!("problem: {}", pf.meta.name.as_deref().unwrap_or_else(|| file.to_str().unwrap_or("?")));
    println!("n: {}", pf.problem.dim());
    Ok(pf)
}

fn point(pf: &ProblemFile, name: &str, xs: &[f64]) -> Result<DVector<f64>, CliError> {
    if xs.len() != pf.problem.dim() {
        return Err(CliError::Validation(format!(
            "--{name} has length {}, problem has n = {}",
            xs.len(),
            pf.problem.dim()
        )));
    }
    Ok(DVector::from_column_slice(xs))
}

fn print_correspondence(r: &CorrespondenceReport) {
    println!("support I: {:?}", r.support.active);
    println!("lifted residual: {:.6e}", r.lifted_residual);
    println!("phi residual at y²: {:.6e}", r.phi_residual);
    println!("(a) lifted stationary: {}", r.stationary_for_lifted);
    println!("(b) second-order condition on S_I: {}", r.second_order_nonneg_on_si);
    if let Some(l) = &r.witness_lambda {
        println!("    witness λ: {}", fmt_vec(l));
    }
    if let Some(d) = r.min_sampled_d2 {
        println!("    min sampled d²Φ(y|0)(w), |w| = 1: {d:.6e}");
    }
    println!("(c) phi stationary at y²: {}", r.stationary_for_phi);
    println!("consistent: {}", r.consistent);
}

fn certify(file: &Path, y: &[f64], tol: f64, samples: usize, seed: u64) -> Result<(), CliError> {
    let pf = load(file)?;
    let y = point(&pf, "y", y)?;
    println!("seed: {seed}");
    let first = classify_first_order(&pf.problem, &y, tol)?;
    println!("y² in dom g: {}", first.in_domain);
    println!("min |y_i| on I: {}", fmt_opt(first.min_support_magnitude));
    if !first.in_domain {
        return Err(CliError::Validation("y∘y lies outside dom g".into()));
    }
    let cfg = CorrespondenceConfig { tol, samples, seed };
    match correspondence_check(&pf.problem, &y, &cfg) {
        Ok(r) => {
            print_correspondence(&r);
            Ok(())
        }
        Err(sqlift::Error::InconsistencyDetected(r)) => {
            print_correspondence(&r);
            Err(sqlift::Error::InconsistencyDetected(r).into())
        }
        Err(e) => Err(e.into()),
    }
}

fn strict_comp(file: &Path, x: &[f64]) -> Result<(), CliError> {
    let pf = load(file)?;
    let x = point(&pf, "x", x)?;
    println!("phi residual: {:.6e}", phi_residual(&pf.problem, &x)?);
    println!("strict complementarity: {}", strict_complementarity(&pf.problem, &x)?);
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn kl_fit(
    file: &Path,
    y: &[f64],
    alpha: Option<f64>,
    gamma: Option<f64>,
    strict: bool,
    seed: u64,
    dmin: f64,
    dmax: f64,
    out: Option<&Path>,
) -> Result<(), CliError> {
    let pf = load(file)?;
    let y = point(&pf, "y", y)?;
    let cfg = ScatterConfig {
        delta_min: dmin,
        delta_max: dmax,
        seed,
        ..Default::default()
    };
    println!("seed: {seed}");
    println!("radii: [{dmin:e}, {dmax:e}], {} radii x {} directions", cfg.n_radii, cfg.n_dirs);
    let inputs = match alpha.or(pf.meta.known_alpha) {
        Some(alpha) => {
            let strict = strict || strict_complementarity(&pf.problem, &square(&y))?;
            let gamma = gamma.or(pf.meta.known_gamma).unwrap_or(1.0);
            println!("inputs: alpha = {alpha}, gamma = {gamma}, strict complementarity = {strict}");
            Some(ExponentInputs { alpha, gamma, strict })
        }
        None => None,
    };
    let report = estimate_exponent(&pf.problem, &y, &cfg, inputs)?;
    println!("samples: {}", report.n_samples);
    println!("gap range: [{:.3e}, {:.3e}]", report.gap_range.0, report.gap_range.1);
    println!("nonempty bins: {}", report.bin_minima.len());
    println!("alpha_hat: {:.6}", report.alpha_hat);
    println!("r_squared: {:.6}", report.r_squared);
    println!("predicted: {}", report.predicted.map_or_else(|| "n/a".into(), |p| format!("{p:.6}")));
    if let Some(v) = report.verdict {
        println!("verdict: {}", if v { "agree" } else { "disagree" });
    }
    if let Some(path) = out {
        let rows: Vec<Vec<Field>> = sample_scatter(&pf.problem, &y, &cfg)?
            .iter()
            .map(|s| vec![Field::Float(s.gap), Field::Float(s.residual)])
            .collect();
        emit_csv(path, &["gap", "residual"], &rows)?;
        println!("wrote {} rows to {}", rows.len(), path.display());
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn solve(
    file: &Path,
    variant: VariantArg,
    y0: Option<&[f64]>,
    x0: Option<&[f64]>,
    steps: usize,
    step: Option<f64>,
    out: Option<&Path>,
) -> Result<(), CliError> {
    let pf = load(file)?;
    let (variant, start) = match (variant, y0, x0) {
        (VariantArg::Lifted, Some(y0), None) => (Variant::Lifted, point(&pf, "y0", y0)?),
        (VariantArg::Original, None, Some(x0)) => (Variant::Original, point(&pf, "x0", x0)?),
        (VariantArg::Lifted, _, _) => return Err(CliError::Validation("--variant lifted takes --y0 only".into())),
        (VariantArg::Original, _, _) => return Err(CliError::Validation("--variant original takes --x0 only".into())),
    };
    let cfg = SolverConfig {
        steps,
        step_rule: step.map_or(StepRule::Auto, StepRule::Fixed),
        ..Default::default()
    };
    let trace = run_first_order(&pf.problem, variant, &start, &cfg)?;
    println!("variant: {variant:?}");
    println!("iterations: {}", trace.iterates.len().saturating_sub(1));
    println!("final point: {}", fmt_vec(&trace.final_point));
    if let Some(last) = trace.iterates.last() {
        println!("final gap: {:.6e}", last.gap);
        println!("final residual: {:.6e}", last.residual);
    }
    match trace.rate {
        Some(Rate::Linear { rho, r_squared }) => println!("rate: linear, rho = {rho:.6}, r² = {r_squared:.4}"),
        Some(Rate::Sublinear { power, r_squared }) => {
            println!("rate: sublinear, gap ~ k^-{power:.4}, r² = {r_squared:.4}")
        }
        None => println!("rate: undetermined"),
    }
    if let Some(path) = out {
        let rows: Vec<Vec<Field>> = trace
            .iterates
            .iter()
            .map(|it| vec![Field::Int(it.k as u64), Field::Float(it.gap), Field::Float(it.residual), Field::Float(it.step)])
            .collect();
        emit_csv(path, &["k", "gap", "residual", "step"], &rows)?;
        println!("wrote {} rows to {}", rows.len(), path.display());
    }
    Ok(())
}

fn selftest(seed: u64) -> Result<bool, CliError> {
    println!("seed: {seed}");
    let report = sqlift::oracles::selftest(seed);
    for case in &report.cases {
        println!("{} {}: {}", if case.passed { "PASS" } else { "FAIL" }, case.name, case.detail);
    }
    println!("elapsed: {:.2?}", report.elapsed);
    Ok(report.all_passed())
}

fn run(cli: Cli) -> Result<ExitCode, CliError> {
    match cli.command {
        Command::Certify { file, y, tol, samples, seed } => certify(&file, &y.0, tol, samples, seed)?,
        Command::StrictComp { file, x } => strict_comp(&file, &x.0)?,
        Command::KlFit {
            file,
            y,
            alpha,
            gamma,
            strict,
            seed,
            dmin,
            dmax,
            out,
        } => kl_fit(&file, &y.0, alpha, gamma, strict, seed, dmin, dmax, out.as_deref())?,
        Command::Solve {
            file,
            variant,
            y0,
            x0,
            steps,
            step,
            out,
        } => solve(&file, variant, y0.as_ref().map(|v| v.0.as_slice()), x0.as_ref().map(|v| v.0.as_slice()), steps, step, out.as_deref())?,
        Command::Selftest { seed } => {
            if !selftest(seed)? {
                return Ok(ExitCode::from(5));
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
