use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use dualaction::cg_constant::{
    cg_closed_form, estimate_cg_ratio, flow_estimate, gamma_sweep, period_formula, period_formula_beta,
    power_orbit_start, ConstrainedOptions, FlowOptions, RatioOptions,
};
use dualaction::dual_action::registry::EpsilonSpec;
use dualaction::dual_action::{check_existence_hypotheses, HypothesisOptions, ProblemSpec};
use dualaction::gfunc::{ConjugateOptions, GFunctionSpec, NumericalConjugate};
use dualaction::second_order::{solve_phi_laplacian, PhiLaplacianSpec};
use dualaction::{Error, GFunction};
use output::{csv, Artifacts};
use serde_json::json;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

mod output;

#[derive(Parser)]
#[command(name = "dualaction", version, about = "Periodic orbits by the dual action, and the constant C_G")]
struct Cli {
    /// Directory for summary.json, CSV tables and a plot script.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Log progress to stderr (repeat for more detail).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

/// Values that replace the ones in a spec file.
#[derive(clap::Args, Default)]
struct Overrides {
    #[arg(long = "T")]
    period: Option<f64>,
    #[arg(long = "N")]
    n: Option<usize>,
    /// Solve at this single ε instead of the spec's schedule.
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    grad_tol: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum GKind {
    /// `|u₁|^p/p + |u₂|^q/q` on R².
    PowerSum,
    /// `|u|²/2` on R².
    Quadratic,
}

#[derive(clap::Args)]
struct GArgs {
    #[arg(long, value_enum, default_value = "power-sum")]
    g: GKind,
    #[arg(long, default_value_t = 2.0)]
    p: f64,
    /// JSON G-function description; replaces --g and --p.
    #[arg(long)]
    g_spec: Option<PathBuf>,
}

impl GArgs {
    fn build(&self) -> Result<GFunction> {
        if let Some(path) = &self.g_spec {
            let spec: GFunctionSpec = serde_json::from_str(&read(path)?)
                .map_err(Error::from)
                .with_context(|| format!("parsing {}", path.display()))?;
            return Ok(spec.build()?);
        }
        Ok(match self.g {
            GKind::PowerSum => GFunction::symplectic_power(self.p, 1)?,
            GKind::Quadratic => GFunction::half_square(2),
        })
    }

    /// Exponent of the closed forms, when G is one of the built-in families.
    fn exponent(&self) -> Option<f64> {
        match (&self.g_spec, self.g) {
            (Some(_), _) => None,
            (None, GKind::PowerSum) => Some(self.p),
            (None, GKind::Quadratic) => Some(2.0),
        }
    }
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum CgMethodArg {
    Ratio,
    Sweep,
    Flow,
    Closed,
    All,
}

#[derive(Subcommand)]
enum Command {
    /// Periodic orbit of a registry Hamiltonian.
    Solve {
        #[arg(long)]
        spec: PathBuf,
        #[command(flatten)]
        over: Overrides,
    },
    /// Periodic solution of a Φ-Laplacian equation via its Hamiltonian form.
    SolveEl {
        #[arg(long)]
        spec: PathBuf,
        #[command(flatten)]
        over: Overrides,
    },
    /// Estimate C_G(T).
    Cg {
        #[command(flatten)]
        g: GArgs,
        #[arg(long = "T", default_value_t = 1.0)]
        period: f64,
        #[arg(long, value_enum, default_value = "ratio")]
        method: CgMethodArg,
        #[arg(long = "N", default_value_t = 256)]
        n: usize,
        #[arg(long, default_value_t = 8)]
        restarts: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Levels for the constrained sweep.
        #[arg(long, value_delimiter = ',', default_value = "0.5,1,2")]
        gammas: Vec<f64>,
        /// Also report 2 C_G(2T) / C_G(T).
        #[arg(long)]
        scaling: bool,
    },
    /// Compare the closed-form and numerical conjugate of G at a point.
    Conj {
        #[command(flatten)]
        g: GArgs,
        /// One value for every coordinate, or a comma-separated vector.
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true, required = true)]
        at: Vec<f64>,
    },
    /// Check the existence hypotheses of a spec without solving.
    Check {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Periods of u̇ = J∇G(u) and the ratio they give.
    Flow {
        #[command(flatten)]
        g: GArgs,
        /// Run every exponent in the list (power sums only).
        #[arg(long, value_delimiter = ',')]
        p_sweep: Option<Vec<f64>>,
        /// Start point; defaults to the level G = 1 on the first axis.
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        start: Option<Vec<f64>>,
    },
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn parse_spec<T: serde::de::DeserializeOwned>(path: &Path, text: &str) -> Result<T> {
    serde_json::from_str(text).map_err(Error::from).with_context(|| format!("parsing {}", path.display()))
}

fn apply_overrides(
    over: &Overrides,
    period: &mut f64,
    n: &mut usize,
    epsilon: &mut Option<EpsilonSpec>,
    solver: &mut dualaction::dual_action::registry::SolverSpec,
) {
    if let Some(t) = over.period {
        *period = t;
    }
    if let Some(v) = over.n {
        *n = v;
    }
    if let Some(e) = over.epsilon {
        *epsilon = Some(EpsilonSpec::Value(e));
    }
    if over.grad_tol.is_some() {
        solver.grad_tol = over.grad_tol;
    }
    if over.max_iter.is_some() {
        solver.max_iter = over.max_iter;
    }
}

fn solve(spec_path: &Path, over: &Overrides, art: &mut Artifacts) -> Result<()> {
    let mut spec: ProblemSpec = parse_spec(spec_path, &read(spec_path)?)?;
    apply_overrides(over, &mut spec.period, &mut spec.n, &mut spec.epsilon, &mut spec.solver);
    let problem = spec.build()?;
    let report = problem.minimize(None)?;
    art.set("hamiltonian", problem.hamiltonian.name())?;
    art.set("T", spec.period)?;
    art.set("N", spec.n)?;
    art.set("orbit", report.orbit.summary())?;
    art.set("runs", report.runs.iter().map(|r| r.summary()).collect::<Vec<_>>())?;
    art.table("orbit.csv", report.orbit.u.to_csv());
    art.table("dual.csv", report.orbit.v.to_csv());
    Ok(())
}

fn solve_el(spec_path: &Path, over: &Overrides, art: &mut Artifacts) -> Result<()> {
    let mut spec: PhiLaplacianSpec = parse_spec(spec_path, &read(spec_path)?)?;
    apply_overrides(over, &mut spec.period, &mut spec.n, &mut spec.epsilon, &mut spec.solver);
    let (problem, dual) = spec.build()?;
    let sol = solve_phi_laplacian(&problem, &dual)?;
    art.set("phi", problem.phi.describe())?;
    art.set("potential", problem.potential.name())?;
    art.set("T", spec.period)?;
    art.set("N", spec.n)?;
    art.set("solution", sol.summary(&problem))?;
    art.table("q.csv", sol.q.to_csv());
    art.table("z.csv", sol.z.to_csv());
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cg(
    g_args: &GArgs,
    period: f64,
    method: CgMethodArg,
    n: usize,
    restarts: usize,
    seed: u64,
    gammas: &[f64],
    scaling: bool,
    art: &mut Artifacts,
) -> Result<()> {
    let g = g_args.build()?;
    art.set("G", g.describe())?;
    art.set("T", period)?;
    let closed = g_args.exponent().map(cg_closed_form).transpose()?.map(|c| c / period);
    art.set("closed_form", closed)?;
    let wants = |m: CgMethodArg| method == m || method == CgMethodArg::All;
    let mut value = None;
    if wants(CgMethodArg::Ratio) {
        let opts = RatioOptions { n, restarts, seed, check_scaling: scaling, ..RatioOptions::default() };
        let est = estimate_cg_ratio(&g, period, &opts)?;
        art.table("ratio_orbit.csv", est.certificate_orbit.to_csv());
        value = value.or(Some(est.value));
        art.set("ratio", est)?;
    }
    if wants(CgMethodArg::Sweep) {
        let opts = ConstrainedOptions { n: n.min(128), seed, restarts: restarts.clamp(1, 4), ..Default::default() };
        let (est, sols) = gamma_sweep(&g, gammas, period, &opts)?;
        art.table("gamma_sweep.csv", csv(&["gamma", "A_over_gamma"], est.gamma_record.iter().map(|&(a, b)| vec![a, b])));
        value = value.or(Some(est.value));
        art.set("sweep", json!({ "estimate": est, "solutions": sols }))?;
    }
    if wants(CgMethodArg::Flow) {
        let u0 = match g_args.exponent() {
            Some(p) => power_orbit_start(p)?,
            None => first_axis(g.dim()),
        };
        let (est, res) = flow_estimate(&g, &u0, &FlowOptions::default())?;
        art.table("flow_orbit.csv", res.orbit.u.to_csv());
        let at_t = est.value / period;
        value = value.or(Some(at_t));
        art.set("flow", json!({ "value": at_t, "C_G_1": est.value, "orbit": res }))?;
    }
    if wants(CgMethodArg::Closed) {
        if closed.is_none() {
            bail!(Error::Unsupported("no closed form for a G given by --g-spec".into()));
        }
        value = value.or(closed);
    }
    art.set("value", value)?;
    Ok(())
}

fn first_axis(dim: usize) -> Vec<f64> {
    let mut u = vec![0.0; dim];
    u[0] = 1.0;
    u
}

/// Agreement threshold between the two conjugate evaluations.
const CONJ_AGREE: f64 = 1e-6;

fn conj(g_args: &GArgs, at: &[f64], art: &mut Artifacts) -> Result<bool> {
    let g = g_args.build()?;
    let v = match at.len() {
        1 => vec![at[0]; g.dim()],
        _ => at.to_vec(),
    };
    if v.len() != g.dim() {
        bail!(Error::DimensionMismatch { expected: g.dim(), got: v.len() });
    }
    let closed = g.conjugate()?;
    let point = NumericalConjugate::new(g.clone(), ConjugateOptions::default()).solve(&v)?;
    let (c, nv) = (closed.evaluate(&v)?, point.value);
    let diff = (c - nv).abs();
    art.set("G", g.describe())?;
    art.set("G_star", closed.describe())?;
    art.set("at", &v)?;
    art.set("closed_form", c)?;
    art.set("numerical", nv)?;
    art.set("difference", diff)?;
    art.set("inner_iterations", point.iterations)?;
    art.set("inner_residual", point.residual)?;
    art.set("agree", diff <= CONJ_AGREE)?;
    Ok(diff <= CONJ_AGREE)
}

fn check(spec_path: &Path, seed: u64, art: &mut Artifacts) -> Result<bool> {
    let text = read(spec_path)?;
    let value: serde_json::Value = parse_spec(spec_path, &text)?;
    let mut opts = HypothesisOptions::default();
    opts.samples = opts.samples.with_seed(seed);
    let report = if value.get("phi").is_some() {
        let spec: PhiLaplacianSpec = parse_spec(spec_path, &text)?;
        let (problem, _) = spec.build()?;
        art.set("Lambda", problem.big_lambda)?;
        art.set("cg", problem.cg)?;
        problem.check_hypotheses(&opts)?
    } else {
        let spec: ProblemSpec = parse_spec(spec_path, &text)?;
        let problem = spec.build()?;
        let cg_star = problem.cg_star.unwrap_or(2.0);
        check_existence_hypotheses(&problem.hamiltonian, problem.period, cg_star, &opts)?
    };
    art.set("pass", report.pass)?;
    art.set("failures", report.failures())?;
    art.set("report", &report)?;
    if !report.pass {
        eprintln!("error: {}", report.summary());
    }
    Ok(report.pass)
}

fn flow(g_args: &GArgs, p_sweep: Option<&[f64]>, start: Option<&[f64]>, art: &mut Artifacts) -> Result<()> {
    let opts = FlowOptions::default();
    let mut rows = Vec::new();
    let mut runs = Vec::new();
    let exponents: Vec<Option<f64>> = match p_sweep {
        Some(ps) => {
            if g_args.g_spec.is_some() || !matches!(g_args.g, GKind::PowerSum) {
                bail!(Error::InvalidParameter("--p-sweep needs --g power-sum".into()));
            }
            ps.iter().copied().map(Some).collect()
        }
        None => vec![g_args.exponent()],
    };
    for p in exponents {
        let g = match p {
            Some(p) if g_args.g_spec.is_none() && matches!(g_args.g, GKind::PowerSum) => GFunction::symplectic_power(p, 1)?,
            _ => g_args.build()?,
        };
        let u0 = match (start, p) {
            (Some(s), _) => s.to_vec(),
            (None, Some(p)) => power_orbit_start(p)?,
            (None, None) => first_axis(g.dim()),
        };
        let (est, res) = flow_estimate(&g, &u0, &opts)?;
        let closed = p.map(|p| -> Result<_> {
            Ok(json!({
                "C_G": cg_closed_form(p)?,
                "T_p": period_formula(p)?,
                "T_p_beta": period_formula_beta(p)?,
            }))
        });
        runs.push(json!({
            "p": p,
            "C_G": est.value,
            "T_u": res.orbit.period,
            "energy_drift": res.energy_drift,
            "return_error": res.return_error,
            "closed_form": closed.transpose()?,
        }));
        rows.push(vec![p.unwrap_or(f64::NAN), est.value, res.orbit.period]);
        if runs.len() == 1 {
            art.table("flow_orbit.csv", res.orbit.u.to_csv());
        }
    }
    art.table("flow_sweep.csv", csv(&["p", "C_G", "T_p"], rows));
    art.set("runs", runs)?;
    Ok(())
}

/// 2 for failed hypotheses, 3 when a solver did not converge, 1 otherwise.
fn exit_code(err: &anyhow::Error) -> u8 {
    fn classify(e: &Error) -> u8 {
        match e {
            Error::HypothesisFailure(_) => 2,
            Error::ConjugateAtTime { source, .. } => classify(source),
            Error::MaxIterations { .. }
            | Error::LineSearchFailure { .. }
            | Error::DescentFailure(_)
            | Error::ConjugateNonConvergence { .. }
            | Error::BracketFailure(_)
            | Error::UnboundedRatio(_)
            | Error::ConstraintInfeasible(_)
            | Error::MultiplierSign(_)
            | Error::PeriodNotDetected { .. }
            | Error::IntegratorDrift { .. } => 3,
            _ => 1,
        }
    }
    err.downcast_ref::<Error>().map_or(1, classify)
}

fn init_threads() -> Result<()> {
    let Ok(var) = std::env::var("DUAL_ACTION_THREADS") else { return Ok(()) };
    let n: usize = var
        .trim()
        .parse()
        .with_context(|| format!("DUAL_ACTION_THREADS must be a positive integer, got `{var}`"))?;
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    Ok(())
}

fn run(cli: &Cli) -> Result<ExitCode> {
    init_threads()?;
    let out = cli.out.as_deref();
    let (mut art, ok) = match &cli.command {
        Command::Solve { spec, over } => {
            let mut a = Artifacts::new("solve");
            solve(spec, over, &mut a)?;
            (a, true)
        }
        Command::SolveEl { spec, over } => {
            let mut a = Artifacts::new("solve-el");
            solve_el(spec, over, &mut a)?;
            (a, true)
        }
        Command::Cg { g, period, method, n, restarts, seed, gammas, scaling } => {
            let mut a = Artifacts::new("cg");
            cg(g, *period, *method, *n, *restarts, *seed, gammas, *scaling, &mut a)?;
            (a, true)
        }
        Command::Conj { g, at } => {
            let mut a = Artifacts::new("conj");
            let ok = conj(g, at, &mut a)?;
            (a, ok)
        }
        Command::Check { spec, seed } => {
            let mut a = Artifacts::new("check");
            let ok = check(spec, *seed, &mut a)?;
            return finish(a, out, if ok { 0 } else { 2 });
        }
        Command::Flow { g, p_sweep, start } => {
            let mut a = Artifacts::new("flow");
            flow(g, p_sweep.as_deref(), start.as_deref(), &mut a)?;
            (a, true)
        }
    };
    if !ok {
        eprintln!("error: closed-form and numerical conjugates differ by more than {CONJ_AGREE:e}");
    }
    art.set("ok", ok)?;
    finish(art, out, if ok { 0 } else { 3 })
}

fn finish(art: Artifacts, out: Option<&Path>, code: u8) -> Result<ExitCode> {
    art.emit(out)?;
    Ok(ExitCode::from(code))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
