//! `cpe`: command-line front end for the loss calculus, properness audits,
//! fitting and the convergence harness.
//!
//! Exit codes: 0 success, 1 invalid input, 2 numeric or solver failure,
//! 3 an invariant check failed.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{ArgGroup, Args, Parser, Subcommand, ValueEnum};
use cpe_core::erm::{
    empirical_risk_minimizer_with, estimate_eta, exact_excess_risk, sample, true_risk_minimizer_with, DiscreteProblem,
    FeatureMap, FitOptions, FittedModel, SqMode,
};
use cpe_core::harness::{
    render_report, run_convergence, run_misspecification, three_point_reproduction, write_atomic, ConvergenceConfig,
    Report, ReportFormat,
};
use cpe_core::loss::{composite, cpe_form, lookup, CatalogEntry, CompositeLoss, LinkFunction};
use cpe_core::properness::{
    audit_properness, bregman_divergence, candidate_links, check_disjoint_cover, delta_curve, estimate_modulus,
};
use cpe_core::CpeError;

/// Agreement required between excess risk and the Bregman divergence.
const BREGMAN_TOL: f64 = 1e-8;

#[derive(Parser)]
#[command(name = "cpe", version, about = "Class-probability estimation with proper composite losses")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Conditional risk, optimal risk and excess risk at one (eta, prediction) pair.
    LossEval(LossEvalArgs),
    /// Tabulate the link, the optimal sets and the inverse link over a grid.
    LossTable(LossTableArgs),
    /// Audit properness, strictness and the disjoint-cover condition.
    CheckProperness(CheckPropernessArgs),
    /// Estimate delta(eps) and the modulus omega(t).
    CheckModulus(CheckModulusArgs),
    /// Compare the excess risk with the Bregman divergence of -L*.
    CheckBregman(CheckBregmanArgs),
    /// Fit a linear model on a problem or on a sample drawn from it.
    Fit(FitArgs),
    /// Run a convergence experiment from a config file.
    Converge(ConvergeArgs),
    /// Compare a restricted fit with the Bregman projection of eta.
    Misspec(MisspecArgs),
    /// Squared vs squared hinge on the three-point problem.
    #[command(name = "repro-sec65", visible_alias = "repro-three-point")]
    Repro(ReproArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Form {
    /// The catalog loss with its link (predictions on the link scale).
    Composite,
    /// The loss on [0, 1] with the identity link (predictions are probabilities).
    Cpe,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Mode {
    Truncated,
    Constrained,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

impl From<Format> for ReportFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Csv => ReportFormat::Csv,
            Format::Json => ReportFormat::Json,
        }
    }
}

#[derive(Args)]
#[command(group(ArgGroup::new("prediction").required(true).args(["pred", "raw"])))]
struct LossEvalArgs {
    #[arg(long)]
    loss: String,
    #[arg(long, value_parser = probability)]
    eta: f64,
    /// Predicted probability q; the prediction is psi(q).
    #[arg(long, value_parser = probability)]
    pred: Option<f64>,
    /// Raw prediction v in the loss's prediction space.
    #[arg(long, value_parser = finite)]
    raw: Option<f64>,
    #[arg(long, value_enum, default_value = "composite")]
    form: Form,
}

#[derive(Args)]
struct LossTableArgs {
    #[arg(long)]
    loss: String,
    #[arg(long, default_value = "1e-3", value_parser = grid_step)]
    grid: f64,
    /// CSV destination; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CheckPropernessArgs {
    #[arg(long)]
    loss: String,
    /// Link to audit; defaults to the catalog link, or every candidate link
    /// for losses without one.
    #[arg(long)]
    link: Option<String>,
    #[arg(long, default_value = "1e-3", value_parser = grid_step)]
    grid: f64,
    /// Also estimate delta(eps) for strictly proper links.
    #[arg(long, value_delimiter = ',', value_parser = positive)]
    eps: Vec<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
#[command(group(ArgGroup::new("targets").required(true).multiple(true).args(["eps", "t"])))]
struct CheckModulusArgs {
    #[arg(long)]
    loss: String,
    #[arg(long, value_delimiter = ',', value_parser = positive)]
    eps: Vec<f64>,
    #[arg(long, value_delimiter = ',', value_parser = nonnegative)]
    t: Vec<f64>,
    #[arg(long, default_value = "1e-3", value_parser = grid_step)]
    grid: f64,
    #[arg(long, value_enum, default_value = "cpe")]
    form: Form,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CheckBregmanArgs {
    #[arg(long)]
    loss: String,
    #[arg(long, value_parser = probability)]
    eta: f64,
    #[arg(long, value_parser = probability)]
    pred: f64,
    #[arg(long, value_enum, default_value = "cpe")]
    form: Form,
}

#[derive(Args)]
struct FitArgs {
    /// Problem JSON file.
    #[arg(long)]
    problem: PathBuf,
    #[arg(long)]
    loss: String,
    #[arg(long, value_enum, default_value = "truncated")]
    mode: Mode,
    /// Draw a sample of this size and fit the empirical risk minimizer;
    /// without it the true risk minimizer is fitted.
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    sample: Option<u64>,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Model JSON destination.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ConvergeArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
    /// Repetitions per sample size [default: 200, or the config's value].
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    reps: Option<u64>,
    /// Root seed [default: 42, or the config's value].
    #[arg(long)]
    seed: Option<u64>,
    /// Accept a problem whose eta the model class cannot represent.
    #[arg(long)]
    misspecified: bool,
}

#[derive(Args)]
struct MisspecArgs {
    #[arg(long)]
    problem: PathBuf,
    #[arg(long)]
    loss: String,
    /// Feature map of the restricted class: affine, linear or constant.
    #[arg(long, default_value = "constant")]
    restricted: String,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
}

#[derive(Args)]
struct ReproArgs {
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
}

fn finite(s: &str) -> Result<f64, String> {
    let x: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if x.is_finite() {
        Ok(x)
    } else {
        Err(format!("{s} is not finite"))
    }
}

fn probability(s: &str) -> Result<f64, String> {
    let x = finite(s)?;
    if (0.0..=1.0).contains(&x) {
        Ok(x)
    } else {
        Err(format!("{s} is not in [0, 1]"))
    }
}

fn positive(s: &str) -> Result<f64, String> {
    let x = finite(s)?;
    if x > 0.0 {
        Ok(x)
    } else {
        Err(format!("{s} must be positive"))
    }
}

fn nonnegative(s: &str) -> Result<f64, String> {
    let x = finite(s)?;
    if x >= 0.0 {
        Ok(x)
    } else {
        Err(format!("{s} must be nonnegative"))
    }
}

fn grid_step(s: &str) -> Result<f64, String> {
    let x = positive(s)?;
    if x <= 0.1 {
        Ok(x)
    } else {
        Err(format!("grid step {s} must lie in (0, 0.1]"))
    }
}

enum Failure {
    Core(CpeError),
    Invariant(String),
}

impl From<CpeError> for Failure {
    fn from(e: CpeError) -> Self {
        Failure::Core(e)
    }
}

type CliResult = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Core(e)) => {
            eprintln!("error: {e}");
            let input = e.is_validation() || matches!(e, CpeError::Io { .. } | CpeError::Json { .. });
            ExitCode::from(if input { 1 } else { 2 })
        }
        Err(Failure::Invariant(msg)) => {
            eprintln!("invariant violated: {msg}");
            ExitCode::from(3)
        }
    }
}

fn run(command: Command) -> CliResult {
    match command {
        Command::LossEval(a) => loss_eval(a),
        Command::LossTable(a) => loss_table(a),
        Command::CheckProperness(a) => check_properness(a),
        Command::CheckModulus(a) => check_modulus(a),
        Command::CheckBregman(a) => check_bregman(a),
        Command::Fit(a) => fit(a),
        Command::Converge(a) => converge(a),
        Command::Misspec(a) => misspec(a),
        Command::Repro(a) => repro(a),
    }
}

fn form_of(loss: &str, form: Form) -> Result<CompositeLoss, CpeError> {
    match form {
        Form::Composite => composite(loss),
        Form::Cpe => cpe_form(loss),
    }
}

fn form_name(form: Form) -> &'static str {
    match form {
        Form::Composite => "composite",
        Form::Cpe => "cpe",
    }
}

fn list(xs: &[f64]) -> String {
    let parts: Vec<String> = xs.iter().map(f64::to_string).collect();
    format!("({})", parts.join(", "))
}

fn to_json<T: serde::Serialize>(value: &T) -> Result<String, CpeError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|source| CpeError::Json {
        context: "output".into(),
        source,
    })?;
    text.push('\n');
    Ok(text)
}

fn save(path: &Path, text: &str) -> Result<(), CpeError> {
    write_atomic(path, text.as_bytes())?;
    println!("wrote {}", path.display());
    Ok(())
}

fn emit<R: Report>(report: &R, format: Format, out: Option<&Path>) -> Result<(), CpeError> {
    if let Some(path) = out {
        save(path, &render_report(report, format.into())?)?;
    }
    Ok(())
}

fn loss_eval(a: LossEvalArgs) -> CliResult {
    println!("loss = {} ({})", a.loss, form_name(a.form));
    println!("eta = {}", a.eta);
    let (risk, optimal, excess) = match (a.pred, a.form) {
        (Some(q), form) => {
            let cl = form_of(&a.loss, form)?;
            println!("q = {q}");
            println!("v = {}", cl.predict(q));
            (cl.risk(a.eta, q)?, cl.optimal_risk(a.eta)?, cl.excess_risk(a.eta, q)?)
        }
        (None, form) => {
            let v = a.raw.expect("clap requires --pred or --raw");
            let loss = match form {
                Form::Cpe => cpe_form(&a.loss)?.loss().clone(),
                Form::Composite => lookup(&a.loss)?.loss().clone(),
            };
            loss.space().check(v)?;
            println!("v = {v}");
            (
                loss.conditional_risk(a.eta, v)?,
                loss.optimal_conditional_risk(a.eta)?,
                loss.conditional_excess_risk(a.eta, v)?,
            )
        }
    };
    println!("risk = {}", num(risk));
    println!("optimal risk = {}", num(optimal));
    println!("excess risk = {}", num(excess));
    Ok(())
}

/// Plain decimals, switching to scientific notation below 1e-4.
fn num(x: f64) -> String {
    if x != 0.0 && x.abs() < 1e-4 {
        format!("{x:e}")
    } else {
        x.to_string()
    }
}

fn cell(x: f64) -> String {
    x.to_string()
}

fn loss_table(a: LossTableArgs) -> CliResult {
    let entry = lookup(&a.loss)?;
    let loss = entry.loss();
    let link = entry.link();
    let space = loss.space();
    let (lo, hi) = if space.is_bounded() { (space.lower, space.upper) } else { (-5.0, 5.0) };
    let n = (1.0 / a.grid).round() as usize;
    let mut csv = String::from("eta,psi,vstar_lo,vstar_hi,v,inv_link\n");
    for i in 0..=n {
        let eta = i as f64 / n as f64;
        let set = loss.optimal_set(eta)?;
        let v = lo + (hi - lo) * eta;
        let psi = link.map(|l| cell(l.forward(eta))).unwrap_or_default();
        let inv = link
            .filter(|l| l.has_inverse())
            .and_then(|l| l.inverse(v).ok())
            .map(|p| cell(p.value()))
            .unwrap_or_default();
        csv.push_str(&format!("{},{},{},{},{},{}\n", eta, psi, cell(set.lower), cell(set.upper), v, inv));
    }
    match a.out {
        Some(path) => {
            save(&path, &csv)?;
            println!("rows = {}", n + 1);
        }
        None => print!("{csv}"),
    }
    Ok(())
}

fn check_properness(a: CheckPropernessArgs) -> CliResult {
    let entry = lookup(&a.loss)?;
    let loss = entry.loss().clone();
    let links: Vec<LinkFunction> = match (&a.link, &entry) {
        (Some(name), _) => vec![LinkFunction::by_name(name)?],
        (None, CatalogEntry::Composite(cl)) => vec![cl.link().clone()],
        (None, CatalogEntry::AuditOnly(l)) => candidate_links(l),
    };
    println!("loss = {}", loss.name());
    println!("grid = {}", a.grid);
    let mut audits = Vec::new();
    for link in links {
        let cl = CompositeLoss::new(loss.clone(), link);
        let mut report = audit_properness(&cl, a.grid)?;
        if report.is_strictly_proper && !a.eps.is_empty() {
            report = report.with_deltas(&cl, &a.eps)?;
        }
        println!(
            "link {}: proper = {}, strictly proper = {}, degenerate = {}",
            report.link, report.is_proper, report.is_strictly_proper, report.is_degenerate
        );
        if let Some(w) = &report.witness {
            println!(
                "  witness: {} at eta1 = {}, eta2 = {}, v = {}",
                serde_json::to_value(w.condition).map_err(|source| CpeError::Json {
                    context: "witness".into(),
                    source,
                })?
                .as_str()
                .unwrap_or_default(),
                w.eta1,
                w.eta2,
                w.v
            );
        }
        for d in &report.deltas {
            println!("  delta({}) = {}", d.eps, d.delta);
        }
        audits.push(report);
    }
    let cover = check_disjoint_cover(&loss, a.grid)?;
    println!("cover = {}, disjoint = {}", cover.covers, cover.disjoint);
    if let Some(path) = a.out {
        let doc = serde_json::json!({ "loss": loss.name(), "audits": audits, "cover": cover });
        save(&path, &to_json(&doc)?)?;
    }
    Ok(())
}

fn check_modulus(a: CheckModulusArgs) -> CliResult {
    let cl = form_of(&a.loss, a.form)?;
    if let Some(eps) = a.eps.iter().find(|e| a.grid > **e / 10.0) {
        return Err(CpeError::Invalid(format!("--grid {} must be at most eps/10 = {}", a.grid, eps / 10.0)).into());
    }
    println!("loss = {} ({})", a.loss, form_name(a.form));
    println!("grid = {}", a.grid);
    let deltas = delta_curve(&cl, &a.eps, a.grid)?;
    for d in &deltas {
        println!("eps = {}: delta ≈ {:.6}", d.eps, d.delta);
    }
    let modulus = if a.t.is_empty() { None } else { Some(estimate_modulus(&cl, &a.t, a.grid)?) };
    for p in modulus.iter().flat_map(|m| &m.points) {
        println!("t = {}: omega ≈ {:.6}", p.t, p.omega);
    }
    if let Some(path) = a.out {
        let doc = serde_json::json!({
            "loss": a.loss,
            "form": form_name(a.form),
            "grid_step": a.grid,
            "deltas": deltas,
            "modulus": modulus.map(|m| m.points),
        });
        save(&path, &to_json(&doc)?)?;
    }
    Ok(())
}

fn check_bregman(a: CheckBregmanArgs) -> CliResult {
    let cl = form_of(&a.loss, a.form)?;
    let excess = cl.excess_risk(a.eta, a.pred)?;
    let bregman = bregman_divergence(&cl, a.eta, a.pred)?;
    let gap = (excess - bregman).abs();
    println!("loss = {} ({})", a.loss, form_name(a.form));
    println!("excess risk = {}", num(excess));
    println!("bregman divergence = {}", num(bregman));
    println!("difference = {gap:e}");
    if gap > BREGMAN_TOL * (1.0 + excess.abs()) {
        return Err(Failure::Invariant(format!("excess risk and Bregman divergence differ by {gap:e}")));
    }
    Ok(())
}

fn fit(a: FitArgs) -> CliResult {
    let problem = DiscreteProblem::load(&a.problem)?;
    if a.mode == Mode::Constrained && a.loss != "sq" {
        return Err(CpeError::Invalid("--mode constrained applies to the squared loss only".into()).into());
    }
    let opts = FitOptions {
        sq_mode: match a.mode {
            Mode::Truncated => SqMode::Truncated,
            Mode::Constrained => SqMode::Constrained,
        },
    };
    let model: FittedModel = match a.sample {
        Some(n) => {
            let s = sample(&problem, n as usize, a.seed)?;
            println!("sample = {n} (seed {}, positive fraction {})", a.seed, s.positive_fraction());
            empirical_risk_minimizer_with(&s, &a.loss, problem.feature_map(), opts)?
        }
        None => true_risk_minimizer_with(&problem, &a.loss, opts)?,
    };
    println!("loss = {}", a.loss);
    println!("weights = {}", list(&model.weights));
    for pt in problem.support() {
        let eta_hat = estimate_eta(&model, &pt.x)?.value();
        println!("x = {}: eta = {}, eta_hat = {}", list(&pt.x), pt.eta, eta_hat);
    }
    println!("excess risk = {}", num(exact_excess_risk(&problem, &model)?));
    println!("solver iterations = {}", model.solver_report.iterations);
    if let Some(w) = &model.solver_report.warning {
        eprintln!("warning: {w}");
    }
    if let Some(path) = a.out {
        save(&path, &to_json(&model)?)?;
    }
    Ok(())
}

fn converge(a: ConvergeArgs) -> CliResult {
    let mut cfg = ConvergenceConfig::load(&a.config)?;
    if let Some(r) = a.reps {
        cfg.repetitions = r as usize;
    }
    if let Some(s) = a.seed {
        cfg.root_seed = s;
    }
    cfg.misspecified |= a.misspecified;
    let report = run_convergence(&cfg)?;
    println!("loss = {}", report.loss);
    println!("repetitions = {} (root seed {})", report.repetitions, report.root_seed);
    println!("excess floor = {}", num(report.excess_floor));
    for d in &report.deltas {
        println!("delta({}) = {}", d.eps, d.delta);
    }
    for s in &report.sizes {
        println!(
            "n = {}: fits = {}, failures = {}, mean L1 = {:.6} (se {:.2e}), mean excess risk = {:.6e}",
            s.n,
            s.fits,
            s.failures,
            s.mean_l1,
            s.se_l1(),
            s.mean_excess_risk
        );
    }
    for r in &report.rows {
        println!("n = {}, eps = {}: mean tail = {:.6}", r.n, r.eps, r.mean_tail);
    }
    if let Some(slope) = report.l1_log_log_slope {
        println!("L1 log-log slope = {slope:.4}");
    }
    if let Some(ok) = report.floor_check {
        println!("floor check = {}", if ok { "PASS" } else { "FAIL" });
    }
    println!("markov violations = {}", report.markov_violations);
    println!("monotonicity violations = {}", report.monotonicity_violations);
    emit(&report, a.format, a.out.as_deref())?;
    match report.invariant_violations() {
        0 => Ok(()),
        k => Err(Failure::Invariant(format!("{k} invariant violation(s) in the convergence run"))),
    }
}

fn misspec(a: MisspecArgs) -> CliResult {
    let problem = DiscreteProblem::load(&a.problem)?;
    let restricted = FeatureMap::by_name(&a.restricted)?;
    let report = run_misspecification(&problem, &a.loss, restricted)?;
    println!("loss = {}, restricted = {}", report.loss, restricted.name());
    println!("weights = {}", list(&report.weights));
    for p in &report.points {
        println!(
            "x = {}: eta = {}, eta_hat = {}, oracle = {}",
            list(&p.x),
            p.eta,
            p.eta_hat,
            p.oracle_eta_hat
        );
    }
    println!("excess floor = {}", num(report.excess_floor));
    println!("bregman floor = {}", num(report.bregman_floor));
    println!("well specified = {}", report.well_specified);
    println!("oracle agreement {} (max gap {:e})", pass(report.agrees), report.max_disagreement);
    emit(&report, a.format, a.out.as_deref())?;
    if report.agrees {
        Ok(())
    } else {
        Err(Failure::Invariant("fit disagrees with the Bregman projection".into()))
    }
}

fn pass(ok: bool) -> &'static str {
    if ok {
        "PASS"
    } else {
        "FAIL"
    }
}

fn repro(a: ReproArgs) -> CliResult {
    let r = three_point_reproduction()?;
    println!("x = {}, eta = {}", list(&r.xs), list(&r.etas));
    println!("f0 = (19/39, -17/39) = {}", list(&r.sq_expected_weights));
    println!("sq weights = {} {}", list(&r.sq.weights), pass(r.sq.pass));
    println!("sq eta_hat = {}", list(&r.sq.eta_hat));
    println!("sq tail(0.05) = {}", r.sq_tail_at_0_05);
    println!("sqh weights = {}", list(&r.sqh.weights));
    println!("sqh eta_hat = {}", list(&r.sqh.eta_hat));
    println!("sqh recovery {}", pass(r.sqh.pass));
    println!(
        "claimed sqh weights {}: eta_hat = {} recovers eta: {}",
        list(&r.claimed.weights),
        list(&r.claimed.eta_hat),
        r.claimed.pass
    );
    emit(&r, a.format, a.out.as_deref())?;
    if r.passed() {
        Ok(())
    } else {
        Err(Failure::Invariant("three-point reproduction failed".into()))
    }
}
