//! Command-line front end. Every run is determined by its parsed
//! arguments, which are echoed into the JSON envelope of the output.

use crate::cone_algebra::{builtin_cone, ConeElement, ConeJson, ConeSpec, Side, TriangularFactor, BUILTIN_NAMES};
use crate::error::{Error, Result};
use crate::geometry::{build_lattice, Region};
use crate::indices::{s_conditions, sharp_range_tube, summarize, ParamSet};
use crate::operator_lab::{
    counterexample_necessary, critical_exponent, okikiolu_params, okikiolu_verify, predicted_exponent,
    scaling_exponent_check, sweep_q, CounterexampleConfig, SweepClass, SweepConfig,
};
use crate::par::{stream_rng, with_threads};
use crate::quadrature::{
    classify_i_alpha_beta, gamma_omega, verify_beta, verify_hermitian_form, verify_integ, verify_j_alpha,
    verify_j_alpha_lower, verify_siegel_integral, Growth, IntegralReport, QuadConfig, SiegelData, SiegelProbe, Verdict,
};
use crate::rational::{format_rat, int, parse_rat, parse_rat_list, to_f64, Rat};
use crate::weights::WeightVector;
use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use serde::Serialize;
use serde_json::{json, Value};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_ASSERTION: i32 = 2;
pub const EXIT_DIVERGENCE: i32 = 3;

#[derive(Parser, Debug, Serialize)]
#[command(name = "conelab", version, about = "Power functions, index ranges and operator norms on homogeneous cones")]
pub struct Cli {
    /// Worker threads (0 = available parallelism).
    #[arg(long, global = true, default_value_t = 0)]
    #[serde(skip)]
    pub threads: usize,
    #[arg(long, global = true, env = "CONELAB_SEED", default_value_t = 1)]
    pub seed: u64,
    /// Write JSON here instead of stdout.
    #[arg(long, global = true)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
    /// Write the CSV mirror of tabular results here (defaults to the `--out` path with a .csv extension).
    #[arg(long, global = true)]
    #[serde(skip)]
    pub csv: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Built-in cones and cone files.
    Cones {
        #[command(subcommand)]
        action: ConesAction,
    },
    /// Exact index ranges for a weight ν.
    Indices(IndicesArgs),
    /// Monte Carlo check of an integral identity.
    Verify(VerifyArgs),
    /// Whitney-type lattice in a Q-box.
    Lattice(LatticeArgs),
    /// Discretized operator-norm experiments.
    Opnorm {
        #[command(subcommand)]
        action: OpnormAction,
    },
    /// Log-divergent pairing at the critical exponent.
    Counterexample(CounterexampleArgs),
}

#[derive(Subcommand, Debug, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConesAction {
    List,
    /// Structure constants of a built-in cone or a JSON cone file.
    Info { name: String },
    /// Cone JSON document.
    Export { name: String },
}

#[derive(Args, Debug, Serialize)]
pub struct IndicesArgs {
    #[arg(long)]
    pub cone: String,
    #[arg(long, allow_hyphen_values = true)]
    pub nu: String,
    #[arg(long, allow_hyphen_values = true)]
    pub mu: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub b: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub q: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub s: Option<String>,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Identity {
    Integ,
    Gamma,
    Beta,
    JAlpha,
    JAlphaLower,
    Form,
    Siegel,
    Sharp,
}

#[derive(Args, Debug, Serialize)]
pub struct VerifyArgs {
    #[arg(value_enum)]
    pub identity: Identity,
    #[arg(long, default_value = "halfline")]
    pub cone: String,
    #[arg(long, allow_hyphen_values = true)]
    pub nu: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub mu: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub alpha: Option<String>,
    /// Scalar log exponent for `sharp`, weight λ for `siegel`.
    #[arg(long, allow_hyphen_values = true)]
    pub beta: Option<String>,
    /// Complex dimension of the half-line Siegel model.
    #[arg(long, default_value_t = 1)]
    pub m: usize,
    #[arg(long, default_value_t = 200_000)]
    pub samples: usize,
    #[arg(long, default_value_t = 0.05)]
    pub tolerance: f64,
}

#[derive(Args, Debug, Serialize)]
pub struct LatticeArgs {
    #[arg(long)]
    pub cone: String,
    #[arg(long, default_value_t = 1.0)]
    pub lambda: f64,
    #[arg(long, default_value_t = 0.125)]
    pub q_lo: f64,
    #[arg(long, default_value_t = 8.0)]
    pub q_hi: f64,
}

#[derive(Subcommand, Debug, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum OpnormAction {
    /// Growth of truncated norms of the Bergman-type operator across q.
    Sweep(SweepArgs),
    /// Explicit Okikiolu test functions for one parameter set.
    Okikiolu(OkikioluArgs),
    /// Homogeneity exponent of the operator under dilations.
    Scaling(ScalingArgs),
}

#[derive(Args, Debug, Serialize)]
pub struct SweepArgs {
    #[arg(long)]
    pub cone: String,
    #[arg(long, allow_hyphen_values = true)]
    pub nu: String,
    #[arg(long, allow_hyphen_values = true)]
    pub q_grid: String,
    #[arg(long, default_value = "4,8,16,32,64")]
    pub levels: String,
    #[arg(long, default_value_t = 1.0)]
    pub spacing: f64,
    /// Monte Carlo draws per fibre entry.
    #[arg(long, default_value_t = 64)]
    pub samples: usize,
}

/// Operator exponents. Without --alpha/--beta the Bergman choice is used;
/// a missing --gamma is balanced by homogeneity.
#[derive(Args, Debug, Serialize)]
pub struct ParamArgs {
    #[arg(long)]
    pub cone: String,
    #[arg(long, allow_hyphen_values = true)]
    pub nu: String,
    #[arg(long, allow_hyphen_values = true)]
    pub mu: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub b: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub alpha: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub beta: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub gamma: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub q: String,
    #[arg(long, allow_hyphen_values = true)]
    pub s: Option<String>,
}

#[derive(Args, Debug, Serialize)]
pub struct OkikioluArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub params: ParamArgs,
    /// Also estimate the Schur test integrals and the discrete norm.
    #[arg(long)]
    pub check: bool,
    #[arg(long, default_value_t = 100_000)]
    pub samples: usize,
    #[arg(long, default_value_t = 1.0)]
    pub lambda: f64,
    #[arg(long, default_value_t = 0.25)]
    pub q_lo: f64,
    #[arg(long, default_value_t = 4.0)]
    pub q_hi: f64,
}

#[derive(Args, Debug, Serialize)]
pub struct ScalingArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub params: ParamArgs,
    #[arg(long, default_value = "1,2,4,8")]
    pub r_grid: String,
    /// Gauss-Legendre nodes per chart coordinate.
    #[arg(long, default_value_t = 6)]
    pub nodes: usize,
}

#[derive(Args, Debug, Serialize)]
pub struct CounterexampleArgs {
    #[arg(long)]
    pub cone: String,
    #[arg(long, allow_hyphen_values = true)]
    pub nu: String,
    /// Defaults to the critical exponent.
    #[arg(long, allow_hyphen_values = true)]
    pub q: Option<String>,
    /// Deepest truncation level.
    #[arg(long, default_value_t = 6)]
    pub levels: u32,
    #[arg(long, default_value_t = 20_000)]
    pub samples: usize,
}

/// Result of one command before serialization.
struct Outcome {
    result: Value,
    csv: Option<String>,
    code: i32,
}

impl Outcome {
    fn ok<T: Serialize>(v: &T) -> Result<Outcome> {
        Ok(Outcome { result: to_value(v)?, csv: None, code: EXIT_OK })
    }
}

fn to_value<T: Serialize>(v: &T) -> Result<Value> {
    serde_json::to_value(v).map_err(|e| Error::Io(e.to_string()))
}

/// Parses `args` (program name first), runs the command and returns the exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let sink: &mut dyn Write = if e.use_stderr() { stderr } else { stdout };
            let _ = sink.write_all(text.as_bytes());
            return code;
        }
    };
    let outcome = with_threads(cli.threads, || execute(&cli));
    match outcome.and_then(|o| emit(&cli, o, stdout)) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            error_code(&e)
        }
    }
}

pub fn error_code(e: &Error) -> i32 {
    match e {
        Error::UnknownCone(_)
        | Error::InvalidSpec(_)
        | Error::Parse(_)
        | Error::LengthMismatch { .. }
        | Error::WeightOutOfRange(_)
        | Error::Precondition(_)
        | Error::Io(_) => EXIT_USAGE,
        Error::DivergenceDetected(_) => EXIT_DIVERGENCE,
        _ => EXIT_ASSERTION,
    }
}

fn emit(cli: &Cli, o: Outcome, stdout: &mut dyn Write) -> Result<i32> {
    let doc = json!({
        "command": command_name(&cli.command),
        "config": to_value(cli)?,
        "result": o.result,
    });
    let mut text = serde_json::to_string_pretty(&doc).map_err(|e| Error::Io(e.to_string()))?;
    text.push('\n');
    match &cli.out {
        Some(path) => write_file(path, &text)?,
        None => stdout.write_all(text.as_bytes()).map_err(|e| Error::Io(e.to_string()))?,
    }
    let csv_path = cli.csv.clone().or_else(|| cli.out.as_ref().map(|p| p.with_extension("csv")));
    if let (Some(csv), Some(path)) = (o.csv, csv_path) {
        write_file(&path, &csv)?;
    }
    Ok(o.code)
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::Cones { .. } => "cones",
        Command::Indices(_) => "indices",
        Command::Verify(_) => "verify",
        Command::Lattice(_) => "lattice",
        Command::Opnorm { action: OpnormAction::Sweep(_) } => "opnorm sweep",
        Command::Opnorm { action: OpnormAction::Okikiolu(_) } => "opnorm okikiolu",
        Command::Opnorm { action: OpnormAction::Scaling(_) } => "opnorm scaling",
        Command::Counterexample(_) => "counterexample",
    }
}

fn execute(cli: &Cli) -> Result<Outcome> {
    let seed = cli.seed;
    match &cli.command {
        Command::Cones { action } => cones(action),
        Command::Indices(a) => indices(a),
        Command::Verify(a) => verify(a, seed),
        Command::Lattice(a) => lattice(a),
        Command::Opnorm { action } => match action {
            OpnormAction::Sweep(a) => sweep(a, seed),
            OpnormAction::Okikiolu(a) => okikiolu(a, seed),
            OpnormAction::Scaling(a) => scaling(a),
        },
        Command::Counterexample(a) => counterexample(a, seed),
    }
}

/// A built-in name or a path to a cone JSON file.
pub fn load_cone(name: &str) -> Result<Arc<ConeSpec>> {
    if BUILTIN_NAMES.contains(&name) || !name.ends_with(".json") {
        return builtin_cone(name);
    }
    let text = std::fs::read_to_string(name).map_err(|e| Error::Io(format!("{name}: {e}")))?;
    let doc: ConeJson = serde_json::from_str(&text).map_err(|e| Error::Parse(format!("{name}: {e}")))?;
    Ok(Arc::new(ConeSpec::from_json(&doc)?))
}

fn weights(text: &str, cone: &ConeSpec) -> Result<Vec<Rat>> {
    let v = parse_rat_list(text)?;
    if v.len() == 1 && cone.rank() > 1 {
        return Ok(vec![v[0].clone(); cone.rank()]);
    }
    if v.len() != cone.rank() {
        return Err(Error::LengthMismatch { expected: cone.rank(), got: v.len() });
    }
    Ok(v)
}

fn opt_weights(text: &Option<String>, cone: &ConeSpec) -> Result<Option<Vec<Rat>>> {
    text.as_deref().map(|t| weights(t, cone)).transpose()
}

fn required(text: &Option<String>, flag: &str) -> Result<String> {
    text.clone().ok_or_else(|| Error::Parse(format!("--{flag} is required here")))
}

#[derive(Serialize)]
struct ConeInfo {
    name: String,
    rank: usize,
    dim: usize,
    ambient: usize,
    block_dims: Vec<usize>,
    m: Vec<usize>,
    n: Vec<usize>,
    tau: Vec<String>,
}

fn cone_info(c: &ConeSpec) -> ConeInfo {
    ConeInfo {
        name: c.name.clone(),
        rank: c.rank(),
        dim: c.dim(),
        ambient: c.ambient(),
        block_dims: c.block_dims().to_vec(),
        m: c.m(),
        n: c.n_col(),
        tau: c.tau_exact().iter().map(format_rat).collect(),
    }
}

fn cones(action: &ConesAction) -> Result<Outcome> {
    match action {
        ConesAction::List => {
            let all = BUILTIN_NAMES.iter().map(|n| builtin_cone(n).map(|c| cone_info(&c))).collect::<Result<Vec<_>>>()?;
            Outcome::ok(&all)
        }
        ConesAction::Info { name } => Outcome::ok(&cone_info(&*load_cone(name)?)),
        ConesAction::Export { name } => Outcome::ok(&load_cone(name)?.to_json()),
    }
}

fn indices(a: &IndicesArgs) -> Result<Outcome> {
    let cone = load_cone(&a.cone)?;
    let nu = weights(&a.nu, &cone)?;
    let mu = opt_weights(&a.mu, &cone)?;
    let b = opt_weights(&a.b, &cone)?;
    let q = a.q.as_deref().map(parse_rat).transpose()?;
    let s = a.s.as_deref().map(parse_rat).transpose()?;
    Outcome::ok(&summarize(&cone, &nu, mu.as_deref(), b.as_deref(), q.as_ref(), s.as_ref())?)
}

/// e, 2e and a seeded random point, on the requested side.
fn default_probes(cone: &Arc<ConeSpec>, side: Side, seed: u64) -> Vec<ConeElement> {
    let e = ConeElement::identity(cone, side);
    let t = TriangularFactor::random(cone, &mut stream_rng(seed, 0xC11), 0.5);
    let x = match side {
        Side::Primal => t.apply_to_identity(),
        Side::Dual => t.dual_apply_to_identity(),
    };
    vec![e.clone(), e.scaled(2.0), x]
}

fn siegel_probes(m: usize) -> Vec<SiegelProbe> {
    let u = |a: f64, b: f64| (0..m).map(|i| if i == 0 { Complex64::new(a, b) } else { Complex64::new(0.0, 0.0) }).collect();
    vec![
        SiegelProbe { y: vec![1.0], u: u(0.0, 0.0) },
        SiegelProbe { y: vec![2.0], u: u(0.5, 0.0) },
        SiegelProbe { y: vec![3.0], u: u(0.5, 0.5) },
    ]
}

fn report_code(rep: &IntegralReport) -> i32 {
    match (rep.verdict, &rep.ladder) {
        (Verdict::Consistent, _) | (Verdict::Divergent, _) => EXIT_OK,
        (Verdict::Inconsistent, Some(_)) => EXIT_DIVERGENCE,
        (Verdict::Inconsistent, None) => EXIT_ASSERTION,
    }
}

fn report_csv(rep: &IntegralReport) -> String {
    let mut out = String::from("probe,ratio,stderr\n");
    for p in &rep.probes {
        let coords: Vec<String> = p.probe.iter().map(|c| format!("{c}")).collect();
        out.push_str(&format!("\"{}\",{},{}\n", coords.join(" "), p.ratio, p.stderr));
    }
    out
}

fn weight(text: &Option<String>, flag: &str, cone: &ConeSpec) -> Result<WeightVector> {
    Ok(WeightVector::exact(weights(&required(text, flag)?, cone)?))
}

fn verify(a: &VerifyArgs, seed: u64) -> Result<Outcome> {
    let cone = load_cone(&a.cone)?;
    let cfg = QuadConfig::default().with_samples(a.samples).with_seed(seed).with_tolerance(a.tolerance);
    let primal = || default_probes(&cone, Side::Primal, seed);
    let rep = match a.identity {
        Identity::Integ => verify_integ(&cone, &weight(&a.nu, "nu", &cone)?, &default_probes(&cone, Side::Dual, seed), &cfg)?,
        Identity::Gamma => {
            let g = gamma_omega(&cone, &weight(&a.nu, "nu", &cone)?, a.samples, seed)?;
            let rel = (g.value.value - g.closed_form).abs() / g.closed_form;
            let ok = rel <= a.tolerance.max(4.0 * g.value.relative_stderr());
            let result = json!({ "gamma": to_value(&g)?, "relative_error": rel, "consistent": ok });
            return Ok(Outcome { result, csv: None, code: if ok { EXIT_OK } else { EXIT_ASSERTION } });
        }
        Identity::Beta => verify_beta(&cone, &weight(&a.mu, "mu", &cone)?, &weight(&a.nu, "nu", &cone)?, &primal(), &cfg)?,
        Identity::JAlpha => verify_j_alpha(&cone, &weight(&a.alpha, "alpha", &cone)?, &primal(), &cfg)?,
        Identity::JAlphaLower => {
            let probes: Vec<ConeElement> = primal()
                .iter()
                .map(|p| {
                    let norm = p.coords.iter().map(|c| c * c).sum::<f64>().sqrt();
                    p.scaled(0.1 / norm)
                })
                .collect();
            verify_j_alpha_lower(&cone, &weight(&a.alpha, "alpha", &cone)?, &probes, &cfg)?
        }
        Identity::Form => {
            let sd = siegel_data(&cone, a.m)?;
            verify_hermitian_form(&sd, &default_probes(&cone, Side::Dual, seed), &cfg)?
        }
        Identity::Siegel => {
            let sd = siegel_data(&cone, a.m)?;
            let lambda = weight(&a.beta, "beta", &cone)?;
            verify_siegel_integral(&sd, &lambda, &siegel_probes(a.m), &cfg)?
        }
        Identity::Sharp => {
            let alpha = weights(&required(&a.alpha, "alpha")?, &cone)?;
            let alpha: Vec<f64> = alpha.iter().map(to_f64).collect();
            let beta = to_f64(&parse_rat(&required(&a.beta, "beta")?)?);
            let rep = classify_i_alpha_beta(&cone, &alpha, beta, a.samples / 10, seed);
            let code = if rep.agree {
                EXIT_OK
            } else if rep.analytic == Growth::Diverges {
                EXIT_DIVERGENCE
            } else {
                EXIT_ASSERTION
            };
            return Ok(Outcome { result: to_value(&rep)?, csv: None, code });
        }
    };
    Ok(Outcome { result: to_value(&rep)?, csv: Some(report_csv(&rep)), code: report_code(&rep) })
}

fn siegel_data(cone: &Arc<ConeSpec>, m: usize) -> Result<SiegelData> {
    if cone.name == "halfline" && m > 0 {
        SiegelData::halfline(m)
    } else if m == 0 {
        Ok(SiegelData::tube(cone))
    } else {
        Err(Error::Precondition("Siegel data with m > 0 is built in for the half-line only".into()))
    }
}

fn lattice(a: &LatticeArgs) -> Result<Outcome> {
    let cone = load_cone(&a.cone)?;
    let lat = build_lattice(&cone, &Region::q_box(a.q_lo, a.q_hi), a.lambda)?;
    let ok = lat.checks.disjoint && lat.checks.covered;
    Ok(Outcome { result: to_value(&lat)?, csv: None, code: if ok { EXIT_OK } else { EXIT_ASSERTION } })
}

fn sweep(a: &SweepArgs, seed: u64) -> Result<Outcome> {
    let cone = load_cone(&a.cone)?;
    let nu = weights(&a.nu, &cone)?;
    let q_grid = parse_rat_list(&a.q_grid)?;
    let levels = a
        .levels
        .split(',')
        .map(|t| t.trim().parse::<u32>().map_err(|e| Error::Parse(format!("level `{t}`: {e}"))))
        .collect::<Result<Vec<_>>>()?;
    let cfg = SweepConfig { levels, spacing: a.spacing, fibre_samples: a.samples, seed, ..SweepConfig::default() };
    let res = sweep_q(&cone, &nu, &q_grid, &cfg)?;
    let range = sharp_range_tube(&cone, &nu)?.range;
    let mut code = EXIT_OK;
    let mut expected = Vec::new();
    for (q, got) in q_grid.iter().zip(&res.classification) {
        let bounded = range.as_ref().is_some_and(|r| r.contains(q));
        let want = if bounded { SweepClass::Saturating } else { SweepClass::Growing };
        if *got != want {
            let c = if bounded { EXIT_ASSERTION } else { EXIT_DIVERGENCE };
            code = code.max(c);
        }
        expected.push(json!({ "q": format_rat(q), "expected": want, "observed": got, "match": *got == want }));
    }
    let result = json!({ "sweep": to_value(&res)?, "ground_truth": expected });
    Ok(Outcome { result, csv: Some(res.to_csv()), code })
}

fn param_set(a: &ParamArgs, cone: &ConeSpec) -> Result<ParamSet> {
    let nu = weights(&a.nu, cone)?;
    let mu = opt_weights(&a.mu, cone)?.unwrap_or_else(|| nu.clone());
    let b = opt_weights(&a.b, cone)?;
    let q = parse_rat(&a.q)?;
    let s = a.s.as_deref().map(parse_rat).transpose()?.unwrap_or_else(|| q.clone());
    match (&a.alpha, &a.beta) {
        (None, None) if a.gamma.is_none() => ParamSet::bergman(cone, &nu, &mu, b.as_deref(), q, s),
        (Some(al), Some(be)) => {
            let b = b.unwrap_or_else(|| vec![int(0); cone.rank()]);
            let mut ps = ParamSet::new(cone, weights(al, cone)?, weights(be, cone)?, nu.clone(), nu, mu, b, (int(2), q, s))?;
            ps.gamma = match &a.gamma {
                Some(g) => weights(g, cone)?,
                None => ps.balanced_gamma(cone),
            };
            Ok(ps)
        }
        _ => Err(Error::Parse("--alpha and --beta go together; --gamma needs both".into())),
    }
}

fn okikiolu(a: &OkikioluArgs, seed: u64) -> Result<Outcome> {
    let cone = load_cone(&a.params.cone)?;
    let ps = param_set(&a.params, &cone)?;
    let params = okikiolu_params(&cone, &ps);
    let conditions = s_conditions(&cone, &ps)?;
    let agree = conditions.satisfied == Some(params.feasible);
    let mut code = if agree { EXIT_OK } else { EXIT_ASSERTION };
    let mut check = Value::Null;
    if a.check && params.feasible {
        let lat = build_lattice(&cone, &Region::q_box(a.q_lo, a.q_hi), a.lambda)?;
        let probes = default_probes(&cone, Side::Primal, seed);
        match okikiolu_verify(&cone, &ps, &params, &probes, Some(&lat), a.samples, seed) {
            Ok(rep) => check = to_value(&rep)?,
            Err(e @ Error::BoundViolated(_)) => {
                check = json!({ "error": e.to_string() });
                code = EXIT_ASSERTION;
            }
            Err(e) => return Err(e),
        }
    }
    let result = json!({
        "params": to_value(&ps)?,
        "okikiolu": to_value(&params)?,
        "s_conditions": to_value(&conditions)?,
        "agree": agree,
        "check": check,
    });
    Ok(Outcome { result, csv: None, code })
}

fn scaling(a: &ScalingArgs) -> Result<Outcome> {
    let cone = load_cone(&a.params.cone)?;
    let ps = param_set(&a.params, &cone)?;
    let r_grid = parse_rat_list(&a.r_grid)?.iter().map(to_f64).collect::<Vec<_>>();
    let rep = scaling_exponent_check(&cone, &ps, &r_grid, a.nodes)?;
    let result = json!({
        "params": to_value(&ps)?,
        "predicted": format_rat(&predicted_exponent(&cone, &ps)),
        "report": to_value(&rep)?,
    });
    Ok(Outcome { result, csv: None, code: if rep.holds { EXIT_OK } else { EXIT_ASSERTION } })
}

fn counterexample(a: &CounterexampleArgs, seed: u64) -> Result<Outcome> {
    let cone = load_cone(&a.cone)?;
    let nu = weights(&a.nu, &cone)?;
    let q = match &a.q {
        Some(t) => parse_rat(t)?,
        None => critical_exponent(&cone, &nu)?,
    };
    let cfg = CounterexampleConfig { max_level: a.levels, samples_per_level: a.samples, seed };
    let rep = counterexample_necessary(&cone, &nu, &q, &cfg)?;
    Ok(Outcome { result: to_value(&rep)?, csv: None, code: if rep.reproduced { EXIT_OK } else { EXIT_DIVERGENCE } })
}
