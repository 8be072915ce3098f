//! Batch command-line interface. Each invocation runs one computation and
//! emits machine-readable JSON on stdout (CSV artifacts via `--out`);
//! errors go to stderr as JSON. Exit codes: 0 success, 1 witness not
//! found within budget, 2 validation or domain error.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use crate::catalog;
use crate::classify::{certify_by_atoms, classify, Verdict};
use crate::error::{Error, Result};
use crate::levy;
use crate::product::{
    convergence_margin, validate, CfEvaluator, EvalPoint, ProductSpec, TruncationPolicy,
    ValidatedSpec,
};
use crate::sampler;
use crate::witness::{self, Strategy};

#[derive(Parser)]
#[command(
    name = "zetadist",
    version,
    about = "Polynomial Euler products as compound Poisson laws: evaluate, \
             classify, enumerate jump measures, search for witnesses, sample."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate Z(s) and log Z(s) at s = sigma + i t.
    Eval(EvalArgs),
    /// Evaluate the normalized function f_sigma over a t-grid.
    Cf(CfArgs),
    /// Classify the product's law at sigma by the sign theorems.
    Classify(ClassifyArgs),
    /// Enumerate the truncated jump measure (CSV atoms + JSON sidecar).
    Levy(LevyArgs),
    /// Search for a certified point with |f_sigma| > 1.
    Witness(WitnessArgs),
    /// Draw reproducible samples from the compound Poisson law.
    Sample(SampleArgs),
    /// Cumulants of the law up to total order 4.
    Moments(MomentsArgs),
    /// Inspect the built-in example catalog.
    Catalog(CatalogArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// Product spec as a JSON file.
    #[arg(long, value_name = "FILE")]
    spec: Option<PathBuf>,
    /// Built-in catalog entry name (see `catalog list`).
    #[arg(long, value_name = "NAME")]
    catalog: Option<String>,
    /// Evaluation point, comma-separated decimals. Required with --spec;
    /// defaults to the entry's point with --catalog.
    #[arg(long, value_name = "V[,V...]")]
    sigma: Option<String>,
    /// Shift for the rank_shift entry (moves sigma only); default 1/2.
    #[arg(long, value_name = "A")]
    alpha: Option<f64>,
    /// Prime truncation limit P.
    #[arg(long, value_name = "P")]
    prime_limit: Option<u64>,
    /// Prime-power truncation limit R.
    #[arg(long, value_name = "R")]
    power_limit: Option<u32>,
    /// Target tail tolerance; picks (P, R) to meet it unless overridden.
    #[arg(long, value_name = "E")]
    tol: Option<f64>,
    /// Worker thread count. Affects wall time only, never results.
    #[arg(long, value_name = "N")]
    threads: Option<usize>,
}

#[derive(Args)]
struct EvalArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Imaginary part of s, comma-separated decimals (default: zeros).
    #[arg(long, value_name = "V[,V...]")]
    t: Option<String>,
    /// Also write the JSON report to this file.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CfArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Grid point, comma-separated decimals; repeat for more points.
    #[arg(long, value_name = "V[,V...]", action = clap::ArgAction::Append, required = true)]
    t: Vec<String>,
    /// Write the grid as CSV (t_1..t_d, re, im) to this file.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ClassifyArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Also write the JSON report to this file.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct LevyArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Write atoms as CSV here (sidecar JSON goes to stdout); default:
    /// CSV on stdout.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct WitnessArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Objective-evaluation budget for the search.
    #[arg(long, value_name = "B", default_value_t = 1_000_000)]
    budget: u64,
    /// Candidate generation strategy.
    #[arg(long, value_enum, default_value_t = StrategyArg::Direct)]
    strategy: StrategyArg,
    /// Also write the JSON report to this file.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SampleArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// RNG seed; identical seeds give bit-identical samples.
    #[arg(long, value_name = "S", default_value_t = 0)]
    seed: u64,
    /// Number of samples.
    #[arg(long, value_name = "N", default_value_t = 1000)]
    n: usize,
    /// Write samples as CSV here (sidecar JSON goes to stdout); default:
    /// CSV on stdout.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct MomentsArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Also write the JSON report to this file.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CatalogArgs {
    #[command(subcommand)]
    cmd: CatalogCmd,
}

#[derive(Subcommand)]
enum CatalogCmd {
    /// List entry names with one-line descriptions.
    List,
    /// Show one entry: spec, default sigma, expected classification.
    Show { name: String },
    /// Emit the entry's spec JSON, consumable via --spec.
    Export {
        name: String,
        #[arg(long, value_name = "PATH")]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum StrategyArg {
    /// Grid scan plus golden-section refinement of the objective.
    Direct,
    /// Phase alignment toward the sign targets of negative atoms.
    Kronecker,
}

impl StrategyArg {
    fn to_strategy(self) -> Strategy {
        match self {
            StrategyArg::Direct => Strategy::DirectMax,
            StrategyArg::Kronecker => Strategy::KroneckerTargets,
        }
    }
    fn name(self) -> &'static str {
        match self {
            StrategyArg::Direct => "direct",
            StrategyArg::Kronecker => "kronecker",
        }
    }
}

/// Fully resolved run parameters, embedded in every JSON report.
#[derive(Serialize, Clone)]
struct RunConfig {
    command: &'static str,
    spec_source: SpecSource,
    sigma: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    t: Option<Vec<Vec<f64>>>,
    prime_limit: u64,
    power_limit: u32,
    target_tail_tol: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    alpha: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    n: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    budget: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    strategy: Option<&'static str>,
    #[serde(skip_serializing_if = "Option::is_none")]
    threads: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    out: Option<String>,
}

#[derive(Serialize, Clone)]
struct SpecSource {
    kind: &'static str,
    value: String,
}

struct Resolved {
    vspec: ValidatedSpec,
    sigma: Vec<f64>,
    policy: TruncationPolicy,
    config: RunConfig,
}

pub fn run() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return 0;
            }
            emit_error_json("validation", &e.to_string());
            return 2;
        }
    };
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            emit_error(&e);
            2
        }
    }
}

fn dispatch(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Eval(args) => cmd_eval(args),
        Command::Cf(args) => cmd_cf(args),
        Command::Classify(args) => cmd_classify(args),
        Command::Levy(args) => cmd_levy(args),
        Command::Witness(args) => cmd_witness(args),
        Command::Sample(args) => cmd_sample(args),
        Command::Moments(args) => cmd_moments(args),
        Command::Catalog(args) => cmd_catalog(args),
    }
}

fn emit_error(e: &Error) {
    let mut body = json!({ "kind": e.kind(), "message": e.to_string() });
    if let Error::Validation(violations) = e {
        body["violations"] = serde_json::to_value(violations).unwrap_or(Value::Null);
    }
    eprintln!("{}", json!({ "error": body }));
}

fn emit_error_json(kind: &str, message: &str) {
    eprintln!("{}", json!({ "error": { "kind": kind, "message": message } }));
}

fn parse_point(field: &str, text: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(|part| {
            part.trim().parse::<f64>().map_err(|_| {
                Error::validation(field, format!("{part:?} is not a decimal number"))
            })
        })
        .collect()
}

/// Resolve the spec source, evaluation point, and truncation policy; the
/// returned config carries every resolved value for the report.
fn resolve(command: &'static str, common: &CommonArgs) -> Result<Resolved> {
    let source = match (&common.spec, &common.catalog) {
        (Some(path), None) => SpecSource { kind: "file", value: path.display().to_string() },
        (None, Some(name)) => SpecSource { kind: "catalog", value: name.clone() },
        _ => {
            return Err(Error::validation(
                "spec_source",
                "pass exactly one of --spec FILE or --catalog NAME",
            ))
        }
    };

    let mut alpha_cfg = None;
    let (spec, default_sigma): (ProductSpec, Option<Vec<f64>>) = match &common.catalog {
        Some(name) => {
            let entry = catalog::get(name)?;
            let default = if name == "rank_shift" {
                if common.alpha.is_some() && common.sigma.is_some() {
                    return Err(Error::validation(
                        "alpha",
                        "--alpha and --sigma both fix the evaluation point; pass one",
                    ));
                }
                let alpha = common.alpha.unwrap_or(0.5);
                alpha_cfg = Some(alpha);
                catalog::rank_shift_sigma(alpha)?
            } else {
                if common.alpha.is_some() {
                    return Err(Error::validation(
                        "alpha",
                        "--alpha applies only to --catalog rank_shift",
                    ));
                }
                entry.default_sigma.clone()
            };
            (entry.spec, Some(default))
        }
        None => {
            if common.alpha.is_some() {
                return Err(Error::validation(
                    "alpha",
                    "--alpha applies only to --catalog rank_shift",
                ));
            }
            let path = common.spec.as_ref().expect("source checked above");
            let text = fs::read_to_string(path)?;
            (serde_json::from_str(&text)?, None)
        }
    };

    let sigma = match (&common.sigma, default_sigma) {
        (Some(text), _) => parse_point("sigma", text)?,
        (None, Some(default)) => default,
        (None, None) => {
            return Err(Error::validation("sigma", "--sigma is required with --spec"))
        }
    };

    let vspec = validate(spec)?;
    let margin = convergence_margin(&vspec, &sigma)?;
    let base = match common.tol {
        Some(eps) => TruncationPolicy::for_tolerance(eps, margin, vspec.family_count())?,
        None => TruncationPolicy::default_for_margin(margin)?,
    };
    let policy = TruncationPolicy::new(
        common.prime_limit.unwrap_or(base.prime_limit),
        common.power_limit.unwrap_or(base.power_limit),
        common.tol.unwrap_or(base.target_tail_tol),
    )?;

    let config = RunConfig {
        command,
        spec_source: source,
        sigma: sigma.clone(),
        t: None,
        prime_limit: policy.prime_limit,
        power_limit: policy.power_limit,
        target_tail_tol: policy.target_tail_tol,
        alpha: alpha_cfg,
        seed: None,
        n: None,
        budget: None,
        strategy: None,
        threads: common.threads,
        out: None,
    };
    Ok(Resolved { vspec, sigma, policy, config })
}

/// Run `f` on a dedicated pool when --threads was given; results must not
/// depend on the worker count, only wall time may.
fn with_pool<T: Send>(threads: Option<usize>, f: impl FnOnce() -> Result<T> + Send) -> Result<T> {
    match threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Internal(format!("thread pool: {e}")))?
            .install(f),
        None => f(),
    }
}

fn complex_json(z: num_complex::Complex64) -> Value {
    json!({ "re": z.re, "im": z.im })
}

/// Pretty-print the report to stdout and optionally mirror it to a file.
fn emit_report(report: &Value, out: Option<&Path>) -> Result<()> {
    let text = format!("{}\n", serde_json::to_string_pretty(report)?);
    if let Some(path) = out {
        fs::write(path, &text)?;
    }
    print!("{text}");
    Ok(())
}

fn record_out(config: &mut RunConfig, out: &Option<PathBuf>) {
    config.out = out.as_ref().map(|p| p.display().to_string());
}

fn cmd_eval(args: EvalArgs) -> Result<i32> {
    let mut resolved = resolve("eval", &args.common)?;
    let t = match &args.t {
        Some(text) => parse_point("t", text)?,
        None => vec![0.0; resolved.sigma.len()],
    };
    resolved.config.t = Some(vec![t.clone()]);
    record_out(&mut resolved.config, &args.out);

    let point = EvalPoint { sigma: resolved.sigma.clone(), t };
    let (value, log, tail, margin, prime_count) =
        with_pool(args.common.threads, || {
            let ev = CfEvaluator::new(&resolved.vspec, &resolved.sigma, &resolved.policy)?;
            let log = ev.log_at(&point.t)?;
            let value = crate::product::eval(&resolved.vspec, &point, &resolved.policy)?;
            Ok((value, log, ev.tail(), ev.margin(), ev.prime_count()))
        })?;

    let report = json!({
        "config": resolved.config,
        "value": complex_json(value),
        "log": complex_json(log),
        "tail": tail,
        "margin": margin,
        "prime_count": prime_count,
    });
    emit_report(&report, args.out.as_deref())?;
    Ok(0)
}

fn cmd_cf(args: CfArgs) -> Result<i32> {
    let mut resolved = resolve("cf", &args.common)?;
    let points: Vec<Vec<f64>> =
        args.t.iter().map(|text| parse_point("t", text)).collect::<Result<_>>()?;
    resolved.config.t = Some(points.clone());
    record_out(&mut resolved.config, &args.out);

    let values = with_pool(args.common.threads, || {
        let ev = CfEvaluator::new(&resolved.vspec, &resolved.sigma, &resolved.policy)?;
        points.iter().map(|t| ev.cf(t)).collect::<Result<Vec<_>>>()
    })?;

    if let Some(path) = &args.out {
        let mut w = BufWriter::new(fs::File::create(path)?);
        let d = resolved.sigma.len();
        let header: Vec<String> = (1..=d).map(|j| format!("t_{j}")).collect();
        writeln!(w, "{},re,im", header.join(","))?;
        for (t, z) in points.iter().zip(&values) {
            let coords: Vec<String> = t.iter().map(|x| format!("{x}")).collect();
            writeln!(w, "{},{},{}", coords.join(","), z.re, z.im)?;
        }
        w.flush()?;
    }

    let grid: Vec<Value> = points
        .iter()
        .zip(&values)
        .map(|(t, z)| json!({ "t": t, "re": z.re, "im": z.im }))
        .collect();
    let mut report = json!({ "config": resolved.config, "points": grid });
    if let [z] = values[..] {
        report["re"] = json!(z.re);
        report["im"] = json!(z.im);
    }
    emit_report(&report, None)?;
    Ok(0)
}

fn cmd_classify(args: ClassifyArgs) -> Result<i32> {
    let mut resolved = resolve("classify", &args.common)?;
    record_out(&mut resolved.config, &args.out);

    let (result, certificate) = with_pool(args.common.threads, || {
        let result = classify(&resolved.vspec, &resolved.sigma)?;
        let certificate = if result.verdict == Verdict::OutOfTheoremScope {
            Some(certify_by_atoms(&resolved.vspec, &resolved.sigma, &resolved.policy)?)
        } else {
            None
        };
        Ok((result, certificate))
    })?;

    let mut report = json!({
        "config": resolved.config,
        "verdict": result.verdict,
        "theorem_used": result.theorem_used,
        "offending": result.offending_primes,
        "notes": result.notes,
    });
    if let Some(cert) = certificate {
        report["certificate"] = serde_json::to_value(&cert)?;
    }
    emit_report(&report, args.out.as_deref())?;
    Ok(0)
}

fn cmd_levy(args: LevyArgs) -> Result<i32> {
    let mut resolved = resolve("levy", &args.common)?;
    record_out(&mut resolved.config, &args.out);

    let measure = with_pool(args.common.threads, || {
        levy::enumerate_atoms(&resolved.vspec, &resolved.sigma, &resolved.policy)
    })?;

    match &args.out {
        Some(path) => {
            let mut w = BufWriter::new(fs::File::create(path)?);
            levy::export_csv(&measure, &mut w)?;
            w.flush()?;
            let mut report = levy::sidecar_json(&measure);
            report["config"] = serde_json::to_value(&resolved.config)?;
            emit_report(&report, None)?;
        }
        None => {
            let stdout = std::io::stdout();
            levy::export_csv(&measure, stdout.lock())?;
        }
    }
    Ok(0)
}

fn cmd_witness(args: WitnessArgs) -> Result<i32> {
    let mut resolved = resolve("witness", &args.common)?;
    resolved.config.budget = Some(args.budget);
    resolved.config.strategy = Some(args.strategy.name());
    record_out(&mut resolved.config, &args.out);

    let outcome = with_pool(args.common.threads, || {
        witness::search(
            &resolved.vspec,
            &resolved.sigma,
            args.strategy.to_strategy(),
            args.budget,
            &resolved.policy,
        )
    })?;

    let mut report = serde_json::to_value(&outcome)?;
    report["config"] = serde_json::to_value(&resolved.config)?;
    emit_report(&report, args.out.as_deref())?;
    Ok(if outcome.witness.is_some() { 0 } else { 1 })
}

fn cmd_sample(args: SampleArgs) -> Result<i32> {
    let mut resolved = resolve("sample", &args.common)?;
    resolved.config.seed = Some(args.seed);
    resolved.config.n = Some(args.n);
    record_out(&mut resolved.config, &args.out);

    let batch = with_pool(args.common.threads, || {
        let measure = levy::enumerate_atoms(&resolved.vspec, &resolved.sigma, &resolved.policy)?;
        sampler::sample(&measure, args.seed, args.n)
    })?;

    match &args.out {
        Some(path) => {
            let mut w = BufWriter::new(fs::File::create(path)?);
            sampler::export_csv(&batch, &mut w)?;
            w.flush()?;
            let mut report = sampler::sidecar_json(&batch);
            report["config"] = serde_json::to_value(&resolved.config)?;
            emit_report(&report, None)?;
        }
        None => {
            let stdout = std::io::stdout();
            sampler::export_csv(&batch, stdout.lock())?;
        }
    }
    Ok(0)
}

/// Multi-indices of total order `order` over `d` coordinates, first
/// coordinate descending (deterministic report order).
fn multi_indices(d: usize, order: u32) -> Vec<Vec<u32>> {
    fn rec(pos: usize, remaining: u32, cur: &mut Vec<u32>, acc: &mut Vec<Vec<u32>>) {
        if pos + 1 == cur.len() {
            cur[pos] = remaining;
            acc.push(cur.clone());
            return;
        }
        for v in (0..=remaining).rev() {
            cur[pos] = v;
            rec(pos + 1, remaining - v, cur, acc);
        }
    }
    let mut acc = Vec::new();
    rec(0, order, &mut vec![0; d], &mut acc);
    acc
}

fn cmd_moments(args: MomentsArgs) -> Result<i32> {
    let mut resolved = resolve("moments", &args.common)?;
    record_out(&mut resolved.config, &args.out);

    let (cumulants, rate, omitted_tail) = with_pool(args.common.threads, || {
        let measure = levy::enumerate_atoms(&resolved.vspec, &resolved.sigma, &resolved.policy)?;
        let d = resolved.sigma.len();
        let mut cumulants = Vec::new();
        for order in 1..=4u32 {
            for index in multi_indices(d, order) {
                let value = levy::cumulant(&measure, &index)?;
                cumulants.push(json!({ "order": index, "value": value }));
            }
        }
        Ok((cumulants, levy::total_mass(&measure), measure.omitted_tail))
    })?;

    let report = json!({
        "config": resolved.config,
        "rate": rate,
        "omitted_tail": omitted_tail,
        "cumulants": cumulants,
    });
    emit_report(&report, args.out.as_deref())?;
    Ok(0)
}

fn cmd_catalog(args: CatalogArgs) -> Result<i32> {
    match args.cmd {
        CatalogCmd::List => {
            let entries: Vec<Value> = catalog::list()
                .into_iter()
                .map(|name| {
                    let entry = catalog::get(name).expect("listed entries exist");
                    json!({
                        "name": entry.name,
                        "describes": entry.describes,
                        "expected": entry.expected,
                    })
                })
                .collect();
            emit_report(&json!({ "entries": entries }), None)?;
        }
        CatalogCmd::Show { name } => {
            let entry = catalog::get(&name)?;
            let report = json!({
                "name": entry.name,
                "describes": entry.describes,
                "spec": entry.spec,
                "default_sigma": entry.default_sigma,
                "expected": entry.expected,
                "has_closed_form": entry.closed_form.is_some(),
            });
            emit_report(&report, None)?;
        }
        CatalogCmd::Export { name, out } => {
            let entry = catalog::get(&name)?;
            emit_report(&serde_json::to_value(&entry.spec)?, out.as_deref())?;
        }
    }
    Ok(0)
}
