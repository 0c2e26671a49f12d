//! `bpb`: generate instances, run the correction pipelines, verify
//! certificates and sweep success rates.
//!
//! Exit codes: 0 verified, 1 usage or I/O error, 2 precondition rejected,
//! 3 verification failed.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use bpb_core::error::BpbError;
use bpb_core::harness::{
    eta, gen_instance, run_and_verify, sweep_eta, verify, CkCsInstance, Instance, InstanceSpec, Pipeline,
    PredualInstance, RunOptions, Solution, SweepConfig, UcxInstance, VerifyReport,
};
use bpb_core::operator::NormKind;
use bpb_core::partition::{build_partition, PartitionOptions};
use clap::{Args, Parser, Subcommand};

const VERIFIED: u8 = 0;
const REJECTED: u8 = 2;
const UNVERIFIED: u8 = 3;

#[derive(Parser)]
#[command(name = "bpb", version, about = "Constructive Bishop-Phelps-Bollobás corrections on finite function spaces")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a random instance with a prescribed slack.
    Gen(GenArgs),
    /// Correct a kernel C(K) -> C(S) and its starting function.
    #[command(name = "ck-cs")]
    CkCs(CkCsArgs),
    /// Correct an operator C0(L) -> Euclidean space.
    Ucx(RunArgs),
    /// Correct an operator from a finite-dimensional normed space into c0.
    Predual(RunArgs),
    /// Build the averaging projection of a ucx instance.
    Partition(RunArgs),
    /// Success rates over a grid of epsilon, slack and dimensions.
    Sweep(SweepArgs),
    /// Re-verify a solution against its instance.
    Verify(VerifyArgs),
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, value_parser = parse_pipeline)]
    pipeline: Pipeline,
    /// Source dimension n.
    #[arg(long, default_value_t = 4)]
    source_dim: usize,
    /// Target dimension m.
    #[arg(long, default_value_t = 3)]
    target_dim: usize,
    /// Absolute slack 1 - ||T x0||.
    #[arg(long, conflicts_with = "fraction")]
    slack: Option<f64>,
    /// Slack as a fraction of the pipeline threshold at --epsilon.
    #[arg(long)]
    fraction: Option<f64>,
    #[arg(long, default_value_t = 0.5)]
    epsilon: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Source norm exponent for predual instances (a number or "inf").
    #[arg(long, value_parser = parse_norm)]
    source_norm: Option<NormKind>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    /// Instance JSON, tagged with "pipeline" or bare.
    #[arg(long)]
    instance: PathBuf,
    #[arg(long)]
    epsilon: f64,
    #[arg(long, default_value_t = bpb_core::certificate::DEFAULT_TOL)]
    tol: f64,
    /// Output JSON path; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CkCsArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Append a CSV row of the run's parameters and distances.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long, value_parser = parse_pipeline)]
    pipeline: Pipeline,
    /// Comma-separated accuracies.
    #[arg(long, value_delimiter = ',', default_value = "0.25,0.5,1.0")]
    epsilon: Vec<f64>,
    /// Comma-separated slacks as fractions of the threshold.
    #[arg(long, value_delimiter = ',', default_value = "0,0.5,0.9")]
    fractions: Vec<f64>,
    /// Comma-separated NxM source-by-target dimensions.
    #[arg(long, value_delimiter = ',', value_parser = parse_dims, default_value = "2x2,4x4,8x8")]
    dims: Vec<(usize, usize)>,
    #[arg(long, default_value_t = 10)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_parser = parse_norm)]
    source_norm: Option<NormKind>,
    #[arg(long, default_value_t = bpb_core::certificate::DEFAULT_TOL)]
    tol: f64,
    /// Omit the runtime column so repeated sweeps are byte-identical.
    #[arg(long)]
    reproducible: bool,
    /// CSV output path; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long)]
    instance: PathBuf,
    #[arg(long)]
    solution: PathBuf,
    #[arg(long, default_value_t = bpb_core::certificate::DEFAULT_TOL)]
    tol: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_pipeline(s: &str) -> Result<Pipeline, String> {
    s.parse().map_err(|e: BpbError| e.to_string())
}

fn parse_norm(s: &str) -> Result<NormKind, String> {
    if matches!(s, "inf" | "sup" | "max") {
        return Ok(NormKind::Sup);
    }
    let p: f64 = s.parse().map_err(|_| format!("invalid exponent {s:?}"))?;
    NormKind::p(p).map_err(|e| e.to_string())
}

fn parse_dims(s: &str) -> Result<(usize, usize), String> {
    let (n, m) = s.split_once('x').ok_or_else(|| format!("expected NxM, got {s:?}"))?;
    let parse = |v: &str| v.trim().parse::<usize>().map_err(|_| format!("invalid dimension in {s:?}"));
    Ok((parse(n)?, parse(m)?))
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => fs::write(path, text).with_context(|| format!("writing {}", path.display())),
        None => match writeln!(std::io::stdout().lock(), "{text}") {
            Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
            done => Ok(done?),
        },
    }
}

/// Read an instance for `pipeline`, accepting the tagged form or the bare
/// struct of that pipeline.
fn read_instance(path: &Path, pipeline: Pipeline) -> Result<Instance> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let value: serde_json::Value =
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    let instance = if value.get("pipeline").is_some() {
        serde_json::from_value::<Instance>(value)?
    } else {
        match pipeline {
            Pipeline::CkCs => Instance::CkCs(serde_json::from_value::<CkCsInstance>(value)?),
            Pipeline::Ucx => Instance::Ucx(serde_json::from_value::<UcxInstance>(value)?),
            Pipeline::Predual => Instance::Predual(serde_json::from_value::<PredualInstance>(value)?),
        }
    };
    if instance.pipeline() != pipeline {
        bail!("{} holds a {} instance, not {pipeline}", path.display(), instance.pipeline());
    }
    Ok(instance)
}

/// Exit code for a pipeline error: 2 for a rejected precondition, 3 for a
/// failed internal check, otherwise propagated.
fn classify(e: BpbError) -> Result<u8> {
    match e {
        e if e.is_precondition() => {
            eprintln!("rejected: {e}");
            Ok(REJECTED)
        }
        e @ (BpbError::Postcondition { .. } | BpbError::BudgetExhausted { .. }) => {
            eprintln!("failed: {e}");
            Ok(UNVERIFIED)
        }
        e => Err(e.into()),
    }
}

fn report_code(report: &VerifyReport) -> u8 {
    for f in &report.failures {
        eprintln!("verification failure: {f}");
    }
    if report.ok {
        VERIFIED
    } else {
        UNVERIFIED
    }
}

fn gen(args: GenArgs) -> Result<u8> {
    let slack = match (args.slack, args.fraction) {
        (Some(s), _) => s,
        (None, Some(f)) => f * eta(args.pipeline, args.epsilon, &RunOptions::default())?,
        (None, None) => 0.5 * eta(args.pipeline, args.epsilon, &RunOptions::default())?,
    };
    let instance = gen_instance(&InstanceSpec {
        pipeline: args.pipeline,
        source_dim: args.source_dim,
        target_dim: args.target_dim,
        slack,
        seed: args.seed,
        source_norm: args.source_norm,
    })?;
    emit(args.out.as_deref(), &serde_json::to_string_pretty(&instance)?)?;
    Ok(VERIFIED)
}

fn solve(args: &RunArgs, pipeline: Pipeline) -> Result<std::result::Result<(Solution, VerifyReport), u8>> {
    let instance = read_instance(&args.instance, pipeline)?;
    match run_and_verify(&instance, args.epsilon, &RunOptions::with_tol(args.tol)) {
        Ok(done) => Ok(Ok(done)),
        Err(e) => classify(e).map(Err),
    }
}

fn pipeline_cmd(args: RunArgs, pipeline: Pipeline) -> Result<u8> {
    let (solution, report) = match solve(&args, pipeline)? {
        Ok(done) => done,
        Err(code) => return Ok(code),
    };
    emit(args.out.as_deref(), &serde_json::to_string_pretty(&solution)?)?;
    Ok(report_code(&report))
}

const CK_CS_REPORT_HEADER: &str = "epsilon,slack,delta,r,steps,dist_point,dist_operator,final_defect";

fn ck_cs(args: CkCsArgs) -> Result<u8> {
    let (solution, report) = match solve(&args.run, Pipeline::CkCs)? {
        Ok(done) => done,
        Err(code) => return Ok(code),
    };
    emit(args.run.out.as_deref(), &serde_json::to_string_pretty(&solution)?)?;
    if let Some(path) = &args.report {
        let field = |k: &str| solution.ledger.get(k).and_then(|v| v.as_f64()).unwrap_or(f64::NAN);
        let c = &solution.certificate;
        let row = format!(
            "{:.16e},{:.16e},{:.16e},{:.16e},{},{:.16e},{:.16e},{:.16e}",
            solution.epsilon,
            field("slack"),
            field("delta"),
            field("r"),
            solution.steps,
            c.dist_point,
            c.dist_operator,
            field("final_defect")
        );
        let fresh = fs::metadata(path).map(|m| m.len() == 0).unwrap_or(true);
        let mut file = fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .with_context(|| format!("opening {}", path.display()))?;
        if fresh {
            writeln!(file, "{CK_CS_REPORT_HEADER}")?;
        }
        writeln!(file, "{row}")?;
    }
    Ok(report_code(&report))
}

fn partition(args: RunArgs) -> Result<u8> {
    let Instance::Ucx(inst) = read_instance(&args.instance, Pipeline::Ucx)? else {
        unreachable!("read_instance checks the pipeline")
    };
    let (projection, trace) = match build_partition(&inst.operator, &inst.f0, args.epsilon, &PartitionOptions::default())
    {
        Ok(done) => done,
        Err(e) => return classify(e),
    };
    let exact = projection.is_idempotent_exact() && projection.has_unit_rows_exact();
    let out = serde_json::json!({
        "epsilon": args.epsilon,
        "blocks": projection.blocks(),
        "weight": projection.weight().masses(),
        "matrix": projection.matrix(),
        "residual_norm": trace.residual_norm,
        "max_oscillation": trace.max_oscillation,
        "idempotent_exact": exact,
    });
    emit(args.out.as_deref(), &serde_json::to_string_pretty(&out)?)?;
    if exact && trace.residual_norm < args.epsilon && trace.max_oscillation < args.epsilon {
        Ok(VERIFIED)
    } else {
        eprintln!("verification failure: projection does not meet its bounds");
        Ok(UNVERIFIED)
    }
}

fn sweep(args: SweepArgs) -> Result<u8> {
    let report = sweep_eta(&SweepConfig {
        pipeline: args.pipeline,
        epsilons: args.epsilon,
        slack_fractions: args.fractions,
        dims: args.dims,
        trials: args.trials,
        seed: args.seed,
        source_norm: args.source_norm,
        opts: RunOptions::with_tol(args.tol),
    })?;
    let csv = if args.reproducible { report.to_csv_reproducible() } else { report.to_csv() };
    emit(args.out.as_deref(), csv.trim_end())?;
    for ((eps, frac, n, m), cell) in report.summary() {
        eprintln!(
            "epsilon {} fraction {} dims {n}x{m}: {}/{} verified, {} rejected, {} failed",
            f64::from_bits(eps),
            f64::from_bits(frac),
            cell.verified,
            cell.trials,
            cell.rejected,
            cell.failed
        );
    }
    if report.all_below_threshold_verified() && report.successes_within_epsilon() {
        Ok(VERIFIED)
    } else {
        Ok(UNVERIFIED)
    }
}

fn verify_cmd(args: VerifyArgs) -> Result<u8> {
    let text = fs::read_to_string(&args.solution).with_context(|| format!("reading {}", args.solution.display()))?;
    let solution: Solution =
        serde_json::from_str(&text).with_context(|| format!("parsing {}", args.solution.display()))?;
    let instance = read_instance(&args.instance, solution.pipeline)?;
    let report = verify(&instance, &solution, args.tol);
    emit(args.out.as_deref(), &serde_json::to_string_pretty(&report)?)?;
    Ok(report_code(&report))
}

fn dispatch(cli: Cli) -> Result<u8> {
    match cli.command {
        Command::Gen(a) => gen(a),
        Command::CkCs(a) => ck_cs(a),
        Command::Ucx(a) => pipeline_cmd(a, Pipeline::Ucx),
        Command::Predual(a) => pipeline_cmd(a, Pipeline::Predual),
        Command::Partition(a) => partition(a),
        Command::Sweep(a) => sweep(a),
        Command::Verify(a) => verify_cmd(a),
    }
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
