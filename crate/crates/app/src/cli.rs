//! The `fast` command-line tool.

use std::fs::{self, OpenOptions};
use std::io::Write as _;
use std::net::{IpAddr, SocketAddr};
use std::path::{Path, PathBuf};

use clap::{ArgMatches, Args, CommandFactory, FromArgMatches, Parser, Subcommand};
use fast_core::manifest::{
    bound_report_to_manifest, eval_report_table, eval_report_to_manifest, filter_model_from_manifest,
    filter_model_to_manifest, generator_spec_to_manifest, inverter_from_manifest, inverter_to_manifest,
};
use fast_core::metrics::DEFAULT_K;
use fast_core::mining::DEFAULT_ALPHA;
use fast_core::synthgen::{Nonlinearity, DEFAULT_PREVALENCE};
use fast_core::theory::{check_corollary, verify_theorem_bound, FiniteDistribution};
use fast_core::urf::{CovarianceMode, SvmConfig, DEFAULT_AUGMENT_COUNT, DEFAULT_LAMBDA_REL};

use crate::corpus::Corpus;
use crate::error::{AppError, AppResult};
use crate::marks::Marks;
use crate::repro::{FileDigest, RunRecord};
use crate::service::{serve, AppState};
use crate::session::SessionStore;
use crate::workflow::{evaluate_corpus, fit_model, partition, simulate, FitOptions, LpfChoice, UrfChoice};

#[derive(Debug, Parser)]
#[command(name = "fast", version, about = "Filter generated samples by steering away from user-marked features")]
pub struct Cli {
    /// Run manifest path (default: next to the primary output, `.run.json`).
    #[arg(long, global = true)]
    pub run_manifest: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Draw a labeled corpus from a random synthetic generator.
    Simulate(SimulateArgs),
    /// Fit a filter model from marked corpus rows.
    Fit(FitArgs),
    /// Split a corpus into kept and blocked rows.
    Filter(FilterArgs),
    /// Fit from negative marks alone, mining positives from the prior.
    Mine(MineArgs),
    /// Score a model on a labeled corpus.
    Eval(EvalArgs),
    /// Check the unlearning bound on finite distributions.
    TheoremCheck(TheoremArgs),
    /// Run the session service.
    Serve(ServeArgs),
    /// Rerun a recorded run and compare output digests.
    Replay(ReplayArgs),
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Latent dimension.
    #[arg(long = "d", visible_alias = "latent-dim", default_value_t = 32)]
    pub d: usize,
    /// Data dimension (default: the latent dimension).
    #[arg(long)]
    pub data_dim: Option<usize>,
    #[arg(long, default_value_t = 2000)]
    pub n: usize,
    #[arg(long, default_value_t = DEFAULT_PREVALENCE)]
    pub prevalence: f64,
    /// none, tanh or piecewise_linear.
    #[arg(long, default_value = "none")]
    pub nonlinearity: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "corpus.bin")]
    pub out: PathBuf,
    /// Generator spec manifest (default: `<out>.spec.json`).
    #[arg(long)]
    pub spec_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FeedbackArgs {
    /// Marks file of `sample_id,verdict` lines.
    #[arg(long, conflicts_with_all = ["s_pos", "s_neg"])]
    pub marks: Option<PathBuf>,
    /// Clean rows to mark, drawn from corpus labels when no marks file is given.
    #[arg(long)]
    pub s_pos: Option<usize>,
    /// Undesired rows to mark, drawn from corpus labels when no marks file is given.
    #[arg(long)]
    pub s_neg: Option<usize>,
    /// Where to save sampled marks.
    #[arg(long)]
    pub marks_out: Option<PathBuf>,
}

pub const DEFAULT_MARKS_PER_CLASS: usize = 20;

#[derive(Debug, Args)]
pub struct FitArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    #[command(flatten)]
    pub feedback: FeedbackArgs,
    /// md or svm.
    #[arg(long, default_value = "md")]
    pub urf: String,
    /// implicit or inverted.
    #[arg(long, default_value = "implicit")]
    pub lpf: String,
    #[arg(long)]
    pub augment: bool,
    #[arg(long, default_value_t = DEFAULT_AUGMENT_COUNT)]
    pub augment_count: usize,
    #[arg(long, default_value_t = DEFAULT_LAMBDA_REL)]
    pub lambda_rel: f64,
    /// full or diagonal.
    #[arg(long, default_value = "full")]
    pub covariance: String,
    #[arg(long, default_value_t = DEFAULT_ALPHA)]
    pub alpha: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = SvmConfig::default().penalty)]
    pub svm_c: f64,
    #[arg(long, default_value_t = SvmConfig::default().max_iterations)]
    pub svm_max_iter: usize,
    #[arg(long, default_value_t = SvmConfig::default().tolerance)]
    pub svm_tol: f64,
    /// Ridge penalty of the inverter.
    #[arg(long, default_value_t = 0.0)]
    pub ridge: f64,
    #[arg(long, default_value = "model.json")]
    pub out: PathBuf,
    /// Inverter manifest for the inverted lpf (default: `<out>.inverter.json`).
    #[arg(long)]
    pub inverter_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FilterArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub corpus: PathBuf,
    /// Inverter manifest, required for inverted-lpf models.
    #[arg(long)]
    pub inverter: Option<PathBuf>,
    #[arg(long, default_value = "kept.bin")]
    pub kept: PathBuf,
    #[arg(long, default_value = "blocked.bin")]
    pub blocked: PathBuf,
}

#[derive(Debug, Args)]
pub struct MineArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    /// Marks file; positive marks in it are ignored.
    #[arg(long, conflicts_with = "s_neg")]
    pub marks: Option<PathBuf>,
    /// Undesired rows to mark, drawn from corpus labels when no marks file is given.
    #[arg(long)]
    pub s_neg: Option<usize>,
    #[arg(long, default_value_t = DEFAULT_ALPHA)]
    pub alpha: f64,
    /// Positives to mine (default: the number of negatives).
    #[arg(long)]
    pub count: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// md or svm.
    #[arg(long, default_value = "md")]
    pub urf: String,
    #[arg(long, default_value = "model.json")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Labeled corpus to score.
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub inverter: Option<PathBuf>,
    /// Reference corpus (default: the clean rows of the scored corpus).
    #[arg(long)]
    pub reference: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_K)]
    pub k: usize,
    #[arg(long, default_value = "eval.json")]
    pub out: PathBuf,
    /// Delimited table to append a row to.
    #[arg(long)]
    pub table: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TheoremArgs {
    #[arg(long)]
    pub pxr: PathBuf,
    #[arg(long)]
    pub pr: PathBuf,
    #[arg(long)]
    pub pb: PathBuf,
    #[arg(long)]
    pub pu: PathBuf,
    #[arg(long)]
    pub eps: f64,
    /// Also check the corollary for this budget on the two distances.
    #[arg(long)]
    pub eps_prime: Option<f64>,
    #[arg(long, default_value = "bound.json")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, default_value = "127.0.0.1")]
    pub host: IpAddr,
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
    #[arg(long, default_value = "fast-data")]
    pub data_dir: PathBuf,
    /// Seed for requests that do not name one.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct ReplayArgs {
    /// Run manifest to reproduce.
    #[arg(long)]
    pub manifest: PathBuf,
}

/// Result of one subcommand: the run record plus a failure that should set
/// the exit status after the record is written.
struct Executed {
    record: RunRecord,
    default_manifest: PathBuf,
    failure: Option<AppError>,
}

fn sidecar(path: &Path, suffix: &str) -> PathBuf {
    path.with_extension(suffix)
}

fn digests(paths: &[&Path]) -> AppResult<Vec<FileDigest>> {
    paths.iter().map(|p| FileDigest::of(p)).collect()
}

fn write_text(path: &Path, text: &str) -> AppResult<()> {
    fs::write(path, text).map_err(|e| AppError::io(path, e))
}

fn read_text(path: &Path) -> AppResult<String> {
    fs::read_to_string(path).map_err(|e| AppError::io(path, e))
}

/// Resolved values of every flag of the chosen subcommand, defaults included.
fn resolved_flags(matches: &ArgMatches) -> Vec<(String, String)> {
    let Some((name, sub)) = matches.subcommand() else {
        return Vec::new();
    };
    let command = Cli::command();
    let Some(def) = command.find_subcommand(name) else {
        return Vec::new();
    };
    let mut flags: Vec<(String, String)> = def
        .get_arguments()
        .filter_map(|arg| {
            let id = arg.get_id().as_str();
            let raw = sub.get_raw(id)?;
            let vals: Vec<String> = raw.map(|v| v.to_string_lossy().into_owned()).collect();
            Some((id.to_owned(), vals.join(",")))
        })
        .collect();
    flags.sort();
    flags
}

fn parse_cli(args: &[String]) -> Result<(Cli, ArgMatches), clap::Error> {
    let matches = Cli::command().try_get_matches_from(args)?;
    let cli = Cli::from_arg_matches(&matches)?;
    Ok((cli, matches))
}

/// Runs the tool on `args` (program name first) and returns the exit status.
pub fn run(args: Vec<String>) -> i32 {
    let (cli, matches) = match parse_cli(&args) {
        Ok(parsed) => parsed,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match run_parsed(cli, &matches, &args[1.min(args.len())..]) {
        Ok(()) => 0,
        Err(e) => {
            let line = e.to_string().replace('\n', " ");
            eprintln!("fast: {line}");
            e.exit_code()
        }
    }
}

fn run_parsed(cli: Cli, matches: &ArgMatches, args: &[String]) -> AppResult<()> {
    let flags = resolved_flags(matches);
    if let Command::Serve(a) = &cli.command {
        fs::create_dir_all(&a.data_dir).map_err(|e| AppError::io(&a.data_dir, e))?;
        let record = RunRecord {
            command: "serve".into(),
            args: args.to_vec(),
            flags,
            seed: Some(a.seed),
            inputs: vec![],
            outputs: vec![],
        };
        let path = cli.run_manifest.clone().unwrap_or_else(|| a.data_dir.join("serve.run.json"));
        write_text(&path, &record.to_manifest())?;
        return run_serve(a);
    }
    let executed = execute(&cli.command, args, flags)?;
    let path = cli.run_manifest.clone().unwrap_or(executed.default_manifest);
    write_text(&path, &executed.record.to_manifest())?;
    match executed.failure {
        Some(e) => Err(e),
        None => Ok(()),
    }
}

fn execute(command: &Command, args: &[String], flags: Vec<(String, String)>) -> AppResult<Executed> {
    let name = args.first().cloned().unwrap_or_default();
    let mut executed = match command {
        Command::Simulate(a) => run_simulate(a)?,
        Command::Fit(a) => run_fit(a)?,
        Command::Filter(a) => run_filter(a)?,
        Command::Mine(a) => run_mine(a)?,
        Command::Eval(a) => run_eval(a)?,
        Command::TheoremCheck(a) => run_theorem(a)?,
        Command::Replay(a) => run_replay(a)?,
        Command::Serve(_) => return Err(AppError::Usage("serve cannot run as a batch command".into())),
    };
    executed.record.command = name;
    executed.record.args = args.to_vec();
    executed.record.flags = flags;
    Ok(executed)
}

fn record(seed: Option<u64>, inputs: Vec<FileDigest>, outputs: Vec<FileDigest>) -> RunRecord {
    RunRecord {
        command: String::new(),
        args: Vec::new(),
        flags: Vec::new(),
        seed,
        inputs,
        outputs,
    }
}

fn run_simulate(a: &SimulateArgs) -> AppResult<Executed> {
    let nonlinearity = Nonlinearity::parse(&a.nonlinearity).map_err(|e| AppError::Usage(e.to_string()))?;
    let (spec, corpus) = simulate(a.d, a.data_dim.unwrap_or(a.d), a.n, a.prevalence, nonlinearity, a.seed)?;
    corpus.save(&a.out)?;
    let spec_out = a.spec_out.clone().unwrap_or_else(|| sidecar(&a.out, "spec.json"));
    write_text(&spec_out, &generator_spec_to_manifest(&spec))?;
    let undesired = corpus.labels().map_or(0, |l| l.iter().filter(|x| **x).count());
    println!("wrote {} rows ({undesired} undesired) to {}", corpus.len(), a.out.display());
    Ok(Executed {
        record: record(Some(a.seed), vec![], digests(&[&a.out, &spec_out])?),
        default_manifest: sidecar(&a.out, "run.json"),
        failure: None,
    })
}

/// Marks from a file, or sampled from corpus labels with the given counts.
fn load_marks(
    corpus: &Corpus,
    marks: Option<&Path>,
    s_pos: usize,
    s_neg: usize,
    seed: u64,
    inputs: &mut Vec<FileDigest>,
) -> AppResult<Marks> {
    match marks {
        Some(path) => {
            inputs.push(FileDigest::of(path)?);
            Marks::parse(&read_text(path)?, corpus)
        }
        None => {
            let labels = corpus
                .labels()
                .ok_or_else(|| AppError::Usage("corpus has no labels; pass --marks".into()))?;
            Marks::sample_from_labels(labels, s_pos, s_neg, seed)
        }
    }
}

fn run_fit(a: &FitArgs) -> AppResult<Executed> {
    let opts = FitOptions {
        urf: UrfChoice::parse(&a.urf)?,
        lpf: LpfChoice::parse(&a.lpf)?,
        augment: a.augment,
        augment_count: a.augment_count,
        lambda_rel: a.lambda_rel,
        covariance: CovarianceMode::parse(&a.covariance).map_err(|e| AppError::Usage(e.to_string()))?,
        alpha: a.alpha,
        seed: a.seed,
        svm_penalty: a.svm_c,
        svm_max_iterations: a.svm_max_iter,
        svm_tolerance: a.svm_tol,
        ridge: a.ridge,
        mine_count: None,
    };
    let corpus = Corpus::load(&a.corpus)?;
    let mut inputs = vec![FileDigest::of(&a.corpus)?];
    let fb = &a.feedback;
    let marks = load_marks(
        &corpus,
        fb.marks.as_deref(),
        fb.s_pos.unwrap_or(DEFAULT_MARKS_PER_CLASS),
        fb.s_neg.unwrap_or(DEFAULT_MARKS_PER_CLASS),
        a.seed,
        &mut inputs,
    )?;
    let mut outputs = Vec::new();
    if let Some(path) = &fb.marks_out {
        write_text(path, &marks.to_text())?;
        outputs.push(FileDigest::of(path)?);
    }
    let outcome = fit_model(&corpus, &marks, &opts)?;
    write_text(&a.out, &filter_model_to_manifest(&outcome.model))?;
    outputs.push(FileDigest::of(&a.out)?);
    if let Some(inv) = &outcome.inverter {
        let path = a.inverter_out.clone().unwrap_or_else(|| sidecar(&a.out, "inverter.json"));
        write_text(&path, &inverter_to_manifest(inv))?;
        outputs.push(FileDigest::of(&path)?);
    }
    println!(
        "fitted {} from {} negatives and {} positives; threshold {:.6}",
        outcome.model.direction().method().as_str(),
        outcome.n_negative,
        outcome.n_positive,
        outcome.model.threshold()
    );
    Ok(Executed {
        record: record(Some(a.seed), inputs, outputs),
        default_manifest: sidecar(&a.out, "run.json"),
        failure: None,
    })
}

fn run_mine(a: &MineArgs) -> AppResult<Executed> {
    let opts = FitOptions {
        urf: UrfChoice::parse(&a.urf)?,
        alpha: a.alpha,
        seed: a.seed,
        mine_count: a.count,
        ..FitOptions::default()
    };
    if a.count == Some(0) {
        return Err(AppError::Usage("--count must be at least 1".into()));
    }
    let corpus = Corpus::load(&a.corpus)?;
    let mut inputs = vec![FileDigest::of(&a.corpus)?];
    let marks = load_marks(
        &corpus,
        a.marks.as_deref(),
        0,
        a.s_neg.unwrap_or(DEFAULT_MARKS_PER_CLASS),
        a.seed,
        &mut inputs,
    )?;
    let mut negatives = Marks::new();
    for r in marks.rows_with(crate::marks::Mark::Negative) {
        negatives.set(r, crate::marks::Mark::Negative);
    }
    let outcome = fit_model(&corpus, &negatives, &opts)?;
    write_text(&a.out, &filter_model_to_manifest(&outcome.model))?;
    if let Some(m) = &outcome.mining {
        println!(
            "mined {} of {} positives from {} prior draws; threshold {:.6}",
            m.mined.len(),
            m.requested,
            m.examined,
            outcome.model.threshold()
        );
    }
    Ok(Executed {
        record: record(Some(a.seed), inputs, digests(&[&a.out])?),
        default_manifest: sidecar(&a.out, "run.json"),
        failure: None,
    })
}

fn load_model(model: &Path, inverter: Option<&Path>, inputs: &mut Vec<FileDigest>) -> AppResult<(fast_core::FilterModel, Option<fast_core::lpf::LinearInverter>)> {
    inputs.push(FileDigest::of(model)?);
    let m = filter_model_from_manifest(&read_text(model)?)?;
    let inv = match inverter {
        Some(p) => {
            inputs.push(FileDigest::of(p)?);
            Some(inverter_from_manifest(&read_text(p)?)?)
        }
        None => None,
    };
    Ok((m, inv))
}

fn run_filter(a: &FilterArgs) -> AppResult<Executed> {
    let mut inputs = Vec::new();
    let (model, inverter) = load_model(&a.model, a.inverter.as_deref(), &mut inputs)?;
    let corpus = Corpus::load(&a.corpus)?;
    inputs.push(FileDigest::of(&a.corpus)?);
    if corpus.dim() != model.dim() {
        return Err(AppError::Data(format!(
            "model dimension {} does not match corpus dimension {}",
            model.dim(),
            corpus.dim()
        )));
    }
    let (kept, blocked) = partition(&corpus, &model, inverter.as_ref())?;
    corpus.subset(&kept)?.save(&a.kept)?;
    corpus.subset(&blocked)?.save(&a.blocked)?;
    println!("kept {}, blocked {}", kept.len(), blocked.len());
    Ok(Executed {
        record: record(None, inputs, digests(&[&a.kept, &a.blocked])?),
        default_manifest: sidecar(&a.kept, "run.json"),
        failure: None,
    })
}

fn run_eval(a: &EvalArgs) -> AppResult<Executed> {
    if a.k == 0 {
        return Err(AppError::Usage("--k must be at least 1".into()));
    }
    let mut inputs = Vec::new();
    let (model, inverter) = load_model(&a.model, None, &mut inputs)?;
    let inverter = match &a.inverter {
        Some(p) => {
            inputs.push(FileDigest::of(p)?);
            Some(inverter_from_manifest(&read_text(p)?)?)
        }
        None => inverter,
    };
    let corpus = Corpus::load(&a.corpus)?;
    inputs.push(FileDigest::of(&a.corpus)?);
    let reference = match &a.reference {
        Some(p) => {
            inputs.push(FileDigest::of(p)?);
            Some(Corpus::load(p)?)
        }
        None => None,
    };
    let report = evaluate_corpus(&corpus, &model, inverter.as_ref(), reference.as_ref(), a.k)?;
    write_text(&a.out, &eval_report_to_manifest(&report))?;
    let mut outputs = vec![FileDigest::of(&a.out)?];
    if let Some(table) = &a.table {
        let (header, row) = eval_report_table(&report);
        let fresh = fs::metadata(table).map(|m| m.len() == 0).unwrap_or(true);
        let mut file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(table)
            .map_err(|e| AppError::io(table, e))?;
        if fresh {
            writeln!(file, "{header}").map_err(|e| AppError::io(table, e))?;
        }
        writeln!(file, "{row}").map_err(|e| AppError::io(table, e))?;
        outputs.push(FileDigest::of(table)?);
    }
    println!(
        "recall {:.4}, auc {:.4}, kept {} of {}",
        report.recall, report.auc, report.n_kept, report.n_eval
    );
    Ok(Executed {
        record: record(None, inputs, outputs),
        default_manifest: sidecar(&a.out, "run.json"),
        failure: None,
    })
}

fn run_theorem(a: &TheoremArgs) -> AppResult<Executed> {
    let load = |p: &Path| -> AppResult<FiniteDistribution> { Ok(FiniteDistribution::parse_delimited(&read_text(p)?)?) };
    let (pxr, pr, pb, pu) = (load(&a.pxr)?, load(&a.pr)?, load(&a.pb)?, load(&a.pu)?);
    let inputs = digests(&[&a.pxr, &a.pr, &a.pb, &a.pu])?;
    let report = verify_theorem_bound(&pxr, &pr, &pb, &pu, a.eps)?;
    write_text(&a.out, &bound_report_to_manifest(&report))?;
    println!(
        "bound {}: lhs {:.6e}, rhs {:.6e}, {} events",
        if report.holds { "holds" } else { "violated" },
        report.lhs,
        report.rhs,
        report.events_checked
    );
    if let Some(eps_prime) = a.eps_prime {
        if report.eps1 + report.eps2 <= eps_prime {
            let holds = check_corollary(&pb, &pu, a.eps, eps_prime)?;
            println!("corollary {}", if holds { "holds" } else { "violated" });
        } else {
            println!("corollary not applicable: eps1 + eps2 exceeds eps-prime");
        }
    }
    let failure = (!report.holds).then(|| {
        AppError::Numerical(format!(
            "bound violated on {} of {} events",
            report.violations, report.events_checked
        ))
    });
    Ok(Executed {
        record: record(None, inputs, digests(&[&a.out])?),
        default_manifest: sidecar(&a.out, "run.json"),
        failure,
    })
}

fn run_serve(a: &ServeArgs) -> AppResult<()> {
    let store = SessionStore::new(&a.data_dir)?;
    let state = AppState::new(store, a.seed);
    let addr = SocketAddr::new(a.host, a.port);
    let runtime = tokio::runtime::Runtime::new().map_err(|e| AppError::Usage(format!("cannot start runtime: {e}")))?;
    eprintln!("fast: serving on http://{addr}");
    runtime.block_on(serve(addr, state))
}

fn run_replay(a: &ReplayArgs) -> AppResult<Executed> {
    let recorded = RunRecord::from_manifest(&read_text(&a.manifest)?)?;
    for input in &recorded.inputs {
        let now = FileDigest::of(Path::new(&input.path))?;
        if now.sha256 != input.sha256 {
            return Err(AppError::Data(format!("input {} changed since the recorded run", input.path)));
        }
    }
    let mut argv = vec!["fast".to_owned()];
    argv.extend(recorded.args.iter().cloned());
    let (cli, matches) = parse_cli(&argv).map_err(|e| AppError::Data(format!("recorded arguments no longer parse: {e}")))?;
    if matches!(cli.command, Command::Serve(_) | Command::Replay(_)) {
        return Err(AppError::Usage(format!("cannot replay `{}`", recorded.command)));
    }
    let rerun = execute(&cli.command, &recorded.args, resolved_flags(&matches))?;
    if let Some(e) = rerun.failure {
        return Err(e);
    }
    for (want, got) in recorded.outputs.iter().zip(&rerun.record.outputs) {
        if want.path != got.path || want.sha256 != got.sha256 {
            return Err(AppError::Data(format!("output {} differs from the recorded run", want.path)));
        }
    }
    if recorded.outputs.len() != rerun.record.outputs.len() {
        return Err(AppError::Data("rerun wrote a different set of outputs".into()));
    }
    println!("replayed {}: {} outputs reproduced", recorded.command, recorded.outputs.len());
    let mut inputs = vec![FileDigest::of(&a.manifest)?];
    inputs.extend(recorded.inputs);
    Ok(Executed {
        record: record(recorded.seed, inputs, rerun.record.outputs),
        default_manifest: sidecar(&a.manifest, "replay.json"),
        failure: None,
    })
}
