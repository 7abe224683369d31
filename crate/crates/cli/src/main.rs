use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Parser, Subcommand, ValueEnum};

use pairgen_core::backend::{ChatBackend, LiveBackend, ScriptedBackend, ScriptedTranscript};
use pairgen_core::eval::{
    load_manual_records, load_problems, pass_at_k, render_bench_report, render_manual_report,
    run_benchmark, BackendGenerator, BenchOptions, CanonicalGenerator, EchoOracleSandbox,
    EmptyGenerator, Generator, PipelineGenerator, ResultSink, Sandbox, SubprocessSandbox,
};
use pairgen_core::orchestrator::Orchestrator;
use pairgen_core::prompt::TemplateSet;
use pairgen_core::{ProjectDescription, RunConfig};

const RESULTS_FILE: &str = "results.jsonl";
const REPORT_FILE: &str = "report.json";
const SANDBOX_TIMEOUT: Duration = Duration::from_secs(10);

#[derive(Debug, Parser)]
#[command(name = "pairgen", version, about = "Multi-agent code generation and pass@k evaluation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum BackendKind {
    Live,
    Scripted,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum GeneratorKind {
    Canonical,
    Empty,
    Pipeline,
    Backend,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SandboxKind {
    Echo,
    Subprocess,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a multi-module project from a plain-text description.
    Generate {
        #[arg(long)]
        project: PathBuf,
        /// TOML run configuration; defaults apply when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output directory; overrides `output_dir` from the config.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = BackendKind::Live)]
        backend: BackendKind,
        /// JSON transcript replayed by the scripted backend.
        #[arg(long)]
        transcript: Option<PathBuf>,
        /// Allow writing into a non-empty output directory.
        #[arg(long)]
        force: bool,
    },
    /// Evaluate a generator on a JSONL problem suite.
    Bench {
        #[arg(long)]
        problems: PathBuf,
        #[arg(long, value_enum)]
        generator: GeneratorKind,
        /// Samples per problem.
        #[arg(long, default_value_t = 1)]
        n: usize,
        /// Comma-separated k values.
        #[arg(long, value_delimiter = ',', default_value = "1")]
        k: Vec<usize>,
        #[arg(long, value_enum, default_value_t = SandboxKind::Echo)]
        sandbox: SandboxKind,
        /// Directory for results.jsonl and report.json.
        #[arg(long)]
        out: PathBuf,
        /// Problems evaluated concurrently.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        /// Run configuration for the pipeline and backend generators.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = BackendKind::Live)]
        backend: BackendKind,
        #[arg(long)]
        transcript: Option<PathBuf>,
        /// Continue from samples already recorded in the results file.
        #[arg(long, conflicts_with = "force")]
        resume: bool,
        /// Discard earlier results in the output directory.
        #[arg(long)]
        force: bool,
    },
    /// Print the unbiased pass@k estimate for one problem.
    Passk {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        c: usize,
        #[arg(long)]
        k: usize,
    },
    /// Summarise manual evaluation records.
    Report {
        /// JSONL of {"description_id","passed","adjustments"} records.
        #[arg(long)]
        manual: PathBuf,
    },
}

/// Exit 2 for invalid input (nothing written), exit 1 for failures at run time.
enum Failure {
    Usage(String),
    Runtime(String),
}

fn usage(message: impl Display) -> Failure {
    Failure::Usage(message.to_string())
}

fn runtime(message: impl Display) -> Failure {
    Failure::Runtime(message.to_string())
}

fn load_config(path: Option<&Path>) -> Result<RunConfig, Failure> {
    match path {
        Some(path) => RunConfig::load(path).map_err(usage),
        None => Ok(RunConfig::default()),
    }
}

fn build_backend(
    kind: BackendKind,
    transcript: Option<&Path>,
    config: &RunConfig,
) -> Result<Box<dyn ChatBackend>, Failure> {
    match kind {
        BackendKind::Scripted => {
            let path = transcript.ok_or_else(|| usage("--backend scripted requires --transcript <path>"))?;
            let transcript = ScriptedTranscript::load(path).map_err(usage)?;
            Ok(Box::new(ScriptedBackend::new(transcript, config.max_retries)))
        }
        BackendKind::Live => Ok(Box::new(LiveBackend::from_config(config).map_err(usage)?)),
    }
}

fn is_non_empty_dir(path: &Path) -> bool {
    std::fs::read_dir(path).is_ok_and(|mut entries| entries.next().is_some())
}

fn check_output_dir(path: &Path, force: bool) -> Result<(), Failure> {
    if path.exists() && !path.is_dir() {
        return Err(usage(format!("{} exists and is not a directory", path.display())));
    }
    if !force && is_non_empty_dir(path) {
        return Err(usage(format!(
            "{} is not empty; pass --force to write into it",
            path.display()
        )));
    }
    Ok(())
}

fn cmd_generate(
    project: &Path,
    config: Option<&Path>,
    out: Option<PathBuf>,
    backend: BackendKind,
    transcript: Option<&Path>,
    force: bool,
) -> Result<(), Failure> {
    if backend == BackendKind::Scripted && transcript.is_none() {
        return Err(usage("--backend scripted requires --transcript <path>"));
    }
    let mut config = load_config(config)?;
    if let Some(out) = out {
        config.output_dir = out;
    }
    let project = ProjectDescription::from_file(project).map_err(usage)?;
    check_output_dir(&config.output_dir, force)?;
    let templates = TemplateSet::from_optional_dir(config.template_dir.as_deref()).map_err(usage)?;
    let backend = build_backend(backend, transcript, &config)?;

    let orchestrator = Orchestrator::new(&config, templates, backend.as_ref())
        .with_progress(|line| eprintln!("{line}"));
    let outcome = orchestrator.run(&project).map_err(|e| runtime(format!("{} stage: {e}", e.stage)))?;
    for warning in &outcome.warnings {
        eprintln!("warning: {warning}");
    }
    print!("{}", outcome.report.render_table());
    eprintln!(
        "wrote {} module file(s) to {}",
        outcome.files.len(),
        config.output_dir.display()
    );
    Ok(())
}

struct BenchArgs {
    problems: PathBuf,
    generator: GeneratorKind,
    n: usize,
    k: Vec<usize>,
    sandbox: SandboxKind,
    out: PathBuf,
    jobs: usize,
    config: Option<PathBuf>,
    backend: BackendKind,
    transcript: Option<PathBuf>,
    resume: bool,
    force: bool,
}

fn cmd_bench(args: BenchArgs) -> Result<(), Failure> {
    if args.n == 0 {
        return Err(usage("--n must be at least 1"));
    }
    if args.k.contains(&0) {
        return Err(usage("every k must be at least 1"));
    }
    if let Some(max_k) = args.k.iter().copied().max().filter(|k| *k > args.n) {
        return Err(usage(format!("k = {max_k} exceeds --n {}", args.n)));
    }
    if args.jobs == 0 {
        return Err(usage("--jobs must be at least 1"));
    }
    let problems = load_problems(&args.problems).map_err(usage)?;
    if problems.is_empty() {
        return Err(usage(format!("{}: no problems", args.problems.display())));
    }
    if !args.resume {
        check_output_dir(&args.out, args.force)?;
    } else if args.out.exists() && !args.out.is_dir() {
        return Err(usage(format!("{} exists and is not a directory", args.out.display())));
    }

    let needs_backend = matches!(args.generator, GeneratorKind::Pipeline | GeneratorKind::Backend);
    let config = load_config(args.config.as_deref())?;
    let backend = if needs_backend {
        Some(build_backend(args.backend, args.transcript.as_deref(), &config)?)
    } else {
        None
    };

    let sandbox: Box<dyn Sandbox> = match args.sandbox {
        SandboxKind::Echo => Box::new(EchoOracleSandbox),
        SandboxKind::Subprocess => {
            let sandbox = SubprocessSandbox::from_env(SANDBOX_TIMEOUT);
            sandbox.probe().map_err(|e| {
                runtime(format!(
                    "sandbox driver `{}` failed: {e}",
                    sandbox.command().join(" ")
                ))
            })?;
            Box::new(sandbox)
        }
    };

    std::fs::create_dir_all(&args.out).map_err(|e| runtime(format!("{}: {e}", args.out.display())))?;
    let results_path = args.out.join(RESULTS_FILE);
    if args.force {
        for stale in [RESULTS_FILE, REPORT_FILE] {
            let path = args.out.join(stale);
            if path.exists() {
                std::fs::remove_file(&path).map_err(|e| runtime(format!("{}: {e}", path.display())))?;
            }
        }
    }
    let sink = ResultSink::open(&results_path).map_err(runtime)?;
    if sink.resumed_count() > 0 {
        eprintln!("resuming: {} sample(s) already recorded", sink.resumed_count());
    }

    let generator: Box<dyn Generator + '_> = match (args.generator, backend.as_deref()) {
        (GeneratorKind::Canonical, _) => Box::new(CanonicalGenerator),
        (GeneratorKind::Empty, _) => Box::new(EmptyGenerator),
        (GeneratorKind::Backend, Some(backend)) => Box::new(BackendGenerator::new(backend, config.clone())),
        (GeneratorKind::Pipeline, Some(backend)) => Box::new(PipelineGenerator::new(
            backend,
            config.clone(),
            args.out.join("pipeline_runs"),
        )),
        _ => unreachable!("backend built for model generators"),
    };

    let options = BenchOptions {
        n: args.n,
        k_list: args.k,
        jobs: args.jobs,
    };
    let report = run_benchmark(&problems, generator.as_ref(), sandbox.as_ref(), &options, Some(&sink))
        .map_err(runtime)?;
    let rendered = render_bench_report(&report);
    let report_path = args.out.join(REPORT_FILE);
    let json = serde_json::to_string_pretty(&rendered.json).expect("report serializes");
    std::fs::write(&report_path, json + "\n").map_err(|e| runtime(format!("{}: {e}", report_path.display())))?;
    print!("{}", rendered.table);
    Ok(())
}

fn cmd_passk(n: usize, c: usize, k: usize) -> Result<(), Failure> {
    let value = pass_at_k(n, c, k).map_err(usage)?;
    println!("{value:.6}");
    Ok(())
}

fn cmd_report(manual: &Path) -> Result<(), Failure> {
    let records = load_manual_records(manual).map_err(usage)?;
    if records.is_empty() {
        return Err(usage(format!("{}: no manual evaluation records", manual.display())));
    }
    print!("{}", render_manual_report(&records).table);
    Ok(())
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Generate {
            project,
            config,
            out,
            backend,
            transcript,
            force,
        } => cmd_generate(&project, config.as_deref(), out, backend, transcript.as_deref(), force),
        Command::Bench {
            problems,
            generator,
            n,
            k,
            sandbox,
            out,
            jobs,
            config,
            backend,
            transcript,
            resume,
            force,
        } => cmd_bench(BenchArgs {
            problems,
            generator,
            n,
            k,
            sandbox,
            out,
            jobs,
            config,
            backend,
            transcript,
            resume,
            force,
        }),
        Command::Passk { n, c, k } => cmd_passk(n, c, k),
        Command::Report { manual } => cmd_report(&manual),
    }
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env()
                .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new("warn")),
        )
        .with_writer(std::io::stderr)
        .init();

    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(message)) => {
            eprintln!("error: {message}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(message)) => {
            eprintln!("error: {message}");
            ExitCode::from(1)
        }
    }
}
