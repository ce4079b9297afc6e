use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use convoeval::providers::remote::{HttpTransport, RemoteClient};
use convoeval::providers::ProviderKind;
use convoeval::report::{self, EvalOptions, MetricReport, OutputFormat, RunConfig, Suites, SynthSpec};
use convoeval::{corpus, Error};

#[derive(Parser)]
#[command(name = "convoeval", version, about = "Reference-free metrics for multi-party conversations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate datasets and write a metric report.
    Eval(EvalArgs),
    /// Generate a synthetic dataset.
    Synth(SynthArgs),
    /// Print aggregates from a report.
    Inspect(InspectArgs),
    /// Provider utilities.
    Providers {
        #[command(subcommand)]
        command: ProvidersCommand,
    },
}

#[derive(Subcommand)]
enum ProvidersCommand {
    /// Check that the configured remote endpoint answers.
    Ping {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Overrides the endpoint in the config.
        #[arg(long)]
        endpoint: Option<String>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Clone, Copy, ValueEnum)]
enum ProviderChoice {
    Baseline,
    Remote,
}

#[derive(Args)]
struct EvalArgs {
    /// TOML run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Extra dataset files, appended to the configured ones.
    #[arg(long = "dataset")]
    datasets: Vec<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Comma-separated suites: local, global, all, or individual suite names.
    #[arg(long)]
    suites: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    jobs: Option<usize>,
    #[arg(long, value_enum)]
    providers: Option<ProviderChoice>,
    /// Reuse results from an existing report at --out with the same fingerprint.
    #[arg(long)]
    resume: bool,
    /// Print the effective configuration as TOML and exit.
    #[arg(long)]
    print_defaults: bool,
}

#[derive(Args)]
struct SynthArgs {
    /// JSON synthesis spec; defaults apply when absent.
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    conversations: Option<usize>,
}

#[derive(Args)]
struct InspectArgs {
    report: PathBuf,
    /// Show only this metric.
    #[arg(long)]
    metric: Option<String>,
}

fn exit_code(e: &Error) -> ExitCode {
    if e.is_provider_error() {
        ExitCode::from(3)
    } else {
        ExitCode::from(2)
    }
}

fn read(path: &Path) -> Result<String, Error> {
    std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_owned(),
        source,
    })
}

fn write(path: &Path, body: &str) -> Result<(), Error> {
    std::fs::write(path, body).map_err(|source| Error::Io {
        path: path.to_owned(),
        source,
    })
}

fn eval_config(args: &EvalArgs) -> Result<RunConfig, Error> {
    let mut cfg = match &args.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    cfg.datasets.extend(args.datasets.iter().cloned());
    if let Some(s) = &args.suites {
        cfg.suites = Suites::parse_list(s)?;
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    match args.providers {
        Some(ProviderChoice::Baseline) => cfg.providers = cfg.providers.clone().all_baseline(),
        Some(ProviderChoice::Remote) => {
            let endpoint = cfg.providers.endpoint.clone().unwrap_or_default();
            cfg.providers = cfg.providers.clone().all_remote(endpoint);
        }
        None => {}
    }
    if let Some(out) = &args.out {
        cfg.output.path = Some(out.clone());
    }
    if let Some(f) = args.format {
        cfg.output.format = match f {
            Format::Json => OutputFormat::Json,
            Format::Csv => OutputFormat::Csv,
        };
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run_eval(args: EvalArgs) -> Result<ExitCode, Error> {
    let cfg = eval_config(&args)?;
    if args.print_defaults {
        print!("{}", cfg.to_toml_string()?);
        return Ok(ExitCode::SUCCESS);
    }
    let resume = match (&cfg.output.path, args.resume) {
        (Some(p), true) if p.exists() => Some(MetricReport::from_json(&read(p)?)?),
        _ => None,
    };
    let report = report::evaluate(
        &cfg,
        &EvalOptions {
            jobs: args.jobs,
            resume,
        },
    )?;
    let body = match cfg.output.format {
        OutputFormat::Json => report.to_json() + "\n",
        OutputFormat::Csv => report.to_csv()?,
    };
    match &cfg.output.path {
        Some(p) => write(p, &body)?,
        None => print!("{body}"),
    }
    for (key, err) in &report.errors {
        eprintln!("{key}: {} error: {}", err.kind, err.message);
    }
    Ok(if report.errors.values().any(|e| e.is_provider()) {
        ExitCode::from(3)
    } else if !report.errors.is_empty() {
        ExitCode::from(2)
    } else {
        ExitCode::SUCCESS
    })
}

fn run_synth(args: SynthArgs) -> Result<ExitCode, Error> {
    let mut spec: SynthSpec = match &args.spec {
        Some(p) => serde_json::from_str(&read(p)?)
            .map_err(|e| Error::Config(format!("{}: {e}", p.display())))?,
        None => SynthSpec::default(),
    };
    if let Some(s) = args.seed {
        spec.seed = s;
    }
    if let Some(n) = args.conversations {
        spec.conversations = n;
    }
    let convs = report::gen_dataset(&spec)?;
    corpus::write_dataset(&args.out, &convs)?;
    Ok(ExitCode::SUCCESS)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "null".to_owned(), |x| format!("{x:.4}"))
}

fn run_inspect(args: InspectArgs) -> Result<ExitCode, Error> {
    let report = MetricReport::from_json(&read(&args.report)?)?;
    println!("fingerprint {}", report.fingerprint);
    for (label, aggs) in &report.by_label {
        for (metric, a) in aggs {
            if args.metric.as_deref().is_some_and(|m| m != metric) {
                continue;
            }
            println!(
                "{label}\t{metric}\t{} ± {}\t(n={})",
                fmt_opt(a.mean),
                fmt_opt(a.std),
                a.n
            );
        }
    }
    if let Some(m) = &args.metric {
        if !report.aggregates.contains_key(m) {
            return Err(Error::Config(format!("metric `{m}` not in report")));
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn run_ping(config: Option<PathBuf>, endpoint: Option<String>) -> Result<ExitCode, Error> {
    let cfg = match &config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    let p = &cfg.providers;
    let remote = [p.embedding, p.topics, p.acts, p.lm].contains(&ProviderKind::Remote);
    let Some(url) = endpoint.or_else(|| p.endpoint.clone()) else {
        if remote {
            return Err(Error::Config("remote provider requires `endpoint`".into()));
        }
        println!("baseline providers: nothing to ping");
        return Ok(ExitCode::SUCCESS);
    };
    let client = RemoteClient::new(
        Box::new(HttpTransport::new(url.clone(), p.remote_timeout_ms)),
        p.remote_model.clone(),
        p.remote_retries,
    );
    let model = client.ping()?;
    println!("{url}: ok (model {model})");
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match cli.command {
        Command::Eval(a) => run_eval(a),
        Command::Synth(a) => run_synth(a),
        Command::Inspect(a) => run_inspect(a),
        Command::Providers {
            command: ProvidersCommand::Ping { config, endpoint },
        } => run_ping(config, endpoint),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
