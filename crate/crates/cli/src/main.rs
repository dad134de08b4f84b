use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use eqsa_core::{
    generate_suite, run_scenario, run_suite, verify_trace, Ablation, EpisodeTrace,
    GeneratorParams, Mode, RunConfig, Scenario,
};

#[derive(Parser, Debug)]
#[command(version, about = "Urgency-aware embodied question scheduling simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run one scenario and write its trace as JSONL.
    Run(RunArgs),
    /// Run a directory of scenarios under several configurations.
    Bench(BenchArgs),
    /// Write a generated scenario suite, one JSON file per scenario.
    Generate(GenerateArgs),
    /// Trace utilities.
    #[command(subcommand)]
    Metrics(MetricsCommand),
}

#[derive(Args, Debug)]
struct RunArgs {
    #[arg(long)]
    scenario: PathBuf,
    /// RunConfig JSON; omitted fields take their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    trace_out: PathBuf,
}

#[derive(Args, Debug)]
struct BenchArgs {
    /// Directory of scenario JSON files.
    #[arg(long)]
    scenarios: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "paraeqsa,seq_nomem,seq_mem")]
    modes: Vec<Mode>,
    /// Each ablation adds one paraeqsa configuration with it applied.
    #[arg(long, value_delimiter = ',')]
    ablations: Vec<Ablation>,
    /// Base RunConfig JSON shared by every configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// JSON report path; the CSV table is written next to it.
    #[arg(long)]
    report: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args, Debug)]
struct GenerateArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 40)]
    count: usize,
    #[arg(long, visible_alias = "out-dir")]
    out: PathBuf,
    /// GeneratorParams JSON; omitted fields take their defaults.
    #[arg(long)]
    params: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum MetricsCommand {
    /// Recompute a trace's metrics and compare with the stored values.
    Recompute {
        #[arg(long)]
        trace: PathBuf,
    },
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    serde_json::from_reader(BufReader::new(file))
        .with_context(|| format!("parsing {}", path.display()))
}

fn load_config(path: Option<&Path>) -> Result<RunConfig> {
    let config = match path {
        Some(p) => read_json(p)?,
        None => RunConfig::default(),
    };
    config.validate()?;
    Ok(config)
}

fn run(args: RunArgs) -> Result<ExitCode> {
    let scenario = Scenario::load(&args.scenario)?;
    let config = load_config(args.config.as_deref())?;
    let trace = run_scenario(&scenario, &config)?;
    let out = File::create(&args.trace_out)
        .with_context(|| format!("creating {}", args.trace_out.display()))?;
    let mut out = BufWriter::new(out);
    trace.write_jsonl(&mut out)?;
    out.flush()?;
    if let Some(m) = trace.stored_metrics() {
        println!(
            "{}: acc {:.4} dar {:.4} ns {:.4} nuwl {:.4}",
            scenario.scenario_id, m.acc, m.dar, m.ns, m.nuwl
        );
    }
    Ok(ExitCode::SUCCESS)
}

fn load_dir(dir: &Path) -> Result<Vec<Scenario>> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .with_context(|| format!("reading {}", dir.display()))?
        .map(|e| e.map(|e| e.path()))
        .collect::<std::io::Result<_>>()?;
    paths.retain(|p| p.extension().is_some_and(|e| e == "json"));
    paths.sort();
    paths
        .iter()
        .map(|p| Scenario::load(p).with_context(|| format!("loading {}", p.display())))
        .collect()
}

fn bench(args: BenchArgs) -> Result<ExitCode> {
    let scenarios = load_dir(&args.scenarios)?;
    if scenarios.is_empty() {
        bail!("no scenario files in {}", args.scenarios.display());
    }
    let mut base = load_config(args.config.as_deref())?;
    if let Some(seed) = args.seed {
        base.seed = seed;
    }
    let mut configs: Vec<RunConfig> = args
        .modes
        .iter()
        .map(|&mode| RunConfig {
            mode,
            ..base.clone()
        })
        .collect();
    for &a in &args.ablations {
        configs.push(
            RunConfig {
                mode: Mode::Paraeqsa,
                ..base.clone()
            }
            .with_ablation(a),
        );
    }
    let report = run_suite(&scenarios, &configs)?;
    fs::write(&args.report, report.to_json())
        .with_context(|| format!("writing {}", args.report.display()))?;
    let csv_path = args.report.with_extension("csv");
    report.write_csv(File::create(&csv_path)?)?;
    report.write_csv(std::io::stdout().lock())?;
    let failures: usize = report.rows.iter().map(|r| r.failures).sum();
    if failures > 0 {
        log::warn!("{failures} runs failed; see the report's outcomes");
    }
    Ok(ExitCode::SUCCESS)
}

fn generate(args: GenerateArgs) -> Result<ExitCode> {
    let params = match &args.params {
        Some(p) => read_json(p)?,
        None => GeneratorParams::default(),
    };
    let suite = generate_suite(args.seed, args.count, &params)?;
    fs::create_dir_all(&args.out)?;
    let mut questions = 0;
    for s in &suite {
        let path = args.out.join(format!("{}.json", s.scenario_id));
        fs::write(&path, s.to_json()).with_context(|| format!("writing {}", path.display()))?;
        questions += s.question_count();
    }
    println!(
        "wrote {} scenarios ({questions} questions) to {}",
        suite.len(),
        args.out.display()
    );
    Ok(ExitCode::SUCCESS)
}

fn recompute(path: &Path) -> Result<ExitCode> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let trace = EpisodeTrace::read_jsonl(BufReader::new(file))?;
    let (fresh, problems) = verify_trace(&trace);
    if let (Some(stored), Some(fresh)) = (trace.stored_metrics(), fresh) {
        println!("metric   stored      recomputed");
        for (name, a, b) in [
            ("acc", stored.acc, fresh.acc),
            ("dar", stored.dar, fresh.dar),
            ("ns", stored.ns, fresh.ns),
            ("nuwl", stored.nuwl, fresh.nuwl),
        ] {
            println!("{name:<8} {a:<11.6} {b:.6}");
        }
    }
    if problems.is_empty() {
        println!("ok");
        Ok(ExitCode::SUCCESS)
    } else {
        for p in &problems {
            eprintln!("mismatch: {p}");
        }
        Ok(ExitCode::FAILURE)
    }
}

fn main() -> Result<ExitCode> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match Cli::parse().command {
        Command::Run(a) => run(a),
        Command::Bench(a) => bench(a),
        Command::Generate(a) => generate(a),
        Command::Metrics(MetricsCommand::Recompute { trace }) => recompute(&trace),
    }
}
