use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;
use ultrapos_cli::config::ExperimentConfig;
use ultrapos_cli::report::{emit, Format};
use ultrapos_cli::stages::Stage;

#[derive(Parser)]
#[command(name = "ultrapos", version, about = "Certificate pipelines for perturbed semigroups")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// experiment config (flat TOML); defaults apply to missing keys
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// output directory, overriding the config
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// seed for the randomized checks, overriding the config
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// worker threads (default: all cores)
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[arg(long, global = true, value_enum, default_value = "both")]
    format: Format,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// smoothing exponent fits, preserved exponent and growth bounds
    Ultra,
    /// Dyson-Phillips series and variation-of-parameters residual
    Dyson,
    /// eigenpair tracking, analyticity and projection checks
    Spectrum,
    /// eventual positivity certificates and the perturbed sweep
    Positivity,
    /// gap bounds on random instances
    Gap,
    /// every stage in order
    All,
}

impl Command {
    fn stages(self) -> (&'static str, Vec<Stage>) {
        match self {
            Command::Ultra => ("ultra", vec![Stage::Ultra]),
            Command::Dyson => ("dyson", vec![Stage::Dyson]),
            Command::Spectrum => ("spectrum", vec![Stage::Spectrum]),
            Command::Positivity => ("positivity", vec![Stage::Positivity]),
            Command::Gap => ("gap", vec![Stage::Gap]),
            Command::All => ("all", Stage::ALL.to_vec()),
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();

    let mut cfg = match &cli.config {
        Some(p) => match ExperimentConfig::load(p) {
            Ok(c) => c,
            Err(e) => {
                eprintln!("config error: {e}");
                return ExitCode::from(2);
            }
        },
        None => ExperimentConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(o) = &cli.out {
        cfg.out = o.to_string_lossy().into_owned();
    }
    if let Some(t) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            eprintln!("config error: cannot set {t} threads: {e}");
            return ExitCode::from(2);
        }
    }

    let (name, stages) = cli.command.stages();
    let record = ultrapos_cli::run(name, &stages, &cfg);
    for s in &record.stages {
        let v = s.verdict.map(|v| v.to_string()).unwrap_or_else(|| "ABORTED".into());
        println!("{:<11} {:<13} {:>8.1}s", s.stage, v, s.seconds);
        for (check, cv) in &s.checks {
            println!("  {check:<28} {cv}");
        }
        if let Some(e) = &s.error {
            println!("  error: {e}");
        }
    }
    match emit(&record, std::path::Path::new(&cfg.out), cli.format) {
        Ok(paths) => {
            for p in paths {
                println!("wrote {}", p.display());
            }
        }
        Err(e) => {
            eprintln!("output error: {e}");
            return ExitCode::from(3);
        }
    }
    ExitCode::from(record.exit_code() as u8)
}
