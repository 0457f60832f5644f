use clap::Parser;
use scatlab::cli::catalog::{list_experiments, unknown_kind_message, Kind};
use scatlab::cli::run_experiment;
use std::path::PathBuf;
use std::process::ExitCode;

/// Run a scatlab experiment from a TOML config.
#[derive(Parser, Debug)]
#[command(name = "lab", version)]
struct Args {
    /// Experiment kind, or `list` for the catalog.
    kind: String,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let args = Args::parse();
    if let Ok(v) = std::env::var("LAB_THREADS") {
        match v.parse::<usize>() {
            Ok(n) if n > 0 => {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
            _ => {
                eprintln!("LAB_THREADS must be a positive integer, got `{v}`");
                return ExitCode::from(1);
            }
        }
    }
    if args.kind == "list" {
        for e in list_experiments() {
            println!("{:<15} {}", e.kind, e.description);
            if !e.required_keys.is_empty() {
                println!("{:<15} keys: {}", "", e.required_keys.join(", "));
            }
            for c in e.csv_columns {
                println!("{:<15} csv: {c}", "");
            }
        }
        return ExitCode::SUCCESS;
    }
    let Some(kind) = Kind::parse(&args.kind) else {
        eprintln!("{}", unknown_kind_message(&args.kind));
        return ExitCode::from(1);
    };
    let Some(config) = args.config else {
        eprintln!("`lab {}` needs --config <file>", kind.name());
        return ExitCode::from(1);
    };
    match run_experiment(kind, &config, args.out.as_deref()) {
        Ok(record) => {
            for c in &record.checks {
                println!("{} {} (value {}, threshold {})", if c.pass { "PASS" } else { "FAIL" }, c.name, c.value, c.threshold);
            }
            if let Some(f) = &record.failure {
                eprintln!("run failed: {f}");
            }
            ExitCode::from(record.exit_code as u8)
        }
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(1)
        }
    }
}
