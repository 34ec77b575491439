use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use qaux::cli::{run, RunConfig, Suite, RELATION_IDS};
use qaux::Error;

/// Six-vertex transfer matrices, Q-operators and Bethe ansatz checks.
#[derive(Parser, Debug)]
#[command(version, about)]
struct Args {
    /// JSON run configuration; without it N = 3, M = 4, λ = 1 is used.
    #[arg(long)]
    config: Option<PathBuf>,
    /// spectrum | bethe | verify | rootlimit | all, or a single relation id.
    #[arg(long)]
    suite: Option<String>,
    /// Directory for report.txt, report.json and the CSV tables.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    tolerance_scale: Option<f64>,
}

fn configure(args: &Args) -> Result<RunConfig, Error> {
    let mut cfg = match &args.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default_model(),
    };
    if let Some(s) = &args.suite {
        if RELATION_IDS.contains(&s.as_str()) {
            cfg.suite = "verify".into();
            cfg.relations = vec![s.clone()];
        } else {
            Suite::parse(s)?;
            cfg.suite = s.clone();
        }
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(t) = args.tolerance_scale {
        cfg.tolerance_scale = t;
    }
    if let Some(d) = &args.out {
        cfg.outputs.dir = Some(d.clone());
    }
    cfg.validate()?;
    Ok(cfg)
}

fn main() -> ExitCode {
    let args = Args::parse();
    let cfg = match configure(&args) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("qaux: {e}");
            return ExitCode::from(2);
        }
    };
    if let Some(n) = args.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("qaux: {e}");
            return ExitCode::from(2);
        }
    }
    let report = match run(&cfg) {
        Ok(r) => r,
        Err(e @ Error::Config(_)) => {
            eprintln!("qaux: {e}");
            return ExitCode::from(2);
        }
        Err(e) => {
            eprintln!("qaux: run failed: {e}");
            return ExitCode::from(1);
        }
    };
    print!("{}", report.to_text());
    for (s, t) in &report.timing.sections {
        eprintln!("time {s}: {t:.3}s");
    }
    if let Some(dir) = &cfg.outputs.dir {
        if let Err(e) = report.write(dir) {
            eprintln!("qaux: cannot write report: {e}");
            return ExitCode::from(1);
        }
    }
    if report.all_pass() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}
