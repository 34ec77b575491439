//! The relation suite driven through the same configuration the CLI reads,
//! at five sites and q = e^{iπ·0.23}.
//!
//!     cargo run --release --example verify_relations

use qaux::cli::{run, RunConfig};
use qaux::Result;

const CONFIG: &str = r#"{
    "model": { "M": 5, "q": { "phase_over_pi": 0.23 }, "lambda": { "re": 0.8, "im": 0.1 } },
    "suite": "verify",
    "relations": ["commutation", "tq_generic", "wronskian", "qfusion", "spin_reversal", "yba_q", "qdecomp"],
    "window": 80,
    "seed": 11
}"#;

fn main() -> Result<()> {
    let cfg = RunConfig::from_json(CONFIG)?;
    cfg.validate()?;
    let report = run(&cfg)?;
    print!("{}", report.to_text());
    println!("all pass: {}", report.all_pass());
    Ok(())
}
