//! Baxter Q-operators: Q_μ at a root of unity and the truncated generic Q,
//! with their TQ relations checked as operators and on Bethe states.
//!
//!     cargo run --example q_operators

use qaux::bethe::{eig_q_mu, solve_bae, SeedStrategy};
use qaux::linalg::{c, commutator_residual};
use qaux::operators::{q_mu, transfer_t};
use qaux::relations::{check_tq_generic, check_tq_root, CheckOptions};
use qaux::{Branched, ModelParams, Result};

fn main() -> Result<()> {
    let opts = CheckOptions::default();
    let mu = Branched::principal(c(1.3, 0.4));
    let z = c(0.7, 0.25);

    let p = ModelParams::root_of_unity(4, 3, 1, c(0.8, 0.1))?;
    let q = q_mu(&p, mu, z)?.mat;
    println!("q^3 = 1, M = 4");
    println!("  ‖[T(z'), Q_μ(z)]‖ rel.  {:.2e}", commutator_residual(&transfer_t(&p, c(-0.4, 0.9))?.mat, &q)?);
    let states = solve_bae(&p, 1, &SeedStrategy { count: 40, target: Some(3), ..Default::default() })?.sets;
    let r = check_tq_root(&p, mu, z, &states, &opts)?;
    println!("  TQ operator residual   {:.2e}", r.operator_residual.unwrap_or(f64::NAN));
    println!("  TQ eigenvalue residual {:.2e} over {} states", r.eigenvalue_residual.unwrap_or(f64::NAN), states.len() + 1);
    for rs in &states {
        let v = eig_q_mu(rs, &p, mu, z)?;
        println!("    Q_μ eigenvalue {:+.8} {:+.8}i", v.re, v.im);
    }

    let g = ModelParams::generic_phase(4, 0.23, c(0.8, 0.1))?;
    let states = solve_bae(&g, 1, &SeedStrategy { count: 40, target: Some(3), ..Default::default() })?.sets;
    // |λ| < 1 slows the window series; widen it past the default.
    let wide = CheckOptions { window: 90, ..opts };
    let r = check_tq_generic(&g, Branched::principal(c(1.2, 0.3)), c(0.7, 0.2), z, &states, &wide)?;
    println!("generic q, M = 4");
    println!("  TQ operator residual   {:.2e}", r.operator_residual.unwrap_or(f64::NAN));
    println!("  TQ eigenvalue residual {:.2e}", r.eigenvalue_residual.unwrap_or(f64::NAN));
    Ok(())
}
