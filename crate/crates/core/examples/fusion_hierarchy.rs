//! Fused transfer matrices T^(n): direct spin-(n−1)/2 construction against
//! the recursion from T^(1) and T^(2), and the truncation at q^3 = 1.
//!
//!     cargo run --release --example fusion_hierarchy

use qaux::bethe::{eig_fusion, solve_bae, SeedStrategy};
use qaux::linalg::{c, eigen_estimate, eigenpairs};
use qaux::operators::{fusion_t, fusion_t_recursive, spin_sector_project};
use qaux::relations::{check_fusion_recursion, check_truncation, CheckOptions};
use qaux::{ModelParams, Result};

fn main() -> Result<()> {
    let opts = CheckOptions::default();
    let z = c(1.2, 0.9);

    let g = ModelParams::generic_phase(4, 0.23, c(0.8, 0.2))?;
    for n in 2..=5 {
        let direct = fusion_t(&g, n, z)?.mat;
        let rec = fusion_t_recursive(&g, n, z)?.mat;
        let diff = (&direct - &rec).norm() / direct.norm();
        let r = check_fusion_recursion(&g, n, z, &[], &opts)?;
        println!("n = {n}: ‖direct − recursive‖ rel. {diff:.2e}, recursion residual {:.2e}", r.operator_residual.unwrap_or(f64::NAN));
    }

    // T^(3) eigenvalues on the one-magnon block against the closed form.
    let t3 = spin_sector_project(&fusion_t(&g, 3, z)?.mat, g.m, 2)?;
    let pairs = eigenpairs(&t3, 1e-10 * t3.norm())?;
    let sets = solve_bae(&g, 1, &SeedStrategy { count: 40, target: Some(4), ..Default::default() })?.sets;
    println!("T^(3) one-magnon block: {} eigenvalues, {} Bethe states", pairs.len(), sets.len());
    for rs in &sets {
        let want = eig_fusion(rs, &g, 3, z, None);
        let best = pairs.iter().map(|e| (e.value - want).norm() / want.norm()).fold(f64::INFINITY, f64::min);
        println!("    closest eigenvalue rel. dev {best:.2e}");
    }
    let (_, res) = eigen_estimate(&t3, &pairs[0].vector);
    println!("    first eigenvector residual {res:.1e}");

    let p = ModelParams::root_of_unity(6, 3, 1, c(1.0, 0.0))?;
    let states = solve_bae(&p, 3, &SeedStrategy { count: 200, target: Some(4), seed: 6, ..Default::default() })?.sets;
    let r = check_truncation(&p, c(0.6, 0.4), None, Some(0), &states, &CheckOptions { operator_level: false, ..opts })?;
    println!("truncation at q^3 = 1, M = 6, S^z = 0: residual {:.2e} ({} Bethe states)", r.eigenvalue_residual.unwrap_or(f64::NAN), states.len());
    Ok(())
}
