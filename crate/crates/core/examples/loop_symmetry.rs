//! Degenerate multiplets of T at q^3 = 1 and the Drinfeld polynomial of
//! each commensurate Bethe state.
//!
//!     cargo run --release --example loop_symmetry

use qaux::bethe::{solve_bae, BetheRootSet, SeedStrategy};
use qaux::linalg::c;
use qaux::loopsym::{claimed_sectors, drinfeld_poly, multiplet_decompose};
use qaux::{ModelParams, Result};

fn main() -> Result<()> {
    let p = ModelParams::root_of_unity(6, 3, 1, c(1.0, 0.0))?;

    let classes = multiplet_decompose(&p, c(0.61, 0.33))?;
    let big: Vec<_> = classes.iter().filter(|m| m.dimension > 1).collect();
    println!("{} eigenvalue classes, {} degenerate", classes.len(), big.len());
    for m in big.iter().take(6) {
        let members: Vec<String> = m.members.iter().map(|b| format!("{}x{}", b.two_sz, b.multiplicity)).collect();
        println!(
            "  class {:>3}: dim {:>2}, 2S^z in [{}, {}], members {}, hw {:.1e}",
            m.class_id,
            m.dimension,
            m.lowest_two_sz,
            m.highest_two_sz,
            members.join(" "),
            m.highest_weight_residual.unwrap_or(f64::NAN)
        );
    }

    let sectors = claimed_sectors(&p)?;
    println!("\ncommensurate sectors 2S^z = {sectors:?}");
    for two_sz in sectors.into_iter().filter(|s| *s >= 0) {
        let n_b = (p.m as i64 - two_sz) as usize / 2;
        let states = if n_b == 0 {
            vec![BetheRootSet::vacuum(&p)]
        } else {
            solve_bae(&p, n_b, &SeedStrategy { count: 100, target: Some(2), seed: 9, ..Default::default() })?.sets
        };
        for rs in &states {
            let d = drinfeld_poly(rs, &p)?;
            let coeffs: Vec<String> = d.ps_coeffs.iter().map(|a| format!("{:+.6}{:+.6}i", a.re, a.im)).collect();
            println!("  n_B = {n_b}: P_S(y) = [{}], 2s = {}, n0 = {}, ok = {}", coeffs.join(", "), d.two_s, d.n0, d.ok);
        }
    }
    Ok(())
}
