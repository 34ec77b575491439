//! Six-vertex transfer matrix T(z) on four sites: spectrum per S^z sector,
//! and the same numbers from Bethe roots.
//!
//!     cargo run --example transfer_spectrum

use qaux::bethe::{eig_t, solve_bae_spectral};
use qaux::linalg::{c, eigenvalues};
use qaux::operators::{spin_sector_project, transfer_t};
use qaux::{ModelParams, Result};

fn main() -> Result<()> {
    let p = ModelParams::generic_phase(4, 0.23, c(0.6, 0.1))?;
    let z = c(0.61, 0.33);
    let t = transfer_t(&p, z)?.mat;

    for two_sz in [4, 2, 0] {
        let block = spin_sector_project(&t, p.m, two_sz)?;
        let mut ev = eigenvalues(&block)?;
        ev.sort_by(|a, b| a.re.total_cmp(&b.re));
        println!("2S^z = {two_sz:>2}  dim {:>2}", ev.len());
        for e in &ev {
            println!("    {:+.10} {:+.10}i", e.re, e.im);
        }
    }

    // One magnon: Bethe roots reproduce the 2S^z = 2 block.
    let sols = solve_bae_spectral(&p, 1)?;
    println!("\nBethe states with one root");
    for rs in &sols.sets {
        let e = eig_t(rs, &p, z);
        println!("    root {:+.8} {:+.8}i  ->  Λ(z) = {:+.10} {:+.10}i", rs.roots[0].re, rs.roots[0].im, e.re, e.im);
    }
    Ok(())
}
