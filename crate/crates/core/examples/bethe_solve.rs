//! Two routes to Bethe roots: Newton from random starts, and the Q spectrum
//! of exact diagonalization polished by Newton. Each set is checked against
//! the T eigenvalue of its algebraic Bethe state.
//!
//!     cargo run --release --example bethe_solve

use qaux::bethe::{bethe_state, eig_t, same_set, solve_bae, solve_bae_spectral, SeedStrategy};
use qaux::linalg::{c, eigen_estimate};
use qaux::operators::transfer_t;
use qaux::{ModelParams, Result};

fn main() -> Result<()> {
    let p = ModelParams::root_of_unity(6, 3, 1, c(0.8, 0.1))?;
    let z = c(0.5, 0.3);
    let t = transfer_t(&p, z)?.mat;
    for n_b in 1..=3 {
        let newton = solve_bae(&p, n_b, &SeedStrategy { count: 200, seed: 3, ..Default::default() })?;
        let spectral = solve_bae_spectral(&p, n_b)?;
        let shared = newton.sets.iter().filter(|a| spectral.sets.iter().any(|b| same_set(&a.roots, &b.roots, 1e-6))).count();
        println!(
            "n_B = {n_b}: Newton {} sets ({} of {} starts converged), spectral {} sets, {} in common",
            newton.sets.len(),
            newton.converged,
            newton.seeds_tried,
            spectral.sets.len(),
            shared
        );
        for rs in spectral.sets.iter().take(3) {
            let st = bethe_state(rs, &p)?;
            let (ev, res) = eigen_estimate(&t, &st.vector);
            let want = eig_t(rs, &p, z);
            println!("    |BAE| {:.1e}  |<T> - Λ| {:.1e}  eigen residual {:.1e}", rs.residual, (ev - want).norm(), res);
        }
    }
    Ok(())
}
