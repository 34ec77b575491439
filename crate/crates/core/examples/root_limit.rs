//! Bethe roots followed along q′ → q = e^{2πi/3} at five sites: roots that
//! run to 0 or ∞ and the spin of the limiting multiplet.
//!
//!     cargo run --release --example root_limit

use std::f64::consts::PI;

use qaux::bethe::SeedStrategy;
use qaux::linalg::{c, ONE};
use qaux::loopsym::{classify_limit_roots_multi, limiting_eig_t, nested_paths};
use qaux::{ModelParams, Result, C64};

fn main() -> Result<()> {
    let q = C64::from_polar(1.0, 2.0 * PI / 3.0);
    let p = ModelParams::root_of_unity(5, 3, 1, ONE)?;
    let paths = nested_paths(q, 1e-9, 0.7, 55, 4, 2);
    let tracks = classify_limit_roots_multi(&p, 2, &paths, &SeedStrategy { count: 200, seed: 0, ..Default::default() })?;
    println!("{} distinct two-root trajectories", tracks.len());
    for t in &tracks {
        let last = t.q_samples.len() - 1;
        let ends: Vec<String> = t.root_tracks.iter().map(|r| format!("{:.3e}", r[last].norm())).collect();
        println!("  fates {:?}  |z| at end [{}]  2s = {}", t.classification, ends.join(", "), t.two_s);
        if t.n0 == 1 && t.n_inf == 1 {
            let z = c(0.3, 0.2);
            let (lim, err) = limiting_eig_t(&p, t, z)?;
            println!("    limiting Λ({z}) = {:+.12} {:+.12}i  (extrapolation error {err:.1e})", lim.re, lim.im);
        }
    }
    Ok(())
}
