use std::f64::consts::PI;

use qaux::bethe::{bae_residual, solve_bae, BetheRootSet, Provenance, SeedStrategy};
use qaux::linalg::{c, ONE};
use qaux::loopsym::{
    classify_limit_roots, drinfeld_poly, ksum_from_q_spectrum, loop_generators, multiplet_decompose, phase_path, sector_commutator,
    track_roots, RootFate, DEFAULT_EPS,
};
use qaux::relations::fusion_any;
use qaux::{ModelParams, C64};

/// Closed-form P = 0 pair at M = 5, 2S^z = 1, in the weight variable b = q(1−z)/(1−zq²).
fn m5_pair(qp: C64) -> [C64; 2] {
    let delta = (qp + ONE / qp) / 2.0;
    let r = (5.0 + delta * (delta - 2.0)).sqrt();
    let a = ONE + delta - r;
    let b1 = (a + (a * a - 16.0).sqrt()) / 4.0;
    let to_z = |b: C64| (qp - b) / (qp * (ONE - b * qp));
    [to_z(b1), to_z(ONE / b1)]
}

#[test]
fn m5_pair_solves_the_bethe_equations() {
    let q = C64::from_polar(1.0, 2.0 * PI / 3.0);
    let p = ModelParams::root_of_unity(5, 3, 1, ONE).unwrap();
    for qp in phase_path(q, 0.2, 0.5, 6) {
        let pj = p.at_q(qp).unwrap();
        let rs = BetheRootSet::new(m5_pair(qp).to_vec(), 1, &pj, Provenance::Manual).unwrap();
        let r = bae_residual(&rs, &pj).unwrap().iter().map(|x| x.norm()).fold(0.0, f64::max);
        assert!(r < 1e-12, "{qp} {r}");
    }
}

#[test]
fn m5_roots_go_to_zero_and_infinity() {
    let q = C64::from_polar(1.0, 2.0 * PI / 3.0);
    let p = ModelParams::root_of_unity(5, 3, 1, ONE).unwrap();
    let path = phase_path(q, 0.2, 0.7, 30);
    let tr = track_roots(&p, &m5_pair(path[0]), &path).unwrap();
    assert!(tr.lost_at.is_none(), "{:?}", tr.lost_at);
    assert!(tr.discontinuities.is_empty());
    for (j, &qp) in tr.q_samples.iter().enumerate() {
        // The closed form does not fix which member is b₁, so compare as sets.
        let mut exact = m5_pair(qp);
        exact.sort_by(|a, b| a.norm().total_cmp(&b.norm()));
        let mut got = [tr.root_tracks[0][j], tr.root_tracks[1][j]];
        got.sort_by(|a, b| a.norm().total_cmp(&b.norm()));
        for i in 0..2 {
            assert!((got[i] - exact[i]).norm() < 1e-8 * exact[i].norm(), "sample {j}: {} vs {}", got[i], exact[i]);
        }
    }
    let mut fates = tr.classification.clone();
    fates.sort_by_key(|f| format!("{f:?}"));
    assert_eq!(fates, vec![RootFate::ToInfinity, RootFate::ToZero]);
    assert_eq!((tr.n0, tr.n_inf), (1, 1));
    assert_eq!(tr.two_s, 5);
}

#[test]
fn commensurate_vacuum_has_no_tracks() {
    let p = ModelParams::root_of_unity(6, 3, 1, ONE).unwrap();
    let path = phase_path(p.q, 0.1, 0.5, 5);
    let tr = classify_limit_roots(&p, 0, &path, &SeedStrategy::default()).unwrap();
    assert_eq!(tr.len(), 1);
    assert!(tr[0].root_tracks.is_empty());
    assert_eq!(tr[0].two_s, 6);
}

#[test]
fn six_site_multiplet_census() {
    let p = ModelParams::root_of_unity(6, 3, 1, ONE).unwrap();
    let reps = multiplet_decompose(&p, c(0.61, 0.33)).unwrap();
    let total: usize = reps.iter().map(|r| r.dimension).sum();
    assert_eq!(total, 64);
    let mut spanning = 0;
    for r in &reps {
        assert!(r.flag.is_none(), "{r:?}");
        if r.members.iter().any(|b| b.two_sz == 0) && r.members.len() > 1 {
            let spins: Vec<i64> = r.members.iter().map(|b| b.two_sz).collect();
            assert!(spins.iter().all(|s| [6, 0, -6].contains(s)), "{spins:?}");
            spanning += 1;
        }
        if r.highest_two_sz.rem_euclid(3) == 0 {
            assert_eq!(r.spins_differ_by_n_prime, Some(true), "{r:?}");
        }
        if let Some(h) = r.highest_weight_residual {
            assert!(h < 1e-7, "{r:?}");
        }
    }
    assert!(spanning > 0);
}

#[test]
fn fusion_matrices_inherit_the_symmetry() {
    let p = ModelParams::root_of_unity(4, 3, 1, ONE).unwrap();
    let g = loop_generators(&p, &DEFAULT_EPS).unwrap();
    for n in 2..=3 {
        let t = fusion_any(&p, n, c(0.7, 0.4)).unwrap();
        for x in [&g.e0, &g.e1, &g.f0, &g.f1] {
            assert!(sector_commutator(x, &t, p.m, &g.claimed_sectors) < 1e-7);
        }
    }
}

#[test]
fn drinfeld_matches_q_spectrum() {
    let p = ModelParams::root_of_unity(6, 3, 1, ONE).unwrap();
    let sols = solve_bae(&p, 3, &SeedStrategy { count: 200, target: Some(4), ..Default::default() }).unwrap();
    let mut checked = 0;
    for rs in &sols.sets {
        let d = drinfeld_poly(rs, &p).unwrap();
        assert!(d.ok, "{d:?}");
        for z in [c(0.31, 0.52), c(-0.8, 0.2)] {
            let y = z * z * z;
            let ps: C64 = d.ps_coeffs.iter().rev().fold(C64::new(0.0, 0.0), |a, &k| a * y + k);
            let from_q = ksum_from_q_spectrum(rs, &p, z).unwrap();
            assert!((from_q - d.norm * ps).norm() < 1e-7 * from_q.norm().max(1.0), "{from_q} {}", d.norm * ps);
        }
        checked += 1;
    }
    assert!(checked > 0);
}
