//! Bethe ansatz layer: the Bethe equations, a multi-start Newton solver,
//! Bethe vectors and the closed-form eigenvalues of every operator family.

use std::cmp::Ordering;

use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{inner, normalize, poly_from_samples, poly_roots, solve_linear, vec_norm, CMatrix, PolySamples, ONE, ZERO};
use crate::operators::{b_operator, check_qconv, q_mu, q_osc, transfer_t, vacuum, OscSign};
use crate::params::{Branched, ModelParams};
use crate::repkit::{weights_sixvertex, LFamily, LWeights};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Provenance {
    Solved,
    ExtractedFromQ,
    Manual,
}

/// Finite Bethe roots with the sector they describe.
///
/// `two_sz` is stored separately from the root count: roots extracted at a
/// root of unity may be fewer than M/2 − S^z when some have run off to 0 or ∞.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BetheRootSet {
    pub roots: Vec<C64>,
    pub two_sz: i64,
    /// Ascending coefficients of P_B(z) = Π_j (1 − z/z_j).
    pub pb_coeffs: Vec<C64>,
    #[serde(with = "crate::serial::ext_f64")]
    pub residual: f64,
    pub provenance: Provenance,
}

fn canonical_cmp(a: &C64, b: &C64) -> Ordering {
    let qa = (a.norm() * 1e9).round();
    let qb = (b.norm() * 1e9).round();
    qa.partial_cmp(&qb).unwrap_or(Ordering::Equal).then(a.arg().partial_cmp(&b.arg()).unwrap_or(Ordering::Equal))
}

pub fn pb_coefficients(roots: &[C64]) -> Vec<C64> {
    let mut c = vec![ONE];
    for &r in roots {
        let mut next = vec![ZERO; c.len() + 1];
        for (i, &x) in c.iter().enumerate() {
            next[i] += x;
            next[i + 1] -= x / r;
        }
        c = next;
    }
    c
}

fn pb(roots: &[C64], z: C64) -> C64 {
    roots.iter().fold(ONE, |acc, &r| acc * (ONE - z / r))
}

impl BetheRootSet {
    /// Validates the roots, sorts them canonically and records the BAE residual.
    pub fn new(mut roots: Vec<C64>, two_sz: i64, p: &ModelParams, provenance: Provenance) -> Result<Self> {
        if roots.iter().any(|z| !z.re.is_finite() || !z.im.is_finite() || z.norm() == 0.0) {
            return Err(Error::InadmissibleRoots("roots must be finite and nonzero".into()));
        }
        for i in 0..roots.len() {
            for j in 0..i {
                let s = roots[i].norm().max(roots[j].norm());
                if (roots[i] - roots[j]).norm() <= 1e-8 * s {
                    return Err(Error::InadmissibleRoots(format!("roots {} and {} coincide", roots[j], roots[i])));
                }
            }
        }
        if (p.m as i64 - two_sz).rem_euclid(2) != 0 || two_sz.abs() > p.m as i64 {
            return Err(Error::InvalidParameter(format!("2S^z = {two_sz} is not a sector of M = {}", p.m)));
        }
        roots.sort_by(canonical_cmp);
        let mut rs = Self { pb_coeffs: pb_coefficients(&roots), roots, two_sz, residual: 0.0, provenance };
        rs.residual = bae_residual(&rs, p)?.iter().map(|r| r.norm()).fold(0.0, f64::max);
        if provenance == Provenance::Solved && rs.residual >= 1e-10 {
            return Err(Error::InadmissibleRoots(format!("BAE residual {:e}", rs.residual)));
        }
        Ok(rs)
    }

    /// Roots in the sector 2S^z = M − 2 n_B.
    pub fn from_roots(roots: Vec<C64>, p: &ModelParams, provenance: Provenance) -> Result<Self> {
        let two_sz = p.m as i64 - 2 * roots.len() as i64;
        Self::new(roots, two_sz, p, provenance)
    }

    pub fn vacuum(p: &ModelParams) -> Self {
        Self { roots: Vec::new(), two_sz: p.m as i64, pb_coeffs: vec![ONE], residual: 0.0, provenance: Provenance::Manual }
    }

    pub fn n_b(&self) -> usize {
        self.roots.len()
    }

    pub fn sz(&self) -> f64 {
        self.two_sz as f64 / 2.0
    }

    pub fn pb(&self, z: C64) -> C64 {
        pb(&self.roots, z)
    }

    /// Same roots, different S^z label.
    pub fn with_two_sz(&self, two_sz: i64) -> Self {
        Self { two_sz, ..self.clone() }
    }
}

/// The two terms ⟨0|A|0⟩-like and ⟨0|D|0⟩-like of the Bethe equation for root i,
/// with the pole factor Π(z_i q² − ζ_m) cleared.
fn bae_terms(roots: &[C64], i: usize, p: &ModelParams) -> (C64, C64) {
    let nb = roots.len() as i32;
    let q2 = p.q * p.q;
    let zi = roots[i];
    let a = p.lambda * p.q.powi(nb) * pb(roots, zi / q2) * p.zeta_product(|zt| zi * q2 - zt);
    let d = p.q.powi(p.m as i32 - nb) / p.lambda * p.zeta_product(|zt| zi - zt) * pb(roots, zi * q2);
    (a, d)
}

/// Per-root Bethe-equation residual normalized by the larger term.
pub fn bae_residual(rs: &BetheRootSet, p: &ModelParams) -> Result<Vec<C64>> {
    let q2 = p.q * p.q;
    (0..rs.roots.len())
        .map(|i| {
            let zi = rs.roots[i];
            if p.zeta.iter().any(|&zt| (zi * q2 - zt).norm() < 1e-10 * zt.norm()) {
                return Err(Error::SingularArgument(format!("root {zi} sits on z q^2 = zeta")));
            }
            let (a, d) = bae_terms(&rs.roots, i, p);
            let s = a.norm().max(d.norm());
            Ok(if s == 0.0 { ZERO } else { (a + d) / s })
        })
        .collect()
}

/// How solve_bae draws its starting points.
#[derive(Clone, Debug)]
pub struct SeedStrategy {
    pub count: usize,
    pub seed: u64,
    /// Starting points tried before the random ones (e.g. continuation).
    pub explicit: Vec<Vec<C64>>,
    /// Stop once this many distinct solutions are found.
    pub target: Option<usize>,
}

impl Default for SeedStrategy {
    fn default() -> Self {
        Self { count: 200, seed: 1, explicit: Vec::new(), target: None }
    }
}

#[derive(Clone, Debug)]
pub struct BaeSolutions {
    pub sets: Vec<BetheRootSet>,
    pub seeds_tried: usize,
    pub converged: usize,
    /// True when a target count was requested and not reached.
    pub incomplete: bool,
}

/// Cleared Bethe system F_i and its holomorphic Jacobian.
fn bae_system(z: &[C64], p: &ModelParams) -> (Vec<C64>, CMatrix, Vec<f64>) {
    let n = z.len();
    let nb = n as i32;
    let u = p.q * p.q;
    let c1 = p.lambda * p.q.powi(nb) * (ONE - ONE / u);
    let c2 = p.q.powi(p.m as i32 - nb) / p.lambda * (ONE - u);
    let mut f = vec![ZERO; n];
    let mut jac = CMatrix::zeros(n, n);
    let mut scale = vec![0.0; n];
    for i in 0..n {
        let zi = z[i];
        // Factors of each term with their derivatives in z_i and in the other z_k.
        let mut t1: Vec<(C64, C64, Option<usize>)> = Vec::new();
        let mut t2: Vec<(C64, C64, Option<usize>)> = Vec::new();
        for k in 0..n {
            if k != i {
                t1.push((z[k] - zi / u, -ONE / u, Some(k)));
                t2.push((z[k] - zi * u, -u, Some(k)));
            }
        }
        for &zt in &p.zeta {
            t1.push((zi * u - zt, u, None));
            t2.push((zi - zt, ONE, None));
        }
        let mut add = |coef: C64, fac: &[(C64, C64, Option<usize>)], f_i: &mut C64, sc: &mut f64| {
            let prod = fac.iter().fold(coef, |a, x| a * x.0);
            *f_i += prod;
            *sc = sc.max(prod.norm());
            for l in 0..fac.len() {
                let others = fac.iter().enumerate().filter(|(o, _)| *o != l).fold(coef, |a, (_, x)| a * x.0);
                jac[(i, i)] += others * fac[l].1;
                if let Some(k) = fac[l].2 {
                    jac[(i, k)] += others;
                }
            }
        };
        let mut fi = ZERO;
        let mut sc = 0.0;
        add(c1, &t1, &mut fi, &mut sc);
        add(c2, &t2, &mut fi, &mut sc);
        f[i] = fi;
        scale[i] = sc;
    }
    (f, jac, scale)
}

fn scaled_residual(f: &[C64], scale: &[f64]) -> f64 {
    f.iter().zip(scale).map(|(x, s)| if *s > 0.0 { x.norm() / s } else { x.norm() }).fold(0.0, f64::max)
}

/// Smooth merit Σ|F_i/s_i|², for the line search.
fn scaled_l2(f: &[C64], scale: &[f64]) -> f64 {
    f.iter().zip(scale).map(|(x, s)| if *s > 0.0 { x.norm_sqr() / (s * s) } else { x.norm_sqr() }).sum()
}

/// Deflation factor η = Π_s (1/‖z−s‖² + 1) and ∇ log η as a real 2n vector.
fn deflation(z: &[C64], found: &[Vec<C64>]) -> (f64, Vec<f64>) {
    let n = z.len();
    let mut eta = 1.0;
    let mut g = vec![0.0; 2 * n];
    for s in found {
        let d2: f64 = z.iter().zip(s).map(|(a, b)| (a - b).norm_sqr()).sum();
        let d2 = d2.max(1e-300);
        let m = 1.0 / d2 + 1.0;
        eta *= m;
        let coef = -2.0 / (d2 * d2) / m;
        for k in 0..n {
            let dz = z[k] - s[k];
            g[k] += coef * dz.re;
            g[n + k] += coef * dz.im;
        }
    }
    (eta, g)
}

fn newton(start: &[C64], p: &ModelParams, found: &[Vec<C64>], max_iter: usize) -> Option<Vec<C64>> {
    let n = start.len();
    let mut z = start.to_vec();
    let merit = |z: &[C64]| {
        let (f, _, s) = bae_system(z, p);
        let (eta, _) = deflation(z, found);
        eta * scaled_l2(&f, &s)
    };
    let mut cur = merit(&z);
    for _ in 0..max_iter {
        let (f, jac, _) = bae_system(&z, p);
        let rhs: Vec<C64> = f.iter().map(|x| -x).collect();
        let delta = solve_linear(&jac, &rhs).ok()?;
        let (_, g) = deflation(&z, found);
        let gd: f64 = (0..n).map(|k| g[k] * delta[k].re + g[n + k] * delta[k].im).sum();
        let denom = 1.0 + gd;
        let step: Vec<C64> = if denom.abs() > 1e-12 { delta.iter().map(|d| d / denom).collect() } else { delta };
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..12 {
            let trial: Vec<C64> = z.iter().zip(&step).map(|(a, d)| a + d * t).collect();
            let m = merit(&trial);
            if m.is_finite() && m < cur {
                z = trial;
                cur = m;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            break;
        }
        let (f, _, s) = bae_system(&z, p);
        if scaled_residual(&f, &s) < 1e-14 {
            break;
        }
    }
    // Undeflated polish.
    for _ in 0..8 {
        let (f, jac, s) = bae_system(&z, p);
        if scaled_residual(&f, &s) < 1e-15 {
            break;
        }
        let rhs: Vec<C64> = f.iter().map(|x| -x).collect();
        let delta = solve_linear(&jac, &rhs).ok()?;
        let trial: Vec<C64> = z.iter().zip(&delta).map(|(a, d)| a + d).collect();
        let (ft, _, st) = bae_system(&trial, p);
        if scaled_residual(&ft, &st) < scaled_residual(&f, &s) {
            z = trial;
        } else {
            break;
        }
    }
    if z.iter().all(|x| x.re.is_finite() && x.im.is_finite()) {
        Some(z)
    } else {
        None
    }
}

/// Undeflated damped Newton from a nearby point; returns the roots and the
/// scaled residual of the cleared system. Used for continuation in q.
pub fn bae_refine(start: &[C64], p: &ModelParams) -> Result<(Vec<C64>, f64)> {
    let mut z = start.to_vec();
    let mut best = (z.clone(), f64::INFINITY);
    for _ in 0..40 {
        let (f, jac, s) = bae_system(&z, p);
        let r = scaled_residual(&f, &s);
        if !r.is_finite() {
            break;
        }
        if r < best.1 {
            best = (z.clone(), r);
        }
        if r < 1e-15 {
            break;
        }
        let rhs: Vec<C64> = f.iter().map(|x| -x).collect();
        let Ok(delta) = solve_linear(&jac, &rhs) else { break };
        z.iter_mut().zip(&delta).for_each(|(a, d)| *a += d);
    }
    if best.1 < 1e-10 {
        return Ok(best);
    }
    let z = newton(start, p, &[], 60).ok_or_else(|| Error::NonConvergence("Newton step produced no finite iterate".into()))?;
    let (f, _, s) = bae_system(&z, p);
    Ok((z, scaled_residual(&f, &s)))
}

/// Greedy multiset match: max relative distance between the sorted sets.
/// Equal as multisets, each pair within `tol` relative.
pub fn same_set(a: &[C64], b: &[C64], tol: f64) -> bool {
    let mut used = vec![false; b.len()];
    for x in a {
        let best = (0..b.len())
            .filter(|&j| !used[j])
            .min_by(|&i, &j| (b[i] - x).norm().partial_cmp(&(b[j] - x).norm()).unwrap_or(Ordering::Equal));
        match best {
            Some(j) if (b[j] - x).norm() <= tol * x.norm().max(b[j].norm()) => used[j] = true,
            _ => return false,
        }
    }
    true
}

fn permutations(v: &[C64]) -> Vec<Vec<C64>> {
    if v.len() <= 1 {
        return vec![v.to_vec()];
    }
    let mut out = Vec::new();
    for i in 0..v.len() {
        let mut rest = v.to_vec();
        let x = rest.remove(i);
        for mut p in permutations(&rest) {
            p.insert(0, x);
            out.push(p);
        }
    }
    out
}

/// Multi-start damped Newton on the cleared Bethe equations with deflation.
pub fn solve_bae(p: &ModelParams, n_b: usize, seeds: &SeedStrategy) -> Result<BaeSolutions> {
    if n_b > p.m {
        return Err(Error::InvalidParameter(format!("n_B = {n_b} exceeds M = {}", p.m)));
    }
    if n_b == 0 {
        return Ok(BaeSolutions { sets: vec![BetheRootSet::vacuum(p)], seeds_tried: 0, converged: 0, incomplete: false });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seeds.seed);
    let structured = seeds.count / 10;
    let mut starts: Vec<Vec<C64>> = seeds.explicit.iter().filter(|s| s.len() == n_b).cloned().collect();
    for s in 0..seeds.count {
        let v: Vec<C64> = (0..n_b)
            .map(|_| {
                let r = if s < structured {
                    rng.gen_range(0.9..1.1)
                } else {
                    (rng.gen_range(0.1f64.ln()..10f64.ln())).exp()
                };
                C64::from_polar(r, rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI))
            })
            .collect();
        starts.push(v);
    }
    let mut sets: Vec<BetheRootSet> = Vec::new();
    let mut deflated: Vec<Vec<C64>> = Vec::new();
    let mut converged = 0;
    let mut tried = 0;
    for start in &starts {
        if let Some(t) = seeds.target {
            if sets.len() >= t {
                break;
            }
        }
        tried += 1;
        let Some(z) = newton(start, p, &deflated, 100) else { continue };
        if z.iter().any(|x| x.norm() < 1e-6 || x.norm() > 1e6) {
            continue;
        }
        let Ok(rs) = BetheRootSet::new(z.clone(), p.m as i64 - 2 * n_b as i64, p, Provenance::Solved) else {
            continue;
        };
        if rs.residual >= 1e-12 {
            continue;
        }
        converged += 1;
        if sets.iter().any(|s| same_set(&s.roots, &rs.roots, 1e-8)) {
            continue;
        }
        deflated.extend(permutations(&rs.roots));
        sets.push(rs);
    }
    sort_sets(&mut sets);
    let incomplete = seeds.target.map(|t| sets.len() < t).unwrap_or(false);
    Ok(BaeSolutions { sets, seeds_tried: tried, converged, incomplete })
}

/// Bethe roots of every sector eigenvector of T that is also a Q eigenvector:
/// exact diagonalization, roots from the Q spectrum, then a Newton polish.
/// Independent of the random-start solver; costs one sector diagonalization.
pub fn solve_bae_spectral(p: &ModelParams, n_b: usize) -> Result<BaeSolutions> {
    if 2 * n_b > p.m {
        return Ok(BaeSolutions { sets: Vec::new(), seeds_tried: 0, converged: 0, incomplete: false });
    }
    if n_b == 0 {
        return Ok(BaeSolutions { sets: vec![BetheRootSet::vacuum(p)], seeds_tried: 0, converged: 0, incomplete: false });
    }
    let two_sz = p.m as i64 - 2 * n_b as i64;
    let family = if p.root.is_some() {
        QFamily::Mu
    } else {
        check_qconv(p)?;
        QFamily::Plus { k: crate::operators::DEFAULT_WINDOW }
    };
    // Two spectral points so that accidental coincidences at one of them do not merge classes.
    let mut t = transfer_t(p, C64::new(0.53, 0.29))?.mat;
    t.axpy(C64::new(0.37, -0.11), &transfer_t(p, C64::new(-0.41, 0.77))?.mat);
    let idx = crate::operators::sector_indices(p.m, two_sz);
    let block = crate::operators::spin_sector_project(&t, p.m, two_sz)?;
    let pairs = crate::linalg::eigenpairs(&block, 1e-8 * block.norm().max(1.0))?;
    let sampler = QSampler::new(p, family, n_b)?;
    let mut sets: Vec<BetheRootSet> = Vec::new();
    let mut converged = 0;
    for pair in &pairs {
        let mut v = vec![ZERO; p.dim()];
        for (k, &i) in idx.iter().enumerate() {
            v[i] = pair.vector[k];
        }
        let Ok(rs) = sampler.roots(p, &v, two_sz) else { continue };
        if rs.n_b() != n_b {
            continue;
        }
        let Ok((z, r)) = bae_refine(&rs.roots, p) else { continue };
        if r >= 1e-10 || z.iter().any(|x| x.norm() < 1e-6 || x.norm() > 1e6) {
            continue;
        }
        let Ok(rs) = BetheRootSet::new(z, two_sz, p, Provenance::Solved) else { continue };
        converged += 1;
        if !sets.iter().any(|s| same_set(&s.roots, &rs.roots, 1e-8)) {
            sets.push(rs);
        }
    }
    sort_sets(&mut sets);
    Ok(BaeSolutions { sets, seeds_tried: pairs.len(), converged, incomplete: false })
}

fn sort_sets(sets: &mut [BetheRootSet]) {
    sets.sort_by(|a, b| {
        for (x, y) in a.roots.iter().zip(&b.roots) {
            let o = canonical_cmp(x, y);
            if o != Ordering::Equal {
                return o;
            }
        }
        Ordering::Equal
    });
}

#[derive(Clone, Debug)]
pub struct BetheState {
    pub vector: Vec<C64>,
    /// 2-norm of Π B(z_j)|0⟩ before normalization.
    pub raw_norm: f64,
}

/// Π_j B(z_j)|0⟩, normalized.
pub fn bethe_state(rs: &BetheRootSet, p: &ModelParams) -> Result<BetheState> {
    let mut v = vacuum(p.m);
    for &z in &rs.roots {
        v = b_operator(p, z)?.mul_vec(&v);
    }
    let raw_norm = normalize(&mut v);
    if raw_norm < 1e-10 {
        return Err(Error::StringCollapse { norm: raw_norm });
    }
    Ok(BetheState { vector: v, raw_norm })
}

/// Value at z of a function with removable singularities at `poles`:
/// within 1e−8 relative of a pole, symmetric ±h averages at h = 1e−6|z_j|
/// and h/2 are Richardson-combined.
pub fn removable_limit(z: C64, poles: &[C64], f: impl Fn(C64) -> C64) -> C64 {
    let near = poles.iter().find(|&&r| (z - r).norm() < 1e-8 * r.norm().max(1e-300));
    match near {
        None => f(z),
        Some(&r) => {
            let h = 1e-6 * r.norm();
            let avg = |h: f64| {
                let d = C64::new(h, 0.0);
                let e = C64::new(0.0, h);
                (f(z + d) + f(z - d) + f(z + e) + f(z - e)) / 4.0
            };
            (avg(h / 2.0) * 4.0 - avg(h)) / 3.0
        }
    }
}

/// Transfer-matrix eigenvalue on a Bethe state.
pub fn eig_t(rs: &BetheRootSet, p: &ModelParams, z: C64) -> C64 {
    let q2 = p.q * p.q;
    let nb = rs.roots.len() as i32;
    let f = |z: C64| {
        let den = rs.pb(z);
        p.lambda * p.q.powi(nb) * rs.pb(z / q2) / den
            + p.phi(z) * p.q.powi(p.m as i32 - nb) * rs.pb(z * q2) / (p.lambda * den)
    };
    removable_limit(z, &rs.roots, f)
}

/// Symbols Λ^i_{kk}, r^i_k and Boltzmann ratios of one Bethe state.
#[derive(Clone, Debug)]
pub struct EigenWeights {
    /// Lowest auxiliary index; row k of the tables is index `lo + k`.
    pub lo: i64,
    pub lambda_kk: Vec<Vec<C64>>,
    pub r: Vec<Vec<C64>>,
    pub b: CMatrix,
    pub c: CMatrix,
    pub c_prime: CMatrix,
}

/// Λ_{kl} = δ_l/α_k − β_{l+1}γ_l/(α_{l+1}α_k) from the closed-form elements.
pub fn lambda_symbol(lw: &LWeights, k: i64, l: i64) -> C64 {
    lw.delta_at(l) / lw.alpha_at(k) - lw.beta_at(l + 1) * lw.gamma_at(l) / (lw.alpha_at(l + 1) * lw.alpha_at(k))
}

pub fn r_symbol(lw: &LWeights, k: i64) -> C64 {
    lw.beta_at(k) / lw.alpha_at(k)
}

pub fn eigen_weights(rs: &BetheRootSet, fam: &LFamily, w: C64, q: C64) -> Result<EigenWeights> {
    let (lo, hi) = fam.index_range();
    let n = rs.roots.len();
    let mut lambda_kk = Vec::new();
    let mut r = Vec::new();
    for k in lo..=hi {
        let mut lrow = Vec::with_capacity(n);
        let mut rrow = Vec::with_capacity(n);
        for &zi in &rs.roots {
            let lw = fam.at(w / zi);
            let a = lw.alpha(k);
            if a.norm() < 1e-14 || lw.alpha(k + 1).norm() < 1e-14 && k < hi {
                return Err(Error::SingularArgument(format!(
                    "alpha vanishes at index {k}, ratio {}; perturb w",
                    w / zi
                )));
            }
            // Range-restricted β, γ carry the boundary zeros of the representation.
            let l = if k < hi {
                lw.delta(k) / a - lw.beta(k + 1) * lw.gamma(k) / (lw.alpha(k + 1) * a)
            } else {
                lw.delta(k) / a
            };
            lrow.push(l);
            rrow.push(lw.beta(k) / a);
        }
        lambda_kk.push(lrow);
        r.push(rrow);
    }
    let mut b = CMatrix::zeros(n, n);
    let mut c = CMatrix::zeros(n, n);
    let mut cp = CMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let bw = weights_sixvertex(rs.roots[i] / rs.roots[j], q)?;
            b[(i, j)] = bw.b;
            c[(i, j)] = bw.c;
            cp[(i, j)] = bw.c_prime;
        }
    }
    Ok(EigenWeights { lo, lambda_kk, r, b, c, c_prime: cp })
}

/// Residual of the two-root scalar identity behind the n_B = 2 proof,
/// normalized by the largest of its four terms.
pub fn cancellation_identity_residual(fam: &LFamily, w: C64, z1: C64, z2: C64, q: C64, k: i64) -> Result<f64> {
    let e1 = fam.at(w / z1);
    let e2 = fam.at(w / z2);
    let b12 = weights_sixvertex(z1 / z2, q)?.b;
    let b21 = weights_sixvertex(z2 / z1, q)?.b;
    let t = [
        r_symbol(&e1, k + 1) * r_symbol(&e2, k) / b12,
        r_symbol(&e2, k + 1) * r_symbol(&e1, k) / b21,
        -r_symbol(&e1, k + 1) * r_symbol(&e2, k) * lambda_symbol(&e1, k - 1, k - 1) / lambda_symbol(&e1, k - 1, k),
        -r_symbol(&e2, k + 1) * r_symbol(&e1, k) * lambda_symbol(&e1, k + 1, k + 1) / lambda_symbol(&e1, k, k + 1),
    ];
    let scale = t.iter().map(|x| x.norm()).fold(0.0, f64::max);
    let sum: C64 = t.iter().sum();
    Ok(if scale > 0.0 { sum.norm() / scale } else { 0.0 })
}

/// Σ_k ⟨0|Q_kk|0⟩ Π_j Λ^j_{kk}.
pub fn eig_conjecture_general(rs: &BetheRootSet, vacuum_q: &[C64], ew: &EigenWeights) -> Result<C64> {
    if vacuum_q.len() != ew.lambda_kk.len() {
        return Err(Error::LengthMismatch { expected: ew.lambda_kk.len(), got: vacuum_q.len() });
    }
    let _ = rs;
    Ok(vacuum_q
        .iter()
        .zip(&ew.lambda_kk)
        .map(|(v, row)| row.iter().fold(*v, |a, l| a * l))
        .sum())
}

/// Σ_{k<N′} λ^{−2k} q^{2kS} Π_m(y q^{−2k}/ζ_m − 1) / [P_B(y q^{−2k}) P_B(y q^{−2k−2})].
pub fn q_mu_ksum(rs: &BetheRootSet, p: &ModelParams, y: C64) -> Result<C64> {
    let np = p.n_prime()?;
    let q2 = p.q * p.q;
    let mut s = ZERO;
    for k in 0..np as i32 {
        let yk = y * q2.powi(-k);
        s += p.lambda.powi(-2 * k) * p.q.powi(k * rs.two_sz as i32) * p.phi_minus(yk)
            / (rs.pb(yk) * rs.pb(yk / q2));
    }
    Ok(s)
}

/// Q_μ(w) eigenvalue on a Bethe state.
pub fn eig_q_mu(rs: &BetheRootSet, p: &ModelParams, mu: Branched, w: C64) -> Result<C64> {
    p.n_prime()?;
    let np = p.n_prime()? as i32;
    let q2 = p.q * p.q;
    let poles: Vec<C64> = (0..np)
        .flat_map(|k| rs.roots.iter().flat_map(move |&r| [r * mu.value * q2.powi(k), r * mu.value * q2.powi(k + 1)]))
        .collect();
    let pref = p.q_branched().pow_half(rs.two_sz) * mu.pow_half(rs.two_sz);
    let f = |w: C64| {
        let y = w / mu.value;
        pref * rs.pb(w * mu.value) * rs.pb(y) * q_mu_ksum(rs, p, y).unwrap_or(ZERO)
    };
    Ok(removable_limit(w, &poles, f))
}

/// A truncated series with its geometric tail estimate.
#[derive(Clone, Copy, Debug)]
pub struct SeriesValue {
    pub value: C64,
    pub tail: f64,
    pub terms: usize,
}

/// Σ_{ℓ=1}^{terms} λ^{2ℓ} q^{−2ℓS} Π_m(z q^{2ℓ}/ζ_m − 1) / [P_B(z q^{2ℓ}) P_B(z q^{2ℓ−2})],
/// stopped early once terms fall below 1e−18 of the partial sum.
fn ell_sum(rs: &BetheRootSet, p: &ModelParams, z: C64, max_terms: usize) -> Result<SeriesValue> {
    let q2 = p.q * p.q;
    let l2 = p.lambda * p.lambda;
    let mut s = ZERO;
    let mut prev = 0.0;
    let mut last = 0.0;
    let mut used = 0;
    for l in 1..=max_terms as i32 {
        let zl = z * q2.powi(l);
        let t = l2.powi(l) * p.q.powi(-l * rs.two_sz as i32) * p.phi_minus(zl) / (rs.pb(zl) * rs.pb(zl / q2));
        s += t;
        prev = last;
        last = t.norm();
        used = l as usize;
        if l > 4 && last < 1e-18 * s.norm() && prev < 1e-17 * s.norm() {
            break;
        }
    }
    let ratio = if prev > 0.0 { last / prev } else { 0.0 };
    if ratio >= 1.0 && last > 1e-18 * s.norm() {
        return Err(Error::Divergence(format!("series terms grow (ratio {ratio:.3}) after {used} terms")));
    }
    let tail = if ratio < 1.0 { last * ratio / (1.0 - ratio) } else { 0.0 };
    Ok(SeriesValue { value: s, tail, terms: used })
}

fn shifted_poles(rs: &BetheRootSet, p: &ModelParams, max_l: i32) -> Vec<C64> {
    let q2 = p.q * p.q;
    (0..=max_l).flat_map(|l| rs.roots.iter().map(move |&r| r * q2.powi(-l))).collect()
}

/// Q_≤(z; r0, r1, r2 = 1) eigenvalue on a Bethe state.
pub fn eig_q_trunc(rs: &BetheRootSet, p: &ModelParams, r0: Branched, r1: C64, z: C64, terms: usize) -> Result<SeriesValue> {
    check_qconv(p)?;
    let pref = |z: C64| {
        p.q.powi(rs.two_sz as i32) / (p.lambda * p.lambda) * r0.pow_half(-rs.two_sz) * rs.pb(z * r1) * rs.pb(z)
    };
    let base = ell_sum(rs, p, z, terms)?;
    let poles = shifted_poles(rs, p, base.terms as i32);
    let value = removable_limit(z, &poles, |z| pref(z) * ell_sum(rs, p, z, terms).map(|s| s.value).unwrap_or(ZERO));
    Ok(SeriesValue { value, tail: base.tail * pref(z).norm(), terms: base.terms })
}

/// Q^± eigenvalues: Q⁺ in closed form, Q⁻ as its truncated series.
pub fn eig_q_osc(rs: &BetheRootSet, p: &ModelParams, sign: OscSign, z: C64, terms: usize) -> Result<SeriesValue> {
    match sign {
        OscSign::Plus => {
            let den = ONE - p.lambda * p.lambda * p.q.powi(-rs.two_sz as i32);
            if den.norm() < 1e-12 {
                return Err(Error::Divergence("lambda^2 q^{-2S^z} = 1".into()));
            }
            let sgn = if p.m % 2 == 0 { ONE } else { -ONE };
            Ok(SeriesValue { value: sgn * rs.pb(z) / den, tail: 0.0, terms: 0 })
        }
        OscSign::Minus => eig_q_trunc(rs, p, Branched::principal(ONE), ZERO, z, terms),
    }
}

/// T^(n)(z) eigenvalue; `two_s` overrides 2S^z (the shifted s at a root of unity).
pub fn eig_fusion(rs: &BetheRootSet, p: &ModelParams, n: usize, z: C64, two_s: Option<i64>) -> C64 {
    if n == 0 {
        return ZERO;
    }
    let ts = two_s.unwrap_or(rs.two_sz);
    let q2 = p.q * p.q;
    let l2 = p.lambda * p.lambda;
    let f = |z: C64| {
        let mut s = ZERO;
        for l in 1..=n as i32 {
            let zl = z * q2.powi(l);
            s += l2.powi(l) * p.q.powi(-l * ts as i32) * p.phi_minus(zl) / (rs.pb(zl) * rs.pb(zl / q2));
        }
        p.lambda.powi(-(n as i32) - 1) * p.q_branched().pow_half((n as i64 + 1) * ts) * rs.pb(z) * rs.pb(z * q2.powi(n as i32)) * s
    };
    removable_limit(z, &shifted_poles(rs, p, n as i32), f)
}

/// Which Q family roots_from_q_spectrum samples.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum QFamily {
    /// Q⁺ on a window of K states (generic q).
    Plus { k: usize },
    /// Q_μ at a root of unity.
    Mu,
}

fn sector_of(v: &[C64], m: usize) -> Result<i64> {
    let mut best: Option<i64> = None;
    let total: f64 = v.iter().map(|x| x.norm_sqr()).sum();
    for s in (0..=m).map(|d| m as i64 - 2 * d as i64) {
        let w: f64 = v.iter().enumerate().filter(|(i, _)| m as i64 - 2 * i.count_ones() as i64 == s).map(|(_, x)| x.norm_sqr()).sum();
        if w > (1.0 - 1e-16) * total {
            best = Some(s);
        }
    }
    best.ok_or_else(|| Error::NotEigenvector(1.0))
}

fn q_expectation(q: &CMatrix, v: &[C64]) -> Result<C64> {
    let qv = q.mul_vec(v);
    let e = inner(v, &qv) / inner(v, v);
    let res = qv.iter().zip(v).map(|(a, b)| (a - e * b).norm_sqr()).sum::<f64>().sqrt() / (vec_norm(v) * q.norm().max(1e-300));
    if res > 1e-8 {
        return Err(Error::NotEigenvector(res));
    }
    Ok(e)
}

/// Q operators at the sample points used to read P_B off a Q eigenvalue.
/// Built once per (parameters, n_B) and reused for every eigenvector.
pub struct QSampler {
    family: QFamily,
    n_b: usize,
    points: Vec<C64>,
    /// μ of each sample (family Mu only), for the q^S μ^S prefactor.
    mus: Vec<Branched>,
    ops: Vec<CMatrix>,
}

const Y0: C64 = C64::new(0.43, 0.29);

impl QSampler {
    pub fn new(p: &ModelParams, family: QFamily, n_b: usize) -> Result<Self> {
        let npts = n_b + 3;
        let mut points = Vec::new();
        let mut mus = Vec::new();
        let mut ops = Vec::new();
        for j in 0..npts {
            match family {
                QFamily::Plus { k } => {
                    let z = C64::from_polar(0.6 + 0.1 * j as f64, 0.4 + 1.1 * j as f64);
                    ops.push(q_osc(p, OscSign::Plus, z, k)?.mat);
                    points.push(z);
                }
                QFamily::Mu => {
                    let mu = Branched::principal(C64::from_polar(0.8 + 0.08 * j as f64, 0.3 + 0.9 * j as f64));
                    ops.push(q_mu(p, mu, Y0 * mu.value)?.mat);
                    points.push(mu.value * mu.value);
                    mus.push(mu);
                }
            }
        }
        Ok(Self { family, n_b, points, mus, ops })
    }

    /// Roots of one common eigenvector in the sector the sampler was built for.
    pub fn roots(&self, p: &ModelParams, eigvec: &[C64], two_sz: i64) -> Result<BetheRootSet> {
        if self.n_b == 0 {
            return BetheRootSet::new(Vec::new(), two_sz, p, Provenance::ExtractedFromQ);
        }
        let qb = p.q_branched();
        let mut values = Vec::with_capacity(self.ops.len());
        for (j, op) in self.ops.iter().enumerate() {
            let ev = q_expectation(op, eigvec)?;
            values.push(match self.family {
                QFamily::Plus { .. } => ev,
                QFamily::Mu => ev / (qb.pow_half(two_sz) * self.mus[j].pow_half(two_sz)),
            });
        }
        let coeffs = poly_from_samples(&PolySamples::new(self.points.clone(), values, self.n_b)?)?;
        if coeffs[0].norm() < 1e-12 * coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max) {
            return Err(Error::Ambiguous("Q eigenvalue vanishes at the origin; P_B normalization undefined".into()));
        }
        let mut roots = poly_roots(&coeffs)?;
        if let QFamily::Mu = self.family {
            roots.iter_mut().for_each(|t| *t *= Y0);
        }
        BetheRootSet::new(roots, two_sz, p, Provenance::ExtractedFromQ)
    }
}

/// Bethe roots read off the Q spectrum of a common eigenvector of T and Q.
///
/// At a root of unity the ratio y₀ = w/μ is held fixed while μ varies, so
/// that Q_μ(y₀μ)/(q^S μ^S) ∝ P_B(y₀μ²) and the z^{N′} factor never enters.
pub fn roots_from_q_spectrum(p: &ModelParams, eigvec: &[C64], family: QFamily) -> Result<BetheRootSet> {
    if eigvec.len() != p.dim() {
        return Err(Error::LengthMismatch { expected: p.dim(), got: eigvec.len() });
    }
    let t = transfer_t(p, C64::new(0.37, 0.61))?.mat;
    let tv = t.mul_vec(eigvec);
    let e = inner(eigvec, &tv) / inner(eigvec, eigvec);
    let res = tv.iter().zip(eigvec).map(|(a, b)| (a - e * b).norm_sqr()).sum::<f64>().sqrt() / vec_norm(eigvec);
    if res > 1e-8 * t.norm().max(1.0) {
        return Err(Error::NotEigenvector(res));
    }
    let two_sz = sector_of(eigvec, p.m)?;
    let nb = ((p.m as i64 - two_sz) / 2) as usize;
    QSampler::new(p, family, nb)?.roots(p, eigvec, two_sz)
}
