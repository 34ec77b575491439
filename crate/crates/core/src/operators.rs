//! Global operators on (C²)^⊗M: monodromies, the transfer matrix, the
//! Yang–Baxter generators, the Q-operator families and fusion matrices.
//!
//! Monodromies are evaluated MPO-style: for every starting auxiliary index
//! the vector of quantum-space operators is pushed through the chain one
//! site at a time, keeping only the auxiliary entries reachable so far.

use std::collections::HashMap;

use num_complex::Complex64 as C64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{BlockMonodromy, CMatrix, ONE, ZERO};
use crate::params::{Branched, ModelParams};
use crate::repkit::{fusion_site_operator, sixvertex_site_operator, LFamily, SiteOperator};

/// Default truncation window for the generic-q families.
pub const DEFAULT_WINDOW: usize = 40;

#[derive(Clone, Debug, PartialEq)]
pub enum Family {
    Transfer,
    QMu { mu: C64 },
    QWindow { r0: C64, r1: C64, r2: C64, k: usize },
    QPlus { k: usize },
    QMinus { k: usize },
    Fusion { n: usize },
}

#[derive(Clone, Debug)]
pub struct OperatorMeta {
    pub params: ModelParams,
    pub spectral_point: C64,
    pub family: Family,
    pub note: String,
    /// Geometric estimate of the omitted part of a truncated trace.
    pub tail_estimate: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct QuantumOperator {
    pub mat: CMatrix,
    pub meta: OperatorMeta,
}

impl QuantumOperator {
    fn new(mat: CMatrix, p: &ModelParams, z: C64, family: Family, note: &str) -> Self {
        Self {
            mat,
            meta: OperatorMeta {
                params: p.clone(),
                spectral_point: z,
                family,
                note: note.to_string(),
                tail_estimate: None,
            },
        }
    }
}

/// Operators P_k (k = auxiliary row) reached from auxiliary column `start`.
fn propagate(sites: &[SiteOperator], start: usize) -> Vec<Option<CMatrix>> {
    let d = sites[0].aux_dim;
    let mut cur: Vec<Option<CMatrix>> = vec![None; d];
    cur[start] = Some(CMatrix::identity(1));
    for site in sites {
        let mut next: Vec<Option<CMatrix>> = vec![None; d];
        for (kp, p) in cur.iter().enumerate() {
            let Some(p) = p else { continue };
            let n = p.rows();
            for &(k, a, b, v) in &site.columns[kp] {
                let out = next[k].get_or_insert_with(|| CMatrix::zeros(2 * n, 2 * n));
                let w = 2 * n;
                let dst = out.as_mut_slice();
                let src = p.as_slice();
                for r in 0..n {
                    let row = (2 * r + a) * w + b;
                    for c in 0..n {
                        let x = src[r * n + c];
                        if x != ZERO {
                            dst[row + 2 * c] += v * x;
                        }
                    }
                }
            }
        }
        cur = next;
    }
    cur
}

fn check_sites(sites: &[SiteOperator]) -> Result<usize> {
    let first = sites.first().ok_or_else(|| Error::InvalidParameter("empty chain".into()))?;
    if sites.iter().any(|s| s.aux_dim != first.aux_dim) {
        return Err(Error::Shape("site operators disagree on the auxiliary dimension".into()));
    }
    Ok(first.aux_dim)
}

/// Full block grid of L_M ⋯ L_1, with `row_twist[k]` multiplying auxiliary row k.
pub fn monodromy_from_sites(sites: &[SiteOperator], row_twist: Option<&[C64]>) -> Result<BlockMonodromy> {
    let d = check_sites(sites)?;
    if let Some(t) = row_twist {
        if t.len() != d {
            return Err(Error::LengthMismatch { expected: d, got: t.len() });
        }
    }
    let dim = 1usize << sites.len();
    let columns: Vec<Vec<Option<CMatrix>>> = (0..d).into_par_iter().map(|j| propagate(sites, j)).collect();
    let mut blocks = Vec::with_capacity(d * d);
    for k in 0..d {
        for col in &columns {
            let mut b = col[k].clone().unwrap_or_else(|| CMatrix::zeros(dim, dim));
            if let Some(t) = row_twist {
                b = b.scale(t[k]);
            }
            blocks.push(b);
        }
    }
    BlockMonodromy::new(d, blocks, 1)
}

/// Σ_n weights[n] (L_M ⋯ L_1)_{nn} together with the norm of each term.
pub fn traced_from_sites(sites: &[SiteOperator], weights: &[C64]) -> Result<(CMatrix, Vec<f64>)> {
    let d = check_sites(sites)?;
    if weights.len() != d {
        return Err(Error::LengthMismatch { expected: d, got: weights.len() });
    }
    let dim = 1usize << sites.len();
    let terms: Vec<CMatrix> = (0..d)
        .into_par_iter()
        .map(|j| {
            if weights[j] == ZERO {
                return CMatrix::zeros(dim, dim);
            }
            let mut col = propagate(sites, j);
            col[j].take().map(|m| m.scale(weights[j])).unwrap_or_else(|| CMatrix::zeros(dim, dim))
        })
        .collect();
    let norms = terms.iter().map(|t| t.norm()).collect();
    let mut out = CMatrix::zeros(dim, dim);
    for t in &terms {
        out += t;
    }
    Ok((out, norms))
}

/// One site operator per chain site for an L family at spectral point w.
pub fn family_sites(fam: &LFamily, p: &ModelParams, w: C64) -> Vec<SiteOperator> {
    p.zeta.iter().map(|&zt| fam.at(w / zt).site_operator()).collect()
}

pub fn sixvertex_sites(p: &ModelParams, z: C64) -> Result<Vec<SiteOperator>> {
    p.zeta.iter().map(|&zt| sixvertex_site_operator(z / zt, p.q)).collect()
}

/// Monodromy of an L family with the twist λ^{h′} on the auxiliary rows.
pub fn monodromy(fam: &LFamily, p: &ModelParams, w: C64) -> Result<BlockMonodromy> {
    let sites = family_sites(fam, p, w);
    monodromy_from_sites(&sites, Some(&fam.twist_weights(p.lambda)))
}

/// Six-vertex monodromy with the twist λ^{σᶻ} on the auxiliary rows.
pub fn sixvertex_monodromy(p: &ModelParams, z: C64) -> Result<BlockMonodromy> {
    let sites = sixvertex_sites(p, z)?;
    monodromy_from_sites(&sites, Some(&[p.lambda, ONE / p.lambda]))
}

pub fn transfer_t(p: &ModelParams, z: C64) -> Result<QuantumOperator> {
    let sites = sixvertex_sites(p, z)?;
    let (mat, _) = traced_from_sites(&sites, &[p.lambda, ONE / p.lambda])?;
    Ok(QuantumOperator::new(mat, p, z, Family::Transfer, "trace with lambda^{sigma^z}"))
}

/// Yang–Baxter generators, twist included: A = λ⟨0|·|0⟩, B = λ⟨0|·|1⟩, C = λ⁻¹⟨1|·|0⟩, D = λ⁻¹⟨1|·|1⟩.
#[derive(Clone, Debug)]
pub struct Abcd {
    pub a: CMatrix,
    pub b: CMatrix,
    pub c: CMatrix,
    pub d: CMatrix,
}

pub fn abcd(p: &ModelParams, z: C64) -> Result<Abcd> {
    let m = sixvertex_monodromy(p, z)?;
    Ok(Abcd {
        a: m.block(0, 0).clone(),
        b: m.block(0, 1).clone(),
        c: m.block(1, 0).clone(),
        d: m.block(1, 1).clone(),
    })
}

pub fn b_operator(p: &ModelParams, z: C64) -> Result<CMatrix> {
    Ok(sixvertex_monodromy(p, z)?.block(0, 1).clone())
}

pub fn q_mu(p: &ModelParams, mu: Branched, w: C64) -> Result<QuantumOperator> {
    let fam = LFamily::root_of_unity(mu, p)?;
    let sites = family_sites(&fam, p, w);
    let (mat, _) = traced_from_sites(&sites, &fam.twist_weights(p.lambda))?;
    Ok(QuantumOperator::new(
        mat,
        p,
        w,
        Family::QMu { mu: mu.value },
        "normalization: leading vacuum coefficient, no extra factor",
    ))
}

/// Closed-form vacuum diagonal λ^{−2n} Π_m α_n(w/ζ_m) over the family's index range.
pub fn vacuum_diagonal(fam: &LFamily, p: &ModelParams, w: C64) -> Vec<C64> {
    let (lo, hi) = fam.index_range();
    (lo..=hi)
        .map(|n| {
            let a = p.zeta_product(|zt| fam.at(w / zt).alpha_at(n));
            p.lambda.powi(-2 * n as i32) * a
        })
        .collect()
}

/// |λ| bound min(|q|, |q|⁻¹)^{M/2} for the generic-q traces.
pub fn qconv_bound(p: &ModelParams) -> f64 {
    let a = p.q.norm();
    a.min(1.0 / a).powf(p.m as f64 / 2.0)
}

/// Per-index decay ratio |λ|² max(|q|, |q|⁻¹)^M of the generic-q traces.
pub fn qconv_ratio(p: &ModelParams) -> f64 {
    let a = p.q.norm();
    p.lambda.norm_sqr() * a.max(1.0 / a).powi(p.m as i32)
}

pub fn check_qconv(p: &ModelParams) -> Result<()> {
    let bound = 0.9 * qconv_bound(p);
    let l = p.lambda.norm();
    if !(l < bound) {
        return Err(Error::ConvergenceBound { lambda_abs: l, bound });
    }
    Ok(())
}

/// Trace over the window {−K+1, …, 0} of the generic-q family without the
/// convergence and tail checks. The tail estimate is attached to the meta.
pub fn q_window_raw(p: &ModelParams, r0: Branched, r1: C64, r2: C64, w: C64, k: usize) -> Result<QuantumOperator> {
    let fam = LFamily::generic(r0, r1, r2, k, p.q)?;
    let sites = family_sites(&fam, p, w);
    let (mat, norms) = traced_from_sites(&sites, &fam.twist_weights(p.lambda))?;
    let rho = qconv_ratio(p);
    let tail = if rho < 1.0 { norms[0] * rho / (1.0 - rho) } else { f64::INFINITY };
    let mut op = QuantumOperator::new(
        mat,
        p,
        w,
        Family::QWindow { r0: r0.value, r1, r2, k },
        "window n = -K+1..0, weights lambda^{-2n}",
    );
    op.meta.tail_estimate = Some(tail);
    Ok(op)
}

fn checked_window(op: QuantumOperator, k: usize) -> Result<QuantumOperator> {
    let tail = op.meta.tail_estimate.unwrap_or(0.0);
    let target = 1e-12 * op.mat.norm();
    if tail > target {
        return Err(Error::WindowTooSmall { k, tail, target });
    }
    Ok(op)
}

/// Q_≤(w; r0, r1, r2 = 1) on a window of K auxiliary states.
pub fn q_trunc(p: &ModelParams, r0: Branched, r1: C64, w: C64, k: usize) -> Result<QuantumOperator> {
    check_qconv(p)?;
    checked_window(q_window_raw(p, r0, r1, ONE, w, k)?, k)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OscSign {
    Plus,
    Minus,
}

/// Q^± from the q-oscillator representations ϱ±.
pub fn q_osc(p: &ModelParams, sign: OscSign, w: C64, k: usize) -> Result<QuantumOperator> {
    check_qconv(p)?;
    let (r1, r2) = match sign {
        OscSign::Plus => (ONE, ZERO),
        OscSign::Minus => (ZERO, ONE),
    };
    let mut op = checked_window(q_window_raw(p, Branched::principal(ONE), r1, r2, w, k)?, k)?;
    op.meta.family = match sign {
        OscSign::Plus => Family::QPlus { k },
        OscSign::Minus => Family::QMinus { k },
    };
    Ok(op)
}

/// T^(n)(z) from the spin-(n−1)/2 fusion L-operator (direct construction).
pub fn fusion_t(p: &ModelParams, n: usize, z: C64) -> Result<QuantumOperator> {
    let dim = p.dim();
    if n == 0 {
        return Ok(QuantumOperator::new(CMatrix::zeros(dim, dim), p, z, Family::Fusion { n }, "T^(0) = 0"));
    }
    let q = p.q_branched();
    let qn = q.value.powi(n as i32);
    let sites: Vec<SiteOperator> = p
        .zeta
        .iter()
        .map(|&zt| fusion_site_operator(z * qn / zt, n - 1, q))
        .collect::<Result<_>>()?;
    let weights: Vec<C64> = (0..n).map(|m| p.lambda.powi(n as i32 - 1 - 2 * m as i32)).collect();
    let (mat, _) = traced_from_sites(&sites, &weights)?;
    Ok(QuantumOperator::new(mat, p, z, Family::Fusion { n }, "rho_+ = wq, rho_- = 1"))
}

/// T^(n)(z) from T^(1) and T^(2) through the fusion recursion; works at
/// roots of unity where the direct construction is obstructed.
pub fn fusion_t_recursive(p: &ModelParams, n: usize, z: C64) -> Result<QuantumOperator> {
    let dim = p.dim();
    let q2 = p.q * p.q;
    let at = |j: i64| z * q2.powi(j as i32);
    let phi1 = |u: C64| p.zeta_product(|zt| u * q2 / zt - ONE);
    let phi0 = |u: C64| p.phi_minus(u);
    // Iterative bottom-up evaluation: f(L, j) = T^(L)(z q^{2j}).
    let mut f: HashMap<(usize, i64), CMatrix> = HashMap::new();
    let max_j = n as i64;
    for j in 0..=max_j + 2 {
        f.insert((0, j), CMatrix::zeros(dim, dim));
        f.insert((1, j), CMatrix::identity(dim).scale(phi1(at(j))));
        let u = at(j);
        let t = transfer_t(p, u * q2)?.mat;
        let pref = p.q_half.powi(-(p.m as i32)) * phi1(u * q2);
        f.insert((2, j), t.scale(pref));
    }
    for lvl in 2..n {
        for j in 0..=(n - lvl - 1) as i64 {
            let den = phi1(at(j + 1));
            if den.norm() < 1e-12 {
                return Err(Error::SingularArgument(format!("fusion recursion divides by {den} at level {lvl}")));
            }
            let prod = &f[&(lvl, j + 1)] * &f[&(2, j)];
            let mut num = prod;
            num.axpy(-phi0(at(j + 1)), &f[&(lvl - 1, j + 2)]);
            f.insert((lvl + 1, j), num.scale(ONE / den));
        }
    }
    let mat = f.remove(&(n, 0)).expect("recursion filled the requested level");
    Ok(QuantumOperator::new(mat, p, z, Family::Fusion { n }, "fusion recursion from T^(1), T^(2)"))
}

/// Basis indices of the sector with 2S^z = `two_sz`, ascending.
pub fn sector_indices(m: usize, two_sz: i64) -> Vec<usize> {
    (0..1usize << m).filter(|s| m as i64 - 2 * s.count_ones() as i64 == two_sz).collect()
}

pub fn spin_sector_project(op: &CMatrix, m: usize, two_sz: i64) -> Result<CMatrix> {
    if op.rows() != 1 << m || !op.is_square() {
        return Err(Error::Shape(format!("operator is not 2^{m} square")));
    }
    if (m as i64 - two_sz).rem_euclid(2) != 0 || two_sz.abs() > m as i64 {
        return Err(Error::InvalidParameter(format!("no sector 2S^z = {two_sz} at M = {m}")));
    }
    let idx = sector_indices(m, two_sz);
    Ok(op.submatrix(&idx, &idx))
}

/// Largest entry coupling different S^z sectors.
pub fn sector_leakage(op: &CMatrix, m: usize) -> f64 {
    let mut mx: f64 = 0.0;
    for i in 0..op.rows() {
        for j in 0..op.cols() {
            if (i.count_ones() != j.count_ones()) || m == 0 {
                mx = mx.max(op[(i, j)].norm());
            }
        }
    }
    mx
}

/// Spin reversal ⊗_m σˣ as a permutation matrix.
pub fn spin_reversal(m: usize) -> CMatrix {
    let d = 1usize << m;
    let mut r = CMatrix::zeros(d, d);
    for s in 0..d {
        r[(d - 1 - s, s)] = ONE;
    }
    r
}

/// Vector |0…0⟩.
pub fn vacuum(m: usize) -> Vec<C64> {
    let mut v = vec![ZERO; 1 << m];
    v[0] = ONE;
    v
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{aux_trace, c, commutator_residual, eigenvalues};

    fn generic4() -> ModelParams {
        ModelParams::generic_phase(4, 0.37, c(0.6, 0.2)).unwrap()
    }

    #[test]
    fn transfer_family_commutes() {
        let p = generic4().with_zeta(vec![ONE, c(1.1, 0.2), c(0.9, -0.1), c(1.0, 0.3)]).unwrap();
        let t1 = transfer_t(&p, c(0.3, 0.8)).unwrap().mat;
        let t2 = transfer_t(&p, c(-1.2, 0.4)).unwrap().mat;
        assert!(commutator_residual(&t1, &t2).unwrap() < 1e-13);
        assert!(sector_leakage(&t1, 4) < 1e-14);
    }

    #[test]
    fn trace_matches_grid() {
        let p = generic4();
        let z = c(0.4, -0.7);
        let g = sixvertex_monodromy(&p, z).unwrap();
        let t = transfer_t(&p, z).unwrap().mat;
        let via_grid = &(g.block(0, 0) + g.block(1, 1)) - &t;
        assert!(via_grid.max_abs() < 1e-13);
        let fam = LFamily::generic(Branched::principal(c(0.8, 0.3)), c(0.5, 0.1), ONE, 6, p.q).unwrap();
        let w = c(0.7, 0.2);
        let m = monodromy(&fam, &p, w).unwrap();
        let ones = vec![ONE; fam.aux_dim()];
        let direct = traced_from_sites(&family_sites(&fam, &p, w), &fam.twist_weights(p.lambda)).unwrap().0;
        assert!((&aux_trace(&m, &ones).unwrap() - &direct).max_abs() < 1e-12 * direct.max_abs());
    }

    #[test]
    fn vacuum_eigenvalue_of_t() {
        let p = generic4();
        let z = c(0.3, 0.5);
        let t = transfer_t(&p, z).unwrap().mat;
        let expect = p.lambda + p.phi(z) * p.q.powi(4) / p.lambda;
        let v = t.mul_vec(&vacuum(4));
        assert!((v[0] - expect).norm() < 1e-13);
        assert!(v[1..].iter().all(|x| x.norm() < 1e-14));
    }

    #[test]
    fn q_mu_vacuum_and_commutation() {
        let p = ModelParams::root_of_unity(3, 3, 1, c(0.8, 0.3)).unwrap();
        let mu = Branched::principal(c(0.7, 0.4));
        let w = c(0.2, 1.1);
        let q = q_mu(&p, mu, w).unwrap().mat;
        let fam = LFamily::root_of_unity(mu, &p).unwrap();
        let vac: C64 = vacuum_diagonal(&fam, &p, w).iter().sum();
        assert!((q[(0, 0)] - vac).norm() < 1e-12 * vac.norm());
        let t = transfer_t(&p, c(1.3, -0.2)).unwrap().mat;
        assert!(commutator_residual(&q, &t).unwrap() < 1e-13);
        let q2 = q_mu(&p, Branched::principal(c(-0.3, 0.9)), c(0.5, 0.5)).unwrap().mat;
        assert!(commutator_residual(&q, &q2).unwrap() < 1e-13);
    }

    #[test]
    fn truncated_q_commutes_with_t() {
        let p = ModelParams::generic_phase(4, 0.31, c(0.5, 0.2)).unwrap();
        let q = q_trunc(&p, Branched::principal(c(0.9, 0.1)), c(0.6, -0.3), c(0.8, 0.4), DEFAULT_WINDOW).unwrap();
        assert!(q.meta.tail_estimate.unwrap() < 1e-12 * q.mat.norm());
        let t = transfer_t(&p, c(0.4, 1.2)).unwrap().mat;
        assert!(commutator_residual(&q.mat, &t).unwrap() < 1e-12);
        let qp = q_osc(&p, OscSign::Plus, c(0.3, 0.1), DEFAULT_WINDOW).unwrap().mat;
        assert!(commutator_residual(&qp, &t).unwrap() < 1e-12);
        assert!(commutator_residual(&qp, &q.mat).unwrap() < 1e-12);
    }

    #[test]
    fn truncation_guards() {
        let p = ModelParams::generic_phase(4, 0.31, c(1.2, 0.0)).unwrap();
        let r = q_trunc(&p, Branched::principal(ONE), ONE, ONE, 40);
        assert!(matches!(r, Err(Error::ConvergenceBound { .. })));
        let p = ModelParams::generic_phase(4, 0.31, c(0.7, 0.0)).unwrap();
        let r = q_trunc(&p, Branched::principal(ONE), ONE, ONE, 5);
        assert!(matches!(r, Err(Error::WindowTooSmall { .. })));
        let r = q_window_raw(&p, Branched::principal(ONE), c(0.3, 0.0), c(0.2, 0.0), ONE, 5);
        assert!(matches!(r, Err(Error::Leakage { .. })));
    }

    #[test]
    fn fusion_level_two_is_shifted_transfer() {
        let p = ModelParams::generic_phase(3, 0.29, c(0.9, -0.2)).unwrap();
        let z = c(0.6, 0.7);
        let q2 = p.q * p.q;
        let t2 = fusion_t(&p, 2, z).unwrap().mat;
        let t = transfer_t(&p, z * q2).unwrap().mat;
        let pref = p.q_half.powi(-3) * p.zeta_product(|zt| z * q2 * q2 / zt - ONE);
        assert!((&t2 - &t.scale(pref)).max_abs() < 1e-12 * t2.max_abs());
        let t1 = fusion_t(&p, 1, z).unwrap().mat;
        assert!((&t1 - &CMatrix::identity(8).scale(p.zeta_product(|zt| z * q2 / zt - ONE))).max_abs() < 1e-13);
    }

    #[test]
    fn fusion_direct_matches_recursion() {
        let p = ModelParams::generic_phase(3, 0.29, c(0.9, -0.2)).unwrap();
        // |z| = 2 keeps the recursion's divisors Π(z q^{2j}/ζ − 1) away from zero.
        let z = c(1.2, 1.6);
        for n in 0..=4 {
            let a = fusion_t(&p, n, z).unwrap().mat;
            let b = fusion_t_recursive(&p, n, z).unwrap().mat;
            assert!((&a - &b).max_abs() <= 1e-12 * a.max_abs().max(1.0), "n = {n}");
        }
    }

    #[test]
    fn sectors_and_reversal() {
        assert_eq!(sector_indices(3, 1), vec![1, 2, 4]);
        let p = generic4();
        let t = transfer_t(&p, c(0.3, 0.2)).unwrap().mat;
        let mut all: Vec<C64> = Vec::new();
        for s in [-4, -2, 0, 2, 4] {
            all.extend(eigenvalues(&spin_sector_project(&t, 4, s).unwrap()).unwrap());
        }
        assert_eq!(all.len(), 16);
        assert!(spin_sector_project(&t, 4, 1).is_err());
        let r = spin_reversal(2);
        assert_eq!(r[(3, 0)], ONE);
        assert!((&r.matmul(&r).unwrap() - &CMatrix::identity(4)).max_abs() == 0.0);
    }
}
