//! Root-of-unity structure: the divided-power generators E^(N′), F^(N′),
//! degenerate multiplets of T, the polynomial P_S and the fate of Bethe
//! roots as q′ → q.

use std::f64::consts::PI;

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bethe::{bae_refine, bethe_state, q_mu_ksum, BetheRootSet};
use crate::error::{Error, Result};
use crate::linalg::{eigenpairs, inner, kron, pauli, poly_eval, poly_from_samples, poly_roots, two_sz_diag, CMatrix, PolySamples, ONE, ZERO};
use crate::operators::{q_mu, sector_indices, transfer_t};
use crate::params::{Branched, ModelParams};
use crate::repkit::qint;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Generator {
    E0,
    E1,
    F0,
    F1,
}

impl Generator {
    pub const ALL: [Generator; 4] = [Generator::E0, Generator::E1, Generator::F0, Generator::F1];

    fn is_e(self) -> bool {
        matches!(self, Generator::E0 | Generator::E1)
    }

    /// Change of 2S^z under one application.
    pub fn two_sz_step(self) -> i64 {
        match self {
            Generator::E1 | Generator::F0 => 2,
            Generator::E0 | Generator::F1 => -2,
        }
    }

    /// Evaluation image on one site and the diagonal of its K.
    fn local(self, qp: C64, zeta: C64) -> (CMatrix, [C64; 2]) {
        let k1 = [qp, ONE / qp];
        let k0 = [ONE / qp, qp];
        match self {
            Generator::E1 => (pauli::sp(), k1),
            Generator::F1 => (pauli::sm(), k1),
            Generator::E0 => (pauli::sm().scale(zeta), k0),
            Generator::F0 => (pauli::sp().scale(ONE / zeta), k0),
        }
    }
}

/// Δ^(M)(gen) on (C²)^⊗M: e ↦ Σ_m K⊗…⊗K⊗e⊗1⊗…, f ↦ Σ_m 1⊗…⊗f⊗K⁻¹⊗….
pub fn coproduct(gen: Generator, qp: C64, zeta: &[C64]) -> Result<CMatrix> {
    let m = zeta.len();
    let mut out = CMatrix::zeros(1 << m, 1 << m);
    for site in 0..m {
        let mut term = CMatrix::identity(1);
        for (j, &zt) in zeta.iter().enumerate() {
            let (op, k) = gen.local(qp, zt);
            let f = if j == site {
                op
            } else if gen.is_e() && j < site {
                CMatrix::diag(&k)
            } else if !gen.is_e() && j > site {
                CMatrix::diag(&[ONE / k[0], ONE / k[1]])
            } else {
                CMatrix::identity(2)
            };
            term = kron(&term, &f)?;
        }
        out.axpy(ONE, &term);
    }
    Ok(out)
}

/// Gaussian binomial in Q.
fn gauss_binom(n: usize, k: usize, big_q: C64) -> C64 {
    (0..k).fold(ONE, |acc, i| acc * (ONE - big_q.powi((n - i) as i32)) / (ONE - big_q.powi(i as i32 + 1)))
}

/// Δ^(M)(gen^n) by the q-binomial expansion of Δ = (1⊗Δ^(M−1))Δ.
///
/// With a = e⊗1, b = K⊗E one has ba = q′²ab, so Δ(e)^n = Σ_k [n,k]_{q′²} e^k K^{n−k} ⊗ E^{n−k};
/// for f, a = f⊗K⁻¹ and b = 1⊗F give Σ_k [n,k]_{q′²} f^{n−k} ⊗ F^k K^{−(n−k)}.
pub fn coproduct_power(gen: Generator, qp: C64, zeta: &[C64], power: usize) -> Result<CMatrix> {
    if zeta.is_empty() {
        return Err(Error::InvalidParameter("empty chain".into()));
    }
    let (op, k) = gen.local(qp, zeta[0]);
    let rest = &zeta[1..];
    if rest.is_empty() {
        return Ok(op.pow(power as u32));
    }
    let big_q = qp * qp;
    let rest_k: Vec<C64> = (0..1usize << rest.len())
        .map(|s| {
            rest.iter().enumerate().fold(ONE, |acc, (j, &zt)| {
                let kd = gen.local(qp, zt).1;
                acc * kd[(s >> (rest.len() - 1 - j)) & 1]
            })
        })
        .collect();
    let dim = 1 << zeta.len();
    let mut out = CMatrix::zeros(dim, dim);
    for j in 0..=power {
        let c = gauss_binom(power, j, big_q);
        let term = if gen.is_e() {
            let left = &op.pow(j as u32) * &CMatrix::diag(&[k[0].powi((power - j) as i32), k[1].powi((power - j) as i32)]);
            kron(&left, &coproduct_power(gen, qp, rest, power - j)?)?
        } else {
            let kinv: Vec<C64> = rest_k.iter().map(|x| x.powi(-((power - j) as i32))).collect();
            let right = &coproduct_power(gen, qp, rest, j)? * &CMatrix::diag(&kinv);
            kron(&op.pow((power - j) as u32), &right)?
        };
        out.axpy(c, &term);
    }
    Ok(out)
}

/// Δ^(M)(gen^n)/[n]_{q′}!.
pub fn divided_power(gen: Generator, qp: C64, zeta: &[C64], n: usize) -> Result<CMatrix> {
    let fact = (1..=n as i64).fold(ONE, |acc, j| acc * qint(j, qp));
    Ok(coproduct_power(gen, qp, zeta, n)?.scale(ONE / fact))
}

/// Default ε schedule for q′ = q e^{±iε}.
pub const DEFAULT_EPS: [f64; 2] = [1e-4, 5e-5];

#[derive(Clone, Debug)]
pub struct LoopGenerators {
    pub e0: CMatrix,
    pub e1: CMatrix,
    pub f0: CMatrix,
    pub f1: CMatrix,
    /// Largest relative gap between the extrapolated value and the finest sample.
    pub spread: f64,
    /// 2S^z sectors in which the generators are expected to commute with T:
    /// the commensurate ones at λ = 1, or those with λ = q^{±S^z}.
    pub claimed_sectors: Vec<i64>,
}

impl LoopGenerators {
    pub fn get(&self, g: Generator) -> &CMatrix {
        match g {
            Generator::E0 => &self.e0,
            Generator::E1 => &self.e1,
            Generator::F0 => &self.f0,
            Generator::F1 => &self.f1,
        }
    }
}

pub fn claimed_sectors(p: &ModelParams) -> Result<Vec<i64>> {
    let n = p.root.ok_or_else(|| Error::InvalidParameter("loop symmetry needs a root of unity".into()))?.n as i64;
    let qb = p.q_branched();
    let sectors = (0..=p.m).map(|d| p.m as i64 - 2 * d as i64);
    if (p.lambda - ONE).norm() < 1e-12 {
        Ok(sectors.filter(|s| s.rem_euclid(n) == 0).collect())
    } else {
        Ok(sectors
            .filter(|&s| {
                let qs = qb.pow_half(s);
                (p.lambda - qs).norm() < 1e-12 || (p.lambda - ONE / qs).norm() < 1e-12
            })
            .collect())
    }
}

/// lim_{q′→q} Δ^(M)(gen^{N′})/[N′]_{q′}!: symmetric pairs q e^{±iε} and
/// Richardson in ε² over the two schedule entries.
pub fn loop_generators(p: &ModelParams, eps_schedule: &[f64]) -> Result<LoopGenerators> {
    let np = p.n_prime()?;
    let [e1, e2] = match eps_schedule {
        [a, b] if *a > 0.0 && *b > 0.0 && a != b => [*a, *b],
        _ => return Err(Error::InvalidParameter("eps schedule needs two distinct positive entries".into())),
    };
    let sym = |g: Generator, e: f64| -> Result<CMatrix> {
        let a = divided_power(g, p.q * C64::from_polar(1.0, e), &p.zeta, np)?;
        let b = divided_power(g, p.q * C64::from_polar(1.0, -e), &p.zeta, np)?;
        let mut s = a.scale(C64::new(0.5, 0.0));
        s.axpy(C64::new(0.5, 0.0), &b);
        Ok(s)
    };
    let fine = if e1 < e2 { e1 } else { e2 };
    let mut out = Vec::new();
    let mut spread: f64 = 0.0;
    for g in Generator::ALL {
        let s1 = sym(g, e1)?;
        let s2 = sym(g, e2)?;
        let d = e1 * e1 - e2 * e2;
        let mut lim = s2.scale(C64::new(e1 * e1 / d, 0.0));
        lim.axpy(C64::new(-e2 * e2 / d, 0.0), &s1);
        let finest = if fine == e1 { &s1 } else { &s2 };
        let gap = (&lim - finest).norm() / lim.norm().max(1e-300);
        if gap > 1e-6 {
            return Err(Error::UnstableLimit(gap));
        }
        spread = spread.max(gap);
        out.push(lim);
    }
    let mut it = out.into_iter();
    Ok(LoopGenerators {
        e0: it.next().unwrap(),
        e1: it.next().unwrap(),
        f0: it.next().unwrap(),
        f1: it.next().unwrap(),
        spread,
        claimed_sectors: claimed_sectors(p)?,
    })
}

/// ‖[X, Y] restricted to the columns of the given sectors‖ / max(1, ‖X‖‖Y‖).
pub fn sector_commutator(x: &CMatrix, y: &CMatrix, m: usize, sectors: &[i64]) -> f64 {
    let c = &(x * y) - &(y * x);
    let cols: Vec<usize> = sectors.iter().flat_map(|&s| sector_indices(m, s)).collect();
    let rows: Vec<usize> = (0..c.rows()).collect();
    c.submatrix(&rows, &cols).norm() / f64::max(1.0, x.norm() * y.norm())
}

/// The unique change of 2S^z effected by `x`, or None if it mixes shifts.
pub fn spin_shift(x: &CMatrix, m: usize) -> Option<i64> {
    let s = two_sz_diag(m);
    let cut = 1e-12 * x.max_abs();
    let mut shift = None;
    for i in 0..x.rows() {
        for j in 0..x.cols() {
            if x[(i, j)].norm() > cut {
                let d = s[i] - s[j];
                match shift {
                    None => shift = Some(d),
                    Some(e) if e != d => return None,
                    _ => {}
                }
            }
        }
    }
    shift
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MemberBlock {
    pub two_sz: i64,
    pub multiplicity: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MuPattern {
    pub two_sz: i64,
    pub mu: Vec<C64>,
    /// Q_μ(z/μ) eigenvalue divided by its value at the first μ.
    pub ratios: Vec<C64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MultipletReport {
    pub class_id: usize,
    pub eigenvalue: C64,
    pub eigenvalue_probe2: C64,
    pub members: Vec<MemberBlock>,
    pub dimension: usize,
    pub highest_two_sz: i64,
    pub lowest_two_sz: i64,
    /// ‖E₁V‖, ‖F₀V‖ on the highest member (raising generators annihilate it).
    #[serde(with = "crate::serial::ext_opt_f64")]
    pub highest_weight_residual: Option<f64>,
    /// ‖E₀V‖, ‖F₁V‖ on the lowest member.
    #[serde(with = "crate::serial::ext_opt_f64")]
    pub lowest_weight_residual: Option<f64>,
    pub spins_differ_by_n_prime: Option<bool>,
    pub flag: Option<String>,
    pub mu_pattern: Vec<MuPattern>,
}

struct Item {
    two_sz: i64,
    e1: C64,
    e2: C64,
    vector: Vec<C64>,
}

/// Second probe point used to confirm eigenvalue coincidences.
fn second_probe(z: C64) -> C64 {
    z * C64::new(0.83, 0.41) + C64::new(0.07, -0.05)
}

const CLUSTER_TOL: f64 = 1e-8;

/// Classes of coinciding T(z_probe) eigenvalues across all S^z sectors,
/// confirmed at a second probe point.
pub fn multiplet_decompose(p: &ModelParams, z_probe: C64) -> Result<Vec<MultipletReport>> {
    let z2 = second_probe(z_probe);
    let t1 = transfer_t(p, z_probe)?.mat;
    let t2 = transfer_t(p, z2)?.mat;
    let sectors: Vec<i64> = (0..=p.m).map(|d| p.m as i64 - 2 * d as i64).collect();
    let per_sector: Vec<Result<Vec<Item>>> = sectors
        .par_iter()
        .map(|&s| {
            let idx = sector_indices(p.m, s);
            let b1 = t1.submatrix(&idx, &idx);
            let b2 = t2.submatrix(&idx, &idx);
            let tol = 1e-8 * b1.norm().max(1.0);
            let mut items = Vec::new();
            for e in eigenpairs(&b1, tol)? {
                let e2 = inner(&e.vector, &b2.mul_vec(&e.vector));
                let mut full = vec![ZERO; p.dim()];
                for (k, &i) in idx.iter().enumerate() {
                    full[i] = e.vector[k];
                }
                items.push(Item { two_sz: s, e1: e.value, e2, vector: full });
            }
            Ok(items)
        })
        .collect();
    let mut items = Vec::new();
    for r in per_sector {
        items.extend(r?);
    }
    let scale = items.iter().map(|it| it.e1.norm().max(it.e2.norm())).fold(1.0, f64::max);
    let tol = CLUSTER_TOL * scale;
    let mut classes: Vec<(Vec<usize>, Option<String>)> = Vec::new();
    for i in 0..items.len() {
        let mut placed = false;
        for (members, flag) in classes.iter_mut() {
            let r = &items[members[0]];
            let m1 = (r.e1 - items[i].e1).norm() < tol;
            let m2 = (r.e2 - items[i].e2).norm() < tol;
            if m1 && m2 {
                members.push(i);
                placed = true;
                break;
            }
            if m1 != m2 {
                *flag = Some("eigenvalue coincides at one probe point only".into());
            }
        }
        if !placed {
            classes.push((vec![i], None));
        }
    }
    let gens = if p.root.is_some() { Some(loop_generators(p, &DEFAULT_EPS)?) } else { None };
    let mus: Vec<Branched> = [1.0, 1.2, 1.5].iter().map(|&r| Branched::principal(C64::from_polar(r, 0.1))).collect();
    let qmus: Vec<CMatrix> = if p.root.is_some() {
        mus.iter().map(|&mu| q_mu(p, mu, z_probe / mu.value).map(|q| q.mat)).collect::<Result<_>>()?
    } else {
        Vec::new()
    };
    let np = p.n_prime().ok();
    let mut reports = Vec::new();
    for (cid, (members, flag)) in classes.into_iter().enumerate() {
        let mut blocks: Vec<MemberBlock> = Vec::new();
        for &i in &members {
            match blocks.iter_mut().find(|b| b.two_sz == items[i].two_sz) {
                Some(b) => b.multiplicity += 1,
                None => blocks.push(MemberBlock { two_sz: items[i].two_sz, multiplicity: 1 }),
            }
        }
        blocks.sort_by(|a, b| b.two_sz.cmp(&a.two_sz));
        let hi = blocks[0].two_sz;
        let lo = blocks[blocks.len() - 1].two_sz;
        let items = &items;
        let vecs_in = |s: i64| -> Vec<&Vec<C64>> {
            members.iter().filter(|&&i| items[i].two_sz == s).map(|&i| &items[i].vector).collect()
        };
        let annihilated = |gs: &[&CMatrix], s: i64| {
            let mut worst: f64 = 0.0;
            for v in vecs_in(s) {
                for g in gs {
                    let gv = g.mul_vec(v);
                    worst = worst.max(crate::linalg::vec_norm(&gv) / g.norm().max(1e-300));
                }
            }
            worst
        };
        let (hw, lw) = match &gens {
            Some(g) if g.claimed_sectors.contains(&hi) => {
                (Some(annihilated(&[&g.e1, &g.f0], hi)), Some(annihilated(&[&g.e0, &g.f1], lo)))
            }
            _ => (None, None),
        };
        let spins_ok = np.map(|n| blocks.iter().all(|b| (hi - b.two_sz).rem_euclid(2 * n as i64) == 0));
        let mut mu_pattern = Vec::new();
        if !qmus.is_empty() {
            for b in blocks.iter().filter(|b| b.multiplicity == 1) {
                let v = vecs_in(b.two_sz)[0];
                let ev: Vec<C64> = qmus.iter().map(|q| inner(v, &q.mul_vec(v))).collect();
                mu_pattern.push(MuPattern {
                    two_sz: b.two_sz,
                    mu: mus.iter().map(|m| m.value).collect(),
                    ratios: ev.iter().map(|e| e / ev[0]).collect(),
                });
            }
        }
        reports.push(MultipletReport {
            class_id: cid,
            eigenvalue: items[members[0]].e1,
            eigenvalue_probe2: items[members[0]].e2,
            dimension: members.len(),
            members: blocks,
            highest_two_sz: hi,
            lowest_two_sz: lo,
            highest_weight_residual: hw,
            lowest_weight_residual: lw,
            spins_differ_by_n_prime: spins_ok,
            flag,
            mu_pattern,
        });
    }
    Ok(reports)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DrinfeldData {
    /// P_S in y = z^{N′}, normalized to P_S(0) = 1 when possible.
    pub ps_coeffs: Vec<C64>,
    pub a_roots: Vec<C64>,
    pub n_s: usize,
    pub n0: usize,
    pub n_inf: usize,
    pub n_bar_inf: usize,
    /// 2s = 4n₀ + 2S^z.
    pub two_s: i64,
    /// The raw constant the k-sum carries relative to the normalized P_S.
    pub norm: C64,
    /// Largest relative deviation of the interpolant at fresh sample points.
    #[serde(with = "crate::serial::ext_f64")]
    pub consistency: f64,
    /// Largest coefficient at powers of z that are not multiples of N′, relative.
    #[serde(with = "crate::serial::ext_f64")]
    pub off_lattice: f64,
    /// Largest normalized residue of the k-sum at the would-be poles.
    #[serde(with = "crate::serial::ext_f64")]
    pub residue: f64,
    /// |S(zq²) − λ⁻²q^{2S}S(z)| / |S(z)| at a test point.
    #[serde(with = "crate::serial::ext_f64")]
    pub shift_residual: f64,
    pub ok: bool,
}

/// Σ_k of Q_μ restricted to the sector data, i.e. q_mu_ksum.
fn ksum(rs: &BetheRootSet, p: &ModelParams, z: C64) -> C64 {
    q_mu_ksum(rs, p, z).unwrap_or(C64::new(f64::NAN, f64::NAN))
}

fn pole_set(rs: &BetheRootSet, p: &ModelParams, np: usize) -> Vec<C64> {
    let q2 = p.q * p.q;
    let mut poles: Vec<C64> = Vec::new();
    for &r in &rs.roots {
        for k in 0..=np as i32 {
            let c = r * q2.powi(k);
            if !poles.iter().any(|x| (x - c).norm() < 1e-10 * c.norm()) {
                poles.push(c);
            }
        }
    }
    poles
}

/// Sample points on a circle of radius r avoiding the poles.
fn circle_points(n: usize, poles: &[C64], phase: f64) -> Vec<C64> {
    let mut r = 0.77;
    for _ in 0..50 {
        if poles.iter().all(|c| (c.norm() - r).abs() > 0.05 * r) {
            break;
        }
        r *= 1.09;
    }
    (0..n).map(|j| C64::from_polar(r, phase + 2.0 * PI * j as f64 / n as f64)).collect()
}

/// P_S from the k-sum: interpolate in z, read off the z^{N′} lattice.
pub fn drinfeld_poly(rs: &BetheRootSet, p: &ModelParams) -> Result<DrinfeldData> {
    let np = p.n_prime()?;
    let nb = rs.n_b();
    if 2 * nb > p.m {
        return Err(Error::InvalidParameter(format!("n_B = {nb} exceeds M/2")));
    }
    let deg = p.m - 2 * nb;
    let poles = pole_set(rs, p, np);
    let pts = circle_points(deg + 1, &poles, 0.3);
    let vals: Vec<C64> = pts.iter().map(|&z| ksum(rs, p, z)).collect();
    let coeffs = poly_from_samples(&PolySamples::new(pts, vals, deg)?)?;
    let cmax = coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max).max(1e-300);
    let off_lattice = coeffs.iter().enumerate().filter(|(i, _)| i % np != 0).map(|(_, c)| c.norm() / cmax).fold(0.0, f64::max);
    let mut ycoef: Vec<C64> = coeffs.iter().step_by(np).copied().collect();
    while ycoef.len() > 1 && ycoef.last().unwrap().norm() < 1e-10 * cmax {
        ycoef.pop();
    }
    let n_s = ycoef.len() - 1;
    let check = circle_points(2 * (n_s + 1), &poles, 1.1);
    let consistency = check
        .iter()
        .map(|&z| {
            let v = ksum(rs, p, z);
            (v - poly_eval(&coeffs, z)).norm() / v.norm().max(cmax * 1e-12)
        })
        .fold(0.0, f64::max);
    let mut residue: f64 = 0.0;
    for (i, &c) in poles.iter().enumerate() {
        let sep = poles.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, x)| (x - c).norm()).fold(f64::INFINITY, f64::min);
        let rho = (1e-3 * c.norm()).min(0.3 * sep);
        let n = 64;
        let mut acc = ZERO;
        let mut mag = 0.0;
        for k in 0..n {
            let d = C64::from_polar(rho, 2.0 * PI * k as f64 / n as f64);
            let f = ksum(rs, p, c + d);
            acc += f * d;
            mag += f.norm() * rho;
        }
        residue = residue.max((acc / n as f64).norm() / (mag / n as f64).max(1e-300));
    }
    let zt = C64::new(0.52, 0.31);
    let s0 = ksum(rs, p, zt);
    let factor = p.q.powi(rs.two_sz as i32) / (p.lambda * p.lambda);
    let shift_residual = (ksum(rs, p, zt * p.q * p.q) - factor * s0).norm() / s0.norm().max(1e-300);
    let norm = if ycoef[0].norm() > 1e-10 * cmax { ycoef[0] } else { ycoef[n_s] };
    let ps_coeffs: Vec<C64> = ycoef.iter().map(|c| c / norm).collect();
    let a_roots = if n_s > 0 { poly_roots(&ps_coeffs)? } else { Vec::new() };
    let ok = consistency < 1e-7 && off_lattice < 1e-8 && residue < 1e-8;
    Ok(DrinfeldData {
        ps_coeffs,
        a_roots,
        n_s,
        n0: 0,
        n_inf: 0,
        n_bar_inf: 0,
        two_s: rs.two_sz,
        norm,
        consistency,
        off_lattice,
        residue,
        shift_residual,
        ok,
    })
}

/// k-sum recovered from the Q_{μ=1} spectrum: ⟨ψ|Q_1(z)|ψ⟩ / (q^S P_B(z)²).
pub fn ksum_from_q_spectrum(rs: &BetheRootSet, p: &ModelParams, z: C64) -> Result<C64> {
    let v = bethe_state(rs, p)?.vector;
    let one = Branched::principal(ONE);
    let q = q_mu(p, one, z)?.mat;
    let ev = inner(&v, &q.mul_vec(&v)) / inner(&v, &v);
    Ok(ev / (p.q_branched().pow_half(rs.two_sz) * rs.pb(z) * rs.pb(z)))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum RootFate {
    Finite,
    ToZero,
    ToInfinity,
    String(usize),
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RootTrajectory {
    pub q_samples: Vec<C64>,
    /// root_tracks[i][j] is root i at q_samples[j].
    pub root_tracks: Vec<Vec<C64>>,
    pub classification: Vec<RootFate>,
    pub n0: usize,
    pub n_inf: usize,
    pub strings: Vec<Vec<usize>>,
    /// 2s = 4n₀ + 2S^z.
    pub two_s: i64,
    /// Index of the first q′ where continuation failed.
    pub lost_at: Option<usize>,
    /// Samples where a root jumped by more than 10× the previous step.
    pub discontinuities: Vec<usize>,
}

/// Groups of N′ roots of the form {z₀q^{2ℓ}}, matched to `tol` relative.
pub fn detect_strings(roots: &[C64], q: C64, n_prime: usize, tol: f64) -> Vec<Vec<usize>> {
    let q2 = q * q;
    let mut used = vec![false; roots.len()];
    let mut out = Vec::new();
    for i in 0..roots.len() {
        if used[i] {
            continue;
        }
        let mut members = vec![i];
        for l in 1..n_prime as i32 {
            let target = roots[i] * q2.powi(l);
            let hit = (0..roots.len()).find(|&j| !used[j] && !members.contains(&j) && (roots[j] - target).norm() < tol * target.norm());
            match hit {
                Some(j) => members.push(j),
                None => break,
            }
        }
        if members.len() == n_prime {
            for &j in &members {
                used[j] = true;
            }
            out.push(members);
        }
    }
    out
}

const STRING_TOL: f64 = 1e-6;

/// Accepted continuation points (q′, roots), substeps included.
struct Continuation<'a> {
    p_target: &'a ModelParams,
    hist: Vec<(C64, Vec<C64>)>,
}

impl Continuation<'_> {
    /// Linear extrapolation of ln z in s = ln|q′ − q|.
    fn predict(&self, qp: C64) -> Vec<C64> {
        let n = self.hist.len();
        let (q1, z1) = &self.hist[n - 1];
        if n < 2 {
            return z1.clone();
        }
        let (q0, z0) = &self.hist[n - 2];
        let s = |x: C64| (x - self.p_target.q).norm().max(1e-300).ln();
        let den = s(*q1) - s(*q0);
        if den.abs() < 1e-14 {
            return z1.clone();
        }
        let t = (s(qp) - s(*q1)) / den;
        z1.iter().zip(z0).map(|(a, b)| a * (a / b).powf(t)).collect()
    }

    fn solve(&mut self, qp: C64, depth: usize) -> Option<Vec<C64>> {
        let pred = self.predict(qp);
        let pj = self.p_target.at_q(qp).ok()?;
        if let Ok((z, r)) = bae_refine(&pred, &pj) {
            if r < 1e-10 {
                let ordered = match_to(&z, &pred);
                if ordered.iter().zip(&pred).all(|(a, b)| (a - b).norm() < 0.1 * b.norm()) {
                    self.hist.push((qp, ordered.clone()));
                    return Some(ordered);
                }
            }
        }
        if depth == 0 {
            return None;
        }
        let q_last = self.hist.last()?.0;
        let mid = q_last * (qp / q_last).sqrt();
        self.solve(mid, depth - 1)?;
        self.solve(qp, depth - 1)
    }
}

/// Reorders `z` to follow the prediction root by root.
fn match_to(z: &[C64], pred: &[C64]) -> Vec<C64> {
    let n = z.len();
    let mut used = vec![false; n];
    pred.iter()
        .map(|g| {
            let k = (0..n).filter(|&k| !used[k]).min_by(|&a, &b| (z[a] - g).norm().total_cmp(&(z[b] - g).norm())).unwrap();
            used[k] = true;
            z[k]
        })
        .collect()
}

/// Follows one root set along the q′ path by Newton continuation (log-log
/// predictor, step halving on a poor corrector), then classifies each root.
pub fn track_roots(p_target: &ModelParams, start: &[C64], path: &[C64]) -> Result<RootTrajectory> {
    let np = p_target.n_prime()?;
    if path.len() < 3 {
        return Err(Error::InvalidParameter("a q′ path needs at least three samples".into()));
    }
    let nb = start.len();
    let mut tracks: Vec<Vec<C64>> = vec![Vec::new(); nb];
    let mut q_samples = Vec::new();
    let mut lost_at = None;
    let mut discontinuities = Vec::new();
    let p0 = p_target.at_q(path[0])?;
    let (z0, r0) = bae_refine(start, &p0)?;
    if r0 >= 1e-10 {
        return Err(Error::NonConvergence(format!("start is not a solution at the first q′ (residual {r0:.2e})")));
    }
    let mut cont = Continuation { p_target, hist: vec![(path[0], match_to(&z0, start))] };
    for (j, &qp) in path.iter().enumerate() {
        let z = if j == 0 { cont.hist[0].1.clone() } else {
            match cont.solve(qp, 12) {
                Some(z) => z,
                None => {
                    lost_at = Some(j);
                    break;
                }
            }
        };
        if j >= 2 {
            for i in 0..nb {
                let step = (z[i] - tracks[i][j - 1]).norm();
                let last = (tracks[i][j - 1] - tracks[i][j - 2]).norm();
                let dq = ((qp - path[j - 1]).norm() / (path[j - 1] - path[j - 2]).norm()).max(1e-300);
                if step > 10.0 * last * dq.max(1.0) + 1e-12 * z[i].norm() {
                    discontinuities.push(j);
                    break;
                }
            }
        }
        for i in 0..nb {
            tracks[i].push(z[i]);
        }
        q_samples.push(qp);
    }
    let n = q_samples.len();
    let mut classification = vec![RootFate::Finite; nb];
    if n >= 3 {
        let d = |k: usize| (q_samples[k] - p_target.q).norm().max(1e-300).ln();
        for i in 0..nb {
            let slope = (tracks[i][n - 1].norm().ln() - tracks[i][n - 3].norm().ln()) / (d(n - 1) - d(n - 3));
            classification[i] = if slope > 0.5 {
                RootFate::ToZero
            } else if slope < -0.5 {
                RootFate::ToInfinity
            } else {
                RootFate::Finite
            };
        }
    }
    let finite: Vec<usize> = (0..nb).filter(|&i| classification[i] == RootFate::Finite).collect();
    let ends: Vec<C64> = finite.iter().map(|&i| tracks[i][n.saturating_sub(1)]).collect();
    let strings: Vec<Vec<usize>> = if n > 0 {
        detect_strings(&ends, p_target.q, np, STRING_TOL).into_iter().map(|g| g.into_iter().map(|k| finite[k]).collect()).collect()
    } else {
        Vec::new()
    };
    for (sid, g) in strings.iter().enumerate() {
        for &i in g {
            classification[i] = RootFate::String(sid);
        }
    }
    let n0 = classification.iter().filter(|c| **c == RootFate::ToZero).count();
    let n_inf = classification.iter().filter(|c| **c == RootFate::ToInfinity).count();
    let two_sz = p_target.m as i64 - 2 * nb as i64;
    Ok(RootTrajectory {
        q_samples,
        root_tracks: tracks,
        classification,
        n0,
        n_inf,
        strings,
        two_s: 4 * n0 as i64 + two_sz,
        lost_at,
        discontinuities,
    })
}

/// Richardson limit q′ → q of a quantity sampled along a trajectory, from the
/// last three samples, assuming an expansion in powers of |q′ − q|.
pub fn limit_along(traj: &RootTrajectory, q: C64, f: impl Fn(usize) -> C64) -> Result<(C64, f64)> {
    let n = traj.q_samples.len();
    if n < 3 {
        return Err(Error::InvalidParameter("a limit needs three samples".into()));
    }
    let e: Vec<f64> = (n - 3..n).map(|j| (traj.q_samples[j] - q).norm()).collect();
    let v: Vec<C64> = (n - 3..n).map(&f).collect();
    // Neville on the three nodes, evaluated at ε = 0.
    let p01 = (v[1] * e[0] - v[0] * e[1]) / (e[0] - e[1]);
    let p12 = (v[2] * e[1] - v[1] * e[2]) / (e[1] - e[2]);
    let p012 = (p12 * e[0] - p01 * e[2]) / (e[0] - e[2]);
    Ok((p012, (p012 - p12).norm()))
}

/// Limit of the transfer-matrix eigenvalue at z along a tracked root set.
pub fn limiting_eig_t(p_target: &ModelParams, traj: &RootTrajectory, z: C64) -> Result<(C64, f64)> {
    let two_sz = p_target.m as i64 - 2 * traj.root_tracks.len() as i64;
    let ps: Vec<ModelParams> = traj.q_samples.iter().map(|&qp| p_target.at_q(qp)).collect::<Result<_>>()?;
    let sets: Vec<BetheRootSet> = (0..traj.q_samples.len())
        .map(|j| BetheRootSet::new(traj.root_tracks.iter().map(|t| t[j]).collect(), two_sz, &ps[j], crate::bethe::Provenance::Manual))
        .collect::<Result<_>>()?;
    limit_along(traj, p_target.q, |j| crate::bethe::eig_t(&sets[j], &ps[j], z))
}

/// Geometric path q′ = q e^{iε_j}, ε_j = eps0·ratio^j.
pub fn phase_path(q: C64, eps0: f64, ratio: f64, steps: usize) -> Vec<C64> {
    (0..steps).map(|j| q * C64::from_polar(1.0, eps0 * ratio.powi(j as i32))).collect()
}

/// Solves the Bethe equations at the first q′ of the path and tracks every
/// solution towards the root of unity.
pub fn classify_limit_roots(p_target: &ModelParams, n_b: usize, path: &[C64], seeds: &crate::bethe::SeedStrategy) -> Result<Vec<RootTrajectory>> {
    let first = p_target.at_q(*path.first().ok_or_else(|| Error::InvalidParameter("empty path".into()))?)?;
    let sols = crate::bethe::solve_bae(&first, n_b, seeds)?;
    sols.sets.par_iter().map(|rs| track_roots(p_target, &rs.roots, path)).collect()
}

/// Nested geometric paths ending on a common grid: path j starts at
/// eps_end/ratio^{base_steps − 1 + j·stride} and shares its tail with path 0.
pub fn nested_paths(q: C64, eps_end: f64, ratio: f64, base_steps: usize, count: usize, stride: usize) -> Vec<Vec<C64>> {
    (0..count)
        .map(|j| {
            let steps = base_steps + j * stride;
            phase_path(q, eps_end / ratio.powi(steps as i32 - 1), ratio, steps)
        })
        .collect()
}

/// classify_limit_roots over several starting points of the path. Each start
/// sees a different subset of solutions; tracks that end on the same root set
/// are kept once. Paths must end at the same q′.
pub fn classify_limit_roots_multi(p_target: &ModelParams, n_b: usize, paths: &[Vec<C64>], seeds: &crate::bethe::SeedStrategy) -> Result<Vec<RootTrajectory>> {
    let mut out: Vec<RootTrajectory> = Vec::new();
    for path in paths {
        for t in classify_limit_roots(p_target, n_b, path, seeds)? {
            if t.lost_at.is_some() {
                continue;
            }
            let last = |t: &RootTrajectory| t.root_tracks.iter().map(|r| *r.last().unwrap()).collect::<Vec<C64>>();
            let end = last(&t);
            if !out.iter().any(|o| crate::bethe::same_set(&last(o), &end, 1e-6)) {
                out.push(t);
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::c;

    fn rootp(m: usize, lambda: C64) -> ModelParams {
        ModelParams::root_of_unity(m, 3, 1, lambda).unwrap()
    }

    #[test]
    fn expansion_matches_direct_powers() {
        let qp = C64::from_polar(1.0, 0.37);
        let zeta = [ONE, c(1.2, 0.1), c(0.8, -0.2)];
        for g in Generator::ALL {
            let d = coproduct(g, qp, &zeta).unwrap();
            for n in 0..=3 {
                let e = coproduct_power(g, qp, &zeta, n).unwrap();
                let r = (&e - &d.pow(n as u32)).norm() / d.pow(n as u32).norm().max(1.0);
                assert!(r < 1e-13, "{g:?} n={n} {r}");
            }
        }
        // A single site is nilpotent of order two.
        assert_eq!(coproduct_power(Generator::F1, qp, &[ONE], 2).unwrap().max_abs(), 0.0);
    }

    #[test]
    fn coproduct_is_a_homomorphism() {
        let qp = C64::from_polar(1.0, 0.3);
        let zeta = [ONE, ONE];
        let e = coproduct(Generator::E1, qp, &zeta).unwrap();
        let f = coproduct(Generator::F1, qp, &zeta).unwrap();
        let k = CMatrix::diag(&two_sz_diag(2).iter().map(|&s| qp.powi(s as i32)).collect::<Vec<_>>());
        let kinv = CMatrix::diag(&two_sz_diag(2).iter().map(|&s| qp.powi(-s as i32)).collect::<Vec<_>>());
        let lhs = &(&e * &f) - &(&f * &e);
        let rhs = (&k - &kinv).scale(ONE / (qp - ONE / qp));
        assert!((&lhs - &rhs).norm() < 1e-14);
    }

    #[test]
    fn e0_scales_with_evaluation_points() {
        let qp = C64::from_polar(1.0, 0.41);
        let zeta = [ONE, c(1.3, 0.2), c(0.7, 0.5)];
        let s = c(1.7, -0.4);
        let scaled: Vec<C64> = zeta.iter().map(|z| z * s).collect();
        let a = coproduct_power(Generator::E0, qp, &zeta, 2).unwrap();
        let b = coproduct_power(Generator::E0, qp, &scaled, 2).unwrap();
        assert!((&b - &a.scale(s * s)).norm() < 1e-13 * b.norm());
    }

    #[test]
    fn generators_commute_with_t_on_commensurate_sectors() {
        let p = rootp(6, ONE);
        let g = loop_generators(&p, &DEFAULT_EPS).unwrap();
        assert_eq!(g.claimed_sectors, vec![6, 0, -6]);
        let t = transfer_t(&p, c(0.6, 0.3)).unwrap().mat;
        for gen in Generator::ALL {
            let x = g.get(gen);
            assert!(sector_commutator(x, &t, p.m, &g.claimed_sectors) < 1e-8, "{gen:?}");
            assert_eq!(spin_shift(x, p.m), Some(3 * gen.two_sz_step()));
        }
    }

    #[test]
    fn triple_lowering_at_three_sites() {
        let p = rootp(3, ONE);
        let g = loop_generators(&p, &DEFAULT_EPS).unwrap();
        // Only |000⟩ → |111⟩ survives.
        let f = &g.f1;
        assert!(f[(7, 0)].norm() > 0.1);
        let rest: f64 = (0..8).flat_map(|i| (0..8).map(move |j| (i, j))).filter(|&(i, j)| (i, j) != (7, 0)).map(|(i, j)| f[(i, j)].norm()).sum();
        assert!(rest < 1e-10);
    }

    #[test]
    fn generic_q_classes_are_reversal_pairs() {
        let p = ModelParams::generic_phase(4, 0.2, ONE).unwrap();
        let reps = multiplet_decompose(&p, c(0.6, 0.3)).unwrap();
        for r in &reps {
            assert!(r.flag.is_none());
            if r.members.len() > 1 {
                assert_eq!(r.members.len(), 2);
                assert_eq!(r.highest_two_sz, -r.lowest_two_sz);
            }
        }
    }

    #[test]
    fn drinfeld_vacuum_three_sites() {
        let p = rootp(3, ONE);
        let d = drinfeld_poly(&BetheRootSet::vacuum(&p), &p).unwrap();
        assert!(d.ok, "{d:?}");
        assert_eq!(d.n_s, 1);
        assert!((d.norm - c(-3.0, 0.0)).norm() < 1e-12);
        assert!((d.a_roots[0] - ONE).norm() < 1e-12);
        assert!(d.shift_residual < 1e-10);
    }

    #[test]
    fn synthetic_string_detected() {
        let q = C64::from_polar(1.0, 2.0 * PI / 3.0);
        let z0 = c(0.4, 0.9);
        let roots = [c(2.0, 0.1), z0, z0 * q * q * q * q, z0 * q * q];
        let s = detect_strings(&roots, q, 3, 1e-6);
        assert_eq!(s.len(), 1);
        let mut g = s[0].clone();
        g.sort();
        assert_eq!(g, vec![1, 2, 3]);
    }
}
