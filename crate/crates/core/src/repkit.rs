//! Representations of the quantum affine algebra and the local operators
//! built from them: the six-vertex R-matrix, auxiliary representations and
//! the three L-operator families.

use num_complex::Complex64 as C64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{pauli, CMatrix, ONE, ZERO};
use crate::params::{Branched, ModelParams};

/// q-integer [m]_q = (q^m − q^{−m})/(q − q^{−1}).
pub fn qint(m: i64, q: C64) -> C64 {
    (q.powi(m as i32) - q.powi(-(m as i32))) / (q - ONE / q)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoltzmannWeights {
    pub z: C64,
    pub a: C64,
    pub b: C64,
    pub c: C64,
    pub c_prime: C64,
}

pub fn weights_sixvertex(z: C64, q: C64) -> Result<BoltzmannWeights> {
    let den = ONE - z * q * q;
    if den.norm() <= 1e-10 {
        return Err(Error::SingularArgument(format!("|1 - z q^2| = {:e} at z = {z}", den.norm())));
    }
    let c = (ONE - q * q) / den;
    Ok(BoltzmannWeights { z, a: ONE, b: (ONE - z) * q / den, c, c_prime: c * z })
}

/// The 4×4 six-vertex R-matrix, index order (first ⊗ second).
pub fn rmatrix(z: C64, q: C64) -> Result<CMatrix> {
    let w = weights_sixvertex(z, q)?;
    let mut r = CMatrix::zeros(4, 4);
    r[(0, 0)] = w.a;
    r[(3, 3)] = w.a;
    r[(1, 1)] = w.b;
    r[(2, 2)] = w.b;
    r[(1, 2)] = w.c;
    r[(2, 1)] = w.c_prime;
    Ok(r)
}

/// Which auxiliary representation to build.
#[derive(Clone, Debug, PartialEq)]
pub enum AuxRepSpec {
    /// Root-of-unity evaluation representation with parameter μ, dimension N′.
    RootOfUnity { w: C64, mu: C64 },
    /// Four-parameter Borel representation on the window {m_o−K+1, …, m_o}.
    Borel { w: C64, r0: C64, r1: C64, r2: C64, k: usize, m_o: i64 },
    /// ϱ₊ = Borel(r0=1, r1=1, r2=0).
    OscillatorPlus { w: C64, k: usize },
    /// ϱ₋ = Borel(r0=1, r1=0, r2=1).
    OscillatorMinus { w: C64, k: usize },
    /// Spin n/2 evaluation representation, dimension n+1.
    SpinN { z: C64, n: usize },
}

/// Generator images of a representation.
#[derive(Clone, Debug)]
pub struct RepOps {
    pub dim: usize,
    pub e0: CMatrix,
    pub e1: CMatrix,
    pub f0: Option<CMatrix>,
    pub f1: Option<CMatrix>,
    pub qh1: CMatrix,
    pub qh1_inv: CMatrix,
    pub qh0: CMatrix,
    pub qh0_inv: CMatrix,
    pub h_prime_diag: Vec<f64>,
    /// Rows/columns this far from either window edge are trusted by relation checks.
    pub edge_margin: Option<usize>,
}

fn shift_down(dim: usize, coef: impl Fn(usize) -> C64) -> CMatrix {
    // |n⟩ → coef(n) |n+1⟩
    let mut m = CMatrix::zeros(dim, dim);
    for n in 0..dim.saturating_sub(1) {
        m[(n + 1, n)] = coef(n);
    }
    m
}

fn shift_up(dim: usize, coef: impl Fn(usize) -> C64) -> CMatrix {
    // |n⟩ → coef(n) |n−1⟩
    let mut m = CMatrix::zeros(dim, dim);
    for n in 1..dim {
        m[(n - 1, n)] = coef(n);
    }
    m
}

pub fn fundamental_rep(z: C64, q: C64) -> Result<RepOps> {
    if q.norm() == 0.0 {
        return Err(Error::InvalidParameter("q = 0".into()));
    }
    if z.norm() == 0.0 {
        return Err(Error::SingularArgument("f0 = z^{-1} sigma^+ needs z != 0".into()));
    }
    let qsz = CMatrix::diag(&[q, ONE / q]);
    let qmsz = CMatrix::diag(&[ONE / q, q]);
    Ok(RepOps {
        dim: 2,
        e0: pauli::sm().scale(z),
        e1: pauli::sp(),
        f0: Some(pauli::sp().scale(ONE / z)),
        f1: Some(pauli::sm()),
        qh1: qsz.clone(),
        qh1_inv: qmsz.clone(),
        qh0: qmsz,
        qh0_inv: qsz,
        h_prime_diag: vec![1.0, -1.0],
        edge_margin: None,
    })
}

/// e1 matrix element (μ + μ⁻¹ − μq^{2n} − μ⁻¹q^{−2n})/(q − q⁻¹)² of the root-of-unity representation.
pub fn rootofunity_e1_element(n: i64, mu: C64, q: C64) -> C64 {
    let d = q - ONE / q;
    (mu + ONE / mu - mu * q.powi(2 * n as i32) - q.powi(-2 * n as i32) / mu) / (d * d)
}

pub fn rootofunity_rep(spec: &AuxRepSpec, p: &ModelParams) -> Result<RepOps> {
    let AuxRepSpec::RootOfUnity { w, mu } = *spec else {
        return Err(Error::InvalidParameter("rootofunity_rep needs a RootOfUnity spec".into()));
    };
    let np = p.n_prime()?;
    if mu.norm() == 0.0 {
        return Err(Error::InvalidParameter("mu = 0".into()));
    }
    let q = p.q;
    let f1 = shift_down(np, |_| ONE);
    let e1 = shift_up(np, |n| rootofunity_e1_element(n as i64, mu, q));
    let k: Vec<C64> = (0..np).map(|n| q.powi(-2 * n as i32 - 1) / mu).collect();
    let kinv: Vec<C64> = k.iter().map(|&x| ONE / x).collect();
    let f0 = if w.norm() > 0.0 { Some(e1.scale(ONE / w)) } else { None };
    Ok(RepOps {
        dim: np,
        e0: f1.scale(w),
        e1,
        f0,
        f1: Some(f1),
        qh1: CMatrix::diag(&k),
        qh1_inv: CMatrix::diag(&kinv),
        qh0: CMatrix::diag(&kinv),
        qh0_inv: CMatrix::diag(&k),
        h_prime_diag: (0..np).map(|n| -2.0 * n as f64).collect(),
        edge_margin: None,
    })
}

/// e0 coefficient of the Borel representation in rescaled parameters.
pub fn borel_e0_element(n: i64, w: C64, r1: C64, r2: C64, q: C64) -> C64 {
    let d = q - ONE / q;
    w * (r1 * r2 + ONE - r1 * q.powi(2 * n as i32) - r2 * q.powi(-2 * n as i32)) / (d * d)
}

fn borel_params(spec: &AuxRepSpec) -> Result<(C64, C64, C64, C64, usize, i64)> {
    match *spec {
        AuxRepSpec::Borel { w, r0, r1, r2, k, m_o } => Ok((w, r0, r1, r2, k, m_o)),
        AuxRepSpec::OscillatorPlus { w, k } => Ok((w, ONE, ONE, ZERO, k, 0)),
        AuxRepSpec::OscillatorMinus { w, k } => Ok((w, ONE, ZERO, ONE, k, 0)),
        _ => Err(Error::InvalidParameter("borel_rep needs a Borel or oscillator spec".into())),
    }
}

/// Window {m_o−K+1, …, m_o}; basis position i holds index m_o−K+1+i.
pub fn borel_rep(spec: &AuxRepSpec, p: &ModelParams) -> Result<RepOps> {
    let (w, r0, r1, r2, k, m_o) = borel_params(spec)?;
    if k < 4 {
        return Err(Error::InvalidParameter(format!("window K = {k} is below the minimum of 4")));
    }
    let q = p.q;
    let lo = m_o - k as i64 + 1;
    let leak = borel_e0_element(m_o, w, r1, r2, q);
    let scale = w.norm() * (1.0 + (r1 * r2).norm() + r1.norm() + r2.norm()) / (q - ONE / q).norm_sqr();
    if leak.norm() > 1e-12 * scale.max(1e-300) {
        return Err(Error::Leakage { index: m_o, element: leak.norm() });
    }
    let idx = |i: usize| lo + i as i64;
    let e0 = shift_down(k, |i| borel_e0_element(idx(i), w, r1, r2, q));
    let e1 = shift_up(k, |_| ONE);
    let kd: Vec<C64> = (0..k).map(|i| r0 * q.powi(-2 * idx(i) as i32)).collect();
    let kinv: Vec<C64> = kd.iter().map(|&x| ONE / x).collect();
    Ok(RepOps {
        dim: k,
        e0,
        e1,
        f0: None,
        f1: None,
        qh1: CMatrix::diag(&kd),
        qh1_inv: CMatrix::diag(&kinv),
        qh0: CMatrix::diag(&kinv),
        qh0_inv: CMatrix::diag(&kd),
        h_prime_diag: (0..k).map(|i| -2.0 * idx(i) as f64).collect(),
        edge_margin: Some(2),
    })
}

pub fn spin_n_rep(z: C64, n: usize, q: C64) -> Result<RepOps> {
    for kk in 1..=n {
        if qint(kk as i64, q).norm() < 1e-10 {
            return Err(Error::RootOfUnityObstruction { k: kk });
        }
    }
    let d = n + 1;
    let e1 = shift_up(d, |m| qint((n - m + 1) as i64, q));
    let f1 = shift_down(d, |m| qint((m + 1) as i64, q));
    let kd: Vec<C64> = (0..d).map(|m| q.powi(n as i32 - 2 * m as i32)).collect();
    let kinv: Vec<C64> = kd.iter().map(|&x| ONE / x).collect();
    let f0 = if z.norm() > 0.0 { Some(e1.scale(ONE / z)) } else { None };
    Ok(RepOps {
        dim: d,
        e0: f1.scale(z),
        e1,
        f0,
        f1: Some(f1),
        qh1: CMatrix::diag(&kd),
        qh1_inv: CMatrix::diag(&kinv),
        qh0: CMatrix::diag(&kinv),
        qh0_inv: CMatrix::diag(&kd),
        h_prime_diag: (0..d).map(|m| n as f64 - 2.0 * m as f64).collect(),
        edge_margin: None,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct RelationResidual {
    pub name: String,
    pub residual: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct AlgebraReport {
    pub max_residual: f64,
    pub tolerance: f64,
    pub relations: Vec<RelationResidual>,
    pub failures: Vec<RelationResidual>,
}

/// Max-abs entry of `m` restricted to rows and columns at least `margin` from the edges.
fn interior_max(m: &CMatrix, margin: Option<usize>) -> f64 {
    let n = m.rows();
    let (lo, hi) = match margin {
        Some(g) if n > 2 * g => (g, n - g),
        Some(_) => return 0.0,
        None => (0, n),
    };
    let mut mx: f64 = 0.0;
    for i in lo..hi {
        for j in lo..hi {
            mx = mx.max(m[(i, j)].norm());
        }
    }
    mx
}

fn rel_scale(parts: &[&CMatrix]) -> f64 {
    parts.iter().map(|m| m.max_abs()).fold(1.0, f64::max)
}

/// Checks the defining relations with Cartan matrix [[2,−2],[−2,2]] and,
/// where both Chevalley generators of a kind exist, the cubic Serre relations.
pub fn verify_algebra_relations(r: &RepOps, q: C64) -> AlgebraReport {
    let tol = 1e-12;
    let mut rels = Vec::new();
    let cartan = [[2i32, -2], [-2, 2]];
    let ks = [(&r.qh0, &r.qh0_inv), (&r.qh1, &r.qh1_inv)];
    let es = [&r.e0, &r.e1];
    let fs = [r.f0.as_ref(), r.f1.as_ref()];
    let id = CMatrix::identity(r.dim);
    // Basic interior margin for quadratic relations, wider for cubic ones.
    let m2 = r.edge_margin;
    let m4 = r.edge_margin.map(|g| g + 2);
    let mut push = |name: String, diff: CMatrix, scale: f64, margin: Option<usize>| {
        rels.push(RelationResidual { name, residual: interior_max(&diff, margin) / scale });
    };
    for (i, (k, kinv)) in ks.iter().enumerate() {
        push(format!("K{i} K{i}^-1 = 1"), &(*k * *kinv) - &id, 1.0, m2);
        for (j, e) in es.iter().enumerate() {
            let lhs = &(*k * *e) * *kinv;
            let rhs = e.scale(q.powi(cartan[i][j]));
            push(format!("K{i} e{j} K{i}^-1 = q^A e{j}"), &lhs - &rhs, rel_scale(&[&lhs, &rhs]), m2);
            if let Some(f) = fs[j] {
                let lhs = &(*k * f) * *kinv;
                let rhs = f.scale(q.powi(-cartan[i][j]));
                push(format!("K{i} f{j} K{i}^-1 = q^-A f{j}"), &lhs - &rhs, rel_scale(&[&lhs, &rhs]), m2);
            }
        }
    }
    let kk = &(ks[0].0 * ks[1].0) - &(ks[1].0 * ks[0].0);
    push("K0 K1 = K1 K0".into(), kk, 1.0, m2);
    for i in 0..2 {
        for j in 0..2 {
            if let Some(f) = fs[j] {
                let comm = &(es[i] * f) - &(f * es[i]);
                let rhs = if i == j {
                    (ks[i].0 - ks[i].1).scale(ONE / (q - ONE / q))
                } else {
                    CMatrix::zeros(r.dim, r.dim)
                };
                push(format!("[e{i}, f{j}] = delta (K - K^-1)/(q - q^-1)"), &comm - &rhs, rel_scale(&[&comm, &rhs]), m2);
            }
        }
    }
    let q3 = qint(3, q);
    let serre = |a: &CMatrix, b: &CMatrix| -> (CMatrix, f64) {
        let a2 = a * a;
        let a3 = &a2 * a;
        let t0 = &a3 * b;
        let t1 = (&(&a2 * b) * a).scale(q3);
        let t2 = (&(a * b) * &a2).scale(q3);
        let t3 = b * &a3;
        let s = rel_scale(&[&t0, &t1, &t2, &t3]);
        (&(&(&t0 - &t1) + &t2) - &t3, s)
    };
    for (i, j) in [(0usize, 1usize), (1, 0)] {
        let (d, s) = serre(es[i], es[j]);
        push(format!("Serre e{i}^3 e{j}"), d, s, m4);
        if let (Some(fi), Some(fj)) = (fs[i], fs[j]) {
            let (d, s) = serre(fi, fj);
            push(format!("Serre f{i}^3 f{j}"), d, s, m4);
        }
    }
    let max_residual = rels.iter().map(|r| r.residual).fold(0.0, f64::max);
    let failures = rels.iter().filter(|r| !(r.residual <= tol)).cloned().collect();
    AlgebraReport { max_residual, tolerance: tol, relations: rels, failures }
}

/// q-oscillator check q e₊e₋ − q⁻¹ e₋e₊ = w/(q − q⁻¹) on the interior of a ϱ± window.
pub fn qoscillator_residual(r: &RepOps, plus: bool, w: C64, q: C64) -> f64 {
    let (ep, em) = if plus { (&r.e0, &r.e1) } else { (&r.e1, &r.e0) };
    let lhs = &(ep * em).scale(q) - &(em * ep).scale(ONE / q);
    let rhs = CMatrix::identity(r.dim).scale(w / (q - ONE / q));
    interior_max(&(&lhs - &rhs), r.edge_margin) / rhs.max_abs().max(1e-300)
}

/// Parameters of an L-operator family, independent of the ratio x = w/z.
#[derive(Clone, Debug, PartialEq)]
pub enum LFamily {
    /// Root-of-unity family on indices 0..N′−1.
    RootOfUnity { mu: Branched, q: Branched, n_prime: usize },
    /// Generic-q family on the window {m_o−K+1, …, m_o}.
    Generic { r0: Branched, r1: C64, r2: C64, q: C64, k: usize, m_o: i64 },
}

impl LFamily {
    pub fn root_of_unity(mu: Branched, p: &ModelParams) -> Result<Self> {
        let n_prime = p.n_prime()?;
        if mu.value.norm() == 0.0 {
            return Err(Error::InvalidParameter("mu = 0".into()));
        }
        Ok(LFamily::RootOfUnity { mu, q: p.q_branched(), n_prime })
    }

    /// Window {−K+1, …, 0}; rejects parameters that leak out of it.
    pub fn generic(r0: Branched, r1: C64, r2: C64, k: usize, q: C64) -> Result<Self> {
        Self::generic_window(r0, r1, r2, k, 0, q)
    }

    pub fn generic_window(r0: Branched, r1: C64, r2: C64, k: usize, m_o: i64, q: C64) -> Result<Self> {
        if k < 1 {
            return Err(Error::InvalidParameter("window K must be positive".into()));
        }
        if r0.value.norm() == 0.0 {
            return Err(Error::InvalidParameter("r0 = 0".into()));
        }
        let fam = LFamily::Generic { r0, r1, r2, q, k, m_o };
        let f = fam.beta_factor(m_o + 1);
        let scale = 1.0 + (r1 * r2).norm() + r1.norm() + r2.norm();
        if f.norm() > 1e-12 * scale {
            return Err(Error::Leakage { index: m_o, element: f.norm() });
        }
        Ok(fam)
    }

    /// Auxiliary index range (inclusive).
    pub fn index_range(&self) -> (i64, i64) {
        match *self {
            LFamily::RootOfUnity { n_prime, .. } => (0, n_prime as i64 - 1),
            LFamily::Generic { k, m_o, .. } => (m_o - k as i64 + 1, m_o),
        }
    }

    pub fn aux_dim(&self) -> usize {
        let (lo, hi) = self.index_range();
        (hi - lo + 1) as usize
    }

    /// Twist weights λ^{h′} = λ^{−2n} over the index range.
    pub fn twist_weights(&self, lambda: C64) -> Vec<C64> {
        let (lo, hi) = self.index_range();
        (lo..=hi).map(|n| lambda.powi(-2 * n as i32)).collect()
    }

    fn beta_factor(&self, n: i64) -> C64 {
        match *self {
            LFamily::Generic { r1, r2, q, .. } => {
                let s = 2 * n as i32 - 2;
                r1 * r2 + ONE - r1 * q.powi(s) - r2 * q.powi(-s)
            }
            LFamily::RootOfUnity { .. } => ONE,
        }
    }

    pub fn at(&self, x: C64) -> LWeights {
        LWeights { family: self.clone(), x }
    }
}

/// Matrix elements of an L-operator at a fixed ratio x = w/z.
#[derive(Clone, Debug, PartialEq)]
pub struct LWeights {
    pub family: LFamily,
    pub x: C64,
}

impl LWeights {
    /// α_n from the closed form, valid at any integer n.
    pub fn alpha_at(&self, n: i64) -> C64 {
        let x = self.x;
        match self.family {
            LFamily::RootOfUnity { mu, q, .. } => {
                let qn = q.value.powi(n as i32);
                x / mu.half * q.half / qn - mu.half * qn * q.half
            }
            LFamily::Generic { r0, r2, q, .. } => {
                let qn = q.powi(n as i32);
                x * r2 / r0.half * q * q / qn - qn / r0.half
            }
        }
    }

    pub fn delta_at(&self, n: i64) -> C64 {
        let x = self.x;
        match self.family {
            LFamily::RootOfUnity { mu, q, .. } => {
                let qn = q.value.powi(n as i32);
                x * mu.half * qn * q.value * q.half - ONE / (mu.half * qn * q.half)
            }
            LFamily::Generic { r0, r1, q, .. } => {
                let qn = q.powi(n as i32);
                x * r1 * r0.half * qn - r0.half / qn
            }
        }
    }

    /// γ_n = ⟨n|γ|n+1⟩ from the closed form.
    pub fn gamma_at(&self, n: i64) -> C64 {
        match self.family {
            LFamily::RootOfUnity { mu, q, .. } => {
                let qq = q.value;
                let s = 2 * n as i32 + 2;
                mu.half * qq.powi(n as i32 + 1) * q.half
                    * (mu.value + ONE / mu.value - mu.value * qq.powi(s) - qq.powi(-s) / mu.value)
                    / (qq - ONE / qq)
            }
            LFamily::Generic { r0, q, .. } => (q - ONE / q) / r0.half * q.powi(n as i32 + 1),
        }
    }

    /// β_n = ⟨n|β|n−1⟩ from the closed form.
    pub fn beta_at(&self, n: i64) -> C64 {
        let x = self.x;
        match self.family {
            LFamily::RootOfUnity { mu, q, .. } => {
                let qq = q.value;
                x * (qq - ONE / qq) / mu.half * q.half / qq.powi(n as i32)
            }
            LFamily::Generic { r0, q, .. } => {
                x * r0.half * q.powi(1 - n as i32) * self.family.beta_factor(n) / (q - ONE / q)
            }
        }
    }

    /// γ_n inside the index range (zero at the upper edge).
    pub fn gamma(&self, n: i64) -> C64 {
        let (lo, hi) = self.family.index_range();
        if n < lo || n >= hi {
            ZERO
        } else {
            self.gamma_at(n)
        }
    }

    /// β_n inside the index range (zero at the lower edge).
    pub fn beta(&self, n: i64) -> C64 {
        let (lo, hi) = self.family.index_range();
        if n <= lo || n > hi {
            ZERO
        } else {
            self.beta_at(n)
        }
    }

    pub fn alpha(&self, n: i64) -> C64 {
        let (lo, hi) = self.family.index_range();
        if n < lo || n > hi {
            ZERO
        } else {
            self.alpha_at(n)
        }
    }

    pub fn delta(&self, n: i64) -> C64 {
        let (lo, hi) = self.family.index_range();
        if n < lo || n > hi {
            ZERO
        } else {
            self.delta_at(n)
        }
    }

    /// Local operator as auxiliary blocks over the site basis.
    pub fn site_operator(&self) -> SiteOperator {
        let (lo, _) = self.family.index_range();
        let d = self.family.aux_dim();
        let n = |i: usize| lo + i as i64;
        let x00 = CMatrix::diag(&(0..d).map(|i| self.alpha(n(i))).collect::<Vec<_>>());
        let x11 = CMatrix::diag(&(0..d).map(|i| self.delta(n(i))).collect::<Vec<_>>());
        let x01 = shift_down(d, |i| self.beta(n(i + 1)));
        let x10 = shift_up(d, |i| self.gamma(n(i - 1)));
        SiteOperator::from_blocks([[x00, x01], [x10, x11]])
    }
}

pub fn l_rootofunity(x: C64, mu: Branched, p: &ModelParams) -> Result<LWeights> {
    Ok(LFamily::root_of_unity(mu, p)?.at(x))
}

pub fn l_generic(x: C64, r0: Branched, r1: C64, r2: C64, k: usize, q: C64) -> Result<LWeights> {
    Ok(LFamily::generic(r0, r1, r2, k, q)?.at(x))
}

/// A local operator L = Σ_ab X_ab ⊗ |a⟩⟨b| with auxiliary blocks X_ab.
#[derive(Clone, Debug)]
pub struct SiteOperator {
    pub aux_dim: usize,
    pub blocks: [[CMatrix; 2]; 2],
    /// For each auxiliary column k′: the nonzero (k, a, b, X_ab[k, k′]).
    pub(crate) columns: Vec<Vec<(usize, usize, usize, C64)>>,
}

impl SiteOperator {
    pub fn from_blocks(blocks: [[CMatrix; 2]; 2]) -> Self {
        let d = blocks[0][0].rows();
        let mut columns = vec![Vec::new(); d];
        for (kp, col) in columns.iter_mut().enumerate() {
            for k in 0..d {
                for a in 0..2 {
                    for b in 0..2 {
                        let v = blocks[a][b][(k, kp)];
                        if v != ZERO {
                            col.push((k, a, b, v));
                        }
                    }
                }
            }
        }
        Self { aux_dim: d, blocks, columns }
    }

    /// From a 4×4 matrix in (auxiliary ⊗ site) order.
    pub fn from_rmatrix(r: &CMatrix) -> Self {
        let mk = |a: usize, b: usize| CMatrix::from_fn(2, 2, |i, j| r[(i * 2 + a, j * 2 + b)]);
        Self::from_blocks([[mk(0, 0), mk(0, 1)], [mk(1, 0), mk(1, 1)]])
    }

    /// Full matrix in (auxiliary ⊗ site) order.
    pub fn full_matrix(&self) -> CMatrix {
        let d = self.aux_dim;
        CMatrix::from_fn(2 * d, 2 * d, |r, c| self.blocks[r % 2][c % 2][(r / 2, c / 2)])
    }
}

/// Fusion L-operator with auxiliary spin n/2, ρ₊ = wq, ρ₋ = 1, as a
/// 2(n+1)-dimensional matrix in (auxiliary ⊗ site) order.
pub fn l_fusion(w: C64, n: usize, q: Branched) -> Result<CMatrix> {
    Ok(fusion_site_operator(w, n, q)?.full_matrix())
}

pub fn fusion_site_operator(w: C64, n: usize, q: Branched) -> Result<SiteOperator> {
    let rep = spin_n_rep(ONE, n, q.value)?;
    let d = n + 1;
    let qh2: Vec<C64> = (0..d).map(|m| q.half.powi(n as i32 - 2 * m as i32)).collect();
    let qh2m: Vec<C64> = qh2.iter().map(|&x| ONE / x).collect();
    let (rp, rm) = (w * q.value, ONE);
    let dq = q.value - ONE / q.value;
    let kp = CMatrix::diag(&qh2);
    let km = CMatrix::diag(&qh2m);
    let f1 = rep.f1.as_ref().expect("spin rep has f1");
    let x00 = &kp.scale(rp) - &km.scale(rm);
    let x11 = &km.scale(rp) - &kp.scale(rm);
    let x01 = (&kp * f1).scale(rp * dq);
    let x10 = (&rep.e1 * &km).scale(rm * dq);
    Ok(SiteOperator::from_blocks([[x00, x01], [x10, x11]]))
}

/// Six-vertex R-matrix as a site operator with auxiliary C².
pub fn sixvertex_site_operator(z: C64, q: C64) -> Result<SiteOperator> {
    Ok(SiteOperator::from_rmatrix(&rmatrix(z, q)?))
}
