//! Model parameters: chain length, deformation, twist and inhomogeneities.

use std::f64::consts::PI;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::ONE;

/// A complex number carried together with a chosen square root.
///
/// Half powers of μ, q and r0 enter the L-operators; functional relations
/// shift these parameters by q, and the shifted square root must follow
/// continuously (μq)^{1/2} = μ^{1/2} q^{1/2} rather than jump to the
/// principal branch.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Branched {
    pub value: C64,
    pub half: C64,
}

impl Branched {
    pub fn principal(value: C64) -> Self {
        Self { value, half: value.sqrt() }
    }

    pub fn from_half(half: C64) -> Self {
        Self { value: half * half, half }
    }

    pub fn mul(self, other: Branched) -> Branched {
        Branched { value: self.value * other.value, half: self.half * other.half }
    }

    pub fn div(self, other: Branched) -> Branched {
        Branched { value: self.value / other.value, half: self.half / other.half }
    }

    pub fn inv(self) -> Branched {
        Branched { value: ONE / self.value, half: ONE / self.half }
    }

    /// value^{two_s / 2}, using the stored square root.
    pub fn pow_half(self, two_s: i64) -> C64 {
        self.half.powi(two_s as i32)
    }
}

/// Exact root-of-unity data: q = exp(2πi k / n) with gcd(k, n) = 1.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RootOrder {
    pub n: u32,
    pub k: i64,
    pub n_prime: u32,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams {
    pub m: usize,
    pub q: C64,
    pub q_half: C64,
    pub lambda: C64,
    pub zeta: Vec<C64>,
    pub root: Option<RootOrder>,
}

fn gcd(a: i64, b: i64) -> i64 {
    if b == 0 {
        a.abs()
    } else {
        gcd(b, a % b)
    }
}

fn check_common(m: usize, q: C64, lambda: C64) -> Result<()> {
    if m == 0 {
        return Err(Error::InvalidParameter("chain length M must be at least 1".into()));
    }
    if m > 12 {
        return Err(Error::InvalidParameter(format!("M = {m} exceeds the dense limit of 12 sites")));
    }
    if !(q.norm() > 0.0) || !q.re.is_finite() || !q.im.is_finite() {
        return Err(Error::InvalidParameter("q must be finite and nonzero".into()));
    }
    if !(lambda.norm() > 0.0) || !lambda.re.is_finite() || !lambda.im.is_finite() {
        return Err(Error::InvalidParameter("lambda must be finite and nonzero".into()));
    }
    Ok(())
}

impl ModelParams {
    /// q = exp(2πi k/n), homogeneous chain.
    pub fn root_of_unity(m: usize, n: u32, k: i64, lambda: C64) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParameter("root-of-unity order must be positive".into()));
        }
        let g = gcd(k, n as i64);
        if g == 0 {
            return Err(Error::InvalidParameter("k = 0 gives q = 1".into()));
        }
        let n_red = (n as i64 / g) as u32;
        let mut k_red = k / g;
        k_red = k_red.rem_euclid(n_red as i64);
        if 2 * k_red > n_red as i64 {
            k_red -= n_red as i64;
        }
        if n_red < 3 {
            return Err(Error::InvalidParameter(format!(
                "root of unity of order {n_red} makes q - 1/q vanish"
            )));
        }
        let phase = 2.0 * PI * k_red as f64 / n_red as f64;
        let q = C64::from_polar(1.0, phase);
        let q_half = C64::from_polar(1.0, phase / 2.0);
        check_common(m, q, lambda)?;
        let n_prime = if n_red % 2 == 1 { n_red } else { n_red / 2 };
        let p = Self {
            m,
            q,
            q_half,
            lambda,
            zeta: vec![ONE; m],
            root: Some(RootOrder { n: n_red, k: k_red, n_prime }),
        };
        let qn = q.powu(n_red);
        let qnp = q.powu(n_prime);
        debug_assert!((qn - ONE).norm() < 1e-12);
        debug_assert!((qnp.norm() - 1.0).abs() < 1e-12 && qnp.im.abs() < 1e-12);
        Ok(p)
    }

    /// A q treated without root-of-unity structure.
    ///
    /// Only q² = 1 is rejected: the generic-q constructions divide by
    /// q − q⁻¹ and nothing else. Constructions that need q-integers check
    /// them where they are formed.
    pub fn generic(m: usize, q: C64, lambda: C64) -> Result<Self> {
        check_common(m, q, lambda)?;
        if (q * q - ONE).norm() < 1e-6 {
            return Err(Error::InvalidParameter("q^2 = 1 is degenerate".into()));
        }
        Ok(Self { m, q, q_half: q.sqrt(), lambda, zeta: vec![ONE; m], root: None })
    }

    /// Generic model with q = exp(iπ·phase).
    pub fn generic_phase(m: usize, phase_over_pi: f64, lambda: C64) -> Result<Self> {
        let q = C64::from_polar(1.0, PI * phase_over_pi);
        let mut p = Self::generic(m, q, lambda)?;
        p.q_half = C64::from_polar(1.0, PI * phase_over_pi / 2.0);
        Ok(p)
    }

    pub fn with_zeta(mut self, zeta: Vec<C64>) -> Result<Self> {
        if zeta.len() != self.m {
            return Err(Error::LengthMismatch { expected: self.m, got: zeta.len() });
        }
        if zeta.iter().any(|z| !(z.norm() > 0.0) || !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::InvalidParameter("inhomogeneities must be finite and nonzero".into()));
        }
        self.zeta = zeta;
        Ok(self)
    }

    pub fn with_lambda(&self, lambda: C64) -> Self {
        Self { lambda, ..self.clone() }
    }

    /// Same chain at another deformation parameter, with no root-of-unity data.
    pub fn at_q(&self, q: C64) -> Result<Self> {
        let p = Self::generic(self.m, q, self.lambda)?;
        p.with_zeta(self.zeta.clone())
    }

    pub fn dim(&self) -> usize {
        1 << self.m
    }

    pub fn q_branched(&self) -> Branched {
        Branched { value: self.q, half: self.q_half }
    }

    pub fn n_prime(&self) -> Result<usize> {
        self.root
            .map(|r| r.n_prime as usize)
            .ok_or_else(|| Error::InvalidParameter("this operation needs a root-of-unity q".into()))
    }

    /// Smallest k ≤ 24 with |q^k − 1| < 1e−6, if any.
    pub fn near_root_order(&self) -> Option<u32> {
        (1..=24u32).find(|&k| (self.q.powu(k) - ONE).norm() < 1e-6)
    }

    /// Π_m f(ζ_m).
    pub fn zeta_product(&self, f: impl Fn(C64) -> C64) -> C64 {
        self.zeta.iter().fold(ONE, |acc, &z| acc * f(z))
    }

    /// Π_m (z − ζ_m)/(z q² − ζ_m).
    pub fn phi(&self, z: C64) -> C64 {
        let q2 = self.q * self.q;
        self.zeta_product(|zt| (z - zt) / (z * q2 - zt))
    }

    /// Π_m (z/ζ_m − 1).
    pub fn phi_minus(&self, z: C64) -> C64 {
        self.zeta_product(|zt| z / zt - ONE)
    }

    pub fn is_homogeneous(&self) -> bool {
        self.zeta.iter().all(|&z| z == ONE)
    }
}
