//! The mollifier M(χ) = Σ_{m≤M} x_m χ(m) m^{−1/2}: exact-rational
//! coefficients, the normalizer G, its log-asymptotic with the constant c,
//! unitary-convolution identities, and the a(n) partial-sum diagnostic.
//!
//! Everything structural is exact: G and the x_m are rationals, so x₁ = 1,
//! |x_m| ≤ 1 and Σ x_m/m = 1/G are identities here, not tolerance checks.
//! Floating point appears only when a mollifier is evaluated at a character.

use std::sync::OnceLock;

use num_bigint::BigInt;
use num_complex::Complex64;
pub use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};

use crate::characters::CharTable;
use crate::sieve::{primes_up_to, SieveTables};
use crate::special::EULER_GAMMA;
use crate::util::{Accum, CAccum};
use crate::{Error, Result};

/// Cap on the mollifier length M.
pub const M_CAP: u64 = 1_000_000;

/// Exact sum of fractions p/d with small denominators: the running value is
/// kept over the incremental lcm of the denominators, so each add costs one
/// gcd against a machine-size integer instead of a full big-rational reduce.
#[derive(Debug, Clone)]
struct RatSum {
    num: BigInt,
    den: BigInt,
}

impl RatSum {
    fn zero() -> Self {
        Self {
            num: BigInt::zero(),
            den: BigInt::one(),
        }
    }

    fn add(&mut self, p: i64, d: u64) {
        debug_assert!(d > 0);
        let d = BigInt::from(d);
        let g = num_integer::gcd(self.den.clone(), d.clone());
        let scale = &d / &g;
        self.num = &self.num * &scale + BigInt::from(p) * (&self.den / &g);
        self.den *= scale;
    }

    fn value(&self) -> BigRational {
        BigRational::new(self.num.clone(), self.den.clone())
    }
}

/// The Iwaniec–Sarnak mollifier data for one (q, α).
#[derive(Debug, Clone)]
pub struct MollifierSet {
    pub q: u64,
    pub alpha: f64,
    /// M = ⌊q^α⌋.
    pub m_len: u64,
    /// G = Σ_{k≤M,(k,q)=1} μ²(k)/φ(k), exact.
    pub g: BigRational,
    /// (m, x_m) for the squarefree m ≤ M with (m,q)=1; x₁ = 1 comes first.
    coeffs: Vec<(u64, BigRational)>,
}

impl MollifierSet {
    pub fn coefficients(&self) -> &[(u64, BigRational)] {
        &self.coeffs
    }

    /// x_m; zero off the support (non-squarefree m, q | m, m > M).
    pub fn coefficient(&self, m: u64) -> BigRational {
        self.coeffs
            .iter()
            .find(|(mm, _)| *mm == m)
            .map(|(_, x)| x.clone())
            .unwrap_or_else(BigRational::zero)
    }

    /// Σ_{m≤M} x_m/m, exact; telescopes to 1/G.
    pub fn sum_x_over_m(&self) -> BigRational {
        let mut acc = BigRational::zero();
        for (m, x) in &self.coeffs {
            acc += x / BigRational::from(BigInt::from(*m));
        }
        acc
    }

    /// Coefficients converted once to floating point.
    pub fn coeffs_f64(&self) -> Vec<(u64, f64)> {
        self.coeffs
            .iter()
            .map(|(m, x)| (*m, x.to_f64().expect("|x_m| ≤ 1 converts")))
            .collect()
    }

    /// The three exact structural identities: x₁ = 1, |x_m| ≤ 1 for every m,
    /// and Σ x_m/m = 1/G (all compared as rationals, no tolerances).
    pub fn exactness_holds(&self) -> bool {
        use num_traits::{One as _, Signed as _};
        let one = BigRational::one();
        self.coefficient(1).is_one()
            && self.coeffs.iter().all(|(_, x)| x.abs() <= one)
            && (self.sum_x_over_m() * self.g.clone()).is_one()
    }
}

/// Build the mollifier for modulus q and length exponent α ∈ (0, 1/2).
pub fn build_mollifier(q: u64, alpha: f64) -> Result<MollifierSet> {
    if !(alpha > 0.0 && alpha < 0.5) {
        return Err(Error::Precondition(format!(
            "mollifier exponent must lie in (0, 1/2), got {alpha}"
        )));
    }
    let m_len = (q as f64).powf(alpha).floor() as u64;
    if m_len == 0 {
        return Err(Error::Precondition("mollifier length M = 0".into()));
    }
    if m_len > M_CAP {
        return Err(Error::Resource(format!(
            "mollifier length {m_len} exceeds the cap {M_CAP}"
        )));
    }
    let t = SieveTables::up_to(m_len as usize);
    let g = g_sum(&t, m_len, q);
    let mut coeffs = Vec::new();
    for m in 1..=m_len {
        if m % q == 0 || !t.is_squarefree(m as usize) {
            continue;
        }
        // inner sum over ℓ ≤ M/m with (ℓ, mq) = 1
        let mut inner = RatSum::zero();
        let bound = m_len / m;
        for l in 1..=bound {
            if l % q == 0 || !t.is_squarefree(l as usize) {
                continue;
            }
            if num_integer::gcd(l, m) != 1 {
                continue;
            }
            inner.add(1, t.phi[l as usize]);
        }
        // x_m = μ(m)·m/φ(m) · inner/G
        let mu = t.mu[m as usize] as i64;
        let lead = BigRational::new(
            BigInt::from(mu * m as i64),
            BigInt::from(t.phi[m as usize]),
        );
        let x = lead * inner.value() / g.clone();
        coeffs.push((m, x));
    }
    Ok(MollifierSet {
        q,
        alpha,
        m_len,
        g,
        coeffs,
    })
}

/// G = Σ_{k≤M,(k,q)=1} μ²(k)/φ(k), exact.
fn g_sum(t: &SieveTables, m_len: u64, q: u64) -> BigRational {
    let mut acc = RatSum::zero();
    for k in 1..=m_len {
        if k % q == 0 || !t.is_squarefree(k as usize) {
            continue;
        }
        acc.add(1, t.phi[k as usize]);
    }
    acc.value()
}

/// The absolute constant c = γ + Σ_p log p/(p(p−1)) in the asymptotic of G,
/// with the prime sum truncated at 10⁷ and the tail bounded by
/// Σ_{n>P} log n/(n(n−1)) ≤ (log P + 1)/P.  Returns (value, tail bound).
pub fn mollifier_constant_c() -> (f64, f64) {
    static C: OnceLock<(f64, f64)> = OnceLock::new();
    *C.get_or_init(|| {
        const P: usize = 10_000_000;
        let primes = primes_up_to(P);
        let mut acc = Accum::new();
        for &p in primes.iter().rev() {
            let p = p as f64;
            acc.add(p.ln() / (p * (p - 1.0)));
        }
        let tail = ((P as f64).ln() + 1.0) / P as f64;
        (EULER_GAMMA + acc.value(), tail)
    })
}

/// Comparison of the exact G against its predicted asymptotic
/// (φ(q)/q)(log M + c + Σ_{p|q} log p/p); the residual is scaled by
/// √M/θ(q) so it should stay bounded over an M-grid.
#[derive(Debug, Clone, serde::Serialize)]
pub struct GAsymptotic {
    pub q: u64,
    pub m_len: u64,
    pub direct: f64,
    pub predicted: f64,
    pub residual_ratio: f64,
}

pub fn g_asymptotic_check(q: u64, m_len: u64) -> Result<GAsymptotic> {
    if !crate::arith::is_prime(q) {
        return Err(Error::NotPrime(q));
    }
    if m_len < 1 || m_len > M_CAP {
        return Err(Error::Precondition(format!("M = {m_len} out of range")));
    }
    let t = SieveTables::up_to(m_len as usize);
    let direct = g_sum(&t, m_len, q)
        .to_f64()
        .expect("G is a moderate rational");
    let (c, _) = mollifier_constant_c();
    let qf = q as f64;
    let predicted = (qf - 1.0) / qf * ((m_len as f64).ln() + c + qf.ln() / qf);
    let theta_q = 2.0; // 2^{ω(q)}, q prime
    let residual_ratio = (direct - predicted).abs() * (m_len as f64).sqrt() / theta_q;
    Ok(GAsymptotic {
        q,
        m_len,
        direct,
        predicted,
        residual_ratio,
    })
}

/// The named multiplicative weights of the convolution identities; all are
/// supported on squarefree integers coprime to q.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MultSpec {
    /// μ(n)/φ(n)
    MuOverPhi,
    /// μ²(n)/φ(n)
    MuSqOverPhi,
    /// μ(n)τ(n)/φ(n)
    MuTauOverPhi,
}

impl MultSpec {
    fn eval(&self, n: u64, q: u64, t: &SieveTables) -> BigRational {
        if n % q == 0 {
            return BigRational::zero();
        }
        let n = n as usize;
        let mu = t.mu[n] as i64;
        if mu == 0 {
            return BigRational::zero();
        }
        let num = match self {
            MultSpec::MuOverPhi => mu,
            MultSpec::MuSqOverPhi => 1,
            MultSpec::MuTauOverPhi => mu * t.tau[n] as i64,
        };
        BigRational::new(BigInt::from(num), BigInt::from(t.phi[n]))
    }
}

/// Unitary divisors of n: the d | n with (d, n/d) = 1.
fn unitary_divisors(n: u64, t: &SieveTables) -> Vec<u64> {
    let mut prime_powers = Vec::new();
    let mut m = n as usize;
    while m > 1 {
        let p = t.spf[m] as usize;
        let mut pe = 1u64;
        while m % p == 0 {
            m /= p;
            pe *= p as u64;
        }
        prime_powers.push(pe);
    }
    let mut divs = vec![1u64];
    for pe in prime_powers {
        let len = divs.len();
        for i in 0..len {
            divs.push(divs[i] * pe);
        }
    }
    divs
}

/// (f ⋆₁ g)(n) = Σ_{lm=n, (l,m)=1} f(l) g(m), by direct enumeration of the
/// unitary divisors.  Exact.
pub fn unitary_convolution(
    f: MultSpec,
    g: MultSpec,
    n: u64,
    q: u64,
    t: &SieveTables,
) -> Result<BigRational> {
    if n == 0 || n as usize > t.n {
        return Err(Error::Precondition(format!("n = {n} outside sieve range")));
    }
    let mut acc = BigRational::zero();
    for l in unitary_divisors(n, t) {
        acc += f.eval(l, q, t) * g.eval(n / l, q, t);
    }
    Ok(acc)
}

/// (f ⋆₁ g ⋆₁ h)(n), associativity made explicit by a double enumeration.
pub fn unitary_convolution3(
    f: MultSpec,
    g: MultSpec,
    h: MultSpec,
    n: u64,
    q: u64,
    t: &SieveTables,
) -> Result<BigRational> {
    if n == 0 || n as usize > t.n {
        return Err(Error::Precondition(format!("n = {n} outside sieve range")));
    }
    let mut acc = BigRational::zero();
    for l in unitary_divisors(n, t) {
        let rest = n / l;
        acc += f.eval(l, q, t) * unitary_convolution(g, h, rest, q, t)?;
    }
    Ok(acc)
}

/// Σ_{n≤M} a(n) for the multiplicative a supported on squarefree n with
/// a(p) = (√p + 3)/(p − 1); returns the sum and its ratio to √M.
pub fn a_partial_sum(m_len: u64) -> Result<(f64, f64)> {
    if m_len < 1 {
        return Err(Error::Precondition("a_partial_sum needs M ≥ 1".into()));
    }
    let t = SieveTables::up_to(m_len as usize);
    let mut a = vec![0.0f64; m_len as usize + 1];
    a[1] = 1.0;
    let mut acc = Accum::new();
    acc.add(1.0);
    for n in 2..=m_len as usize {
        if !t.is_squarefree(n) {
            continue;
        }
        let p = t.spf[n] as usize;
        let ap = ((p as f64).sqrt() + 3.0) / (p as f64 - 1.0);
        a[n] = a[n / p] * ap;
        acc.add(a[n]);
    }
    let sum = acc.value();
    Ok((sum, sum / (m_len as f64).sqrt()))
}

/// M(χ) = Σ_m x_m χ(m) m^{−1/2} in floating point.
pub fn mollifier_value(set: &MollifierSet, table: &CharTable, a: u32) -> Result<Complex64> {
    if set.q != table.q() {
        return Err(Error::ModulusMismatch(set.q, table.q()));
    }
    let mut acc = CAccum::new();
    for (m, x) in set.coeffs_f64() {
        acc.add(table.eval(a, m as i64) * (x / (m as f64).sqrt()));
    }
    Ok(acc.value())
}
