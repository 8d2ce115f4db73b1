//! Dirichlet characters mod a prime q, their Gauss sums, root numbers and
//! angles, and orthogonality over the even primitive subfamily.
//!
//! A character is indexed by its exponent `a ∈ ℤ/(q−1)`:
//! `χ_a(n) = e(a·ind(n)/(q−1))` for `(n,q)=1`, zero otherwise.  Evaluation is
//! one discrete-log lookup plus one lookup into a precomputed table of the
//! roots of unity `e(j/(q−1))`, so it is O(1) with O(q) memory.

use std::sync::Arc;

use num_complex::Complex64;

use crate::arith::PrimeContext;
use crate::util::{symmetric_roots, CAccum};
use crate::{Error, Result};

/// Angles within this distance of 1 snap to 0, so half-open interval tests
/// on ℝ/ℤ are stable at the wrap point.
pub const THETA_SNAP: f64 = 1e-12;

/// Shared evaluation tables for all characters mod q.
#[derive(Debug, Clone)]
pub struct CharTable {
    ctx: Arc<PrimeContext>,
    /// e(j/(q−1)) for j = 0..q−2, built symmetrically so that
    /// roots[q−1−j] is exactly the conjugate of roots[j].
    roots: Vec<Complex64>,
    /// e(t/q) for t = 0..q−1, same conjugate symmetry.
    eq: Vec<Complex64>,
}

/// A character: an exponent over a shared table.  Value object, cheap to copy.
#[derive(Debug, Clone, Copy)]
pub struct Character<'t> {
    table: &'t CharTable,
    /// Exponent index in ℤ/(q−1).
    pub a: u32,
}

/// Per-character central data: root number, its angle, and L(1/2,χ).
#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct CentralRecord {
    pub a: u32,
    pub eps: Complex64,
    /// Angle in [0,1) with ε(χ) = e(θ).
    pub theta: f64,
    pub lval: Complex64,
}

impl CharTable {
    pub fn new(ctx: Arc<PrimeContext>) -> Self {
        let q = ctx.q as usize;
        let roots = symmetric_roots(q - 1);
        let eq = symmetric_roots(q);
        Self { ctx, roots, eq }
    }

    pub fn q(&self) -> u64 {
        self.ctx.q
    }

    pub fn ctx(&self) -> &PrimeContext {
        &self.ctx
    }

    pub fn ctx_arc(&self) -> Arc<PrimeContext> {
        Arc::clone(&self.ctx)
    }

    /// e(t/q) lookup, t reduced mod q.
    #[inline]
    pub fn e_q(&self, t: u64) -> Complex64 {
        self.eq[(t % self.ctx.q) as usize]
    }

    /// e(j/(q−1)) lookup, j reduced mod q−1.
    #[inline]
    pub fn root(&self, j: u64) -> Complex64 {
        self.roots[(j % (self.ctx.q - 1)) as usize]
    }

    pub fn character(&self, a: u32) -> Character<'_> {
        Character {
            table: self,
            a: a % (self.ctx.q - 1) as u32,
        }
    }

    /// All even primitive characters, ascending exponent: a = 2, 4, …, q−3.
    /// Empty for q = 3; count (q−3)/2 for prime q ≥ 5.
    pub fn even_primitive(&self) -> Vec<Character<'_>> {
        let q = self.ctx.q;
        (1..=(q.saturating_sub(3)) / 2)
            .map(|i| self.character((2 * i) as u32))
            .collect()
    }

    /// χ_a(n) for arbitrary integer n (negative allowed).
    pub fn eval(&self, a: u32, n: i64) -> Complex64 {
        let q = self.ctx.q as i64;
        let r = n.rem_euclid(q) as u64;
        if r == 0 {
            return Complex64::new(0.0, 0.0);
        }
        let j = a as u64 * self.ctx.ind_unit(r) as u64;
        self.root(j)
    }
}

/// Number of even primitive characters mod the prime q: (q−3)/2 for q ≥ 5.
pub fn phi_plus(q: u64) -> u64 {
    if q <= 3 {
        0
    } else {
        (q - 3) / 2
    }
}

impl<'t> Character<'t> {
    /// Parity bit δ = (1 − χ(−1))/2; equals a mod 2 since χ_a(−1) = (−1)^a.
    #[inline]
    pub fn delta(&self) -> u8 {
        (self.a % 2) as u8
    }

    #[inline]
    pub fn is_even(&self) -> bool {
        self.a % 2 == 0
    }

    /// Primitive iff non-principal (prime modulus).
    #[inline]
    pub fn is_primitive(&self) -> bool {
        self.a != 0
    }

    pub fn q(&self) -> u64 {
        self.table.q()
    }

    pub fn table(&self) -> &'t CharTable {
        self.table
    }

    /// χ̄ = χ_{q−1−a}.
    pub fn conjugate(&self) -> Character<'t> {
        let ord = (self.q() - 1) as u32;
        self.table.character((ord - self.a) % ord)
    }

    /// χ(n).
    #[inline]
    pub fn eval(&self, n: i64) -> Complex64 {
        self.table.eval(self.a, n)
    }

    /// Gauss sum τ(χ) = Σ_t χ(t) e(t/q) by direct summation, with the root
    /// number ε(χ) = τ(χ)/(i^δ √q) and its angle θ ∈ [0,1).
    ///
    /// Rejects the principal character: the normalized Gauss sum has modulus
    /// 1 only for primitive χ.
    pub fn gauss_sum_and_angle(&self) -> Result<(Complex64, Complex64, f64)> {
        if !self.is_primitive() {
            return Err(Error::NotPrimitive);
        }
        let q = self.q();
        let mut acc = CAccum::new();
        for t in 1..q {
            let j = self.a as u64 * self.table.ctx.ind_unit(t) as u64;
            acc.add(self.table.root(j) * self.table.e_q(t));
        }
        let tau = acc.value();
        let (eps, theta) = normalize_root_number(tau, q, self.delta());
        Ok((tau, eps, theta))
    }
}

/// ε = τ/(i^δ √q) and its angle, snapped at the wrap point.
pub fn normalize_root_number(tau: Complex64, q: u64, delta: u8) -> (Complex64, f64) {
    let i_delta = if delta == 0 {
        Complex64::new(1.0, 0.0)
    } else {
        Complex64::new(0.0, 1.0)
    };
    let eps = tau / (i_delta * (q as f64).sqrt());
    let mut theta = eps.arg() / (2.0 * std::f64::consts::PI);
    if theta < 0.0 {
        theta += 1.0;
    }
    if theta >= 1.0 - THETA_SNAP {
        theta = 0.0;
    }
    (eps, theta)
}

/// Even-family orthogonality: computed Σ⁺χ(m) by enumeration over a = 2,4,…
/// against the divisor-sum prediction
/// ½ Σ_{vw=q, m≡1 (w)} μ(v)φ(w) + ½ Σ_{vw=q, m≡−1 (w)} μ(v)φ(w),
/// which for prime q collapses to (φ(q)/2)·[m ≡ ±1] − 1.
pub fn orthogonality_sum(table: &CharTable, m: u64) -> Result<(Complex64, f64)> {
    let q = table.q();
    if m % q == 0 {
        return Err(Error::NotAUnit(m));
    }
    let d = table.ctx().ind(m)? as u64;
    let mut acc = CAccum::new();
    let mut a = 2u64;
    while a <= q.saturating_sub(3) {
        acc.add(table.root(a * d));
        a += 2;
    }
    let computed = acc.value();

    let r = m % q;
    let hits = (r == 1) as u32 + (r == q - 1) as u32;
    let predicted = (q - 1) as f64 / 2.0 * hits as f64 - 1.0;
    Ok((computed, predicted))
}
