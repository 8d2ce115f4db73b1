//! Hyper-Kloosterman sums Kl_k(x;q), classical Kloosterman sums S(a,b;q),
//! the shift-correlation diagnostics V₂ and W, and incomplete inverse sums.
//!
//! `kl_point` is the direct-sum reference; `kl_all` computes the whole
//! length-(q−1) table at once by mapping the unit group to ℤ/(q−1) through
//! the discrete log, where the constraint x₁⋯x_k ≡ x becomes a k-fold cyclic
//! convolution, evaluated with a fast Fourier transform of arbitrary length.
//!
//! Sheaf-theoretic inputs (conductor k+3, monodromy, smoothed-sum constants)
//! are not modeled; the diagnostics only report observed ratios against the
//! reference envelopes.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::Serialize;

use crate::arith::{is_prime, mul_mod, PrimeContext};
use crate::central::VTable;
use crate::util::{e, Accum, CAccum};
use crate::{Error, Result};

/// Cost guard for the direct sum: (q−1)^{k−1} terms.
const KL_POINT_GUARD: f64 = 1e8;

/// Normalized hyper-Kloosterman values for every unit x mod q.
#[derive(Debug, Clone)]
pub struct KlTable {
    pub q: u64,
    pub k: u32,
    /// values[x−1] = Kl_k(x;q) for x = 1..q−1.
    values: Vec<Complex64>,
    /// Same values indexed by discrete log: by_dlog[j] = Kl_k(g^j;q).
    by_dlog: Vec<Complex64>,
}

impl KlTable {
    /// Kl_k(x;q); x must be a unit.
    #[inline]
    pub fn at(&self, x: u64) -> Result<Complex64> {
        let r = x % self.q;
        if r == 0 {
            return Err(Error::NotAUnit(x));
        }
        Ok(self.values[(r - 1) as usize])
    }

    #[inline]
    pub fn at_unit(&self, x: u64) -> Complex64 {
        debug_assert!(x >= 1 && x < self.q);
        self.values[(x - 1) as usize]
    }

    /// Kl_k(g^j;q).
    #[inline]
    pub fn at_dlog(&self, j: u64) -> Complex64 {
        self.by_dlog[(j % (self.q - 1)) as usize]
    }

    /// Kl_k(x) + Kl_k(−x) at x = g^j.
    #[inline]
    pub fn pm_at_dlog(&self, j: u64) -> Complex64 {
        let ord = self.q - 1;
        self.at_dlog(j) + self.at_dlog(j + ord / 2)
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub(crate) fn from_values(q: u64, k: u32, values: Vec<Complex64>, ctx: &PrimeContext) -> Self {
        let perm = ctx.dlog_inverse_permutation();
        let by_dlog = perm.iter().map(|&r| values[(r - 1) as usize]).collect();
        Self {
            q,
            k,
            values,
            by_dlog,
        }
    }
}

/// Kl_k(x;q) by the defining sum: q^{−(k−1)/2} Σ_{x₁⋯x_k≡x} e((x₁+…+x_k)/q).
///
/// Reference implementation; cost (q−1)^{k−1}, guarded.
pub fn kl_point(k: u32, x: u64, q: u64) -> Result<Complex64> {
    if !is_prime(q) || q < 3 {
        return Err(Error::NotPrime(q));
    }
    if k < 1 {
        return Err(Error::Precondition("kl_point needs k ≥ 1".into()));
    }
    if x % q == 0 {
        return Err(Error::NotAUnit(x));
    }
    if (q as f64).powi(k as i32 - 1) > KL_POINT_GUARD {
        return Err(Error::Resource(format!(
            "kl_point cost q^(k-1) = {q}^{} exceeds {KL_POINT_GUARD:e}",
            k - 1
        )));
    }
    let x = x % q;
    if k == 1 {
        return Ok(e(x as f64 / q as f64));
    }
    // inverse table via the linear recurrence
    let mut inv = vec![0u64; q as usize];
    inv[1] = 1;
    for n in 2..q {
        inv[n as usize] = mul_mod(q - q / n, inv[(q % n) as usize], q);
    }
    // iterate (x₁,…,x_{k−1}) over units; the last coordinate is forced
    let mut acc = CAccum::new();
    let mut idx = vec![1u64; (k - 1) as usize];
    loop {
        let mut prod_inv = 1u64;
        let mut sum = 0u64;
        for &xi in &idx {
            prod_inv = mul_mod(prod_inv, inv[xi as usize], q);
            sum += xi;
        }
        let last = mul_mod(x, prod_inv, q);
        acc.add(e(((sum + last) % q) as f64 / q as f64));
        // odometer over 1..q−1 per coordinate
        let mut d = 0usize;
        loop {
            if d == idx.len() {
                let norm = (q as f64).powf((k as f64 - 1.0) / 2.0);
                return Ok(acc.value() / norm);
            }
            idx[d] += 1;
            if idx[d] < q {
                break;
            }
            idx[d] = 1;
            d += 1;
        }
    }
}

/// The whole Kl_k table for every unit x, via FFT over ℤ/(q−1).
///
/// The unnormalized sum N_k(x) = Σ_{x₁⋯x_k≡x} e((Σxᵢ)/q) is the k-fold
/// multiplicative convolution of h(x) = e(x/q); in dlog coordinates that is
/// a cyclic convolution, so N_k = IFFT(FFT(h)^k)/(q−1).  Cost O(q log q).
///
/// k = 1 is filled directly (exact); k = 0 is the convolution identity
/// √q·δ_{x≡1}, which is what the moment decomposition's degenerate term uses.
pub fn kl_all(k: u32, ctx: &PrimeContext) -> Result<Arc<KlTable>> {
    let q = ctx.q;
    let ord = (q - 1) as usize;
    if k == 0 {
        let mut values = vec![Complex64::new(0.0, 0.0); ord];
        values[0] = Complex64::new((q as f64).sqrt(), 0.0);
        return Ok(Arc::new(KlTable::from_values(q, 0, values, ctx)));
    }
    let roots = crate::util::symmetric_roots(q as usize);
    if k == 1 {
        let values: Vec<Complex64> = (1..q).map(|x| roots[x as usize]).collect();
        return Ok(Arc::new(KlTable::from_values(q, 1, values, ctx)));
    }
    let by_dlog_perm = ctx.dlog_inverse_permutation();
    let mut h: Vec<Complex64> = by_dlog_perm
        .iter()
        .map(|&r| roots[r as usize])
        .collect();
    let mut planner = FftPlanner::<f64>::new();
    let fft = planner.plan_fft_forward(ord);
    let ifft = planner.plan_fft_inverse(ord);
    fft.process(&mut h);
    for z in h.iter_mut() {
        *z = z.powu(k);
    }
    ifft.process(&mut h);
    let norm = (ord as f64) * (q as f64).powf((k as f64 - 1.0) / 2.0);
    let mut values = vec![Complex64::new(0.0, 0.0); ord];
    for (j, &r) in by_dlog_perm.iter().enumerate() {
        values[(r - 1) as usize] = h[j] / norm;
    }
    Ok(Arc::new(KlTable::from_values(q, k, values, ctx)))
}

/// Classical (non-normalized) Kloosterman sum S(a,b;q) = Σ*_x e((ax+bx̄)/q).
pub fn classical_kloosterman(a: u64, b: u64, q: u64) -> Result<Complex64> {
    if !is_prime(q) || q < 3 {
        return Err(Error::NotPrime(q));
    }
    let roots = crate::util::symmetric_roots(q as usize);
    let mut inv = vec![0u64; q as usize];
    inv[1] = 1;
    for n in 2..q {
        inv[n as usize] = mul_mod(q - q / n, inv[(q % n) as usize], q);
    }
    let (a, b) = (a % q, b % q);
    let mut acc = CAccum::new();
    for x in 1..q {
        let phase = (mul_mod(a, x, q) + mul_mod(b, inv[x as usize], q)) % q;
        acc.add(roots[phase as usize]);
    }
    Ok(acc.value())
}

/// Incomplete inverse sum S_m(T) = Σ*_{n≤T} e(m·n̄/q), direct.
pub fn incomplete_inverse_sum(m: u64, t_max: u64, ctx: &PrimeContext) -> Result<Complex64> {
    let q = ctx.q;
    if m % q == 0 {
        return Err(Error::NotAUnit(m));
    }
    if t_max < 1 {
        return Err(Error::Precondition("incomplete sum needs T ≥ 1".into()));
    }
    let roots = crate::util::symmetric_roots(q as usize);
    let m = m % q;
    let mut acc = CAccum::new();
    for n in 1..=t_max {
        if n % q == 0 {
            continue;
        }
        let nbar = ctx.inverse(n)?;
        acc.add(roots[mul_mod(m, nbar, q) as usize]);
    }
    Ok(acc.value())
}

/// Reference envelope for |S_m(T)| from completion: T/q + 2^{ω(q)}√q·Σ_{a≤q/2}1/a,
/// capped by the trivial bound T.
pub fn incomplete_sum_bound(t_max: u64, q: u64) -> f64 {
    let harmonic = 1.0 + (q as f64 / 2.0).ln();
    (t_max as f64 / q as f64 + 2.0 * (q as f64).sqrt() * harmonic).min(t_max as f64)
}

/// Correlation diagnostics of the shifted-sum argument.
#[derive(Debug, Clone, Serialize)]
pub struct CorrelationReport {
    pub q: u64,
    pub k: u32,
    pub c: u64,
    pub h: u64,
    pub n1: f64,
    pub n2: f64,
    /// V₂ = Σ_x ν(x)² with ν(x) = Σ_{n₁n̄₂≡x} (n₁n₂)^{−1/2} V(n₁/N₁) V(n₂/N₂).
    pub v2: f64,
    /// W = Σ_x |Σ_{h≤H} Kl_k(c(x+h);q)|².
    pub w: f64,
    /// Observed constant W/(k²Hq) against the reference envelope.
    pub w_envelope_ratio: f64,
}

/// Buckets Σ over n of n^{−1/2}V(n/scale) by dlog of n mod q; the ranges stop
/// where the estimated weight tail drops below `tail_target`.
pub(crate) fn bucket_weights(
    ctx: &PrimeContext,
    vt: &VTable,
    scale: f64,
    tail_target: f64,
) -> Vec<Complex64> {
    let q = ctx.q;
    let ord = (q - 1) as usize;
    let n_max = vt.cut_for(scale, tail_target);
    let mut w = vec![Complex64::new(0.0, 0.0); ord];
    for n in 1..=n_max {
        let r = n % q;
        if r == 0 {
            continue;
        }
        w[ctx.ind_unit(r) as usize].re += vt.value(n as f64 / scale) / (n as f64).sqrt();
    }
    w
}

/// ν over the units as a dlog-indexed vector, via one cyclic convolution:
/// the entry at dlog d collects the pairs with ind(n₁) − ind(n₂) ≡ d.
pub fn nu_vector(
    ctx: &PrimeContext,
    vt: &VTable,
    n1: f64,
    n2: f64,
    tail_target: f64,
) -> Vec<f64> {
    let ord = (ctx.q - 1) as usize;
    let u1 = bucket_weights(ctx, vt, n1, tail_target);
    let mut u2 = bucket_weights(ctx, vt, n2, tail_target);
    // reverse the n₂ index so the correlation becomes a plain convolution
    u2[1..].reverse();
    let mut planner = FftPlanner::<f64>::new();
    let fft = planner.plan_fft_forward(ord);
    let ifft = planner.plan_fft_inverse(ord);
    let mut a = u1;
    let mut b = u2;
    fft.process(&mut a);
    fft.process(&mut b);
    for (x, y) in a.iter_mut().zip(b.iter()) {
        *x *= y;
    }
    ifft.process(&mut a);
    a.iter().map(|z| z.re / ord as f64).collect()
}

/// V₂ and W for the given order, shift range and twist c.
pub fn correlation_diagnostics(
    kl: &KlTable,
    ctx: &PrimeContext,
    vt: &VTable,
    c: u64,
    h_max: u64,
    n1: f64,
    n2: f64,
) -> Result<CorrelationReport> {
    let q = ctx.q;
    if kl.q != q {
        return Err(Error::ModulusMismatch(kl.q, q));
    }
    if c % q == 0 {
        return Err(Error::NotAUnit(c));
    }
    if (h_max as f64) > (q as f64).sqrt() {
        return Err(Error::Precondition(format!(
            "H = {h_max} exceeds √q = {:.2}",
            (q as f64).sqrt()
        )));
    }
    let nu = nu_vector(ctx, vt, n1, n2, 1e-12);
    let mut v2 = Accum::new();
    for v in &nu {
        v2.add(v * v);
    }

    let mut w = Accum::new();
    for x in 0..q {
        let mut inner = CAccum::new();
        for h in 1..=h_max {
            let arg = (x + h) % q;
            if arg == 0 {
                continue; // the x_i range over units: the sum at 0 is empty
            }
            inner.add(kl.at_unit(mul_mod(c, arg, q)));
        }
        w.add(inner.value().norm_sqr());
    }
    let w = w.value();
    let envelope = (kl.k as f64).powi(2) * h_max as f64 * q as f64;
    Ok(CorrelationReport {
        q,
        k: kl.k,
        c,
        h: h_max,
        n1,
        n2,
        v2: v2.value(),
        w,
        w_envelope_ratio: w / envelope,
    })
}
