//! Central values L(1/2,χ) through a smoothed approximate functional
//! equation, with an independent Hurwitz-zeta oracle and functional-equation
//! residuals.
//!
//! The smoothing weight is
//!
//! ```text
//! V(y) = (1/2πi) ∫ y^{-u} G(u) γ(1/2+u)/γ(1/2) du/u,     G(u) = P(u) e^{u²},
//! ```
//!
//! integrated on a vertical line.  P is even with P(0)=1 and vanishes at the
//! gamma-factor pole nearest the strip; evenness is what makes the dual sum
//! of the functional equation reuse the same V.  V depends only on the parity
//! δ, so one table per parity serves every modulus.
//!
//! The whole even family is evaluated at once: AFE weights are bucketed by
//! discrete log and the character sums become a single length-(q−1) Fourier
//! transform, as do all Gauss sums.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::Serialize;

use crate::characters::{normalize_root_number, CentralRecord, CharTable};
use crate::special::{gamma, hurwitz_zeta};
use crate::util::{fnv1a, CAccum};
use crate::{Error, Result};

/// Contour and smoothing-polynomial parameters for V(y).
#[derive(Debug, Clone, Serialize)]
pub struct SmoothingSpec {
    /// Parity bit of the characters this V serves.
    pub delta: u8,
    /// Coefficients of P(u), low degree first; P(0) must be 1 and P must be
    /// even so the functional-equation dual sum sees the same V.
    pub p_coeffs: Vec<f64>,
    /// Real part of the integration line.
    pub contour_re: f64,
    /// Truncation height of the line integral.
    pub contour_t: f64,
    /// Trapezoid step along the line.
    pub step: f64,
}

impl SmoothingSpec {
    /// Even-character spec: P(u) = 1 − 4u² kills the pole of Γ((1/2+u)/2)
    /// at u = −1/2 (and its mirror, keeping P even).
    pub fn even() -> Self {
        Self {
            delta: 0,
            p_coeffs: vec![1.0, 0.0, -4.0],
            contour_re: 1.5,
            contour_t: 8.0,
            step: 0.005,
        }
    }

    /// Odd-character spec: P(u) = 1 − 4u²/9 kills the pole at u = −3/2.
    pub fn odd() -> Self {
        Self {
            delta: 1,
            p_coeffs: vec![1.0, 0.0, -4.0 / 9.0],
            contour_re: 1.5,
            contour_t: 8.0,
            step: 0.005,
        }
    }

    pub fn for_delta(delta: u8) -> Self {
        if delta == 0 {
            Self::even()
        } else {
            Self::odd()
        }
    }

    /// Stable hash used to key caches and stamp output headers.
    pub fn hash(&self) -> u64 {
        fnv1a(serde_json::to_string(self).expect("spec serializes").as_bytes())
    }

    fn p_at(&self, u: Complex64) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for &c in self.p_coeffs.iter().rev() {
            acc = acc * u + c;
        }
        acc
    }

    /// G(u) = P(u) exp(u²).
    pub fn g_at(&self, u: Complex64) -> Complex64 {
        self.p_at(u) * (u * u).exp()
    }

    /// γ(1/2+u)/γ(1/2) with γ(s) = π^{−s/2} Γ((s+δ)/2).
    fn gamma_ratio(&self, u: Complex64) -> Complex64 {
        let d = self.delta as f64;
        let num = gamma((Complex64::new(0.5 + d, 0.0) + u) / 2.0);
        let den = gamma(Complex64::new((0.5 + d) / 2.0, 0.0));
        (-u * std::f64::consts::PI.ln() / 2.0).exp() * num / den
    }
}

/// Direct contour quadrature for V(y).  Reference implementation; the table
/// below is the fast path and is tested against this.
pub fn smoothing_v(y: f64, spec: &SmoothingSpec) -> Result<f64> {
    if y <= 0.0 {
        return Err(Error::Domain(format!("V(y) needs y > 0, got {y}")));
    }
    let lines = IntegrandLines::new(spec);
    Ok(lines.value(y.ln()))
}

/// Precomputed integrand samples on two vertical lines.
///
/// On the line Re u = c > 0 the factor y^{−c} blows up as y → 0 and the
/// quadrature cancels catastrophically, so for y < 1 the contour is pushed
/// to Re u = −c′ instead: that crossing collects the residue 1 at u = 0
/// (the nearest gamma pole is cancelled by P), and the integrand is O(y^{c′}).
struct IntegrandLines {
    spec: SmoothingSpec,
    pos_re: f64,
    neg_re: f64,
    /// F(u) = G(u)·γratio(u)/u sampled at u = re + i·j·step, j = 0..=n.
    pos_f: Vec<Complex64>,
    neg_f: Vec<Complex64>,
    /// u·F(u) samples for the derivative in ln y.
    pos_uf: Vec<Complex64>,
    neg_uf: Vec<Complex64>,
}

impl IntegrandLines {
    fn new(spec: &SmoothingSpec) -> Self {
        let pos_re = spec.contour_re;
        // stays short of the next gamma pole for either parity
        let neg_re = -spec.contour_re.min(1.5) - 0.25;
        let (pos_f, pos_uf) = line_samples(spec, pos_re);
        let (neg_f, neg_uf) = line_samples(spec, neg_re);
        Self {
            spec: spec.clone(),
            pos_re,
            neg_re,
            pos_f,
            neg_f,
            pos_uf,
            neg_uf,
        }
    }

    /// V(e^L).
    fn value(&self, ln_y: f64) -> f64 {
        if ln_y < 0.0 {
            1.0 + line_integral(&self.neg_f, &self.spec, self.neg_re, ln_y)
        } else {
            line_integral(&self.pos_f, &self.spec, self.pos_re, ln_y)
        }
    }

    /// dV/dL at L = ln y.
    fn derivative(&self, ln_y: f64) -> f64 {
        if ln_y < 0.0 {
            -line_integral(&self.neg_uf, &self.spec, self.neg_re, ln_y)
        } else {
            -line_integral(&self.pos_uf, &self.spec, self.pos_re, ln_y)
        }
    }
}

fn line_samples(spec: &SmoothingSpec, re: f64) -> (Vec<Complex64>, Vec<Complex64>) {
    let n = (spec.contour_t / spec.step).round() as usize;
    let mut f = Vec::with_capacity(n + 1);
    let mut uf = Vec::with_capacity(n + 1);
    for j in 0..=n {
        let u = Complex64::new(re, j as f64 * spec.step);
        let val = spec.g_at(u) * spec.gamma_ratio(u) / u;
        f.push(val);
        uf.push(val * u);
    }
    (f, uf)
}

/// (1/π)·Re ∫₀ᵀ F(re+it) e^{−(re+it)L} dt by trapezoid; the integrand's real
/// part is even in t, so the half-line carries the whole integral.
fn line_integral(f: &[Complex64], spec: &SmoothingSpec, re: f64, ln_y: f64) -> f64 {
    let rot = Complex64::from_polar(1.0, -spec.step * ln_y);
    let mut phase = Complex64::new(1.0, 0.0);
    let mut acc = CAccum::new();
    for (j, &fj) in f.iter().enumerate() {
        let w = if j == 0 || j == f.len() - 1 { 0.5 } else { 1.0 };
        acc.add(fj * phase * w);
        phase *= rot;
    }
    let scale = (-re * ln_y).exp() * spec.step / std::f64::consts::PI;
    acc.value().re * scale
}

const LN_Y_MIN: f64 = -18.5; // y ≈ 9.2e-9
const LN_Y_MAX: f64 = 11.1; // y ≈ 6.6e4; V is below 1e-14 here
const NODES_PER_UNIT: f64 = 512.0;

/// Cached V on a geometric grid with Hermite-cubic interpolation between
/// nodes; node derivatives come from the same quadrature, so interpolation
/// error stays below 1e-10 (checked against direct quadrature in tests).
#[derive(Debug)]
pub struct VTable {
    spec: SmoothingSpec,
    spec_hash: u64,
    h: f64,
    vals: Vec<f64>,
    /// dV/d(ln y) at the nodes.
    ders: Vec<f64>,
    /// tail[i] = ∫_{y_i}^{y_max} w^{−1/2} |V(w)| dw on the grid.
    tail: Vec<f64>,
}

impl VTable {
    pub fn build(spec: &SmoothingSpec) -> Arc<VTable> {
        let h = 1.0 / NODES_PER_UNIT;
        let n = ((LN_Y_MAX - LN_Y_MIN) / h).round() as usize + 1;
        let lines = IntegrandLines::new(spec);
        let pairs: Vec<(f64, f64)> = (0..n)
            .into_par_iter()
            .map(|i| {
                let ln_y = LN_Y_MIN + i as f64 * h;
                (lines.value(ln_y), lines.derivative(ln_y))
            })
            .collect();
        let vals: Vec<f64> = pairs.iter().map(|p| p.0).collect();
        let ders: Vec<f64> = pairs.iter().map(|p| p.1).collect();

        // cumulative ∫ y^{−1/2} |V| dy from the top of the grid, trapezoid in L
        let mut tail = vec![0.0f64; n];
        for i in (0..n - 1).rev() {
            let li = LN_Y_MIN + i as f64 * h;
            let lj = li + h;
            let fi = (li / 2.0).exp() * vals[i].abs();
            let fj = (lj / 2.0).exp() * vals[i + 1].abs();
            tail[i] = tail[i + 1] + 0.5 * (fi + fj) * h;
        }
        Arc::new(VTable {
            spec: spec.clone(),
            spec_hash: spec.hash(),
            h,
            vals,
            ders,
            tail,
        })
    }

    pub fn spec(&self) -> &SmoothingSpec {
        &self.spec
    }

    pub fn spec_hash(&self) -> u64 {
        self.spec_hash
    }

    /// Interpolated V(y); clamps to V(y_min) ≈ 1 below the grid (the
    /// deviation there is O(y²) ≤ 1e-16) and to 0 beyond the top.
    pub fn value(&self, y: f64) -> f64 {
        debug_assert!(y > 0.0);
        let l = y.ln();
        if l <= LN_Y_MIN {
            return self.vals[0];
        }
        if l >= LN_Y_MAX {
            return 0.0;
        }
        let t = (l - LN_Y_MIN) / self.h;
        let i = (t as usize).min(self.vals.len() - 2);
        let t = t - i as f64;
        let (v0, v1) = (self.vals[i], self.vals[i + 1]);
        let (d0, d1) = (self.ders[i] * self.h, self.ders[i + 1] * self.h);
        let t2 = t * t;
        let t3 = t2 * t;
        (2.0 * t3 - 3.0 * t2 + 1.0) * v0
            + (t3 - 2.0 * t2 + t) * d0
            + (-2.0 * t3 + 3.0 * t2) * v1
            + (t3 - t2) * d1
    }

    /// Smallest N with the estimated tail Σ_{n>N} n^{−1/2}|V(n/scale)| below
    /// `target`: the sum is bounded by √scale·∫_{N/scale}^∞ y^{−1/2}|V| dy,
    /// read off the precomputed cumulative integral.
    pub fn cut_for(&self, scale: f64, target: f64) -> u64 {
        let budget = target / scale.sqrt();
        let mut idx = self.tail.len() - 1;
        for (i, &t) in self.tail.iter().enumerate() {
            if t <= budget {
                idx = i;
                break;
            }
        }
        let y = (LN_Y_MIN + idx as f64 * self.h).exp();
        ((scale * y).ceil() as u64).max(1)
    }
}

fn v_cache() -> &'static Mutex<HashMap<u64, Arc<VTable>>> {
    static CACHE: OnceLock<Mutex<HashMap<u64, Arc<VTable>>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// Process-wide V-table per smoothing spec; built once, then shared.
pub fn v_table(spec: &SmoothingSpec) -> Arc<VTable> {
    let key = spec.hash();
    if let Some(t) = v_cache().lock().unwrap().get(&key) {
        return Arc::clone(t);
    }
    let built = VTable::build(spec);
    let mut guard = v_cache().lock().unwrap();
    Arc::clone(guard.entry(key).or_insert(built))
}

/// Truncation policy for the two AFE sums.
#[derive(Debug, Clone, Serialize)]
pub struct AfeParams {
    /// Balance parameter X.
    pub x: f64,
    /// Absolute error budget for each truncated sum.
    pub target_abs_err: f64,
    /// Guard on the total number of terms.
    pub max_terms: u64,
}

impl Default for AfeParams {
    fn default() -> Self {
        Self {
            x: 1.0,
            target_abs_err: 1e-9,
            max_terms: 200_000_000,
        }
    }
}

impl AfeParams {
    pub fn with_x(x: f64) -> Self {
        Self {
            x,
            ..Self::default()
        }
    }
}

/// L(1/2,χ) by the smoothed approximate functional equation:
/// Σ χ(n) n^{−1/2} V(n/(X√q)) + ε(χ) Σ χ̄(n) n^{−1/2} V(nX/√q),
/// both sums truncated within `params.target_abs_err`.
pub fn central_value_afe(
    table: &CharTable,
    a: u32,
    params: &AfeParams,
) -> Result<Complex64> {
    let q = table.q();
    let chi = table.character(a);
    if !chi.is_primitive() {
        return Err(Error::NotPrimitive);
    }
    if params.x <= 0.0 {
        return Err(Error::Precondition("AFE balance X must be positive".into()));
    }
    let spec = SmoothingSpec::for_delta(chi.delta());
    let vt = v_table(&spec);
    let sqrt_q = (q as f64).sqrt();
    let s1 = params.x * sqrt_q;
    let s2 = sqrt_q / params.x;
    let n1 = vt.cut_for(s1, params.target_abs_err / 2.0);
    let n2 = vt.cut_for(s2, params.target_abs_err / 2.0);
    if n1 + n2 > params.max_terms {
        return Err(Error::Resource(format!(
            "AFE needs {} terms, cap is {}",
            n1 + n2,
            params.max_terms
        )));
    }
    let bar = chi.conjugate();
    let mut first = CAccum::new();
    for n in 1..=n1 {
        if n % q == 0 {
            continue;
        }
        let w = vt.value(n as f64 / s1) / (n as f64).sqrt();
        first.add(chi.eval(n as i64) * w);
    }
    let mut second = CAccum::new();
    for n in 1..=n2 {
        if n % q == 0 {
            continue;
        }
        let w = vt.value(n as f64 / s2) / (n as f64).sqrt();
        second.add(bar.eval(n as i64) * w);
    }
    let (_, eps, _) = chi.gauss_sum_and_angle()?;
    Ok(first.value() + eps * second.value())
}

/// Central data for the whole even primitive family, ascending exponent.
#[derive(Debug, Clone)]
pub struct FamilyRecords {
    pub q: u64,
    pub spec_hash: u64,
    pub x: f64,
    pub records: Vec<CentralRecord>,
}

impl FamilyRecords {
    /// Record of the conjugate character of records[i].
    pub fn conjugate_index(&self, i: usize) -> usize {
        self.records.len() - 1 - i
    }
}

/// Build ε, θ and L(1/2,χ) for every even primitive χ mod q at once.
///
/// Both AFE sums share their n-weights across the family: bucketing the
/// weights by discrete log turns all character sums into one length-(q−1)
/// Fourier transform, and the Gauss sums into another.  Cost O(N + q log q)
/// instead of O(q·N).
pub fn build_even_records(table: &CharTable, params: &AfeParams) -> Result<FamilyRecords> {
    let q = table.q();
    let spec = SmoothingSpec::even();
    if params.x <= 0.0 {
        return Err(Error::Precondition("AFE balance X must be positive".into()));
    }
    let vt = v_table(&spec);
    if q < 5 {
        return Ok(FamilyRecords {
            q,
            spec_hash: vt.spec_hash(),
            x: params.x,
            records: Vec::new(),
        });
    }
    let ctx = table.ctx();
    let ord = (q - 1) as usize;
    let sqrt_q = (q as f64).sqrt();
    let s1 = params.x * sqrt_q;
    let s2 = sqrt_q / params.x;
    let n1 = vt.cut_for(s1, params.target_abs_err / 2.0);
    let n2 = vt.cut_for(s2, params.target_abs_err / 2.0);
    if n1 + n2 > params.max_terms {
        return Err(Error::Resource(format!(
            "AFE needs {} terms, cap is {}",
            n1 + n2,
            params.max_terms
        )));
    }

    // Bucket n-weights by dlog of n mod q.
    let bucket = |n_max: u64, scale: f64| -> Vec<Complex64> {
        let mut w = vec![Complex64::new(0.0, 0.0); ord];
        for n in 1..=n_max {
            let r = n % q;
            if r == 0 {
                continue;
            }
            let j = ctx.ind_unit(r) as usize;
            w[j].re += vt.value(n as f64 / scale) / (n as f64).sqrt();
        }
        w
    };
    let w1 = bucket(n1, s1);
    let w2 = bucket(n2, s2);

    // h[j] = e(g^j/q) for the Gauss sums.
    let by_dlog = ctx.dlog_inverse_permutation();
    let mut h: Vec<Complex64> = by_dlog.iter().map(|&r| table.e_q(r)).collect();

    let mut planner = FftPlanner::<f64>::new();
    // Σ_j x[j] e(+aj/(q−1)) at every a: inverse-direction transform.
    let ifft = planner.plan_fft_inverse(ord);
    // Σ_j x[j] e(−aj/(q−1)): forward transform.
    let fft = planner.plan_fft_forward(ord);

    let mut f1 = w1;
    ifft.process(&mut f1);
    let mut f2 = w2;
    fft.process(&mut f2);
    ifft.process(&mut h);

    let records = (1..=(q - 3) / 2)
        .map(|i| {
            let a = (2 * i) as usize;
            let (eps, theta) = normalize_root_number(h[a], q, 0);
            CentralRecord {
                a: a as u32,
                eps,
                theta,
                lval: f1[a] + eps * f2[a],
            }
        })
        .collect();
    Ok(FamilyRecords {
        q,
        spec_hash: vt.spec_hash(),
        x: params.x,
        records,
    })
}

/// ζ(s, r/q) for r = 1..q−1; shared by every character at this (q, s).
pub fn hurwitz_zeta_vector(q: u64, s: Complex64) -> Result<Vec<Complex64>> {
    (1..q)
        .into_par_iter()
        .map(|r| hurwitz_zeta(s, r as f64 / q as f64))
        .collect()
}

/// Series oracle: L(s,χ) = q^{−s} Σ_{r=1}^{q−1} χ(r) ζ(s, r/q).
/// Independent of the AFE path; accurate to ~1e-10 for q ≤ 10⁴, |s| ≤ 3.
/// The principal character is rejected (its L has the ζ pole at s = 1 and
/// is never needed here).
pub fn l_value_hurwitz(table: &CharTable, a: u32, s: Complex64) -> Result<Complex64> {
    if !table.character(a).is_primitive() {
        return Err(Error::NotPrimitive);
    }
    let zv = hurwitz_zeta_vector(table.q(), s)?;
    Ok(l_value_hurwitz_with(table, a, s, &zv))
}

/// Same, reusing a precomputed ζ-vector.
pub fn l_value_hurwitz_with(
    table: &CharTable,
    a: u32,
    s: Complex64,
    zeta_vec: &[Complex64],
) -> Complex64 {
    let q = table.q();
    let mut acc = CAccum::new();
    for r in 1..q {
        acc.add(table.eval(a, r as i64) * zeta_vec[(r - 1) as usize]);
    }
    (-s * (q as f64).ln()).exp() * acc.value()
}

/// Λ(s,χ) = q^{s/2} π^{−s/2} Γ((s+δ)/2) L(s,χ) with L from the Hurwitz oracle.
pub fn completed_lambda(table: &CharTable, a: u32, s: Complex64) -> Result<Complex64> {
    let chi = table.character(a);
    if !chi.is_primitive() {
        return Err(Error::NotPrimitive);
    }
    let d = chi.delta() as f64;
    let half = (s + d) / 2.0;
    // gamma poles at nonpositive integers of (s+δ)/2
    if half.im.abs() < 1e-12 && half.re <= 0.0 && (half.re - half.re.round()).abs() < 1e-9 {
        return Err(Error::Domain(format!("gamma pole at (s+δ)/2 = {}", half.re)));
    }
    let q = table.q() as f64;
    let l = l_value_hurwitz(table, a, s)?;
    let factor = (s / 2.0 * (q / std::f64::consts::PI).ln()).exp();
    Ok(factor * gamma(half) * l)
}

/// |Λ(s,χ) − ε(χ) Λ(1−s,χ̄)|: the functional-equation residual, computed
/// entirely through the series oracle.
pub fn completed_lambda_residual(table: &CharTable, a: u32, s: Complex64) -> Result<f64> {
    let chi = table.character(a);
    let (_, eps, _) = chi.gauss_sum_and_angle()?;
    let lhs = completed_lambda(table, a, s)?;
    let rhs = completed_lambda(table, chi.conjugate().a, Complex64::new(1.0, 0.0) - s)?;
    Ok((lhs - eps * rhs).norm())
}
