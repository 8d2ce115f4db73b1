//! Smooth bump functions on ℝ/ℤ: a plateau over an arc with C^∞ ramps at
//! the edges, their Fourier coefficients, spectral derivative norms, and the
//! family-condition ratios used by the smoothed-moment drivers.
//!
//! The base ramp is the canonical smooth step s(x) = h(x)/(h(x)+h(1−x)) with
//! h(x) = e^{−1/x}: all derivatives vanish at both ends, so the bump
//! minorizes the arc indicator and its Fourier coefficients decay faster
//! than any power.

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::Serialize;

use crate::util::Accum;
use crate::{Error, Result};

/// A bump f_{β,I} on ℝ/ℤ: supported on the arc I = [a, a+len), equal to 1 on
/// its middle (1−β) fraction, with smooth ramps over the outer β/2 pieces.
/// `constant_one` bypasses the arc and represents f ≡ 1.
#[derive(Debug, Clone, Serialize)]
pub struct BumpSpec {
    pub beta: f64,
    pub a: f64,
    pub len: f64,
    /// Power-of-two sample-grid size for all spectral work.
    pub samples: usize,
    constant_one: bool,
}

impl BumpSpec {
    pub fn new(beta: f64, a: f64, b: f64, samples: usize) -> Result<Self> {
        if !(beta > 0.0 && beta <= 1.0) {
            return Err(Error::Precondition(format!(
                "edge fraction β must lie in (0,1], got {beta}"
            )));
        }
        if !samples.is_power_of_two() || samples < 8 {
            return Err(Error::Precondition(
                "sample grid must be a power of two ≥ 8".into(),
            ));
        }
        let len = (b - a).rem_euclid(1.0);
        let len = if len == 0.0 && b != a { 1.0 } else { len };
        if len <= 0.0 {
            return Err(Error::Domain("degenerate arc".into()));
        }
        Ok(Self {
            beta,
            a: a.rem_euclid(1.0),
            len,
            samples,
            constant_one: false,
        })
    }

    /// f ≡ 1 (c_k = δ_{k0} exactly).
    pub fn constant_one(samples: usize) -> Self {
        Self {
            beta: 0.0,
            a: 0.0,
            len: 1.0,
            samples,
            constant_one: true,
        }
    }

    pub fn is_constant_one(&self) -> bool {
        self.constant_one
    }

    /// Identifier used in report rows.
    pub fn id(&self) -> String {
        if self.constant_one {
            "one".into()
        } else {
            format!("f[beta={},a={},len={}]", self.beta, self.a, self.len)
        }
    }
}

fn h(x: f64) -> f64 {
    if x > 0.0 {
        (-1.0 / x).exp()
    } else {
        0.0
    }
}

/// s(0⁻)=0, s(1⁺)=1, C^∞ with all derivatives vanishing at the ends.
fn smooth_step(x: f64) -> f64 {
    let hx = h(x);
    let h1x = h(1.0 - x);
    if hx == 0.0 {
        return 0.0;
    }
    if h1x == 0.0 {
        return 1.0;
    }
    hx / (hx + h1x)
}

/// The base ramp g on [0,1]: g(0)=0, g(1/2)=1, g(x)=g(1−x).
fn base_ramp(x: f64) -> f64 {
    if x <= 0.5 {
        smooth_step(2.0 * x)
    } else {
        smooth_step(2.0 * (1.0 - x))
    }
}

/// g_β: ramp up over [0, β/2], plateau 1, ramp down over [1−β/2, 1].
fn g_beta(u: f64, beta: f64) -> f64 {
    if !(0.0..1.0).contains(&u) {
        return 0.0;
    }
    if u < beta / 2.0 {
        base_ramp(u / beta)
    } else if u > 1.0 - beta / 2.0 {
        base_ramp((1.0 - u) / beta)
    } else {
        1.0
    }
}

/// f(x) for x on ℝ/ℤ.
pub fn bump_value(spec: &BumpSpec, x: f64) -> f64 {
    if spec.constant_one {
        return 1.0;
    }
    let t = (x - spec.a).rem_euclid(1.0);
    if t >= spec.len {
        return 0.0;
    }
    g_beta(t / spec.len, spec.beta)
}

/// Samples f(j/n) for j = 0..n−1.
pub fn sample_grid(spec: &BumpSpec) -> Vec<f64> {
    let n = spec.samples;
    (0..n)
        .map(|j| bump_value(spec, j as f64 / n as f64))
        .collect()
}

/// The full DFT spectrum c_k = (1/n)Σ_j f(j/n) e(−kj/n) for the signed
/// frequencies k = −n/2+1 .. n/2 laid out in FFT bin order.
fn full_spectrum(spec: &BumpSpec) -> Vec<Complex64> {
    let n = spec.samples;
    let mut buf: Vec<Complex64> = sample_grid(spec)
        .into_iter()
        .map(|v| Complex64::new(v, 0.0))
        .collect();
    FftPlanner::<f64>::new().plan_fft_forward(n).process(&mut buf);
    for z in buf.iter_mut() {
        *z /= n as f64;
    }
    buf
}

/// Fourier coefficients c_k for |k| ≤ k_max (index k_max + k).
/// The grid must oversample: samples ≥ 8·k_max.
pub fn fourier_coefficients(spec: &BumpSpec, k_max: usize) -> Result<Vec<Complex64>> {
    if !spec.constant_one && spec.samples < 8 * k_max.max(1) {
        return Err(Error::Precondition(format!(
            "undersampled grid: {} samples for k_max = {k_max}",
            spec.samples
        )));
    }
    let mut out = vec![Complex64::new(0.0, 0.0); 2 * k_max + 1];
    if spec.constant_one {
        out[k_max] = Complex64::new(1.0, 0.0);
        return Ok(out);
    }
    let n = spec.samples;
    let spectrum = full_spectrum(spec);
    for (i, slot) in out.iter_mut().enumerate() {
        let k = i as i64 - k_max as i64;
        *slot = spectrum[k.rem_euclid(n as i64) as usize];
    }
    Ok(out)
}

/// Discrete L¹ norm of f over the sample grid.
pub fn l1_norm(spec: &BumpSpec) -> f64 {
    let n = spec.samples as f64;
    let mut acc = Accum::new();
    for v in sample_grid(spec) {
        acc.add(v.abs());
    }
    acc.value() / n
}

/// ∫₀¹ f = c₀ (real for real f).
pub fn integral(spec: &BumpSpec) -> f64 {
    if spec.constant_one {
        return 1.0;
    }
    let n = spec.samples as f64;
    let mut acc = Accum::new();
    for v in sample_grid(spec) {
        acc.add(v);
    }
    acc.value() / n
}

/// Spectral ‖f^{(J)}‖₁: multiply c_k by (2πik)^J and transform back.
///
/// Coefficients below 1e-15·max|c_k| are genuine rounding noise of the
/// sample DFT; (2πk)^J would amplify them above the signal, so they are
/// zeroed first.  The result slightly *underestimates* the true norm.
pub fn derivative_l1_spectral(spec: &BumpSpec, j_order: u32) -> Result<f64> {
    if spec.constant_one {
        return Ok(0.0);
    }
    let n = spec.samples;
    let mut spectrum = full_spectrum(spec);
    let floor = 1e-15
        * spectrum
            .iter()
            .map(|z| z.norm())
            .fold(0.0f64, f64::max);
    for (bin, z) in spectrum.iter_mut().enumerate() {
        if z.norm() < floor {
            *z = Complex64::new(0.0, 0.0);
            continue;
        }
        let k = if bin <= n / 2 {
            bin as f64
        } else {
            bin as f64 - n as f64
        };
        let omega = Complex64::new(0.0, 2.0 * std::f64::consts::PI * k);
        *z *= omega.powu(j_order);
    }
    FftPlanner::<f64>::new()
        .plan_fft_inverse(n)
        .process(&mut spectrum);
    let mut acc = Accum::new();
    for z in &spectrum {
        acc.add(z.norm());
    }
    Ok(acc.value() / (n as f64))
}

/// The two family-condition ratios and their verdict at threshold.
#[derive(Debug, Clone, Serialize)]
pub struct ConditionReport {
    pub q: u64,
    pub alpha: f64,
    pub j_order: u32,
    pub deriv_l1: f64,
    pub cond1_ratio: f64,
    pub cond2_ratio: f64,
    pub threshold: f64,
    pub pass: bool,
}

/// cond1 = ‖f^{(J)}‖₁ / (q^{1/24−α}·|∫f|), cond2 = ‖f‖₁ / |∫f|; both must
/// stay below the configured threshold for the family to qualify.
pub fn family_condition_check(
    spec: &BumpSpec,
    q: u64,
    alpha: f64,
    j_order: u32,
    threshold: f64,
) -> Result<ConditionReport> {
    if j_order < 2 {
        return Err(Error::Precondition("need J ≥ 2".into()));
    }
    let mass = integral(spec);
    if mass.abs() < 1e-300 {
        return Err(Error::Domain("degenerate family: ∫f = 0".into()));
    }
    let deriv_l1 = derivative_l1_spectral(spec, j_order)?;
    let cond1_ratio = deriv_l1 / ((q as f64).powf(1.0 / 24.0 - alpha) * mass.abs());
    let cond2_ratio = l1_norm(spec) / mass.abs();
    Ok(ConditionReport {
        q,
        alpha,
        j_order,
        deriv_l1,
        cond1_ratio,
        cond2_ratio,
        threshold,
        pass: cond1_ratio <= threshold && cond2_ratio <= threshold,
    })
}
