//! Restricted non-vanishing counts N(q,I,ε), the proportion constant c(η),
//! and the empirical equidistribution diagnostics for the angles θ_χ.

use num_complex::Complex64;
use serde::Serialize;

use crate::central::FamilyRecords;
use crate::characters::phi_plus;
use crate::util::CAccum;
use crate::{Error, Result};

/// Half-open arc [a, a+len) on ℝ/ℤ.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Interval {
    pub a: f64,
    pub len: f64,
}

impl Interval {
    /// From endpoints; [a, b) with wrap-around.  b−a ≡ 0 with a ≠ b means the
    /// full circle; a = b is degenerate and rejected.
    pub fn new(a: f64, b: f64) -> Result<Self> {
        if a == b {
            return Err(Error::Domain("degenerate interval".into()));
        }
        let len = (b - a).rem_euclid(1.0);
        let len = if len == 0.0 { 1.0 } else { len };
        Ok(Self {
            a: a.rem_euclid(1.0),
            len,
        })
    }

    pub fn full() -> Self {
        Self { a: 0.0, len: 1.0 }
    }

    /// Centered window of the given length.
    pub fn centered(center: f64, len: f64) -> Result<Self> {
        if !(len > 0.0 && len <= 1.0) {
            return Err(Error::Domain(format!("window length {len} out of (0,1]")));
        }
        Ok(Self {
            a: (center - len / 2.0).rem_euclid(1.0),
            len,
        })
    }

    #[inline]
    pub fn contains(&self, theta: f64) -> bool {
        (theta - self.a).rem_euclid(1.0) < self.len
    }

    pub fn end(&self) -> f64 {
        (self.a + self.len).rem_euclid(1.0)
    }
}

/// One restricted non-vanishing count.
#[derive(Debug, Clone, Serialize)]
pub struct NonvanishReport {
    pub q: u64,
    pub a: f64,
    pub b: f64,
    pub mu: f64,
    pub epsilon: f64,
    /// ε·μ(I)·(log q)^{−1/2}, natural log.
    pub threshold: f64,
    pub count: u64,
    pub family_in_window: u64,
    /// count/(μ(I)·φ⁺(q)).
    pub proportion: f64,
    /// c(η) when the sweep knows η; NaN otherwise.
    pub c_eta_bound: f64,
}

/// Count the even primitive χ with θ_χ ∈ I and |L(1/2,χ)| above the
/// definitional threshold ε·μ(I)(log q)^{−1/2}.
pub fn nonvanishing_count(
    fam: &FamilyRecords,
    interval: &Interval,
    epsilon: f64,
) -> Result<NonvanishReport> {
    if !(interval.len > 0.0) {
        return Err(Error::Domain("degenerate interval".into()));
    }
    if epsilon < 0.0 {
        return Err(Error::Precondition("epsilon must be nonnegative".into()));
    }
    let q = fam.q;
    let threshold = epsilon * interval.len / (q as f64).ln().sqrt();
    let mut count = 0u64;
    let mut in_window = 0u64;
    for r in &fam.records {
        if interval.contains(r.theta) {
            in_window += 1;
            if r.lval.norm() > threshold {
                count += 1;
            }
        }
    }
    Ok(NonvanishReport {
        q,
        a: interval.a,
        b: interval.end(),
        mu: interval.len,
        epsilon,
        threshold,
        count,
        family_in_window: in_window,
        proportion: count as f64 / (interval.len * phi_plus(q) as f64),
        c_eta_bound: f64::NAN,
    })
}

/// c(η) = 1/25 − 96η/5, positive exactly on 0 ≤ η < 1/480.
pub fn c_eta(eta: f64) -> Result<f64> {
    if !(0.0..1.0 / 480.0).contains(&eta) {
        return Err(Error::Domain(format!(
            "η = {eta} outside [0, 1/480): the proportion constant degenerates"
        )));
    }
    Ok(1.0 / 25.0 - 96.0 * eta / 5.0)
}

/// Equidistribution diagnostics of the angle family.
#[derive(Debug, Clone, Serialize)]
pub struct EquidistReport {
    pub q: u64,
    /// Kolmogorov–Smirnov distance of {θ_χ} from uniform on [0,1).
    pub ks_statistic: f64,
    /// (1/φ⁺) Σ e(θ_χ) = mean of ε(χ).
    pub mean_vector: Complex64,
    /// Occupancy of `bins` equal arcs.
    pub histogram: Vec<u64>,
}

pub fn angle_equidistribution(fam: &FamilyRecords, bins: usize) -> Result<EquidistReport> {
    if bins < 2 {
        return Err(Error::Precondition("need at least 2 bins".into()));
    }
    if fam.records.is_empty() {
        return Err(Error::Domain("empty family".into()));
    }
    let n = fam.records.len();
    let mut thetas: Vec<f64> = fam.records.iter().map(|r| r.theta).collect();
    thetas.sort_by(|a, b| a.partial_cmp(b).expect("angles are finite"));
    let mut ks = 0.0f64;
    for (i, &t) in thetas.iter().enumerate() {
        let lo = i as f64 / n as f64;
        let hi = (i + 1) as f64 / n as f64;
        ks = ks.max((t - lo).abs()).max((hi - t).abs());
    }
    let mut mean = CAccum::new();
    let mut histogram = vec![0u64; bins];
    for r in &fam.records {
        mean.add(r.eps);
        let bin = ((r.theta * bins as f64) as usize).min(bins - 1);
        histogram[bin] += 1;
    }
    Ok(EquidistReport {
        q: fam.q,
        ks_statistic: ks,
        mean_vector: mean.value() / n as f64,
        histogram,
    })
}
