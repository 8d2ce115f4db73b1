//! Small numeric helpers shared across modules.

use num_complex::Complex64;

/// e(x) = exp(2πi x).
#[inline]
pub fn e(x: f64) -> Complex64 {
    let (s, c) = (2.0 * std::f64::consts::PI * x).sin_cos();
    Complex64::new(c, s)
}

/// Table of e(j/n), j = 0..n−1, built from the lower half and mirrored so
/// that entry n−j is bit-exactly the conjugate of entry j.
pub fn symmetric_roots(n: usize) -> Vec<Complex64> {
    let mut roots = vec![Complex64::new(1.0, 0.0); n];
    for j in 1..=n / 2 {
        let z = e(j as f64 / n as f64);
        roots[j] = z;
        roots[n - j] = z.conj();
    }
    if n % 2 == 0 && n >= 2 {
        roots[n / 2] = Complex64::new(-1.0, 0.0);
    }
    roots
}

/// Neumaier-compensated accumulator for f64 sums.
#[derive(Clone, Copy, Debug, Default)]
pub struct Accum {
    sum: f64,
    comp: f64,
}

impl Accum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Compensated accumulator for complex sums (independent real/imag tracks).
#[derive(Clone, Copy, Debug, Default)]
pub struct CAccum {
    re: Accum,
    im: Accum,
}

impl CAccum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, z: Complex64) {
        self.re.add(z.re);
        self.im.add(z.im);
    }

    #[inline]
    pub fn value(&self) -> Complex64 {
        Complex64::new(self.re.value(), self.im.value())
    }
}

/// Compensated sum of an iterator of f64 values.
pub fn sum_f64<I: IntoIterator<Item = f64>>(it: I) -> f64 {
    let mut acc = Accum::new();
    for x in it {
        acc.add(x);
    }
    acc.value()
}

/// Compensated sum of an iterator of complex values.
pub fn sum_c64<I: IntoIterator<Item = Complex64>>(it: I) -> Complex64 {
    let mut acc = CAccum::new();
    for z in it {
        acc.add(z);
    }
    acc.value()
}

/// FNV-1a over bytes.  Used for stable config/spec hashes in output headers;
/// must never change between runs of the same build.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Format a float with 17 significant digits, locale-free.
pub fn fmt_f64(x: f64) -> String {
    format!("{:.16e}", x)
}
