//! Linear sieve for the multiplicative data used by the mollifier:
//! Möbius μ, Euler φ, divisor count τ, and smallest prime factors.

/// Tables for 0..=n, built by a single linear sieve pass.
#[derive(Debug, Clone)]
pub struct SieveTables {
    pub n: usize,
    pub primes: Vec<u64>,
    /// Smallest prime factor; spf[0] = spf[1] = 0.
    pub spf: Vec<u32>,
    pub mu: Vec<i8>,
    pub phi: Vec<u64>,
    pub tau: Vec<u32>,
}

impl SieveTables {
    pub fn up_to(n: usize) -> Self {
        let mut spf = vec![0u32; n + 1];
        let mut mu = vec![0i8; n + 1];
        let mut phi = vec![0u64; n + 1];
        let mut tau = vec![0u32; n + 1];
        // exponent of spf(i) in i, needed for the τ recurrence
        let mut cnt = vec![0u32; n + 1];
        let mut primes: Vec<u64> = Vec::new();

        if n >= 1 {
            mu[1] = 1;
            phi[1] = 1;
            tau[1] = 1;
        }
        for i in 2..=n {
            if spf[i] == 0 {
                spf[i] = i as u32;
                mu[i] = -1;
                phi[i] = (i - 1) as u64;
                tau[i] = 2;
                cnt[i] = 1;
                primes.push(i as u64);
            }
            for &p in &primes {
                let p = p as usize;
                if p > spf[i] as usize || i * p > n {
                    break;
                }
                let ip = i * p;
                spf[ip] = p as u32;
                if i % p == 0 {
                    mu[ip] = 0;
                    phi[ip] = phi[i] * p as u64;
                    cnt[ip] = cnt[i] + 1;
                    tau[ip] = tau[i] / (cnt[i] + 1) * (cnt[i] + 2);
                } else {
                    mu[ip] = -mu[i];
                    phi[ip] = phi[i] * (p - 1) as u64;
                    cnt[ip] = 1;
                    tau[ip] = tau[i] * 2;
                }
            }
        }
        Self {
            n,
            primes,
            spf,
            mu,
            phi,
            tau,
        }
    }

    #[inline]
    pub fn is_squarefree(&self, m: usize) -> bool {
        self.mu[m] != 0
    }
}

/// Primes up to n by a plain Eratosthenes sieve (used for the prime sum in
/// the mollifier constant, where n is large and only primality is needed).
pub fn primes_up_to(n: usize) -> Vec<u64> {
    if n < 2 {
        return Vec::new();
    }
    let mut composite = vec![false; n + 1];
    let mut out = Vec::new();
    for i in 2..=n {
        if !composite[i] {
            out.push(i as u64);
            let mut j = i * i;
            while j <= n {
                composite[j] = true;
                j += i;
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_values() {
        let t = SieveTables::up_to(100);
        assert_eq!(&t.mu[1..11], &[1, -1, -1, 0, -1, 1, -1, 0, 0, 1]);
        assert_eq!(&t.phi[1..11], &[1, 1, 2, 2, 4, 2, 6, 4, 6, 4]);
        assert_eq!(&t.tau[1..13], &[1, 2, 2, 3, 2, 4, 2, 4, 3, 4, 2, 6]);
        assert_eq!(t.spf[60], 2);
        assert_eq!(t.spf[49], 7);
        assert_eq!(t.primes.len(), 25);
    }

    #[test]
    fn matches_brute_force() {
        let t = SieveTables::up_to(2000);
        for m in 1..=2000usize {
            let mut divisors = 0u32;
            for d in 1..=m {
                if m % d == 0 {
                    divisors += 1;
                }
            }
            assert_eq!(t.tau[m], divisors, "tau({m})");
            let mut coprime = 0u64;
            for a in 1..=m {
                if num_integer::gcd(a, m) == 1 {
                    coprime += 1;
                }
            }
            assert_eq!(t.phi[m], coprime, "phi({m})");
        }
    }

    #[test]
    fn eratosthenes_agrees() {
        let t = SieveTables::up_to(10_000);
        assert_eq!(t.primes, primes_up_to(10_000));
    }
}
