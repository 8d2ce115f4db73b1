//! Binary caches for the per-q tables.  Strictly an optimization: every read
//! is fully validated, and anything malformed, version-skewed or inconsistent
//! is reported as absent so the caller recomputes.
//!
//! Context file layout: magic, version byte, q as 8-byte LE, then the ind and
//! inv tables for n = 1..q−1 as 8-byte LE integers each.
//! Kl file layout: magic, version byte, q and k as 8-byte LE, then
//! (re, im) f64-LE pairs for x = 1..q−1.

use std::fs;
use std::io::Read as _;
use std::path::{Path, PathBuf};

use num_complex::Complex64;

use crate::arith::{is_prime, PrimeContext};
use crate::kloosterman::KlTable;
use crate::Result;

const CTX_MAGIC: &[u8; 8] = b"RMCTX\0\0\0";
const KL_MAGIC: &[u8; 8] = b"RMKLTB\0\0";
const VERSION: u8 = 1;

pub fn context_path(dir: &Path, q: u64) -> PathBuf {
    dir.join(format!("ctx_q{q}.bin"))
}

pub fn kl_path(dir: &Path, q: u64, k: u32) -> PathBuf {
    dir.join(format!("kl_q{q}_k{k}.bin"))
}

pub fn write_context(dir: &Path, ctx: &PrimeContext) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let q = ctx.q;
    let mut buf = Vec::with_capacity(17 + 16 * (q as usize - 1));
    buf.extend_from_slice(CTX_MAGIC);
    buf.push(VERSION);
    buf.extend_from_slice(&q.to_le_bytes());
    for n in 1..q {
        buf.extend_from_slice(&(ctx.ind_unit(n) as u64).to_le_bytes());
    }
    for n in 1..q {
        buf.extend_from_slice(&ctx.inverse(n)?.to_le_bytes());
    }
    let path = context_path(dir, q);
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, &buf)?;
    fs::rename(&tmp, &path)?;
    Ok(path)
}

/// Read and fully validate a cached context.  Returns Ok(None) when the file
/// is missing, has the wrong magic/version, or fails any table invariant.
pub fn read_context(dir: &Path, q: u64) -> Result<Option<PrimeContext>> {
    let path = context_path(dir, q);
    let mut file = match fs::File::open(&path) {
        Ok(f) => f,
        Err(_) => return Ok(None),
    };
    let mut buf = Vec::new();
    file.read_to_end(&mut buf)?;
    let expected = 17 + 16 * (q as usize - 1);
    if buf.len() != expected || &buf[0..8] != CTX_MAGIC || buf[8] != VERSION {
        return Ok(None);
    }
    let q_file = u64::from_le_bytes(buf[9..17].try_into().expect("8 bytes"));
    if q_file != q || !is_prime(q) {
        return Ok(None);
    }
    let n_entries = (q - 1) as usize;
    let mut ind = vec![u32::MAX; q as usize];
    let mut inv = vec![u32::MAX; q as usize];
    let mut off = 17;
    let mut g = 0u64;
    for n in 1..q {
        let v = u64::from_le_bytes(buf[off..off + 8].try_into().expect("8 bytes"));
        off += 8;
        if v >= q - 1 {
            return Ok(None);
        }
        if v == 1 {
            g = n;
        }
        ind[n as usize] = v as u32;
    }
    for n in 1..q {
        let v = u64::from_le_bytes(buf[off..off + 8].try_into().expect("8 bytes"));
        off += 8;
        if v == 0 || v >= q {
            return Ok(None);
        }
        inv[n as usize] = v as u32;
    }
    debug_assert_eq!(off, 17 + 16 * n_entries);
    if g == 0 {
        return Ok(None);
    }
    // full invariant check: g^ind(n) ≡ n and n·inv(n) ≡ 1
    let mut pow = vec![0u64; q as usize - 1];
    let mut val = 1u64;
    for p in pow.iter_mut() {
        *p = val;
        val = val * g % q;
    }
    if val != 1 {
        return Ok(None);
    }
    for n in 1..q {
        if pow[ind[n as usize] as usize] != n {
            return Ok(None);
        }
        if n * inv[n as usize] as u64 % q != 1 {
            return Ok(None);
        }
    }
    // the cached generator must be the canonical (smallest) one
    match crate::arith::find_primitive_root(q) {
        Ok(expected_g) if expected_g == g => {}
        _ => return Ok(None),
    }
    Ok(Some(PrimeContext::from_parts(q, g, ind, inv)))
}

/// Context from cache, or rebuilt (and cached) if absent/invalid.
pub fn context_cached(dir: &Path, q: u64) -> Result<PrimeContext> {
    if let Some(ctx) = read_context(dir, q)? {
        return Ok(ctx);
    }
    let ctx = PrimeContext::new(q)?;
    write_context(dir, &ctx)?;
    Ok(ctx)
}

pub fn write_kl_table(dir: &Path, kl: &KlTable) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let q = kl.q;
    let mut buf = Vec::with_capacity(25 + 16 * (q as usize - 1));
    buf.extend_from_slice(KL_MAGIC);
    buf.push(VERSION);
    buf.extend_from_slice(&q.to_le_bytes());
    buf.extend_from_slice(&(kl.k as u64).to_le_bytes());
    for z in kl.values() {
        buf.extend_from_slice(&z.re.to_le_bytes());
        buf.extend_from_slice(&z.im.to_le_bytes());
    }
    let path = kl_path(dir, q, kl.k);
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, &buf)?;
    fs::rename(&tmp, &path)?;
    Ok(path)
}

/// Read a cached Kl table; Ok(None) on anything suspect.  The ctx is needed
/// to rebuild the dlog index.
pub fn read_kl_table(dir: &Path, ctx: &PrimeContext, k: u32) -> Result<Option<KlTable>> {
    let q = ctx.q;
    let path = kl_path(dir, q, k);
    let mut file = match fs::File::open(&path) {
        Ok(f) => f,
        Err(_) => return Ok(None),
    };
    let mut buf = Vec::new();
    file.read_to_end(&mut buf)?;
    let expected = 25 + 16 * (q as usize - 1);
    if buf.len() != expected || &buf[0..8] != KL_MAGIC || buf[8] != VERSION {
        return Ok(None);
    }
    let q_file = u64::from_le_bytes(buf[9..17].try_into().expect("8 bytes"));
    let k_file = u64::from_le_bytes(buf[17..25].try_into().expect("8 bytes"));
    if q_file != q || k_file != k as u64 {
        return Ok(None);
    }
    let mut values = Vec::with_capacity(q as usize - 1);
    let mut off = 25;
    for _ in 1..q {
        let re = f64::from_le_bytes(buf[off..off + 8].try_into().expect("8 bytes"));
        let im = f64::from_le_bytes(buf[off + 8..off + 16].try_into().expect("8 bytes"));
        off += 16;
        if !re.is_finite() || !im.is_finite() {
            return Ok(None);
        }
        values.push(Complex64::new(re, im));
    }
    // sanity: the first power-residue identity Kl_1(x) = e(x/q) and the
    // Deligne bound are cheap to confirm
    if k >= 1 {
        let bound = k as f64 + 1e-6;
        if values.iter().any(|z| z.norm() > bound) {
            return Ok(None);
        }
    }
    Ok(Some(KlTable::from_values(q, k, values, ctx)))
}
