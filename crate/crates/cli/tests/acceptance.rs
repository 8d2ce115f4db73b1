//! Acceptance suite: eleven numbered end-to-end criteria, one test each,
//! printing one pass/fail line per criterion (run with `--nocapture` to see
//! the lines as they stream).
//!
//! Criterion 7's calibration window is a known red: the mollified second
//! moment at q = 10007, α = 0.1 has M = ⌊q^α⌋ = 2, and no mollifier of
//! length 2 reaches the asymptotic main term at this scale (measured ratio
//! ≈ 0.29; the main-term calculus predicts 0.29).  The check is asserted as
//! stated anyway; the other two clauses of that criterion hold.

use std::collections::HashMap;
use std::process::Command;
use std::sync::{Arc, Mutex, OnceLock};
use std::time::Instant;

use num_complex::Complex64;
use rayon::prelude::*;

use rootmoments::arith::PrimeContext;
use rootmoments::bumps::BumpSpec;
use rootmoments::central::{
    build_even_records, central_value_afe, completed_lambda_residual, hurwitz_zeta_vector,
    l_value_hurwitz_with, AfeParams, FamilyRecords,
};
use rootmoments::characters::{orthogonality_sum, phi_plus, CharTable};
use rootmoments::kloosterman::{classical_kloosterman, kl_all, kl_point};
use rootmoments::mollifier::{
    build_mollifier, g_asymptotic_check, unitary_convolution, unitary_convolution3, MultSpec,
};
use rootmoments::moments::{
    first_moment, mollified_first, mollified_second, smoothed_moments,
};
use rootmoments::nonvanish::{angle_equidistribution, nonvanishing_count, c_eta, Interval};
use rootmoments::sieve::SieveTables;
use rootmoments::util::e;

type Family = (Arc<CharTable>, Arc<FamilyRecords>);

fn family(q: u64) -> Family {
    static CACHE: OnceLock<Mutex<HashMap<u64, Family>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().unwrap();
    guard
        .entry(q)
        .or_insert_with(|| {
            let table = CharTable::new(Arc::new(PrimeContext::new(q).unwrap()));
            let fam = build_even_records(&table, &AfeParams::default()).unwrap();
            (Arc::new(table), Arc::new(fam))
        })
        .clone()
}

fn splitmix(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

macro_rules! criterion {
    ($num:expr, $name:expr, $ok:expr, $detail:expr) => {{
        let ok: bool = $ok;
        println!(
            "criterion {:>2} ({}): {} — {}",
            $num,
            $name,
            if ok { "PASS" } else { "FAIL" },
            $detail
        );
        assert!(ok, "criterion {} ({}) failed: {}", $num, $name, $detail);
    }};
}

#[test]
fn criterion_01_orthogonality() {
    let t0 = Instant::now();
    let mut worst = 0.0f64;
    for q in [5u64, 7, 11, 101] {
        let (table, _) = family(q);
        for m in (1..q).filter(|m| m % q != 0) {
            let (computed, predicted) = orthogonality_sum(&table, m).unwrap();
            let err = (computed - Complex64::new(predicted, 0.0)).norm() / (1e-9 * q as f64);
            worst = worst.max(err);
        }
    }
    let dt = t0.elapsed();
    criterion!(
        1,
        "orthogonality",
        worst <= 1.0 && dt.as_secs_f64() < 1.0,
        format!("worst error/tolerance = {worst:.3e}, runtime {dt:.2?} (budget 1 s)")
    );
}

#[test]
fn criterion_02_functional_equation() {
    let t0 = Instant::now();
    let mut worst = 0.0f64;
    for q in [5u64, 7, 11, 101] {
        let (table, _) = family(q);
        for a in 1..(q - 1) as u32 {
            for s_re in [0.3, 0.6] {
                let r =
                    completed_lambda_residual(&table, a, Complex64::new(s_re, 0.0)).unwrap();
                worst = worst.max(r);
            }
        }
    }
    let dt = t0.elapsed();
    criterion!(
        2,
        "functional equation",
        worst < 1e-8 && dt.as_secs_f64() < 10.0,
        format!("max residual = {worst:.3e} (tolerance 1e-8), runtime {dt:.2?} (budget 10 s)")
    );
}

#[test]
fn criterion_03_oracle_agreement() {
    let t0 = Instant::now();
    let mut worst_oracle = 0.0f64;
    let mut worst_x = 0.0f64;
    for q in [5u64, 101, 1009] {
        let (table, fam) = family(q);
        let zv = hurwitz_zeta_vector(q, Complex64::new(0.5, 0.0)).unwrap();
        for r in &fam.records {
            let oracle = l_value_hurwitz_with(&table, r.a, Complex64::new(0.5, 0.0), &zv);
            worst_oracle = worst_oracle.max((r.lval - oracle).norm());
        }
        // X ∈ {1/2, 1, 2} variants agree pairwise
        let fam_half = build_even_records(&table, &AfeParams::with_x(0.5)).unwrap();
        let fam_two = build_even_records(&table, &AfeParams::with_x(2.0)).unwrap();
        for (i, r) in fam.records.iter().enumerate() {
            let lh = fam_half.records[i].lval;
            let lt = fam_two.records[i].lval;
            worst_x = worst_x
                .max((r.lval - lh).norm())
                .max((r.lval - lt).norm())
                .max((lh - lt).norm());
        }
    }
    let dt = t0.elapsed();
    criterion!(
        3,
        "oracle agreement",
        worst_oracle < 1e-8 && worst_x < 1e-7 && dt.as_secs_f64() < 120.0,
        format!(
            "max |AFE−Hurwitz| = {worst_oracle:.3e} (tol 1e-8), max X-variant spread = {worst_x:.3e} (tol 1e-7), runtime {dt:.2?} (budget 2 min)"
        )
    );
}

#[test]
fn criterion_04_kloosterman() {
    // exact cross-check of the FFT tables against the defining sums
    let small_primes = [3u64, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67,
        71, 73, 79, 83, 89, 97, 101];
    let mut worst = 0.0f64;
    for &q in &small_primes {
        let ctx = PrimeContext::new(q).unwrap();
        for k in 1..=4u32 {
            let table = kl_all(k, &ctx).unwrap();
            let errs: Vec<f64> = (1..q)
                .into_par_iter()
                .map(|x| (table.at(x).unwrap() - kl_point(k, x, q).unwrap()).norm())
                .collect();
            worst = errs.into_iter().fold(worst, f64::max);
        }
    }
    // Deligne bound, exhaustive
    let mut deligne_excess = 0.0f64;
    for q in rootmoments::sieve::primes_up_to(401).into_iter().filter(|&q| q >= 3) {
        let ctx = PrimeContext::new(q).unwrap();
        for k in 1..=6u32 {
            let t = kl_all(k, &ctx).unwrap();
            deligne_excess = deligne_excess.max(t.max_abs() - k as f64);
        }
    }
    // Weil bound on 10³ seeded random triples
    let qpool = [101u64, 211, 401, 1009, 2003];
    let mut s = 0x57e1_1a5u64;
    let mut weil_excess = 0.0f64;
    for _ in 0..1000 {
        let q = qpool[(splitmix(&mut s) % qpool.len() as u64) as usize];
        let a = 1 + splitmix(&mut s) % (q - 1);
        let b = 1 + splitmix(&mut s) % (q - 1);
        let sab = classical_kloosterman(a, b, q).unwrap();
        weil_excess = weil_excess.max(sab.norm() - 2.0 * (q as f64).sqrt());
    }
    // performance: the full table at q ≈ 10⁵, k = 4
    let t0 = Instant::now();
    let ctx = PrimeContext::new(100_003).unwrap();
    let big = kl_all(4, &ctx).unwrap();
    let dt = t0.elapsed();
    criterion!(
        4,
        "kloosterman",
        worst < 1e-9
            && deligne_excess <= 1e-9
            && weil_excess <= 0.0
            && big.max_abs() <= 4.0
            && dt.as_secs_f64() < 10.0,
        format!(
            "max |kl_all−kl_point| = {worst:.3e} (tol 1e-9), Deligne excess {deligne_excess:.3e}, Weil excess {weil_excess:.3e}, kl_all(4; 100003) in {dt:.2?} (budget 10 s)"
        )
    );
}

#[test]
fn criterion_05_mollifier_exactness() {
    let mut exact_ok = true;
    for (q, alpha) in [(1009u64, 0.25), (10007, 0.1), (101, 0.3)] {
        let set = build_mollifier(q, alpha).unwrap();
        exact_ok &= set.exactness_holds();
    }
    // both unitary-convolution identities equal δ(n) for n ≤ 10⁴, exactly
    let sieve = SieveTables::up_to(10_000);
    let q = 1009u64;
    let conv_ok = (1..=10_000u64).into_par_iter().all(|n| {
        let expect = rootmoments::mollifier::BigRational::from_integer(((n == 1) as i64).into());
        let two = unitary_convolution(MultSpec::MuOverPhi, MultSpec::MuSqOverPhi, n, q, &sieve)
            .unwrap();
        let three = unitary_convolution3(
            MultSpec::MuTauOverPhi,
            MultSpec::MuSqOverPhi,
            MultSpec::MuSqOverPhi,
            n,
            q,
            &sieve,
        )
        .unwrap();
        two == expect && three == expect
    });
    // normalizer asymptotic: residual ratio bounded by 5 over the grid
    let mut worst_ratio = 0.0f64;
    for q in [7u64, 1009] {
        for m in [100u64, 1000, 10_000] {
            worst_ratio = worst_ratio.max(g_asymptotic_check(q, m).unwrap().residual_ratio);
        }
    }
    criterion!(
        5,
        "mollifier exactness",
        exact_ok && conv_ok && worst_ratio <= 5.0,
        format!(
            "exact invariants {}, convolution identities {}, max asymptotic residual ratio {worst_ratio:.3} (bound 5)",
            if exact_ok { "hold" } else { "BROKEN" },
            if conv_ok { "hold" } else { "BROKEN" },
        )
    );
}

#[test]
fn criterion_06_first_moment() {
    let grid = [101u64, 401, 1009, 4001];
    let mut ratios_a10 = Vec::new();
    let mut last_a4m1 = 0.0f64;
    let mut envelope_const: f64 = 0.0;
    for &q in &grid {
        let (table, fam) = family(q);
        let rep = first_moment(&table, &fam, 1, 0).unwrap();
        ratios_a10.push((rep.computed.re / rep.normalizer - 1.0).abs());
        let rep = first_moment(&table, &fam, 4, -1).unwrap();
        last_a4m1 = (rep.computed.re * 2.0 / rep.normalizer - 1.0).abs();
        for k in [1i64, 2, 3, 5] {
            let rep = first_moment(&table, &fam, 1, k).unwrap();
            envelope_const = envelope_const.max(rep.envelope_constant().unwrap());
        }
    }
    let inversions = ratios_a10.windows(2).filter(|w| w[1] > w[0]).count();
    let final_ratio = *ratios_a10.last().unwrap();
    criterion!(
        6,
        "first moment trend",
        final_ratio <= 0.15 && inversions <= 1 && last_a4m1 <= 0.2 && envelope_const <= 10.0,
        format!(
            "|A(1,0)/φ⁺−1| over q-grid = {ratios_a10:.4?} (≤0.15 at 4001, {inversions} inversions), |A(4,−1)·2/φ⁺−1| = {last_a4m1:.4} (≤0.2), max envelope constant {envelope_const:.3} (≤10)"
        )
    );
}

#[test]
fn criterion_07_mollified_second_moment() {
    let t0 = Instant::now();
    let alpha = 0.1;
    let mut ratio_dev = Vec::new();
    let mut final_ratio = 0.0f64;
    let mut twist_ratio = 0.0f64;
    for &q in &[1009u64, 10007] {
        let (table, fam) = family(q);
        let set = build_mollifier(q, alpha).unwrap();
        let d0 = mollified_second(&table, &fam, &set, 0).unwrap();
        let ratio = d0.computed.re / d0.predicted_main.re;
        ratio_dev.push((ratio - 1.0).abs());
        if q == 10007 {
            final_ratio = ratio;
            let d1 = mollified_second(&table, &fam, &set, 1).unwrap();
            let dm1 = mollified_second(&table, &fam, &set, -1).unwrap();
            twist_ratio = d1.computed.norm().max(dm1.computed.norm()) / d0.computed.re;
        }
    }
    let dt = t0.elapsed();
    let window_ok = (0.5..=1.5).contains(&final_ratio);
    let shrink_ok = ratio_dev[1] < ratio_dev[0];
    let twist_ok = twist_ratio <= 0.3;
    let runtime_ok = dt.as_secs_f64() < 900.0;
    criterion!(
        7,
        "mollified second moment",
        window_ok && shrink_ok && twist_ok && runtime_ok,
        format!(
            "D(0)/((1+1/α)φ⁺) = {final_ratio:.4} at q=10007 (window [0.5,1.5]{}), |ratio−1| {:.4} → {:.4} ({}), max |D(±1)|/D(0) = {twist_ratio:.4} (≤0.3), runtime {dt:.2?} (budget 15 min)",
            if window_ok { "" } else { " — KNOWN RED: M=⌊10007^0.1⌋=2 cannot reach the asymptotic main term; measured matches the main-term calculus ≈0.29" },
            ratio_dev[0],
            ratio_dev[1],
            if shrink_ok { "shrinks" } else { "GREW" },
        )
    );
}

#[test]
fn criterion_08_smoothed_moments() {
    let q = 1009u64;
    let (table, fam) = family(q);
    let set = build_mollifier(q, 0.2).unwrap();
    let bump = BumpSpec::new(0.1, 0.0, 0.5, 8192).unwrap();
    let rep = smoothed_moments(&table, &fam, &set, &bump, 1024).unwrap();
    let c_rel = (rep.c.computed - rep.c_fourier).norm() / rep.c.computed.norm();
    let d_rel = (rep.d.computed - rep.d_fourier).norm() / rep.d.computed.norm();
    // f ≡ 1 reduces exactly (bitwise) to the k = 0 mollified moments
    let one = BumpSpec::constant_one(1024);
    let rep1 = smoothed_moments(&table, &fam, &set, &one, 4).unwrap();
    let mf = mollified_first(&table, &fam, &set, 0).unwrap();
    let ms = mollified_second(&table, &fam, &set, 0).unwrap();
    let exact = rep1.c.computed == mf.computed
        && rep1.d.computed == ms.computed
        && rep1.c_fourier == mf.computed
        && rep1.d_fourier == ms.computed;
    criterion!(
        8,
        "smoothed moments",
        c_rel < 1e-6 && d_rel < 1e-6 && exact,
        format!(
            "dual-path relative gaps: C {c_rel:.3e}, D {d_rel:.3e} (tol 1e-6); f≡1 reduction exact: {exact}"
        )
    );
}

#[test]
fn criterion_09_nonvanishing() {
    let q = 10007u64;
    let (_, fam) = family(q);
    let full = nonvanishing_count(&fam, &Interval::full(), 0.01).unwrap();
    let bound = (1.0 - 0.01) * c_eta(0.0).unwrap();
    let full_ok = full.proportion >= bound;
    // shrinking windows μ = q^{−η} at swept centers
    let mut min_prop = f64::INFINITY;
    for eta in [1.0 / 960.0, 0.9 / 480.0] {
        let mu = (q as f64).powf(-eta);
        for i in 0..8 {
            let w = Interval::centered(i as f64 / 8.0, mu).unwrap();
            let rep = nonvanishing_count(&fam, &w, 0.01).unwrap();
            min_prop = min_prop.min(rep.proportion);
        }
    }
    criterion!(
        9,
        "non-vanishing",
        full_ok && min_prop > 0.0,
        format!(
            "full-circle proportion {:.4} ≥ {bound:.4}; min windowed proportion {min_prop:.4} > 0",
            full.proportion
        )
    );
}

#[test]
fn criterion_10_equidistribution() {
    let mut ks = Vec::new();
    for &q in &[101u64, 1009, 10007] {
        let (_, fam) = family(q);
        ks.push(angle_equidistribution(&fam, 16).unwrap().ks_statistic);
    }
    let inversions = ks.windows(2).filter(|w| w[1] > w[0]).count();
    let (_, fam) = family(1009);
    let mean = angle_equidistribution(&fam, 16).unwrap().mean_vector.norm();
    criterion!(
        10,
        "equidistribution",
        inversions <= 1 && mean <= 0.2,
        format!("KS over q-grid = {ks:.4?} ({inversions} inversions allowed ≤ 1), |mean ε| = {mean:.4} at q=1009 (≤0.2)")
    );
}

#[test]
fn criterion_11_determinism() {
    let bin = env!("CARGO_BIN_EXE_rootmoments");
    let dir = std::env::temp_dir().join(format!("rootmoments-acceptance-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let run = |args: &[&str], out: &str| {
        let path = dir.join(out);
        let status = Command::new(bin)
            .args(args)
            .arg("--out")
            .arg(&path)
            .status()
            .expect("binary runs");
        assert!(status.success(), "verify run failed");
        std::fs::read(&path).unwrap()
    };
    let a = run(&["verify", "--q", "101"], "a.csv");
    let b = run(&["verify", "--q", "101"], "b.csv");
    let byte_identical = a == b;
    let w1 = run(&["verify", "--q", "101", "--workers", "1"], "w1.csv");
    let w2 = run(&["verify", "--q", "101", "--workers", "2"], "w2.csv");
    let strip = |bytes: &[u8]| -> Vec<String> {
        String::from_utf8_lossy(bytes)
            .lines()
            .filter(|l| !l.starts_with('#'))
            .map(str::to_string)
            .collect()
    };
    let workers_identical = strip(&w1) == strip(&w2);
    let _ = std::fs::remove_dir_all(&dir);
    criterion!(
        11,
        "determinism",
        byte_identical && workers_identical,
        format!("repeat runs byte-identical: {byte_identical}; numeric rows identical across worker counts: {workers_identical}")
    );
}

#[test]
fn eps_twisted_first_moment_closed_form() {
    // end-to-end identity tying characters, Gauss sums and the moment fold:
    // Σ⁺χ(m)ε(χ) = (φ(q)·cos(2πm̄/q) + 1)/√q
    for q in [101u64, 1009] {
        let (table, fam) = family(q);
        for m in [1u64, 3, 10] {
            let mut acc = Complex64::new(0.0, 0.0);
            for r in &fam.records {
                acc += table.eval(r.a, m as i64) * e(r.theta);
            }
            let mbar = table.ctx().inverse(m).unwrap();
            let expect = ((q as f64 - 1.0)
                * (2.0 * std::f64::consts::PI * mbar as f64 / q as f64).cos()
                + 1.0)
                / (q as f64).sqrt();
            assert!(
                (acc - Complex64::new(expect, 0.0)).norm() < 1e-7,
                "q={q} m={m}"
            );
        }
    }
}

#[test]
fn family_count_matches_phi_plus() {
    for q in [5u64, 7, 101, 1009] {
        let (_, fam) = family(q);
        assert_eq!(fam.records.len() as u64, phi_plus(q));
    }
}
