//! Batch driver for the rootmoments laboratory.
//!
//! One command per pipeline stage: `angles`, `central`, `kloosterman`,
//! `mollifier`, `moments`, `smoothed`, `nonvanish`, and `verify`.  Every
//! output file starts with `#` header lines carrying the tool version, a
//! stable hash of the fully-resolved configuration, and the smoothing-spec
//! hash, so runs are reproducible byte for byte.
//!
//! Exit codes: 0 pass, 1 assertion failure, 2 usage error, 3 resource error.

use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use num_complex::Complex64;
use serde_json::json;

use rootmoments::arith::{is_prime, PrimeContext};
use rootmoments::bumps::BumpSpec;
use rootmoments::cache;
use rootmoments::central::{
    build_even_records, central_value_afe, completed_lambda_residual, hurwitz_zeta_vector,
    l_value_hurwitz_with, smoothing_v, v_table, AfeParams, FamilyRecords, SmoothingSpec,
};
use rootmoments::characters::{orthogonality_sum, phi_plus, CharTable};
use rootmoments::kloosterman::{
    classical_kloosterman, correlation_diagnostics, incomplete_inverse_sum, kl_all, kl_point,
    KlTable,
};
use rootmoments::mollifier::{
    build_mollifier, g_asymptotic_check, unitary_convolution, unitary_convolution3, MultSpec,
};
use rootmoments::moments::{
    afe_decomposition, first_moment, mollified_first, mollified_second, second_moment,
    smoothed_moments, MomentReport,
};
use rootmoments::nonvanish::{angle_equidistribution, c_eta, nonvanishing_count, Interval};
use rootmoments::sieve::primes_up_to;
use rootmoments::util::{fmt_f64, fnv1a};
use rootmoments::Error;

const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Parser, Debug)]
#[command(name = "rootmoments", version, about = "Dirichlet L-function moment laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// Prime modulus, a comma list of primes, or `lo..hi:n` for n primes
    /// sampled evenly from that range.
    #[arg(long)]
    q: String,
    /// Output file (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Output format.
    #[arg(long, default_value = "csv")]
    format: String,
    /// Cache directory for context and Kloosterman tables.
    #[arg(long)]
    cache_dir: Option<PathBuf>,
    /// Worker threads (default: available parallelism).  Results are
    /// worker-count independent by construction.
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Root-number angles θ_χ for the even primitive family.
    Angles {
        #[command(flatten)]
        common: Common,
    },
    /// Central values L(1/2,χ) via the smoothed approximate functional equation.
    Central {
        #[command(flatten)]
        common: Common,
        /// AFE balance parameter X.
        #[arg(long, default_value_t = 1.0)]
        x: f64,
        /// Absolute truncation budget per AFE sum.
        #[arg(long, default_value_t = 1e-9)]
        target: f64,
    },
    /// Hyper-Kloosterman table of the given order, or shift diagnostics.
    Kloosterman {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        k: u32,
        /// Emit the V₂/W correlation diagnostics instead of the table.
        #[arg(long)]
        diagnostics: bool,
        /// Shift range H for the diagnostics.
        #[arg(long, default_value_t = 10)]
        h: u64,
        /// Twist c (unit mod q).
        #[arg(long, default_value_t = 1)]
        c: u64,
        /// Effective-length exponents: N₁ = q^{n1_exp}, N₂ = q^{n2_exp}.
        #[arg(long, default_value_t = 0.55)]
        n1_exp: f64,
        #[arg(long, default_value_t = 0.45)]
        n2_exp: f64,
    },
    /// Mollifier coefficients (JSON) or the normalizer asymptotic (CSV).
    Mollifier {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 0.25)]
        alpha: f64,
        /// Check the G asymptotic on this comma list of lengths M.
        #[arg(long)]
        asymptotic_grid: Option<String>,
    },
    /// Weighted / mollified moment reports.
    Moments {
        #[command(flatten)]
        common: Common,
        /// first | second | mollified-first | mollified-second
        #[arg(long)]
        kind: String,
        /// Comma list of root-number powers k.
        #[arg(long, default_value = "0")]
        k: String,
        #[arg(long, default_value_t = 1)]
        m: u64,
        #[arg(long, default_value_t = 1)]
        m1: u64,
        #[arg(long, default_value_t = 1)]
        m2: u64,
        #[arg(long, default_value_t = 0.25)]
        alpha: f64,
        /// With kind=second: also emit the four-piece AFE decomposition,
        /// one row per piece plus the recombination summary.
        #[arg(long)]
        decompose: bool,
        /// Decomposition balance exponent θ (X = q^θ).
        #[arg(long, default_value_t = 1.0 / 12.0)]
        theta_exp: f64,
    },
    /// Smoothed mollified moments against a bump of the root angle.
    Smoothed {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 0.2)]
        alpha: f64,
        #[arg(long, default_value_t = 0.1)]
        beta: f64,
        /// Arc [a, b) on ℝ/ℤ.
        #[arg(long, default_value_t = 0.0)]
        a: f64,
        #[arg(long, default_value_t = 0.5)]
        b: f64,
        #[arg(long, default_value_t = 1024)]
        kmax: usize,
        #[arg(long, default_value_t = 8192)]
        samples: usize,
    },
    /// Bump-function Fourier coefficients, or the family-condition ratios.
    Bump {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 0.1)]
        beta: f64,
        #[arg(long, default_value_t = 0.0)]
        a: f64,
        #[arg(long, default_value_t = 0.5)]
        b: f64,
        #[arg(long, default_value_t = 128)]
        kmax: usize,
        #[arg(long, default_value_t = 8192)]
        samples: usize,
        /// Emit the family-condition ratios as JSON instead of coefficients.
        #[arg(long)]
        check_conditions: bool,
        #[arg(long, default_value_t = 20)]
        j_order: u32,
        #[arg(long, default_value_t = 0.02)]
        alpha: f64,
        #[arg(long, default_value_t = 10.0)]
        threshold: f64,
    },
    /// Non-vanishing sweeps over angular windows.
    Nonvanish {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 0.01)]
        epsilon: f64,
        /// Window-shrinking exponent: μ(I) = c_scale·q^{−η}.  η = 0 with
        /// c_scale = 1 is the full circle.
        #[arg(long, default_value_t = 0.0)]
        eta: f64,
        #[arg(long, default_value_t = 1.0)]
        c_scale: f64,
        /// Number of window centers swept around the circle.
        #[arg(long, default_value_t = 8)]
        centers: u32,
    },
    /// Run the full per-q property suite; exit 0 iff everything passes.
    Verify {
        #[command(flatten)]
        common: Common,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let common = match &cli.command {
        Command::Angles { common }
        | Command::Central { common, .. }
        | Command::Kloosterman { common, .. }
        | Command::Mollifier { common, .. }
        | Command::Moments { common, .. }
        | Command::Smoothed { common, .. }
        | Command::Bump { common, .. }
        | Command::Nonvanish { common, .. }
        | Command::Verify { common } => common.clone(),
    };
    let workers = common
        .workers
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(workers).build() {
        Ok(p) => p,
        Err(err) => {
            eprintln!("error: {err}");
            return ExitCode::from(3);
        }
    };
    match pool.install(|| run(&cli.command, &common, workers)) {
        Ok(all_passed) => {
            if all_passed {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(err) => {
            eprintln!("error: {err}");
            let code = match err {
                Error::NotPrime(_)
                | Error::NotAUnit(_)
                | Error::NotPrimitive
                | Error::ModulusMismatch(..)
                | Error::Domain(_)
                | Error::Precondition(_) => 2,
                Error::ModulusCap { .. } | Error::Resource(_) => 3,
                _ => 1,
            };
            ExitCode::from(code)
        }
    }
}

fn parse_q_grid(spec: &str) -> Result<Vec<u64>, Error> {
    if let Some((range, n)) = spec.split_once(':') {
        let (lo, hi) = range
            .split_once("..")
            .ok_or_else(|| Error::Precondition(format!("bad q range `{spec}`")))?;
        let lo: u64 = lo
            .parse()
            .map_err(|_| Error::Precondition(format!("bad q range `{spec}`")))?;
        let hi: u64 = hi
            .parse()
            .map_err(|_| Error::Precondition(format!("bad q range `{spec}`")))?;
        let n: usize = n
            .parse()
            .map_err(|_| Error::Precondition(format!("bad q count in `{spec}`")))?;
        if lo < 3 || hi < lo || n == 0 {
            return Err(Error::Precondition(format!("empty q range `{spec}`")));
        }
        let primes: Vec<u64> = primes_up_to(hi as usize)
            .into_iter()
            .filter(|&p| p >= lo.max(3))
            .collect();
        if primes.is_empty() {
            return Err(Error::Precondition(format!("no primes in `{spec}`")));
        }
        let mut out = Vec::new();
        for i in 0..n.min(primes.len()) {
            let idx = i * (primes.len() - 1) / n.saturating_sub(1).max(1);
            let p = primes[idx.min(primes.len() - 1)];
            if !out.contains(&p) {
                out.push(p);
            }
        }
        Ok(out)
    } else {
        spec.split(',')
            .map(|s| {
                let q: u64 = s
                    .trim()
                    .parse()
                    .map_err(|_| Error::Precondition(format!("bad modulus `{s}`")))?;
                if !is_prime(q) || q < 3 {
                    return Err(Error::NotPrime(q));
                }
                Ok(q)
            })
            .collect()
    }
}

/// CSV/JSON sink with the mandatory reproducibility header.
struct Output {
    path: Option<PathBuf>,
    header: Vec<String>,
    columns: Vec<&'static str>,
    rows: Vec<Vec<String>>,
}

impl Output {
    fn new(common: &Common, config_json: serde_json::Value, columns: Vec<&'static str>) -> Self {
        let config = serde_json::to_string(&config_json).expect("config serializes");
        let spec_hash = SmoothingSpec::even().hash();
        let header = vec![
            format!("# rootmoments v{VERSION}"),
            format!("# config_hash={:016x}", fnv1a(config.as_bytes())),
            format!("# smoothing_spec_hash={spec_hash:016x}"),
            format!("# config={config}"),
        ];
        Self {
            path: common.out.clone(),
            header,
            columns,
            rows: Vec::new(),
        }
    }

    fn push_comment(&mut self, line: String) {
        self.header.push(format!("# {line}"));
    }

    fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    fn finish(self, format: &str) -> Result<(), Error> {
        let mut text = String::new();
        if format == "json" {
            let rows: Vec<serde_json::Value> = self
                .rows
                .iter()
                .map(|r| {
                    let obj: serde_json::Map<String, serde_json::Value> = self
                        .columns
                        .iter()
                        .zip(r)
                        .map(|(c, v)| ((*c).to_string(), serde_json::Value::String(v.clone())))
                        .collect();
                    serde_json::Value::Object(obj)
                })
                .collect();
            let doc = json!({
                "header": self.header,
                "rows": rows,
            });
            text = serde_json::to_string_pretty(&doc).expect("json serializes");
            text.push('\n');
        } else {
            for line in &self.header {
                text.push_str(line);
                text.push('\n');
            }
            writeln!(text, "{}", self.columns.join(",")).expect("write to string");
            for row in &self.rows {
                writeln!(text, "{}", row.join(",")).expect("write to string");
            }
        }
        match self.path {
            Some(p) => fs::write(p, text)?,
            None => print!("{text}"),
        }
        Ok(())
    }
}

fn c64_cols(z: Complex64) -> (String, String) {
    (fmt_f64(z.re), fmt_f64(z.im))
}

fn moment_row(rep: &MomentReport) -> Vec<String> {
    let (cre, cim) = c64_cols(rep.computed);
    let (pre, pim) = c64_cols(rep.predicted_main);
    let (rre, rim) = c64_cols(rep.residual);
    vec![
        rep.q.to_string(),
        rep.kind.as_str().to_string(),
        rep.m1.map(|v| v.to_string()).unwrap_or_default(),
        rep.m2.map(|v| v.to_string()).unwrap_or_default(),
        rep.k.to_string(),
        rep.alpha.map(fmt_f64).unwrap_or_default(),
        rep.x.map(fmt_f64).unwrap_or_default(),
        rep.bump_id.clone().unwrap_or_default(),
        cre,
        cim,
        pre,
        pim,
        rre,
        rim,
        fmt_f64(rep.normalizer),
        rep.envelope.map(fmt_f64).unwrap_or_default(),
    ]
}

const MOMENT_COLUMNS: [&str; 16] = [
    "q",
    "kind",
    "m1",
    "m2",
    "k",
    "alpha",
    "x",
    "bump_id",
    "re_computed",
    "im_computed",
    "re_predicted",
    "im_predicted",
    "re_residual",
    "im_residual",
    "normalizer",
    "envelope",
];

fn build_family(
    common: &Common,
    q: u64,
    params: &AfeParams,
) -> Result<(CharTable, FamilyRecords), Error> {
    let ctx = match &common.cache_dir {
        Some(dir) => cache::context_cached(dir, q)?,
        None => PrimeContext::new(q)?,
    };
    let table = CharTable::new(Arc::new(ctx));
    let fam = build_even_records(&table, params)?;
    Ok((table, fam))
}

fn kl_cached(common: &Common, ctx: &PrimeContext, k: u32) -> Result<Arc<KlTable>, Error> {
    if let Some(dir) = &common.cache_dir {
        if let Some(t) = cache::read_kl_table(dir, ctx, k)? {
            return Ok(Arc::new(t));
        }
        let t = kl_all(k, ctx)?;
        cache::write_kl_table(dir, &t)?;
        return Ok(t);
    }
    kl_all(k, ctx)
}

fn run(command: &Command, common: &Common, workers: usize) -> Result<bool, Error> {
    let qs = parse_q_grid(&common.q)?;
    match command {
        Command::Angles { .. } => {
            let config = json!({"command": "angles", "q": qs, "workers": workers});
            let mut out = Output::new(common, config, vec!["q", "a", "theta", "re_eps", "im_eps"]);
            for &q in &qs {
                let (_, fam) = build_family(common, q, &AfeParams::default())?;
                for r in &fam.records {
                    let (re, im) = c64_cols(r.eps);
                    out.push(vec![
                        q.to_string(),
                        r.a.to_string(),
                        fmt_f64(r.theta),
                        re,
                        im,
                    ]);
                }
            }
            out.finish(&common.format)?;
            Ok(true)
        }
        Command::Central { x, target, .. } => {
            let config = json!({
                "command": "central", "q": qs, "x": x, "target": target, "workers": workers,
                "smoothing_spec": SmoothingSpec::even(),
            });
            let mut out = Output::new(common, config, vec!["q", "a", "re_l", "im_l", "abs_l"]);
            let params = AfeParams {
                x: *x,
                target_abs_err: *target,
                ..AfeParams::default()
            };
            for &q in &qs {
                let (_, fam) = build_family(common, q, &params)?;
                for r in &fam.records {
                    let (re, im) = c64_cols(r.lval);
                    out.push(vec![
                        q.to_string(),
                        r.a.to_string(),
                        re,
                        im,
                        fmt_f64(r.lval.norm()),
                    ]);
                }
            }
            out.finish(&common.format)?;
            Ok(true)
        }
        Command::Kloosterman {
            k,
            diagnostics,
            h,
            c,
            n1_exp,
            n2_exp,
            ..
        } => {
            if *diagnostics {
                let config = json!({
                    "command": "kloosterman-diagnostics", "q": qs, "k": k, "h": h, "c": c,
                    "n1_exp": n1_exp, "n2_exp": n2_exp, "workers": workers,
                });
                let mut out = Output::new(
                    common,
                    config,
                    vec!["q", "k", "c", "h", "n1", "n2", "v2", "w", "w_envelope_ratio"],
                );
                for &q in &qs {
                    let ctx = PrimeContext::new(q)?;
                    let kl = kl_cached(common, &ctx, *k)?;
                    let vt = v_table(&SmoothingSpec::even());
                    let rep = correlation_diagnostics(
                        &kl,
                        &ctx,
                        &vt,
                        *c,
                        *h,
                        (q as f64).powf(*n1_exp),
                        (q as f64).powf(*n2_exp),
                    )?;
                    out.push(vec![
                        q.to_string(),
                        k.to_string(),
                        c.to_string(),
                        h.to_string(),
                        fmt_f64(rep.n1),
                        fmt_f64(rep.n2),
                        fmt_f64(rep.v2),
                        fmt_f64(rep.w),
                        fmt_f64(rep.w_envelope_ratio),
                    ]);
                }
                out.finish(&common.format)?;
            } else {
                let config =
                    json!({"command": "kloosterman", "q": qs, "k": k, "workers": workers});
                let mut out =
                    Output::new(common, config, vec!["q", "x", "re_kl", "im_kl", "abs_kl"]);
                for &q in &qs {
                    let ctx = PrimeContext::new(q)?;
                    let kl = kl_cached(common, &ctx, *k)?;
                    for x in 1..q {
                        let z = kl.at_unit(x);
                        let (re, im) = c64_cols(z);
                        out.push(vec![q.to_string(), x.to_string(), re, im, fmt_f64(z.norm())]);
                    }
                }
                out.finish(&common.format)?;
            }
            Ok(true)
        }
        Command::Mollifier {
            alpha,
            asymptotic_grid,
            ..
        } => {
            if let Some(grid) = asymptotic_grid {
                let ms: Vec<u64> = grid
                    .split(',')
                    .map(|s| {
                        s.trim()
                            .parse()
                            .map_err(|_| Error::Precondition(format!("bad M `{s}`")))
                    })
                    .collect::<Result<_, _>>()?;
                let config = json!({
                    "command": "mollifier-asymptotic", "q": qs, "grid": ms, "workers": workers,
                });
                let mut out = Output::new(
                    common,
                    config,
                    vec!["q", "m_len", "direct", "predicted", "residual_ratio"],
                );
                for &q in &qs {
                    for &m in &ms {
                        let rep = g_asymptotic_check(q, m)?;
                        out.push(vec![
                            q.to_string(),
                            m.to_string(),
                            fmt_f64(rep.direct),
                            fmt_f64(rep.predicted),
                            fmt_f64(rep.residual_ratio),
                        ]);
                    }
                }
                out.finish(&common.format)?;
                return Ok(true);
            }
            // JSON dump of the coefficient data
            let mut docs = Vec::new();
            for &q in &qs {
                let set = build_mollifier(q, *alpha)?;
                let coeffs: Vec<serde_json::Value> = set
                    .coefficients()
                    .iter()
                    .take(100)
                    .map(|(m, x)| {
                        json!({"m": m, "num": x.numer().to_string(), "den": x.denom().to_string()})
                    })
                    .collect();
                docs.push(json!({
                    "q": q,
                    "alpha": alpha,
                    "m_len": set.m_len,
                    "g_num": set.g.numer().to_string(),
                    "g_den": set.g.denom().to_string(),
                    "coefficients": coeffs,
                }));
            }
            let config =
                json!({"command": "mollifier", "q": qs, "alpha": alpha, "workers": workers});
            let doc = json!({
                "header": [format!("rootmoments v{VERSION}")],
                "config_hash": format!("{:016x}", fnv1a(config.to_string().as_bytes())),
                "config": config,
                "mollifiers": docs,
            });
            let text = format!("{}\n", serde_json::to_string_pretty(&doc).expect("json"));
            match &common.out {
                Some(p) => fs::write(p, text)?,
                None => print!("{text}"),
            }
            Ok(true)
        }
        Command::Moments {
            kind,
            k,
            m,
            m1,
            m2,
            alpha,
            decompose,
            theta_exp,
            ..
        } => {
            let ks: Vec<i64> = k
                .split(',')
                .map(|s| {
                    s.trim()
                        .parse()
                        .map_err(|_| Error::Precondition(format!("bad k `{s}`")))
                })
                .collect::<Result<_, _>>()?;
            if *decompose {
                if kind != "second" {
                    return Err(Error::Precondition(
                        "--decompose applies to kind=second".into(),
                    ));
                }
                let config = json!({
                    "command": "moments-decompose", "q": qs, "k": ks, "m1": m1, "m2": m2,
                    "theta_exp": theta_exp, "workers": workers,
                });
                let mut out = Output::new(
                    common,
                    config,
                    vec![
                        "q", "m1", "m2", "k", "theta_exp", "x", "piece", "re", "im",
                    ],
                );
                for &q in &qs {
                    let (table, fam) = build_family(common, q, &AfeParams::default())?;
                    for &kk in &ks {
                        if kk == 0 {
                            return Err(Error::Precondition(
                                "the decomposition needs k ≠ 0".into(),
                            ));
                        }
                        let orders: Vec<u32> = [kk - 1, kk, kk + 1]
                            .iter()
                            .map(|j| j.unsigned_abs() as u32)
                            .collect();
                        let mut tables = Vec::new();
                        for &ord in &orders {
                            tables.push(kl_cached(common, table.ctx(), ord)?);
                        }
                        let dec = afe_decomposition(&table, &tables, *m1, *m2, kk, *theta_exp)?;
                        let direct = second_moment(&table, &fam, *m1, *m2, kk)?;
                        let row = |piece: &str, z: Complex64| {
                            let (re, im) = c64_cols(z);
                            vec![
                                q.to_string(),
                                m1.to_string(),
                                m2.to_string(),
                                kk.to_string(),
                                fmt_f64(*theta_exp),
                                fmt_f64(dec.x),
                                piece.to_string(),
                                re,
                                im,
                            ]
                        };
                        out.push(row("b1", dec.b[0]));
                        out.push(row("b2", dec.b[1]));
                        out.push(row("b3", dec.b[2]));
                        out.push(row("b4", dec.b[3]));
                        out.push(row("recombined", dec.recombined));
                        out.push(row("completion_defect", dec.completion_defect));
                        out.push(row("direct", direct.computed));
                    }
                }
                out.finish(&common.format)?;
                return Ok(true);
            }
            let config = json!({
                "command": "moments", "q": qs, "kind": kind, "k": ks,
                "m": m, "m1": m1, "m2": m2, "alpha": alpha, "workers": workers,
            });
            let mut out = Output::new(common, config, MOMENT_COLUMNS.to_vec());
            for &q in &qs {
                let (table, fam) = build_family(common, q, &AfeParams::default())?;
                for &kk in &ks {
                    let rep = match kind.as_str() {
                        "first" => first_moment(&table, &fam, *m, kk)?,
                        "second" => second_moment(&table, &fam, *m1, *m2, kk)?,
                        "mollified-first" => {
                            let set = build_mollifier(q, *alpha)?;
                            mollified_first(&table, &fam, &set, kk)?
                        }
                        "mollified-second" => {
                            let set = build_mollifier(q, *alpha)?;
                            mollified_second(&table, &fam, &set, kk)?
                        }
                        other => {
                            return Err(Error::Precondition(format!(
                                "unknown moment kind `{other}`"
                            )))
                        }
                    };
                    out.push(moment_row(&rep));
                }
            }
            out.finish(&common.format)?;
            Ok(true)
        }
        Command::Smoothed {
            alpha,
            beta,
            a,
            b,
            kmax,
            samples,
            ..
        } => {
            let config = json!({
                "command": "smoothed", "q": qs, "alpha": alpha, "beta": beta,
                "a": a, "b": b, "kmax": kmax, "samples": samples, "workers": workers,
            });
            let mut out = Output::new(common, config, MOMENT_COLUMNS.to_vec());
            for &q in &qs {
                let (table, fam) = build_family(common, q, &AfeParams::default())?;
                let set = build_mollifier(q, *alpha)?;
                let bump = BumpSpec::new(*beta, *a, *b, *samples)?;
                let rep = smoothed_moments(&table, &fam, &set, &bump, *kmax)?;
                out.push_comment(format!(
                    "q={q} fourier_c=({},{}) fourier_d=({},{}) last_term_rel={}",
                    fmt_f64(rep.c_fourier.re),
                    fmt_f64(rep.c_fourier.im),
                    fmt_f64(rep.d_fourier.re),
                    fmt_f64(rep.d_fourier.im),
                    fmt_f64(rep.last_term_rel),
                ));
                out.push(moment_row(&rep.c));
                out.push(moment_row(&rep.d));
            }
            out.finish(&common.format)?;
            Ok(true)
        }
        Command::Bump {
            beta,
            a,
            b,
            kmax,
            samples,
            check_conditions,
            j_order,
            alpha,
            threshold,
            ..
        } => {
            let bump = BumpSpec::new(*beta, *a, *b, *samples)?;
            if *check_conditions {
                let mut reports = Vec::new();
                for &q in &qs {
                    reports.push(rootmoments::bumps::family_condition_check(
                        &bump, q, *alpha, *j_order, *threshold,
                    )?);
                }
                let config = json!({
                    "command": "bump-conditions", "q": qs, "beta": beta, "a": a, "b": b,
                    "j_order": j_order, "alpha": alpha, "threshold": threshold,
                    "samples": samples, "workers": workers,
                });
                let doc = json!({
                    "header": [format!("rootmoments v{VERSION}")],
                    "config_hash": format!("{:016x}", fnv1a(config.to_string().as_bytes())),
                    "config": config,
                    "reports": reports,
                });
                let text = format!("{}\n", serde_json::to_string_pretty(&doc).expect("json"));
                match &common.out {
                    Some(p) => fs::write(p, text)?,
                    None => print!("{text}"),
                }
                return Ok(true);
            }
            let config = json!({
                "command": "bump", "beta": beta, "a": a, "b": b, "kmax": kmax,
                "samples": samples, "workers": workers,
            });
            let mut out = Output::new(common, config, vec!["k", "re_c", "im_c"]);
            let coeffs = rootmoments::bumps::fourier_coefficients(&bump, *kmax)?;
            for (i, c) in coeffs.iter().enumerate() {
                let k = i as i64 - *kmax as i64;
                let (re, im) = c64_cols(*c);
                out.push(vec![k.to_string(), re, im]);
            }
            out.finish(&common.format)?;
            Ok(true)
        }
        Command::Nonvanish {
            epsilon,
            eta,
            c_scale,
            centers,
            ..
        } => {
            let config = json!({
                "command": "nonvanish", "q": qs, "epsilon": epsilon, "eta": eta,
                "c_scale": c_scale, "centers": centers, "workers": workers,
            });
            let mut out = Output::new(
                common,
                config,
                vec![
                    "q",
                    "a",
                    "b",
                    "mu",
                    "epsilon",
                    "threshold",
                    "count",
                    "family_in_window",
                    "proportion",
                    "c_eta_bound",
                ],
            );
            for &q in &qs {
                let (_, fam) = build_family(common, q, &AfeParams::default())?;
                let eq = angle_equidistribution(&fam, 16)?;
                out.push_comment(format!(
                    "q={q} ks={} mean_eps=({},{})",
                    fmt_f64(eq.ks_statistic),
                    fmt_f64(eq.mean_vector.re),
                    fmt_f64(eq.mean_vector.im),
                ));
                let bound = c_eta(*eta)?;
                let mu = (c_scale * (q as f64).powf(-eta)).min(1.0);
                let center_list: Vec<f64> = if mu >= 1.0 {
                    vec![0.5]
                } else {
                    (0..*centers).map(|i| i as f64 / *centers as f64).collect()
                };
                for center in center_list {
                    let window = if mu >= 1.0 {
                        Interval::full()
                    } else {
                        Interval::centered(center, mu)?
                    };
                    let mut rep = nonvanishing_count(&fam, &window, *epsilon)?;
                    rep.c_eta_bound = bound;
                    out.push(vec![
                        q.to_string(),
                        fmt_f64(rep.a),
                        fmt_f64(rep.b),
                        fmt_f64(rep.mu),
                        fmt_f64(rep.epsilon),
                        fmt_f64(rep.threshold),
                        rep.count.to_string(),
                        rep.family_in_window.to_string(),
                        fmt_f64(rep.proportion),
                        fmt_f64(rep.c_eta_bound),
                    ]);
                }
            }
            out.finish(&common.format)?;
            Ok(true)
        }
        Command::Verify { .. } => {
            let config = json!({"command": "verify", "q": qs, "workers": workers});
            let mut out = Output::new(
                common,
                config,
                vec!["check", "q", "status", "metric", "tolerance"],
            );
            let mut all = true;
            for &q in &qs {
                let checks = verify_q(common, q)?;
                for c in checks {
                    all &= c.pass;
                    out.push(vec![
                        c.name.to_string(),
                        q.to_string(),
                        if c.pass { "pass".into() } else { "fail".into() },
                        fmt_f64(c.metric),
                        fmt_f64(c.tolerance),
                    ]);
                }
            }
            out.finish(&common.format)?;
            Ok(all)
        }
    }
}

struct Check {
    name: &'static str,
    metric: f64,
    tolerance: f64,
    pass: bool,
}

impl Check {
    fn le(name: &'static str, metric: f64, tolerance: f64) -> Self {
        Self {
            name,
            metric,
            tolerance,
            pass: metric <= tolerance && metric.is_finite(),
        }
    }
}

fn splitmix(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// The full deterministic property suite for one modulus.
fn verify_q(common: &Common, q: u64) -> Result<Vec<Check>, Error> {
    let mut checks = Vec::new();
    let (table, fam) = build_family(common, q, &AfeParams::default())?;
    let ctx_arc = table.ctx_arc();
    let ctx = &*ctx_arc;

    // arithmetic round trips, exhaustive
    let mut failures = 0u64;
    for n in 1..q {
        let j = ctx.ind(n)? as u64;
        if rootmoments::arith::mod_pow(ctx.g, j, q) != n {
            failures += 1;
        }
        if n * ctx.inverse(n)? % q != 1 {
            failures += 1;
        }
    }
    checks.push(Check::le("arith_roundtrip_failures", failures as f64, 0.0));

    // parity and conjugation of characters, exhaustive in a
    let mut bad = 0u64;
    for a in 1..(q - 1) as u32 {
        let chi = table.character(a);
        let parity = chi.eval(-1).re;
        let expect = if a % 2 == 0 { 1.0 } else { -1.0 };
        if (parity - expect).abs() > 1e-12 {
            bad += 1;
        }
        if (chi.eval(17).conj() - chi.conjugate().eval(17)).norm() > 0.0 {
            bad += 1;
        }
    }
    checks.push(Check::le("character_parity_conjugation", bad as f64, 0.0));

    // Gauss sums: |τ|² = q and angle conjugation (exhaustive for q ≤ 2003)
    let sample: Vec<u32> = if q <= 2003 {
        (1..(q - 1) as u32).collect()
    } else {
        let mut s = 0x5eed ^ q;
        (0..256)
            .map(|_| 1 + (splitmix(&mut s) % (q - 2)) as u32)
            .collect()
    };
    let mut worst_tau = 0.0f64;
    let mut worst_angle = 0.0f64;
    for &a in &sample {
        let (tau, _, theta) = table.character(a).gauss_sum_and_angle()?;
        worst_tau = worst_tau.max((tau.norm_sqr() - q as f64).abs() / q as f64);
        let (_, _, theta_bar) = table.character(a).conjugate().gauss_sum_and_angle()?;
        let d = (theta_bar - (1.0 - theta).rem_euclid(1.0)).abs();
        worst_angle = worst_angle.max(d.min((d - 1.0).abs()));
    }
    checks.push(Check::le("gauss_modulus_rel", worst_tau, 1e-8));
    checks.push(Check::le("gauss_angle_conjugation", worst_angle, 1e-9));

    // even-family orthogonality against the divisor formula
    let mut worst = 0.0f64;
    let m_iter: Vec<u64> = if q <= 2003 {
        (1..q).collect()
    } else {
        let mut s = 0xa11ce ^ q;
        (0..512).map(|_| 1 + splitmix(&mut s) % (q - 1)).collect()
    };
    for m in m_iter {
        let (computed, predicted) = orthogonality_sum(&table, m)?;
        worst = worst.max((computed - Complex64::new(predicted, 0.0)).norm());
    }
    checks.push(Check::le("orthogonality_abs", worst, 1e-9 * q as f64));

    // V interpolation against direct quadrature
    let spec = SmoothingSpec::even();
    let vt = v_table(&spec);
    let mut s = 0xbeef ^ q;
    let mut worst = 0.0f64;
    for _ in 0..40 {
        let y = (-12.0 + 20.0 * (splitmix(&mut s) as f64 / u64::MAX as f64)).exp();
        worst = worst.max((vt.value(y) - smoothing_v(y, &spec)?).abs());
    }
    checks.push(Check::le("v_interpolation_abs", worst, 1e-10));

    // AFE vs the Hurwitz oracle (exhaustive for small q, sampled above)
    let s_half = Complex64::new(0.5, 0.0);
    let zv = hurwitz_zeta_vector(q, s_half)?;
    let idxs: Vec<usize> = if fam.records.len() <= 128 {
        (0..fam.records.len()).collect()
    } else {
        let mut s = 0xcafe ^ q;
        (0..64)
            .map(|_| (splitmix(&mut s) % fam.records.len() as u64) as usize)
            .collect()
    };
    let mut worst = 0.0f64;
    for &i in &idxs {
        let r = &fam.records[i];
        let oracle = l_value_hurwitz_with(&table, r.a, s_half, &zv);
        worst = worst.max((r.lval - oracle).norm());
    }
    checks.push(Check::le("afe_vs_hurwitz_abs", worst, 1e-8));

    // X-independence of the AFE
    let mut worst = 0.0f64;
    for &i in idxs.iter().take(8) {
        let a = fam.records[i].a;
        let l_half = central_value_afe(&table, a, &AfeParams::with_x(0.5))?;
        let l_two = central_value_afe(&table, a, &AfeParams::with_x(2.0))?;
        worst = worst.max((l_half - fam.records[i].lval).norm());
        worst = worst.max((l_two - fam.records[i].lval).norm());
    }
    checks.push(Check::le("afe_x_independence_abs", worst, 2e-9));

    // functional equation residual at s ∈ {0.3, 0.6}
    let mut worst = 0.0f64;
    for &i in idxs.iter().take(8) {
        for s_re in [0.3, 0.6] {
            worst = worst.max(completed_lambda_residual(
                &table,
                fam.records[i].a,
                Complex64::new(s_re, 0.0),
            )?);
        }
    }
    checks.push(Check::le("functional_equation_residual", worst, 1e-8));

    // Kloosterman: kl_all vs kl_point, the Deligne bound, Weil, Ramanujan
    let mut worst = 0.0f64;
    for k in 1..=3u32 {
        let t = kl_cached(common, ctx, k)?;
        if q <= 101 {
            for x in 1..q {
                worst = worst.max((t.at(x)? - kl_point(k, x, q)?).norm());
            }
        } else {
            let mut s = 0xd06 ^ q;
            for _ in 0..8 {
                let x = 1 + splitmix(&mut s) % (q - 1);
                if (q as f64).powi(k as i32 - 1) <= 1e8 {
                    worst = worst.max((t.at(x)? - kl_point(k, x, q)?).norm());
                }
            }
        }
    }
    checks.push(Check::le("kl_all_vs_point_abs", worst, 1e-9));
    let mut worst = 0.0f64;
    for k in 1..=6u32 {
        let t = kl_cached(common, ctx, k)?;
        worst = worst.max(t.max_abs() - k as f64);
    }
    checks.push(Check::le("kl_deligne_excess", worst.max(0.0), 1e-9));
    let mut s = 0x3177 ^ q;
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let a = 1 + splitmix(&mut s) % (q - 1);
        let b = 1 + splitmix(&mut s) % (q - 1);
        let sab = classical_kloosterman(a, b, q)?;
        worst = worst.max(sab.norm() - 2.0 * (q as f64).sqrt());
    }
    checks.push(Check::le("weil_excess", worst.max(0.0), 0.0));
    let ramanujan = incomplete_inverse_sum(1, q - 1, ctx)?;
    checks.push(Check::le(
        "ramanujan_complete_sum",
        (ramanujan - Complex64::new(-1.0, 0.0)).norm(),
        1e-9,
    ));

    // mollifier exactness and the convolution identities
    let set = build_mollifier(q, 0.25)?;
    checks.push(Check::le(
        "mollifier_exactness",
        !set.exactness_holds() as u64 as f64,
        0.0,
    ));
    let sieve = rootmoments::sieve::SieveTables::up_to(1000);
    let mut bad = 0u64;
    for n in 1..=1000u64 {
        let two = unitary_convolution(MultSpec::MuOverPhi, MultSpec::MuSqOverPhi, n, q, &sieve)?;
        let three = unitary_convolution3(
            MultSpec::MuTauOverPhi,
            MultSpec::MuSqOverPhi,
            MultSpec::MuSqOverPhi,
            n,
            q,
            &sieve,
        )?;
        let expect = rootmoments::mollifier::BigRational::from_integer(((n == 1) as i64).into());
        if two != expect || three != expect {
            bad += 1;
        }
    }
    checks.push(Check::le("unitary_convolution_delta", bad as f64, 0.0));

    // the ε-twisted moment machinery against the Kloosterman closed form
    let mut worst = 0.0f64;
    for k in 1..=3i64 {
        let t = kl_cached(common, ctx, k as u32)?;
        for m in [1u64, 2] {
            let mut acc = Complex64::new(0.0, 0.0);
            for r in &fam.records {
                acc += table.eval(r.a, m as i64) * rootmoments::util::e(k as f64 * r.theta);
            }
            let mbar = ctx.inverse(m)?;
            let pm = t.at(mbar)? + t.at(q - mbar)?;
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            let expect = (q as f64 - 1.0) / (2.0 * (q as f64).sqrt()) * pm
                - sign * (q as f64).powf(-(k as f64) / 2.0);
            worst = worst.max((acc - expect).norm());
        }
    }
    checks.push(Check::le("eps_moment_vs_kloosterman", worst, 1e-7));

    // mollified first moment: the dual-path consistency is enforced inside
    // the call; an error counts as a failed check
    let mut bad = 0.0;
    for k in [0i64, -1, 2] {
        if mollified_first(&table, &fam, &set, k).is_err() {
            bad += 1.0;
        }
    }
    checks.push(Check::le("mollified_first_dual_path", bad, 0.0));

    // smoothed: f ≡ 1 reduction is exact
    let one_bump = BumpSpec::constant_one(1 << 10);
    let sm = smoothed_moments(&table, &fam, &set, &one_bump, 4)?;
    let mf = mollified_first(&table, &fam, &set, 0)?;
    let ms = mollified_second(&table, &fam, &set, 0)?;
    let exact = sm.c.computed == mf.computed && sm.d.computed == ms.computed;
    checks.push(Check::le(
        "smoothed_one_reduction",
        !exact as u64 as f64,
        0.0,
    ));

    // smoothed dual path on the half-circle bump; the gap is scaled by the
    // natural family size so single-character families at a bump zero do
    // not divide by a cancelled total
    let bump = BumpSpec::new(0.1, 0.0, 0.5, 1 << 13)?;
    let sm = smoothed_moments(&table, &fam, &set, &bump, 1024)?;
    let c_scale = sm.c.computed.norm().max(sm.c.predicted_main.norm());
    let d_scale = sm.d.computed.norm().max(sm.d.predicted_main.norm());
    let c_rel = (sm.c.computed - sm.c_fourier).norm() / c_scale.max(1e-30);
    let d_rel = (sm.d.computed - sm.d_fourier).norm() / d_scale.max(1e-30);
    checks.push(Check::le("smoothed_dual_path_rel", c_rel.max(d_rel), 1e-6));

    // AFE decomposition against the direct second moment (small q only)
    if q <= 2003 {
        let tables: Vec<Arc<KlTable>> = (1..=3u32)
            .map(|k| kl_cached(common, ctx, k))
            .collect::<Result<_, _>>()?;
        let dec = afe_decomposition(&table, &tables, 1, 1, 2, 1.0 / 12.0)?;
        let direct = second_moment(&table, &fam, 1, 1, 2)?.computed;
        let rel = (dec.recombined + dec.completion_defect - direct).norm()
            / direct.norm().max(1.0);
        checks.push(Check::le("decomposition_identity_rel", rel, 1e-5));
    }

    // window partition and equidistribution sanity
    let mut total = 0u64;
    for i in 0..4 {
        let arc = Interval::new(i as f64 / 4.0, (i + 1) as f64 / 4.0)?;
        total += nonvanishing_count(&fam, &arc, 0.01)?.family_in_window;
    }
    checks.push(Check::le(
        "window_partition",
        (total as i64 - phi_plus(q) as i64).unsigned_abs() as f64,
        0.0,
    ));
    let eq = angle_equidistribution(&fam, 8)?;
    checks.push(Check::le("ks_in_range", eq.ks_statistic, 1.0));
    checks.push(Check::le("mean_eps_modulus", eq.mean_vector.norm(), 1.0));

    Ok(checks)
}
