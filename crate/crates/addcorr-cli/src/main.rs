//! Experiment harness for exact shifted divisor correlation sums.
//!
//! Subcommands mirror the experiment families: `verify` sweeps the exact
//! identity grid, `constants` evaluates leading constants with truncation
//! tails, `correlate` runs correlation sums against the conjectured leading
//! term, `selberg` and `lowerbound` exercise the lower-bound machinery,
//! `probcheck` confronts floor-count expectations with their closed forms,
//! and `motohashi` compares exact counts to the proven `k = l = 2` main
//! term. Every run writes a JSON report (schema version 1) and optionally
//! CSV and gnuplot artifacts; numeric content is deterministic for a fixed
//! configuration regardless of thread count.
//!
//! Exit codes: 0 success, 1 verification/consistency failure, 2 bad
//! configuration.

mod plot;
mod report;

use std::path::PathBuf;
use std::time::Instant;

use addcorr::arith::{factorize, rat_to_f64};
use addcorr::correlation::{
    correlation_bytes_estimate, correlation_grid_with_cap, correlation_sum_with_cap,
    lower_bound_rhs, lower_bound_uncertainty, minorant_sum_with_cap, q2_main_term, selberg_leading,
    selberg_sum, selberg_sum_f64, sigma_weighted, zeta_constants,
};
use addcorr::prob::{correction_product, empirical_expectation, expectation_triple};
use addcorr::singular::{
    c_of_h, verify_equivalence_with_fault, InjectedFault, VerificationFailure,
};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use report::{
    csv_document, f64_cell, opt_f64_cell, output_path, rat_cell, rat_parts, utc_stamp,
    write_atomic, RunReport, SCHEMA_VERSION,
};

#[derive(Parser)]
#[command(
    name = "addcorr",
    version,
    about = "Exact shifted divisor correlation sums and their leading constants"
)]
struct Cli {
    #[command(subcommand)]
    mode: Mode,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
    Plotscript,
}

impl Format {
    fn name(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
            Format::Plotscript => "plotscript",
        }
    }
}

impl std::fmt::Display for Format {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Args, Clone)]
struct CommonArgs {
    /// Order of the first divisor function
    #[arg(long)]
    k: Option<u32>,

    /// Order of the second divisor function
    #[arg(long)]
    l: Option<u32>,

    /// Shift value; repeat for several shifts
    #[arg(long = "h", value_name = "H")]
    shifts: Vec<u64>,

    /// Range bound; repeat for a grid, strictly ascending
    #[arg(long = "x", value_name = "X")]
    ranges: Vec<u64>,

    /// Euler-product truncation point
    #[arg(long, default_value_t = 1_000_000)]
    prime_limit: u64,

    /// Worker threads (falls back to ADDCORR_THREADS, then all cores)
    #[arg(long)]
    threads: Option<usize>,

    /// Memory cap in bytes for sieves and sweeps
    #[arg(long, default_value_t = 4 << 30)]
    memory_cap: u64,

    /// Output directory
    #[arg(long, default_value = ".")]
    out: PathBuf,

    /// Output formats (comma separated)
    #[arg(long, value_delimiter = ',', default_values_t = vec![Format::Csv, Format::Json])]
    format: Vec<Format>,

    /// Symmetrize the main-term coefficients (see `motohashi`)
    #[arg(long)]
    q2_symmetrize: bool,

    /// Omit the timestamp from output filenames
    #[arg(long)]
    no_timestamp: bool,
}

#[derive(Subcommand)]
enum Mode {
    /// Sweep the exact cross-form identity grid
    Verify {
        #[command(flatten)]
        common: CommonArgs,
        /// Largest prime in the sweep
        #[arg(long, default_value_t = 29)]
        p_max: u64,
        /// Largest shift exponent in the sweep
        #[arg(long, default_value_t = 6)]
        alpha_max: u32,
    },
    /// Evaluate leading constants c(h) with truncation tails
    Constants {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Exact correlation sums against the conjectured leading term
    Correlate {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Selberg-type double sum against its main term
    Selberg {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Correlation sums against the proven lower-bound floor
    Lowerbound {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Floor-count expectations against their closed forms
    Probcheck {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Exact counts against the proven k = l = 2 main term
    Motohashi {
        #[command(flatten)]
        common: CommonArgs,
    },
}

impl Mode {
    fn name(&self) -> &'static str {
        match self {
            Mode::Verify { .. } => "verify",
            Mode::Constants { .. } => "constants",
            Mode::Correlate { .. } => "correlate",
            Mode::Selberg { .. } => "selberg",
            Mode::Lowerbound { .. } => "lowerbound",
            Mode::Probcheck { .. } => "probcheck",
            Mode::Motohashi { .. } => "motohashi",
        }
    }

    fn common(&self) -> &CommonArgs {
        match self {
            Mode::Verify { common, .. }
            | Mode::Constants { common }
            | Mode::Correlate { common }
            | Mode::Selberg { common }
            | Mode::Lowerbound { common }
            | Mode::Probcheck { common }
            | Mode::Motohashi { common } => common,
        }
    }
}

#[derive(Serialize, Clone)]
struct ExperimentConfig {
    mode: String,
    k: u32,
    l: u32,
    h_list: Vec<u64>,
    x_list: Vec<u64>,
    prime_limit: u64,
    memory_cap_bytes: u64,
    thread_count: usize,
    output_dir: String,
    formats: Vec<String>,
    q2_symmetrize: bool,
    no_timestamp: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    p_max: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    alpha_max: Option<u32>,
}

enum AppError {
    Config(String),
    Run(String),
}

impl From<addcorr::Error> for AppError {
    fn from(e: addcorr::Error) -> Self {
        AppError::Run(e.to_string())
    }
}

struct ModeOutput {
    pass: bool,
    results: serde_json::Value,
    csv_header: &'static str,
    csv_rows: Vec<String>,
    /// Per-shift record sets for plotscript output.
    plots: Vec<(u64, Vec<addcorr::correlation::CorrelationRecord>)>,
    peak_bytes: u64,
}

fn main() {
    let cli = Cli::parse();
    match run(cli.mode) {
        Ok(true) => std::process::exit(0),
        Ok(false) => std::process::exit(1),
        Err(AppError::Config(msg)) => {
            eprintln!("configuration error: {msg}");
            std::process::exit(2);
        }
        Err(AppError::Run(msg)) => {
            eprintln!("run failed: {msg}");
            std::process::exit(1);
        }
    }
}

fn default_ranges(mode: &str) -> Vec<u64> {
    match mode {
        "correlate" => vec![10_000, 100_000, 1_000_000],
        "selberg" => vec![100, 1_000, 10_000],
        "lowerbound" => vec![100_000, 1_000_000],
        "motohashi" => vec![1_000_000],
        "probcheck" => vec![1_000_000],
        _ => vec![],
    }
}

fn resolve_config(mode: &Mode) -> Result<ExperimentConfig, AppError> {
    let name = mode.name();
    let c = mode.common();
    let cfg = |m: String| AppError::Config(m);

    let default_order = if name == "verify" { 6 } else { 2 };
    let k = c.k.unwrap_or(default_order);
    let l = c.l.unwrap_or(default_order);
    let h_list = if c.shifts.is_empty() {
        if name == "probcheck" {
            (1..=12).collect()
        } else {
            vec![1]
        }
    } else {
        c.shifts.clone()
    };
    let x_list = if c.ranges.is_empty() {
        default_ranges(name)
    } else {
        c.ranges.clone()
    };

    if h_list.is_empty() {
        return Err(cfg("at least one shift (--h) is required".into()));
    }
    if h_list.iter().any(|&h| h == 0) {
        return Err(cfg("shifts must be positive".into()));
    }
    if x_list.windows(2).any(|w| w[0] >= w[1]) {
        return Err(cfg("range bounds (--x) must be strictly ascending".into()));
    }
    if c.prime_limit < 100 {
        return Err(cfg(format!(
            "prime limit must be at least 100, got {}",
            c.prime_limit
        )));
    }
    match name {
        "verify" | "constants" | "correlate" => {
            if k < 2 || l < 2 {
                return Err(cfg(format!("{name} requires k, l >= 2, got ({k}, {l})")));
            }
        }
        "lowerbound" => {
            if k < 3 || l < 3 {
                return Err(cfg(format!(
                    "lowerbound requires k, l >= 3 (theorem hypothesis), got ({k}, {l})"
                )));
            }
        }
        "motohashi" => {
            if k != 2 || l != 2 {
                return Err(cfg(format!(
                    "motohashi is a k = l = 2 comparison, got ({k}, {l})"
                )));
            }
            if x_list.iter().any(|&x| x < 10) {
                return Err(cfg("motohashi requires x >= 10".into()));
            }
        }
        _ => {
            if k < 1 || l < 1 {
                return Err(cfg("orders must be at least 1".into()));
            }
        }
    }
    if matches!(name, "correlate" | "lowerbound") && x_list.iter().any(|&x| x < 3) {
        return Err(cfg("range bounds below 3 have no leading prediction".into()));
    }
    if matches!(name, "correlate" | "lowerbound" | "motohashi") && x_list.is_empty() {
        return Err(cfg("at least one range bound (--x) is required".into()));
    }

    let threads = c
        .threads
        .or_else(|| {
            std::env::var("ADDCORR_THREADS")
                .ok()
                .and_then(|v| v.parse().ok())
        })
        .unwrap_or(0);
    let (p_max, alpha_max) = match mode {
        Mode::Verify { p_max, alpha_max, .. } => (Some(*p_max), Some(*alpha_max)),
        _ => (None, None),
    };
    if let Some(p) = p_max {
        if p < 2 {
            return Err(cfg("p-max must be at least 2".into()));
        }
    }

    Ok(ExperimentConfig {
        mode: name.to_string(),
        k,
        l,
        h_list,
        x_list,
        prime_limit: c.prime_limit,
        memory_cap_bytes: c.memory_cap,
        thread_count: threads,
        output_dir: c.out.display().to_string(),
        formats: c.format.iter().map(|f| f.name().to_string()).collect(),
        q2_symmetrize: c.q2_symmetrize,
        no_timestamp: c.no_timestamp,
        p_max,
        alpha_max,
    })
}

fn fault_from_env() -> Result<Option<InjectedFault>, AppError> {
    let Ok(raw) = std::env::var("ADDCORR_BREAK_LOCAL") else {
        return Ok(None);
    };
    let parts: Vec<u64> = raw
        .split(',')
        .map(|s| s.trim().parse::<u64>())
        .collect::<Result<_, _>>()
        .map_err(|_| {
            AppError::Config(format!(
                "ADDCORR_BREAK_LOCAL must be \"k,l,p,alpha\", got {raw:?}"
            ))
        })?;
    if parts.len() != 4 {
        return Err(AppError::Config(
            "ADDCORR_BREAK_LOCAL must have four comma-separated fields".into(),
        ));
    }
    Ok(Some(InjectedFault {
        k: parts[0] as u32,
        l: parts[1] as u32,
        p: parts[2],
        alpha: parts[3] as u32,
    }))
}

fn run(mode: Mode) -> Result<bool, AppError> {
    let config = resolve_config(&mode)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.thread_count)
        .build()
        .map_err(|e| AppError::Run(format!("thread pool: {e}")))?;

    let start = Instant::now();
    let out = pool.install(|| dispatch(&mode, &config))?;
    let wall = start.elapsed().as_secs_f64();

    let verdict = if out.pass { "pass" } else { "fail" };
    let report = RunReport {
        schema_version: SCHEMA_VERSION,
        config: config.clone(),
        verdict,
        wall_s: wall,
        peak_mem_bytes_estimate: out.peak_bytes,
        results: out.results,
    };

    let stamp = if config.no_timestamp {
        None
    } else {
        Some(utc_stamp())
    };
    let stem = format!("{}-{}-{}", config.mode, config.k, config.l);
    let dir = PathBuf::from(&config.output_dir);
    let mut written = Vec::new();
    for f in &config.formats {
        match f.as_str() {
            "json" => {
                let path = output_path(&dir, &stem, stamp.as_deref(), "json");
                let body = serde_json::to_string_pretty(&report)
                    .map_err(|e| AppError::Run(format!("encoding report: {e}")))?;
                write_atomic(&path, &body)
                    .map_err(|e| AppError::Run(format!("writing {}: {e}", path.display())))?;
                written.push(path);
            }
            "csv" => {
                let path = output_path(&dir, &stem, stamp.as_deref(), "csv");
                write_atomic(&path, &csv_document(out.csv_header, &out.csv_rows))
                    .map_err(|e| AppError::Run(format!("writing {}: {e}", path.display())))?;
                written.push(path);
            }
            "plotscript" => {
                for (h, records) in &out.plots {
                    let path = output_path(
                        &dir,
                        &format!("{stem}-h{h}"),
                        stamp.as_deref(),
                        "gnuplot",
                    );
                    plot::emit_plotscript(records, &path).map_err(AppError::Run)?;
                    written.push(path);
                }
            }
            _ => {}
        }
    }

    println!(
        "{}: {} in {:.2}s ({} result rows)",
        config.mode,
        verdict,
        wall,
        out.csv_rows.len()
    );
    for p in &written {
        println!("  wrote {}", p.display());
    }
    Ok(out.pass)
}

fn dispatch(mode: &Mode, config: &ExperimentConfig) -> Result<ModeOutput, AppError> {
    match mode {
        Mode::Verify { .. } => run_verify(config),
        Mode::Constants { .. } => run_constants(config),
        Mode::Correlate { .. } => run_correlate(config),
        Mode::Selberg { .. } => run_selberg(config),
        Mode::Lowerbound { .. } => run_lowerbound(config),
        Mode::Probcheck { .. } => run_probcheck(config),
        Mode::Motohashi { .. } => run_motohashi(config),
    }
}

const VERIFY_HEADER: &str = "k,l,p,alpha,f_direct,f_sigma,f_H,c_local_Cf,c_local_tao,all_equal";

fn verify_row_json(r: &addcorr::singular::LocalFactorReport) -> serde_json::Value {
    json!({
        "k": r.k,
        "l": r.l,
        "p": r.p,
        "alpha": r.alpha,
        "f_direct": rat_parts(&r.f_direct),
        "f_sigma": rat_parts(&r.f_sigma),
        "f_H": rat_parts(&r.f_h),
        "c_local_Cf": rat_parts(&r.c_local_cf),
        "c_local_tao": rat_parts(&r.c_local_tao),
        "all_equal": r.all_equal,
    })
}

fn verify_row_csv(r: &addcorr::singular::LocalFactorReport) -> String {
    format!(
        "{},{},{},{},{},{},{},{},{},{}",
        r.k,
        r.l,
        r.p,
        r.alpha,
        rat_cell(&r.f_direct),
        rat_cell(&r.f_sigma),
        rat_cell(&r.f_h),
        rat_cell(&r.c_local_cf),
        rat_cell(&r.c_local_tao),
        r.all_equal
    )
}

fn run_verify(config: &ExperimentConfig) -> Result<ModeOutput, AppError> {
    let fault = fault_from_env()?;
    let p_max = config.p_max.unwrap_or(29);
    let alpha_max = config.alpha_max.unwrap_or(6);
    match verify_equivalence_with_fault(config.k, config.l, p_max, alpha_max, fault) {
        Ok(reports) => Ok(ModeOutput {
            pass: true,
            results: json!({
                "grid_points": reports.len(),
                "reports": reports.iter().map(verify_row_json).collect::<Vec<_>>(),
            }),
            csv_header: VERIFY_HEADER,
            csv_rows: reports.iter().map(verify_row_csv).collect(),
            plots: vec![],
            peak_bytes: 0,
        }),
        Err(failure) => {
            let (results, csv_rows) = match &failure {
                VerificationFailure::LocalFactor(r) => (
                    json!({
                        "failure": failure.to_string(),
                        "counterexample": verify_row_json(r),
                    }),
                    vec![verify_row_csv(r)],
                ),
                VerificationFailure::Binomial { a, r, n } => (
                    json!({
                        "failure": failure.to_string(),
                        "counterexample": { "a": a, "r": r, "n": n },
                    }),
                    vec![],
                ),
            };
            eprintln!("verification failure: {failure}");
            Ok(ModeOutput {
                pass: false,
                results,
                csv_header: VERIFY_HEADER,
                csv_rows,
                plots: vec![],
                peak_bytes: 0,
            })
        }
    }
}

fn run_constants(config: &ExperimentConfig) -> Result<ModeOutput, AppError> {
    let mut rows_json = Vec::new();
    let mut rows_csv = Vec::new();
    for &h in &config.h_list {
        let sc = c_of_h(config.k, config.l, h, config.prime_limit)?;
        rows_json.push(json!({
            "k": sc.k,
            "l": sc.l,
            "h": h,
            "C_value": sc.euler_product,
            "f_value": rat_parts(&sc.f_value),
            "c_value": sc.c(),
            "prime_limit": sc.prime_limit,
            "tail_bound": sc.tail_bound,
        }));
        rows_csv.push(format!(
            "{},{},{},{},{},{},{},{}",
            sc.k,
            sc.l,
            h,
            f64_cell(sc.euler_product),
            rat_cell(&sc.f_value),
            f64_cell(sc.c()),
            sc.prime_limit,
            f64_cell(sc.tail_bound)
        ));
    }
    Ok(ModeOutput {
        pass: true,
        results: json!(rows_json),
        csv_header: "k,l,h,C_value,f_value,c_value,prime_limit,tail_bound",
        csv_rows: rows_csv,
        plots: vec![],
        peak_bytes: 0,
    })
}

fn run_correlate(config: &ExperimentConfig) -> Result<ModeOutput, AppError> {
    let mut rows_json = Vec::new();
    let mut rows_csv = Vec::new();
    let mut plots = Vec::new();
    let mut peak = 0u64;
    for &h in &config.h_list {
        let sc = c_of_h(config.k, config.l, h, config.prime_limit)?;
        peak = peak.max(correlation_bytes_estimate(
            config.k,
            config.l,
            h,
            *config.x_list.last().unwrap(),
        ));
        let mut recs = correlation_grid_with_cap(
            config.k,
            config.l,
            h,
            &config.x_list,
            &sc,
            config.memory_cap_bytes,
        )?;
        if config.q2_symmetrize {
            let z = zeta_constants(1e-13)?;
            for r in &mut recs {
                if r.q2_prediction.is_some() {
                    r.q2_prediction = q2_main_term(r.x as f64, r.h, &z, true).ok();
                }
            }
        }
        for r in &recs {
            rows_json.push(json!({
                "k": r.k,
                "l": r.l,
                "h": r.h,
                "x": r.x,
                "D_exact": r.d_exact.to_string(),
                "c_value": sc.c(),
                "leading_prediction": r.leading_prediction,
                "ratio": r.ratio,
                "q2_prediction": r.q2_prediction,
                "elapsed_s": r.elapsed,
            }));
            rows_csv.push(format!(
                "{},{},{},{},{},{},{},{},{},{}",
                r.k,
                r.l,
                r.h,
                r.x,
                r.d_exact,
                f64_cell(sc.c()),
                f64_cell(r.leading_prediction),
                f64_cell(r.ratio),
                opt_f64_cell(r.q2_prediction),
                f64_cell(r.elapsed)
            ));
        }
        plots.push((h, recs));
    }
    Ok(ModeOutput {
        pass: true,
        results: json!(rows_json),
        csv_header: "k,l,h,x,D_exact,c_value,leading_prediction,ratio,q2_prediction,elapsed_s",
        csv_rows: rows_csv,
        plots,
        peak_bytes: peak,
    })
}

fn run_selberg(config: &ExperimentConfig) -> Result<ModeOutput, AppError> {
    let mut rows_json = Vec::new();
    let mut rows_csv = Vec::new();
    for &h in &config.h_list {
        for &x in &config.x_list {
            let (sum_cell, sum_json, sum_f64, exact) = match selberg_sum(config.k, config.l, h, x) {
                Ok(s) => {
                    let v = rat_to_f64(&s);
                    (rat_cell(&s), json!(rat_parts(&s)), v, true)
                }
                Err(addcorr::Error::Resource { .. }) => {
                    let v = selberg_sum_f64(config.k, config.l, h, x)?;
                    (f64_cell(v), json!(v), v, false)
                }
                Err(e) => return Err(e.into()),
            };
            let lead = selberg_leading(config.k, config.l, h, x, config.prime_limit)?;
            rows_json.push(json!({
                "k": config.k,
                "l": config.l,
                "h": h,
                "x": x,
                "sum": sum_json,
                "sum_is_exact": exact,
                "leading": lead,
                "ratio": sum_f64 / lead,
            }));
            rows_csv.push(format!(
                "{},{},{},{},{},{},{},{}",
                config.k,
                config.l,
                h,
                x,
                sum_cell,
                exact,
                f64_cell(lead),
                f64_cell(sum_f64 / lead)
            ));
        }
    }
    Ok(ModeOutput {
        pass: true,
        results: json!(rows_json),
        csv_header: "k,l,h,X,sum,sum_is_exact,leading,ratio",
        csv_rows: rows_csv,
        plots: vec![],
        peak_bytes: 0,
    })
}

fn run_lowerbound(config: &ExperimentConfig) -> Result<ModeOutput, AppError> {
    let mut rows_json = Vec::new();
    let mut rows_csv = Vec::new();
    let mut pass = true;
    let mut peak = 0u64;
    for &h in &config.h_list {
        let sc = c_of_h(config.k, config.l, h, config.prime_limit)?;
        for &x in &config.x_list {
            peak = peak.max(correlation_bytes_estimate(config.k, config.l, h, x));
            let d = correlation_sum_with_cap(config.k, config.l, h, x, config.memory_cap_bytes)?;
            let rhs = lower_bound_rhs(config.k, config.l, h, x, &sc)?;
            let m = minorant_sum_with_cap(config.k, config.l, h, x, config.memory_cap_bytes)?;
            let band = lower_bound_uncertainty(h, x);
            let dominates = d as f64 >= rhs && m <= d;
            pass &= dominates;
            if !dominates {
                eprintln!("domination failure at k={} l={} h={h} x={x}", config.k, config.l);
            }
            rows_json.push(json!({
                "k": config.k,
                "l": config.l,
                "h": h,
                "x": x,
                "D_exact": d.to_string(),
                "lower_bound_rhs": rhs,
                "minorant": m.to_string(),
                "uncertainty_band": band,
                "dominates": dominates,
            }));
            rows_csv.push(format!(
                "{},{},{},{},{},{},{},{},{}",
                config.k,
                config.l,
                h,
                x,
                d,
                f64_cell(rhs),
                m,
                f64_cell(band),
                dominates
            ));
        }
    }
    Ok(ModeOutput {
        pass,
        results: json!(rows_json),
        csv_header: "k,l,h,x,D_exact,lower_bound_rhs,minorant,uncertainty_band,dominates",
        csv_rows: rows_csv,
        plots: vec![],
        peak_bytes: peak,
    })
}

fn run_probcheck(config: &ExperimentConfig) -> Result<ModeOutput, AppError> {
    let n = *config.x_list.first().unwrap_or(&1_000_000);
    let mut rows_json = Vec::new();
    let mut rows_csv = Vec::new();
    let mut pass = true;
    for &p in &[2u64, 3, 5, 7] {
        for alpha in 0..=2u32 {
            let h = p.pow(alpha);
            let t = expectation_triple(config.k, config.l, p, alpha);
            let emp = empirical_expectation(config.k, config.l, p, h, n);
            let closed = rat_to_f64(&t.e_xy);
            let rel = (emp / closed - 1.0).abs();
            rows_json.push(json!({
                "kind": "expectation",
                "k": t.k,
                "l": t.l,
                "p": p,
                "alpha": alpha,
                "h": h,
                "n": n,
                "E_X": rat_parts(&t.e_x),
                "E_Y": rat_parts(&t.e_y),
                "E_XY": rat_parts(&t.e_xy),
                "correction": rat_parts(&t.correction),
                "empirical": emp,
                "rel_dev": rel,
            }));
            rows_csv.push(format!(
                "expectation,{},{},{},{},{},{},{},{},{},",
                t.k,
                t.l,
                p,
                alpha,
                h,
                n,
                f64_cell(closed),
                f64_cell(emp),
                f64_cell(rel)
            ));
        }
    }
    for &h in &config.h_list {
        match correction_product(config.k, config.l, h, config.prime_limit) {
            Ok((value, tail)) => {
                let reference = c_of_h(config.k, config.l, h, config.prime_limit)?;
                let rel = (value / reference.c() - 1.0).abs();
                rows_json.push(json!({
                    "kind": "correction_product",
                    "k": config.k,
                    "l": config.l,
                    "h": h,
                    "value": value,
                    "tail_bound": tail,
                    "c_of_h": reference.c(),
                    "rel_dev": rel,
                }));
                rows_csv.push(format!(
                    "correction_product,{},{},,,{},,{},{},{},{}",
                    config.k,
                    config.l,
                    h,
                    f64_cell(reference.c()),
                    f64_cell(value),
                    f64_cell(rel),
                    f64_cell(tail)
                ));
            }
            Err(e) => {
                pass = false;
                eprintln!("correction product inconsistent at h={h}: {e}");
                rows_json.push(json!({
                    "kind": "correction_product",
                    "k": config.k,
                    "l": config.l,
                    "h": h,
                    "error": e.to_string(),
                }));
            }
        }
    }
    Ok(ModeOutput {
        pass,
        results: json!(rows_json),
        csv_header: "kind,k,l,p,alpha,h,n,closed,observed,rel_dev,tail_bound",
        csv_rows: rows_csv,
        plots: vec![],
        peak_bytes: 0,
    })
}

fn run_motohashi(config: &ExperimentConfig) -> Result<ModeOutput, AppError> {
    let z = zeta_constants(1e-13)?;
    let mut rows_json = Vec::new();
    let mut rows_csv = Vec::new();
    let mut peak = 0u64;
    for &h in &config.h_list {
        if h != 1 {
            return Err(AppError::Config(
                "motohashi supports h = 1 only: the divisor-weight normalization \
                 for larger shifts is ambiguous"
                    .into(),
            ));
        }
        for &x in &config.x_list {
            peak = peak.max(correlation_bytes_estimate(2, 2, h, x));
            let d = correlation_sum_with_cap(2, 2, h, x, config.memory_cap_bytes)?;
            let q = q2_main_term(x as f64, h, &z, config.q2_symmetrize)?;
            let rel = (d as f64 - q) / d as f64;
            rows_json.push(json!({
                "k": 2,
                "l": 2,
                "h": h,
                "x": x,
                "D_exact": d.to_string(),
                "q2_prediction": q,
                "rel_error": rel,
                "symmetrized": config.q2_symmetrize,
                "sigma0_h": sigma_weighted(&factorize(h)?, 0),
            }));
            rows_csv.push(format!(
                "2,2,{},{},{},{},{},{}",
                h,
                x,
                d,
                f64_cell(q),
                f64_cell(rel),
                config.q2_symmetrize
            ));
        }
    }
    Ok(ModeOutput {
        pass: true,
        results: json!(rows_json),
        csv_header: "k,l,h,x,D_exact,q2_prediction,rel_error,symmetrized",
        csv_rows: rows_csv,
        plots: vec![],
        peak_bytes: peak,
    })
}
