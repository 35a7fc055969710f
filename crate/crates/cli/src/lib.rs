pub mod cache;

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, ensure, Context, Result};
use clap::{Args, Parser, Subcommand};
use eevconv_core::convergence::{
    convergence_report, eth_linear_predictor, fit_target, r_f_proxy, ConvergenceReport,
    ScalingFit, TargetFunction, MAX_DEGREE,
};
use eevconv_core::freefermion::{sample_r_f, Bilinear, TfimChain, DEFAULT_MODE_CAP};
use eevconv_core::model::Model;
use eevconv_core::pauli::{
    canonicalize, ham2_op_trace, ham_op_trace, obstruction_residual, witness_operator,
    ChainContext, LocalOperator,
};
use eevconv_core::spectra::{eev_table, HamiltonianSpec, Observable, SpectrumTable, DEFAULT_SIZE_CAP};
use serde::{Deserialize, Serialize};

use crate::cache::{cache_key, TableCache};

/// Drift above which a trace is reported as N-dependent.
pub const TRACE_TOLERANCE: f64 = 1e-10;

#[derive(Parser, Debug)]
#[command(name = "eevconv", version, about = "Convergence of eigenstate expectation values in translation-invariant chains")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Trace identities tr(HA)/d, tr(H²A)/d, tr(Hh)/d, tr(H²h)/d across N.
    Traces(SweepArgs),
    /// Canonical translation-invariant form of each observable.
    Canonicalize(CanonArgs),
    /// The witness observable of the model.
    Witness(ModelArgs),
    /// Diagonalize a range of sizes and report r_f for several targets.
    Scan(SweepArgs),
    /// Pooled polynomial fit of the EEV.
    Fit(SweepArgs),
    /// Monte-Carlo r_f of the transverse-field Ising chain.
    FfScan(FfArgs),
}

#[derive(Args, Debug, Clone)]
pub struct ModelArgs {
    /// Model file (JSON).
    #[arg(long)]
    pub model: PathBuf,
    /// Rescale h to unit operator norm.
    #[arg(long)]
    pub normalize: bool,
}

#[derive(Args, Debug, Clone)]
pub struct SweepArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Observable: `h`, `witness:auto` or an expression such as `X1 + 0.5*Z1Z2`.
    #[arg(long = "obs", default_value = "h")]
    pub obs: Vec<String>,
    #[arg(long, default_value_t = 6)]
    pub nmin: usize,
    #[arg(long, default_value_t = 10)]
    pub nmax: usize,
    #[arg(long, default_value_t = 3)]
    pub degree: usize,
    #[arg(long, default_value = ".eevconv-cache")]
    pub cache: PathBuf,
    #[arg(long)]
    pub no_cache: bool,
    /// Directory for CSV and JSON output.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
pub struct CanonArgs {
    #[arg(long = "obs", required = true)]
    pub obs: Vec<String>,
}

#[derive(Args, Debug, Clone)]
pub struct FfArgs {
    /// Transverse field of H = −Σ(Z_l Z_{l+1} + g X_l).
    #[arg(long)]
    pub g: f64,
    /// Chain lengths, comma separated; defaults to nmin..=nmax.
    #[arg(long, value_delimiter = ',')]
    pub ns: Vec<usize>,
    #[arg(long, default_value_t = 16)]
    pub nmin: usize,
    #[arg(long, default_value_t = 128)]
    pub nmax: usize,
    /// `h` (energy density) or a combination of Z1Z2 and X1.
    #[arg(long = "obs", default_value = "X1")]
    pub obs: String,
    #[arg(long, default_value_t = 10_000)]
    pub samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = DEFAULT_MODE_CAP)]
    pub mode_cap: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Resolved configuration of a sweep over exact spectra.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub model_path: PathBuf,
    pub normalize: bool,
    pub observables: Vec<String>,
    pub nmin: usize,
    pub nmax: usize,
    pub degree: usize,
    pub cache: Option<PathBuf>,
    pub out: Option<PathBuf>,
}

impl RunConfig {
    pub fn from_args(a: &SweepArgs) -> Result<Self> {
        ensure!(a.nmin <= a.nmax, "--nmin {} exceeds --nmax {}", a.nmin, a.nmax);
        ensure!(a.nmax <= DEFAULT_SIZE_CAP, "--nmax {} exceeds the size cap {DEFAULT_SIZE_CAP}", a.nmax);
        ensure!(a.degree <= MAX_DEGREE, "--degree must be at most {MAX_DEGREE}");
        Ok(Self {
            model_path: a.model.model.clone(),
            normalize: a.model.normalize,
            observables: a.obs.clone(),
            nmin: a.nmin,
            nmax: a.nmax,
            degree: a.degree,
            cache: (!a.no_cache).then(|| a.cache.clone()),
            out: a.out.clone(),
        })
    }

    fn sizes(&self) -> Vec<usize> {
        (self.nmin..=self.nmax).collect()
    }
}

/// Free-fermion sweep parameters.
#[derive(Debug, Clone)]
pub struct FfConfig {
    pub g: f64,
    pub sizes: Vec<usize>,
    pub observable: String,
    pub samples: usize,
    pub seed: u64,
    pub mode_cap: usize,
    pub out: Option<PathBuf>,
}

impl FfConfig {
    pub fn from_args(a: &FfArgs) -> Result<Self> {
        let sizes = if a.ns.is_empty() {
            (a.nmin..=a.nmax).collect()
        } else {
            a.ns.clone()
        };
        ensure!(!sizes.is_empty(), "no chain lengths given");
        ensure!(a.samples >= 100, "--samples must be at least 100");
        Ok(Self {
            g: a.g,
            sizes,
            observable: a.obs.clone(),
            samples: a.samples,
            seed: a.seed,
            mode_cap: a.mode_cap,
            out: a.out.clone(),
        })
    }
}

struct Loaded {
    model: Model,
    h: LocalOperator,
    observables: Vec<(String, String, LocalOperator)>,
}

fn load(cfg: &RunConfig) -> Result<Loaded> {
    let model = Model::load(&cfg.model_path)?;
    let h = if cfg.normalize {
        model.normalized().h
    } else {
        model.h.clone()
    };
    let mut observables = Vec::new();
    for (i, spec) in cfg.observables.iter().enumerate() {
        let (id, op) = resolve_observable(spec, i, &model.h, &h)?;
        ensure!(
            observables.iter().all(|(other, _, _)| *other != id),
            "observable `{spec}` given twice"
        );
        observables.push((id, spec.clone(), op));
    }
    Ok(Loaded { model, h, observables })
}

fn resolve_observable(
    spec: &str,
    index: usize,
    raw_h: &LocalOperator,
    h: &LocalOperator,
) -> Result<(String, LocalOperator)> {
    match spec.trim() {
        "h" => Ok(("h".into(), h.clone())),
        "witness:auto" => Ok(("witness".into(), witness_operator(raw_h)?.operator)),
        expr => {
            let op: LocalOperator = expr
                .parse()
                .with_context(|| format!("parsing observable `{expr}`"))?;
            Ok((format!("obs{index}"), op))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    #[serde(rename = "N")]
    pub n: usize,
    pub observable: String,
    #[serde(rename = "tr_HA")]
    pub tr_ha: f64,
    #[serde(rename = "tr_H2A")]
    pub tr_h2a: f64,
    #[serde(rename = "tr_Hh")]
    pub tr_hh: f64,
    #[serde(rename = "tr_H2h")]
    pub tr_h2h: f64,
    pub residual: f64,
    /// Whether N lies in the window where all four traces are N-independent.
    pub in_window: bool,
}

#[derive(Debug, Clone)]
pub struct TracesReport {
    pub rows: Vec<TraceRow>,
    /// One message per quantity that drifts by more than [`TRACE_TOLERANCE`].
    pub flagged: Vec<String>,
}

pub fn cmd_traces(cfg: &RunConfig) -> Result<TracesReport> {
    let loaded = load(cfg)?;
    let h = &loaded.h;
    let k = h.window();
    let mut rows = Vec::new();
    let mut flagged = Vec::new();
    for (id, spec, a) in &loaded.observables {
        let kp = a.window();
        let window = ChainContext::quadratic_trace_min_n(k, kp)
            .max(ChainContext::quadratic_trace_min_n(k, k))
            .max(kp);
        let mut in_window_rows: Vec<TraceRow> = Vec::new();
        for n in cfg.sizes() {
            if n < k.max(kp) {
                continue;
            }
            let ctx = ChainContext::new(n, k)?;
            let row = TraceRow {
                n,
                observable: id.clone(),
                tr_ha: ham_op_trace(h, a, &ctx)?.re,
                tr_h2a: ham2_op_trace(h, a, &ctx)?.re,
                tr_hh: ham_op_trace(h, h, &ctx)?.re,
                tr_h2h: ham2_op_trace(h, h, &ctx)?.re,
                residual: obstruction_residual(h, a, &ctx)?.re,
                in_window: n >= window,
            };
            if row.in_window {
                in_window_rows.push(row.clone());
            }
            rows.push(row);
        }
        let columns: [(&str, fn(&TraceRow) -> f64); 5] = [
            ("tr(HA)/d", |r| r.tr_ha),
            ("tr(H²A)/d", |r| r.tr_h2a),
            ("tr(Hh)/d", |r| r.tr_hh),
            ("tr(H²h)/d", |r| r.tr_h2h),
            ("residual", |r| r.residual),
        ];
        if let Some(first) = in_window_rows.first() {
            for (name, get) in columns {
                let drift = in_window_rows
                    .iter()
                    .map(|r| (get(r) - get(first)).abs())
                    .fold(0.0, f64::max);
                if drift > TRACE_TOLERANCE {
                    flagged.push(format!("{spec}: {name} drifts by {drift:.3e} for N >= {window}"));
                }
            }
        }
    }
    if let Some(dir) = &cfg.out {
        fs::create_dir_all(dir)?;
        write_csv(&dir.join("traces.csv"), &rows)?;
    }
    Ok(TracesReport { rows, flagged })
}

pub fn render_traces(report: &TracesReport) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:>3}  {:<10} {:>14} {:>14} {:>14} {:>14} {:>14}",
        "N", "obs", "tr(HA)/d", "tr(H²A)/d", "tr(Hh)/d", "tr(H²h)/d", "residual"
    );
    for r in &report.rows {
        let _ = writeln!(
            out,
            "{:>3}{} {:<10} {:>14.10} {:>14.10} {:>14.10} {:>14.10} {:>14.10}",
            r.n,
            if r.in_window { " " } else { "*" },
            r.observable,
            r.tr_ha,
            r.tr_h2a,
            r.tr_hh,
            r.tr_h2h,
            r.residual
        );
    }
    out.push_str("(* = below the N-independence window)\n");
    if report.flagged.is_empty() {
        out.push_str("all traces N-independent inside their windows\n");
    } else {
        for f in &report.flagged {
            let _ = writeln!(out, "N-DEPENDENT: {f}");
        }
    }
    out
}

pub fn cmd_canonicalize(specs: &[String]) -> Result<Vec<(String, LocalOperator)>> {
    specs
        .iter()
        .map(|s| {
            let op: LocalOperator = s.parse().with_context(|| format!("parsing `{s}`"))?;
            Ok((s.clone(), canonicalize(&op)))
        })
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct WitnessReport {
    pub string: String,
    pub locality: usize,
    pub g1_overlap: f64,
    pub residual: f64,
    pub tr_ha: f64,
}

pub fn cmd_witness(args: &ModelArgs) -> Result<WitnessReport> {
    let model = Model::load(&args.model)?;
    let h = if args.normalize {
        model.normalized().h
    } else {
        model.h.clone()
    };
    let w = witness_operator(&h)?;
    let ctx = ChainContext::new(
        ChainContext::quadratic_trace_min_n(h.window(), w.operator.window()),
        h.window(),
    )?;
    Ok(WitnessReport {
        string: w.string.to_string(),
        locality: w.string.extent(),
        g1_overlap: w.g1_overlap.re,
        residual: obstruction_residual(&h, &w.operator, &ctx)?.re,
        tr_ha: ham_op_trace(&h, &w.operator, &ctx)?.re,
    })
}

struct Tables {
    loaded: Loaded,
    tables: Vec<SpectrumTable>,
    key: String,
    hits: usize,
    misses: usize,
}

fn spectra_for(cfg: &RunConfig) -> Result<Tables> {
    let loaded = load(cfg)?;
    let ids: Vec<String> = loaded.observables.iter().map(|o| o.0.clone()).collect();
    let described: Vec<String> = loaded
        .observables
        .iter()
        .map(|(id, _, op)| format!("{id}={op}"))
        .collect();
    let model_json = loaded.model.to_json();
    let mut parts = vec![model_json.as_str(), if cfg.normalize { "normalized" } else { "raw" }];
    parts.extend(described.iter().map(String::as_str));
    let key = cache_key(&parts);
    let mut cache = TableCache::open(cfg.cache.as_deref(), key.clone())?;
    let observables: Vec<Observable> = loaded
        .observables
        .iter()
        .map(|(id, _, op)| Observable::new(id.clone(), op.clone()))
        .collect();
    let mut tables = Vec::new();
    for n in cfg.sizes() {
        let spec = HamiltonianSpec::new(&loaded.h, n)?;
        tables.push(cache.get_or_compute(n, &ids, || eev_table(&spec, &observables))?);
    }
    Ok(Tables {
        loaded,
        tables,
        key,
        hits: cache.hits,
        misses: cache.misses,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetSummary {
    pub name: String,
    pub coefficients: Vec<f64>,
    pub exponent: Option<ScalingFit>,
    pub exponent_defined: bool,
    pub csv: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservableSummary {
    pub id: String,
    pub spec: String,
    pub operator: String,
    pub residual: f64,
    pub targets: Vec<TargetSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanSummary {
    pub model: String,
    pub model_hash: String,
    pub normalized: bool,
    pub sizes: Vec<usize>,
    pub degree: usize,
    pub observables: Vec<ObservableSummary>,
}

#[derive(Debug, Clone)]
pub struct ScanOutcome {
    pub summary: ScanSummary,
    pub reports: Vec<(String, String, ConvergenceReport)>,
    pub cache_hits: usize,
    pub diagonalizations: usize,
}

pub fn cmd_scan(cfg: &RunConfig) -> Result<ScanOutcome> {
    let t = spectra_for(cfg)?;
    let refs: Vec<&SpectrumTable> = t.tables.iter().collect();
    let h = &t.loaded.h;
    let ctx = ChainContext::new(cfg.nmax, h.window())?;
    let mut summaries = Vec::new();
    let mut reports = Vec::new();
    for (id, spec, op) in &t.loaded.observables {
        let mut targets = vec![
            ("zero".to_string(), TargetFunction::zero()),
            ("eth".to_string(), eth_linear_predictor(h, op, &ctx)?.function),
        ];
        if refs.len() >= 2 {
            targets.push((
                format!("fit{}", cfg.degree),
                fit_target(&refs, id, cfg.degree, None)?,
            ));
        }
        let mut target_summaries = Vec::new();
        for (name, f) in targets {
            let report = convergence_report(&refs, id, &f)?;
            let csv = format!("scan_{id}_{name}.csv");
            target_summaries.push(TargetSummary {
                name: name.clone(),
                coefficients: f.coefficients().to_vec(),
                exponent: report.exponent,
                exponent_defined: report.exponent.is_some(),
                csv,
            });
            reports.push((id.clone(), name, report));
        }
        summaries.push(ObservableSummary {
            id: id.clone(),
            spec: spec.clone(),
            operator: op.to_string(),
            residual: obstruction_residual(h, op, &ctx)?.re,
            targets: target_summaries,
        });
    }
    let summary = ScanSummary {
        model: cfg.model_path.display().to_string(),
        model_hash: t.key.clone(),
        normalized: cfg.normalize,
        sizes: cfg.sizes(),
        degree: cfg.degree,
        observables: summaries,
    };
    if let Some(dir) = &cfg.out {
        fs::create_dir_all(dir)?;
        for (id, name, report) in &reports {
            write_csv(&dir.join(format!("scan_{id}_{name}.csv")), &report.records)?;
        }
        fs::write(dir.join("summary.json"), serde_json::to_string_pretty(&summary)? + "\n")?;
    }
    Ok(ScanOutcome {
        summary,
        reports,
        cache_hits: t.hits,
        diagonalizations: t.misses,
    })
}

pub fn render_scan(o: &ScanOutcome) -> String {
    let mut out = String::new();
    for (id, name, report) in &o.reports {
        let _ = writeln!(out, "{id} / {name}: f = {:?}", report.target.coefficients());
        let _ = writeln!(out, "  {:>3} {:>12} {:>12} {:>12} {:>12} {:>12}", "N", "r_f", "r_f_l1", "weak_eth", "R_f_proxy", "N*r_f");
        for r in &report.records {
            let _ = writeln!(
                out,
                "  {:>3} {:>12.4e} {:>12.4e} {:>12.4e} {:>12.4e} {:>12.4e}",
                r.n,
                r.r_f,
                r.r_f_l1,
                r.weak_eth,
                r.r_f_proxy,
                r.n as f64 * r.r_f
            );
        }
        match &report.exponent {
            Some(e) => {
                let _ = writeln!(out, "  exponent {:.3} ± {:.3}", e.slope, e.stderr);
            }
            None => out.push_str("  exponent undefined (r_f vanishes or too few sizes)\n"),
        }
    }
    let _ = writeln!(
        out,
        "cache: {} hits, {} diagonalizations",
        o.cache_hits, o.diagonalizations
    );
    out
}

pub struct FitOutcome {
    pub fits: Vec<(String, TargetFunction)>,
    pub cache_hits: usize,
    pub diagonalizations: usize,
}

pub fn cmd_fit(cfg: &RunConfig) -> Result<FitOutcome> {
    let t = spectra_for(cfg)?;
    let refs: Vec<&SpectrumTable> = t.tables.iter().collect();
    let mut fits = Vec::new();
    for (id, _, _) in &t.loaded.observables {
        fits.push((id.clone(), fit_target(&refs, id, cfg.degree, None)?));
    }
    if let Some(dir) = &cfg.out {
        fs::create_dir_all(dir)?;
        let json: Vec<_> = fits
            .iter()
            .map(|(id, f)| serde_json::json!({ "id": id, "coefficients": f.coefficients() }))
            .collect();
        fs::write(dir.join("fit.json"), serde_json::to_string_pretty(&json)? + "\n")?;
    }
    Ok(FitOutcome {
        fits,
        cache_hits: t.hits,
        diagonalizations: t.misses,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FfRow {
    #[serde(rename = "N")]
    pub n: usize,
    pub r_f: f64,
    pub r_f_l1: f64,
    pub weak_eth: f64,
    #[serde(rename = "R_f_proxy")]
    pub r_f_proxy: f64,
    pub stderr: f64,
    pub samples: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExactCheck {
    pub n: usize,
    pub exact: f64,
    pub sampled: f64,
    pub sigmas: f64,
}

#[derive(Debug, Clone)]
pub struct FfOutcome {
    pub rows: Vec<FfRow>,
    pub checks: Vec<ExactCheck>,
    pub slope: f64,
}

fn ff_observable(spec: &str, chain: &TfimChain) -> Result<Bilinear> {
    if spec.trim() == "h" {
        return Ok(Bilinear::from_local(&chain.local_term())?);
    }
    let op: LocalOperator = spec
        .parse()
        .with_context(|| format!("parsing observable `{spec}`"))?;
    Ok(Bilinear::from_local(&op)?)
}

pub fn cmd_ff_scan(cfg: &FfConfig) -> Result<FfOutcome> {
    let mut rows = Vec::new();
    let mut checks = Vec::new();
    let mut slope = f64::NAN;
    for &n in &cfg.sizes {
        let chain = TfimChain::with_cap(n, cfg.g, cfg.mode_cap)?.normalized();
        let obs = ff_observable(&cfg.observable, &chain)?;
        // The slope is N-independent; evaluate it on the smallest valid chain.
        let ctx = ChainContext::new(ChainContext::linear_trace_min_n(2, 2), 2)?;
        let predictor = eth_linear_predictor(&chain.local_term(), &obs.to_local(), &ctx)?;
        slope = predictor.slope;
        let est = sample_r_f(&chain, obs, &predictor.function, cfg.samples, cfg.seed)?;
        if n <= 12 {
            let (exact, _, _) = chain.exact_statistics(obs, &predictor.function)?;
            let sigmas = if est.stderr > 0.0 {
                (est.estimate - exact).abs() / est.stderr
            } else if est.estimate == exact {
                0.0
            } else {
                f64::INFINITY
            };
            if sigmas > 3.0 {
                eprintln!("warning: N = {n} sample deviates from enumeration by {sigmas:.1} sigma");
            }
            checks.push(ExactCheck {
                n,
                exact,
                sampled: est.estimate,
                sigmas,
            });
        }
        rows.push(FfRow {
            n,
            r_f: est.estimate,
            r_f_l1: est.l1,
            weak_eth: est.weak_eth,
            r_f_proxy: est.estimate,
            stderr: est.stderr,
            samples: est.samples,
        });
    }
    if rows.len() >= 2 {
        let values: Vec<f64> = rows.iter().map(|r| r.r_f).collect();
        for (row, p) in rows.iter_mut().zip(r_f_proxy(&values)?) {
            row.r_f_proxy = p;
        }
    }
    if let Some(dir) = &cfg.out {
        fs::create_dir_all(dir)?;
        write_csv(&dir.join("ff_scan.csv"), &rows)?;
    }
    Ok(FfOutcome { rows, checks, slope })
}

pub fn render_ff(o: &FfOutcome) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "linear predictor slope {:.6}", o.slope);
    let _ = writeln!(out, "{:>5} {:>12} {:>12} {:>12} {:>10}", "N", "r_f", "stderr", "N*r_f", "samples");
    for r in &o.rows {
        let _ = writeln!(
            out,
            "{:>5} {:>12.5e} {:>12.3e} {:>12.5} {:>10}",
            r.n,
            r.r_f,
            r.stderr,
            r.n as f64 * r.r_f,
            r.samples
        );
    }
    for c in &o.checks {
        let _ = writeln!(
            out,
            "N = {}: sampled {:.6} vs enumerated {:.6} ({:.2} sigma)",
            c.n, c.sampled, c.exact, c.sigmas
        );
    }
    out
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_path(path).with_context(|| format!("opening {}", path.display()))?;
    r.deserialize()
        .map(|row| row.map_err(|e| anyhow!("{}: {e}", path.display())))
        .collect()
}

/// Runs one command and returns what it prints.
pub fn run(cli: Cli) -> Result<String> {
    match cli.command {
        Command::Traces(a) => Ok(render_traces(&cmd_traces(&RunConfig::from_args(&a)?)?)),
        Command::Canonicalize(a) => {
            let mut out = String::new();
            for (input, op) in cmd_canonicalize(&a.obs)? {
                let _ = writeln!(out, "{input}  ->  {op}");
            }
            Ok(out)
        }
        Command::Witness(a) => {
            let w = cmd_witness(&a)?;
            Ok(format!(
                "witness {} ({}-local)\ntr(G1 A)/d = {}\ntr(HA)/d = {}\nresidual = {}\n",
                w.string, w.locality, w.g1_overlap, w.tr_ha, w.residual
            ))
        }
        Command::Scan(a) => Ok(render_scan(&cmd_scan(&RunConfig::from_args(&a)?)?)),
        Command::Fit(a) => {
            let o = cmd_fit(&RunConfig::from_args(&a)?)?;
            let mut out = String::new();
            for (id, f) in &o.fits {
                let _ = writeln!(out, "{id}: {:?}", f.coefficients());
            }
            let _ = writeln!(out, "cache: {} hits, {} diagonalizations", o.cache_hits, o.diagonalizations);
            Ok(out)
        }
        Command::FfScan(a) => {
            if a.samples < 100 {
                bail!("--samples must be at least 100, got {}", a.samples);
            }
            Ok(render_ff(&cmd_ff_scan(&FfConfig::from_args(&a)?)?))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn observable_specs_resolve() {
        let h: LocalOperator = "Z1Z2 + 1.05*X1 + 0.5*Z1".parse().unwrap();
        let scaled = h.scaled(0.5);
        let (id, op) = resolve_observable("h", 0, &h, &scaled).unwrap();
        assert_eq!((id.as_str(), op), ("h", scaled.clone()));
        let (id, op) = resolve_observable("witness:auto", 1, &h, &scaled).unwrap();
        assert_eq!(id, "witness");
        assert_eq!(op.to_string(), "Z1Z2Z4Z5");
        let (id, _) = resolve_observable(" X1 ", 2, &h, &scaled).unwrap();
        assert_eq!(id, "obs2");
        assert!(resolve_observable("Q1", 3, &h, &scaled).is_err());
    }

    #[test]
    fn cli_parses_repeated_observables() {
        let cli = Cli::try_parse_from([
            "eevconv", "scan", "--model", "m.json", "--obs", "h", "--obs", "witness:auto", "--nmax", "12",
        ])
        .unwrap();
        match cli.command {
            Command::Scan(a) => {
                assert_eq!(a.obs, vec!["h", "witness:auto"]);
                let cfg = RunConfig::from_args(&a).unwrap();
                assert_eq!(cfg.sizes(), (6..=12).collect::<Vec<_>>());
                assert!(cfg.cache.is_some());
            }
            other => panic!("{other:?}"),
        }
        let ff = Cli::try_parse_from(["eevconv", "ff-scan", "--g", "0.5", "--ns", "16,32"]).unwrap();
        match ff.command {
            Command::FfScan(a) => assert_eq!(FfConfig::from_args(&a).unwrap().sizes, vec![16, 32]),
            other => panic!("{other:?}"),
        }
    }
}
