//! Command-line front end: fitting, simulation experiments, winding-number
//! phase diagrams, and the wind-direction case study.
//!
//! Exit codes: 0 success, 2 input or configuration error, 3 fit did not
//! converge under --strict, 4 required data file missing.

use clap::{Args, Parser, Subcommand};
use hmreg::config::{Experiment, RunConfig};
use hmreg::manifold::ManifoldKind;
use hmreg::sim::{
    cross_validate, fmt_float, run_curvature_experiment, run_phase_experiment,
    run_rate_experiment, CvConfig, Method, PhaseConfig,
};
use hmreg::spline::{fit, Dataset, FitConfig};
use hmreg::wind::{evaluate_wind, parse_isd, BlockSplit, IsdColumns};
use std::io::Write;
use std::process::ExitCode;

const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Parser)]
#[command(name = "hmreg", version, about = "Manifold-valued regression toolkit")]
struct Cli {
    /// Number of worker threads for replication loops (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit the penalized estimator to a CSV of (t, coordinates) rows.
    Fit(FitArgs),
    /// Run a rate or curvature experiment from a config file.
    Simulate(SimulateArgs),
    /// Run the winding-number recovery experiment.
    Phase(PhaseArgs),
    /// Evaluate all methods on wind-direction data.
    Wind(WindArgs),
}

#[derive(Args)]
struct FitArgs {
    /// Input CSV with header `t,<coordinates...>`.
    #[arg(long)]
    data: String,
    /// Manifold tag: circle[:L=...], sphere[:r=...], h2, spd2, so3,
    /// torus2[:L1=...,L2=...], euclid:d=N.
    #[arg(long)]
    manifold: String,
    /// Penalty weight; must be positive.
    #[arg(long, conflicts_with = "cv")]
    lambda: Option<f64>,
    /// Select the penalty constant by 5-fold cross validation.
    #[arg(long)]
    cv: bool,
    /// Output JSON path.
    #[arg(long)]
    out: String,
    /// Also write a dense evaluation CSV with this many grid points.
    #[arg(long)]
    grid: Option<usize>,
    /// Exit with code 3 when the fit does not converge.
    #[arg(long)]
    strict: bool,
}

#[derive(Args)]
struct SimulateArgs {
    /// Run config file (experiment = rate or curvature).
    #[arg(long)]
    config: String,
    /// Override the per-replication rows CSV path from the config.
    #[arg(long)]
    out_rows: Option<String>,
    /// Override the aggregated summary CSV path from the config.
    #[arg(long)]
    out_summary: Option<String>,
}

#[derive(Args)]
struct PhaseArgs {
    /// Run config file (experiment = phase). Flags below override it.
    #[arg(long)]
    config: Option<String>,
    /// Winding numbers 1..=kmax to test.
    #[arg(long)]
    kmax: Option<i64>,
    /// Sample sizes, comma separated.
    #[arg(long, value_delimiter = ',')]
    ngrid: Vec<usize>,
    /// Penalty constants c in lambda = c n^{rate}, comma separated.
    #[arg(long, value_delimiter = ',')]
    clambda: Vec<f64>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Recovery-fraction table output CSV.
    #[arg(long)]
    out: String,
    /// Optional per-replication rows CSV.
    #[arg(long)]
    out_rows: Option<String>,
}

#[derive(Args)]
struct WindArgs {
    /// Wind CSV in the ISD schema (DATE, WND columns).
    #[arg(long)]
    data: String,
    /// Metrics table output CSV.
    #[arg(long)]
    out: String,
    /// Subset of methods, comma separated (default: all five).
    #[arg(long, value_delimiter = ',')]
    methods: Vec<String>,
}

enum CliError {
    Input(String),
    NotConverged,
    MissingData(String),
}

impl From<hmreg::FitError> for CliError {
    fn from(e: hmreg::FitError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<hmreg::GeomError> for CliError {
    fn from(e: hmreg::GeomError) -> Self {
        CliError::Input(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(jobs) = cli.jobs {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global();
    }
    let result = match cli.command {
        Command::Fit(args) => cmd_fit(&args),
        Command::Simulate(args) => cmd_simulate(&args),
        Command::Phase(args) => cmd_phase(&args),
        Command::Wind(args) => cmd_wind(&args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Input(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::NotConverged) => {
            eprintln!("error: fit did not converge (strict mode)");
            ExitCode::from(3)
        }
        Err(CliError::MissingData(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(4)
        }
    }
}

/// FNV-1a hash of whatever identifies the run, for provenance headers.
fn fnv(parts: &[&str]) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for p in parts {
        for b in p.bytes().chain([0u8]) {
            h ^= b as u64;
            h = h.wrapping_mul(0x100000001b3);
        }
    }
    h
}

fn provenance_line(config_hash: u64, seed: u64) -> String {
    format!("# hmreg v{VERSION} config_hash={config_hash:016x} seed={seed}")
}

fn write_file(path: &str, contents: &str) -> Result<(), CliError> {
    let mut f = std::fs::File::create(path)
        .map_err(|e| CliError::Input(format!("cannot write {path}: {e}")))?;
    f.write_all(contents.as_bytes())
        .map_err(|e| CliError::Input(format!("cannot write {path}: {e}")))
}

fn read_fit_csv(path: &str, kind: &ManifoldKind) -> Result<Dataset, CliError> {
    let file = std::fs::File::open(path)
        .map_err(|e| CliError::Input(format!("cannot read {path}: {e}")))?;
    let mut csv = csv::Reader::from_reader(file);
    let mut obs = Vec::new();
    for row in csv.records() {
        let row = row.map_err(|e| CliError::Input(format!("{path}: {e}")))?;
        let mut vals = Vec::with_capacity(row.len());
        for field in row.iter() {
            vals.push(
                field
                    .trim()
                    .parse::<f64>()
                    .map_err(|_| CliError::Input(format!("{path}: bad number {field}")))?,
            );
        }
        if vals.len() != 1 + kind.ambient_dim() {
            return Err(CliError::Input(format!(
                "{path}: expected 1 + {} columns, found {}",
                kind.ambient_dim(),
                vals.len()
            )));
        }
        let point = kind.project_ambient(&vals[1..])?;
        obs.push((vals[0], point));
    }
    Ok(Dataset::from_observations(kind.clone(), obs)?)
}

fn cmd_fit(args: &FitArgs) -> Result<(), CliError> {
    let kind = ManifoldKind::parse_tag(&args.manifold)?;
    let data = read_fit_csv(&args.data, &kind)?;
    let (lambda, selected_by_cv) = if args.cv {
        let out = cross_validate(&data, &CvConfig::default(), Method::Proposed)?;
        let n = data.n_total() as f64;
        (out.selected * n.powf(-2.0 / 3.0), Some(out.selected))
    } else {
        let lambda = args
            .lambda
            .ok_or_else(|| CliError::Input("provide --lambda or --cv".into()))?;
        if lambda <= 0.0 {
            return Err(CliError::Input("lambda must be positive".into()));
        }
        (lambda, None)
    };
    let (spline, report) = fit(&data, lambda, &FitConfig::default())?;
    if args.strict && !report.converged {
        return Err(CliError::NotConverged);
    }

    let hash = fnv(&[&args.data, &args.manifold, &format!("{lambda:.17e}")]);
    let nodal: Vec<Vec<f64>> = spline.nodal().iter().map(|p| p.coords().to_vec()).collect();
    let json = serde_json::json!({
        "provenance": {
            "tool": format!("hmreg v{VERSION}"),
            "config_hash": format!("{hash:016x}"),
            "seed": 0,
        },
        "manifold": kind.to_tag(),
        "lambda": lambda,
        "cv_constant": selected_by_cv,
        "objective": report.objective,
        "grad_norm": report.grad_norm,
        "iterations": report.iterations,
        "converged": report.converged,
        "knots": spline.knots(),
        "nodal": nodal,
    });
    write_file(&args.out, &format!("{}\n", serde_json::to_string_pretty(&json).unwrap()))?;

    if let Some(g) = args.grid {
        let g = g.max(2);
        let mut out = String::new();
        out.push_str(&provenance_line(hash, 0));
        out.push('\n');
        out.push('t');
        for j in 0..kind.ambient_dim() {
            out.push_str(&format!(",x{j}"));
        }
        out.push('\n');
        for i in 0..g {
            let t = i as f64 / (g - 1) as f64;
            let p = spline.evaluate(t)?;
            out.push_str(&fmt_float(t));
            for c in p.coords() {
                out.push(',');
                out.push_str(&fmt_float(*c));
            }
            out.push('\n');
        }
        let grid_path = format!("{}.grid.csv", args.out.trim_end_matches(".json"));
        write_file(&grid_path, &out)?;
    }
    Ok(())
}

fn cmd_simulate(args: &SimulateArgs) -> Result<(), CliError> {
    let cfg = RunConfig::load(&args.config)?;
    let hash = cfg.hash();
    match cfg.experiment()? {
        Experiment::Rate => {
            let rate = cfg.to_rate_config()?;
            let report = run_rate_experiment(&rate);
            for f in &report.failures {
                eprintln!("warning: replication failed: {f}");
            }
            let rows_path = args
                .out_rows
                .clone()
                .or_else(|| cfg.get("out_rows").map(String::from))
                .ok_or_else(|| CliError::Input("no rows output path (out_rows)".into()))?;
            let mut rows = String::new();
            rows.push_str(&provenance_line(hash, rate.seed));
            rows.push_str("\ncurve,manifold,method,n,rep,mise,selected\n");
            for r in &report.rows {
                rows.push_str(&format!(
                    "{},{},{},{},{},{},{}\n",
                    r.curve,
                    r.manifold,
                    r.method,
                    r.n,
                    r.rep,
                    fmt_float(r.mise),
                    fmt_float(r.selected)
                ));
            }
            write_file(&rows_path, &rows)?;
            if let Some(summary_path) =
                args.out_summary.clone().or_else(|| cfg.get("out_summary").map(String::from))
            {
                let mut s = String::new();
                s.push_str(&provenance_line(hash, rate.seed));
                s.push_str("\ncurve,method,n,mise_mean,mise_se,reps\n");
                for r in &report.summaries {
                    s.push_str(&format!(
                        "{},{},{},{},{},{}\n",
                        r.curve,
                        r.method,
                        r.n,
                        fmt_float(r.mise_mean),
                        fmt_float(r.mise_se),
                        r.reps
                    ));
                }
                s.push_str("curve,method,slope\n");
                for r in &report.slopes {
                    s.push_str(&format!("{},{},{}\n", r.curve, r.method, fmt_float(r.slope)));
                }
                write_file(&summary_path, &s)?;
            }
        }
        Experiment::Curvature => {
            let curv = cfg.to_curvature_config()?;
            let report = run_curvature_experiment(&curv);
            for f in &report.failures {
                eprintln!("warning: replication failed: {f}");
            }
            let rows_path = args
                .out_rows
                .clone()
                .or_else(|| cfg.get("out_rows").map(String::from))
                .ok_or_else(|| CliError::Input("no rows output path (out_rows)".into()))?;
            let mut rows = String::new();
            rows.push_str(&provenance_line(hash, curv.seed));
            rows.push_str("\ncurve,manifold,method,n,rep,mise,selected\n");
            for r in &report.rows {
                rows.push_str(&format!(
                    "{},{},{},{},{},{},{}\n",
                    r.curve,
                    r.manifold,
                    r.method,
                    r.n,
                    r.rep,
                    fmt_float(r.mise),
                    fmt_float(r.selected)
                ));
            }
            write_file(&rows_path, &rows)?;
            if let Some(summary_path) =
                args.out_summary.clone().or_else(|| cfg.get("out_summary").map(String::from))
            {
                let mut s = String::new();
                s.push_str(&provenance_line(hash, curv.seed));
                s.push_str("\nkappa,method,n,normalized_mise_mean,normalized_mise_se,reps\n");
                for r in &report.summaries {
                    s.push_str(&format!(
                        "{},{},{},{},{},{}\n",
                        fmt_float(r.kappa),
                        r.method,
                        r.n,
                        fmt_float(r.normalized_mise_mean),
                        fmt_float(r.normalized_mise_se),
                        r.reps
                    ));
                }
                write_file(&summary_path, &s)?;
            }
        }
        Experiment::Phase => {
            return Err(CliError::Input("phase configs run under the phase subcommand".into()));
        }
    }
    Ok(())
}

fn cmd_phase(args: &PhaseArgs) -> Result<(), CliError> {
    let mut phase = match &args.config {
        Some(path) => RunConfig::load(path)?.to_phase_config()?,
        None => PhaseConfig::default(),
    };
    if let Some(kmax) = args.kmax {
        if kmax < 1 {
            return Err(CliError::Input("kmax must be at least 1".into()));
        }
        phase.ks = (1..=kmax).collect();
    }
    if !args.ngrid.is_empty() {
        phase.ns = args.ngrid.clone();
    }
    if !args.clambda.is_empty() {
        phase.c_lambdas = args.clambda.clone();
    }
    if let Some(s) = args.sigma {
        phase.sigma = s;
    }
    if let Some(r) = args.reps {
        phase.replications = r;
    }
    if let Some(s) = args.seed {
        phase.seed = s;
    }
    let report = run_phase_experiment(&phase);
    for f in &report.failures {
        eprintln!("warning: replication failed: {f}");
    }
    let hash = fnv(&[&format!("{phase:?}")]);
    let mut cells = String::new();
    cells.push_str(&provenance_line(hash, phase.seed));
    cells.push_str("\nk,n,c_lambda,recovery,reps\n");
    for c in &report.cells {
        cells.push_str(&format!(
            "{},{},{},{},{}\n",
            c.k,
            c.n,
            fmt_float(c.c_lambda),
            fmt_float(c.recovery),
            c.reps
        ));
    }
    write_file(&args.out, &cells)?;
    if let Some(rows_path) = &args.out_rows {
        let mut rows = String::new();
        rows.push_str(&provenance_line(hash, phase.seed));
        rows.push_str("\nk,n,c_lambda,rep,recovered,raw_winding,class,dirichlet\n");
        for r in &report.rows {
            rows.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                r.k,
                r.n,
                fmt_float(r.c_lambda),
                r.rep,
                r.recovered,
                fmt_float(r.raw_winding),
                r.class.map(|c| c.to_string()).unwrap_or_default(),
                fmt_float(r.dirichlet)
            ));
        }
        write_file(rows_path, &rows)?;
    }
    Ok(())
}

fn cmd_wind(args: &WindArgs) -> Result<(), CliError> {
    let file = match std::fs::File::open(&args.data) {
        Ok(f) => f,
        Err(_) => {
            return Err(CliError::MissingData(format!(
                "wind data file {} not found.\n\
                 Download station USAF 725300 (Chicago O'Hare), year 2023, from\n\
                 https://www.ncei.noaa.gov/data/global-hourly/access/2023/\n\
                 (see data/wind/README.md), or use the shipped fixture\n\
                 data/wind/fixture.csv.",
                args.data
            )));
        }
    };
    let (records, summary) = parse_isd(file, &IsdColumns::default())?;
    eprintln!(
        "parsed {} records ({} calm, {} missing, {} malformed, {} sub-hourly dropped)",
        summary.kept, summary.calm, summary.missing, summary.malformed, summary.subhourly_dropped
    );
    let methods: Vec<Method> = if args.methods.is_empty() {
        Method::ALL.to_vec()
    } else {
        args.methods
            .iter()
            .map(|m| Method::parse(m))
            .collect::<Result<Vec<_>, _>>()?
    };
    let split = BlockSplit::new(records.len())?;
    let metrics = evaluate_wind(&records, &methods, &split)?;
    let hash = fnv(&[&args.data]);
    let mut out = String::new();
    out.push_str(&provenance_line(hash, 0));
    out.push_str("\nmethod,msge,rmge_deg,median_deg,selected,n_train,n_test\n");
    for m in &metrics {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            m.method,
            fmt_float(m.msge),
            fmt_float(m.rmge_deg),
            fmt_float(m.median_deg),
            fmt_float(m.selected),
            m.n_train,
            m.n_test
        ));
    }
    write_file(&args.out, &out)
}
