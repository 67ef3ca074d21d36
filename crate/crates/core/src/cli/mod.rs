//! Command-line front end: config parsing, command dispatch and report files.
//!
//! Data goes to files in the configured output directory; diagnostics go to
//! standard error. Exit codes: 0 success, 1 validation failure, 2 solver
//! failure, 3 config error.

mod config;

use std::fmt::Write as _;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

use crate::corrector::{check_eps_list, convergence_study, error_report_with, ConvergenceReport};
use crate::expr::{parse, Var};
use crate::fem::solve_thin_neumann;
use crate::geometry::{build_partition, validate_profile, ValidationReport};
use crate::homogenize::{compute_effective, run_pipeline};
use crate::unfolding::{
    adjoint_gap, char_gap, left_inverse_residual, uci_gap, ExprField, FnField, ThinDomain, ThinQuadrature,
    UnfoldGrid,
};

pub use config::{parse_config, parse_config_str, ConfigError, Discretization, Output, OutputFormat, RunConfig};

/// Lattice density used by every command's profile check.
pub const VALIDATION_DENSITY: usize = 256;
/// Critical-set tolerance used by every command's profile check.
pub const VALIDATION_TOL: f64 = 1e-3;

#[derive(Debug, Parser)]
#[command(name = "thinhom", version, about = "Homogenization on thin domains with locally periodic oscillating boundaries")]
pub struct Cli {
    /// Sectioned key = value run configuration.
    #[arg(long)]
    pub config: PathBuf,
    /// Worker threads; 0 picks the number of cores.
    #[arg(long, default_value_t = 0)]
    pub threads: usize,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Debug, PartialEq, Subcommand)]
pub enum Command {
    /// Check bounds, periodicity and the critical set of the profile.
    Validate,
    /// Write the l(x)-partition for each eps.
    Partition,
    /// Solve cell problems and summarize them.
    Cell {
        /// Slow positions; defaults to the midpoint anchors.
        #[arg(long, value_delimiter = ',')]
        at: Vec<f64>,
    },
    /// Write the effective coefficient table.
    Effective,
    /// Solve the thin-domain problem for each eps.
    SolveDirect,
    /// Solve the one-dimensional limit problem.
    SolveHomog,
    /// Error report for each eps.
    Correctors,
    /// Convergence study over the eps sweep.
    Study,
    /// Check the unfolding identities for each eps.
    UnfoldCheck,
}

#[derive(Debug)]
pub enum Failure {
    Config(String),
    Validation(String),
    Solver(String),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Validation(_) => 1,
            Failure::Solver(_) => 2,
            Failure::Config(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Config(m) | Failure::Validation(m) | Failure::Solver(m) => m,
        }
    }
}

fn solver<E: std::fmt::Display>(e: E) -> Failure {
    Failure::Solver(e.to_string())
}

/// Converts CSV text with a header row into a JSON array of objects. Numeric
/// cells become numbers, empty cells `null`.
pub fn csv_to_json(csv: &str) -> String {
    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().unwrap_or("").split(',').collect();
    let rows: Vec<serde_json::Value> = lines
        .map(|line| {
            let object = header
                .iter()
                .zip(line.split(','))
                .map(|(k, v)| {
                    let value = if v.is_empty() {
                        serde_json::Value::Null
                    } else if let Some(n) = v.parse::<f64>().ok().and_then(serde_json::Number::from_f64) {
                        serde_json::Value::Number(n)
                    } else {
                        serde_json::Value::String(v.to_string())
                    };
                    (k.to_string(), value)
                })
                .collect();
            serde_json::Value::Object(object)
        })
        .collect();
    let mut out = serde_json::to_string_pretty(&rows).unwrap_or_default();
    out.push('\n');
    out
}

struct Writer<'a> {
    output: &'a Output,
}

impl Writer<'_> {
    fn write(&self, stem: &str, csv: &str) -> Result<PathBuf, Failure> {
        std::fs::create_dir_all(&self.output.directory)
            .map_err(|e| Failure::Config(format!("cannot create {}: {e}", self.output.directory.display())))?;
        let path = self
            .output
            .directory
            .join(format!("{stem}.{}", self.output.format.extension()));
        let body = match self.output.format {
            OutputFormat::Csv => csv.to_string(),
            OutputFormat::Json => csv_to_json(csv),
        };
        std::fs::write(&path, body).map_err(|e| Failure::Config(format!("cannot write {}: {e}", path.display())))?;
        eprintln!("wrote {}", path.display());
        Ok(path)
    }
}

fn validation_csv(report: &ValidationReport) -> String {
    let mut out = String::from("key,value\n");
    let rows: [(&str, String); 12] = [
        ("lattice_density", report.lattice_density.to_string()),
        ("g_min", report.g_range.0.to_string()),
        ("g_max", report.g_range.1.to_string()),
        ("l_min", report.l_range.0.to_string()),
        ("l_max", report.l_range.1.to_string()),
        ("bound_violations", report.bound_violations.len().to_string()),
        ("periodicity_residual", report.periodicity_residual.to_string()),
        ("periodicity_tolerance", report.periodicity_tolerance.to_string()),
        ("critical_fraction", report.critical_fraction.to_string()),
        ("critical_flagged", report.critical_flagged.to_string()),
        ("scan_step_per_eps", report.scan_step_per_eps.to_string()),
        ("fatal", report.is_fatal().to_string()),
    ];
    for (k, v) in rows {
        let _ = writeln!(out, "{k},{v}");
    }
    out
}

fn eps_stem(prefix: &str, eps: f64) -> String {
    format!("{prefix}_eps{eps}")
}

fn require_eps(config: &RunConfig, min_len: usize) -> Result<&[f64], Failure> {
    check_eps_list(&config.eps, min_len).map_err(|e| Failure::Config(format!("[study] eps: {e}")))?;
    Ok(&config.eps)
}

fn report_csv(report: &ConvergenceReport, timing: bool) -> String {
    for row in &report.rows {
        eprintln!("eps = {}: {:.3} s", row.eps, row.seconds);
        if !row.l2_consistent() {
            eprintln!("eps = {}: L2 part of the corrected error violates the triangle-inequality check", row.eps);
        }
    }
    for warning in report.non_decreasing() {
        eprintln!("warning: {warning}");
    }
    report.to_csv(timing)
}

fn unfold_check(config: &RunConfig) -> Result<(String, bool), Failure> {
    let spec = &config.spec;
    let d = &config.discretization;
    let (nx, n1, n2) = d.grid;
    let grid = UnfoldGrid::new(spec, nx, n1, n2).map_err(solver)?;
    let field_expr = |src: &str| parse(src, &[Var::X, Var::Y]).map_err(|e| Failure::Config(e.to_string()));
    let mut out = String::from("eps,check,value,tolerance,pass\n");
    let mut all = true;
    for &eps in require_eps(config, 1)? {
        let partition = build_partition(spec, eps).map_err(solver)?;
        let domain = ThinDomain::new(spec.clone(), eps);
        let quad = ThinQuadrature::new(&domain, &partition, d.n_per.max(n1), n2).map_err(solver)?;
        let one = ExprField { domain: domain.clone(), expr: field_expr("1")? };
        let x = ExprField { domain: domain.clone(), expr: field_expr("x")? };
        let phi = ExprField { domain: domain.clone(), expr: field_expr("1 + x")? };
        let psi = |x: f64, y1: f64, y2: f64| (std::f64::consts::PI * x).cos() * (1.0 + y1) * (1.0 + y2);
        let points = partition.points.clone();
        let step = FnField::new(domain.clone(), move |x, _| {
            let k = points.partition_point(|&t| t <= x).saturating_sub(1);
            1.0 + (k as f64).sin()
        });
        let size = n1.min(n2).min(nx) as f64;
        let checks = [
            ("uci_gap_one", uci_gap(&one, &partition, &grid, &quad).map_err(solver)?.gap, 1e-2),
            ("uci_gap_x", uci_gap(&x, &partition, &grid, &quad).map_err(solver)?.gap, 1e-2),
            (
                "adjoint_gap",
                adjoint_gap(&phi, &psi, &partition, &grid, &quad, d.nq).map_err(solver)?.gap,
                1e-2,
            ),
            (
                "left_inverse_residual",
                left_inverse_residual(&step, &partition, &grid, &quad, d.nq).map_err(solver)?,
                1e-14,
            ),
            (
                "char_gap",
                char_gap(&domain, &partition, &grid).map_err(solver)?,
                spec.bounds.l1 * spec.bounds.g1 * (eps + 1.0 / size),
            ),
        ];
        for (name, value, tol) in checks {
            let pass = value <= tol;
            all &= pass;
            let _ = writeln!(out, "{eps},{name},{value},{tol},{pass}");
        }
    }
    Ok((out, all))
}

/// Runs one command; every command first checks the profile.
pub fn dispatch(command: &Command, config: &RunConfig) -> Result<(), Failure> {
    let spec = &config.spec;
    let d = &config.discretization;
    let writer = Writer { output: &config.output };
    let report = validate_profile(spec, VALIDATION_DENSITY, VALIDATION_TOL).map_err(solver)?;
    if report.critical_flagged {
        eprintln!(
            "warning: {:.2}% of lattice points lie near the critical set x l'(x) = l(x)",
            100.0 * report.critical_fraction
        );
    }
    if report.is_fatal() {
        if *command == Command::Validate {
            writer.write("validate", &validation_csv(&report))?;
        }
        return Err(Failure::Validation(report.fatal_reasons().join("; ")));
    }
    match command {
        Command::Validate => {
            writer.write("validate", &validation_csv(&report))?;
            eprintln!("profile is valid; critical fraction {}", report.critical_fraction);
        }
        Command::Partition => {
            for &eps in require_eps(config, 1)? {
                let p = build_partition(spec, eps).map_err(solver)?;
                let violations = p.invariant_violations(spec, 1e-9);
                if !violations.is_empty() {
                    return Err(Failure::Solver(violations.join("; ")));
                }
                writer.write(&eps_stem("partition", eps), &p.to_csv(spec).map_err(solver)?)?;
            }
        }
        Command::Cell { at } => {
            let anchors: Vec<f64> = if at.is_empty() {
                (0..d.anchors).map(|j| (j as f64 + 0.5) / d.anchors as f64).collect()
            } else {
                at.clone()
            };
            if let Some(bad) = anchors.iter().find(|x| !(**x > 0.0 && **x < 1.0)) {
                return Err(Failure::Config(format!("cell position {bad} is outside (0, 1)")));
            }
            let mut out = String::from("x,l,p,r,energy_r,max_abs_X,mean_X,iterations,relative_residual\n");
            for x in anchors {
                let c = crate::fem::solve_cell(spec, x, d.n1, d.n2, &d.solver()).map_err(solver)?;
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{},{},{},{}",
                    c.anchor_x,
                    c.period,
                    c.p,
                    c.r,
                    c.energy_r,
                    c.max_abs(),
                    c.mean(),
                    c.stats.iterations,
                    c.stats.relative_residual
                );
            }
            writer.write("cell", &out)?;
        }
        Command::Effective => {
            let (table, _) = compute_effective(spec, &config.f, &d.pipeline()).map_err(solver)?;
            for (x, slope) in table.r_slopes() {
                eprintln!("r'({x}) ~ {slope}");
            }
            writer.write("effective", &table.to_csv())?;
        }
        Command::SolveDirect => {
            for &eps in require_eps(config, 1)? {
                let p = build_partition(spec, eps).map_err(solver)?;
                let u = solve_thin_neumann(spec, &p, &config.f, d.n_per, d.ny, &d.solver()).map_err(solver)?;
                eprintln!(
                    "eps = {eps}: {} unknowns, {} iterations, relative residual {:e}",
                    u.values.len(),
                    u.stats.iterations,
                    u.stats.relative_residual
                );
                let mut out = String::from("x,y,u\n");
                for (v, value) in u.mesh.vertices.iter().zip(&u.values) {
                    let _ = writeln!(out, "{},{},{}", v[0], v[1], value);
                }
                writer.write(&eps_stem("direct", eps), &out)?;
            }
        }
        Command::SolveHomog => {
            let run = run_pipeline(spec, &config.f, &d.pipeline()).map_err(solver)?;
            let mut out = String::from("x,u,du\n");
            for (x, u) in run.homog.nodes.iter().zip(&run.homog.u) {
                let _ = writeln!(out, "{x},{u},{}", run.homog.recovered_slope(*x));
            }
            writer.write("homog", &out)?;
        }
        Command::Correctors => {
            let eps = require_eps(config, 1)?;
            let run = run_pipeline(spec, &config.f, &d.pipeline()).map_err(solver)?;
            let rows = eps
                .iter()
                .map(|&e| error_report_with(spec, &config.f, &run, e, &d.study()))
                .collect::<Result<Vec<_>, _>>()
                .map_err(solver)?;
            let report = ConvergenceReport { rows };
            writer.write("correctors", &report_csv(&report, config.output.timing))?;
        }
        Command::Study => {
            let eps = require_eps(config, 3)?;
            let report = convergence_study(spec, &config.f, eps, &d.study()).map_err(solver)?;
            if !report.invalid_rows().is_empty() {
                return Err(Failure::Solver(format!("non-finite errors at eps {:?}", report.invalid_rows())));
            }
            writer.write("study", &report_csv(&report, config.output.timing))?;
        }
        Command::UnfoldCheck => {
            let (csv, all) = unfold_check(config)?;
            writer.write("unfold_check", &csv)?;
            if !all {
                return Err(Failure::Validation("an unfolding check exceeded its tolerance".into()));
            }
        }
    }
    Ok(())
}

/// Parses the config, sizes the thread pool and dispatches; returns the exit code.
pub fn run(cli: &Cli) -> i32 {
    let config = match parse_config(&cli.config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return 3;
        }
    };
    if cli.threads > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build_global() {
            eprintln!("warning: could not size thread pool: {e}");
        }
    }
    match dispatch(&cli.command, &config) {
        Ok(()) => 0,
        Err(f) => {
            eprintln!("error: {}", f.message());
            f.exit_code()
        }
    }
}
