use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::corrector::{check_eps_list, StudyParams};
use crate::expr::{parse, Expr, ParseError, Var};
use crate::fem::SolverOptions;
use crate::geometry::{Bounds, GeometryError, ProfileSpec};
use crate::homogenize::PipelineParams;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("line {line}: {message}")]
    Line { line: usize, message: String },
    #[error("missing required key `{key}` in [{section}]")]
    Missing { section: &'static str, key: &'static str },
    #[error("[{section}] {key}: {message}")]
    Value { section: String, key: String, message: String },
    #[error("[{section}] {key}: {error}")]
    Expr { section: &'static str, key: &'static str, error: ParseError },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Json,
}

impl OutputFormat {
    pub fn extension(self) -> &'static str {
        match self {
            OutputFormat::Csv => "csv",
            OutputFormat::Json => "json",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Discretization {
    pub n1: usize,
    pub n2: usize,
    pub anchors: usize,
    pub n_per: usize,
    pub ny: usize,
    pub n_1d: usize,
    pub cg_tol: f64,
    pub cg_maxiter: Option<usize>,
    pub grid: (usize, usize, usize),
    pub nq: usize,
}

impl Default for Discretization {
    fn default() -> Self {
        Discretization {
            n1: 64,
            n2: 64,
            anchors: 32,
            n_per: 16,
            ny: 8,
            n_1d: 512,
            cg_tol: 1e-10,
            cg_maxiter: None,
            grid: (256, 64, 64),
            nq: 16,
        }
    }
}

impl Discretization {
    pub fn solver(&self) -> SolverOptions {
        SolverOptions {
            tol: self.cg_tol,
            max_iter: self.cg_maxiter,
        }
    }

    pub fn pipeline(&self) -> PipelineParams {
        PipelineParams {
            anchors: self.anchors,
            n1: self.n1,
            n2: self.n2,
            n_1d: self.n_1d,
            solver: self.solver(),
        }
    }

    pub fn study(&self) -> StudyParams {
        StudyParams {
            pipeline: self.pipeline(),
            n_per: self.n_per,
            ny: self.ny,
            grid: self.grid,
            nq: self.nq,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Output {
    pub directory: PathBuf,
    pub format: OutputFormat,
    /// Write wall-clock seconds into study reports.
    pub timing: bool,
}

#[derive(Clone, Debug)]
pub struct RunConfig {
    pub spec: ProfileSpec,
    pub f: Expr,
    pub f_source: String,
    pub discretization: Discretization,
    pub eps: Vec<f64>,
    pub output: Output,
}

const SECTIONS: [(&str, &[&str]); 5] = [
    ("domain", &["G", "l", "G0", "G1", "l0", "l1"]),
    ("forcing", &["f"]),
    (
        "discretization",
        &["n1", "n2", "M", "n_per", "ny", "n_1d", "cg_tol", "cg_maxiter", "Nx", "N1", "N2", "Nq"],
    ),
    ("study", &["eps"]),
    ("output", &["directory", "format", "timing"]),
];

type Entries = BTreeMap<(&'static str, &'static str), (usize, String)>;

fn collect(text: &str) -> Result<Entries, ConfigError> {
    let mut entries = Entries::new();
    let mut section: Option<(&'static str, &'static [&'static str])> = None;
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let err = |message: String| ConfigError::Line { line: line_no, message };
        if let Some(name) = line.strip_prefix('[') {
            let name = name
                .strip_suffix(']')
                .ok_or_else(|| err(format!("malformed section header `{line}`")))?
                .trim();
            section = Some(
                *SECTIONS
                    .iter()
                    .find(|(s, _)| *s == name)
                    .ok_or_else(|| err(format!("unknown section [{name}]")))?,
            );
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| err(format!("expected `key = value`, got `{line}`")))?;
        let key = key.trim();
        let (name, keys) = section.ok_or_else(|| err(format!("key `{key}` appears before any section")))?;
        let key = *keys
            .iter()
            .find(|k| **k == key)
            .ok_or_else(|| err(format!("unknown key `{key}` in [{name}]")))?;
        if entries.insert((name, key), (line_no, value.trim().to_string())).is_some() {
            return Err(err(format!("duplicate key `{key}` in [{name}]")));
        }
    }
    Ok(entries)
}

struct Reader {
    entries: Entries,
}

impl Reader {
    fn raw(&self, section: &'static str, key: &'static str) -> Option<&str> {
        self.entries.get(&(section, key)).map(|(_, v)| v.as_str())
    }

    fn required(&self, section: &'static str, key: &'static str) -> Result<&str, ConfigError> {
        self.raw(section, key).ok_or(ConfigError::Missing { section, key })
    }

    fn bad(section: &str, key: &str, message: String) -> ConfigError {
        ConfigError::Value {
            section: section.to_string(),
            key: key.to_string(),
            message,
        }
    }

    fn number(section: &'static str, key: &'static str, text: &str) -> Result<f64, ConfigError> {
        let v: f64 = text
            .parse()
            .map_err(|_| Self::bad(section, key, format!("malformed number `{text}`")))?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Self::bad(section, key, format!("value `{text}` is not finite")))
        }
    }

    fn real(&self, section: &'static str, key: &'static str) -> Result<f64, ConfigError> {
        Self::number(section, key, self.required(section, key)?)
    }

    fn count(&self, section: &'static str, key: &'static str, default: usize) -> Result<usize, ConfigError> {
        match self.raw(section, key) {
            None => Ok(default),
            Some(text) => match text.parse::<usize>() {
                Ok(0) => Err(Self::bad(section, key, "must be positive".into())),
                Ok(n) => Ok(n),
                Err(_) => Err(Self::bad(section, key, format!("malformed count `{text}`"))),
            },
        }
    }
}

/// Parses the sectioned `key = value` format.
///
/// Sections are `[domain]`, `[forcing]`, `[discretization]`, `[study]` and
/// `[output]`; `#` starts a comment. Unknown sections and keys are errors.
pub fn parse_config_str(text: &str) -> Result<RunConfig, ConfigError> {
    let r = Reader { entries: collect(text)? };
    let g = r.required("domain", "G")?;
    let l = r.required("domain", "l")?;
    let bounds = Bounds::new(
        r.real("domain", "G0")?,
        r.real("domain", "G1")?,
        r.real("domain", "l0")?,
        r.real("domain", "l1")?,
    )?;
    let spec = ProfileSpec::parse(g, l, bounds)?;
    let f_source = r.required("forcing", "f")?.to_string();
    let f = parse(&f_source, &[Var::X]).map_err(|error| ConfigError::Expr {
        section: "forcing",
        key: "f",
        error,
    })?;

    let defaults = Discretization::default();
    let cg_tol = match r.raw("discretization", "cg_tol") {
        None => defaults.cg_tol,
        Some(text) => {
            let v = Reader::number("discretization", "cg_tol", text)?;
            if v <= 0.0 {
                return Err(Reader::bad("discretization", "cg_tol", "must be positive".into()));
            }
            v
        }
    };
    let cg_maxiter = match r.raw("discretization", "cg_maxiter") {
        None => None,
        Some(_) => Some(r.count("discretization", "cg_maxiter", 1)?),
    };
    let discretization = Discretization {
        n1: r.count("discretization", "n1", defaults.n1)?,
        n2: r.count("discretization", "n2", defaults.n2)?,
        anchors: r.count("discretization", "M", defaults.anchors)?,
        n_per: r.count("discretization", "n_per", defaults.n_per)?,
        ny: r.count("discretization", "ny", defaults.ny)?,
        n_1d: r.count("discretization", "n_1d", defaults.n_1d)?,
        cg_tol,
        cg_maxiter,
        grid: (
            r.count("discretization", "Nx", defaults.grid.0)?,
            r.count("discretization", "N1", defaults.grid.1)?,
            r.count("discretization", "N2", defaults.grid.2)?,
        ),
        nq: r.count("discretization", "Nq", defaults.nq)?,
    };

    let eps = match r.raw("study", "eps") {
        None => Vec::new(),
        Some(text) => {
            let values = text
                .split(',')
                .map(|v| Reader::number("study", "eps", v.trim()))
                .collect::<Result<Vec<_>, _>>()?;
            check_eps_list(&values, 1).map_err(|e| Reader::bad("study", "eps", e.to_string()))?;
            values
        }
    };

    let format = match r.raw("output", "format").unwrap_or("csv") {
        "csv" => OutputFormat::Csv,
        "json" => OutputFormat::Json,
        other => return Err(Reader::bad("output", "format", format!("expected csv or json, got `{other}`"))),
    };
    let timing = match r.raw("output", "timing").unwrap_or("false") {
        "true" => true,
        "false" => false,
        other => return Err(Reader::bad("output", "timing", format!("expected true or false, got `{other}`"))),
    };
    let output = Output {
        directory: PathBuf::from(r.raw("output", "directory").unwrap_or("out")),
        format,
        timing,
    };
    Ok(RunConfig {
        spec,
        f,
        f_source,
        discretization,
        eps,
        output,
    })
}

pub fn parse_config(path: &Path) -> Result<RunConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_config_str(&text)
}
