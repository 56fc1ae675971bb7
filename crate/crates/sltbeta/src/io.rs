//! Data ingestion, run configuration, and persistence of fits and reports.
//!
//! Input is long-format CSV, one observation per row, so subjects with
//! different delay grids coexist in one file. Every numeric output is
//! serialized with 17 significant digits, which round-trips `f64` exactly;
//! reports re-read from disk reproduce the in-memory values bit for bit.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::dist::{DistError, SltConfig, DEFAULT_SLT_LOCATION};
use crate::fit::{FitError, FitOptions, FitResult, Method, SubjectFit};
use crate::optim::OptimOptions;
use crate::report::{AgreementScatter, SummaryTable};
use crate::screen::{ScreenResult, DEFAULT_C1_THRESHOLD, DEFAULT_C2_THRESHOLD};
use crate::series::{IndifferenceSeries, MIN_OBSERVATIONS};

/// Formats a float with 17 significant digits, the minimum that guarantees
/// exact `f64` round-tripping.
pub fn format_float(value: f64) -> String {
    format!("{value:.16e}")
}

/// JSON formatter that writes every float with 17 significant digits.
struct FullPrecision;

impl serde_json::ser::Formatter for FullPrecision {
    fn write_f64<W>(&mut self, writer: &mut W, value: f64) -> std::io::Result<()>
    where
        W: ?Sized + std::io::Write,
    {
        write!(writer, "{value:.16e}")
    }
}

/// Serializes `value` to a JSON string with full-precision floats.
pub fn to_json_string<T: Serialize>(value: &T) -> String {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, FullPrecision);
    value
        .serialize(&mut ser)
        .expect("serialization of report types cannot fail");
    String::from_utf8(buf).expect("serde_json emits UTF-8")
}

/// Writes `value` as full-precision JSON (plus a trailing newline).
pub fn write_json_file<T: Serialize>(value: &T, path: &Path) -> std::io::Result<()> {
    let mut text = to_json_string(value);
    text.push('\n');
    fs::write(path, text)
}

// ---------------------------------------------------------------------------
// Run configuration
// ---------------------------------------------------------------------------

/// Invalid configuration file or values.
#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("cannot parse config {path}: {source}")]
    Parse {
        path: String,
        source: toml::de::Error,
    },
    #[error("config key {key}: {message}")]
    Invalid { key: &'static str, message: String },
}

/// Flat key-value run configuration. Every key is optional in the file;
/// missing keys take the defaults below, and CLI flags override file values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// SLT scale parameter s.
    pub slt_s: f64,
    /// SLT location parameter l.
    pub slt_l: f64,
    /// Nelder-Mead simplex-diameter tolerance.
    pub optimizer_tolerance: f64,
    /// Objective-evaluation budget per optimizer start.
    pub optimizer_max_evals: usize,
    /// Nelder-Mead starts per subject (warm start plus jittered ones).
    pub optimizer_restarts: usize,
    /// Johnson-Bickel criterion-1 threshold.
    pub screen_c1_threshold: f64,
    /// Johnson-Bickel criterion-2 threshold.
    pub screen_c2_threshold: f64,
    /// When true, `fit` drops subjects failing the screen before fitting.
    pub screen_enabled: bool,
    /// Monte Carlo replications per subject.
    pub simulation_replications: usize,
    /// Campaign seed.
    pub simulation_seed: u64,
    /// Default input dataset path.
    pub input: Option<String>,
    /// Default output directory.
    pub output_dir: Option<String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let l = DEFAULT_SLT_LOCATION;
        Self {
            slt_s: 1.0 / (1.0 - 2.0 * l),
            slt_l: l,
            optimizer_tolerance: 1e-8,
            optimizer_max_evals: 10_000,
            optimizer_restarts: 3,
            screen_c1_threshold: DEFAULT_C1_THRESHOLD,
            screen_c2_threshold: DEFAULT_C2_THRESHOLD,
            screen_enabled: false,
            simulation_replications: 1000,
            simulation_seed: 42,
            input: None,
            output_dir: None,
        }
    }
}

impl RunConfig {
    /// Reads and validates a TOML config file.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let config: RunConfig = toml::from_str(&text).map_err(|source| ConfigError::Parse {
            path: path.display().to_string(),
            source,
        })?;
        config.validate()?;
        Ok(config)
    }

    /// Checks every module invariant the config feeds into.
    pub fn validate(&self) -> Result<(), ConfigError> {
        SltConfig::new(self.slt_s, self.slt_l).map_err(|e: DistError| ConfigError::Invalid {
            key: "slt_s/slt_l",
            message: e.to_string(),
        })?;
        if !(self.optimizer_tolerance > 0.0 && self.optimizer_tolerance.is_finite()) {
            return Err(ConfigError::Invalid {
                key: "optimizer_tolerance",
                message: format!("must be positive, got {}", self.optimizer_tolerance),
            });
        }
        if self.optimizer_max_evals == 0 {
            return Err(ConfigError::Invalid {
                key: "optimizer_max_evals",
                message: "must be at least 1".into(),
            });
        }
        if self.optimizer_restarts == 0 {
            return Err(ConfigError::Invalid {
                key: "optimizer_restarts",
                message: "must be at least 1".into(),
            });
        }
        for (key, value) in [
            ("screen_c1_threshold", self.screen_c1_threshold),
            ("screen_c2_threshold", self.screen_c2_threshold),
        ] {
            if !(value >= 0.0 && value.is_finite()) {
                return Err(ConfigError::Invalid {
                    key,
                    message: format!("must be nonnegative, got {value}"),
                });
            }
        }
        if self.simulation_replications == 0 {
            return Err(ConfigError::Invalid {
                key: "simulation_replications",
                message: "must be at least 1".into(),
            });
        }
        Ok(())
    }

    pub fn slt_config(&self) -> SltConfig {
        SltConfig::new(self.slt_s, self.slt_l).expect("validated at load time")
    }

    pub fn fit_options(&self) -> FitOptions {
        FitOptions {
            optim: OptimOptions {
                diameter_tol: self.optimizer_tolerance,
                max_evals: self.optimizer_max_evals,
            },
            restarts: self.optimizer_restarts,
        }
    }

    /// Hex SHA-256 of the full-precision JSON rendering of this config.
    pub fn sha256(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update(to_json_string(self).as_bytes());
        let digest = hasher.finalize();
        let mut hex = String::with_capacity(64);
        for byte in digest {
            write!(hex, "{byte:02x}").expect("writing to a String cannot fail");
        }
        hex
    }
}

// ---------------------------------------------------------------------------
// Ingestion
// ---------------------------------------------------------------------------

/// One rejected input row.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RowError {
    /// 1-based line number in the input file.
    pub line: u64,
    pub message: String,
}

/// Why an input file could not be ingested.
#[derive(Debug, Error)]
pub enum IngestError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error(
        "{path}: header must contain subject_id, delay and indifference_point \
         (amount is optional)"
    )]
    BadHeader { path: String },
    #[error("{path} contains no data rows")]
    EmptyDataset { path: String },
    #[error("{path}: {n} invalid row(s), first at line {line}: {message}",
        n = rows.len(), line = rows[0].line, message = rows[0].message)]
    InvalidRows { path: String, rows: Vec<RowError> },
}

struct RawRow {
    line: u64,
    delay: f64,
    y: f64,
}

/// Reads a long-format CSV into one series per subject.
///
/// Rows are grouped by subject, sorted by delay, and normalized by their
/// amount. All validation failures are collected with line numbers before
/// the function errors, so one pass reports every problem in the file.
pub fn ingest(path: &Path) -> Result<Vec<IndifferenceSeries>, IngestError> {
    let display = path.display().to_string();
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(source) => IngestError::Io {
                path: display.clone(),
                source,
            },
            _ => IngestError::BadHeader {
                path: display.clone(),
            },
        })?;

    let headers = reader
        .headers()
        .map_err(|_| IngestError::BadHeader {
            path: display.clone(),
        })?
        .clone();
    let column = |name: &str| headers.iter().position(|h| h == name);
    let (Some(id_col), Some(delay_col), Some(point_col)) = (
        column("subject_id"),
        column("delay"),
        column("indifference_point"),
    ) else {
        return Err(IngestError::BadHeader { path: display });
    };
    let amount_col = column("amount");

    let mut row_errors: Vec<RowError> = Vec::new();
    let mut groups: BTreeMap<String, Vec<RawRow>> = BTreeMap::new();
    let mut saw_rows = false;

    for record in reader.records() {
        saw_rows = true;
        let record = match record {
            Ok(r) => r,
            Err(e) => {
                let line = e.position().map_or(0, csv::Position::line);
                row_errors.push(RowError {
                    line,
                    message: format!("malformed row: {e}"),
                });
                continue;
            }
        };
        let line = record.position().map_or(0, csv::Position::line);
        let mut report = |message: String| {
            row_errors.push(RowError { line, message });
        };

        let subject_id = record.get(id_col).unwrap_or("").to_string();
        if subject_id.is_empty() {
            report("subject_id is empty".into());
            continue;
        }
        let parse = |field: Option<&str>, name: &str| -> Result<f64, String> {
            let text = field.unwrap_or("");
            text.parse::<f64>()
                .map_err(|_| format!("{name} {text:?} is not a number"))
        };
        let delay = match parse(record.get(delay_col), "delay") {
            Ok(v) => v,
            Err(message) => {
                report(message);
                continue;
            }
        };
        let point = match parse(record.get(point_col), "indifference_point") {
            Ok(v) => v,
            Err(message) => {
                report(message);
                continue;
            }
        };
        let amount = match amount_col.and_then(|c| record.get(c)) {
            None | Some("") => 1.0,
            Some(text) => match text.parse::<f64>() {
                Ok(v) => v,
                Err(_) => {
                    report(format!("amount {text:?} is not a number"));
                    continue;
                }
            },
        };

        if !(delay > 0.0 && delay.is_finite()) {
            report(format!("delay {delay} is not strictly positive"));
            continue;
        }
        if !(amount > 0.0 && amount.is_finite()) {
            report(format!("amount {amount} is not strictly positive"));
            continue;
        }
        let y = point / amount;
        if !((0.0..=1.0).contains(&y) && y.is_finite()) {
            report(format!(
                "indifference_point {point} normalizes to {y}, outside [0, 1]"
            ));
            continue;
        }
        let rows = groups.entry(subject_id.clone()).or_default();
        if rows.iter().any(|r| r.delay == delay) {
            report(format!(
                "duplicate observation for subject {subject_id} at delay {delay}"
            ));
            continue;
        }
        rows.push(RawRow { line, delay, y });
    }

    if !saw_rows && row_errors.is_empty() {
        return Err(IngestError::EmptyDataset { path: display });
    }

    let mut population = Vec::with_capacity(groups.len());
    for (subject_id, rows) in groups {
        if rows.len() < MIN_OBSERVATIONS {
            row_errors.push(RowError {
                line: rows.first().map_or(0, |r| r.line),
                message: format!(
                    "subject {subject_id} has only {} observation(s); a series needs at least {MIN_OBSERVATIONS}",
                    rows.len()
                ),
            });
            continue;
        }
        let normalized: Vec<(f64, f64)> = rows.iter().map(|r| (r.delay, r.y)).collect();
        let series = IndifferenceSeries::from_normalized(&subject_id, &normalized)
            .expect("rows were validated field by field");
        population.push(series);
    }

    if !row_errors.is_empty() {
        row_errors.sort_by_key(|r| r.line);
        return Err(IngestError::InvalidRows {
            path: display,
            rows: row_errors,
        });
    }
    if population.is_empty() {
        return Err(IngestError::EmptyDataset { path: display });
    }
    Ok(population)
}

// ---------------------------------------------------------------------------
// Fits file
// ---------------------------------------------------------------------------

pub const FITS_SCHEMA_VERSION: u32 = 1;

/// Problems reading a fits file back.
#[derive(Debug, Error)]
pub enum FitsFileError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("cannot parse {path}: {source}")]
    Parse {
        path: String,
        source: serde_json::Error,
    },
    #[error("{path}: unsupported schema_version {found}, this build reads {FITS_SCHEMA_VERSION}")]
    SchemaVersion { path: String, found: u32 },
}

/// Persisted form of one subject-method outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum FitRecord {
    Ok(OkFitRecord),
    Error(ErrorFitRecord),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OkFitRecord {
    pub subject_id: String,
    pub method: String,
    pub psi_hat: f64,
    pub dispersion: f64,
    pub objective: f64,
    pub converged: bool,
    pub iterations: usize,
    pub notes: String,
    /// The subject's delay grid, kept so generators can be rebuilt from the
    /// fits file alone.
    pub delays: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorFitRecord {
    pub subject_id: String,
    pub method: String,
    pub error_code: String,
    pub message: String,
}

/// The versioned on-disk fits artifact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitsFile {
    pub schema_version: u32,
    pub records: Vec<FitRecord>,
}

fn error_code(err: &FitError) -> &'static str {
    match err {
        FitError::BoundaryValue { .. } => "boundary_value",
        FitError::Unconverged { .. } => "unconverged",
    }
}

impl FitRecord {
    pub fn from_subject_fit(fit: &SubjectFit, delays: &[f64]) -> Self {
        match &fit.outcome {
            Ok(result) => FitRecord::Ok(OkFitRecord {
                subject_id: result.subject_id.clone(),
                method: result.method.label().to_string(),
                psi_hat: result.psi_hat,
                dispersion: result.dispersion,
                objective: result.objective,
                converged: result.converged,
                iterations: result.iterations,
                notes: result.notes.clone(),
                delays: delays.to_vec(),
            }),
            Err(err) => FitRecord::Error(ErrorFitRecord {
                subject_id: fit.subject_id.clone(),
                method: fit.method.label().to_string(),
                error_code: error_code(err).to_string(),
                message: err.to_string(),
            }),
        }
    }
}

impl OkFitRecord {
    pub fn to_fit_result(&self) -> Option<FitResult> {
        Some(FitResult {
            subject_id: self.subject_id.clone(),
            method: Method::parse(&self.method)?,
            psi_hat: self.psi_hat,
            dispersion: self.dispersion,
            objective: self.objective,
            converged: self.converged,
            iterations: self.iterations,
            notes: self.notes.clone(),
        })
    }
}

pub fn read_fits_file(path: &Path) -> Result<FitsFile, FitsFileError> {
    let text = fs::read_to_string(path).map_err(|source| FitsFileError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let file: FitsFile = serde_json::from_str(&text).map_err(|source| FitsFileError::Parse {
        path: path.display().to_string(),
        source,
    })?;
    if file.schema_version != FITS_SCHEMA_VERSION {
        return Err(FitsFileError::SchemaVersion {
            path: path.display().to_string(),
            found: file.schema_version,
        });
    }
    Ok(file)
}

// ---------------------------------------------------------------------------
// CSV outputs
// ---------------------------------------------------------------------------

fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> std::io::Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    writer.write_record(header)?;
    for row in rows {
        writer.write_record(row)?;
    }
    writer.flush()
}

pub fn write_summary_csv(table: &SummaryTable, path: &Path) -> std::io::Result<()> {
    let rows: Vec<Vec<String>> = table
        .rows
        .iter()
        .map(|r| {
            vec![
                r.method.label().to_string(),
                r.n.to_string(),
                format_float(r.min),
                format_float(r.q1),
                format_float(r.median),
                format_float(r.q3),
                format_float(r.max),
                format_float(r.mean),
                format_float(r.sd),
            ]
        })
        .collect();
    write_csv(
        path,
        &[
            "method", "n", "min", "q1", "median", "q3", "max", "mean", "sd",
        ],
        &rows,
    )
}

pub fn write_screen_csv(results: &[ScreenResult], path: &Path) -> std::io::Result<()> {
    let rows: Vec<Vec<String>> = results
        .iter()
        .map(|r| {
            vec![
                r.subject_id.clone(),
                r.passes.to_string(),
                r.criterion1_violations.to_string(),
                r.criterion2_violated.to_string(),
            ]
        })
        .collect();
    write_csv(
        path,
        &[
            "subject_id",
            "passes",
            "criterion1_violations",
            "criterion2_violated",
        ],
        &rows,
    )
}

pub fn write_agreement_csv(scatter: &AgreementScatter, path: &Path) -> std::io::Result<()> {
    let rows: Vec<Vec<String>> = scatter
        .pairs
        .iter()
        .map(|p| {
            vec![
                p.subject_id.clone(),
                format_float(p.lnk_a),
                format_float(p.lnk_b),
            ]
        })
        .collect();
    write_csv(path, &["subject_id", "lnk_a", "lnk_b"], &rows)
}

/// One row per delay: the cross-subject empirical variance next to the mean
/// model-implied variance of each method.
pub fn write_variance_csv(
    delays: &[f64],
    empirical: &[f64],
    model_nls: &[f64],
    model_slt: &[f64],
    path: &Path,
) -> std::io::Result<()> {
    let rows: Vec<Vec<String>> = delays
        .iter()
        .enumerate()
        .map(|(j, d)| {
            vec![
                format_float(*d),
                format_float(empirical[j]),
                format_float(model_nls[j]),
                format_float(model_slt[j]),
            ]
        })
        .collect();
    write_csv(
        path,
        &[
            "delay",
            "empirical_variance",
            "mean_model_variance_nls",
            "mean_model_variance_slt",
        ],
        &rows,
    )
}

// ---------------------------------------------------------------------------
// Manifest
// ---------------------------------------------------------------------------

/// Reproducibility record written next to every output: re-running the named
/// command with the same config and inputs reproduces the outputs exactly.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Manifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub config: RunConfig,
    pub config_sha256: String,
    pub inputs: Vec<String>,
    pub seed: Option<u64>,
}

impl Manifest {
    pub fn new(command: &str, config: &RunConfig, inputs: Vec<String>, seed: Option<u64>) -> Self {
        Self {
            tool: "sltbeta",
            version: env!("CARGO_PKG_VERSION"),
            command: command.to_string(),
            config: config.clone(),
            config_sha256: config.sha256(),
            inputs,
            seed,
        }
    }
}
