//! Command-line front end: fit, screen, simulate, compare and report
//! subcommands over one shared config and output layout.
//!
//! Exit codes: 0 on success (including runs with per-subject fit failures,
//! which become error records), 1 on fatal errors, 2 on usage errors. Fatal
//! errors are written to stderr as a single JSON object.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use thiserror::Error;

use sltbeta::discount::Delay;
use sltbeta::fit::{fit_population, FitResult, Method, SubjectFit};
use sltbeta::io::{
    self, ingest, read_fits_file, ConfigError, FitRecord, FitsFile, FitsFileError, IngestError,
    Manifest, RunConfig, FITS_SCHEMA_VERSION,
};
use sltbeta::report::{
    agreement_scatter, empirical_variance_by_delay, summarize_lnk, ReportError, SummaryTable,
};
use sltbeta::screen::johnson_bickel_screen;
use sltbeta::series::IndifferenceSeries;
use sltbeta::sim::{run_monte_carlo, SubjectGenerator};

#[derive(Parser)]
#[command(
    name = "sltbeta",
    version,
    about = "Delay-discounting estimation with scale-location-truncated beta regression"
)]
struct Cli {
    /// TOML config file; command-line flags override file values.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Output directory (default: $SLTBETA_OUT_DIR, then ./sltbeta-out).
    #[arg(long, global = true, value_name = "DIR")]
    out_dir: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit each subject by the requested method(s) and summarize ln k.
    Fit {
        /// Long-format CSV dataset.
        #[arg(long, value_name = "FILE")]
        input: Option<PathBuf>,
        /// Estimation method, or all three.
        #[arg(long, value_enum, default_value = "all")]
        method: MethodArg,
        /// Override the SLT scale parameter s.
        #[arg(long, value_name = "S")]
        slt_s: Option<f64>,
        /// Override the SLT location parameter l.
        #[arg(long, value_name = "L")]
        slt_l: Option<f64>,
        /// Drop subjects failing the Johnson-Bickel screen before fitting.
        #[arg(long)]
        screen: bool,
    },
    /// Johnson-Bickel nonsystematic-data screen, one verdict per subject.
    Screen {
        /// Long-format CSV dataset.
        #[arg(long, value_name = "FILE")]
        input: Option<PathBuf>,
        /// Criterion-1 threshold: a later point rising above its predecessor
        /// by more than this flags the pair.
        #[arg(long, value_name = "T")]
        c1_threshold: Option<f64>,
        /// Criterion-2 threshold: the last point must sit at least this far
        /// below the first.
        #[arg(long, value_name = "T")]
        c2_threshold: Option<f64>,
    },
    /// Monte Carlo campaigns from fitted generators, counting invalid points.
    Simulate {
        /// Long-format CSV dataset to fit and then simulate from.
        #[arg(long, value_name = "FILE")]
        input: Option<PathBuf>,
        /// Reuse a fits.json written by `fit` instead of refitting.
        #[arg(long, value_name = "FILE", conflicts_with = "input")]
        fits: Option<PathBuf>,
        /// Which generator campaign(s) to run.
        #[arg(long, value_enum, default_value = "both")]
        model: ModelArg,
        /// Replications per subject.
        #[arg(long, value_name = "N")]
        replications: Option<usize>,
        /// Campaign seed.
        #[arg(long, value_name = "SEED")]
        seed: Option<u64>,
    },
    /// Fit two methods and report per-subject agreement of ln k.
    Compare {
        /// Long-format CSV dataset.
        #[arg(long, value_name = "FILE")]
        input: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "nls")]
        method_a: SingleMethodArg,
        #[arg(long, value_enum, default_value = "slt")]
        method_b: SingleMethodArg,
    },
    /// Empirical versus model-implied variance profiles by delay.
    Report {
        /// Long-format CSV dataset; every subject must share one delay grid.
        #[arg(long, value_name = "FILE")]
        input: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum MethodArg {
    Nls,
    Beta,
    Slt,
    All,
}

impl MethodArg {
    fn methods(self) -> Vec<Method> {
        match self {
            MethodArg::Nls => vec![Method::Nls],
            MethodArg::Beta => vec![Method::Beta],
            MethodArg::Slt => vec![Method::SltBeta],
            MethodArg::All => vec![Method::Nls, Method::Beta, Method::SltBeta],
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SingleMethodArg {
    Nls,
    Beta,
    Slt,
}

impl SingleMethodArg {
    fn method(self) -> Method {
        match self {
            SingleMethodArg::Nls => Method::Nls,
            SingleMethodArg::Beta => Method::Beta,
            SingleMethodArg::Slt => Method::SltBeta,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ModelArg {
    Normal,
    Beta,
    Both,
}

#[derive(Debug, Error)]
enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    FitsFile(#[from] FitsFileError),
    #[error(transparent)]
    Report(#[from] ReportError),
    #[error("cannot write {path}: {source}")]
    Write {
        path: String,
        source: std::io::Error,
    },
    #[error("{0}")]
    Invalid(String),
}

impl CliError {
    fn code(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::Ingest(_) => "ingest",
            CliError::FitsFile(_) => "fits_file",
            CliError::Report(_) => "report",
            CliError::Write { .. } => "io",
            CliError::Invalid(_) => "invalid",
        }
    }
}

fn emit_error(code: &str, message: &str, rows: Option<&[io::RowError]>) {
    let mut payload = serde_json::json!({ "error": code, "message": message });
    if let Some(rows) = rows {
        payload["rows"] = serde_json::to_value(rows).expect("RowError serializes");
    }
    eprintln!("{payload}");
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err)
            if matches!(
                err.kind(),
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion
            ) =>
        {
            err.print().expect("stdout is writable");
            return ExitCode::SUCCESS;
        }
        Err(err) => {
            emit_error("usage", &err.to_string(), None);
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let rows = match &err {
                CliError::Ingest(IngestError::InvalidRows { rows, .. }) => Some(rows.as_slice()),
                _ => None,
            };
            emit_error(err.code(), &err.to_string(), rows);
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let mut config = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    match cli.command {
        Command::Fit {
            input,
            method,
            slt_s,
            slt_l,
            screen,
        } => {
            if let Some(s) = slt_s {
                config.slt_s = s;
            }
            if let Some(l) = slt_l {
                config.slt_l = l;
            }
            config.screen_enabled |= screen;
            config.validate()?;
            let out_dir = resolve_out_dir(&cli.out_dir, &config)?;
            let input = resolve_input(&input, &config)?;
            cmd_fit(&config, &out_dir, &input, &method.methods())
        }
        Command::Screen {
            input,
            c1_threshold,
            c2_threshold,
        } => {
            if let Some(t) = c1_threshold {
                config.screen_c1_threshold = t;
            }
            if let Some(t) = c2_threshold {
                config.screen_c2_threshold = t;
            }
            config.validate()?;
            let out_dir = resolve_out_dir(&cli.out_dir, &config)?;
            let input = resolve_input(&input, &config)?;
            cmd_screen(&config, &out_dir, &input)
        }
        Command::Simulate {
            input,
            fits,
            model,
            replications,
            seed,
        } => {
            if let Some(n) = replications {
                config.simulation_replications = n;
            }
            if let Some(s) = seed {
                config.simulation_seed = s;
            }
            config.validate()?;
            let out_dir = resolve_out_dir(&cli.out_dir, &config)?;
            cmd_simulate(&config, &out_dir, &input, &fits, model)
        }
        Command::Compare {
            input,
            method_a,
            method_b,
        } => {
            config.validate()?;
            let out_dir = resolve_out_dir(&cli.out_dir, &config)?;
            let input = resolve_input(&input, &config)?;
            cmd_compare(&config, &out_dir, &input, method_a.method(), method_b.method())
        }
        Command::Report { input } => {
            config.validate()?;
            let out_dir = resolve_out_dir(&cli.out_dir, &config)?;
            let input = resolve_input(&input, &config)?;
            cmd_report(&config, &out_dir, &input)
        }
    }
}

fn resolve_out_dir(flag: &Option<PathBuf>, config: &RunConfig) -> Result<PathBuf, CliError> {
    let dir = flag
        .clone()
        .or_else(|| config.output_dir.as_ref().map(PathBuf::from))
        .or_else(|| std::env::var_os("SLTBETA_OUT_DIR").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("sltbeta-out"));
    fs::create_dir_all(&dir).map_err(|source| CliError::Write {
        path: dir.display().to_string(),
        source,
    })?;
    Ok(dir)
}

fn resolve_input(flag: &Option<PathBuf>, config: &RunConfig) -> Result<PathBuf, CliError> {
    flag.clone()
        .or_else(|| config.input.as_ref().map(PathBuf::from))
        .ok_or_else(|| {
            CliError::Invalid("no input dataset: pass --input or set input in the config".into())
        })
}

fn write_json<T: serde::Serialize>(value: &T, path: &Path) -> Result<(), CliError> {
    io::write_json_file(value, path).map_err(|source| CliError::Write {
        path: path.display().to_string(),
        source,
    })
}

fn write_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Write {
        path: path.display().to_string(),
        source,
    }
}

fn delay_map(population: &[IndifferenceSeries]) -> BTreeMap<String, Vec<Delay>> {
    population
        .iter()
        .map(|s| (s.subject_id().to_string(), s.delays()))
        .collect()
}

fn cmd_fit(
    config: &RunConfig,
    out_dir: &Path,
    input: &Path,
    methods: &[Method],
) -> Result<(), CliError> {
    let mut population = ingest(input)?;
    let mut screen_rows = Vec::new();
    if config.screen_enabled {
        screen_rows = population
            .iter()
            .map(|s| {
                johnson_bickel_screen(s, config.screen_c1_threshold, config.screen_c2_threshold)
            })
            .collect();
        let keep: Vec<bool> = screen_rows.iter().map(|r| r.passes).collect();
        let dropped = keep.iter().filter(|k| !**k).count();
        if dropped > 0 {
            eprintln!(
                "warning: screen dropped {dropped} of {} subjects",
                population.len()
            );
        }
        population = population
            .into_iter()
            .zip(keep)
            .filter_map(|(s, k)| k.then_some(s))
            .collect();
        if population.is_empty() {
            return Err(CliError::Invalid("every subject failed the screen".into()));
        }
    }

    let fits = fit_population(&population, methods, config.slt_config(), &config.fit_options());
    let delays = delay_map(&population);
    let records: Vec<FitRecord> = fits
        .iter()
        .map(|f| {
            let grid: Vec<f64> = delays[&f.subject_id].iter().map(|d| d.value()).collect();
            FitRecord::from_subject_fit(f, &grid)
        })
        .collect();
    let failures = fits.iter().filter(|f| f.outcome.is_err()).count();
    if failures > 0 {
        eprintln!(
            "warning: {failures} of {} fits failed; see the error records in fits.json",
            fits.len()
        );
    }

    let converged: Vec<FitResult> = fits
        .iter()
        .filter_map(|f| f.outcome.as_ref().ok())
        .cloned()
        .collect();
    let with_fits: Vec<Method> = methods
        .iter()
        .copied()
        .filter(|&m| converged.iter().any(|r| r.method == m && r.converged))
        .collect();
    let table = if with_fits.is_empty() {
        eprintln!("warning: no converged fits; summary.csv has only a header");
        SummaryTable { rows: Vec::new() }
    } else {
        summarize_lnk(&converged, &with_fits)?
    };

    let fits_file = FitsFile {
        schema_version: FITS_SCHEMA_VERSION,
        records,
    };
    write_json(&fits_file, &out_dir.join("fits.json"))?;
    let summary_path = out_dir.join("summary.csv");
    io::write_summary_csv(&table, &summary_path).map_err(write_err(&summary_path))?;
    if config.screen_enabled {
        let screen_path = out_dir.join("screen.csv");
        io::write_screen_csv(&screen_rows, &screen_path).map_err(write_err(&screen_path))?;
    }
    let manifest = Manifest::new("fit", config, vec![input.display().to_string()], None);
    write_json(&manifest, &out_dir.join("manifest.json"))
}

fn cmd_screen(config: &RunConfig, out_dir: &Path, input: &Path) -> Result<(), CliError> {
    let population = ingest(input)?;
    let results: Vec<_> = population
        .iter()
        .map(|s| johnson_bickel_screen(s, config.screen_c1_threshold, config.screen_c2_threshold))
        .collect();
    let failing = results.iter().filter(|r| !r.passes).count();
    if failing > 0 {
        eprintln!("warning: {failing} of {} subjects fail the screen", results.len());
    }
    let screen_path = out_dir.join("screen.csv");
    io::write_screen_csv(&results, &screen_path).map_err(write_err(&screen_path))?;
    let manifest = Manifest::new("screen", config, vec![input.display().to_string()], None);
    write_json(&manifest, &out_dir.join("manifest.json"))
}

/// Generators for one campaign, built from converged fits of the wanted
/// method. The beta campaign prefers SLT fits and falls back to standard
/// beta fits only when no SLT records exist.
fn generators_from_records(
    records: &[FitRecord],
    campaign: &str,
    wanted: &[&str],
) -> Result<Vec<SubjectGenerator>, CliError> {
    let pick = |label: &str| -> Vec<&io::OkFitRecord> {
        records
            .iter()
            .filter_map(|r| match r {
                FitRecord::Ok(ok) if ok.method == label && ok.converged => Some(ok),
                _ => None,
            })
            .collect()
    };
    let mut chosen = Vec::new();
    for &label in wanted {
        chosen = pick(label);
        if !chosen.is_empty() {
            if label != wanted[0] {
                eprintln!(
                    "warning: no {} fits in the fits file; the {campaign} campaign uses {label} fits",
                    wanted[0]
                );
            }
            break;
        }
    }
    if chosen.is_empty() {
        return Err(CliError::Invalid(format!(
            "fits file has no converged {} fits for the {campaign} campaign",
            wanted.join(" or ")
        )));
    }
    chosen
        .iter()
        .map(|rec| {
            let fit = rec.to_fit_result().ok_or_else(|| {
                CliError::Invalid(format!("unknown method {:?} in fits file", rec.method))
            })?;
            let grid = rec
                .delays
                .iter()
                .map(|&d| Delay::new(d))
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| {
                    CliError::Invalid(format!("subject {}: {e}", rec.subject_id))
                })?;
            SubjectGenerator::from_fit(&fit, grid)
                .map_err(|e| CliError::Invalid(format!("subject {}: {e}", rec.subject_id)))
        })
        .collect()
}

fn generators_from_fits(
    fits: &[SubjectFit],
    delays: &BTreeMap<String, Vec<Delay>>,
    method: Method,
    campaign: &str,
) -> Result<Vec<SubjectGenerator>, CliError> {
    let mut generators = Vec::new();
    let mut skipped = 0usize;
    for fit in fits.iter().filter(|f| f.method == method) {
        match &fit.outcome {
            Ok(result) if result.converged => {
                let grid = delays[&fit.subject_id].clone();
                generators.push(
                    SubjectGenerator::from_fit(result, grid).map_err(|e| {
                        CliError::Invalid(format!("subject {}: {e}", fit.subject_id))
                    })?,
                );
            }
            _ => skipped += 1,
        }
    }
    if skipped > 0 {
        eprintln!(
            "warning: {skipped} subjects without a converged {} fit are left out of the {campaign} campaign",
            method.label()
        );
    }
    if generators.is_empty() {
        return Err(CliError::Invalid(format!(
            "no converged {} fits for the {campaign} campaign",
            method.label()
        )));
    }
    Ok(generators)
}

fn check_grid(generators: &[SubjectGenerator], campaign: &str) -> Result<(), CliError> {
    let n = generators[0].delays().len();
    if generators.iter().any(|g| g.delays().len() != n) {
        return Err(CliError::Invalid(format!(
            "{campaign} campaign mixes delay grids of different lengths"
        )));
    }
    Ok(())
}

fn cmd_simulate(
    config: &RunConfig,
    out_dir: &Path,
    input: &Option<PathBuf>,
    fits_path: &Option<PathBuf>,
    model: ModelArg,
) -> Result<(), CliError> {
    let want_normal = matches!(model, ModelArg::Normal | ModelArg::Both);
    let want_beta = matches!(model, ModelArg::Beta | ModelArg::Both);

    let (normal_generators, beta_generators, inputs) = if let Some(path) = fits_path {
        let file = read_fits_file(path)?;
        let normal = want_normal
            .then(|| generators_from_records(&file.records, "normal", &["nls"]))
            .transpose()?;
        let beta = want_beta
            .then(|| generators_from_records(&file.records, "beta", &["slt", "beta"]))
            .transpose()?;
        (normal, beta, vec![path.display().to_string()])
    } else {
        let input = resolve_input(input, config)?;
        let population = ingest(&input)?;
        let mut methods = Vec::new();
        if want_normal {
            methods.push(Method::Nls);
        }
        if want_beta {
            methods.push(Method::SltBeta);
        }
        let fits = fit_population(&population, &methods, config.slt_config(), &config.fit_options());
        let delays = delay_map(&population);
        let normal = want_normal
            .then(|| generators_from_fits(&fits, &delays, Method::Nls, "normal"))
            .transpose()?;
        let beta = want_beta
            .then(|| generators_from_fits(&fits, &delays, Method::SltBeta, "beta"))
            .transpose()?;
        (normal, beta, vec![input.display().to_string()])
    };

    for (generators, name) in [(&normal_generators, "normal"), (&beta_generators, "beta")] {
        if let Some(generators) = generators {
            check_grid(generators, name)?;
            let report = run_monte_carlo(
                generators,
                config.simulation_replications,
                config.simulation_seed,
            );
            write_json(&report, &out_dir.join(format!("simulation_report_{name}.json")))?;
        }
    }
    let manifest = Manifest::new("simulate", config, inputs, Some(config.simulation_seed));
    write_json(&manifest, &out_dir.join("manifest.json"))
}

fn cmd_compare(
    config: &RunConfig,
    out_dir: &Path,
    input: &Path,
    method_a: Method,
    method_b: Method,
) -> Result<(), CliError> {
    if method_a == method_b {
        return Err(CliError::Invalid(
            "compare needs two distinct methods".into(),
        ));
    }
    let population = ingest(input)?;
    let methods = [method_a, method_b];
    let fits = fit_population(&population, &methods, config.slt_config(), &config.fit_options());
    let pick = |method: Method| -> Vec<FitResult> {
        fits.iter()
            .filter(|f| f.method == method)
            .filter_map(|f| f.outcome.as_ref().ok())
            .filter(|r| r.converged)
            .cloned()
            .collect()
    };
    let mut fits_a = pick(method_a);
    let mut fits_b = pick(method_b);
    let ids = |fits: &[FitResult]| -> BTreeSet<String> {
        fits.iter().map(|f| f.subject_id.clone()).collect()
    };
    let common: BTreeSet<String> = ids(&fits_a).intersection(&ids(&fits_b)).cloned().collect();
    if common.is_empty() {
        return Err(CliError::Invalid(
            "no subject converged under both methods".into(),
        ));
    }
    let dropped = population.len() - common.len();
    if dropped > 0 {
        eprintln!(
            "warning: {dropped} of {} subjects lack a converged fit under both methods and are left out",
            population.len()
        );
    }
    fits_a.retain(|f| common.contains(&f.subject_id));
    fits_b.retain(|f| common.contains(&f.subject_id));
    let scatter = agreement_scatter(&fits_a, &fits_b)?;

    let agreement_path = out_dir.join("agreement.csv");
    io::write_agreement_csv(&scatter, &agreement_path).map_err(write_err(&agreement_path))?;
    let summary = serde_json::json!({
        "method_a": method_a.label(),
        "method_b": method_b.label(),
        "n_pairs": scatter.pairs.len(),
        "correlation": scatter.correlation,
    });
    write_json(&summary, &out_dir.join("compare.json"))?;
    let manifest = Manifest::new("compare", config, vec![input.display().to_string()], None);
    write_json(&manifest, &out_dir.join("manifest.json"))
}

fn cmd_report(config: &RunConfig, out_dir: &Path, input: &Path) -> Result<(), CliError> {
    let population = ingest(input)?;
    let empirical = empirical_variance_by_delay(&population)?;
    let grid = population[0].delays();
    let methods = [Method::Nls, Method::SltBeta];
    let fits = fit_population(&population, &methods, config.slt_config(), &config.fit_options());

    let mean_profile = |method: Method| -> Vec<f64> {
        let mut sums = vec![0.0; grid.len()];
        let mut count = 0usize;
        for fit in fits.iter().filter(|f| f.method == method) {
            if let Ok(result) = &fit.outcome {
                if result.converged {
                    let profile = sltbeta::fit::model_variance_by_delay(result, &grid)
                        .expect("converged fit has a variance profile");
                    for (sum, v) in sums.iter_mut().zip(&profile) {
                        *sum += v;
                    }
                    count += 1;
                }
            }
        }
        if count == 0 {
            eprintln!(
                "warning: no converged {} fits; its variance column is NaN",
                method.label()
            );
            return vec![f64::NAN; grid.len()];
        }
        sums.iter().map(|s| s / count as f64).collect()
    };
    let model_nls = mean_profile(Method::Nls);
    let model_slt = mean_profile(Method::SltBeta);

    let delay_values: Vec<f64> = grid.iter().map(|d| d.value()).collect();
    let variance_path = out_dir.join("variance_by_delay.csv");
    io::write_variance_csv(&delay_values, &empirical, &model_nls, &model_slt, &variance_path)
        .map_err(write_err(&variance_path))?;
    let manifest = Manifest::new("report", config, vec![input.display().to_string()], None);
    write_json(&manifest, &out_dir.join("manifest.json"))
}
