//! ivsel: scenario simulation, model selection, Monte Carlo studies, copula
//! calibration, and report rendering from one binary.
//!
//! Exit codes: 0 success, 2 configuration or usage error, 3 degenerate
//! computation (nothing converged, empty input), 4 calibration failure.

mod config;
mod report;

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use config::{parse_criterion, parse_treatment_kind, resolve_methods, resolve_scenario, ScenarioFlags, StudyConfigFile};
use ivsel_core::dgp::generate;
use ivsel_core::estimators::{FitMethod, XiMode};
use ivsel_core::model::{catalogs_for, CandidateCatalog};
use ivsel_core::selection::{select_2sri, select_liml, SelectionResult};
use ivsel_core::stats::{
    calibrate_copula_param, copula_pearson_corr, CopulaFamily, Margin, RngStream, DEFAULT_T_DF,
};
use ivsel_core::study::{
    run_study, summarize, write_records_csv, write_summary_csv, Estimand, RECORDS_HEADER,
    SUMMARY_HEADER,
};
use ivsel_core::{Dataset, Error, Result};

#[derive(Parser)]
#[command(name = "ivsel", version, about = "Binary-outcome IV estimation with joint model selection")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate one scenario dataset as CSV
    Simulate(SimulateArgs),
    /// Fit all candidate pairs on a dataset and pick by criterion
    Select(SelectArgs),
    /// Run a Monte Carlo study and write records + summaries
    Study(StudyArgs),
    /// Render a records or summary CSV as a markdown table
    Report(ReportArgs),
    /// Calibrate a copula parameter to a target Pearson correlation
    CalibrateCopula(CalibrateArgs),
}

#[derive(Args)]
struct SimulateArgs {
    /// Flat TOML config; flags override its values
    #[arg(long)]
    config: Option<PathBuf>,

    #[command(flatten)]
    scenario: ScenarioFlags,

    /// Output CSV path
    #[arg(long)]
    out: PathBuf,

    /// Append the latent v,u columns
    #[arg(long)]
    debug_latents: bool,
}

#[derive(Args)]
struct SelectArgs {
    /// Dataset CSV (as written by simulate)
    #[arg(long)]
    data: PathBuf,

    /// continuous | dichotomous
    #[arg(long)]
    treatment_kind: String,

    /// liml | 2sri [default: liml]
    #[arg(long, default_value = "liml")]
    method: String,

    /// laic | lbic | aic (2sri always uses aic) [default: lbic]
    #[arg(long)]
    criterion: Option<String>,

    /// estimated | fixed [default: estimated]
    #[arg(long, default_value = "estimated")]
    xi_mode: String,

    /// Error correlation when --xi-mode fixed [default: 0]
    #[arg(long, default_value_t = 0.0)]
    rho: f64,

    /// Treatment error scale when --xi-mode fixed (continuous only) [default: 1]
    #[arg(long, default_value_t = 1.0)]
    sigma_v: f64,

    /// Restrict the treatment catalog to this one candidate (e.g. a4)
    #[arg(long)]
    treatment_model: Option<String>,

    /// Restrict the outcome catalog to this one candidate (e.g. b2)
    #[arg(long)]
    outcome_model: Option<String>,

    /// Emit the result as JSON instead of a table
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct StudyArgs {
    /// Flat TOML config; flags override its values
    #[arg(long)]
    config: Option<PathBuf>,

    #[command(flatten)]
    scenario: ScenarioFlags,

    /// Replications [default: 100]
    #[arg(long)]
    reps: Option<u64>,

    /// Worker threads, 0 = all cores [default: 1]
    #[arg(long, env = "IVSEL_PARALLELISM")]
    parallelism: Option<usize>,

    /// Output directory for records.csv and the summary files [default: .]
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Args)]
struct ReportArgs {
    /// records.csv or a summary CSV written by `study`
    #[arg(long)]
    input: PathBuf,

    /// Truth value, required to re-summarize a records file
    #[arg(long)]
    truth: Option<f64>,

    /// Aggregate converged replications only (records input)
    #[arg(long)]
    converged_only: bool,

    /// Summarize the p_y1 column instead of the primary estimate
    /// (records input from a dichotomous study)
    #[arg(long)]
    p_y1: bool,
}

#[derive(Args)]
struct CalibrateArgs {
    /// gaussian | t | clayton
    #[arg(long)]
    family: String,

    /// Target Pearson correlation of the margin-transformed pair
    #[arg(long)]
    target: f64,

    /// normal | logistic [default: logistic for t/clayton, normal for gaussian]
    #[arg(long)]
    margin: Option<String>,

    /// Degrees of freedom for the t copula [default: 3]
    #[arg(long)]
    df: Option<f64>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            let code = match err {
                Error::DegenerateData(_) => 3,
                Error::CalibrationFailed(_) => 4,
                _ => 2,
            };
            ExitCode::from(code)
        }
    }
}

fn run(cmd: Command) -> Result<()> {
    match cmd {
        Command::Simulate(args) => cmd_simulate(args),
        Command::Select(args) => cmd_select(args),
        Command::Study(args) => cmd_study(args),
        Command::Report(args) => cmd_report(args),
        Command::CalibrateCopula(args) => cmd_calibrate(args),
    }
}

fn load_config(path: Option<&PathBuf>) -> Result<StudyConfigFile> {
    match path {
        Some(p) => StudyConfigFile::load(p),
        None => Ok(StudyConfigFile::default()),
    }
}

fn cmd_simulate(args: SimulateArgs) -> Result<()> {
    let file = load_config(args.config.as_ref())?;
    let scenario = resolve_scenario(&file, &args.scenario)?;
    // stream 0: the same draw a study's replication 0 sees
    let mut rng = RngStream::new(scenario.seed, 0);
    let data = generate(&scenario, &mut rng)?;
    data.write_csv_path(&args.out, args.debug_latents)?;
    println!(
        "wrote {} rows ({} {}) to {}",
        data.n(),
        scenario.scenario_id.name(),
        match scenario.treatment_kind {
            ivsel_core::TreatmentKind::Continuous => "continuous",
            ivsel_core::TreatmentKind::Dichotomous => "dichotomous",
        },
        args.out.display()
    );
    Ok(())
}

/// JSON shape for `select --json`; mirrors the human-readable table.
#[derive(Debug, Serialize, Deserialize, PartialEq)]
struct SelectView {
    method: String,
    criterion: String,
    chosen_t: String,
    chosen_o: String,
    classification: String,
    n_nonconverged: usize,
    loglik: Option<f64>,
    w_coefficient: Option<f64>,
    table: Vec<SelectRowView>,
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
struct SelectRowView {
    treatment: String,
    outcome: String,
    loglik: Option<f64>,
    value: Option<f64>,
    n_params: usize,
    converged: bool,
}

impl SelectView {
    fn from_result(sel: &SelectionResult) -> SelectView {
        SelectView {
            method: match sel.method {
                FitMethod::Liml => "liml",
                FitMethod::TwoSls => "2sls",
                FitMethod::TwoSri => "2sri",
            }
            .to_string(),
            criterion: sel.criterion.name().to_string(),
            chosen_t: sel.chosen_t.clone(),
            chosen_o: sel.chosen_o.clone(),
            classification: sel.classification.name().to_string(),
            n_nonconverged: sel.n_nonconverged,
            loglik: sel.fit.loglik,
            w_coefficient: sel.fit.w_coefficient(),
            table: sel
                .table
                .iter()
                .map(|r| SelectRowView {
                    treatment: r.label_t.clone(),
                    outcome: r.label_o.clone(),
                    loglik: r.loglik,
                    value: r.value,
                    n_params: r.n_params,
                    converged: r.converged,
                })
                .collect(),
        }
    }
}

/// Cut a catalog down to one named candidate. The survivor doubles as the
/// catalog's true model, so classification degenerates to `true_model`.
fn restrict_catalog(cat: CandidateCatalog, label: Option<&str>) -> Result<CandidateCatalog> {
    let Some(label) = label else { return Ok(cat) };
    let formula = cat
        .get(label)
        .ok_or_else(|| Error::invalid(format!("unknown candidate `{label}`")))?
        .clone();
    CandidateCatalog::new(cat.side(), vec![formula], label)
}

fn cmd_select(args: SelectArgs) -> Result<()> {
    let kind = parse_treatment_kind(&args.treatment_kind)?;
    let data = Dataset::read_csv_path(&args.data, kind)?;
    let (cat_t, cat_o) = catalogs_for(kind);
    let cat_t = restrict_catalog(cat_t, args.treatment_model.as_deref())?;
    let cat_o = restrict_catalog(cat_o, args.outcome_model.as_deref())?;

    let sel = match args.method.as_str() {
        "liml" => {
            let criterion = parse_criterion(args.criterion.as_deref().unwrap_or("lbic"))?;
            let xi_mode = match args.xi_mode.as_str() {
                "estimated" => XiMode::Estimated,
                "fixed" => XiMode::Fixed {
                    sigma_v: match kind {
                        ivsel_core::TreatmentKind::Continuous => Some(args.sigma_v),
                        ivsel_core::TreatmentKind::Dichotomous => None,
                    },
                    rho: args.rho,
                },
                other => {
                    return Err(Error::invalid(format!(
                        "xi_mode must be estimated|fixed, got `{other}`"
                    )))
                }
            };
            select_liml(&data, &cat_t, &cat_o, criterion, xi_mode)?
        }
        "2sri" => {
            if let Some(c) = args.criterion.as_deref() {
                if c != "aic" {
                    return Err(Error::invalid(format!(
                        "2sri selects by aic; --criterion {c} does not apply"
                    )));
                }
            }
            select_2sri(&data, &cat_t, &cat_o)?
        }
        other => {
            return Err(Error::invalid(format!(
                "method must be liml|2sri, got `{other}`"
            )))
        }
    };

    let view = SelectView::from_result(&sel);
    if args.json {
        println!("{}", serde_json::to_string_pretty(&view).map_err(|e| Error::Other(e.to_string()))?);
        return Ok(());
    }

    println!(
        "{:<10} {:<10} {:>14} {:>14} {:>7} {:>10}",
        "treatment", "outcome", "loglik", view.criterion, "params", "converged"
    );
    for r in &view.table {
        let fmt_opt = |v: Option<f64>| match v {
            Some(x) => format!("{x:.4}"),
            None => "-".to_string(),
        };
        println!(
            "{:<10} {:<10} {:>14} {:>14} {:>7} {:>10}",
            r.treatment,
            r.outcome,
            fmt_opt(r.loglik),
            fmt_opt(r.value),
            r.n_params,
            if r.converged { "yes" } else { "no" }
        );
    }
    println!(
        "chosen: {} {}  (criterion={}, classification={}, nonconverged={})",
        view.chosen_t, view.chosen_o, view.criterion, view.classification, view.n_nonconverged
    );
    Ok(())
}

fn cmd_study(args: StudyArgs) -> Result<()> {
    let file = load_config(args.config.as_ref())?;
    let scenario = resolve_scenario(&file, &args.scenario)?;
    let methods = resolve_methods(&file, scenario.treatment_kind)?;
    let reps = args.reps.or(file.reps).unwrap_or(100);
    let parallelism = args.parallelism.or(file.parallelism).unwrap_or(1);
    let out_dir = args
        .out_dir
        .or(file.out_dir)
        .unwrap_or_else(|| PathBuf::from("."));
    fs::create_dir_all(&out_dir)?;

    let out = run_study(&scenario, &methods, reps, parallelism)?;

    let write = |name: &str, go: &dyn Fn(&mut Vec<u8>) -> Result<()>| -> Result<PathBuf> {
        let path = out_dir.join(name);
        let mut buf = Vec::new();
        go(&mut buf)?;
        fs::write(&path, &buf)?;
        Ok(path)
    };

    let mut written = Vec::new();
    written.push(write("records.csv", &|b| write_records_csv(&out.records, b))?);
    written.push(write("summary.csv", &|b| write_summary_csv(&out.summary, false, b))?);
    written.push(write("summary_converged.csv", &|b| {
        write_summary_csv(&out.summary, true, b)
    })?);
    if let Some(py1) = &out.summary_p_y1 {
        written.push(write("summary_py1.csv", &|b| write_summary_csv(py1, false, b))?);
        written.push(write("summary_py1_converged.csv", &|b| {
            write_summary_csv(py1, true, b)
        })?);
    }

    match out.truth {
        ivsel_core::study::StudyTruth::WCoefficient(v) => println!("truth (w coefficient): {v}"),
        ivsel_core::study::StudyTruth::Effects { p_y1, ate } => {
            println!("truth (p_y1): {p_y1}");
            println!("truth (ate): {ate}");
        }
    }
    for p in written {
        println!("wrote {}", p.display());
    }
    Ok(())
}

fn cmd_report(args: ReportArgs) -> Result<()> {
    let text = fs::read_to_string(&args.input)?;
    let first_line = text.lines().next().unwrap_or("");

    let rows = if first_line == SUMMARY_HEADER {
        let rows = report::rows_from_csv(text.as_bytes())?;
        if rows.is_empty() {
            return Err(Error::degenerate("summary file has no rows"));
        }
        rows
    } else if first_line == RECORDS_HEADER {
        let records = ivsel_core::study::read_records_csv(text.as_bytes())?;
        if records.is_empty() {
            return Err(Error::degenerate("records file has no rows"));
        }
        let truth = args.truth.ok_or_else(|| {
            Error::invalid("--truth is required to summarize a records file")
        })?;
        let methods = report::methods_in_order(&records);
        let reps = records.iter().map(|r| r.rep).max().unwrap_or(0) + 1;
        let estimand = if args.p_y1 { Estimand::PY1 } else { Estimand::Primary };
        let summary = summarize(&records, &methods, truth, estimand, reps);
        report::rows_from_summary(&summary, args.converged_only)
    } else {
        return Err(Error::invalid(format!(
            "unrecognized input header `{first_line}`"
        )));
    };

    print!("{}", report::render_markdown(&rows));
    Ok(())
}

fn cmd_calibrate(args: CalibrateArgs) -> Result<()> {
    let family = config::parse_copula(&args.family)?;
    let margin = match args.margin.as_deref() {
        Some("normal") => Margin::Normal,
        Some("logistic") => Margin::Logistic,
        Some(other) => {
            return Err(Error::invalid(format!(
                "margin must be normal|logistic, got `{other}`"
            )))
        }
        // the pairings the scenarios use
        None => match family {
            CopulaFamily::Gaussian => Margin::Normal,
            _ => Margin::Logistic,
        },
    };
    let df = match family {
        CopulaFamily::StudentT => Some(args.df.unwrap_or(DEFAULT_T_DF)),
        _ => {
            if args.df.is_some() {
                return Err(Error::invalid("--df applies to the t copula only"));
            }
            None
        }
    };
    let param = calibrate_copula_param(family, args.target, margin, df)?;
    let achieved = copula_pearson_corr(family, param, margin, df)?;
    println!("parameter = {param}");
    println!("achieved correlation = {achieved}");
    Ok(())
}
