//! Study/scenario configuration: a flat TOML document plus command-line
//! overrides, resolved into the core types.

use std::path::PathBuf;
use std::str::FromStr;

use clap::Args;
use serde::Deserialize;

use ivsel_core::dgp::{ScenarioConfig, ScenarioId};
use ivsel_core::selection::CriterionKind;
use ivsel_core::stats::CopulaFamily;
use ivsel_core::study::{default_methods, Method};
use ivsel_core::TreatmentKind;
use ivsel_core::{Error, Result};

/// Flat config document. Every key is optional; command-line flags override
/// file values, and anything still unset falls back to the defaults listed
/// in `--help`. Unknown keys are rejected with the offending name.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyConfigFile {
    pub treatment_kind: Option<String>,
    pub scenario: Option<String>,
    pub copula: Option<String>,
    pub n: Option<usize>,
    pub seed: Option<u64>,
    pub reps: Option<u64>,
    pub criteria: Option<Vec<String>>,
    pub methods: Option<Vec<String>>,
    pub out_dir: Option<PathBuf>,
    pub parallelism: Option<usize>,
}

impl StudyConfigFile {
    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        toml::from_str(&text).map_err(|e| Error::invalid(format!("{}: {e}", path.display())))
    }
}

/// Scenario knobs shared by the generate-style commands. Flags override the
/// config file.
#[derive(Debug, Args)]
pub struct ScenarioFlags {
    /// Scenario id: s1 | s2 | s3 | s4 [default: s1]
    #[arg(long)]
    pub scenario: Option<String>,

    /// Treatment kind: continuous | dichotomous [default: continuous]
    #[arg(long)]
    pub treatment_kind: Option<String>,

    /// Confounder copula: gaussian | t | clayton. Gaussian pairs with
    /// normal margins, t and clayton with logistic ones [default: gaussian]
    #[arg(long)]
    pub copula: Option<String>,

    /// Rows per dataset [default: 300]
    #[arg(long)]
    pub n: Option<usize>,

    /// RNG seed; replication r of a study draws from stream r [default: 0]
    #[arg(long)]
    pub seed: Option<u64>,
}

pub fn parse_treatment_kind(s: &str) -> Result<TreatmentKind> {
    match s {
        "continuous" => Ok(TreatmentKind::Continuous),
        "dichotomous" => Ok(TreatmentKind::Dichotomous),
        other => Err(Error::invalid(format!(
            "treatment_kind must be continuous|dichotomous, got `{other}`"
        ))),
    }
}

pub fn parse_copula(s: &str) -> Result<CopulaFamily> {
    match s {
        "gaussian" => Ok(CopulaFamily::Gaussian),
        "t" => Ok(CopulaFamily::StudentT),
        "clayton" => Ok(CopulaFamily::Clayton),
        other => Err(Error::invalid(format!(
            "copula must be gaussian|t|clayton, got `{other}`"
        ))),
    }
}

pub fn parse_criterion(s: &str) -> Result<CriterionKind> {
    match s {
        "laic" => Ok(CriterionKind::Laic),
        "lbic" => Ok(CriterionKind::Lbic),
        "aic" => Ok(CriterionKind::Aic),
        other => Err(Error::invalid(format!(
            "criterion must be laic|lbic|aic, got `{other}`"
        ))),
    }
}

/// Flags > file > defaults, then build the scenario through the core
/// constructors (non-gaussian copulas calibrate here).
pub fn resolve_scenario(file: &StudyConfigFile, flags: &ScenarioFlags) -> Result<ScenarioConfig> {
    let kind = parse_treatment_kind(
        flags
            .treatment_kind
            .as_deref()
            .or(file.treatment_kind.as_deref())
            .unwrap_or("continuous"),
    )?;
    let id = ScenarioId::parse(
        flags
            .scenario
            .as_deref()
            .or(file.scenario.as_deref())
            .unwrap_or("s1"),
    )?;
    let family = parse_copula(
        flags
            .copula
            .as_deref()
            .or(file.copula.as_deref())
            .unwrap_or("gaussian"),
    )?;
    let n = flags.n.or(file.n).unwrap_or(300);
    let seed = flags.seed.or(file.seed).unwrap_or(0);
    match family {
        CopulaFamily::Gaussian => ScenarioConfig::normal(kind, id, n, seed),
        _ => ScenarioConfig::non_normal(kind, id, family, n, seed),
    }
}

/// Method list: explicit `methods` wins, otherwise the standard lineup for
/// the treatment kind under `criteria` (default laic+lbic).
pub fn resolve_methods(file: &StudyConfigFile, kind: TreatmentKind) -> Result<Vec<Method>> {
    if let Some(names) = &file.methods {
        return names.iter().map(|s| Method::from_str(s)).collect();
    }
    let criteria = match &file.criteria {
        Some(names) => names
            .iter()
            .map(|s| parse_criterion(s))
            .collect::<Result<Vec<_>>>()?,
        None => vec![CriterionKind::Laic, CriterionKind::Lbic],
    };
    Ok(default_methods(kind, &criteria))
}
