//! Simulation scenarios and data generation.
//!
//! Each scenario id pins a (correlation, IV strength, effect size) triple;
//! the treatment kind and the confounder distribution vary independently.
//! Generated datasets keep their latent errors so oracle tests can re-derive
//! the observed columns.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::model::{Dataset, TreatmentKind};
use crate::stats::{
    calibrate_copula_param, sample_copula_pair, CopulaFamily, CopulaSpec, Margin, RngStream,
    DEFAULT_T_DF,
};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioId {
    S1,
    S2,
    S3,
    S4,
}

impl ScenarioId {
    pub fn name(self) -> &'static str {
        match self {
            ScenarioId::S1 => "s1",
            ScenarioId::S2 => "s2",
            ScenarioId::S3 => "s3",
            ScenarioId::S4 => "s4",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "s1" => Ok(ScenarioId::S1),
            "s2" => Ok(ScenarioId::S2),
            "s3" => Ok(ScenarioId::S3),
            "s4" => Ok(ScenarioId::S4),
            other => Err(Error::invalid(format!("unknown scenario {other}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorrLevel {
    Weak,
    Strong,
}

impl CorrLevel {
    pub fn rho(self) -> f64 {
        match self {
            CorrLevel::Weak => 0.3,
            CorrLevel::Strong => 0.6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IvStrength {
    Weak,
    Strong,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EffectSize {
    Weak,
    Strong,
}

/// Joint error distribution for (V, U): a copula plus a common margin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConfounderSpec {
    pub copula: CopulaSpec,
    pub margin: Margin,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub treatment_kind: TreatmentKind,
    pub confounder: ConfounderSpec,
    pub corr_level: CorrLevel,
    pub iv_strength: IvStrength,
    pub effect_size: EffectSize,
    pub n: usize,
    pub seed: u64,
    pub scenario_id: ScenarioId,
}

impl ScenarioConfig {
    /// The scenario grid: (1) weak corr / strong IV / strong effect,
    /// (2) weak / weak / strong, (3) strong / strong / strong,
    /// (4) weak / strong / weak.
    fn triple(id: ScenarioId) -> (CorrLevel, IvStrength, EffectSize) {
        match id {
            ScenarioId::S1 => (CorrLevel::Weak, IvStrength::Strong, EffectSize::Strong),
            ScenarioId::S2 => (CorrLevel::Weak, IvStrength::Weak, EffectSize::Strong),
            ScenarioId::S3 => (CorrLevel::Strong, IvStrength::Strong, EffectSize::Strong),
            ScenarioId::S4 => (CorrLevel::Weak, IvStrength::Strong, EffectSize::Weak),
        }
    }

    /// Standard-normal errors joined by a gaussian copula; the copula
    /// parameter is then the Pearson correlation itself.
    pub fn normal(
        treatment_kind: TreatmentKind,
        scenario_id: ScenarioId,
        n: usize,
        seed: u64,
    ) -> Result<Self> {
        let (corr_level, iv_strength, effect_size) = Self::triple(scenario_id);
        if n == 0 {
            return Err(Error::invalid("scenario needs n > 0"));
        }
        Ok(ScenarioConfig {
            treatment_kind,
            confounder: ConfounderSpec {
                copula: CopulaSpec::new(CopulaFamily::Gaussian, corr_level.rho(), None)?,
                margin: Margin::Normal,
            },
            corr_level,
            iv_strength,
            effect_size,
            n,
            seed,
            scenario_id,
        })
    }

    /// Logistic(0,1) errors joined by a t or Clayton copula whose parameter
    /// is calibrated so the Pearson correlation of (V, U) hits the scenario's
    /// level. Calibration failure surfaces as an error.
    pub fn non_normal(
        treatment_kind: TreatmentKind,
        scenario_id: ScenarioId,
        family: CopulaFamily,
        n: usize,
        seed: u64,
    ) -> Result<Self> {
        if family == CopulaFamily::Gaussian {
            return Err(Error::invalid(
                "non_normal expects a t or clayton copula; use normal() for gaussian",
            ));
        }
        let (corr_level, iv_strength, effect_size) = Self::triple(scenario_id);
        if n == 0 {
            return Err(Error::invalid("scenario needs n > 0"));
        }
        let df = if family == CopulaFamily::StudentT {
            Some(DEFAULT_T_DF)
        } else {
            None
        };
        let param = calibrate_copula_param(family, corr_level.rho(), Margin::Logistic, df)?;
        Ok(ScenarioConfig {
            treatment_kind,
            confounder: ConfounderSpec {
                copula: CopulaSpec::new(family, param, df)?,
                margin: Margin::Logistic,
            },
            corr_level,
            iv_strength,
            effect_size,
            n,
            seed,
            scenario_id,
        })
    }

    /// Treatment-equation coefficients over [1, z, x2, x3].
    pub fn true_alpha(&self) -> Vec<f64> {
        match self.treatment_kind {
            TreatmentKind::Continuous => {
                let az = match self.iv_strength {
                    IvStrength::Weak => 0.5,
                    IvStrength::Strong => 1.0,
                };
                vec![1.0, az, 1.0, 1.0]
            }
            TreatmentKind::Dichotomous => {
                let (a0, az) = match self.iv_strength {
                    IvStrength::Weak => (0.05, 0.6),
                    IvStrength::Strong => (-0.2, 1.2),
                };
                vec![a0, az, 1.0, 1.0]
            }
        }
    }

    /// Outcome-equation coefficients: [1, w, x1, x2] for the continuous
    /// study, [1, w, x1, x2, w:x1] for the dichotomous one.
    pub fn true_beta(&self) -> Vec<f64> {
        match self.treatment_kind {
            TreatmentKind::Continuous => vec![0.5, self.true_w_coefficient(), 0.5, 0.5],
            TreatmentKind::Dichotomous => {
                vec![-0.2, self.true_w_coefficient(), 0.5, 0.5, -1.0]
            }
        }
    }

    /// The coefficient on W in the outcome equation, the estimand the
    /// continuous study reports.
    pub fn true_w_coefficient(&self) -> f64 {
        match (self.treatment_kind, self.effect_size) {
            (TreatmentKind::Continuous, EffectSize::Weak) => 0.2,
            (TreatmentKind::Continuous, EffectSize::Strong) => 0.6,
            (TreatmentKind::Dichotomous, EffectSize::Weak) => 0.5,
            (TreatmentKind::Dichotomous, EffectSize::Strong) => 1.5,
        }
    }
}

/// One (v, u) draw under the confounder spec, on the margin's natural scale.
fn draw_errors(conf: &ConfounderSpec, rng: &mut RngStream) -> (f64, f64) {
    if conf.copula.family == CopulaFamily::Gaussian && conf.margin == Margin::Normal {
        // gaussian copula with normal margins IS the bivariate normal
        let rho = conf.copula.param;
        let z1: f64 = StandardNormal.sample(rng);
        let z2: f64 = StandardNormal.sample(rng);
        (z1, rho * z1 + (1.0 - rho * rho).sqrt() * z2)
    } else {
        let (u1, u2) = sample_copula_pair(&conf.copula, rng);
        (
            conf.margin.quantile(u1).expect("copula output is in (0,1)"),
            conf.margin.quantile(u2).expect("copula output is in (0,1)"),
        )
    }
}

struct Draws {
    y: Vec<f64>,
    w: Vec<f64>,
    x1: Vec<f64>,
    x2: Vec<f64>,
    x3: Vec<f64>,
    z: Vec<f64>,
    v: Vec<f64>,
    u: Vec<f64>,
}

fn draw_common(config: &ScenarioConfig, rng: &mut RngStream) -> Draws {
    let n = config.n;
    let mut d = Draws {
        y: Vec::with_capacity(n),
        w: Vec::with_capacity(n),
        x1: Vec::with_capacity(n),
        x2: Vec::with_capacity(n),
        x3: Vec::with_capacity(n),
        z: Vec::with_capacity(n),
        v: Vec::with_capacity(n),
        u: Vec::with_capacity(n),
    };
    for _ in 0..n {
        d.x1.push(StandardNormal.sample(rng));
        d.x2.push(if rng.random::<f64>() < 0.5 { 1.0 } else { 0.0 });
        d.x3.push(StandardNormal.sample(rng));
        d.z.push(if rng.random::<f64>() < 0.5 { 1.0 } else { 0.0 });
        let (v, u) = draw_errors(&config.confounder, rng);
        d.v.push(v);
        d.u.push(u);
    }
    d
}

fn finish(kind: TreatmentKind, mut d: Draws) -> Result<Dataset> {
    let (v, u) = (std::mem::take(&mut d.v), std::mem::take(&mut d.u));
    let mut ds = Dataset::new(kind, d.y, d.w, d.x1, d.x2, d.x3, d.z)?;
    ds.latent_v = Some(v);
    ds.latent_u = Some(u);
    Ok(ds)
}

/// W = 1 + a_z Z + X2 + X3 + V;  Y = 1{0.5 + b_w W + 0.5 X1 + 0.5 X2 + U >= 0}.
pub fn gen_continuous(config: &ScenarioConfig, rng: &mut RngStream) -> Result<Dataset> {
    if config.treatment_kind != TreatmentKind::Continuous {
        return Err(Error::invalid("gen_continuous needs a continuous scenario"));
    }
    if config.confounder.copula.family != CopulaFamily::Gaussian
        || config.confounder.margin != Margin::Normal
    {
        return Err(Error::invalid(
            "the continuous study is defined for bivariate normal errors only",
        ));
    }
    let alpha = config.true_alpha();
    let beta = config.true_beta();
    let mut d = draw_common(config, rng);
    for i in 0..config.n {
        let w = alpha[0] + alpha[1] * d.z[i] + alpha[2] * d.x2[i] + alpha[3] * d.x3[i] + d.v[i];
        let idx = beta[0] + beta[1] * w + beta[2] * d.x1[i] + beta[3] * d.x2[i] + d.u[i];
        d.w.push(w);
        d.y.push(if idx >= 0.0 { 1.0 } else { 0.0 });
    }
    finish(TreatmentKind::Continuous, d)
}

/// W = 1{a_0 + a_z Z + X2 + X3 + V >= 0};
/// Y = 1{-0.2 + b_w1 W + 0.5 X1 + 0.5 X2 - W X1 + U >= 0}.
pub fn gen_dichotomous(config: &ScenarioConfig, rng: &mut RngStream) -> Result<Dataset> {
    if config.treatment_kind != TreatmentKind::Dichotomous {
        return Err(Error::invalid("gen_dichotomous needs a dichotomous scenario"));
    }
    let alpha = config.true_alpha();
    let beta = config.true_beta();
    let mut d = draw_common(config, rng);
    for i in 0..config.n {
        let wi = alpha[0] + alpha[1] * d.z[i] + alpha[2] * d.x2[i] + alpha[3] * d.x3[i] + d.v[i];
        let w = if wi >= 0.0 { 1.0 } else { 0.0 };
        let idx = beta[0]
            + beta[1] * w
            + beta[2] * d.x1[i]
            + beta[3] * d.x2[i]
            + beta[4] * w * d.x1[i]
            + d.u[i];
        d.w.push(w);
        d.y.push(if idx >= 0.0 { 1.0 } else { 0.0 });
    }
    finish(TreatmentKind::Dichotomous, d)
}

/// Dispatches on the scenario's treatment kind.
pub fn generate(config: &ScenarioConfig, rng: &mut RngStream) -> Result<Dataset> {
    match config.treatment_kind {
        TreatmentKind::Continuous => gen_continuous(config, rng),
        TreatmentKind::Dichotomous => gen_dichotomous(config, rng),
    }
}
