//! Model formulas, candidate catalogs, design rows, and datasets.
//!
//! A formula is an ordered term list (intercept first) for one side of the
//! joint model. Treatment-side formulas regress W on Z and covariates, so W
//! itself never appears there; outcome-side formulas exclude Z (the
//! instrument enters the outcome only through W).

use std::fmt;
use std::io::{Read, Write};
use std::path::Path;

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Var {
    Z,
    W,
    X1,
    X2,
    X3,
}

impl Var {
    pub fn name(self) -> &'static str {
        match self {
            Var::Z => "z",
            Var::W => "w",
            Var::X1 => "x1",
            Var::X2 => "x2",
            Var::X3 => "x3",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Term {
    Intercept,
    Main(Var),
    /// Product of two distinct variables, stored in canonical order.
    Interaction(Var, Var),
}

impl Term {
    pub fn interaction(a: Var, b: Var) -> Term {
        if a <= b {
            Term::Interaction(a, b)
        } else {
            Term::Interaction(b, a)
        }
    }

    fn contains(self, v: Var) -> bool {
        match self {
            Term::Intercept => false,
            Term::Main(a) => a == v,
            Term::Interaction(a, b) => a == v || b == v,
        }
    }

    /// Evaluate the term on one observation.
    pub fn value(self, vals: &VarVals) -> f64 {
        match self {
            Term::Intercept => 1.0,
            Term::Main(a) => vals.get(a),
            Term::Interaction(a, b) => vals.get(a) * vals.get(b),
        }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Intercept => write!(f, "1"),
            Term::Main(v) => write!(f, "{}", v.name()),
            Term::Interaction(a, b) => write!(f, "{}:{}", a.name(), b.name()),
        }
    }
}

/// Values of one observation's variables.
#[derive(Debug, Clone, Copy)]
pub struct VarVals {
    pub z: f64,
    pub w: f64,
    pub x1: f64,
    pub x2: f64,
    pub x3: f64,
}

impl VarVals {
    fn get(&self, v: Var) -> f64 {
        match v {
            Var::Z => self.z,
            Var::W => self.w,
            Var::X1 => self.x1,
            Var::X2 => self.x2,
            Var::X3 => self.x3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Treatment,
    Outcome,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModelFormula {
    side: Side,
    terms: Vec<Term>,
    label: String,
}

impl ModelFormula {
    /// Build a formula. The term list must start with the intercept, contain
    /// no duplicates, and respect the side's variable exclusions.
    pub fn new(side: Side, terms: Vec<Term>, label: impl Into<String>) -> Result<Self> {
        let label = label.into();
        if terms.first() != Some(&Term::Intercept) {
            return Err(Error::invalid(format!(
                "formula {label}: first term must be the intercept"
            )));
        }
        let banned = match side {
            Side::Treatment => Var::W,
            Side::Outcome => Var::Z,
        };
        for (i, t) in terms.iter().enumerate() {
            if t.contains(banned) {
                return Err(Error::invalid(format!(
                    "formula {label}: {t} is not allowed on the {side:?} side"
                )));
            }
            if let Term::Interaction(a, b) = t {
                if a == b {
                    return Err(Error::invalid(format!(
                        "formula {label}: interaction of a variable with itself"
                    )));
                }
                if a > b {
                    return Err(Error::invalid(format!(
                        "formula {label}: interaction {t} not in canonical order"
                    )));
                }
            }
            if terms[..i].contains(t) {
                return Err(Error::invalid(format!("formula {label}: duplicate term {t}")));
            }
        }
        Ok(ModelFormula { side, terms, label })
    }

    pub fn side(&self) -> Side {
        self.side
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn n_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn contains_var(&self, v: Var) -> bool {
        self.terms.iter().any(|t| t.contains(v))
    }

    /// Index of the main-effect term for `v`, if present.
    pub fn main_index(&self, v: Var) -> Option<usize> {
        self.terms.iter().position(|t| *t == Term::Main(v))
    }

    /// Design row in term order.
    pub fn design_row(&self, vals: &VarVals) -> Vec<f64> {
        self.terms.iter().map(|t| t.value(vals)).collect()
    }

    /// Whether every term of `self` appears in `big` (order-free); both
    /// formulas must be for the same side. Reflexive.
    pub fn nests_in(&self, big: &ModelFormula) -> bool {
        self.side == big.side && self.terms.iter().all(|t| big.terms.contains(t))
    }
}

#[derive(Debug, Clone)]
pub struct CandidateCatalog {
    side: Side,
    candidates: Vec<ModelFormula>,
    true_label: String,
}

impl CandidateCatalog {
    pub fn new(side: Side, candidates: Vec<ModelFormula>, true_label: impl Into<String>) -> Result<Self> {
        let true_label = true_label.into();
        if candidates.is_empty() {
            return Err(Error::invalid("catalog needs at least one candidate"));
        }
        for (i, c) in candidates.iter().enumerate() {
            if c.side() != side {
                return Err(Error::invalid(format!("candidate {} is for the wrong side", c.label())));
            }
            if candidates[..i].iter().any(|p| p.label() == c.label()) {
                return Err(Error::invalid(format!("duplicate candidate label {}", c.label())));
            }
        }
        if !candidates.iter().any(|c| c.label() == true_label) {
            return Err(Error::invalid(format!("true label {true_label} not among candidates")));
        }
        Ok(CandidateCatalog {
            side,
            candidates,
            true_label,
        })
    }

    pub fn side(&self) -> Side {
        self.side
    }

    pub fn candidates(&self) -> &[ModelFormula] {
        &self.candidates
    }

    pub fn true_label(&self) -> &str {
        &self.true_label
    }

    pub fn true_formula(&self) -> &ModelFormula {
        self.get(&self.true_label).expect("validated on construction")
    }

    pub fn get(&self, label: &str) -> Option<&ModelFormula> {
        self.candidates.iter().find(|c| c.label() == label)
    }
}

fn f(side: Side, label: &str, terms: Vec<Term>) -> ModelFormula {
    ModelFormula::new(side, terms, label).expect("catalog formulas are well formed")
}

/// Treatment-side candidates a1..a7 (true model a4). The full form regresses
/// W on z, x2, x3 and their pairwise interactions.
pub fn catalog_continuous_treatment() -> CandidateCatalog {
    use Term::{Intercept as I, Main as M};
    use Var::*;
    let ix = Term::interaction;
    let c = vec![
        f(Side::Treatment, "a1", vec![I, M(Z)]),
        f(Side::Treatment, "a2", vec![I, M(Z), M(X2)]),
        f(Side::Treatment, "a3", vec![I, M(Z), M(X3)]),
        f(Side::Treatment, "a4", vec![I, M(Z), M(X2), M(X3)]),
        f(Side::Treatment, "a5", vec![I, M(Z), M(X2), ix(Z, X2)]),
        f(Side::Treatment, "a6", vec![I, M(Z), M(X3), ix(Z, X3)]),
        f(
            Side::Treatment,
            "a7",
            vec![I, M(Z), M(X2), M(X3), ix(Z, X2), ix(Z, X3), ix(X2, X3)],
        ),
    ];
    CandidateCatalog::new(Side::Treatment, c, "a4").expect("static catalog")
}

/// Outcome-side candidates b1..b5 for the continuous-treatment study
/// (true model b2; no W interactions in this family).
pub fn catalog_continuous_outcome() -> CandidateCatalog {
    use Term::{Intercept as I, Main as M};
    use Var::*;
    let ix = Term::interaction;
    let c = vec![
        f(Side::Outcome, "b1", vec![I, M(W)]),
        f(Side::Outcome, "b2", vec![I, M(W), M(X1), M(X2)]),
        f(Side::Outcome, "b3", vec![I, M(W), M(X1), M(X2), M(X3)]),
        f(Side::Outcome, "b4", vec![I, M(W), M(X1), M(X2), ix(X1, X2)]),
        f(
            Side::Outcome,
            "b5",
            vec![I, M(W), M(X1), M(X2), M(X3), ix(X1, X2), ix(X1, X3), ix(X2, X3)],
        ),
    ];
    CandidateCatalog::new(Side::Outcome, c, "b2").expect("static catalog")
}

/// Treatment side for the dichotomous study: selection runs over outcome
/// candidates only, so the catalog holds just the true first-stage form.
pub fn catalog_dichotomous_treatment() -> CandidateCatalog {
    use Term::{Intercept as I, Main as M};
    use Var::*;
    let c = vec![f(Side::Treatment, "a4", vec![I, M(Z), M(X2), M(X3)])];
    CandidateCatalog::new(Side::Treatment, c, "a4").expect("static catalog")
}

/// Outcome-side candidates b1..b7 for the dichotomous-treatment study
/// (true model b5, which carries the w:x1 interaction).
pub fn catalog_dichotomous_outcome() -> CandidateCatalog {
    use Term::{Intercept as I, Main as M};
    use Var::*;
    let ix = Term::interaction;
    let c = vec![
        f(Side::Outcome, "b1", vec![I, M(W)]),
        f(Side::Outcome, "b2", vec![I, M(W), M(X1), M(X2)]),
        f(Side::Outcome, "b3", vec![I, M(W), M(X1), M(X2), M(X3)]),
        f(
            Side::Outcome,
            "b4",
            vec![I, M(W), M(X1), M(X2), M(X3), ix(X1, X2), ix(X1, X3), ix(X2, X3)],
        ),
        f(Side::Outcome, "b5", vec![I, M(W), M(X1), M(X2), ix(W, X1)]),
        f(Side::Outcome, "b6", vec![I, M(W), M(X1), M(X2), M(X3), ix(W, X1)]),
        f(
            Side::Outcome,
            "b7",
            vec![I, M(W), M(X1), M(X2), M(X3), ix(W, X1), ix(X1, X2), ix(X1, X3), ix(X2, X3)],
        ),
    ];
    CandidateCatalog::new(Side::Outcome, c, "b5").expect("static catalog")
}

/// The (treatment, outcome) candidate catalogs belonging to a study kind.
pub fn catalogs_for(kind: TreatmentKind) -> (CandidateCatalog, CandidateCatalog) {
    match kind {
        TreatmentKind::Continuous => {
            (catalog_continuous_treatment(), catalog_continuous_outcome())
        }
        TreatmentKind::Dichotomous => {
            (catalog_dichotomous_treatment(), catalog_dichotomous_outcome())
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TreatmentKind {
    Continuous,
    Dichotomous,
}

/// One generated or loaded sample. `y` is always binary; `w` is binary only
/// for dichotomous treatments. Latent errors are carried when the generator
/// is asked to keep them (debug output), never required downstream.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub treatment_kind: TreatmentKind,
    pub y: Vec<f64>,
    pub w: Vec<f64>,
    pub x1: Vec<f64>,
    pub x2: Vec<f64>,
    pub x3: Vec<f64>,
    pub z: Vec<f64>,
    pub latent_v: Option<Vec<f64>>,
    pub latent_u: Option<Vec<f64>>,
}

impl Dataset {
    pub fn new(
        treatment_kind: TreatmentKind,
        y: Vec<f64>,
        w: Vec<f64>,
        x1: Vec<f64>,
        x2: Vec<f64>,
        x3: Vec<f64>,
        z: Vec<f64>,
    ) -> Result<Self> {
        let n = y.len();
        if n == 0 {
            return Err(Error::invalid("dataset must not be empty"));
        }
        for (name, col) in [("w", &w), ("x1", &x1), ("x2", &x2), ("x3", &x3), ("z", &z)] {
            if col.len() != n {
                return Err(Error::invalid(format!(
                    "column {name} has {} rows, expected {n}",
                    col.len()
                )));
            }
        }
        if y.iter().any(|&v| v != 0.0 && v != 1.0) {
            return Err(Error::invalid("y must be 0/1"));
        }
        if z.iter().any(|&v| v != 0.0 && v != 1.0) {
            return Err(Error::invalid("z must be 0/1"));
        }
        if treatment_kind == TreatmentKind::Dichotomous && w.iter().any(|&v| v != 0.0 && v != 1.0) {
            return Err(Error::invalid("w must be 0/1 for a dichotomous treatment"));
        }
        if [&w, &x1, &x3].iter().any(|c| c.iter().any(|v| !v.is_finite())) {
            return Err(Error::invalid("non-finite value in dataset"));
        }
        Ok(Dataset {
            treatment_kind,
            y,
            w,
            x1,
            x2,
            x3,
            z,
            latent_v: None,
            latent_u: None,
        })
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn vals(&self, i: usize) -> VarVals {
        VarVals {
            z: self.z[i],
            w: self.w[i],
            x1: self.x1[i],
            x2: self.x2[i],
            x3: self.x3[i],
        }
    }

    /// Reject samples no estimator can work with: a constant outcome,
    /// instrument, or (dichotomous) treatment.
    pub fn check_nondegenerate(&self) -> Result<()> {
        let constant = |col: &[f64]| col.iter().all(|&v| v == col[0]);
        if constant(&self.y) {
            return Err(Error::degenerate("outcome y is constant"));
        }
        if constant(&self.z) {
            return Err(Error::degenerate("instrument z is constant"));
        }
        if self.treatment_kind == TreatmentKind::Dichotomous && constant(&self.w) {
            return Err(Error::degenerate("treatment w is constant"));
        }
        Ok(())
    }

    const HEADER: [&'static str; 6] = ["y", "w", "x1", "x2", "x3", "z"];

    /// Write as CSV. With `debug_latents` the stored latent errors are
    /// appended as `v,u` columns.
    pub fn write_csv<W: Write>(&self, out: W, debug_latents: bool) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(out);
        let with_latents = debug_latents && self.latent_v.is_some() && self.latent_u.is_some();
        if with_latents {
            wtr.write_record(Self::HEADER.iter().copied().chain(["v", "u"]))?;
        } else {
            wtr.write_record(Self::HEADER)?;
        }
        let (lv, lu) = (
            self.latent_v.as_deref().unwrap_or(&[]),
            self.latent_u.as_deref().unwrap_or(&[]),
        );
        let mut record = Vec::with_capacity(8);
        for i in 0..self.n() {
            record.clear();
            for v in [self.y[i], self.w[i], self.x1[i], self.x2[i], self.x3[i], self.z[i]] {
                record.push(v.to_string());
            }
            if with_latents {
                record.push(lv[i].to_string());
                record.push(lu[i].to_string());
            }
            wtr.write_record(&record)?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn write_csv_path(&self, path: &Path, debug_latents: bool) -> Result<()> {
        let file = std::fs::File::create(path)?;
        self.write_csv(file, debug_latents)
    }

    /// Read a dataset written by `write_csv`. The six-column header is
    /// required verbatim; the two latent columns are optional.
    pub fn read_csv<R: Read>(input: R, treatment_kind: TreatmentKind) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(input);
        let header: Vec<String> = rdr.headers()?.iter().map(|s| s.trim().to_string()).collect();
        let with_latents = match header.len() {
            6 if header == Self::HEADER => false,
            8 if header[..6] == Self::HEADER && header[6] == "v" && header[7] == "u" => true,
            _ => {
                return Err(Error::invalid(format!(
                    "unexpected CSV header {:?}, want y,w,x1,x2,x3,z[,v,u]",
                    header.join(",")
                )))
            }
        };
        let mut cols: Vec<Vec<f64>> = vec![Vec::new(); header.len()];
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec?;
            if rec.len() != header.len() {
                return Err(Error::invalid(format!("row {} has {} fields", line + 2, rec.len())));
            }
            for (j, field) in rec.iter().enumerate() {
                let v: f64 = field.trim().parse().map_err(|_| {
                    Error::invalid(format!("row {}, column {}: bad number {field:?}", line + 2, header[j]))
                })?;
                cols[j].push(v);
            }
        }
        let mut it = cols.into_iter();
        let (y, w, x1, x2, x3, z) = (
            it.next().unwrap(),
            it.next().unwrap(),
            it.next().unwrap(),
            it.next().unwrap(),
            it.next().unwrap(),
            it.next().unwrap(),
        );
        let mut ds = Dataset::new(treatment_kind, y, w, x1, x2, x3, z)?;
        if with_latents {
            ds.latent_v = it.next();
            ds.latent_u = it.next();
        }
        Ok(ds)
    }

    pub fn read_csv_path(path: &Path, treatment_kind: TreatmentKind) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::read_csv(file, treatment_kind)
    }
}
