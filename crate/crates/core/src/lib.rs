//! Model selection for instrumental-variable probit models with a possibly
//! endogenous treatment.
//!
//! The crate fits joint treatment/outcome models by limited-information
//! maximum likelihood (continuous treatment via the Rivers-Vuong likelihood,
//! dichotomous treatment via a bivariate-probit four-cell likelihood),
//! selects among candidate formula pairs with likelihood-based AIC/BIC, and
//! benchmarks the result against two-stage competitors (2SLS, 2SRI) in a
//! reproducible Monte Carlo harness.

pub mod dgp;
pub mod effects;
pub mod error;
pub mod estimators;
pub mod model;
pub(crate) mod optim;
pub mod selection;
pub mod stats;
pub mod study;

pub use error::Error;
pub use model::{CandidateCatalog, Dataset, ModelFormula, Side, Term, TreatmentKind, Var, VarVals};


/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
