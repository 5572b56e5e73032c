//! Simulation and estimation toolkit for experiments on personalized
//! recommender systems: potential-outcome oracles, cohort designs, a
//! deterministic multi-user simulator, cohort-contrast estimators, and
//! saturating-curve extrapolation.

pub mod cli;
pub mod design;
pub mod engine;
pub mod error;
pub mod estimate;
pub mod extrapolate;
pub mod model;
pub mod rng;
pub mod series;
pub mod worlds;

pub use design::{
    generate, Assignment, Cohort, CohortSchedule, DesignKind, DesignSpec, Directive, Fractions, MatchMode,
    UserAssignment,
};
pub use engine::{run_burn_in, run_experiment, FeatureStore, Panel, PanelRow};
pub use error::{Error, Result};
pub use estimate::{contrast, ContrastSpec, Estimator, StudySummary, Weighting};
pub use extrapolate::{nls_fit, CurveFamily, FamilyKind, FitResult};
pub use model::{BehaviorWorld, Counterfactual, EffectTruth, TreatmentHistory};
pub use series::{EffectKind, EffectSeries};
