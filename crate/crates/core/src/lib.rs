//! Data-driven discovery of governing PDE operators with counterfactual
//! validation.
//!
//! The crate fits a differentiable surrogate `u(x[,y],t)` to scattered
//! observations while sparsifying a library of candidate differential
//! operators, so that the time derivative is explained by a short list of
//! active terms (`∂_t u = Σ_j α_j T_j[u]`). Candidate terms are then stress
//! tested by *intervening* on the fitted model — zeroing, scaling, or
//! replacing an operator — and re-solving, which separates terms that merely
//! fit the residual from terms that actually drive the dynamics.
//!
//! Module map:
//! - [`model`]: domains, operator specs, structural models, interventions.
//! - [`jet`]: second-order forward-mode scalars and the jet types.
//! - [`surrogate`]: sine-activation MLP with exact jets and parameter
//!   gradients.
//! - [`field`] / [`quadrature`]: field adapters (analytic, gridded) and
//!   trapezoid norms.
//! - [`design`]: operator evaluation, design matrices, residual fields,
//!   mutual coherence.
//! - [`solver`]: explicit finite-difference reference solver, benchmark
//!   generation, counterfactual solves.
//! - [`sparse`]: soft-thresholding, ISTA, recovery certificates.
//! - [`trainer`]: joint surrogate/coefficient optimization and the frozen
//!   baseline.
//! - [`diagnostics`]: CSI, causal influence, counterfactual deviation,
//!   adjoint sensitivities, residual error bound.

pub mod design;
pub mod diagnostics;
pub mod error;
pub mod field;
pub mod jet;
pub mod linalg;
pub mod model;
pub mod quadrature;
pub mod rng;
pub mod solver;
pub mod sparse;
pub mod surrogate;
pub mod trainer;

pub use design::{assemble_design, mutual_coherence, residual_field, DesignMatrix, ResidualField};
pub use diagnostics::{
    adjoint_sensitivity, causal_derivative, causal_influence, check_residual_bound,
    classify_relevance, counterfactual_deviation, csi, mode_projected_deviation, BoundCheck,
    DiagThresholds, DiagnosticsReport, Observable, OperatorDiag,
};
pub use error::{CoreError, Result};
pub use field::{AnalyticField, FieldEval, GriddedField};
pub use jet::{Jet2, JetSeed, Scalar2};
pub use model::{
    apply_intervention, validate_model, Action, CoefficientEstimate, InitialCondition,
    Intervention, OpKind, OperatorSpec, Point, Sample, SampleSet, SourceFn, SpaceTimeDomain,
    StructuralModel,
};
pub use quadrature::{l2_distance, l2_norm, CollocGrid};
pub use solver::{generate_benchmark, solve_counterfactual, solve_fd, BenchmarkName, BenchmarkSpec};
pub use sparse::{
    certify_recovery, ista_solve, lambda_sweep, lambda_sweep_with, soft_threshold, IstaResult, LambdaSweep,
    LassoProblem, RecoveryCertificate,
};
pub use surrogate::{JetComponent, SurrogateNet};
pub use trainer::{
    retrain_counterfactual, train, train_baseline_pinn, EpochRecord, LossParts, TrainConfig,
    TrainOutcome, TrainTrace,
};
