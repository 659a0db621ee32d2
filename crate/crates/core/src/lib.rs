//! Linear shrinkage estimation for LP constraint matrices observed through a
//! few noisy samples, the nominal / shrinkage / robust optimization models
//! built on top of it, and a reproducible Monte-Carlo comparison harness.

pub mod harness;
pub mod matrix;
pub mod scenario;
pub mod shrinkage;
pub mod solver;

pub use matrix::{frobenius_inner, frobenius_norm_sq, make_spd_root, CovarianceSpec, DenseMatrix, MatrixError};
pub use scenario::{
    generate_instance, generate_observations, generate_observations_with_truth, Innovation, Instance,
    NoiseModel, NoiseTruth, RngStream, ScenarioSpec,
};
pub use shrinkage::{
    coefficients_asymptotic_oracle, coefficients_bona_fide, coefficients_finite_sample_oracle,
    noise_level_hat, sample_mean, shrunk_matrix, target_from_matrix, target_ones, transpose_observations,
    CoefficientKind, NoiseTag, ObservationSet, ShrinkageCoefficients, ShrinkageError, TargetKind, TargetMatrix,
};
pub use solver::{
    build_nominal, build_shrinkage, robust_support_value, solve_lp, solve_robust, ConstrainedProblem,
    RobustMethod, RobustOptions, Solution, SolveStatus, SolverError,
};
