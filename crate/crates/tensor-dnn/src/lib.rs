//! Best nonnegative rank-one approximation of partially symmetric tensors and
//! tensor copositivity testing, via a doubly nonnegative conic relaxation
//! solved with a first-order splitting method.
//!
//! The pipeline: convert a tensor to its multi-form coefficient vector, lift
//! odd degrees with auxiliary variables, assemble the moment-matrix program
//! (`min ⟨C, X⟩` over class-constant doubly nonnegative matrices with a norm
//! normalization), solve it by consensus splitting, then extract a rank-one
//! candidate from the moment vector and certify tightness through the second
//! singular value.

pub mod apps;
pub mod basis;
pub mod error;
pub mod extract;
pub mod model;
pub mod solver;
pub mod tensor;

pub use apps::{
    best_nonneg_rank_one, best_nonneg_rank_one_reduced, bound_ratio, brute_force_min,
    polish_ascent, test_copositivity, theta_matrix, ApproxReport, CopositivityVerdict,
    SolverSummary, Verdict,
};
pub use basis::{build_basis, class_average, count_constraints, nu, IndexSet, MomentBasis};
pub use error::{Error, Result};
pub use extract::{certify, extract_even, extract_odd, metrics, ExtractionResult};
pub use model::{assemble, g_coefficients, lift_odd, reduce_linear, DnnProblem, LiftRecord};
pub use solver::{
    kkt_residuals, project_affine, solve, DnnSolution, Residuals, SolveStatus, SolverOptions,
};
pub use tensor::{GroupedVector, MultiForm, Shape, Tensor};
