//! Kernel interpolation solver for nonlinear PDEs on product grids.
//!
//! The solution is modelled as the kernel interpolant of nodal values `η` at
//! grid collocation points. With a product kernel the Gram matrix is a
//! Kronecker product of per-axis Grams, so evaluating derivatives, the RKHS
//! norm and the gradient of the soft-constrained objective only needs
//! per-axis mode products and triangular solves.

pub mod benchmarks;
pub mod error;
pub mod grid;
pub mod interpolant;
pub mod kernel1d;
pub mod naive;
pub mod objective;
pub mod optimizer;
pub mod tensor;

pub use error::{Error, Result};
pub use grid::{
    build_grid, classify_box, classify_box_faces, classify_region, fill_distance, AxisSpec,
    BoundarySites, DomainClassification, Face, Grid,
};
pub use interpolant::{
    eval_grid, eval_grid_adjoint, eval_point, DiffMatrixCache, MultiIndex, NodalField,
    ProductKernel,
};
pub use kernel1d::{gram_cholesky, se_deriv, AxisGram, SeKernel};
pub use objective::{
    loss, loss_gradient, rkhs_norm_sq, Combiner, LossConfig, LossParts, Objective, PdeProblem,
};
pub use optimizer::{adam_step, run, AdamHyper, AdamState, Init, RunConfig, SolveResult};
pub use tensor::{kron_matvec, kron_solve, mode_multiply, DenseTensor, Matrix};
