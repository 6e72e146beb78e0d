//! Compatibility of pairs of binary qubit measurements: the Yu criterion,
//! explicit joint measurements, random measurement ensembles and estimates of
//! the probability that a random pair is incompatible.

pub mod criterion;
pub mod error;
pub mod estimate;
pub mod joint;
pub mod povm;
pub mod quadrature;
pub mod sampling;

pub use criterion::{busch_g, h_func, region_membership, unbiased_f, yu_compatible, CompatVerdict};
pub use error::{Error, Result};
pub use estimate::{EstimateResult, Method, ProbabilityGrid};
pub use joint::{
    build_m_thm1, build_t_product, construct_unbiased_witness, feasibility_oracle, g_tensor, marginal, qubit_constraints,
    qubit_joint, ConstraintSlack, NoiseTensor, QubitNoiseParam,
};
pub use povm::{validate_povm, BlochPovm, HermitianOp, PovmTensor, ProbabilityVector, ValidationReport};
pub use sampling::{sample_pair, MeasureSpec, RngStream};
