mod bvp;
mod fem;
mod solver;
mod sparse;

pub use bvp::{boundary_flux, solve_mixed_bvp, BvpSolution};
pub(crate) use bvp::solve_with_values;
pub use fem::{
    assemble, boundary_mass, load_vector, mass, shape_gradients, stiffness, triangle_weight, Assembly, ScalarField,
    WeightSpec,
};
pub use solver::{pcg, rcm_ordering, solve_spd, Cholesky, Constraints, SpdSolver, DIRECT_LIMIT, SOLVE_TOLERANCE};
pub use sparse::SparseOperator;
pub(crate) use sparse::dot;
