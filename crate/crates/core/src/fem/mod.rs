//! P1 finite elements: sparse storage, DOF maps, assembly and solvers.

pub mod assembly;
pub mod dof;
pub mod solve;
pub mod sparse;

pub use assembly::{
    Tensor, add_advection, add_boundary_load, add_boundary_load_nodal, add_boundary_mass, add_diffusion, add_load,
    add_mass, assemble_advection, assemble_boundary_load, assemble_boundary_mass, assemble_diffusion, assemble_mass,
    basis_gradients, gradient, identity_map, iso, region_map,
};
pub use dof::{DofMap, Field, NO_DOF};
pub use solve::{BandedLu, Method, bicgstab, pcg, pcg_with, rel_residual, solve_linear};
pub use sparse::{Csr, Triplets, dot, norm2, norm_inf};
