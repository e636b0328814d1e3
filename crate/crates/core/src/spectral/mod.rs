//! Finite-element Dirichlet Laplacian and its lowest eigenpairs.

mod assemble;
mod basis;
mod container;
mod eigen;
mod mesh;
mod sector;
mod skyline;
mod sparse;
mod weyl;

pub(crate) use assemble::assemble_elements;
pub use assemble::{assemble, assemble_full, assemble_with, element_mass, element_stiffness, Assembled};
pub use basis::{
    auto_mesh_size, mirror_mesh, reliable_count, solve_basis, solve_basis_with, solve_on_mesh, EigenBasis,
    HygieneReport, Parity, Sector, ORTHONORMALITY_TOL, QUADRANT_SIGNS, RESIDUAL_TOL,
};
pub use container::{read_basis, write_basis, CONTAINER_MAGIC, CONTAINER_VERSION};
pub use eigen::{count_below, fix_sign, solve_lowest, solve_lowest_with, EigenOptions, EigenPairs};
pub use mesh::{generate_mesh, Mesh, MeshQuality, MIN_ANGLE_DEG};
pub use sector::{quarter_mesh, symmetry_sector_solve, symmetry_sector_solve_with};
pub use skyline::{rcm_ordering, EnvelopeLdl};
pub use sparse::CsrMatrix;
pub use weyl::{
    count_at, default_band, weyl_count, weyl_report, weyl_report_levels, weyl_report_with_band, WeylReport,
};
