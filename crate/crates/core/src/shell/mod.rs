//! Discrete thin-shell model of cold-bent glass panels.

pub mod delaunay;
pub mod element;
pub mod harmonic;
pub mod material;
pub mod mesh;
pub mod meshing;
pub mod solver;
pub mod stress;

pub use harmonic::Harmonic;
pub use material::{Material, MaterialParams};
pub use mesh::{Topology, TriPanelMesh};
pub use meshing::{init_panel_mesh, MeshOptions};
pub use solver::{minimize_panel, DofLayout, PanelEnergy, PanelEquilibrium, SolveError, SolverOptions, SolverStats, Termination};
pub use stress::{aggregate_stress, max_engineering_stress, stress_field, StressField};
