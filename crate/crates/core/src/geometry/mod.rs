//! Panel geometry: boundary curves, Bézier patches, the adapted frame, the
//! compact boundary encoding, interior fitting, symmetry relabelings and the
//! quad base mesh.

pub mod boundary;
pub mod compact;
pub mod curve;
pub mod fit;
pub mod frame;
pub mod patch;
pub mod quad_mesh;
pub mod schema;
pub mod symmetry;

pub use boundary::{EdgeCurveParams, PanelBoundary, THETA_MAX};
pub use compact::{compact_decode, compact_encode, decode_panel, encode_panel, CompactBoundary, Encoded, Shape};
pub use curve::build_boundary_curve;
pub use fit::{fit_interior_controls, FitResult, FitTarget, W_B};
pub use frame::{adapted_frame, AdaptedFrame};
pub use patch::{BezierPatch, PatchPoint};
pub use quad_mesh::{parse_obj_polygons, MeshIssue, Polyline, QuadBaseMesh};
pub use symmetry::symmetry_orbit;
