pub mod error;
pub mod gfn;
pub mod grid;
pub mod hull;
pub mod lab;
pub mod means;
pub mod stability;
pub mod supconv;
pub mod transport;

pub use error::{Error, Result};
pub use grid::{l1_distance, Cell, CellSet, Geometry, GridFunction, LevelSet};
pub use means::{exponent_map, p_mean, power_mean, MeanParams};
pub use supconv::{deficit, minkowski_combination, sup_convolution, verify_bbl_hypothesis, DeficitReport, Violation};
pub use hull::{
    convex_hull_set, hull_deficit, is_p_concave, p_concave_hull, p_plane_eval, tail_bound, tail_ratio,
    ConcavityReport, HullResult, PPlane, TailReport,
};
pub use transport::{
    height_transport, level_diagnostics, pushforward_check, spatial_transport, Density1D, DiagnosticsReport,
    TransportKind, TransportMap1D,
};
pub use stability::{
    best_shift, certify_linear, certify_main, certify_symmetric_difference, cone_equipartition_2d, fiber_project,
    shave, Cone2D, Equipartition, FiberProjection, Shaved, StabilityReport,
};
