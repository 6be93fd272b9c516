//! Numerical toolkit for the cubic family
//!
//! ```text
//! f(z) = z^3 - 3 c^2 z + a,        critical points +c and -c
//! ```
//!
//! restricted to the parameter curves on which the marked critical point `c`
//! is periodic of exact period `p`. The crate provides:
//!
//! - orbit iteration, escape bounds, cycle search ([`cubic`])
//! - Green functions and Boettcher coordinates at infinity and inside
//!   superattracting basins ([`potential`])
//! - solving and continuing the curve fibers ([`curve`])
//! - classification of the free critical orbit ([`classify`])
//! - exact ray-angle arithmetic, external/internal ray tracing, support
//!   graphs, puzzle pieces and tableaux ([`angle`], [`ray`], [`graph`],
//!   [`arrangement`], [`puzzle`], [`tableau`])
//! - parameter-space charts of hyperbolic components ([`chart`])

pub mod angle;
pub mod arrangement;
pub mod classify;
pub mod cubic;
pub mod curve;
pub mod dd;
pub mod graph;
pub mod potential;
pub mod ray;

#[cfg(test)]
mod testutil;

pub use angle::RayAngle;
pub use arrangement::{ArrangementArc, ArrangementError, Face, FaceId, PlanarArrangement};
pub use classify::{
    classify, classify_opts, flood_membership, trap_radius, CellVerdict, ClassifyOptions,
    FloodError, MembershipGrid, OrbitClass, TrapError,
};
pub use cubic::{CubicParam, CycleError, EscapeBound, MarkedCycle, Orbit, OrbitStatus, PeriodError};
pub use curve::{
    branch_continue, curve_degree, curve_stats, euler_characteristic, fiber_solve,
    on_curve_residual, BranchError, BranchSample, CurveStats, FiberError, FiberRoot, FiberSolution,
};
pub use potential::{
    bottcher_basin, bottcher_infinity, green_basin, green_infinity, BasinChart, GreenInfinity,
    PotentialError,
};
pub use ray::{
    colanding_external_angles, landing_point, trace_external_ray, trace_external_ray_opts,
    trace_internal_ray, CertifiedLanding, ExternalRayOptions, InternalRayBundle, LandingCert,
    RayError, RayKind, RayLanding, RaySample, TracedRay,
};
pub use num_complex::Complex64;
