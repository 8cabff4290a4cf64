//! Smooth paths from waypoint sequences by conventional and directional mollification.
//!
//! A polyline `f` through waypoints `P₀, …, P_p` is parametrized on `[0, p]` with unit
//! parameter per segment and extended affinely beyond both ends. Convolving it with a
//! compactly supported bump kernel gives the conventional mollification `F_ε`; adding the
//! directional derivative term `D_ε` gives `F̂_ε`, which is still smooth but passes through
//! every waypoint when `ε < 1`. The family `G_ε^γ = F_ε + γ·D_ε` interpolates between them.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod curvature;
pub mod io;
pub mod kernel;
pub mod mollify;
pub mod polyline;
pub mod quadrature;
pub mod verify;

pub use curvature::{
    bound_combined, bound_directional, curvature_from_derivatives, exact_corner_curvature,
    select_epsilon, wedge_norm, CornerGeometry, CurvatureError, CurvatureReport,
};
pub use kernel::{BumpProfile, Kernel, KernelError, KernelProfile};
pub use mollify::{
    combined_eval, conventional_eval, directional_eval, directional_term_eval, sample, Method,
    Mollifier, SampledPath, SmoothingConfig,
};
pub use polyline::{Polyline, PolylineError};
pub use verify::{quadrature_oracle, CheckReport};
