//! Trajectory segments on saddle-type slow manifolds of slow-fast ODEs.
//!
//! The slow manifold `y = eta(x)` and the fiber tangent map `phi(x)` are computed
//! by fixed-point iterations on a small local grid ([`so`], [`sof`]). Trajectories on
//! the manifold use a fourth-order Runge-Kutta scheme whose stage points each trigger
//! a fresh manifold solve ([`reduced`]). Entry and exit transients are boundary value
//! problems posed on the fast space only ([`transient`]).

pub mod banded;
pub mod collocation;
pub mod differencing;
pub mod error;
pub mod experiments;
pub mod homoclinic;
pub mod models;
pub mod ode;
pub mod reduced;
pub mod series;
pub mod so;
pub mod sof;
pub mod spectral;
pub mod system;
pub mod transient;

pub use error::{Error, Result};
pub use system::{SlowFastSystem, State};
