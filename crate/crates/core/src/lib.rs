//! Impact of single-edge modifications on discrete-time networked linear
//! systems.
//!
//! Two network families are supported:
//!
//! * **direct stable** networks `x(t+1) = A x(t) + B u(t)`, `A >= 0`,
//!   `rho(A) < 1`, analysed through [`stable_analysis`];
//! * **Laplacian** consensus networks `x(t+1) = (I - L) x(t) + B u(t)`,
//!   analysed through [`laplacian_analysis`].
//!
//! [`oracle`] contains brute-force reference computations (frequency sweeps,
//! truncated impulse sums, simulation) used to check the closed forms.

pub mod error;
pub mod graph_model;
pub mod laplacian_analysis;
pub mod linalg;
pub mod lyapunov;
pub mod oracle;
pub mod report;
pub mod stable_analysis;
pub mod system;

pub use error::{Error, Result};
pub use graph_model::{build_network, EdgeMod, Network, NetworkKind, SpectralCondition};
pub use laplacian_analysis::LaplacianKernel;
pub use stable_analysis::SteadyStateKernel;
pub use system::LinearSystem;
