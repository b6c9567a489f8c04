//! Two-photon Jaynes–Cummings model with Kerr nonlinearity.
//!
//! A two-level atom exchanges photon pairs with two field modes. The crate
//! provides three independent ways to evolve it:
//!
//! * [`hilbert::Propagator`], exact evolution by 2×2 block diagonalization;
//! * [`series::DiagonalSeries`], closed-form Rabi sums for number-diagonal fields;
//! * [`hierarchy::integrate`], the truncated relevant-operator hierarchy,
//!   which also accepts time-dependent couplings.
//!
//! [`stark`] maps the Kerr model onto an equivalent Stark-shift model and
//! [`scenario`] ties everything into configurable runs.

pub mod error;
pub mod field;
pub mod hierarchy;
pub mod hilbert;
pub mod observables;
pub mod ode;
pub mod params;
pub mod scenario;
pub mod series;
pub mod stark;
pub mod sum;

pub use error::{Error, Result};
pub use field::{FieldState, FieldStateSpec};
pub use hierarchy::{Envelope, RoState};
pub use hilbert::{Hamiltonian, Level, RoFamily, StateVector};
pub use params::{ModelParams, Truncation};
