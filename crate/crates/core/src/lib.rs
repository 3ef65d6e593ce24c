//! No-signalling projection of Bell-experiment data for `(n, m, 2)`
//! scenarios, and projection-invariant (canonical) Bell expressions.
//!
//! A behaviour is a vector of settings-conditional outcome probabilities.
//! Empirical frequencies usually violate the no-signalling equalities a
//! little. [`projection::project_l2`] maps them to the closest point of the
//! affine hull of the no-signalling set through correlators. Bell
//! expressions rewritten over uniformly-averaged marginal correlators
//! ([`bell::canonicalize`]) take the same value before and after that
//! projection.
//!
//! ```
//! use nsbell::{bell, data, projection};
//!
//! let (f, _) = data::frequencies(&data::table1()).unwrap();
//! let chsh = bell::builtin(bell::Builtin::Chsh).unwrap();
//! let raw = bell::evaluate(&chsh, &f).unwrap().value;
//! let projected = bell::evaluate(&chsh, &projection::project_l2(&f)).unwrap().value;
//! assert!((raw - projected).abs() < 1e-12);
//! assert!(raw > 2.0);
//! ```

pub mod bell;
pub mod cli;
pub mod constraints;
pub mod correlators;
pub mod data;
pub mod error;
pub mod projection;
pub mod scenario;

pub use error::{Error, Result};
pub use scenario::{BehaviorVector, PartySubset, Role, Scenario};
