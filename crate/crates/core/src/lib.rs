//! Simulation and moment-based learning of mixtures of linear dynamical
//! systems.
//!
//! The learner estimates sixth-order input/output moments from short
//! trajectories, decomposes the resulting order-3 tensor with Jennrich's
//! algorithm to obtain each component's Markov parameters (up to a weight
//! factor), recovers the mixing weights by regression on second moments, and
//! realizes each component with the stable Ho-Kalman procedure.
//!
//! ```
//! use ldslab::lds::{LdsParams, MixtureSpec};
//! use ldslab::learner::{learn_from_exact_moments, LearnConfig};
//! use ldslab::lds::substream;
//!
//! let mix = MixtureSpec::uniform(vec![
//!     LdsParams::scalar(0.5, 1.0, 1.0, 0.3),
//!     LdsParams::scalar(-0.6, 1.2, 1.0, -0.4),
//! ]).unwrap();
//! let learned = learn_from_exact_moments(&mix, &LearnConfig::new(2, 1, 1), &mut substream(0, 0)).unwrap();
//! assert!(learned.align(&mix).unwrap().max_error < 1e-6);
//! ```

pub mod error;
pub mod ho_kalman;
pub mod lds;
pub mod learner;
pub mod linalg;
pub mod moments;
pub mod tensor;

pub use error::{LdsError, Result};
