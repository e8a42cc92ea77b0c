//! Instance-dependent sample complexity of PAC best-policy identification in
//! tabular episodic MDPs.
//!
//! The crate is `no_std` (with `alloc`) so that the numerical core can be
//! embedded anywhere; file formats, the CLI and parallel experiment drivers
//! live in the `pacbound` companion crate.
//!
//! Module map:
//!
//! * [`mdp`]: the MDP model, exact planning, occupancy measures, policy
//!   enumeration and gap profiles.
//! * [`flow`]: convex programs over the occupancy polytope (min-max designs,
//!   MinFlow covering, constrained linear maximization).
//! * [`complexity`]: lower bounds, characteristic times and the complexity
//!   measures of PEDEL and PRINCIPLE, plus the comparison checks between them.
//! * [`sim`]: seeded episode sampling with Gaussian rewards, reward estimates
//!   and concentration thresholds.
//! * [`edipe`]: phased experimental design with implicit policy elimination.
#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod complexity;
pub mod edipe;
mod error;
pub mod flow;
mod math;
pub mod mdp;
mod shape;
pub mod sim;

pub use error::{Error, Result};
pub use shape::{Shape, Table};
