//! Regulator-versus-mine Stackelberg game with two leader objectives (tax
//! revenue, pollution damage) and a profit-maximizing follower.
//!
//! The crate covers both flavours of the model:
//!
//! * a single-period model with quadratic costs, solved in closed form
//!   ([`analytical`]);
//! * a multi-period model with technology alternatives and a piecewise-linear
//!   cumulative extraction cost ([`model`]), whose follower problem is solved
//!   by [`lower`] and whose leader frontier is approximated by the nested
//!   evolutionary search in [`bilevel`].
//!
//! [`oracle`] holds brute-force verifiers and [`verify`] bundles the
//! end-to-end checks used by the CLI and the acceptance tests.

// `!(x >= 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analytical;
pub mod bilevel;
pub mod error;
pub mod frontier;
pub mod io;
pub mod lower;
pub mod model;
pub mod oracle;
pub mod verify;
mod variation;

pub use analytical::WeightedSolution;
pub use bilevel::{ArchiveEntry, EaConfig, LowerSolverMode, ParetoArchive, TechChoice};

pub use error::{ModelError, Result};
pub use lower::{BestResponse, LowerEaConfig};
pub use model::{
    AnalyticalParams, ExtendedModel, FollowerResponse, LeaderStrategy, ModelConfig, ObjectivePoint,
    StrataTable, TechParams,
};
