//! Generation and checking of stack-inspection access-control policies.
//!
//! A program model (a context-sensitive call graph, a permission dependency
//! graph, and points-to / string facts) is encoded as a conditional weighted
//! pushdown system. Solving a meet-over-all-paths query on that system yields,
//! for every method, the permissions it must be granted so that every
//! `checkPermission` reached along a valid call path passes.
//!
//! Pipeline: [`model::parse_model`] → [`permgen::generate_permissions`] →
//! [`policygen::generate_policy`] → [`policygen::emit_policy`] /
//! [`policygen::check_policy`]. The [`oracle`] module is an executable
//! path-enumeration semantics used to cross-check the engine.

pub mod contexts;
pub mod cwpds;
pub mod error;
pub mod ids;
pub mod model;
pub mod oracle;
pub mod permgen;
pub mod policygen;
pub mod samples;
pub mod weights;

pub use error::{Error, Result};
pub use ids::{CallSite, MethodId};
