//! Replica placement on hierarchical failure models.
//!
//! A failure model is a rooted tree whose nodes are failure events and whose
//! leaves are the servers that may hold replicas. A placement of `rho`
//! replicas is scored by its failure aggregate `<p_rho, ..., p_0>`, where
//! `p_i` counts nodes whose failure would take down exactly `i` replicas.
//! Placements are compared lexicographically from `p_rho` downward.
//!
//! The crate provides several placers that all return lexicographically
//! minimal aggregates:
//!
//! * [`oracles::brute_force_place`]: exhaustive enumeration,
//! * [`oracles::greedy_place`]: one leaf at a time by root-path aggregate,
//! * [`solver::solve`] in [`solver::Mode::Basic`]: balanced divide/conquer,
//! * [`solver::solve`] in [`solver::Mode::Fast`]: compact vectors plus the
//!   tree contractions in [`transform`].

pub mod aggregate;
pub mod error;
pub mod evaluator;
pub mod model;
pub mod oracles;
pub mod placement;
pub mod solver;
pub mod transform;

pub use aggregate::{lex_compare, AggregateDiff, CompactAggregate, FailureAggregate, LexVector};
pub use error::{Error, Result};
pub use model::{parse_topology, preprocess, FailureTree, NodeId, ParseError, RawTree};
pub use oracles::PlacerOutcome;
pub use placement::Placement;
pub use solver::Mode;
