//! Wait-free shared-memory consensus with a tunable hash-puzzle threshold
//! obfuscation, plus the machinery on both sides of it:
//!
//! * [`memory`] — deterministic process programs over atomic read/write
//!   registers: configurations, schedules, a step engine with an undo log.
//! * [`protocol`] — the s-round two-slot approximate-agreement procedure and
//!   the consensus wrapper that decides by evaluating a decision function on
//!   the agreed value.
//! * [`oracle`] — a seeded random-oracle hash with per-instance query
//!   metering, in an ideal and a SHA-256 mode.
//! * [`threshold`] — the threshold truth table hidden behind prefix/suffix
//!   hash puzzles: `preprocess` publishes commitments, `probe` recovers one
//!   bit by mining a suffix.
//! * [`adversary`] — the scheduling adversary that constructs an
//!   agreement-violating schedule in time linear in the protocol's step and
//!   transition budgets, and the reduction that turns such a schedule into a
//!   threshold crossing.
//! * [`attacker`] — query-metered attacks against the obfuscation itself
//!   (binary search, bounded-budget guessing) and the experiment harness
//!   that aggregates their cost statistics.

pub mod adversary;
pub mod attacker;
pub mod bits;
pub mod error;
pub mod memory;
pub mod oracle;
pub mod protocol;
pub mod seeds;
pub mod threshold;

pub use bits::BitString;
pub use error::{Error, Result};
pub use oracle::{OracleKind, OracleMode, RandomOracle};
