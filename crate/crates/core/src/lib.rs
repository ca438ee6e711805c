//! Iterated random-to-top shuffles and their fixed points, descents and
//! inversions.
//!
//! The crate is organised bottom-up:
//!
//! * [`permutation`] holds decks in one-line notation and the three statistics.
//! * [`shuffle`] generates random-to-top decks, naively and by a linear-time
//!   replay of the selection sequence.
//! * [`occupancy`] is the balls-in-boxes law of the number of distinct cards
//!   ever selected.
//! * [`exact`] collects finite-n closed forms (return probabilities, expected
//!   statistics, the finite-n fixed-point law).
//! * [`decomposition`] samples each statistic from a uniform permutation and an
//!   occupancy draw instead of simulating the shuffle.
//! * [`limits`] evaluates the limiting laws and their parameters.
//! * [`harness`] runs seeded, parallel Monte Carlo experiments and
//!   goodness-of-fit tests; [`experiments`] wires them into the standard
//!   verification suites.

pub mod decomposition;
pub mod error;
pub mod exact;
pub mod experiments;
pub mod harness;
pub mod limits;
pub mod occupancy;
pub mod permutation;
pub mod rng;
pub mod shuffle;

pub use error::{Error, Result};
pub use permutation::{Permutation, PrefixSummary};
pub use shuffle::{SelectionSequence, ShuffleOutcome};
