//! Simulator and attack harness for single-qubit quantum secret sharing.
//!
//! The crate runs the original sequential phase-encoding protocol, its two
//! announcement-order variants and the codeword-checked secure variant, with
//! pluggable honest and adversarial participants.

pub mod codes;
pub mod quantum;

pub mod adversary;
pub mod harness;
pub mod protocol;
