//! Combinatorial optimization problems solved as layered, deterministic,
//! undiscounted MDPs.
//!
//! [`problems`] holds instances and a brute-force oracle, [`mdp`] turns an
//! instance into a finite MDP, [`exact`] runs value iteration on it,
//! [`affine`] and [`fvi`] approximate the optimal value function, [`decode`]
//! turns any value function back into a candidate solution, and [`harness`]
//! drives the batch experiments.

pub mod affine;
pub mod decode;
pub mod error;
pub mod exact;
pub mod fvi;
pub mod harness;
pub mod mdp;
pub mod problems;
pub mod rng;

pub use error::{Error, Result};
