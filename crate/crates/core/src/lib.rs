//! Low-rank matrix recovery.
//!
//! Recover a rank-`r` matrix `X` from linear measurements `y = A(X)` (matrix
//! sensing, matrix completion) or from phaseless measurements `y = |Ax|²`
//! (phase retrieval). Three families of solvers are provided:
//!
//! * [`convex`]: singular value thresholding, forward-backward splitting and
//!   ADMM for nuclear-norm formulations;
//! * [`factored`]: projected gradient descent on Burer–Monteiro factors and
//!   Wirtinger flow;
//! * [`manifold`]: iterative hard thresholding (IHT/NIHT) and Riemannian
//!   gradient / conjugate gradient methods on the fixed-rank manifold.
//!
//! Two structured extensions share the same tangent-space machinery:
//! spectrally sparse signal recovery through Hankel lifting ([`hankel`]) and
//! robust PCA by alternating projections ([`rpca`]).
//!
//! The crate is `no_std` and only needs an allocator. File formats, timing
//! and the command-line harness live in the `lowrank-bench` crate.

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod convex;
pub mod error;
pub mod factored;
pub mod hankel;
pub mod linalg;
pub mod manifold;
pub mod measurements;
pub mod report;
pub mod rpca;

mod rng;

pub use error::{Error, Result};
pub use linalg::{SvdTriple, TangentSpace, TangentVector};
pub use measurements::{Ensemble, ProblemInstance, Scenario};
pub use rng::derive_seed;
pub use report::{Clock, IterTrace, NoClock, SolverEvent, SolverReport, Status};
