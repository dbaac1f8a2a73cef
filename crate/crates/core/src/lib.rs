//! Explicit primal and dual solutions of the multimarginal transport
//! problem on the unit cube with cost `xyz` and uniform one-dimensional
//! marginals, plus numerical certification of their optimality.
//!
//! The crate is organized around the chain of objects the solution is built
//! from:
//!
//! * [`constants`] — the transcendental scalars `l`, `r`, `alpha`, `c` and
//!   the optimal cost in closed form;
//! * [`support`] — the union of three segments and one surface carrying
//!   every optimal coupling, with membership residuals and the
//!   inertia-based dimension bound;
//! * [`primal`] — an explicit coupling concentrated on the support, with
//!   exact densities and a seedable sampler;
//! * [`dual`] — the dual potentials for any admissible cost `C(xyz)`, their
//!   explicit closed form for cost `xyz`, and duality-gap certification;
//! * [`heuristic`] — swap-based and sorting-based monotonization of sampled
//!   couplings for arbitrary one-dimensional marginals;
//! * [`discrete`] — the integer triple-partition problem whose minimum
//!   scales like the optimal cost, with an exhaustive oracle and the
//!   constructive partition built from the continuous solution.

pub mod constants;
pub mod discrete;
pub mod dual;
pub mod error;
pub mod heuristic;
pub mod ks;
pub mod primal;
pub mod quad;
pub mod support;

pub use constants::{solve_constants, ModelConstants};
pub use error::{Error, Result};
