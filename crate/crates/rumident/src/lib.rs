//! Identified sets of stochastic choice models.
//!
//! This crate computes exact identified sets for random utility and related
//! stochastic choice models by translating distributions over preferences
//! into flows on directed acyclic graphs and manipulating them with an
//! algebra of mass-preserving swaps. All combinatorial computation is done
//! in arbitrary-precision rational arithmetic; the single numeric module
//! ([`param`]) probes parametric identification of smooth models in floating
//! point and labels every verdict as evidence rather than proof.
//!
//! Module map:
//!
//! * [`linalg`] — exact rationals, matrices, rank/nullspace, rational simplex.
//! * [`choicecore`] — alternatives, preferences, menus, choice rules,
//!   distributions, the choice-probability map, compatibility and conjugation.
//! * [`dagcore`] — generic DAGs, quasi-flows, paths, greedy decomposition.
//! * [`rumgraph`] — the menu-lattice graph, Block–Marschak flows,
//!   rationalizability, the preference/path bijection.
//! * [`ryser`] — swap enumeration, the swap subspace and its basis,
//!   equivalence membership, zipper transforms, rearrangements.
//! * [`idset`] — LP bounds on linear functionals, extreme-point tests,
//!   identifying-support tests, extreme-point enumeration.
//! * [`ordered`] — swap-progressive decompositions and single-crossing tests
//!   under an exogenous order on alternatives.
//! * [`param`] — numeric probes of parametric identification (Jacobian grid
//!   checks, properness rays, collision search) plus built-in models.
//! * [`extmodels`] — limited-observability random choice, the two-frame
//!   frame-dependent model, and Markovian dynamic discrete choice.

#![warn(missing_docs)]

pub mod choicecore;
pub mod dagcore;
pub mod extmodels;
pub mod idset;
pub mod linalg;
pub mod ordered;
pub mod param;
pub mod rumgraph;
pub mod ryser;
