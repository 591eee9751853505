//! Learning regime-dependent governing equations with symbolic decision trees.
//!
//! A symbolic decision tree partitions the input domain with nonlinear
//! basis-function splits (`g(x) < b` vs `g(x) >= b`) and attaches a linear
//! combination of basis functions to each leaf. Fitting such a tree to data
//! is encoded here as a mixed-integer linear program and solved exactly with
//! an embedded branch-and-bound solver, or exported as an MPS file for an
//! external solver.
//!
//! Module map:
//! - [`expr`]: basis-function mini-language (parse, evaluate, pretty-print)
//! - [`dataset`]: named-feature datasets and CSV I/O
//! - [`milp`]: mixed-integer linear program container and MPS export
//! - [`solver`]: bounded-variable revised simplex, branch-and-bound, and a
//!   brute-force enumeration oracle
//! - [`formulation`]: dataset + basis sets + hyperparameters -> MILP, and
//!   solution decoding back into a symbolic tree
//! - [`tree`]: the learned tree as a standalone predictive object
//! - [`baselines`]: sparse regression and greedy tree baselines, plus the
//!   branch-and-bound warm start
//! - [`casestudies`]: ground-truth data generators

pub mod baselines;
pub mod casestudies;
pub mod dataset;
pub mod expr;
pub mod formulation;
pub mod milp;
pub mod solver;
pub mod tree;
