//! Black-oil reservoir simulation on a structured grid with distributed
//! workers: fully implicit, IMPEC and domain-decomposed Newton solvers.

#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod deck;
pub mod domain;
pub mod grid;
pub mod linsys;
pub mod output;
pub mod reservoir;
pub mod solver;

#[doc(hidden)]
pub mod testing;
