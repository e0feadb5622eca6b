//! Experiment configuration, execution, rate fitting and trace comparison
//! for the `geodescent` command-line tool.

// `!(a < b)` comparisons are deliberate: they reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod compare;
pub mod config;
pub mod experiment;
pub mod fit;
pub mod runner;
pub mod trace;
