//! File formats, parallel runners and the command line for
//! `fracprop-core`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bench;
pub mod cli;
pub mod config;
pub mod netlist;
pub mod output;
pub mod parallel;

pub use netlist::{parse_netlist, serialize_netlist, ParseError};
