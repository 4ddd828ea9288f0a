//! Command-line experiments on top of `fkg-core`, with CSV and plot-data
//! output.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod commands;
pub mod config;
pub mod exec;
pub mod output;
pub mod selftest;
