//! Experiment harness, configuration, file outputs and the oracle report
//! behind the `semimyopic` command-line tool.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod harness;
pub mod output;
pub mod verify;
