//! Experiment harness for the `otgraph` command-line tool.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod app;
pub mod commands;
pub mod config;
pub mod error;
pub mod experiments;
pub mod records;
