//! File formats, configuration and commands behind the `perstab` binary.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod commands;
pub mod config;
pub mod error;
pub mod output;
pub mod phi;
pub mod spec;
