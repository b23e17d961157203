//! Dataset I/O and pipeline orchestration for the `videpth` command line tool.

pub mod bundle;
pub mod commands;
pub mod config;
pub mod io;
pub mod pipeline;
