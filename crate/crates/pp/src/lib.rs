//! `pp` command line and HTTP API.

pub mod api;
pub mod cli;
