//! Command-line front end and HTTP service for labelfuse4d.

pub mod args;
pub mod commands;
pub mod exit;
pub mod server;
