//! Command-line front end and HTTP service for the engine.

pub mod ops;
pub mod server;
