//! HTTP service and operator CLI over the repository core.

pub mod api;
pub mod cli;
pub mod config;
pub mod error;
pub mod hierarchy;
