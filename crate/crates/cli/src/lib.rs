//! Library surface of the pipeline CLI, exposed so integration tests can
//! drive stages directly.

pub mod config;
pub mod pipeline;
pub mod report;
