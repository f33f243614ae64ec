//! Command-line and HTTP front end of the workbench.
//!
//! * [`config`]: TOML run configuration with `DINEKIT_*` overrides.
//! * [`runner`]: the decision loop that trains the agent and records the trace.
//! * [`server`]: JSON API over a live or loaded trace.
//! * [`sweep`]: threshold-versus-count tables.
//! * [`scenario`]: the packaged step-increase demo.

pub mod config;
pub mod runner;
pub mod scenario;
pub mod server;
pub mod sweep;
