//! Command-line front end for `densopt`: TOML run configurations, solve and
//! verify commands, and property checks of single functionals.

pub mod commands;
pub mod config;
pub mod phi;
