//! Library surface of the command-line front end, kept separate from the
//! binary so the configuration and dispatch layers are directly testable.

pub mod config;
pub mod run;
