//! Configuration and orchestration for the `rieszlab` batch driver.

pub mod config;
pub mod run;
