//! Modeling, execution and starvation-risk analysis for distributed
//! abstract state machines.

#![allow(clippy::result_large_err)]

pub mod asm;
pub mod lang;
pub mod exec;
pub mod models;
pub mod analysis;
pub mod monitor;
