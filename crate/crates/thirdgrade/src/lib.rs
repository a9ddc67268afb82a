//! IO, ensembles, verification studies and the command-line front end for
//! the `thirdgrade-core` simulator.

pub mod cli;
pub mod config;
pub mod ensemble;
pub mod output;
pub mod studies;
