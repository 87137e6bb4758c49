//! Discrete-event simulator for multi-connectivity user planes.

pub mod analytics;
pub mod config;
pub mod error;
pub mod harness;
pub mod link;
pub mod mptcp;
pub mod sim;
pub mod topology;
pub mod trace;
pub mod world;
