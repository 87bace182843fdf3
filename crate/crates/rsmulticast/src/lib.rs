pub mod channels;
pub mod config;
pub mod harness;
pub mod solver;
