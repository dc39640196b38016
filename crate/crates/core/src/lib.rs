pub mod agents;
pub mod backend;
pub mod bias;
pub mod config;
pub mod dataset;
pub mod evaluation;
pub mod features;
pub mod orchestrator;
pub mod runner;
pub mod session;
