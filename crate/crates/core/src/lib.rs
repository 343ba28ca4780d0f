pub mod analytics;
pub mod config;
pub mod error;
pub mod harq;
pub mod link;
pub mod metrics;
pub mod rlc;
pub mod scenario;
pub mod sim;
pub mod stack;
pub mod tcp;
pub mod traffic;
