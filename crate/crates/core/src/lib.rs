//! Tooling for low-resource machine translation experiments.

pub mod backend;
pub mod corpus;
pub mod experiment;
pub mod http;
pub mod metrics;
pub mod pool;
pub mod prompting;
pub mod retrieval;
pub mod retry;
pub mod rng;
pub mod standardize;
