//! Decentralized SGD over fixed communication graphs, with tooling to measure
//! algorithmic stability and evaluate the matching generalization bounds.

pub mod bounds;
pub mod cli;
pub mod data;
pub mod engine;
pub mod losses;
pub mod mixing;
pub mod stability;
pub mod topology;
