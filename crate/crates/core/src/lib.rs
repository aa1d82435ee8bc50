pub mod config;
pub mod context;
pub mod corpus;
pub mod embed;
pub mod error;
pub mod gcn;
pub mod graph;
pub mod pipeline;
pub mod scoring;
pub mod synthetic;
pub mod text;

pub use error::{Error, Result};
