pub mod block_model;
pub mod classifier;
pub mod distributions;
pub mod features;
pub mod graph_core;
pub mod inference;
pub mod io;
pub mod privacy;
