//! Regression-tree building blocks: the training matrix, squared-error
//! split search, and greedy CART growth.

mod cart;
mod matrix;
mod split;

pub use cart::{cart_fit, cart_fit_rows, CartConfig, CartNode, CartTree, FeatureSampling};
pub use matrix::{mean, sse, TrainMatrix};
pub use split::{best_split, partition_rows, SplitDecision, SplitRule, MAX_THRESHOLD_CANDIDATES};
