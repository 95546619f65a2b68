//! Two-stage visual-token pruning over serialized token dumps, with
//! position-id remapping strategies, random/pooling baselines, attention
//! diagnostics, and an exact transformer FLOPs cost model.
//!
//! Everything operates on `TKD1` container files so the full pipeline is
//! verifiable on a laptop without model weights: a producer exports
//! per-image tensors once, and every algorithm here is a pure function of
//! that dump.

pub mod baselines;
pub mod cost;
pub mod diagnostics;
pub mod dump;
pub mod error;
pub mod matrix;
pub mod pos_embed;
pub mod stage1;
pub mod stage2;

pub use dump::{read_dump, write_dump, TokenDump};
pub use error::{Error, Result};
pub use matrix::{topk_indices, Matrix};
pub use stage1::{run_stage1, PruneConfig, PruneResult};
pub use stage2::{run_stage2, Stage2Config};
