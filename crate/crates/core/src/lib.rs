//! Census and verification engine for primitive conjugacy classes of
//! discrete subgroups of products of real SL(d) and complex SL(2).

pub mod census;
pub mod closing;
pub mod cone;
pub mod equidist;
pub mod fixtures;
pub mod error;
pub mod group;
pub mod invariants;
pub mod linalg;

pub use error::{CensusError, Result};
pub use group::{evaluate_word, parse_group_config, reduce_word, FactorKind, FactorSpec, GroupSpec, Letter, MatrixTuple, Word};
