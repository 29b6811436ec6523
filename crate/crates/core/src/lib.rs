//! Reductions from general least-squares to two-commodity, strict and
//! integer two-commodity systems, together with the oracles, geometric
//! certificates and complexity accounting used to check them.

pub mod chain;
pub mod complexity;
pub mod error;
pub mod gen;
pub mod geometry;
pub mod harness;
pub mod integerize;
pub mod ipm;
pub mod linalg;
pub mod lsa;
pub mod lsd;
pub mod mc2;
pub mod mtx;
pub mod options;
pub mod oracle;
pub mod preprocess;
pub mod sparse;
pub mod strictify;

pub use nalgebra;

pub use complexity::ConditionMode;
pub use error::{Error, Result};
pub use lsa::LsaInstance;
pub use mc2::{Mc2Row, Mc2System, RowKind, RowRole};
pub use options::ReduceOptions;
pub use preprocess::{Gz2Instance, GzInstance};
pub use sparse::SparseMatrix;
