//! Response-factor analysis for question/answer threads.
//!
//! The crate is organised the way the analysis flows:
//!
//! * [`corpus`] ingests thread dumps, applies the question filters and splits.
//! * [`textsim`] tokenises text and scores soft-matched Jaccard similarity.
//! * [`parsetree`] reads bracketed constituency parses and measures them.
//! * [`features`] turns a question in its thread into a feature vector.
//! * [`factorization`] builds the question/word matrix, reduces it with a
//!   randomized SVD and fits a sparse non-negative embedding (NNSE).
//! * [`classify`] trains elastic-net logistic regression and scores it.
//!
//! Numerical code is generic over [`Real`] (`f32` or `f64`); the aliases at
//! the bottom of this file fix the scalar to `f64`.

pub mod classify;
pub mod corpus;
pub mod error;
pub mod factorization;
pub mod features;
pub mod parsetree;
mod scalar;
pub mod textsim;

pub use error::{Error, Result};
pub use scalar::Real;

pub type SparseMatrixF64 = factorization::SparseMatrix<f64>;
pub type SparseMatrixF32 = factorization::SparseMatrix<f32>;
pub type NnseModelF64 = factorization::NnseModel<f64>;
pub type NnseModelF32 = factorization::NnseModel<f32>;
pub type TruncatedSvdF64 = factorization::TruncatedSvd<f64>;
pub type ElasticNetModelF64 = classify::ElasticNetModel<f64>;
pub type ElasticNetModelF32 = classify::ElasticNetModel<f32>;
pub type EmbeddingTableF64 = textsim::EmbeddingTable<f64>;
pub type EmbeddingTableF32 = textsim::EmbeddingTable<f32>;
