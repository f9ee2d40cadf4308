//! Question/term co-occurrence, randomized SVD, knee rank selection and the sparse
//! non-negative embedding (NNSE) used to find latent question themes.

mod knee;
mod nnse;
mod report;
mod sparse;
mod svd;

pub use knee::knee_rank;
pub use nnse::{nnse_fit, objective, solve_row, NnseConfig, NnseFit, NnseModel, RowSolution};
pub use report::{factor_report, FactorReport, QuestionRow, ReportOptions};
pub use sparse::{
    build_cooccurrence, cooccurrence_vocabulary, synset_column, ExtensionStats, LinearOperator,
    SparseMatrix, SynsetLexicon, SYNSET_PREFIX,
};
pub use svd::{truncated_svd, RangeMethod, SvdConfig, TruncatedSvd};
