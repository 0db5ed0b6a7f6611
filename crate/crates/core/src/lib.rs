//! Sums of squares of bilinear forms: SOS certification and SOS-rank
//! bounds for biquadratic forms, and exact Zarankiewicz numbers.
//!
//! ```
//! use biqrank::{certify_sos, BiquadraticForm, ChoiVariant, SosConfig, SosStatus};
//!
//! let choi = BiquadraticForm::choi(ChoiVariant::Classical);
//! let cert = certify_sos(&choi, &SosConfig::default()).unwrap();
//! assert_eq!(cert.status, SosStatus::NotSos);
//! ```

pub mod cli;
pub mod error;
pub mod forms;
pub mod gram;
pub mod graphs;
pub mod numerics;
pub mod oracle;
pub mod report;
pub mod selftest;
pub mod sosrank;

pub use error::{BiqError, Result};
pub use forms::{BiquadraticForm, ChoiVariant};
pub use gram::{verify_decomposition, GramSpace, SosDecomposition};
pub use graphs::{known_z, reiman_bound, zarankiewicz, BipartiteGraph, SearchOptions, ZarankiewiczResult};
pub use numerics::SymMatrix;
pub use report::RunReport;
pub use sosrank::{
    certify_sos, simple_rank_exact, sos_rank_search, RankSearchResult, SosCertificate, SosConfig, SosStatus,
};
