//! Truncated multiple Fourier series expansions of iterated Itô stochastic
//! integrals, their mean-square error analysis, and a fine-grid Monte Carlo
//! oracle that checks them.

pub mod basis;
pub mod coefficients;
pub mod error;
pub mod error_analysis;
pub mod expansion;
pub mod path_oracle;
pub mod quadrature;
pub mod rational;
pub mod sampling;
pub mod sde_demo;
pub mod table_io;

pub use basis::{BasisKind, IntegrationInterval, OrthonormalBasis, WeightFunction};
pub use coefficients::{CoefficientTable, MultiDegree};
pub use error::{Error, Result};
pub use error_analysis::ErrorReport;
pub use expansion::{ComponentIndex, LowOrderCase, PairPartition};
pub use path_oracle::{MseEstimate, WienerPath};
pub use rational::RationalCoefficient;
pub use sampling::{SeedSpec, ZetaMatrix};
pub use sde_demo::{SchemeRun, TruncationRule};
pub use table_io::TableDocument;
