//! Variational inference for latent space network models.
//!
//! * [`lsm`]: single-view latent space model fitted by variational EM.
//! * [`lsjm`]: latent space joint model fusing `K` views of one node set.
//! * [`predict`]: link probabilities, ROC/AUC and cross-validation.
//! * [`io`]: edge lists, model artifacts, CSV and SVG outputs.

pub mod cli;
pub mod error;
pub mod io;
pub mod linalg;
pub mod lsjm;
pub mod lsm;
pub mod network;
pub mod predict;
pub mod rng;

pub use error::{Error, Result};
pub use lsjm::{fit_lsjm, FusedPosterior, LsjmFit};
pub use lsm::{fit_lsm, FitConfig, FitReport, PriorConfig, ViewVariationalState};
pub use network::{build_multiplex, AdjacencyView, MultiplexNetwork, NodeSet};
