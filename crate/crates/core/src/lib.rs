//! Adaptive algorithm-parameter selection.
//!
//! Offline, training frames are clustered into scenarios, each summarized by
//! a mean feature and a PCA subspace, and every scenario is labeled with the
//! combo that performed best on the chosen platform. Online, each window of
//! the incoming stream is matched to the scenario whose geodesic-flow-kernel
//! distance is smallest, and that scenario's label is selected.

pub mod dataio;
pub mod error;
pub mod gfk;
pub mod harness;
pub mod kmeans;
pub mod profile;
pub mod runtime;
pub mod subspace;

pub use error::{Error, PlatformDiagnostic, Result};
