//! Price forecasting with classical and quantum generative adversarial networks.
//!
//! The crate bundles a dense statevector simulator ([`qsim`]), variational
//! circuits ([`vqc`]), the price pipeline ([`dataprep`], [`features`]), small
//! dense networks ([`neural`]), five training engines ([`engines`]) and
//! forecast metrics ([`eval`]).

pub mod dataprep;
pub mod engines;
pub mod error;
pub mod eval;
pub mod features;
pub mod neural;
pub mod qsim;
pub mod vqc;

pub use dataprep::{PriceSeries, Prepared, ScalingState, WindowPair, WindowSpec, WindowedDataset};
pub use engines::{Forecast, ModelArtifact, ModelKind, TrainConfig};
pub use error::{Error, ErrorClass, Result};
pub use eval::MetricsReport;
pub use qsim::{Gate, StateVector};
pub use vqc::{AnsatzSpec, ParamVector, ResourceReport};
