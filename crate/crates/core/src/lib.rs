//! Reconstruction of occluded objects from simulated mmWave radar measurements.
//!
//! The crate covers the whole chain: forward simulation of FMCW baseband
//! signals ([`radar`]), backprojection imaging ([`imaging`]), synthesis of
//! physically consistent partial observations ([`synth`]), candidate surface
//! proposal from an integrated normal field ([`proposal`]), shape completion
//! ([`completion`]), entropy-guided selection ([`selection`]), evaluation
//! ([`metrics`]) and end-to-end orchestration ([`pipeline`]).

pub mod completion;
pub mod error;
pub mod fixtures;
pub mod geometry;
pub mod io;
pub mod metrics;
pub mod pipeline;
pub mod proposal;
pub mod imaging;
pub mod radar;
pub mod selection;
pub mod synth;

pub use error::{Error, Result};
pub use geometry::{OrientedPointCloud, Point3, RigidScale, TriangleMesh, Vector3};
