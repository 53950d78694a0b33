//! Decision-aware conditional GAN for multivariate return series.
//!
//! The crate is built bottom-up:
//!
//! * [`nn`]: dense networks with exact backpropagation,
//! * [`markets`]: return panels, the simulated market, ETF ingestion, features and block sampling,
//! * [`decision`]: the mean-variance decision chain and its gradient,
//! * [`gan`]: generator and discriminator banks and the training loop,
//! * [`transport`]: empirical Wasserstein distances and evaluation reports,
//! * [`bounds`]: boundedness constants and the generalization-bound calculator.

// Range checks are written `!(x > 0.0)` so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod bounds;
pub mod checkpoint;
pub mod decision;
pub mod error;
pub mod gan;
pub mod linalg;
pub mod markets;
pub mod nn;
pub mod transport;

pub use decision::{DecisionChainOutput, DecisionParams, WeightFormula};
pub use error::{Error, Result};
pub use gan::{DiscriminatorBank, GeneratorBank, TrainConfig, TrainLog, Variant};
pub use markets::{BlockSample, ConditioningState, DgpParams, EmaState, MvtSpec, ReturnPanel};
pub use nn::{Activation, DenseLayer, Direction, Gradients, Net, OptimizerKind};
pub use transport::{PointCloud, WassersteinReport};
