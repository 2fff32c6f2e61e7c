//! Simulator for a holographic MIMO link in which both transceiver ends are
//! assisted by stacked programmable metasurfaces, together with optimizers
//! that maximize the achievable rate of the link.
//!
//! The crate is organized around the physical pipeline:
//!
//! - [`geometry`]: meta-atom lattice coordinates and every distance the
//!   diffraction model needs.
//! - [`propagation`]: fixed Rayleigh-Sommerfeld transfer matrices between
//!   layers and their composition with tunable phase-shift layers.
//! - [`channel`]: spatially correlated Rayleigh fading between the two
//!   surface stacks, log-distance path loss, and the end-to-end channel.
//! - [`objective`]: the log-det achievable-rate objective, its closed-form
//!   gradients with respect to the transmit covariance and every phase
//!   layer, and a step-size (Lipschitz) bound.
//! - [`projection`]: projections onto the feasible sets: unit-modulus
//!   phases and trace-bounded PSD covariance via water-filling.
//! - [`optimizer`]: simultaneous projected gradient ascent with a fixed
//!   step or Armijo-Goldstein backtracking.
//! - [`baselines`]: alternating (coordinate-wise) optimization, fixed
//!   phase profiles, and a fully digital precoding reference.
//! - [`complexity`]: complex-multiplication accounting, both instrumented
//!   and closed-form.
//! - [`experiments`]: config parsing, seeded Monte-Carlo sweeps, and
//!   CSV/JSON emission; drives the `simhmimo` CLI.

pub mod baselines;
pub mod channel;
pub mod complexity;
pub mod experiments;
pub mod geometry;
pub mod linalg;
pub mod objective;
pub mod optimizer;
pub mod projection;
pub mod propagation;

pub use channel::{ChannelRealization, EffectiveChannel, LinkParams};
pub use complexity::{Dims, MultMeter};
pub use geometry::SimGeometry;
pub use objective::{ChainPair, OptimPoint, RateGradient};
pub use optimizer::{OptimizerConfig, RunTrace, StepMode};
pub use propagation::{PhaseStack, SurfaceSide, TransferChain};
