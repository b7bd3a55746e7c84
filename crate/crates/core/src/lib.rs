//! Real-time reinforcement-learning control of laser weld power.
//!
//! - [`qnet`]: int8 policy inference as run on the controller board
//! - [`twin`]: float digital twin and the soft actor-critic trainer
//! - [`weldsim`]: surrogate weld process producing photodiode signals
//! - [`link`]: framed device/server wire protocol and session state machines
//! - [`device`]: controller runtime that executes episodes
//! - [`expcli`]: experiment orchestration, CSV output, plots

pub mod qnet;
pub mod twin;
pub mod device;
pub mod expcli;
pub mod link;
pub mod weldsim;
