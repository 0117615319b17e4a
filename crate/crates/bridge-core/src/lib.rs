//! Core analysis engine for correlating SCADA process-control behavior with
//! physical process dynamics.
//!
//! The crate is split along the pipeline stages:
//!
//! * [`trace`] — the execution-trace data model (commands, event markers,
//!   process-control operations) and operation segmentation.
//! * [`deps`] — Read-before-Write dependency extraction and the control-time /
//!   control-burst / control-frequency features measured per operation.
//! * [`constraints`] — aggregation of feature samples into calibration-agnostic
//!   relative-dependency (R_D) constraints via coefficient of variation.
//! * [`monitor`] — batch and streaming violation checking of live traces
//!   against a learned constraint model.
//! * [`pinn`] — a physics-informed attention autoencoder over inertia-sized
//!   process windows, with its own reverse-mode autodiff.
//! * [`itb`] — inertia derivation, process-evolution windows, and the
//!   cause-before-effect correlation of SCADA alerts with process anomalies.
//! * [`sim`] — a deterministic inertial plant simulator, SCADA event-handler
//!   emulator, and attack injector used to generate traces and series.
//!
//! The crate is `no_std`-compatible (with `alloc`); file formats, IO, and the
//! command-line interface live in the companion `bridge-cli` crate.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod constraints;
pub mod deps;
pub mod itb;
pub mod monitor;
pub mod pinn;
pub mod sim;
pub mod trace;

mod math;
mod rng;

pub use rng::DeterministicRng;
