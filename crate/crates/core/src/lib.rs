//! Fractional-order circuit dynamics and equilibrium-propagation learning.
//!
//! Circuits of resistive synapses, nonlinear capacitors and inductors and
//! half-order memristors are simulated causally in cut-set coordinates.
//! Gradients of a trajectory loss with respect to every synaptic
//! conductance are estimated from one free and one weakly nudged run.

#![no_std]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod circuit;
pub mod dynamics;
pub mod eqprop;
pub mod error;
pub mod frac_ops;
pub mod lagrangian;
mod linalg;
pub mod topology;

pub use circuit::{
    eval_constitutive, validate, Circuit, ConstitutiveSpec, ConstitutiveValue, Diagnostic, Element,
    ElementKind, Family, LossCoupling, MemristorLaw, Report, Waveform, GROUND,
};
pub use dynamics::{simulate, trajectory_loss, DriveSet, SimConfig, Trajectory};
pub use error::{CircuitError, EqpropError, FracError, LagrangianError, Phase, SimError, TopologyError};
pub use frac_ops::{FracOrder, History, SampleGrid, Signal};
pub use topology::Topology;
