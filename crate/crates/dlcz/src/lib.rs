//! Simulation and analysis of heralded single-phonon entanglement between two
//! remote optomechanical resonators.

pub mod cli;
pub mod fock_core;
pub mod noise_model;
pub mod planner;
pub mod protocol_sim;
pub mod quad;
pub mod rng;
pub mod stats;
