//! Simulation and control toolkit for a dielectric-elastomer wave-energy
//! converter (DEG-WEC).
//!
//! The toolkit synthesizes stochastic sea excitation from a Bretschneider
//! spectrum, simulates a bottom-hinged surge flap driven by a dielectric
//! elastomer generator, solves the bi-objective (energy vs. damage) optimal
//! control problem by single shooting, runs receding-horizon MPC, and adapts
//! the scalarization weights online to hit a damage budget at a target time.

pub mod config;
pub mod error;
pub mod experiments;
pub mod mpc;
pub mod objectives;
pub mod ocp;
pub mod optim;
pub mod pareto;
pub mod plant;
pub mod waves;
pub mod weight_adapt;

pub use error::{Error, Result};
