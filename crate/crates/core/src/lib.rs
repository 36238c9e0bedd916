//! Spectral flow and exotic holonomy of bosons in a one-dimensional box
//! split by a movable delta wall.
//!
//! The crate is organized bottom-up: [`model`] holds units and the cycle,
//! [`spectrum`] solves the single-particle problem, [`flow`] tracks levels
//! around the cycle, [`manybody`] builds the bosonic Fock machinery on top,
//! and [`dynamics`] integrates time-dependent traversals.

pub mod dynamics;
pub mod error;
pub mod flow;
pub mod manybody;
pub mod model;
pub mod report;
pub mod spectrum;
mod trig;

pub use dynamics::{
    cycle_sweep, gaussian_wall_propagate, integrate_two_level, lz_probability, GridSpec, Schedule,
    SweepOptions, SweepResult, TwoLevelCrossing,
};
pub use error::{Error, Result};
pub use flow::{
    crossing_catalog, holonomy, sample_flow, CrossingEvent, FlowTable, HolonomyPermutation,
};
pub use manybody::{
    enumerate_states, first_order_shift, fock_hamiltonian, selection_rule, two_body_element,
    FockState, GapClass, GapReport, HolonomyMode, ModeSet,
};
pub use model::{
    epsilon, normalized_wavenumber, resolve, BoxParams, CyclePoint, CycleSpec, Ramp, Stage,
    WallConfig, WallStrength,
};
pub use spectrum::{
    hf_derivative, overlap2, overlap4, solve_levels, wavefunction, wavefunctions, Character,
    SpLevel, SpWavefunction, Well,
};
