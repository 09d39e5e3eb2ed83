//! Exact simulation of the q-Hahn TASEP and its stationary measure.
//!
//! Particles are labelled from right to left. In one time step every particle
//! with `m` vacant sites ahead jumps right by `j` with probability
//! `phi(j|m)`, all particles simultaneously.

mod exact;
mod observables;
mod rng;
mod sim;
mod stationary;
mod table;

pub use exact::{exact_q_laplace, exact_step_law, ExactLaw};
pub use observables::{height_and_current, q_laplace_observable, HeightCurrent};
pub use rng::RngStream;
pub use sim::{simulate, simulate_checkpoints, CheckpointRun, InitialCondition, ParticleState, SimulationResult};
pub use stationary::{gap_law_mean, gap_law_table, measure_current, CurrentConfig, CurrentMeasurement};
pub use table::{jump_weights, Gap, JumpTable, TableCache, DEFAULT_M_CAP, DEFAULT_TAIL_TOL};
