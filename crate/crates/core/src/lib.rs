//! Multi-objective deep reinforcement learning with optimistic linear
//! support: environments, CCS geometry, a small Q-network library,
//! scalarised solvers, the outer OLS loop and an exact planner.

pub mod ccs;
pub mod dol;
pub mod momdp;
pub mod nn;
pub mod planner;
pub mod solver;
