pub mod finite_category;
pub mod coalgebra;
pub mod entropy_ledger;
pub mod phase_dynamics;
pub mod cascade;
pub mod dynamics_bifurcation;
pub mod cli;
