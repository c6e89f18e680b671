//! Picard engine and the mild-solution solvers built on it.

pub mod archive;
pub mod existence;
pub mod picard;
pub mod solver;

pub use picard::{solve_picard, FixedPointReport, IterationSummary, OperatorBounds, PicardProblem, PicardSettings, ScalarModel};
pub use solver::{
    energy_ledger, mild_solve_nse, mild_solve_perturbed, mollified_solve, solve_mild, solve_mild_with, EnergyLedger,
    MildProblem, MildSolution, SolveReport, SolverConfig, TimeSchedule,
};
