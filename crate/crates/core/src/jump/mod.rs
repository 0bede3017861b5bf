//! Jumping flow lines: trajectories of the gradient flow interrupted by k
//! jumps along circle orbits, counted mod 2 by multi-segment shooting.

mod broken;
mod shooting;
mod smooth;
mod solver;

pub use broken::{broken_limit_diagnostics, find_family_point, FamilyDiagnostics, FamilyEnd};
pub use shooting::{
    cutoff, grid_minima, jacobian, land, land_anywhere, polish, scan, smooth_segment, GridSample, Landing, ParamKind,
    Polished, ShootingContext, ShootingProblem, SolverSettings, Stage,
};
pub use smooth::{smooth_continuation_crosscheck, smooth_radius, SmoothCount};
pub use solver::{
    count_k_jump_mod2, decode, enumerate_k_jump_flow_lines, jump_problems, moduli_dimension, segments, solve_problems,
    JumpConfiguration, JumpEnumeration, JumpSolution, SeedSpec, Segment, SolutionCertificate,
};
