//! Critical points, Morse indices, the ordinary differential `d` and the
//! Morse inequalities.

mod critical;
mod flowlines;
mod inequalities;

pub use critical::{find_critical_points, CriticalPoint, CriticalSummary, CRITICAL_GRADIENT_TOL, DEDUP_RADIUS};
pub use flowlines::{
    count_flow_lines, flow_lines_from, morse_differential, FlowLineCount, FlowLineRecord, MorseDifferential,
};
pub use inequalities::{check_morse_inequalities, critical_counts, morse_homology, MorseInequalityReport};
