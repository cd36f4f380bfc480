use super::Tolerance;
use crate::instance::Cost;

/// Relative tolerance used while no feasible schedule is known.
pub const INITIAL_RELATIVE: f64 = 0.01;
/// The absolute tolerance is this fraction of the open gap.
pub const GAP_FRACTION: f64 = 0.1;

/// Optimality tolerance handed to the backend across iterations.
#[derive(Clone, Debug, PartialEq)]
pub struct ToleranceState {
    pub mode: Tolerance,
    /// `(lower bound, upper bound)` after each update.
    pub history: Vec<(f64, Option<Cost>)>,
}

impl Default for ToleranceState {
    fn default() -> Self {
        ToleranceState { mode: Tolerance::Relative(INITIAL_RELATIVE), history: Vec::new() }
    }
}

impl ToleranceState {
    pub fn lower_bound(&self) -> Option<f64> {
        self.history.last().map(|h| h.0)
    }

    pub fn upper_bound(&self) -> Option<Cost> {
        self.history.last().and_then(|h| h.1)
    }

    /// Records new bounds and moves to the tolerance they imply.
    pub fn update(&mut self, lower: f64, upper: Option<Cost>) -> Tolerance {
        self.history.push((lower, upper));
        self.mode = next_tolerance(self, upper.is_some());
        self.mode
    }
}

/// Relative 1% until a feasible upper bound exists, then a tenth of the
/// absolute gap between the latest bounds, never negative.
pub fn next_tolerance(state: &ToleranceState, has_feasible_ub: bool) -> Tolerance {
    match (has_feasible_ub, state.lower_bound(), state.upper_bound()) {
        (true, Some(lb), Some(ub)) => Tolerance::Absolute(((ub as f64 - lb) * GAP_FRACTION).max(0.0)),
        _ => Tolerance::Relative(INITIAL_RELATIVE),
    }
}
