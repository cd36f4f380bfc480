//! The iterative solver: solve a partial network, read off a lower bound,
//! turn the flow into duties, and refine the time points until the best
//! known schedule is within tolerance of the bound.

mod schedule;

pub use schedule::{ScheduleError, ScheduleSolution, ScheduledDuty};

use crate::instance::{Cost, Instance, Minutes, TripId};
use crate::mip::{
    build_model, solve_model, FlowSolution, MipBackend, ModelError, SolveParams, SolveStatus, Tolerance,
    ToleranceState,
};
use crate::refine::{
    extract_duties, refine, Duty, RefineContext, RefineError, RefineStrategy, RefinementReport,
    DEFAULT_ENUMERATION_CAP,
};
use crate::timenet::{
    add_time_points, build_full_network, build_partial_network, initial_time_points, DeadheadScheme,
    LayeredNetwork, NetworkError,
};
use serde::{Deserialize, Serialize};
use std::time::{Duration, Instant};
use thiserror::Error;

/// Largest number of uncovered trips the upper-bound repair will attempt.
pub const DEFAULT_REPAIR_THRESHOLD: usize = 100;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DddConfig {
    pub delta_max: Minutes,
    pub scheme: DeadheadScheme,
    pub strategy: RefineStrategy,
    /// Termination threshold on `UB - LB`.
    pub epsilon: Tolerance,
    pub time_limit_secs: Option<f64>,
    pub ub_repair_threshold: usize,
    pub enumeration_cap: usize,
    /// Solve every iteration at this tolerance instead of the adaptive one.
    pub fixed_tolerance: Option<Tolerance>,
    pub max_iterations: Option<usize>,
    pub close_exclusion: bool,
}

impl Default for DddConfig {
    fn default() -> Self {
        DddConfig {
            delta_max: 0,
            scheme: DeadheadScheme::Short,
            strategy: RefineStrategy::FewerTimePoints,
            epsilon: Tolerance::Absolute(1.0),
            time_limit_secs: None,
            ub_repair_threshold: DEFAULT_REPAIR_THRESHOLD,
            enumeration_cap: DEFAULT_ENUMERATION_CAP,
            fixed_tolerance: None,
            max_iterations: None,
            close_exclusion: true,
        }
    }
}

impl DddConfig {
    pub fn time_limit(&self) -> Option<Duration> {
        self.time_limit_secs.map(Duration::from_secs_f64)
    }
}

#[derive(Debug, Error)]
pub enum DddError {
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Refine(#[from] RefineError),
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
    #[error("{0}")]
    Internal(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DddStatus {
    Optimal,
    TimeLimit,
    IterationLimit,
}

/// One row of the run log.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IterationRecord {
    pub iter: usize,
    /// Best lower bound so far.
    pub lb: Cost,
    /// Bound proved by this iteration's model alone.
    pub model_bound: Cost,
    pub ub: Option<Cost>,
    pub gap: Option<f64>,
    pub nodes: usize,
    pub arcs: usize,
    pub points_added: usize,
    pub wall_ms: u128,
    pub tolerance: Tolerance,
    pub exact_resolve: bool,
    pub repaired: bool,
    pub refinement: RefinementReport,
}

/// A network with an integral flow whose decomposition yields the schedule.
#[derive(Clone, Debug)]
pub struct Support {
    pub network: LayeredNetwork,
    pub solution: FlowSolution,
}

#[derive(Clone, Debug)]
pub struct DddOutcome {
    pub status: DddStatus,
    pub schedule: Option<ScheduleSolution>,
    pub lower_bound: Cost,
    pub upper_bound: Option<Cost>,
    pub iterations: Vec<IterationRecord>,
    pub time_points: usize,
    pub support: Option<Support>,
    pub elapsed: Duration,
}

impl DddOutcome {
    pub fn first_lower_bound(&self) -> Option<Cost> {
        self.iterations.first().map(|r| r.model_bound)
    }

    pub fn gap(&self) -> Option<f64> {
        gap(self.upper_bound.map(|u| u as f64), self.lower_bound as f64)
    }
}

/// `UB - LB`, or `None` while no upper bound is known.
pub fn gap(ub: Option<f64>, lb: f64) -> Option<f64> {
    ub.map(|u| u - lb)
}

/// Whether an open gap of `gap` at upper bound `ub` is below `epsilon`.
pub fn terminated(gap: Option<f64>, ub: Option<f64>, epsilon: Tolerance) -> bool {
    match (gap, ub) {
        (Some(g), Some(u)) => match epsilon {
            Tolerance::Absolute(e) => g < e,
            Tolerance::Relative(r) => g < r * u.abs(),
        },
        _ => false,
    }
}

fn remaining(start: Instant, limit: Option<Duration>) -> Option<Option<Duration>> {
    match limit {
        None => Some(None),
        Some(l) => l.checked_sub(start.elapsed()).filter(|d| !d.is_zero()).map(Some),
    }
}

#[derive(Clone, Debug)]
pub struct FdOutcome {
    pub status: SolveStatus,
    pub schedule: Option<ScheduleSolution>,
    pub lower_bound: Cost,
    pub nodes: usize,
    pub arcs: usize,
    pub support: Option<Support>,
    pub elapsed: Duration,
}

/// Solves the full time-expanded network directly.
pub fn solve_fd(
    instance: &Instance,
    delta_max: Minutes,
    params: &SolveParams,
    backend: &dyn MipBackend,
) -> Result<FdOutcome, DddError> {
    let start = Instant::now();
    let network = build_full_network(instance, delta_max)?;
    let stats = network.stats();
    let model = build_model(&network)?;
    let solution = solve_model(&model, backend, params)?;
    let mut out = FdOutcome {
        status: solution.status,
        schedule: None,
        lower_bound: solution.lower_bound(),
        nodes: stats.nodes,
        arcs: stats.arcs,
        support: None,
        elapsed: Duration::ZERO,
    };
    if solution.has_flow() {
        let duties = extract_duties(&solution, &network)?;
        let schedule = ScheduleSolution::from_duties(instance, delta_max, &duties)?;
        out.schedule = Some(schedule);
        out.support = Some(Support { network, solution });
    }
    out.elapsed = start.elapsed();
    Ok(out)
}

/// Completes `kept` by solving the full network over the `uncovered` trips.
/// Gives up when there are more than `threshold` of them or the sub-solve
/// finds nothing.
pub fn repair_upper_bound(
    instance: &Instance,
    delta_max: Minutes,
    kept: &[ScheduledDuty],
    uncovered: &[TripId],
    threshold: usize,
    backend: &dyn MipBackend,
    time_limit: Option<Duration>,
) -> Result<Option<ScheduleSolution>, DddError> {
    if uncovered.len() > threshold {
        return Ok(None);
    }
    let mut duties = kept.to_vec();
    if !uncovered.is_empty() {
        let sub = instance.restricted_to(uncovered);
        let params = SolveParams { tolerance: Tolerance::EXACT, time_limit };
        let Some(fill) = solve_fd(&sub, delta_max, &params, backend)?.schedule else {
            return Ok(None);
        };
        for d in fill.duties {
            let trips = d.trips.iter().map(|t| uncovered[t.index()]).collect();
            duties.push(ScheduledDuty { depot: d.depot, trips, departures: d.departures });
        }
    }
    Ok(Some(ScheduleSolution::from_scheduled(instance, duties)))
}

fn feasible_part(instance: &Instance, delta_max: Minutes, duties: &[Duty]) -> (Vec<ScheduledDuty>, Vec<TripId>) {
    let mut kept = Vec::new();
    let mut uncovered = Vec::new();
    for d in duties {
        match (d.cyclic, crate::refine::check_duty(d, instance, delta_max)) {
            (false, crate::refine::FeasibilityReport::Feasible { pi }) => {
                kept.push(ScheduledDuty { depot: d.depot, trips: d.trips.clone(), departures: pi })
            }
            _ => uncovered.extend(&d.trips),
        }
    }
    uncovered.sort();
    uncovered.dedup();
    (kept, uncovered)
}

struct Incumbent {
    schedule: ScheduleSolution,
    support: Option<Support>,
}

fn offer(
    best: &mut Option<Incumbent>,
    schedule: ScheduleSolution,
    support: impl FnOnce() -> Option<Support>,
    instance: &Instance,
    delta_max: Minutes,
) -> Result<bool, DddError> {
    if best.as_ref().is_some_and(|b| b.schedule.cost <= schedule.cost) {
        return Ok(false);
    }
    schedule.validate(instance, delta_max)?;
    *best = Some(Incumbent { schedule, support: support() });
    Ok(true)
}

/// Runs the iterative solver until the gap closes or a limit is hit.
pub fn solve_ddd(instance: &Instance, config: &DddConfig, backend: &dyn MipBackend) -> Result<DddOutcome, DddError> {
    let start = Instant::now();
    let delta = config.delta_max;
    let mut tps = initial_time_points(instance, delta);
    let mut tol_state = ToleranceState::default();
    let mut lb = Cost::MIN;
    let mut best: Option<Incumbent> = None;
    let mut iterations: Vec<IterationRecord> = Vec::new();

    let status = 'outer: loop {
        if config.max_iterations.is_some_and(|m| iterations.len() >= m) {
            break DddStatus::IterationLimit;
        }
        let iter_start = Instant::now();
        let network = build_partial_network(instance, delta, &tps, config.scheme)?;
        let stats = network.stats();
        let model = build_model(&network)?;
        let mut tolerance = config.fixed_tolerance.unwrap_or(tol_state.mode);
        let mut exact_resolve = false;
        let mut repaired = false;

        let (outcome, model_bound) = loop {
            let Some(time_limit) = remaining(start, config.time_limit()) else {
                break 'outer DddStatus::TimeLimit;
            };
            let phase = Instant::now();
            let solution = solve_model(&model, backend, &SolveParams { tolerance, time_limit })?;
            log::debug!("solve at {tolerance:?}: {:?}", phase.elapsed());
            if !solution.has_flow() {
                if solution.status == SolveStatus::TimeLimit {
                    break 'outer DddStatus::TimeLimit;
                }
                return Err(DddError::Internal("relaxed network has no feasible flow".into()));
            }
            let model_bound = solution.lower_bound();
            lb = lb.max(model_bound);

            let ctx = RefineContext {
                instance,
                delta_max: delta,
                scheme: config.scheme,
                tps: &tps,
                backend,
                enumeration_cap: config.enumeration_cap,
                close_exclusion: config.close_exclusion,
            };
            let phase = Instant::now();
            let mut outcome = refine(config.strategy, &solution, &network, &ctx)?;
            log::debug!("refine: {:?}, {:?}", phase.elapsed(), outcome.report);

            let mut support = Some(Support { network: network.clone(), solution: solution.clone() });
            if outcome.implementable() {
                let s = ScheduleSolution::from_duties(instance, delta, &outcome.decomposition)?;
                offer(&mut best, s, || support.take(), instance, delta)?;
            }
            if outcome.decomposition != outcome.greedy
                && outcome.greedy.iter().all(|d| !d.cyclic && crate::refine::check_duty(d, instance, delta).is_feasible())
            {
                let s = ScheduleSolution::from_duties(instance, delta, &outcome.greedy)?;
                offer(&mut best, s, || support.take(), instance, delta)?;
            }
            if !outcome.implementable() {
                let (kept, uncovered) = feasible_part(instance, delta, &outcome.decomposition);
                let limit = remaining(start, config.time_limit()).flatten();
                let phase = Instant::now();
                if let Some(s) =
                    repair_upper_bound(instance, delta, &kept, &uncovered, config.ub_repair_threshold, backend, limit)?
                {
                    repaired |= offer(&mut best, s, || None, instance, delta)?;
                }
                log::debug!("repair over {} trips: {:?}", uncovered.len(), phase.elapsed());
            }

            let ub = best.as_ref().map(|b| b.schedule.cost as f64);
            if terminated(gap(ub, lb as f64), ub, config.epsilon) || !outcome.points.is_empty() {
                break (outcome, model_bound);
            }
            if tolerance != Tolerance::EXACT {
                tolerance = Tolerance::EXACT;
                exact_resolve = true;
                continue;
            }
            if config.strategy == RefineStrategy::FewerTimePoints {
                outcome = refine(RefineStrategy::Duty, &solution, &network, &ctx)?;
            }
            if outcome.points.is_empty() {
                return Err(DddError::Internal("exact relaxation is implementable but the gap is open".into()));
            }
            break (outcome, model_bound);
        };

        let ub = best.as_ref().map(|b| b.schedule.cost);
        let g = gap(ub.map(|u| u as f64), lb as f64);
        add_time_points(&mut tps, &outcome.points);
        iterations.push(IterationRecord {
            iter: iterations.len() + 1,
            lb,
            model_bound,
            ub,
            gap: g,
            nodes: stats.nodes,
            arcs: stats.arcs,
            points_added: outcome.points.len(),
            wall_ms: iter_start.elapsed().as_millis(),
            tolerance,
            exact_resolve,
            repaired,
            refinement: outcome.report,
        });
        log::info!("iteration {}: lb {lb} ub {ub:?} points {}", iterations.len(), outcome.points.len());
        if terminated(g, ub.map(|u| u as f64), config.epsilon) {
            break DddStatus::Optimal;
        }
        if config.fixed_tolerance.is_none() {
            tol_state.update(lb as f64, ub);
        }
    };

    let (schedule, support) = match best {
        Some(b) => (Some(b.schedule), b.support),
        None => (None, None),
    };
    Ok(DddOutcome {
        status,
        upper_bound: schedule.as_ref().map(|s| s.cost),
        schedule,
        lower_bound: lb.max(0),
        iterations,
        time_points: tps.len(),
        support,
        elapsed: start.elapsed(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::tests::line_instance;
    use crate::mip::BranchAndBound;

    fn config(delta: Minutes) -> DddConfig {
        DddConfig { delta_max: delta, ..Default::default() }
    }

    #[test]
    fn gap_examples() {
        assert_eq!(gap(Some(1000.0), 999.2), Some(1000.0 - 999.2));
        assert!(terminated(gap(Some(1000.0), 999.2), Some(1000.0), Tolerance::Absolute(1.0)));
        assert!(!terminated(gap(Some(1001.0), 999.0), Some(1001.0), Tolerance::Absolute(1.0)));
        assert!(!terminated(gap(None, 999.0), None, Tolerance::Absolute(1.0)));
        assert!(terminated(Some(5.0), Some(1000.0), Tolerance::Relative(0.01)));
        assert!(!terminated(Some(10.0), Some(1000.0), Tolerance::Relative(0.01)));
    }

    #[test]
    fn zero_shift_needs_one_iteration() {
        let inst = line_instance(&[(1, 2, 10, 20), (2, 1, 25, 35), (1, 2, 12, 18)]);
        let fd = solve_fd(&inst, 0, &SolveParams::default(), &BranchAndBound::default()).unwrap();
        let fd_cost = fd.schedule.map(|s| s.cost);
        for scheme in DeadheadScheme::ALL {
            let cfg = DddConfig { scheme, ..config(0) };
            let out = solve_ddd(&inst, &cfg, &BranchAndBound::default()).unwrap();
            assert_eq!(out.status, DddStatus::Optimal);
            assert_eq!(out.upper_bound, fd_cost);
            if scheme != DeadheadScheme::Short {
                assert_eq!(out.iterations.len(), 1, "{scheme}");
            }
        }
    }

    #[test]
    fn shifting_saves_a_vehicle() {
        // The second trip departs one minute before the first vehicle can reach it.
        let inst = line_instance(&[(1, 2, 10, 20), (1, 2, 20, 28)]);
        let bnb = BranchAndBound::default();
        let rigid = solve_ddd(&inst, &config(0), &bnb).unwrap();
        let flexible = solve_ddd(&inst, &config(1), &bnb).unwrap();
        assert_eq!(rigid.upper_bound, Some(2 * 1004));
        assert_eq!(flexible.upper_bound, Some(1005));
        let s = flexible.schedule.unwrap();
        s.validate(&inst, 1).unwrap();
        assert_eq!(s.duties[0].departures, vec![9, 20]);
    }

    #[test]
    fn matches_full_network_on_late_chain() {
        let inst = crate::refine::tests::late_chain();
        let bnb = BranchAndBound::default();
        let fd = solve_fd(&inst, 1, &SolveParams::default(), &bnb).unwrap();
        for scheme in DeadheadScheme::ALL {
            for strategy in RefineStrategy::ALL {
                let cfg = DddConfig { delta_max: 1, scheme, strategy, ..Default::default() };
                let out = solve_ddd(&inst, &cfg, &bnb).unwrap();
                assert_eq!(out.status, DddStatus::Optimal);
                assert_eq!(out.upper_bound, fd.schedule.as_ref().map(|s| s.cost), "{scheme} {strategy}");
                out.schedule.unwrap().validate(&inst, 1).unwrap();
                let lbs: Vec<Cost> = out.iterations.iter().map(|r| r.lb).collect();
                assert!(lbs.windows(2).all(|w| w[0] <= w[1]));
            }
        }
    }

    #[test]
    fn empty_instance() {
        let inst = line_instance(&[]);
        let out = solve_ddd(&inst, &config(3), &BranchAndBound::default()).unwrap();
        assert_eq!(out.status, DddStatus::Optimal);
        assert_eq!(out.upper_bound, Some(0));
    }

    #[test]
    fn repair_fills_uncovered_trips() {
        let inst = line_instance(&[(1, 2, 10, 20), (1, 2, 22, 30), (2, 1, 40, 50)]);
        let bnb = BranchAndBound::default();
        let kept = vec![ScheduledDuty {
            depot: crate::instance::LocationId(0),
            trips: vec![TripId(0)],
            departures: vec![10],
        }];
        let s = repair_upper_bound(&inst, 1, &kept, &[TripId(1), TripId(2)], 100, &bnb, None).unwrap().unwrap();
        s.validate(&inst, 1).unwrap();
        assert_eq!(s.vehicles, 2);
        assert_eq!(repair_upper_bound(&inst, 1, &kept, &[TripId(1), TripId(2)], 1, &bnb, None).unwrap(), None);
    }

    #[test]
    fn iteration_limit_reported() {
        let inst = crate::refine::tests::late_chain();
        let cfg = DddConfig { delta_max: 1, max_iterations: Some(1), strategy: RefineStrategy::Duty, ..Default::default() };
        let out = solve_ddd(&inst, &cfg, &BranchAndBound::default()).unwrap();
        assert!(out.iterations.len() <= 1);
        if out.status != DddStatus::Optimal {
            assert_eq!(out.status, DddStatus::IterationLimit);
        }
    }
}
