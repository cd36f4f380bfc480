//! From flows to duties: decomposition, continuous-time feasibility checks
//! and the time points that cut non-implementable duties out of the next
//! partial network.

pub(crate) mod candidates;
mod exclusion;
mod extract;

pub use candidates::{enumerate_duties, optimize_decomposition, DecompositionConstraints, DutyCandidates, Selection};
pub use exclusion::{exclusion_points, find_trip_path, TripPath};
pub use extract::{decompose_components, extract_duties, Component};

use crate::instance::{Instance, LocationId, Minutes, TripId};
use crate::mip::{FlowSolution, MipBackend, MipError};
use crate::timenet::{build_partial_network, DeadheadScheme, LayeredNetwork, NetworkError, TimePointSet};
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use thiserror::Error;

/// Sequences per component kept by [`enumerate_duties`] before truncating.
pub const DEFAULT_ENUMERATION_CAP: usize = 10_000;

/// The trips one vehicle operates, in order.
///
/// A cyclic duty comes from a flow cycle that never touches a depot. Such
/// cycles only exist on partial networks and are never implementable.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Duty {
    pub depot: LocationId,
    pub trips: Vec<TripId>,
    #[serde(default)]
    pub cyclic: bool,
}

impl Duty {
    pub fn new(depot: LocationId, trips: Vec<TripId>) -> Self {
        Duty { depot, trips, cyclic: false }
    }

    /// The trip sequence a vehicle would attempt. Cycles are unrolled often
    /// enough that the check must fail.
    pub fn attempted_sequence(&self, delta_max: Minutes) -> Vec<TripId> {
        if !self.cyclic {
            return self.trips.clone();
        }
        let laps = (2 * delta_max + 2) as usize;
        self.trips.iter().copied().cycle().take(self.trips.len() * laps).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum FeasibilityReport {
    /// Earliest departure of every trip.
    Feasible { pi: Vec<Minutes> },
    /// Trip `bottleneck` (0-based) cannot start within its window; `pi`
    /// holds the earliest departures up to and including it.
    Infeasible { bottleneck: usize, pi: Vec<Minutes> },
}

impl FeasibilityReport {
    pub fn is_feasible(&self) -> bool {
        matches!(self, FeasibilityReport::Feasible { .. })
    }

    pub fn pi(&self) -> &[Minutes] {
        match self {
            FeasibilityReport::Feasible { pi } | FeasibilityReport::Infeasible { pi, .. } => pi,
        }
    }
}

/// Earliest departures `pi_1 = t_1 - d` and
/// `pi_i = max(pi_{i-1} + tau_{i-1,i}, t_i - d)`, stopping at the first
/// trip that would have to leave after `t_i + d`.
pub fn check_sequence(trips: &[TripId], instance: &Instance, delta_max: Minutes) -> FeasibilityReport {
    let mut pi: Vec<Minutes> = Vec::with_capacity(trips.len());
    for (i, &id) in trips.iter().enumerate() {
        let t = instance.trip(id);
        let earliest = match i {
            0 => t.start_time - delta_max,
            _ => (pi[i - 1] + instance.connection_time(trips[i - 1], id)).max(t.start_time - delta_max),
        };
        pi.push(earliest);
        if earliest > t.start_time + delta_max {
            return FeasibilityReport::Infeasible { bottleneck: i, pi };
        }
    }
    FeasibilityReport::Feasible { pi }
}

pub fn check_duty(duty: &Duty, instance: &Instance, delta_max: Minutes) -> FeasibilityReport {
    check_sequence(&duty.attempted_sequence(delta_max), instance, delta_max)
}

/// Start and end points of every trip before the bottleneck, and the
/// bottleneck's own start point.
pub fn refinement_points(
    trips: &[TripId],
    report: &FeasibilityReport,
    instance: &Instance,
) -> Result<Vec<(LocationId, Minutes)>, RefineError> {
    let FeasibilityReport::Infeasible { bottleneck, pi } = report else {
        return Err(RefineError::FeasibleDuty);
    };
    let mut points = Vec::with_capacity(2 * bottleneck + 1);
    for i in 0..*bottleneck {
        let t = instance.trip(trips[i]);
        points.push((t.start_location, pi[i]));
        points.push((t.end_location, pi[i] + t.duration()));
    }
    points.push((instance.trip(trips[*bottleneck]).start_location, pi[*bottleneck]));
    Ok(points)
}

#[derive(Debug, Error)]
pub enum RefineError {
    #[error("refinement points requested for a feasible duty")]
    FeasibleDuty,
    #[error("flow decomposition left {0} units of residual flow")]
    ResidualFlow(i64),
    #[error("solution carries no flow")]
    NoFlow,
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Mip(#[from] MipError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum RefineStrategy {
    #[serde(rename = "duty")]
    Duty,
    #[serde(rename = "fewer-timepoints")]
    FewerTimePoints,
    #[serde(rename = "fewer-iterations")]
    FewerIterations,
}

impl RefineStrategy {
    pub const ALL: [RefineStrategy; 3] =
        [RefineStrategy::Duty, RefineStrategy::FewerTimePoints, RefineStrategy::FewerIterations];
}

impl std::str::FromStr for RefineStrategy {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "duty" => Ok(RefineStrategy::Duty),
            "fewer-timepoints" | "fewer-time-points" | "ftp" => Ok(RefineStrategy::FewerTimePoints),
            "fewer-iterations" | "fi" => Ok(RefineStrategy::FewerIterations),
            other => Err(format!("unknown refinement strategy `{other}`")),
        }
    }
}

impl std::fmt::Display for RefineStrategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            RefineStrategy::Duty => "duty",
            RefineStrategy::FewerTimePoints => "fewer-timepoints",
            RefineStrategy::FewerIterations => "fewer-iterations",
        })
    }
}

/// Everything refinement needs besides the solved flow.
pub struct RefineContext<'a> {
    pub instance: &'a Instance,
    pub delta_max: Minutes,
    pub scheme: DeadheadScheme,
    pub tps: &'a TimePointSet,
    pub backend: &'a dyn MipBackend,
    pub enumeration_cap: usize,
    /// Keep adding points until no refined duty survives in the rebuilt network.
    pub close_exclusion: bool,
}

/// Per-iteration summary of a refinement step.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RefinementReport {
    pub strategy: Option<RefineStrategy>,
    pub duties_checked: usize,
    pub infeasible_duties: usize,
    pub points_proposed: usize,
    pub points_added: usize,
    pub closure_points: usize,
    pub component_sizes: Vec<usize>,
    pub truncated: Vec<bool>,
}

#[derive(Clone, Debug)]
pub struct RefineOutcome {
    /// New time points, sorted; empty only if `decomposition` is implementable.
    pub points: Vec<(LocationId, Minutes)>,
    /// The decomposition the strategy settled on: the greedy one, or the
    /// selected one for fewer-timepoints.
    pub decomposition: Vec<Duty>,
    pub reports: Vec<FeasibilityReport>,
    /// The greedy decomposition of the flow.
    pub greedy: Vec<Duty>,
    pub report: RefinementReport,
}

impl RefineOutcome {
    pub fn implementable(&self) -> bool {
        self.reports.iter().all(FeasibilityReport::is_feasible)
    }
}

pub fn refine(
    strategy: RefineStrategy,
    solution: &FlowSolution,
    network: &LayeredNetwork,
    ctx: &RefineContext<'_>,
) -> Result<RefineOutcome, RefineError> {
    let instance = ctx.instance;
    let greedy = extract_duties(solution, network)?;
    let mut report = RefinementReport { strategy: Some(strategy), ..Default::default() };

    let (decomposition, to_refine): (Vec<Duty>, Vec<Duty>) = match strategy {
        RefineStrategy::Duty => {
            let bad = greedy.iter().filter(|d| !check_duty(d, instance, ctx.delta_max).is_feasible()).cloned().collect();
            report.duties_checked = greedy.len();
            (greedy.clone(), bad)
        }
        RefineStrategy::FewerTimePoints | RefineStrategy::FewerIterations => {
            let components = decompose_components(solution, network);
            let mut selected = Vec::new();
            let mut bad = Vec::new();
            for comp in &components {
                let own: Vec<Duty> = greedy
                    .iter()
                    .filter(|d| d.depot == comp.depot && d.trips.first().is_some_and(|t| comp.contains_trip(*t)))
                    .cloned()
                    .collect();
                let cands = enumerate_duties(comp, network, solution, &own, ctx)?;
                report.component_sizes.push(comp.trips.len());
                report.truncated.push(cands.truncated);
                report.duties_checked += cands.duties.len();
                if strategy == RefineStrategy::FewerIterations {
                    for (d, r) in cands.duties.iter().zip(&cands.reports) {
                        if !r.is_feasible() {
                            bad.push(d.clone());
                        }
                    }
                    continue;
                }
                let weights: Vec<f64> = cands.n_p.iter().map(|&n| n as f64).collect();
                let chosen = optimize_decomposition(&cands, &weights, &DecompositionConstraints::default(), ctx.backend)?;
                let picks: Vec<usize> = match chosen {
                    Some(sel) => sel.duties,
                    None => {
                        log::warn!("no exact cover among candidates; using the greedy decomposition");
                        own.iter().filter_map(|d| cands.index_of(d)).collect()
                    }
                };
                for p in picks {
                    if !cands.reports[p].is_feasible() {
                        bad.push(cands.duties[p].clone());
                    }
                    selected.push(cands.duties[p].clone());
                }
            }
            match strategy {
                RefineStrategy::FewerIterations => (greedy.clone(), bad),
                _ => (selected, bad),
            }
        }
    };

    let reports: Vec<FeasibilityReport> =
        decomposition.iter().map(|d| check_duty(d, instance, ctx.delta_max)).collect();
    report.infeasible_duties = to_refine.len();

    let mut proposed = BTreeSet::new();
    let mut prefixes = Vec::with_capacity(to_refine.len());
    for d in &to_refine {
        let seq = d.attempted_sequence(ctx.delta_max);
        let r = check_sequence(&seq, instance, ctx.delta_max);
        proposed.extend(refinement_points(&seq, &r, instance)?);
        if let FeasibilityReport::Infeasible { bottleneck, .. } = r {
            prefixes.push(seq[..=bottleneck].to_vec());
        }
    }
    report.points_proposed = proposed.len();

    let mut tps = ctx.tps.clone();
    let mut added: BTreeSet<(LocationId, Minutes)> = BTreeSet::new();
    for &(l, t) in &proposed {
        if tps.insert(l, t) {
            added.insert((l, t));
        }
    }
    report.points_added = added.len();

    if ctx.close_exclusion && !prefixes.is_empty() {
        prefixes.sort();
        prefixes.dedup();
        loop {
            let net = build_partial_network(instance, ctx.delta_max, &tps, ctx.scheme)?;
            let mut extra = BTreeSet::new();
            for seq in &prefixes {
                if let Some(points) = exclusion_points(&net, seq, instance, ctx.delta_max) {
                    extra.extend(points.into_iter().filter(|&(l, t)| !tps.contains(l, t)));
                }
            }
            if extra.is_empty() {
                break;
            }
            report.closure_points += extra.len();
            for (l, t) in extra {
                tps.insert(l, t);
                added.insert((l, t));
            }
        }
    }

    Ok(RefineOutcome { points: added.into_iter().collect(), decomposition, reports, greedy, report })
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::instance::tests::line_instance;
    use crate::instance::Trip;
    use proptest::prelude::*;

    /// Four one-minute trips 1 -> 2 timetabled a minute apart; returning
    /// takes another minute, so each connection needs two.
    pub(crate) fn late_chain() -> Instance {
        line_instance(&[(1, 2, 11, 12), (1, 2, 12, 13), (1, 2, 13, 14), (1, 2, 14, 15)])
    }

    #[test]
    fn earliest_departures_of_a_late_chain() {
        let inst = late_chain();
        let trips: Vec<TripId> = (0..4).map(TripId).collect();
        let r = check_sequence(&trips, &inst, 1);
        assert_eq!(r, FeasibilityReport::Infeasible { bottleneck: 3, pi: vec![10, 12, 14, 16] });
    }

    #[test]
    fn single_trip_is_feasible() {
        let inst = line_instance(&[(1, 2, 10, 20)]);
        assert_eq!(check_sequence(&[TripId(0)], &inst, 3), FeasibilityReport::Feasible { pi: vec![7] });
    }

    #[test]
    fn points_up_to_the_bottleneck() {
        let inst = late_chain();
        let trips: Vec<TripId> = (0..4).map(TripId).collect();
        let r = check_sequence(&trips, &inst, 1);
        let l1 = LocationId(1);
        let l2 = LocationId(2);
        assert_eq!(
            refinement_points(&trips, &r, &inst).unwrap(),
            vec![(l1, 10), (l2, 11), (l1, 12), (l2, 13), (l1, 14), (l2, 15), (l1, 16)]
        );
        let r2 = check_sequence(&trips[..2], &line_instance(&[(1, 2, 11, 12), (1, 2, 11, 12)]), 0);
        assert!(matches!(r2, FeasibilityReport::Infeasible { bottleneck: 1, .. }));
        let inst2 = line_instance(&[(1, 2, 11, 12), (1, 2, 11, 12)]);
        assert_eq!(refinement_points(&trips[..2], &r2, &inst2).unwrap(), vec![(l1, 11), (l2, 12), (l1, 13)]);
        assert!(matches!(
            refinement_points(&trips[..1], &FeasibilityReport::Feasible { pi: vec![0] }, &inst),
            Err(RefineError::FeasibleDuty)
        ));
    }

    #[test]
    fn cyclic_duties_never_pass() {
        let inst = late_chain();
        let d = Duty { depot: LocationId(0), trips: vec![TripId(0), TripId(1)], cyclic: true };
        assert!(!check_duty(&d, &inst, 3).is_feasible());
        assert_eq!(d.attempted_sequence(1).len(), 8);
    }

    fn brute_force(trips: &[Trip], inst: &Instance, delta: Minutes) -> Option<Vec<Minutes>> {
        // Componentwise-minimal feasible departure vector, if any.
        let k = trips.len();
        let mut best: Option<Vec<Minutes>> = None;
        let width = (2 * delta + 1) as usize;
        for code in 0..width.pow(k as u32) {
            let mut c = code;
            let mut pi = Vec::with_capacity(k);
            for t in trips {
                pi.push(t.start_time - delta + (c % width) as Minutes);
                c /= width;
            }
            let ok = (1..k).all(|i| pi[i - 1] + inst.connection_time(trips[i - 1].id, trips[i].id) <= pi[i]);
            if ok {
                best = Some(match best {
                    None => pi,
                    Some(b) => b.iter().zip(&pi).map(|(x, y)| *x.min(y)).collect(),
                });
            }
        }
        best
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(300))]
        #[test]
        fn recursion_matches_brute_force(
            spec in prop::collection::vec((1u32..3, 1u32..3, 0i64..12, 1i64..5), 1..6),
            delta in 0i64..4,
        ) {
            let mut t = 20;
            let rows: Vec<(u32, u32, Minutes, Minutes)> = spec.iter().map(|&(a, b, gap, dur)| {
                t += gap;
                (a, b, t, t + dur)
            }).collect();
            let inst = line_instance(&rows);
            let ids: Vec<TripId> = (0..rows.len() as u32).map(TripId).collect();
            let report = check_sequence(&ids, &inst, delta);
            match brute_force(&inst.trips, &inst, delta) {
                Some(min) => prop_assert_eq!(report, FeasibilityReport::Feasible { pi: min }),
                None => prop_assert!(!report.is_feasible()),
            }
        }
    }
}
