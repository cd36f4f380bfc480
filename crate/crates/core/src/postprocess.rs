//! Timetable-deviation minimization at fixed cost.
//!
//! A schedule from the solver departs every trip as early as possible.
//! Post-processing keeps every vehicle and every cost but moves departures
//! back toward the timetable, optionally choosing a different split of the
//! same flow into duties.

use crate::ddd::{ScheduleSolution, ScheduledDuty, Support};
use crate::instance::{Instance, Minutes, TripId};
use crate::mip::{MipBackend, MipError};
use crate::refine::{
    decompose_components, enumerate_duties, optimize_decomposition, DecompositionConstraints, Duty, RefineContext,
    RefineError,
};
use crate::timenet::{DeadheadScheme, TimePointSet};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PostprocessError {
    #[error("duty {0:?} cannot be operated within the allowed shifts")]
    Infeasible(Vec<TripId>),
    #[error(transparent)]
    Refine(#[from] RefineError),
    #[error(transparent)]
    Mip(#[from] MipError),
}

/// Departures of one duty together with their split into delay and advance.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeviationSchedule {
    pub trips: Vec<TripId>,
    pub departures: Vec<Minutes>,
    pub delta_plus: Vec<Minutes>,
    pub delta_minus: Vec<Minutes>,
    pub total: Minutes,
}

impl DeviationSchedule {
    fn new(trips: Vec<TripId>, departures: Vec<Minutes>, instance: &Instance) -> Self {
        let shifts: Vec<Minutes> =
            trips.iter().zip(&departures).map(|(&t, &d)| d - instance.trip(t).start_time).collect();
        DeviationSchedule {
            delta_plus: shifts.iter().map(|&s| s.max(0)).collect(),
            delta_minus: shifts.iter().map(|&s| (-s).max(0)).collect(),
            total: shifts.iter().map(|s| s.abs()).sum(),
            trips,
            departures,
        }
    }
}

/// Departures for `trips` minimizing the total absolute shift. Ties go to
/// the lexicographically smallest vector of per-trip deviations, then to the
/// earliest departures.
pub fn minimize_duty_deviation(
    trips: &[TripId],
    instance: &Instance,
    delta_max: Minutes,
) -> Result<DeviationSchedule, PostprocessError> {
    type Key = (Minutes, Vec<Minutes>, Vec<Minutes>);
    let n = trips.len();
    if n == 0 {
        return Ok(DeviationSchedule::new(Vec::new(), Vec::new(), instance));
    }
    let width = (2 * delta_max + 1) as usize;
    let window_start = |i: usize| instance.trip(trips[i]).start_time - delta_max;
    let mut next: Vec<Option<Key>> = vec![None; width];
    for i in (0..n).rev() {
        let mut cur: Vec<Option<Key>> = vec![None; width];
        for (k, slot) in cur.iter_mut().enumerate() {
            let d = window_start(i) + k as Minutes;
            let dev = (k as Minutes - delta_max).abs();
            if i + 1 == n {
                *slot = Some((dev, vec![dev], vec![d]));
                continue;
            }
            let ready = d + instance.connection_time(trips[i], trips[i + 1]);
            let tail = next
                .iter()
                .enumerate()
                .filter(|(k2, v)| v.is_some() && window_start(i + 1) + *k2 as Minutes >= ready)
                .filter_map(|(_, v)| v.as_ref())
                .min();
            if let Some((total, devs, pis)) = tail {
                let mut devs2 = Vec::with_capacity(devs.len() + 1);
                devs2.push(dev);
                devs2.extend(devs);
                let mut pis2 = Vec::with_capacity(pis.len() + 1);
                pis2.push(d);
                pis2.extend(pis);
                *slot = Some((total + dev, devs2, pis2));
            }
        }
        next = cur;
    }
    let (_, _, pis) = next.into_iter().flatten().min().ok_or_else(|| PostprocessError::Infeasible(trips.to_vec()))?;
    Ok(DeviationSchedule::new(trips.to_vec(), pis, instance))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PostprocessMode {
    /// Keep the duties, re-time each one.
    PerDuty,
    /// Pick the split of the flow into duties with the least total deviation.
    Optimized,
    /// Pick the split with the largest total deviation.
    Worst,
    /// Pick a split by minimizing seeded uniform random weights.
    Random { seed: u64 },
}

impl std::str::FromStr for PostprocessMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "per-duty" => Ok(PostprocessMode::PerDuty),
            "optimized" => Ok(PostprocessMode::Optimized),
            "worst" => Ok(PostprocessMode::Worst),
            other => match other.strip_prefix("random:").map(str::parse) {
                Some(Ok(seed)) => Ok(PostprocessMode::Random { seed }),
                _ => Err(format!("unknown post-processing mode `{other}`")),
            },
        }
    }
}

impl std::fmt::Display for PostprocessMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            PostprocessMode::PerDuty => f.write_str("per-duty"),
            PostprocessMode::Optimized => f.write_str("optimized"),
            PostprocessMode::Worst => f.write_str("worst"),
            PostprocessMode::Random { seed } => write!(f, "random:{seed}"),
        }
    }
}

#[derive(Clone, Debug)]
pub struct PostprocessOutcome {
    pub schedule: ScheduleSolution,
    pub warnings: Vec<String>,
}

fn retime(duty: &ScheduledDuty, instance: &Instance, delta_max: Minutes) -> Result<ScheduledDuty, PostprocessError> {
    let dev = minimize_duty_deviation(&duty.trips, instance, delta_max)?;
    Ok(ScheduledDuty { depot: duty.depot, trips: dev.trips, departures: dev.departures })
}

/// Re-times `schedule` at unchanged cost and vehicle count. The decomposition
/// modes need `support`, the flow the schedule was read from; without it, or
/// when a component has too many candidate duties, they fall back to
/// per-duty re-timing and say so in the warnings.
pub fn postprocess_solution(
    schedule: &ScheduleSolution,
    support: Option<&Support>,
    mode: PostprocessMode,
    instance: &Instance,
    delta_max: Minutes,
    backend: &dyn MipBackend,
    enumeration_cap: usize,
) -> Result<PostprocessOutcome, PostprocessError> {
    let mut warnings = Vec::new();
    let per_duty = |duties: &[ScheduledDuty]| -> Result<Vec<ScheduledDuty>, PostprocessError> {
        duties.iter().map(|d| retime(d, instance, delta_max)).collect()
    };
    let support = match (mode, support) {
        (PostprocessMode::PerDuty, _) => None,
        (_, None) => {
            warnings.push("no flow available for the schedule; re-timing duties individually".to_string());
            None
        }
        (_, Some(s)) => Some(s),
    };
    let Some(support) = support else {
        let duties = per_duty(&schedule.duties)?;
        return Ok(PostprocessOutcome { schedule: ScheduleSolution::from_scheduled(instance, duties), warnings });
    };

    let mut rng = match mode {
        PostprocessMode::Random { seed } => Some(ChaCha8Rng::seed_from_u64(seed)),
        _ => None,
    };
    let tps = TimePointSet::new(instance.locations.len());
    let ctx = RefineContext {
        instance,
        delta_max,
        scheme: DeadheadScheme::Short,
        tps: &tps,
        backend,
        enumeration_cap,
        close_exclusion: false,
    };
    let mut assigned = vec![false; schedule.duties.len()];
    let mut result = Vec::with_capacity(schedule.duties.len());
    for comp in decompose_components(&support.solution, &support.network) {
        let own_idx: Vec<usize> = schedule
            .duties
            .iter()
            .enumerate()
            .filter(|(i, d)| {
                !assigned[*i] && d.depot == comp.depot && d.trips.first().is_some_and(|t| comp.contains_trip(*t))
            })
            .map(|(i, _)| i)
            .collect();
        if own_idx.is_empty() {
            continue;
        }
        for &i in &own_idx {
            assigned[i] = true;
        }
        let own: Vec<ScheduledDuty> = own_idx.iter().map(|&i| schedule.duties[i].clone()).collect();
        let as_duties: Vec<Duty> = own.iter().map(|d| Duty::new(d.depot, d.trips.clone())).collect();
        let cands = enumerate_duties(&comp, &support.network, &support.solution, &as_duties, &ctx)?;
        if cands.truncated {
            warnings.push(format!(
                "component with {} trips has more than {enumeration_cap} candidate duties; re-timing its duties individually",
                comp.trips.len()
            ));
            result.extend(per_duty(&own)?);
            continue;
        }

        let mut allowed = Vec::with_capacity(cands.duties.len());
        let mut delta_p = Vec::with_capacity(cands.duties.len());
        let mut cost = Vec::with_capacity(cands.duties.len());
        let mut retimed = Vec::with_capacity(cands.duties.len());
        for (d, r) in cands.duties.iter().zip(&cands.reports) {
            let ok = !d.cyclic && r.is_feasible();
            allowed.push(ok);
            let sd = ScheduledDuty { depot: d.depot, trips: d.trips.clone(), departures: r.pi().to_vec() };
            cost.push(sd.cost(instance) as f64);
            if ok {
                let t = retime(&sd, instance, delta_max)?;
                delta_p.push(t.departures.iter().zip(&t.trips).map(|(&p, &tr)| (p - instance.trip(tr).start_time).abs()).sum::<Minutes>());
                retimed.push(Some(t));
            } else {
                delta_p.push(0);
                retimed.push(None);
            }
        }
        let weights: Vec<f64> = match mode {
            PostprocessMode::Worst => delta_p.iter().map(|&d| -(d as f64)).collect(),
            PostprocessMode::Random { .. } => {
                let rng = rng.as_mut().expect("seeded");
                delta_p.iter().map(|_| rng.gen::<f64>()).collect()
            }
            _ => delta_p.iter().map(|&d| d as f64).collect(),
        };
        let own_cost: f64 = own.iter().map(|d| d.cost(instance) as f64).sum();
        let constraints = DecompositionConstraints {
            allowed: Some(allowed),
            equalities: vec![(cost, own_cost), (vec![1.0; cands.duties.len()], own.len() as f64)],
        };
        match optimize_decomposition(&cands, &weights, &constraints, backend)? {
            Some(sel) => result.extend(sel.duties.into_iter().map(|p| retimed[p].clone().expect("allowed duty"))),
            None => {
                warnings.push("no admissible decomposition found; re-timing duties individually".to_string());
                result.extend(per_duty(&own)?);
            }
        }
    }
    let rest: Vec<ScheduledDuty> =
        schedule.duties.iter().zip(&assigned).filter(|(_, a)| !**a).map(|(d, _)| d.clone()).collect();
    if !rest.is_empty() {
        warnings.push(format!("{} duties are not part of the flow; re-timing them individually", rest.len()));
        result.extend(per_duty(&rest)?);
    }
    Ok(PostprocessOutcome { schedule: ScheduleSolution::from_scheduled(instance, result), warnings })
}

/// Mean absolute shift per trip in seconds.
pub fn average_deviation_seconds(schedule: &ScheduleSolution) -> f64 {
    if schedule.shifts.is_empty() {
        return 0.0;
    }
    60.0 * schedule.total_deviation() as f64 / schedule.shifts.len() as f64
}
