use crate::instance::{arc_cost, Cost, CostKind, Instance, LocationId, Minutes, TripId};
use crate::refine::{check_duty, Duty, FeasibilityReport};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ScheduleError {
    #[error("trip {0} is not covered")]
    Uncovered(TripId),
    #[error("trip {0} is covered more than once")]
    Duplicate(TripId),
    #[error("duty {0} is cyclic")]
    Cyclic(usize),
    #[error("duty {duty} cannot operate trip {trip} in time")]
    Infeasible { duty: usize, trip: TripId },
    #[error("duty {0} lists a different number of trips and departures")]
    Shape(usize),
    #[error("trip {trip} departs at {departure}, outside its window")]
    Window { trip: TripId, departure: Minutes },
    #[error("duty {duty} reaches trip {trip} too late")]
    Connection { duty: usize, trip: TripId },
    #[error("{0} is not a depot")]
    NotADepot(LocationId),
    #[error("stated cost {stated} differs from recomputed cost {actual}")]
    Cost { stated: Cost, actual: Cost },
}

/// A duty with a departure time for each of its trips.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScheduledDuty {
    pub depot: LocationId,
    pub trips: Vec<TripId>,
    pub departures: Vec<Minutes>,
}

impl ScheduledDuty {
    /// Pull-out, direct deadheads between consecutive trips, and pull-in.
    pub fn cost(&self, instance: &Instance) -> Cost {
        let (Some(&first), Some(&last)) = (self.trips.first(), self.trips.last()) else {
            return 0;
        };
        let mut cost = arc_cost(CostKind::PullOut, self.depot, instance.trip(first).start_location, instance);
        for w in self.trips.windows(2) {
            let from = instance.trip(w[0]).end_location;
            let to = instance.trip(w[1]).start_location;
            if from != to {
                cost += arc_cost(CostKind::Deadhead, from, to, instance);
            }
        }
        cost + arc_cost(CostKind::PullIn, instance.trip(last).end_location, self.depot, instance)
    }

    /// Minutes driven empty, depot moves included.
    pub fn empty_minutes(&self, instance: &Instance) -> Minutes {
        let (Some(&first), Some(&last)) = (self.trips.first(), self.trips.last()) else {
            return 0;
        };
        let mut total = instance.travel(self.depot, instance.trip(first).start_location);
        for w in self.trips.windows(2) {
            total += instance.travel(instance.trip(w[0]).end_location, instance.trip(w[1]).start_location);
        }
        total + instance.travel(instance.trip(last).end_location, self.depot)
    }
}

/// A complete continuous-time vehicle schedule.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScheduleSolution {
    pub duties: Vec<ScheduledDuty>,
    pub cost: Cost,
    pub vehicles: usize,
    pub deadhead_minutes: Minutes,
    /// Departure minus timetabled departure, indexed by trip id.
    pub shifts: Vec<Minutes>,
}

impl ScheduleSolution {
    /// Computes the metrics of `duties`. Trips missing from every duty get shift 0.
    pub fn from_scheduled(instance: &Instance, duties: Vec<ScheduledDuty>) -> Self {
        let mut shifts = vec![0; instance.trips.len()];
        for d in &duties {
            for (&t, &dep) in d.trips.iter().zip(&d.departures) {
                shifts[t.index()] = dep - instance.trip(t).start_time;
            }
        }
        ScheduleSolution {
            cost: duties.iter().map(|d| d.cost(instance)).sum(),
            vehicles: duties.len(),
            deadhead_minutes: duties.iter().map(|d| d.empty_minutes(instance)).sum(),
            shifts,
            duties,
        }
    }

    /// Schedules each duty at its earliest departures.
    pub fn from_duties(instance: &Instance, delta_max: Minutes, duties: &[Duty]) -> Result<Self, ScheduleError> {
        let mut scheduled = Vec::with_capacity(duties.len());
        for (i, d) in duties.iter().enumerate() {
            if d.cyclic {
                return Err(ScheduleError::Cyclic(i));
            }
            match check_duty(d, instance, delta_max) {
                FeasibilityReport::Feasible { pi } => {
                    scheduled.push(ScheduledDuty { depot: d.depot, trips: d.trips.clone(), departures: pi })
                }
                FeasibilityReport::Infeasible { bottleneck, .. } => {
                    return Err(ScheduleError::Infeasible { duty: i, trip: d.trips[bottleneck] })
                }
            }
        }
        Ok(Self::from_scheduled(instance, scheduled))
    }

    /// Sum over trips of the absolute shift, in minutes.
    pub fn total_deviation(&self) -> Minutes {
        self.shifts.iter().map(|s| s.abs()).sum()
    }

    /// Checks the schedule against the raw instance: coverage, departure
    /// windows, travel times between consecutive trips and the stated cost.
    pub fn validate(&self, instance: &Instance, delta_max: Minutes) -> Result<(), ScheduleError> {
        let mut seen = vec![false; instance.trips.len()];
        let mut cost = 0;
        for (i, d) in self.duties.iter().enumerate() {
            if d.trips.len() != d.departures.len() {
                return Err(ScheduleError::Shape(i));
            }
            if instance.location(d.depot).kind != crate::instance::LocationKind::Depot {
                return Err(ScheduleError::NotADepot(d.depot));
            }
            for (k, (&t, &dep)) in d.trips.iter().zip(&d.departures).enumerate() {
                if std::mem::replace(&mut seen[t.index()], true) {
                    return Err(ScheduleError::Duplicate(t));
                }
                let trip = instance.trip(t);
                if (dep - trip.start_time).abs() > delta_max {
                    return Err(ScheduleError::Window { trip: t, departure: dep });
                }
                if k > 0 {
                    let prev = instance.trip(d.trips[k - 1]);
                    let ready = d.departures[k - 1]
                        + (prev.end_time - prev.start_time)
                        + instance.travel_time[prev.end_location.index()][trip.start_location.index()];
                    if dep < ready {
                        return Err(ScheduleError::Connection { duty: i, trip: t });
                    }
                }
            }
            if let (Some(&f), Some(&l)) = (d.trips.first(), d.trips.last()) {
                let (f, l) = (instance.trip(f), instance.trip(l));
                cost += instance.pull_fixed_cost + instance.travel_time[d.depot.index()][f.start_location.index()];
                cost += instance.pull_fixed_cost + instance.travel_time[l.end_location.index()][d.depot.index()];
                for w in d.trips.windows(2) {
                    let (a, b) = (instance.trip(w[0]), instance.trip(w[1]));
                    cost += instance.travel_time[a.end_location.index()][b.start_location.index()];
                }
            }
        }
        if let Some(t) = seen.iter().position(|&s| !s) {
            return Err(ScheduleError::Uncovered(TripId(t as u32)));
        }
        if cost != self.cost {
            return Err(ScheduleError::Cost { stated: self.cost, actual: cost });
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::tests::line_instance;

    #[test]
    fn costs_and_validation() {
        let inst = line_instance(&[(1, 2, 10, 20), (1, 2, 22, 30)]);
        let duty = Duty::new(LocationId(0), vec![TripId(0), TripId(1)]);
        let s = ScheduleSolution::from_duties(&inst, 1, &[duty]).unwrap();
        assert_eq!(s.cost, 502 + 1 + 502);
        assert_eq!(s.vehicles, 1);
        assert_eq!(s.deadhead_minutes, 5);
        assert_eq!(s.duties[0].departures, vec![9, 21]);
        assert_eq!(s.shifts, vec![-1, -1]);
        s.validate(&inst, 1).unwrap();

        let mut bad = s.clone();
        bad.cost += 1;
        assert!(matches!(bad.validate(&inst, 1), Err(ScheduleError::Cost { .. })));
        let mut bad = s.clone();
        bad.duties[0].departures[1] = 19;
        assert!(matches!(bad.validate(&inst, 1), Err(ScheduleError::Window { .. })));
        let mut bad = s.clone();
        bad.duties[0].departures = vec![11, 21];
        assert!(matches!(bad.validate(&inst, 1), Err(ScheduleError::Connection { .. })));
        let mut bad = s;
        bad.duties[0].trips.pop();
        bad.duties[0].departures.pop();
        assert!(matches!(bad.validate(&inst, 1), Err(ScheduleError::Uncovered(TripId(1)))));
    }

    #[test]
    fn infeasible_duty_rejected() {
        let inst = line_instance(&[(1, 2, 10, 20), (1, 2, 15, 30)]);
        let duty = Duty::new(LocationId(0), vec![TripId(0), TripId(1)]);
        assert_eq!(
            ScheduleSolution::from_duties(&inst, 2, &[duty]),
            Err(ScheduleError::Infeasible { duty: 0, trip: TripId(1) })
        );
    }
}
