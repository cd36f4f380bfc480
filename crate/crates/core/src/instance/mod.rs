//! Problem data for the multi-depot vehicle scheduling problem with trip
//! shifting: locations, depots, timetabled trips and the travel-time matrix.

mod generate;
mod io;

pub use generate::{generate_instance, GenError, GenParams};
pub use io::{from_json_str, load_instance, save_instance, to_json_string, InstanceIoError, SCHEMA_VERSION};

use serde::{Deserialize, Serialize};
use std::fmt;
use thiserror::Error;

/// Whole minutes. All times and durations in this crate are integral.
pub type Minutes = i64;
/// Integral cost unit.
pub type Cost = i64;

/// Fixed cost charged on every pull-out and pull-in arc on top of its travel time.
pub const DEFAULT_PULL_FIXED_COST: Cost = 500;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LocationId(pub u32);

impl LocationId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for LocationId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "L{}", self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TripId(pub u32);

impl TripId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for TripId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "T{}", self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LocationKind {
    Station,
    Depot,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Location {
    pub id: LocationId,
    pub x: i64,
    pub y: i64,
    pub kind: LocationKind,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Trip {
    pub id: TripId,
    pub start_location: LocationId,
    pub end_location: LocationId,
    pub start_time: Minutes,
    pub end_time: Minutes,
}

impl Trip {
    /// Timetabled duration `end_time - start_time`.
    pub fn duration(&self) -> Minutes {
        self.end_time - self.start_time
    }
}

/// An immutable problem instance.
///
/// Location and trip ids coincide with their position in `locations` and
/// `trips`; [`Instance::validate`] enforces this along with the travel-time
/// matrix invariants.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Instance {
    pub locations: Vec<Location>,
    pub trips: Vec<Trip>,
    pub travel_time: Vec<Vec<Minutes>>,
    pub pull_fixed_cost: Cost,
    pub horizon: (Minutes, Minutes),
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ValidationError {
    #[error("location at position {position} has id {id}")]
    LocationIdOrder { position: usize, id: LocationId },
    #[error("trip at position {position} has id {id}")]
    TripIdOrder { position: usize, id: TripId },
    #[error("instance has no depot")]
    NoDepot,
    #[error("travel-time matrix is not {size}x{size}")]
    MatrixShape { size: usize },
    #[error("travel time from {0} to itself is not zero")]
    NonZeroDiagonal(LocationId),
    #[error("negative travel time from {0} to {1}")]
    NegativeTravel(LocationId, LocationId),
    #[error("travel time is asymmetric between {0} and {1}")]
    Asymmetric(LocationId, LocationId),
    #[error("triangle inequality violated: {0} -> {1} -> {2} is shorter than {0} -> {2}")]
    Triangle(LocationId, LocationId, LocationId),
    #[error("trip {0} does not end after it starts")]
    TripTimes(TripId),
    #[error("trip {0} references unknown location")]
    UnknownLocation(TripId),
    #[error("trip {0} starts or ends at a depot")]
    TripAtDepot(TripId),
    #[error("trip {0} is shorter than the travel time between its endpoints")]
    TripTooShort(TripId),
    #[error("trip {0} lies outside the horizon")]
    TripOutsideHorizon(TripId),
    #[error("empty or inverted horizon")]
    Horizon,
    #[error("negative pull-out/pull-in fixed cost")]
    NegativeFixedCost,
}

impl Instance {
    pub fn location(&self, id: LocationId) -> &Location {
        &self.locations[id.index()]
    }

    pub fn trip(&self, id: TripId) -> &Trip {
        &self.trips[id.index()]
    }

    pub fn travel(&self, from: LocationId, to: LocationId) -> Minutes {
        self.travel_time[from.index()][to.index()]
    }

    pub fn depots(&self) -> Vec<LocationId> {
        self.locations
            .iter()
            .filter(|l| l.kind == LocationKind::Depot)
            .map(|l| l.id)
            .collect()
    }

    pub fn stations(&self) -> Vec<LocationId> {
        self.locations
            .iter()
            .filter(|l| l.kind == LocationKind::Station)
            .map(|l| l.id)
            .collect()
    }

    /// Trip time of `from` plus the deadhead from its end to the start of `to`.
    pub fn connection_time(&self, from: TripId, to: TripId) -> Minutes {
        let a = self.trip(from);
        let b = self.trip(to);
        a.duration() + self.travel(a.end_location, b.start_location)
    }

    /// A copy of the instance containing only `keep` (renumbered in the given order).
    pub fn restricted_to(&self, keep: &[TripId]) -> Instance {
        let trips = keep
            .iter()
            .enumerate()
            .map(|(i, &t)| Trip {
                id: TripId(i as u32),
                ..self.trip(t).clone()
            })
            .collect();
        Instance {
            locations: self.locations.clone(),
            trips,
            travel_time: self.travel_time.clone(),
            pull_fixed_cost: self.pull_fixed_cost,
            horizon: self.horizon,
        }
    }

    pub fn validate(&self) -> Result<(), ValidationError> {
        let n = self.locations.len();
        for (i, l) in self.locations.iter().enumerate() {
            if l.id.index() != i {
                return Err(ValidationError::LocationIdOrder { position: i, id: l.id });
            }
        }
        if !self.locations.iter().any(|l| l.kind == LocationKind::Depot) {
            return Err(ValidationError::NoDepot);
        }
        if self.horizon.0 >= self.horizon.1 {
            return Err(ValidationError::Horizon);
        }
        if self.pull_fixed_cost < 0 {
            return Err(ValidationError::NegativeFixedCost);
        }
        if self.travel_time.len() != n || self.travel_time.iter().any(|r| r.len() != n) {
            return Err(ValidationError::MatrixShape { size: n });
        }
        let id = |i: usize| LocationId(i as u32);
        for i in 0..n {
            if self.travel_time[i][i] != 0 {
                return Err(ValidationError::NonZeroDiagonal(id(i)));
            }
            for j in 0..n {
                if self.travel_time[i][j] < 0 {
                    return Err(ValidationError::NegativeTravel(id(i), id(j)));
                }
                if self.travel_time[i][j] != self.travel_time[j][i] {
                    let (a, b) = (i.min(j), i.max(j));
                    return Err(ValidationError::Asymmetric(id(a), id(b)));
                }
            }
        }
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    if self.travel_time[i][j] + self.travel_time[j][k] < self.travel_time[i][k] {
                        return Err(ValidationError::Triangle(id(i), id(j), id(k)));
                    }
                }
            }
        }
        for (i, t) in self.trips.iter().enumerate() {
            if t.id.index() != i {
                return Err(ValidationError::TripIdOrder { position: i, id: t.id });
            }
            if t.end_time <= t.start_time {
                return Err(ValidationError::TripTimes(t.id));
            }
            if t.start_location.index() >= n || t.end_location.index() >= n {
                return Err(ValidationError::UnknownLocation(t.id));
            }
            if self.location(t.start_location).kind != LocationKind::Station
                || self.location(t.end_location).kind != LocationKind::Station
            {
                return Err(ValidationError::TripAtDepot(t.id));
            }
            if t.duration() < self.travel(t.start_location, t.end_location) {
                return Err(ValidationError::TripTooShort(t.id));
            }
            if t.start_time < self.horizon.0 || t.end_time > self.horizon.1 {
                return Err(ValidationError::TripOutsideHorizon(t.id));
            }
        }
        Ok(())
    }
}

/// Arc categories used for costing. Mirrors the network arc kinds without
/// carrying trip data.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum CostKind {
    Trip,
    Wait,
    Deadhead,
    PullOut,
    PullIn,
}

/// Cost of an arc between two locations: trips and waiting are free,
/// deadheads cost their travel time and depot moves add the fixed pull cost.
pub fn arc_cost(kind: CostKind, tail: LocationId, head: LocationId, instance: &Instance) -> Cost {
    match kind {
        CostKind::Trip | CostKind::Wait => 0,
        CostKind::Deadhead => instance.travel(tail, head),
        CostKind::PullOut | CostKind::PullIn => instance.pull_fixed_cost + instance.travel(tail, head),
    }
}
