//! Layered time-space networks: one layer per depot, station nodes at
//! discrete points in time, and trip, deadhead, wait and depot arcs.
//!
//! The fully discretized network models every shift of every trip
//! explicitly. Partial networks are built over a [`TimePointSet`] and round
//! arc heads down to the latest available time point, which makes them a
//! relaxation of the full network.

mod aggregate;
mod build;
mod points;

pub use aggregate::aggregate_deadheads;
pub use build::{build_full_network, build_full_network_with, build_partial_network, NetworkError};
pub use points::{add_time_points, initial_time_points, rho, TimePointSet};

use crate::instance::{Cost, LocationId, Minutes, TripId};
use serde::{Deserialize, Serialize};
use std::io::Write;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeKey {
    Station { location: LocationId, time: Minutes },
    DepotStart(LocationId),
    DepotEnd(LocationId),
}

impl NodeKey {
    pub fn station(location: LocationId, time: Minutes) -> Self {
        NodeKey::Station { location, time }
    }

    pub fn time(&self) -> Option<Minutes> {
        match *self {
            NodeKey::Station { time, .. } => Some(time),
            _ => None,
        }
    }

    pub fn location(&self) -> LocationId {
        match *self {
            NodeKey::Station { location, .. } | NodeKey::DepotStart(location) | NodeKey::DepotEnd(location) => {
                location
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArcKind {
    /// A trip started at `shift` minutes from its timetabled departure.
    Trip { trip: TripId, shift: Minutes },
    Deadhead,
    Wait,
    PullOut,
    PullIn,
}

impl ArcKind {
    /// Tie-break rank used when stripping paths out of a flow.
    pub fn rank(&self) -> u8 {
        match self {
            ArcKind::Trip { .. } => 0,
            ArcKind::Deadhead => 1,
            ArcKind::Wait => 2,
            ArcKind::PullIn => 3,
            ArcKind::PullOut => 4,
        }
    }

    pub fn trip(&self) -> Option<TripId> {
        match *self {
            ArcKind::Trip { trip, .. } => Some(trip),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Arc {
    pub tail: NodeKey,
    pub head: NodeKey,
    pub kind: ArcKind,
    pub cost: Cost,
    /// Actual duration of the movement.
    pub true_length: Minutes,
    /// Duration implied by the node times (equals `true_length` for depot arcs).
    pub modeled_length: Minutes,
}

/// The network layer of a single depot.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Layer {
    pub depot: LocationId,
    /// Station nodes in `(location, time)` order followed by the two depot nodes.
    pub nodes: Vec<NodeKey>,
    pub arcs: Vec<Arc>,
    /// Arc indices of the trip arcs of each trip, indexed by trip id.
    pub trip_arcs: Vec<Vec<usize>>,
}

impl Layer {
    pub(crate) fn index_trip_arcs(arcs: &[Arc], num_trips: usize) -> Vec<Vec<usize>> {
        let mut index = vec![Vec::new(); num_trips];
        for (i, a) in arcs.iter().enumerate() {
            if let ArcKind::Trip { trip, .. } = a.kind {
                index[trip.index()].push(i);
            }
        }
        index
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LayeredNetwork {
    pub delta_max: Minutes,
    pub layers: Vec<Layer>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct NetworkStats {
    pub nodes: usize,
    pub arcs: usize,
}

#[derive(Serialize)]
struct ArcLine<'a> {
    layer: LocationId,
    tail: &'a NodeKey,
    head: &'a NodeKey,
    kind: &'a ArcKind,
    cost: Cost,
    true_len: Minutes,
    model_len: Minutes,
}

impl LayeredNetwork {
    pub fn stats(&self) -> NetworkStats {
        NetworkStats {
            nodes: self.layers.iter().map(|l| l.nodes.len()).sum(),
            arcs: self.layers.iter().map(|l| l.arcs.len()).sum(),
        }
    }

    pub fn num_trips(&self) -> usize {
        self.layers.first().map_or(0, |l| l.trip_arcs.len())
    }

    /// Writes one JSON object per arc.
    pub fn dump_json_lines(&self, mut out: impl Write) -> std::io::Result<()> {
        for layer in &self.layers {
            for a in &layer.arcs {
                let line = ArcLine {
                    layer: layer.depot,
                    tail: &a.tail,
                    head: &a.head,
                    kind: &a.kind,
                    cost: a.cost,
                    true_len: a.true_length,
                    model_len: a.modeled_length,
                };
                serde_json::to_writer(&mut out, &line)?;
                out.write_all(b"\n")?;
            }
        }
        Ok(())
    }
}

/// How deadhead heads that fall between time points are placed in a partial network.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DeadheadScheme {
    /// Always round down to the latest time point.
    Short,
    /// Round up when rounding down would undercut the travel time by more than `2 * delta_max`.
    Medium,
    /// Round up unless a trip departing from the rounded-down node can still be reached.
    Long,
}

impl DeadheadScheme {
    pub const ALL: [DeadheadScheme; 3] = [DeadheadScheme::Short, DeadheadScheme::Medium, DeadheadScheme::Long];
}

impl std::str::FromStr for DeadheadScheme {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "short" => Ok(DeadheadScheme::Short),
            "medium" => Ok(DeadheadScheme::Medium),
            "long" => Ok(DeadheadScheme::Long),
            other => Err(format!("unknown deadhead scheme `{other}`")),
        }
    }
}

impl std::fmt::Display for DeadheadScheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            DeadheadScheme::Short => "short",
            DeadheadScheme::Medium => "medium",
            DeadheadScheme::Long => "long",
        })
    }
}
