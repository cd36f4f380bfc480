use super::{aggregate_deadheads, Arc, ArcKind, DeadheadScheme, Layer, LayeredNetwork, NodeKey, TimePointSet};
use crate::instance::{arc_cost, CostKind, Instance, LocationId, Minutes, TripId};
use std::collections::BTreeSet;
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum NetworkError {
    #[error("trip {trip} shifted by {shift} minutes leaves the horizon")]
    HorizonOverflow { trip: TripId, shift: Minutes },
    #[error("time point set lacks the initial point ({location}, {time}) of trip {trip}")]
    MissingInitialPoint { trip: TripId, location: LocationId, time: Minutes },
    #[error("negative maximum shift {0}")]
    NegativeShift(Minutes),
}

fn check_horizon(instance: &Instance, delta_max: Minutes) -> Result<(), NetworkError> {
    if delta_max < 0 {
        return Err(NetworkError::NegativeShift(delta_max));
    }
    let (lo, hi) = instance.horizon;
    for t in &instance.trips {
        if t.start_time - delta_max < lo {
            return Err(NetworkError::HorizonOverflow { trip: t.id, shift: -delta_max });
        }
        if t.end_time + delta_max > hi {
            return Err(NetworkError::HorizonOverflow { trip: t.id, shift: delta_max });
        }
    }
    Ok(())
}

fn trip_arc(instance: &Instance, trip: TripId, tail_time: Minutes, head_time: Minutes) -> Arc {
    let t = instance.trip(trip);
    Arc {
        tail: NodeKey::station(t.start_location, tail_time),
        head: NodeKey::station(t.end_location, head_time),
        kind: ArcKind::Trip { trip, shift: tail_time - t.start_time },
        cost: arc_cost(CostKind::Trip, t.start_location, t.end_location, instance),
        true_length: t.duration(),
        modeled_length: head_time - tail_time,
    }
}

fn deadhead(instance: &Instance, from: LocationId, t: Minutes, to: LocationId, s: Minutes) -> Arc {
    Arc {
        tail: NodeKey::station(from, t),
        head: NodeKey::station(to, s),
        kind: ArcKind::Deadhead,
        cost: arc_cost(CostKind::Deadhead, from, to, instance),
        true_length: instance.travel(from, to),
        modeled_length: s - t,
    }
}

/// Trip-arc heads: the only nodes deadheads leave from.
fn arrival_nodes(arcs: &[Arc]) -> BTreeSet<(LocationId, Minutes)> {
    arcs.iter()
        .filter(|a| matches!(a.kind, ArcKind::Trip { .. }))
        .map(|a| (a.head.location(), a.head.time().expect("station node")))
        .collect()
}

/// Adds waiting and depot arcs to the station part and replicates it per depot.
fn assemble(instance: &Instance, delta_max: Minutes, tps: &TimePointSet, mut station_arcs: Vec<Arc>) -> LayeredNetwork {
    let mut nodes: Vec<NodeKey> = Vec::with_capacity(tps.len() + 2);
    for (loc, t) in tps.iter() {
        nodes.push(NodeKey::station(loc, t));
    }
    for l in 0..tps.num_locations() {
        let loc = LocationId(l as u32);
        let times: Vec<Minutes> = tps.at(loc).iter().copied().collect();
        for w in times.windows(2) {
            station_arcs.push(Arc {
                tail: NodeKey::station(loc, w[0]),
                head: NodeKey::station(loc, w[1]),
                kind: ArcKind::Wait,
                cost: 0,
                true_length: w[1] - w[0],
                modeled_length: w[1] - w[0],
            });
        }
    }

    let layers = instance
        .depots()
        .into_iter()
        .map(|depot| {
            let mut arcs = station_arcs.clone();
            for l in 0..tps.num_locations() {
                let loc = LocationId(l as u32);
                let (Some(&first), Some(&last)) = (tps.at(loc).first(), tps.at(loc).last()) else {
                    continue;
                };
                let out_len = instance.travel(depot, loc);
                arcs.push(Arc {
                    tail: NodeKey::DepotStart(depot),
                    head: NodeKey::station(loc, first),
                    kind: ArcKind::PullOut,
                    cost: arc_cost(CostKind::PullOut, depot, loc, instance),
                    true_length: out_len,
                    modeled_length: out_len,
                });
                let in_len = instance.travel(loc, depot);
                arcs.push(Arc {
                    tail: NodeKey::station(loc, last),
                    head: NodeKey::DepotEnd(depot),
                    kind: ArcKind::PullIn,
                    cost: arc_cost(CostKind::PullIn, loc, depot, instance),
                    true_length: in_len,
                    modeled_length: in_len,
                });
            }
            let mut layer_nodes = nodes.clone();
            layer_nodes.push(NodeKey::DepotStart(depot));
            layer_nodes.push(NodeKey::DepotEnd(depot));
            let trip_arcs = Layer::index_trip_arcs(&arcs, instance.trips.len());
            Layer { depot, nodes: layer_nodes, arcs, trip_arcs }
        })
        .collect();
    LayeredNetwork { delta_max, layers }
}

/// The fully discretized network with aggregated deadheads.
pub fn build_full_network(instance: &Instance, delta_max: Minutes) -> Result<LayeredNetwork, NetworkError> {
    build_full_network_with(instance, delta_max, true)
}

/// The fully discretized network: one trip arc per trip and shift in
/// `-delta_max..=delta_max`, and a deadhead for every compatible pair of
/// trip end and trip start nodes, optionally aggregated.
pub fn build_full_network_with(
    instance: &Instance,
    delta_max: Minutes,
    aggregate: bool,
) -> Result<LayeredNetwork, NetworkError> {
    check_horizon(instance, delta_max)?;
    let tps = TimePointSet::full(instance, delta_max);
    let mut arcs = Vec::new();
    for t in &instance.trips {
        for shift in -delta_max..=delta_max {
            arcs.push(trip_arc(instance, t.id, t.start_time + shift, t.end_time + shift));
        }
    }

    let mut departures: Vec<BTreeSet<Minutes>> = vec![BTreeSet::new(); instance.locations.len()];
    for a in &arcs {
        departures[a.tail.location().index()].insert(a.tail.time().expect("station node"));
    }
    let mut deadheads = Vec::new();
    for (k, t) in arrival_nodes(&arcs) {
        for (l, starts) in departures.iter().enumerate() {
            let l = LocationId(l as u32);
            if l == k {
                continue;
            }
            let earliest = t + instance.travel(k, l);
            for &s in starts.range(earliest..) {
                deadheads.push(deadhead(instance, k, t, l, s));
            }
        }
    }
    if aggregate {
        deadheads = aggregate_deadheads(deadheads);
    }
    arcs.extend(deadheads);
    Ok(assemble(instance, delta_max, &tps, arcs))
}

/// A partially time-expanded network over `tps`.
///
/// Trip arcs leave every point inside a trip's departure window and end at
/// the latest point not after the true arrival. Deadheads leave trip-arc
/// heads towards every location where some trip departs; their head is
/// placed according to `scheme`. When no point lies at or before the true
/// arrival, the head is the first point at the target location; when
/// rounding up finds no later point, the arc is omitted.
pub fn build_partial_network(
    instance: &Instance,
    delta_max: Minutes,
    tps: &TimePointSet,
    scheme: DeadheadScheme,
) -> Result<LayeredNetwork, NetworkError> {
    check_horizon(instance, delta_max)?;
    for t in &instance.trips {
        for (location, time) in [
            (t.start_location, t.start_time - delta_max),
            (t.end_location, t.end_time - delta_max),
        ] {
            if !tps.contains(location, time) {
                return Err(NetworkError::MissingInitialPoint { trip: t.id, location, time });
            }
        }
    }

    let mut arcs = Vec::new();
    for t in &instance.trips {
        let window = (t.start_time - delta_max)..=(t.start_time + delta_max);
        for &start in tps.at(t.start_location).range(window) {
            let head = tps
                .rho(t.end_location, start + t.duration())
                .expect("initial end point precedes every shifted arrival");
            arcs.push(trip_arc(instance, t.id, start, head));
        }
    }

    // Timetabled departures per location, for the Long compatibility test.
    let mut departures: Vec<Vec<Minutes>> = vec![Vec::new(); instance.locations.len()];
    for t in &instance.trips {
        departures[t.start_location.index()].push(t.start_time);
    }
    let mut deadheads = Vec::new();
    for (k, t) in arrival_nodes(&arcs) {
        for (l, starts) in departures.iter().enumerate() {
            let l = LocationId(l as u32);
            if l == k || starts.is_empty() {
                continue;
            }
            let arrival = t + instance.travel(k, l);
            let head = match tps.rho(l, arrival) {
                None => tps.first(l),
                Some(r) => {
                    let round_up = match scheme {
                        DeadheadScheme::Short => false,
                        DeadheadScheme::Medium => r < arrival - 2 * delta_max,
                        DeadheadScheme::Long => !starts
                            .iter()
                            .any(|&s| (s - delta_max..=s + delta_max).contains(&r) && arrival <= s + delta_max),
                    };
                    if round_up {
                        tps.successor(l, r)
                    } else {
                        Some(r)
                    }
                }
            };
            if let Some(s) = head {
                deadheads.push(deadhead(instance, k, t, l, s));
            }
        }
    }
    arcs.extend(aggregate_deadheads(deadheads));
    Ok(assemble(instance, delta_max, tps, arcs))
}
