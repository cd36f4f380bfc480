use crate::instance::{Instance, LocationId, Minutes, TripId};
use crate::timenet::{ArcKind, LayeredNetwork, NodeKey};
use std::collections::{HashMap, VecDeque};

/// Arcs of a walk through a network layer that operates a given trip
/// sequence, with only waits and deadheads between consecutive trips.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TripPath {
    pub arcs: Vec<usize>,
}

#[derive(Clone, Copy)]
enum Step {
    Head(usize),
    Move(usize),
}

/// Searches the station part of the first layer (identical in every layer)
/// for a walk operating `trips` in order.
pub fn find_trip_path(network: &LayeredNetwork, trips: &[TripId]) -> Option<TripPath> {
    let layer = network.layers.first()?;
    let first = trips.first()?;
    let mut moves: HashMap<NodeKey, Vec<usize>> = HashMap::new();
    for (a, arc) in layer.arcs.iter().enumerate() {
        if matches!(arc.kind, ArcKind::Wait | ArcKind::Deadhead) {
            moves.entry(arc.tail).or_default().push(a);
        }
    }

    let mut stages: Vec<Vec<usize>> = vec![layer.trip_arcs[first.index()].clone()];
    let mut reach: Vec<HashMap<NodeKey, Step>> = Vec::new();
    for &trip in &trips[1..] {
        let mut seen: HashMap<NodeKey, Step> = HashMap::new();
        let mut queue = VecDeque::new();
        for &a in stages.last().expect("nonempty") {
            let h = layer.arcs[a].head;
            if !seen.contains_key(&h) {
                seen.insert(h, Step::Head(a));
                queue.push_back(h);
            }
        }
        while let Some(n) = queue.pop_front() {
            for &a in moves.get(&n).map(Vec::as_slice).unwrap_or(&[]) {
                let h = layer.arcs[a].head;
                if !seen.contains_key(&h) {
                    seen.insert(h, Step::Move(a));
                    queue.push_back(h);
                }
            }
        }
        let next: Vec<usize> =
            layer.trip_arcs[trip.index()].iter().copied().filter(|&a| seen.contains_key(&layer.arcs[a].tail)).collect();
        if next.is_empty() {
            return None;
        }
        reach.push(seen);
        stages.push(next);
    }

    let mut rev = Vec::new();
    let mut a = stages.last().expect("nonempty")[0];
    for seen in reach.iter().rev() {
        rev.push(a);
        let mut node = layer.arcs[a].tail;
        loop {
            match seen[&node] {
                Step::Head(prev) => {
                    a = prev;
                    break;
                }
                Step::Move(m) => {
                    rev.push(m);
                    node = layer.arcs[m].tail;
                }
            }
        }
    }
    rev.push(a);
    rev.reverse();
    Some(TripPath { arcs: rev })
}

/// If the network still admits a walk operating `trips`, the points that
/// realistic timing along that walk would need: earliest departure and
/// arrival of every trip, the arrival at every intermediate deadhead stop,
/// up to the first trip that cannot depart in time.
pub fn exclusion_points(
    network: &LayeredNetwork,
    trips: &[TripId],
    instance: &Instance,
    delta_max: Minutes,
) -> Option<Vec<(LocationId, Minutes)>> {
    let path = find_trip_path(network, trips)?;
    let layer = &network.layers[0];
    let mut points = Vec::new();
    let mut ready = Minutes::MIN;
    for (i, &a) in path.arcs.iter().enumerate() {
        let arc = &layer.arcs[a];
        match arc.kind {
            ArcKind::Trip { trip, .. } => {
                let t = instance.trip(trip);
                let start = ready.max(t.start_time - delta_max);
                points.push((t.start_location, start));
                if start > t.start_time + delta_max {
                    break;
                }
                ready = start + t.duration();
                points.push((t.end_location, ready));
            }
            ArcKind::Deadhead => {
                ready += instance.travel(arc.tail.location(), arc.head.location());
                let chained = path.arcs[i + 1..]
                    .iter()
                    .map(|&b| layer.arcs[b].kind)
                    .find(|k| *k != ArcKind::Wait)
                    .is_some_and(|k| k == ArcKind::Deadhead);
                if chained {
                    points.push((arc.head.location(), ready));
                }
            }
            _ => {}
        }
    }
    Some(points)
}
