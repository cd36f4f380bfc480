use super::{Duty, RefineError};
use crate::instance::{LocationId, TripId};
use crate::mip::FlowSolution;
use crate::timenet::{ArcKind, Layer, LayeredNetwork, NodeKey};
use std::collections::{BTreeMap, HashMap};

/// Residual flow of one layer with outgoing arcs in stripping order.
struct Residual<'a> {
    layer: &'a Layer,
    flow: Vec<i64>,
    out: HashMap<NodeKey, Vec<usize>>,
    cursor: HashMap<NodeKey, usize>,
}

impl<'a> Residual<'a> {
    fn new(layer: &'a Layer, flows: &[i64]) -> Self {
        let mut out: HashMap<NodeKey, Vec<usize>> = HashMap::new();
        for (a, &x) in flows.iter().enumerate() {
            if x > 0 {
                out.entry(layer.arcs[a].tail).or_default().push(a);
            }
        }
        for list in out.values_mut() {
            list.sort_by_key(|&a| {
                let arc = &layer.arcs[a];
                let trip = arc.kind.trip().map_or(u32::MAX, |t| t.0);
                (arc.head.time().unwrap_or(i64::MAX), arc.kind.rank(), trip, a)
            });
        }
        Residual { layer, flow: flows.to_vec(), out, cursor: HashMap::new() }
    }

    fn next_arc(&mut self, node: NodeKey) -> Option<usize> {
        let list = self.out.get(&node)?;
        let c = self.cursor.entry(node).or_insert(0);
        while *c < list.len() && self.flow[list[*c]] == 0 {
            *c += 1;
        }
        list.get(*c).copied()
    }

    fn take(&mut self, a: usize) -> NodeKey {
        self.flow[a] -= 1;
        self.layer.arcs[a].head
    }

    fn trips_of(&self, arcs: &[usize]) -> Vec<TripId> {
        arcs.iter().filter_map(|&a| self.layer.arcs[a].kind.trip()).collect()
    }

    /// Trips of a closed walk, rotated to start at the earliest trip arc.
    fn cycle_trips(&self, arcs: &[usize]) -> Vec<TripId> {
        let trip_arcs: Vec<usize> = arcs.iter().copied().filter(|&a| self.layer.arcs[a].kind.trip().is_some()).collect();
        let Some(first) = (0..trip_arcs.len()).min_by_key(|&i| {
            let arc = &self.layer.arcs[trip_arcs[i]];
            (arc.tail.time(), arc.kind.trip())
        }) else {
            return Vec::new();
        };
        let mut rotated = trip_arcs[first..].to_vec();
        rotated.extend_from_slice(&trip_arcs[..first]);
        self.trips_of(&rotated)
    }

    /// Follows residual flow from `start`, cutting out every loop it closes.
    /// Returns the remaining open walk (ending at a depot end node, or empty
    /// if the walk itself closed at `start`).
    fn walk(&mut self, start: NodeKey, cycles: &mut Vec<Vec<TripId>>) -> Result<Vec<usize>, RefineError> {
        let mut arcs: Vec<usize> = Vec::new();
        let mut nodes = vec![start];
        let mut pos: HashMap<NodeKey, usize> = HashMap::from([(start, 0)]);
        let mut cur = start;
        loop {
            let Some(a) = self.next_arc(cur) else {
                return Err(RefineError::ResidualFlow(self.flow.iter().sum()));
            };
            cur = self.take(a);
            arcs.push(a);
            if matches!(cur, NodeKey::DepotEnd(_)) {
                return Ok(arcs);
            }
            if let Some(&p) = pos.get(&cur) {
                let trips = self.cycle_trips(&arcs[p..]);
                if !trips.is_empty() {
                    cycles.push(trips);
                }
                for n in nodes.drain(p + 1..) {
                    pos.remove(&n);
                }
                arcs.truncate(p);
                if p == 0 && !matches!(start, NodeKey::DepotStart(_)) {
                    return Ok(arcs);
                }
            } else {
                pos.insert(cur, nodes.len());
                nodes.push(cur);
            }
        }
    }
}

/// Greedy path stripping of a flow into duties.
///
/// Walks leave each depot start node along the first arc with residual
/// flow, ordered by head time, arc kind and trip id, until they reach the
/// depot end node. Loops closed on the way, and flow left over once all
/// vehicles have returned, become cyclic duties. Walks and loops without
/// trips are dropped. Every trip is covered exactly once.
pub fn extract_duties(solution: &FlowSolution, network: &LayeredNetwork) -> Result<Vec<Duty>, RefineError> {
    if !solution.has_flow() {
        return Err(RefineError::NoFlow);
    }
    let mut duties = Vec::new();
    for (layer, flows) in network.layers.iter().zip(&solution.flows) {
        let mut res = Residual::new(layer, flows);
        let start = NodeKey::DepotStart(layer.depot);
        let mut cycles = Vec::new();
        while res.next_arc(start).is_some() {
            let arcs = res.walk(start, &mut cycles)?;
            let trips = res.trips_of(&arcs);
            if !trips.is_empty() {
                duties.push(Duty::new(layer.depot, trips));
            }
        }
        let mut order: Vec<usize> = (0..layer.arcs.len()).filter(|&a| flows[a] > 0).collect();
        order.sort_by_key(|&a| (layer.arcs[a].kind.rank(), layer.arcs[a].tail, a));
        for a in order {
            while res.flow[a] > 0 {
                let tail = layer.arcs[a].tail;
                res.walk(tail, &mut cycles)?;
            }
        }
        let left: i64 = res.flow.iter().sum();
        if left != 0 {
            return Err(RefineError::ResidualFlow(left));
        }
        duties.extend(cycles.into_iter().map(|trips| Duty { depot: layer.depot, trips, cyclic: true }));
    }
    Ok(duties)
}

/// A maximal set of flow-carrying station arcs of one layer connected
/// without passing through a depot.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Component {
    pub layer: usize,
    pub depot: LocationId,
    pub arcs: Vec<usize>,
    /// Heads of flow-carrying pull-out arcs.
    pub entries: Vec<NodeKey>,
    /// Tails of flow-carrying pull-in arcs.
    pub exits: Vec<NodeKey>,
    /// Sorted.
    pub trips: Vec<TripId>,
}

impl Component {
    pub fn contains_trip(&self, trip: TripId) -> bool {
        self.trips.binary_search(&trip).is_ok()
    }
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

/// Connected components of the flow support after removing depot nodes.
/// Components without trips are omitted.
pub fn decompose_components(solution: &FlowSolution, network: &LayeredNetwork) -> Vec<Component> {
    let mut out = Vec::new();
    if !solution.has_flow() {
        return out;
    }
    for (li, (layer, flows)) in network.layers.iter().zip(&solution.flows).enumerate() {
        let mut ids: HashMap<NodeKey, usize> = HashMap::new();
        let mut parent: Vec<usize> = Vec::new();
        let mut id_of = |n: NodeKey, parent: &mut Vec<usize>| {
            *ids.entry(n).or_insert_with(|| {
                parent.push(parent.len());
                parent.len() - 1
            })
        };
        let station_arcs: Vec<usize> = (0..layer.arcs.len())
            .filter(|&a| flows[a] > 0 && !matches!(layer.arcs[a].kind, ArcKind::PullOut | ArcKind::PullIn))
            .collect();
        for &a in &station_arcs {
            let t = id_of(layer.arcs[a].tail, &mut parent);
            let h = id_of(layer.arcs[a].head, &mut parent);
            let (rt, rh) = (find(&mut parent, t), find(&mut parent, h));
            if rt != rh {
                parent[rt.max(rh)] = rt.min(rh);
            }
        }

        let mut groups: BTreeMap<usize, Component> = BTreeMap::new();
        let empty = || Component {
            layer: li,
            depot: layer.depot,
            arcs: Vec::new(),
            entries: Vec::new(),
            exits: Vec::new(),
            trips: Vec::new(),
        };
        for &a in &station_arcs {
            let root = find(&mut parent, ids[&layer.arcs[a].tail]);
            let c = groups.entry(root).or_insert_with(empty);
            c.arcs.push(a);
            if let Some(t) = layer.arcs[a].kind.trip() {
                c.trips.push(t);
            }
        }
        for (a, arc) in layer.arcs.iter().enumerate() {
            if flows[a] == 0 {
                continue;
            }
            let (node, entry) = match arc.kind {
                ArcKind::PullOut => (arc.head, true),
                ArcKind::PullIn => (arc.tail, false),
                _ => continue,
            };
            let Some(&id) = ids.get(&node) else { continue };
            let root = find(&mut parent, id);
            let c = groups.entry(root).or_insert_with(empty);
            if entry {
                c.entries.push(node);
            } else {
                c.exits.push(node);
            }
        }
        for mut c in groups.into_values() {
            if c.trips.is_empty() {
                continue;
            }
            c.trips.sort();
            c.entries.sort();
            c.entries.dedup();
            c.exits.sort();
            c.exits.dedup();
            out.push(c);
        }
    }
    out.sort_by_key(|c| (c.layer, c.trips[0]));
    out
}
