use super::{Arc, ArcKind, NodeKey};
use crate::instance::{LocationId, Minutes};
use std::collections::{BTreeMap, BTreeSet};

/// Two-stage reduction of deadhead arcs. Non-deadhead arcs pass through.
///
/// 1. First match: from each tail node, keep only the arc to the earliest
///    head at every target location.
/// 2. Latest first match: among the surviving arcs entering a head node from
///    one source location, keep only the one with the latest tail.
///
/// Every removed connection stays realizable by waiting at the source before
/// a kept arc, or at the target after one, so waiting arcs must chain all
/// nodes of a location.
pub fn aggregate_deadheads(arcs: Vec<Arc>) -> Vec<Arc> {
    let (deadheads, mut rest): (Vec<Arc>, Vec<Arc>) = arcs.into_iter().partition(|a| a.kind == ArcKind::Deadhead);

    let mut first_match: BTreeMap<(NodeKey, LocationId), Arc> = BTreeMap::new();
    for a in deadheads {
        let key = (a.tail, a.head.location());
        match first_match.get(&key) {
            Some(kept) if head_time(kept) <= head_time(&a) => {}
            _ => {
                first_match.insert(key, a);
            }
        }
    }

    let mut latest: BTreeMap<(NodeKey, LocationId), Arc> = BTreeMap::new();
    for a in first_match.into_values() {
        let key = (a.head, a.tail.location());
        match latest.get(&key) {
            Some(kept) if tail_time(kept) >= tail_time(&a) => {}
            _ => {
                latest.insert(key, a);
            }
        }
    }

    let mut seen = BTreeSet::new();
    let mut kept: Vec<Arc> = latest.into_values().filter(|a| seen.insert((a.tail, a.head))).collect();
    kept.sort_by_key(|a| (a.tail, a.head));
    rest.extend(kept);
    rest
}

fn head_time(a: &Arc) -> Minutes {
    a.head.time().unwrap_or(Minutes::MAX)
}

fn tail_time(a: &Arc) -> Minutes {
    a.tail.time().unwrap_or(Minutes::MIN)
}
