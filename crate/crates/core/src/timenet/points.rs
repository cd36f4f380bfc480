use crate::instance::{Instance, LocationId, Minutes};
use std::collections::BTreeSet;
use std::ops::Bound;

/// Discretization time points per location, shared by all depot layers.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct TimePointSet {
    points: Vec<BTreeSet<Minutes>>,
}

impl TimePointSet {
    pub fn new(num_locations: usize) -> Self {
        TimePointSet { points: vec![BTreeSet::new(); num_locations] }
    }

    /// Every start and end time of every shifted trip: the node set of the full network.
    pub fn full(instance: &Instance, delta_max: Minutes) -> Self {
        let mut tps = TimePointSet::new(instance.locations.len());
        for t in &instance.trips {
            for shift in -delta_max..=delta_max {
                tps.insert(t.start_location, t.start_time + shift);
                tps.insert(t.end_location, t.end_time + shift);
            }
        }
        tps
    }

    pub fn at(&self, location: LocationId) -> &BTreeSet<Minutes> {
        &self.points[location.index()]
    }

    pub fn contains(&self, location: LocationId, time: Minutes) -> bool {
        self.points[location.index()].contains(&time)
    }

    pub fn insert(&mut self, location: LocationId, time: Minutes) -> bool {
        self.points[location.index()].insert(time)
    }

    /// Latest point at `location` not after `t`.
    pub fn rho(&self, location: LocationId, t: Minutes) -> Option<Minutes> {
        self.points[location.index()].range(..=t).next_back().copied()
    }

    /// Earliest point at `location` strictly after `t`.
    pub fn successor(&self, location: LocationId, t: Minutes) -> Option<Minutes> {
        self.points[location.index()]
            .range((Bound::Excluded(t), Bound::Unbounded))
            .next()
            .copied()
    }

    pub fn first(&self, location: LocationId) -> Option<Minutes> {
        self.points[location.index()].first().copied()
    }

    pub fn num_locations(&self) -> usize {
        self.points.len()
    }

    /// Total number of points over all locations.
    pub fn len(&self) -> usize {
        self.points.iter().map(BTreeSet::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn iter(&self) -> impl Iterator<Item = (LocationId, Minutes)> + '_ {
        self.points
            .iter()
            .enumerate()
            .flat_map(|(l, set)| set.iter().map(move |&t| (LocationId(l as u32), t)))
    }

    pub fn is_superset(&self, other: &TimePointSet) -> bool {
        other.iter().all(|(l, t)| self.contains(l, t))
    }
}

pub fn rho(tps: &TimePointSet, location: LocationId, t: Minutes) -> Option<Minutes> {
    tps.rho(location, t)
}

/// The earliest start and end point of every trip: `(l_start, t_start - d)`
/// and `(l_end, t_end - d)`.
pub fn initial_time_points(instance: &Instance, delta_max: Minutes) -> TimePointSet {
    let mut tps = TimePointSet::new(instance.locations.len());
    for t in &instance.trips {
        tps.insert(t.start_location, t.start_time - delta_max);
        tps.insert(t.end_location, t.end_time - delta_max);
    }
    tps
}

/// Adds `points` and returns how many of them were not present yet.
pub fn add_time_points(tps: &mut TimePointSet, points: &[(LocationId, Minutes)]) -> usize {
    points.iter().filter(|&&(l, t)| tps.insert(l, t)).count()
}
