//! Random instances in the style of the classic MDVSP generator: stations
//! scattered over a square grid, depots in the corners, a mix of short
//! point-to-point trips and long round trips.

use super::{Instance, Location, LocationId, LocationKind, Minutes, Trip, TripId, DEFAULT_PULL_FIXED_COST};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Clone, Debug, PartialEq)]
pub struct GenParams {
    pub num_trips: usize,
    /// Share of short trips; the rest are long round trips.
    pub short_fraction: f64,
    /// Number of stations; `None` means one tenth of the trip count (at least 2).
    pub num_locations: Option<usize>,
    pub num_depots: usize,
    pub seed: u64,
    pub grid_side: i64,
    /// Grid units travelled per minute.
    pub speed: f64,
    pub horizon: (Minutes, Minutes),
    /// Window in which trips may start outside of the peaks.
    pub service_day: (Minutes, Minutes),
    /// Start-time windows with elevated demand (half-open).
    pub peaks: Vec<(Minutes, Minutes)>,
    /// Probability that a short trip starts inside one of the peaks.
    pub peak_probability: f64,
    /// Largest slack of a short trip over the direct travel time.
    pub short_slack_max: Minutes,
    /// Inclusive duration range of long trips.
    pub long_duration: (Minutes, Minutes),
    pub pull_fixed_cost: i64,
}

impl Default for GenParams {
    fn default() -> Self {
        GenParams {
            num_trips: 500,
            short_fraction: 0.4,
            num_locations: None,
            num_depots: 4,
            seed: 0,
            grid_side: 60,
            speed: 1.0,
            horizon: (0, 1800),
            service_day: (6 * 60, 22 * 60),
            peaks: vec![(7 * 60, 8 * 60), (17 * 60, 18 * 60)],
            peak_probability: 0.5,
            short_slack_max: 45,
            long_duration: (180, 300),
            pull_fixed_cost: DEFAULT_PULL_FIXED_COST,
        }
    }
}

impl GenParams {
    pub fn with_trips(num_trips: usize, seed: u64) -> Self {
        GenParams { num_trips, seed, ..GenParams::default() }
    }

    pub fn station_count(&self) -> usize {
        self.num_locations.unwrap_or((self.num_trips / 10).max(2))
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum GenError {
    #[error("short_fraction {0} outside [0, 1]")]
    ShortFraction(f64),
    #[error("at least two stations are required, got {0}")]
    TooFewLocations(usize),
    #[error("at least one depot is required")]
    NoDepots,
    #[error("grid side and speed must be positive")]
    Geometry,
    #[error("peak probability {0} outside [0, 1]")]
    PeakProbability(f64),
    #[error("horizon {horizon:?} cannot contain trips starting in {day:?} lasting up to {longest} minutes")]
    HorizonTooSmall { horizon: (Minutes, Minutes), day: (Minutes, Minutes), longest: Minutes },
    #[error("invalid time window {0:?}")]
    Window((Minutes, Minutes)),
}

fn check(params: &GenParams) -> Result<(), GenError> {
    if !(0.0..=1.0).contains(&params.short_fraction) {
        return Err(GenError::ShortFraction(params.short_fraction));
    }
    if !(0.0..=1.0).contains(&params.peak_probability) {
        return Err(GenError::PeakProbability(params.peak_probability));
    }
    if params.station_count() < 2 {
        return Err(GenError::TooFewLocations(params.station_count()));
    }
    if params.num_depots == 0 {
        return Err(GenError::NoDepots);
    }
    if params.grid_side <= 0 || params.speed <= 0.0 {
        return Err(GenError::Geometry);
    }
    let (lo, hi) = params.long_duration;
    if lo <= 0 || hi < lo || params.short_slack_max < 0 {
        return Err(GenError::Window(params.long_duration));
    }
    let day = params.service_day;
    if day.0 >= day.1 {
        return Err(GenError::Window(day));
    }
    for &p in &params.peaks {
        if p.0 >= p.1 {
            return Err(GenError::Window(p));
        }
    }
    // Longest possible short trip: grid diagonal plus slack.
    let diagonal = ((2.0f64).sqrt() * params.grid_side as f64 / params.speed).ceil() as Minutes;
    let longest = hi.max(diagonal + params.short_slack_max);
    let latest_start = params.peaks.iter().map(|p| p.1).chain([day.1]).max().unwrap_or(day.1);
    let earliest_start = params.peaks.iter().map(|p| p.0).chain([day.0]).min().unwrap_or(day.0);
    if earliest_start < params.horizon.0 || latest_start + longest > params.horizon.1 {
        return Err(GenError::HorizonTooSmall { horizon: params.horizon, day, longest });
    }
    Ok(())
}

/// Travel times as rounded Euclidean distances (at least one minute between
/// distinct locations), closed under shortest paths so the triangle
/// inequality holds exactly.
fn travel_matrix(points: &[(i64, i64)], speed: f64) -> Vec<Vec<Minutes>> {
    let n = points.len();
    let mut m = vec![vec![0; n]; n];
    for i in 0..n {
        for j in 0..n {
            if i != j {
                let dx = (points[i].0 - points[j].0) as f64;
                let dy = (points[i].1 - points[j].1) as f64;
                let t = ((dx * dx + dy * dy).sqrt() / speed).round() as Minutes;
                m[i][j] = t.max(1);
            }
        }
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                let via = m[i][k] + m[k][j];
                if via < m[i][j] {
                    m[i][j] = via;
                }
            }
        }
    }
    m
}

fn draw_short_start(rng: &mut ChaCha8Rng, params: &GenParams) -> Minutes {
    if !params.peaks.is_empty() && rng.gen_bool(params.peak_probability) {
        let total: Minutes = params.peaks.iter().map(|p| p.1 - p.0).sum();
        let mut offset = rng.gen_range(0..total);
        for p in &params.peaks {
            let len = p.1 - p.0;
            if offset < len {
                return p.0 + offset;
            }
            offset -= len;
        }
        unreachable!("offset below total peak length")
    } else {
        rng.gen_range(params.service_day.0..=params.service_day.1)
    }
}

/// Generates a random instance; identical parameters always give an identical instance.
pub fn generate_instance(params: &GenParams) -> Result<Instance, GenError> {
    check(params)?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let side = params.grid_side;
    let corners = [(0, 0), (side, 0), (0, side), (side, side)];

    let mut points: Vec<(i64, i64)> = (0..params.num_depots).map(|d| corners[d % 4]).collect();
    let grid_points = ((side + 1) * (side + 1)) as usize;
    let distinct = params.station_count() + params.num_depots.min(4) <= grid_points;
    for _ in 0..params.station_count() {
        loop {
            let p = (rng.gen_range(0..=side), rng.gen_range(0..=side));
            if !distinct || !points.contains(&p) {
                points.push(p);
                break;
            }
        }
    }
    let travel_time = travel_matrix(&points, params.speed);

    let locations: Vec<Location> = points
        .iter()
        .enumerate()
        .map(|(i, &(x, y))| Location {
            id: LocationId(i as u32),
            x,
            y,
            kind: if i < params.num_depots { LocationKind::Depot } else { LocationKind::Station },
        })
        .collect();
    let first_station = params.num_depots;
    let stations = params.station_count();

    let num_short = (params.num_trips as f64 * params.short_fraction).round() as usize;
    let mut trips = Vec::with_capacity(params.num_trips);
    for i in 0..params.num_trips {
        let trip = if i < num_short {
            let from = first_station + rng.gen_range(0..stations);
            let mut to = first_station + rng.gen_range(0..stations - 1);
            if to >= from {
                to += 1;
            }
            let start = draw_short_start(&mut rng, params);
            let slack = rng.gen_range(0..=params.short_slack_max);
            (from, to, start, start + travel_time[from][to] + slack)
        } else {
            let at = first_station + rng.gen_range(0..stations);
            let start = rng.gen_range(params.service_day.0..=params.service_day.1);
            let duration = rng.gen_range(params.long_duration.0..=params.long_duration.1);
            (at, at, start, start + duration)
        };
        trips.push(trip);
    }
    trips.sort_by_key(|&(from, to, start, end)| (start, end, from, to));
    let trips = trips
        .into_iter()
        .enumerate()
        .map(|(i, (from, to, start, end))| Trip {
            id: TripId(i as u32),
            start_location: LocationId(from as u32),
            end_location: LocationId(to as u32),
            start_time: start,
            end_time: end,
        })
        .collect();

    Ok(Instance {
        locations,
        trips,
        travel_time,
        pull_fixed_cost: params.pull_fixed_cost,
        horizon: params.horizon,
    })
}


#[cfg(test)]
mod props {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn closure_satisfies_triangle(seed in 0u64..1000, stations in 2usize..15) {
            let p = GenParams { num_locations: Some(stations), ..GenParams::with_trips(10, seed) };
            let inst = generate_instance(&p).unwrap();
            let n = inst.locations.len();
            for i in 0..n { for j in 0..n { for k in 0..n {
                prop_assert!(inst.travel_time[i][k] <= inst.travel_time[i][j] + inst.travel_time[j][k]);
            }}}
            prop_assert!(inst.validate().is_ok());
        }
    }
}
