//! JSON instance files.
//!
//! ```json
//! {"version":1,"horizon":[0,1800],"pull_fixed_cost":500,
//!  "locations":[{"id":0,"x":0,"y":0,"kind":"depot"}, ...],
//!  "travel_time":[[0,12],[12,0]],
//!  "trips":[{"id":0,"from":4,"to":7,"dep":425,"arr":463}, ...]}
//! ```

use super::{Instance, Location, LocationId, LocationKind, Minutes, Trip, TripId, ValidationError};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use thiserror::Error;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct InstanceFile {
    version: u32,
    horizon: [Minutes; 2],
    pull_fixed_cost: i64,
    locations: Vec<LocationRecord>,
    travel_time: Vec<Vec<Minutes>>,
    trips: Vec<TripRecord>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LocationRecord {
    id: LocationId,
    x: i64,
    y: i64,
    kind: LocationKind,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TripRecord {
    id: TripId,
    from: LocationId,
    to: LocationId,
    dep: Minutes,
    arr: Minutes,
}

#[derive(Debug, Error)]
pub enum InstanceIoError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error at line {line}, column {column}, field `{field}`: {message}")]
    Parse { line: usize, column: usize, field: String, message: String },
    #[error("unsupported schema version {0}")]
    Version(u32),
    #[error("invalid instance: {0}")]
    Invalid(#[from] ValidationError),
}

impl From<&Instance> for InstanceFile {
    fn from(inst: &Instance) -> Self {
        InstanceFile {
            version: SCHEMA_VERSION,
            horizon: [inst.horizon.0, inst.horizon.1],
            pull_fixed_cost: inst.pull_fixed_cost,
            locations: inst
                .locations
                .iter()
                .map(|l| LocationRecord { id: l.id, x: l.x, y: l.y, kind: l.kind })
                .collect(),
            travel_time: inst.travel_time.clone(),
            trips: inst
                .trips
                .iter()
                .map(|t| TripRecord {
                    id: t.id,
                    from: t.start_location,
                    to: t.end_location,
                    dep: t.start_time,
                    arr: t.end_time,
                })
                .collect(),
        }
    }
}

pub fn to_json_string(instance: &Instance) -> String {
    serde_json::to_string(&InstanceFile::from(instance)).expect("instance serializes")
}

/// Parses and validates an instance document.
pub fn from_json_str(text: &str) -> Result<Instance, InstanceIoError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let file: InstanceFile = serde_path_to_error::deserialize(de).map_err(|e| {
        let field = e.path().to_string();
        let inner = e.into_inner();
        InstanceIoError::Parse {
            line: inner.line(),
            column: inner.column(),
            field,
            message: inner.to_string(),
        }
    })?;
    if file.version != SCHEMA_VERSION {
        return Err(InstanceIoError::Version(file.version));
    }
    let instance = Instance {
        locations: file
            .locations
            .into_iter()
            .map(|l| Location { id: l.id, x: l.x, y: l.y, kind: l.kind })
            .collect(),
        trips: file
            .trips
            .into_iter()
            .map(|t| Trip {
                id: t.id,
                start_location: t.from,
                end_location: t.to,
                start_time: t.dep,
                end_time: t.arr,
            })
            .collect(),
        travel_time: file.travel_time,
        pull_fixed_cost: file.pull_fixed_cost,
        horizon: (file.horizon[0], file.horizon[1]),
    };
    instance.validate()?;
    Ok(instance)
}

pub fn save_instance(instance: &Instance, path: impl AsRef<Path>) -> Result<(), InstanceIoError> {
    let path = path.as_ref();
    std::fs::write(path, to_json_string(instance))
        .map_err(|source| InstanceIoError::Io { path: path.to_owned(), source })
}

pub fn load_instance(path: impl AsRef<Path>) -> Result<Instance, InstanceIoError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|source| InstanceIoError::Io { path: path.to_owned(), source })?;
    from_json_str(&text)
}
