use anyhow::{Context, Result};
use mdvsp_ddd::ddd::{IterationRecord, ScheduleSolution};
use mdvsp_ddd::instance::Instance;
use mdvsp_ddd::postprocess::average_deviation_seconds;
use serde::Serialize;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

/// Opens `path` for CSV output with `header` echoed as a leading comment line.
pub fn csv_writer(path: &Path, header: &impl Serialize) -> Result<csv::Writer<BufWriter<File>>> {
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let mut out = BufWriter::new(file);
    writeln!(out, "# {}", serde_json::to_string(header)?)?;
    Ok(csv::Writer::from_writer(out))
}

#[derive(Serialize)]
struct RunLogRow {
    iter: usize,
    lb: i64,
    ub: Option<i64>,
    gap: Option<f64>,
    nodes: usize,
    arcs: usize,
    points_added: usize,
    wall_ms: u128,
    model_bound: i64,
}

pub fn write_run_log(path: &Path, header: &impl Serialize, records: &[IterationRecord]) -> Result<()> {
    let mut w = csv_writer(path, header)?;
    for r in records {
        w.serialize(RunLogRow {
            iter: r.iter,
            lb: r.lb,
            ub: r.ub,
            gap: r.gap,
            nodes: r.nodes,
            arcs: r.arcs,
            points_added: r.points_added,
            wall_ms: r.wall_ms,
            model_bound: r.model_bound,
        })?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct DeviationRow {
    trip_id: String,
    t_s: String,
    pi: String,
    delta_plus: String,
    delta_minus: String,
}

/// One row per trip, then a `mean_seconds` row holding the average absolute
/// shift in seconds.
pub fn write_deviations(
    path: &Path,
    header: &impl Serialize,
    instance: &Instance,
    schedule: &ScheduleSolution,
) -> Result<()> {
    let mut w = csv_writer(path, header)?;
    for (t, &shift) in instance.trips.iter().zip(&schedule.shifts) {
        w.serialize(DeviationRow {
            trip_id: t.id.0.to_string(),
            t_s: t.start_time.to_string(),
            pi: (t.start_time + shift).to_string(),
            delta_plus: shift.max(0).to_string(),
            delta_minus: (-shift).max(0).to_string(),
        })?;
    }
    w.serialize(DeviationRow {
        trip_id: "mean_seconds".into(),
        t_s: String::new(),
        pi: String::new(),
        delta_plus: String::new(),
        delta_minus: format!("{:.3}", average_deviation_seconds(schedule)),
    })?;
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
pub struct ScheduleReport<'a, C: Serialize> {
    pub config: &'a C,
    pub instance: String,
    pub status: &'a str,
    pub objective: Option<i64>,
    pub lower_bound: i64,
    pub iterations: usize,
    pub schedule: Option<&'a ScheduleSolution>,
    pub warnings: &'a [String],
}

pub fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let mut out = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    Ok(())
}
