use crate::args::{BenchArgs, Method};
use crate::config::{apply_solver_args, load_file, validate, Effective};
use crate::run::{run, RunStatus};
use crate::{gen_params, instance_name, report};
use anyhow::{bail, Context, Result};
use mdvsp_ddd::instance::{generate_instance, load_instance, Instance};
use mdvsp_ddd::refine::RefineStrategy;
use mdvsp_ddd::timenet::DeadheadScheme;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
enum Variant {
    Fd,
    Ddd(DeadheadScheme, RefineStrategy),
}

impl Variant {
    fn columns(self) -> (&'static str, String, String) {
        match self {
            Variant::Fd => ("fd", String::new(), String::new()),
            Variant::Ddd(s, r) => ("ddd", s.to_string(), r.to_string()),
        }
    }

    fn label(self) -> String {
        match self {
            Variant::Fd => "fd".into(),
            Variant::Ddd(s, r) => format!("{s}_{r}"),
        }
    }
}

/// One solved cell of the grid.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct BenchRow {
    pub instance: String,
    pub delta_max: i64,
    pub method: String,
    pub scheme: String,
    pub strategy: String,
    pub status: String,
    pub obj: Option<i64>,
    pub lb: Option<i64>,
    pub iter: Option<usize>,
    pub nodes: Option<usize>,
    pub arcs: Option<usize>,
    pub first_lb: Option<i64>,
    pub time_s: Option<f64>,
    pub error: String,
}

/// Averages over the instances of one setting.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct BenchCell {
    pub delta_max: i64,
    pub method: String,
    pub scheme: String,
    pub strategy: String,
    pub runs: usize,
    pub failures: usize,
    #[serde(rename = "Obj.")]
    pub obj: Option<f64>,
    #[serde(rename = "Iter.")]
    pub iter: Option<f64>,
    #[serde(rename = "Nodes")]
    pub nodes: Option<f64>,
    #[serde(rename = "1st LB")]
    pub first_lb: Option<f64>,
    #[serde(rename = "Time")]
    pub time: Option<f64>,
}

#[derive(Serialize)]
struct Header<'a> {
    config: &'a Effective,
    instances: Vec<&'a str>,
    delta_max: &'a [i64],
    variants: Vec<String>,
}

#[derive(Serialize)]
struct TrajectoryRow {
    iter: usize,
    lb: i64,
    ub: Option<i64>,
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

pub fn cmd_bench(a: &BenchArgs) -> Result<i32> {
    let base = apply_solver_args(load_file(a.solver.config.as_deref())?, &a.solver);
    validate(&base)?;
    if a.threads == 0 {
        bail!("--threads must be positive");
    }
    if a.delta_max.iter().any(|&d| d < 0) {
        bail!("--delta-max must be nonnegative");
    }

    let instances: Vec<(String, Instance)> = if a.instances.is_empty() {
        if a.count == 0 {
            bail!("--count must be positive");
        }
        (0..a.count as u64)
            .map(|k| {
                let seed = a.seed + k;
                let inst = generate_instance(&gen_params(a.trips, seed, a.depots, a.stations)?)?;
                Ok((instance_name(a.trips, seed), inst))
            })
            .collect::<Result<_>>()?
    } else {
        a.instances
            .iter()
            .map(|p| {
                let name = p.file_stem().map_or_else(|| p.display().to_string(), |s| s.to_string_lossy().into_owned());
                Ok((name, load_instance(p)?))
            })
            .collect::<Result<_>>()?
    };

    let mut variants = Vec::new();
    if a.fd {
        variants.push(Variant::Fd);
    }
    for &s in &a.scheme {
        for &r in &a.refine {
            variants.push(Variant::Ddd(s, r));
        }
    }
    let mut jobs = Vec::new();
    for &d in &a.delta_max {
        for &v in &variants {
            for i in 0..instances.len() {
                jobs.push((d, v, i));
            }
        }
    }
    jobs.sort();
    jobs.dedup();

    let out_dir = base.out.clone();
    std::fs::create_dir_all(&out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    if a.trajectories {
        std::fs::create_dir_all(out_dir.join("trajectories"))?;
    }
    let header = Header {
        config: &base,
        instances: instances.iter().map(|(n, _)| n.as_str()).collect(),
        delta_max: &a.delta_max,
        variants: variants.iter().map(|v| v.label()).collect(),
    };

    let pool = rayon::ThreadPoolBuilder::new().num_threads(a.threads).build()?;
    let rows: Vec<(BenchRow, Option<RunStatus>)> = pool.install(|| {
        jobs.par_iter()
            .map(|&(d, v, i)| {
                let (name, inst) = &instances[i];
                let mut eff = base.clone();
                eff.ddd.delta_max = d;
                eff.postprocess = None;
                match v {
                    Variant::Fd => eff.method = Method::Fd,
                    Variant::Ddd(s, r) => {
                        eff.method = Method::Ddd;
                        eff.ddd.scheme = s;
                        eff.ddd.strategy = r;
                    }
                }
                let (method, scheme, strategy) = v.columns();
                let mut row = BenchRow {
                    instance: name.clone(),
                    delta_max: d,
                    method: method.into(),
                    scheme,
                    strategy,
                    status: "error".into(),
                    obj: None,
                    lb: None,
                    iter: None,
                    nodes: None,
                    arcs: None,
                    first_lb: None,
                    time_s: None,
                    error: String::new(),
                };
                match run(inst, &eff) {
                    Ok(r) => {
                        row.status = r.status.as_str().into();
                        row.obj = r.objective();
                        row.lb = Some(r.lower_bound);
                        row.iter = Some(r.records.len());
                        row.nodes = Some(r.nodes);
                        row.arcs = Some(r.arcs);
                        row.first_lb = r.first_lower_bound;
                        row.time_s = Some(r.seconds);
                        if a.trajectories {
                            let path = out_dir.join("trajectories").join(format!("{name}_d{d}_{}.csv", v.label()));
                            let written = report::csv_writer(&path, &eff).and_then(|mut w| {
                                for rec in &r.records {
                                    w.serialize(TrajectoryRow { iter: rec.iter, lb: rec.lb, ub: rec.ub })?;
                                }
                                w.flush()?;
                                Ok(())
                            });
                            if let Err(e) = written {
                                row.error = format!("{e:#}");
                            }
                        }
                        (row, Some(r.status))
                    }
                    Err(e) => {
                        row.error = format!("{e:#}");
                        (row, None)
                    }
                }
            })
            .collect()
    });

    let mut w = report::csv_writer(&out_dir.join("bench_runs.csv"), &header)?;
    for (r, _) in &rows {
        w.serialize(r)?;
    }
    w.flush()?;

    let mut cells: BTreeMap<(i64, Variant), Vec<&BenchRow>> = BTreeMap::new();
    for ((d, v, _), (row, _)) in jobs.iter().zip(&rows) {
        cells.entry((*d, *v)).or_default().push(row);
    }
    let table: Vec<BenchCell> = cells
        .into_iter()
        .map(|((d, v), rs)| {
            let ok: Vec<&&BenchRow> = rs.iter().filter(|r| r.obj.is_some()).collect();
            let (method, scheme, strategy) = v.columns();
            BenchCell {
                delta_max: d,
                method: method.into(),
                scheme,
                strategy,
                runs: rs.len(),
                failures: rs.len() - ok.len(),
                obj: mean(ok.iter().filter_map(|r| r.obj).map(|o| o as f64)),
                iter: mean(ok.iter().filter_map(|r| r.iter).map(|o| o as f64)),
                nodes: mean(ok.iter().filter_map(|r| r.nodes).map(|o| o as f64)),
                first_lb: mean(ok.iter().filter_map(|r| r.first_lb).map(|o| o as f64)),
                time: mean(ok.iter().filter_map(|r| r.time_s)),
            }
        })
        .collect();
    let mut w = report::csv_writer(&out_dir.join("bench_table.csv"), &header)?;
    for c in &table {
        w.serialize(c)?;
    }
    w.flush()?;

    let fmt = |v: Option<f64>, p: usize| v.map_or_else(|| "-".to_string(), |x| format!("{x:.p$}"));
    println!(
        "{:>5} {:<6} {:<8} {:<18} {:>12} {:>7} {:>9} {:>12} {:>8}",
        "δmax", "method", "scheme", "strategy", "Obj.", "Iter.", "Nodes", "1st LB", "Time"
    );
    for c in &table {
        println!(
            "{:>5} {:<6} {:<8} {:<18} {:>12} {:>7} {:>9} {:>12} {:>8}",
            c.delta_max,
            c.method,
            c.scheme,
            c.strategy,
            fmt(c.obj, 1),
            fmt(c.iter, 1),
            fmt(c.nodes, 0),
            fmt(c.first_lb, 1),
            fmt(c.time, 2)
        );
    }
    let all_optimal = rows.iter().all(|(_, s)| *s == Some(RunStatus::Optimal));
    Ok(if all_optimal { 0 } else { 2 })
}
