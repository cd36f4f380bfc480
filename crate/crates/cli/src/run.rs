use crate::args::Method;
use crate::config::Effective;
use anyhow::{Context, Result};
use mdvsp_ddd::ddd::{solve_ddd, solve_fd, DddStatus, IterationRecord, ScheduleSolution, Support};
use mdvsp_ddd::instance::Instance;
use mdvsp_ddd::mip::{SolveParams, SolveStatus, Tolerance};
use mdvsp_ddd::postprocess::postprocess_solution;
use serde::Serialize;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Optimal,
    GapLimit,
    TimeLimit,
}

impl RunStatus {
    pub fn exit_code(self) -> i32 {
        match self {
            RunStatus::Optimal => 0,
            RunStatus::GapLimit | RunStatus::TimeLimit => 2,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            RunStatus::Optimal => "optimal",
            RunStatus::GapLimit => "gap_limit",
            RunStatus::TimeLimit => "time_limit",
        }
    }
}

pub struct RunResult {
    pub status: RunStatus,
    pub schedule: Option<ScheduleSolution>,
    pub lower_bound: i64,
    pub first_lower_bound: Option<i64>,
    pub records: Vec<IterationRecord>,
    pub nodes: usize,
    pub arcs: usize,
    pub seconds: f64,
    pub support: Option<Support>,
    pub warnings: Vec<String>,
}

impl RunResult {
    pub fn objective(&self) -> Option<i64> {
        self.schedule.as_ref().map(|s| s.cost)
    }
}

/// Solves `instance` as configured, validates the schedule, and applies
/// post-processing when requested.
pub fn run(instance: &Instance, eff: &Effective) -> Result<RunResult> {
    let backend = eff.backend.create()?;
    let delta = eff.ddd.delta_max;
    let mut result = match eff.method {
        Method::Fd => {
            let params = SolveParams { tolerance: Tolerance::EXACT, time_limit: eff.ddd.time_limit() };
            let out = solve_fd(instance, delta, &params, backend.as_ref())?;
            let status = match out.status {
                SolveStatus::Optimal => RunStatus::Optimal,
                _ => RunStatus::TimeLimit,
            };
            let objective = out.schedule.as_ref().map(|s| s.cost);
            let record = IterationRecord {
                iter: 1,
                lb: out.lower_bound,
                model_bound: out.lower_bound,
                ub: objective,
                gap: objective.map(|o| (o - out.lower_bound) as f64),
                nodes: out.nodes,
                arcs: out.arcs,
                points_added: 0,
                wall_ms: out.elapsed.as_millis(),
                tolerance: Tolerance::EXACT,
                exact_resolve: false,
                repaired: false,
                refinement: Default::default(),
            };
            RunResult {
                status,
                schedule: out.schedule,
                lower_bound: out.lower_bound,
                first_lower_bound: Some(out.lower_bound),
                records: vec![record],
                nodes: out.nodes,
                arcs: out.arcs,
                seconds: out.elapsed.as_secs_f64(),
                support: out.support,
                warnings: Vec::new(),
            }
        }
        Method::Ddd => {
            let out = solve_ddd(instance, &eff.ddd, backend.as_ref())?;
            let status = match out.status {
                DddStatus::Optimal => RunStatus::Optimal,
                DddStatus::IterationLimit => RunStatus::GapLimit,
                DddStatus::TimeLimit => RunStatus::TimeLimit,
            };
            let last = out.iterations.last();
            RunResult {
                status,
                first_lower_bound: out.first_lower_bound(),
                nodes: last.map_or(0, |r| r.nodes),
                arcs: last.map_or(0, |r| r.arcs),
                seconds: out.elapsed.as_secs_f64(),
                schedule: out.schedule,
                lower_bound: out.lower_bound,
                records: out.iterations,
                support: out.support,
                warnings: Vec::new(),
            }
        }
    };
    if let Some(s) = &result.schedule {
        s.validate(instance, delta).context("solver returned an invalid schedule")?;
    }
    if let (Some(mode), Some(s)) = (eff.postprocess, &result.schedule) {
        let out = postprocess_solution(
            s,
            result.support.as_ref(),
            mode,
            instance,
            delta,
            backend.as_ref(),
            eff.ddd.enumeration_cap,
        )?;
        out.schedule.validate(instance, delta).context("post-processing returned an invalid schedule")?;
        for w in &out.warnings {
            log::warn!("{w}");
        }
        result.warnings = out.warnings;
        result.schedule = Some(out.schedule);
    }
    Ok(result)
}
