use crate::args::{Method, SolveArgs, SolverArgs};
use anyhow::{bail, Context, Result};
use mdvsp_ddd::ddd::DddConfig;
use mdvsp_ddd::mip::BackendKind;
use mdvsp_ddd::postprocess::PostprocessMode;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

/// Settings file contents. Every key is optional.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub method: Option<Method>,
    pub backend: Option<BackendKind>,
    pub postprocess: Option<PostprocessMode>,
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub ddd: DddConfig,
}

pub fn load_file(path: Option<&Path>) -> Result<FileConfig> {
    let Some(path) = path else {
        return Ok(FileConfig::default());
    };
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

/// Fully resolved settings of one run, echoed into every report header.
#[derive(Debug, Clone, Serialize)]
pub struct Effective {
    pub method: Method,
    pub backend: BackendKind,
    pub postprocess: Option<PostprocessMode>,
    pub ddd: DddConfig,
    #[serde(skip)]
    pub out: PathBuf,
}

/// Applies the shared flags on top of the file settings.
pub fn apply_solver_args(file: FileConfig, args: &SolverArgs) -> Effective {
    let mut ddd = file.ddd;
    if let Some(t) = args.time_limit {
        ddd.time_limit_secs = Some(t);
    }
    if let Some(e) = args.epsilon {
        ddd.epsilon = e;
    }
    if args.max_iterations.is_some() {
        ddd.max_iterations = args.max_iterations;
    }
    if let Some(c) = args.enumeration_cap {
        ddd.enumeration_cap = c;
    }
    Effective {
        method: file.method.unwrap_or(Method::Ddd),
        backend: args.backend.or(file.backend).unwrap_or_else(BackendKind::default_kind),
        postprocess: file.postprocess,
        ddd,
        out: args.out.clone().or(file.out).unwrap_or_else(|| PathBuf::from(".")),
    }
}

pub fn resolve_solve(args: &SolveArgs) -> Result<Effective> {
    let file = load_file(args.solver.config.as_deref())?;
    let mut eff = apply_solver_args(file, &args.solver);
    if args.fd {
        eff.method = Method::Fd;
    } else if args.ddd {
        eff.method = Method::Ddd;
    }
    if eff.method == Method::Fd && (args.scheme.is_some() || args.refine.is_some()) {
        bail!("--scheme and --refine only apply to --ddd");
    }
    if let Some(d) = args.delta_max {
        eff.ddd.delta_max = d;
    }
    if let Some(s) = args.scheme {
        eff.ddd.scheme = s;
    }
    if let Some(r) = args.refine {
        eff.ddd.strategy = r;
    }
    if args.postprocess.is_some() {
        eff.postprocess = args.postprocess;
    }
    validate(&eff)?;
    Ok(eff)
}

pub fn validate(eff: &Effective) -> Result<()> {
    if eff.ddd.delta_max < 0 {
        bail!("--delta-max must be nonnegative");
    }
    if eff.ddd.time_limit_secs.is_some_and(|t| !(t.is_finite() && t > 0.0)) {
        bail!("--time-limit must be positive");
    }
    if eff.ddd.enumeration_cap == 0 {
        bail!("--enumeration-cap must be positive");
    }
    if matches!(eff.postprocess, Some(PostprocessMode::Worst | PostprocessMode::Random { .. })) {
        bail!("--postprocess takes `per-duty` or `optimized`");
    }
    Ok(())
}
