mod args;
mod bench;
mod config;
mod report;
mod run;

use anyhow::{bail, Context, Result};
use args::{Cli, Command, GenArgs, SolveArgs};
use clap::Parser;
use mdvsp_ddd::instance::{generate_instance, load_instance, save_instance, GenParams};
use report::ScheduleReport;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("MDVSP_LOG", "warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let result = match cli.command {
        Command::Gen(a) => cmd_gen(&a),
        Command::Solve(a) => cmd_solve(&a),
        Command::Bench(a) => bench::cmd_bench(&a),
    };
    match result {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

pub fn gen_params(trips: usize, seed: u64, depots: usize, stations: Option<usize>) -> Result<GenParams> {
    if trips == 0 {
        bail!("--trips must be positive");
    }
    Ok(GenParams { num_trips: trips, seed, num_depots: depots, num_locations: stations, ..GenParams::default() })
}

pub fn instance_name(trips: usize, seed: u64) -> String {
    format!("{trips}M_seed{seed}")
}

fn cmd_gen(a: &GenArgs) -> Result<i32> {
    if a.count == 0 {
        bail!("--count must be positive");
    }
    std::fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    println!("{:<24} {:>6} {:>9} {:>7}", "file", "trips", "stations", "depots");
    for k in 0..a.count as u64 {
        let seed = a.seed + k;
        let inst = generate_instance(&gen_params(a.trips, seed, a.depots, a.stations)?)?;
        let path = a.out.join(format!("{}.json", instance_name(a.trips, seed)));
        save_instance(&inst, &path)?;
        println!(
            "{:<24} {:>6} {:>9} {:>7}",
            path.file_name().unwrap_or_default().to_string_lossy(),
            inst.trips.len(),
            inst.stations().len(),
            inst.depots().len()
        );
    }
    Ok(0)
}

fn stem(path: &Path) -> String {
    path.file_stem().map_or_else(|| "instance".to_string(), |s| s.to_string_lossy().into_owned())
}

fn cmd_solve(a: &SolveArgs) -> Result<i32> {
    let eff = config::resolve_solve(a)?;
    let instance = load_instance(&a.instance)?;
    let result = run::run(&instance, &eff)?;
    std::fs::create_dir_all(&eff.out).with_context(|| format!("creating {}", eff.out.display()))?;
    let name = stem(&a.instance);
    let out = |suffix: &str| -> PathBuf { eff.out.join(format!("{name}.{suffix}")) };

    report::write_json(
        &out("schedule.json"),
        &ScheduleReport {
            config: &eff,
            instance: name.clone(),
            status: result.status.as_str(),
            objective: result.objective(),
            lower_bound: result.lower_bound,
            iterations: result.records.len(),
            schedule: result.schedule.as_ref(),
            warnings: &result.warnings,
        },
    )?;
    report::write_run_log(&out("runlog.csv"), &eff, &result.records)?;
    if let (Some(_), Some(s)) = (eff.postprocess, &result.schedule) {
        report::write_deviations(&out("deviation.csv"), &eff, &instance, s)?;
    }
    if a.dump_network {
        if let Some(support) = &result.support {
            let file = std::fs::File::create(out("network.jsonl"))?;
            support.network.dump_json_lines(std::io::BufWriter::new(file))?;
        }
    }

    match result.objective() {
        Some(obj) => println!(
            "{}: {} objective {obj} lower bound {} iterations {} vehicles {} time {:.2}s",
            name,
            result.status.as_str(),
            result.lower_bound,
            result.records.len(),
            result.schedule.as_ref().map_or(0, |s| s.vehicles),
            result.seconds
        ),
        None => println!("{name}: {} without a schedule, lower bound {}", result.status.as_str(), result.lower_bound),
    }
    Ok(result.status.exit_code())
}
