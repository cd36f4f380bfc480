use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn mdvsp(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mdvsp"))
        .args(args)
        .current_dir(dir)
        .env_remove("MDVSP_DELTA_MAX")
        .output()
        .expect("binary runs")
}

fn gen(dir: &Path, trips: &str, count: &str) -> Vec<PathBuf> {
    let out = mdvsp(&["gen", "--trips", trips, "--count", count, "--seed", "3", "--out", "inst"], dir);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let n: u64 = count.parse().unwrap();
    (0..n).map(|k| dir.join("inst").join(format!("{trips}M_seed{}.json", 3 + k))).collect()
}

fn report(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn records(path: &Path) -> (csv::StringRecord, Vec<csv::StringRecord>) {
    let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_path(path).unwrap();
    let headers = r.headers().unwrap().clone();
    (headers, r.records().map(Result::unwrap).collect())
}

#[test]
fn gen_rejects_zero_trips() {
    let dir = tempfile::tempdir().unwrap();
    let out = mdvsp(&["gen", "--trips", "0"], dir.path());
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn gen_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let first: Vec<Vec<u8>> = gen(dir.path(), "30", "2").iter().map(|p| std::fs::read(p).unwrap()).collect();
    let second: Vec<Vec<u8>> = gen(dir.path(), "30", "2").iter().map(|p| std::fs::read(p).unwrap()).collect();
    assert_eq!(first, second);
    assert_ne!(first[0], first[1]);
}

#[test]
fn fd_and_ddd_agree() {
    let dir = tempfile::tempdir().unwrap();
    let inst = gen(dir.path(), "30", "1").remove(0);
    let inst = inst.to_str().unwrap();
    let fd = mdvsp(&["solve", "--fd", "--delta-max", "2", "--out", "fd", inst], dir.path());
    assert_eq!(fd.status.code(), Some(0), "{}", String::from_utf8_lossy(&fd.stderr));
    let ddd = mdvsp(
        &["solve", "--ddd", "--scheme", "long", "--refine", "fewer-iterations", "--delta-max", "2", "--out", "ddd", inst],
        dir.path(),
    );
    assert_eq!(ddd.status.code(), Some(0), "{}", String::from_utf8_lossy(&ddd.stderr));
    let a = report(&dir.path().join("fd/30M_seed3.schedule.json"));
    let b = report(&dir.path().join("ddd/30M_seed3.schedule.json"));
    assert_eq!(a["objective"], b["objective"]);
    assert_eq!(b["status"], "optimal");
    assert_eq!(b["config"]["ddd"]["scheme"], "long");

    let (headers, rows) = records(&dir.path().join("ddd/30M_seed3.runlog.csv"));
    assert_eq!(&headers.iter().collect::<Vec<_>>()[..8], ["iter", "lb", "ub", "gap", "nodes", "arcs", "points_added", "wall_ms"]);
    assert_eq!(rows.len() as u64, b["iterations"].as_u64().unwrap());
    let last_ub: i64 = rows.last().unwrap()[2].parse().unwrap();
    assert_eq!(Some(last_ub), b["objective"].as_i64());
    let first_line = std::fs::read_to_string(dir.path().join("ddd/30M_seed3.runlog.csv")).unwrap();
    let header: serde_json::Value = serde_json::from_str(first_line.lines().next().unwrap().trim_start_matches("# ")).unwrap();
    assert_eq!(header["ddd"]["delta_max"], 2);
}

#[test]
fn scheme_rejected_for_fd() {
    let dir = tempfile::tempdir().unwrap();
    let inst = gen(dir.path(), "20", "1").remove(0);
    let out = mdvsp(&["solve", "--fd", "--scheme", "long", inst.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn postprocess_writes_deviations() {
    let dir = tempfile::tempdir().unwrap();
    let inst = gen(dir.path(), "30", "1").remove(0);
    let out = mdvsp(
        &["solve", "--delta-max", "3", "--postprocess", "optimized", "--out", "pp", inst.to_str().unwrap()],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let (headers, rows) = records(&dir.path().join("pp/30M_seed3.deviation.csv"));
    assert_eq!(headers.iter().collect::<Vec<_>>(), ["trip_id", "t_s", "pi", "delta_plus", "delta_minus"]);
    assert_eq!(rows.len(), 31);
    let mut total = 0i64;
    for r in &rows[..30] {
        let (ts, pi): (i64, i64) = (r[1].parse().unwrap(), r[2].parse().unwrap());
        let (p, m): (i64, i64) = (r[3].parse().unwrap(), r[4].parse().unwrap());
        assert_eq!(pi - ts, p - m);
        assert!(p.max(m) <= 3 && p.min(m) == 0);
        total += p + m;
    }
    assert_eq!(&rows[30][0], "mean_seconds");
    let mean: f64 = rows[30][4].parse().unwrap();
    assert!((mean - 60.0 * total as f64 / 30.0).abs() < 1e-3);
}

#[test]
fn flags_override_config_and_env() {
    let dir = tempfile::tempdir().unwrap();
    let inst = gen(dir.path(), "20", "1").remove(0);
    std::fs::write(dir.path().join("c.toml"), "backend = \"branch-and-bound\"\n[ddd]\ndelta_max = 2\nscheme = \"medium\"\n").unwrap();
    let run = |extra: &[&str], env: Option<&str>| {
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_mdvsp"));
        cmd.current_dir(dir.path()).args(["solve", "--config", "c.toml", "--out", "o"]).args(extra);
        cmd.arg(inst.to_str().unwrap());
        match env {
            Some(v) => cmd.env("MDVSP_DELTA_MAX", v),
            None => cmd.env_remove("MDVSP_DELTA_MAX"),
        };
        assert!(cmd.output().unwrap().status.success());
        report(&dir.path().join("o/20M_seed3.schedule.json"))["config"].clone()
    };
    let c = run(&[], None);
    assert_eq!((c["ddd"]["delta_max"].as_i64(), c["backend"].as_str()), (Some(2), Some("branch-and-bound")));
    assert_eq!(c["ddd"]["scheme"], "medium");
    assert_eq!(run(&["--delta-max", "1"], None)["ddd"]["delta_max"], 1);
    assert_eq!(run(&[], Some("0"))["ddd"]["delta_max"], 0);
    assert_eq!(run(&["--delta-max", "1"], Some("0"))["ddd"]["delta_max"], 1);
}

#[test]
fn time_limit_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let inst = gen(dir.path(), "20", "1").remove(0);
    let out = mdvsp(&["solve", "--time-limit", "0.000000001", inst.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn bench_grid_and_single_cell() {
    let dir = tempfile::tempdir().unwrap();
    let out = mdvsp(
        &[
            "bench", "--trips", "20", "--count", "2", "--delta-max", "0,1", "--scheme", "short,long", "--fd",
            "--threads", "2", "--trajectories", "--out", "b",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let (_, runs) = records(&dir.path().join("b/bench_runs.csv"));
    assert_eq!(runs.len(), 2 * 2 * 3);
    let (headers, table) = records(&dir.path().join("b/bench_table.csv"));
    assert_eq!(table.len(), 2 * 3);
    for col in ["Obj.", "Iter.", "Nodes", "1st LB", "Time"] {
        assert!(headers.iter().any(|h| h == col), "{col}");
    }
    // Every DDD run reaches the full-network objective.
    let mut by_key = std::collections::HashMap::new();
    for r in &runs {
        let key = (r[0].to_string(), r[1].to_string());
        let obj: i64 = r[6].parse().unwrap();
        assert_eq!(*by_key.entry(key).or_insert(obj), obj);
    }
    assert_eq!(std::fs::read_dir(dir.path().join("b/trajectories")).unwrap().count(), 12);

    let out = mdvsp(&["bench", "--trips", "20", "--count", "1", "--out", "one"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let (_, table) = records(&dir.path().join("one/bench_table.csv"));
    assert_eq!(table.len(), 1);
}
