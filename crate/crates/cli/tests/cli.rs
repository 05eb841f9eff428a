use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn scenario(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../scenarios")
        .join(name)
}

fn nvswap(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nvswap"))
        .args(args)
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn default_config() -> String {
    scenario("default.toml").display().to_string()
}

#[test]
fn analyze_em_example_row() {
    let o = nvswap(&[
        "analyze-em",
        "--n",
        "16384",
        "--m",
        "1024",
        "--b",
        "64",
        "--r",
        "1",
        "--w",
        "8",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let mut lines = text.lines();
    assert_eq!(
        lines.next(),
        Some("n,m,b,passes,reads,writes,weighted_cost,energy_j")
    );
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(
        &row[..7],
        ["16384", "1024", "64", "2", "768", "768", "6912"]
    );
}

#[test]
fn analyze_em_sweeps_and_prices_energy() {
    let o = nvswap(&[
        "analyze-em",
        "--n",
        "512,16384",
        "--m",
        "1024,2048",
        "--b",
        "64",
        "--er",
        "1",
        "--ew",
        "2",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let rows: Vec<&str> = text.lines().skip(1).collect();
    assert_eq!(rows.len(), 4);
    assert!(rows.contains(&"16384,2048,64,1,512,512,1024,1536"));

    let o = nvswap(&[
        "analyze-em",
        "--n",
        "16384",
        "--m",
        "1024",
        "--b",
        "64",
        "--config",
        &default_config(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let row = stdout(&o).lines().nth(1).unwrap().to_string();
    assert!(!row.ends_with(','), "{row}");
}

#[test]
fn analyze_em_reports_model_errors() {
    let o = nvswap(&["analyze-em", "--n", "1000", "--m", "64", "--b", "64"]);
    assert_eq!(o.status.code(), Some(2));
    let o = nvswap(&["analyze-em", "--n", "100000", "--m", "128", "--b", "64"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn flash_info_table() {
    let o = nvswap(&["flash-info", "--config", &default_config()]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "k,read_mb_per_s,program_mb_per_s");
    assert_eq!(lines.len(), 1 + 16);
    let first: Vec<f64> = lines[1].split(',').map(|x| x.parse().unwrap()).collect();
    assert_eq!(first[0], 1.0);
    assert!((first[1] - 151.8).abs() < 0.05);
    assert!((first[2] - 57.9).abs() < 0.05);
}

#[test]
fn sweep_writes_csv_and_grid() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("map.csv");
    let o = nvswap(&[
        "sweep",
        "--config",
        &default_config(),
        "--out",
        out.to_str().unwrap(),
        "--gnuplot",
    ]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    assert!(String::from_utf8_lossy(&o.stderr).contains("below 1 Hz"));

    let text = std::fs::read_to_string(&out).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next(),
        Some("channels,sampling_rate_hz,verdict,timing,power_ok,swap_bytes,window_s,io_s,watts")
    );
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert!(rows.len() >= 10_000);
    assert!(rows.iter().all(|r| r.len() == 9));
    for v in [
        "cacheable",
        "latency_limited",
        "feasible",
        "bandwidth_limited",
    ] {
        assert!(rows.iter().any(|r| r[2] == v), "{v}");
    }

    let grid = std::fs::read_to_string(dir.path().join("map.csv.grid.dat")).unwrap();
    let data: Vec<&str> = grid.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(data.len(), rows.len());

    // same config, same bytes
    let again = dir.path().join("again.csv");
    nvswap(&[
        "sweep",
        "--config",
        &default_config(),
        "--out",
        again.to_str().unwrap(),
    ]);
    assert_eq!(std::fs::read(&again).unwrap(), text.as_bytes());
}

#[test]
fn sweep_em_mode_runs() {
    let o = nvswap(&["sweep", "--config", &default_config(), "--mode", "em"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).lines().count() > 10_000);
}

#[test]
fn simulate_emits_report_and_trace() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sim.json");
    let o = nvswap(&[
        "simulate",
        "--config",
        &default_config(),
        "--channels",
        "4000",
        "--out",
        out.to_str().unwrap(),
        "--trace",
    ]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let v: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    let keys: Vec<&str> = v.as_object().unwrap().keys().map(|k| k.as_str()).collect();
    for k in [
        "windows_total",
        "deadline_misses",
        "worst_io_latency",
        "mean_bus_utilization",
        "energy_total",
        "mean_power",
        "peak_window_power",
    ] {
        assert!(keys.contains(&k), "{k}");
    }
    assert_eq!(keys.len(), 7);
    assert_eq!(v["deadline_misses"], 0);

    let trace = std::fs::read_to_string(dir.path().join("sim.json.trace.csv")).unwrap();
    let lines: Vec<&str> = trace.lines().collect();
    assert_eq!(
        lines[0],
        "kernel,window,start_s,io_start_s,io_end_s,latency_s,missed,energy_j"
    );
    assert_eq!(lines.len() as u64, 1 + v["windows_total"].as_u64().unwrap());
}

#[test]
fn simulate_is_deterministic() {
    let args = [
        "simulate",
        "--config",
        &default_config(),
        "--channels",
        "20000",
        "--horizon-s",
        "0.5",
    ];
    assert_eq!(stdout(&nvswap(&args)), stdout(&nvswap(&args)));
}

#[test]
fn exit_codes() {
    // usage errors
    assert_eq!(nvswap(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(nvswap(&[]).status.code(), Some(1));
    assert_eq!(nvswap(&["sweep"]).status.code(), Some(1));
    assert_eq!(
        nvswap(&["sweep", "--config", &default_config(), "--gnuplot"])
            .status
            .code(),
        Some(1)
    );
    assert_eq!(nvswap(&["--help"]).status.code(), Some(0));
    let usage = nvswap(&["frobnicate"]);
    assert!(String::from_utf8_lossy(&usage.stderr).contains("Usage"));

    // config errors
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    let text = std::fs::read_to_string(scenario("default.toml")).unwrap();
    std::fs::write(&bad, text.replace("name = \"BBF\"", "name = \"FIR\"")).unwrap();
    let o = nvswap(&["sweep", "--config", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("XCOR"));
    assert_eq!(
        nvswap(&["flash-info", "--config", "/no/such/file.toml"])
            .status
            .code(),
        Some(1)
    );

    // runtime errors
    let short = [
        "simulate",
        "--config",
        &default_config(),
        "--channels",
        "4000",
        "--horizon-s",
        "0.001",
    ];
    assert_eq!(nvswap(&short).status.code(), Some(2));
    let sub_hz = [
        "simulate",
        "--config",
        &default_config(),
        "--channels",
        "10000000",
    ];
    assert_eq!(nvswap(&sub_hz).status.code(), Some(2));
}
