use std::path::Path;
use std::process::{Command, Output};

fn emgm(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_emgm"))
        .current_dir(dir)
        .env_remove("EMGM_JOBS")
        .args(args)
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn ptc_preset_writes_one_row_per_grid_point() {
    let dir = tempfile::tempdir().unwrap();
    let o = emgm(
        dir.path(),
        &[
            "ptc",
            "--preset",
            "desk-bg",
            "--realizations",
            "1",
            "--out",
            "bg.csv",
            "--contour",
            "c.csv",
        ],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = std::fs::read_to_string(dir.path().join("bg.csv")).unwrap();
    let mut lines = csv.lines();
    let header = lines.next().unwrap();
    for col in [
        "m_over_n",
        "k_over_m",
        "success_rate",
        "median_nmse_db",
        "mean_runtime_s",
    ] {
        assert!(header.split(',').any(|h| h == col), "missing {col} in {header}");
    }
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 64);
    let rate_col = header.split(',').position(|h| h == "success_rate").unwrap();
    for r in &rows {
        let v: f64 = r.split(',').nth(rate_col).unwrap().parse().unwrap();
        assert!(v == 0.0 || v == 1.0);
    }
    assert!(dir.path().join("c.csv").exists());
}

#[test]
fn omitting_runtime_drops_the_column() {
    let dir = tempfile::tempdir().unwrap();
    let o = emgm(
        dir.path(),
        &[
            "sweep",
            "--preset",
            "desk-br",
            "--realizations",
            "1",
            "--omit-runtime",
            "--out",
            "s.csv",
        ],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = std::fs::read_to_string(dir.path().join("s.csv")).unwrap();
    assert!(!csv.lines().next().unwrap().contains("mean_runtime_s"));
    assert!(String::from_utf8_lossy(&o.stdout).contains("breakpoint"));
}

#[test]
fn more_nonzeros_than_measurements_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let o = emgm(dir.path(), &["recover", "--n", "100", "--m", "20", "--k", "30"]);
    assert!(!o.status.success());
    let err = stderr(&o);
    assert!(err.contains("invalid configuration"), "{err}");
    assert!(err.contains("30") && err.contains("20"), "{err}");
    assert!(!dir.path().join("estimate.csv").exists());
}

#[test]
fn recover_writes_estimate_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let args = [
        "recover", "--n", "200", "--m", "100", "--k", "10", "--snr", "30", "--seed", "4",
    ];
    let o = emgm(dir.path(), &args);
    assert!(o.status.success(), "{}", stderr(&o));
    let est = std::fs::read_to_string(dir.path().join("estimate.csv")).unwrap();
    assert_eq!(est.lines().next(), Some("index,x_true,x_hat"));
    assert_eq!(est.lines().count(), 201);

    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("summary.json")).unwrap()).unwrap();
    let nmse = summary["payload"]["nmse_db"].as_f64().unwrap();
    assert!(nmse < -15.0, "{nmse}");

    // the estimate file is a deterministic function of the arguments
    let again = tempfile::tempdir().unwrap();
    assert!(emgm(again.path(), &args).status.success());
    assert_eq!(est, std::fs::read_to_string(again.path().join("estimate.csv")).unwrap());
    let s2: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(again.path().join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["payload"], s2["payload"]);
}

#[test]
fn command_line_flags_override_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("run.ini"),
        "[recover]\nn = 80\nm = 40\nk = 4\nseed = 1\n",
    )
    .unwrap();
    let o = emgm(dir.path(), &["--config", "run.ini", "recover", "--n", "60"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let est = std::fs::read_to_string(dir.path().join("estimate.csv")).unwrap();
    assert_eq!(est.lines().count(), 61);
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["payload"]["spec"]["m"], 40);
    assert_eq!(summary["payload"]["spec"]["n"], 60);
}

#[test]
fn bad_config_file_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.ini"), "[recover]\nnot a pair\n").unwrap();
    let o = emgm(dir.path(), &["--config", "bad.ini", "recover"]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("line 2"), "{}", stderr(&o));
}

#[test]
fn unknown_preset_lists_the_known_ones() {
    let dir = tempfile::tempdir().unwrap();
    let o = emgm(dir.path(), &["ptc", "--preset", "nope", "--out", "x.csv"]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("desk-bg"), "{}", stderr(&o));
}

#[test]
fn plot_rejects_empty_input_without_writing() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("empty.csv"), "").unwrap();
    let o = emgm(dir.path(), &["plot", "--input", "empty.csv", "--out-dir", "plots"]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("empty"), "{}", stderr(&o));
    assert!(!dir.path().join("plots").exists());
}

#[test]
fn plot_renders_a_sweep_file() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("sweep.csv"),
        "m_over_n,k_over_m,success_rate,median_nmse_db\n0.3,0.3333,0.5,-12.0\n0.5,0.2,1.0,-25.5\n",
    )
    .unwrap();
    let o = emgm(dir.path(), &["plot", "--input", "sweep.csv", "--out-dir", "plots"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let script = std::fs::read_to_string(dir.path().join("plots/plots.gp")).unwrap();
    assert!(script.contains("sweep"));
}
