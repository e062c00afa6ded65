use std::path::Path;
use std::process::{Command, Output};

fn nitiflex(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nitiflex"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const HINGE: &str = r#"
length_m = 4.0e-4
width_m = 2.0e-3

[material]
e_pa = 6.0e10
en_pa = 2.0e10
eps_l = 0.01

[profile]
kind = "rectangular"
t_m = 2.5e-5
"#;

const ARC: &str = r#"
length_m = 4.0e-4
width_m = 2.0e-3

[material]
e_pa = 6.0e10
en_pa = 2.0e10
eps_l = 0.01

[profile]
kind = "arc"
t_min_m = 1.0e-5
radius_m = 1.0e-3
sides = "one"
"#;

#[test]
fn help_and_usage_errors() {
    let d = tempfile::tempdir().unwrap();
    let o = nitiflex(d.path(), &["--help"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("hinge"));
    let o = nitiflex(d.path(), &["hinge", "torque", "--bogus"]);
    assert_eq!(o.status.code(), Some(2));
    let o = nitiflex(d.path(), &["frobnicate"]);
    assert_eq!(o.status.code(), Some(2));
    let o = nitiflex(d.path(), &["plan", "slice", "--help"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("--depth-per-layer"));
}

#[test]
fn hinge_torque_prints_response() {
    let d = tempfile::tempdir().unwrap();
    std::fs::write(d.path().join("h.toml"), HINGE).unwrap();
    let o = nitiflex(d.path(), &["hinge", "torque", "--spec", "h.toml", "--theta-deg", "40"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = stdout(&o);
    for key in ["torque:", "energy:", "eps_peak:", "over_limit:"] {
        assert!(out.contains(key), "{out}");
    }
    // 40 deg over 400 um at 25 um: eps = theta t / 2L = 0.02182
    assert!(out.contains("eps_peak: 0.021817"), "{out}");
}

#[test]
fn domain_error_exit_code() {
    let d = tempfile::tempdir().unwrap();
    std::fs::write(d.path().join("h.toml"), HINGE).unwrap();
    let o = nitiflex(d.path(), &["hinge", "limit", "--spec", "h.toml", "--eps", "0.5"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("MechanicsError::Domain"), "{}", stderr(&o));
    let o = nitiflex(d.path(), &["hinge", "torque", "--theta-deg", "10"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("Missing"));
}

#[test]
fn hinge_limit_sizing() {
    let d = tempfile::tempdir().unwrap();
    let o = nitiflex(
        d.path(),
        &["hinge", "limit", "--theta-deg", "50", "--length-um", "160", "--eps", "0.06"],
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("max thickness: 22.00"), "{}", stdout(&o));
}

#[test]
fn laser_fit_noiseless() {
    let d = tempfile::tempdir().unwrap();
    let mut csv = String::from("rep_rate_khz,passes,depth_um\n");
    for p in 1..=14 {
        csv.push_str(&format!("200,{p},{p}\n"));
    }
    std::fs::write(d.path().join("etch.csv"), csv).unwrap();
    let o = nitiflex(d.path(), &["laser", "fit", "--csv", "etch.csv", "--target-um", "5"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.contains("rate 1.000 ± 0.000 um/pass"), "{out}");
    assert!(out.contains("selected: 200 kHz, 5 passes"), "{out}");
}

#[test]
fn laser_grid_writes_toolpath() {
    let d = tempfile::tempdir().unwrap();
    let o = nitiflex(
        d.path(),
        &["laser", "grid", "--rates", "150,200", "--passes", "1-3", "--out", "g.txt", "--dxf", "g.dxf"],
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("6 cells, 41 lines each"));
    let text = std::fs::read_to_string(d.path().join("g.txt")).unwrap();
    assert_eq!(text.lines().count(), 6);
    assert!(text.starts_with("layer=1 passes=1 :"));
    assert!(std::fs::read_to_string(d.path().join("g.dxf")).unwrap().contains("LWPOLYLINE"));
}

#[test]
fn slice_uniform_90() {
    let d = tempfile::tempdir().unwrap();
    let mut dm = String::from("4 3 5\n");
    for _ in 0..3 {
        dm.push_str("90 90 90 90\n");
    }
    std::fs::write(d.path().join("d.dm"), dm).unwrap();
    let o = nitiflex(d.path(), &["plan", "slice", "--depthmap", "d.dm", "--depth-per-layer", "5"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).starts_with("18 layers"), "{}", stdout(&o));
}

#[test]
fn plan_pipeline_round_trip() {
    let d = tempfile::tempdir().unwrap();
    std::fs::write(d.path().join("arc.toml"), ARC).unwrap();
    let run = |args: &[&str]| {
        let o = nitiflex(d.path(), args);
        assert_eq!(o.status.code(), Some(0), "{args:?}: {}", stderr(&o));
        stdout(&o)
    };
    let out = run(&["plan", "depthmap", "--spec", "arc.toml", "--out", "d.dm"]);
    assert!(out.contains("max depth 90.000 um"), "{out}");
    let out = run(&["plan", "slice", "--depthmap", "d.dm", "--depth-per-layer", "5", "--out", "p.plan"]);
    assert!(out.starts_with("18 layers"), "{out}");
    run(&["plan", "raster", "--plan", "p.plan", "--out", "tp.txt", "--dxf", "tp.dxf"]);
    let out = run(&["plan", "verify", "--plan", "p.plan", "--depthmap", "d.dm"]);
    assert!(out.contains("100.00% of cells within ±2.5 um"), "{out}");
    assert!(!out.contains("EXCEEDS"));
    let out = run(&["plan", "tolerance", "--designed", "d.dm", "--measured", "d.dm", "--out", "s.csv"]);
    assert!(out.contains("fraction within band: 1.0000"), "{out}");
    assert!(std::fs::read_to_string(d.path().join("s.csv")).unwrap().starts_with("x_um,"));
    let tp = std::fs::read_to_string(d.path().join("tp.txt")).unwrap();
    assert!(tp.lines().all(|l| l.starts_with("layer=")));
}

#[test]
fn outputs_are_byte_stable() {
    let d = tempfile::tempdir().unwrap();
    std::fs::write(d.path().join("arc.toml"), ARC).unwrap();
    let args = |out: &'static str| {
        vec!["hinge", "sweep", "--spec", "arc.toml", "--theta-max-deg", "40", "--n", "9", "--out", out]
    };
    assert!(nitiflex(d.path(), &args("a.csv")).status.success());
    assert!(nitiflex(d.path(), &args("b.csv")).status.success());
    let a = std::fs::read(d.path().join("a.csv")).unwrap();
    assert_eq!(a, std::fs::read(d.path().join("b.csv")).unwrap());
    // no temp files left behind
    let names: Vec<_> = std::fs::read_dir(d.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
    assert!(names.iter().all(|n| !n.to_string_lossy().contains(".tmp")), "{names:?}");
}

#[test]
fn bench_round_trip_against_model() {
    let d = tempfile::tempdir().unwrap();
    std::fs::write(d.path().join("h.toml"), HINGE).unwrap();
    let o = nitiflex(
        d.path(),
        &["hinge", "sweep", "--spec", "h.toml", "--theta-max-deg", "40", "--n", "401", "--out", "model.csv"],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    // five trials copied from the model sweep
    let model = std::fs::read_to_string(d.path().join("model.csv")).unwrap();
    let trials = d.path().join("h25");
    std::fs::create_dir(&trials).unwrap();
    let mut body = String::from("theta_rad,torque_nm\n");
    for line in model.lines().skip(1) {
        let cols: Vec<&str> = line.split(',').collect();
        body.push_str(&format!("{},{}\n", cols[0], cols[1]));
    }
    for k in 0..5 {
        std::fs::write(trials.join(format!("t{k}.csv")), &body).unwrap();
    }
    let o = nitiflex(
        d.path(),
        &["bench", "aggregate", "--dir", "h25", "--out", "agg.csv", "--plot", "agg"],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("5 trials"));
    assert!(stdout(&o).contains("max std 0.0000"));
    assert!(d.path().join("agg.svg").exists());
    let o = nitiflex(
        d.path(),
        &["bench", "compare", "--model", "model.csv", "--aggregate", "agg.csv", "--out", "r.csv"],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("rmse: 0.0000 N·um"), "{}", stdout(&o));
    let r = std::fs::read_to_string(d.path().join("r.csv")).unwrap();
    assert!(r.lines().nth(1).unwrap().starts_with("0e0,0e0,0e0,1,"), "{r}");
}

#[test]
fn project_config_defaults() {
    let d = tempfile::tempdir().unwrap();
    std::fs::write(d.path().join("arc.toml"), ARC).unwrap();
    std::fs::write(
        d.path().join("project.toml"),
        "hinge_spec = \"arc.toml\"\npitch_um = 10.0\noutput_dir = \"out\"\n[laser]\nrep_rate_khz = 200.0\npasses_per_layer = 5\ndepth_per_layer_um = 5.0\n",
    )
    .unwrap();
    let o = nitiflex(d.path(), &["--config", "project.toml", "plan", "depthmap", "--out", "d.dm"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("at 10 um"), "{}", stdout(&o));
    assert!(d.path().join("out/d.dm").exists());
    let o = nitiflex(d.path(), &["--config", "project.toml", "plan", "slice", "--depthmap", "out/d.dm"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).starts_with("18 layers"));

    std::fs::write(d.path().join("bad.toml"), "hinge_spec = \"missing.toml\"\n").unwrap();
    let o = nitiflex(d.path(), &["--config", "bad.toml", "hinge", "torque", "--theta-deg", "1"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("Config"));
}
