use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const SCENE: &str = r#"{
  "n_bs_antennas": 64, "n_res": 16, "n_ses": 4, "n_slots": 16,
  "carrier_freq_ghz": 28, "tx_power_dbm": 50, "noise_power_dbm": -120,
  "bs_irs_distance_m": 30, "bs_departure_angle_deg": -60, "irs_arrival_angle_deg": -60,
  "targets": [{"angle_deg": 12, "distance_m": 5, "rcs_dbsm": 10}],
  "measurement": {"kind": "random_phase", "seed": 3}
}"#;

struct TempDir(PathBuf);

impl TempDir {
    fn new(tag: &str) -> Self {
        let dir = std::env::temp_dir().join(format!("irs-anm-cli-{tag}-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        Self(dir)
    }

    fn file(&self, name: &str, contents: &str) -> PathBuf {
        let p = self.0.join(name);
        std::fs::write(&p, contents).unwrap();
        p
    }

    fn path(&self, name: &str) -> PathBuf {
        self.0.join(name)
    }
}

impl Drop for TempDir {
    fn drop(&mut self) {
        let _ = std::fs::remove_dir_all(&self.0);
    }
}

fn run(args: &[&dyn AsRef<std::ffi::OsStr>]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_irs-anm"));
    for a in args {
        cmd.arg(a);
    }
    cmd.output().unwrap()
}

fn read(p: &Path) -> String {
    std::fs::read_to_string(p).unwrap()
}

#[test]
fn simulate_is_reproducible() {
    let dir = TempDir::new("sim");
    let scene = dir.file("scene.json", SCENE);
    let (a, b) = (dir.path("a.csv"), dir.path("b.csv"));
    assert!(run(&[&"simulate", &"--scene", &scene, &"--out", &a, &"--seed", &"5"]).status.success());
    assert!(run(&[&"simulate", &"--scene", &scene, &"--out", &b, &"--seed", &"5"]).status.success());
    let text = read(&a);
    assert_eq!(text, read(&b));
    assert!(text.starts_with("row,col,re,im\n"));
    assert_eq!(text.lines().count(), 1 + 4 * 16);
}

#[test]
fn estimate_recovers_target() {
    let dir = TempDir::new("est");
    let scene = dir.file("scene.json", SCENE);
    let out = dir.path("e.csv");
    for method in ["anm", "music"] {
        let o = run(&[&"estimate", &"--scene", &scene, &"--method", &method, &"--k", &"1", &"--out", &out]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        let text = read(&out);
        let angle: f64 = text.lines().nth(1).unwrap().split(',').nth(2).unwrap().parse().unwrap();
        assert!((angle - 12.0).abs() < 0.5, "{method}: {angle}");
    }
}

#[test]
fn crb_with_closed_form() {
    let dir = TempDir::new("crb");
    let scene = dir.file("scene.json", SCENE);
    let out = dir.path("c.csv");
    let o = run(&[&"crb", &"--scene", &scene, &"--closed-form", &"--out", &out]);
    assert!(o.status.success());
    let text = read(&out);
    assert!(text.starts_with("target,angle_deg,crb_rad2,crb_deg2,rcrb_deg,closed_form_rad2\n"));
    let fields: Vec<f64> = text.lines().nth(1).unwrap().split(',').map(|f| f.parse().unwrap()).collect();
    assert!(fields[2] > 0.0 && fields[5] > 0.0);
}

#[test]
fn exit_codes() {
    let dir = TempDir::new("exit");
    let out = dir.path("x.csv");
    let missing = dir.path("missing.json");
    assert_eq!(run(&[&"crb", &"--scene", &missing, &"--out", &out]).status.code(), Some(2));

    let bad = dir.file("bad.json", r#"{"n_res": 4}"#);
    assert_eq!(run(&[&"simulate", &"--scene", &bad, &"--out", &out]).status.code(), Some(2));

    // K = M: degenerate noise subspace
    let scene = dir.file("scene.json", SCENE);
    let o = run(&[&"estimate", &"--scene", &scene, &"--method", &"music", &"--k", &"4", &"--out", &out]);
    assert_eq!(o.status.code(), Some(3));

    let endfire = dir.file("endfire.json", &SCENE.replace("\"angle_deg\": 12", "\"angle_deg\": 90"));
    assert_eq!(run(&[&"crb", &"--scene", &endfire, &"--out", &out]).status.code(), Some(3));

    assert_eq!(run(&[&"sweep"]).status.code(), Some(2));
}

#[test]
fn sweep_writes_both_files() {
    let dir = TempDir::new("sweep");
    let spec = dir.file(
        "spec.json",
        r#"{"axis": "n_targets", "points": [1, 8], "trials": 2, "anm": {"grid_step_deg": 0.05}}"#,
    );
    let (summary, detail) = (dir.path("s.csv"), dir.path("d.csv"));
    let o = run(&[&"sweep", &"--spec", &spec, &"--out", &summary, &"--detail", &detail, &"--jobs", &"2"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let s = read(&summary);
    assert_eq!(s.lines().count(), 5);
    assert!(s.contains("n_targets,8,MUSIC,,"));
    assert_eq!(read(&detail).lines().count(), 1 + 2 * 2 * 2);
}
