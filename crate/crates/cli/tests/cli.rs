use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const HEADER: &str = "s,eps,F_s,gagliardo_near,gagliardo_tail,gl_dirichlet,gl_potential,flat_dist,deg_boundary";

fn fraclab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fraclab")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn small_config(dir: &Path) -> String {
    let path = dir.join("small.cfg");
    fs::write(&path, "# coarse sweep\ngrid = 64\ns_list = 0.9, 0.95, 0.99\nrandom_fields = 2\nlemma_grid = 64\n").unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn flatnorm_of_a_unit_atom() {
    let o = fraclab(&["flatnorm", "--atoms", "(0,0):1", "--grid", "64"]);
    assert!(o.status.success());
    let out = stdout(&o);
    assert!(out.starts_with("flat_closed = 1 "), "{out}");
}

#[test]
fn flatnorm_open_dipole_writes_phi() {
    let dir = tempfile::tempdir().unwrap();
    let phi = dir.path().join("phi.vf2");
    let o = fraclab(&[
        "flatnorm",
        "--atoms",
        "(-0.3,0):1; (0.3,0):-1",
        "--grid",
        "48",
        "--variant",
        "open",
        "--phi",
        phi.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).starts_with("flat_open = "));
    assert!(fs::read(&phi).unwrap().starts_with(b"VF2\n48\n48\n"));
}

#[test]
fn bad_atoms_exit_with_status_2() {
    let o = fraclab(&["flatnorm", "--atoms", "(0,0):0"]);
    assert_eq!(o.status.code(), Some(2));
    let o = fraclab(&["flatnorm", "--atoms", "(9,9):1"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn config_errors_name_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.cfg");
    fs::write(&path, "grid = 64\nbogus = 1\n").unwrap();
    let o = fraclab(&["sweep", "--config", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("line 2") && err.contains("bogus"), "{err}");
    fs::write(&path, "s_list = 0.95, 0.9\n").unwrap();
    assert_eq!(fraclab(&["sweep", "--config", path.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn sweep_csv_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let out_dir = dir.path().join("out");
    let a = fraclab(&["sweep", "--config", &cfg, "--output", out_dir.to_str().unwrap()]);
    let b = fraclab(&["sweep", "--config", &cfg]);
    let (sa, sb) = (stdout(&a), stdout(&b));
    assert_eq!(sa.lines().next(), Some(HEADER));
    assert_eq!(sa, sb);
    let csv = fs::read_to_string(out_dir.join("sweep.csv")).unwrap();
    assert_eq!(csv.lines().count(), 4);
    assert!(sa.starts_with(&csv));
    let json: String = fs::read_to_string(out_dir.join("sweep.json")).unwrap();
    assert!(json.contains("\"F_s\"") && json.contains("\"c_dprime_s\""));
    assert!(sa.contains("\nfit: F_s = "));
}

#[test]
fn field_dump_writes_a_raster() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let out = dir.path().join("u.vf2");
    let o = fraclab(&["field-dump", "--config", &cfg, "--s", "0.95", "--field", "u", "--output", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let bytes = fs::read(&out).unwrap();
    assert!(bytes.starts_with(b"VF2\n64\n64\n"));
    let o = fraclab(&["field-dump", "--config", &cfg, "--s", "1.5", "--output", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn selftest_passes() {
    let o = fraclab(&["selftest"]);
    assert!(o.status.success(), "{}", stdout(&o));
    assert!(stdout(&o).lines().all(|l| l.starts_with("[PASS]")));
}
