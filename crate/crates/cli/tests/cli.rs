use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn lodhelm(sub: &str, config: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lodhelm"))
        .args([sub, "--config"])
        .arg(config)
        .env("LODHELM_WORKERS", "2")
        .output()
        .unwrap()
}

fn write_config(dir: &Path, name: &str, body: &str) -> std::path::PathBuf {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p
}

#[test]
fn empty_layer_list_exits_with_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "bad.cfg", "m =\n");
    let out = lodhelm("converge", &cfg);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("lodhelm:"));
    let missing = lodhelm("converge", &dir.path().join("nope.cfg"));
    assert_eq!(missing.status.code(), Some(2));
}

#[test]
fn converge_is_byte_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let body = "geometry = mie_square\nk = 9\ncoarse_levels = 2, 3\nfine_level = 5\nm = 1, 2\n";
    let a = write_config(dir.path(), "a.cfg", &format!("{body}output_dir = a\n"));
    let b = write_config(dir.path(), "b.cfg", &format!("{body}output_dir = b\nworkers = 1\n"));
    assert!(lodhelm("converge", &a).status.success());
    assert!(lodhelm("converge", &b).status.success());
    for name in ["converge_LOD_full.csv", "converge_LOD_coarse.csv", "converge_P1FEM.csv", "converge_P1_best.csv"] {
        let x = fs::read(dir.path().join("a").join(name)).unwrap();
        let y = fs::read(dir.path().join("b").join(name)).unwrap();
        assert_eq!(x, y, "{name}");
    }
    let lod = fs::read_to_string(dir.path().join("a/converge_LOD_full.csv")).unwrap();
    assert_eq!(lod.lines().count(), 1 + 4);
}

#[test]
fn solve_homogeneous_medium_is_finite() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "solve.cfg",
        "geometry = constant_one\nepsilon_exponent = 2\nk = 2\nsource = 0.5, 0.5\ncoarse_levels = 3\nfine_level = 6\nm = 2\noutput_dir = fields\n",
    );
    let out = lodhelm("solve", &cfg);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let listed = String::from_utf8_lossy(&out.stdout);
    assert!(listed.lines().any(|l| l.ends_with("fields.vtk")));
    for name in ["u_lod.csv", "u_coarse.csv", "u_ref.csv"] {
        let text = fs::read_to_string(dir.path().join("fields").join(name)).unwrap();
        for line in text.lines().skip(1) {
            for v in line.split(',') {
                assert!(v.parse::<f64>().unwrap().is_finite(), "{name}: {line}");
            }
        }
    }
}

#[test]
fn decay_reports_contraction() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "decay.cfg",
        "coarse_levels = 3\nfine_level = 6\nm_max = 3\noutput_dir = d\n",
    );
    let out = lodhelm("decay", &cfg);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(dir.path().join("d/decay.csv")).unwrap();
    let rows: Vec<Vec<&str>> = text.lines().skip(1).map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 4);
    let beta: f64 = rows[0][4].parse().unwrap();
    assert!(beta > 0.0 && beta < 1.0);
    let bad = write_config(dir.path(), "bad.cfg", "coarse_levels = 3\nfine_level = 6\nelement = 100000\n");
    assert_eq!(lodhelm("decay", &bad).status.code(), Some(2));
}
