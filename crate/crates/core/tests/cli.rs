use std::fs;
use std::path::Path;
use std::process::Command;

fn defeatr(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_defeatr"))
        .args(args)
        .env("RUST_LOG", "error")
        .output()
        .unwrap()
}

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("run.cfg");
    fs::write(&path, text).unwrap();
    path.display().to_string()
}

#[test]
fn run_writes_csv_and_plots() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let config = write_config(dir.path(), "experiment = dd_shapes\nshapes = disk\nsizes = 0.25, 0.125\n");
    let status = defeatr(&["run", "--config", &config, "--out", out.to_str().unwrap()]);
    assert_eq!(status.status.code(), Some(0), "{}", String::from_utf8_lossy(&status.stderr));
    let csv = fs::read_to_string(out.join("dd_shapes.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
    assert!(out.join("dd_shapes_error_vs_size.svg").exists());
    assert!(out.join("dd_shapes_effectivity_vs_size.svg").exists());
}

#[test]
fn config_and_io_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write_config(dir.path(), "experiment = nonsense\n");
    assert_eq!(defeatr(&["run", "--config", &bad]).status.code(), Some(2));
    assert_eq!(defeatr(&["run", "--config", "/nonexistent.cfg"]).status.code(), Some(2));
    assert_eq!(defeatr(&["mesh-info", "/nonexistent.msh"]).status.code(), Some(2));
}

#[test]
fn mesh_info_reports_tags() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("tri.msh");
    fs::write(
        &path,
        "$MeshFormat\n2.2 0 8\n$EndMeshFormat\n$PhysicalNames\n2\n1 1 \"GammaD\"\n2 2 \"exterior\"\n$EndPhysicalNames\n\
         $Nodes\n3\n1 0 0 0\n2 1 0 0\n3 0 1 0\n$EndNodes\n$Elements\n2\n1 1 2 1 1 1 2\n2 2 2 2 2 1 2 3\n$EndElements\n",
    )
    .unwrap();
    let output = defeatr(&["mesh-info", path.to_str().unwrap()]);
    assert_eq!(output.status.code(), Some(0));
    let text = String::from_utf8(output.stdout).unwrap();
    assert!(text.contains("triangles  1"));
    assert!(text.contains("GammaD: 1 edges"));
}

#[test]
fn verify_exits_cleanly() {
    let output = defeatr(&["verify"]);
    assert_eq!(output.status.code(), Some(0));
    let text = String::from_utf8(output.stdout).unwrap();
    assert!(text.lines().all(|l| l.starts_with("PASS ")));
}
