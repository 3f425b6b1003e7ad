//! Runs the `curvflow` binary end to end.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn curvflow(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_curvflow"))
        .current_dir(dir)
        .args(args)
        .output()
        .unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

const TORUS: &str = "mesh = flat_torus:8\nprescription = harmonic1:0.5\nflow.grad_tol = 1e-7\n";

#[test]
fn gen_writes_a_mesh_and_rejects_bad_parameters() {
    let dir = tempfile::tempdir().unwrap();
    let out = curvflow(dir.path(), &["gen", "pillowcase", "4", "p.mesh"]);
    assert_eq!(code(&out), 0, "{out:?}");
    let text = fs::read_to_string(dir.path().join("p.mesh")).unwrap();
    assert!(text.starts_with("conical-mesh 1\n"));

    assert_eq!(code(&curvflow(dir.path(), &["gen", "flat_torus", "2", "t.mesh"])), 1);
    assert_eq!(code(&curvflow(dir.path(), &["gen", "klein_bottle", "4", "k.mesh"])), 1);
    assert!(!dir.path().join("t.mesh").exists());
}

#[test]
fn uniformize_writes_the_rescaled_mesh() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(
        code(&curvflow(
            dir.path(),
            &["gen", "cone_sphere", "1:-0.9,-0.9,-0.9", "c.mesh"]
        )),
        0
    );
    let out = curvflow(dir.path(), &["uniformize", "c.mesh", "u.mesh"]);
    assert_eq!(code(&out), 0, "{out:?}");
    assert!(stdout(&out).contains("kappa_bar = -"));
    let text = fs::read_to_string(dir.path().join("u.mesh")).unwrap();
    assert!(text.contains("# curvature_deviation = "));

    assert_eq!(
        code(&curvflow(dir.path(), &["uniformize", "missing.mesh", "x.mesh"])),
        1
    );
}

#[test]
fn solve_then_verify() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("run.cfg"), TORUS).unwrap();
    let out = curvflow(dir.path(), &["solve", "run.cfg"]);
    assert_eq!(code(&out), 0, "{out:?}");
    assert!(dir.path().join("out/report.txt").exists());

    assert_eq!(code(&curvflow(dir.path(), &["gen", "flat_torus", "8", "t.mesh"])), 0);

    let pass = curvflow(
        dir.path(),
        &[
            "verify",
            "t.mesh",
            "out/final_state.csv",
            "--prescription",
            "harmonic1:0.5",
        ],
    );
    assert_eq!(code(&pass), 0, "{}", stdout(&pass));
    assert!(stdout(&pass).contains("verdict = pass"));

    let zero: String = (0..64).map(|i| format!("{i},0\n")).collect();
    fs::write(dir.path().join("zero.csv"), zero).unwrap();
    let fail = curvflow(
        dir.path(),
        &["verify", "t.mesh", "zero.csv", "--prescription", "harmonic1:0.5"],
    );
    assert_eq!(code(&fail), 2);
    assert!(stdout(&fail).contains("verdict = fail"));

    fs::write(dir.path().join("short.csv"), "0,0\n1,0\n").unwrap();
    let short = curvflow(
        dir.path(),
        &["verify", "t.mesh", "short.csv", "--prescription", "harmonic1:0.5"],
    );
    assert_eq!(code(&short), 1);
}

#[test]
fn solve_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("incompatible.cfg"),
        "mesh = flat_torus:6\nprescription = constant:1\n",
    )
    .unwrap();
    fs::write(
        dir.path().join("bad.cfg"),
        format!("{TORUS}flow.dt_min = 1\nflow.dt_initial = 0.1\n"),
    )
    .unwrap();
    assert_eq!(code(&curvflow(dir.path(), &["solve", "incompatible.cfg"])), 3);
    assert!(dir.path().join("out/report.txt").exists());
    assert_eq!(code(&curvflow(dir.path(), &["solve", "bad.cfg"])), 1);
    assert_eq!(code(&curvflow(dir.path(), &["solve", "absent.cfg"])), 1);
    assert_eq!(
        code(&curvflow(dir.path(), &["solve", "bad.cfg", "incompatible.cfg"])),
        1
    );
}

#[test]
fn sweep_runs_each_config_into_its_own_directory() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("a.cfg"), format!("{TORUS}output_dir = a\n")).unwrap();
    fs::write(
        dir.path().join("b.cfg"),
        "mesh = pillowcase:4\nprescription = harmonic1:0.5\nflow.grad_tol = 1e-7\noutput_dir = b\n",
    )
    .unwrap();
    fs::write(
        dir.path().join("c.cfg"),
        "mesh = flat_torus:6\nprescription = constant:1\noutput_dir = c\n",
    )
    .unwrap();
    fs::write(
        dir.path().join("clash.cfg"),
        format!("{TORUS}output_dir = a\nflow.t_max = 50\n"),
    )
    .unwrap();

    let out = curvflow(dir.path(), &["solve", "--sweep", "a.cfg", "b.cfg"]);
    assert_eq!(code(&out), 0, "{out:?}");
    for d in ["a", "b"] {
        assert!(dir.path().join(d).join("final_state.csv").exists());
    }
    // the worst outcome wins
    assert_eq!(code(&curvflow(dir.path(), &["solve", "--sweep", "a.cfg", "c.cfg"])), 3);
    assert_eq!(
        code(&curvflow(dir.path(), &["solve", "--sweep", "a.cfg", "clash.cfg"])),
        1
    );
}
