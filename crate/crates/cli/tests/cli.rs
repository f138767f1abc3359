use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use kglab_cli::output::fmt_f64;
use kglab_cli::pipeline::OUT_DIR_ENV;
use kglab_cli::registry;

fn kglab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kglab"))
        .args(args)
        .env_remove(OUT_DIR_ENV)
        .output()
        .expect("binary runs")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

const SMALL: &str = r#"
name = "small"
rng_seed = 9
pipeline = ["kg", "madelung", "hidden_phase", "trajectories", "residual-suite"]
outputs = ["fields", "madelung", "hidden_phase", "trajectories", "residuals"]

[physics]
c = 1.0

[grid]
nx = 64
length = 6.283185307179586
nt = 41
cfl = 0.5

[initial]
kind = "superposition"
modes = [{ amplitude = 1.0, k = 1.0 }, { amplitude = 0.3, k = -2.0 }]

[trajectories]
count = 1000
"#;

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn missing_grid_exits_2_and_names_grid() {
    let dir = tempfile::tempdir().unwrap();
    let start = SMALL.find("[grid]").unwrap();
    let end = SMALL.find("[initial]").unwrap();
    let text = format!("{}{}", &SMALL[..start], &SMALL[end..]);
    let out = kglab(&["run", &write(dir.path(), "bad.scn", &text)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("grid"), "{}", stderr(&out));
}

#[test]
fn missing_time_step_names_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let text = SMALL.replace("cfl = 0.5\n", "");
    let out = kglab(&["run", &write(dir.path(), "bad.scn", &text)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("grid: missing dt"), "{}", stderr(&out));
}

#[test]
fn unknown_key_reports_line() {
    let dir = tempfile::tempdir().unwrap();
    let text = SMALL.replace("nx = 64", "nx = 64\nnz = 3");
    let out = kglab(&["run", &write(dir.path(), "bad.scn", &text)]);
    assert_eq!(out.status.code(), Some(2));
    let err = stderr(&out);
    assert!(err.contains("line") && err.contains("nz"), "{err}");
}

#[test]
fn stage_order_is_checked() {
    let dir = tempfile::tempdir().unwrap();
    let text = SMALL.replace(
        r#"["kg", "madelung", "hidden_phase""#,
        r#"["kg", "hidden_phase", "madelung""#,
    );
    let out = kglab(&["run", &write(dir.path(), "bad.scn", &text)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("needs madelung"), "{}", stderr(&out));
}

#[test]
fn cfl_violation_exits_3_naming_the_bound() {
    let dir = tempfile::tempdir().unwrap();
    let text = SMALL.replace("cfl = 0.5", "cfl = 0.95");
    let out = kglab(&["run", &write(dir.path(), "fast.scn", &text)]);
    assert_eq!(out.status.code(), Some(3));
    assert!(stderr(&out).contains("CFL bound 0.9"), "{}", stderr(&out));
}

#[test]
fn divergence_exits_4_with_step() {
    let dir = tempfile::tempdir().unwrap();
    let text = SMALL.replace(
        "[initial]",
        "[potential]\nkind = \"uniform-e\"\ne0 = 1e300\n\n[initial]",
    );
    let out = kglab(&[
        "--out-dir",
        dir.path().to_str().unwrap(),
        "run",
        &write(dir.path(), "blow.scn", &text),
    ]);
    assert_eq!(out.status.code(), Some(4));
    assert!(stderr(&out).contains("at step"), "{}", stderr(&out));
}

#[test]
fn unknown_names_exit_2() {
    assert_eq!(kglab(&["describe", "no_such"]).status.code(), Some(2));
    assert_eq!(kglab(&["run", "no_such"]).status.code(), Some(2));
}

#[test]
fn list_and_describe() {
    let out = kglab(&["list"]);
    assert!(out.status.success());
    let names: Vec<String> = String::from_utf8(out.stdout)
        .unwrap()
        .lines()
        .map(String::from)
        .collect();
    assert!(names.len() >= 6, "{names:?}");
    assert_eq!(names, registry::list());
    let out = kglab(&["describe", "plane_wave"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(
        text.contains("k = 1.0") && text.contains("[grid]") && text.contains("nx = 64"),
        "{text}"
    );
}

#[test]
fn repeated_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let scn = write(dir.path(), "small.scn", SMALL);
    let read_all = |root: &Path| {
        let mut files: Vec<(String, Vec<u8>)> = fs::read_dir(root.join("small"))
            .unwrap()
            .map(|e| {
                let e = e.unwrap();
                (e.file_name().into_string().unwrap(), fs::read(e.path()).unwrap())
            })
            .collect();
        files.sort();
        files
    };
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for (root, threads) in [(&a, "1"), (&b, "3")] {
        let out = kglab(&["--out-dir", root.to_str().unwrap(), "--threads", threads, "run", &scn]);
        assert!(out.status.success(), "{}", stderr(&out));
    }
    let (fa, fb) = (read_all(&a), read_all(&b));
    assert_eq!(fa.len(), 6);
    assert_eq!(fa, fb);
}

#[test]
fn environment_sets_default_output_root() {
    let dir = tempfile::tempdir().unwrap();
    let scn = write(dir.path(), "small.scn", SMALL);
    let out = Command::new(env!("CARGO_BIN_EXE_kglab"))
        .args(["run", &scn])
        .env(OUT_DIR_ENV, dir.path().join("env-root"))
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(dir.path().join("env-root/small/manifest.toml").is_file());
}

#[test]
fn artifacts_round_trip_at_full_precision() {
    let dir = tempfile::tempdir().unwrap();
    let scn = write(dir.path(), "small.scn", SMALL);
    let out = kglab(&["--out-dir", dir.path().to_str().unwrap(), "run", &scn]);
    assert!(out.status.success(), "{}", stderr(&out));
    let run = dir.path().join("small");
    for (file, header) in [
        ("fields.csv", "t,x,kg_re,kg_im"),
        ("madelung.csv", "t,x,rho,s,node"),
        ("hidden_phase.csv", "t,x,phi,phi_t,vx,excluded"),
        ("trajectories.csv", "seed_id,t,x,vx"),
    ] {
        let text = fs::read_to_string(run.join(file)).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some(header), "{file}");
        let mut rows = 0;
        for line in lines {
            let cells: Vec<&str> = line.split(',').collect();
            assert_eq!(cells.len(), header.split(',').count());
            // every float re-renders to the identical text
            for cell in &cells[if file == "trajectories.csv" { 1 } else { 0 }..] {
                let x: f64 = cell.parse().unwrap();
                assert_eq!(&fmt_f64(x), cell, "{file}");
            }
            rows += 1;
        }
        let expected = if file == "trajectories.csv" { 1000 * 41 } else { 64 * 41 };
        assert_eq!(rows, expected, "{file}");
    }
    let manifest = fs::read_to_string(run.join("manifest.toml")).unwrap();
    let parsed: toml::Table = toml::from_str(&manifest).unwrap();
    for (file, digest) in parsed["artifacts"].as_table().unwrap() {
        let bytes = fs::read(run.join(file)).unwrap();
        assert_eq!(digest.as_str().unwrap(), kglab_cli::output::sha256_hex(&bytes));
    }
    assert!(!manifest.contains(dir.path().to_str().unwrap()), "no absolute paths");
}

#[test]
fn file_initial_data_matches_the_builtin_packet() {
    let dir = tempfile::tempdir().unwrap();
    let nx = 120;
    let dx = 24.0 / nx as f64;
    let mut csv = String::from("x,re,im\n");
    for i in 0..nx {
        let x = -12.0 + i as f64 * dx;
        let z = kglab_core::packets::gaussian(&[x], 0.5, 1.0, 0.5)[0];
        csv.push_str(&format!("{},{},{}\n", fmt_f64(x), fmt_f64(z.re), fmt_f64(z.im)));
    }
    fs::write(dir.path().join("psi.csv"), csv).unwrap();
    let base = |initial: &str| {
        format!(
            "name = \"g\"\npipeline = [\"schrodinger\"]\noutputs = [\"fields\"]\n[physics]\n[grid]\nnx = {nx}\nlength = 24.0\nnt = 11\ndt = 0.01\n{initial}"
        )
    };
    let runs = [
        ("file", base("[initial]\nkind = \"file\"\npath = \"psi.csv\"\n")),
        (
            "builtin",
            base("[initial]\nkind = \"gaussian\"\nx0 = 0.5\nsigma = 1.0\nk = 0.5\n"),
        ),
    ];
    let mut fields = Vec::new();
    for (tag, text) in runs {
        let scn = write(dir.path(), &format!("{tag}.scn"), &text);
        let root = dir.path().join(tag);
        let out = kglab(&["--out-dir", root.to_str().unwrap(), "run", &scn]);
        assert!(out.status.success(), "{tag}: {}", stderr(&out));
        fields.push(fs::read_to_string(root.join("g/fields.csv")).unwrap());
    }
    assert_eq!(fields[0], fields[1]);
}

#[test]
fn strict_profile_is_recorded() {
    let dir = tempfile::tempdir().unwrap();
    let scn = write(dir.path(), "small.scn", SMALL);
    let out = kglab(&[
        "--out-dir",
        dir.path().to_str().unwrap(),
        "--tolerance-profile",
        "strict",
        "run",
        &scn,
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let manifest = fs::read_to_string(dir.path().join("small/manifest.toml")).unwrap();
    assert!(manifest.contains("tolerance_profile = \"strict\""));
    assert!(
        manifest.contains("mass_shell_bound = 9.9999999999999998e-13"),
        "{manifest}"
    );
    assert_eq!(kglab(&["--tolerance-profile", "lax", "list"]).status.code(), Some(2));
}
