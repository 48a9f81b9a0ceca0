use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_gaze-ident"));
    c.env_remove("GAZE_IDENT_JOBS");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn gaze-ident")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn synth(dir: &Path, users: &str, secs: &str) {
    let o = run(&[
        "synth",
        "--users",
        users,
        "--duration",
        secs,
        "--seed",
        "5",
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
}

#[test]
fn synth_then_identify() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    synth(&data, "4", "40");
    let out = tmp.path().join("result.json");
    let o = run(&[
        "identify",
        data.to_str().unwrap(),
        "--seeds",
        "0..2",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let line = stdout(&o);
    let (mean, sd) = line.trim().split_once(" ± ").expect("mean ± sd");
    assert!(mean.parse::<f64>().unwrap() >= 75.0, "{line}");
    assert!(sd.parse::<f64>().is_ok());

    // The resolved configuration goes to stderr as JSON.
    let cfg: serde_json::Value = serde_json::from_str(stderr(&o).lines().next().unwrap()).unwrap();
    assert_eq!(cfg["command"], "identify");
    assert_eq!(cfg["config"]["seeds"], serde_json::json!([0, 1, 2]));
    assert_eq!(cfg["config"]["ivt"]["vt_deg_per_s"], 90.0);

    let result: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out).unwrap()).unwrap();
    assert_eq!(result["accuracies"].as_array().unwrap().len(), 3);
}

#[test]
fn unpaired_dataset_is_a_runtime_error() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    synth(&data, "3", "20");
    fs::remove_file(data.join("SYN/u02/S2.csv")).unwrap();
    let o = run(&["validate", data.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let err = stderr(&o);
    assert!(err.contains("error:") && err.contains("u02"), "{err}");
}

#[test]
fn usage_errors_exit_with_two() {
    for args in [
        &["identify", "--no-such-flag"][..],
        &["identify", "x", "--seeds", "9..3"],
        &["identify", "x", "--level", "6"],
        &["identify", "x", "--anchor", "middle"],
        &["identify", "x", "--seed", "1", "--seeds", "0..3"],
        &["frobnicate"],
    ] {
        assert_eq!(run(args).status.code(), Some(2), "{args:?}");
    }
}

#[test]
fn invalid_values_exit_with_one() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    synth(&data, "3", "20");
    let d = data.to_str().unwrap();
    for args in [
        &["identify", d, "--vt=-5", "--seed", "0"][..],
        &["identify", d, "--sg-frame", "14", "--seed", "0"],
        &[
            "resample",
            d,
            "--rate",
            "400",
            "--out",
            tmp.path().join("r").to_str().unwrap(),
        ],
        &["validate", tmp.path().join("missing").to_str().unwrap()],
    ] {
        let o = run(args);
        assert_eq!(o.status.code(), Some(1), "{args:?}: {}", stderr(&o));
        assert!(stderr(&o).contains("error:"));
    }
}

#[test]
fn outputs_are_byte_identical_across_runs() {
    let tmp = tempfile::tempdir().unwrap();
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    synth(&a, "3", "30");
    synth(&b, "3", "30");
    for rel in [
        "manifest.json",
        "SYN/u01/S1.csv",
        "SYN/u03/S2.csv",
        "ground_truth/profiles.json",
    ] {
        assert_eq!(
            fs::read(a.join(rel)).unwrap(),
            fs::read(b.join(rel)).unwrap(),
            "{rel}"
        );
    }
    let d = a.to_str().unwrap();
    let outs: Vec<Vec<u8>> = ["one", "two"]
        .iter()
        .map(|tag| {
            let csv = tmp.path().join(format!("{tag}.csv"));
            let json = tmp.path().join(format!("{tag}.json"));
            let o = run(&[
                "sweep-derivatives",
                d,
                "--seeds",
                "0,1",
                "--out",
                csv.to_str().unwrap(),
                "--json",
                json.to_str().unwrap(),
            ]);
            assert!(o.status.success(), "{}", stderr(&o));
            let mut bytes = fs::read(csv).unwrap();
            bytes.extend(fs::read(json).unwrap());
            bytes
        })
        .collect();
    assert_eq!(outs[0], outs[1]);
}

#[test]
fn jobs_flag_does_not_change_results() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    synth(&data, "3", "30");
    let d = data.to_str().unwrap();
    let one = run(&["identify", d, "--seeds", "0..3", "--jobs", "1"]);
    let env = bin()
        .args(["identify", d, "--seeds", "0..3"])
        .env("GAZE_IDENT_JOBS", "2")
        .output()
        .unwrap();
    assert!(one.status.success() && env.status.success());
    assert_eq!(one.stdout, env.stdout);
}

#[test]
fn sweep_derivatives_table() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    synth(&data, "3", "30");
    let csv = tmp.path().join("sweep.csv");
    let o = run(&[
        "sweep-derivatives",
        data.to_str().unwrap(),
        "--seed",
        "0",
        "--out",
        csv.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = fs::read_to_string(csv).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "level,n_features,mean,sd");
    assert_eq!(lines.len(), 7);
    let counts: Vec<&str> = lines[1..]
        .iter()
        .map(|l| l.split(',').nth(1).unwrap())
        .collect();
    assert_eq!(counts, ["15", "33", "51", "69", "87", "105"]);
    let table = stdout(&o);
    for name in ["Position (0)", "Velocity (1)", "Crackle (5)"] {
        assert!(table.contains(name), "{table}");
    }
}

#[test]
fn file_writing_subcommands() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    synth(&data, "3", "20");
    let d = data.to_str().unwrap();
    let p = |name: &str| tmp.path().join(name).to_str().unwrap().to_string();

    let seg = p("seg");
    assert!(run(&["segment", d, "--out", &seg]).status.success());
    let first = fs::read_to_string(tmp.path().join("seg/SYN/u01/S1.csv")).unwrap();
    assert!(first.starts_with("kind,start_idx,end_idx,duration_s\n"));
    assert_eq!(run(&["segment", d, "--out", &seg]).status.code(), Some(1));
    assert!(run(&["segment", d, "--out", &seg, "--force"])
        .status
        .success());

    let feats = p("f.csv");
    assert!(run(&["features", d, "--level", "1", "--out", &feats])
        .status
        .success());
    let header = fs::read_to_string(&feats)
        .unwrap()
        .lines()
        .next()
        .unwrap()
        .to_string();
    assert_eq!(header.split(',').count(), 3 + 33);

    let rank = p("rank.csv");
    assert!(run(&["rank-features", d, "--level", "0", "--out", &rank])
        .status
        .success());
    assert_eq!(fs::read_to_string(&rank).unwrap().lines().count(), 1 + 30);

    let dur = p("dur.csv");
    assert!(run(&["duration-summary", d, "--out", &dur])
        .status
        .success());
    assert_eq!(fs::read_to_string(&dur).unwrap().lines().count(), 4);

    let vt = p("vt.csv");
    assert!(run(&["sweep-vt", d, "--out", &vt]).status.success());
    assert_eq!(fs::read_to_string(&vt).unwrap().lines().count(), 151);

    let res = p("r100");
    assert!(run(&["resample", d, "--rate", "100", "--out", &res])
        .status
        .success());
    let o = run(&["validate", &res]);
    assert!(stdout(&o).contains("at 100 Hz"), "{}", stdout(&o));
}

#[test]
fn help_lists_defaults() {
    let o = run(&["identify", "--help"]);
    let text = stdout(&o);
    for default in [
        "[default: 90]",
        "[default: 0.096]",
        "[default: 0..49]",
        "[default: 5]",
        "[default: 32]",
    ] {
        assert!(text.contains(default), "missing {default}");
    }
}
