use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn ltae(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ltae"))
        .args(args)
        .current_dir(dir)
        .output()
        .unwrap()
}

fn json(out: &Output) -> Value {
    assert!(
        out.status.success(),
        "exit {:?}: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn prepare(dir: &Path) {
    for (preset, seed, name) in [
        ("rest", "1", "rest.csv"),
        ("low", "2", "low.csv"),
        ("high", "3", "high.csv"),
    ] {
        json(&ltae(
            dir,
            &[
                "synth",
                "--preset",
                preset,
                "--duration",
                "20",
                "--seed",
                seed,
                "--out",
                name,
            ],
        ));
    }
    json(&ltae(
        dir,
        &[
            "train",
            "--data",
            "rest.csv",
            "--out",
            "m.ltae",
            "--max-epochs",
            "4",
        ],
    ));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();

    let out = ltae(d, &["synth", "--bogus-flag"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
    assert!(out.stdout.is_empty());
    assert_eq!(ltae(d, &[]).status.code(), Some(1));

    std::fs::write(d.join("bad.csv"), "Fp1,Fp2\n1,2\n3\n").unwrap();
    let out = ltae(d, &["train", "--data", "bad.csv", "--out", "x.ltae"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("row 2"));
    assert_eq!(
        ltae(d, &["inspect", "--model", "missing.ltae"])
            .status
            .code(),
        Some(2)
    );
    std::fs::write(d.join("cfg.json"), "{\"lr\": ").unwrap();
    json(&ltae(
        d,
        &[
            "synth",
            "--preset",
            "rest",
            "--duration",
            "5",
            "--out",
            "r.csv",
        ],
    ));
    assert_eq!(
        ltae(
            d,
            &["train", "--data", "r.csv", "--config", "cfg.json", "--out", "x.ltae"]
        )
        .status
        .code(),
        Some(2)
    );

    let out = ltae(
        d,
        &[
            "train",
            "--data",
            "r.csv",
            "--out",
            "x.ltae",
            "--lr",
            "50",
            "--momentum",
            "0",
            "--no-snr-floor",
        ],
    );
    assert_eq!(
        out.status.code(),
        Some(3),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(String::from_utf8_lossy(&out.stderr).contains("diverged"));
}

#[test]
fn pipeline_outputs_and_metadata() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    prepare(d);
    assert!(d.join("rest.meta.json").exists());

    let inspect = json(&ltae(d, &["inspect", "--model", "m.ltae"]));
    let log = std::fs::read_to_string(d.join("m.ltae.log.jsonl")).unwrap();
    assert_eq!(
        log.lines().count(),
        inspect["epochs"].as_u64().unwrap() as usize
    );
    let last: Value = serde_json::from_str(log.lines().last().unwrap()).unwrap();
    assert_eq!(
        inspect["final"]["max_deviation_deg"],
        last["max_deviation_deg"]
    );
    let tol = inspect["config"]["ortho"]["tolerance_deg"]
        .as_f64()
        .unwrap();
    let dev = last["max_deviation_deg"].as_f64().unwrap();
    assert_eq!(
        inspect["converged"].as_bool().unwrap(),
        dev <= tol && !last["curriculum"].as_bool().unwrap()
    );
    let hash = inspect["checkpoint_hash"].as_str().unwrap().to_string();

    let mut ratios = Vec::new();
    for ms in ["100", "6000"] {
        for cond in ["low", "high"] {
            let out = format!("{cond}_{ms}.csv");
            let meta = json(&ltae(
                d,
                &[
                    "track",
                    "--model",
                    "m.ltae",
                    "--resting",
                    "rest.csv",
                    "--task",
                    &format!("{cond}.csv"),
                    "--filter-ms",
                    ms,
                    "--out",
                    &out,
                    "--svg",
                    &format!("{cond}_{ms}.svg"),
                ],
            ));
            assert_eq!(meta["model_checkpoint_hash"], hash.as_str());
            assert_eq!(meta["condition_tag"], cond);
            assert_eq!(meta["samples"], 6000);
            let svg = std::fs::read_to_string(d.join(format!("{cond}_{ms}.svg"))).unwrap();
            assert!(svg.starts_with("<svg") && svg.contains(cond));
        }
        let report = json(&ltae(
            d,
            &[
                "compare",
                "--traj-a",
                &format!("low_{ms}.csv"),
                "--traj-b",
                &format!("high_{ms}.csv"),
                "--out",
                &format!("cmp_{ms}.json"),
                "--tag-a",
                "low",
                "--tag-b",
                "high",
            ],
        ));
        assert_eq!(report["condition_a"], "low");
        ratios.push(report["separation_ratio"].as_f64().unwrap());
    }
    assert!(ratios[1] >= ratios[0], "{ratios:?}");

    let enc = json(&ltae(
        d,
        &[
            "encode", "--model", "m.ltae", "--data", "low.csv", "--out", "z.csv",
        ],
    ));
    assert_eq!(enc["frames"], 6000);
    let z = std::fs::read_to_string(d.join("z.csv")).unwrap();
    assert_eq!(z.lines().next().unwrap(), "t_s,z0,z1,z2");
    assert_eq!(z.lines().count(), 6001);
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    json(&ltae(
        d,
        &[
            "synth",
            "--preset",
            "rank3",
            "--duration",
            "5",
            "--out",
            "r.csv",
        ],
    ));
    std::fs::write(
        d.join("cfg.json"),
        r#"{"max_epochs": 7, "seed": 3, "lr": 0.0005}"#,
    )
    .unwrap();
    let out = json(&ltae(
        d,
        &[
            "train",
            "--data",
            "r.csv",
            "--config",
            "cfg.json",
            "--max-epochs",
            "2",
            "--out",
            "m.ltae",
        ],
    ));
    assert_eq!(out["epochs"], 2);
    let inspect = json(&ltae(d, &["inspect", "--model", "m.ltae"]));
    assert_eq!(inspect["config"]["seed"], 3);
    assert_eq!(inspect["config"]["lr"], 0.0005);
    assert_eq!(inspect["config"]["max_epochs"], 2);
}

#[test]
fn synth_from_spec_file() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let spec = ltae::signal::SynthesisSpec::benchmark("high", 1.0);
    std::fs::write(d.join("s.json"), serde_json::to_string(&spec).unwrap()).unwrap();
    let a = json(&ltae(
        d,
        &["synth", "--spec", "s.json", "--seed", "9", "--out", "a.csv"],
    ));
    json(&ltae(
        d,
        &["synth", "--spec", "s.json", "--seed", "9", "--out", "b.csv"],
    ));
    assert_eq!(a["condition"], "high");
    assert_eq!(a["frames"], 300);
    assert_eq!(
        std::fs::read(d.join("a.csv")).unwrap(),
        std::fs::read(d.join("b.csv")).unwrap()
    );
}
