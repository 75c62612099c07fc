use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use svmcut::data::{load_svmlight, GroupStructure};
use tempfile::TempDir;

fn svmcut(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_svmcut"))
        .args(args)
        .env_remove("SVMCUT_JOBS")
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn records(out: &Output) -> Vec<Value> {
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout.clone())
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-12)
}

const SYNTH: &str = "n=80,p=300,k0=5,rho=0.1";

#[test]
fn full_and_combined_generation_agree() {
    let full = records(&svmcut(&["solve", "--synth", SYNTH, "--seed", "4", "--strategy", "full"]));
    for init in ["corr", "fo", "sfo", "random", "path"] {
        let cc = records(&svmcut(&[
            "solve", "--synth", SYNTH, "--seed", "4", "--strategy", "colcon", "--init", init,
        ]));
        let (a, b) = (cc[0]["objective"].as_f64().unwrap(), full[0]["objective"].as_f64().unwrap());
        assert!(rel(a, b) <= 1e-3, "init {init}: {a} vs {b}");
        assert_eq!(cc[0]["certified"], Value::Bool(true));
    }
}

#[test]
fn above_lambda_max_gives_empty_beta() {
    let dir = TempDir::new().unwrap();
    let sol = dir.path().join("z.sol");
    for model in [["--model", "l1"], ["--model", "group"]] {
        let out = svmcut(&[
            "solve", model[0], model[1], "--synth", "n=40,groups=20x5,k0=2", "--lambda-frac", "1.5", "--out",
            path_str(&sol),
        ]);
        assert_eq!(code(&out), 0);
        let text = std::fs::read_to_string(&sol).unwrap();
        assert_eq!(text.lines().count(), 1, "{text}");
        assert!(text.starts_with("b0:"));
    }
    let out = svmcut(&[
        "solve", "--model", "slope", "--slope-weights", "bh-log", "--synth", "n=30,p=12", "--lambda-frac", "1.5",
        "--out", path_str(&sol),
    ]);
    assert_eq!(code(&out), 0);
    assert!(std::fs::read_to_string(&sol).unwrap().starts_with("b0:"));
}

#[test]
fn usage_errors_exit_with_one() {
    let dir = TempDir::new().unwrap();
    let missing = dir.path().join("missing.svm");
    let cases: Vec<Vec<&str>> = vec![
        vec!["solve", "--model", "slope", "--synth", SYNTH],
        vec!["solve", "--synth", SYNTH, "--lambda", "1", "--lambda-frac", "0.1"],
        vec!["solve", "--synth", SYNTH, "--data", "x.svm"],
        vec!["solve", "--data", path_str(&missing)],
        vec!["solve"],
        vec!["solve", "--synth", "n=10"],
        vec!["solve", "--model", "group", "--synth", SYNTH],
        vec!["solve", "--model", "slope", "--slope-weights", "bh-log", "--synth", SYNTH, "--strategy", "congen"],
        vec!["solve", "--synth", SYNTH, "--epsilon", "0"],
        vec!["solve", "--synth", SYNTH, "--strategy", "simplex"],
        vec!["frobnicate"],
    ];
    for args in cases {
        let out = svmcut(&args);
        assert_eq!(code(&out), 1, "{args:?}");
        assert!(!out.stderr.is_empty());
    }
    assert_eq!(code(&svmcut(&["--help"])), 0);
}

#[test]
fn eval_reproduces_every_emitted_objective() {
    let dir = TempDir::new().unwrap();
    let sol = dir.path().join("s.sol");
    let runs: Vec<Vec<&str>> = vec![
        vec!["--model", "l1", "--synth", SYNTH, "--strategy", "colgen"],
        vec!["--model", "l1", "--synth", SYNTH, "--strategy", "congen", "--init", "sfo"],
        vec!["--model", "group", "--synth", "n=60,groups=30x4,k0=3", "--strategy", "colcon", "--init", "fo"],
        vec!["--model", "slope", "--slope-weights", "two-level:3", "--synth", "n=40,p=20", "--strategy", "colcon"],
        vec!["--model", "slope", "--slope-weights", "bh-log", "--synth", "n=40,p=20", "--strategy", "full"],
    ];
    for problem in runs {
        let mut args = vec!["solve", "--seed", "7", "--out", path_str(&sol)];
        args.extend(&problem);
        let rec = records(&svmcut(&args));
        let lambda = rec[0]["lambda"].as_f64().unwrap().to_string();
        let mut eval = vec!["eval", "--seed", "7", "--solution", path_str(&sol), "--lambda", &lambda];
        let strat = problem.iter().position(|a| *a == "--strategy").unwrap();
        eval.extend(&problem[..strat]);
        let ev = records(&svmcut(&eval));
        let (a, b) = (ev[0]["objective"].as_f64().unwrap(), rec[0]["objective"].as_f64().unwrap());
        assert!(rel(a, b) <= 1e-6, "{problem:?}: eval {a} vs record {b}");
        assert_eq!(ev[0]["nonzeros"], rec[0]["nonzeros"]);
    }
}

#[test]
fn path_writes_one_record_per_point() {
    let dir = TempDir::new().unwrap();
    let single = records(&svmcut(&["path", "--synth", SYNTH, "--points", "1"]));
    assert_eq!(single.len(), 1);
    assert_eq!(single[0]["nonzeros"], 0);
    assert_eq!(single[0]["lambda"], single[0]["lambda_max"]);

    let out_dir = dir.path().join("sols");
    let recs = records(&svmcut(&[
        "path", "--synth", SYNTH, "--points", "6", "--ratio", "0.5", "--out", path_str(&out_dir),
    ]));
    assert_eq!(recs.len(), 6);
    for (k, r) in recs.iter().enumerate() {
        assert_eq!(r["point"], k);
        let file = out_dir.join(format!("point-{k:03}.sol"));
        let ev = records(&svmcut(&[
            "eval", "--synth", SYNTH, "--solution", path_str(&file), "--lambda", &r["lambda"].to_string(),
        ]));
        assert!(rel(ev[0]["objective"].as_f64().unwrap(), r["objective"].as_f64().unwrap()) <= 1e-6);
    }
    let lambdas: Vec<f64> = recs.iter().map(|r| r["lambda"].as_f64().unwrap()).collect();
    for w in lambdas.windows(2) {
        assert!((w[1] / w[0] - 0.5).abs() < 1e-12);
    }
}

fn table_lines(out: &Output) -> Vec<String> {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout.clone()).unwrap().lines().map(String::from).collect()
}

#[test]
fn bench_single_method_and_replay() {
    let dir = TempDir::new().unwrap();
    let metrics = dir.path().join("m.jsonl");
    let out = svmcut(&[
        "bench", "--synth", "n=40,p=60", "--reps", "3", "--methods", "colgen", "--metrics", path_str(&metrics),
    ]);
    let lines = table_lines(&out);
    assert_eq!(lines.len(), 2);
    assert!(lines[1].contains("0.000 (0.000)"), "{}", lines[1]);
    let replay = table_lines(&svmcut(&["bench", "--replay", path_str(&metrics)]));
    assert_eq!(lines, replay);
    let recs: Vec<Value> = std::fs::read_to_string(&metrics)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(recs.len(), 3);
    let seeds: Vec<u64> = recs.iter().map(|r| r["seed"].as_u64().unwrap()).collect();
    assert_eq!(seeds, vec![0, 1, 2]);
}

#[test]
fn bench_is_independent_of_job_count() {
    let dir = TempDir::new().unwrap();
    let run = |jobs: &str, name: &str| {
        let m = dir.path().join(name);
        let out = Command::new(env!("CARGO_BIN_EXE_svmcut"))
            .args([
                "bench", "--synth", "n=40,p=80", "--reps", "4", "--methods", "full,colgen:0.5,colcon", "--init", "sfo",
                "--points", "3", "--metrics", path_str(&m),
            ])
            .env("SVMCUT_JOBS", jobs)
            .output()
            .unwrap();
        assert!(out.status.success());
        let objs: Vec<(String, u64, u64, f64)> = std::fs::read_to_string(&m)
            .unwrap()
            .lines()
            .map(|l| {
                let v: Value = serde_json::from_str(l).unwrap();
                (
                    v["method"].as_str().unwrap().to_string(),
                    v["rep"].as_u64().unwrap(),
                    v["point"].as_u64().unwrap(),
                    v["objective"].as_f64().unwrap(),
                )
            })
            .collect();
        objs
    };
    let one = run("1", "a.jsonl");
    assert_eq!(one.len(), 4 * 3 * 3);
    assert_eq!(one, run("4", "b.jsonl"));
}

#[test]
fn synth_round_trip() {
    let dir = TempDir::new().unwrap();
    let data = dir.path().join("d.svm");
    let groups = dir.path().join("g.txt");
    let out = svmcut(&[
        "synth", "--spec", "n=31,groups=6x4,k0=2", "--seed", "5", "--out", path_str(&data), "--groups-out",
        path_str(&groups),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let d = load_svmlight(&data, Some(24)).unwrap();
    assert_eq!((d.n(), d.p()), (31, 24));
    assert_eq!(d.class_counts(), (16, 15));
    let g = GroupStructure::load(&groups, 24).unwrap();
    assert_eq!(g, GroupStructure::contiguous(6, 4));

    // Solving from the written files matches solving the in-memory instance.
    let from_file = records(&svmcut(&[
        "solve", "--model", "group", "--data", path_str(&data), "--dim", "24", "--groups", path_str(&groups),
        "--strategy", "full",
    ]));
    let in_memory = records(&svmcut(&[
        "solve", "--model", "group", "--synth", "n=31,groups=6x4,k0=2", "--seed", "5", "--strategy", "full",
    ]));
    let (a, b) = (from_file[0]["objective"].as_f64().unwrap(), in_memory[0]["objective"].as_f64().unwrap());
    assert!(rel(a, b) <= 1e-9, "{a} vs {b}");
    assert_eq!(code(&svmcut(&["synth", "--spec", "n=10,p=5", "--out", path_str(&data), "--groups-out", path_str(&groups)])), 1);
}

#[test]
fn config_file_supplies_defaults() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "# defaults\nsynth = n=40,p=50\nstrategy = colcon\nepsilon = 0.05\nlambda-frac = 0.2\n").unwrap();
    let rec = records(&svmcut(&["solve", "--config", path_str(&cfg)]));
    assert_eq!(rec[0]["strategy"], "colcon");
    assert_eq!(rec[0]["epsilon"], 0.05);
    let frac = rec[0]["lambda"].as_f64().unwrap() / rec[0]["lambda_max"].as_f64().unwrap();
    assert!((frac - 0.2).abs() < 1e-12);
    let rec = records(&svmcut(&["solve", "--config", path_str(&cfg), "--epsilon", "0.5", "--lambda", "1.5"]));
    assert_eq!(rec[0]["epsilon"], 0.5);
    assert_eq!(rec[0]["lambda"], 1.5);

    std::fs::write(&cfg, "synth = n=40,p=50\nstratgy = full\n").unwrap();
    assert_eq!(code(&svmcut(&["solve", "--config", path_str(&cfg)])), 1);
}

#[test]
fn metrics_file_is_appended() {
    let dir = TempDir::new().unwrap();
    let m = dir.path().join("m.jsonl");
    for _ in 0..2 {
        let out = svmcut(&["solve", "--synth", "n=30,p=20", "--metrics", path_str(&m)]);
        assert_eq!(code(&out), 0);
        assert!(out.stdout.is_empty());
    }
    assert_eq!(std::fs::read_to_string(&m).unwrap().lines().count(), 2);
}

#[test]
fn round_limit_is_flagged_with_exit_two() {
    let out = svmcut(&[
        "solve", "--synth", SYNTH, "--strategy", "colgen", "--init-size", "1", "--max-outer", "1", "--epsilon", "1e-6",
    ]);
    assert_eq!(code(&out), 2, "{}", String::from_utf8_lossy(&out.stderr));
    let rec: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(rec["certified"], Value::Bool(false));
}
