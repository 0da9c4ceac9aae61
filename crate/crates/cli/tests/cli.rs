use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_lka"))
}

fn cookbook(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../docs/cookbook")
        .join(name)
}

fn scratch(tag: &str) -> PathBuf {
    let d = std::env::temp_dir().join(format!("lka-cli-{}-{tag}", std::process::id()));
    let _ = std::fs::remove_dir_all(&d);
    std::fs::create_dir_all(&d).unwrap();
    d
}

fn run(config: &Path, out: &Path, extra: &[&str]) -> Output {
    bin()
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .args(extra)
        .env_remove("LKA_THREADS")
        .output()
        .unwrap()
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let p = dir.join("config.json");
    std::fs::write(&p, text).unwrap();
    p
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn limits_for_eight_worlds() {
    let out = scratch("limits");
    let o = run(&cookbook("limits.json"), &out, &["--no-timestamp"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let stdout = String::from_utf8(o.stdout).unwrap();
    assert_eq!(stdout.lines().count(), 1);
    assert!(stdout.contains("PASS"));
    let doc = json(&out.join("limits.json"));
    assert_eq!(doc["result"]["n_required"], 3);
    let p: Vec<f64> = doc["result"]["P_x0"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_f64().unwrap())
        .collect();
    assert_eq!(p.len(), 8);
    assert!(p.iter().all(|&v| v >= 1.0 - 1e-9));
    assert!(doc["result"]["pigeonhole"]["bound"].as_f64().unwrap() <= 0.5);
    assert_eq!(doc["version"], lka_cli::VERSION);
    assert_eq!(doc["config"]["d"], 8);
    assert!(doc.get("timestamp").is_none());
}

#[test]
fn poll_cookbook_shows_all_three_estimates() {
    let out = scratch("poll");
    let o = run(&cookbook("poll.json"), &out, &["--no-timestamp"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(out.join("scenario.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "run,scenario,seed,N_or_m,replicate,quantity,value"
    );
    let seen: BTreeSet<String> = lines
        .filter(|l| l.split(',').nth(5) == Some("muHat"))
        .map(|l| {
            let v: f64 = l.split(',').nth(6).unwrap().parse().unwrap();
            format!("{v}")
        })
        .collect();
    let expected: BTreeSet<String> = ["0", "0.4", "1"].iter().map(|s| s.to_string()).collect();
    assert_eq!(seen, expected);
}

#[test]
fn malformed_poll_exits_with_two() {
    let out = scratch("bad-poll");
    let cfg = write_config(
        &out,
        r#"{"command":"scenario","seed":1,"scenario":"poll","d":6,"h":6,"eps":0.2,"x0":1,"N":5}"#,
    );
    let o = run(&cfg, &out, &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("h must be < d"));
    assert!(!out.join("scenario.json").exists());
}

#[test]
fn missing_seed_and_fields_exit_with_two() {
    let out = scratch("no-seed");
    let cfg = write_config(&out, r#"{"command":"limits","d":4}"#);
    let o = run(&cfg, &out, &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("seed"));
    // the flag supplies it
    assert!(run(&cfg, &out, &["--seed", "3"]).status.success());

    let cfg = write_config(&out, r#"{"command":"fit","seed":1,"features":[[0],[1]]}"#);
    let o = run(&cfg, &out, &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("target"));

    let cfg = write_config(&out, r#"{"command":"nope","seed":1}"#);
    assert_eq!(run(&cfg, &out, &[]).status.code(), Some(2));
}

#[test]
fn infeasible_fit_exits_with_three() {
    let out = scratch("infeasible");
    let cfg = write_config(
        &out,
        r#"{"command":"fit","seed":1,"features":[[0],[1]],"target":[2.0]}"#,
    );
    let o = run(&cfg, &out, &[]);
    assert_eq!(
        o.status.code(),
        Some(3),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    assert!(String::from_utf8_lossy(&o.stderr).contains("numerical failure"));
}

#[test]
fn singular_expansion_exits_with_three() {
    let out = scratch("singular");
    let cfg = write_config(
        &out,
        r#"{"command":"secondary","mode":"expansion","seed":1,"features":[[1],[1]],"truth":[0],
            "lambda":[0.0],"mList":[50,100],"R":500}"#,
    );
    assert_eq!(run(&cfg, &out, &[]).status.code(), Some(3));
}

#[test]
fn reruns_are_byte_identical() {
    let a = scratch("det-a");
    let b = scratch("det-b");
    for (name, file) in [("poll.json", "scenario"), ("synthetic.json", "asymptotics")] {
        assert!(
            run(&cookbook(name), &a, &["--no-timestamp", "--threads", "1"])
                .status
                .success()
        );
        assert!(
            run(&cookbook(name), &b, &["--no-timestamp", "--threads", "0"])
                .status
                .success()
        );
        for ext in ["json", "csv"] {
            let x = std::fs::read(a.join(format!("{file}.{ext}"))).unwrap();
            let y = std::fs::read(b.join(format!("{file}.{ext}"))).unwrap();
            assert!(x == y, "{name} {ext} differs");
        }
    }
}

#[test]
fn timestamp_is_the_only_difference() {
    let a = scratch("ts-a");
    let b = scratch("ts-b");
    assert!(run(&cookbook("lka.json"), &a, &[]).status.success());
    assert!(run(&cookbook("lka.json"), &b, &["--no-timestamp"])
        .status
        .success());
    let mut x = json(&a.join("lka.json"));
    let y = json(&b.join("lka.json"));
    assert!(x["timestamp"].as_u64().unwrap() > 0);
    x.as_object_mut().unwrap().remove("timestamp");
    assert_eq!(x, y);
}

#[test]
fn seed_flag_overrides_the_config() {
    let a = scratch("seed-a");
    let b = scratch("seed-b");
    assert!(run(&cookbook("poll.json"), &a, &["--no-timestamp"])
        .status
        .success());
    assert!(run(
        &cookbook("poll.json"),
        &b,
        &["--no-timestamp", "--seed", "99"]
    )
    .status
    .success());
    let doc = json(&b.join("scenario.json"));
    assert_eq!(doc["config"]["seed"], 99);
    assert_ne!(
        std::fs::read(a.join("scenario.csv")).unwrap(),
        std::fs::read(b.join("scenario.csv")).unwrap()
    );
}

#[test]
fn thread_settings() {
    let out = scratch("threads");
    let o = bin()
        .arg("--config")
        .arg(cookbook("limits.json"))
        .arg("--out")
        .arg(&out)
        .env("LKA_THREADS", "many")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
    // the flag wins over the environment
    let o = bin()
        .arg("--config")
        .arg(cookbook("limits.json"))
        .arg("--out")
        .arg(&out)
        .args(["--threads", "2"])
        .env("LKA_THREADS", "many")
        .output()
        .unwrap();
    assert!(o.status.success());
}

#[test]
fn every_command_runs() {
    let out = scratch("all");
    let cases = [
        ("fit.json", "fit"),
        ("fit_cube.json", "fit"),
        ("lka.json", "lka"),
        ("coin.json", "scenario"),
        ("decimal.json", "scenario"),
        ("poll_biased.json", "scenario"),
        ("secondary_bayesian.json", "secondary"),
    ];
    for (name, file) in cases {
        let o = run(&cookbook(name), &out, &["--no-timestamp"]);
        assert!(
            o.status.success(),
            "{name}: {}",
            String::from_utf8_lossy(&o.stderr)
        );
        let doc = json(&out.join(format!("{file}.json")));
        assert_eq!(doc["command"], file);
        assert!(doc["config"].is_object());
    }
    let small = [
        r#"{"command":"asymptotics","experiment":"convergence","seed":1,
            "fixture":{"scenario":"poll","d":10,"h":6,"eps":0.2,"x0":7},"Ns":[5,10],"R":50}"#,
        r#"{"command":"asymptotics","experiment":"clt","seed":1,
            "fixture":{"scenario":"coin","r":2,"x0":[0.3,0.6],"truth":[[0.1,0.5],[0.2,0.9]]},"N":500,"R":40}"#,
        r#"{"command":"secondary","mode":"plugin","seed":1,"features":[[0],[0],[1],[1]],"truth":[2,3],
            "lambda":[1.0],"mList":[100,1000],"R":5}"#,
        r#"{"command":"limits","seed":1,"dList":[2,3,5,16]}"#,
    ];
    for cfg in small {
        let c = write_config(&out, cfg);
        let o = run(&c, &out, &["--no-timestamp"]);
        assert!(
            o.status.success(),
            "{cfg}: {}",
            String::from_utf8_lossy(&o.stderr)
        );
        assert!(String::from_utf8_lossy(&o.stdout).lines().count() == 1);
    }
    let doc = json(&out.join("asymptotics.json"));
    assert_eq!(doc["result"]["reports"].as_array().unwrap().len(), 5);
    let csv = std::fs::read_to_string(out.join("secondary.csv")).unwrap();
    assert!(csv.starts_with("experiment,N,replicate,quantity,value\n"));
}
