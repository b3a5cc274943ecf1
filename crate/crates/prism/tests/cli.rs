use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const TOY: &str = r#"
seed = 1

[image]
resolution = 28

[[model.backbones]]
id = "toy"
patch_size = 14
dim = 8
layers = 2
heads = 2

[model.lm]
dim = 16
layers = 1
heads = 2
max_context = 160

[data]
epochs = 2.0

[data.synth]
images = 4

[train]
procedure = "multi-stage"
batch_size = 8
align_batch_size = 2
learning_rate = 1e-3
log_every = 0
"#;

fn prism(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_prism"))
        .args(args)
        .env_remove("PRISM_CACHE_DIR")
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn tree(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(p.strip_prefix(dir).unwrap().to_path_buf(), std::fs::read(&p).unwrap());
            }
        }
    }
    out
}

#[test]
fn synth_is_reproducible_and_creates_its_directory() {
    let tmp = tempfile::tempdir().unwrap();
    let a = tmp.path().join("a");
    let b = tmp.path().join("deeper/still/b");
    for dir in [&a, &b] {
        let o = prism(&["synth", "--seed", "4", "--n", "3", "--canvas", "28", "--out", s(dir)]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    }
    let (ta, tb) = (tree(&a), tree(&b));
    assert_eq!(ta, tb);
    assert!(ta.contains_key(Path::new("data.jsonl")));
    assert!(ta.contains_key(Path::new("manifest.json")));
    assert_eq!(code(&prism(&["verify", s(&a)])), 0);
}

#[test]
fn validation_errors_exit_with_two() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("x");
    assert_eq!(code(&prism(&["synth", "--n", "0", "--out", s(&out)])), 2);
    assert_eq!(code(&prism(&["synth", "--set", "data.nonsense=1", "--out", s(&out)])), 2);
    assert_eq!(code(&prism(&["synth", "--set", "model.backbones.0.patch_size=15", "--out", s(&out)])), 2);
    let bad = tmp.path().join("bad.toml");
    std::fs::write(&bad, "[train]\nlearning_rate = -1.0\n").unwrap();
    assert_eq!(code(&prism(&["train", "--config", s(&bad), "--out", s(&out)])), 2);
    assert_eq!(code(&prism(&["frobnicate"])), 2);
    assert!(!out.exists());
}

#[test]
fn runtime_failures_exit_with_one() {
    let tmp = tempfile::tempdir().unwrap();
    let missing = tmp.path().join("nothing.bin");
    let task = tmp.path().join("t.task.jsonl");
    std::fs::write(&task, "").unwrap();
    let o = prism(&["evaluate", "--model", s(&missing), "--task", s(&task), "--out", s(&tmp.path().join("o.jsonl"))]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("nothing.bin"));
    assert_eq!(code(&prism(&["verify", s(tmp.path())])), 1);
}

#[test]
fn verify_detects_tampering() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("d");
    assert_eq!(code(&prism(&["synth", "--n", "2", "--canvas", "28", "--out", s(&dir)])), 0);
    assert_eq!(code(&prism(&["verify", s(&dir)])), 0);
    let data = dir.join("data.jsonl");
    let mut bytes = std::fs::read(&data).unwrap();
    bytes.push(b'\n');
    std::fs::write(&data, bytes).unwrap();
    let o = prism(&["verify", s(&dir)]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("data.jsonl"));
}

#[test]
fn fixture_analysis_passes_its_checks() {
    let o = prism(&["analyze", "--fixture", "--pool", "global"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert_eq!(stdout.lines().filter(|l| l.starts_with("PASS ")).count(), 4, "{stdout}");
    assert!(!stdout.contains("FAIL"));
}

#[test]
fn ambiguous_model_names_are_rejected() {
    let o = prism(&["analyze", "--fixture", "--base", "Llama-2 7B", "--alt", "Prism-DINOSigLIP 13B"]);
    assert_eq!(code(&o), 2, "{}", String::from_utf8_lossy(&o.stdout));
    assert!(String::from_utf8_lossy(&o.stderr).contains("ambiguous"));
}

#[test]
fn synth_train_evaluate_analyze() {
    let tmp = tempfile::tempdir().unwrap();
    let root = tmp.path();
    let config = root.join("toy.toml");
    std::fs::write(&config, TOY).unwrap();
    let data = root.join("data");
    let run = root.join("run");
    let eval = root.join("eval");

    let o = prism(&["synth", "--config", s(&config), "--out", s(&data)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let o = prism(&["train", "--config", s(&config), "--out", s(&run)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("align:") && stdout.contains("finetune:"), "{stdout}");

    let ckpt = run.join("checkpoint.bin");
    let tasks: Vec<PathBuf> = ["synth-count", "synth-presence", "synth-loc"]
        .iter()
        .map(|t| data.join(format!("{t}.task.jsonl")))
        .collect();
    for (name, workers) in [("toy-a", "1"), ("toy-b", "3")] {
        let mut args = vec!["evaluate", "--model", s(&ckpt), "--workers", workers, "--max-new-tokens", "8"];
        for t in &tasks {
            args.extend(["--task", s(t)]);
        }
        let out = eval.join(format!("{name}.jsonl"));
        let scores = eval.join(format!("{name}.csv"));
        args.extend(["--out", s(&out), "--scores", s(&scores), "--name", name]);
        let o = prism(&args);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    }
    let a = std::fs::read(eval.join("toy-a.jsonl")).unwrap();
    assert_eq!(a, std::fs::read(eval.join("toy-b.jsonl")).unwrap());
    assert_eq!(String::from_utf8(a).unwrap().lines().count(), 3 * 4);

    let report = root.join("report");
    let o = prism(&[
        "analyze",
        "--scores",
        s(&eval.join("toy-a.csv")),
        s(&eval.join("toy-b.csv")),
        "--base",
        "toy-a",
        "--alt",
        "toy-b",
        "--format",
        "delimited",
        "--out",
        s(&report),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(report.join("report.csv").exists());
    for p in [&data, &run, &report, &eval.join("toy-a.jsonl"), &eval.join("toy-b.csv"), &ckpt] {
        let o = prism(&["verify", s(p)]);
        assert_eq!(code(&o), 0, "{}: {}", p.display(), String::from_utf8_lossy(&o.stderr));
    }
}
