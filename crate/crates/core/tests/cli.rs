use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_fedmenf"))
}

const TINY: &str = r#"
arch.hidden = 8
arch.hidden_layers = 2
data.dims = [8, 8]
data.n_clients = 3
data.tasks = 4
data.test_tasks = 2
federation.rounds = 2
federation.participants = 2
meta.outer_steps = 2
meta.inner_batch = 16
meta.outer_batch = 16
eval.cadence = 1
eval.round_tto_steps = 2
eval.tto_steps = [0, 2]
"#;

#[test]
fn bad_config_exits_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    std::fs::write(&cfg, "data.n_clients = 2\nfederation.participants = 3\n").unwrap();
    let out = bin().args(["partition", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("participants"));

    std::fs::write(&cfg, "meta.unknown_knob = 1\n").unwrap();
    let out = bin().args(["train", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown_knob"));
}

#[test]
fn partition_prints_counts() {
    let out = bin().args(["partition", "--seed", "3"]).output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 1 + 8);
    let total: usize = lines[1..].iter().map(|l| l.split(',').nth(1).unwrap().parse::<usize>().unwrap()).sum();
    assert_eq!(total, 16);
}

#[test]
fn train_then_tto() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    std::fs::write(&cfg, TINY).unwrap();
    let run = dir.path().join("run");
    let out = bin().args(["train", "--threads", "1", "--config"]).arg(&cfg).arg("--out").arg(&run).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["rounds.csv", "clients.csv", "checkpoint.fmnf", "checkpoint.fmnf.toml", "config.toml"] {
        assert!(run.join(f).exists(), "missing {f}");
    }
    let out = bin().args(["tto", "--config"]).arg(&cfg).arg("--out").arg(&run).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let tto = std::fs::read_to_string(run.join("tto.csv")).unwrap();
    assert_eq!(tto.lines().count(), 1 + 2 * 2);

    let ck = run.join("checkpoint.fmnf");
    let out = bin().args(["metrics", "--config"]).arg(&cfg).arg(&ck).arg(&ck).output().unwrap();
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("100,1"));
}

#[test]
fn missing_checkpoint_is_runtime_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin().args(["tto", "--out"]).arg(dir.path()).output().unwrap();
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn verify_props_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin().args(["verify-props", "--out"]).arg(dir.path()).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
    assert!(dir.path().join("prop1_quadratic.csv").exists());
}
