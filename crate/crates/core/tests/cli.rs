//! Smoke runs of every subcommand of the binary on small inputs.

use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

const BIN: &str = env!("CARGO_BIN_EXE_dialoforge");

fn run(dir: &Path, args: &[&str]) -> String {
    let out: Output = Command::new(BIN).current_dir(dir).args(args).env_remove("DIALOFORGE_CONFIG").output().unwrap();
    assert!(
        out.status.success(),
        "{args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn json(dir: &Path, name: &str) -> Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join(name)).unwrap()).unwrap()
}

#[test]
fn prep_then_score() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let summary: Value = serde_json::from_str(&run(d, &["prep", "--synthetic", "40", "--out", "p", "--seed", "5"])).unwrap();
    assert_eq!(summary["dialogues_in"], 40);
    assert_eq!(json(d, "p/summary.json"), summary);

    let nlg = run(d, &["eval-nlg", "--template", "--test", "p/nlg_test.txt", "--out", "nlg.json"]);
    assert!(nlg.contains("| bleu |"), "{nlg}");
    // the synthetic corpus is realised by the same templates
    assert_eq!(json(d, "nlg.json")["bleu"], 1.0);

    let nlu = run(d, &["score-nlu", "--gold", "p/nlu_test.jsonl", "--template", "--out", "nlu.json"]);
    assert!(nlu.contains("average accuracy"), "{nlu}");
    assert!(json(d, "nlu.json")["intent_accuracy"].as_f64().unwrap() > 0.9);

    std::fs::write(d.join("hyp.txt"), "the cat sat\ngoodbye\n").unwrap();
    std::fs::write(d.join("ref.txt"), "the cat sat\ngoodbye\n").unwrap();
    let _ = run(d, &["eval-nlg", "--hyp", "hyp.txt", "--ref", "ref.txt", "--out", "same.json"]);
    assert_eq!(json(d, "same.json")["rouge1"], 1.0);
}

#[test]
fn kb_generate_and_inspect() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    run(d, &["kb", "generate", "--out", "kb.json", "--n", "12", "--seed", "3"]);
    assert_eq!(json(d, "kb.json").as_array().unwrap().len(), 12);
    let all = run(d, &["kb", "inspect", "--kb", "kb.json"]);
    assert!(all.contains("12 of 12 records"), "{all}");
    let bundled = run(d, &["kb", "inspect", "--where", "area=centre", "--where", "food=chinese"]);
    assert!(bundled.contains("| name |"), "{bundled}");
}

#[test]
fn train_chat_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let table = run(d, &["train-dm", "--variant", "dqn,ddqn", "--episodes", "30", "--measure-every", "10", "--out", "t"]);
    assert!(table.contains("| dqn |") && table.contains("| ddqn |"), "{table}");
    assert!(d.join("t/ddqn_seed0.json").exists());
    let reports = json(d, "t/training.json");
    assert_eq!(reports.as_array().unwrap().len(), 2);

    let csv = run(d, &["report", "t/training.json", "--format", "csv"]);
    assert!(csv.starts_with("variant,seeds,"), "{csv}");

    let chat = run(d, &["chat", "--script", "3", "--transcript", "rule.jsonl"]);
    assert!(chat.contains("goals met: 3/3"), "{chat}");
    let turns = std::fs::read_to_string(d.join("rule.jsonl")).unwrap();
    assert!(turns.lines().all(|l| serde_json::from_str::<Value>(l).is_ok()));
    let trained = run(d, &["chat", "--checkpoint", "t/ddqn_seed0.json", "--script", "2"]);
    assert!(trained.contains("goals met:"), "{trained}");
}

#[test]
fn hpo_log_and_resume() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let first = run(d, &["hpo", "--objective", "quadratic", "--trials", "9", "--seed", "4", "--log", "h.jsonl"]);
    assert!(first.contains("best trial"), "{first}");
    run(d, &["hpo", "--objective", "quadratic", "--trials", "3", "--log", "h.jsonl", "--resume"]);
    let log = std::fs::read_to_string(d.join("h.jsonl")).unwrap();
    let records: Vec<Value> = log.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(records[0]["record"], "study");
    assert_eq!(records.iter().filter(|r| r["record"] == "trial").count(), 12);

    let report = run(d, &["report", "h.jsonl"]);
    assert!(report.starts_with("### Study quadratic (maximize)"), "{report}");
    assert_eq!(report.lines().filter(|l| l.contains("| complete |")).count(), 12);
    // an unknown space is a clean error, not a panic
    let bad = Command::new(BIN).current_dir(d).args(["hpo", "--space", "nope.json"]).output().unwrap();
    assert!(!bad.status.success());
    assert!(String::from_utf8_lossy(&bad.stderr).starts_with("error:"));
}
