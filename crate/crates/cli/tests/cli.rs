use std::fs;
use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn fixture(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../core/tests/fixtures")
        .join(name)
        .to_string_lossy()
        .into_owned()
}

fn sieve(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sieve"))
        .args(args)
        .output()
        .expect("run sieve")
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn path(dir: &Path, name: &str) -> String {
    dir.join(name).to_string_lossy().into_owned()
}

fn build_index(dir: &Path) -> String {
    let idx = path(dir, "idx");
    let out = sieve(&["index", &fixture("corpus.jsonl"), "--lemmas", &fixture("lemmas.tsv"), "--out", &idx]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    idx
}

#[test]
fn search_output_feeds_eval() {
    let dir = tempfile::tempdir().unwrap();
    let idx = build_index(dir.path());
    for (format, name) in [("jsonl", "run.jsonl"), ("trec", "run.trec")] {
        let run = path(dir.path(), name);
        let out = sieve(&["search", "--index", &idx, "--queries", &fixture("questions.jsonl"), "--format", format, "--out", &run]);
        assert_eq!(code(&out), 0);
        let report = path(dir.path(), "report.json");
        let out = sieve(&["eval", "--run", &run, "--qrels", &fixture("qrels.txt"), "--out", &report]);
        assert_eq!(code(&out), 0);
        let table = stdout(&out);
        assert!(table.contains("Acc@10") && table.contains("NDCG@10"), "{table}");
        let json: Value = serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
        assert_eq!(json["k"], 10);
        assert_eq!(json["n_evaluated"], 10);
    }
}

#[test]
fn perfect_run_prints_full_marks() {
    let dir = tempfile::tempdir().unwrap();
    let run = path(dir.path(), "perfect.trec");
    fs::write(&run, "q1 Q0 a 1 2.0 t\nq2 Q0 b 1 1.0 t\n").unwrap();
    let qrels = path(dir.path(), "qrels.txt");
    fs::write(&qrels, "q1 0 a 1\nq2 0 b 1\n").unwrap();
    let per_q = path(dir.path(), "per_q.jsonl");
    let out = sieve(&["eval", "--run", &run, "--qrels", &qrels, "--name", "perfect", "--per-question", &per_q]);
    assert_eq!(code(&out), 0);
    let row = stdout(&out).lines().nth(2).unwrap().to_string();
    assert_eq!(row.split_whitespace().collect::<Vec<_>>(), ["perfect", "|", "100.00", "|", "100.00"]);
    assert_eq!(fs::read_to_string(&per_q).unwrap().lines().count(), 2);
}

#[test]
fn usage_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = path(dir.path(), "x");
    let q = fixture("questions.jsonl");
    assert_eq!(code(&sieve(&["search", "--index", "idx", "--queries", &q, "--k", "0", "--out", &out])), 1);
    assert_eq!(code(&sieve(&["search", "--queries", &q, "--out", &out])), 1);
    assert_eq!(code(&sieve(&["eval", "--run", "r", "--qrels", "q", "--k", "0"])), 1);
    assert_eq!(code(&sieve(&["frobnicate"])), 1);
    assert_eq!(code(&sieve(&["denoise", "--pairs", "p", "--scorer", "magic", "--out", &out])), 1);
    assert_eq!(code(&sieve(&["--threads", "0", "stats", "--pairs", "p"])), 1);
    assert_eq!(code(&sieve(&["--help"])), 0);
}

#[test]
fn data_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = path(dir.path(), "x");
    assert_eq!(code(&sieve(&["stats", "--pairs", "/nonexistent.jsonl"])), 2);

    let bad = path(dir.path(), "bad.jsonl");
    fs::write(&bad, "{\"premise\": \"A.\", \"hypothesis\": \"B.\", \"label\": \"maybe\"}\n").unwrap();
    let res = sieve(&["convert-nli", "--in", &bad, "--out", &out]);
    assert_eq!(code(&res), 2);
    assert!(String::from_utf8_lossy(&res.stderr).contains("maybe"));

    let cfg = path(dir.path(), "cfg.toml");
    fs::write(&cfg, "[denoise]\npos_floor = 0.95\n").unwrap();
    let res = sieve(&["denoise", "--pairs", &fixture("train_pairs.jsonl"), "--config", &cfg, "--out", &out]);
    assert_eq!(code(&res), 2);

    let missing = path(dir.path(), "scores.jsonl");
    fs::write(&missing, "").unwrap();
    let res = sieve(&["denoise", "--pairs", &fixture("train_pairs.jsonl"), "--scorer", &format!("file:{missing}"), "--out", &out]);
    assert_eq!(code(&res), 2);
    assert!(String::from_utf8_lossy(&res.stderr).contains("no entry"));
}

#[test]
fn unreachable_remote_scorer_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    let port = TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let out = path(dir.path(), "x");
    let res = sieve(&[
        "denoise",
        "--pairs",
        &fixture("train_pairs.jsonl"),
        "--scorer",
        &format!("remote:http://127.0.0.1:{port}"),
        "--out",
        &out,
    ]);
    assert_eq!(code(&res), 3, "{}", String::from_utf8_lossy(&res.stderr));
}

#[test]
fn config_file_and_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let idx = build_index(dir.path());
    let cfg = path(dir.path(), "cfg.toml");
    fs::write(&cfg, "[match]\nbm25_top = 20\nrerank_top = 3\nverify_threshold = 1.0\n").unwrap();
    let out = path(dir.path(), "m.jsonl");
    let args = ["match", "--questions", &fixture("questions.jsonl"), "--corpus", &fixture("corpus.jsonl"), "--index", &idx, "--config", &cfg, "--out", &out];
    assert_eq!(code(&sieve(&args)), 0);
    let rows: Vec<Value> = fs::read_to_string(&out).unwrap().lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert!(rows.iter().all(|r| r["relevant"] == false));
    assert!(rows.len() <= 30);

    let mut args = args.to_vec();
    args.extend(["--verify-threshold", "0.0"]);
    assert_eq!(code(&sieve(&args)), 0);
    let text = fs::read_to_string(&out).unwrap();
    assert!(text.lines().all(|l| l.contains("\"relevant\":true")));
}

#[test]
fn pipeline_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let idx = build_index(dir.path());
    let matched = path(dir.path(), "matched.jsonl");
    let res = sieve(&[
        "match", "--questions", &fixture("questions.jsonl"), "--corpus", &fixture("corpus.jsonl"),
        "--index", &idx, "--bm25-top", "20", "--verify-threshold", "0.2", "--out", &matched,
    ]);
    assert_eq!(code(&res), 0);

    let mined = path(dir.path(), "mined.jsonl");
    assert_eq!(code(&sieve(&["mine", "--pairs", &matched, "--corpus", &fixture("corpus.jsonl"), "--index", &idx, "--out", &mined])), 0);
    let positives: Vec<(String, String)> = fs::read_to_string(&matched)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str::<Value>(l).unwrap())
        .filter(|r| r["relevant"] == true)
        .map(|r| (r["question_id"].as_str().unwrap().into(), r["passage_id"].as_str().unwrap().into()))
        .collect();
    for line in fs::read_to_string(&mined).unwrap().lines() {
        let r: Value = serde_json::from_str(line).unwrap();
        assert_eq!(r["relevant"], false);
        let key = (r["question_id"].as_str().unwrap().to_string(), r["passage_id"].as_str().unwrap().to_string());
        assert!(!positives.contains(&key));
    }

    let train = path(dir.path(), "train.jsonl");
    assert_eq!(code(&sieve(&["export-train", "--pairs", &matched, "--format", "dpr_jsonl", "--out", &train])), 0);
    for line in fs::read_to_string(&train).unwrap().lines() {
        let r: Value = serde_json::from_str(line).unwrap();
        assert!(!r["positives"].as_array().unwrap().is_empty());
    }

    let report = path(dir.path(), "report.json");
    let kept = path(dir.path(), "kept.jsonl");
    let res = sieve(&["denoise", "--pairs", &matched, "--report", &report, "--out", &kept]);
    assert_eq!(code(&res), 0);
    let json: Value = serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    let input = json["input"].as_u64().unwrap();
    let kept_n = fs::read_to_string(&kept).unwrap().lines().count() as u64;
    assert_eq!(kept_n + json["rejected"].as_u64().unwrap(), input);
}

#[test]
fn dense_search_over_vector_files() {
    let dir = tempfile::tempdir().unwrap();
    let write = |name: &str, dim: u32, rows: &[[f32; 2]], ids: &str| -> PathBuf {
        let mut bytes = b"SVEC".to_vec();
        bytes.extend_from_slice(&1u32.to_le_bytes());
        bytes.extend_from_slice(&dim.to_le_bytes());
        bytes.extend_from_slice(&(rows.len() as u64).to_le_bytes());
        for r in rows {
            for v in r {
                bytes.extend_from_slice(&v.to_le_bytes());
            }
        }
        let p = dir.path().join(format!("{name}.vec"));
        fs::write(&p, bytes).unwrap();
        fs::write(dir.path().join(format!("{name}.ids")), ids).unwrap();
        p
    };
    let passages = write("p", 2, &[[1.0, 0.0], [0.0, 3.0], [0.6, 0.8]], "a\nb\nc\n");
    let queries = write("q", 2, &[[0.0, 1.0]], "q1\n");
    let run = path(dir.path(), "run.trec");
    let res = sieve(&["search", "--embeddings", passages.to_str().unwrap(), "--queries", queries.to_str().unwrap(), "--format", "trec", "--out", &run]);
    assert_eq!(code(&res), 0);
    assert_eq!(fs::read_to_string(&run).unwrap(), "q1 Q0 b 1 3 sieve\nq1 Q0 c 2 0.800000011920929 sieve\nq1 Q0 a 3 0 sieve\n");

    let res = sieve(&["search", "--embeddings", passages.to_str().unwrap(), "--queries", queries.to_str().unwrap(), "--normalize", "--k", "1", "--format", "trec", "--out", &run]);
    assert_eq!(code(&res), 0);
    assert_eq!(fs::read_to_string(&run).unwrap(), "q1 Q0 b 1 1 sieve\n");

    let wrong = dir.path().join("w3.vec");
    let mut bytes = b"SVEC".to_vec();
    bytes.extend_from_slice(&1u32.to_le_bytes());
    bytes.extend_from_slice(&3u32.to_le_bytes());
    bytes.extend_from_slice(&1u64.to_le_bytes());
    for v in [1.0f32, 0.0, 0.0] {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(&wrong, bytes).unwrap();
    fs::write(dir.path().join("w3.ids"), "q\n").unwrap();
    let res = sieve(&["search", "--embeddings", passages.to_str().unwrap(), "--queries", wrong.to_str().unwrap(), "--out", &run]);
    assert_eq!(code(&res), 2);
}
