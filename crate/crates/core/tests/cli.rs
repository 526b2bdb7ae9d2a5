use std::fs;
use std::path::{Path, PathBuf};

use verbseq::cli::run;
use verbseq::pipeline::ClusteringRecord;

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data").join(name)
}

fn verbseq(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv: Vec<String> = std::iter::once("verbseq").chain(args.iter().copied()).map(String::from).collect();
    let code = run(argv, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn stats_matches_golden_file() {
    let (code, out, _) = verbseq(&["stats", s(&data("sample_corpus.csv"))]);
    assert_eq!(code, 0);
    assert_eq!(out, fs::read_to_string(data("sample_stats.txt")).unwrap());
}

#[test]
fn validate_reports_every_problem_with_exit_code_1() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.csv");
    let mut text = fs::read_to_string(data("example_report.csv")).unwrap();
    text = text
        .replacen(",acc,ppr,", ",acc,XX,", 1)
        .replacen(",fore,A,", ",middle,A,", 1);
    fs::write(&bad, text).unwrap();
    let (code, out, _) = verbseq(&["validate", s(&bad)]);
    assert_eq!(code, 1);
    assert_eq!(out.lines().count(), 2, "{out}");
    assert!(out.contains("tense") && out.contains("ground"), "{out}");

    let (code, out, _) = verbseq(&["validate", s(&data("sample_corpus.csv"))]);
    assert_eq!((code, out.trim_end().ends_with("ok")), (0, true));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.csv");
    assert_eq!(verbseq(&["stats", s(&missing)]).0, 2);
    assert_eq!(verbseq(&["validate", s(&missing)]).0, 2);
    assert_eq!(verbseq(&["frobnicate"]).0, 1);
    assert_eq!(verbseq(&["--help"]).0, 0);
    // `train` without a corpus anywhere is a usage error.
    let (code, _, err) = verbseq(&["--out", s(dir.path()), "train"]);
    assert_eq!(code, 1, "{err}");
    // Unknown configuration key.
    let cfg = dir.path().join("bad.txt");
    fs::write(&cfg, "sedd = 1\n").unwrap();
    let (code, _, err) = verbseq(&["--config", s(&cfg), "stats", s(&data("sample_corpus.csv"))]);
    assert_eq!(code, 0, "stats ignores the configuration: {err}");
    let (code, _, err) = verbseq(&["--config", s(&cfg), "train", s(&data("sample_corpus.csv"))]);
    assert_eq!(code, 1);
    assert!(err.contains("sedd"), "{err}");
}

fn synth(dir: &Path, seed: &str, n: &str) -> PathBuf {
    let out = dir.join("syn");
    let (code, _, err) = verbseq(&["--out", s(&out), "--seed", seed, "synth", "--paper-default", "--n", n]);
    assert_eq!(code, 0, "{err}");
    for f in ["corpus.csv", "truth.csv", "spec.json"] {
        assert!(out.join(f).exists(), "{f}");
    }
    out.join("corpus.csv")
}

#[test]
fn fixed_k_from_configuration() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = synth(dir.path(), "5", "30");
    let cfg = dir.path().join("k3.txt");
    fs::write(&cfg, "k = 3\nhmm_max_iter = 20\n").unwrap();
    let out = dir.path().join("run");
    let (code, stdout, err) = verbseq(&["--config", s(&cfg), "--out", s(&out), "train", s(&corpus)]);
    assert_eq!(code, 0, "{err}");
    assert!(stdout.starts_with("k\t3\n"), "{stdout}");
    let record: ClusteringRecord =
        serde_json::from_str(&fs::read_to_string(out.join("clustering.json")).unwrap()).unwrap();
    assert_eq!(record.k, 3);
    assert!(record.per_k_scores.is_empty());
    let used: Vec<usize> = record.labels.iter().flatten().copied().collect();
    for c in 0..3 {
        assert!(used.contains(&c));
    }
    assert!(fs::read_to_string(out.join("config.txt")).unwrap().contains("k = 3"));
}

#[test]
fn same_seed_same_bytes_different_seed_different_map() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = synth(dir.path(), "1", "30");
    let train = |name: &str, seed: &str| {
        let out = dir.path().join(name);
        let (code, _, err) = verbseq(&["--out", s(&out), "--seed", seed, "train", s(&corpus)]);
        assert_eq!(code, 0, "{err}");
        out
    };
    let a = train("a", "4");
    let b = train("b", "4");
    let c = train("c", "5");
    for f in ["som.json", "clustering.json", "hmm.json", "transitions.json"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
    assert_ne!(fs::read(a.join("som.json")).unwrap(), fs::read(c.join("som.json")).unwrap());
}

#[test]
fn report_and_segment_read_persisted_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = synth(dir.path(), "2", "30");
    let art = dir.path().join("art");
    assert_eq!(verbseq(&["--out", s(&art), "train", s(&corpus)]).0, 0);
    let (code, out, err) = verbseq(&["report", "--artifacts", s(&art)]);
    assert_eq!(code, 0, "{err}");
    assert!(!out.is_empty());
    for f in ["associations.json", "typical_pairs.json", "segmentation.json", "report.txt", "crosstab_part_both.csv"] {
        assert!(art.join(f).exists(), "{f}");
    }
    let seg_dir = dir.path().join("seg");
    let (code, out, err) = verbseq(&["--out", s(&seg_dir), "segment", "--artifacts", s(&art)]);
    assert_eq!(code, 0, "{err}");
    assert_eq!(
        fs::read(seg_dir.join("segmentation.json")).unwrap(),
        fs::read(art.join("segmentation.json")).unwrap()
    );
    assert!(out.lines().count() >= 30);
    // Missing artifacts are a file-system error.
    assert_eq!(verbseq(&["report", "--artifacts", s(&dir.path().join("none")), s(&corpus)]).0, 2);
}

#[test]
fn synth_is_reproducible() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let ca = synth(a.path(), "9", "20");
    let cb = synth(b.path(), "9", "20");
    assert_eq!(fs::read(ca).unwrap(), fs::read(cb).unwrap());
    assert_eq!(
        fs::read(a.path().join("syn/truth.csv")).unwrap(),
        fs::read(b.path().join("syn/truth.csv")).unwrap()
    );
}

#[test]
fn stats_on_degenerate_corpora() {
    let dir = tempfile::tempdir().unwrap();
    let header = fs::read_to_string(data("example_report.csv")).unwrap().lines().next().unwrap().to_string();
    let empty = dir.path().join("empty.csv");
    fs::write(&empty, format!("{header}\n")).unwrap();
    let (code, _, err) = verbseq(&["stats", s(&empty)]);
    assert_eq!(code, 1, "{err}");
    assert!(err.contains("empty"), "{err}");

    let single = dir.path().join("single.csv");
    fs::write(&single, format!("{header}\nx,0,0,être,sta,PR,1,back,A,0,0,0,0\n")).unwrap();
    let (code, out, _) = verbseq(&["stats", s(&single)]);
    assert_eq!(code, 0);
    assert!(out.contains("sta\t1\t100.00\n") && out.contains("PR\t1\t100.00\n"), "{out}");
    let last_row = out.lines().last().unwrap();
    assert_eq!(last_row, "ach\t0.00\t0.00\t0.00\t0.00\t0.00\t0.00\t0.00\t0.00\t0.00");
    assert!(out.contains("\nsta\t0.00\t100.00\t"), "{out}");
}

#[test]
fn report_twice_gives_identical_files() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = synth(dir.path(), "3", "25");
    let art = dir.path().join("art");
    assert_eq!(verbseq(&["--out", s(&art), "train", s(&corpus)]).0, 0);
    let read_all = |d: &Path| -> Vec<(String, Vec<u8>)> {
        let mut v: Vec<(String, Vec<u8>)> = fs::read_dir(d)
            .unwrap()
            .map(|e| {
                let e = e.unwrap();
                (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
            })
            .collect();
        v.sort();
        v
    };
    let r1 = dir.path().join("r1");
    let r2 = dir.path().join("r2");
    assert_eq!(verbseq(&["--out", s(&r1), "report", "--artifacts", s(&art)]).0, 0);
    assert_eq!(verbseq(&["--out", s(&r2), "report", "--artifacts", s(&art)]).0, 0);
    let (a, b) = (read_all(&r1), read_all(&r2));
    assert!(a.len() > 5);
    assert_eq!(a, b);
}
