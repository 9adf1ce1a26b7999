use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn enumsm(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_enumsm"))
        .args(args)
        .env("ENUMSM_SNAPSHOT_DIR", dir)
        .current_dir(dir)
        .output()
        .expect("spawn enumsm")
}

fn ok(out: Output) -> String {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn enumerated(stage: &str) -> TempDir {
    let dir = TempDir::new().unwrap();
    ok(enumsm(dir.path(), &["enumerate", "--stage", stage, "--depth", "8"]));
    dir
}

fn fixture(name: &str) -> String {
    std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)).unwrap()
}

/// Data lines of a CSV report, without `#` header lines.
fn data_lines(csv: &str) -> Vec<&str> {
    csv.lines().filter(|l| !l.starts_with('#')).collect()
}

#[test]
fn stage_zero_is_empty() {
    let dir = TempDir::new().unwrap();
    let out = ok(enumsm(dir.path(), &["enumerate", "--stage", "0", "--depth", "4"]));
    assert!(out.contains("kraft_sum,0\n"), "{out}");
    assert!(out.contains("discrete_entries,0\n"));
    assert!(out.ends_with("# table: k_histogram\nk,count\n"));
}

#[test]
fn enumerate_summary_fixture() {
    let dir = TempDir::new().unwrap();
    let out = ok(enumsm(dir.path(), &["enumerate", "--stage", "12", "--depth", "8"]));
    assert_eq!(out, fixture("enumerate_stage12.csv"));
}

#[test]
fn resume_equals_recompute() {
    let resumed = enumerated("7");
    ok(enumsm(resumed.path(), &["enumerate", "--stage", "12", "--depth", "8"]));
    let fresh = enumerated("12");
    let read = |d: &TempDir| std::fs::read(d.path().join("snapshot-d8.esms")).unwrap();
    assert_eq!(read(&resumed), read(&fresh));
}

#[test]
fn deficiency_fixture() {
    let dir = enumerated("12");
    let args = ["report-deficiency", "--stage", "12", "--depth", "8", "--samples", "32", "--length", "12", "--seed", "7"];
    assert_eq!(ok(enumsm(dir.path(), &args)), fixture("deficiency_stage12.csv"));
}

#[test]
fn insufficient_stage_names_shortfall() {
    let dir = enumerated("6");
    let out = enumsm(dir.path(), &["report-complexity", "--stage", "9", "--depth", "8"]);
    assert_eq!(out.status.code(), Some(3));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("insufficient stage") && err.contains("short by 3"), "{err}");
    let empty = TempDir::new().unwrap();
    let out = enumsm(empty.path(), &["report-info", "--depth", "8"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn corrupt_snapshot_is_refused() {
    let dir = enumerated("8");
    let path = dir.path().join("snapshot-d8.esms");
    let mut bytes = std::fs::read(&path).unwrap();
    let mid = bytes.len() / 2;
    bytes[mid] ^= 0x10;
    std::fs::write(&path, &bytes).unwrap();
    for cmd in ["enumerate", "report-complexity"] {
        let out = enumsm(dir.path(), &[cmd, "--stage", "8", "--depth", "8"]);
        assert_eq!(out.status.code(), Some(4), "{cmd}");
        assert!(String::from_utf8(out.stderr).unwrap().contains("checksum"));
    }
}

#[test]
fn config_errors() {
    let dir = TempDir::new().unwrap();
    let out = enumsm(dir.path(), &["enumerate", "--stage", "25"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8(out.stderr).unwrap().contains("cap"));
    let out = enumsm(dir.path(), &["run-conservation", "--transform", "reverse"]);
    assert_eq!(out.status.code(), Some(2));
    let dir = enumerated("6");
    let out = enumsm(dir.path(), &["report-complexity", "--stage", "6", "--depth", "8", "--snapshot", "snapshot-d8.esms", "--format", "json"]);
    assert!(out.status.success());
    let out = enumsm(dir.path(), &["report-complexity", "--stage", "6", "--depth", "5", "--snapshot", "snapshot-d8.esms"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn empty_corpus_gives_header_only() {
    let dir = enumerated("10");
    std::fs::write(dir.path().join("corpus.csv"), "# no pairs\n").unwrap();
    let out = ok(enumsm(dir.path(), &["report-info", "--stage", "10", "--depth", "8", "--corpus", "corpus.csv"]));
    assert_eq!(data_lines(&out), vec!["pair,a,b,k_a,k_b,k_ab,i_finite,i_bound,i_terms,i_unbounded,sup_bound,sup_witness"]);
    assert!(out.contains("# snapshot_sha256: ") && out.contains("# instruction_set: bitvm-1"));
}

/// Every table as rows of cell strings, from either encoding.
fn cells_csv(s: &str) -> Vec<(String, Vec<Vec<String>>)> {
    let mut tables = Vec::new();
    let mut block = String::new();
    let mut name = None;
    let flush = |name: &mut Option<String>, block: &mut String, tables: &mut Vec<(String, Vec<Vec<String>>)>| {
        if let Some(n) = name.take() {
            let mut r = csv::ReaderBuilder::new().has_headers(false).from_reader(block.as_bytes());
            let rows = r.records().map(|rec| rec.unwrap().iter().map(String::from).collect()).collect();
            tables.push((n, rows));
        }
        block.clear();
    };
    for line in s.lines() {
        if let Some(n) = line.strip_prefix("# table: ") {
            flush(&mut name, &mut block, &mut tables);
            name = Some(n.to_string());
        } else if !line.starts_with('#') {
            block.push_str(line);
            block.push('\n');
        }
    }
    flush(&mut name, &mut block, &mut tables);
    tables
}

fn cells_json(s: &str) -> Vec<(String, Vec<Vec<String>>)> {
    let v: serde_json::Value = serde_json::from_str(s).unwrap();
    v["tables"]
        .as_array()
        .unwrap()
        .iter()
        .map(|t| {
            let cols: Vec<String> = t["columns"].as_array().unwrap().iter().map(|c| c.as_str().unwrap().to_string()).collect();
            let mut rows = vec![cols];
            for r in t["rows"].as_array().unwrap() {
                rows.push(
                    r.as_array()
                        .unwrap()
                        .iter()
                        .map(|c| match c {
                            serde_json::Value::Null => String::new(),
                            serde_json::Value::String(s) => s.clone(),
                            other => other.to_string(),
                        })
                        .collect(),
                );
            }
            (t["name"].as_str().unwrap().to_string(), rows)
        })
        .collect()
}

#[test]
fn json_and_csv_agree() {
    let dir = enumerated("12");
    let base = ["--stage", "12", "--depth", "8"];
    let runs: [&[&str]; 5] = [
        &["report-complexity", "--max-len", "4"],
        &["report-info", "--corpus-size", "20", "--corpus-max-len", "6"],
        &["run-conservation", "--corpus-size", "20", "--corpus-max-len", "6", "--draws", "10"],
        &["demo-occam", "--max-len", "3"],
        &["demo-chi", "--lengths", "4,8", "--cap", "6"],
    ];
    for args in runs {
        let mut csv_args: Vec<&str> = args.to_vec();
        csv_args.extend(base);
        let mut json_args = csv_args.clone();
        json_args.extend(["--format", "json"]);
        let (c, j) = (ok(enumsm(dir.path(), &csv_args)), ok(enumsm(dir.path(), &json_args)));
        let (c, j) = (cells_csv(&c), cells_json(&j));
        assert!(!c.is_empty());
        assert_eq!(c, j, "{args:?}");
    }
}

#[test]
fn outputs_are_byte_deterministic_across_workers() {
    let dir = enumerated("12");
    let args = ["run-conservation", "--stage", "12", "--depth", "8", "--corpus-size", "40", "--corpus-max-len", "6"];
    let one = enumsm(dir.path(), &[&["--workers", "1"][..], &args[..]].concat()).stdout;
    let four = enumsm(dir.path(), &[&["--workers", "4"][..], &args[..]].concat()).stdout;
    let again = enumsm(dir.path(), &args).stdout;
    assert!(!one.is_empty());
    assert_eq!(one, four);
    assert_eq!(one, again);
    let info = ["report-info", "--stage", "12", "--depth", "8", "--corpus-size", "30"];
    let one = enumsm(dir.path(), &[&["--workers", "1"][..], &info[..]].concat()).stdout;
    let three = enumsm(dir.path(), &[&["--workers", "3"][..], &info[..]].concat()).stdout;
    assert_eq!(one, three);

    let a = TempDir::new().unwrap();
    let b = TempDir::new().unwrap();
    let s1 = enumsm(a.path(), &["--workers", "1", "enumerate", "--stage", "11", "--depth", "6"]).stdout;
    let s4 = enumsm(b.path(), &["--workers", "4", "enumerate", "--stage", "11", "--depth", "6"]).stdout;
    assert_eq!(s1, s4);
    let read = |d: &TempDir| std::fs::read(d.path().join("snapshot-d6.esms")).unwrap();
    assert_eq!(read(&a), read(&b));
}

#[test]
fn corpus_file_is_read_in_order() {
    let dir = enumerated("12");
    std::fs::write(dir.path().join("pairs.csv"), "0,1\n# comment\n-,0\n").unwrap();
    let out = ok(enumsm(dir.path(), &["report-info", "--stage", "12", "--depth", "8", "--corpus", "pairs.csv"]));
    let rows = data_lines(&out);
    assert_eq!(rows.len(), 3);
    assert!(rows[1].starts_with("0,0,1,") && rows[2].starts_with("1,ε,0,"), "{rows:?}");
    std::fs::write(dir.path().join("bad.csv"), "0,2\n").unwrap();
    let out = enumsm(dir.path(), &["report-info", "--stage", "12", "--depth", "8", "--corpus", "bad.csv"]);
    assert_eq!(out.status.code(), Some(2));
}
