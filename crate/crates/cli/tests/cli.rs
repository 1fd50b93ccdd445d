use std::path::Path;
use std::process::{Command, Output};

fn vqrsim(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vqrsim"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn write_spec(dir: &Path) {
    std::fs::write(
        dir.join("spec.json"),
        r#"{"seed": 7, "n_universities": 5, "researchers_per_university": 30, "n_sds": 2}"#,
    )
    .unwrap();
}

#[test]
fn synth_writes_four_tables_deterministically() {
    let tmp = tempfile::tempdir().unwrap();
    write_spec(tmp.path());
    for out in ["a", "b"] {
        let o = vqrsim(&["synth", "--config", "spec.json", "--out", out], tmp.path());
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let mut names: Vec<String> = std::fs::read_dir(tmp.path().join("a"))
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    names.sort();
    assert_eq!(
        names,
        [
            "authorships.csv",
            "publications.csv",
            "researchers.csv",
            "universities.csv"
        ]
    );
    for n in &names {
        assert_eq!(
            std::fs::read(tmp.path().join("a").join(n)).unwrap(),
            std::fs::read(tmp.path().join("b").join(n)).unwrap()
        );
    }
}

#[test]
fn missing_spec_fails_with_message() {
    let tmp = tempfile::tempdir().unwrap();
    let o = vqrsim(&["synth", "--config", "absent.json", "--out", "x"], tmp.path());
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("absent.json"));
}

#[test]
fn run_then_compare() {
    let tmp = tempfile::tempdir().unwrap();
    write_spec(tmp.path());
    assert!(vqrsim(
        &["synth", "--config", "spec.json", "--out", "corpus", "--seed", "8"],
        tmp.path()
    )
    .status
    .success());
    std::fs::write(
        tmp.path().join("run.json"),
        r#"{"corpus_dir": "corpus", "thresholds": {"uda": 5, "overall": 10}}"#,
    )
    .unwrap();
    let o = vqrsim(
        &["--threads", "2", "run", "--config", "run.json", "--out", "reports"],
        tmp.path(),
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let reports = tmp.path().join("reports");
    assert!(reports.join("comparison_overall_vqr_vs_fss.json").is_file());
    assert!(reports.join("run_summary.json").is_file());

    let list = "reports/rankings_overall_vqr.csv";
    let o = vqrsim(&["compare", list, list], tmp.path());
    assert!(o.status.success());
    let report: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(report["ranks"]["% shifting rank"], 0.0);
    assert_eq!(report["quartiles"]["From top to non-top"], 0.0);

    let o = vqrsim(
        &["compare", list, "reports/rankings_overall_fss.csv", "--out", "cmp.json"],
        tmp.path(),
    );
    assert!(o.status.success());
    assert!(std::fs::read_to_string(tmp.path().join("cmp.json"))
        .unwrap()
        .contains("\"Correlat.\""));

    std::fs::write(
        tmp.path().join("other.csv"),
        "university_id,score,rank,quartile\nZ1,1,1,1\nZ2,0,2,4\n",
    )
    .unwrap();
    let o = vqrsim(&["compare", list, "other.csv"], tmp.path());
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("share 0"));
}
