use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn vaa(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vaa-audit"))
        .args(args)
        .env_remove("VAA_AUDIT_CONFIG")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn write_roster(dir: &Path) -> String {
    let path = dir.join("roster.csv");
    fs::write(
        &path,
        "id,name,party,a1,a2\n\
         a,Alice,X,2,4\n\
         b,Bob,Y,5,1\n\
         c,Carol,X,2,4\n",
    )
    .unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn match_ranks_with_ties_at_the_top() {
    let dir = tempfile::tempdir().unwrap();
    let roster = write_roster(dir.path());
    let o = vaa(&[
        "match",
        "--roster",
        &roster,
        "--m",
        "2",
        "--answers",
        "2,4",
        "--importances",
        "i,i",
        "--k",
        "1",
        "--format",
        "csv",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let out = stdout(&o);
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines[0], "rank,id,name,party,agreement_pct");
    // k=1, but both respondents tied at 100 are shown.
    assert_eq!(&lines[1..], ["1,a,Alice,X,100", "1,c,Carol,X,100"]);
}

#[test]
fn match_reads_user_document() {
    let dir = tempfile::tempdir().unwrap();
    let roster = write_roster(dir.path());
    let user = dir.path().join("user.json");
    fs::write(
        &user,
        r#"{"answers":[5,1],"importances":["neutral","not_important"]}"#,
    )
    .unwrap();
    let o = vaa(&[
        "match",
        "--roster",
        &roster,
        "--m",
        "2",
        "--user",
        user.to_str().unwrap(),
        "--format",
        "json",
    ]);
    assert!(o.status.success());
    let rows: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(rows.as_array().unwrap().len(), 3);
    assert_eq!(rows[0]["id"], "b");
    assert_eq!(rows[1]["rank"], 2);
    assert_eq!(rows[2]["rank"], 2);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let roster = write_roster(dir.path());
    assert_eq!(vaa(&["--help"]).status.code(), Some(0));
    assert_eq!(vaa(&["match", "--roster", &roster]).status.code(), Some(1));
    assert_eq!(vaa(&["bogus"]).status.code(), Some(1));
    let bad_answer = vaa(&[
        "match",
        "--roster",
        &roster,
        "--m",
        "2",
        "--answers",
        "2,7",
        "--importances",
        "i,i",
    ]);
    assert_eq!(bad_answer.status.code(), Some(2));
    assert!(bad_answer.stdout.is_empty());
    let wrong_m = vaa(&[
        "match",
        "--roster",
        &roster,
        "--answers",
        "2,4",
        "--importances",
        "i,i",
    ]);
    assert_eq!(wrong_m.status.code(), Some(2));
    assert_eq!(vaa(&["audit", "--seed", "abc"]).status.code(), Some(1));
}

#[test]
fn lenient_ingestion_skips_bad_rows() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("roster.csv");
    fs::write(&path, "id,name,party,a1,a2\na,A,X,2,4\nb,B,Y,9,1\n").unwrap();
    let roster = path.to_str().unwrap();
    let args = [
        "match",
        "--roster",
        roster,
        "--m",
        "2",
        "--answers",
        "2,4",
        "--importances",
        "i,i",
    ];
    assert_eq!(vaa(&args).status.code(), Some(2));
    let mut lenient = args.to_vec();
    lenient.push("--lenient");
    let o = vaa(&lenient);
    assert!(o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("skipped row 3"));
}

#[test]
fn synth_round_trips_through_match() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("synth.csv");
    let o = vaa(&[
        "synth",
        "--seed",
        "5",
        "--respondents",
        "12",
        "--parties",
        "4",
        "--m",
        "6",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    let text = fs::read_to_string(&out).unwrap();
    assert_eq!(text.lines().count(), 13);
    let again = vaa(&[
        "synth",
        "--seed",
        "5",
        "--respondents",
        "12",
        "--parties",
        "4",
        "--m",
        "6",
    ]);
    assert_eq!(stdout(&again), text);
    let m = vaa(&[
        "match",
        "--roster",
        out.to_str().unwrap(),
        "--m",
        "6",
        "--answers",
        "1,2,3,4,5,1",
        "--importances",
        "i,i,n,n,ni,ni",
        "--format",
        "csv",
    ]);
    assert!(m.status.success());
    assert_eq!(stdout(&m).lines().count(), 13);
}

#[test]
fn impact_prints_mandate_ranges() {
    let o = vaa(&["impact", "--rate", "9.77,21.6", "--format", "csv"]);
    assert!(o.status.success());
    let out = stdout(&o);
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(
        lines[0],
        "change_rate_pct,cast_votes,affected_pool,votes_affected,share_of_cast_pct,mandates_low,mandates_high"
    );
    assert!(lines[1].starts_with("9.77,3592831,1002400,97934,"));
    assert!(lines[1].ends_with(",4,5"));
    assert!(lines[2].ends_with(",10,12"));
    assert_eq!(vaa(&["impact", "--rate", "150"]).status.code(), Some(2));
    assert_eq!(
        vaa(&[
            "impact",
            "--rate",
            "5",
            "--turnout",
            "0.5",
            "--paper-defaults"
        ])
        .status
        .code(),
        Some(1)
    );
}

#[test]
fn audit_writes_reports_and_notes_synthetic_roster() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let o = vaa(&[
        "audit",
        "--seed",
        "3",
        "--batches",
        "3",
        "--batch-size",
        "20",
        "--respondents",
        "40",
        "--parties",
        "5",
        "--deltas",
        "1",
        "--drops",
        "1",
        "--ks",
        "3,5",
        "--out-dir",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(out.join("report.csv")).unwrap();
    // 15 single + 3 row + 1 overall + 3 drop cells, two levels each.
    assert_eq!(csv.lines().count(), 1 + 22 * 2);
    let json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(json["provenance"]["base_seed"], 3);
    assert!(json["provenance"]["notes"][0]
        .as_str()
        .unwrap()
        .contains("qualitative"));
    let topk = fs::read_to_string(out.join("report_topk.csv")).unwrap();
    assert_eq!(topk.lines().count(), 1 + 15 * 2);
    assert!(stdout(&o).contains("note: synthetic roster"));
}

#[test]
fn audit_with_roster_file_and_config() {
    let dir = tempfile::tempdir().unwrap();
    let roster = write_roster(dir.path());
    let config = dir.path().join("audit.json");
    fs::write(
        &config,
        r#"{"audit":{"batches":2,"users_per_batch":50,"question_count":2,"delta_sweep":[1],"drop_sweep":[1],"k_sweep":[2,3]}}"#,
    )
    .unwrap();
    let out = dir.path().join("out");
    let o = vaa(&[
        "audit",
        "--seed",
        "9",
        "--config",
        config.to_str().unwrap(),
        "--roster",
        &roster,
        "--format",
        "json",
        "--out-dir",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let printed: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(printed["provenance"]["roster_size"], 3);
    assert_eq!(printed["provenance"]["notes"][0], "roster file roster.csv");
    assert_eq!(
        stdout(&o),
        fs::read_to_string(out.join("report.json")).unwrap()
    );
}

#[test]
fn audit_validation_failure_writes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let o = vaa(&[
        "audit",
        "--seed",
        "1",
        "--m",
        "3",
        "--out-dir",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(o.stdout.is_empty());
    assert!(!out.exists());
}

#[test]
fn random_seed_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let o = vaa(&[
        "audit",
        "--seed",
        "random",
        "--batches",
        "2",
        "--batch-size",
        "5",
        "--respondents",
        "20",
        "--parties",
        "4",
        "--deltas",
        "1",
        "--drops",
        "1",
        "--ks",
        "3",
        "--format",
        "json",
        "--out-dir",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    let stderr = String::from_utf8_lossy(&o.stderr);
    let seed: u64 = stderr
        .lines()
        .find_map(|l| l.strip_prefix("seed: "))
        .expect("seed line")
        .parse()
        .unwrap();
    let report: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(report["provenance"]["base_seed"], seed);
}

#[test]
fn synth_accepts_answer_weights() {
    let o = vaa(&[
        "synth",
        "--seed",
        "7",
        "--respondents",
        "4",
        "--parties",
        "2",
        "--m",
        "3",
        "--answer-weights",
        "0,0,1,0,0",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for line in stdout(&o).lines().skip(1) {
        assert!(line.ends_with(",3,3,3"), "{line}");
    }
    assert_eq!(
        vaa(&["synth", "--seed", "7", "--answer-weights", "1,2"])
            .status
            .code(),
        Some(1)
    );
}
