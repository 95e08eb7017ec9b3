//! End-to-end tests of the `popcount` binary.

use std::process::{Command, Output};

use popcount::cli::{parse_csv, render_rows, Format};

fn popcount(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_popcount")).args(args).output().expect("run popcount")
}

#[test]
fn flip_row_carries_the_oracle_value() {
    let out = popcount(&[
        "simulate",
        "--protocol",
        "flip",
        "--n",
        "3",
        "--trials",
        "100000",
        "--scheduler",
        "bst",
        "--init",
        "zeros",
        "--seed",
        "7",
        "--format",
        "csv",
    ]);
    assert!(out.status.success());
    let rows = parse_csv(&out.stdout).unwrap();
    assert_eq!(rows.len(), 1);
    let r = &rows[0];
    assert_eq!(r.schema_version, "1");
    assert_eq!(r.oracle_exact.as_deref(), Some("10"));
    assert!((r.bst_interactions_mean - 10.0).abs() <= 3.0 * r.bst_interactions_se);
    assert_eq!(r.rng, "chacha8-splitmix64");
}

#[test]
fn csv_round_trips_byte_for_byte() {
    let out = popcount(&[
        "sweep",
        "--protocol",
        "timeopt",
        "--n-values",
        "2,3,5",
        "--trials",
        "200",
        "--init",
        "vector=0,1",
        "--seed",
        "3",
    ]);
    // vector length must match n: a flag error
    assert_eq!(out.status.code(), Some(1));
    assert!(out.stdout.is_empty());

    let out = popcount(&["sweep", "--protocol", "timeopt", "--n-values", "2,3,5", "--trials", "200", "--seed", "3"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = parse_csv(&out.stdout).unwrap();
    assert_eq!(rows.iter().map(|r| r.n).collect::<Vec<_>>(), vec![2, 3, 5]);
    assert_eq!(render_rows(&rows, Format::Csv).unwrap(), out.stdout);
}

#[test]
fn rows_reproduce_themselves() {
    let out =
        popcount(&["simulate", "--protocol", "flip", "--n", "5", "--trials", "300", "--seed", "11", "--init", "ones"]);
    let row = &parse_csv(&out.stdout).unwrap()[0];
    let echo: Vec<&str> = row.command.split(' ').collect();
    let again = popcount(&echo);
    assert_eq!(again.stdout, out.stdout);
}

#[test]
fn json_uses_the_csv_field_names() {
    let csv = popcount(&[
        "simulate",
        "--protocol",
        "timeopt",
        "--n",
        "1",
        "--trials",
        "10",
        "--scheduler",
        "bst",
        "--init",
        "random",
        "--seed",
        "1",
    ]);
    let json = popcount(&[
        "simulate",
        "--protocol",
        "timeopt",
        "--n",
        "1",
        "--trials",
        "10",
        "--scheduler",
        "bst",
        "--init",
        "random",
        "--seed",
        "1",
        "--format",
        "json",
    ]);
    let header: Vec<String> =
        String::from_utf8(csv.stdout).unwrap().lines().next().unwrap().split(',').map(String::from).collect();
    let value: serde_json::Value = serde_json::from_slice(&json.stdout).unwrap();
    let obj = value.as_array().unwrap()[0].as_object().unwrap();
    assert_eq!(obj.keys().cloned().collect::<std::collections::BTreeSet<_>>(), header.iter().cloned().collect());
    assert_eq!(obj["converged"], 10);
    assert_eq!(obj["final_c_min"], 1);
    assert_eq!(obj["final_c_max"], 1);
}

#[test]
fn naming_worst_case_example() {
    let out = popcount(&[
        "simulate",
        "--protocol",
        "gros",
        "--n",
        "3",
        "--p",
        "4",
        "--scheduler",
        "adversarial",
        "--init",
        "worst",
        "--trials",
        "1",
    ]);
    assert!(out.status.success());
    let row = &parse_csv(&out.stdout).unwrap()[0];
    assert!(row.non_null_min >= 7);
}

#[test]
fn exit_codes() {
    assert_eq!(popcount(&["simulate", "--protocol", "flip", "--n", "0"]).status.code(), Some(1));
    assert_eq!(popcount(&["oracle", "--which", "timeopt-exact", "--n", "5"]).status.code(), Some(1));
    let truncated =
        popcount(&["simulate", "--protocol", "flip", "--n", "12", "--trials", "4", "--max-interactions", "10"]);
    assert_eq!(truncated.status.code(), Some(2));
    assert!(truncated.stdout.is_empty());
}

#[test]
fn thread_cap_is_validated_and_does_not_change_results() {
    let args = ["simulate", "--protocol", "timeopt", "--n", "9", "--trials", "400", "--seed", "5"];
    let bad = Command::new(env!("CARGO_BIN_EXE_popcount")).args(args).env("POPCOUNT_THREADS", "0").output().unwrap();
    assert_eq!(bad.status.code(), Some(1));
    let one = Command::new(env!("CARGO_BIN_EXE_popcount")).args(args).env("POPCOUNT_THREADS", "1").output().unwrap();
    let three = Command::new(env!("CARGO_BIN_EXE_popcount")).args(args).env("POPCOUNT_THREADS", "3").output().unwrap();
    assert!(one.status.success());
    assert_eq!(one.stdout, three.stdout);
}

#[test]
fn oracle_output() {
    let out = popcount(&["oracle", "--which", "flip-closed", "--n", "4"]);
    assert_eq!(String::from_utf8(out.stdout).unwrap(), "64/3 ≈ 21.333333333333333333\n");
    let out = popcount(&["oracle", "--which", "gros-length", "--n", "10"]);
    assert_eq!(String::from_utf8(out.stdout).unwrap(), "1023\n");
}
