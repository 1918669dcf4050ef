use std::path::PathBuf;

use clap::Parser;
use persuasion_cli::{
    execute, write_files, Cli, Output, EXIT_BUDGET, EXIT_OK, EXIT_PRECONDITION, EXIT_VERIFY_FAIL,
    FRONTIER_HEADER,
};
use persuasion_core::scenario::BUILTIN;

fn run(args: &[&str]) -> Output {
    let mut full = vec!["persuade"];
    full.extend_from_slice(args);
    execute(&Cli::try_parse_from(full).expect("arguments parse"))
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("persuade-{}-{name}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    dir
}

fn file<'a>(out: &'a Output, name: &str) -> &'a str {
    &out.files.iter().find(|(n, _)| n == name).expect("file produced").1
}

fn scenario_file(name: &str) -> String {
    format!("{}/../../scenarios/{name}", env!("CARGO_MANIFEST_DIR"))
}

#[test]
fn solve_prints_commitment_value_and_beliefs() {
    let out = run(&["--scenario", "four-action", "solve"]);
    assert_eq!(out.code, EXIT_OK, "{}", out.stderr);
    assert!(out.stdout.contains("commitment value: 5/2 (2.500000)"));
    assert!(out.stdout.contains("posterior (1/2, 1/2) weight 1/2"));
    assert!(out.stdout.contains("posterior (3/4, 1/4) weight 1/2"));
    assert!(file(&out, "solution.json").contains("\"5/2\""));
}

#[test]
fn classify_flags_low_band_and_flip() {
    let out = run(&["--scenario", "three-action", "--grid", "300", "classify"]);
    assert_eq!(out.code, EXIT_OK);
    let mut lines = out.stdout.lines();
    assert_eq!(lines.next(), Some(FRONTIER_HEADER));
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 301);
    for r in &rows {
        let p = persuasion_core::rational::parse_q(r[0]).unwrap();
        let inside = p > persuasion_core::qi(0) && p < persuasion_core::q(2, 3);
        assert_eq!(r[6] == "false", inside, "{r:?}");
    }
    let out = run(&["--scenario", "four-action", "classify"]);
    let flips: Vec<&str> = out
        .stdout
        .lines()
        .skip(1)
        .filter(|l| l.ends_with(",true"))
        .map(|l| l.split(',').next().unwrap())
        .collect();
    assert!(flips.contains(&"3/4"), "{flips:?}");
}

#[test]
fn constructions_round_trip_through_files() {
    let constructions = ["credible", "near-commitment", "full-disclosure", "repeated-test"];
    let mut built = 0;
    for scenario in BUILTIN {
        for which in constructions {
            let out = run(&["--scenario", scenario, "construct", which]);
            if out.code == EXIT_PRECONDITION {
                continue;
            }
            assert_eq!(out.code, EXIT_OK, "{scenario} {which}: {}{}", out.stdout, out.stderr);
            built += 1;
            let dir = scratch(&format!("{scenario}-{which}"));
            write_files(&dir, &out.files).unwrap();
            let profile = dir.join("profile.json");
            let verify = run(&["--scenario", scenario, "verify", "--profile", profile.to_str().unwrap()]);
            assert_eq!(verify.code, EXIT_OK, "{scenario} {which}: {}", verify.stdout);
            assert_eq!(file(&verify, "certificate.json"), file(&out, "certificate.json"));
            let _ = std::fs::remove_dir_all(&dir);
        }
    }
    assert!(built >= 4, "only {built} constructions applied");
}

#[test]
fn verify_rejects_commitment_candidate_with_explanation() {
    let out = run(&["--scenario", &scenario_file("low-prior-commitment.json"), "verify", "--explain"]);
    assert_eq!(out.code, EXIT_VERIFY_FAIL);
    assert!(out.stdout.contains("worst deviation gain: 1/3"), "{}", out.stdout);
    assert!(out.stdout.contains("run full-disclosure"));
}

#[test]
fn shipped_scenarios_match_builtins() {
    for name in ["four-action", "prosecutor", "three-action"] {
        let from_file = run(&["--scenario", &scenario_file(&format!("{name}.json")), "solve"]);
        let builtin = run(&["--scenario", name, "solve"]);
        assert_eq!(from_file, builtin, "{name}");
    }
}

#[test]
fn bounds_report_thresholds() {
    let out = run(&["--scenario", "three-action-low-prior", "bounds"]);
    assert_eq!(out.code, EXIT_OK);
    assert!(out.stdout.contains("n = 37"));
    let out = run(&["--scenario", "three-action", "bounds"]);
    assert_eq!(out.code, EXIT_PRECONDITION);
    assert!(out.stdout.contains("hypothesis fails"));
    assert!(out.stdout.contains("eta: 1/12"));
}

#[test]
fn output_is_deterministic_per_seed() {
    let args = ["--scenario", "four-action-near-commitment", "--seed", "11", "simulate"];
    let mut a_args = args.to_vec();
    a_args.extend(["--construct", "near-commitment", "--samples", "20000"]);
    let a = run(&a_args);
    let b = run(&a_args);
    assert_eq!(a.code, EXIT_OK, "{}{}", a.stdout, a.stderr);
    assert_eq!(a, b);
    let c = run(&["--scenario", "prosecutor", "construct", "credible"]);
    assert_eq!(c, run(&["--scenario", "prosecutor", "construct", "credible"]));
}

#[test]
fn exit_codes_for_bad_input_and_budget() {
    let out = run(&["--scenario", "no-such-scenario", "solve"]);
    assert_eq!(out.code, EXIT_PRECONDITION);
    assert!(out.stderr.contains("built-ins"));
    let out = run(&["--scenario", "four-action", "construct", "credible"]);
    assert_eq!(out.code, EXIT_PRECONDITION);
    let out = run(&["--scenario", "three-action", "--budget", "10", "construct", "repeated-test"]);
    assert_eq!(out.code, EXIT_BUDGET, "{}", out.stderr);
    let dir = scratch("bad");
    std::fs::create_dir_all(&dir).unwrap();
    let bad = dir.join("bad.json");
    std::fs::write(&bad, "{\n  \"name\": \"x\",\n  \"environment\": 3\n}\n").unwrap();
    let out = run(&["--scenario", bad.to_str().unwrap(), "solve"]);
    assert_eq!(out.code, EXIT_PRECONDITION);
    assert!(out.stderr.contains("(line 3)"), "{}", out.stderr);
    let _ = std::fs::remove_dir_all(&dir);
}
